//! Shooting solver for the smooth potentials.
//!
//! Both sides are integrated inward with fixed-step RK4 on `(ψ, ψ')` and the
//! Wronskian at the match point is the characteristic function. Potential
//! samples at the RK4 nodes do not depend on `E` and are cached per spec.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolveError};
use crate::potential::{evaluate_potential, Domain, PotentialSpec, Solver, C64};
use crate::rootfind::{
    find_all_roots_with, CharFn, Eval, Rect, RootOptions, RootSearch, ScanOptions,
};

const OVERFLOW: f64 = 1e150;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShootingOptions {
    /// Truncation half-width for unbounded domains; ignored between walls.
    #[serde(rename = "L")]
    pub l: f64,
    pub n_steps: usize,
    pub match_point: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            l: 10.0,
            n_steps: 4000,
            match_point: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Wronskian `ψ_L ψ_R' - ψ_L' ψ_R` at the match point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mismatch {
    pub value: C64,
    pub scale: f64,
}

struct Path {
    h: f64,
    /// `V` at `start + k·h/2`, `k = 0..=2n`.
    v: Vec<C64>,
}

/// The shooting mismatch of one spec as a characteristic function.
pub struct ShootingFn {
    spec: PotentialSpec,
    walls: bool,
    left: Path,
    right: Path,
}

impl ShootingFn {
    pub fn new(spec: &PotentialSpec, opts: &ShootingOptions) -> Result<Self> {
        spec.validate()?;
        if spec.solver() != Solver::Shooting {
            return Err(SolveError::Unsupported(format!(
                "shooting for {}",
                spec.base().family_name()
            )));
        }
        if !spec.is_confining() {
            return Err(SolveError::Unconfined);
        }
        if opts.n_steps < 2 {
            return Err(SolveError::InvalidSpec("n_steps must be at least 2".into()));
        }
        let (l, walls) = match spec.domain() {
            Domain::Walls { half_width } => (half_width, true),
            Domain::Unbounded => (opts.l, false),
        };
        if !(l > 0.0) || opts.match_point.abs() >= l {
            return Err(SolveError::BadGeometry(format!(
                "match point {} outside (-{l}, {l})",
                opts.match_point
            )));
        }
        let path = |start: f64| {
            let h = (opts.match_point - start) / opts.n_steps as f64;
            let v = (0..=2 * opts.n_steps)
                .map(|k| evaluate_potential(spec, start + 0.5 * h * k as f64))
                .collect();
            Path { h, v }
        };
        Ok(Self {
            spec: spec.clone(),
            walls,
            left: path(-l),
            right: path(l),
        })
    }

    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    fn n_steps(&self) -> usize {
        (self.left.v.len() - 1) / 2
    }

    /// `(ψ, ψ')` at the match point, integrated from one boundary.
    pub fn integrate(&self, e: C64, side: Side) -> Result<(C64, C64)> {
        let path = match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        };
        let (mut psi, mut dpsi) = if self.walls {
            (C64::new(0.0, 0.0), C64::new(1.0, 0.0))
        } else {
            // Decaying WKB tail: ψ ∝ exp(∓∫κ) with Re κ > 0. The amplitude
            // exp(-κ·L) cancels the leading E-dependence of the inward growth,
            // which otherwise dominates dW/dE and throws Newton off.
            let kappa = (path.v[0] - e).sqrt();
            let kappa = if kappa.re < 0.0 { -kappa } else { kappa };
            let amp = (-kappa * (path.h * self.n_steps() as f64).abs()).exp();
            match side {
                Side::Left => (amp, amp * kappa),
                Side::Right => (amp, -amp * kappa),
            }
        };
        let h = path.h;
        let n = (path.v.len() - 1) / 2;
        for k in 0..n {
            let q0 = path.v[2 * k] - e;
            let q1 = path.v[2 * k + 1] - e;
            let q2 = path.v[2 * k + 2] - e;
            // y' = (ψ', (V - E) ψ)
            let k1 = (dpsi, q0 * psi);
            let p2 = psi + 0.5 * h * k1.0;
            let d2 = dpsi + 0.5 * h * k1.1;
            let k2 = (d2, q1 * p2);
            let p3 = psi + 0.5 * h * k2.0;
            let d3 = dpsi + 0.5 * h * k2.1;
            let k3 = (d3, q1 * p3);
            let p4 = psi + h * k3.0;
            let d4 = dpsi + h * k3.1;
            let k4 = (d4, q2 * p4);
            psi += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            dpsi += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            let size = psi.norm().max(dpsi.norm());
            if size > OVERFLOW {
                // A constant factor keeps W holomorphic in E.
                psi *= 1.0 / OVERFLOW;
                dpsi *= 1.0 / OVERFLOW;
            }
            if !size.is_finite() {
                return Err(SolveError::Overflow);
            }
        }
        if !(psi.is_finite() && dpsi.is_finite()) {
            return Err(SolveError::Overflow);
        }
        Ok((psi, dpsi))
    }

    pub fn mismatch(&self, e: C64) -> Result<Mismatch> {
        let (pl, dl) = self.integrate(e, Side::Left)?;
        let (pr, dr) = self.integrate(e, Side::Right)?;
        // Product of the side norms bounds |W| and stays finite when both
        // Wronskian terms vanish together (even states at x = 0).
        Ok(Mismatch {
            value: pl * dr - dl * pr,
            scale: (pl.norm() + dl.norm()) * (pr.norm() + dr.norm()),
        })
    }
}

impl CharFn for ShootingFn {
    fn eval(&self, e: C64) -> Result<Eval> {
        let m = self.mismatch(e)?;
        Ok(Eval {
            value: m.value,
            scale: m.scale,
        })
    }

    fn is_hermitian(&self) -> bool {
        self.spec.is_hermitian()
    }

    fn real_on_axis(&self) -> bool {
        true
    }
}

pub fn integrate_side(
    spec: &PotentialSpec,
    e: C64,
    side: Side,
    opts: &ShootingOptions,
) -> Result<(C64, C64)> {
    ShootingFn::new(spec, opts)?.integrate(e, side)
}

pub fn mismatch(spec: &PotentialSpec, e: C64, opts: &ShootingOptions) -> Result<Mismatch> {
    ShootingFn::new(spec, opts)?.mismatch(e)
}

/// Eigenvalues of a smooth spec inside `rect`.
pub fn eigenvalues_shooting(
    spec: &PotentialSpec,
    rect: &Rect,
    opts: &ShootingOptions,
    root_opts: &RootOptions,
    scan: &ScanOptions,
) -> Result<RootSearch> {
    let f = ShootingFn::new(spec, opts)?;
    Ok(find_all_roots_with(&f, rect, root_opts, scan))
}
