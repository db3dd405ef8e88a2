//! Finite-difference cross-check for every family.
//!
//! The Hamiltonian is discretized with the three-point Laplacian on a uniform
//! grid with Dirichlet ends, and eigenvalues are zeros of the determinant of
//! the tridiagonal matrix `A - E`. They are found with the same root finder
//! as the analytic evaluators, but nothing else is shared.

use crate::error::{Result, SolveError};
use crate::potential::{delta_terms, evaluate_potential, Domain, PotentialSpec, C64};
use crate::rootfind::{
    find_all_roots_with, CharFn, Eval, Rect, RootOptions, RootSearch, ScanOptions,
};

/// `-d²/dx² + V` on `n` interior points of `[-L, L]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TridiagonalOperator {
    pub n: usize,
    pub h: f64,
    pub diag: Vec<C64>,
    /// Constant off-diagonal entry, `-1/h²`.
    pub offdiag: f64,
}

/// Default half-width of the discretized domain.
pub fn default_half_width(spec: &PotentialSpec) -> f64 {
    match (spec.domain(), spec.base()) {
        (Domain::Walls { half_width }, _) => half_width,
        (_, PotentialSpec::DoubleDelta { a, .. }) => (20.0f64).max(a / 2.0 + 10.0),
        (_, PotentialSpec::SquareDoubleWell { b, w, .. }) => b + w + 4.0,
        _ => 10.0,
    }
}

fn nearest_index(x: f64, l: f64, h: f64) -> i64 {
    ((x + l) / h).round() as i64
}

pub fn discretize(spec: &PotentialSpec, l: f64, n: usize) -> Result<TridiagonalOperator> {
    spec.validate()?;
    if n < 3 {
        return Err(SolveError::BadGeometry(
            "need at least 3 grid points".into(),
        ));
    }
    if !(l > 0.0) {
        return Err(SolveError::BadGeometry(format!(
            "half-width {l} must be positive"
        )));
    }
    if let Domain::Walls { half_width } = spec.domain() {
        if (half_width - l).abs() > 1e-12 * half_width {
            return Err(SolveError::BadGeometry(format!(
                "walls at ±{half_width} but grid half-width {l}"
            )));
        }
    }
    let h = 2.0 * l / (n + 1) as f64;
    let x = |i: usize| -l + h * (i + 1) as f64;
    let diag_kinetic = 2.0 / (h * h);
    let mut diag: Vec<C64> = match spec.base() {
        // Cell averages keep the step edges second order.
        PotentialSpec::SquareDoubleWell { b, w, .. } => {
            let (v1, v2) = spec.strengths().expect("piecewise family");
            let overlap =
                |lo: f64, hi: f64, a: f64, c: f64| (hi.min(c) - lo.max(a)).max(0.0) / (hi - lo);
            (0..n)
                .map(|i| {
                    let (lo, hi) = (x(i) - 0.5 * h, x(i) + 0.5 * h);
                    diag_kinetic
                        - v1 * overlap(lo, hi, -b - w, -b)
                        - v2 * overlap(lo, hi, *b, b + w)
                })
                .collect()
        }
        _ => (0..n)
            .map(|i| diag_kinetic + evaluate_potential(spec, x(i)))
            .collect(),
    };
    // Deltas go to the nearest node; mirror partners use mirrored nodes so
    // the discrete operator keeps the parity structure of the continuum one.
    for term in delta_terms(spec) {
        let k = if term.position <= 0.0 {
            nearest_index(term.position, l, h)
        } else {
            (n as i64 + 1) - nearest_index(-term.position, l, h)
        };
        if k < 1 || k > n as i64 {
            return Err(SolveError::BadGeometry(format!(
                "delta at {} is not inside (-{l}, {l}) by one cell",
                term.position
            )));
        }
        diag[(k - 1) as usize] -= term.strength / h;
    }
    Ok(TridiagonalOperator {
        n,
        h,
        diag,
        offdiag: -1.0 / (h * h),
    })
}

impl TridiagonalOperator {
    /// `h^{2n}·det(A - E)` and a matching scale.
    ///
    /// The forward recurrence over the first half and the backward one over
    /// the second half meet in the middle, where the determinant is a discrete
    /// Wronskian `D_m T_{m+1} - D_{m-1} T_{m+2}`. The scale is the product of
    /// two side norms in `(ψ, ψ')`, so the residual stays meaningful when a
    /// node of the eigenvector sits at the meeting point.
    pub fn det_eval(&self, e: C64) -> Eval {
        let n = self.n;
        let h2 = self.h * self.h;
        let m = n / 2;
        let step = |cur: &mut (C64, C64), d: C64| {
            let next = h2 * (d - e) * cur.0 - cur.1;
            *cur = (next, cur.0);
            let size = cur.0.norm().max(cur.1.norm());
            if size > 1e100 {
                // Constant rescaling keeps the value holomorphic in E locally.
                cur.0 *= 1e-100;
                cur.1 *= 1e-100;
            }
        };
        let one = C64::new(1.0, 0.0);
        let mut fwd = (one, C64::new(0.0, 0.0));
        for k in 0..m {
            step(&mut fwd, self.diag[k]);
        }
        let mut bwd = (one, C64::new(0.0, 0.0));
        for k in (m..n).rev() {
            step(&mut bwd, self.diag[k]);
        }
        // With ψ' ≈ (ψ_m - ψ_{m-1})/h the value is -h times the continuum
        // Wronskian, so the scale mirrors the shooting one.
        let h = self.h;
        let side = |(a, b): (C64, C64)| a.norm() + (a - b).norm() / h;
        Eval {
            value: fwd.0 * bwd.0 - fwd.1 * bwd.1,
            scale: h * side(fwd) * side(bwd),
        }
    }
}

/// `det(A - E)` up to the positive constant `h^{2n}`.
pub fn char_det(op: &TridiagonalOperator, e: C64) -> C64 {
    op.det_eval(e).value
}

/// Root options for the oracle.
///
/// A determinant built from thousands of recurrence steps has a rounding floor
/// near `1e-10` in relative residual, so the default `1e-11` is out of reach;
/// roots are then only good to about `1e-8` and are merged more generously.
pub fn root_options() -> RootOptions {
    RootOptions {
        tol_residual: 1e-8,
        dedupe_radius: 1e-6,
        ..RootOptions::default()
    }
}

/// Oracle characteristic function of one spec.
pub struct OracleFn {
    op: TridiagonalOperator,
    hermitian: bool,
}

impl OracleFn {
    pub fn new(spec: &PotentialSpec, l: f64, n: usize) -> Result<Self> {
        Ok(Self {
            op: discretize(spec, l, n)?,
            hermitian: spec.is_hermitian(),
        })
    }

    pub fn operator(&self) -> &TridiagonalOperator {
        &self.op
    }
}

impl CharFn for OracleFn {
    fn eval(&self, e: C64) -> Result<Eval> {
        Ok(self.op.det_eval(e))
    }

    fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    fn real_on_axis(&self) -> bool {
        true
    }
}

pub fn oracle_eigenvalues(
    spec: &PotentialSpec,
    l: f64,
    n: usize,
    rect: &Rect,
    opts: &RootOptions,
    scan: &ScanOptions,
) -> Result<RootSearch> {
    let f = OracleFn::new(spec, l, n)?;
    Ok(find_all_roots_with(&f, rect, opts, scan))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn det_by_recurrence(op: &TridiagonalOperator, e: C64) -> C64 {
        let h2 = op.h * op.h;
        let (mut d0, mut d1) = (C64::new(1.0, 0.0), h2 * (op.diag[0] - e));
        for k in 1..op.n {
            let d2 = h2 * (op.diag[k] - e) * d1 - d0;
            d0 = d1;
            d1 = d2;
        }
        d1
    }

    #[test]
    fn delta_box_construction() {
        let spec = PotentialSpec::DeltaInBox {
            u: 2.0,
            g: 0.0,
            a: 1.0,
            b: 0.5,
        };
        let op = discretize(&spec, 1.0, 3999).unwrap();
        let base = 2.0 / (op.h * op.h);
        let modified: Vec<usize> = (0..op.n)
            .filter(|&i| (op.diag[i].re - base).abs() > 1e-6)
            .collect();
        assert_eq!(modified.len(), 2);
        assert_eq!(modified[0] + modified[1], op.n - 1);
        assert!(matches!(
            discretize(&spec, 2.0, 100),
            Err(SolveError::BadGeometry(_))
        ));
    }

    #[test]
    fn linear_box_is_imaginary_and_odd() {
        let op = discretize(&PotentialSpec::LinearBox { g: 1.0 }, 1.0, 101).unwrap();
        let base = 2.0 / (op.h * op.h);
        for i in 0..op.n {
            assert!((op.diag[i].re - base).abs() < 1e-9);
            assert!((op.diag[i].im + op.diag[op.n - 1 - i].im).abs() < 1e-12);
        }
    }

    #[test]
    fn scarf_bump() {
        let op = discretize(&PotentialSpec::ScarfII { v1: 2.0, v2: 0.0 }, 10.0, 201).unwrap();
        let base = 2.0 / (op.h * op.h);
        assert!((op.diag[100].re - base + 2.0).abs() < 1e-12);
        for i in 0..op.n {
            assert!(op.diag[i].re - base <= 0.0);
            assert_eq!(op.diag[i], op.diag[op.n - 1 - i]);
        }
    }

    #[test]
    fn matches_plain_recurrence() {
        let spec = PotentialSpec::QuadraticPT { g: 0.3 };
        let op = discretize(&spec, 5.0, 60).unwrap();
        for e in [c(1.0, 0.2), c(-2.0, 0.0), c(7.5, -1.0)] {
            let a = char_det(&op, e);
            let b = det_by_recurrence(&op, e);
            assert!((a - b).norm() < 1e-10 * b.norm(), "{a} vs {b}");
        }
    }

    #[test]
    fn free_box_spectrum() {
        let l = 1.0;
        let n = 400;
        let op = discretize(&PotentialSpec::LinearBox { g: 0.0 }, l, n).unwrap();
        let h = op.h;
        for k in 1..=3 {
            // Discrete Laplacian: 2(1 - cos(kπh/2L))/h².
            let e = 2.0 * (1.0 - (k as f64 * PI * h / (2.0 * l)).cos()) / (h * h);
            assert!(op.det_eval(c(e, 0.0)).residual() < 1e-10);
            let cont = (k * k) as f64 * PI * PI / (4.0 * l * l);
            assert!((e - cont).abs() < 1e-3 * cont);
        }
    }

    #[test]
    fn real_and_conjugate_symmetric() {
        let op = discretize(
            &PotentialSpec::DoubleDelta {
                u: 2.0,
                g: 0.7,
                a: 3.0,
            },
            20.0,
            2000,
        )
        .unwrap();
        let v = char_det(&op, c(-0.8, 0.0));
        assert!(v.im.abs() <= 1e-9 * v.norm());
        let a = char_det(&op, c(-0.8, 0.3));
        let b = char_det(&op, c(-0.8, -0.3));
        assert!((a - b.conj()).norm() <= 1e-9 * a.norm());
        let herm = discretize(
            &PotentialSpec::DoubleDelta {
                u: 2.0,
                g: 0.0,
                a: 3.0,
            },
            20.0,
            2000,
        )
        .unwrap();
        assert!(herm.diag.iter().all(|d| d.im == 0.0));
    }

    #[test]
    fn dddp_oracle_roots() {
        let spec = PotentialSpec::DoubleDelta {
            u: 2.0,
            g: 0.0,
            a: 4.0,
        };
        let found = oracle_eigenvalues(
            &spec,
            20.0,
            8000,
            &Rect::new([-4.0, -0.01], [-0.1, 0.1]),
            &root_options(),
            &ScanOptions::default(),
        )
        .unwrap();
        assert_eq!(found.roots.len(), 2);
        // E± ≈ -1 ∓ 2e^{-4}
        assert!((found.roots[0].energy.re + 1.0 + 2.0 * (-4.0f64).exp()).abs() < 5e-3);
        assert!((found.roots[1].energy.re + 1.0 - 2.0 * (-4.0f64).exp()).abs() < 5e-3);
    }
}
