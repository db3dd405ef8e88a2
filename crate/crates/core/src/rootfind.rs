//! Zeros of characteristic functions in a region of the complex energy plane.
//!
//! Seeds come from a sign-change scan along the real axis (Hermitian case) or
//! from local minima of the relative residual on a rectangular grid. Each seed
//! is polished by Newton's method with a finite-difference derivative and a
//! Muller fallback, deflated against already accepted roots, and finally
//! re-polished on the undeflated function.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolveError};
use crate::potential::C64;

/// Value of a characteristic function with the magnitude of its cancelling terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eval {
    pub value: C64,
    pub scale: f64,
}

impl Eval {
    /// `|F| / scale`, a dimensionless residual.
    pub fn residual(&self) -> f64 {
        if self.scale > 0.0 && self.scale.is_finite() {
            self.value.norm() / self.scale
        } else {
            self.value.norm()
        }
    }
}

/// A map `E ↦ F(E)` whose zeros are eigenvalues.
pub trait CharFn: Sync {
    fn eval(&self, e: C64) -> Result<Eval>;

    /// Whether a zero at `e` is a genuine bound state.
    fn is_physical(&self, _e: C64) -> bool {
        true
    }

    /// Real potential: all physical zeros lie on the real axis.
    fn is_hermitian(&self) -> bool {
        false
    }

    /// `F` is real (up to rounding) for real `E`.
    fn real_on_axis(&self) -> bool {
        false
    }
}

impl<T: CharFn + ?Sized> CharFn for &T {
    fn eval(&self, e: C64) -> Result<Eval> {
        (**self).eval(e)
    }
    fn is_physical(&self, e: C64) -> bool {
        (**self).is_physical(e)
    }
    fn is_hermitian(&self) -> bool {
        (**self).is_hermitian()
    }
    fn real_on_axis(&self) -> bool {
        (**self).real_on_axis()
    }
}

impl<T: CharFn + ?Sized> CharFn for Box<T> {
    fn eval(&self, e: C64) -> Result<Eval> {
        (**self).eval(e)
    }
    fn is_physical(&self, e: C64) -> bool {
        (**self).is_physical(e)
    }
    fn is_hermitian(&self) -> bool {
        (**self).is_hermitian()
    }
    fn real_on_axis(&self) -> bool {
        (**self).real_on_axis()
    }
}

/// Adapter for plain closures; the residual is the absolute value `|F|`.
pub struct FnChar<F> {
    f: F,
    hermitian: bool,
}

impl<F: Fn(C64) -> C64 + Sync> FnChar<F> {
    pub fn new(f: F) -> Self {
        Self {
            f,
            hermitian: false,
        }
    }

    pub fn hermitian(f: F) -> Self {
        Self { f, hermitian: true }
    }
}

impl<F: Fn(C64) -> C64 + Sync> CharFn for FnChar<F> {
    fn eval(&self, e: C64) -> Result<Eval> {
        Ok(Eval {
            value: (self.f)(e),
            scale: 1.0,
        })
    }
    fn is_hermitian(&self) -> bool {
        self.hermitian
    }
    fn real_on_axis(&self) -> bool {
        self.hermitian
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RootOptions {
    pub tol_residual: f64,
    pub tol_step: f64,
    pub max_iter: usize,
    pub dedupe_radius: f64,
    pub real_axis_tol: f64,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            tol_residual: 1e-11,
            tol_step: 1e-12,
            max_iter: 100,
            dedupe_radius: 1e-8,
            real_axis_tol: 1e-9,
        }
    }
}

/// Grid densities used to generate seeds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanOptions {
    pub n_real: usize,
    pub nx: usize,
    pub ny: usize,
    /// A grid minimum of `|F|` is a seed if it lies this factor below the
    /// mean of its neighbours.
    pub min_ratio: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            n_real: 2000,
            nx: 200,
            ny: 101,
            min_ratio: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Real,
    ConjugatePairMember,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Real => "real",
            Classification::ConjugatePairMember => "conjugate_pair_member",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub energy: C64,
    pub residual: f64,
    pub classification: Classification,
    pub physical: bool,
    pub iterations: usize,
}

/// Axis-aligned rectangle `[re₀, re₁] × [im₀, im₁]` of the energy plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub re: [f64; 2],
    pub im: [f64; 2],
}

impl Rect {
    pub fn new(re: [f64; 2], im: [f64; 2]) -> Self {
        Self { re, im }
    }

    pub fn contains(&self, e: C64) -> bool {
        e.re >= self.re[0] && e.re <= self.re[1] && e.im >= self.im[0] && e.im <= self.im[1]
    }

    fn straddles_real_axis(&self) -> bool {
        self.im[0] <= 0.0 && self.im[1] >= 0.0
    }
}

/// Outcome of a region search.
#[derive(Clone, Debug, PartialEq)]
pub struct RootSearch {
    pub roots: Vec<Root>,
    /// Seeds whose polish failed and were dropped.
    pub failed_seeds: usize,
}

fn fd_step(e: C64) -> f64 {
    1e-7 * e.norm().max(1.0)
}

struct Deflated<'a, F: CharFn + ?Sized> {
    f: &'a F,
    known: &'a [C64],
}

impl<F: CharFn + ?Sized> Deflated<'_, F> {
    /// Deflated value, a merit that stays large near deflated roots, and the
    /// plain relative residual of the undeflated function.
    fn eval(&self, e: C64) -> Result<(C64, f64, f64)> {
        let ev = self.f.eval(e)?;
        let mut value = ev.value;
        for &k in self.known {
            value /= e - k;
        }
        let scale = if ev.scale > 0.0 && ev.scale.is_finite() {
            ev.scale
        } else {
            1.0
        };
        Ok((value, value.norm() / scale, ev.value.norm() / scale))
    }
}

fn muller_step(pts: &[(C64, C64); 3]) -> Option<C64> {
    let [(x0, f0), (x1, f1), (x2, f2)] = *pts;
    let h1 = x1 - x0;
    let h2 = x2 - x1;
    if h1.norm() == 0.0 || h2.norm() == 0.0 || (h1 + h2).norm() == 0.0 {
        return None;
    }
    let d1 = (f1 - f0) / h1;
    let d2 = (f2 - f1) / h2;
    let a = (d2 - d1) / (h2 + h1);
    let b = a * h2 + d2;
    let disc = (b * b - 4.0 * f2 * a).sqrt();
    let den = if (b + disc).norm() >= (b - disc).norm() {
        b + disc
    } else {
        b - disc
    };
    if den.norm() == 0.0 {
        return None;
    }
    let step = -2.0 * f2 / den;
    step.is_finite().then_some(step)
}

/// Residuals this far above `tol_residual` are accepted once Newton steps
/// have shrunk below `tol_step`: the evaluation has hit its rounding floor.
pub const FLOOR_FACTOR: f64 = 1e3;

struct Converged {
    energy: C64,
    iterations: usize,
    /// Stopped on the step criterion at a rounding floor above `tol_residual`.
    at_floor: bool,
}

/// Newton iteration with backtracking and Muller fallback on the deflated function.
fn iterate<F: CharFn + ?Sized>(
    f: &F,
    known: &[C64],
    seed: C64,
    opts: &RootOptions,
) -> Result<Converged> {
    let g = Deflated { f, known };
    let tol = opts.tol_residual;
    // Zeros of a real potential are real; rounding noise must not pull a
    // real seed off the axis.
    let project = |s: C64| {
        if f.is_hermitian() && seed.im == 0.0 {
            C64::new(s.re, 0.0)
        } else {
            s
        }
    };
    let mut e = seed;
    let (mut val, mut merit, mut plain) = g.eval(e)?;
    let mut hist: Vec<(C64, C64)> = vec![(e, val)];
    let mut stalls = 0;
    for it in 0..opts.max_iter {
        if plain <= tol {
            return Ok(Converged {
                energy: e,
                iterations: it,
                at_floor: false,
            });
        }
        let h = fd_step(e);
        let fp = g.eval(e + h)?.0;
        let fm = g.eval(e - h)?.0;
        let deriv = (fp - fm) / (2.0 * h);
        let newton = project(-val / deriv);

        let mut next: Option<(C64, (C64, f64, f64))> = None;
        if newton.is_finite() {
            let mut step = newton;
            for _ in 0..6 {
                if let Ok(ev) = g.eval(e + step) {
                    if ev.1 < merit {
                        next = Some((e + step, ev));
                        break;
                    }
                }
                step *= 0.5;
            }
        }
        if next.is_none() && hist.len() >= 3 {
            let n = hist.len();
            let pts = [hist[n - 3], hist[n - 2], hist[n - 1]];
            if let Some(step) = muller_step(&pts).map(project) {
                if let Ok(ev) = g.eval(e + step) {
                    if ev.1 < merit {
                        next = Some((e + step, ev));
                    }
                }
            }
        }
        let (e_new, ev) = match next {
            Some(n) => {
                stalls = 0;
                n
            }
            None => {
                stalls += 1;
                if stalls > 3 || !newton.is_finite() {
                    return Err(SolveError::NoConvergence {
                        seed,
                        iterations: it + 1,
                    });
                }
                // Take the undamped Newton step to leave a flat spot.
                let e_try = e + newton;
                (e_try, g.eval(e_try)?)
            }
        };
        let moved = (e_new - e).norm();
        e = e_new;
        (val, merit, plain) = ev;
        hist.push((e, val));
        if moved <= opts.tol_step * e.norm().max(1.0) && plain <= FLOOR_FACTOR * tol {
            return Ok(Converged {
                energy: e,
                iterations: it + 1,
                at_floor: plain > tol,
            });
        }
    }
    Err(SolveError::NoConvergence {
        seed,
        iterations: opts.max_iter,
    })
}

/// Newton restricted to the real axis, for functions real there.
fn refine_real<F: CharFn + ?Sized>(f: &F, x0: f64, opts: &RootOptions) -> Result<(f64, f64)> {
    let mut x = x0;
    let mut res = f.eval(C64::new(x, 0.0))?.residual();
    for _ in 0..20 {
        if res <= opts.tol_residual {
            break;
        }
        let h = fd_step(C64::new(x, 0.0));
        let v = f.eval(C64::new(x, 0.0))?.value;
        let d =
            (f.eval(C64::new(x + h, 0.0))?.value - f.eval(C64::new(x - h, 0.0))?.value) / (2.0 * h);
        let step = -(v / d).re;
        if !step.is_finite() {
            break;
        }
        let r = f.eval(C64::new(x + step, 0.0))?.residual();
        if r >= res {
            break;
        }
        x += step;
        res = r;
    }
    Ok((x, res))
}

fn finish<F: CharFn + ?Sized>(f: &F, c: Converged, opts: &RootOptions) -> Result<Root> {
    let accept = if c.at_floor {
        FLOOR_FACTOR * opts.tol_residual
    } else {
        opts.tol_residual
    };
    let mut e = c.energy;
    let mut residual = f.eval(e)?.residual();
    if e.im.abs() < opts.real_axis_tol {
        let (x, r) = refine_real(f, e.re, opts)?;
        if r <= accept.max(residual) {
            e = C64::new(x, 0.0);
            residual = r;
        }
    }
    if residual > accept {
        return Err(SolveError::NoConvergence {
            seed: e,
            iterations: c.iterations,
        });
    }
    let classification = if e.im.abs() < opts.real_axis_tol {
        Classification::Real
    } else {
        Classification::ConjugatePairMember
    };
    Ok(Root {
        energy: e,
        residual,
        classification,
        physical: f.is_physical(e),
        iterations: c.iterations,
    })
}

/// Polish `seed` to a zero of `f`.
pub fn polish<F: CharFn + ?Sized>(f: &F, seed: C64, opts: &RootOptions) -> Result<Root> {
    let c = iterate(f, &[], seed, opts)?;
    finish(f, c, opts)
}

/// Polish `seed` on `f / Π(E - known)`, then on `f` itself.
pub fn polish_deflated<F: CharFn + ?Sized>(
    f: &F,
    known: &[C64],
    seed: C64,
    opts: &RootOptions,
) -> Result<Root> {
    if known.is_empty() {
        return polish(f, seed, opts);
    }
    let first = iterate(f, known, seed, opts)?;
    let mut c = iterate(f, &[], first.energy, opts)?;
    c.iterations += first.iterations;
    finish(f, c, opts)
}

/// Midpoints of sign changes of `Re F` on an `n`-point uniform grid.
pub fn scan_real<F: CharFn + ?Sized>(f: &F, lo: f64, hi: f64, n: usize) -> Vec<C64> {
    let n = n.max(2);
    let xs: Vec<f64> = (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect();
    let vals: Vec<Option<f64>> = xs
        .iter()
        .map(|&x| f.eval(C64::new(x, 0.0)).ok().map(|ev| ev.value.re))
        .collect();
    let mut seeds = Vec::new();
    for k in 0..n - 1 {
        if let (Some(a), Some(b)) = (vals[k], vals[k + 1]) {
            if a == 0.0 || a.signum() != b.signum() {
                seeds.push(C64::new(0.5 * (xs[k] + xs[k + 1]), 0.0));
            }
        }
    }
    seeds
}

/// Local minima of `|F|` along the real axis. A nearly degenerate pair of
/// zeros inside one grid cell produces no sign change, only a dip.
fn scan_real_minima<F: CharFn + ?Sized>(f: &F, lo: f64, hi: f64, n: usize) -> Vec<C64> {
    let n = n.max(3);
    let xs: Vec<f64> = (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect();
    let r: Vec<f64> = xs
        .iter()
        .map(|&x| {
            f.eval(C64::new(x, 0.0))
                .map(|ev| ev.value.norm())
                .unwrap_or(f64::INFINITY)
        })
        .collect();
    (1..n - 1)
        .filter(|&k| r[k] < r[k - 1] && r[k] < r[k + 1])
        .map(|k| C64::new(xs[k], 0.0))
        .collect()
}

/// Grid minima of `|F|`, mirrored under conjugation.
///
/// A holomorphic function has no interior minima of its modulus except at
/// zeros, so every discrete local minimum is a candidate. The absolute value
/// is used because the relative residual saturates near one away from a zero
/// and hides the basin on a coarse grid.
pub fn scan_complex<F: CharFn + ?Sized>(
    f: &F,
    rect: &Rect,
    nx: usize,
    ny: usize,
    min_ratio: f64,
) -> Vec<C64> {
    let nx = nx.max(3);
    let ny = ny.max(3);
    let at = |i: usize, j: usize| {
        C64::new(
            rect.re[0] + (rect.re[1] - rect.re[0]) * i as f64 / (nx - 1) as f64,
            rect.im[0] + (rect.im[1] - rect.im[0]) * j as f64 / (ny - 1) as f64,
        )
    };
    let mut grid = vec![f64::INFINITY; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            if let Ok(ev) = f.eval(at(i, j)) {
                let r = ev.value.norm();
                if r.is_finite() {
                    grid[j * nx + i] = r;
                }
            }
        }
    }
    let mut seeds = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let r = grid[j * nx + i];
            if !r.is_finite() {
                continue;
            }
            let mut is_min = true;
            let mut sum = 0.0;
            let mut count = 0;
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if ii < 0 || jj < 0 || ii >= nx as i64 || jj >= ny as i64 {
                        continue;
                    }
                    let n = grid[jj as usize * nx + ii as usize];
                    if n < r {
                        is_min = false;
                    }
                    if n.is_finite() {
                        sum += n;
                        count += 1;
                    }
                }
            }
            if is_min && count > 0 && r * min_ratio <= sum / count as f64 {
                seeds.push(at(i, j));
            }
        }
    }
    let mirrored: Vec<C64> = seeds.iter().map(|s| s.conj()).collect();
    for m in mirrored {
        if !seeds.iter().any(|s| (s - m).norm() < 1e-14) {
            seeds.push(m);
        }
    }
    seeds
}

/// Seeds for a region search.
pub fn region_seeds<F: CharFn + ?Sized>(f: &F, rect: &Rect, scan: &ScanOptions) -> Vec<C64> {
    let mut seeds = Vec::new();
    if rect.straddles_real_axis() && f.real_on_axis() {
        seeds.extend(scan_real(f, rect.re[0], rect.re[1], scan.n_real));
        seeds.extend(scan_real_minima(f, rect.re[0], rect.re[1], scan.n_real));
    }
    if !f.is_hermitian() {
        seeds.extend(scan_complex(f, rect, scan.nx, scan.ny, scan.min_ratio));
    }
    seeds
}

fn is_known(known: &[C64], e: C64, radius: f64) -> bool {
    known.iter().any(|k| (k - e).norm() <= radius)
}

/// Polish an explicit seed list with deflation and deduplication.
pub fn roots_from_seeds<F: CharFn + ?Sized>(
    f: &F,
    rect: &Rect,
    seeds: &[C64],
    opts: &RootOptions,
) -> RootSearch {
    let mut roots: Vec<Root> = Vec::new();
    let mut known: Vec<C64> = Vec::new();
    let mut failed = 0;
    let accept = |r: Root, roots: &mut Vec<Root>, known: &mut Vec<C64>| -> bool {
        if is_known(known, r.energy, opts.dedupe_radius) {
            return false;
        }
        known.push(r.energy);
        roots.push(r);
        true
    };
    for &seed in seeds {
        // A seed may sit between a nearly degenerate pair; retry it once after
        // each success so the deflated function exposes the partner.
        let mut tries = 0;
        loop {
            tries += 1;
            match polish_deflated(f, &known, seed, opts) {
                Ok(r) => {
                    if !accept(r, &mut roots, &mut known) || tries >= 3 {
                        break;
                    }
                }
                Err(_) => {
                    if tries == 1 {
                        failed += 1;
                    }
                    break;
                }
            }
        }
    }
    // PT closure: the conjugate of every complex zero is a zero.
    if !f.is_hermitian() && f.real_on_axis() {
        let complex: Vec<C64> = roots
            .iter()
            .filter(|r| r.classification == Classification::ConjugatePairMember)
            .map(|r| r.energy)
            .collect();
        for e in complex {
            if !is_known(&known, e.conj(), opts.dedupe_radius) {
                if let Ok(r) = polish(f, e.conj(), opts) {
                    accept(r, &mut roots, &mut known);
                }
            }
        }
    }
    let margin = 1e-9;
    let inside = Rect::new(
        [rect.re[0] - margin, rect.re[1] + margin],
        [rect.im[0] - margin, rect.im[1] + margin],
    );
    roots.retain(|r| r.physical && inside.contains(r.energy));
    sort_roots(&mut roots);
    RootSearch {
        roots,
        failed_seeds: failed,
    }
}

pub fn sort_roots(roots: &mut [Root]) {
    roots.sort_by(|a, b| {
        a.energy
            .re
            .total_cmp(&b.energy.re)
            .then(a.energy.im.total_cmp(&b.energy.im))
    });
}

/// All physical zeros of `f` inside `rect`, sorted by `Re E`.
pub fn find_all_roots<F: CharFn + ?Sized>(f: &F, rect: &Rect, opts: &RootOptions) -> RootSearch {
    find_all_roots_with(f, rect, opts, &ScanOptions::default())
}

pub fn find_all_roots_with<F: CharFn + ?Sized>(
    f: &F,
    rect: &Rect,
    opts: &RootOptions,
    scan: &ScanOptions,
) -> RootSearch {
    let seeds = region_seeds(f, rect, scan);
    roots_from_seeds(f, rect, &seeds, opts)
}

/// One-parameter family of characteristic functions `λ ↦ F(·; λ)`.
pub trait ParamFamily: Sync {
    fn at(&self, lambda: f64) -> Result<Box<dyn CharFn + '_>>;
}

/// An exceptional point: `F = ∂F/∂E = 0` at a real parameter value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EPResult {
    pub param_star: f64,
    pub energy_star: C64,
    pub residual_f: f64,
    pub residual_df: f64,
    pub splitting_exponent: f64,
}

/// Five-point central derivative `∂F/∂E`, with the magnitude of `F` used as scale.
fn d_energy(f: &dyn CharFn, e: C64) -> Result<(C64, Eval)> {
    let h = 1e-3 * e.norm().max(1.0);
    let center = f.eval(e)?;
    let f1 = f.eval(e + h)?.value;
    let f_1 = f.eval(e - h)?.value;
    let f2 = f.eval(e + 2.0 * h)?.value;
    let f_2 = f.eval(e - 2.0 * h)?.value;
    Ok(((8.0 * (f1 - f_1) - (f2 - f_2)) / (12.0 * h), center))
}

fn d2_energy(f: &dyn CharFn, e: C64) -> Result<C64> {
    let h = 1e-3 * e.norm().max(1.0);
    let f0 = f.eval(e)?.value;
    let f1 = f.eval(e + h)?.value;
    let f_1 = f.eval(e - h)?.value;
    let f2 = f.eval(e + 2.0 * h)?.value;
    let f_2 = f.eval(e - 2.0 * h)?.value;
    Ok((-(f2 + f_2) + 16.0 * (f1 + f_1) - 30.0 * f0) / (12.0 * h * h))
}

/// Residual vector `[F/S, w·F_E/S]` split into real components.
fn ep_residual(fam: &dyn ParamFamily, x: [f64; 3], scale: Option<f64>) -> Result<([f64; 4], f64)> {
    let e = C64::new(x[0], x[1]);
    let f = fam.at(x[2])?;
    let (fe, center) = d_energy(f.as_ref(), e)?;
    let s = scale.unwrap_or(if center.scale > 0.0 {
        center.scale
    } else {
        1.0
    });
    let w = e.norm().max(1.0);
    let a = center.value / s;
    let b = fe * w / s;
    Ok(([a.re, a.im, b.re, b.im], s))
}

fn solve3(m: [[f64; 3]; 3], rhs: [f64; 3]) -> Option<[f64; 3]> {
    let mut a = [
        [m[0][0], m[0][1], m[0][2], rhs[0]],
        [m[1][0], m[1][1], m[1][2], rhs[1]],
        [m[2][0], m[2][1], m[2][2], rhs[2]],
    ];
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        for row in 0..3 {
            if row != col {
                let factor = a[row][col] / a[col][col];
                for k in col..4 {
                    a[row][k] -= factor * a[col][k];
                }
            }
        }
    }
    Some([a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]])
}

/// Locate an exceptional point from nearby seeds, then measure how the pair
/// splits around it.
pub fn find_ep(
    fam: &dyn ParamFamily,
    seed_e: C64,
    seed_lambda: f64,
    opts: &RootOptions,
) -> Result<EPResult> {
    if fam.at(seed_lambda)?.is_hermitian() {
        return Err(SolveError::BadBracket(
            "real potential: levels cannot coalesce".into(),
        ));
    }
    let mut x = [seed_e.re, seed_e.im, seed_lambda];
    let mut converged = false;
    for _ in 0..60 {
        let (r, s) = ep_residual(fam, x, None)?;
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-13 {
            converged = true;
            break;
        }
        let steps = [
            1e-6 * C64::new(x[0], x[1]).norm().max(1.0),
            1e-6 * C64::new(x[0], x[1]).norm().max(1.0),
            1e-6 * x[2].abs().max(1.0),
        ];
        let mut jac = [[0.0; 3]; 4];
        for k in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += steps[k];
            xm[k] -= steps[k];
            let (rp, _) = ep_residual(fam, xp, Some(s))?;
            let (rm, _) = ep_residual(fam, xm, Some(s))?;
            for i in 0..4 {
                jac[i][k] = (rp[i] - rm[i]) / (2.0 * steps[k]);
            }
        }
        // Gauss–Newton normal equations, lightly damped.
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for a in 0..3 {
            for b in 0..3 {
                jtj[a][b] = (0..4).map(|i| jac[i][a] * jac[i][b]).sum();
            }
            jtr[a] = -(0..4).map(|i| jac[i][a] * r[i]).sum::<f64>();
        }
        let trace = (jtj[0][0] + jtj[1][1] + jtj[2][2]) / 3.0;
        for (a, row) in jtj.iter_mut().enumerate() {
            row[a] += 1e-14 * trace;
        }
        let Some(mut dx) = solve3(jtj, jtr) else {
            break;
        };
        // Backtrack on the residual norm.
        let mut accepted = false;
        for _ in 0..8 {
            let xn = [x[0] + dx[0], x[1] + dx[1], x[2] + dx[2]];
            if let Ok((rn, _)) = ep_residual(fam, xn, Some(s)) {
                let nn = rn.iter().map(|v| v * v).sum::<f64>().sqrt();
                if nn < norm {
                    let small = dx
                        .iter()
                        .zip(&x)
                        .all(|(d, v)| d.abs() <= 1e-14 * v.abs().max(1.0));
                    x = xn;
                    accepted = true;
                    if small {
                        converged = true;
                    }
                    break;
                }
            }
            for d in dx.iter_mut() {
                *d *= 0.5;
            }
        }
        if !accepted || converged {
            converged = converged || norm < 1e-9;
            break;
        }
    }
    let (r, _) = ep_residual(fam, x, None)?;
    let residual_f = r[0].hypot(r[1]);
    let residual_df = r[2].hypot(r[3]);
    if !converged || residual_f > 1e-9 || residual_df > 1e-9 {
        return Err(SolveError::NoConvergence {
            seed: seed_e,
            iterations: 60,
        });
    }
    let energy_star = C64::new(x[0], x[1]);
    let param_star = x[2];
    let splitting_exponent = splitting_exponent(fam, energy_star, param_star, opts)?;
    Ok(EPResult {
        param_star,
        energy_star,
        residual_f,
        residual_df,
        splitting_exponent,
    })
}

/// The two roots emerging from the branch point at `λ = λ* + offset`.
pub fn split_pair(
    fam: &dyn ParamFamily,
    energy_star: C64,
    param_star: f64,
    offset: f64,
    opts: &RootOptions,
) -> Result<(C64, C64)> {
    let f_star = fam.at(param_star)?;
    let fee = d2_energy(f_star.as_ref(), energy_star)?;
    let hl = 1e-5 * param_star.abs().max(1.0);
    let fl = (fam.at(param_star + hl)?.eval(energy_star)?.value
        - fam.at(param_star - hl)?.eval(energy_star)?.value)
        / (2.0 * hl);
    // F ≈ F_λ δλ + ½ F_EE (E - E*)²
    let d = (-2.0 * fl * offset / fee).sqrt();
    let f = fam.at(param_star + offset)?;
    let first = polish(f.as_ref(), energy_star + d, opts)?;
    let second = polish_deflated(f.as_ref(), &[first.energy], energy_star - d, opts)?;
    Ok((first.energy, second.energy))
}

fn splitting_exponent(
    fam: &dyn ParamFamily,
    energy_star: C64,
    param_star: f64,
    opts: &RootOptions,
) -> Result<f64> {
    let mut pts = Vec::new();
    for side in [-1.0, 1.0] {
        for k in 0..5 {
            let delta = 1e-4 * 10f64.powf(k as f64 / 4.0);
            if let Ok((a, b)) = split_pair(fam, energy_star, param_star, side * delta, opts) {
                let gap = (a - b).norm();
                if gap > 0.0 && gap.is_finite() {
                    pts.push((delta.ln(), gap.ln()));
                }
            }
        }
    }
    if pts.len() < 4 {
        return Err(SolveError::NoConvergence {
            seed: energy_star,
            iterations: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}
