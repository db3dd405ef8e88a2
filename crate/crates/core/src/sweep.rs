//! Parameter continuation of eigenvalue branches.
//!
//! Each branch is carried from one grid value to the next by polishing a
//! linear prediction. A step whose result jumps further than the recent
//! motion allows is bisected. Real predictions of a non-Hermitian family
//! get a small imaginary kick so that Newton can leave the axis once a pair
//! has coalesced, with opposite kicks for the two members of a doublet.

use serde::{Deserialize, Serialize};

use crate::characteristic;
use crate::error::{Result, SolveError};
use crate::potential::{Axis, PotentialSpec, C64};
use crate::rootfind::{
    find_all_roots_with, find_ep, polish, polish_deflated, CharFn, EPResult, ParamFamily, Rect,
    Root, RootOptions, ScanOptions,
};
use crate::shooting::ShootingOptions;

const MAX_BISECTIONS: u32 = 8;
const RESCAN_EVERY: usize = 10;

/// What to sweep and where to look for the starting spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    pub spec_template: PotentialSpec,
    pub axis: Axis,
    pub grid: Vec<f64>,
    /// Search rectangle for the first grid point and the periodic re-scans.
    pub region: Rect,
    pub n_levels: usize,
    #[serde(default)]
    pub root: RootOptions,
    #[serde(default)]
    pub scan: ScanOptions,
    #[serde(default)]
    pub shooting: ShootingOptions,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SolveError::InvalidSpec(m));
        if self.grid.len() < 2 {
            return bad("sweep grid needs at least two values".into());
        }
        if self.grid.iter().any(|x| !x.is_finite()) {
            return bad("sweep grid has a non-finite value".into());
        }
        let up = self.grid[1] > self.grid[0];
        if !self
            .grid
            .windows(2)
            .all(|w| if up { w[1] > w[0] } else { w[1] < w[0] })
        {
            return bad("sweep grid must be strictly monotone".into());
        }
        if self.n_levels < 2 {
            return bad("n_levels must be at least 2".into());
        }
        self.spec_template.param(self.axis)?;
        self.spec_template
            .with_param(self.axis, self.grid[0])?
            .validate()
    }

    pub fn family(&self) -> SpecFamily {
        SpecFamily {
            template: self.spec_template.clone(),
            axis: self.axis,
            shooting: self.shooting,
        }
    }
}

/// `λ ↦ F(·; spec with axis = λ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpecFamily {
    pub template: PotentialSpec,
    pub axis: Axis,
    pub shooting: ShootingOptions,
}

impl SpecFamily {
    pub fn spec_at(&self, lambda: f64) -> Result<PotentialSpec> {
        let spec = self.template.with_param(self.axis, lambda)?;
        spec.validate()?;
        Ok(spec)
    }
}

impl ParamFamily for SpecFamily {
    fn at(&self, lambda: f64) -> Result<Box<dyn CharFn + '_>> {
        characteristic(&self.spec_at(lambda)?, &self.shooting)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub lambda: f64,
    pub energy: C64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: usize,
    pub points: Vec<BranchPoint>,
    /// Conjugate partner branch, if the two ever form a complex pair.
    pub pair_id: Option<usize>,
    /// Parameter at which continuation failed and the branch was truncated.
    pub lost_at: Option<f64>,
}

impl Branch {
    pub fn at(&self, lambda: f64) -> Option<&BranchPoint> {
        self.points
            .iter()
            .find(|p| (p.lambda - lambda).abs() <= 1e-12 * lambda.abs().max(1.0))
    }
}

/// Label of one root in a conjugate matching.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairLabel {
    Real,
    Pair(usize),
    Unpaired,
}

/// Greedy nearest matching of complex energies to conjugate partners.
///
/// Energies within `real_tol` of the axis are real and never paired; two
/// complex energies pair if `|E_i - conj E_j| ≤ match_tol·max(1, |E_i|)`.
pub fn pair_conjugates(energies: &[C64], real_tol: f64, match_tol: f64) -> Vec<PairLabel> {
    let n = energies.len();
    let mut labels: Vec<PairLabel> = energies
        .iter()
        .map(|e| {
            if e.im.abs() < real_tol {
                PairLabel::Real
            } else {
                PairLabel::Unpaired
            }
        })
        .collect();
    let mut cands = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (energies[i], energies[j]);
            if labels[i] == PairLabel::Real || labels[j] == PairLabel::Real || a.im * b.im >= 0.0 {
                continue;
            }
            let d = (a - b.conj()).norm();
            if d <= match_tol * a.norm().max(1.0) {
                cands.push((d, i, j));
            }
        }
    }
    cands.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    for (_, i, j) in cands {
        if labels[i] == PairLabel::Unpaired && labels[j] == PairLabel::Unpaired {
            labels[i] = PairLabel::Pair(j);
            labels[j] = PairLabel::Pair(i);
        }
    }
    labels
}

/// Tolerance for calling two branch energies conjugate partners.
pub const PAIR_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
struct Track {
    id: usize,
    lambda: f64,
    energy: C64,
    residual: f64,
    prev: Option<(f64, C64)>,
    /// Largest `|dE/dλ|` seen so far along the track.
    max_rate: f64,
}

impl Track {
    fn predict(&self, lambda: f64) -> C64 {
        match self.prev {
            Some((l0, e0)) if l0 != self.lambda => {
                self.energy + (self.energy - e0) * ((lambda - self.lambda) / (self.lambda - l0))
            }
            _ => self.energy,
        }
    }

    fn last_motion(&self, lambda: f64) -> Option<f64> {
        self.prev.and_then(|(l0, e0)| {
            (l0 != self.lambda).then(|| {
                (self.energy - e0).norm() * ((lambda - self.lambda) / (self.lambda - l0)).abs()
            })
        })
    }
}

struct Continuation<'a> {
    fam: &'a SpecFamily,
    opts: RootOptions,
    tracks: Vec<Track>,
    /// Roots seen in the last region search that no branch follows.
    untracked: Vec<C64>,
    lost: Vec<(usize, f64)>,
}

fn floor_motion(e: C64) -> f64 {
    1e-6 * e.norm().max(1.0)
}

impl Continuation<'_> {
    fn bound(&self, t: &Track, lambda: f64) -> f64 {
        let floor = floor_motion(t.energy);
        match t.last_motion(lambda) {
            // The secant of the last step underestimates the motion just past
            // a turning point, so the steepest slope seen so far also counts.
            Some(m) => (4.0 * m.max(t.max_rate * (lambda - t.lambda).abs())).max(floor),
            None => {
                let gap = self
                    .untracked
                    .iter()
                    .map(|u| (u - t.energy).norm())
                    .fold(f64::INFINITY, f64::min);
                (0.25 * gap).max(floor)
            }
        }
    }

    /// Seed for track `k`: the prediction, pushed off the real axis for a
    /// non-Hermitian family. Two real neighbours get opposite kicks, so after
    /// coalescence they land on opposite members of the pair.
    fn seed(&self, k: usize, lambda: f64, hermitian: bool, preds: &[C64]) -> C64 {
        let p = preds[k];
        if hermitian || p.im.abs() >= self.opts.real_axis_tol {
            return p;
        }
        let t = &self.tracks[k];
        let eps = t.last_motion(lambda).unwrap_or(0.0).max(floor_motion(p));
        let partner = (0..preds.len())
            .filter(|&j| j != k && preds[j].im.abs() < self.opts.real_axis_tol)
            .min_by(|&i, &j| {
                (preds[i] - p)
                    .norm()
                    .total_cmp(&(preds[j] - p).norm())
                    .then(i.cmp(&j))
            });
        let up = match partner {
            Some(j) => (p.re, k) < (preds[j].re, j),
            None => true,
        };
        C64::new(p.re, if up { eps } else { -eps })
    }

    /// Polish every track at `lambda` and match results to predictions.
    fn try_step(&self, lambda: f64) -> Vec<Option<Root>> {
        let n = self.tracks.len();
        let f = match self.fam.at(lambda) {
            Ok(f) => f,
            Err(_) => return vec![None; n],
        };
        let hermitian = f.is_hermitian();
        let preds: Vec<C64> = self.tracks.iter().map(|t| t.predict(lambda)).collect();
        let mut found: Vec<Root> = Vec::new();
        for k in 0..n {
            let seed = self.seed(k, lambda, hermitian, &preds);
            let known: Vec<C64> = found.iter().map(|r| r.energy).collect();
            if let Ok(r) = polish_deflated(f.as_ref(), &known, seed, &self.opts) {
                let dup = known
                    .iter()
                    .any(|e| (e - r.energy).norm() <= self.opts.dedupe_radius);
                if r.physical && !dup {
                    found.push(r);
                }
            }
        }
        // Greedy matching on distance to the predictions.
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (k, p) in preds.iter().enumerate() {
            for (j, r) in found.iter().enumerate() {
                pairs.push(((r.energy - p).norm(), k, j));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut out: Vec<Option<Root>> = vec![None; n];
        let mut used = vec![false; found.len()];
        for (d, k, j) in pairs {
            if out[k].is_some() || used[j] {
                continue;
            }
            if d <= self.bound(&self.tracks[k], lambda) {
                out[k] = Some(found[j]);
                used[j] = true;
            }
        }
        out
    }

    fn apply(&mut self, lambda: f64, results: Vec<Option<Root>>) {
        let mut kept = Vec::new();
        for (mut t, r) in std::mem::take(&mut self.tracks).into_iter().zip(results) {
            match r {
                Some(r) => {
                    let rate = (r.energy - t.energy).norm() / (lambda - t.lambda).abs();
                    t.max_rate = t.max_rate.max(rate);
                    t.prev = Some((t.lambda, t.energy));
                    t.lambda = lambda;
                    t.energy = r.energy;
                    t.residual = r.residual;
                    kept.push(t);
                }
                None => self.lost.push((t.id, lambda)),
            }
        }
        self.tracks = kept;
    }

    fn advance(&mut self, lambda: f64, depth: u32) {
        if self.tracks.is_empty() {
            return;
        }
        let results = self.try_step(lambda);
        if results.iter().all(Option::is_some) || depth >= MAX_BISECTIONS {
            self.apply(lambda, results);
            return;
        }
        let mid = 0.5 * (self.tracks[0].lambda + lambda);
        self.advance(mid, depth + 1);
        self.advance(lambda, depth + 1);
    }
}

fn close_to_any(e: C64, others: impl IntoIterator<Item = C64>, radius: f64) -> bool {
    others.into_iter().any(|o| (o - e).norm() <= radius)
}

/// Track the lowest `n_levels` branches across the plan's grid.
///
/// Branches that cannot be continued are truncated and carry `lost_at`;
/// the call only fails when the first grid point has no eigenvalue at all.
pub fn run_sweep(plan: &SweepPlan) -> Result<Vec<Branch>> {
    plan.validate()?;
    let fam = plan.family();
    let lambda0 = plan.grid[0];
    let first = {
        let f = fam.at(lambda0)?;
        find_all_roots_with(f.as_ref(), &plan.region, &plan.root, &plan.scan)
    };
    if first.roots.is_empty() {
        return Err(SolveError::NoConvergence {
            seed: C64::new(plan.region.re[0], 0.0),
            iterations: 0,
        });
    }
    let mut branches: Vec<Branch> = Vec::new();
    let mut cont = Continuation {
        fam: &fam,
        opts: plan.root,
        tracks: Vec::new(),
        untracked: Vec::new(),
        lost: Vec::new(),
    };
    let adopt =
        |roots: &[Root], lambda: f64, cont: &mut Continuation, branches: &mut Vec<Branch>| {
            let radius = 1e-6;
            let mut untracked = Vec::new();
            for r in roots {
                let tracked = close_to_any(
                    r.energy,
                    cont.tracks.iter().map(|t| t.energy),
                    radius * r.energy.norm().max(1.0),
                );
                if tracked {
                    continue;
                }
                if cont.tracks.len() < plan.n_levels {
                    let id = branches.len();
                    branches.push(Branch {
                        id,
                        points: vec![BranchPoint {
                            lambda,
                            energy: r.energy,
                            residual: r.residual,
                        }],
                        pair_id: None,
                        lost_at: None,
                    });
                    cont.tracks.push(Track {
                        id,
                        lambda,
                        energy: r.energy,
                        residual: r.residual,
                        prev: None,
                        max_rate: 0.0,
                    });
                } else {
                    untracked.push(r.energy);
                }
            }
            cont.untracked = untracked;
        };
    adopt(&first.roots, lambda0, &mut cont, &mut branches);

    for (step, &lambda) in plan.grid.iter().enumerate().skip(1) {
        cont.advance(lambda, 0);
        for (id, at) in cont.lost.drain(..) {
            branches[id].lost_at = Some(at);
        }
        for t in &cont.tracks {
            branches[t.id].points.push(BranchPoint {
                lambda,
                energy: t.energy,
                residual: t.residual,
            });
        }
        // Missing levels are looked for at every step; a level entering
        // the region must be caught before it reaches a transition.
        if step % RESCAN_EVERY == 0 || cont.tracks.len() < plan.n_levels {
            let found = fam
                .at(lambda)
                .map(|f| find_all_roots_with(f.as_ref(), &plan.region, &plan.root, &plan.scan));
            if let Ok(found) = found {
                adopt(&found.roots, lambda, &mut cont, &mut branches);
            }
        }
    }
    // Number branches by their final energies so that ids follow the level
    // order wherever a branch entered the sweep.
    branches.sort_by(|a, b| {
        let (ea, eb) = (
            a.points[a.points.len() - 1].energy,
            b.points[b.points.len() - 1].energy,
        );
        ea.re
            .total_cmp(&eb.re)
            .then(ea.im.total_cmp(&eb.im))
            .then(a.id.cmp(&b.id))
    });
    for (k, b) in branches.iter_mut().enumerate() {
        b.id = k;
    }
    assign_pairs(&mut branches, &plan.grid, plan.root.real_axis_tol);
    Ok(branches)
}

fn assign_pairs(branches: &mut [Branch], grid: &[f64], real_tol: f64) {
    for &lambda in grid {
        let present: Vec<(usize, C64)> = branches
            .iter()
            .filter_map(|b| b.at(lambda).map(|p| (b.id, p.energy)))
            .collect();
        let energies: Vec<C64> = present.iter().map(|p| p.1).collect();
        for (k, label) in pair_conjugates(&energies, real_tol, PAIR_TOL)
            .into_iter()
            .enumerate()
        {
            if let PairLabel::Pair(j) = label {
                let (a, b) = (present[k].0, present[j].0);
                if branches[a].pair_id.is_none() {
                    branches[a].pair_id = Some(b);
                }
            }
        }
    }
}

/// One output row per branch and grid value, sorted by `(lambda, branch_id)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub branch_id: usize,
    #[serde(rename = "re_E")]
    pub re_e: f64,
    #[serde(rename = "im_E")]
    pub im_e: f64,
    pub residual: f64,
    pub classification: String,
    pub pair_id: Option<usize>,
}

pub fn sweep_rows(branches: &[Branch], grid: &[f64], real_tol: f64) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for &lambda in grid {
        let present: Vec<(usize, BranchPoint)> = branches
            .iter()
            .filter_map(|b| b.at(lambda).map(|p| (b.id, *p)))
            .collect();
        let energies: Vec<C64> = present.iter().map(|p| p.1.energy).collect();
        let labels = pair_conjugates(&energies, real_tol, PAIR_TOL);
        for ((id, p), label) in present.iter().zip(labels) {
            let (classification, pair_id) = match label {
                PairLabel::Real => ("real", None),
                PairLabel::Pair(j) => ("conjugate_pair_member", Some(present[j].0)),
                PairLabel::Unpaired => ("conjugate_pair_member", None),
            };
            rows.push(SweepRow {
                lambda,
                branch_id: *id,
                re_e: p.energy.re,
                im_e: p.energy.im,
                residual: p.residual,
                classification: classification.into(),
                pair_id,
            });
        }
    }
    rows
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionKind {
    Merging,
    Coalescing,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    pub kind: TransitionKind,
    pub lambda_star: Option<f64>,
    /// The real-to-complex transition located by bisection on pair realness,
    /// independent of the exceptional-point solve.
    pub lambda_bisect: Option<f64>,
    pub epsilon0: Option<f64>,
    pub ep: Option<EPResult>,
    pub contained: Option<bool>,
    /// Fraction of compared grid points where the containment held.
    pub contained_fraction: Option<f64>,
}

impl TransitionReport {
    fn empty(kind: TransitionKind) -> Self {
        Self {
            kind,
            lambda_star: None,
            lambda_bisect: None,
            epsilon0: None,
            ep: None,
            contained: None,
            contained_fraction: None,
        }
    }
}

fn is_complex_pair(a: C64, b: C64, tol: f64) -> bool {
    a.im.abs() >= tol && b.im.abs() >= tol && a.im * b.im < 0.0
}

/// The two roots near a previous pair; the seeds carry opposite imaginary
/// kicks so a coalesced pair is resolved into both members.
fn pair_at(f: &dyn CharFn, pair: [C64; 2], opts: &RootOptions) -> Result<[C64; 2]> {
    let (lo, hi) = if (pair[0].re, pair[0].im) <= (pair[1].re, pair[1].im) {
        (pair[0], pair[1])
    } else {
        (pair[1], pair[0])
    };
    let eps = 1e-3 * (hi - lo).norm().max(1e-9);
    let s1 = if lo.im.abs() > 0.0 {
        lo
    } else {
        lo + C64::new(0.0, eps)
    };
    let s2 = if hi.im.abs() > 0.0 {
        hi
    } else {
        hi - C64::new(0.0, eps)
    };
    let r1 = polish(f, s1, opts)?;
    let r2 = polish_deflated(f, &[r1.energy], s2, opts)?;
    Ok([r1.energy, r2.energy])
}

/// Bisect on whether the pair is real or complex between a real-side point
/// and a complex-side point. Returns the bracket midpoint and the pair mean
/// on the real side.
pub fn bisect_transition(
    fam: &dyn ParamFamily,
    real_side: (f64, [C64; 2]),
    complex_side: (f64, [C64; 2]),
    opts: &RootOptions,
) -> Result<(f64, C64)> {
    let (mut lo, mut lo_pair) = real_side;
    let (mut hi, mut hi_pair) = complex_side;
    let tol = 1e-10 * lo.abs().max(1.0);
    let mut iters = 0;
    while (hi - lo).abs() > tol && iters < 200 {
        iters += 1;
        let mid = 0.5 * (lo + hi);
        let f = fam.at(mid)?;
        let seed = if (mid - lo).abs() <= (hi - mid).abs() {
            lo_pair
        } else {
            hi_pair
        };
        let p = pair_at(f.as_ref(), seed, opts)?;
        if is_complex_pair(p[0], p[1], opts.real_axis_tol) {
            hi = mid;
            hi_pair = p;
        } else {
            lo = mid;
            lo_pair = p;
        }
    }
    Ok((0.5 * (lo + hi), 0.5 * (lo_pair[0] + lo_pair[1])))
}

/// Two-point Richardson limit of the pair midpoint, assuming it approaches
/// its limit as `exp(-2pλ)` with `p = √(-ε)`.
pub fn richardson_epsilon0(l1: f64, m1: f64, l2: f64, m2: f64) -> f64 {
    if m2 >= 0.0 || l1 == l2 {
        return m2;
    }
    let p = (-m2).sqrt();
    let r = (-2.0 * p * (l2 - l1).abs()).exp();
    (m2 - r * m1) / (1.0 - r)
}

/// Classify what happens to a doublet along a sweep.
///
/// Merging is reserved for real potentials: a PT pair that stays real is
/// reported as `None`.
///
/// With a Hermitian reference pair, `contained` records whether the real
/// part of the complex pair stays between the two reference levels at every
/// shared grid value.
pub fn classify_transition(
    fam: &dyn ParamFamily,
    pair: [&Branch; 2],
    reference: Option<[&Branch; 2]>,
    opts: &RootOptions,
) -> Result<TransitionReport> {
    let tol = opts.real_axis_tol;
    let joint: Vec<(f64, [C64; 2])> = pair[0]
        .points
        .iter()
        .filter_map(|p| {
            pair[1]
                .at(p.lambda)
                .map(|q| (p.lambda, [p.energy, q.energy]))
        })
        .collect();
    if joint.len() < 2 {
        return Ok(TransitionReport::empty(TransitionKind::None));
    }
    let complex: Vec<bool> = joint
        .iter()
        .map(|(_, e)| is_complex_pair(e[0], e[1], tol))
        .collect();
    let switches: Vec<usize> = (1..complex.len())
        .filter(|&k| complex[k] != complex[k - 1])
        .collect();
    if switches.len() > 1 {
        return Err(SolveError::AmbiguousTransition(format!(
            "pair ({}, {}) crosses the real axis {} times",
            pair[0].id,
            pair[1].id,
            switches.len()
        )));
    }
    let mut report = if let Some(&k) = switches.first() {
        let (real_k, cplx_k) = if complex[k] { (k - 1, k) } else { (k, k - 1) };
        let (lb, e_mid) = bisect_transition(fam, joint[real_k], joint[cplx_k], opts)?;
        let ep = find_ep(fam, e_mid, lb, opts)?;
        TransitionReport {
            kind: TransitionKind::Coalescing,
            lambda_star: Some(ep.param_star),
            lambda_bisect: Some(lb),
            ep: Some(ep),
            ..TransitionReport::empty(TransitionKind::Coalescing)
        }
    } else if !complex[0] && fam.at(joint[0].0)?.is_hermitian() && is_merging(&joint) {
        let n = joint.len();
        let back = (n / 10).max(1);
        let mid = |k: usize| 0.5 * (joint[k].1[0].re + joint[k].1[1].re);
        TransitionReport {
            epsilon0: Some(richardson_epsilon0(
                joint[n - 1 - back].0,
                mid(n - 1 - back),
                joint[n - 1].0,
                mid(n - 1),
            )),
            ..TransitionReport::empty(TransitionKind::Merging)
        }
    } else {
        TransitionReport::empty(TransitionKind::None)
    };
    if let Some(reference) = reference {
        let mut total = 0usize;
        let mut inside = 0usize;
        for ((lambda, e), &c) in joint.iter().zip(&complex) {
            if !c {
                continue;
            }
            let (Some(r0), Some(r1)) = (reference[0].at(*lambda), reference[1].at(*lambda)) else {
                continue;
            };
            let lo = r0.energy.re.min(r1.energy.re);
            let hi = r0.energy.re.max(r1.energy.re);
            let re = 0.5 * (e[0].re + e[1].re);
            total += 1;
            if (lo..=hi).contains(&re) {
                inside += 1;
            }
        }
        if total > 0 {
            report.contained = Some(inside == total);
            report.contained_fraction = Some(inside as f64 / total as f64);
        }
    }
    Ok(report)
}

/// Both real with a gap that ends below `1e-6` or shrinks geometrically over
/// the last third of the grid.
fn is_merging(joint: &[(f64, [C64; 2])]) -> bool {
    let gaps: Vec<f64> = joint.iter().map(|(_, e)| (e[0] - e[1]).norm()).collect();
    let n = gaps.len();
    if gaps[n - 1] < 1e-6 {
        return true;
    }
    let tail = &gaps[n - (n / 3).max(3).min(n)..];
    tail.len() >= 3
        && tail.windows(2).all(|w| w[1] < w[0])
        && tail.windows(3).all(|w| {
            // log-gap roughly linear: ratios of successive gaps comparable
            let r1 = w[1] / w[0];
            let r2 = w[2] / w[1];
            (r1 / r2 - 1.0).abs() < 0.5
        })
}

/// A sweep inside a preset, with the pairs whose transitions are reported.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PresetSweep {
    pub label: String,
    pub plan: SweepPlan,
    pub pairs: Vec<[usize; 2]>,
    /// Index of the sweep in the same preset used as the Hermitian reference.
    pub reference: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub sweeps: Vec<PresetSweep>,
}

pub const PRESETS: [&str; 6] = ["fig2a", "fig2b", "fig2c", "fig3", "fig4", "fig5"];

fn linspace(from: f64, to: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| from + (to - from) * k as f64 / (n - 1) as f64)
        .collect()
}

fn coarse_scan() -> ScanOptions {
    ScanOptions {
        n_real: 300,
        nx: 60,
        ny: 31,
        min_ratio: 1.0,
    }
}

fn g_sweeps(
    label: &str,
    make: fn(f64) -> PotentialSpec,
    grid: Vec<f64>,
    region: Rect,
    pairs: Vec<[usize; 2]>,
    counterpart_grid: Vec<f64>,
    counterpart_region: Rect,
    n_levels: usize,
) -> Vec<PresetSweep> {
    let shooting = ShootingOptions::default();
    let mut out = vec![PresetSweep {
        label: label.into(),
        plan: SweepPlan {
            spec_template: make(0.0),
            axis: Axis::G,
            grid,
            region,
            n_levels,
            root: RootOptions::default(),
            scan: coarse_scan(),
            shooting,
        },
        pairs,
        reference: None,
    }];
    // Overlay: the real potential obtained with g → i·g, on the range where
    // it still confines.
    out.push(PresetSweep {
        label: format!("{label}_hermitian"),
        plan: SweepPlan {
            spec_template: PotentialSpec::HermitianCounterpart {
                of: Box::new(make(0.0)),
                sign: 1,
            },
            axis: Axis::G,
            grid: counterpart_grid,
            region: counterpart_region,
            n_levels,
            root: RootOptions::default(),
            scan: coarse_scan(),
            shooting,
        },
        pairs: vec![],
        reference: None,
    });
    out
}

/// Preset sweeps reproducing the structure of the published figures.
///
/// `alt_axis` switches the delta-in-box preset from the wall position to the
/// delta position.
pub fn preset(name: &str, alt_axis: bool) -> Result<Preset> {
    let sweeps = match name {
        "fig2a" => g_sweeps(
            "linear_box",
            |g| PotentialSpec::LinearBox { g },
            linspace(0.0, 16.0, 161),
            Rect::new([0.5, 30.0], [-12.0, 12.0]),
            vec![[0, 1]],
            linspace(0.0, 16.0, 161),
            Rect::new([-20.0, 30.0], [-0.5, 0.5]),
            3,
        ),
        "fig2b" => g_sweeps(
            "quadratic_pt",
            |g| PotentialSpec::QuadraticPT { g },
            linspace(0.0, 1.2, 49),
            Rect::new([0.0, 5.0], [-3.0, 3.0]),
            vec![[0, 1], [1, 2]],
            linspace(0.0, 0.24, 49),
            Rect::new([-5.0, 5.0], [-0.5, 0.5]),
            3,
        ),
        "fig2c" => g_sweeps(
            "linear_pt",
            |g| PotentialSpec::LinearPT { g },
            linspace(0.0, 1.2, 49),
            Rect::new([0.0, 5.0], [-3.0, 3.0]),
            vec![[0, 1], [1, 2]],
            linspace(0.0, 0.96, 49),
            Rect::new([-5.0, 5.0], [-0.5, 0.5]),
            3,
        ),
        "fig3" => [0.0, 0.1, 1.0]
            .iter()
            .enumerate()
            .map(|(k, &g)| PresetSweep {
                label: format!("double_delta_g{g}"),
                plan: SweepPlan {
                    spec_template: PotentialSpec::DoubleDelta { u: 2.0, g, a: 0.5 },
                    axis: Axis::A,
                    grid: linspace(0.5, 8.0, 301),
                    region: Rect::new([-3.0, -0.01], [-1.5, 1.5]),
                    n_levels: 2,
                    root: RootOptions::default(),
                    scan: ScanOptions::default(),
                    shooting: ShootingOptions::default(),
                },
                pairs: vec![[0, 1]],
                reference: (k > 0).then_some(0),
            })
            .collect(),
        "fig4" => [0.0, 0.1, 1.0]
            .iter()
            .enumerate()
            .map(|(k, &g)| {
                let (template, axis, grid) = if alt_axis {
                    (
                        PotentialSpec::DeltaInBox {
                            u: 2.0,
                            g,
                            a: 3.0,
                            b: 0.5,
                        },
                        Axis::B,
                        linspace(0.5, 2.5, 201),
                    )
                } else {
                    (
                        PotentialSpec::DeltaInBox {
                            u: 2.0,
                            g,
                            a: 2.55,
                            b: 2.0,
                        },
                        Axis::A,
                        linspace(2.55, 8.0, 219),
                    )
                };
                PresetSweep {
                    label: format!("delta_in_box_g{g}"),
                    plan: SweepPlan {
                        spec_template: template,
                        axis,
                        grid,
                        region: Rect::new([-3.0, 6.0], [-2.0, 2.0]),
                        n_levels: 4,
                        root: RootOptions::default(),
                        scan: ScanOptions::default(),
                        shooting: ShootingOptions::default(),
                    },
                    pairs: vec![[0, 1], [2, 3]],
                    reference: (k > 0).then_some(0),
                }
            })
            .collect(),
        "fig5" => [0.0, 1.0, 5.0, 10.0]
            .iter()
            .enumerate()
            .map(|(k, &g)| PresetSweep {
                label: format!("square_double_well_g{g}"),
                plan: SweepPlan {
                    spec_template: PotentialSpec::SquareDoubleWell {
                        u: 50.0,
                        g,
                        b: 0.02,
                        w: 1.0,
                    },
                    axis: Axis::B,
                    grid: linspace(0.02, 0.6, 117),
                    region: Rect::new([-49.9, -0.05], [-12.0, 12.0]),
                    n_levels: 6,
                    root: RootOptions::default(),
                    scan: ScanOptions::default(),
                    shooting: ShootingOptions::default(),
                },
                pairs: vec![[0, 1]],
                reference: (k > 0).then_some(0),
            })
            .collect(),
        other => {
            return Err(SolveError::InvalidSpec(format!(
                "unknown preset '{other}' (expected one of {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(Preset {
        name: name.into(),
        sweeps,
    })
}

/// Branches and transition reports of one preset sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct PresetOutcome {
    pub label: String,
    pub branches: Vec<Branch>,
    pub transitions: Vec<(usize, usize, Result<TransitionReport>)>,
}

/// Run every sweep of a preset and classify the requested pairs.
pub fn run_preset(preset: &Preset) -> Result<Vec<PresetOutcome>> {
    let mut outcomes: Vec<PresetOutcome> = Vec::new();
    for s in &preset.sweeps {
        let branches = run_sweep(&s.plan)?;
        let fam = s.plan.family();
        let mut transitions = Vec::new();
        for &[i, j] in &s.pairs {
            let (Some(a), Some(b)) = (branches.get(i), branches.get(j)) else {
                transitions.push((i, j, Ok(TransitionReport::empty(TransitionKind::None))));
                continue;
            };
            let reference = s
                .reference
                .and_then(|r| outcomes.get(r))
                .and_then(|o| Some([o.branches.get(i)?, o.branches.get(j)?]));
            transitions.push((
                i,
                j,
                classify_transition(&fam, [a, b], reference, &s.plan.root),
            ));
        }
        outcomes.push(PresetOutcome {
            label: s.label.clone(),
            branches,
            transitions,
        });
    }
    Ok(outcomes)
}
