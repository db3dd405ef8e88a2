use proptest::prelude::*;

use ptspectra::chareq::ChareqFn;
use ptspectra::oracle::{root_options, OracleFn};
use ptspectra::potential::{evaluate_potential, PotentialSpec, C64};
use ptspectra::rootfind::{find_all_roots_with, polish, Rect, RootOptions, ScanOptions};
use ptspectra::shooting::{ShootingFn, ShootingOptions};

fn scan() -> ScanOptions {
    ScanOptions {
        n_real: 600,
        nx: 80,
        ny: 41,
        min_ratio: 1.0,
    }
}

fn roots(spec: &PotentialSpec, rect: &Rect) -> Vec<C64> {
    ptspectra::eigenvalues(
        spec,
        rect,
        &ShootingOptions::default(),
        &RootOptions::default(),
        &scan(),
    )
    .unwrap()
    .roots
    .iter()
    .map(|r| r.energy)
    .collect()
}

fn families() -> Vec<(PotentialSpec, Rect)> {
    vec![
        (
            PotentialSpec::DoubleDelta {
                u: 2.0,
                g: 0.3,
                a: 3.5,
            },
            Rect::new([-3.0, -0.05], [-1.5, 1.5]),
        ),
        (
            PotentialSpec::DeltaInBox {
                u: 2.0,
                g: 0.5,
                a: 2.0,
                b: 1.2,
            },
            Rect::new([-4.0, 12.0], [-2.0, 2.0]),
        ),
        (
            PotentialSpec::SquareDoubleWell {
                u: 50.0,
                g: 5.0,
                b: 0.4,
                w: 1.0,
            },
            Rect::new([-49.9, -0.05], [-8.0, 8.0]),
        ),
        (
            PotentialSpec::LinearBox { g: 14.0 },
            Rect::new([0.5, 30.0], [-12.0, 12.0]),
        ),
        (
            PotentialSpec::QuadraticPT { g: 0.6 },
            Rect::new([0.0, 4.5], [-3.0, 3.0]),
        ),
        (
            PotentialSpec::LinearPT { g: 1.0 },
            Rect::new([0.0, 4.5], [-3.0, 3.0]),
        ),
        (
            PotentialSpec::ScarfII { v1: 4.0, v2: 5.0 },
            Rect::new([-5.0, -0.05], [-2.0, 2.0]),
        ),
    ]
}

#[test]
fn polish_from_conjugate_seed_finds_conjugate() {
    for (spec, rect) in families() {
        let f = ptspectra::characteristic(&spec, &ShootingOptions::default()).unwrap();
        let found = roots(&spec, &rect);
        assert!(!found.is_empty(), "{spec:?}");
        for e in found {
            let r = polish(&f, e.conj(), &RootOptions::default()).unwrap();
            assert!(
                (r.energy - e.conj()).norm() < 1e-10,
                "{spec:?}: {e} -> {}",
                r.energy
            );
        }
    }
}

#[test]
fn delta_box_evaluators_share_zeros() {
    for (u, g, a, b) in [
        (2.0, 0.0, 2.0, 1.2),
        (2.0, 0.5, 2.0, 1.2),
        (1.0, 0.2, 3.0, 0.5),
        (3.0, 1.5, 1.5, 0.9),
        (0.5, 0.1, 4.0, 3.0),
        (2.0, 0.1, 2.55, 2.0),
    ] {
        let spec = PotentialSpec::DeltaInBox { u, g, a, b };
        let rect = Rect::new([-4.0, 10.0], [-2.0, 2.0]);
        let plain = ChareqFn::new(&spec).unwrap();
        let det = ChareqFn::new(&spec).unwrap().with_determinant(true);
        let found = find_all_roots_with(&plain, &rect, &RootOptions::default(), &scan()).roots;
        assert!(!found.is_empty(), "{spec:?}");
        for r in found {
            let other = polish(&det, r.energy, &RootOptions::default()).unwrap();
            assert!(
                (other.energy - r.energy).norm() < 1e-9,
                "{spec:?}: {} vs {}",
                r.energy,
                other.energy
            );
        }
    }
}

fn shooting_root(spec: &PotentialSpec, opts: &ShootingOptions, seed: C64) -> C64 {
    let f = ShootingFn::new(spec, opts).unwrap();
    polish(&f, seed, &RootOptions::default()).unwrap().energy
}

#[test]
fn shooting_is_grid_and_truncation_independent() {
    let defaults = ShootingOptions::default();
    for (spec, rect) in [
        (
            PotentialSpec::QuadraticPT { g: 0.1 },
            Rect::new([0.0, 4.0], [-2.0, 2.0]),
        ),
        (
            PotentialSpec::LinearPT { g: 0.5 },
            Rect::new([0.0, 5.0], [-2.0, 2.0]),
        ),
        (
            PotentialSpec::ScarfII { v1: 4.0, v2: 2.0 },
            Rect::new([-5.0, -0.05], [-1.0, 1.0]),
        ),
        (
            PotentialSpec::LinearBox { g: 3.0 },
            Rect::new([0.5, 30.0], [-5.0, 5.0]),
        ),
    ] {
        let mut found = roots(&spec, &rect);
        found.sort_by(|a, b| a.re.total_cmp(&b.re));
        for (k, &e) in found.iter().enumerate() {
            let fine = shooting_root(
                &spec,
                &ShootingOptions {
                    n_steps: 2 * defaults.n_steps,
                    ..defaults
                },
                e,
            );
            assert!((fine - e).norm() < 1e-8, "{spec:?} steps: {e} vs {fine}");
            // Truncation is checked on the two lowest levels of the confining
            // wells (higher ones reach their turning points near the shorter
            // cutoff) and on the Scarf ground state: its E = -1/4 level sits
            // next to threshold and still feels the 2e-6 tail at x = 8.
            let low = match spec {
                PotentialSpec::LinearBox { .. } => 0,
                PotentialSpec::ScarfII { .. } => 1,
                _ => 2,
            };
            if k >= low {
                continue;
            }
            let at = |l: f64| {
                shooting_root(
                    &spec,
                    &ShootingOptions {
                        l,
                        n_steps: (defaults.n_steps as f64 * l / defaults.l) as usize,
                        ..defaults
                    },
                    e,
                )
            };
            let (short, long) = (at(8.0), at(12.0));
            assert!(
                (short - long).norm() < 1e-8,
                "{spec:?} L: {short} vs {long}"
            );
        }
    }
}

/// Least-squares slope of log(error) against log(h).
fn order(spec: &PotentialSpec, l: f64, reference: C64, ns: &[usize]) -> f64 {
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .map(|&n| {
            let f = OracleFn::new(spec, l, n).unwrap();
            let e = polish(&f, reference, &root_options()).unwrap().energy;
            ((2.0 * l / (n + 1) as f64).ln(), (e - reference).norm().ln())
        })
        .collect();
    let k = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / k, sy / k);
    let num: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    num / den
}

#[test]
fn oracle_convergence_order() {
    let ns = [1000, 2000, 4000];
    for (spec, l, rect) in [
        (
            PotentialSpec::LinearBox { g: 3.0 },
            1.0,
            Rect::new([0.5, 30.0], [-5.0, 5.0]),
        ),
        (
            PotentialSpec::QuadraticPT { g: 0.1 },
            10.0,
            Rect::new([0.0, 2.0], [-2.0, 2.0]),
        ),
    ] {
        let reference = roots(&spec, &rect)[0];
        let p = order(&spec, l, reference, &ns);
        assert!((p - 2.0).abs() <= 0.2, "{spec:?}: order {p}");
    }
    let spec = PotentialSpec::DoubleDelta {
        u: 2.0,
        g: 0.0,
        a: 4.0,
    };
    let reference = roots(&spec, &Rect::new([-3.0, -0.1], [-1.0, 1.0]))[0];
    let p = order(&spec, 20.0, reference, &ns);
    assert!((p - 1.0).abs() <= 0.3, "delta order {p}");
}

fn pt_spec() -> impl Strategy<Value = PotentialSpec> {
    prop_oneof![
        (0.1..4.0f64, -2.0..2.0f64, 0.2..8.0f64).prop_map(|(u, g, a)| PotentialSpec::DoubleDelta {
            u,
            g,
            a
        }),
        (0.1..4.0f64, -2.0..2.0f64, 0.2..4.0f64).prop_map(|(u, g, a)| PotentialSpec::DeltaInBox {
            u,
            g,
            a: a + 0.5,
            b: a / 2.0
        }),
        (1.0..60.0f64, -10.0..10.0f64, 0.0..2.0f64, 0.1..2.0f64)
            .prop_map(|(u, g, b, w)| PotentialSpec::SquareDoubleWell { u, g, b, w }),
        (-20.0..20.0f64).prop_map(|g| PotentialSpec::LinearBox { g }),
        (-2.0..2.0f64).prop_map(|g| PotentialSpec::QuadraticPT { g }),
        (-2.0..2.0f64).prop_map(|g| PotentialSpec::LinearPT { g }),
        (0.1..6.0f64, -6.0..6.0f64).prop_map(|(v1, v2)| PotentialSpec::ScarfII { v1, v2 }),
    ]
}

proptest! {
    #[test]
    fn potentials_are_pt_symmetric(spec in pt_spec(), x in 0.0..6.0f64) {
        let (l, r) = (evaluate_potential(&spec, -x), evaluate_potential(&spec, x));
        prop_assert!((l - r.conj()).norm() <= 1e-14 * r.norm().max(1.0), "{:?} at {}: {} vs {}", spec, x, l, r);
    }
}
