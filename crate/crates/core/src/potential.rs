//! Potential families and their pointwise evaluation.
//!
//! Units throughout the crate: ħ = 1 and 2μ = 1, so the Hamiltonian is
//! `H = -d²/dx² + V(x)` and the evanescent wavenumber is `p = √(-E)`.
//!
//! Every non-Hermitian family carries a coupling `g` entering as `i·g`.
//! Its Hermitian counterpart replaces `g` by `±i·g`, which is handled
//! uniformly by resolving a spec to its base family plus a complex coupling.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::SolveError;

pub type C64 = Complex64;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Fixed unit convention (ħ = 1, 2μ = 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitConvention {
    pub hbar: f64,
    pub two_mu: f64,
}

pub const UNITS: UnitConvention = UnitConvention {
    hbar: 1.0,
    two_mu: 1.0,
};

/// One of the supported potential families.
///
/// Deltas are attractive for `u > 0`: a strength `s` at position `x₀` means
/// the potential contains `-s·δ(x - x₀)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// Deltas of strength `u+ig` at `-a/2` and `u-ig` at `+a/2`.
    DoubleDelta { u: f64, g: f64, a: f64 },
    /// Deltas of strength `u+ig` at `-b` and `u-ig` at `+b`, rigid walls at `±a`.
    DeltaInBox { u: f64, g: f64, a: f64, b: f64 },
    /// Well of depth `u+ig` on `(-b-w, -b)` and `u-ig` on `(b, b+w)`.
    SquareDoubleWell { u: f64, g: f64, b: f64, w: f64 },
    /// `V = igx` between rigid walls at `±1`.
    LinearBox { g: f64 },
    /// `V = x²/4 + igx|x|`.
    #[serde(rename = "quadratic_pt")]
    QuadraticPT { g: f64 },
    /// `V = |x| + igx`.
    #[serde(rename = "linear_pt")]
    LinearPT { g: f64 },
    /// `V = -v1 sech²x + i v2 sech x tanh x`.
    #[serde(rename = "scarf_ii")]
    ScarfII { v1: f64, v2: f64 },
    /// The real potential obtained by substituting `g → sign·i·g`.
    HermitianCounterpart { of: Box<PotentialSpec>, sign: i8 },
}

/// A `-strength·δ(x - position)` component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeltaTerm {
    pub position: f64,
    pub strength: C64,
}

/// Boundary conditions of a family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain {
    /// Rigid walls at `±half_width`.
    Walls { half_width: f64 },
    /// The whole real line.
    Unbounded,
}

/// Which solver evaluates the characteristic function of a family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Solver {
    Chareq,
    Shooting,
}

/// A parameter that can be swept or solved for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    U,
    G,
    A,
    B,
    W,
    V1,
    V2,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::U => "u",
            Axis::G => "g",
            Axis::A => "a",
            Axis::B => "b",
            Axis::W => "w",
            Axis::V1 => "v1",
            Axis::V2 => "v2",
        }
    }
}

impl PotentialSpec {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |msg: &str| Err(SolveError::InvalidSpec(msg.to_string()));
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match *self {
            PotentialSpec::DoubleDelta { u, g, a } => {
                if !finite(&[u, g, a]) {
                    return bad("non-finite parameter");
                }
                if u <= 0.0 {
                    return bad("double_delta: u must be > 0");
                }
                if a <= 0.0 {
                    return bad("double_delta: a must be > 0");
                }
            }
            PotentialSpec::DeltaInBox { u, g, a, b } => {
                if !finite(&[u, g, a, b]) {
                    return bad("non-finite parameter");
                }
                if u < 0.0 {
                    return bad("delta_in_box: u must be >= 0");
                }
                if !(b > 0.0 && b < a) {
                    return bad("delta_in_box: need 0 < b < a");
                }
            }
            PotentialSpec::SquareDoubleWell { u, g, b, w } => {
                if !finite(&[u, g, b, w]) {
                    return bad("non-finite parameter");
                }
                if u <= 0.0 {
                    return bad("square_double_well: u must be > 0");
                }
                if b < 0.0 {
                    return bad("square_double_well: b must be >= 0");
                }
                if w <= 0.0 {
                    return bad("square_double_well: w must be > 0");
                }
            }
            PotentialSpec::LinearBox { g }
            | PotentialSpec::QuadraticPT { g }
            | PotentialSpec::LinearPT { g } => {
                if !g.is_finite() {
                    return bad("non-finite parameter");
                }
            }
            PotentialSpec::ScarfII { v1, v2 } => {
                if !finite(&[v1, v2]) {
                    return bad("non-finite parameter");
                }
                if v1 <= 0.0 {
                    return bad("scarf_ii: v1 must be > 0");
                }
            }
            PotentialSpec::HermitianCounterpart { ref of, sign } => {
                if sign != 1 && sign != -1 {
                    return bad("hermitian_counterpart: sign must be +1 or -1");
                }
                if matches!(**of, PotentialSpec::HermitianCounterpart { .. }) {
                    return bad("hermitian_counterpart cannot be nested");
                }
                of.validate()?;
            }
        }
        Ok(())
    }

    /// The base (non-counterpart) family.
    pub fn base(&self) -> &PotentialSpec {
        match self {
            PotentialSpec::HermitianCounterpart { of, .. } => of.base(),
            other => other,
        }
    }

    /// Complex coupling `G` such that the non-Hermitian term reads `i·G·(...)`.
    ///
    /// For a PT family this is the real `g` (or `v2`); for a counterpart it
    /// is `sign·i·g`, which makes `i·G` real.
    pub fn coupling(&self) -> C64 {
        match self {
            PotentialSpec::HermitianCounterpart { of, sign } => {
                of.coupling() * I * f64::from(*sign)
            }
            PotentialSpec::DoubleDelta { g, .. }
            | PotentialSpec::DeltaInBox { g, .. }
            | PotentialSpec::SquareDoubleWell { g, .. }
            | PotentialSpec::LinearBox { g }
            | PotentialSpec::QuadraticPT { g }
            | PotentialSpec::LinearPT { g } => C64::new(*g, 0.0),
            PotentialSpec::ScarfII { v2, .. } => C64::new(*v2, 0.0),
        }
    }

    pub fn is_counterpart(&self) -> bool {
        matches!(self, PotentialSpec::HermitianCounterpart { .. })
    }

    /// True when the potential is real everywhere.
    pub fn is_hermitian(&self) -> bool {
        let c = self.coupling();
        // i·G real  <=>  Re G == 0
        c.re == 0.0
    }

    pub fn solver(&self) -> Solver {
        match self.base() {
            PotentialSpec::DoubleDelta { .. }
            | PotentialSpec::DeltaInBox { .. }
            | PotentialSpec::SquareDoubleWell { .. } => Solver::Chareq,
            _ => Solver::Shooting,
        }
    }

    pub fn domain(&self) -> Domain {
        match *self.base() {
            PotentialSpec::DeltaInBox { a, .. } => Domain::Walls { half_width: a },
            PotentialSpec::LinearBox { .. } => Domain::Walls { half_width: 1.0 },
            _ => Domain::Unbounded,
        }
    }

    /// Strengths `(V₁, V₂)` of the left and right components of the
    /// piecewise families: `u ± i·G`.
    pub fn strengths(&self) -> Option<(C64, C64)> {
        let g = self.coupling();
        match *self.base() {
            PotentialSpec::DoubleDelta { u, .. }
            | PotentialSpec::DeltaInBox { u, .. }
            | PotentialSpec::SquareDoubleWell { u, .. } => Some((u + I * g, u - I * g)),
            _ => None,
        }
    }

    /// Whether the real part of the potential confines at large |x|.
    ///
    /// The Hermitian counterparts of `x²/4 + igx|x|` and `|x| + igx` are
    /// unbounded below for `|g| ≥ 1/4` and `|g| ≥ 1` respectively.
    pub fn is_confining(&self) -> bool {
        match self {
            PotentialSpec::HermitianCounterpart { of, .. } => match **of {
                PotentialSpec::QuadraticPT { g } => g.abs() < 0.25,
                PotentialSpec::LinearPT { g } => g.abs() < 1.0,
                _ => true,
            },
            _ => true,
        }
    }

    /// Value of the swept parameter `axis`.
    pub fn param(&self, axis: Axis) -> Result<f64, SolveError> {
        let missing = || {
            Err(SolveError::InvalidSpec(format!(
                "parameter '{}' not present in {}",
                axis.name(),
                self.family_name()
            )))
        };
        match (self, axis) {
            (PotentialSpec::HermitianCounterpart { of, .. }, _) => of.param(axis),
            (PotentialSpec::DoubleDelta { u, .. }, Axis::U)
            | (PotentialSpec::DeltaInBox { u, .. }, Axis::U)
            | (PotentialSpec::SquareDoubleWell { u, .. }, Axis::U) => Ok(*u),
            (PotentialSpec::DoubleDelta { g, .. }, Axis::G)
            | (PotentialSpec::DeltaInBox { g, .. }, Axis::G)
            | (PotentialSpec::SquareDoubleWell { g, .. }, Axis::G)
            | (PotentialSpec::LinearBox { g }, Axis::G)
            | (PotentialSpec::QuadraticPT { g }, Axis::G)
            | (PotentialSpec::LinearPT { g }, Axis::G) => Ok(*g),
            (PotentialSpec::DoubleDelta { a, .. }, Axis::A)
            | (PotentialSpec::DeltaInBox { a, .. }, Axis::A) => Ok(*a),
            (PotentialSpec::DeltaInBox { b, .. }, Axis::B)
            | (PotentialSpec::SquareDoubleWell { b, .. }, Axis::B) => Ok(*b),
            (PotentialSpec::SquareDoubleWell { w, .. }, Axis::W) => Ok(*w),
            (PotentialSpec::ScarfII { v1, .. }, Axis::V1) => Ok(*v1),
            (PotentialSpec::ScarfII { v2, .. }, Axis::V2 | Axis::G) => Ok(*v2),
            _ => missing(),
        }
    }

    /// Copy of `self` with parameter `axis` set to `value`.
    pub fn with_param(&self, axis: Axis, value: f64) -> Result<PotentialSpec, SolveError> {
        let mut out = self.clone();
        {
            let slot = out.param_mut(axis).ok_or_else(|| {
                SolveError::InvalidSpec(format!(
                    "parameter '{}' not present in {}",
                    axis.name(),
                    self.family_name()
                ))
            })?;
            *slot = value;
        }
        Ok(out)
    }

    fn param_mut(&mut self, axis: Axis) -> Option<&mut f64> {
        match (self, axis) {
            (PotentialSpec::HermitianCounterpart { of, .. }, _) => of.param_mut(axis),
            (PotentialSpec::DoubleDelta { u, .. }, Axis::U)
            | (PotentialSpec::DeltaInBox { u, .. }, Axis::U)
            | (PotentialSpec::SquareDoubleWell { u, .. }, Axis::U) => Some(u),
            (PotentialSpec::DoubleDelta { g, .. }, Axis::G)
            | (PotentialSpec::DeltaInBox { g, .. }, Axis::G)
            | (PotentialSpec::SquareDoubleWell { g, .. }, Axis::G)
            | (PotentialSpec::LinearBox { g }, Axis::G)
            | (PotentialSpec::QuadraticPT { g }, Axis::G)
            | (PotentialSpec::LinearPT { g }, Axis::G) => Some(g),
            (PotentialSpec::DoubleDelta { a, .. }, Axis::A)
            | (PotentialSpec::DeltaInBox { a, .. }, Axis::A) => Some(a),
            (PotentialSpec::DeltaInBox { b, .. }, Axis::B)
            | (PotentialSpec::SquareDoubleWell { b, .. }, Axis::B) => Some(b),
            (PotentialSpec::SquareDoubleWell { w, .. }, Axis::W) => Some(w),
            (PotentialSpec::ScarfII { v1, .. }, Axis::V1) => Some(v1),
            (PotentialSpec::ScarfII { v2, .. }, Axis::V2 | Axis::G) => Some(v2),
            _ => None,
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            PotentialSpec::DoubleDelta { .. } => "double_delta",
            PotentialSpec::DeltaInBox { .. } => "delta_in_box",
            PotentialSpec::SquareDoubleWell { .. } => "square_double_well",
            PotentialSpec::LinearBox { .. } => "linear_box",
            PotentialSpec::QuadraticPT { .. } => "quadratic_pt",
            PotentialSpec::LinearPT { .. } => "linear_pt",
            PotentialSpec::ScarfII { .. } => "scarf_ii",
            PotentialSpec::HermitianCounterpart { .. } => "hermitian_counterpart",
        }
    }
}

/// Non-delta part of `V(x)`.
pub fn evaluate_potential(spec: &PotentialSpec, x: f64) -> C64 {
    let g = spec.coupling();
    match *spec.base() {
        PotentialSpec::DoubleDelta { .. } | PotentialSpec::DeltaInBox { .. } => C64::new(0.0, 0.0),
        PotentialSpec::SquareDoubleWell { b, w, .. } => {
            let (v1, v2) = spec.strengths().expect("piecewise family");
            let ax = x.abs();
            if ax > b && ax < b + w {
                if x < 0.0 {
                    -v1
                } else {
                    -v2
                }
            } else {
                C64::new(0.0, 0.0)
            }
        }
        PotentialSpec::LinearBox { .. } => I * g * x,
        PotentialSpec::QuadraticPT { .. } => 0.25 * x * x + I * g * x * x.abs(),
        PotentialSpec::LinearPT { .. } => x.abs() + I * g * x,
        PotentialSpec::ScarfII { v1, .. } => {
            let sech = 1.0 / x.cosh();
            -v1 * sech * sech + I * g * sech * x.tanh()
        }
        PotentialSpec::HermitianCounterpart { .. } => unreachable!("base() strips counterparts"),
    }
}

/// Delta components of the potential; empty for smooth families.
pub fn delta_terms(spec: &PotentialSpec) -> Vec<DeltaTerm> {
    let Some((v1, v2)) = spec.strengths() else {
        return Vec::new();
    };
    let half = match *spec.base() {
        PotentialSpec::DoubleDelta { a, .. } => a / 2.0,
        PotentialSpec::DeltaInBox { b, .. } => b,
        _ => return Vec::new(),
    };
    vec![
        DeltaTerm {
            position: -half,
            strength: v1,
        },
        DeltaTerm {
            position: half,
            strength: v2,
        },
    ]
}
