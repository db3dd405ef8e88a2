//! Bound-state spectra of Hermitian and PT-symmetric one-dimensional double
//! wells: characteristic functions, complex root finding, branch tracking
//! across a parameter and exceptional-point location.

pub mod chareq;
pub mod cli;
pub mod error;
pub mod oracle;
pub mod potential;
pub mod rootfind;
pub mod shooting;
pub mod sweep;

use crate::chareq::ChareqFn;
use crate::error::Result;
use crate::potential::{PotentialSpec, Solver};
use crate::rootfind::{find_all_roots_with, CharFn, Rect, RootOptions, RootSearch, ScanOptions};
use crate::shooting::{ShootingFn, ShootingOptions};

/// The characteristic function of `spec`: closed form for the piecewise
/// families, the shooting mismatch for the smooth ones.
pub fn characteristic(spec: &PotentialSpec, shooting: &ShootingOptions) -> Result<Box<dyn CharFn>> {
    Ok(match spec.solver() {
        Solver::Chareq => Box::new(ChareqFn::new(spec)?),
        Solver::Shooting => Box::new(ShootingFn::new(spec, shooting)?),
    })
}

/// All eigenvalues of `spec` inside `rect`.
pub fn eigenvalues(
    spec: &PotentialSpec,
    rect: &Rect,
    shooting: &ShootingOptions,
    opts: &RootOptions,
    scan: &ScanOptions,
) -> Result<RootSearch> {
    let f = characteristic(spec, shooting)?;
    Ok(find_all_roots_with(&f, rect, opts, scan))
}
