use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SolveError {
    #[error("invalid potential spec: {0}")]
    InvalidSpec(String),

    #[error("energy {energy} is at a branch point of the characteristic function")]
    DegenerateEnergy { energy: Complex64 },

    #[error("no convergence from seed {seed} after {iterations} iterations")]
    NoConvergence { seed: Complex64, iterations: usize },

    #[error("no exceptional point bracketed: {0}")]
    BadBracket(String),

    #[error("branch {branch} lost at parameter {lambda}")]
    LostBranch { branch: usize, lambda: f64 },

    #[error("ambiguous transition: {0}")]
    AmbiguousTransition(String),

    #[error("wavefunction overflow during integration")]
    Overflow,

    #[error("potential is not confining; no bound-state spectrum")]
    Unconfined,

    #[error("bad geometry: {0}")]
    BadGeometry(String),

    #[error("{0} is not supported by this solver")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, SolveError>;
