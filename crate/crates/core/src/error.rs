use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid modulus {0}: must be at least 1")]
    InvalidModulus(i128),

    #[error("{value} is not invertible modulo {modulus} (gcd {gcd})")]
    NonInvertible { value: u64, modulus: u64, gcd: u64 },

    #[error("moduli {0} and {1} are not coprime")]
    NotCoprime(u64, u64),

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("the trivial character has no unit-normalized Gauss sum")]
    DegenerateCharacter,

    #[error("branch with p | a: no stationary points, sum the phase directly")]
    DegenerateBranch,

    #[error("support collision: {0}")]
    SupportCollision(String),

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("quadrature did not reach tolerance {tolerance:e} at xi = {xi}")]
    QuadratureFailure { xi: f64, tolerance: f64 },

    #[error("h-tail bound {tail:e} exceeds budget {budget:e} at cutoff {cutoff}")]
    TruncationInsufficient { cutoff: u64, tail: f64, budget: f64 },

    #[error("coefficient index {n} outside available range 1..={range}")]
    OutOfRange { n: u64, range: u64 },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("gap in coefficient file {path}: expected n = {expected}, found {found}")]
    Gap {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("registry: {0}")]
    Registry(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
