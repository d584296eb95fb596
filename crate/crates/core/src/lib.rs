//! Exact identities and exhaustive bound audits for character amplification
//! through Kloosterman sums.

pub mod appendix;
pub mod arith;
pub mod character;
pub mod chi_formula;
pub mod calibrate;
pub mod coeffs;
pub mod error;
pub mod expsums;
pub mod quadrature;
pub mod registry;
pub mod report;
pub mod roots;
pub mod weight;

pub use arith::{crt_combine, crt_split, mod_inverse, omega, Modulus, ResidueClass};
pub use character::{char_eval, CharacterGroup, DirichletCharacter};
pub use error::{Error, Result};
pub use registry::Registry;
pub use report::{AuditBuilder, AuditReport, Metric, Params, Violation, Witness};
pub use roots::RootTable;
pub use weight::{make_bump, poisson_check, BumpWeight, DecayEnvelope, FourierPair, FourierTable, InertFunction};
pub use expsums::{gauss_eps, kloosterman, ramanujan, twisted_kloosterman, ExpSumValue, SumKind, UnitTable};
pub use coeffs::{d3, load_coefficients, rankin_selberg_audit, CoefficientSource, SourceKind};
pub use chi_formula::{
    chi_via_formula, decompose, diagonal_count, pi0_chain, reciprocity_check, scan_row, sigma_amplified,
    sigma_direct, AlphaSequence, AmplifierPair, DecompositionReport, FormulaContext, ScanRow,
};
pub use appendix::{
    correlation_sum, exact_identity_check, incomplete_correlation, lemma1_audit, lemma2_bound_audit,
    rational_phase_sum, stationary_points, CorrelationParams, RationalPhase,
};
