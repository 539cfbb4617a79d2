//! Central numeric tolerances. Every check in the crate pulls its threshold from here.

/// Bracket identities at unit-scale points.
pub const BRACKET_ABS: f64 = 1e-10;
/// Operator relations on Fock blocks and the model space, relative to block scale.
pub const RELATION_REL: f64 = 1e-10;
/// Symbolic coefficients treated as zero.
pub const SYMBOLIC_ZERO: f64 = 1e-12;
/// Reality of model-operator eigenvalues.
pub const EIGEN_IMAG: f64 = 1e-10;
/// Quadrature-based identities (kernel, projector, Gram).
pub const QUADRATURE_REL: f64 = 1e-8;
/// Kähler identities.
pub const KAHLER_ABS: f64 = 1e-6;
/// Casimir and energy drift along classical trajectories.
pub const DRIFT_REL: f64 = 1e-8;
/// Oracle convergence: eigenvalue shift under cutoff + 8, in units of ħ.
pub const ORACLE_SHIFT: f64 = 1e-8;
/// Relative null-space threshold for singular values.
pub const NULL_REL: f64 = 1e-9;
/// Phase-space realization constraints, relative.
pub const CONSTRAINT_REL: f64 = 1e-12;
/// Initial points of classical flows on the constraint surface, relative.
pub const SURFACE_REL: f64 = 1e-10;
