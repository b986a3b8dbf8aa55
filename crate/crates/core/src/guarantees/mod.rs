//! Generalization bounds and input-stability certificates for trained models.

pub mod bounds;
pub mod certify;

pub use bounds::{probabilistic_tail, rademacher_bound_lifted, rademacher_bound_original, BoundInputs};
pub use certify::{
    certify_stability, empirical_deviation_scan, solve_fixed_micp, BigMValues, CertifyDomain, CertifyMode, CertifyOptions,
    DeviationScan, MicpPoint, StabilityCertificate, Units,
};
