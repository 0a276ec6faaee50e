//! Semidefinite programs for optimal purification and their certificates.

pub mod certificate;
pub mod problems;
pub mod solver;

pub use certificate::{closed_form_s_values, golden_certificate, CertificateReport, SValues};
pub use problems::{
    build_fidelity_sdp, build_probability_sdp, check_fidelity_dual, check_probability_dual,
    solve_fidelity, solve_probability, sweep_tradeoff, DualCertificate, DualReport,
    PurificationSdpResult, TradeoffPoint,
};
pub use solver::{solve, LinearConstraint, SdpProblem, SdpSolution, SdpStatus, SolverOptions};
