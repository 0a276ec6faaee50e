//! Probabilistic quantum state purification.
//!
//! The crate covers the symmetric-projection purification protocol end to end:
//! closed-form fidelity/probability recursions, the semidefinite programs that
//! characterise optimal protocols together with their dual certificates, and
//! exact simulation of the block-encoded purification circuits.

pub mod analytic;
pub mod channels;
pub mod circuit;
pub mod error;
pub mod optimize;
pub mod sdp;
pub mod symgroup;
pub mod tensor;

pub use analytic::{EigenSpectrum, PurificationPoint};
pub use channels::{ChannelKind, ChoiOperator, MomentOperators, NoiseChannel};
pub use circuit::{BlockEncoding, Gate, QuantumCircuit};
pub use error::{PurifyError, Result};
pub use sdp::{SdpProblem, SdpSolution, SdpStatus};
pub use symgroup::Permutation;
pub use tensor::{ComplexMatrix, HermitianSpectrum, SubsystemShape, C64};
