//! Exact simulation and analysis of entanglement concentration.
//!
//! Two parties sharing n partially entangled pairs alpha|00⟩ + beta|11⟩
//! can convert them, with local operations and classical agreement on
//! the readouts, into a known number of perfect EPR pairs. This crate
//! simulates that procedure exactly at desk scale and checks the
//! closed-form yield and entropy statements it comes with:
//!
//! * [`statevec`] - dense state-vector engine over labeled qubits.
//! * [`combinat`] - exact fixed-weight ranking and binomial expansions.
//! * [`circuits`] - the weight counter, ranking network, and counting
//!   cascade as reversible circuits.
//! * [`protocol`] - end-to-end runs under a full two-party engine and a
//!   compressed mirrored engine.
//! * [`analysis`] - closed-form yields, bounds, and entropies.
//! * [`oracle`] - independent brute-force verifiers for all of the above.
//! * [`cli`] - the `epconc` command-line surface.

pub mod analysis;
pub mod circuits;
pub mod cli;
pub mod combinat;
pub mod oracle;
pub mod protocol;
pub mod statevec;

pub use analysis::{YieldRow, YieldTable};
pub use protocol::{Engine, PairParams, ProtocolOutcome};
pub use statevec::{BitString, Label, StateVector};
