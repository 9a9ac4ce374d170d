//! Synthesis, verification, and noise stress-testing of a controlled-Z gate
//! on decoherence-free encoded qubits built from exchange and ring-exchange
//! pulses.
//!
//! Physical qubits are grouped into blocks of three or four, and a logical
//! qubit is stored in the subsystem (three-qubit block) or subspace
//! (four-qubit block) that idles untouched under collective dephasing. All
//! logic is driven by Heisenberg exchange `E_ij = XX + YY + ZZ` between
//! pairs, plus one four-site ring-exchange term; the crate builds those
//! generators, compiles pulse sequences into unitaries, projects them onto
//! the logical basis, scores them against controlled-Z with Makhlin's local
//! invariants, re-derives the published pulse solution with a genetic +
//! Nelder–Mead search, and sweeps coupling and magnetic-field noise to map
//! out error rates.

pub mod encoding;
pub mod error;
pub mod invariants;
pub mod linalg;
pub mod noise;
pub mod optimize;
pub mod pulse;
pub mod spin;

pub use error::Error;
pub use linalg::{CMat, Operator};
