//! Tensor-network construction of low-energy-variance matrix product states
//! for 1D spin chains.
//!
//! The pipeline: build a local Hamiltonian ([`hamiltonian`]), prepare a
//! product state ([`mps`]), apply a truncated cosine energy filter — a
//! binomial-weighted combination of time-evolution operators ([`filter`],
//! [`evolution`]) — and measure the resulting energy mean, variance,
//! entanglement entropies and bond dimensions ([`diagnostics`]). An exact
//! diagonalization back end ([`oracle`]) provides ground truth at small
//! system sizes for every quantity the MPS path produces.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod filter;
pub mod hamiltonian;
pub mod mpo;
pub mod mps;
pub mod oracle;
pub mod tensor;

mod tt;

pub use error::{Error, Result};
pub use hamiltonian::{HamiltonianSpec, Model};
pub use mpo::MpoOperator;
pub use mps::MpsState;
pub use tensor::{contract, svd_split, DenseTensor, TruncationPolicy};
