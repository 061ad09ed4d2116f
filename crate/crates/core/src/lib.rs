//! Joint estimation of a uniform field `B0` and its gradient `g` on an
//! equidistant chain of dipolar-coupled spin-1/2 sensors.
//!
//! The crate is layered bottom-up:
//!
//! * [`qsim`]: dense statevector engine (rotations, diagonal phases, exact and
//!   Trotterized evolution).
//! * [`chain`]: chain geometry, sensing matrix, generator eigenvalue tables and
//!   the dipolar entangling Hamiltonian.
//! * [`fisher`]: outcome probabilities, parameter-shift derivatives, classical
//!   and quantum Fisher information matrices and the log-det objective.
//! * [`bounds`]: standard-quantum-limit and GHZ closed forms plus the
//!   probability-simplex benchmark `det(Q*)`.
//! * [`varopt`]: layered dipolar ansatz, decoder tiers, CMA-ES and grid runs.
//! * [`analysis`]: motif reports, saturation and tier tables.
//!
//! Data-parallel loops (simplex restarts, CMA-ES populations, grid lineages)
//! go through [`par`], which uses rayon when the `parallel` feature is on and
//! plain iterators otherwise. Results are identical either way.

pub mod analysis;
pub mod bounds;
pub mod chain;
pub mod error;
pub mod fisher;
pub mod par;
pub mod qsim;
pub mod rng;
pub mod varopt;

pub use error::{Error, Result};
