//! Simulation and analysis of the q-state Potts model on the complete
//! bipartite graph `K_{n,n}`.
//!
//! * [`model`]: configurations, magnetizations, energies and distances.
//! * [`exact`]: brute-force Gibbs measure and Glauber kernel for small systems.
//! * [`ldp`]: relative entropy, `alpha_beta`, rate function, free energy functional.
//! * [`equilibrium`]: `beta_c`, the mean-field branch `s(beta)`, macrostates, `beta_s`.
//! * [`glauber`]: the heat-bath chain.
//! * [`coupling`]: the greedy coupling of two chains.
//! * [`paths`]: monotone paths and aggregate `g`-variation.
//! * [`mixing`]: exact projected total-variation curves and coupling-time experiments.
//! * [`verify`]: oracle comparison suites.

pub mod coupling;
pub mod equilibrium;
pub mod error;
pub mod exact;
pub mod glauber;
pub mod kernel;
pub mod ldp;
pub mod mixing;
pub mod model;
pub mod paths;
pub mod verify;

pub use error::{Error, Result};
pub use model::{
    BipartiteConfig, LatticePoint, MagnetizationPair, ModelParams, ProbVector, Side, SpinConfig,
};
