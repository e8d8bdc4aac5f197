//! Weighted multi-objective land-allocation model on a grid, Markov chain
//! samplers for its Boltzmann distribution, and the degradation-loss
//! analysis built on top of them.

pub mod analysis;
pub mod degradation;
pub mod enumerator;
pub mod error;
pub mod field_io;
pub mod lattice;
pub mod rng;
pub mod sampler;
pub mod sweep;

pub use degradation::{apply_degradation, DegradationSpec};
pub use error::{Error, Result};
pub use lattice::{
    delta_phi_single_flip, evaluate, neighbor_match_count, AllocationMap, LandUse, ModelParams,
    ObjectiveValue, SuitabilityField, NUM_USES,
};
pub use sampler::{run_chain, ChainConfig, Engine, InitState, SampleRecord};
