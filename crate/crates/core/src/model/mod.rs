//! Event records, model parameters, response kernels and the exact
//! likelihood of the embedded Hawkes model.

pub mod kernels;
pub mod likelihood;
pub mod params;
pub mod record;

pub use kernels::{half_life, normalized_spatial_kernel, spatial_kernel, temporal_kernel};
pub use likelihood::{
    compensator, event_intensities, influence_matrix, intensity, log_likelihood, response, EventIntensity, KernelSel,
    ResponseTable,
};
pub use params::{EmbeddingPair, InfluenceMatrix, KernelBank, ModelParams, Points};
pub use record::{Event, EventRecord, Window};
