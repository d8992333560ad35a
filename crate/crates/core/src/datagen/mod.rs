//! Randomized excitation and snapshot assembly.

mod dataset;
mod excitation;
mod seed;
mod snapshot;

pub use dataset::{load_dataset, save_dataset, DatasetMeta, LAYOUT_NOTE};
pub use excitation::{
    collect, initial_state_sampler, reduced_lqr_gain, split, ExcitationMode, ExcitationSpec, InitialDistribution,
    InitialScheme, Perturbation, SinusoidReference, MAX_REDRAWS,
};
pub use seed::derive_seed;
pub use snapshot::{assemble, SnapshotDataset};
