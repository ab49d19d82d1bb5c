//! Self-organizing maps for distributional data under the L2 Wasserstein
//! distance, with optional adaptive relevance weights.

mod aligned;
mod engine;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod quantile;
pub mod svg;
pub mod table;
pub mod topology;
pub mod train;
pub mod validity;
pub mod wasserstein;
pub mod weights;

pub use error::{Error, ErrorKind, Result};
pub use pipeline::{Algorithm, RunConfig, RunOutcome};
pub use quantile::{barycenter, register, union_grid, HistogramSpec, QuantileFunction};
pub use table::{standardize, standardize_with_scales, variable_std, DistributionalTable};
pub use topology::{
    default_radii, kernel, radius_schedule, suggest_map_size, KernelParams, MapGrid, NeuronMetric,
    Topology,
};
pub use train::{
    assignment_step, criterion, multi_restart, representation_step, train, train_observed,
    weighting_step, Assignment, EpochRecord, MapState, Method, Phase, Prototypes, TrainConfig,
    TrainEvent, TrainedMap, WeightingOutcome,
};
pub use validity::{
    ari, evaluate_map, nmi, nmi_detailed, pairwise_dissimilarities, purity, silhouette,
    silhouette_fast, silhouette_simplified, silhouette_simplified_topo, silhouette_topo,
    topographic_error, IndexReport, PartialSilhouette,
};
pub use wasserstein::{
    adaptive_distance, decompose, generalized_distance, mv_w2_squared, w2_squared,
    DistanceComponents,
};
pub use weights::{Scheme, WeightMatrix, PRODUCT_TOLERANCE};
