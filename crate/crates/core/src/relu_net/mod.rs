//! Dense ReLU networks and the least-squares estimator.

pub(crate) mod network;
mod train;

pub use network::{
    forward, network_stats, sup_norm_bound, Layer, LayerDoc, NetworkDoc, NetworkStats,
    ReluNetwork,
};
pub use train::{train_least_squares, LogRow, TrainOutcome, TrainerConfig};
