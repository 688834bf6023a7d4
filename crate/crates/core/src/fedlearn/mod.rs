//! Model-free estimation: a regression network trained by federated averaging
//! on NBA-OMP labels, plus communication-overhead accounting.

mod dataset;
pub mod io;
mod mlp;
mod overhead;
mod train;

pub use dataset::{
    build_dataset, build_labeled_dataset, pilot_features, user_sectors, DatasetSpec, LabeledDataset, LocalDataset,
    Standardizer,
};
pub use mlp::{forward_batch, loss_and_gradient, model_forward, MlpSpec, ModelParams};
pub use overhead::{overhead_cl, overhead_fl, overhead_ratio, OverheadInputs};
pub use train::{
    fedavg_round, local_gradient, mean_loss, prediction_nmse, rowwise_nmse, train, train_observed, Batch, LocalStep,
    TrainOptions, TrainOutcome, DIVERGENCE_FACTOR,
};
