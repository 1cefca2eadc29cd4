//! Losses, RMSprop, learning-rate annealing, dropout and the training loop.

mod loss;
mod optim;
mod train;

pub use loss::{loss, sequence_loss, sequence_loss_difference, Batch, LossKind, LossOutput, Targets};
pub use optim::{anneal, clip_global_norm, dropout_mask, rmsprop_step, RmsPropState};
pub use train::{evaluate, train, train_model, EpochRecord, RunMetrics, TrainConfig};
