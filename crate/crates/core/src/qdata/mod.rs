//! Acoustic quaternion features, synthetic sequence tasks and feature files.

mod features;
mod io;
mod task;

pub use features::{assemble_quaternions, delta, delta_order, EnergyMatrix, QuaternionSequence, DELTA_WINDOW};
pub use io::{decode_features, encode_features, read_energy_csv, read_features, write_features, FEATURES_MAGIC};
pub use task::{adding_target, frames_dataset, gen_task, Dataset, Metric, Sample, Split, Supervision, TaskKind, TaskSpec};
