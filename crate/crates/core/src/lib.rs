//! Quaternion recurrent neural networks.
//!
//! Quaternion-valued dense, recurrent and LSTM layers built on the Hamilton
//! product, trained with hand-derived backpropagation through time and
//! checked against finite differences. Real-valued counterparts share the
//! same kernels and serve as baselines.

pub mod error;
pub mod qbench;
pub mod qcli;
pub mod qcore;
pub mod qdata;
pub mod qgrad;
pub mod qinit;
pub mod qnet;
pub mod qtrain;
pub mod rng;

pub use error::{Error, FormatError, Result};
