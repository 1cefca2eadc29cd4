//! Quaternion and real layers, model assembly, parameter counting and checkpoints.

mod checkpoint;
mod layers;
mod model;
mod spec;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use layers::{
    qlstm_forward, qlstm_step, qrnn_forward, qrnn_step, DenseLayer, DenseStep, LstmCell, LstmStep,
    QrnnParams, QrnnStep, QrnnTrace, Recurrent, RecurrentTrace, RnnCell, RnnStep, SequenceCell,
    CANDIDATE, FORGET, FORGET_BIAS_INIT, GATE_NAMES, INPUT, OUTPUT,
};
pub use model::{ForwardCache, ForwardMode, Layer, LayerTrace, Model};
pub use spec::{convert_units, param_count, LayerKind, LayerParamCount, LayerSpec, ModelSpec, ParamCount};
