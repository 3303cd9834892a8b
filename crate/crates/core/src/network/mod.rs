//! Concatenation-shortcut MLPs: construction from a topology realization,
//! forward and backward passes, layerwise Jacobians and SGD training.

mod jacobian;
mod model;
mod train;

pub use jacobian::{gaussian_probes, ldi_report, JacobianReport, LayerJacobian, DEFAULT_PROBES};
pub use model::{
    softmax_cross_entropy, ForwardCache, Gradients, InitKind, InitScheme, Layer, LayerGradient,
    MlpModel,
};
pub use train::{evaluate, train, EpochRecord, LrSchedule, TrainConfig, TrainTrace};
