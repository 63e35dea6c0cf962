//! Minimal reverse-mode automatic differentiation with the neural blocks
//! the classifier and the neural tokenizers need.

pub mod crf;
mod gradcheck;
mod graph;
mod nn;
mod optim;
mod params;
mod persist;
mod tensor;

pub use gradcheck::{grad_check, relative_error, GradCheck};
pub use graph::{Graph, Var};
pub use nn::{BiLstm, BiLstmOutput, Direction, LstmParams, Mlp};
pub use optim::{Adam, AdamConfig};
pub use params::{Gradients, ParamId, ParamSet};
pub use persist::{decode_weights, encode_weights, load_weights, save_weights, WeightEntry, WeightManifest, WEIGHTS_VERSION};
pub use tensor::Tensor;

pub(crate) use graph::{log_sigmoid, sigmoid};
