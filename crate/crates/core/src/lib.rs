//! A small convolutional network framework and the sign-language letter
//! classifier built on it.
//!
//! Tensors are NHWC, row-major. Training runs in `f32`; every layer is also
//! generic over `f64` so gradients can be checked numerically.
//!
//! ```no_run
//! use signcnn::{data, model, train};
//!
//! let raw = data::load_csv("sign_mnist_train.csv")?;
//! let prepared = data::prepare(&raw);
//! let mut net = model::build_model(0);
//! let history = train::train(&mut net, &prepared.dataset, &train::TrainConfig::default())?;
//! model::save(&net, "model.scnn")?;
//! # Ok::<(), signcnn::Error>(())
//! ```

pub mod data;
pub mod error;
pub(crate) mod fsutil;
pub mod layers;
pub(crate) mod linalg;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod tensor;
pub mod train;

pub use error::{Error, ErrorClass, ModelFileError, PgmError, Result};
pub use model::{build_model, ModelConfig, SequentialModel};
pub use tensor::{Scalar, Shape, Tensor};
