//! Forward and backward passes for the layer kinds the classifier uses.
//!
//! Every layer has a cached forward (`forward_cached`) that keeps what the
//! backward pass needs, and a `backward` that consumes that cache. The free
//! functions at the bottom of this module are stateless conveniences that
//! recompute the forward pass; tests and gradient checks use them.

mod activation;
mod conv;
mod dense;
mod dropout;
mod pool;

pub use activation::{log_softmax, softmax, Activation};
pub use conv::{Conv2D, ConvCache};
pub use dense::{Dense, DenseCache};
pub use dropout::{Dropout, DropoutMask};
pub use pool::{MaxPool2D, PoolRecord};

use rand::Rng;

use crate::error::Result;
use crate::tensor::{Scalar, Tensor};

/// Gradients produced by one backward call.
///
/// `weights` and `bias` mirror the layer's parameter shapes; they are `None`
/// for parameter-free layers. `input` is `None` only when the caller asked
/// the layer to skip the input gradient (the first layer of a model).
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradients<T> {
    pub weights: Option<Tensor<T>>,
    pub bias: Option<Tensor<T>>,
    pub input: Option<Tensor<T>>,
}

impl<T: Scalar> LayerGradients<T> {
    pub(crate) fn input_only(input: Tensor<T>) -> Self {
        LayerGradients {
            weights: None,
            bias: None,
            input: Some(input),
        }
    }
}

/// Glorot-uniform sample for a kernel with the given fan-in and fan-out.
pub(crate) fn glorot_uniform<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    count: usize,
    fan_in: usize,
    fan_out: usize,
) -> Vec<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..count)
        .map(|_| T::from_f64(rng.gen_range(-limit..limit)))
        .collect()
}

pub fn conv2d_forward<T: Scalar>(input: &Tensor<T>, layer: &Conv2D<T>) -> Result<Tensor<T>> {
    layer.forward(input)
}

pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    layer: &Conv2D<T>,
    upstream: &Tensor<T>,
) -> Result<LayerGradients<T>> {
    let (_, cache) = layer.forward_cached(input)?;
    layer.backward(&cache, upstream, true)
}

pub fn maxpool_forward<T: Scalar>(input: &Tensor<T>) -> Result<(Tensor<T>, PoolRecord)> {
    MaxPool2D.forward(input)
}

pub fn maxpool_backward<T: Scalar>(record: &PoolRecord, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    MaxPool2D.backward(record, upstream)
}

pub fn dense_forward<T: Scalar>(input: &Tensor<T>, layer: &Dense<T>) -> Result<Tensor<T>> {
    layer.forward(input)
}

pub fn dense_backward<T: Scalar>(
    input: &Tensor<T>,
    layer: &Dense<T>,
    upstream: &Tensor<T>,
) -> Result<LayerGradients<T>> {
    let (_, cache) = layer.forward_cached(input)?;
    layer.backward(&cache, upstream, true)
}

pub fn dropout_forward<T: Scalar, R: Rng + ?Sized>(
    input: &Tensor<T>,
    layer: &Dropout,
    training: bool,
    rng: &mut R,
) -> (Tensor<T>, DropoutMask<T>) {
    layer.forward(input, training, rng)
}

pub fn dropout_backward<T: Scalar>(mask: &DropoutMask<T>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    mask.backward(upstream)
}
