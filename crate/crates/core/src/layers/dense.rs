use rand::Rng;

use super::{glorot_uniform, Activation, LayerGradients};
use crate::error::{Error, Result};
use crate::linalg::{gemm, Op};
use crate::tensor::{Scalar, Tensor};

/// Fully connected layer: `activation(x · W + b)`, `W` is `[in, units]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    weights: Tensor<T>,
    bias: Tensor<T>,
    activation: Activation,
}

#[derive(Clone, Debug)]
pub struct DenseCache<T> {
    input: Tensor<T>,
    output: Tensor<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>, activation: Activation) -> Result<Self> {
        if weights.dims().len() != 2 {
            return Err(Error::InvalidShape(format!(
                "dense weights must be [in, units], got {}",
                weights.shape()
            )));
        }
        let units = weights.dims()[1];
        if bias.dims() != [units] {
            return Err(Error::ShapeMismatch {
                op: "dense bias",
                expected: vec![units],
                actual: bias.dims().to_vec(),
            });
        }
        Ok(Dense {
            weights,
            bias,
            activation,
        })
    }

    pub fn zeros(in_features: usize, units: usize, activation: Activation) -> Result<Self> {
        Self::new(
            Tensor::zeros(&[in_features, units])?,
            Tensor::zeros(&[units])?,
            activation,
        )
    }

    pub fn glorot<R: Rng + ?Sized>(
        in_features: usize,
        units: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let w = glorot_uniform(rng, in_features * units, in_features, units);
        Self::new(
            Tensor::from_vec(&[in_features, units], w)?,
            Tensor::zeros(&[units])?,
            activation,
        )
    }

    pub fn in_features(&self) -> usize {
        self.weights.dims()[0]
    }

    pub fn units(&self) -> usize {
        self.weights.dims()[1]
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &Tensor<T> {
        &self.weights
    }

    pub fn bias(&self) -> &Tensor<T> {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut Tensor<T> {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut Tensor<T> {
        &mut self.bias
    }

    /// Weights and bias, in that order.
    pub fn params_mut(&mut self) -> [&mut Tensor<T>; 2] {
        [&mut self.weights, &mut self.bias]
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<usize> {
        let d = input.dims();
        if d.len() != 2 || d[1] != self.in_features() {
            return Err(Error::ShapeMismatch {
                op: "dense input",
                expected: vec![d[0], self.in_features()],
                actual: d.to_vec(),
            });
        }
        Ok(d[0])
    }

    /// `x · W + b` without the activation.
    pub fn pre_activation(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let n = self.check_input(input)?;
        let units = self.units();
        let mut z = Vec::with_capacity(n * units);
        for _ in 0..n {
            z.extend_from_slice(self.bias.data());
        }
        gemm(n, self.in_features(), units, input.data(), Op::N, self.weights.data(), Op::N, T::one(), &mut z);
        Tensor::from_vec(&[n, units], z)
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let mut z = self.pre_activation(input)?;
        self.activation.apply(&mut z)?;
        Ok(z)
    }

    pub fn forward_cached(&self, input: &Tensor<T>) -> Result<(Tensor<T>, DenseCache<T>)> {
        let out = self.forward(input)?;
        let cache = DenseCache {
            input: input.clone(),
            output: out.clone(),
        };
        Ok((out, cache))
    }

    pub fn backward(
        &self,
        cache: &DenseCache<T>,
        upstream: &Tensor<T>,
        want_input: bool,
    ) -> Result<LayerGradients<T>> {
        let dz = self.activation.backward(&cache.output, &Self::check_upstream(cache, upstream)?);
        self.backward_from_pre_activation(&cache.input, &dz, want_input)
    }

    fn check_upstream(cache: &DenseCache<T>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
        if upstream.shape() != cache.output.shape() {
            return Err(Error::ShapeMismatch {
                op: "dense backward",
                expected: cache.output.dims().to_vec(),
                actual: upstream.dims().to_vec(),
            });
        }
        Ok(upstream.clone())
    }

    /// Backward pass when `dz` is already the gradient of the pre-activation
    /// (the fused softmax/cross-entropy path).
    pub(crate) fn backward_from_pre_activation(
        &self,
        input: &Tensor<T>,
        dz: &Tensor<T>,
        want_input: bool,
    ) -> Result<LayerGradients<T>> {
        let n = self.check_input(input)?;
        let (fin, units) = (self.in_features(), self.units());
        if dz.dims() != [n, units] {
            return Err(Error::ShapeMismatch {
                op: "dense backward",
                expected: vec![n, units],
                actual: dz.dims().to_vec(),
            });
        }
        let mut dw = vec![T::zero(); fin * units];
        gemm(fin, n, units, input.data(), Op::T, dz.data(), Op::N, T::zero(), &mut dw);
        let mut db = vec![T::zero(); units];
        for row in dz.data().chunks(units) {
            for (acc, &g) in db.iter_mut().zip(row) {
                *acc += g;
            }
        }
        let input_grad = if want_input {
            let mut dx = vec![T::zero(); n * fin];
            gemm(n, units, fin, dz.data(), Op::N, self.weights.data(), Op::T, T::zero(), &mut dx);
            Some(Tensor::from_vec(&[n, fin], dx)?)
        } else {
            None
        };
        Ok(LayerGradients {
            weights: Some(Tensor::from_vec(&[fin, units], dw)?),
            bias: Some(Tensor::from_vec(&[units], db)?),
            input: input_grad,
        })
    }
}
