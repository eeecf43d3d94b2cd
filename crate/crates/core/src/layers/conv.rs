use rand::Rng;

use super::{glorot_uniform, LayerGradients};
use crate::error::{Error, Result};
use crate::linalg::{gemm, Op};
use crate::tensor::{relu, Scalar, Tensor};

/// 3×3 valid cross-correlation, stride 1, with optional fused ReLU.
///
/// Weights are `[kh, kw, in_channels, filters]`, bias is `[filters]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2D<T> {
    weights: Tensor<T>,
    bias: Tensor<T>,
    relu: bool,
}

/// What [`Conv2D::backward`] needs from the forward pass.
#[derive(Clone, Debug)]
pub struct ConvCache<T> {
    input_dims: [usize; 4],
    /// im2col matrix, `[N·Ho·Wo, 9·Cin]`.
    cols: Vec<T>,
    output: Tensor<T>,
}

impl<T: Scalar> Conv2D<T> {
    pub const KERNEL: usize = 3;

    pub fn new(weights: Tensor<T>, bias: Tensor<T>, relu: bool) -> Result<Self> {
        let wd = weights.dims();
        if wd.len() != 4 || wd[0] != Self::KERNEL || wd[1] != Self::KERNEL {
            return Err(Error::InvalidShape(format!(
                "conv weights must be [3, 3, Cin, F], got {}",
                weights.shape()
            )));
        }
        if bias.dims() != [wd[3]] {
            return Err(Error::ShapeMismatch {
                op: "conv2d bias",
                expected: vec![wd[3]],
                actual: bias.dims().to_vec(),
            });
        }
        Ok(Conv2D {
            weights,
            bias,
            relu,
        })
    }

    pub fn zeros(in_channels: usize, filters: usize, relu: bool) -> Result<Self> {
        Self::new(
            Tensor::zeros(&[Self::KERNEL, Self::KERNEL, in_channels, filters])?,
            Tensor::zeros(&[filters])?,
            relu,
        )
    }

    /// Glorot-uniform kernel, zero bias.
    pub fn glorot<R: Rng + ?Sized>(
        in_channels: usize,
        filters: usize,
        relu: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let area = Self::KERNEL * Self::KERNEL;
        let w = glorot_uniform(rng, area * in_channels * filters, area * in_channels, area * filters);
        Self::new(
            Tensor::from_vec(&[Self::KERNEL, Self::KERNEL, in_channels, filters], w)?,
            Tensor::zeros(&[filters])?,
            relu,
        )
    }

    pub fn in_channels(&self) -> usize {
        self.weights.dims()[2]
    }

    pub fn filters(&self) -> usize {
        self.weights.dims()[3]
    }

    pub fn has_relu(&self) -> bool {
        self.relu
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

    pub fn output_dims(&self, input: &[usize]) -> Result<[usize; 4]> {
        if input.len() != 4 {
            return Err(Error::InvalidShape(format!(
                "conv2d expects [N, H, W, C] input, got {input:?}"
            )));
        }
        if input[3] != self.in_channels() {
            return Err(Error::ShapeMismatch {
                op: "conv2d input channels",
                expected: vec![self.in_channels()],
                actual: vec![input[3]],
            });
        }
        if input[1] < Self::KERNEL || input[2] < Self::KERNEL {
            return Err(Error::InvalidShape(format!(
                "conv2d input {input:?} is smaller than the 3×3 kernel"
            )));
        }
        Ok([input[0], input[1] - 2, input[2] - 2, self.filters()])
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward_cached(input)?.0)
    }

    pub fn forward_cached(&self, input: &Tensor<T>) -> Result<(Tensor<T>, ConvCache<T>)> {
        let out_dims = self.output_dims(input.dims())?;
        let [n, h, w, c] = [
            input.dims()[0],
            input.dims()[1],
            input.dims()[2],
            input.dims()[3],
        ];
        let (ho, wo, f) = (out_dims[1], out_dims[2], out_dims[3]);
        let rows = n * ho * wo;
        let kdim = Self::KERNEL * Self::KERNEL * c;

        let cols = im2col(input.data(), n, h, w, c, ho, wo);
        let mut out = vec![T::zero(); rows * f];
        gemm(rows, kdim, f, &cols, Op::N, self.weights.data(), Op::N, T::zero(), &mut out);
        let bias = self.bias.data();
        for row in out.chunks_mut(f) {
            for (y, &b) in row.iter_mut().zip(bias) {
                *y += b;
                if self.relu {
                    *y = relu(*y);
                }
            }
        }
        let output = Tensor::from_vec(&out_dims, out)?;
        let cache = ConvCache {
            input_dims: [n, h, w, c],
            cols,
            output: output.clone(),
        };
        Ok((output, cache))
    }

    pub fn backward(
        &self,
        cache: &ConvCache<T>,
        upstream: &Tensor<T>,
        want_input: bool,
    ) -> Result<LayerGradients<T>> {
        if upstream.shape() != cache.output.shape() {
            return Err(Error::ShapeMismatch {
                op: "conv2d backward",
                expected: cache.output.dims().to_vec(),
                actual: upstream.dims().to_vec(),
            });
        }
        let [n, h, w, c] = cache.input_dims;
        let (ho, wo, f) = (h - 2, w - 2, self.filters());
        let rows = n * ho * wo;
        let kdim = Self::KERNEL * Self::KERNEL * c;

        let dz = if self.relu {
            cache
                .output
                .map2(upstream, |y, g| if y > T::zero() { g } else { T::zero() })?
        } else {
            upstream.clone()
        };

        let mut dw = vec![T::zero(); kdim * f];
        gemm(kdim, rows, f, &cache.cols, Op::T, dz.data(), Op::N, T::zero(), &mut dw);
        let mut db = vec![T::zero(); f];
        for row in dz.data().chunks(f) {
            for (acc, &g) in db.iter_mut().zip(row) {
                *acc += g;
            }
        }

        let input = if want_input {
            let mut dcols = vec![T::zero(); rows * kdim];
            gemm(rows, f, kdim, dz.data(), Op::N, self.weights.data(), Op::T, T::zero(), &mut dcols);
            Some(Tensor::from_vec(&[n, h, w, c], col2im(&dcols, n, h, w, c, ho, wo))?)
        } else {
            None
        };

        Ok(LayerGradients {
            weights: Some(Tensor::from_vec(self.weights.dims(), dw)?),
            bias: Some(Tensor::from_vec(&[f], db)?),
            input,
        })
    }
}

/// Row `(n, oy, ox)` holds the 3×3×C patch in `(ky, kx, c)` order, which is
/// the flattened weight layout, so `cols · W` is the convolution.
fn im2col<T: Scalar>(x: &[T], n: usize, h: usize, w: usize, c: usize, ho: usize, wo: usize) -> Vec<T> {
    let run = 3 * c;
    let kdim = 3 * run;
    let mut cols = vec![T::zero(); n * ho * wo * kdim];
    let mut dst = cols.chunks_exact_mut(kdim);
    for b in 0..n {
        let img = &x[b * h * w * c..(b + 1) * h * w * c];
        for oy in 0..ho {
            for ox in 0..wo {
                let row = dst.next().unwrap();
                for ky in 0..3 {
                    let src = ((oy + ky) * w + ox) * c;
                    row[ky * run..(ky + 1) * run].copy_from_slice(&img[src..src + run]);
                }
            }
        }
    }
    cols
}

fn col2im<T: Scalar>(cols: &[T], n: usize, h: usize, w: usize, c: usize, ho: usize, wo: usize) -> Vec<T> {
    let run = 3 * c;
    let kdim = 3 * run;
    let mut x = vec![T::zero(); n * h * w * c];
    let mut src = cols.chunks_exact(kdim);
    for b in 0..n {
        let img = &mut x[b * h * w * c..(b + 1) * h * w * c];
        for oy in 0..ho {
            for ox in 0..wo {
                let row = src.next().unwrap();
                for ky in 0..3 {
                    let dst = ((oy + ky) * w + ox) * c;
                    for (acc, &g) in img[dst..dst + run].iter_mut().zip(&row[ky * run..(ky + 1) * run]) {
                        *acc += g;
                    }
                }
            }
        }
    }
    x
}
