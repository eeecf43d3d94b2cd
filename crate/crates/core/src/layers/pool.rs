use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// 2×2 max pooling with stride 2. A trailing odd row or column is dropped.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MaxPool2D;

/// Flat input index of the winning element for every output element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoolRecord {
    input_dims: [usize; 4],
    output_dims: [usize; 4],
    argmax: Vec<usize>,
}

impl PoolRecord {
    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }
}

impl MaxPool2D {
    pub const WINDOW: usize = 2;

    pub fn output_dims(&self, input: &[usize]) -> Result<[usize; 4]> {
        if input.len() != 4 || input[1] < 2 || input[2] < 2 {
            return Err(Error::InvalidShape(format!(
                "max pooling needs [N, H≥2, W≥2, C] input, got {input:?}"
            )));
        }
        Ok([input[0], input[1] / 2, input[2] / 2, input[3]])
    }

    /// Ties go to the first element in row-major window order.
    pub fn forward<T: Scalar>(&self, input: &Tensor<T>) -> Result<(Tensor<T>, PoolRecord)> {
        let out_dims = self.output_dims(input.dims())?;
        let d = input.dims();
        let (n, h, w, c) = (d[0], d[1], d[2], d[3]);
        let (ho, wo) = (out_dims[1], out_dims[2]);
        let x = input.data();
        let mut out = Vec::with_capacity(n * ho * wo * c);
        let mut argmax = Vec::with_capacity(out.capacity());
        for b in 0..n {
            for oy in 0..ho {
                for ox in 0..wo {
                    for ch in 0..c {
                        let mut best_idx = ((b * h + 2 * oy) * w + 2 * ox) * c + ch;
                        let mut best = x[best_idx];
                        for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                            let idx = ((b * h + 2 * oy + dy) * w + 2 * ox + dx) * c + ch;
                            if x[idx] > best {
                                best = x[idx];
                                best_idx = idx;
                            }
                        }
                        out.push(best);
                        argmax.push(best_idx);
                    }
                }
            }
        }
        let record = PoolRecord {
            input_dims: [n, h, w, c],
            output_dims: out_dims,
            argmax,
        };
        Ok((Tensor::from_vec(&out_dims, out)?, record))
    }

    pub fn backward<T: Scalar>(&self, record: &PoolRecord, upstream: &Tensor<T>) -> Result<Tensor<T>> {
        if upstream.dims() != record.output_dims {
            return Err(Error::ShapeMismatch {
                op: "maxpool backward",
                expected: record.output_dims.to_vec(),
                actual: upstream.dims().to_vec(),
            });
        }
        let mut grad = Tensor::zeros(&record.input_dims)?;
        let g = grad.data_mut();
        for (&idx, &u) in record.argmax.iter().zip(upstream.data()) {
            g[idx] += u;
        }
        Ok(grad)
    }
}
