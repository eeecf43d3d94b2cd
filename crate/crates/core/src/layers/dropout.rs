use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Inverted dropout: survivors are scaled by `1 / (1 - rate)` at training
/// time, inference is the identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dropout {
    rate: f64,
}

/// Per-element multiplier applied in the forward pass (0 or `1/(1-rate)`).
/// `None` means the forward pass was the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMask<T>(Option<Vec<T>>);

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidConfig(format!(
                "dropout rate must be in [0, 1), got {rate}"
            )));
        }
        Ok(Dropout { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn forward<T: Scalar, R: Rng + ?Sized>(
        &self,
        input: &Tensor<T>,
        training: bool,
        rng: &mut R,
    ) -> (Tensor<T>, DropoutMask<T>) {
        if !training || self.rate == 0.0 {
            return (input.clone(), DropoutMask(None));
        }
        let scale = T::from_f64(1.0 / (1.0 - self.rate));
        let mask: Vec<T> = (0..input.len())
            .map(|_| {
                if rng.gen::<f64>() < self.rate {
                    T::zero()
                } else {
                    scale
                }
            })
            .collect();
        let mut out = input.clone();
        for (x, &m) in out.data_mut().iter_mut().zip(&mask) {
            *x *= m;
        }
        (out, DropoutMask(Some(mask)))
    }
}

impl<T: Scalar> DropoutMask<T> {
    pub fn is_identity(&self) -> bool {
        self.0.is_none()
    }

    pub fn backward(&self, upstream: &Tensor<T>) -> Result<Tensor<T>> {
        match &self.0 {
            None => Ok(upstream.clone()),
            Some(mask) => {
                if mask.len() != upstream.len() {
                    return Err(Error::LengthMismatch {
                        what: "dropout mask vs upstream gradient",
                        left: mask.len(),
                        right: upstream.len(),
                    });
                }
                let mut g = upstream.clone();
                for (x, &m) in g.data_mut().iter_mut().zip(mask) {
                    *x *= m;
                }
                Ok(g)
            }
        }
    }
}
