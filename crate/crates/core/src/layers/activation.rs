use crate::error::{Error, Result};
use crate::tensor::{relu, Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    None,
    Relu,
    Softmax,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::None => "none",
            Activation::Relu => "relu",
            Activation::Softmax => "softmax",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "none" => Some(Activation::None),
            "relu" => Some(Activation::Relu),
            "softmax" => Some(Activation::Softmax),
            _ => None,
        }
    }

    /// Applies the activation to a `[N, K]` pre-activation in place.
    pub(crate) fn apply<T: Scalar>(self, z: &mut Tensor<T>) -> Result<()> {
        match self {
            Activation::None => {}
            Activation::Relu => z.data_mut().iter_mut().for_each(|x| *x = relu(*x)),
            Activation::Softmax => *z = softmax(z)?,
        }
        Ok(())
    }

    /// Gradient with respect to the pre-activation, given the activation output.
    ///
    /// ReLU's derivative at exactly zero is taken as zero.
    pub(crate) fn backward<T: Scalar>(self, output: &Tensor<T>, upstream: &Tensor<T>) -> Tensor<T> {
        match self {
            Activation::None => upstream.clone(),
            Activation::Relu => output
                .map2(upstream, |y, g| if y > T::zero() { g } else { T::zero() })
                .expect("activation output and upstream share a shape"),
            Activation::Softmax => {
                let k = *output.dims().last().unwrap();
                let mut dz = upstream.clone();
                for (row, p) in dz.data_mut().chunks_mut(k).zip(output.data().chunks(k)) {
                    let dot: T = row.iter().zip(p).map(|(&g, &p)| g * p).sum();
                    for (g, &p) in row.iter_mut().zip(p) {
                        *g = p * (*g - dot);
                    }
                }
                dz
            }
        }
    }
}

fn check_logits<T: Scalar>(logits: &Tensor<T>) -> Result<usize> {
    if logits.dims().len() != 2 {
        return Err(Error::InvalidShape(format!(
            "softmax expects [N, K] logits, got {}",
            logits.shape()
        )));
    }
    if !logits.all_finite() {
        return Err(Error::NonFinite("softmax logits"));
    }
    Ok(logits.dims()[1])
}

/// Row-wise softmax over `[N, K]` logits, computed with max subtraction.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let k = check_logits(logits)?;
    let mut out = logits.clone();
    for row in out.data_mut().chunks_mut(k) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            sum += *x;
        }
        for x in row.iter_mut() {
            *x = *x / sum;
        }
    }
    Ok(out)
}

/// Row-wise log-softmax over `[N, K]` logits.
pub fn log_softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let k = check_logits(logits)?;
    let mut out = logits.clone();
    for row in out.data_mut().chunks_mut(k) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = row.iter().map(|&x| (x - max).exp()).sum::<T>().ln() + max;
        for x in row.iter_mut() {
            *x = *x - lse;
        }
    }
    Ok(out)
}
