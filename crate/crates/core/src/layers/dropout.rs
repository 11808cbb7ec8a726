use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Inverted dropout: in training each element survives with probability `1 - rate` and is
/// scaled by `1 / (1 - rate)`; evaluation is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutLayer {
    pub rate: f64,
    pub mode: Mode,
}

#[derive(Debug, Clone)]
pub struct DropoutCache<T> {
    /// `None` when the forward pass was the identity.
    mask: Option<Tensor<T>>,
    shape: Vec<usize>,
}

pub fn check_rate(rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::invalid(format!("dropout rate {rate} outside [0, 1)")))
    }
}

impl DropoutLayer {
    pub fn new(rate: f64, mode: Mode) -> Result<Self> {
        check_rate(rate)?;
        Ok(Self { rate, mode })
    }

    pub fn forward<T: Scalar>(&self, x: &Tensor<T>, rng: &mut SeededRng) -> Result<(Tensor<T>, DropoutCache<T>)> {
        dropout_forward(self.rate, self.mode, x, rng)
    }
}

/// Eval mode, or a zero rate, consumes no randomness.
pub fn dropout_forward<T: Scalar>(
    rate: f64,
    mode: Mode,
    x: &Tensor<T>,
    rng: &mut SeededRng,
) -> Result<(Tensor<T>, DropoutCache<T>)> {
    check_rate(rate)?;
    if mode == Mode::Eval || rate == 0.0 {
        let cache = DropoutCache {
            mask: None,
            shape: x.shape().to_vec(),
        };
        return Ok((x.clone(), cache));
    }
    let keep = T::lit(1.0 / (1.0 - rate));
    let mask = Tensor::from_fn(x.shape(), |_| if rng.uniform() < rate { T::zero() } else { keep });
    let y = x.mul(&mask)?;
    let cache = DropoutCache {
        mask: Some(mask),
        shape: x.shape().to_vec(),
    };
    Ok((y, cache))
}

pub fn dropout_backward<T: Scalar>(cache: DropoutCache<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
    if dy.shape() != cache.shape.as_slice() {
        return Err(Error::Cache(format!(
            "dropout gradient {:?} vs cached {:?}",
            dy.shape(),
            cache.shape
        )));
    }
    match cache.mask {
        Some(mask) => dy.mul(&mask),
        None => Ok(dy.clone()),
    }
}

impl<T> DropoutCache<T> {
    pub fn mask(&self) -> Option<&Tensor<T>> {
        self.mask.as_ref()
    }
}
