use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Fan-in and fan-out of a weight tensor.
///
/// Dense weights are `[in, out]`; convolution kernels are `[filters, channels, width]`
/// and count the receptive field on both sides.
pub fn fans(shape: &[usize]) -> (usize, usize) {
    match shape {
        [n] => (*n, *n),
        [fan_in, fan_out] => (*fan_in, *fan_out),
        [out, inp, rest @ ..] => {
            let receptive: usize = rest.iter().product();
            (inp * receptive, out * receptive)
        }
        [] => (0, 0),
    }
}

/// Glorot-uniform initialization: samples from `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_init<T: Scalar>(shape: &[usize], rng: &mut SeededRng) -> Result<Tensor<T>> {
    if shape.is_empty() {
        return Err(Error::invalid("glorot_init needs a non-empty shape"));
    }
    let (fan_in, fan_out) = fans(shape);
    if fan_in + fan_out == 0 {
        return Err(Error::invalid(format!("degenerate shape {shape:?}")));
    }
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Ok(Tensor::from_fn(shape, |_| T::lit(rng.uniform_range(-bound, bound))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let a: Tensor<f64> = glorot_init(&[4, 4], &mut SeededRng::new(5, 0)).unwrap();
        let b: Tensor<f64> = glorot_init(&[4, 4], &mut SeededRng::new(5, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn within_bound() {
        let t: Tensor<f64> = glorot_init(&[100, 100], &mut SeededRng::new(1, 0)).unwrap();
        let bound = (6.0f64 / 200.0).sqrt();
        assert!(t.data().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn zero_mean_large_sample() {
        // std of the mean is bound/sqrt(3)/1000 ~ 3.2e-5; 0.005 is far outside 3 sigma
        let t: Tensor<f64> = glorot_init(&[1000, 1000], &mut SeededRng::new(2, 0)).unwrap();
        let mean = t.data().iter().sum::<f64>() / t.len() as f64;
        assert!(mean.abs() < 0.005);
    }

    #[test]
    fn empty_shape_rejected() {
        assert!(glorot_init::<f64>(&[], &mut SeededRng::new(0, 0)).is_err());
    }

    #[test]
    fn conv_fans_include_receptive_field() {
        assert_eq!(fans(&[32, 3, 5]), (15, 160));
    }
}
