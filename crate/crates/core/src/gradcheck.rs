//! Central finite differences, the reference that every analytic backward pass is checked against.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Numerical gradient of `f` at `x` by central differences,
/// `(f(x + eps e_i) - f(x - eps e_i)) / (2 eps)` per coordinate.
pub fn finite_diff_grad<T, F>(mut f: F, x: &Tensor<T>, eps: T) -> Result<Tensor<T>>
where
    T: Scalar,
    F: FnMut(&Tensor<T>) -> Result<T>,
{
    if !(eps > T::zero()) {
        return Err(Error::invalid("finite difference step must be positive"));
    }
    let mut probe = x.clone();
    let mut grad = Tensor::zeros(x.shape());
    let two_eps = eps + eps;
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let plus = eval(&mut f, &probe, i)?;
        probe.data_mut()[i] = orig - eps;
        let minus = eval(&mut f, &probe, i)?;
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (plus - minus) / two_eps;
    }
    Ok(grad)
}

fn eval<T: Scalar, F: FnMut(&Tensor<T>) -> Result<T>>(f: &mut F, x: &Tensor<T>, i: usize) -> Result<T> {
    let v = f(x)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NumericOverflow(format!(
            "objective evaluation at coordinate {i}"
        )))
    }
}

/// `|a - b| / max(1e-8, |a| + |b|)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
}

/// Largest coordinate-wise [`relative_error`] between two equally sized slices.
pub fn max_relative_error<T: Scalar>(analytic: &[T], numeric: &[T]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient lengths differ");
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| relative_error(a.as_f64(), n.as_f64()))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::reduce_sum;

    #[test]
    fn square_gradient() {
        let x = Tensor::<f64>::from_vec(&[1], vec![3.0]).unwrap();
        let g = finite_diff_grad(|t| Ok(t.data().iter().map(|v| v * v).sum()), &x, 1e-5).unwrap();
        assert!((g.data()[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn linear_sum_gradient_is_ones() {
        let x = Tensor::<f64>::from_vec(&[2, 3], vec![0.3, -1.0, 2.5, 7.0, -0.1, 4.0]).unwrap();
        let g = finite_diff_grad(|t| Ok(reduce_sum(t)), &x, 1e-5).unwrap();
        assert!(g.data().iter().all(|v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn non_finite_objective_is_an_error() {
        let x = Tensor::<f64>::from_vec(&[1], vec![0.0]).unwrap();
        let r = finite_diff_grad(|t| Ok(1.0 / (t.data()[0] - 1e-5)), &x, 1e-5);
        assert!(matches!(r, Err(Error::NumericOverflow(_))));
    }

    #[test]
    fn relative_error_is_stable_near_zero() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!(relative_error(1e-12, 2e-12) < 1e-3);
        assert!((relative_error(1.0, 3.0) - 0.5).abs() < 1e-15);
    }
}
