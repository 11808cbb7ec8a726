use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Non-overlapping max pooling over the last axis.
///
/// The pooled axis is truncated to a multiple of `window`: trailing elements that do not
/// fill a whole window are dropped. Ties route to the first maximal index.
#[derive(Debug, Clone)]
pub struct PoolCache {
    input_shape: Vec<usize>,
    /// flat input index chosen for each output element
    argmax: Vec<usize>,
}

pub fn pooled_len(length: usize, window: usize) -> usize {
    length.checked_div(window).unwrap_or(0)
}

pub fn maxpool1d_forward<T: Scalar>(window: usize, x: &Tensor<T>) -> Result<(Tensor<T>, PoolCache)> {
    if window < 1 {
        return Err(Error::invalid("pooling window must be at least 1"));
    }
    let length = *x.shape().last().expect("tensor has at least one axis");
    let out_len = pooled_len(length, window);
    if out_len == 0 {
        return Err(Error::shape(
            "maxpool1d_forward",
            format!("window {window} longer than axis {length}"),
        ));
    }
    let rows = x.len() / length;
    let mut out = Vec::with_capacity(rows * out_len);
    let mut argmax = Vec::with_capacity(rows * out_len);
    for r in 0..rows {
        for o in 0..out_len {
            let start = r * length + o * window;
            let mut best = start;
            for i in start + 1..start + window {
                if x.data()[i] > x.data()[best] {
                    best = i;
                }
            }
            out.push(x.data()[best]);
            argmax.push(best);
        }
    }
    let mut shape = x.shape().to_vec();
    *shape.last_mut().unwrap() = out_len;
    let cache = PoolCache {
        input_shape: x.shape().to_vec(),
        argmax,
    };
    Ok((Tensor::from_vec(&shape, out)?, cache))
}

pub fn maxpool1d_backward<T: Scalar>(cache: PoolCache, dy: &Tensor<T>) -> Result<Tensor<T>> {
    if dy.len() != cache.argmax.len() {
        return Err(Error::Cache(format!(
            "pool gradient has {} values, cache expects {}",
            dy.len(),
            cache.argmax.len()
        )));
    }
    let mut dx = Tensor::zeros(&cache.input_shape);
    for (&src, &g) in cache.argmax.iter().zip(dy.data()) {
        dx.data_mut()[src] += g;
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(&[x.len()], x.to_vec()).unwrap()
    }

    #[test]
    fn window_two() {
        let (y, _) = maxpool1d_forward(2, &v(&[1.0, 3.0, 2.0, 2.0])).unwrap();
        assert_eq!(y.data(), &[3.0, 2.0]);
    }

    #[test]
    fn window_one_is_identity() {
        let x = Tensor::from_fn(&[2, 3, 5], |i| (i as f64).cos());
        let (y, c) = maxpool1d_forward(1, &x).unwrap();
        assert_eq!(y, x);
        assert_eq!(maxpool1d_backward(c, &x).unwrap(), x);
    }

    #[test]
    fn ties_route_to_first_index() {
        let (_, c) = maxpool1d_forward(2, &v(&[2.0, 2.0])).unwrap();
        let dx = maxpool1d_backward(c, &v(&[1.0])).unwrap();
        assert_eq!(dx.data(), &[1.0, 0.0]);
    }

    #[test]
    fn trailing_elements_truncated() {
        let (y, c) = maxpool1d_forward(2, &v(&[1.0, 0.0, 5.0, 4.0, 9.0])).unwrap();
        assert_eq!(y.data(), &[1.0, 5.0]);
        let dx = maxpool1d_backward(c, &v(&[1.0, 1.0])).unwrap();
        assert_eq!(dx.data(), &[1.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn invalid_windows() {
        assert!(maxpool1d_forward(0, &v(&[1.0])).is_err());
        assert!(maxpool1d_forward(3, &v(&[1.0, 2.0])).is_err());
    }
}
