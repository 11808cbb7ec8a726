use crate::error::{Error, Result};
use crate::init::glorot_init;
use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::tensor::{matmul, Tensor};

/// Fully connected layer `y = x W + b` with `W: [in x out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct DenseCache<T> {
    input: Tensor<T>,
    in_dim: usize,
    out_dim: usize,
}

#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    pub d_input: Tensor<T>,
    pub d_weights: Tensor<T>,
    pub d_bias: Tensor<T>,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let (_, out) = weights.dims2("dense")?;
        if bias.shape() != [out] {
            return Err(Error::shape(
                "dense",
                format!("bias {:?} for weights {:?}", bias.shape(), weights.shape()),
            ));
        }
        Ok(Self { weights, bias })
    }

    pub fn glorot(in_dim: usize, out_dim: usize, rng: &mut SeededRng) -> Result<Self> {
        Self::new(glorot_init(&[in_dim, out_dim], rng)?, Tensor::zeros(&[out_dim]))
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, DenseCache<T>)> {
        dense_forward(&self.weights, &self.bias, x)
    }

    pub fn backward(&self, cache: DenseCache<T>, dy: &Tensor<T>) -> Result<DenseGrads<T>> {
        dense_backward(&self.weights, cache, dy)
    }
}

pub fn dense_forward<T: Scalar>(
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    x: &Tensor<T>,
) -> Result<(Tensor<T>, DenseCache<T>)> {
    let (in_dim, out_dim) = weights.dims2("dense_forward")?;
    let (_, cols) = x.dims2("dense_forward")?;
    if cols != in_dim {
        return Err(Error::shape(
            "dense_forward",
            format!("input has {cols} columns, layer expects {in_dim}"),
        ));
    }
    let y = matmul(x, weights)?.add_row_vector(bias)?;
    let cache = DenseCache {
        input: x.clone(),
        in_dim,
        out_dim,
    };
    Ok((y, cache))
}

/// `dW = x^T dY`, `db = column sums of dY`, `dX = dY W^T`.
pub fn dense_backward<T: Scalar>(weights: &Tensor<T>, cache: DenseCache<T>, dy: &Tensor<T>) -> Result<DenseGrads<T>> {
    if weights.shape() != [cache.in_dim, cache.out_dim] {
        return Err(Error::Cache(format!(
            "dense cache for [{}x{}] used with weights {:?}",
            cache.in_dim,
            cache.out_dim,
            weights.shape()
        )));
    }
    let batch = cache.input.shape()[0];
    if dy.shape() != [batch, cache.out_dim] {
        return Err(Error::Cache(format!(
            "dense gradient {:?}, expected [{batch}, {}]",
            dy.shape(),
            cache.out_dim
        )));
    }
    let d_weights = matmul(&cache.input.transpose()?, dy)?;
    let d_bias = dy.column_sums()?;
    let d_input = matmul(dy, &weights.transpose()?)?;
    Ok(DenseGrads {
        d_input,
        d_weights,
        d_bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{finite_diff_grad, max_relative_error};

    fn t(shape: &[usize], v: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(shape, v.to_vec()).unwrap()
    }

    #[test]
    fn identity_layer() {
        let layer = DenseLayer::new(Tensor::eye(2), Tensor::zeros(&[2])).unwrap();
        let (y, _) = layer.forward(&t(&[1, 2], &[1.0, 2.0])).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0]);
    }

    #[test]
    fn hand_forward() {
        let layer = DenseLayer::new(t(&[2, 1], &[1.0, 1.0]), t(&[1], &[0.5])).unwrap();
        let (y, _) = layer.forward(&t(&[1, 2], &[2.0, 3.0])).unwrap();
        assert_eq!(y.data(), &[5.5]);
    }

    #[test]
    fn wrong_inner_dimension() {
        let layer = DenseLayer::new(Tensor::<f64>::eye(2), Tensor::zeros(&[2])).unwrap();
        assert!(layer.forward(&Tensor::zeros(&[1, 3])).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let layer = DenseLayer::new(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]), t(&[2], &[1.0, 1.0])).unwrap();
        let (_, cache) = layer.forward(&t(&[1, 2], &[0.5, -0.5])).unwrap();
        let g = layer.backward(cache, &Tensor::zeros(&[1, 2])).unwrap();
        assert!(g
            .d_input
            .data()
            .iter()
            .chain(g.d_weights.data())
            .chain(g.d_bias.data())
            .all(|&v| v == 0.0));
    }

    #[test]
    fn hand_backward() {
        let layer = DenseLayer::new(t(&[1, 1], &[2.0]), t(&[1], &[0.0])).unwrap();
        let (_, cache) = layer.forward(&t(&[1, 1], &[3.0])).unwrap();
        let g = layer.backward(cache, &t(&[1, 1], &[1.0])).unwrap();
        assert_eq!(g.d_weights.data(), &[3.0]);
        assert_eq!(g.d_input.data(), &[2.0]);
        assert_eq!(g.d_bias.data(), &[1.0]);
    }

    #[test]
    fn mismatched_cache_rejected() {
        let a = DenseLayer::<f64>::glorot(3, 2, &mut SeededRng::new(0, 0)).unwrap();
        let b = DenseLayer::<f64>::glorot(2, 2, &mut SeededRng::new(0, 1)).unwrap();
        let (_, cache) = a.forward(&Tensor::zeros(&[1, 3])).unwrap();
        assert!(matches!(
            b.backward(cache, &Tensor::zeros(&[1, 2])),
            Err(Error::Cache(_))
        ));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = SeededRng::new(9, 0);
        for _ in 0..20 {
            let layer = DenseLayer::<f64>::new(
                Tensor::from_fn(&[3, 2], |_| rng.normal()),
                Tensor::from_fn(&[2], |_| rng.normal()),
            )
            .unwrap();
            let x = Tensor::from_fn(&[4, 3], |_| rng.normal());
            let probe = Tensor::from_fn(&[4, 2], |_| rng.normal());
            let objective = |w: &Tensor<f64>, b: &Tensor<f64>, x: &Tensor<f64>| -> Result<f64> {
                let (y, _) = dense_forward(w, b, x)?;
                Ok(y.data().iter().zip(probe.data()).map(|(a, p)| a * p).sum())
            };
            let (_, cache) = layer.forward(&x).unwrap();
            let g = layer.backward(cache, &probe).unwrap();
            let nw = finite_diff_grad(|w| objective(w, &layer.bias, &x), &layer.weights, 1e-5).unwrap();
            let nb = finite_diff_grad(|b| objective(&layer.weights, b, &x), &layer.bias, 1e-5).unwrap();
            let nx = finite_diff_grad(|xx| objective(&layer.weights, &layer.bias, xx), &x, 1e-5).unwrap();
            assert!(max_relative_error(g.d_weights.data(), nw.data()) < 1e-4);
            assert!(max_relative_error(g.d_bias.data(), nb.data()) < 1e-4);
            assert!(max_relative_error(g.d_input.data(), nx.data()) < 1e-4);
        }
    }
}
