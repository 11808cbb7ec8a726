use crate::error::{Error, Result};
use crate::init::glorot_init;
use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Valid (unpadded) 1-D cross-correlation over inputs laid out `[batch, channels, length]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1dLayer<T> {
    /// `[filters, channels, width]`
    pub kernels: Tensor<T>,
    pub bias: Tensor<T>,
    pub stride: usize,
}

#[derive(Debug, Clone)]
pub struct Conv1dCache<T> {
    input: Tensor<T>,
    kernel_shape: [usize; 3],
    stride: usize,
    out_len: usize,
}

#[derive(Debug, Clone)]
pub struct Conv1dGrads<T> {
    pub d_input: Tensor<T>,
    pub d_kernels: Tensor<T>,
    pub d_bias: Tensor<T>,
}

/// `floor((length - width) / stride) + 1`, or `None` when the kernel does not fit.
pub fn conv_output_len(length: usize, width: usize, stride: usize) -> Option<usize> {
    if stride == 0 || width == 0 || width > length {
        None
    } else {
        Some((length - width) / stride + 1)
    }
}

impl<T: Scalar> Conv1dLayer<T> {
    pub fn new(kernels: Tensor<T>, bias: Tensor<T>, stride: usize) -> Result<Self> {
        let (filters, _, width) = kernels.dims3("conv1d")?;
        if bias.shape() != [filters] {
            return Err(Error::shape(
                "conv1d",
                format!("bias {:?} for {filters} filters", bias.shape()),
            ));
        }
        if stride == 0 || width == 0 {
            return Err(Error::invalid("conv1d stride and width must be positive"));
        }
        Ok(Self { kernels, bias, stride })
    }

    pub fn glorot(filters: usize, channels: usize, width: usize, stride: usize, rng: &mut SeededRng) -> Result<Self> {
        Self::new(
            glorot_init(&[filters, channels, width], rng)?,
            Tensor::zeros(&[filters]),
            stride,
        )
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Conv1dCache<T>)> {
        conv1d_forward(&self.kernels, &self.bias, self.stride, x)
    }

    pub fn backward(&self, cache: Conv1dCache<T>, dy: &Tensor<T>) -> Result<Conv1dGrads<T>> {
        conv1d_backward(&self.kernels, cache, dy)
    }
}

pub fn conv1d_forward<T: Scalar>(
    kernels: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    x: &Tensor<T>,
) -> Result<(Tensor<T>, Conv1dCache<T>)> {
    let (filters, channels, width) = kernels.dims3("conv1d_forward")?;
    let (batch, in_channels, length) = x.dims3("conv1d_forward")?;
    if in_channels != channels {
        return Err(Error::shape(
            "conv1d_forward",
            format!("input has {in_channels} channels, kernels expect {channels}"),
        ));
    }
    let out_len = conv_output_len(length, width, stride).ok_or_else(|| {
        Error::shape(
            "conv1d_forward",
            format!("kernel width {width} (stride {stride}) does not fit length {length}"),
        )
    })?;
    let xd = x.data();
    let kd = kernels.data();
    let mut out = vec![T::zero(); batch * filters * out_len];
    for b in 0..batch {
        for f in 0..filters {
            let row = &mut out[(b * filters + f) * out_len..(b * filters + f + 1) * out_len];
            for c in 0..channels {
                let xrow = &xd[(b * channels + c) * length..(b * channels + c + 1) * length];
                for k in 0..width {
                    let kv = kd[(f * channels + c) * width + k];
                    for (o, r) in row.iter_mut().enumerate() {
                        *r += kv * xrow[o * stride + k];
                    }
                }
            }
            let bv = bias.data()[f];
            row.iter_mut().for_each(|r| *r += bv);
        }
    }
    let y = Tensor::from_vec(&[batch, filters, out_len], out)?.ensure_finite("conv1d_forward")?;
    let cache = Conv1dCache {
        input: x.clone(),
        kernel_shape: [filters, channels, width],
        stride,
        out_len,
    };
    Ok((y, cache))
}

pub fn conv1d_backward<T: Scalar>(
    kernels: &Tensor<T>,
    cache: Conv1dCache<T>,
    dy: &Tensor<T>,
) -> Result<Conv1dGrads<T>> {
    let [filters, channels, width] = cache.kernel_shape;
    if kernels.shape() != cache.kernel_shape {
        return Err(Error::Cache(format!(
            "conv1d cache for kernels {:?} used with {:?}",
            cache.kernel_shape,
            kernels.shape()
        )));
    }
    let (batch, _, length) = cache.input.dims3("conv1d_backward")?;
    let out_len = cache.out_len;
    if dy.shape() != [batch, filters, out_len] {
        return Err(Error::Cache(format!(
            "conv1d gradient {:?}, expected [{batch}, {filters}, {out_len}]",
            dy.shape()
        )));
    }
    let stride = cache.stride;
    let xd = cache.input.data();
    let kd = kernels.data();
    let gd = dy.data();
    let mut dk = vec![T::zero(); filters * channels * width];
    let mut db = vec![T::zero(); filters];
    let mut dx = vec![T::zero(); batch * channels * length];
    for b in 0..batch {
        for f in 0..filters {
            let grow = &gd[(b * filters + f) * out_len..(b * filters + f + 1) * out_len];
            db[f] += grow.iter().fold(T::zero(), |a, &g| a + g);
            for c in 0..channels {
                let base = (b * channels + c) * length;
                for k in 0..width {
                    let kidx = (f * channels + c) * width + k;
                    let kv = kd[kidx];
                    let mut acc = T::zero();
                    for (o, &g) in grow.iter().enumerate() {
                        let xi = base + o * stride + k;
                        acc += g * xd[xi];
                        dx[xi] += kv * g;
                    }
                    dk[kidx] += acc;
                }
            }
        }
    }
    Ok(Conv1dGrads {
        d_input: Tensor::from_vec(&[batch, channels, length], dx)?,
        d_kernels: Tensor::from_vec(&[filters, channels, width], dk)?,
        d_bias: Tensor::from_vec(&[filters], db)?,
    })
}
