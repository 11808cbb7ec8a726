//! Dense row-major tensors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense n-dimensional array stored row-major.
///
/// `data.len()` always equals the product of `shape`. A tensor with a zero
/// dimension is empty; a tensor with an empty shape is rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::invalid("tensor shape must have at least one dimension"));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape(
                "from_vec",
                format!("shape {shape:?} needs {expected} values, got {}", data.len()),
            ));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        assert!(!shape.is_empty(), "tensor shape must have at least one dimension");
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    /// Builds a tensor from a generator called with each flat index.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> T) -> Self {
        assert!(!shape.is_empty(), "tensor shape must have at least one dimension");
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..n).map(&mut f).collect(),
        }
    }

    /// Builds a 2-D tensor from rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("from_rows", "ragged rows"));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::from_vec(&[rows.len(), cols], data)
    }

    pub fn eye(n: usize) -> Self {
        Self::from_fn(&[n, n], |i| if i / n == i % n { T::one() } else { T::zero() })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if shape.is_empty() || n != self.data.len() {
            return Err(Error::shape(
                "reshape",
                format!("cannot view {:?} as {shape:?}", self.shape),
            ));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Returns the tensor unchanged if every value is finite.
    pub fn ensure_finite(self, op: &str) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::NumericOverflow(op.to_string()))
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, op: &'static str, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_same_shape(other, op)?;
        Ok(Self {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "add", |a, b| a + b)?.ensure_finite("add")
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "sub", |a, b| a - b)?.ensure_finite("sub")
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "mul", |a, b| a * b)?.ensure_finite("mul")
    }

    pub fn scale(&self, k: T) -> Result<Self> {
        self.map(|v| v * k).ensure_finite("scale")
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_same_shape(other, "add_assign")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn fill(&mut self, value: T) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    fn check_same_shape(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape(op, format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        Ok(())
    }

    pub(crate) fn dims2(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::shape(op, format!("expected 2-D, got {:?}", self.shape))),
        }
    }

    pub(crate) fn dims3(&self, op: &'static str) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [a, b, c] => Ok((a, b, c)),
            _ => Err(Error::shape(op, format!("expected 3-D, got {:?}", self.shape))),
        }
    }

    /// 2-D transpose.
    pub fn transpose(&self) -> Result<Self> {
        let (r, c) = self.dims2("transpose")?;
        let mut out = Vec::with_capacity(self.data.len());
        for j in 0..c {
            for i in 0..r {
                out.push(self.data[i * c + j]);
            }
        }
        Self::from_vec(&[c, r], out)
    }

    /// Swaps the last two axes of a 3-D tensor: `[a, b, c] -> [a, c, b]`.
    pub fn swap_last_axes(&self) -> Result<Self> {
        let (a, b, c) = self.dims3("swap_last_axes")?;
        let mut out = vec![T::zero(); self.data.len()];
        for i in 0..a {
            let base = i * b * c;
            for j in 0..b {
                for k in 0..c {
                    out[base + k * b + j] = self.data[base + j * c + k];
                }
            }
        }
        Self::from_vec(&[a, c, b], out)
    }

    /// Gathers slices along the first axis in the given order.
    pub fn select_first_axis(&self, indices: &[usize]) -> Result<Self> {
        let n = self.shape[0];
        let stride: usize = self.shape[1..].iter().product();
        let mut out = Vec::with_capacity(indices.len() * stride);
        for &i in indices {
            if i >= n {
                return Err(Error::invalid(format!("index {i} out of range for {n} rows")));
            }
            out.extend_from_slice(&self.data[i * stride..(i + 1) * stride]);
        }
        let mut shape = self.shape.clone();
        shape[0] = indices.len();
        Self::from_vec(&shape, out)
    }

    /// Sums a 2-D tensor over its rows, giving one value per column.
    pub fn column_sums(&self) -> Result<Self> {
        let (r, c) = self.dims2("column_sums")?;
        let mut out = vec![T::zero(); c];
        for i in 0..r {
            for (o, &v) in out.iter_mut().zip(&self.data[i * c..(i + 1) * c]) {
                *o += v;
            }
        }
        Self::from_vec(&[c], out)
    }

    /// Adds a length-`c` vector to every row of an `r x c` tensor.
    pub fn add_row_vector(&self, row: &Self) -> Result<Self> {
        let (r, c) = self.dims2("add_row_vector")?;
        if row.shape != [c] {
            return Err(Error::shape(
                "add_row_vector",
                format!("row {:?} vs matrix {:?}", row.shape, self.shape),
            ));
        }
        let mut out = self.data.clone();
        for i in 0..r {
            for (o, &b) in out[i * c..(i + 1) * c].iter_mut().zip(&row.data) {
                *o += b;
            }
        }
        Self::from_vec(&[r, c], out)?.ensure_finite("add_row_vector")
    }
}

/// Matrix product of `a: [m x k]` and `b: [k x n]`.
///
/// Every output element accumulates its `k` products in ascending index order,
/// so results are bit-reproducible.
pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, k) = a.dims2("matmul")?;
    let (k2, n) = b.dims2("matmul")?;
    if k != k2 {
        return Err(Error::shape("matmul", format!("[{m}x{k}] x [{k2}x{n}]")));
    }
    let mut out = vec![T::zero(); m * n];
    matmul_into(&a.data, &b.data, &mut out, m, k, n);
    Tensor::from_vec(&[m, n], out)?.ensure_finite("matmul")
}

/// Slice form of [`matmul`]: overwrites `out` with `a x b`. No finiteness check.
pub(crate) fn matmul_slices<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    debug_assert!(a.len() == m * k && b.len() == k * n && out.len() == m * n);
    out.fill(T::zero());
    matmul_into(a, b, out, m, k, n);
}

const MR: usize = 4;
const NR: usize = 8;

/// `out = a x b` with register tiles of `MR x NR` outputs. Each output still accumulates
/// from zero over `p = 0..k` in order, so the result matches the naive triple loop bit for bit.
fn matmul_into<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    // Same mul/add sequence in every path, only wider lanes; no fused ops.
    #[cfg(target_arch = "x86_64")]
    {
        if std::is_x86_feature_detected!("avx512f") {
            // SAFETY: feature checked at runtime.
            return unsafe { matmul_avx512(a, b, out, m, k, n) };
        }
        if std::is_x86_feature_detected!("avx2") {
            // SAFETY: feature checked at runtime.
            return unsafe { matmul_avx2(a, b, out, m, k, n) };
        }
    }
    matmul_tiled(a, b, out, m, k, n)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn matmul_avx512<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    matmul_tiled(a, b, out, m, k, n)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn matmul_avx2<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    matmul_tiled(a, b, out, m, k, n)
}

#[inline(always)]
fn matmul_tiled<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    let m_main = m - m % MR;
    let n_main = n - n % NR;
    for i0 in (0..m_main).step_by(MR) {
        for j0 in (0..n_main).step_by(NR) {
            let mut acc = [[T::zero(); NR]; MR];
            for p in 0..k {
                let brow: &[T; NR] = b[p * n + j0..p * n + j0 + NR].try_into().expect("tile width");
                for (r, acc_row) in acc.iter_mut().enumerate() {
                    let av = a[(i0 + r) * k + p];
                    for (o, &bv) in acc_row.iter_mut().zip(brow) {
                        *o += av * bv;
                    }
                }
            }
            for (r, acc_row) in acc.iter().enumerate() {
                out[(i0 + r) * n + j0..(i0 + r) * n + j0 + NR].copy_from_slice(acc_row);
            }
        }
        for r in 0..MR {
            naive_row(a, b, out, i0 + r, k, n, n_main);
        }
    }
    for i in m_main..m {
        naive_row(a, b, out, i, k, n, 0);
    }
}

/// Columns `from..n` of output row `i`.
#[inline(always)]
fn naive_row<T: Scalar>(a: &[T], b: &[T], out: &mut [T], i: usize, k: usize, n: usize, from: usize) {
    if from == n {
        return;
    }
    let row = &mut out[i * n + from..(i + 1) * n];
    for p in 0..k {
        let av = a[i * k + p];
        for (o, &bv) in row.iter_mut().zip(&b[p * n + from..(p + 1) * n]) {
            *o += av * bv;
        }
    }
}

/// Sum of all elements in ascending flat-index order. Empty tensors sum to zero.
pub fn reduce_sum<T: Scalar>(t: &Tensor<T>) -> T {
    t.data.iter().fold(T::zero(), |acc, &v| acc + v)
}
