//! LSTM cell with forget gate, unrolled over a sequence.
//!
//! Per step, with `z = x W + h U + b` split into four column blocks in gate order
//! `[i | f | o | g]`:
//!
//! ```text
//! i = sigmoid(z_i)   f = sigmoid(z_f)   o = sigmoid(z_o)   g = tanh(z_g)
//! c' = f * c + i * g
//! h' = o * tanh(c')
//! ```

use crate::error::{Error, Result};
use crate::init::glorot_init;
use crate::layers::activation::{sigmoid, tanh};
use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::tensor::{matmul, matmul_slices, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input,
    Forget,
    Output,
    Candidate,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Candidate];

    fn block(self) -> usize {
        self as usize
    }
}

/// The four gates' parameters stored side by side:
/// `w_input: [in x 4h]`, `w_recurrent: [h x 4h]`, `bias: [4h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell<T> {
    pub w_input: Tensor<T>,
    pub w_recurrent: Tensor<T>,
    pub bias: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct LstmCache<T> {
    inputs: Tensor<T>,
    h0: Tensor<T>,
    c0: Tensor<T>,
    /// step-major activated gates, `steps` blocks of `[batch x 4h]`
    gates: Vec<T>,
    /// step-major cell states, `steps` blocks of `[batch x h]`
    cells: Vec<T>,
    tanh_cells: Vec<T>,
    hiddens: Vec<T>,
    dims: LstmDims,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LstmDims {
    batch: usize,
    steps: usize,
    input: usize,
    hidden: usize,
}

#[derive(Debug, Clone)]
pub struct LstmGrads<T> {
    pub d_inputs: Tensor<T>,
    pub d_w_input: Tensor<T>,
    pub d_w_recurrent: Tensor<T>,
    pub d_bias: Tensor<T>,
    pub d_h0: Tensor<T>,
    pub d_c0: Tensor<T>,
}

impl<T: Scalar> LstmCell<T> {
    pub fn new(w_input: Tensor<T>, w_recurrent: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let (_, four_h) = w_input.dims2("lstm")?;
        if four_h % 4 != 0 || four_h == 0 {
            return Err(Error::shape("lstm", "input weights need 4*hidden columns"));
        }
        let h = four_h / 4;
        if w_recurrent.shape() != [h, four_h] || bias.shape() != [four_h] {
            return Err(Error::shape(
                "lstm",
                format!(
                    "recurrent {:?} / bias {:?} inconsistent with hidden {h}",
                    w_recurrent.shape(),
                    bias.shape()
                ),
            ));
        }
        Ok(Self {
            w_input,
            w_recurrent,
            bias,
        })
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_input: Tensor::zeros(&[input, 4 * hidden]),
            w_recurrent: Tensor::zeros(&[hidden, 4 * hidden]),
            bias: Tensor::zeros(&[4 * hidden]),
        }
    }

    /// Glorot-initialized weights, zero biases.
    pub fn glorot(input: usize, hidden: usize, rng: &mut SeededRng) -> Result<Self> {
        Self::new(
            glorot_init(&[input, 4 * hidden], rng)?,
            glorot_init(&[hidden, 4 * hidden], rng)?,
            Tensor::zeros(&[4 * hidden]),
        )
    }

    pub fn hidden_size(&self) -> usize {
        self.bias.len() / 4
    }

    pub fn input_size(&self) -> usize {
        self.w_input.shape()[0]
    }

    /// Copies out one gate's `(W, U, b)`.
    pub fn gate(&self, gate: Gate) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
        let h = self.hidden_size();
        let cols = |m: &Tensor<T>| {
            let rows = m.shape()[0];
            let off = gate.block() * h;
            Tensor::from_fn(&[rows, h], |i| m.data()[(i / h) * 4 * h + off + i % h])
        };
        let b = Tensor::from_fn(&[h], |i| self.bias.data()[gate.block() * h + i]);
        (cols(&self.w_input), cols(&self.w_recurrent), b)
    }

    pub fn forward(&self, xs: &Tensor<T>, h0: &Tensor<T>, c0: &Tensor<T>) -> Result<(Tensor<T>, LstmCache<T>)> {
        lstm_forward(&self.w_input, &self.w_recurrent, &self.bias, xs, h0, c0)
    }

    pub fn backward(&self, cache: LstmCache<T>, d_hs: &Tensor<T>) -> Result<LstmGrads<T>> {
        lstm_backward(&self.w_input, &self.w_recurrent, cache, d_hs)
    }
}

/// Runs the cell over `xs: [batch x steps x in]` from `(h0, c0)`, returning every hidden state
/// as `[batch x steps x hidden]`.
pub fn lstm_forward<T: Scalar>(
    w_input: &Tensor<T>,
    w_recurrent: &Tensor<T>,
    bias: &Tensor<T>,
    xs: &Tensor<T>,
    h0: &Tensor<T>,
    c0: &Tensor<T>,
) -> Result<(Tensor<T>, LstmCache<T>)> {
    let (batch, steps, input) = xs.dims3("lstm_forward")?;
    let (in_w, four_h) = w_input.dims2("lstm_forward")?;
    let hidden = four_h / 4;
    if steps == 0 {
        return Err(Error::shape("lstm_forward", "sequence has zero steps"));
    }
    if in_w != input {
        return Err(Error::shape(
            "lstm_forward",
            format!("input width {input}, cell expects {in_w}"),
        ));
    }
    if w_recurrent.shape() != [hidden, four_h] || bias.shape() != [four_h] {
        return Err(Error::shape("lstm_forward", "inconsistent cell parameters"));
    }
    if h0.shape() != [batch, hidden] || c0.shape() != [batch, hidden] {
        return Err(Error::shape(
            "lstm_forward",
            format!("initial state must be [{batch}, {hidden}]"),
        ));
    }

    // input projections plus bias for every (batch, step) row at once; row index b * steps + t
    let flat = xs.clone().reshape(&[batch * steps, input])?;
    let mut xw = matmul(&flat, w_input)?.into_data();
    for row in xw.chunks_exact_mut(four_h) {
        for (v, &b) in row.iter_mut().zip(bias.data()) {
            *v += b;
        }
    }

    let h = hidden;
    let (bg, bh) = (batch * four_h, batch * h);
    let mut gates = vec![T::zero(); steps * bg];
    let mut cells = vec![T::zero(); steps * bh];
    let mut tanh_cells = vec![T::zero(); steps * bh];
    let mut hiddens = vec![T::zero(); steps * bh];
    let mut hu = vec![T::zero(); bg];
    let mut out = vec![T::zero(); batch * steps * h];

    for t in 0..steps {
        let (done, rest) = hiddens.split_at_mut(t * bh);
        let h_prev: &[T] = if t == 0 { h0.data() } else { &done[(t - 1) * bh..] };
        matmul_slices(h_prev, w_recurrent.data(), &mut hu, batch, h, four_h);
        let (cells_done, cells_rest) = cells.split_at_mut(t * bh);
        let c_prev: &[T] = if t == 0 { c0.data() } else { &cells_done[(t - 1) * bh..] };
        let act = &mut gates[t * bg..(t + 1) * bg];
        let c_t = &mut cells_rest[..bh];
        let tc_t = &mut tanh_cells[t * bh..(t + 1) * bh];
        let h_t = &mut rest[..bh];
        for b in 0..batch {
            let xrow = &xw[(b * steps + t) * four_h..(b * steps + t + 1) * four_h];
            let hrow = &hu[b * four_h..(b + 1) * four_h];
            let arow = &mut act[b * four_h..(b + 1) * four_h];
            for j in 0..four_h {
                let z = xrow[j] + hrow[j];
                arow[j] = if j < 3 * h { sigmoid(z) } else { tanh(z) };
            }
            for k in 0..h {
                let (i, f, o, g) = (arow[k], arow[h + k], arow[2 * h + k], arow[3 * h + k]);
                let idx = b * h + k;
                let c = f * c_prev[idx] + i * g;
                let tc = tanh(c);
                let hv = o * tc;
                c_t[idx] = c;
                tc_t[idx] = tc;
                h_t[idx] = hv;
                out[(b * steps + t) * h + k] = hv;
            }
        }
    }

    let hs = Tensor::from_vec(&[batch, steps, h], out)?.ensure_finite("lstm_forward")?;
    let cache = LstmCache {
        inputs: xs.clone(),
        h0: h0.clone(),
        c0: c0.clone(),
        gates,
        cells,
        tanh_cells,
        hiddens,
        dims: LstmDims {
            batch,
            steps,
            input,
            hidden,
        },
    };
    Ok((hs, cache))
}

/// Backpropagation through time over every step of the cached forward pass.
pub fn lstm_backward<T: Scalar>(
    w_input: &Tensor<T>,
    w_recurrent: &Tensor<T>,
    cache: LstmCache<T>,
    d_hs: &Tensor<T>,
) -> Result<LstmGrads<T>> {
    let LstmDims {
        batch,
        steps,
        input,
        hidden: h,
    } = cache.dims;
    let four_h = 4 * h;
    if w_input.shape() != [input, four_h] || w_recurrent.shape() != [h, four_h] {
        return Err(Error::Cache(format!(
            "lstm cache for in={input}, hidden={h} used with {:?}/{:?}",
            w_input.shape(),
            w_recurrent.shape()
        )));
    }
    if d_hs.shape() != [batch, steps, h] {
        return Err(Error::Cache(format!(
            "lstm gradient {:?}, expected [{batch}, {steps}, {h}]",
            d_hs.shape()
        )));
    }
    let u_t = w_recurrent.transpose()?;
    let dh_all = d_hs.data();
    let (bg, bh) = (batch * four_h, batch * h);
    let rows = batch * steps;

    let mut dz_all = vec![T::zero(); rows * four_h];
    // previous hidden state per (b, t) row, stored transposed: [h x rows]
    let mut h_prev_t = vec![T::zero(); h * rows];
    let mut dz = vec![T::zero(); bg];
    let mut dh_next = vec![T::zero(); bh];
    let mut dc_next = vec![T::zero(); bh];
    let one = T::one();

    for t in (0..steps).rev() {
        let act = &cache.gates[t * bg..(t + 1) * bg];
        let tc_t = &cache.tanh_cells[t * bh..(t + 1) * bh];
        let c_prev: &[T] = if t == 0 {
            cache.c0.data()
        } else {
            &cache.cells[(t - 1) * bh..t * bh]
        };
        let h_prev: &[T] = if t == 0 {
            cache.h0.data()
        } else {
            &cache.hiddens[(t - 1) * bh..t * bh]
        };
        for b in 0..batch {
            let arow = &act[b * four_h..(b + 1) * four_h];
            let zrow = &mut dz[b * four_h..(b + 1) * four_h];
            let row = b * steps + t;
            for k in 0..h {
                let idx = b * h + k;
                let (i, f, o, g) = (arow[k], arow[h + k], arow[2 * h + k], arow[3 * h + k]);
                let dh = dh_all[row * h + k] + dh_next[idx];
                let tc = tc_t[idx];
                let d_o = dh * tc;
                let dc = dc_next[idx] + dh * o * (one - tc * tc);
                let d_i = dc * g;
                let d_g = dc * i;
                let d_f = dc * c_prev[idx];
                dc_next[idx] = dc * f;
                zrow[k] = d_i * i * (one - i);
                zrow[h + k] = d_f * f * (one - f);
                zrow[2 * h + k] = d_o * o * (one - o);
                zrow[3 * h + k] = d_g * (one - g * g);
                h_prev_t[k * rows + row] = h_prev[idx];
            }
            dz_all[row * four_h..(row + 1) * four_h].copy_from_slice(zrow);
        }
        matmul_slices(&dz, u_t.data(), &mut dh_next, batch, four_h, h);
    }

    let dz_all = Tensor::from_vec(&[rows, four_h], dz_all)?.ensure_finite("lstm_backward")?;
    let h_prev_t = Tensor::from_vec(&[h, rows], h_prev_t)?;
    let d_u = matmul(&h_prev_t, &dz_all)?;
    let flat = cache.inputs.reshape(&[rows, input])?;
    let d_w_input = matmul(&flat.transpose()?, &dz_all)?;
    let d_bias = dz_all.column_sums()?;
    let d_inputs = matmul(&dz_all, &w_input.transpose()?)?.reshape(&[batch, steps, input])?;
    Ok(LstmGrads {
        d_inputs,
        d_w_input,
        d_w_recurrent: d_u,
        d_bias,
        d_h0: Tensor::from_vec(&[batch, h], dh_next)?.ensure_finite("lstm_backward")?,
        d_c0: Tensor::from_vec(&[batch, h], dc_next)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{finite_diff_grad, max_relative_error};

    #[test]
    fn zero_parameters_give_zero_hidden_states() {
        let cell = LstmCell::<f64>::zeros(3, 4);
        let mut rng = SeededRng::new(1, 0);
        let xs = Tensor::from_fn(&[2, 5, 3], |_| rng.normal() * 10.0);
        let z = Tensor::zeros(&[2, 4]);
        let (hs, _) = cell.forward(&xs, &z, &z).unwrap();
        assert!(hs.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_steps_rejected() {
        let cell = LstmCell::<f64>::zeros(3, 4);
        let z = Tensor::zeros(&[1, 4]);
        assert!(cell.forward(&Tensor::zeros(&[1, 0, 3]), &z, &z).is_err());
    }

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    // in = hidden = 1; gate order i, f, o, g
    const W: [f64; 4] = [0.5, -0.3, 0.8, 0.2];
    const U: [f64; 4] = [0.1, 0.4, -0.6, 0.9];
    const B: [f64; 4] = [0.05, 0.5, -0.1, 0.0];
    const X: f64 = 0.7;
    const H0: f64 = -0.2;
    const C0: f64 = 0.3;

    fn scalar_cell() -> LstmCell<f64> {
        LstmCell::new(
            Tensor::from_vec(&[1, 4], W.to_vec()).unwrap(),
            Tensor::from_vec(&[1, 4], U.to_vec()).unwrap(),
            Tensor::from_vec(&[4], B.to_vec()).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn single_step_matches_scripted_trace() {
        let z: Vec<f64> = (0..4).map(|j| X * W[j] + H0 * U[j] + B[j]).collect();
        let (i, f, o, g) = (sig(z[0]), sig(z[1]), sig(z[2]), z[3].tanh());
        let c = f * C0 + i * g;
        let h = o * c.tanh();

        let cell = scalar_cell();
        let xs = Tensor::from_vec(&[1, 1, 1], vec![X]).unwrap();
        let h0 = Tensor::from_vec(&[1, 1], vec![H0]).unwrap();
        let c0 = Tensor::from_vec(&[1, 1], vec![C0]).unwrap();
        let (hs, _) = cell.forward(&xs, &h0, &c0).unwrap();
        assert!((hs.data()[0] - h).abs() < 1e-12);
    }

    #[test]
    fn single_step_gradients_match_scripted_derivation() {
        let z: Vec<f64> = (0..4).map(|j| X * W[j] + H0 * U[j] + B[j]).collect();
        let (i, f, o, g) = (sig(z[0]), sig(z[1]), sig(z[2]), z[3].tanh());
        let c = f * C0 + i * g;
        let tc = c.tanh();
        let dh = 1.0;
        let dc = dh * o * (1.0 - tc * tc);
        let dz = [
            dc * g * i * (1.0 - i),
            dc * C0 * f * (1.0 - f),
            dh * tc * o * (1.0 - o),
            dc * i * (1.0 - g * g),
        ];

        let cell = scalar_cell();
        let xs = Tensor::from_vec(&[1, 1, 1], vec![X]).unwrap();
        let h0 = Tensor::from_vec(&[1, 1], vec![H0]).unwrap();
        let c0 = Tensor::from_vec(&[1, 1], vec![C0]).unwrap();
        let (_, cache) = cell.forward(&xs, &h0, &c0).unwrap();
        let grads = cell
            .backward(cache, &Tensor::from_vec(&[1, 1, 1], vec![dh]).unwrap())
            .unwrap();
        for (j, &d) in dz.iter().enumerate() {
            assert!((grads.d_w_input.data()[j] - X * d).abs() < 1e-12);
            assert!((grads.d_w_recurrent.data()[j] - H0 * d).abs() < 1e-12);
            assert!((grads.d_bias.data()[j] - d).abs() < 1e-12);
        }
        let dx: f64 = (0..4).map(|j| W[j] * dz[j]).sum();
        assert!((grads.d_inputs.data()[0] - dx).abs() < 1e-12);
        assert!((grads.d_c0.data()[0] - dc * f).abs() < 1e-12);
    }

    #[test]
    fn zero_upstream_zero_gradients() {
        let cell = LstmCell::<f64>::glorot(3, 4, &mut SeededRng::new(2, 0)).unwrap();
        let xs = Tensor::from_fn(&[2, 3, 3], |i| (i as f64).sin());
        let z = Tensor::zeros(&[2, 4]);
        let (hs, cache) = cell.forward(&xs, &z, &z).unwrap();
        let g = cell.backward(cache, &Tensor::zeros(hs.shape())).unwrap();
        assert!(g
            .d_w_input
            .data()
            .iter()
            .chain(g.d_w_recurrent.data())
            .chain(g.d_bias.data())
            .all(|&v| v == 0.0));
    }

    #[test]
    fn gate_accessor_reads_column_blocks() {
        let cell = LstmCell::<f64>::glorot(3, 2, &mut SeededRng::new(4, 0)).unwrap();
        let (w, u, b) = cell.gate(Gate::Output);
        assert_eq!(w.shape(), &[3, 2]);
        assert_eq!(u.shape(), &[2, 2]);
        assert_eq!(w.data()[1], cell.w_input.data()[2 * 2 + 1]);
        assert_eq!(w.data()[2], cell.w_input.data()[8 + 2 * 2]);
        assert_eq!(b.len(), 2);
        assert_eq!(Gate::ALL.len(), 4);
    }

    #[test]
    fn bptt_matches_finite_differences() {
        let mut rng = SeededRng::new(23, 0);
        let (batch, steps, input, hidden) = (2, 3, 3, 4);
        for _ in 0..20 {
            let cell = LstmCell::<f64>::new(
                Tensor::from_fn(&[input, 4 * hidden], |_| rng.normal() * 0.5),
                Tensor::from_fn(&[hidden, 4 * hidden], |_| rng.normal() * 0.5),
                Tensor::from_fn(&[4 * hidden], |_| rng.normal() * 0.5),
            )
            .unwrap();
            let xs = Tensor::from_fn(&[batch, steps, input], |_| rng.normal());
            let h0 = Tensor::from_fn(&[batch, hidden], |_| rng.normal() * 0.5);
            let c0 = Tensor::from_fn(&[batch, hidden], |_| rng.normal() * 0.5);
            let probe = Tensor::from_fn(&[batch, steps, hidden], |_| rng.normal());
            let (_, cache) = cell.forward(&xs, &h0, &c0).unwrap();
            let g = cell.backward(cache, &probe).unwrap();
            let obj = |w: &Tensor<f64>,
                       u: &Tensor<f64>,
                       b: &Tensor<f64>,
                       x: &Tensor<f64>,
                       h: &Tensor<f64>,
                       c: &Tensor<f64>|
             -> Result<f64> {
                let (hs, _) = lstm_forward(w, u, b, x, h, c)?;
                Ok(hs.data().iter().zip(probe.data()).map(|(a, p)| a * p).sum())
            };
            let (w, u, b) = (&cell.w_input, &cell.w_recurrent, &cell.bias);
            let checks = [
                (
                    g.d_w_input.data().to_vec(),
                    finite_diff_grad(|t| obj(t, u, b, &xs, &h0, &c0), w, 1e-5).unwrap(),
                ),
                (
                    g.d_w_recurrent.data().to_vec(),
                    finite_diff_grad(|t| obj(w, t, b, &xs, &h0, &c0), u, 1e-5).unwrap(),
                ),
                (
                    g.d_bias.data().to_vec(),
                    finite_diff_grad(|t| obj(w, u, t, &xs, &h0, &c0), b, 1e-5).unwrap(),
                ),
                (
                    g.d_inputs.data().to_vec(),
                    finite_diff_grad(|t| obj(w, u, b, t, &h0, &c0), &xs, 1e-5).unwrap(),
                ),
                (
                    g.d_h0.data().to_vec(),
                    finite_diff_grad(|t| obj(w, u, b, &xs, t, &c0), &h0, 1e-5).unwrap(),
                ),
                (
                    g.d_c0.data().to_vec(),
                    finite_diff_grad(|t| obj(w, u, b, &xs, &h0, t), &c0, 1e-5).unwrap(),
                ),
            ];
            for (k, (analytic, numeric)) in checks.iter().enumerate() {
                let err = max_relative_error(analytic, numeric.data());
                assert!(err < 1e-4, "check {k}: {err}");
            }
        }
    }
}
