use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::init::glorot_init;
use crate::layers::{
    activation_backward, activation_forward, conv1d_backward, conv1d_forward, dense_backward, dense_forward,
    dropout_backward, dropout_forward, lstm_backward, lstm_forward, maxpool1d_backward, maxpool1d_forward, Activation,
    ActivationCache, Conv1dCache, DenseCache, DropoutCache, LstmCache, Mode, PoolCache,
};
use crate::models::spec::{ModelKind, ModelSpec};
use crate::params::{ParamRole, ParamSet};
use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

static NEXT_MODEL_ID: AtomicU64 = AtomicU64::new(1);

/// One step of a model's layer graph. Parameterized stages refer to their tensors
/// in the model's [`ParamSet`] by name prefix.
#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    /// `[batch, ...] -> [batch, prod(...)]`
    Flatten,
    /// `[batch, a, b] -> [batch, b, a]`
    SwapAxes,
    Dense {
        name: String,
    },
    /// The same dense weights applied to every step of `[batch, steps, in]`.
    TimeDistributed {
        name: String,
    },
    Conv1d {
        name: String,
        stride: usize,
    },
    MaxPool {
        window: usize,
    },
    /// Zero initial state; emits `[batch, steps, hidden]` or only the last step.
    Lstm {
        name: String,
        last_only: bool,
    },
    Act(Activation),
    Dropout,
}

#[derive(Debug)]
enum StageCache<T> {
    Flatten(Vec<usize>),
    SwapAxes,
    Dense(DenseCache<T>),
    TimeDistributed(DenseCache<T>, Vec<usize>),
    Conv1d(Conv1dCache<T>),
    MaxPool(PoolCache),
    Lstm {
        cache: LstmCache<T>,
        last_only: bool,
        shape: [usize; 3],
    },
    Act(ActivationCache<T>),
    Dropout(DropoutCache<T>),
}

/// Stage graph: a shared trunk, the prediction head and, for the autoencoder, a decoder
/// branch that reconstructs the flattened input window from the trunk output.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGraph {
    pub trunk: Vec<Stage>,
    pub head: Vec<Stage>,
    pub decoder: Option<Vec<Stage>>,
}

#[derive(Debug, Clone)]
pub struct Model<T> {
    pub spec: ModelSpec,
    pub params: ParamSet<T>,
    pub graph: LayerGraph,
    id: u64,
}

/// Intermediates from one forward pass. Consumed by the first [`Model::backward`] call.
#[derive(Debug)]
pub struct ModelCache<T> {
    model_id: u64,
    batch: usize,
    trunk: Option<Vec<StageCache<T>>>,
    head: Option<Vec<StageCache<T>>>,
    decoder: Option<Vec<StageCache<T>>>,
}

impl<T> ModelCache<T> {
    pub fn is_consumed(&self) -> bool {
        self.trunk.is_none()
    }
}

#[derive(Debug)]
pub struct ForwardPass<T> {
    /// `[batch, 1]`
    pub prediction: Tensor<T>,
    /// `[batch, lookback * features]`, autoencoder only
    pub reconstruction: Option<Tensor<T>>,
    pub cache: ModelCache<T>,
}

/// Loss gradients with respect to the model outputs.
#[derive(Debug, Clone)]
pub struct OutputGrads<T> {
    pub prediction: Tensor<T>,
    pub reconstruction: Option<Tensor<T>>,
}

struct Builder<'a, T> {
    params: ParamSet<T>,
    rng: &'a mut SeededRng,
}

impl<T: Scalar> Builder<'_, T> {
    fn dense(&mut self, name: &str, input: usize, output: usize) -> Result<Stage> {
        self.params.insert(
            &format!("{name}.weight"),
            glorot_init(&[input, output], self.rng)?,
            ParamRole::Weight,
        )?;
        self.params
            .insert(&format!("{name}.bias"), Tensor::zeros(&[output]), ParamRole::Bias)?;
        Ok(Stage::Dense { name: name.into() })
    }

    fn time_distributed(&mut self, name: &str, input: usize, output: usize) -> Result<Stage> {
        self.dense(name, input, output)?;
        Ok(Stage::TimeDistributed { name: name.into() })
    }

    fn conv(&mut self, name: &str, channels: usize, filters: usize, width: usize) -> Result<Stage> {
        self.params.insert(
            &format!("{name}.kernel"),
            glorot_init(&[filters, channels, width], self.rng)?,
            ParamRole::Weight,
        )?;
        self.params
            .insert(&format!("{name}.bias"), Tensor::zeros(&[filters]), ParamRole::Bias)?;
        Ok(Stage::Conv1d {
            name: name.into(),
            stride: 1,
        })
    }

    fn lstm(&mut self, name: &str, input: usize, hidden: usize, last_only: bool) -> Result<Stage> {
        self.params.insert(
            &format!("{name}.w_input"),
            glorot_init(&[input, 4 * hidden], self.rng)?,
            ParamRole::Weight,
        )?;
        self.params.insert(
            &format!("{name}.w_recurrent"),
            glorot_init(&[hidden, 4 * hidden], self.rng)?,
            ParamRole::Weight,
        )?;
        self.params
            .insert(&format!("{name}.bias"), Tensor::zeros(&[4 * hidden]), ParamRole::Bias)?;
        Ok(Stage::Lstm {
            name: name.into(),
            last_only,
        })
    }
}

/// Builds a model with Glorot-uniform weights and zero biases.
///
/// Topologies (every model ends in a one-unit linear head; dropout follows each hidden
/// dense or recurrent block):
///
/// - `RnnLstm`: LSTM, last step, dense head
/// - `StackedLstm`: LSTM stack, last step of the top layer, dense head
/// - `Cnn`: conv1d, relu, max-pool, flatten, dense relu, dense head
/// - `CnnLstm`: conv1d, relu, LSTM over the convolved sequence, dense head
/// - `Dnn`: flatten, dense relu blocks, dense head
/// - `TdMlp`: one shared dense relu per time step, flatten, dense head
/// - `Autoencoder`: flatten, encoder dense relu, latent dense relu, then a prediction head
///   from the latent code and a mirrored decoder reconstructing the flattened window
pub fn build<T: Scalar>(spec: &ModelSpec, rng: &mut SeededRng) -> Result<Model<T>> {
    spec.validate()?;
    let mut b = Builder {
        params: ParamSet::new(),
        rng,
    };
    let h = &spec.hidden;
    let relu = Stage::Act(Activation::Relu);
    let mut trunk = Vec::new();
    let mut decoder = None;
    let trunk_width = match spec.kind {
        ModelKind::Dnn => {
            trunk.push(Stage::Flatten);
            let mut width = spec.flat_input();
            for (i, &units) in h.iter().enumerate() {
                trunk.push(b.dense(&format!("dense{}", i + 1), width, units)?);
                trunk.push(relu.clone());
                trunk.push(Stage::Dropout);
                width = units;
            }
            width
        }
        ModelKind::RnnLstm | ModelKind::StackedLstm => {
            let mut width = spec.features;
            for (i, &units) in h.iter().enumerate() {
                let last = i + 1 == h.len();
                trunk.push(b.lstm(&format!("lstm{}", i + 1), width, units, last)?);
                trunk.push(Stage::Dropout);
                width = units;
            }
            width
        }
        ModelKind::Cnn => {
            let (filters, units) = (h[0], h[1]);
            trunk.push(Stage::SwapAxes);
            trunk.push(b.conv("conv1", spec.features, filters, spec.kernel_width)?);
            trunk.push(relu.clone());
            trunk.push(Stage::MaxPool {
                window: spec.pool_window,
            });
            trunk.push(Stage::Flatten);
            let conv_len = spec.lookback - spec.kernel_width + 1;
            let pooled = conv_len / spec.pool_window;
            trunk.push(b.dense("dense1", filters * pooled, units)?);
            trunk.push(relu.clone());
            trunk.push(Stage::Dropout);
            units
        }
        ModelKind::CnnLstm => {
            let (filters, units) = (h[0], h[1]);
            trunk.push(Stage::SwapAxes);
            trunk.push(b.conv("conv1", spec.features, filters, spec.kernel_width)?);
            trunk.push(relu.clone());
            trunk.push(Stage::SwapAxes);
            trunk.push(b.lstm("lstm1", filters, units, true)?);
            trunk.push(Stage::Dropout);
            units
        }
        ModelKind::TdMlp => {
            let mut width = spec.features;
            for (i, &units) in h.iter().enumerate() {
                trunk.push(b.time_distributed(&format!("td{}", i + 1), width, units)?);
                trunk.push(relu.clone());
                trunk.push(Stage::Dropout);
                width = units;
            }
            trunk.push(Stage::Flatten);
            width * spec.lookback
        }
        ModelKind::Autoencoder => {
            let (enc, latent) = (h[0], h[1]);
            let flat = spec.flat_input();
            trunk.push(Stage::Flatten);
            trunk.push(b.dense("encoder", flat, enc)?);
            trunk.push(relu.clone());
            trunk.push(Stage::Dropout);
            trunk.push(b.dense("latent", enc, latent)?);
            trunk.push(relu.clone());
            trunk.push(Stage::Dropout);
            decoder = Some(vec![
                b.dense("decoder", latent, enc)?,
                relu.clone(),
                Stage::Dropout,
                b.dense("reconstruction", enc, flat)?,
            ]);
            latent
        }
    };
    let head = vec![b.dense("head", trunk_width, 1)?];
    Ok(Model {
        spec: spec.clone(),
        params: b.params,
        graph: LayerGraph { trunk, head, decoder },
        id: NEXT_MODEL_ID.fetch_add(1, Ordering::Relaxed),
    })
}

impl<T: Scalar> Model<T> {
    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.params.scalar_count()
    }

    pub fn set_dropout_rate(&mut self, rate: f64) -> Result<()> {
        crate::layers::dropout::check_rate(rate)?;
        self.spec.dropout_rate = rate;
        Ok(())
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<usize> {
        let (batch, lookback, features) = x.dims3("model forward")?;
        if lookback != self.spec.lookback || features != self.spec.features || batch == 0 {
            return Err(Error::shape(
                "model forward",
                format!(
                    "input {:?}, model expects [batch>0, {}, {}]",
                    x.shape(),
                    self.spec.lookback,
                    self.spec.features
                ),
            ));
        }
        Ok(batch)
    }

    /// Runs the model on `x: [batch, lookback, features]`.
    ///
    /// In eval mode the result depends only on the parameters and `x`; `rng` is untouched.
    pub fn forward(&self, x: &Tensor<T>, mode: Mode, rng: &mut SeededRng) -> Result<ForwardPass<T>> {
        let batch = self.check_input(x)?;
        let (latent, trunk) = self.run_stages(&self.graph.trunk, x.clone(), mode, rng)?;
        let (prediction, head) = self.run_stages(&self.graph.head, latent.clone(), mode, rng)?;
        let (reconstruction, decoder) = match &self.graph.decoder {
            Some(stages) => {
                let (r, c) = self.run_stages(stages, latent, mode, rng)?;
                (Some(r), Some(c))
            }
            None => (None, None),
        };
        Ok(ForwardPass {
            prediction,
            reconstruction,
            cache: ModelCache {
                model_id: self.id,
                batch,
                trunk: Some(trunk),
                head: Some(head),
                decoder,
            },
        })
    }

    /// Eval-mode predictions, processed in chunks of `chunk` windows. Returns one value per window.
    pub fn predict(&self, x: &Tensor<T>, chunk: usize) -> Result<Vec<T>> {
        let n = x.shape().first().copied().unwrap_or(0);
        let mut out = Vec::with_capacity(n);
        let mut rng = SeededRng::new(0, 0);
        let chunk = chunk.max(1);
        let mut start = 0;
        while start < n {
            let end = (start + chunk).min(n);
            let idx: Vec<usize> = (start..end).collect();
            let part = x.select_first_axis(&idx)?;
            let pass = self.forward(&part, Mode::Eval, &mut rng)?;
            out.extend_from_slice(pass.prediction.data());
            start = end;
        }
        Ok(out)
    }

    /// Backpropagates `grads` through the cached pass, overwriting every parameter gradient.
    /// Returns the gradient with respect to the model input.
    pub fn backward(&mut self, cache: &mut ModelCache<T>, grads: &OutputGrads<T>) -> Result<Tensor<T>> {
        if cache.model_id != self.id {
            return Err(Error::Cache("cache was produced by a different model".into()));
        }
        let (Some(trunk), Some(head)) = (cache.trunk.take(), cache.head.take()) else {
            return Err(Error::Cache("forward cache already consumed".into()));
        };
        let decoder = cache.decoder.take();
        if grads.prediction.shape() != [cache.batch, 1] {
            return Err(Error::Cache(format!(
                "prediction gradient {:?}, expected [{}, 1]",
                grads.prediction.shape(),
                cache.batch
            )));
        }
        self.params.zero_grads();
        let head_stages = self.graph.head.clone();
        let mut d_latent = self.back_stages(&head_stages, head, grads.prediction.clone())?;
        match (self.graph.decoder.clone(), decoder) {
            (Some(stages), Some(caches)) => {
                let d_recon = match &grads.reconstruction {
                    Some(g) => g.clone(),
                    None => {
                        let width = self.spec.flat_input();
                        Tensor::zeros(&[cache.batch, width])
                    }
                };
                let d_from_decoder = self.back_stages(&stages, caches, d_recon)?;
                d_latent.add_assign(&d_from_decoder)?;
            }
            (None, None) => {}
            _ => return Err(Error::Cache("decoder cache does not match model".into())),
        }
        let trunk_stages = self.graph.trunk.clone();
        self.back_stages(&trunk_stages, trunk, d_latent)
    }

    fn run_stages(
        &self,
        stages: &[Stage],
        mut x: Tensor<T>,
        mode: Mode,
        rng: &mut SeededRng,
    ) -> Result<(Tensor<T>, Vec<StageCache<T>>)> {
        let mut caches = Vec::with_capacity(stages.len());
        let p = &self.params;
        for stage in stages {
            let (y, cache) = match stage {
                Stage::Flatten => {
                    let shape = x.shape().to_vec();
                    let rest: usize = shape[1..].iter().product();
                    (x.reshape(&[shape[0], rest])?, StageCache::Flatten(shape))
                }
                Stage::SwapAxes => (x.swap_last_axes()?, StageCache::SwapAxes),
                Stage::Dense { name } => {
                    let (y, c) = dense_forward(
                        p.value(&format!("{name}.weight"))?,
                        p.value(&format!("{name}.bias"))?,
                        &x,
                    )?;
                    (y, StageCache::Dense(c))
                }
                Stage::TimeDistributed { name } => {
                    let (batch, steps, width) = x.dims3("time_distributed")?;
                    let w = p.value(&format!("{name}.weight"))?;
                    let flat = x.reshape(&[batch * steps, width])?;
                    let (y, c) = dense_forward(w, p.value(&format!("{name}.bias"))?, &flat)?;
                    let out = w.shape()[1];
                    (
                        y.reshape(&[batch, steps, out])?,
                        StageCache::TimeDistributed(c, vec![batch, steps, width]),
                    )
                }
                Stage::Conv1d { name, stride } => {
                    let (y, c) = conv1d_forward(
                        p.value(&format!("{name}.kernel"))?,
                        p.value(&format!("{name}.bias"))?,
                        *stride,
                        &x,
                    )?;
                    (y, StageCache::Conv1d(c))
                }
                Stage::MaxPool { window } => {
                    let (y, c) = maxpool1d_forward(*window, &x)?;
                    (y, StageCache::MaxPool(c))
                }
                Stage::Lstm { name, last_only } => {
                    let (batch, steps, _) = x.dims3("lstm stage")?;
                    let bias = p.value(&format!("{name}.bias"))?;
                    let hidden = bias.len() / 4;
                    let zeros = Tensor::zeros(&[batch, hidden]);
                    let (hs, c) = lstm_forward(
                        p.value(&format!("{name}.w_input"))?,
                        p.value(&format!("{name}.w_recurrent"))?,
                        bias,
                        &x,
                        &zeros,
                        &zeros,
                    )?;
                    let y = if *last_only {
                        let mut last = Vec::with_capacity(batch * hidden);
                        for b in 0..batch {
                            let off = (b * steps + steps - 1) * hidden;
                            last.extend_from_slice(&hs.data()[off..off + hidden]);
                        }
                        Tensor::from_vec(&[batch, hidden], last)?
                    } else {
                        hs
                    };
                    (
                        y,
                        StageCache::Lstm {
                            cache: c,
                            last_only: *last_only,
                            shape: [batch, steps, hidden],
                        },
                    )
                }
                Stage::Act(kind) => {
                    let (y, c) = activation_forward(*kind, &x)?;
                    (y, StageCache::Act(c))
                }
                Stage::Dropout => {
                    let (y, c) = dropout_forward(self.spec.dropout_rate, mode, &x, rng)?;
                    (y, StageCache::Dropout(c))
                }
            };
            caches.push(cache);
            x = y;
        }
        Ok((x, caches))
    }

    fn back_stages(&mut self, stages: &[Stage], caches: Vec<StageCache<T>>, mut dy: Tensor<T>) -> Result<Tensor<T>> {
        if stages.len() != caches.len() {
            return Err(Error::Cache("stage cache count does not match graph".into()));
        }
        for (stage, cache) in stages.iter().zip(caches).rev() {
            dy = match (stage, cache) {
                (Stage::Flatten, StageCache::Flatten(shape)) => dy.reshape(&shape)?,
                (Stage::SwapAxes, StageCache::SwapAxes) => dy.swap_last_axes()?,
                (Stage::Dense { name }, StageCache::Dense(c)) => {
                    let (wn, bn) = (format!("{name}.weight"), format!("{name}.bias"));
                    let g = dense_backward(self.params.value(&wn)?, c, &dy)?;
                    self.params.accumulate_grad(&wn, &g.d_weights)?;
                    self.params.accumulate_grad(&bn, &g.d_bias)?;
                    g.d_input
                }
                (Stage::TimeDistributed { name }, StageCache::TimeDistributed(c, shape)) => {
                    let (wn, bn) = (format!("{name}.weight"), format!("{name}.bias"));
                    let out = self.params.value(&wn)?.shape()[1];
                    let flat = dy.reshape(&[shape[0] * shape[1], out])?;
                    let g = dense_backward(self.params.value(&wn)?, c, &flat)?;
                    self.params.accumulate_grad(&wn, &g.d_weights)?;
                    self.params.accumulate_grad(&bn, &g.d_bias)?;
                    g.d_input.reshape(&shape)?
                }
                (Stage::Conv1d { name, .. }, StageCache::Conv1d(c)) => {
                    let (kn, bn) = (format!("{name}.kernel"), format!("{name}.bias"));
                    let g = conv1d_backward(self.params.value(&kn)?, c, &dy)?;
                    self.params.accumulate_grad(&kn, &g.d_kernels)?;
                    self.params.accumulate_grad(&bn, &g.d_bias)?;
                    g.d_input
                }
                (Stage::MaxPool { .. }, StageCache::MaxPool(c)) => maxpool1d_backward(c, &dy)?,
                (
                    Stage::Lstm { name, .. },
                    StageCache::Lstm {
                        cache,
                        last_only,
                        shape,
                    },
                ) => {
                    let [batch, steps, hidden] = shape;
                    let d_hs = if last_only {
                        if dy.shape() != [batch, hidden] {
                            return Err(Error::Cache("lstm last-step gradient shape".into()));
                        }
                        let mut full = vec![T::zero(); batch * steps * hidden];
                        for b in 0..batch {
                            let off = (b * steps + steps - 1) * hidden;
                            full[off..off + hidden].copy_from_slice(&dy.data()[b * hidden..(b + 1) * hidden]);
                        }
                        Tensor::from_vec(&[batch, steps, hidden], full)?
                    } else {
                        dy
                    };
                    let (wi, wr, bn) = (
                        format!("{name}.w_input"),
                        format!("{name}.w_recurrent"),
                        format!("{name}.bias"),
                    );
                    let g = lstm_backward(self.params.value(&wi)?, self.params.value(&wr)?, cache, &d_hs)?;
                    self.params.accumulate_grad(&wi, &g.d_w_input)?;
                    self.params.accumulate_grad(&wr, &g.d_w_recurrent)?;
                    self.params.accumulate_grad(&bn, &g.d_bias)?;
                    g.d_inputs
                }
                (Stage::Act(_), StageCache::Act(c)) => activation_backward(c, &dy)?,
                (Stage::Dropout, StageCache::Dropout(c)) => dropout_backward(c, &dy)?,
                _ => return Err(Error::Cache("stage cache does not match graph".into())),
            };
        }
        Ok(dy)
    }
}
