use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::conv1d::conv_output_len;
use crate::layers::dropout::check_rate;
use crate::layers::pool::pooled_len;

/// The seven forecasting architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    RnnLstm,
    StackedLstm,
    Cnn,
    CnnLstm,
    Dnn,
    TdMlp,
    Autoencoder,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::RnnLstm,
        ModelKind::StackedLstm,
        ModelKind::Cnn,
        ModelKind::CnnLstm,
        ModelKind::Dnn,
        ModelKind::TdMlp,
        ModelKind::Autoencoder,
    ];

    /// Identifier used in configs, file names and JSON.
    pub fn key(self) -> &'static str {
        match self {
            ModelKind::RnnLstm => "rnn-lstm",
            ModelKind::StackedLstm => "stacked-lstm",
            ModelKind::Cnn => "cnn",
            ModelKind::CnnLstm => "cnn-lstm",
            ModelKind::Dnn => "dnn",
            ModelKind::TdMlp => "td-mlp",
            ModelKind::Autoencoder => "autoencoder",
        }
    }

    /// Label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::RnnLstm => "RNN-LSTM",
            ModelKind::StackedLstm => "Stacked LSTM",
            ModelKind::Cnn => "CNN",
            ModelKind::CnnLstm => "CNN-LSTM",
            ModelKind::Dnn => "DNN",
            ModelKind::TdMlp => "TD-MLP",
            ModelKind::Autoencoder => "AE",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Default per-stage widths.
    pub fn default_hidden(self) -> Vec<usize> {
        match self {
            ModelKind::RnnLstm => vec![64],
            ModelKind::StackedLstm => vec![64, 64],
            ModelKind::Cnn => vec![32, 64],
            ModelKind::CnnLstm => vec![32, 64],
            ModelKind::Dnn => vec![128, 64, 32],
            ModelKind::TdMlp => vec![32],
            ModelKind::Autoencoder => vec![64, 16],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['_', ' '], "-");
        let kind = match norm.as_str() {
            "rnn-lstm" | "lstm" => ModelKind::RnnLstm,
            "stacked-lstm" | "stacked" => ModelKind::StackedLstm,
            "cnn" => ModelKind::Cnn,
            "cnn-lstm" => ModelKind::CnnLstm,
            "dnn" => ModelKind::Dnn,
            "td-mlp" | "tdmlp" => ModelKind::TdMlp,
            "autoencoder" | "ae" => ModelKind::Autoencoder,
            _ => return Err(Error::invalid(format!("unknown model kind '{s}'"))),
        };
        Ok(kind)
    }
}

/// Architecture hyperparameters for one model.
///
/// `hidden` holds per-stage widths whose meaning depends on the kind:
///
/// | kind | `hidden` |
/// |---|---|
/// | `RnnLstm` | `[lstm]` |
/// | `StackedLstm` | `[lstm, lstm, ...]` (at least two) |
/// | `Cnn` | `[filters, dense]` |
/// | `CnnLstm` | `[filters, lstm]` |
/// | `Dnn` | `[dense, dense, ...]` |
/// | `TdMlp` | `[per-step dense, ...]` |
/// | `Autoencoder` | `[encoder, latent]` |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub lookback: usize,
    pub features: usize,
    pub hidden: Vec<usize>,
    pub dropout_rate: f64,
    /// Weight of the reconstruction loss; only used by the autoencoder.
    pub ae_beta: f64,
    pub kernel_width: usize,
    pub pool_window: usize,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, lookback: usize, features: usize) -> Self {
        Self {
            kind,
            lookback,
            features,
            hidden: kind.default_hidden(),
            dropout_rate: 0.0,
            ae_beta: 0.5,
            kernel_width: 3,
            pool_window: 2,
        }
    }

    pub fn with_hidden(mut self, hidden: Vec<usize>) -> Self {
        self.hidden = hidden;
        self
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout_rate = rate;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.ae_beta = beta;
        self
    }

    /// Width of the flattened input window.
    pub fn flat_input(&self) -> usize {
        self.lookback * self.features
    }

    pub fn validate(&self) -> Result<()> {
        if self.lookback == 0 || self.features == 0 {
            return Err(Error::invalid("lookback and feature count must be positive"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::invalid(format!(
                "hidden sizes must be positive: {:?}",
                self.hidden
            )));
        }
        check_rate(self.dropout_rate)?;
        if !(self.ae_beta >= 0.0 && self.ae_beta.is_finite()) {
            return Err(Error::invalid("autoencoder beta must be finite and non-negative"));
        }
        let n = self.hidden.len();
        let ok = match self.kind {
            ModelKind::RnnLstm => n == 1,
            ModelKind::StackedLstm => n >= 2,
            ModelKind::Cnn | ModelKind::CnnLstm | ModelKind::Autoencoder => n == 2,
            ModelKind::Dnn | ModelKind::TdMlp => n >= 1,
        };
        if !ok {
            return Err(Error::invalid(format!(
                "{} does not accept {n} hidden sizes ({:?})",
                self.kind, self.hidden
            )));
        }
        if matches!(self.kind, ModelKind::Cnn | ModelKind::CnnLstm) {
            let conv = conv_output_len(self.lookback, self.kernel_width, 1).ok_or_else(|| {
                Error::invalid(format!(
                    "kernel width {} does not fit lookback {}",
                    self.kernel_width, self.lookback
                ))
            })?;
            if self.kind == ModelKind::Cnn && pooled_len(conv, self.pool_window) == 0 {
                return Err(Error::invalid(format!(
                    "pool window {} too large for convolution output {conv}",
                    self.pool_window
                )));
            }
        }
        Ok(())
    }
}
