//! Forecasting models: the recurrent graph convolution, an LSTM baseline and
//! the ensemble roster.
//!
//! All models consume a [`Batch`] of `h` lagged feature matrices, each with
//! `samples * nodes` rows, and emit `[samples * nodes, horizon]` forecasts in
//! one shot.

mod ensemble;
mod lstm;
mod rgc;

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndiff::{Aggregator, Neighborhood, Tape, Tensor, Var};
use crate::scalar::Scalar;

pub use ensemble::{default_roster, make_ensemble, EnsembleConfig, MemberSpec, DEFAULT_ENSEMBLE_SIZE};
pub use lstm::{lstm_forward, LstmParams, LstmVars};
pub use rgc::{graph_conv, gru_step, rgc_forward, rgc_forward_traced, ForwardState, GruStep, RgcParams, RgcVars};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Lstm,
    Rgc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply<T: Scalar>(self, tape: &mut Tape<T>, x: Var) -> Result<Var> {
        match self {
            Activation::Sigmoid => tape.sigmoid(x),
            Activation::Relu => tape.relu(x),
            Activation::Tanh => tape.tanh(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub aggregator: Aggregator,
    /// Graph convolution layers (1 or 2).
    pub nlayers: usize,
    pub hidden_dim: usize,
    /// Activation of the update and reset gates.
    pub gate_activation: Activation,
    /// Activation after each graph convolution layer.
    pub conv_activation: Activation,
    pub dropout: f64,
    /// Input lags `h`.
    pub lags: usize,
    /// Forecast horizon `ω`.
    pub horizon: usize,
    pub output_nodes: usize,
    /// Conventional GRU: gates read the previous recurrent state and the
    /// candidate bias sits inside the tanh.
    #[serde(default)]
    pub standard_gru: bool,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            kind: ModelKind::Rgc,
            aggregator: Aggregator::Mean,
            nlayers: 1,
            hidden_dim: 128,
            gate_activation: Activation::Sigmoid,
            conv_activation: Activation::Relu,
            dropout: 0.5,
            lags: 5,
            horizon: 15,
            output_nodes: 1,
            standard_gru: false,
        }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim < 1 || self.lags < 1 || self.horizon < 1 || self.output_nodes < 1 {
            return Err(Error::invalid(format!(
                "hidden_dim, lags, horizon and output_nodes must be >= 1 (got {}, {}, {}, {})",
                self.hidden_dim, self.lags, self.horizon, self.output_nodes
            )));
        }
        if self.kind == ModelKind::Rgc && !(1..=2).contains(&self.nlayers) {
            return Err(Error::invalid(format!("nlayers must be 1 or 2, got {}", self.nlayers)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// Lagged inputs for a batch of windows over the same nodes.
#[derive(Debug, Clone)]
pub struct Batch<T> {
    /// One `[samples * nodes, features]` matrix per lag, oldest first.
    pub steps: Vec<Tensor<T>>,
    pub samples: usize,
    pub nodes: usize,
}

impl<T: Scalar> Batch<T> {
    pub fn new(steps: Vec<Tensor<T>>, samples: usize, nodes: usize) -> Result<Self> {
        let rows = samples * nodes;
        let Some(first) = steps.first() else {
            return Err(Error::invalid("batch needs at least one lag"));
        };
        let features = first.cols();
        if steps.iter().any(|s| s.shape() != [rows, features]) {
            return Err(Error::shape("batch", format!("every lag must be [{rows}, {features}]")));
        }
        Ok(Self { steps, samples, nodes })
    }

    /// Single window given as `lags × nodes × features` row-major values.
    pub fn single(window: &[f64], lags: usize, nodes: usize, features: usize) -> Result<Self> {
        if window.len() != lags * nodes * features {
            return Err(Error::shape("batch", format!("window has {} values", window.len())));
        }
        let steps = window
            .chunks(nodes * features)
            .map(|c| Tensor::from_f64(&[nodes, features], c))
            .collect::<Result<_>>()?;
        Self::new(steps, 1, nodes)
    }

    pub fn lags(&self) -> usize {
        self.steps.len()
    }

    pub fn features(&self) -> usize {
        self.steps[0].cols()
    }

    pub fn rows(&self) -> usize {
        self.samples * self.nodes
    }
}

/// Parameters of any roster member.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams<T> {
    Rgc(RgcParams<T>),
    Lstm(LstmParams<T>),
}

impl<T: Scalar> ModelParams<T> {
    pub fn init<R: Rng + ?Sized>(spec: &ModelSpec, input_dim: usize, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        Ok(match spec.kind {
            ModelKind::Rgc => ModelParams::Rgc(RgcParams::init(spec, input_dim, rng)),
            ModelKind::Lstm => ModelParams::Lstm(LstmParams::init(spec, input_dim, rng)),
        })
    }

    pub fn named(&self) -> Vec<(String, &Tensor<T>)> {
        match self {
            ModelParams::Rgc(p) => p.named(),
            ModelParams::Lstm(p) => p.named(),
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            ModelParams::Rgc(p) => p.tensors_mut(),
            ModelParams::Lstm(p) => p.tensors_mut(),
        }
    }

    pub fn shapes(&self) -> Vec<(String, Vec<usize>)> {
        self.named().into_iter().map(|(n, t)| (n, t.shape().to_vec())).collect()
    }

    /// Records the forward pass; returns the `[rows, horizon]` output and the
    /// parameter vars in [`ModelParams::named`] order. Dropout is applied only
    /// when an RNG is supplied.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape<T>,
        spec: &ModelSpec,
        batch: &Batch<T>,
        graph: Option<&Arc<Neighborhood>>,
        dropout_rng: Option<&mut R>,
    ) -> Result<(Var, Vec<Var>)> {
        match self {
            ModelParams::Rgc(p) => {
                let graph = graph.ok_or_else(|| Error::invalid("recurrent graph convolution requires a graph"))?;
                let vars = p.bind(tape);
                let out = rgc_forward(tape, &vars, spec, batch, graph, dropout_rng)?;
                Ok((out, vars.all()))
            }
            ModelParams::Lstm(p) => {
                let vars = p.bind(tape);
                let out = lstm_forward(tape, &vars, spec, batch, dropout_rng)?;
                Ok((out, vars.all()))
            }
        }
    }

    /// Inference without dropout: `[rows, horizon]`.
    pub fn predict(&self, spec: &ModelSpec, batch: &Batch<T>, graph: Option<&Arc<Neighborhood>>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let (out, _) = self.forward::<crate::rng::Rng>(&mut tape, spec, batch, graph, None)?;
        Ok(tape.value(out).clone())
    }

    /// Forecast for a single window as a `[horizon, nodes]` tensor.
    pub fn forecast(&self, spec: &ModelSpec, batch: &Batch<T>, graph: Option<&Arc<Neighborhood>>) -> Result<Tensor<T>> {
        if batch.samples != 1 {
            return Err(Error::invalid("forecast takes a single-window batch"));
        }
        let out = self.predict(spec, batch, graph)?;
        let (n, w) = (out.rows(), out.cols());
        let data = (0..w).flat_map(|k| (0..n).map(move |v| (v, k))).map(|(v, k)| out.at(v, k)).collect();
        Tensor::new(vec![w, n], data)
    }
}

/// Uniform in `±1/sqrt(fan_in)` where fan_in is the weight's row count.
pub(crate) fn init_weight<T: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor<T> {
    Tensor::uniform(&[rows, cols], 1.0 / (rows as f64).sqrt(), rng)
}
