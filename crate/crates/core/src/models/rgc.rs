//! Recurrent graph convolution.
//!
//! Per timestamp `t`:
//!
//! ```text
//! h0        = relu(X_t W_in + b_in)                       (f_MLP)
//! h(l)      = σ(W_g(l) · [AGG_{u∈N(v)} h(l-1)_u , h(l-1)_v])
//! H_t       = h(nlayers)                                  (per-node readout)
//! Z_t       = φ([H_{t-1}, H_t] W_z + b_z)
//! R_t       = φ([H_{t-1}, H_t] W_r + b_r)
//! Q̂_t       = tanh([R_t ⊙ Q̂_{t-1}, H_t] W_q) + b_q
//! Q̃_t       = Z_t ⊙ Q̂_{t-1} + (1 - Z_t) ⊙ Q̂_t
//! ```
//!
//! with `H_0 := H_1` and `Q̂_0 := 0`. The forecast head maps the last `Q̃`
//! to all horizons at once.

use std::sync::Arc;

use rand::Rng;

use super::{init_weight, Batch, ModelSpec};
use crate::error::{Error, Result};
use crate::ndiff::{Neighborhood, Tape, Tensor, Var};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct RgcParams<T> {
    /// Input embedding `[features, hidden]`.
    pub mlp_w: Tensor<T>,
    pub mlp_b: Tensor<T>,
    /// One `[2 * hidden, hidden]` map per graph convolution layer.
    pub conv_w: Vec<Tensor<T>>,
    pub w_z: Tensor<T>,
    pub b_z: Tensor<T>,
    pub w_r: Tensor<T>,
    pub b_r: Tensor<T>,
    pub w_q: Tensor<T>,
    pub b_q: Tensor<T>,
    /// Forecast head `[hidden, horizon]`.
    pub w_o: Tensor<T>,
    pub b_o: Tensor<T>,
}

impl<T: Scalar> RgcParams<T> {
    pub fn init<R: Rng + ?Sized>(spec: &ModelSpec, input_dim: usize, rng: &mut R) -> Self {
        let h = spec.hidden_dim;
        Self {
            mlp_w: init_weight(input_dim, h, rng),
            mlp_b: Tensor::zeros(&[h]),
            conv_w: (0..spec.nlayers).map(|_| init_weight(2 * h, h, rng)).collect(),
            w_z: init_weight(2 * h, h, rng),
            b_z: Tensor::zeros(&[h]),
            w_r: init_weight(2 * h, h, rng),
            b_r: Tensor::zeros(&[h]),
            w_q: init_weight(2 * h, h, rng),
            b_q: Tensor::zeros(&[h]),
            w_o: init_weight(h, spec.horizon, rng),
            b_o: Tensor::zeros(&[spec.horizon]),
        }
    }

    /// All-zero parameters with the shapes `init` would produce.
    pub fn zeros(spec: &ModelSpec, input_dim: usize) -> Self {
        let h = spec.hidden_dim;
        Self {
            mlp_w: Tensor::zeros(&[input_dim, h]),
            mlp_b: Tensor::zeros(&[h]),
            conv_w: (0..spec.nlayers).map(|_| Tensor::zeros(&[2 * h, h])).collect(),
            w_z: Tensor::zeros(&[2 * h, h]),
            b_z: Tensor::zeros(&[h]),
            w_r: Tensor::zeros(&[2 * h, h]),
            b_r: Tensor::zeros(&[h]),
            w_q: Tensor::zeros(&[2 * h, h]),
            b_q: Tensor::zeros(&[h]),
            w_o: Tensor::zeros(&[h, spec.horizon]),
            b_o: Tensor::zeros(&[spec.horizon]),
        }
    }

    pub fn named(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = vec![("mlp_w".to_string(), &self.mlp_w), ("mlp_b".to_string(), &self.mlp_b)];
        out.extend(self.conv_w.iter().enumerate().map(|(l, w)| (format!("conv_w{}", l + 1), w)));
        out.extend([
            ("w_z".to_string(), &self.w_z),
            ("b_z".to_string(), &self.b_z),
            ("w_r".to_string(), &self.w_r),
            ("b_r".to_string(), &self.b_r),
            ("w_q".to_string(), &self.w_q),
            ("b_q".to_string(), &self.b_q),
            ("w_o".to_string(), &self.w_o),
            ("b_o".to_string(), &self.b_o),
        ]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = vec![&mut self.mlp_w, &mut self.mlp_b];
        out.extend(self.conv_w.iter_mut());
        out.extend([
            &mut self.w_z,
            &mut self.b_z,
            &mut self.w_r,
            &mut self.b_r,
            &mut self.w_q,
            &mut self.b_q,
            &mut self.w_o,
            &mut self.b_o,
        ]);
        out
    }

    pub fn bind(&self, tape: &mut Tape<T>) -> RgcVars {
        RgcVars {
            mlp_w: tape.param(self.mlp_w.clone()),
            mlp_b: tape.param(self.mlp_b.clone()),
            conv_w: self.conv_w.iter().map(|w| tape.param(w.clone())).collect(),
            w_z: tape.param(self.w_z.clone()),
            b_z: tape.param(self.b_z.clone()),
            w_r: tape.param(self.w_r.clone()),
            b_r: tape.param(self.b_r.clone()),
            w_q: tape.param(self.w_q.clone()),
            b_q: tape.param(self.b_q.clone()),
            w_o: tape.param(self.w_o.clone()),
            b_o: tape.param(self.b_o.clone()),
        }
    }
}

/// [`RgcParams`] recorded on a tape.
#[derive(Debug, Clone)]
pub struct RgcVars {
    pub mlp_w: Var,
    pub mlp_b: Var,
    pub conv_w: Vec<Var>,
    pub w_z: Var,
    pub b_z: Var,
    pub w_r: Var,
    pub b_r: Var,
    pub w_q: Var,
    pub b_q: Var,
    pub w_o: Var,
    pub b_o: Var,
}

impl RgcVars {
    /// Same order as [`RgcParams::named`].
    pub fn all(&self) -> Vec<Var> {
        let mut out = vec![self.mlp_w, self.mlp_b];
        out.extend(self.conv_w.iter().copied());
        out.extend([self.w_z, self.b_z, self.w_r, self.b_r, self.w_q, self.b_q, self.w_o, self.b_o]);
        out
    }
}

/// Node embeddings `H_t` for one timestamp; `x` is `[rows, features]` with
/// rows laid out in blocks of the graph's nodes.
pub fn graph_conv<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    graph: &Arc<Neighborhood>,
    vars: &RgcVars,
    spec: &ModelSpec,
) -> Result<Var> {
    let lin = tape.matmul(x, vars.mlp_w)?;
    let lin = tape.add_row(lin, vars.mlp_b)?;
    let mut h = tape.relu(lin)?;
    for &w_g in &vars.conv_w {
        let agg = tape.neighbor_aggregate(h, graph, spec.aggregator)?;
        let cat = tape.concat(agg, h)?;
        let pre = tape.matmul(cat, w_g)?;
        h = spec.conv_activation.apply(tape, pre)?;
    }
    Ok(h)
}

/// Gate values and states of one recurrent step.
#[derive(Debug, Clone, Copy)]
pub struct GruStep {
    pub z: Var,
    pub r: Var,
    /// `Q̂_t`, carried to the next step.
    pub q_hat: Var,
    /// `Q̃_t`, the step output.
    pub q_tilde: Var,
}

/// One recurrent update. With `spec.standard_gru` the gates read `q_prev`
/// instead of `h_prev` and `b_q` moves inside the tanh.
pub fn gru_step<T: Scalar>(
    tape: &mut Tape<T>,
    h_prev: Var,
    h_t: Var,
    q_prev: Var,
    vars: &RgcVars,
    spec: &ModelSpec,
) -> Result<GruStep> {
    let gate_src = if spec.standard_gru { q_prev } else { h_prev };
    let gate_in = tape.concat(gate_src, h_t)?;

    let z = tape.matmul(gate_in, vars.w_z)?;
    let z = tape.add_row(z, vars.b_z)?;
    let z = spec.gate_activation.apply(tape, z)?;

    let r = tape.matmul(gate_in, vars.w_r)?;
    let r = tape.add_row(r, vars.b_r)?;
    let r = spec.gate_activation.apply(tape, r)?;

    let rq = tape.mul(r, q_prev)?;
    let cand_in = tape.concat(rq, h_t)?;
    let cand = tape.matmul(cand_in, vars.w_q)?;
    let q_hat = if spec.standard_gru {
        let cand = tape.add_row(cand, vars.b_q)?;
        tape.tanh(cand)?
    } else {
        let cand = tape.tanh(cand)?;
        tape.add_row(cand, vars.b_q)?
    };

    let keep = tape.mul(z, q_prev)?;
    let one_minus_z = tape.one_minus(z)?;
    let update = tape.mul(one_minus_z, q_hat)?;
    let q_tilde = tape.add(keep, update)?;
    Ok(GruStep { z, r, q_hat, q_tilde })
}

/// Values recorded at one timestamp of [`rgc_forward_traced`].
#[derive(Debug, Clone)]
pub struct ForwardState<T> {
    pub h: Tensor<T>,
    pub z: Tensor<T>,
    pub r: Tensor<T>,
    pub q_hat: Tensor<T>,
    pub q_tilde: Tensor<T>,
}

/// Full forward pass; returns the `[rows, horizon]` forecast.
pub fn rgc_forward<T: Scalar, R: Rng + ?Sized>(
    tape: &mut Tape<T>,
    vars: &RgcVars,
    spec: &ModelSpec,
    batch: &Batch<T>,
    graph: &Arc<Neighborhood>,
    dropout_rng: Option<&mut R>,
) -> Result<Var> {
    forward_impl(tape, vars, spec, batch, graph, dropout_rng, None)
}

/// [`rgc_forward`] that also returns per-timestamp states.
pub fn rgc_forward_traced<T: Scalar, R: Rng + ?Sized>(
    tape: &mut Tape<T>,
    vars: &RgcVars,
    spec: &ModelSpec,
    batch: &Batch<T>,
    graph: &Arc<Neighborhood>,
    dropout_rng: Option<&mut R>,
) -> Result<(Var, Vec<ForwardState<T>>)> {
    let mut trace = Vec::new();
    let out = forward_impl(tape, vars, spec, batch, graph, dropout_rng, Some(&mut trace))?;
    Ok((out, trace))
}

fn forward_impl<T: Scalar, R: Rng + ?Sized>(
    tape: &mut Tape<T>,
    vars: &RgcVars,
    spec: &ModelSpec,
    batch: &Batch<T>,
    graph: &Arc<Neighborhood>,
    dropout_rng: Option<&mut R>,
    mut trace: Option<&mut Vec<ForwardState<T>>>,
) -> Result<Var> {
    if batch.lags() != spec.lags {
        return Err(Error::invalid(format!("window has {} lags, model expects {}", batch.lags(), spec.lags)));
    }
    if batch.nodes != graph.len() {
        return Err(Error::shape(
            "rgc_forward",
            format!("{} nodes in batch, {} in graph", batch.nodes, graph.len()),
        ));
    }
    let rows = batch.rows();
    let mut q = tape.constant(Tensor::zeros(&[rows, spec.hidden_dim]));
    let mut h_prev: Option<Var> = None;
    let mut output = q;
    for (t, step) in batch.steps.iter().enumerate() {
        let x = tape.constant(step.clone());
        let at = |e: Error| match e {
            Error::NonFinite { op, node } => Error::NonFiniteStep { op, node, timestamp: t },
            other => other,
        };
        let h_t = graph_conv(tape, x, graph, vars, spec).map_err(at)?;
        let step_out = gru_step(tape, h_prev.unwrap_or(h_t), h_t, q, vars, spec).map_err(at)?;
        if let Some(trace) = trace.as_deref_mut() {
            trace.push(ForwardState {
                h: tape.value(h_t).clone(),
                z: tape.value(step_out.z).clone(),
                r: tape.value(step_out.r).clone(),
                q_hat: tape.value(step_out.q_hat).clone(),
                q_tilde: tape.value(step_out.q_tilde).clone(),
            });
        }
        q = if spec.standard_gru { step_out.q_tilde } else { step_out.q_hat };
        output = step_out.q_tilde;
        h_prev = Some(h_t);
    }
    if let Some(rng) = dropout_rng {
        output = tape.dropout(output, spec.dropout, rng)?;
    }
    let y = tape.matmul(output, vars.w_o)?;
    tape.add_row(y, vars.b_o)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Activation, ModelKind};
    use crate::ndiff::Aggregator;
    use crate::rng::SeedStreams;

    fn spec(hidden: usize) -> ModelSpec {
        ModelSpec {
            kind: ModelKind::Rgc,
            aggregator: Aggregator::Sum,
            nlayers: 1,
            hidden_dim: hidden,
            gate_activation: Activation::Sigmoid,
            conv_activation: Activation::Relu,
            dropout: 0.0,
            lags: 1,
            horizon: 1,
            output_nodes: 1,
            standard_gru: false,
        }
    }

    #[test]
    fn zero_weights_give_activation_of_zero() {
        let g = Neighborhood::from_edges(3, [(0, 1), (1, 2)]);
        for (act, expected) in [(Activation::Relu, 0.0), (Activation::Sigmoid, 0.5)] {
            let mut s = spec(4);
            s.conv_activation = act;
            let p = RgcParams::<f64>::zeros(&s, 2);
            let mut tape = Tape::new();
            let vars = p.bind(&mut tape);
            let x = tape.constant(Tensor::from_f64(&[3, 2], &[1.0, -2.0, 0.5, 3.0, 4.0, 1.0]).unwrap());
            let h = graph_conv(&mut tape, x, &g, &vars, &s).unwrap();
            assert!(tape.value(h).data().iter().all(|&v| v == expected));
        }
    }

    #[test]
    fn single_isolated_node_reduces_to_self_term() {
        let s = spec(2);
        let mut rng = SeedStreams::new(3).init();
        let p = RgcParams::<f64>::init(&s, 3, &mut rng);
        let g = Neighborhood::empty(1);
        let xv = [0.3, -1.2, 2.0];
        let mut tape = Tape::new();
        let vars = p.bind(&mut tape);
        let x = tape.constant(Tensor::from_f64(&[1, 3], &xv).unwrap());
        let h = graph_conv(&mut tape, x, &g, &vars, &s).unwrap();

        // h0 = relu(x W_in), then relu(W_g · [0, h0])
        let h0: Vec<f64> = (0..2)
            .map(|j| (0..3).map(|i| xv[i] * p.mlp_w.at(i, j)).sum::<f64>().max(0.0))
            .collect();
        let expect: Vec<f64> = (0..2)
            .map(|j| (0..2).map(|i| h0[i] * p.conv_w[0].at(2 + i, j)).sum::<f64>().max(0.0))
            .collect();
        for (a, b) in tape.value(h).data().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_weight_gru_halves_previous_candidate() {
        let s = spec(3);
        let p = RgcParams::<f64>::zeros(&s, 1);
        let mut tape = Tape::new();
        let vars = p.bind(&mut tape);
        let h_prev = tape.constant(Tensor::from_f64(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let h_t = tape.constant(Tensor::from_f64(&[2, 3], &[0.5; 6]).unwrap());
        let qv = [0.2, -0.4, 1.0, 3.0, -2.0, 0.7];
        let q_prev = tape.constant(Tensor::from_f64(&[2, 3], &qv).unwrap());
        let st = gru_step(&mut tape, h_prev, h_t, q_prev, &vars, &s).unwrap();
        assert!(tape.value(st.z).data().iter().all(|&z| z == 0.5));
        assert!(tape.value(st.r).data().iter().all(|&r| r == 0.5));
        assert!(tape.value(st.q_hat).data().iter().all(|&q| q == 0.0));
        let expected: Vec<f64> = qv.iter().map(|q| 0.5 * q).collect();
        assert_eq!(tape.value(st.q_tilde).data(), expected.as_slice());
    }

    #[test]
    fn saturated_update_gate_keeps_previous_candidate() {
        let s = spec(2);
        let mut p = RgcParams::<f64>::init(&s, 1, &mut SeedStreams::new(5).init());
        p.w_z = Tensor::zeros(&[4, 2]);
        // sigmoid(800) rounds to exactly 1 in f64
        p.b_z = Tensor::full(&[2], 800.0);
        let mut tape = Tape::new();
        let vars = p.bind(&mut tape);
        let h_prev = tape.constant(Tensor::from_f64(&[1, 2], &[0.3, 0.1]).unwrap());
        let h_t = tape.constant(Tensor::from_f64(&[1, 2], &[-0.7, 0.9]).unwrap());
        let q_prev = tape.constant(Tensor::from_f64(&[1, 2], &[0.25, -1.5]).unwrap());
        let st = gru_step(&mut tape, h_prev, h_t, q_prev, &vars, &s).unwrap();
        assert_eq!(tape.value(st.z).data(), &[1.0, 1.0]);
        assert_eq!(tape.value(st.q_tilde).data(), tape.value(q_prev).data());
    }
}
