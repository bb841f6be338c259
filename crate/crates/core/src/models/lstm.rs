//! Per-node LSTM baseline; nodes never exchange information.

use rand::Rng;

use super::{init_weight, Batch, ModelSpec};
use crate::error::{Error, Result};
use crate::ndiff::{Tape, Tensor, Var};
use crate::scalar::Scalar;

/// Gate weights act on `[x_t, h_{t-1}]` and are `[features + hidden, hidden]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams<T> {
    pub w_i: Tensor<T>,
    pub b_i: Tensor<T>,
    pub w_f: Tensor<T>,
    pub b_f: Tensor<T>,
    pub w_o: Tensor<T>,
    pub b_o: Tensor<T>,
    pub w_c: Tensor<T>,
    pub b_c: Tensor<T>,
    pub head_w: Tensor<T>,
    pub head_b: Tensor<T>,
}

impl<T: Scalar> LstmParams<T> {
    pub fn init<R: Rng + ?Sized>(spec: &ModelSpec, input_dim: usize, rng: &mut R) -> Self {
        let (h, fan) = (spec.hidden_dim, input_dim + spec.hidden_dim);
        Self {
            w_i: init_weight(fan, h, rng),
            b_i: Tensor::zeros(&[h]),
            w_f: init_weight(fan, h, rng),
            b_f: Tensor::zeros(&[h]),
            w_o: init_weight(fan, h, rng),
            b_o: Tensor::zeros(&[h]),
            w_c: init_weight(fan, h, rng),
            b_c: Tensor::zeros(&[h]),
            head_w: init_weight(h, spec.horizon, rng),
            head_b: Tensor::zeros(&[spec.horizon]),
        }
    }

    pub fn named(&self) -> Vec<(String, &Tensor<T>)> {
        [
            ("w_i", &self.w_i),
            ("b_i", &self.b_i),
            ("w_f", &self.w_f),
            ("b_f", &self.b_f),
            ("w_o", &self.w_o),
            ("b_o", &self.b_o),
            ("w_c", &self.w_c),
            ("b_c", &self.b_c),
            ("head_w", &self.head_w),
            ("head_b", &self.head_b),
        ]
        .into_iter()
        .map(|(n, t)| (n.to_string(), t))
        .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![
            &mut self.w_i,
            &mut self.b_i,
            &mut self.w_f,
            &mut self.b_f,
            &mut self.w_o,
            &mut self.b_o,
            &mut self.w_c,
            &mut self.b_c,
            &mut self.head_w,
            &mut self.head_b,
        ]
    }

    pub fn bind(&self, tape: &mut Tape<T>) -> LstmVars {
        let v: Vec<Var> = self.named().into_iter().map(|(_, t)| tape.param(t.clone())).collect();
        LstmVars {
            w_i: v[0],
            b_i: v[1],
            w_f: v[2],
            b_f: v[3],
            w_o: v[4],
            b_o: v[5],
            w_c: v[6],
            b_c: v[7],
            head_w: v[8],
            head_b: v[9],
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LstmVars {
    pub w_i: Var,
    pub b_i: Var,
    pub w_f: Var,
    pub b_f: Var,
    pub w_o: Var,
    pub b_o: Var,
    pub w_c: Var,
    pub b_c: Var,
    pub head_w: Var,
    pub head_b: Var,
}

impl LstmVars {
    pub fn all(&self) -> Vec<Var> {
        vec![
            self.w_i, self.b_i, self.w_f, self.b_f, self.w_o, self.b_o, self.w_c, self.b_c, self.head_w,
            self.head_b,
        ]
    }
}

fn affine<T: Scalar>(tape: &mut Tape<T>, x: Var, w: Var, b: Var) -> Result<Var> {
    let y = tape.matmul(x, w)?;
    tape.add_row(y, b)
}

/// Standard LSTM cell over the lags, then the direct multi-horizon head.
pub fn lstm_forward<T: Scalar, R: Rng + ?Sized>(
    tape: &mut Tape<T>,
    vars: &LstmVars,
    spec: &ModelSpec,
    batch: &Batch<T>,
    dropout_rng: Option<&mut R>,
) -> Result<Var> {
    if batch.lags() != spec.lags {
        return Err(Error::invalid(format!("window has {} lags, model expects {}", batch.lags(), spec.lags)));
    }
    let rows = batch.rows();
    let mut h = tape.constant(Tensor::zeros(&[rows, spec.hidden_dim]));
    let mut c = h;
    for (t, step) in batch.steps.iter().enumerate() {
        let cell = |tape: &mut Tape<T>, h: Var, c: Var| -> Result<(Var, Var)> {
            let x = tape.constant(step.clone());
            let xh = tape.concat(x, h)?;
            let i = affine(tape, xh, vars.w_i, vars.b_i)?;
            let i = tape.sigmoid(i)?;
            let f = affine(tape, xh, vars.w_f, vars.b_f)?;
            let f = tape.sigmoid(f)?;
            let o = affine(tape, xh, vars.w_o, vars.b_o)?;
            let o = tape.sigmoid(o)?;
            let g = affine(tape, xh, vars.w_c, vars.b_c)?;
            let g = tape.tanh(g)?;
            let fc = tape.mul(f, c)?;
            let ig = tape.mul(i, g)?;
            let c = tape.add(fc, ig)?;
            let tc = tape.tanh(c)?;
            let h = tape.mul(o, tc)?;
            Ok((h, c))
        };
        (h, c) = cell(tape, h, c).map_err(|e| match e {
            Error::NonFinite { op, node } => Error::NonFiniteStep { op, node, timestamp: t },
            other => other,
        })?;
    }
    if let Some(rng) = dropout_rng {
        h = tape.dropout(h, spec.dropout, rng)?;
    }
    affine(tape, h, vars.head_w, vars.head_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelKind, ModelParams};
    use crate::rng::SeedStreams;

    fn spec() -> ModelSpec {
        ModelSpec {
            kind: ModelKind::Lstm,
            hidden_dim: 3,
            lags: 1,
            horizon: 2,
            dropout: 0.0,
            ..ModelSpec::default()
        }
    }

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    #[test]
    fn zero_weights_forecast_the_output_bias() {
        let s = ModelSpec { lags: 3, ..spec() };
        let mut p = LstmParams::<f64>::init(&s, 2, &mut SeedStreams::new(0).init());
        for t in p.tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        p.head_b = Tensor::from_f64(&[2], &[1.5, -0.5]).unwrap();
        let params = ModelParams::Lstm(p);
        let window: Vec<f64> = (0..3 * 4 * 2).map(|i| i as f64 * 0.1).collect();
        let batch = Batch::single(&window, 3, 4, 2).unwrap();
        let f = params.forecast(&s, &batch, None).unwrap();
        assert_eq!(f.shape(), &[2, 4]);
        assert!(f.data()[..4].iter().all(|&v| v == 1.5));
        assert!(f.data()[4..].iter().all(|&v| v == -0.5));
    }

    #[test]
    fn one_step_matches_cell_equations() {
        let s = spec();
        let p = LstmParams::<f64>::init(&s, 2, &mut SeedStreams::new(9).init());
        let x = [0.7, -0.3];
        let batch = Batch::single(&x, 1, 1, 2).unwrap();
        let out = ModelParams::Lstm(p.clone()).predict(&s, &batch, None).unwrap();

        // h_prev = c_prev = 0, so only the first two rows of each gate weight matter
        let gate = |w: &Tensor<f64>, b: &Tensor<f64>, j: usize| x[0] * w.at(0, j) + x[1] * w.at(1, j) + b.data()[j];
        let mut h = [0.0; 3];
        for j in 0..3 {
            let i = sig(gate(&p.w_i, &p.b_i, j));
            let o = sig(gate(&p.w_o, &p.b_o, j));
            let g = gate(&p.w_c, &p.b_c, j).tanh();
            let c = i * g;
            h[j] = o * c.tanh();
        }
        for k in 0..2 {
            let y: f64 = (0..3).map(|j| h[j] * p.head_w.at(j, k)).sum::<f64>() + p.head_b.data()[k];
            assert!((out.at(0, k) - y).abs() < 1e-14);
        }
    }

    #[test]
    fn node_permutation_permutes_forecasts() {
        let s = ModelSpec { lags: 2, ..spec() };
        let params = ModelParams::<f64>::init(&s, 2, &mut SeedStreams::new(4).init()).unwrap();
        let (nodes, feats) = (3, 2);
        let window: Vec<f64> = (0..2 * nodes * feats).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let perm = [2, 0, 1];
        let mut permuted = vec![0.0; window.len()];
        for t in 0..2 {
            for (new, &old) in perm.iter().enumerate() {
                for f in 0..feats {
                    permuted[(t * nodes + new) * feats + f] = window[(t * nodes + old) * feats + f];
                }
            }
        }
        let a = params.forecast(&s, &Batch::single(&window, 2, nodes, feats).unwrap(), None).unwrap();
        let b = params.forecast(&s, &Batch::single(&permuted, 2, nodes, feats).unwrap(), None).unwrap();
        for k in 0..2 {
            for (new, &old) in perm.iter().enumerate() {
                assert_eq!(b.at(k, new), a.at(k, old));
            }
        }
    }
}
