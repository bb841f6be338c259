#![allow(dead_code)]

use std::sync::Arc;

use chrono::NaiveDate;
use geocon::graphs::{CountyGraph, GraphKind};
use geocon::ingest::{DateRange, FeaturePanel, Fips};
use geocon::models::{Activation, Batch, ModelKind, ModelSpec, RgcVars};
use geocon::ndiff::{Aggregator, Neighborhood, Tensor, Var};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fips_list(n: usize) -> Vec<Fips> {
    (0..n).map(|i| Fips::parse(&format!("99{:03}", 2 * i + 1)).unwrap()).collect()
}

pub fn random_panel(rng: &mut impl Rng, days: usize, nodes: usize, features: usize) -> FeaturePanel {
    let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    let end = start + chrono::Days::new(days as u64 - 1);
    let len = days * nodes * features;
    FeaturePanel {
        county_order: fips_list(nodes),
        variable_order: (0..features).map(|f| format!("v{f}")).collect(),
        date_range: DateRange::new(start, end).unwrap(),
        data: (0..len).map(|_| rng.random_range(-2.0..2.0)).collect(),
        mask: vec![false; len],
    }
}

/// Ring with one chord, so degrees are not all equal.
pub fn ring(n: usize) -> CountyGraph {
    let mut pairs: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
    if n > 3 {
        pairs.push((0, n / 2, 1.0));
    }
    CountyGraph::new(fips_list(n), pairs, GraphKind::Border).unwrap()
}

pub fn ring_neighborhood(n: usize) -> Arc<Neighborhood> {
    ring(n).neighborhood()
}

pub fn rgc_spec(aggregator: Aggregator, nlayers: usize, hidden: usize, lags: usize, horizon: usize) -> ModelSpec {
    ModelSpec {
        kind: ModelKind::Rgc,
        aggregator,
        nlayers,
        hidden_dim: hidden,
        gate_activation: Activation::Sigmoid,
        conv_activation: Activation::Relu,
        dropout: 0.0,
        lags,
        horizon,
        output_nodes: 1,
        standard_gru: false,
    }
}

pub fn random_batch(rng: &mut impl Rng, lags: usize, samples: usize, nodes: usize, features: usize) -> Batch<f64> {
    let steps = (0..lags).map(|_| Tensor::uniform(&[samples * nodes, features], 1.0, rng)).collect();
    Batch::new(steps, samples, nodes).unwrap()
}

/// Rebuilds the parameter vars from the flat list `RgcParams::named` order gives.
pub fn rgc_vars(v: &[Var], nlayers: usize) -> RgcVars {
    let c = 2 + nlayers;
    RgcVars {
        mlp_w: v[0],
        mlp_b: v[1],
        conv_w: v[2..c].to_vec(),
        w_z: v[c],
        b_z: v[c + 1],
        w_r: v[c + 2],
        b_r: v[c + 3],
        w_q: v[c + 4],
        b_q: v[c + 5],
        w_o: v[c + 6],
        b_o: v[c + 7],
    }
}

/// Reorders the rows of every lag by the node permutation `perm` (new node
/// `i` is old node `perm[i]`) within each sample block.
pub fn permute_batch(batch: &Batch<f64>, perm: &[usize]) -> Batch<f64> {
    let n = batch.nodes;
    let steps = batch
        .steps
        .iter()
        .map(|s| permute_rows(s, perm, n))
        .collect();
    Batch::new(steps, batch.samples, n).unwrap()
}

pub fn permute_rows(t: &Tensor<f64>, perm: &[usize], n: usize) -> Tensor<f64> {
    let cols = t.cols();
    let mut data = Vec::with_capacity(t.numel());
    for block in 0..t.rows() / n {
        for &old in perm {
            let r = block * n + old;
            data.extend_from_slice(&t.data()[r * cols..(r + 1) * cols]);
        }
    }
    Tensor::new(t.shape().to_vec(), data).unwrap()
}

/// Neighborhood relabeled by `perm` (new node `i` is old node `perm[i]`).
pub fn permute_graph(g: &CountyGraph, perm: &[usize]) -> Arc<Neighborhood> {
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    Neighborhood::from_edges(perm.len(), g.edges().iter().map(|e| (inv[e.a], inv[e.b])))
}
