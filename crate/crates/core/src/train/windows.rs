use std::ops::Range;

use crate::error::{Error, Result};
use crate::ingest::FeaturePanel;
use crate::models::Batch;
use crate::ndiff::Tensor;
use crate::scalar::Scalar;

/// Number of stride-1 windows of `lags + horizon` days in `len` days.
pub fn sample_count(len: usize, lags: usize, horizon: usize) -> usize {
    (len + 1).saturating_sub(lags + horizon)
}

/// Sliding windows: inputs are `lags × nodes × features`, targets are the
/// target channel over the following `horizon` days as `horizon × nodes`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub lags: usize,
    pub horizon: usize,
    pub nodes: usize,
    pub features: usize,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    /// Panel index of each window's last input day.
    pub origins: Vec<usize>,
}

impl WindowSet {
    /// Windows lying entirely inside `range`.
    pub fn new(panel: &FeaturePanel, lags: usize, horizon: usize, range: Range<usize>, target: usize) -> Result<Self> {
        let (t_len, nodes, features) = panel.shape();
        if lags == 0 || horizon == 0 {
            return Err(Error::invalid("lags and horizon must be >= 1"));
        }
        if range.end > t_len || target >= features {
            return Err(Error::invalid(format!(
                "window range {range:?} or target {target} outside panel {t_len}x{nodes}x{features}"
            )));
        }
        let count = sample_count(range.len(), lags, horizon);
        if count == 0 {
            log::warn!("range {range:?} is shorter than lags + horizon = {}; no windows", lags + horizon);
        }
        let mut set = WindowSet {
            lags,
            horizon,
            nodes,
            features,
            inputs: Vec::with_capacity(count),
            targets: Vec::with_capacity(count),
            origins: Vec::with_capacity(count),
        };
        for s in 0..count {
            let first = range.start + s;
            let origin = first + lags - 1;
            let block = nodes * features;
            set.inputs.push(panel.data[first * block..(origin + 1) * block].to_vec());
            set.targets.push(
                (origin + 1..=origin + horizon)
                    .flat_map(|t| (0..nodes).map(move |n| (t, n)))
                    .map(|(t, n)| panel.get(t, n, target))
                    .collect(),
            );
            set.origins.push(origin);
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Stacks every window into one batch; the target tensor is
    /// `[samples * nodes, horizon]` in the model's row layout.
    pub fn to_batch<T: Scalar>(&self) -> Result<(Batch<T>, Tensor<T>)> {
        let (s_len, n, f) = (self.len(), self.nodes, self.features);
        let steps = (0..self.lags)
            .map(|k| {
                let mut data = Vec::with_capacity(s_len * n * f);
                for input in &self.inputs {
                    data.extend(input[k * n * f..(k + 1) * n * f].iter().map(|&v| T::of(v)));
                }
                Tensor::new(vec![s_len * n, f], data)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut targets = Vec::with_capacity(s_len * n * self.horizon);
        for tgt in &self.targets {
            for node in 0..n {
                targets.extend((0..self.horizon).map(|k| T::of(tgt[k * n + node])));
            }
        }
        Ok((Batch::new(steps, s_len, n)?, Tensor::new(vec![s_len * n, self.horizon], targets)?))
    }
}

/// Sliding stride-1 windows over `range`, with `target` as the forecast channel.
pub fn make_windows(panel: &FeaturePanel, lags: usize, horizon: usize, range: Range<usize>, target: usize) -> Result<WindowSet> {
    WindowSet::new(panel, lags, horizon, range, target)
}

/// First `floor(0.8 T)` days for training, the rest for testing.
pub fn split_80_20(days: usize) -> Result<(Range<usize>, Range<usize>)> {
    let train_end = days * 4 / 5;
    if train_end == 0 || train_end == days {
        return Err(Error::invalid(format!("{days} days cannot be split 80/20")));
    }
    Ok((0..train_end, train_end..days))
}
