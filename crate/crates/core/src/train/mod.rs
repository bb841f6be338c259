//! Windowing, the 80/20 split, AMSGrad and the paired experiment sweep.

mod config;
mod experiment;
mod optim;
mod windows;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelParams, ModelSpec};
use crate::ndiff::{Neighborhood, Tape};
use crate::rng::SeedStreams;
use crate::scalar::Scalar;

pub use config::{ExperimentConfig, InputPaths, MemberOverride, RosterConfig};
pub use experiment::{
    evaluate, prepare_experiment, read_records, run_experiment, write_records, FeatureSet, JobKey,
    FeatureWindows, PreparedExperiment, RunOptions, RunRecord,
};
pub use optim::{amsgrad_step, AmsGrad, OptimizerState};
pub use windows::{make_windows, sample_count, split_80_20, WindowSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub epochs: usize,
    pub optimizer: AmsGrad,
    /// Abort once the loss exceeds this multiple of the first epoch's loss.
    pub divergence_factor: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 150,
            optimizer: AmsGrad::default(),
            divergence_factor: 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainStatus {
    Completed,
    Diverged { epoch: usize, reason: String },
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub params: ModelParams<T>,
    /// Training loss per completed epoch.
    pub loss_curve: Vec<f64>,
    pub status: TrainStatus,
    pub skipped_steps: u64,
}

/// Full-batch training on mean squared error over every window, node and
/// horizon. Deterministic given `seed`: weights come from the seed's `init`
/// stream and dropout masks from its `dropout` stream.
pub fn train_model<T: Scalar>(
    spec: &ModelSpec,
    windows: &WindowSet,
    graph: Option<&Arc<Neighborhood>>,
    options: &TrainOptions,
    seed: u64,
) -> Result<TrainOutcome<T>> {
    if windows.is_empty() {
        return Err(Error::invalid("cannot train on an empty window set"));
    }
    let streams = SeedStreams::new(seed);
    let mut params = ModelParams::<T>::init(spec, windows.features, &mut streams.init())?;
    let mut dropout_rng = streams.dropout();
    let (batch, targets) = windows.to_batch::<T>()?;
    let shapes: Vec<Vec<usize>> = params.named().iter().map(|(_, t)| t.shape().to_vec()).collect();
    let mut state = OptimizerState::new(&shapes, options.optimizer);

    let mut loss_curve = Vec::with_capacity(options.epochs);
    let mut status = TrainStatus::Completed;
    for epoch in 0..options.epochs {
        let mut tape = Tape::new();
        let step = params
            .forward(&mut tape, spec, &batch, graph, Some(&mut dropout_rng))
            .and_then(|(out, vars)| {
                let loss = tape.mse_loss(out, &targets)?;
                let grads = tape.backward(loss)?;
                Ok((tape.value(loss).item().to_f64_lossy(), grads.wrt_all(&vars)))
            });
        let (loss, grads) = match step {
            Ok(v) => v,
            Err(e @ (Error::NonFinite { .. } | Error::NonFiniteStep { .. })) => {
                status = TrainStatus::Diverged { epoch, reason: e.to_string() };
                break;
            }
            Err(e) => return Err(e),
        };
        if let Some(&first) = loss_curve.first() {
            if loss > options.divergence_factor * first {
                status = TrainStatus::Diverged {
                    epoch,
                    reason: format!("loss {loss:e} exceeds {:e} x initial {first:e}", options.divergence_factor),
                };
                break;
            }
        }
        loss_curve.push(loss);
        let mut tensors = params.tensors_mut();
        amsgrad_step(&mut state, &mut tensors, &grads)?;
    }
    Ok(TrainOutcome {
        params,
        loss_curve,
        status,
        skipped_steps: state.skipped,
    })
}
