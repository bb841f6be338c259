//! The paired sweep: every roster member is trained `runs` times on the
//! baseline channels and again with each factor added, with the same seed on
//! both sides of a pair.

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::windows::{split_80_20, WindowSet};
use super::{train_model, TrainOptions, TrainStatus};
use crate::error::{Error, Result};
use crate::graphs::{CountyGraph, GraphKind};
use crate::ingest::{zscore, ChannelScale, FeaturePanel, Fips};
use crate::models::{make_ensemble, MemberSpec, ModelParams, ModelSpec};
use crate::ndiff::Neighborhood;
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "factor", rename_all = "snake_case")]
pub enum FeatureSet {
    Baseline,
    WithFactor(String),
}

impl FeatureSet {
    pub fn label(&self) -> String {
        match self {
            FeatureSet::Baseline => "baseline".into(),
            FeatureSet::WithFactor(f) => format!("with_{f}"),
        }
    }
}

/// Outcome of one (member, run, feature set) training job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model_name: String,
    pub run_index: usize,
    pub feature_set: FeatureSet,
    pub graph_kind: GraphKind,
    pub seed: u64,
    /// Test RMSE per county in target units, in county order. Empty when the
    /// run failed.
    pub rmse: Vec<f64>,
    /// Test RMSE per horizon step, pooled over counties.
    pub horizon_rmse: Vec<f64>,
    pub loss_curve: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed: Option<String>,
}

impl RunRecord {
    pub fn key(&self) -> JobKey {
        JobKey {
            member: self.model_name.clone(),
            run: self.run_index,
            feature_set: self.feature_set.clone(),
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JobKey {
    pub member: String,
    pub run: usize,
    pub feature_set: FeatureSet,
    pub seed: u64,
}

/// Train and test windows for one feature set.
#[derive(Debug, Clone)]
pub struct FeatureWindows {
    pub feature_set: FeatureSet,
    /// Panel channels fed to the model; the target comes first.
    pub channels: Vec<String>,
    pub train: WindowSet,
    pub test: WindowSet,
}

/// Everything the sweep needs, computed once.
#[derive(Debug, Clone)]
pub struct PreparedExperiment {
    pub config: ExperimentConfig,
    pub county_order: Vec<Fips>,
    pub graph_kind: GraphKind,
    pub neighborhood: Arc<Neighborhood>,
    pub members: Vec<MemberSpec>,
    pub target_scale: ChannelScale,
    pub train_days: usize,
    pub test_days: usize,
    pub sets: Vec<FeatureWindows>,
}

impl PreparedExperiment {
    pub fn feature_sets(&self) -> impl Iterator<Item = &FeatureSet> {
        self.sets.iter().map(|s| &s.feature_set)
    }

    fn windows(&self, fs: &FeatureSet) -> &FeatureWindows {
        self.sets.iter().find(|s| &s.feature_set == fs).expect("feature set prepared")
    }

    /// Seed shared by both sides of a (member, run) pair.
    pub fn job_seed(&self, member_index: usize, run: usize) -> u64 {
        derive_seed(self.config.run_seed(run), &[member_index as u64])
    }

    /// All jobs in canonical order: member, run, feature set.
    pub fn jobs(&self) -> Vec<(usize, JobKey)> {
        let mut out = Vec::new();
        for (m, member) in self.members.iter().enumerate() {
            for run in 0..self.config.runs {
                for fs in self.feature_sets() {
                    out.push((
                        m,
                        JobKey {
                            member: member.name.clone(),
                            run,
                            feature_set: fs.clone(),
                            seed: self.job_seed(m, run),
                        },
                    ));
                }
            }
        }
        out
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            epochs: self.config.epochs,
            optimizer: self.config.optimizer,
            ..TrainOptions::default()
        }
    }
}

/// Standardizes `panel` on the first 80% of days and cuts windows for the
/// baseline and every factor.
///
/// `panel` must hold the target channel and each factor; every other channel
/// in `static_channels` joins the baseline inputs. Test windows start `lags`
/// days before the split so the first forecast begins on the first test day.
pub fn prepare_experiment(
    config: &ExperimentConfig,
    panel: &FeaturePanel,
    static_channels: &[String],
    graph: &CountyGraph,
) -> Result<PreparedExperiment> {
    config.validate("(experiment)")?;
    if graph.nodes() != panel.county_order.as_slice() {
        return Err(Error::invalid("graph nodes and panel counties differ in content or order"));
    }
    let (train_range, test_range) = split_80_20(panel.days())?;
    let (scaled, scales) = zscore(panel, train_range.clone())?;

    let target = config.target_channel();
    let find = |name: &str| {
        scaled
            .variable_index(name)
            .ok_or_else(|| Error::invalid(format!("panel has no channel {name:?}")))
    };
    let target_idx = find(&target)?;
    let mut base_idx = vec![target_idx];
    for name in static_channels {
        base_idx.push(find(name)?);
    }
    let mut plan = vec![(FeatureSet::Baseline, base_idx.clone())];
    for factor in &config.factors {
        let mut idx = base_idx.clone();
        idx.push(find(factor)?);
        plan.push((FeatureSet::WithFactor(factor.clone()), idx));
    }

    let test_start = train_range.end.saturating_sub(config.lags);
    let mut sets = Vec::with_capacity(plan.len());
    for (fs, idx) in plan {
        let sub = scaled.select_features(&idx)?;
        let train = WindowSet::new(&sub, config.lags, config.horizon, train_range.clone(), 0)?;
        let test = WindowSet::new(&sub, config.lags, config.horizon, test_start..test_range.end, 0)?;
        if train.is_empty() || test.is_empty() {
            return Err(Error::invalid(format!(
                "{} days leave {} train and {} test windows for lags {} and horizon {}",
                panel.days(),
                train.len(),
                test.len(),
                config.lags,
                config.horizon
            )));
        }
        sets.push(FeatureWindows {
            feature_set: fs,
            channels: sub.variable_order.clone(),
            train,
            test,
        });
    }

    let members = make_ensemble(&config.ensemble_config(panel.nodes()))?;
    Ok(PreparedExperiment {
        config: config.clone(),
        county_order: panel.county_order.clone(),
        graph_kind: graph.kind(),
        neighborhood: graph.neighborhood(),
        members,
        target_scale: scales[target_idx],
        train_days: train_range.len(),
        test_days: test_range.len(),
        sets,
    })
}

/// Test RMSE in target units: per county pooled over windows and horizons,
/// and per horizon pooled over windows and counties.
pub fn evaluate(
    params: &ModelParams<f64>,
    spec: &ModelSpec,
    windows: &WindowSet,
    graph: &Arc<Neighborhood>,
    target_scale: &ChannelScale,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (batch, targets) = windows.to_batch::<f64>()?;
    let pred = params.predict(spec, &batch, Some(graph))?;
    let (n, w) = (windows.nodes, windows.horizon);
    let unit = if target_scale.degenerate { 1.0 } else { target_scale.std };
    let mut county = vec![0.0; n];
    let mut horizon = vec![0.0; w];
    for (row, (p, t)) in pred.data().chunks(w).zip(targets.data().chunks(w)).enumerate() {
        for k in 0..w {
            let e = (p[k] - t[k]) * unit;
            county[row % n] += e * e;
            horizon[k] += e * e;
        }
    }
    let s = windows.len() as f64;
    let county = county.into_iter().map(|v| (v / (s * w as f64)).sqrt()).collect();
    let horizon = horizon.into_iter().map(|v| (v / (s * n as f64)).sqrt()).collect();
    Ok((county, horizon))
}

fn run_job(prep: &PreparedExperiment, member: &MemberSpec, key: &JobKey) -> Result<RunRecord> {
    let fw = prep.windows(&key.feature_set);
    let graph = Some(&prep.neighborhood);
    let outcome = train_model::<f64>(&member.spec, &fw.train, graph, &prep.train_options(), key.seed)?;
    let mut record = RunRecord {
        model_name: key.member.clone(),
        run_index: key.run,
        feature_set: key.feature_set.clone(),
        graph_kind: prep.graph_kind,
        seed: key.seed,
        rmse: Vec::new(),
        horizon_rmse: Vec::new(),
        loss_curve: outcome.loss_curve,
        failed: None,
    };
    if let TrainStatus::Diverged { epoch, reason } = outcome.status {
        record.failed = Some(format!("diverged at epoch {epoch}: {reason}"));
        return Ok(record);
    }
    match evaluate(&outcome.params, &member.spec, &fw.test, &prep.neighborhood, &prep.target_scale) {
        Ok((county, horizon)) if county.iter().all(|v| v.is_finite()) => {
            record.rmse = county;
            record.horizon_rmse = horizon;
        }
        Ok(_) => record.failed = Some("non-finite test error".into()),
        Err(e @ (Error::NonFinite { .. } | Error::NonFiniteStep { .. })) => record.failed = Some(e.to_string()),
        Err(e) => return Err(e),
    }
    Ok(record)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; 0 lets rayon decide.
    pub jobs: usize,
    /// Records are appended here as jobs finish, and jobs already present are
    /// skipped. The file is rewritten in canonical order at the end.
    pub records_path: Option<PathBuf>,
}

/// Runs every job not already recorded and returns all records in canonical
/// order. Failed runs are kept as records with `failed` set.
pub fn run_experiment(prep: &PreparedExperiment, options: &RunOptions) -> Result<Vec<RunRecord>> {
    let jobs = prep.jobs();
    let wanted: BTreeSet<JobKey> = jobs.iter().map(|(_, k)| k.clone()).collect();

    let mut done = Vec::new();
    if let Some(path) = &options.records_path {
        if path.exists() {
            done = read_records(path)?;
            done.retain(|r| wanted.contains(&r.key()));
            // Drop a dangling partial line before appending.
            write_records(path, &done)?;
        }
    }
    let have: BTreeSet<JobKey> = done.iter().map(RunRecord::key).collect();
    let pending: Vec<&(usize, JobKey)> = jobs.iter().filter(|(_, k)| !have.contains(k)).collect();
    if !have.is_empty() {
        log::info!("resuming: {} of {} jobs already recorded", have.len(), jobs.len());
    }

    let sink = match &options.records_path {
        Some(path) => Some(Mutex::new(OpenOptions::new().create(true).append(true).open(path)?)),
        None => None,
    };
    let total = jobs.len();
    let work = |(m, key): &&(usize, JobKey)| -> Result<RunRecord> {
        let record = run_job(prep, &prep.members[*m], key)?;
        match &record.failed {
            Some(why) => log::warn!("{} run {} {}: {why}", key.member, key.run, key.feature_set.label()),
            None => log::info!(
                "{} run {} {} done ({total} jobs)",
                key.member,
                key.run,
                key.feature_set.label()
            ),
        }
        if let Some(sink) = &sink {
            let mut line = serde_json::to_string(&record)?;
            line.push('\n');
            let mut file = sink.lock().expect("records sink poisoned");
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        Ok(record)
    };
    let fresh: Vec<RunRecord> = if options.jobs == 1 {
        pending.iter().map(work).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
        pool.install(|| pending.par_iter().map(work).collect::<Result<_>>())?
    };
    drop(sink);

    done.extend(fresh);
    let order: Vec<JobKey> = jobs.into_iter().map(|(_, k)| k).collect();
    done.sort_by_key(|r| order.iter().position(|k| *k == r.key()));
    let failed = done.iter().filter(|r| r.failed.is_some()).count();
    if failed > 0 {
        log::warn!("{failed} of {} runs failed", done.len());
    }
    if let Some(path) = &options.records_path {
        write_records(path, &done)?;
    }
    Ok(done)
}

/// One JSON record per line, replacing `path` atomically.
pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    let tmp = path.with_extension("jsonl.tmp");
    {
        let mut file = File::create(&tmp)?;
        for r in records {
            serde_json::to_writer(&mut file, r)?;
            file.write_all(b"\n")?;
        }
        file.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads records, ignoring a truncated final line left by an interrupted
/// write. A malformed line elsewhere is an error.
pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let lines: Vec<String> = BufReader::new(File::open(path)?).lines().collect::<std::io::Result<_>>()?;
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(e) if i + 1 == lines.len() => log::warn!("ignoring truncated last record in {}: {e}", path.display()),
            Err(e) => return Err(Error::Parse { line: i + 1, message: e.to_string() }),
        }
    }
    Ok(out)
}
