//! Pipeline stages over an output directory.
//!
//! Every stage reads the artifacts of the previous one from
//! `<out>/<state>/` and fails with [`Error::MissingArtifact`] when they are
//! absent:
//!
//! ```text
//! ingest  -> panel.json, counties.json, socio.json
//! graph   -> graph_border.json, graph_socio.json, socio_distance.json, centrality_<kind>.json
//! train   -> records_<kind>.jsonl
//! vote    -> votes/<factor>_<kind>_<alpha>.json
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::consensus::{tally_votes, VoteTable};
use crate::error::{Error, Result};
use crate::graphs::{
    build_border_graph, build_socio_graph, degree_centrality, load_socio, read_adjacency, socio_distance_matrix,
    CountyGraph, DistanceMatrix, GraphKind, SocioIndex, SocioVector,
};
use crate::ingest::{align_panel, load_series, normalize_clinical, DateRange, FeaturePanel, Fips, DATE_FORMAT};
use crate::synth::{generate, SynthConfig};
use crate::train::{prepare_experiment, run_experiment, ExperimentConfig, RunOptions, RunRecord};

/// Experiment config plus where its inputs and outputs live.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub experiment: ExperimentConfig,
    /// Relative input paths are resolved against this directory.
    pub base_dir: PathBuf,
    pub out: PathBuf,
}

impl PipelineConfig {
    pub fn load(config_path: &Path, out: &Path) -> Result<Self> {
        let experiment = ExperimentConfig::load(config_path)?;
        let base_dir = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { experiment, base_dir, out: out.to_path_buf() })
    }

    pub fn state_dir(&self) -> PathBuf {
        self.out.join(&self.experiment.state)
    }

    fn input(&self, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn records_path(&self, kind: GraphKind) -> PathBuf {
        self.state_dir().join(format!("records_{kind}.jsonl"))
    }

    pub fn votes_path(&self, factor: &str, kind: GraphKind, alpha: f64) -> PathBuf {
        self.state_dir().join("votes").join(votes_file_name(factor, kind, alpha))
    }
}

pub fn votes_file_name(factor: &str, kind: GraphKind, alpha: f64) -> String {
    format!("{factor}_{kind}_{alpha}.json")
}

/// County metadata for the exploration views.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountyInfo {
    pub fips: Fips,
    pub name: String,
    pub population: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocioRow {
    pub fips: Fips,
    /// Keyed by index name.
    pub values: BTreeMap<String, f64>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Reads a JSON artifact, naming it when absent.
pub fn read_artifact<T: DeserializeOwned>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.display().to_string()));
    }
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

fn parse_date(s: &str, field: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, DATE_FORMAT).map_err(|e| Error::Config {
        path: "(config)".into(),
        field: field.into(),
        message: format!("{s:?}: {e}"),
    })
}

fn inputs(cfg: &PipelineConfig) -> Result<&crate::train::InputPaths> {
    cfg.experiment.inputs.as_ref().ok_or_else(|| Error::Config {
        path: "(config)".into(),
        field: "inputs".into(),
        message: "no input files configured".into(),
    })
}

#[derive(Debug, Clone)]
pub struct IngestSummary {
    pub panel_shape: (usize, usize, usize),
    pub rejected_rows: usize,
}

/// Loads, normalizes and aligns the configured state's series.
pub fn ingest(cfg: &PipelineConfig) -> Result<IngestSummary> {
    let inp = inputs(cfg)?;
    let state = &cfg.experiment.state;
    let report = load_series(File::open(cfg.input(&inp.series))?)?;
    let mut series: Vec<_> = report.series.into_iter().filter(|s| s.fips.state() == state).collect();
    if series.is_empty() {
        return Err(Error::invalid(format!("no series for state {state}")));
    }
    let populations: BTreeMap<Fips, Option<u64>> = series.iter().fold(BTreeMap::new(), |mut m, s| {
        let e = m.entry(s.fips.clone()).or_insert(None);
        *e = e.or(s.population);
        m
    });
    if cfg.experiment.per_100k {
        series = normalize_clinical(&series)?;
    }
    let range = DateRange::new(parse_date(&inp.start, "inputs.start")?, parse_date(&inp.end, "inputs.end")?)?;
    let panel = align_panel(&series, range, inp.impute)?;

    let mut names: BTreeMap<String, String> = BTreeMap::new();
    if let Some(adj) = &inp.adjacency {
        for r in read_adjacency(File::open(cfg.input(adj))?)? {
            names.entry(r.fips.clone()).or_insert(r.county_name);
        }
    }
    let counties: Vec<CountyInfo> = panel
        .county_order
        .iter()
        .map(|f| CountyInfo {
            fips: f.clone(),
            name: names.get(f.as_str()).cloned().unwrap_or_else(|| f.to_string()),
            population: populations.get(f).copied().flatten(),
        })
        .collect();

    let dir = cfg.state_dir();
    if let Some(socio) = &inp.socio {
        let vectors = load_socio(File::open(cfg.input(socio))?)?;
        let by_fips: BTreeMap<&Fips, &SocioVector> = vectors.iter().map(|v| (&v.fips, v)).collect();
        let mut rows = Vec::with_capacity(panel.nodes());
        for f in &panel.county_order {
            let v = by_fips.get(f).ok_or_else(|| Error::MissingSocioIndex {
                fips: f.to_string(),
                index: "(all)".into(),
            })?;
            let values = v.values()?;
            rows.push(SocioRow {
                fips: f.clone(),
                values: SocioIndex::ALL.iter().map(|i| i.name().to_string()).zip(values).collect(),
            });
        }
        write_json(&dir.join("socio.json"), &rows)?;
    }
    write_json(&dir.join("panel.json"), &panel)?;
    write_json(&dir.join("counties.json"), &counties)?;
    log::info!("ingested {state}: panel {:?}", panel.shape());
    Ok(IngestSummary { panel_shape: panel.shape(), rejected_rows: report.rejected.len() })
}

fn socio_vectors(rows: &[SocioRow]) -> Result<Vec<SocioVector>> {
    rows.iter()
        .map(|r| {
            let indices = r
                .values
                .iter()
                .map(|(k, v)| Ok((k.parse::<SocioIndex>()?, *v)))
                .collect::<Result<_>>()?;
            Ok(SocioVector { fips: r.fips.clone(), indices })
        })
        .collect()
}

pub fn load_panel(cfg: &PipelineConfig) -> Result<FeaturePanel> {
    read_artifact(&cfg.state_dir().join("panel.json"))
}

pub fn load_graph(cfg: &PipelineConfig, kind: GraphKind) -> Result<CountyGraph> {
    read_artifact(&cfg.state_dir().join(format!("graph_{kind}.json")))
}

/// Builds whichever graphs the inputs allow; returns the kinds written.
pub fn graph(cfg: &PipelineConfig) -> Result<Vec<GraphKind>> {
    let panel = load_panel(cfg)?;
    let inp = inputs(cfg)?;
    let dir = cfg.state_dir();
    let mut built = Vec::new();
    if let Some(adj) = &inp.adjacency {
        let records = read_adjacency(File::open(cfg.input(adj))?)?;
        let b = build_border_graph(&records, &cfg.experiment.state, &panel.county_order)?;
        write_json(&dir.join("graph_border.json"), &b.graph)?;
        write_json(&dir.join("centrality_border.json"), &degree_centrality(&b.graph)?)?;
        built.push(GraphKind::Border);
    }
    let socio_path = dir.join("socio.json");
    if socio_path.exists() {
        let rows: Vec<SocioRow> = read_artifact(&socio_path)?;
        let matrix = socio_distance_matrix(&socio_vectors(&rows)?, cfg.experiment.socio_scaling)?;
        let g = build_socio_graph(&matrix, cfg.experiment.socio_rule)?;
        write_json(&dir.join("socio_distance.json"), &matrix)?;
        write_json(&dir.join("graph_socio.json"), &g)?;
        write_json(&dir.join("centrality_socio.json"), &degree_centrality(&g)?)?;
        built.push(GraphKind::Socio);
    }
    if built.is_empty() {
        return Err(Error::invalid("neither an adjacency file nor socioeconomic indices are configured"));
    }
    Ok(built)
}

pub fn load_distance(cfg: &PipelineConfig) -> Result<DistanceMatrix> {
    read_artifact(&cfg.state_dir().join("socio_distance.json"))
}

/// Runs (or resumes) the sweep on the configured graph kind.
pub fn train(cfg: &PipelineConfig, jobs: usize) -> Result<Vec<RunRecord>> {
    let kind = cfg.experiment.graph_kind;
    let mut panel = load_panel(cfg)?;
    let graph = load_graph(cfg, kind)?;
    let mut statics = Vec::new();
    if cfg.experiment.include_socio {
        let rows: Vec<SocioRow> = read_artifact(&cfg.state_dir().join("socio.json"))?;
        statics = SocioIndex::ALL.iter().map(|i| i.name().to_string()).collect::<Vec<_>>();
        let values: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| statics.iter().map(|k| r.values.get(k).copied().unwrap_or(0.0)).collect())
            .collect();
        panel = panel.with_static_channels(&statics, &values)?;
    }
    let prep = prepare_experiment(&cfg.experiment, &panel, &statics, &graph)?;
    let options = RunOptions { jobs, records_path: Some(cfg.records_path(kind)) };
    std::fs::create_dir_all(cfg.state_dir())?;
    run_experiment(&prep, &options)
}

/// Tallies one vote table per configured factor from the recorded runs.
pub fn vote(cfg: &PipelineConfig) -> Result<Vec<VoteTable>> {
    let kind = cfg.experiment.graph_kind;
    let path = cfg.records_path(kind);
    if !path.exists() {
        return Err(Error::MissingArtifact(format!("{} (run `train` first)", path.display())));
    }
    let records = crate::train::read_records(&path)?;
    let panel = load_panel(cfg)?;
    let mut tables = Vec::new();
    for factor in &cfg.experiment.factors {
        let table = tally_votes(
            &records,
            &panel.county_order,
            &cfg.experiment.state,
            factor,
            kind,
            cfg.experiment.alpha,
        )?;
        write_json(&cfg.votes_path(factor, kind, cfg.experiment.alpha), &table)?;
        tables.push(table);
    }
    Ok(tables)
}

/// A small synthetic state taken through every stage on both graph kinds.
pub fn demo(out: &Path, seed: u64, jobs: usize) -> Result<PipelineConfig> {
    let synth = SynthConfig { counties: 12, signal: 3, days: 120, seed, ..SynthConfig::default() };
    let state = generate(&synth)?;
    let inputs_dir = out.join("inputs");
    let mut exp = state.experiment_config();
    exp.epochs = 30;
    exp.runs = 4;
    exp.roster.size = 4;
    exp.roster.hidden_dim = 6;
    exp.horizon = 7;
    exp.socio_rule = crate::graphs::SocioRule::TopK { k: 3 };
    state.write(&inputs_dir, Some(&exp))?;

    let mut cfg = PipelineConfig::load(&inputs_dir.join("config.toml"), out)?;
    ingest(&cfg)?;
    graph(&cfg)?;
    for kind in [GraphKind::Border, GraphKind::Socio] {
        cfg.experiment.graph_kind = kind;
        train(&cfg, jobs)?;
        vote(&cfg)?;
    }
    cfg.experiment.graph_kind = GraphKind::Border;
    Ok(cfg)
}
