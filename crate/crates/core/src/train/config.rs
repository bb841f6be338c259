use std::path::Path;

use serde::{Deserialize, Serialize};

use super::optim::AmsGrad;
use crate::error::{Error, Result};
use crate::graphs::{GraphKind, SocioRule, SocioScaling};
use crate::ingest::ImputePolicy;
use crate::models::{default_roster, Activation, EnsembleConfig, MemberSpec, ModelKind, ModelSpec};
use crate::ndiff::Aggregator;

/// Input files, relative to the config file's directory unless absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputPaths {
    pub series: String,
    pub socio: Option<String>,
    pub adjacency: Option<String>,
    /// Inclusive study window, `YYYY-MM-DD`.
    pub start: String,
    pub end: String,
    #[serde(default)]
    pub impute: ImputePolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberOverride {
    pub name: String,
    pub kind: ModelKind,
    #[serde(default = "default_aggregator")]
    pub aggregator: Aggregator,
    #[serde(default = "one")]
    pub nlayers: usize,
    #[serde(default = "default_gate")]
    pub gate_activation: Activation,
}

fn default_aggregator() -> Aggregator {
    Aggregator::Mean
}

fn one() -> usize {
    1
}

fn default_gate() -> Activation {
    Activation::Sigmoid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RosterConfig {
    pub size: usize,
    pub hidden_dim: usize,
    pub dropout: f64,
    pub conv_activation: Activation,
    pub standard_gru: bool,
    pub members: Option<Vec<MemberOverride>>,
}

impl Default for RosterConfig {
    fn default() -> Self {
        Self {
            size: 8,
            hidden_dim: 128,
            dropout: 0.5,
            conv_activation: Activation::Relu,
            standard_gru: false,
            members: None,
        }
    }
}

/// Experiment description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Two-digit state FIPS prefix.
    pub state: String,
    pub graph_kind: GraphKind,
    pub socio_rule: SocioRule,
    pub socio_scaling: SocioScaling,
    pub lags: usize,
    pub horizon: usize,
    pub epochs: usize,
    pub runs: usize,
    pub seed: u64,
    /// Explicit per-run seeds; derived from `seed` when empty.
    pub seeds: Vec<u64>,
    pub alpha: f64,
    pub target: String,
    pub factors: Vec<String>,
    /// Rescale clinical counts per 100k residents before modeling.
    pub per_100k: bool,
    /// Feed the nine socioeconomic indices as static node features.
    pub include_socio: bool,
    pub optimizer: AmsGrad,
    pub roster: RosterConfig,
    pub inputs: Option<InputPaths>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            state: "48".into(),
            graph_kind: GraphKind::Border,
            socio_rule: SocioRule::default(),
            socio_scaling: SocioScaling::default(),
            lags: 5,
            horizon: 15,
            epochs: 150,
            runs: 10,
            seed: 0,
            seeds: Vec::new(),
            alpha: 0.1,
            target: "hospitalizations".into(),
            factors: vec!["aod".into()],
            per_100k: true,
            include_socio: true,
            optimizer: AmsGrad::default(),
            roster: RosterConfig::default(),
            inputs: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config {
            path: origin.to_string(),
            field: "(parse)".into(),
            message: e.message().to_string() + &e.span().map(|s| format!(" at bytes {s:?}")).unwrap_or_default(),
        })?;
        cfg.validate(origin)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            field: "(file)".into(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn validate(&self, origin: &str) -> Result<()> {
        let bad = |field: &str, message: String| {
            Err(Error::Config { path: origin.to_string(), field: field.to_string(), message })
        };
        if self.state.len() != 2 || !self.state.bytes().all(|b| b.is_ascii_digit()) {
            return bad("state", format!("{:?} is not a 2-digit FIPS prefix", self.state));
        }
        if self.lags == 0 {
            return bad("lags", "must be >= 1".into());
        }
        if self.horizon == 0 {
            return bad("horizon", "must be >= 1".into());
        }
        if self.runs < 2 {
            return bad("runs", format!("paired testing needs >= 2 runs, got {}", self.runs));
        }
        if !self.seeds.is_empty() && self.seeds.len() != self.runs {
            return bad("seeds", format!("{} seeds for {} runs", self.seeds.len(), self.runs));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha", format!("{} outside (0, 1)", self.alpha));
        }
        if self.factors.is_empty() {
            return bad("factors", "name at least one factor".into());
        }
        if self.factors.iter().any(|f| f == &self.target) {
            return bad("factors", "the target cannot be a factor".into());
        }
        if !(self.optimizer.lr > 0.0) {
            return bad("optimizer.lr", "must be > 0".into());
        }
        if self.roster.hidden_dim == 0 {
            return bad("roster.hidden_dim", "must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.roster.dropout) {
            return bad("roster.dropout", format!("{} outside [0, 1)", self.roster.dropout));
        }
        let available = self.roster.members.as_ref().map_or(8, Vec::len);
        if self.roster.size == 0 || self.roster.size > available {
            return bad("roster.size", format!("must be in 1..={available}"));
        }
        if let SocioRule::TopK { k: 0 } = self.socio_rule {
            return bad("socio_rule.k", "must be >= 1".into());
        }
        Ok(())
    }

    /// Name of the modeled target channel in the panel.
    pub fn target_channel(&self) -> String {
        let clinical = matches!(self.target.as_str(), "hospitalizations" | "deaths");
        if self.per_100k && clinical {
            format!("{}_per100k", self.target)
        } else {
            self.target.clone()
        }
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        match self.seeds.get(run) {
            Some(&s) => s,
            None => crate::rng::derive_seed(self.seed, &[run as u64]),
        }
    }

    pub fn base_spec(&self, nodes: usize) -> ModelSpec {
        ModelSpec {
            kind: ModelKind::Rgc,
            aggregator: Aggregator::Mean,
            nlayers: 1,
            hidden_dim: self.roster.hidden_dim,
            gate_activation: Activation::Sigmoid,
            conv_activation: self.roster.conv_activation,
            dropout: self.roster.dropout,
            lags: self.lags,
            horizon: self.horizon,
            output_nodes: nodes,
            standard_gru: self.roster.standard_gru,
        }
    }

    pub fn ensemble_config(&self, nodes: usize) -> EnsembleConfig {
        let base = self.base_spec(nodes);
        let members = self.roster.members.as_ref().map(|list| {
            list.iter()
                .map(|m| MemberSpec {
                    name: m.name.clone(),
                    spec: ModelSpec {
                        kind: m.kind,
                        aggregator: m.aggregator,
                        nlayers: m.nlayers,
                        gate_activation: m.gate_activation,
                        ..base.clone()
                    },
                })
                .collect()
        });
        EnsembleConfig {
            size: self.roster.size,
            members: members.or_else(|| Some(default_roster(&base))),
            base,
        }
    }
}
