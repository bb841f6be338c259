use std::collections::BTreeMap;
use std::path::Path;

use geocon::consensus::VoteTable;
use geocon::graphs::{Centrality, DistanceMatrix};
use geocon::ingest::Fips;
use geocon::pipeline::{read_artifact, CountyInfo, SocioRow};
use geocon::{CountyGraph, Error, FeaturePanel, GraphKind, Result};
use serde::Serialize;

/// Identifies one loaded vote table.
#[derive(Debug, Clone, PartialEq, PartialOrd, Serialize)]
pub struct VoteKey {
    pub factor: String,
    pub graph_kind: GraphKind,
    pub alpha: f64,
}

#[derive(Debug, Clone)]
pub struct StateData {
    pub panel: FeaturePanel,
    pub counties: Vec<CountyInfo>,
    pub socio: Vec<SocioRow>,
    pub graphs: BTreeMap<GraphKind, CountyGraph>,
    pub centrality: BTreeMap<GraphKind, Vec<Centrality>>,
    pub distance: Option<DistanceMatrix>,
    /// Sorted by key.
    pub votes: Vec<(VoteKey, VoteTable)>,
}

impl StateData {
    /// Per-county scalar for a named variable: the time mean of a panel
    /// variable, a socioeconomic index, or `population`.
    pub fn variable(&self, name: &str) -> Option<Vec<(Fips, f64)>> {
        if let Some(f) = self.panel.variable_index(name) {
            let days = self.panel.days() as f64;
            return Some(
                self.panel
                    .county_order
                    .iter()
                    .enumerate()
                    .map(|(n, fips)| (fips.clone(), self.panel.column(n, f).iter().sum::<f64>() / days))
                    .collect(),
            );
        }
        if name == "population" {
            let values: Vec<_> =
                self.counties.iter().filter_map(|c| c.population.map(|p| (c.fips.clone(), p as f64))).collect();
            return (!values.is_empty()).then_some(values);
        }
        let values: Vec<_> =
            self.socio.iter().filter_map(|r| r.values.get(name).map(|v| (r.fips.clone(), *v))).collect();
        (!values.is_empty()).then_some(values)
    }

    pub fn variable_names(&self) -> Vec<String> {
        let mut names = self.panel.variable_order.clone();
        if self.counties.iter().any(|c| c.population.is_some()) {
            names.push("population".into());
        }
        if let Some(row) = self.socio.first() {
            names.extend(row.values.keys().cloned());
        }
        names
    }
}

/// Everything the API serves, loaded once at startup and never mutated.
#[derive(Debug, Clone, Default)]
pub struct ResultStore {
    pub states: BTreeMap<String, StateData>,
}

fn optional<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Option<T>> {
    if path.exists() {
        read_artifact(path).map(Some)
    } else {
        Ok(None)
    }
}

impl ResultStore {
    /// Loads every `<out>/<state>/` directory that holds a `panel.json`.
    pub fn load(out: &Path) -> Result<Self> {
        let mut states = BTreeMap::new();
        if !out.exists() {
            return Err(Error::MissingArtifact(out.display().to_string()));
        }
        let mut dirs: Vec<_> = std::fs::read_dir(out)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.join("panel.json").is_file())
            .collect();
        dirs.sort();
        for dir in dirs {
            let name = dir.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
            let data = load_state(&dir)?;
            log::info!("loaded state {name}: {} counties, {} vote tables", data.panel.nodes(), data.votes.len());
            states.insert(name, data);
        }
        Ok(Self { states })
    }
}

fn load_state(dir: &Path) -> Result<StateData> {
    let panel: FeaturePanel = read_artifact(&dir.join("panel.json"))?;
    let counties: Vec<CountyInfo> = optional(&dir.join("counties.json"))?.unwrap_or_else(|| {
        panel
            .county_order
            .iter()
            .map(|f| CountyInfo { fips: f.clone(), name: f.to_string(), population: None })
            .collect()
    });
    let socio = optional(&dir.join("socio.json"))?.unwrap_or_default();
    let mut graphs = BTreeMap::new();
    let mut centrality = BTreeMap::new();
    for kind in [GraphKind::Border, GraphKind::Socio] {
        if let Some(g) = optional::<CountyGraph>(&dir.join(format!("graph_{kind}.json")))? {
            graphs.insert(kind, g);
        }
        if let Some(c) = optional(&dir.join(format!("centrality_{kind}.json")))? {
            centrality.insert(kind, c);
        }
    }
    let distance = optional(&dir.join("socio_distance.json"))?;

    let mut votes = Vec::new();
    let votes_dir = dir.join("votes");
    if votes_dir.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(&votes_dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        for path in files {
            let table: VoteTable = read_artifact(&path)?;
            if let Some(c) = table.counties.iter().find(|c| !panel.county_order.contains(&c.fips)) {
                return Err(Error::InvalidArgument(format!(
                    "{}: county {} is not in the panel",
                    path.display(),
                    c.fips
                )));
            }
            let key = VoteKey { factor: table.factor.clone(), graph_kind: table.graph_kind, alpha: table.alpha };
            votes.push((key, table));
        }
    }
    votes.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    Ok(StateData { panel, counties, socio, graphs, centrality, distance, votes })
}
