//! Planted-signal synthetic states.
//!
//! Counties sit on a grid with rook adjacency. Each county's hospitalization
//! rate per 100k follows a graph-diffused AR(1) process around its own level:
//!
//! ```text
//! y[v,t] = a * y[v,t-1] + c * mean_{u ~ v} y[u,t-1] + beta * 1[v in S] * z[v,t-lag] + sigma * e[v,t]
//! rate   = mu[v] + y[v,t]
//! ```
//!
//! where `e` is iid standard normal and `z` is a unit-variance AR(1) series per
//! county with coefficient `factor_ar`. The factor is published as
//! `aod = 0.2 + 0.05 z`, so only counties in `S` gain anything from seeing it.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::SocioIndex;
use crate::ingest::{Fips, DATE_FORMAT};
use crate::rng::SeedStreams;
use crate::train::{ExperimentConfig, InputPaths, RosterConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub state: String,
    pub counties: usize,
    /// Size of the signal set `S`.
    pub signal: usize,
    pub beta: f64,
    pub days: usize,
    pub seed: u64,
    /// Delay between a factor value and its effect.
    pub lag: usize,
    pub ar: f64,
    /// Persistence of the factor series.
    pub factor_ar: f64,
    pub coupling: f64,
    pub noise: f64,
    pub start: NaiveDate,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            state: "99".into(),
            counties: 20,
            signal: 5,
            beta: 0.8,
            days: 250,
            seed: 7,
            lag: 5,
            ar: 0.7,
            factor_ar: 0.9,
            coupling: 0.1,
            noise: 0.3,
            start: NaiveDate::from_ymd_opt(2020, 2, 1).expect("valid date"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthCounty {
    pub fips: Fips,
    pub name: String,
    pub population: u64,
    pub signal: bool,
}

/// A generated state, ready to be written as input files.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthState {
    pub config: SynthConfig,
    pub counties: Vec<SynthCounty>,
    /// Grid neighbors by county index, each pair listed once with `a < b`.
    pub edges: Vec<(usize, usize)>,
    /// `[day][county]` hospitalization counts.
    pub hospitalizations: Vec<Vec<f64>>,
    /// `[day][county]` factor values.
    pub aod: Vec<Vec<f64>>,
    /// Nine indices per county, in canonical order.
    pub socio: Vec<[f64; 9]>,
}

/// Ground truth written next to the generated inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub config: SynthConfig,
    pub signal_set: Vec<Fips>,
}

pub fn generate(config: &SynthConfig) -> Result<SynthState> {
    if config.state.len() != 2 || !config.state.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::invalid(format!("state prefix {:?} must be 2 digits", config.state)));
    }
    if config.counties == 0 || config.counties > 499 {
        return Err(Error::invalid("county count must be in 1..=499"));
    }
    if config.signal > config.counties {
        return Err(Error::invalid("signal set larger than the state"));
    }
    if !(0.0..1.0).contains(&config.factor_ar.abs()) {
        return Err(Error::invalid("factor_ar must lie in (-1, 1)"));
    }
    if config.days <= config.lag {
        return Err(Error::invalid("days must exceed the factor lag"));
    }
    let n = config.counties;
    let streams = SeedStreams::new(config.seed);

    let cols = (n as f64).sqrt().ceil() as usize;
    let mut edges = Vec::new();
    for i in 0..n {
        if (i + 1) % cols != 0 && i + 1 < n {
            edges.push((i, i + 1));
        }
        if i + cols < n {
            edges.push((i, i + cols));
        }
    }
    let mut neighbors = vec![Vec::new(); n];
    for &(a, b) in &edges {
        neighbors[a].push(b);
        neighbors[b].push(a);
    }

    let mut pick = streams.stream("signal");
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut pick);
    let signal: BTreeSet<usize> = order[..config.signal].iter().copied().collect();

    let mut meta = streams.stream("counties");
    let mut counties = Vec::with_capacity(n);
    let mut level = Vec::with_capacity(n);
    for i in 0..n {
        let code = 2 * i + 1;
        counties.push(SynthCounty {
            fips: Fips::parse(&format!("{}{code:03}", config.state))?,
            name: format!("County {code:03}"),
            population: meta.random_range(20_000..=500_000),
            signal: signal.contains(&i),
        });
        level.push(meta.random_range(18.0..22.0));
    }
    let socio = (0..n)
        .map(|_| std::array::from_fn(|_| meta.random_range(0.0..1.0)))
        .collect();

    let mut noise = streams.stream("dynamics");
    let phi = config.factor_ar;
    let innovation = (1.0 - phi * phi).sqrt();
    let mut z = vec![vec![0.0; n]; config.days];
    for t in 0..config.days {
        for v in 0..n {
            let e: f64 = noise.sample(StandardNormal);
            z[t][v] = if t == 0 { e } else { phi * z[t - 1][v] + innovation * e };
        }
    }
    let mut y = vec![0.0; n];
    let mut hospitalizations = Vec::with_capacity(config.days);
    for t in 0..config.days {
        let mut next = vec![0.0; n];
        for v in 0..n {
            let nbr = if neighbors[v].is_empty() {
                0.0
            } else {
                neighbors[v].iter().map(|&u| y[u]).sum::<f64>() / neighbors[v].len() as f64
            };
            let drive = if signal.contains(&v) && t >= config.lag {
                config.beta * z[t - config.lag][v]
            } else {
                0.0
            };
            let e: f64 = noise.sample(StandardNormal);
            next[v] = config.ar * y[v] + config.coupling * nbr + drive + config.noise * e;
        }
        y = next;
        hospitalizations.push(
            (0..n)
                .map(|v| (level[v] + y[v]).max(0.0) * counties[v].population as f64 / 100_000.0)
                .collect(),
        );
    }
    let aod = z.iter().map(|row| row.iter().map(|v| 0.2 + 0.05 * v).collect()).collect();

    Ok(SynthState {
        config: config.clone(),
        counties,
        edges,
        hospitalizations,
        aod,
        socio,
    })
}

impl SynthState {
    pub fn truth(&self) -> SynthTruth {
        SynthTruth {
            config: self.config.clone(),
            signal_set: self.counties.iter().filter(|c| c.signal).map(|c| c.fips.clone()).collect(),
        }
    }

    pub fn end_date(&self) -> NaiveDate {
        self.config.start + chrono::Days::new(self.config.days as u64 - 1)
    }

    /// `fips,date,variable,value,population` rows for both variables.
    pub fn series_csv(&self) -> String {
        let mut out = String::from("fips,date,variable,value,population\n");
        for (i, c) in self.counties.iter().enumerate() {
            for (var, data) in [("aod", &self.aod), ("hospitalizations", &self.hospitalizations)] {
                for (t, row) in data.iter().enumerate() {
                    let date = self.config.start + chrono::Days::new(t as u64);
                    let pop = if var == "hospitalizations" { c.population.to_string() } else { String::new() };
                    let _ = writeln!(out, "{},{},{var},{},{pop}", c.fips, date.format(DATE_FORMAT), row[i]);
                }
            }
        }
        out
    }

    pub fn socio_csv(&self) -> String {
        let mut out = String::from("fips,index_name,value\n");
        for (c, values) in self.counties.iter().zip(&self.socio) {
            for (idx, v) in SocioIndex::ALL.iter().zip(values) {
                let _ = writeln!(out, "{},{},{v}", c.fips, idx.name());
            }
        }
        out
    }

    /// Pipe-separated adjacency in the census layout, including self rows.
    pub fn adjacency_txt(&self) -> String {
        let n = self.counties.len();
        let mut neighbors = vec![vec![]; n];
        for &(a, b) in &self.edges {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        let mut out = String::new();
        for (i, c) in self.counties.iter().enumerate() {
            let mut list = neighbors[i].clone();
            list.push(i);
            list.sort_unstable();
            for (k, &j) in list.iter().enumerate() {
                let d = &self.counties[j];
                if k == 0 {
                    let _ = writeln!(out, "\"{}\"|{}|\"{}\"|{}", c.name, c.fips, d.name, d.fips);
                } else {
                    let _ = writeln!(out, "||\"{}\"|{}", d.name, d.fips);
                }
            }
        }
        out
    }

    /// Experiment config pointing at the files [`SynthState::write`] emits.
    /// Model sizes are scaled down so the full 8-member, 10-run sweep fits in
    /// a few minutes on one core; the planted signal is still recovered.
    pub fn experiment_config(&self) -> ExperimentConfig {
        let defaults = ExperimentConfig::default();
        ExperimentConfig {
            state: self.config.state.clone(),
            seed: self.config.seed,
            factors: vec!["aod".into()],
            epochs: 60,
            roster: RosterConfig { hidden_dim: 8, dropout: 0.3, ..defaults.roster.clone() },
            inputs: Some(InputPaths {
                series: "series.csv".into(),
                socio: Some("socio.csv".into()),
                adjacency: Some("adjacency.txt".into()),
                start: self.config.start.format(DATE_FORMAT).to_string(),
                end: self.end_date().format(DATE_FORMAT).to_string(),
                impute: Default::default(),
            }),
            ..defaults
        }
    }

    /// Writes `series.csv`, `socio.csv`, `adjacency.txt`, `truth.json` and a
    /// `config.toml` using `experiment` (or the defaults) with its inputs
    /// pointed at these files.
    pub fn write(&self, dir: &Path, experiment: Option<&ExperimentConfig>) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("series.csv"), self.series_csv())?;
        std::fs::write(dir.join("socio.csv"), self.socio_csv())?;
        std::fs::write(dir.join("adjacency.txt"), self.adjacency_txt())?;
        std::fs::write(dir.join("truth.json"), serde_json::to_string_pretty(&self.truth())? + "\n")?;
        let mut cfg = experiment.cloned().unwrap_or_else(|| self.experiment_config());
        cfg.inputs = self.experiment_config().inputs;
        cfg.state = self.config.state.clone();
        std::fs::write(dir.join("config.toml"), cfg.to_toml_string())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{build_border_graph, load_socio, read_adjacency};
    use crate::ingest::load_series;

    fn small() -> SynthConfig {
        SynthConfig { counties: 6, signal: 2, days: 30, ..SynthConfig::default() }
    }

    #[test]
    fn deterministic_and_parseable() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.truth().signal_set.len(), 2);

        let report = load_series(a.series_csv().as_bytes()).unwrap();
        assert!(report.rejected.is_empty());
        assert_eq!(report.series.len(), 12);
        assert_eq!(load_socio(a.socio_csv().as_bytes()).unwrap().len(), 6);

        let recs = read_adjacency(a.adjacency_txt().as_bytes()).unwrap();
        let order: Vec<Fips> = a.counties.iter().map(|c| c.fips.clone()).collect();
        let g = build_border_graph(&recs, "99", &order).unwrap();
        // Two rows of three: 4 horizontal and 3 vertical pairs.
        assert_eq!(g.graph.edges().len(), a.edges.len());
        assert_eq!(a.edges.len(), 7);
    }

    #[test]
    fn zero_beta_ignores_the_factor() {
        let cfg = SynthConfig { beta: 0.0, ..small() };
        let a = generate(&cfg).unwrap();
        let b = generate(&SynthConfig { signal: 0, ..cfg }).unwrap();
        assert_eq!(a.hospitalizations, b.hospitalizations);
    }
}
