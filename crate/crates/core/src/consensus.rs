//! Paired significance tests on per-county RMSE and the resulting votes.
//!
//! A member votes for a county when adding the factor lowers that county's
//! test RMSE significantly across the member's paired runs.

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::graphs::GraphKind;
use crate::ingest::Fips;
use crate::rng::SeedStreams;
use crate::train::{FeatureSet, RunRecord};

/// Members with fewer complete pairs than this do not vote.
pub const MIN_PAIRS: usize = 4;

/// Per-county RMSE of stacked `[rows, nodes]` forecasts (row-major), pooled
/// over rows.
pub fn rmse_per_county(pred: &[f64], actual: &[f64], nodes: usize) -> Result<Vec<f64>> {
    if pred.len() != actual.len() {
        return Err(Error::shape("rmse_per_county", format!("{} vs {} values", pred.len(), actual.len())));
    }
    if nodes == 0 || pred.is_empty() || pred.len() % nodes != 0 {
        return Err(Error::invalid(format!(
            "cannot take per-county RMSE of {} values over {nodes} counties",
            pred.len()
        )));
    }
    let rows = (pred.len() / nodes) as f64;
    let mut ss = vec![0.0; nodes];
    for (i, (p, a)) in pred.iter().zip(actual).enumerate() {
        ss[i % nodes] += (p - a) * (p - a);
    }
    Ok(ss.into_iter().map(|s| (s / rows).sqrt()).collect())
}

/// Result of one paired test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub p: f64,
    pub significant: bool,
}

fn differences(baseline: &[f64], factor: &[f64]) -> Result<Vec<f64>> {
    if baseline.len() != factor.len() {
        return Err(Error::shape(
            "one_tailed_test",
            format!("{} baseline vs {} factor samples", baseline.len(), factor.len()),
        ));
    }
    if baseline.len() < 2 {
        return Err(Error::invalid("paired test needs at least 2 pairs"));
    }
    Ok(baseline.iter().zip(factor).map(|(b, f)| b - f).collect())
}

/// Paired one-sided t-test of `mean(baseline - factor) > 0`.
///
/// All-zero differences give p = 1; zero variance gives p = 0 for a positive
/// mean and p = 1 otherwise.
pub fn one_tailed_test(baseline: &[f64], factor: &[f64], alpha: f64) -> Result<TestResult> {
    let d = differences(baseline, factor)?;
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let scale = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let p = if scale == 0.0 {
        1.0
    } else if var.sqrt() <= 1e-12 * scale {
        if mean > 0.0 {
            0.0
        } else {
            1.0
        }
    } else {
        let t = mean / (var / n).sqrt();
        let dist = StudentsT::new(0.0, 1.0, n - 1.0).map_err(|e| Error::invalid(e.to_string()))?;
        dist.sf(t).clamp(0.0, 1.0)
    };
    Ok(TestResult { p, significant: p < alpha })
}

/// Sign-flip permutation p-value for the same hypothesis: the fraction of
/// resampled mean differences at least as large as the observed one, with
/// add-one smoothing.
pub fn permutation_oracle(baseline: &[f64], factor: &[f64], resamples: usize, seed: u64) -> Result<f64> {
    let d = differences(baseline, factor)?;
    let observed: f64 = d.iter().sum();
    let mut rng = SeedStreams::new(seed).stream("permutation");
    let mut hits = 0usize;
    for _ in 0..resamples {
        let s: f64 = d.iter().map(|&x| if rng.random::<bool>() { x } else { -x }).sum();
        // Sums of the same magnitudes can differ in the last bit.
        if s >= observed - 1e-12 * observed.abs().max(1e-300) {
            hits += 1;
        }
    }
    Ok((1 + hits) as f64 / (1 + resamples) as f64)
}

/// One member's test for one county.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelVote {
    pub name: String,
    pub p: f64,
    pub significant: bool,
    /// Mean baseline RMSE over the member's paired runs.
    pub rmse_base: f64,
    pub rmse_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountyVotes {
    pub fips: Fips,
    pub votes: usize,
    pub models: Vec<ModelVote>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteTable {
    pub state: String,
    pub factor: String,
    pub graph_kind: GraphKind,
    pub alpha: f64,
    /// Roster names in record order; the vote ceiling is their count.
    #[serde(default)]
    pub members: Vec<String>,
    /// Runs excluded because training or evaluation failed.
    #[serde(default)]
    pub failed_runs: usize,
    pub counties: Vec<CountyVotes>,
}

impl VoteTable {
    pub fn ceiling(&self) -> usize {
        self.members.len()
    }
}

/// Paired per-county RMSE samples of one member, ordered by run index.
struct MemberPairs {
    base: Vec<Vec<f64>>,
    with: Vec<Vec<f64>>,
}

/// Runs one test per (county, member) and counts significant members.
///
/// Pairs are matched on run index and seed. A run whose partner is missing
/// or failed is dropped with a logged reason; members left with fewer than
/// [`MIN_PAIRS`] pairs abstain everywhere.
pub fn tally_votes(
    records: &[RunRecord],
    county_order: &[Fips],
    state: &str,
    factor: &str,
    graph_kind: GraphKind,
    alpha: f64,
) -> Result<VoteTable> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha {alpha} outside (0, 1)")));
    }
    let n = county_order.len();
    let with_set = FeatureSet::WithFactor(factor.to_string());
    let mut members: Vec<String> = Vec::new();
    let mut by_member: BTreeMap<&str, BTreeMap<usize, [Option<&RunRecord>; 2]>> = BTreeMap::new();
    let mut failed_runs = 0;
    for r in records.iter().filter(|r| r.graph_kind == graph_kind) {
        let side = match &r.feature_set {
            FeatureSet::Baseline => 0,
            fs if *fs == with_set => 1,
            _ => continue,
        };
        if !members.contains(&r.model_name) {
            members.push(r.model_name.clone());
        }
        if r.failed.is_some() {
            failed_runs += 1;
            continue;
        }
        if r.rmse.len() != n {
            return Err(Error::shape(
                "tally_votes",
                format!("{} run {} has {} county RMSEs for {n} counties", r.model_name, r.run_index, r.rmse.len()),
            ));
        }
        by_member.entry(&r.model_name).or_default().entry(r.run_index).or_default()[side] = Some(r);
    }
    if members.is_empty() {
        return Err(Error::MissingArtifact(format!(
            "no {graph_kind} records for factor {factor:?}"
        )));
    }

    let mut pairs: BTreeMap<&str, MemberPairs> = BTreeMap::new();
    for name in &members {
        let mut mp = MemberPairs { base: Vec::new(), with: Vec::new() };
        for (run, sides) in by_member.get(name.as_str()).into_iter().flatten() {
            match sides {
                [Some(b), Some(w)] if b.seed == w.seed => {
                    mp.base.push(b.rmse.clone());
                    mp.with.push(w.rmse.clone());
                }
                [Some(_), Some(_)] => log::warn!("{name} run {run}: baseline and factor seeds differ; pair dropped"),
                _ => log::warn!("{name} run {run}: incomplete pair; dropped"),
            }
        }
        if mp.base.len() < MIN_PAIRS {
            log::warn!("{name}: {} complete pairs (< {MIN_PAIRS}); abstains", mp.base.len());
            continue;
        }
        pairs.insert(name.as_str(), mp);
    }

    let mut counties = Vec::with_capacity(n);
    for (c, fips) in county_order.iter().enumerate() {
        let mut models = Vec::new();
        for name in &members {
            let Some(mp) = pairs.get(name.as_str()) else { continue };
            let base: Vec<f64> = mp.base.iter().map(|v| v[c]).collect();
            let with: Vec<f64> = mp.with.iter().map(|v| v[c]).collect();
            let test = one_tailed_test(&base, &with, alpha)?;
            models.push(ModelVote {
                name: name.clone(),
                p: test.p,
                significant: test.significant,
                rmse_base: base.iter().sum::<f64>() / base.len() as f64,
                rmse_factor: with.iter().sum::<f64>() / with.len() as f64,
            });
        }
        counties.push(CountyVotes {
            fips: fips.clone(),
            votes: models.iter().filter(|m| m.significant).count(),
            models,
        });
    }
    Ok(VoteTable {
        state: state.to_string(),
        factor: factor.to_string(),
        graph_kind,
        alpha,
        members,
        failed_runs,
        counties,
    })
}

/// State-level vote summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteAggregate {
    pub total: usize,
    /// `histogram[v]` counts counties with `v` votes, for `v` in `0..=M`.
    pub histogram: Vec<usize>,
}

pub fn aggregate_votes(table: &VoteTable) -> VoteAggregate {
    let top = table.counties.iter().map(|c| c.votes).max().unwrap_or(0);
    let mut histogram = vec![0; table.ceiling().max(top) + 1];
    for c in &table.counties {
        histogram[c.votes] += 1;
    }
    VoteAggregate {
        total: table.counties.iter().map(|c| c.votes).sum(),
        histogram,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_closed_forms() {
        let actual = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(rmse_per_county(&actual, &actual, 3).unwrap(), vec![0.0; 3]);
        let shifted: Vec<f64> = actual.iter().map(|v| v - 0.5).collect();
        for r in rmse_per_county(&shifted, &actual, 3).unwrap() {
            assert!((r - 0.5).abs() < 1e-15);
        }
        assert!(rmse_per_county(&[], &[], 3).is_err());
        assert!(rmse_per_county(&[1.0], &[1.0, 2.0], 1).is_err());
    }

    #[test]
    fn degenerate_rules() {
        let b = [3.0, 4.0, 5.0, 6.0];
        assert_eq!(one_tailed_test(&b, &b, 0.1).unwrap(), TestResult { p: 1.0, significant: false });
        let f: Vec<f64> = b.iter().map(|v| v - 1.0).collect();
        assert_eq!(one_tailed_test(&b, &f, 0.1).unwrap(), TestResult { p: 0.0, significant: true });
        let g: Vec<f64> = b.iter().map(|v| v + 1.0).collect();
        assert_eq!(one_tailed_test(&b, &g, 0.1).unwrap().p, 1.0);
        assert!(one_tailed_test(&b, &b[..3], 0.1).is_err());
        assert!(one_tailed_test(&b[..1], &b[..1], 0.1).is_err());
    }

    #[test]
    fn t_test_known_value() {
        // d = [1, 2, 3]: mean 2, sd 1, t = 2*sqrt(3), df 2.
        let p = one_tailed_test(&[1.0, 2.0, 3.0], &[0.0; 3], 0.1).unwrap().p;
        let t = 2.0 * 3f64.sqrt();
        // df = 2 has the closed form 0.5 - t / (2 sqrt(t^2 + 2)).
        let expect = 0.5 - t / (2.0 * (t * t + 2.0).sqrt());
        assert!((p - expect).abs() < 1e-12, "{p} vs {expect}");
    }

    #[test]
    fn permutation_edge_cases() {
        assert_eq!(permutation_oracle(&[1.0; 5], &[1.0; 5], 1000, 3).unwrap(), 1.0);
        let d = [0.3, -1.2, 2.5, 0.7, -0.1];
        let mut b: Vec<f64> = d.to_vec();
        b.extend(d.iter().map(|x| -x));
        let p = permutation_oracle(&b, &vec![0.0; 10], 20_000, 9).unwrap();
        assert!((p - 0.5).abs() < 0.02, "{p}");
    }

    fn record(name: &str, run: usize, fs: FeatureSet, rmse: Vec<f64>) -> RunRecord {
        RunRecord {
            model_name: name.into(),
            run_index: run,
            feature_set: fs,
            graph_kind: GraphKind::Border,
            seed: run as u64,
            rmse,
            horizon_rmse: vec![],
            loss_curve: vec![],
            failed: None,
        }
    }

    #[test]
    fn tally_counts_significant_members() {
        let counties = vec![Fips::parse("99001").unwrap(), Fips::parse("99002").unwrap()];
        let with = FeatureSet::WithFactor("aod".into());
        let mut records = Vec::new();
        for name in ["a", "b"] {
            for run in 0..5 {
                let jitter = run as f64 * 0.01;
                records.push(record(name, run, FeatureSet::Baseline, vec![2.0 + jitter, 1.0]));
                records.push(record(name, run, with.clone(), vec![1.0 + 2.0 * jitter, 1.0 + jitter]));
            }
        }
        // Member c has too few pairs and abstains.
        records.push(record("c", 0, FeatureSet::Baseline, vec![9.0, 9.0]));
        records.push(record("c", 0, with.clone(), vec![0.0, 0.0]));
        let table = tally_votes(&records, &counties, "99", "aod", GraphKind::Border, 0.1).unwrap();
        assert_eq!(table.members, vec!["a", "b", "c"]);
        assert_eq!(table.counties[0].votes, 2);
        assert_eq!(table.counties[1].votes, 0);
        assert_eq!(table.counties[0].models.len(), 2);
        let agg = aggregate_votes(&table);
        assert_eq!(agg.total, 2);
        assert_eq!(agg.histogram, vec![1, 0, 1, 0]);
        assert!(tally_votes(&records, &counties, "99", "rh", GraphKind::Border, 0.1)
            .unwrap()
            .counties
            .iter()
            .all(|c| c.models.is_empty()));
    }

    #[test]
    fn aggregate_example() {
        let fips = |s: &str| Fips::parse(s).unwrap();
        let table = VoteTable {
            state: "99".into(),
            factor: "aod".into(),
            graph_kind: GraphKind::Border,
            alpha: 0.1,
            members: (0..8).map(|i| format!("m{i}")).collect(),
            failed_runs: 0,
            counties: [("99001", 0), ("99003", 3), ("99005", 5)]
                .into_iter()
                .map(|(f, v)| CountyVotes { fips: fips(f), votes: v, models: vec![] })
                .collect(),
        };
        let agg = aggregate_votes(&table);
        assert_eq!(agg.total, 8);
        assert_eq!(agg.histogram, vec![1, 0, 0, 1, 0, 1, 0, 0, 0]);
        assert_eq!(agg.histogram.iter().sum::<usize>(), 3);
    }
}
