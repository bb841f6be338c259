use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Activation, ModelKind, ModelSpec};
use crate::error::{Error, Result};
use crate::ndiff::Aggregator;

pub const DEFAULT_ENSEMBLE_SIZE: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberSpec {
    pub name: String,
    pub spec: ModelSpec,
}

/// Roster configuration. Shared hyperparameters come from `base`; `members`
/// replaces the default roster entirely when given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub size: usize,
    pub base: ModelSpec,
    pub members: Option<Vec<MemberSpec>>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            size: DEFAULT_ENSEMBLE_SIZE,
            base: ModelSpec::default(),
            members: None,
        }
    }
}

/// The eight default members in their fixed order: the LSTM, graph
/// convolution over {mean, sum, max} x {1, 2} layers, and a 2-layer mean
/// variant with ReLU gates.
pub fn default_roster(base: &ModelSpec) -> Vec<MemberSpec> {
    let mut out = vec![MemberSpec {
        name: "lstm".into(),
        spec: ModelSpec { kind: ModelKind::Lstm, ..base.clone() },
    }];
    for nlayers in [1, 2] {
        for agg in [Aggregator::Mean, Aggregator::Sum, Aggregator::Max] {
            out.push(MemberSpec {
                name: format!("rgc-{}-{nlayers}", agg.as_str()),
                spec: ModelSpec {
                    kind: ModelKind::Rgc,
                    aggregator: agg,
                    nlayers,
                    gate_activation: Activation::Sigmoid,
                    ..base.clone()
                },
            });
        }
    }
    out.push(MemberSpec {
        name: "rgc-mean-2-relugate".into(),
        spec: ModelSpec {
            kind: ModelKind::Rgc,
            aggregator: Aggregator::Mean,
            nlayers: 2,
            gate_activation: Activation::Relu,
            ..base.clone()
        },
    });
    out
}

/// The first `config.size` members of the roster.
pub fn make_ensemble(config: &EnsembleConfig) -> Result<Vec<MemberSpec>> {
    let roster = match &config.members {
        Some(m) => m.clone(),
        None => default_roster(&config.base),
    };
    if config.size == 0 || config.size > roster.len() {
        return Err(Error::invalid(format!(
            "ensemble size {} must be in 1..={}",
            config.size,
            roster.len()
        )));
    }
    let members: Vec<MemberSpec> = roster.into_iter().take(config.size).collect();
    let mut seen = BTreeSet::new();
    for m in &members {
        if !seen.insert(m.name.as_str()) {
            return Err(Error::invalid(format!("duplicate ensemble member name {:?}", m.name)));
        }
        m.spec.validate()?;
    }
    Ok(members)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_roster_has_eight_unique_members() {
        let m = make_ensemble(&EnsembleConfig::default()).unwrap();
        assert_eq!(m.len(), 8);
        assert_eq!(m.iter().map(|m| &m.name).collect::<BTreeSet<_>>().len(), 8);
        assert_eq!(m[0].spec.kind, ModelKind::Lstm);
        assert_eq!(m.iter().filter(|m| m.spec.kind == ModelKind::Rgc).count(), 7);
        assert_eq!(m[7].spec.gate_activation, Activation::Relu);
    }

    #[test]
    fn smaller_ensemble_takes_a_prefix() {
        let m = make_ensemble(&EnsembleConfig { size: 4, ..Default::default() }).unwrap();
        let names: Vec<_> = m.iter().map(|m| m.name.as_str()).collect();
        assert_eq!(names, ["lstm", "rgc-mean-1", "rgc-sum-1", "rgc-max-1"]);
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let base = ModelSpec::default();
        let dup = MemberSpec { name: "a".into(), spec: base.clone() };
        let cfg = EnsembleConfig { size: 2, base, members: Some(vec![dup.clone(), dup]) };
        assert!(make_ensemble(&cfg).is_err());
    }
}
