//! Quantile bins, histograms and trend lines for the exploration views.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Fips;

pub const DEFAULT_BINS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileBinning {
    pub k: usize,
    /// Strictly ascending; at most `k - 1` values.
    pub breakpoints: Vec<f64>,
    pub assignment: BTreeMap<Fips, usize>,
    /// Every value was equal and all counties share bin 0.
    pub degenerate: bool,
}

/// Linear interpolation between order statistics at fractional index `pos`.
fn interpolate_sorted(sorted: &[f64], pos: f64) -> f64 {
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= sorted.len() || frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Bins counties by the `i/k` empirical quantiles of their values. A value
/// equal to a breakpoint falls in the lower bin.
pub fn quantile_bins(values: &[(Fips, f64)], k: usize) -> Result<QuantileBinning> {
    if values.is_empty() {
        return Err(Error::invalid("cannot bin an empty set of counties"));
    }
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 bins, got {k}")));
    }
    if let Some((f, v)) = values.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::invalid(format!("county {f} has non-finite value {v}")));
    }
    let mut sorted: Vec<f64> = values.iter().map(|(_, v)| *v).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let degenerate = sorted[0] == sorted[n - 1];
    let mut breakpoints: Vec<f64> = Vec::with_capacity(k - 1);
    if !degenerate {
        for i in 1..k {
            // (n-1) * i / k without rounding the ratio first.
            let pos = (n - 1) as f64 * i as f64 / k as f64;
            let b = interpolate_sorted(&sorted, pos);
            if breakpoints.last().is_none_or(|&last| b > last) {
                breakpoints.push(b);
            }
        }
    }
    let assignment = values
        .iter()
        .map(|(f, v)| (f.clone(), breakpoints.iter().filter(|&&b| b < *v).count()))
        .collect();
    Ok(QuantileBinning { k, breakpoints, assignment, degenerate })
}

/// County count per bin; always `k` entries.
pub fn histogram(binning: &QuantileBinning) -> Vec<usize> {
    let mut counts = vec![0; binning.k];
    for &b in binning.assignment.values() {
        counts[b] += 1;
    }
    counts
}

/// The `{breakpoints, assignment, counts}` payload served to the UI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningPayload {
    pub breakpoints: Vec<f64>,
    pub assignment: BTreeMap<Fips, usize>,
    pub counts: Vec<usize>,
    pub degenerate: bool,
}

impl From<&QuantileBinning> for BinningPayload {
    fn from(b: &QuantileBinning) -> Self {
        BinningPayload {
            breakpoints: b.breakpoints.clone(),
            assignment: b.assignment.clone(),
            counts: histogram(b),
            degenerate: b.degenerate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendLine {
    pub slope: f64,
    pub intercept: f64,
    pub r: f64,
    /// One axis has zero variance; `r` is reported as 0.
    pub degenerate: bool,
}

/// Ordinary least squares of `y` on `x` over the counties present in both.
pub fn trend_line(x: &[(Fips, f64)], y: &[(Fips, f64)]) -> Result<TrendLine> {
    let ys: BTreeMap<&Fips, f64> = y.iter().map(|(f, v)| (f, *v)).collect();
    let pts: Vec<(f64, f64)> = x.iter().filter_map(|(f, xv)| ys.get(f).map(|yv| (*xv, *yv))).collect();
    if pts.len() < 2 {
        return Err(Error::invalid(format!("trend line needs 2 common counties, got {}", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(a, b) in &pts {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 {
        return Ok(TrendLine { slope: 0.0, intercept: my, r: 0.0, degenerate: true });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    if syy == 0.0 {
        return Ok(TrendLine { slope, intercept, r: 0.0, degenerate: true });
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    Ok(TrendLine { slope, intercept, r, degenerate: false })
}
