//! Expectation metrics, per-condition summaries and behavioral labels.

mod io;

pub use io::{
    expectations_from_surprisals, load_summaries, read_summaries, read_surprisals, write_summaries, write_surprisals,
    BeamColumns, PlotData, PlotPanel, PlotSeries, SurprisalRow, SUMMARY_HEADER, SURPRISAL_BEAM_COLUMNS,
    SURPRISAL_HEADER,
};

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::stimuli::{ExpectationKind, ExperimentId};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("condition `{0}` has no records")]
    EmptyCondition(String),
    #[error("missing condition `{0}`")]
    MissingCondition(String),
    #[error("item {item_id} ({condition}) of {experiment} lacks a `{class}` continuation")]
    MissingContinuation {
        experiment: String,
        item_id: String,
        condition: String,
        class: String,
    },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("{0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub fn plural_expectation(s_sg: f64, s_pl: f64) -> f64 {
    s_sg - s_pl
}

/// Positive when the masculine form is expected.
pub fn gender_expectation(s_f: f64, s_m: f64) -> f64 {
    s_f - s_m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectationRecord {
    pub experiment: String,
    pub item_id: String,
    pub condition: String,
    pub value: f64,
    pub kind: ExpectationKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectationSummary {
    pub experiment: String,
    pub condition: String,
    pub n: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl ExpectationSummary {
    /// The 95% interval lies strictly above zero.
    pub fn above_zero(&self) -> bool {
        self.ci_low > 0.0
    }

    pub fn overlaps(&self, other: &ExpectationSummary) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }
}

/// Mean and two-sided 95% Student-t interval. Values are summed in sorted
/// order so the result does not depend on item order. A single value has an
/// unbounded interval.
pub fn t_interval(values: &[f64]) -> Option<(f64, f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() == 1 {
        return Some((mean, f64::NEG_INFINITY, f64::INFINITY));
    }
    let mut dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    dev.sort_by(f64::total_cmp);
    let sd = (dev.iter().sum::<f64>() / (n - 1.0)).sqrt();
    let t = StudentsT::new(0.0, 1.0, n - 1.0).expect("positive degrees of freedom").inverse_cdf(0.975);
    let half = t * sd / n.sqrt();
    Some((mean, mean - half, mean + half))
}

fn condition_rank(experiment: &str, condition: &str) -> (usize, String) {
    let pos = experiment
        .parse::<ExperimentId>()
        .ok()
        .and_then(|id| id.design.conditions().iter().position(|c| *c == condition));
    (pos.unwrap_or(usize::MAX), condition.to_string())
}

/// Per (experiment, condition) summaries, experiments in lexical order and
/// conditions in their design order. Every condition of a known experiment
/// must have at least one record.
pub fn summarize(records: &[ExpectationRecord]) -> Result<Vec<ExpectationSummary>, AnalysisError> {
    let mut groups: BTreeMap<&str, BTreeMap<(usize, String), Vec<f64>>> = BTreeMap::new();
    for r in records {
        if !r.value.is_finite() {
            return Err(AnalysisError::NonFinite(format!("{} item {} ({})", r.experiment, r.item_id, r.condition)));
        }
        groups
            .entry(&r.experiment)
            .or_default()
            .entry(condition_rank(&r.experiment, &r.condition))
            .or_default()
            .push(r.value);
    }
    let mut out = Vec::new();
    for (experiment, conds) in groups {
        if let Ok(id) = experiment.parse::<ExperimentId>() {
            for c in id.design.conditions() {
                if !conds.keys().any(|(_, name)| name == c) {
                    return Err(AnalysisError::EmptyCondition(format!("{experiment}/{c}")));
                }
            }
        }
        for ((_, condition), values) in conds {
            let (mean, ci_low, ci_high) = t_interval(&values).expect("groups are non-empty");
            out.push(ExpectationSummary {
                experiment: experiment.to_string(),
                condition,
                n: values.len(),
                mean,
                ci_low,
                ci_high,
            });
        }
    }
    Ok(out)
}

/// Feature coding of a coordination condition such as `sg_and_pl` or
/// `m_or_f`: (first conjunct, second conjunct, coordinator) with pl = m = 1,
/// sg = f = 0 and and = 1, or = 0.
pub fn coordination_coding(condition: &str) -> Option<(f64, f64, f64)> {
    let code = |s: &str| match s {
        "pl" | "m" => Some(1.0),
        "sg" | "f" => Some(0.0),
        _ => None,
    };
    let mut parts = condition.split('_');
    let (a, c, b) = (parts.next()?, parts.next()?, parts.next()?);
    if parts.next().is_some() {
        return None;
    }
    let coord = match c {
        "and" => 1.0,
        "or" => 0.0,
        _ => return None,
    };
    Some((code(a)?, code(b)?, coord))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    /// Weight of the first conjunct's feature.
    pub w1: f64,
    /// Weight of the second conjunct's feature.
    pub w2: f64,
    pub coordinator: f64,
    pub intercept: f64,
    pub residual_norm: f64,
    /// Column coding of the design matrix.
    pub coding: String,
}

impl LinearFit {
    pub fn second_conjunct_dominant(&self) -> bool {
        self.w2 > self.w1
    }
}

pub const FIT_CODING: &str = "n1,n2: pl=m=1 sg=f=0; coordinator: and=1 or=0; intercept";

/// Least squares of `y` on `[n1, n2, coord, 1]` rows.
pub fn fit_linear(rows: &[(f64, f64, f64)], y: &[f64]) -> Result<LinearFit, AnalysisError> {
    assert_eq!(rows.len(), y.len());
    if y.iter().any(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFinite("condition means".into()));
    }
    let x = DMatrix::from_fn(rows.len(), 4, |i, j| match j {
        0 => rows[i].0,
        1 => rows[i].1,
        2 => rows[i].2,
        _ => 1.0,
    });
    let y = DVector::from_column_slice(y);
    if rows.len() < 4 {
        return Err(AnalysisError::RankDeficient);
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= smax * 1e-10 {
        return Err(AnalysisError::RankDeficient);
    }
    let beta = svd.solve(&y, 0.0).map_err(|_| AnalysisError::RankDeficient)?;
    let residual_norm = (&x * &beta - &y).norm();
    Ok(LinearFit {
        w1: beta[0],
        w2: beta[1],
        coordinator: beta[2],
        intercept: beta[3],
        residual_norm,
        coding: FIT_CODING.into(),
    })
}

/// Fits condition means of a coordination experiment (all eight of
/// `{sg,pl}_{and,or}_{sg,pl}` or the gender analog) as a linear function of
/// the conjuncts' features and the coordinator.
pub fn fit_conjunct_weights(summaries: &[ExpectationSummary]) -> Result<LinearFit, AnalysisError> {
    let gender = summaries.iter().any(|s| s.condition.starts_with("m_") || s.condition.starts_with("f_"));
    let feats = if gender { ["m", "f"] } else { ["pl", "sg"] };
    let mut rows = Vec::with_capacity(8);
    let mut y = Vec::with_capacity(8);
    for a in feats {
        for c in ["and", "or"] {
            for b in feats {
                let name = format!("{a}_{c}_{b}");
                let s = summaries
                    .iter()
                    .find(|s| s.condition == name)
                    .ok_or_else(|| AnalysisError::MissingCondition(name.clone()))?;
                rows.push(coordination_coding(&name).expect("well-formed condition"));
                y.push(s.mean);
            }
        }
    }
    fit_linear(&rows, &y)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Behavior {
    #[serde(rename = "percolation-like")]
    PercolationLike,
    #[serde(rename = "linear-combination-like")]
    LinearCombinationLike,
    #[serde(rename = "inconsistent")]
    Inconsistent,
}

impl Behavior {
    pub fn as_str(self) -> &'static str {
        match self {
            Behavior::PercolationLike => "percolation-like",
            Behavior::LinearCombinationLike => "linear-combination-like",
            Behavior::Inconsistent => "inconsistent",
        }
    }
}

impl std::fmt::Display for Behavior {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Labels the four and-conditions of a coordination experiment.
///
/// Percolation-like: every interval lies above zero and all intervals
/// overlap pairwise. Linear-combination-like: means strictly increase with
/// the number of plural (masculine) conjuncts and the no-plural interval
/// lies wholly below the two-plural one.
pub fn classify_behavior(summaries: &[ExpectationSummary]) -> Result<Behavior, AnalysisError> {
    let gender = summaries.iter().any(|s| s.condition.starts_with("m_") || s.condition.starts_with("f_"));
    let (one, zero) = if gender { ("m", "f") } else { ("pl", "sg") };
    let mut and: Vec<(usize, &ExpectationSummary)> = Vec::with_capacity(4);
    for (a, b) in [(one, one), (zero, one), (one, zero), (zero, zero)] {
        let name = format!("{a}_and_{b}");
        let s = summaries
            .iter()
            .find(|s| s.condition == name)
            .ok_or(AnalysisError::MissingCondition(name))?;
        and.push(((a == one) as usize + (b == one) as usize, s));
    }
    let all_above = and.iter().all(|(_, s)| s.above_zero());
    let overlapping = and.iter().all(|(_, a)| and.iter().all(|(_, b)| a.overlaps(b)));
    if all_above && overlapping {
        return Ok(Behavior::PercolationLike);
    }
    let ordered = and
        .iter()
        .all(|(ka, a)| and.iter().all(|(kb, b)| ka >= kb || a.mean < b.mean));
    let (two, none) = (and[0].1, and[3].1);
    if ordered && none.ci_high < two.ci_low {
        return Ok(Behavior::LinearCombinationLike);
    }
    Ok(Behavior::Inconsistent)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contrast {
    /// `mean(a) - mean(b)`.
    pub difference: f64,
    pub overlap: bool,
}

pub fn contrast(a: &ExpectationSummary, b: &ExpectationSummary) -> Contrast {
    Contrast {
        difference: a.mean - b.mean,
        overlap: a.overlaps(b),
    }
}

/// Looks up the summary of one condition.
pub fn find<'a>(summaries: &'a [ExpectationSummary], experiment: &str, condition: &str) -> Option<&'a ExpectationSummary> {
    summaries
        .iter()
        .find(|s| s.experiment == experiment && s.condition == condition)
}
