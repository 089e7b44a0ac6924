use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{gender_expectation, plural_expectation, AnalysisError, ExpectationRecord, ExpectationSummary};
use crate::stimuli::{Design, ExpectationKind, ExperimentId};

pub const SURPRISAL_HEADER: [&str; 7] = [
    "experiment",
    "item_id",
    "condition",
    "continuation_class",
    "position",
    "token",
    "surprisal_bits",
];
pub const SURPRISAL_BEAM_COLUMNS: [&str; 3] = ["beam_Ka", "beam_Kw", "mass_bits"];
pub const SUMMARY_HEADER: [&str; 6] = ["experiment", "condition", "n", "mean_bits", "ci_low", "ci_high"];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamColumns {
    pub action_beam: usize,
    pub word_beam: usize,
    /// log2 prefix mass after the token.
    pub mass_bits: f64,
}

/// Surprisal of one continuation token. `position` is the 1-based index of
/// the token in the full sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct SurprisalRow {
    pub experiment: String,
    pub item_id: String,
    pub condition: String,
    pub continuation_class: String,
    pub position: usize,
    pub token: String,
    pub surprisal_bits: f64,
    pub beam: Option<BeamColumns>,
}

fn schema(found: &csv::StringRecord, want: &[&str]) -> AnalysisError {
    AnalysisError::Schema(format!(
        "expected header `{}`, found `{}`",
        want.join(","),
        found.iter().collect::<Vec<_>>().join(",")
    ))
}

fn parse<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: u64) -> Result<T, AnalysisError> {
    let field = rec.get(i).unwrap_or_default();
    field
        .parse()
        .map_err(|_| AnalysisError::Schema(format!("line {line}: cannot parse `{field}`")))
}

/// Beam columns are written when any row carries them; every row must then
/// carry them.
pub fn write_surprisals<W: Write>(writer: W, rows: &[SurprisalRow]) -> Result<(), AnalysisError> {
    let beam = rows.iter().any(|r| r.beam.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = SURPRISAL_HEADER.to_vec();
    if beam {
        header.extend(SURPRISAL_BEAM_COLUMNS);
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.experiment.clone(),
            r.item_id.clone(),
            r.condition.clone(),
            r.continuation_class.clone(),
            r.position.to_string(),
            r.token.clone(),
            r.surprisal_bits.to_string(),
        ];
        if beam {
            let b = r
                .beam
                .ok_or_else(|| AnalysisError::Schema(format!("row {} ({}) lacks beam columns", r.item_id, r.condition)))?;
            rec.extend([b.action_beam.to_string(), b.word_beam.to_string(), b.mass_bits.to_string()]);
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_surprisals<R: Read>(reader: R) -> Result<Vec<SurprisalRow>, AnalysisError> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    let plain = header.iter().eq(SURPRISAL_HEADER);
    let with_beam = header.iter().eq(SURPRISAL_HEADER.iter().chain(&SURPRISAL_BEAM_COLUMNS).copied());
    if !plain && !with_beam {
        let mut want = SURPRISAL_HEADER.to_vec();
        want.push("[beam_Ka,beam_Kw,mass_bits]");
        return Err(schema(&header, &want));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push(SurprisalRow {
            experiment: rec[0].to_string(),
            item_id: rec[1].to_string(),
            condition: rec[2].to_string(),
            continuation_class: rec[3].to_string(),
            position: parse(&rec, 4, line)?,
            token: rec[5].to_string(),
            surprisal_bits: parse(&rec, 6, line)?,
            beam: if with_beam {
                Some(BeamColumns {
                    action_beam: parse(&rec, 7, line)?,
                    word_beam: parse(&rec, 8, line)?,
                    mass_bits: parse(&rec, 9, line)?,
                })
            } else {
                None
            },
        });
    }
    Ok(rows)
}

/// One expectation per (experiment, item, condition). Multi-token
/// continuations contribute the sum of their token surprisals.
pub fn expectations_from_surprisals(rows: &[SurprisalRow]) -> Result<Vec<ExpectationRecord>, AnalysisError> {
    let mut items: BTreeMap<(&str, &str, &str), BTreeMap<&str, f64>> = BTreeMap::new();
    for r in rows {
        *items
            .entry((&r.experiment, &r.item_id, &r.condition))
            .or_default()
            .entry(&r.continuation_class)
            .or_insert(0.0) += r.surprisal_bits;
    }
    let mut out = Vec::with_capacity(items.len());
    for ((experiment, item_id, condition), classes) in items {
        let id: ExperimentId = experiment.parse().map_err(AnalysisError::Schema)?;
        let kind = id.design.kind();
        let get = |class: &str| {
            classes.get(class).copied().ok_or_else(|| AnalysisError::MissingContinuation {
                experiment: experiment.into(),
                item_id: item_id.into(),
                condition: condition.into(),
                class: class.into(),
            })
        };
        let value = match kind {
            ExpectationKind::Plural => plural_expectation(get("sg")?, get("pl")?),
            ExpectationKind::Gender => gender_expectation(get("f")?, get("m")?),
            ExpectationKind::RawSurprisal => {
                if classes.len() != 1 {
                    return Err(AnalysisError::Schema(format!(
                        "{experiment} item {item_id} ({condition}) must have one continuation, found {}",
                        classes.len()
                    )));
                }
                *classes.values().next().expect("one class")
            }
        };
        out.push(ExpectationRecord {
            experiment: experiment.into(),
            item_id: item_id.into(),
            condition: condition.into(),
            value,
            kind,
        });
    }
    Ok(out)
}

pub fn write_summaries<W: Write>(writer: W, summaries: &[ExpectationSummary]) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SUMMARY_HEADER)?;
    for s in summaries {
        w.write_record([
            s.experiment.clone(),
            s.condition.clone(),
            s.n.to_string(),
            s.mean.to_string(),
            s.ci_low.to_string(),
            s.ci_high.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summaries<R: Read>(reader: R) -> Result<Vec<ExpectationSummary>, AnalysisError> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    if header.iter().ne(SUMMARY_HEADER) {
        return Err(schema(&header, &SUMMARY_HEADER));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push(ExpectationSummary {
            experiment: rec[0].to_string(),
            condition: rec[1].to_string(),
            n: parse(&rec, 2, line)?,
            mean: parse(&rec, 3, line)?,
            ci_low: parse(&rec, 4, line)?,
            ci_high: parse(&rec, 5, line)?,
        });
    }
    Ok(out)
}

pub fn load_summaries(path: &Path) -> Result<Vec<ExpectationSummary>, AnalysisError> {
    read_summaries(BufReader::new(File::open(path)?))
}

/// Summaries laid out for plotting: one figure per experimental paradigm,
/// one panel per experiment (coordination experiments split by
/// coordinator), conditions on the x axis and one series per model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub figures: Vec<PlotFigure>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotFigure {
    pub figure: String,
    pub panels: Vec<PlotPanel>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotPanel {
    pub experiment: String,
    pub panel: String,
    pub y_label: String,
    pub conditions: Vec<String>,
    pub series: Vec<PlotSeries>,
}

/// Missing conditions and unbounded interval ends are `null`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub model: String,
    pub n: Vec<usize>,
    pub mean: Vec<Option<f64>>,
    pub ci_low: Vec<Option<f64>>,
    pub ci_high: Vec<Option<f64>>,
}

fn figure_of(design: Design) -> (u8, &'static str) {
    use crate::stimuli::Exp3Variant;
    match design {
        Design::Exp1Number | Design::Exp1Gender => (0, "non-coordination"),
        Design::Exp2Number => (1, "simple-coordination-number"),
        Design::Exp2Gender => (2, "simple-coordination-gender"),
        Design::Exp3 { variant: Exp3Variant::Control, .. } => (3, "complex-coordination-control"),
        Design::Exp3 { variant: Exp3Variant::Critical, .. } => (4, "complex-coordination-critical"),
        Design::Exp4 => (5, "inverted-coordination"),
    }
}

fn y_label(kind: ExpectationKind) -> &'static str {
    match kind {
        ExpectationKind::Plural => "plural expectation (bits)",
        ExpectationKind::Gender => "masculine expectation (bits)",
        ExpectationKind::RawSurprisal => "surprisal (bits)",
    }
}

fn panel_of(condition: &str) -> &'static str {
    if condition.contains("_and_") {
        "and"
    } else if condition.contains("_or_") {
        "or"
    } else {
        "all"
    }
}

impl PlotData {
    /// `models` pairs a series name with that model's summaries. Summaries
    /// of experiments with unknown ids are skipped.
    pub fn build(models: &[(String, Vec<ExpectationSummary>)]) -> PlotData {
        let mut panels: BTreeMap<((u8, &'static str), String, &'static str), PlotPanel> = BTreeMap::new();
        for (model, summaries) in models {
            for s in summaries {
                let Ok(id) = s.experiment.parse::<ExperimentId>() else {
                    continue;
                };
                let key = (figure_of(id.design), s.experiment.clone(), panel_of(&s.condition));
                let panel = panels.entry(key).or_insert_with(|| PlotPanel {
                    experiment: s.experiment.clone(),
                    panel: panel_of(&s.condition).into(),
                    y_label: y_label(id.design.kind()).into(),
                    conditions: id
                        .design
                        .conditions()
                        .iter()
                        .filter(|c| panel_of(c) == panel_of(&s.condition))
                        .map(|c| c.to_string())
                        .collect(),
                    series: Vec::new(),
                });
                let k = panel.conditions.len();
                let idx = match panel.series.iter().position(|x| &x.model == model) {
                    Some(i) => i,
                    None => {
                        panel.series.push(PlotSeries {
                            model: model.clone(),
                            n: vec![0; k],
                            mean: vec![None; k],
                            ci_low: vec![None; k],
                            ci_high: vec![None; k],
                        });
                        panel.series.len() - 1
                    }
                };
                let Some(j) = panel.conditions.iter().position(|c| c == &s.condition) else {
                    continue;
                };
                let series = &mut panel.series[idx];
                let finite = |x: f64| x.is_finite().then_some(x);
                series.n[j] = s.n;
                series.mean[j] = finite(s.mean);
                series.ci_low[j] = finite(s.ci_low);
                series.ci_high[j] = finite(s.ci_high);
            }
        }
        let mut figures: Vec<PlotFigure> = Vec::new();
        for (((_, figure), _, _), panel) in panels {
            match figures.last_mut() {
                Some(f) if f.figure == figure => f.panels.push(panel),
                _ => figures.push(PlotFigure {
                    figure: figure.into(),
                    panels: vec![panel],
                }),
            }
        }
        PlotData { figures }
    }
}
