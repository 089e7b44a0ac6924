//! Experimental items for coordination agreement, built from lexicons and
//! fixed sentence frames.

mod generate;
mod io;
mod lexicon;

pub use generate::{
    default_item_count, generate_exp1, generate_exp2_gender, generate_exp2_number, generate_exp3,
    generate_exp4, generate_experiment, Exp3Variant, FeatureMode,
};
pub use io::{emit_items, load_items, read_items, write_items, STIMULUS_HEADER};
pub use lexicon::{Cell, Lexicon, LexiconEntry, Role, LEXICON_HEADER, SAMPLE_LEXICON_EN, SAMPLE_LEXICON_FR};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::Language;

#[derive(Debug, Error)]
pub enum StimulusError {
    #[error("lexicon has no `{cell}` form for `{lemma}`")]
    MissingCell { lemma: String, cell: String },
    #[error("lexicon line {line}: {message}")]
    Lexicon { line: usize, message: String },
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("unsupported request: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// The experimental designs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Design {
    /// Single-noun subject, number agreement with the verb.
    Exp1Number,
    /// Single-noun subject, gender agreement with a predicative adjective.
    Exp1Gender,
    /// Coordinated subject, number agreement.
    Exp2Number,
    /// Coordinated subject, gender agreement.
    Exp2Gender,
    /// Coordination embedded under a matrix frame.
    Exp3 { variant: Exp3Variant, mode: FeatureMode },
    /// Verb before the coordination; the coordinator is scored.
    Exp4,
}

/// What an experiment's continuations measure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExpectationKind {
    /// S(singular) - S(plural).
    #[serde(rename = "plural")]
    Plural,
    /// S(feminine) - S(masculine).
    #[serde(rename = "gender")]
    Gender,
    /// Surprisal of the single continuation.
    #[serde(rename = "raw-surprisal")]
    RawSurprisal,
}

/// Design plus language, e.g. `exp3_critical_number_en`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExperimentId {
    pub design: Design,
    pub language: Language,
}

const NUMBER_COORD: [&str; 8] = [
    "pl_and_pl", "sg_and_pl", "pl_and_sg", "sg_and_sg", "pl_or_pl", "sg_or_pl", "pl_or_sg", "sg_or_sg",
];
const GENDER_COORD: [&str; 8] = [
    "m_and_m", "f_and_m", "m_and_f", "f_and_f", "m_or_m", "f_or_m", "m_or_f", "f_or_f",
];

impl Design {
    pub fn kind(self) -> ExpectationKind {
        match self {
            Design::Exp1Number | Design::Exp2Number => ExpectationKind::Plural,
            Design::Exp3 { mode: FeatureMode::Number, .. } => ExpectationKind::Plural,
            Design::Exp1Gender | Design::Exp2Gender => ExpectationKind::Gender,
            Design::Exp3 { mode: FeatureMode::Gender, .. } => ExpectationKind::Gender,
            Design::Exp4 => ExpectationKind::RawSurprisal,
        }
    }

    /// Closed condition inventory, in presentation order.
    pub fn conditions(self) -> &'static [&'static str] {
        match self {
            Design::Exp1Number => &["Npl", "Nsg"],
            Design::Exp1Gender => &["Nm", "Nf"],
            Design::Exp2Number => &NUMBER_COORD,
            Design::Exp2Gender => &GENDER_COORD,
            Design::Exp3 { mode: FeatureMode::Number, .. } => &NUMBER_COORD[..4],
            Design::Exp3 { mode: FeatureMode::Gender, .. } => &GENDER_COORD[..4],
            Design::Exp4 => &["Vpl_Npl", "Vpl_Nsg", "Vsg_Nsg"],
        }
    }

    fn stem(self) -> &'static str {
        match self {
            Design::Exp1Number => "exp1_number",
            Design::Exp1Gender => "exp1_gender",
            Design::Exp2Number => "exp2_number",
            Design::Exp2Gender => "exp2_gender",
            Design::Exp3 { variant: Exp3Variant::Control, mode: FeatureMode::Number } => "exp3_control_number",
            Design::Exp3 { variant: Exp3Variant::Critical, mode: FeatureMode::Number } => "exp3_critical_number",
            Design::Exp3 { variant: Exp3Variant::Control, mode: FeatureMode::Gender } => "exp3_control_gender",
            Design::Exp3 { variant: Exp3Variant::Critical, mode: FeatureMode::Gender } => "exp3_critical_gender",
            Design::Exp4 => "exp4",
        }
    }

    pub const ALL: [Design; 9] = [
        Design::Exp1Number,
        Design::Exp1Gender,
        Design::Exp2Number,
        Design::Exp2Gender,
        Design::Exp3 { variant: Exp3Variant::Control, mode: FeatureMode::Number },
        Design::Exp3 { variant: Exp3Variant::Critical, mode: FeatureMode::Number },
        Design::Exp3 { variant: Exp3Variant::Control, mode: FeatureMode::Gender },
        Design::Exp3 { variant: Exp3Variant::Critical, mode: FeatureMode::Gender },
        Design::Exp4,
    ];

    /// Whether the design exists for `language` (gender designs are French only).
    pub fn supports(self, language: Language) -> bool {
        !(language == Language::En && self.kind() == ExpectationKind::Gender)
    }
}

impl ExperimentId {
    pub fn new(design: Design, language: Language) -> Self {
        ExperimentId { design, language }
    }

    /// Every design available for `language`.
    pub fn all_for(language: Language) -> Vec<ExperimentId> {
        Design::ALL
            .into_iter()
            .filter(|d| d.supports(language))
            .map(|d| ExperimentId::new(d, language))
            .collect()
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.design.stem(), self.language)
    }
}

impl FromStr for ExperimentId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (stem, lang) = s
            .rsplit_once('_')
            .ok_or_else(|| format!("malformed experiment id `{s}`"))?;
        let language: Language = lang.parse()?;
        let design = Design::ALL
            .into_iter()
            .find(|d| d.stem() == stem)
            .ok_or_else(|| format!("unknown experiment `{stem}`"))?;
        Ok(ExperimentId { design, language })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Continuation {
    pub text: String,
    /// `sg`/`pl`, `m`/`f`, or the coordinator for single-continuation items.
    pub class: String,
}

/// One condition of one item: a prefix shared by every scored continuation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StimulusItem {
    pub experiment: String,
    pub item_id: String,
    pub condition: String,
    pub prefix: String,
    pub continuations: Vec<Continuation>,
    /// Token span of the continuation, `start-end` over whitespace tokens of
    /// `prefix + continuation`.
    pub measure_region: String,
}

impl StimulusItem {
    pub fn prefix_tokens(&self) -> Vec<&str> {
        self.prefix.split_whitespace().collect()
    }

    /// Full string `prefix continuation` for continuation `i`.
    pub fn sentence(&self, i: usize) -> String {
        format!("{} {}", self.prefix, self.continuations[i].text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experiment_ids_round_trip() {
        for lang in [Language::En, Language::Fr] {
            for id in ExperimentId::all_for(lang) {
                assert_eq!(id.to_string().parse::<ExperimentId>().unwrap(), id);
            }
        }
        assert_eq!(ExperimentId::all_for(Language::En).len(), 5);
        assert_eq!(ExperimentId::all_for(Language::Fr).len(), 9);
        assert_eq!(
            "exp3_critical_gender_fr".parse::<ExperimentId>().unwrap().design.kind(),
            ExpectationKind::Gender
        );
        assert!("exp9_en".parse::<ExperimentId>().is_err());
    }
}
