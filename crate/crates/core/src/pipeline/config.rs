use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::beam::BeamConfig;
use crate::features::Language;
use crate::lm::WordLmConfig;
use crate::stimuli::{default_item_count, ExperimentId};
use crate::syntax::{ParseLimits, SyntaxConfig, Variant};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "word-lm")]
    WordLm,
    #[serde(rename = "action-lstm")]
    ActionLstm,
    #[serde(rename = "rnng")]
    Rnng,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::WordLm => "word-lm",
            ModelKind::ActionLstm => "action-lstm",
            ModelKind::Rnng => "rnng",
        }
    }
}

/// Unset fields fall back to the model's own defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub dim: Option<usize>,
    pub layers: Option<usize>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub lr_decay: Option<f64>,
    pub decay_after: Option<usize>,
    pub clip: Option<f64>,
    pub min_count: Option<usize>,
    pub lowercase: Option<bool>,
    pub max_structural: Option<usize>,
    pub max_depth: Option<usize>,
    pub keep_preterminals: Option<bool>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            kind: ModelKind::WordLm,
            dim: None,
            layers: None,
            epochs: None,
            batch_size: None,
            lr: None,
            lr_decay: None,
            decay_after: None,
            clip: None,
            min_count: None,
            lowercase: None,
            max_structural: None,
            max_depth: None,
            keep_preterminals: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorpusFormat {
    /// One whitespace-tokenized sentence per line.
    #[serde(rename = "text")]
    Text,
    /// One bracketed tree per line.
    #[serde(rename = "trees")]
    Trees,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub train: Option<PathBuf>,
    /// Defaults to `text` for the word model and `trees` for syntactic ones.
    pub format: Option<CorpusFormat>,
    /// Size of the generated corpus used when `train` is unset.
    pub synthetic: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamSection {
    pub action_beam: usize,
    pub word_beam: usize,
    pub fast_track: usize,
}

impl Default for BeamSection {
    fn default() -> Self {
        let b = BeamConfig::default();
        BeamSection {
            action_beam: b.action_beam,
            word_beam: b.word_beam,
            fast_track: b.fast_track,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StimuliSection {
    /// Experiment ids such as `exp2_number_en`; empty means every design of
    /// the run's language.
    pub experiments: Vec<String>,
    pub items: Option<usize>,
    /// Lexicon TSV replacing the bundled sample lexicon.
    pub lexicon: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub language: Language,
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub model: ModelSection,
    pub corpus: CorpusSection,
    pub beam: BeamSection,
    pub stimuli: StimuliSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            language: Language::En,
            workers: 1,
            out: None,
            model: ModelSection::default(),
            corpus: CorpusSection::default(),
            beam: BeamSection::default(),
            stimuli: StimuliSection::default(),
        }
    }
}

/// Keys holding paths; relative values in a config file are resolved against
/// the file's directory.
const PATH_KEYS: &[&[&str]] = &[&["out"], &["corpus", "train"], &["stimuli", "lexicon"]];

impl RunConfig {
    /// Reads `path` (if any), applies `overrides` (`section.key=value`, value
    /// in TOML syntax or a bare string) and deserializes. Overrides win over
    /// the file, the file over the defaults.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig, PipelineError> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| PipelineError::file(p, e))?;
                let mut t: toml::Table = text.parse().map_err(|e| PipelineError::file(p, e))?;
                let base = p.parent().unwrap_or(Path::new(""));
                resolve_paths(&mut t, base);
                t
            }
            None => toml::Table::new(),
        };
        for (key, value) in overrides {
            set_key(&mut table, key, value)?;
        }
        let cfg: RunConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| {
            let msg = e.message().to_string();
            match path {
                Some(p) => PipelineError::Config(format!("{}: {msg}", p.display())),
                None => PipelineError::Config(msg),
            }
        })?;
        Ok(cfg)
    }

    pub fn seed(&self) -> Result<u64, PipelineError> {
        self.seed
            .ok_or_else(|| PipelineError::Config("`seed` is required (set it in the config or pass --seed)".into()))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.seed()?;
        if self.workers == 0 {
            return Err(PipelineError::Config("`workers` must be at least 1".into()));
        }
        let m = &self.model;
        for (name, v) in [
            ("model.dim", m.dim),
            ("model.layers", m.layers),
            ("model.epochs", m.epochs),
            ("model.batch_size", m.batch_size),
            ("model.max_structural", m.max_structural),
            ("model.max_depth", m.max_depth),
        ] {
            if v == Some(0) {
                return Err(PipelineError::Config(format!("`{name}` must be positive")));
            }
        }
        for (name, v) in [("model.lr", m.lr), ("model.lr_decay", m.lr_decay), ("model.clip", m.clip)] {
            if let Some(x) = v {
                if !(x.is_finite() && x > 0.0) {
                    return Err(PipelineError::Config(format!("`{name}` must be a positive number, got {x}")));
                }
            }
        }
        if self.corpus.synthetic == Some(0) {
            return Err(PipelineError::Config("`corpus.synthetic` must be positive".into()));
        }
        if let Some(p) = &self.corpus.train {
            require_file("training corpus", p)?;
        }
        if let Some(p) = &self.stimuli.lexicon {
            require_file("lexicon", p)?;
        }
        self.experiments()?;
        self.beam_config(ParseLimits::default())
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn experiments(&self) -> Result<Vec<ExperimentId>, PipelineError> {
        if self.stimuli.experiments.is_empty() {
            return Ok(ExperimentId::all_for(self.language));
        }
        self.stimuli
            .experiments
            .iter()
            .map(|s| {
                let id: ExperimentId = s.parse().map_err(PipelineError::Config)?;
                if id.language != self.language {
                    return Err(PipelineError::Config(format!(
                        "experiment `{s}` is not a {} experiment",
                        self.language
                    )));
                }
                if !id.design.supports(id.language) {
                    return Err(PipelineError::Config(format!("experiment `{s}` does not exist")));
                }
                Ok(id)
            })
            .collect()
    }

    pub fn item_count(&self) -> usize {
        self.stimuli.items.unwrap_or_else(|| default_item_count(self.language))
    }

    pub fn corpus_format(&self) -> CorpusFormat {
        self.corpus.format.unwrap_or(match self.model.kind {
            ModelKind::WordLm => CorpusFormat::Text,
            _ => CorpusFormat::Trees,
        })
    }

    pub fn word_lm_config(&self) -> Result<WordLmConfig, PipelineError> {
        let d = WordLmConfig::default();
        let m = &self.model;
        Ok(WordLmConfig {
            dim: m.dim.unwrap_or(d.dim),
            layers: m.layers.unwrap_or(d.layers),
            epochs: m.epochs.unwrap_or(d.epochs),
            batch_size: m.batch_size.unwrap_or(d.batch_size),
            lr: m.lr.unwrap_or(d.lr),
            lr_decay: m.lr_decay.unwrap_or(d.lr_decay),
            decay_after: m.decay_after.unwrap_or(d.decay_after),
            clip: m.clip.unwrap_or(d.clip),
            min_count: m.min_count.unwrap_or(d.min_count),
            lowercase: m.lowercase.unwrap_or(d.lowercase),
            seed: self.seed()?,
        })
    }

    pub fn syntax_config(&self) -> Result<SyntaxConfig, PipelineError> {
        let d = SyntaxConfig::default();
        let m = &self.model;
        let variant = match m.kind {
            ModelKind::ActionLstm => Variant::ActionLstm,
            ModelKind::Rnng => Variant::Rnng,
            ModelKind::WordLm => return Err(PipelineError::Config("`model.kind` is not a syntactic model".into())),
        };
        Ok(SyntaxConfig {
            variant,
            dim: m.dim.unwrap_or(d.dim),
            layers: m.layers.unwrap_or(d.layers),
            epochs: m.epochs.unwrap_or(d.epochs),
            batch_size: m.batch_size.unwrap_or(d.batch_size),
            lr: m.lr.unwrap_or(d.lr),
            lr_decay: m.lr_decay.unwrap_or(d.lr_decay),
            decay_after: m.decay_after.unwrap_or(d.decay_after),
            clip: m.clip.unwrap_or(d.clip),
            min_count: m.min_count.unwrap_or(d.min_count),
            seed: self.seed()?,
            limits: ParseLimits {
                max_structural: m.max_structural.unwrap_or(d.limits.max_structural),
                max_depth: m.max_depth.unwrap_or(d.limits.max_depth),
                max_words: None,
            },
            keep_preterminals: m.keep_preterminals.unwrap_or(d.keep_preterminals),
        })
    }

    /// Beam widths from the run, parse limits from the model.
    pub fn beam_config(&self, limits: ParseLimits) -> BeamConfig {
        BeamConfig {
            action_beam: self.beam.action_beam,
            word_beam: self.beam.word_beam,
            fast_track: self.beam.fast_track,
            limits,
        }
    }

    /// The config as hashed into manifests; the output directory is left out
    /// so identical runs in different places hash alike.
    pub fn fingerprint(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        serde_json::to_string(&c).expect("config serializes")
    }
}

fn require_file(what: &'static str, path: &Path) -> Result<(), PipelineError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(PipelineError::MissingInput {
            what,
            path: path.to_path_buf(),
        })
    }
}

fn resolve_paths(table: &mut toml::Table, base: &Path) {
    for keys in PATH_KEYS {
        let (last, sections) = keys.split_last().expect("non-empty key");
        let mut t = Some(&mut *table);
        for s in sections {
            t = t.and_then(|t| t.get_mut(*s)).and_then(toml::Value::as_table_mut);
        }
        if let Some(toml::Value::String(p)) = t.and_then(|t| t.get_mut(*last)) {
            if Path::new(p.as_str()).is_relative() {
                *p = base.join(p.as_str()).to_string_lossy().into_owned();
            }
        }
    }
}

fn set_key(table: &mut toml::Table, key: &str, raw: &str) -> Result<(), PipelineError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(PipelineError::Config(format!("malformed override key `{key}`")));
    }
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let (last, sections) = parts.split_last().expect("non-empty key");
    let mut t = table;
    for s in sections {
        let entry = t
            .entry(s.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry
            .as_table_mut()
            .ok_or_else(|| PipelineError::Config(format!("`{s}` in `{key}` is not a section")))?;
    }
    t.insert(last.to_string(), value);
    Ok(())
}

/// Parses `key=value`.
pub fn parse_override(s: &str) -> Result<(String, String), PipelineError> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| PipelineError::Config(format!("override `{s}` is not of the form key=value")))
}
