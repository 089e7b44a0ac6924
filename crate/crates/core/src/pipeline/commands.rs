use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{CorpusFormat, ModelKind, RunConfig};
use super::{create_file, open_file, write_json, PipelineError, RunDir};
use crate::analysis::{
    classify_behavior, expectations_from_surprisals, fit_conjunct_weights, read_surprisals, summarize,
    write_summaries, write_surprisals, BeamColumns, Behavior, LinearFit, PlotData, SurprisalRow,
};
use crate::beam::{BeamConfig, BeamDecoder, BeamError};
use crate::features::Language;
use crate::lm::{read_corpus, train_word_lm_with, IncrementalLm, WordLm, WORD_LM_KIND};
use crate::nn::Checkpoint;
use crate::stimuli::{generate_experiment, load_items, write_items, Lexicon, StimulusItem};
use crate::synth::{generate_trees, sentences, SynthConfig};
use crate::syntax::{train_syntax_lm_with, SyntaxLm, SyntaxModel};
use crate::treebank::{
    count_agreement_patterns, read_treebank, to_coord_annotation, write_treebank, EnglishTagger, FeatureTagger,
    LexiconTagger, PatternMode, Tree,
};

pub const CHECKPOINT_FILE: &str = "model.json";
pub const TRAIN_LOG_FILE: &str = "train_log.json";
pub const STIMULI_FILE: &str = "stimuli.csv";
pub const SURPRISAL_FILE: &str = "surprisals.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const PLOT_FILE: &str = "plot.json";
pub const REPORT_FILE: &str = "report.json";
pub const CORPUS_FILE: &str = "corpus.txt";
pub const TREES_FILE: &str = "trees.txt";
pub const TRANSFORMED_FILE: &str = "transformed.txt";

fn lexicon(cfg: &RunConfig) -> Result<Lexicon, PipelineError> {
    match &cfg.stimuli.lexicon {
        Some(p) => Lexicon::read(open_file("lexicon", p)?).map_err(|e| PipelineError::file(p, e)),
        None => Ok(Lexicon::sample(cfg.language)),
    }
}

fn read_trees(what: &'static str, path: &Path) -> Result<Vec<Tree>, PipelineError> {
    read_treebank(open_file(what, path)?).map_err(|e| PipelineError::file(path, e))
}

fn write_trees(path: &Path, trees: &[Tree]) -> Result<(), PipelineError> {
    let mut w = create_file(path)?;
    write_treebank(&mut w, trees).map_err(|e| PipelineError::file(path, e))?;
    std::io::Write::flush(&mut w).map_err(|e| PipelineError::file(path, e))
}

fn write_sentences(path: &Path, sents: &[Vec<String>]) -> Result<(), PipelineError> {
    let text: String = sents.iter().map(|s| s.join(" ") + "\n").collect();
    fs::write(path, text).map_err(|e| PipelineError::file(path, e))
}

fn synthetic_trees(cfg: &RunConfig, sentences: usize) -> Result<Vec<Tree>, PipelineError> {
    if cfg.language != Language::En {
        return Err(PipelineError::Config("the synthetic grammar is English only".into()));
    }
    let synth = SynthConfig {
        sentences,
        seed: cfg.seed()?,
        ..SynthConfig::default()
    };
    generate_trees(&lexicon(cfg)?, &synth).map_err(|e| PipelineError::Failed(e.to_string()))
}

/// Writes `corpus.txt` (tokens) and `trees.txt` (tagged trees) generated
/// from the synthetic grammar.
pub fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<PathBuf, PipelineError> {
    cfg.validate()?;
    let n = cfg.corpus.synthetic.unwrap_or(SynthConfig::default().sentences);
    let trees = synthetic_trees(cfg, n)?;
    let mut run = RunDir::create(out)?;
    let corpus = run.output(CORPUS_FILE);
    write_sentences(&corpus, &sentences(&trees))?;
    let tree_path = run.output(TREES_FILE);
    write_trees(&tree_path, &trees)?;
    run.log(format!("sentences={n}"));
    run.finish("synth", cfg)?;
    Ok(corpus)
}

/// Trains the configured model and returns the checkpoint path. Without
/// `corpus.train` the synthetic grammar supplies the data, which is written
/// next to the checkpoint.
pub fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<PathBuf, PipelineError> {
    cfg.validate()?;
    let format = cfg.corpus_format();
    if cfg.model.kind != ModelKind::WordLm && format == CorpusFormat::Text {
        return Err(PipelineError::Config("syntactic models train on a treebank (`corpus.format = \"trees\"`)".into()));
    }
    let mut run = RunDir::create(out)?;
    let trees = match (&cfg.corpus.train, format) {
        (Some(p), CorpusFormat::Trees) => {
            run.input(p)?;
            Some(read_trees("training treebank", p)?)
        }
        (Some(_), CorpusFormat::Text) => None,
        (None, _) => {
            let n = cfg.corpus.synthetic.unwrap_or(SynthConfig::default().sentences);
            let trees = synthetic_trees(cfg, n)?;
            write_trees(&run.output(TREES_FILE), &trees)?;
            run.log(format!("synthetic_sentences={n}"));
            Some(trees)
        }
    };
    let ckpt = run.output(CHECKPOINT_FILE);
    let log_path = run.output(TRAIN_LOG_FILE);
    let mut epoch_lines = Vec::new();
    match cfg.model.kind {
        ModelKind::WordLm => {
            let corpus = match (&trees, &cfg.corpus.train) {
                (Some(t), _) => sentences(t),
                (None, Some(p)) => {
                    run.input(p)?;
                    read_corpus(p).map_err(|e| PipelineError::file(p, e))?
                }
                (None, None) => unreachable!("a corpus source is always chosen"),
            };
            let wcfg = cfg.word_lm_config()?;
            let (lm, log) = train_word_lm_with(&corpus, &wcfg, |e| {
                epoch_lines.push(format!("epoch={} lr={} perplexity={:.4}", e.epoch, e.lr, e.perplexity))
            })
            .map_err(|e| PipelineError::Failed(format!("training failed: {e}")))?;
            lm.save(&ckpt).map_err(|e| PipelineError::file(&ckpt, e))?;
            write_json(&log_path, &log)?;
        }
        ModelKind::ActionLstm | ModelKind::Rnng => {
            let scfg = cfg.syntax_config()?;
            let trees = trees.expect("syntactic training reads trees");
            let (model, log) = train_syntax_lm_with(&trees, &scfg, |e| {
                epoch_lines.push(format!("epoch={} lr={} perplexity={:.4}", e.epoch, e.lr, e.perplexity))
            })
            .map_err(|e| PipelineError::Failed(format!("training failed: {e}")))?;
            model.save(&ckpt).map_err(|e| PipelineError::file(&ckpt, e))?;
            write_json(&log_path, &log)?;
        }
    }
    for l in epoch_lines {
        run.log(l);
    }
    run.finish("train", cfg)?;
    Ok(ckpt)
}

/// Generates the configured experiments into `stimuli.csv`.
pub fn cmd_gen_stimuli(cfg: &RunConfig, out: &Path) -> Result<PathBuf, PipelineError> {
    cfg.validate()?;
    let lex = lexicon(cfg)?;
    let mut items = Vec::new();
    for id in cfg.experiments()? {
        let generated = generate_experiment(&lex, id, cfg.item_count())
            .map_err(|e| PipelineError::Failed(format!("{id}: {e}")))?;
        items.extend(generated);
    }
    let mut run = RunDir::create(out)?;
    if let Some(p) = &cfg.stimuli.lexicon {
        run.input(p)?;
    }
    let path = run.output(STIMULI_FILE);
    let mut w = create_file(&path)?;
    write_items(&mut w, &items).map_err(|e| PipelineError::file(&path, e))?;
    drop(w);
    run.log(format!("items={}", items.len()));
    run.finish("gen-stimuli", cfg)?;
    Ok(path)
}

fn lm_rows<L: IncrementalLm>(lm: &L, item: &StimulusItem) -> Vec<SurprisalRow> {
    let prefix = item.prefix_tokens();
    let mut state = lm.start();
    for w in &prefix {
        state = lm.advance(&state, lm.token_id(w));
    }
    let mut rows = Vec::new();
    for c in &item.continuations {
        let mut st = state.clone();
        for (k, tok) in c.text.split_whitespace().enumerate() {
            let id = lm.token_id(tok);
            let s = -lm.log2_probs(&st)[id];
            st = lm.advance(&st, id);
            rows.push(row(item, &c.class, prefix.len() + k + 1, tok, s, None));
        }
    }
    rows
}

fn beam_rows<M: SyntaxLm + ?Sized>(
    model: &M,
    item: &StimulusItem,
    cfg: &BeamConfig,
) -> Result<Vec<SurprisalRow>, BeamError> {
    let prefix = item.prefix_tokens();
    let mut dec = BeamDecoder::new(model, *cfg)?;
    for w in &prefix {
        dec.advance(w)?;
    }
    let mut rows = Vec::new();
    for c in &item.continuations {
        let mut d = dec.clone();
        for (k, tok) in c.text.split_whitespace().enumerate() {
            let s = d.advance(tok)?;
            let beam = BeamColumns {
                action_beam: cfg.action_beam,
                word_beam: cfg.word_beam,
                mass_bits: d.log2_mass(),
            };
            rows.push(row(item, &c.class, prefix.len() + k + 1, tok, s, Some(beam)));
        }
    }
    Ok(rows)
}

fn row(item: &StimulusItem, class: &str, position: usize, token: &str, s: f64, beam: Option<BeamColumns>) -> SurprisalRow {
    SurprisalRow {
        experiment: item.experiment.clone(),
        item_id: item.item_id.clone(),
        condition: item.condition.clone(),
        continuation_class: class.to_string(),
        position,
        token: token.to_string(),
        surprisal_bits: s,
        beam,
    }
}

fn score_syntax<M: SyntaxLm + ?Sized>(
    model: &M,
    items: &[StimulusItem],
    cfg: &BeamConfig,
) -> Result<Vec<Vec<SurprisalRow>>, PipelineError> {
    items
        .par_iter()
        .map(|item| {
            beam_rows(model, item, cfg).map_err(|e| {
                PipelineError::Failed(format!(
                    "{} item {} ({}): {e}",
                    item.experiment, item.item_id, item.condition
                ))
            })
        })
        .collect()
}

/// Scores every continuation of every item with the checkpointed model.
/// Items are spread over `workers` threads; row order follows the
/// stimulus file.
pub fn cmd_eval(cfg: &RunConfig, checkpoint: &Path, stimuli: &Path, out: &Path) -> Result<PathBuf, PipelineError> {
    cfg.validate()?;
    if !checkpoint.is_file() {
        return Err(PipelineError::MissingInput {
            what: "checkpoint",
            path: checkpoint.to_path_buf(),
        });
    }
    if !stimuli.is_file() {
        return Err(PipelineError::MissingInput {
            what: "stimulus file",
            path: stimuli.to_path_buf(),
        });
    }
    let mut run = RunDir::create(out)?;
    run.input(checkpoint)?;
    run.input(stimuli)?;
    let ck = Checkpoint::load(checkpoint).map_err(|e| PipelineError::file(checkpoint, e))?;
    let items = load_items(stimuli).map_err(|e| PipelineError::file(stimuli, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| PipelineError::Failed(e.to_string()))?;
    let per_item: Vec<Vec<SurprisalRow>> = if ck.kind == WORD_LM_KIND {
        let lm = WordLm::from_checkpoint(&ck).map_err(|e| PipelineError::file(checkpoint, e))?;
        pool.install(|| items.par_iter().map(|it| lm_rows(&lm, it)).collect())
    } else {
        let model = SyntaxModel::from_checkpoint(&ck).map_err(|e| PipelineError::file(checkpoint, e))?;
        let beam = cfg.beam_config(model.config().limits);
        beam.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        pool.install(|| match &model {
            SyntaxModel::ActionLstm(m) => score_syntax(m, &items, &beam),
            SyntaxModel::Rnng(m) => score_syntax(m, &items, &beam),
        })?
    };
    let rows: Vec<SurprisalRow> = per_item.into_iter().flatten().collect();
    let path = run.output(SURPRISAL_FILE);
    let mut w = create_file(&path)?;
    write_surprisals(&mut w, &rows).map_err(|e| PipelineError::file(&path, e))?;
    drop(w);
    run.log(format!("model_kind={} rows={} workers={}", ck.kind, rows.len(), cfg.workers));
    run.finish("eval", cfg)?;
    Ok(path)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub behavior: Option<Behavior>,
    pub fit: Option<LinearFit>,
    /// Why a label or fit is absent.
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub model: String,
    pub experiments: Vec<ExperimentReport>,
}

fn is_coordination(conditions: &[&str]) -> bool {
    conditions.iter().any(|c| c.contains("_and_"))
}

/// Summaries, plot data and behavioral labels from a surprisal CSV.
/// Returns the summary CSV path.
pub fn cmd_analyze(cfg: &RunConfig, surprisals: &Path, out: &Path) -> Result<PathBuf, PipelineError> {
    let rows = read_surprisals(open_file("surprisal file", surprisals)?).map_err(|e| PipelineError::file(surprisals, e))?;
    let records = expectations_from_surprisals(&rows).map_err(|e| PipelineError::file(surprisals, e))?;
    let summaries = summarize(&records).map_err(|e| PipelineError::file(surprisals, e))?;

    let mut experiments: Vec<&str> = summaries.iter().map(|s| s.experiment.as_str()).collect();
    experiments.dedup();
    let mut reports = Vec::new();
    for exp in experiments {
        let subset: Vec<_> = summaries.iter().filter(|s| s.experiment == exp).cloned().collect();
        let conds: Vec<&str> = subset.iter().map(|s| s.condition.as_str()).collect();
        if !is_coordination(&conds) {
            continue;
        }
        let mut notes = Vec::new();
        let behavior = classify_behavior(&subset).map_err(|e| notes.push(format!("behavior: {e}"))).ok();
        let fit = fit_conjunct_weights(&subset).map_err(|e| notes.push(format!("fit: {e}"))).ok();
        reports.push(ExperimentReport {
            experiment: exp.to_string(),
            behavior,
            fit,
            notes,
        });
    }
    let label = cfg.model.kind.as_str().to_string();
    let plot = PlotData::build(&[(label.clone(), summaries.clone())]);

    let mut run = RunDir::create(out)?;
    run.input(surprisals)?;
    let path = run.output(SUMMARY_FILE);
    let mut w = create_file(&path)?;
    write_summaries(&mut w, &summaries).map_err(|e| PipelineError::file(&path, e))?;
    drop(w);
    write_json(&run.output(PLOT_FILE), &plot)?;
    write_json(
        &run.output(REPORT_FILE),
        &AnalysisReport {
            model: label,
            experiments: reports,
        },
    )?;
    run.log(format!("records={} summaries={}", records.len(), summaries.len()));
    run.finish("analyze", cfg)?;
    Ok(path)
}

/// Agreement-pattern counts of a tagged treebank: `patterns_number.csv`,
/// plus `patterns_gender.csv` for French.
pub fn cmd_corpus_stats(cfg: &RunConfig, treebank: &Path, out: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let trees = read_trees("treebank", treebank)?;
    let lex;
    let tagger: Box<dyn FeatureTagger + Sync> = match cfg.language {
        Language::En => Box::new(EnglishTagger),
        Language::Fr => {
            lex = lexicon(cfg)?;
            Box::new(LexiconTagger::new(&lex, Language::Fr))
        }
    };
    let modes: &[(PatternMode, &str)] = match cfg.language {
        Language::En => &[(PatternMode::Number, "patterns_number.csv")],
        Language::Fr => &[
            (PatternMode::Number, "patterns_number.csv"),
            (PatternMode::Gender, "patterns_gender.csv"),
        ],
    };
    let mut run = RunDir::create(out)?;
    run.input(treebank)?;
    let mut paths = Vec::new();
    for &(mode, name) in modes {
        let table = count_agreement_patterns(&trees, tagger.as_ref(), mode);
        let path = run.output(name);
        table
            .write_csv(create_file(&path)?)
            .map_err(|e| PipelineError::file(&path, e))?;
        run.log(format!("{name}: {} coordinations", table.total()));
        paths.push(path);
    }
    run.finish("corpus-stats", cfg)?;
    Ok(paths)
}

/// Relabels NP coordinations with the explicit conjunct annotation.
pub fn cmd_transform(cfg: &RunConfig, treebank: &Path, out: &Path) -> Result<PathBuf, PipelineError> {
    let trees = read_trees("treebank", treebank)?;
    let transformed: Vec<Tree> = trees.iter().map(to_coord_annotation).collect();
    let changed = trees.iter().zip(&transformed).filter(|(a, b)| a != b).count();
    let mut run = RunDir::create(out)?;
    run.input(treebank)?;
    let path = run.output(TRANSFORMED_FILE);
    write_trees(&path, &transformed)?;
    run.log(format!("trees={} changed={changed}", trees.len()));
    run.finish("transform", cfg)?;
    Ok(path)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunOutputs {
    pub checkpoint: PathBuf,
    pub stimuli: PathBuf,
    pub surprisals: PathBuf,
    pub summary: PathBuf,
}

/// train, gen-stimuli, eval and analyze in subdirectories of `out`.
pub fn cmd_run(cfg: &RunConfig, out: &Path) -> Result<RunOutputs, PipelineError> {
    cfg.validate()?;
    if out.exists() {
        return Err(PipelineError::OutputExists(out.to_path_buf()));
    }
    let checkpoint = cmd_train(cfg, &out.join("train"))?;
    let stimuli = cmd_gen_stimuli(cfg, &out.join("stimuli"))?;
    let surprisals = cmd_eval(cfg, &checkpoint, &stimuli, &out.join("eval"))?;
    let summary = cmd_analyze(cfg, &surprisals, &out.join("analyze"))?;
    Ok(RunOutputs {
        checkpoint,
        stimuli,
        surprisals,
        summary,
    })
}
