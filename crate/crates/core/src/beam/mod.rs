//! Word-synchronous beam search over partial parses, and an exhaustive
//! enumeration used as its reference.

mod exact;

pub use exact::{exact_marginal, ExactMarginal, EXACT_HYPOTHESIS_CAP};

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lm::{SurprisalProfile, Vocabulary};
use crate::nn::log_sum_exp;
use crate::syntax::{next_action_log2probs, ActionKind, Hypothesis, ParseLimits, SyntaxError, SyntaxLm};

#[derive(Debug, Error)]
pub enum BeamError {
    #[error("invalid beam configuration: {0}")]
    Config(String),
    #[error("beam died at word {position} (`{word}`): no hypothesis can generate it")]
    DeadBeam { position: usize, word: String },
    #[error("exact enumeration exceeded {cap} hypotheses at word {position}")]
    TooManyHypotheses { position: usize, cap: usize },
    #[error("empty sentence")]
    EmptySentence,
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BeamConfig {
    pub action_beam: usize,
    pub word_beam: usize,
    pub fast_track: usize,
    /// Consecutive structural actions allowed between words, and the depth cap.
    pub limits: ParseLimits,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            action_beam: 100,
            word_beam: 10,
            fast_track: 5,
            limits: ParseLimits::default(),
        }
    }
}

impl BeamConfig {
    pub fn validate(&self) -> Result<(), BeamError> {
        if self.word_beam == 0 || self.word_beam > self.action_beam {
            return Err(BeamError::Config(format!(
                "word beam {} must be in 1..={}",
                self.word_beam, self.action_beam
            )));
        }
        if self.fast_track > self.word_beam {
            return Err(BeamError::Config(format!(
                "fast-track count {} exceeds the word beam {}",
                self.fast_track, self.word_beam
            )));
        }
        if self.limits.max_structural == 0 {
            return Err(BeamError::Config("structural budget must be at least 1".into()));
        }
        Ok(())
    }

    /// Decoding never fixes the sentence length.
    fn decode_limits(&self) -> ParseLimits {
        ParseLimits {
            max_words: None,
            ..self.limits
        }
    }
}

/// Prefix masses `log2 Σ P(h)` over the word-level beams `B_0 .. B_n`, and
/// the last beam itself.
#[derive(Clone, Debug)]
pub struct PrefixMass<S> {
    pub log2_mass: Vec<f64>,
    pub beam: Vec<Hypothesis<S>>,
}

#[derive(Clone, Debug)]
pub struct BeamOutput<S> {
    pub profile: SurprisalProfile,
    pub prefix: PrefixMass<S>,
}

/// Higher probability first, then the lexicographically smaller history.
pub(crate) fn rank(a_lp: f64, a_hist: &[u32], b_lp: f64, b_hist: &[u32]) -> Ordering {
    b_lp.total_cmp(&a_lp).then_with(|| a_hist.cmp(b_hist))
}

pub(crate) fn log2_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let nats: Vec<f64> = xs.into_iter().map(|x| x * std::f64::consts::LN_2).collect();
    log_sum_exp(&nats) / std::f64::consts::LN_2
}

/// The GEN action for `word`; `<eos>` is not generable and reads as `<unk>`.
pub(crate) fn gen_action<M: SyntaxLm + ?Sized>(model: &M, word: &str) -> usize {
    let space = model.space();
    let id = match space.vocab().id(word) {
        Vocabulary::EOS_ID => Vocabulary::UNK_ID,
        id => id,
    };
    space.gen(id)
}

/// Incremental decoder: feed words one at a time and read each surprisal.
pub struct BeamDecoder<'m, M: SyntaxLm + ?Sized> {
    model: &'m M,
    cfg: BeamConfig,
    limits: ParseLimits,
    beam: Vec<Hypothesis<M::State>>,
    log2_mass: Vec<f64>,
}

// a derived impl would demand `M: Clone`
impl<M: SyntaxLm + ?Sized> Clone for BeamDecoder<'_, M> {
    fn clone(&self) -> Self {
        BeamDecoder {
            model: self.model,
            cfg: self.cfg,
            limits: self.limits,
            beam: self.beam.clone(),
            log2_mass: self.log2_mass.clone(),
        }
    }
}

struct Candidate {
    parent: usize,
    action: usize,
    step: f64,
    logp: f64,
    history: Vec<u32>,
}

impl<'m, M: SyntaxLm + ?Sized> BeamDecoder<'m, M> {
    pub fn new(model: &'m M, cfg: BeamConfig) -> Result<Self, BeamError> {
        cfg.validate()?;
        Ok(BeamDecoder {
            model,
            cfg,
            limits: cfg.decode_limits(),
            beam: vec![Hypothesis::initial(model)],
            log2_mass: vec![0.0],
        })
    }

    pub fn words_read(&self) -> usize {
        self.log2_mass.len() - 1
    }

    /// `log2` mass of the current word-level beam.
    pub fn log2_mass(&self) -> f64 {
        *self.log2_mass.last().expect("B_0 is present")
    }

    pub fn beam(&self) -> &[Hypothesis<M::State>] {
        &self.beam
    }

    /// Reads the next word and returns its surprisal in bits.
    pub fn advance(&mut self, word: &str) -> Result<f64, BeamError> {
        let target = gen_action(self.model, word);
        let mut frontier = std::mem::take(&mut self.beam);
        let mut arrived: Vec<Hypothesis<M::State>> = Vec::new();
        while !frontier.is_empty() {
            let mut structural = Vec::new();
            let mut generating = Vec::new();
            for (i, h) in frontier.iter().enumerate() {
                if h.parser.is_terminal() {
                    continue;
                }
                let lp = next_action_log2probs(self.model, h, &self.limits)?;
                for (a, &l) in lp.iter().enumerate() {
                    if l == f64::NEG_INFINITY {
                        continue;
                    }
                    let is_gen = matches!(self.model.space().kind(a), ActionKind::Gen(_));
                    if is_gen && a != target {
                        continue;
                    }
                    let mut history = h.history.clone();
                    history.push(a as u32);
                    let c = Candidate {
                        parent: i,
                        action: a,
                        step: l,
                        logp: h.logp + l,
                        history,
                    };
                    if is_gen {
                        generating.push(c);
                    } else {
                        structural.push(c);
                    }
                }
            }
            let by_rank = |a: &Candidate, b: &Candidate| rank(a.logp, &a.history, b.logp, &b.history);
            generating.sort_by(by_rank);
            let mut pool: Vec<(bool, Candidate)> = Vec::with_capacity(structural.len() + generating.len());
            let fast = generating.len().min(self.cfg.fast_track);
            let mut rest: Vec<(bool, Candidate)> = Vec::new();
            for (k, c) in generating.into_iter().enumerate() {
                if k < fast {
                    pool.push((true, c));
                } else {
                    rest.push((true, c));
                }
            }
            rest.extend(structural.into_iter().map(|c| (false, c)));
            rest.sort_by(|a, b| by_rank(&a.1, &b.1));
            let room = self.cfg.action_beam.saturating_sub(fast);
            pool.extend(rest.into_iter().take(room));

            let mut next = Vec::new();
            for (is_gen, c) in pool {
                let h = frontier[c.parent].extend(self.model, c.action, c.step, &self.limits);
                if is_gen {
                    arrived.push(h);
                } else {
                    next.push(h);
                }
            }
            frontier = next;
        }
        if arrived.is_empty() {
            return Err(BeamError::DeadBeam {
                position: self.words_read() + 1,
                word: word.to_string(),
            });
        }
        arrived.sort_by(|a, b| rank(a.logp, &a.history, b.logp, &b.history));
        arrived.truncate(self.cfg.word_beam);
        let mass = log2_sum(arrived.iter().map(|h| h.logp));
        let prev = *self.log2_mass.last().expect("B_0 is present");
        self.log2_mass.push(mass);
        self.beam = arrived;
        Ok(prev - mass)
    }

    pub fn finish(self) -> PrefixMass<M::State> {
        PrefixMass {
            log2_mass: self.log2_mass,
            beam: self.beam,
        }
    }
}

/// Per-word surprisal of `sentence` by word-synchronous beam search. The
/// change in prefix mass between two word boundaries, structural actions
/// included, is charged to the later word.
pub fn word_sync_beam<M, S>(model: &M, sentence: &[S], cfg: &BeamConfig) -> Result<BeamOutput<M::State>, BeamError>
where
    M: SyntaxLm + ?Sized,
    S: AsRef<str>,
{
    if sentence.is_empty() {
        return Err(BeamError::EmptySentence);
    }
    let mut dec = BeamDecoder::new(model, *cfg)?;
    let mut tokens = Vec::with_capacity(sentence.len());
    for w in sentence {
        let s = dec.advance(w.as_ref())?;
        tokens.push((w.as_ref().to_string(), s));
    }
    let total = tokens.iter().map(|t| t.1).sum();
    Ok(BeamOutput {
        profile: SurprisalProfile { tokens, total },
        prefix: dec.finish(),
    })
}

/// Total beam surprisal of `continuation` after `prefix`.
pub fn beam_continuation_surprisal<M, S, T>(
    model: &M,
    prefix: &[S],
    continuation: &[T],
    cfg: &BeamConfig,
) -> Result<f64, BeamError>
where
    M: SyntaxLm + ?Sized,
    S: AsRef<str>,
    T: AsRef<str>,
{
    if continuation.is_empty() {
        return Err(BeamError::EmptySentence);
    }
    let mut dec = BeamDecoder::new(model, *cfg)?;
    for w in prefix {
        dec.advance(w.as_ref())?;
    }
    let mut total = 0.0;
    for w in continuation {
        total += dec.advance(w.as_ref())?;
    }
    Ok(total)
}
