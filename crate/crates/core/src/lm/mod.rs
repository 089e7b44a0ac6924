//! Word-level LSTM language model and incremental surprisal.

mod vocab;

pub use vocab::{Vocabulary, EOS, UNK};

use std::fs;
use std::path::Path;

use rand::rngs::SmallRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{
    log2_softmax, Backend, sgd_step, Checkpoint, Eval, Gradients, Graph, LstmLm, LstmState, NnError, Params, StepDecay,
    FORMAT_VERSION,
};

pub const WORD_LM_KIND: &str = "word-lm";

#[derive(Debug, Error)]
pub enum LmError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("vocabulary has {0} types; at least 3 are required")]
    VocabTooSmall(usize),
    #[error("cannot score an empty sentence")]
    EmptySentence,
    #[error("continuation is empty")]
    EmptyContinuation,
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A model that can be stepped one token at a time. `start` has already
/// consumed the start symbol.
pub trait IncrementalLm: Sync {
    type State: Clone + Send;
    fn vocab(&self) -> &Vocabulary;
    fn start(&self) -> Self::State;
    /// Base-2 log probabilities of every vocabulary item as the next token.
    fn log2_probs(&self, state: &Self::State) -> Vec<f64>;
    fn advance(&self, state: &Self::State, token: usize) -> Self::State;
    /// Maps a surface token to its index; unknown words become `<unk>`.
    fn token_id(&self, word: &str) -> usize {
        self.vocab().id(word)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurprisalProfile {
    /// Tokens in order with their surprisal in bits.
    pub tokens: Vec<(String, f64)>,
    pub total: f64,
}

/// Per-token surprisal of `sentence` followed by `<eos>`.
pub fn surprisal_profile<L, S>(lm: &L, sentence: &[S]) -> Result<SurprisalProfile, LmError>
where
    L: IncrementalLm + ?Sized,
    S: AsRef<str>,
{
    if sentence.is_empty() {
        return Err(LmError::EmptySentence);
    }
    let mut st = lm.start();
    let mut tokens = Vec::with_capacity(sentence.len() + 1);
    let ids = sentence
        .iter()
        .map(|w| (w.as_ref().to_string(), lm.token_id(w.as_ref())))
        .chain(std::iter::once((EOS.to_string(), Vocabulary::EOS_ID)));
    for (word, id) in ids {
        let lp = lm.log2_probs(&st);
        tokens.push((word, -lp[id]));
        st = lm.advance(&st, id);
    }
    let total = tokens.iter().map(|(_, s)| s).sum();
    Ok(SurprisalProfile { tokens, total })
}

/// Total surprisal (bits) of `continuation` given `prefix`.
pub fn continuation_surprisal<L, S, T>(lm: &L, prefix: &[S], continuation: &[T]) -> Result<f64, LmError>
where
    L: IncrementalLm + ?Sized,
    S: AsRef<str>,
    T: AsRef<str>,
{
    if continuation.is_empty() {
        return Err(LmError::EmptyContinuation);
    }
    let mut st = lm.start();
    for w in prefix {
        st = lm.advance(&st, lm.token_id(w.as_ref()));
    }
    let mut total = 0.0;
    for w in continuation {
        let id = lm.token_id(w.as_ref());
        total -= lm.log2_probs(&st)[id];
        st = lm.advance(&st, id);
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WordLmConfig {
    pub dim: usize,
    pub layers: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub decay_after: usize,
    pub clip: f64,
    pub min_count: usize,
    pub lowercase: bool,
    pub seed: u64,
}

impl Default for WordLmConfig {
    fn default() -> Self {
        WordLmConfig {
            dim: 64,
            layers: 2,
            epochs: 4,
            batch_size: 16,
            lr: 1.0,
            lr_decay: 0.5,
            decay_after: 2,
            clip: 5.0,
            min_count: 2,
            lowercase: false,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    /// Running perplexity over the epoch's training updates.
    pub perplexity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Perplexity of the evaluation slice before any update.
    pub initial_perplexity: f64,
    pub epochs: Vec<EpochLog>,
    /// Perplexity of the same slice after the last epoch.
    pub final_perplexity: f64,
}

/// Sentences used for the before/after perplexity comparison.
const EVAL_SLICE: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct WordLm {
    pub config: WordLmConfig,
    pub vocab: Vocabulary,
    pub params: Params,
    net: LstmLm,
}

impl WordLm {
    /// Freshly initialized model.
    pub fn new(vocab: Vocabulary, config: WordLmConfig) -> WordLm {
        let mut rng = SmallRng::seed_from_u64(config.seed);
        let mut params = Params::new();
        let v = vocab.len();
        let net = LstmLm::new(&mut params, "lm", v, v, config.dim, config.layers, &mut rng);
        WordLm {
            config,
            vocab,
            params,
            net,
        }
    }

    fn normalize<'s>(&self, w: &'s str) -> std::borrow::Cow<'s, str> {
        if self.config.lowercase {
            w.to_lowercase().into()
        } else {
            w.into()
        }
    }

    pub fn ids<S: AsRef<str>>(&self, sentence: &[S]) -> Vec<usize> {
        sentence.iter().map(|w| self.token_id(w.as_ref())).collect()
    }

    /// Negative log2 probability of the sentence plus `<eos>`, computed in a
    /// single forward pass of summed cross-entropies.
    pub fn sentence_bits<S: AsRef<str>>(&self, sentence: &[S]) -> f64 {
        let (inputs, targets) = io_pairs(&self.ids(sentence));
        let mut e = Eval::new(&self.params);
        self.net
            .sequence_losses(&mut e, &inputs, &targets, None)
            .iter()
            .map(|l| l[0])
            .sum()
    }

    /// Gradient of [`WordLm::sentence_bits`] with respect to every parameter.
    pub fn sentence_gradients<S: AsRef<str>>(&self, sentence: &[S]) -> Gradients {
        let (inputs, targets) = io_pairs(&self.ids(sentence));
        let mut g = Graph::new(&self.params);
        let losses = self.net.sequence_losses(&mut g, &inputs, &targets, None);
        let mut grads = Gradients::zeros_like(&self.params);
        g.backward(&losses, &mut grads);
        grads
    }

    /// Per-token perplexity including `<eos>`.
    pub fn perplexity<S: AsRef<str>>(&self, corpus: &[Vec<S>]) -> f64 {
        let mut bits = 0.0;
        let mut n = 0usize;
        for s in corpus {
            bits += self.sentence_bits(s);
            n += s.len() + 1;
        }
        (bits / n.max(1) as f64).exp2()
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format_version: FORMAT_VERSION,
            kind: WORD_LM_KIND.into(),
            config: serde_json::to_value(&self.config).expect("config serializes"),
            vocab: self.vocab.words().to_vec(),
            labels: Vec::new(),
            params: self.params.to_named(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<WordLm, LmError> {
        ck.expect_kind(&[WORD_LM_KIND])?;
        let config: WordLmConfig = serde_json::from_value(ck.config.clone()).map_err(NnError::from)?;
        let mut lm = WordLm::new(Vocabulary::from(ck.vocab.clone()), config);
        lm.params.load_named(&ck.params)?;
        Ok(lm)
    }

    pub fn save(&self, path: &Path) -> Result<(), LmError> {
        Ok(self.to_checkpoint().save(path)?)
    }

    pub fn load(path: &Path) -> Result<WordLm, LmError> {
        WordLm::from_checkpoint(&Checkpoint::load(path)?)
    }
}

/// Inputs `<eos> w1 .. wn` paired with targets `w1 .. wn <eos>`.
fn io_pairs(ids: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut inputs = Vec::with_capacity(ids.len() + 1);
    inputs.push(Vocabulary::EOS_ID);
    inputs.extend_from_slice(ids);
    let mut targets = ids.to_vec();
    targets.push(Vocabulary::EOS_ID);
    (inputs, targets)
}

impl IncrementalLm for WordLm {
    type State = LstmState;

    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn start(&self) -> LstmState {
        let mut e = Eval::new(&self.params);
        let st = self.net.start(&mut e);
        self.net.step(&mut e, &st, Vocabulary::EOS_ID)
    }

    fn log2_probs(&self, state: &LstmState) -> Vec<f64> {
        let mut e = Eval::new(&self.params);
        let z = self.net.logits(&mut e, state);
        log2_softmax(&z, None)
    }

    fn advance(&self, state: &LstmState, token: usize) -> LstmState {
        let mut e = Eval::new(&self.params);
        self.net.step(&mut e, state, token)
    }

    fn token_id(&self, word: &str) -> usize {
        self.vocab.id(&self.normalize(word))
    }
}

pub fn train_word_lm<S: AsRef<str>>(corpus: &[Vec<S>], config: &WordLmConfig) -> Result<(WordLm, TrainLog), LmError> {
    train_word_lm_with(corpus, config, |_| {})
}

/// Trains with minibatch SGD; `on_epoch` observes each epoch's log entry.
/// Single-threaded and fully determined by `config.seed`.
pub fn train_word_lm_with<S, F>(corpus: &[Vec<S>], config: &WordLmConfig, mut on_epoch: F) -> Result<(WordLm, TrainLog), LmError>
where
    S: AsRef<str>,
    F: FnMut(&EpochLog),
{
    let corpus: Vec<Vec<String>> = corpus
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.iter()
                .map(|w| if config.lowercase { w.as_ref().to_lowercase() } else { w.as_ref().to_string() })
                .collect()
        })
        .collect();
    if corpus.is_empty() {
        return Err(LmError::EmptyCorpus);
    }
    let vocab = Vocabulary::build(corpus.iter().map(Vec::as_slice), config.min_count);
    if vocab.len() < 3 {
        return Err(LmError::VocabTooSmall(vocab.len()));
    }
    let mut lm = WordLm::new(vocab, config.clone());
    let data: Vec<(Vec<usize>, Vec<usize>)> = corpus.iter().map(|s| io_pairs(&lm.ids(s))).collect();
    let eval_slice = &corpus[..corpus.len().min(EVAL_SLICE)];
    let initial_perplexity = lm.perplexity(eval_slice);

    let schedule = StepDecay {
        lr: config.lr,
        decay: config.lr_decay,
        decay_after: config.decay_after,
    };
    let mut rng = SmallRng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grads = Gradients::zeros_like(&lm.params);
    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let lr = schedule.rate(epoch);
        let (mut bits, mut tokens) = (0.0, 0usize);
        for batch in order.chunks(config.batch_size.max(1)) {
            grads.clear();
            for &i in batch {
                let (inputs, targets) = &data[i];
                let mut g = Graph::new(&lm.params);
                let losses = lm.net.sequence_losses(&mut g, inputs, targets, None);
                bits += losses.iter().map(|l| g.value(l)[0]).sum::<f64>();
                tokens += targets.len();
                g.backward(&losses, &mut grads);
            }
            grads.scale(1.0 / batch.len() as f64);
            sgd_step(&mut lm.params, &grads, lr, config.clip)?;
        }
        let log = EpochLog {
            epoch: epoch + 1,
            lr,
            perplexity: (bits / tokens as f64).exp2(),
        };
        on_epoch(&log);
        epochs.push(log);
    }
    let final_perplexity = lm.perplexity(eval_slice);
    Ok((
        lm,
        TrainLog {
            initial_perplexity,
            epochs,
            final_perplexity,
        },
    ))
}

/// One whitespace-tokenized sentence per non-blank line.
pub fn read_corpus(path: &Path) -> Result<Vec<Vec<String>>, LmError> {
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(|l| l.split_whitespace().map(String::from).collect::<Vec<_>>())
        .filter(|s| !s.is_empty())
        .collect())
}
