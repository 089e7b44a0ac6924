use std::path::Path;

use rand::rngs::SmallRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::action_lstm::ActionLstm;
use super::actions::ActionSpace;
use super::model::encode_tree;
use super::parser::ParseLimits;
use super::rnng::Rnng;
use super::SyntaxError;
use crate::lm::{EpochLog, Vocabulary};
use crate::nn::{sgd_step, Backend, Checkpoint, Eval, Gradients, Graph, NnError, Params, StepDecay, FORMAT_VERSION};
use crate::treebank::Tree;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "action-lstm")]
    ActionLstm,
    #[serde(rename = "rnng")]
    Rnng,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::ActionLstm => "action-lstm",
            Variant::Rnng => "rnng",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "action-lstm" => Ok(Variant::ActionLstm),
            "rnng" => Ok(Variant::Rnng),
            other => Err(format!("unknown syntactic model `{other}` (expected action-lstm or rnng)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntaxConfig {
    pub variant: Variant,
    pub dim: usize,
    pub layers: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub decay_after: usize,
    pub clip: f64,
    pub min_count: usize,
    pub seed: u64,
    pub limits: ParseLimits,
    /// Keep POS preterminals as NT(tag) GEN(word) REDUCE instead of stripping them.
    pub keep_preterminals: bool,
}

impl Default for SyntaxConfig {
    fn default() -> Self {
        SyntaxConfig {
            variant: Variant::Rnng,
            dim: 32,
            layers: 2,
            epochs: 10,
            batch_size: 8,
            lr: 0.5,
            lr_decay: 0.5,
            decay_after: 8,
            clip: 5.0,
            min_count: 1,
            seed: 1,
            limits: ParseLimits::default(),
            keep_preterminals: false,
        }
    }
}

/// Models whose loss over a gold action sequence can be built on any backend.
pub trait ActionScorer {
    fn params(&self) -> &Params;
    fn params_mut(&mut self) -> &mut Params;
    /// One cross-entropy node per non-forced action.
    fn losses<B: Backend>(&self, b: &mut B, actions: &[usize], limits: &ParseLimits) -> Result<Vec<B::V>, SyntaxError>;

    fn sequence_bits(&self, actions: &[usize], limits: &ParseLimits) -> Result<f64, SyntaxError> {
        let mut e = Eval::new(self.params());
        Ok(self.losses(&mut e, actions, limits)?.iter().map(|l| l[0]).sum())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntaxTrainLog {
    pub trees_used: usize,
    /// Trees that cannot be built within the parse limits.
    pub trees_skipped: usize,
    pub epochs: Vec<EpochLog>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SyntaxModel {
    ActionLstm(ActionLstm),
    Rnng(Rnng),
}

impl SyntaxModel {
    pub fn new(space: ActionSpace, config: SyntaxConfig) -> SyntaxModel {
        match config.variant {
            Variant::ActionLstm => SyntaxModel::ActionLstm(ActionLstm::new(space, config)),
            Variant::Rnng => SyntaxModel::Rnng(Rnng::new(space, config)),
        }
    }

    pub fn config(&self) -> &SyntaxConfig {
        match self {
            SyntaxModel::ActionLstm(m) => &m.config,
            SyntaxModel::Rnng(m) => &m.config,
        }
    }

    pub fn space(&self) -> &ActionSpace {
        use super::model::SyntaxLm;
        match self {
            SyntaxModel::ActionLstm(m) => m.space(),
            SyntaxModel::Rnng(m) => m.space(),
        }
    }

    pub fn params(&self) -> &Params {
        match self {
            SyntaxModel::ActionLstm(m) => &m.params,
            SyntaxModel::Rnng(m) => &m.params,
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let config = self.config();
        Checkpoint {
            format_version: FORMAT_VERSION,
            kind: config.variant.as_str().into(),
            config: serde_json::to_value(config).expect("config serializes"),
            vocab: self.space().vocab().words().to_vec(),
            labels: self.space().labels().to_vec(),
            params: self.params().to_named(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<SyntaxModel, SyntaxError> {
        ck.expect_kind(&[Variant::ActionLstm.as_str(), Variant::Rnng.as_str()])?;
        let config: SyntaxConfig = serde_json::from_value(ck.config.clone()).map_err(NnError::from)?;
        if config.variant.as_str() != ck.kind {
            return Err(NnError::Checkpoint(format!("kind `{}` disagrees with config variant", ck.kind)).into());
        }
        let space = ActionSpace::new(ck.labels.clone(), Vocabulary::from(ck.vocab.clone()));
        let mut model = SyntaxModel::new(space, config);
        match &mut model {
            SyntaxModel::ActionLstm(m) => m.params.load_named(&ck.params)?,
            SyntaxModel::Rnng(m) => m.params.load_named(&ck.params)?,
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), SyntaxError> {
        Ok(self.to_checkpoint().save(path)?)
    }

    pub fn load(path: &Path) -> Result<SyntaxModel, SyntaxError> {
        SyntaxModel::from_checkpoint(&Checkpoint::load(path)?)
    }
}

/// Trees as the models see them: preterminals stripped unless kept.
pub fn prepare_bank(bank: &[Tree], keep_preterminals: bool) -> Vec<Tree> {
    bank.iter()
        .filter(|t| !t.is_leaf())
        .map(|t| if keep_preterminals { t.clone() } else { t.strip_preterminals() })
        .filter(|t| !t.is_leaf())
        .collect()
}

/// Labels sorted lexically; vocabulary by frequency with `min_count`.
pub fn build_space(trees: &[Tree], min_count: usize) -> ActionSpace {
    let mut labels: Vec<String> = trees
        .iter()
        .flat_map(|t| t.iter().filter_map(|n| n.label().map(str::to_string)))
        .collect();
    labels.sort();
    labels.dedup();
    let sents: Vec<Vec<&str>> = trees.iter().map(|t| t.words()).collect();
    ActionSpace::new(labels, Vocabulary::build(sents.iter().map(Vec::as_slice), min_count))
}

pub fn train_syntax_lm(bank: &[Tree], config: &SyntaxConfig) -> Result<(SyntaxModel, SyntaxTrainLog), SyntaxError> {
    train_syntax_lm_with(bank, config, |_| {})
}

pub fn train_syntax_lm_with<F: FnMut(&EpochLog)>(
    bank: &[Tree],
    config: &SyntaxConfig,
    on_epoch: F,
) -> Result<(SyntaxModel, SyntaxTrainLog), SyntaxError> {
    let trees = prepare_bank(bank, config.keep_preterminals);
    if trees.is_empty() {
        return Err(SyntaxError::EmptyTreebank);
    }
    let space = build_space(&trees, config.min_count);
    let mut model = SyntaxModel::new(space, config.clone());
    let log = match &mut model {
        SyntaxModel::ActionLstm(m) => fit(m, &trees, config, on_epoch)?,
        SyntaxModel::Rnng(m) => fit(m, &trees, config, on_epoch)?,
    };
    Ok((model, log))
}

fn fit<M, F>(model: &mut M, trees: &[Tree], config: &SyntaxConfig, mut on_epoch: F) -> Result<SyntaxTrainLog, SyntaxError>
where
    M: ActionScorer + super::model::SyntaxLm,
    F: FnMut(&EpochLog),
{
    let mut data = Vec::with_capacity(trees.len());
    let mut skipped = 0;
    for t in trees {
        let actions = encode_tree(model.space(), t)?;
        let limits = config.limits.with_words(t.words().len());
        match model.sequence_bits(&actions, &limits) {
            Ok(_) => data.push((actions, limits)),
            Err(SyntaxError::InvalidTransition(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if data.is_empty() {
        return Err(SyntaxError::EmptyTreebank);
    }
    let schedule = StepDecay {
        lr: config.lr,
        decay: config.lr_decay,
        decay_after: config.decay_after,
    };
    let mut rng = SmallRng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grads = Gradients::zeros_like(model.params());
    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let lr = schedule.rate(epoch);
        let (mut bits, mut n) = (0.0, 0usize);
        for batch in order.chunks(config.batch_size.max(1)) {
            grads.clear();
            for &i in batch {
                let (actions, limits) = &data[i];
                let mut g = Graph::new(model.params());
                let losses = model.losses(&mut g, actions, limits)?;
                bits += losses.iter().map(|l| g.value(l)[0]).sum::<f64>();
                n += actions.len();
                g.backward(&losses, &mut grads);
            }
            grads.scale(1.0 / batch.len() as f64);
            sgd_step(model.params_mut(), &grads, lr, config.clip)?;
        }
        let log = EpochLog {
            epoch: epoch + 1,
            lr,
            perplexity: (bits / n as f64).exp2(),
        };
        on_epoch(&log);
        epochs.push(log);
    }
    Ok(SyntaxTrainLog {
        trees_used: data.len(),
        trees_skipped: skipped,
        epochs,
    })
}
