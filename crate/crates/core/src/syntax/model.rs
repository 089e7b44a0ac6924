use rand::Rng;

use super::actions::{tree_to_actions, ActionSpace};
use super::parser::{ParseLimits, ParserState};
use super::SyntaxError;
use crate::nn::{log2_softmax, masked_softmax};
use crate::treebank::Tree;

/// A generative model over action sequences, stepped one action at a time.
/// Masking is applied by the caller, so `logits` covers every action.
pub trait SyntaxLm: Sync {
    type State: Clone + Send + Sync;
    fn space(&self) -> &ActionSpace;
    fn initial(&self) -> Self::State;
    fn logits(&self, state: &Self::State) -> Vec<f64>;
    fn advance(&self, state: &Self::State, action: usize) -> Self::State;
}

/// A partial parse: transition state, model state, log2 probability of the
/// actions taken so far and the actions themselves.
#[derive(Clone, Debug)]
pub struct Hypothesis<S> {
    pub parser: ParserState,
    pub state: S,
    pub logp: f64,
    pub history: Vec<u32>,
}

impl<S> Hypothesis<S> {
    pub fn initial<M: SyntaxLm<State = S> + ?Sized>(model: &M) -> Self {
        Hypothesis {
            parser: ParserState::new(),
            state: model.initial(),
            logp: 0.0,
            history: Vec::new(),
        }
    }
}

impl<S: Clone> Hypothesis<S> {
    /// Successor after `action`, whose log2 probability is `lp`.
    pub fn extend<M: SyntaxLm<State = S> + ?Sized>(&self, model: &M, action: usize, lp: f64, limits: &ParseLimits) -> Self {
        let mut parser = self.parser.clone();
        parser
            .apply(model.space().kind(action), limits)
            .expect("successor drawn from the valid-action mask");
        let mut history = self.history.clone();
        history.push(action as u32);
        Hypothesis {
            parser,
            state: model.advance(&self.state, action),
            logp: self.logp + lp,
            history,
        }
    }
}

/// Masked base-2 log probabilities of the next action.
pub fn next_action_log2probs<M: SyntaxLm + ?Sized>(
    model: &M,
    hyp: &Hypothesis<M::State>,
    limits: &ParseLimits,
) -> Result<Vec<f64>, SyntaxError> {
    let mask = hyp.parser.mask(model.space(), limits);
    if !mask.iter().any(|v| *v) {
        return Err(SyntaxError::Terminal);
    }
    Ok(log2_softmax(&model.logits(&hyp.state), Some(&mask)))
}

/// Probability over all actions, zero on invalid ones.
pub fn next_action_distribution<M: SyntaxLm + ?Sized>(
    model: &M,
    hyp: &Hypothesis<M::State>,
    limits: &ParseLimits,
) -> Result<Vec<f64>, SyntaxError> {
    let mask = hyp.parser.mask(model.space(), limits);
    if !mask.iter().any(|v| *v) {
        return Err(SyntaxError::Terminal);
    }
    Ok(masked_softmax(&model.logits(&hyp.state), Some(&mask)))
}

/// Action indices of a (preterminal-stripped) tree.
pub fn encode_tree(space: &ActionSpace, tree: &Tree) -> Result<Vec<usize>, SyntaxError> {
    if tree.is_leaf() {
        return Err(SyntaxError::Malformed {
            position: 0,
            reason: "a bare word is not a tree".into(),
        });
    }
    tree_to_actions(tree).iter().map(|a| space.encode(a)).collect()
}

/// Per-action surprisal (bits) of an action sequence; fails if any action is
/// masked at its step.
pub fn action_surprisals<M: SyntaxLm + ?Sized>(model: &M, actions: &[usize], limits: &ParseLimits) -> Result<Vec<f64>, SyntaxError> {
    let mut hyp = Hypothesis::initial(model);
    let mut out = Vec::with_capacity(actions.len());
    for &a in actions {
        let lp = next_action_log2probs(model, &hyp, limits)?;
        if lp[a] == f64::NEG_INFINITY {
            return Err(SyntaxError::InvalidTransition(format!(
                "{} is not permitted after {} actions",
                model.space().name(a),
                hyp.history.len()
            )));
        }
        out.push(-lp[a]);
        hyp = hyp.extend(model, a, lp[a], limits);
    }
    Ok(out)
}

/// `-log2 P(tree, words)`: summed action surprisals, with the word count
/// fixed to the tree's yield so the closing REDUCEs are forced.
pub fn joint_logprob<M: SyntaxLm + ?Sized>(model: &M, tree: &Tree, limits: &ParseLimits) -> Result<f64, SyntaxError> {
    let actions = encode_tree(model.space(), tree)?;
    let limits = limits.with_words(tree.words().len());
    Ok(action_surprisals(model, &actions, &limits)?.iter().sum())
}

/// Draws one action sequence from the masked model distribution. Without a
/// word cap, sequences stop after 64 words.
pub fn sample_actions<M: SyntaxLm + ?Sized, R: Rng>(model: &M, limits: &ParseLimits, rng: &mut R) -> Vec<usize> {
    let limits = ParseLimits {
        max_words: Some(limits.max_words.unwrap_or(64)),
        ..*limits
    };
    let mut hyp = Hypothesis::initial(model);
    while !hyp.parser.is_terminal() {
        let p = next_action_distribution(model, &hyp, &limits).expect("masking leaves a valid action");
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = p.iter().rposition(|x| *x > 0.0).expect("non-empty support");
        for (a, x) in p.iter().enumerate() {
            acc += x;
            if *x > 0.0 && u < acc {
                pick = a;
                break;
            }
        }
        hyp = hyp.extend(model, pick, p[pick].log2(), &limits);
    }
    hyp.history.iter().map(|a| *a as usize).collect()
}
