use super::{gen_action, log2_sum, BeamError};
use crate::lm::SurprisalProfile;
use crate::syntax::{next_action_log2probs, ActionKind, Hypothesis, ParseLimits, SyntaxLm};

pub const EXACT_HYPOTHESIS_CAP: usize = 1_000_000;

#[derive(Clone, Debug)]
pub struct ExactMarginal {
    pub profile: SurprisalProfile,
    /// `log2 Σ P(h)` over every parse prefix ending in `GEN(w_i)`, for i = 0..n.
    pub log2_mass: Vec<f64>,
    /// Mass of the complete parses of the whole sentence (root closed by
    /// REDUCEs after the last word).
    pub log2_complete: f64,
    /// Action sequences of those complete parses with their log2 probability.
    pub complete: Vec<(Vec<u32>, f64)>,
}

/// Exhaustive expansion of all partial parses under `limits` (the word cap
/// is ignored). Fails once more than [`EXACT_HYPOTHESIS_CAP`] hypotheses
/// have been visited.
pub fn exact_marginal<M, S>(model: &M, sentence: &[S], limits: &ParseLimits) -> Result<ExactMarginal, BeamError>
where
    M: SyntaxLm + ?Sized,
    S: AsRef<str>,
{
    exact_marginal_capped(model, sentence, limits, EXACT_HYPOTHESIS_CAP)
}

pub(crate) fn exact_marginal_capped<M, S>(
    model: &M,
    sentence: &[S],
    limits: &ParseLimits,
    cap: usize,
) -> Result<ExactMarginal, BeamError>
where
    M: SyntaxLm + ?Sized,
    S: AsRef<str>,
{
    if sentence.is_empty() {
        return Err(BeamError::EmptySentence);
    }
    let limits = ParseLimits {
        max_words: None,
        ..*limits
    };
    let mut visited = 0usize;
    let mut layer = vec![Hypothesis::initial(model)];
    let mut log2_mass = vec![0.0];
    let mut tokens = Vec::new();
    for (i, w) in sentence.iter().enumerate() {
        let target = gen_action(model, w.as_ref());
        let mut next = Vec::new();
        let mut stack = layer;
        while let Some(h) = stack.pop() {
            visited += 1;
            if visited > cap {
                return Err(BeamError::TooManyHypotheses { position: i + 1, cap });
            }
            if h.parser.is_terminal() {
                continue;
            }
            let lp = next_action_log2probs(model, &h, &limits)?;
            for (a, &l) in lp.iter().enumerate() {
                if l == f64::NEG_INFINITY {
                    continue;
                }
                match model.space().kind(a) {
                    ActionKind::Gen(_) if a == target => next.push(h.extend(model, a, l, &limits)),
                    ActionKind::Gen(_) => {}
                    _ => stack.push(h.extend(model, a, l, &limits)),
                }
            }
        }
        let mass = log2_sum(next.iter().map(|h| h.logp));
        tokens.push((w.as_ref().to_string(), log2_mass[i] - mass));
        log2_mass.push(mass);
        layer = next;
    }

    let mut complete = Vec::new();
    let mut stack = layer;
    while let Some(h) = stack.pop() {
        if h.parser.is_terminal() {
            complete.push((h.history, h.logp));
            continue;
        }
        let lp = next_action_log2probs(model, &h, &limits)?;
        let r = lp[crate::syntax::ActionSpace::REDUCE];
        if r > f64::NEG_INFINITY {
            stack.push(h.extend(model, crate::syntax::ActionSpace::REDUCE, r, &limits));
        }
    }
    complete.sort_by(|a, b| a.0.cmp(&b.0));
    let total = tokens.iter().map(|t| t.1).sum();
    Ok(ExactMarginal {
        profile: SurprisalProfile { tokens, total },
        log2_mass,
        log2_complete: log2_sum(complete.iter().map(|c| c.1)),
        complete,
    })
}
