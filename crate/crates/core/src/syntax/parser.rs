use serde::{Deserialize, Serialize};

use super::actions::{ActionKind, ActionSpace};
use super::SyntaxError;

/// Bounds on the transition system. `max_structural` caps consecutive
/// NT/REDUCE actions between two GENs; `max_words`, when set, forbids
/// generating past that many words and lets the closing REDUCEs through.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseLimits {
    pub max_structural: usize,
    pub max_depth: usize,
    pub max_words: Option<usize>,
}

impl Default for ParseLimits {
    fn default() -> Self {
        ParseLimits {
            max_structural: 8,
            max_depth: 12,
            max_words: None,
        }
    }
}

impl ParseLimits {
    pub fn with_words(self, n: usize) -> Self {
        ParseLimits {
            max_words: Some(n),
            ..self
        }
    }
}

/// Transition-system state independent of any model: the open constituents
/// (label, completed children) and counters that drive masking.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ParserState {
    open: Vec<(usize, usize)>,
    started: bool,
    pub words: usize,
    /// Structural actions since the last GEN.
    pub run: usize,
}

impl Default for ParserState {
    fn default() -> Self {
        Self::new()
    }
}

impl ParserState {
    pub fn new() -> Self {
        ParserState {
            open: Vec::new(),
            started: false,
            words: 0,
            run: 0,
        }
    }

    pub fn depth(&self) -> usize {
        self.open.len()
    }

    /// Labels of the open constituents, outermost first.
    pub fn open_labels(&self) -> impl Iterator<Item = usize> + '_ {
        self.open.iter().map(|(l, _)| *l)
    }

    /// Children of the innermost open constituent.
    pub fn top_children(&self) -> Option<usize> {
        self.open.last().map(|(_, k)| *k)
    }

    /// The root has been closed; nothing more can happen.
    pub fn is_terminal(&self) -> bool {
        self.started && self.open.is_empty()
    }

    fn below_word_cap(&self, limits: &ParseLimits) -> bool {
        limits.max_words.is_none_or(|n| self.words < n)
    }

    pub fn can_gen(&self, limits: &ParseLimits) -> bool {
        !self.open.is_empty() && self.below_word_cap(limits)
    }

    pub fn can_nt(&self, limits: &ParseLimits) -> bool {
        !self.is_terminal()
            && self.open.len() < limits.max_depth
            && self.run < limits.max_structural
            && self.below_word_cap(limits)
    }

    pub fn can_reduce(&self, limits: &ParseLimits) -> bool {
        // with a word cap the root may only close once the cap is reached
        let root_early = self.open.len() == 1 && limits.max_words.is_some_and(|n| self.words < n);
        matches!(self.open.last(), Some((_, k)) if *k > 0)
            && !root_early
            && (self.run < limits.max_structural || !self.can_gen(limits))
    }

    /// Validity of every action in `space`.
    pub fn mask(&self, space: &ActionSpace, limits: &ParseLimits) -> Vec<bool> {
        let mut m = vec![false; space.len()];
        m[ActionSpace::REDUCE] = self.can_reduce(limits);
        if self.can_nt(limits) {
            m[1..space.first_gen()].fill(true);
        }
        if self.can_gen(limits) {
            m[space.first_gen()..].fill(true);
        }
        m
    }

    pub fn is_valid(&self, kind: ActionKind, limits: &ParseLimits) -> bool {
        match kind {
            ActionKind::Reduce => self.can_reduce(limits),
            ActionKind::Nt(_) => self.can_nt(limits),
            ActionKind::Gen(_) => self.can_gen(limits),
        }
    }

    pub fn apply(&mut self, kind: ActionKind, limits: &ParseLimits) -> Result<(), SyntaxError> {
        if !self.is_valid(kind, limits) {
            return Err(SyntaxError::InvalidTransition(format!(
                "{kind:?} at depth {} after {} words and {} structural actions",
                self.depth(),
                self.words,
                self.run
            )));
        }
        match kind {
            ActionKind::Nt(l) => {
                self.open.push((l, 0));
                self.started = true;
                self.run += 1;
            }
            ActionKind::Gen(_) => {
                self.open.last_mut().expect("checked").1 += 1;
                self.words += 1;
                self.run = 0;
            }
            ActionKind::Reduce => {
                self.open.pop();
                if let Some(parent) = self.open.last_mut() {
                    parent.1 += 1;
                }
                self.run += 1;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::Vocabulary;

    fn space() -> ActionSpace {
        ActionSpace::new(vec!["S".into(), "NP".into()], Vocabulary::from_words(["a".to_string()]))
    }

    #[test]
    fn initial_state_allows_only_nt() {
        let m = ParserState::new().mask(&space(), &ParseLimits::default());
        assert_eq!(m, [false, true, true, false, false]);
    }

    #[test]
    fn exhausted_words_force_reduce() {
        let lim = ParseLimits::default().with_words(1);
        let mut st = ParserState::new();
        st.apply(ActionKind::Nt(0), &lim).unwrap();
        st.apply(ActionKind::Gen(2), &lim).unwrap();
        assert_eq!(st.mask(&space(), &lim), [true, false, false, false, false]);
        st.apply(ActionKind::Reduce, &lim).unwrap();
        assert!(st.is_terminal());
        assert!(st.mask(&space(), &lim).iter().all(|v| !v));
    }

    #[test]
    fn structural_budget() {
        let lim = ParseLimits {
            max_structural: 2,
            max_depth: 12,
            max_words: None,
        };
        let mut st = ParserState::new();
        st.apply(ActionKind::Nt(0), &lim).unwrap();
        st.apply(ActionKind::Nt(1), &lim).unwrap();
        assert!(!st.can_nt(&lim));
        assert!(!st.can_reduce(&lim));
        assert!(st.can_gen(&lim));
        assert!(st.apply(ActionKind::Nt(1), &lim).is_err());
    }

    #[test]
    fn depth_cap() {
        let lim = ParseLimits {
            max_structural: 8,
            max_depth: 2,
            max_words: None,
        };
        let mut st = ParserState::new();
        st.apply(ActionKind::Nt(0), &lim).unwrap();
        st.apply(ActionKind::Nt(0), &lim).unwrap();
        assert!(!st.can_nt(&lim));
    }

    #[test]
    fn root_closes_only_at_the_word_cap() {
        let capped = ParseLimits::default().with_words(2);
        let open = ParseLimits::default();
        let mut st = ParserState::new();
        st.apply(ActionKind::Nt(0), &capped).unwrap();
        st.apply(ActionKind::Gen(2), &capped).unwrap();
        assert!(!st.can_reduce(&capped));
        assert!(st.can_reduce(&open));
        st.apply(ActionKind::Nt(1), &capped).unwrap();
        st.apply(ActionKind::Gen(2), &capped).unwrap();
        assert!(st.can_reduce(&capped));
        st.apply(ActionKind::Reduce, &capped).unwrap();
        assert_eq!(st.mask(&space(), &capped), [true, false, false, false, false]);
    }
}
