use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::SyntaxError;
use crate::lm::Vocabulary;
use crate::treebank::Tree;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Nt(String),
    Gen(String),
    Reduce,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Nt(l) => write!(f, "NT({l})"),
            Action::Gen(w) => write!(f, "GEN({w})"),
            Action::Reduce => f.write_str("REDUCE"),
        }
    }
}

/// Depth-first linearization: NT on entering a node, GEN at each leaf,
/// REDUCE on leaving a node.
pub fn tree_to_actions(tree: &Tree) -> Vec<Action> {
    fn go(t: &Tree, out: &mut Vec<Action>) {
        match t {
            Tree::Leaf(w) => out.push(Action::Gen(w.clone())),
            Tree::Node { label, children } => {
                out.push(Action::Nt(label.clone()));
                for c in children {
                    go(c, out);
                }
                out.push(Action::Reduce);
            }
        }
    }
    let mut out = Vec::new();
    go(tree, &mut out);
    out
}

pub fn actions_to_tree(actions: &[Action]) -> Result<Tree, SyntaxError> {
    let mut open: Vec<(String, Vec<Tree>)> = Vec::new();
    let mut done: Option<Tree> = None;
    for (i, a) in actions.iter().enumerate() {
        if done.is_some() {
            return Err(SyntaxError::Malformed {
                position: i,
                reason: "action after the root constituent was closed".into(),
            });
        }
        match a {
            Action::Nt(l) => open.push((l.clone(), Vec::new())),
            Action::Gen(w) => match open.last_mut() {
                Some((_, kids)) => kids.push(Tree::Leaf(w.clone())),
                None => {
                    return Err(SyntaxError::Malformed {
                        position: i,
                        reason: "GEN before any NT".into(),
                    })
                }
            },
            Action::Reduce => {
                let Some((label, kids)) = open.pop() else {
                    return Err(SyntaxError::Malformed {
                        position: i,
                        reason: "REDUCE with no open constituent".into(),
                    });
                };
                if kids.is_empty() {
                    return Err(SyntaxError::Malformed {
                        position: i,
                        reason: format!("REDUCE of empty constituent {label}"),
                    });
                }
                let node = Tree::node(label, kids);
                match open.last_mut() {
                    Some((_, parent)) => parent.push(node),
                    None => done = Some(node),
                }
            }
        }
    }
    if !open.is_empty() {
        return Err(SyntaxError::Malformed {
            position: actions.len(),
            reason: format!("{} constituent(s) left open", open.len()),
        });
    }
    done.ok_or(SyntaxError::Malformed {
        position: 0,
        reason: "empty action sequence".into(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ActionKind {
    Reduce,
    Nt(usize),
    Gen(usize),
}

/// Dense indexing of actions: 0 is REDUCE, `1..=L` open the L nonterminal
/// labels, and the rest generate every vocabulary word except `<eos>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionSpace {
    labels: Vec<String>,
    label_ids: HashMap<String, usize>,
    vocab: Vocabulary,
}

impl ActionSpace {
    pub const REDUCE: usize = 0;

    pub fn new(labels: Vec<String>, vocab: Vocabulary) -> Self {
        let label_ids = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        ActionSpace {
            labels,
            label_ids,
            vocab,
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn len(&self) -> usize {
        1 + self.labels.len() + self.vocab.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nt(&self, label: usize) -> usize {
        1 + label
    }

    pub fn gen(&self, word: usize) -> usize {
        debug_assert_ne!(word, Vocabulary::EOS_ID);
        let slot = if word > Vocabulary::EOS_ID { word - 1 } else { word };
        1 + self.labels.len() + slot
    }

    pub fn first_gen(&self) -> usize {
        1 + self.labels.len()
    }

    pub fn kind(&self, action: usize) -> ActionKind {
        let n = self.labels.len();
        if action == Self::REDUCE {
            ActionKind::Reduce
        } else if action <= n {
            ActionKind::Nt(action - 1)
        } else {
            let slot = action - 1 - n;
            ActionKind::Gen(if slot >= Vocabulary::EOS_ID { slot + 1 } else { slot })
        }
    }

    pub fn label_id(&self, label: &str) -> Option<usize> {
        self.label_ids.get(label).copied()
    }

    /// Words outside the vocabulary generate `<unk>`; unknown labels are an error.
    pub fn encode(&self, action: &Action) -> Result<usize, SyntaxError> {
        Ok(match action {
            Action::Reduce => Self::REDUCE,
            Action::Nt(l) => self.nt(self.label_id(l).ok_or_else(|| SyntaxError::UnknownLabel(l.clone()))?),
            Action::Gen(w) => self.gen(self.vocab.id(w)),
        })
    }

    pub fn decode(&self, action: usize) -> Action {
        match self.kind(action) {
            ActionKind::Reduce => Action::Reduce,
            ActionKind::Nt(l) => Action::Nt(self.labels[l].clone()),
            ActionKind::Gen(w) => Action::Gen(self.vocab.word(w).to_string()),
        }
    }

    /// Short printable name used in sampled outputs and debugging.
    pub fn name(&self, action: usize) -> String {
        self.decode(action).to_string()
    }
}
