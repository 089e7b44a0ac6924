//! A small hand-written English grammar used as a controlled training
//! language. Subjects are bare NPs or coordinations of two NPs; `and`
//! coordinations always take a plural verb and `or` coordinations agree with
//! the closer (second) conjunct.
//!
//! Coordinations never pair two nouns that are adjacent in the lexicon's noun
//! list (in either order), because those pairs make up the coordination
//! stimuli and must stay unseen.

use std::collections::BTreeSet;

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::features::{Coordinator, Language, Number};
use crate::stimuli::{Lexicon, LexiconEntry, Role, StimulusError};
use crate::treebank::Tree;

const ADJECTIVES: &[&str] = &["red", "old", "new", "small", "open", "broken", "clean", "here"];
const PREPOSITIONS: &[&str] = &["near", "behind", "under"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub sentences: usize,
    pub seed: u64,
    /// Share of subjects that are coordinations.
    pub coord_share: f64,
    /// Share of coordinations that use `and`.
    pub and_share: f64,
    /// Share of predicates that are prepositional phrases rather than adjectives.
    pub pp_share: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sentences: 50_000,
            seed: 1,
            coord_share: 0.6,
            and_share: 0.5,
            pp_share: 0.3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tense {
    Present,
    Past,
}

/// Number the verb takes after a subject.
pub fn subject_number(first: Number, coordination: Option<(Coordinator, Number)>) -> Number {
    match coordination {
        None => first,
        Some((Coordinator::And, _)) => Number::Pl,
        Some((Coordinator::Or, second)) => second,
    }
}

/// Unordered noun-lemma pairs reserved for the coordination stimuli.
pub fn held_out_pairs(lexicon: &Lexicon) -> BTreeSet<(String, String)> {
    let nouns = lexicon.nouns(Language::En);
    let mut out = BTreeSet::new();
    for j in 0..nouns.len() {
        let (a, b) = (&nouns[j].lemma, &nouns[(j + 1) % nouns.len()].lemma);
        if a != b {
            out.insert(ordered(a, b));
        }
    }
    out
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

struct Grammar<'a> {
    nouns: Vec<&'a LexiconEntry>,
    pairs: Vec<(usize, usize)>,
    det: &'a LexiconEntry,
    present: &'a LexiconEntry,
    past: &'a LexiconEntry,
}

impl<'a> Grammar<'a> {
    fn new(lexicon: &'a Lexicon) -> Result<Self, StimulusError> {
        let nouns = lexicon.nouns(Language::En);
        let held = held_out_pairs(lexicon);
        let mut pairs = Vec::new();
        for i in 0..nouns.len() {
            for j in 0..nouns.len() {
                if i != j && !held.contains(&ordered(&nouns[i].lemma, &nouns[j].lemma)) {
                    pairs.push((i, j));
                }
            }
        }
        if pairs.is_empty() {
            return Err(StimulusError::Unsupported(
                "the lexicon has too few nouns for unseen coordinations".into(),
            ));
        }
        Ok(Grammar {
            nouns,
            pairs,
            det: lexicon.entry(Language::En, Role::Det, "the")?,
            present: lexicon.entry(Language::En, Role::Verb, "be")?,
            past: lexicon.entry(Language::En, Role::Verb, "be.past")?,
        })
    }

    fn np(&self, noun: usize, number: Number, capital: bool) -> Result<Tree, StimulusError> {
        let mut det = self.det.form(Some(number), None)?.to_string();
        if capital {
            det = capitalize(&det);
        }
        let tag = match number {
            Number::Sg => "NN",
            Number::Pl => "NNS",
        };
        Ok(Tree::node(
            "NP",
            vec![Tree::tagged("DT", det), Tree::tagged(tag, self.nouns[noun].form(Some(number), None)?)],
        ))
    }

    fn sentence<R: Rng>(&self, cfg: &SynthConfig, rng: &mut R) -> Result<Tree, StimulusError> {
        let n1 = pick_number(rng);
        let (subject, agree) = if rng.random_bool(cfg.coord_share) {
            let (a, b) = self.pairs[rng.random_range(0..self.pairs.len())];
            let n2 = pick_number(rng);
            let coord = if rng.random_bool(cfg.and_share) { Coordinator::And } else { Coordinator::Or };
            let np = Tree::node(
                "NP",
                vec![
                    self.np(a, n1, true)?,
                    Tree::tagged("CC", coord.surface(Language::En)),
                    self.np(b, n2, false)?,
                ],
            );
            (np, subject_number(n1, Some((coord, n2))))
        } else {
            let a = rng.random_range(0..self.nouns.len());
            (self.np(a, n1, true)?, n1)
        };
        let tense = if rng.random_bool(0.5) { Tense::Present } else { Tense::Past };
        let (lemma, tag) = match (tense, agree) {
            (Tense::Present, Number::Sg) => (self.present, "VBZ"),
            (Tense::Present, Number::Pl) => (self.present, "VBP"),
            (Tense::Past, _) => (self.past, "VBD"),
        };
        let verb = Tree::tagged(tag, lemma.form(Some(agree), None)?);
        let predicate = if rng.random_bool(cfg.pp_share) {
            let p = PREPOSITIONS[rng.random_range(0..PREPOSITIONS.len())];
            let obj = self.np(rng.random_range(0..self.nouns.len()), pick_number(rng), false)?;
            Tree::node("PP", vec![Tree::tagged("IN", p), obj])
        } else {
            let adj = ADJECTIVES[rng.random_range(0..ADJECTIVES.len())];
            Tree::node("ADJP", vec![Tree::tagged("JJ", adj)])
        };
        Ok(Tree::node("S", vec![subject, Tree::node("VP", vec![verb, predicate])]))
    }
}

fn pick_number<R: Rng>(rng: &mut R) -> Number {
    if rng.random_bool(0.5) {
        Number::Sg
    } else {
        Number::Pl
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// `cfg.sentences` POS-tagged trees, fully determined by the seed.
pub fn generate_trees(lexicon: &Lexicon, cfg: &SynthConfig) -> Result<Vec<Tree>, StimulusError> {
    let grammar = Grammar::new(lexicon)?;
    let mut rng = SmallRng::seed_from_u64(cfg.seed);
    (0..cfg.sentences).map(|_| grammar.sentence(cfg, &mut rng)).collect()
}

/// Token sequences of the trees.
pub fn sentences(trees: &[Tree]) -> Vec<Vec<String>> {
    trees
        .iter()
        .map(|t| t.words().into_iter().map(String::from).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex() -> Lexicon {
        Lexicon::sample(Language::En)
    }

    fn small(n: usize, seed: u64) -> Vec<Tree> {
        let cfg = SynthConfig {
            sentences: n,
            seed,
            ..SynthConfig::default()
        };
        generate_trees(&lex(), &cfg).unwrap()
    }

    fn number_of(noun: &str) -> Number {
        let lex = lex();
        for e in lex.nouns(Language::En) {
            if e.form(Some(Number::Sg), None).unwrap() == noun {
                return Number::Sg;
            }
            if e.form(Some(Number::Pl), None).unwrap() == noun {
                return Number::Pl;
            }
        }
        panic!("not a noun: {noun}")
    }

    fn lemma_of(noun: &str) -> String {
        lex()
            .nouns(Language::En)
            .into_iter()
            .find(|e| e.forms.values().any(|f| f == noun))
            .map(|e| e.lemma.clone())
            .unwrap()
    }

    #[test]
    fn agreement_follows_the_grammar() {
        // Read the surface strings back independently of the generator:
        // "The N1 [and|or the N2] V ...".
        let mut seen = BTreeSet::new();
        for t in small(3000, 7) {
            let w = t.words();
            assert_eq!(w[0], "The");
            let (expected, verb) = if w[2] == "and" || w[2] == "or" {
                assert_eq!(w[3], "the");
                let n2 = number_of(w[4]);
                let e = if w[2] == "and" { Number::Pl } else { n2 };
                seen.insert((w[2].to_string(), number_of(w[1]), n2));
                (e, w[5])
            } else {
                seen.insert(("none".to_string(), number_of(w[1]), number_of(w[1])));
                (number_of(w[1]), w[2])
            };
            let got = match verb {
                "is" | "was" => Number::Sg,
                "are" | "were" => Number::Pl,
                other => panic!("unexpected verb {other}"),
            };
            assert_eq!(got, expected, "{}", w.join(" "));
        }
        // every subject configuration occurs
        assert_eq!(seen.len(), 2 * 4 + 2);
    }

    #[test]
    fn stimulus_pairs_never_coordinate() {
        let held = held_out_pairs(&lex());
        assert_eq!(held.len(), 8);
        assert!(held.contains(&("door".into(), "window".into())));
        assert!(held.contains(&("box".into(), "door".into())));
        let mut coords = 0;
        for t in small(5000, 3) {
            let w = t.words();
            if w[2] == "and" || w[2] == "or" {
                coords += 1;
                assert!(!held.contains(&ordered(&lemma_of(w[1]), &lemma_of(w[4]))), "{}", w.join(" "));
            }
        }
        assert!(coords > 2500);
    }

    #[test]
    fn covers_the_stimulus_vocabulary() {
        let words: BTreeSet<String> = sentences(&small(2000, 1)).into_iter().flatten().collect();
        for w in ["The", "the", "and", "or", "is", "are", "was", "were", "doors", "box", "boxes"] {
            assert!(words.contains(w), "{w}");
        }
    }

    #[test]
    fn deterministic_in_the_seed() {
        assert_eq!(small(200, 5), small(200, 5));
        assert_ne!(small(200, 5), small(200, 6));
    }

    #[test]
    fn trees_are_tagged_and_shaped() {
        let t = small(1, 11).remove(0);
        assert_eq!(t.label(), Some("S"));
        assert!(t.words().iter().all(|w| !w.is_empty()));
        let stripped = t.strip_preterminals();
        assert_eq!(stripped.words(), t.words());
        assert!(t.depth() > stripped.depth());
    }
}
