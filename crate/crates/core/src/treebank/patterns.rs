//! Subject-coordination / predicate agreement counts over a treebank.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;

use super::coord::{is_coordinator_child, is_np_label};
use super::Tree;
use crate::features::{Coordinator, Gender, Language, Number};
use crate::stimuli::{Lexicon, Role};

/// Coarse classification of a tagged word.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WordClass {
    Noun { number: Option<Number>, gender: Option<Gender> },
    Verb { number: Option<Number> },
    Adjective { number: Option<Number>, gender: Option<Gender> },
    Determiner { number: Option<Number>, gender: Option<Gender> },
    Coordinator(Coordinator),
    Other,
    /// The tag is not part of the tagger's inventory.
    Unknown,
}

pub trait FeatureTagger: Sync {
    fn classify(&self, tag: &str, word: &str) -> WordClass;
}

/// Penn Treebank tags.
#[derive(Clone, Copy, Debug, Default)]
pub struct EnglishTagger;

const PTB_OTHER_TAGS: &[&str] = &[
    "CD", "DT", "EX", "FW", "IN", "LS", "PDT", "POS", "PRP", "PRP$", "RB", "RBR", "RBS", "RP",
    "SYM", "TO", "UH", "WDT", "WP", "WP$", "WRB", ".", ",", ":", "``", "''", "-LRB-", "-RRB-",
    "#", "$", "-NONE-",
];

impl FeatureTagger for EnglishTagger {
    fn classify(&self, tag: &str, word: &str) -> WordClass {
        let noun = |number| WordClass::Noun { number: Some(number), gender: None };
        match tag {
            "NN" | "NNP" => noun(Number::Sg),
            "NNS" | "NNPS" => noun(Number::Pl),
            "VBZ" => WordClass::Verb { number: Some(Number::Sg) },
            "VBP" => WordClass::Verb { number: Some(Number::Pl) },
            "VBD" => WordClass::Verb {
                number: match word.to_lowercase().as_str() {
                    "was" => Some(Number::Sg),
                    "were" => Some(Number::Pl),
                    _ => None,
                },
            },
            "VB" | "VBG" | "VBN" | "MD" => WordClass::Verb { number: None },
            "JJ" | "JJR" | "JJS" => WordClass::Adjective { number: None, gender: None },
            "CC" => Coordinator::from_word(word, Language::En)
                .map_or(WordClass::Other, WordClass::Coordinator),
            t if PTB_OTHER_TAGS.contains(&t) => WordClass::Other,
            _ => WordClass::Unknown,
        }
    }
}

/// Classifies words by looking their form up in a feature lexicon.
///
/// Words absent from the lexicon are `Unknown` when their tag looks like a
/// content-word tag (noun, verb, adjective) and `Other` otherwise.
#[derive(Clone, Debug)]
pub struct LexiconTagger {
    language: Language,
    forms: HashMap<String, Vec<(Role, Option<Number>, Option<Gender>)>>,
}

impl LexiconTagger {
    pub fn new(lexicon: &Lexicon, language: Language) -> Self {
        let mut forms: HashMap<String, Vec<_>> = HashMap::new();
        for e in lexicon.entries().iter().filter(|e| e.language == language) {
            for (&(number, gender), form) in &e.forms {
                forms
                    .entry(form.to_lowercase())
                    .or_default()
                    .push((e.role, number, gender.or(e.gender)));
            }
        }
        LexiconTagger { language, forms }
    }
}

fn role_hint(tag: &str) -> Option<Role> {
    match tag.chars().next()? {
        'N' => Some(Role::Noun),
        'V' => Some(Role::Verb),
        'A' | 'J' => Some(Role::Adj),
        'D' => Some(Role::Det),
        _ => None,
    }
}

fn unique<T: PartialEq + Copy>(mut it: impl Iterator<Item = Option<T>>) -> Option<T> {
    let first = it.next()??;
    it.all(|x| x == Some(first)).then_some(first)
}

impl FeatureTagger for LexiconTagger {
    fn classify(&self, tag: &str, word: &str) -> WordClass {
        if let Some(c) = Coordinator::from_word(word, self.language) {
            return WordClass::Coordinator(c);
        }
        let Some(readings) = self.forms.get(&word.to_lowercase()) else {
            return match role_hint(tag) {
                Some(Role::Det) | None => WordClass::Other,
                Some(_) => WordClass::Unknown,
            };
        };
        let role = role_hint(tag)
            .filter(|r| readings.iter().any(|x| x.0 == *r))
            .unwrap_or(readings[0].0);
        let of_role = || readings.iter().filter(move |x| x.0 == role);
        let number = unique(of_role().map(|x| x.1));
        let gender = unique(of_role().map(|x| x.2));
        match role {
            Role::Noun => WordClass::Noun { number, gender },
            Role::Verb => WordClass::Verb { number },
            Role::Adj => WordClass::Adjective { number, gender },
            Role::Det => WordClass::Determiner { number, gender },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatternMode {
    /// Conjunct number against verb number.
    Number,
    /// Conjunct gender against predicative adjective gender.
    Gender,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternRow {
    pub first: &'static str,
    pub coordinator: Coordinator,
    pub second: &'static str,
    /// Counts for the two outcome values (sg/pl or m/f).
    pub outcomes: [usize; 2],
    /// Detected pairs whose predicate carries no usable feature.
    pub unclassified: usize,
}

impl PatternRow {
    pub fn total(&self) -> usize {
        self.outcomes[0] + self.outcomes[1] + self.unclassified
    }

    pub fn condition(&self) -> String {
        format!("{}_{}_{}", self.first, self.coordinator, self.second)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Diagnostics {
    /// Tags outside the tagger's inventory, with counts.
    pub unknown_tags: BTreeMap<String, usize>,
    /// Coordinated subjects that were detected but not tabulated, by reason.
    pub skipped: BTreeMap<String, usize>,
}

impl Diagnostics {
    fn skip(&mut self, reason: &str) {
        *self.skipped.entry(reason.to_string()).or_default() += 1;
    }

    fn merge(&mut self, other: Diagnostics) {
        for (k, v) in other.unknown_tags {
            *self.unknown_tags.entry(k).or_default() += v;
        }
        for (k, v) in other.skipped {
            *self.skipped.entry(k).or_default() += v;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgreementPatternTable {
    pub mode: PatternMode,
    pub rows: Vec<PatternRow>,
    pub diagnostics: Diagnostics,
}

impl AgreementPatternTable {
    pub fn empty(mode: PatternMode) -> Self {
        // row order follows the usual presentation of these tables
        let values: [(&'static str, &'static str); 4] = match mode {
            PatternMode::Number => [("pl", "pl"), ("sg", "pl"), ("pl", "sg"), ("sg", "sg")],
            PatternMode::Gender => [("m", "m"), ("m", "f"), ("f", "m"), ("f", "f")],
        };
        let rows = [Coordinator::And, Coordinator::Or]
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |&(first, second)| PatternRow {
                    first,
                    coordinator: c,
                    second,
                    outcomes: [0, 0],
                    unclassified: 0,
                })
            })
            .collect();
        AgreementPatternTable {
            mode,
            rows,
            diagnostics: Diagnostics::default(),
        }
    }

    pub fn outcome_names(&self) -> [&'static str; 2] {
        match self.mode {
            PatternMode::Number => ["sg", "pl"],
            PatternMode::Gender => ["m", "f"],
        }
    }

    pub fn row(&self, first: &str, coordinator: Coordinator, second: &str) -> Option<&PatternRow> {
        self.rows
            .iter()
            .find(|r| r.first == first && r.coordinator == coordinator && r.second == second)
    }

    fn row_mut(&mut self, first: &str, coordinator: Coordinator, second: &str) -> &mut PatternRow {
        self.rows
            .iter_mut()
            .find(|r| r.first == first && r.coordinator == coordinator && r.second == second)
            .expect("table holds every condition")
    }

    pub fn total(&self) -> usize {
        self.rows.iter().map(PatternRow::total).sum()
    }

    pub fn merge(mut self, other: AgreementPatternTable) -> Self {
        assert_eq!(self.mode, other.mode, "cannot merge tables of different modes");
        for (a, b) in self.rows.iter_mut().zip(other.rows) {
            a.outcomes[0] += b.outcomes[0];
            a.outcomes[1] += b.outcomes[1];
            a.unclassified += b.unclassified;
        }
        self.diagnostics.merge(other.diagnostics);
        self
    }

    /// CSV with header `n1,coord,n2,outcome_sg,outcome_pl,total,unclassified`
    /// (`g1,coord,g2,outcome_m,outcome_f,...` in gender mode).
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let [o1, o2] = self.outcome_names();
        let (c1, c2) = match self.mode {
            PatternMode::Number => ("n1", "n2"),
            PatternMode::Gender => ("g1", "g2"),
        };
        let h1 = format!("outcome_{o1}");
        let h2 = format!("outcome_{o2}");
        w.write_record([c1, "coord", c2, &h1, &h2, "total", "unclassified"])?;
        for r in &self.rows {
            w.write_record([
                r.first.to_string(),
                r.coordinator.to_string(),
                r.second.to_string(),
                r.outcomes[0].to_string(),
                r.outcomes[1].to_string(),
                r.total().to_string(),
                r.unclassified.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn is_clause_label(label: &str) -> bool {
    matches!(label, "S" | "SENT" | "Ssub" | "Sint" | "SQ" | "SINV") || label.starts_with("S-")
}

fn is_punct_child(t: &Tree) -> bool {
    matches!(t.as_preterminal(), Some((".", _) | (",", _) | (":", _) | ("PONCT", _)))
}

/// Two-conjunct coordination: flat `NP CC NP` or `NP (COORD CC NP)`.
fn conjuncts(np: &Tree) -> Option<(&Tree, Coordinator, &Tree)> {
    let kids: Vec<&Tree> = np.children().iter().filter(|c| !is_punct_child(c)).collect();
    let np_like = |t: &Tree| t.label().is_some_and(is_np_label) && t.as_preterminal().is_none();
    match kids.as_slice() {
        [a, c, b] if np_like(a) && np_like(b) => Some((*a, is_coordinator_child(c)?, *b)),
        [a, coord] if np_like(a) && coord.label() == Some("COORD") => {
            match coord.children() {
                [c, b] if np_like(b) => Some((*a, is_coordinator_child(c)?, b)),
                _ => None,
            }
        }
        _ => None,
    }
}

fn has_coordinator(np: &Tree) -> bool {
    np.children().iter().any(|c| {
        is_coordinator_child(c).is_some()
            || (c.label() == Some("COORD") && c.children().iter().any(|x| is_coordinator_child(x).is_some()))
    })
}

struct Features {
    number: Option<Number>,
    gender: Option<Gender>,
}

/// Head noun features of an NP: rightmost noun among its children, else the
/// head of its rightmost NP child. Number falls back to the determiner when
/// the noun form is number-ambiguous.
fn head_features(np: &Tree, tagger: &dyn FeatureTagger, diag: &mut Diagnostics) -> Option<Features> {
    let mut det_number = None;
    for c in np.children() {
        if let Some((tag, word)) = c.as_preterminal() {
            if let WordClass::Determiner { number, .. } = tagger.classify(tag, word) {
                det_number = det_number.or(number);
            }
        }
    }
    for c in np.children().iter().rev() {
        if let Some((tag, word)) = c.as_preterminal() {
            match tagger.classify(tag, word) {
                WordClass::Noun { number, gender } => {
                    return Some(Features {
                        number: number.or(det_number),
                        gender,
                    })
                }
                WordClass::Unknown => {
                    *diag.unknown_tags.entry(tag.to_string()).or_default() += 1;
                }
                _ => {}
            }
        }
    }
    np.children()
        .iter()
        .rev()
        .find(|c| c.label().is_some_and(is_np_label) && c.as_preterminal().is_none())
        .and_then(|c| head_features(c, tagger, diag))
}

/// First word of the wanted class in `nodes`, descending only into nodes
/// whose label passes `descend`.
fn find_first(
    nodes: &[Tree],
    descend: &dyn Fn(&str) -> bool,
    want: &dyn Fn(&WordClass) -> bool,
    tagger: &dyn FeatureTagger,
    diag: &mut Diagnostics,
) -> Option<WordClass> {
    for n in nodes {
        if let Some((tag, word)) = n.as_preterminal() {
            let class = tagger.classify(tag, word);
            if want(&class) {
                return Some(class);
            }
            if class == WordClass::Unknown {
                *diag.unknown_tags.entry(tag.to_string()).or_default() += 1;
            }
        } else if let Some(label) = n.label() {
            if descend(label) {
                if let Some(found) = find_first(n.children(), descend, want, tagger, diag) {
                    return Some(found);
                }
            }
        }
    }
    None
}

fn count_clause(
    clause: &Tree,
    mode: PatternMode,
    tagger: &dyn FeatureTagger,
    table: &mut AgreementPatternTable,
) {
    let children = clause.children();
    let Some(subj_idx) = children
        .iter()
        .position(|c| c.label().is_some_and(is_np_label) && c.as_preterminal().is_none())
    else {
        return;
    };
    let subject = &children[subj_idx];
    if !has_coordinator(subject) {
        return;
    }
    let diag = &mut table.diagnostics;
    let Some((c1, coordinator, c2)) = conjuncts(subject) else {
        diag.skip("not_two_conjuncts");
        return;
    };
    let predicate = &children[subj_idx + 1..];
    let verbal = |l: &str| l.starts_with("VP") || l == "VN";
    if !predicate.iter().any(|c| c.label().is_some_and(verbal)) {
        diag.skip("no_predicate");
        return;
    }
    let (Some(f1), Some(f2)) = (head_features(c1, tagger, diag), head_features(c2, tagger, diag)) else {
        diag.skip("no_head_noun");
        return;
    };

    let (first, second, outcome): (&str, &str, Option<Option<usize>>) = match mode {
        PatternMode::Number => {
            let (Some(n1), Some(n2)) = (f1.number, f2.number) else {
                diag.skip("conjunct_number_unknown");
                return;
            };
            let verb = find_first(
                predicate,
                &|l| verbal(l),
                &|c| matches!(c, WordClass::Verb { .. }),
                tagger,
                diag,
            );
            let outcome = verb.map(|v| match v {
                WordClass::Verb { number: Some(Number::Sg) } => Some(0),
                WordClass::Verb { number: Some(Number::Pl) } => Some(1),
                _ => None,
            });
            (n1.as_str(), n2.as_str(), outcome)
        }
        PatternMode::Gender => {
            let (Some(g1), Some(g2)) = (f1.gender, f2.gender) else {
                diag.skip("conjunct_gender_unknown");
                return;
            };
            let adj = find_first(
                predicate,
                &|l| verbal(l) || l.starts_with("ADJP") || l == "AP",
                &|c| matches!(c, WordClass::Adjective { .. }),
                tagger,
                diag,
            );
            let outcome = adj.map(|a| match a {
                WordClass::Adjective { gender: Some(Gender::M), .. } => Some(0),
                WordClass::Adjective { gender: Some(Gender::F), .. } => Some(1),
                _ => None,
            });
            (g1.as_str(), g2.as_str(), outcome)
        }
    };
    let Some(outcome) = outcome else {
        table.diagnostics.skip("no_predicate_word");
        return;
    };
    let row = table.row_mut(first, coordinator, second);
    match outcome {
        Some(i) => row.outcomes[i] += 1,
        None => row.unclassified += 1,
    }
}

fn count_tree(tree: &Tree, mode: PatternMode, tagger: &dyn FeatureTagger, table: &mut AgreementPatternTable) {
    for node in tree.iter() {
        if node.label().is_some_and(is_clause_label) {
            count_clause(node, mode, tagger, table);
        }
    }
}

/// Tabulates coordinated-subject / predicate agreement over `corpus`.
///
/// A pair is detected when the leftmost NP child of a clause is a
/// two-conjunct coordination followed by a verbal predicate. The row is
/// chosen by the conjuncts' head features and the outcome by the verb
/// (number mode) or predicative adjective (gender mode). Trees are counted
/// in parallel and the partial tables summed, so the result does not depend
/// on corpus order.
pub fn count_agreement_patterns<T: FeatureTagger + ?Sized>(
    corpus: &[Tree],
    tagger: &T,
    mode: PatternMode,
) -> AgreementPatternTable {
    let tagger: &dyn FeatureTagger = &Wrap(tagger);
    corpus
        .par_iter()
        .fold(
            || AgreementPatternTable::empty(mode),
            |mut table, tree| {
                count_tree(tree, mode, tagger, &mut table);
                table
            },
        )
        .reduce(|| AgreementPatternTable::empty(mode), AgreementPatternTable::merge)
}

struct Wrap<'a, T: ?Sized>(&'a T);

impl<T: FeatureTagger + ?Sized> FeatureTagger for Wrap<'_, T> {
    fn classify(&self, tag: &str, word: &str) -> WordClass {
        self.0.classify(tag, word)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::parse_bracketed;

    fn bank(lines: &[&str]) -> Vec<Tree> {
        lines.iter().map(|l| parse_bracketed(l).unwrap()).collect()
    }

    #[test]
    fn plural_and_singular_with_singular_verb() {
        let corpus = bank(&["(S (NP (NP (DT the) (NNS doors)) (CC and) (NP (DT the) (NN window))) \
             (VP (VBZ is) (ADJP (JJ open))) (. .))"]);
        let table = count_agreement_patterns(&corpus, &EnglishTagger, PatternMode::Number);
        let row = table.row("pl", Coordinator::And, "sg").unwrap();
        assert_eq!(row.outcomes, [1, 0]);
        assert_eq!(table.total(), 1);
    }

    #[test]
    fn empty_corpus_all_zero() {
        let table = count_agreement_patterns(&[], &EnglishTagger, PatternMode::Number);
        assert_eq!(table.rows.len(), 8);
        assert!(table.rows.iter().all(|r| r.total() == 0));
    }

    #[test]
    fn unclassified_and_unknown_are_reported() {
        let corpus = bank(&[
            // VBD other than was/were: detected, no number
            "(S (NP (NP (NN cat)) (CC or) (NP (NNS dogs))) (VP (VBD slept)))",
            // unknown conjunct tag: skipped with a diagnostic
            "(S (NP (NP (XYZ cat)) (CC and) (NP (NNS dogs))) (VP (VBP sleep)))",
            // three conjuncts: skipped
            "(S (NP (NP (NN a)) (, ,) (NP (NN b)) (CC and) (NP (NN c))) (VP (VBP sleep)))",
        ]);
        let table = count_agreement_patterns(&corpus, &EnglishTagger, PatternMode::Number);
        let row = table.row("sg", Coordinator::Or, "pl").unwrap();
        assert_eq!((row.outcomes, row.unclassified, row.total()), ([0, 0], 1, 1));
        assert_eq!(table.diagnostics.unknown_tags.get("XYZ"), Some(&1));
        assert_eq!(table.diagnostics.skipped.get("no_head_noun"), Some(&1));
        assert_eq!(table.diagnostics.skipped.get("not_two_conjuncts"), Some(&1));
        assert_eq!(table.total(), 1);
    }

    #[test]
    fn embedded_clauses_and_past_tense() {
        let corpus = bank(&[
            "(S (NP (PRP I)) (VP (VBP think) (SBAR (IN that) (S (NP (NP (DT the) (NN door)) \
             (CC and) (NP (DT the) (NN window))) (VP (VBD were) (ADJP (JJ open)))))))",
        ]);
        let table = count_agreement_patterns(&corpus, &EnglishTagger, PatternMode::Number);
        assert_eq!(table.row("sg", Coordinator::And, "sg").unwrap().outcomes, [0, 1]);
    }

    #[test]
    fn french_gender_with_lexicon() {
        let lex = Lexicon::sample(Language::Fr);
        let tagger = LexiconTagger::new(&lex, Language::Fr);
        let corpus = bank(&[
            // FTB-style binary coordination
            "(SENT (NP-SUJ (NP (DET les) (NC prix)) (COORD (CC et) (NP (DET les) (NC dépenses)))) \
             (VN (V sont)) (AP (ADJ importants)))",
            "(SENT (NP-SUJ (NP (DET les) (NC recettes)) (CC ou) (NP (DET les) (NC taxes))) \
             (VN (V sont)) (AP (ADJ importantes)))",
        ]);
        let table = count_agreement_patterns(&corpus, &tagger, PatternMode::Gender);
        assert_eq!(table.row("m", Coordinator::And, "f").unwrap().outcomes, [1, 0]);
        assert_eq!(table.row("f", Coordinator::Or, "f").unwrap().outcomes, [0, 1]);

        // number mode: `prix` is number-ambiguous, the determiner decides
        let table = count_agreement_patterns(&corpus, &tagger, PatternMode::Number);
        assert_eq!(table.row("pl", Coordinator::And, "pl").unwrap().outcomes, [0, 1]);
    }

    #[test]
    fn csv_layout() {
        let mut out = Vec::new();
        AgreementPatternTable::empty(PatternMode::Number).write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("n1,coord,n2,outcome_sg,outcome_pl,total,unclassified"));
        assert_eq!(lines.next(), Some("pl,and,pl,0,0,0,0"));
        assert_eq!(text.lines().count(), 9);
    }

    #[test]
    fn order_invariant() {
        let lines = [
            "(S (NP (NP (NNS doors)) (CC and) (NP (NN window))) (VP (VBP are)))",
            "(S (NP (NP (NN door)) (CC or) (NP (NN window))) (VP (VBZ is)))",
            "(S (NP (NP (NN door)) (CC and) (NP (NN window))) (VP (VBP are)))",
        ];
        let a = count_agreement_patterns(&bank(&lines), &EnglishTagger, PatternMode::Number);
        let mut rev = lines;
        rev.reverse();
        let b = count_agreement_patterns(&bank(&rev), &EnglishTagger, PatternMode::Number);
        assert_eq!(a, b);
        assert_eq!(a.total(), 3);
    }
}
