use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub const UNK: &str = "<unk>";
pub const EOS: &str = "<eos>";

/// Word/index bijection. Index 0 is `<unk>` and index 1 is `<eos>`; the rest
/// are ordered by descending corpus frequency, ties broken lexically.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    words: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub const UNK_ID: usize = 0;
    pub const EOS_ID: usize = 1;

    /// Words seen at least `min_count` times become types; the rest map to `<unk>`.
    pub fn build<'a, I, S>(sentences: I, min_count: usize) -> Vocabulary
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for sent in sentences {
            for w in sent {
                *counts.entry(w.as_ref()).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(w, c)| *c >= min_count && *w != UNK && *w != EOS)
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        Vocabulary::from_words(kept.into_iter().map(|(w, _)| w.to_string()))
    }

    /// `<unk>` and `<eos>` followed by `words` in the given order.
    pub fn from_words<I: IntoIterator<Item = String>>(words: I) -> Vocabulary {
        let mut all = vec![UNK.to_string(), EOS.to_string()];
        all.extend(words.into_iter().filter(|w| w != UNK && w != EOS));
        Vocabulary::from(all)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of `word`, or `<unk>`.
    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(Self::UNK_ID)
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

impl From<Vec<String>> for Vocabulary {
    /// Expects `<unk>` and `<eos>` at indices 0 and 1; inserts them otherwise.
    fn from(mut words: Vec<String>) -> Self {
        if words.first().map(String::as_str) != Some(UNK) || words.get(1).map(String::as_str) != Some(EOS) {
            words.retain(|w| w != UNK && w != EOS);
            words.splice(0..0, [UNK.to_string(), EOS.to_string()]);
        }
        let mut index = HashMap::with_capacity(words.len());
        let mut unique = Vec::with_capacity(words.len());
        for w in words {
            if !index.contains_key(&w) {
                index.insert(w.clone(), unique.len());
                unique.push(w);
            }
        }
        Vocabulary { words: unique, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.words
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(text: &str) -> Vec<Vec<String>> {
        text.lines().map(|l| l.split_whitespace().map(String::from).collect()).collect()
    }

    #[test]
    fn frequency_order_and_threshold() {
        let c = corpus("b a a\nc b a\nd");
        let v = Vocabulary::build(c.iter().map(Vec::as_slice), 2);
        assert_eq!(v.words(), ["<unk>", "<eos>", "a", "b"]);
        assert_eq!(v.id("d"), Vocabulary::UNK_ID);
        assert_eq!(v.id("b"), 3);
    }

    #[test]
    fn serde_round_trip() {
        let v = Vocabulary::from_words(["le".to_string(), "coût".to_string()]);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"["<unk>","<eos>","le","coût"]"#);
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.id("coût"), 3);
    }

    proptest! {
        #[test]
        fn bijection(words in prop::collection::vec("[a-e]{1,3}", 0..60), min in 1usize..4) {
            let sent = [words];
            let v = Vocabulary::build(sent.iter().map(Vec::as_slice), min);
            prop_assert_eq!(v.word(0), UNK);
            prop_assert_eq!(v.word(1), EOS);
            for i in 0..v.len() {
                prop_assert_eq!(v.id(v.word(i)), i);
            }
        }
    }
}
