//! Feature-annotated lexicons.
//!
//! File format: UTF-8, tab separated, one surface form per row, with a header
//! `language lemma number gender form role` and an optional seventh column
//! `freq_class`. Lines starting with `#` are comments. `-` marks a feature
//! that does not apply.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::StimulusError;
use crate::features::{Gender, Language, Number};

pub const LEXICON_HEADER: [&str; 6] = ["language", "lemma", "number", "gender", "form", "role"];

/// Sample English lexicon shipped with the crate.
pub const SAMPLE_LEXICON_EN: &str = include_str!("../../data/lexicon_en.tsv");
/// Sample French lexicon shipped with the crate.
pub const SAMPLE_LEXICON_FR: &str = include_str!("../../data/lexicon_fr.tsv");

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "noun")]
    Noun,
    #[serde(rename = "verb")]
    Verb,
    #[serde(rename = "adj")]
    Adj,
    #[serde(rename = "det")]
    Det,
}

impl FromStr for Role {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "noun" => Ok(Role::Noun),
            "verb" => Ok(Role::Verb),
            "adj" => Ok(Role::Adj),
            "det" => Ok(Role::Det),
            other => Err(format!("unknown role `{other}`")),
        }
    }
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Noun => "noun",
            Role::Verb => "verb",
            Role::Adj => "adj",
            Role::Det => "det",
        }
    }
}

/// Cell of a paradigm: number and gender, either possibly unspecified.
pub type Cell = (Option<Number>, Option<Gender>);

fn cell_name(cell: Cell) -> String {
    format!(
        "{}.{}",
        cell.0.map_or("-", Number::as_str),
        cell.1.map_or("-", Gender::as_str)
    )
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LexiconEntry {
    pub language: Language,
    pub lemma: String,
    pub role: Role,
    /// Inherent gender for nouns of gendered languages.
    pub gender: Option<Gender>,
    pub forms: BTreeMap<Cell, String>,
    pub freq_class: Option<String>,
}

impl LexiconEntry {
    /// Exact cell lookup, falling back to the gender-neutral cell.
    pub fn form(&self, number: Option<Number>, gender: Option<Gender>) -> Result<&str, StimulusError> {
        self.forms
            .get(&(number, gender))
            .or_else(|| self.forms.get(&(number, None)))
            .map(String::as_str)
            .ok_or_else(|| StimulusError::MissingCell {
                lemma: self.lemma.clone(),
                cell: format!("{}:{}", self.role.as_str(), cell_name((number, gender))),
            })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
}

impl Lexicon {
    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sample(language: Language) -> Lexicon {
        let text = match language {
            Language::En => SAMPLE_LEXICON_EN,
            Language::Fr => SAMPLE_LEXICON_FR,
        };
        Lexicon::read(text.as_bytes()).expect("bundled lexicon is well-formed")
    }

    /// Entries of `role` in `language`, in file order.
    pub fn by_role(&self, language: Language, role: Role) -> impl Iterator<Item = &LexiconEntry> {
        self.entries
            .iter()
            .filter(move |e| e.language == language && e.role == role)
    }

    pub fn nouns(&self, language: Language) -> Vec<&LexiconEntry> {
        self.by_role(language, Role::Noun).collect()
    }

    pub fn nouns_of_gender(&self, language: Language, gender: Gender) -> Vec<&LexiconEntry> {
        self.by_role(language, Role::Noun)
            .filter(|e| e.gender == Some(gender))
            .collect()
    }

    pub fn entry(&self, language: Language, role: Role, lemma: &str) -> Result<&LexiconEntry, StimulusError> {
        self.by_role(language, role)
            .find(|e| e.lemma == lemma)
            .ok_or_else(|| StimulusError::MissingCell {
                lemma: lemma.to_string(),
                cell: format!("{}:{}", role.as_str(), language.as_str()),
            })
    }

    /// Surface form of `lemma` in the requested cell.
    pub fn form(
        &self,
        language: Language,
        role: Role,
        lemma: &str,
        number: Option<Number>,
        gender: Option<Gender>,
    ) -> Result<&str, StimulusError> {
        self.entry(language, role, lemma)?.form(number, gender)
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Lexicon, StimulusError> {
        let mut entries: Vec<LexiconEntry> = Vec::new();
        let mut header_seen = false;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if !header_seen {
                if cols.len() < 6 || cols[..6] != LEXICON_HEADER {
                    return Err(StimulusError::Schema(format!(
                        "lexicon header must start with `{}`, found `{}`",
                        LEXICON_HEADER.join("\\t"),
                        line
                    )));
                }
                header_seen = true;
                continue;
            }
            if cols.len() < 6 || cols.len() > 7 {
                return Err(StimulusError::Lexicon {
                    line: lineno,
                    message: format!("expected 6 or 7 columns, found {}", cols.len()),
                });
            }
            let bad = |message: String| StimulusError::Lexicon { line: lineno, message };
            let language: Language = cols[0].parse().map_err(bad)?;
            let lemma = cols[1].to_string();
            let number = opt_feature::<Number>(cols[2]).map_err(bad)?;
            let gender = opt_feature::<Gender>(cols[3]).map_err(bad)?;
            let form = cols[4].to_string();
            let role: Role = cols[5].parse().map_err(bad)?;
            let freq_class = cols.get(6).filter(|s| **s != "-" && !s.is_empty()).map(|s| s.to_string());
            if lemma.is_empty() || form.is_empty() {
                return Err(bad("empty lemma or form".into()));
            }

            let idx = match entries
                .iter()
                .position(|e| e.language == language && e.role == role && e.lemma == lemma)
            {
                Some(idx) => idx,
                None => {
                    entries.push(LexiconEntry {
                        language,
                        lemma: lemma.clone(),
                        role,
                        gender: None,
                        forms: BTreeMap::new(),
                        freq_class: None,
                    });
                    entries.len() - 1
                }
            };
            let entry = &mut entries[idx];
            if role == Role::Noun && language == Language::Fr {
                let Some(g) = gender else {
                    return Err(bad(format!("French noun `{lemma}` needs a gender")));
                };
                match entry.gender {
                    Some(prev) if prev != g => {
                        return Err(bad(format!("French noun `{lemma}` has two genders")))
                    }
                    _ => entry.gender = Some(g),
                }
            }
            if freq_class.is_some() {
                entry.freq_class = freq_class;
            }
            entry.forms.insert((number, gender), form);
        }
        Ok(Lexicon { entries })
    }
}

fn opt_feature<T: FromStr<Err = String>>(s: &str) -> Result<Option<T>, String> {
    if s == "-" || s.is_empty() {
        Ok(None)
    } else {
        s.parse().map(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_lexicons_load() {
        let en = Lexicon::sample(Language::En);
        let nouns: Vec<_> = en.nouns(Language::En).iter().map(|e| e.lemma.as_str()).collect();
        assert_eq!(&nouns[..4], ["door", "window", "star", "moon"]);
        assert_eq!(en.form(Language::En, Role::Noun, "door", Some(Number::Pl), None).unwrap(), "doors");

        let fr = Lexicon::sample(Language::Fr);
        let cost = fr.entry(Language::Fr, Role::Noun, "coût").unwrap();
        assert_eq!(cost.gender, Some(Gender::M));
        assert_eq!(cost.form(Some(Number::Pl), Some(Gender::M)).unwrap(), "coûts");
        assert_eq!(
            fr.form(Language::Fr, Role::Det, "le", Some(Number::Sg), Some(Gender::F)).unwrap(),
            "la"
        );
    }

    #[test]
    fn missing_cell_names_lemma() {
        let text = "language\tlemma\tnumber\tgender\tform\trole\nen\tdoor\tsg\t-\tdoor\tnoun\n";
        let lex = Lexicon::read(text.as_bytes()).unwrap();
        let err = lex
            .form(Language::En, Role::Noun, "door", Some(Number::Pl), None)
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("door") && msg.contains("pl"), "{msg}");
    }

    #[test]
    fn rejects_bad_rows() {
        let no_header = "en\tdoor\tsg\t-\tdoor\tnoun\n";
        assert!(matches!(Lexicon::read(no_header.as_bytes()), Err(StimulusError::Schema(_))));
        let genderless = "language\tlemma\tnumber\tgender\tform\trole\nfr\tprix\tsg\t-\tprix\tnoun\n";
        assert!(matches!(
            Lexicon::read(genderless.as_bytes()),
            Err(StimulusError::Lexicon { line: 2, .. })
        ));
        let two = "language\tlemma\tnumber\tgender\tform\trole\nfr\tx\tsg\tm\tx\tnoun\nfr\tx\tpl\tf\txs\tnoun\n";
        assert!(Lexicon::read(two.as_bytes()).is_err());
    }

    #[test]
    fn empty_lexicon_is_ok() {
        let lex = Lexicon::read("language\tlemma\tnumber\tgender\tform\trole\n".as_bytes()).unwrap();
        assert!(lex.is_empty());
    }
}
