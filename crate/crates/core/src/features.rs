//! Grammatical feature values shared by the lexicon, the stimulus generators
//! and the treebank pattern counter.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Number {
    #[serde(rename = "sg")]
    Sg,
    #[serde(rename = "pl")]
    Pl,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gender {
    #[serde(rename = "m")]
    M,
    #[serde(rename = "f")]
    F,
}

/// Coordinating conjunction, normalized across languages (`and`/`et`, `or`/`ou`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Coordinator {
    #[serde(rename = "and")]
    And,
    #[serde(rename = "or")]
    Or,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Language {
    #[serde(rename = "en")]
    En,
    #[serde(rename = "fr")]
    Fr,
}

impl Number {
    pub const ALL: [Number; 2] = [Number::Sg, Number::Pl];

    pub fn as_str(self) -> &'static str {
        match self {
            Number::Sg => "sg",
            Number::Pl => "pl",
        }
    }
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::M, Gender::F];

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::M => "m",
            Gender::F => "f",
        }
    }
}

impl Coordinator {
    pub fn as_str(self) -> &'static str {
        match self {
            Coordinator::And => "and",
            Coordinator::Or => "or",
        }
    }

    /// Surface form of the coordinator in `lang`.
    pub fn surface(self, lang: Language) -> &'static str {
        match (lang, self) {
            (Language::En, Coordinator::And) => "and",
            (Language::En, Coordinator::Or) => "or",
            (Language::Fr, Coordinator::And) => "et",
            (Language::Fr, Coordinator::Or) => "ou",
        }
    }

    /// Recognizes a coordinator word form of `lang` (case-insensitive).
    pub fn from_word(word: &str, lang: Language) -> Option<Coordinator> {
        let lower = word.to_lowercase();
        [Coordinator::And, Coordinator::Or]
            .into_iter()
            .find(|c| c.surface(lang) == lower)
    }
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Fr => "fr",
        }
    }
}

macro_rules! str_enum {
    ($ty:ty, $what:literal, $($s:literal => $v:expr),+) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($s => Ok($v),)+
                    other => Err(format!(concat!("unknown ", $what, " `{}`"), other)),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

str_enum!(Number, "number", "sg" => Number::Sg, "pl" => Number::Pl);
str_enum!(Gender, "gender", "m" => Gender::M, "f" => Gender::F);
str_enum!(Coordinator, "coordinator", "and" => Coordinator::And, "or" => Coordinator::Or);
str_enum!(Language, "language", "en" => Language::En, "fr" => Language::Fr);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinator_surface_forms() {
        assert_eq!(Coordinator::from_word("Et", Language::Fr), Some(Coordinator::And));
        assert_eq!(Coordinator::from_word("or", Language::En), Some(Coordinator::Or));
        assert_eq!(Coordinator::from_word("ou", Language::En), None);
        assert_eq!(Coordinator::Or.surface(Language::Fr), "ou");
    }

    #[test]
    fn parse_display_round_trip() {
        for n in Number::ALL {
            assert_eq!(n.to_string().parse::<Number>().unwrap(), n);
        }
        assert!("x".parse::<Gender>().is_err());
    }
}
