use super::{
    Continuation, Design, ExperimentId, Lexicon, LexiconEntry, Role, StimulusError, StimulusItem,
};
use crate::features::{Coordinator, Gender, Language, Number};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Exp3Variant {
    /// Matrix verb takes a sentential complement; the coordination is its subject.
    Control,
    /// Matrix verb takes only an NP object.
    Critical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureMode {
    Number,
    Gender,
}

/// Default number of items per design: 37 for English, 24 for French.
pub fn default_item_count(language: Language) -> usize {
    match language {
        Language::En => 37,
        Language::Fr => 24,
    }
}

const EN_CONTROL_FRAMES: &[&str] = &["I think that", "I believe that", "I know that", "I said that"];
// none of these verbs takes a sentential complement
const EN_CRITICAL_FRAMES: &[&str] = &["I fixed", "I sold", "I painted", "I cleaned"];
const FR_CONTROL_FRAMES: &[&str] = &["Je croyais que", "Je pensais que", "Je savais que"];
const FR_CRITICAL_FRAMES: &[&str] = &["Nous avons accepté", "Nous avons refusé", "Nous avons payé"];

fn frames(language: Language, variant: Exp3Variant) -> &'static [&'static str] {
    match (language, variant) {
        (Language::En, Exp3Variant::Control) => EN_CONTROL_FRAMES,
        (Language::En, Exp3Variant::Critical) => EN_CRITICAL_FRAMES,
        (Language::Fr, Exp3Variant::Control) => FR_CONTROL_FRAMES,
        (Language::Fr, Exp3Variant::Critical) => FR_CRITICAL_FRAMES,
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

struct Builder<'a> {
    lex: &'a Lexicon,
    lang: Language,
    id: ExperimentId,
}

impl<'a> Builder<'a> {
    fn new(lex: &'a Lexicon, design: Design, lang: Language) -> Result<Self, StimulusError> {
        if !design.supports(lang) {
            return Err(StimulusError::Unsupported(format!(
                "{design:?} is not defined for language `{lang}`"
            )));
        }
        Ok(Builder {
            lex,
            lang,
            id: ExperimentId::new(design, lang),
        })
    }

    /// Determiner + noun, lowercase.
    fn np(&self, noun: &LexiconEntry, number: Number) -> Result<String, StimulusError> {
        let det = match self.lang {
            Language::En => "the",
            Language::Fr => "le",
        };
        let det = self
            .lex
            .form(self.lang, Role::Det, det, Some(number), noun.gender)?;
        let form = noun.form(Some(number), noun.gender)?;
        Ok(format!("{det} {form}"))
    }

    fn coord_np(
        &self,
        first: (&LexiconEntry, Number),
        coordinator: Coordinator,
        second: (&LexiconEntry, Number),
    ) -> Result<String, StimulusError> {
        Ok(format!(
            "{} {} {}",
            self.np(first.0, first.1)?,
            coordinator.surface(self.lang),
            self.np(second.0, second.1)?
        ))
    }

    fn verb_pair(&self, lemma: &str) -> Result<Vec<Continuation>, StimulusError> {
        Number::ALL
            .into_iter()
            .map(|n| {
                Ok(Continuation {
                    text: self.lex.form(self.lang, Role::Verb, lemma, Some(n), None)?.to_string(),
                    class: n.to_string(),
                })
            })
            .collect()
    }

    fn verb(&self, lemma: &str, number: Number) -> Result<&'a str, StimulusError> {
        self.lex.form(self.lang, Role::Verb, lemma, Some(number), None)
    }

    /// Plural predicative adjective, masculine then feminine.
    fn adjective_pair(&self) -> Result<Vec<Continuation>, StimulusError> {
        Gender::ALL
            .into_iter()
            .map(|g| {
                Ok(Continuation {
                    text: self
                        .lex
                        .form(self.lang, Role::Adj, "important", Some(Number::Pl), Some(g))?
                        .to_string(),
                    class: g.to_string(),
                })
            })
            .collect()
    }

    fn item(
        &self,
        item_id: String,
        condition: &str,
        prefix: String,
        continuations: Vec<Continuation>,
    ) -> StimulusItem {
        debug_assert!(self.id.design.conditions().contains(&condition));
        let start = prefix.split_whitespace().count();
        let len = continuations
            .iter()
            .map(|c| c.text.split_whitespace().count())
            .max()
            .unwrap_or(0);
        StimulusItem {
            experiment: self.id.to_string(),
            item_id,
            condition: condition.to_string(),
            prefix,
            continuations,
            measure_region: format!("{}-{}", start, start + len),
        }
    }
}

fn feature_name(n: Number) -> &'static str {
    n.as_str()
}

/// Non-coordination agreement: `The door is/are`, `Les coûts sont importants/importantes`.
pub fn generate_exp1(
    lexicon: &Lexicon,
    language: Language,
    mode: FeatureMode,
    items: usize,
) -> Result<Vec<StimulusItem>, StimulusError> {
    let design = match mode {
        FeatureMode::Number => Design::Exp1Number,
        FeatureMode::Gender => Design::Exp1Gender,
    };
    let b = Builder::new(lexicon, design, language)?;
    let mut out = Vec::new();
    match mode {
        FeatureMode::Number => {
            let nouns = lexicon.nouns(language);
            if nouns.is_empty() {
                return Ok(out);
            }
            let lemma = match language {
                Language::En => "be",
                Language::Fr => "aller",
            };
            let conts = b.verb_pair(lemma)?;
            for j in 0..items {
                let noun = nouns[j % nouns.len()];
                for (cond, number) in [("Npl", Number::Pl), ("Nsg", Number::Sg)] {
                    let prefix = capitalize(&b.np(noun, number)?);
                    out.push(b.item((j + 1).to_string(), cond, prefix, conts.clone()));
                }
            }
        }
        FeatureMode::Gender => {
            let masc = lexicon.nouns_of_gender(language, Gender::M);
            let fem = lexicon.nouns_of_gender(language, Gender::F);
            if masc.is_empty() || fem.is_empty() {
                return Ok(out);
            }
            let conts = b.adjective_pair()?;
            let copula = b.verb("être", Number::Pl)?;
            for j in 0..items {
                for (cond, noun) in [("Nm", masc[j % masc.len()]), ("Nf", fem[j % fem.len()])] {
                    let prefix = format!("{} {}", capitalize(&b.np(noun, Number::Pl)?), copula);
                    out.push(b.item((j + 1).to_string(), cond, prefix, conts.clone()));
                }
            }
        }
    }
    Ok(out)
}

/// The eight number conditions `{sg,pl} x {and,or} x {sg,pl}`, in table order.
fn number_conditions() -> Vec<(Number, Coordinator, Number)> {
    [Coordinator::And, Coordinator::Or]
        .into_iter()
        .flat_map(|c| {
            [
                (Number::Pl, Number::Pl),
                (Number::Sg, Number::Pl),
                (Number::Pl, Number::Sg),
                (Number::Sg, Number::Sg),
            ]
            .into_iter()
            .map(move |(a, b)| (a, c, b))
        })
        .collect()
}

fn gender_conditions() -> Vec<(Gender, Coordinator, Gender)> {
    [Coordinator::And, Coordinator::Or]
        .into_iter()
        .flat_map(|c| {
            [
                (Gender::M, Gender::M),
                (Gender::F, Gender::M),
                (Gender::M, Gender::F),
                (Gender::F, Gender::F),
            ]
            .into_iter()
            .map(move |(a, b)| (a, c, b))
        })
        .collect()
}

/// Noun pair for item `j`: consecutive nouns in round-robin order. French
/// items alternate masculine and feminine pairs so both nouns share gender.
fn noun_pair(lexicon: &Lexicon, language: Language, j: usize) -> Option<(&LexiconEntry, &LexiconEntry)> {
    let pool = match language {
        Language::En => lexicon.nouns(language),
        Language::Fr => {
            let gender = if j % 2 == 0 { Gender::M } else { Gender::F };
            lexicon.nouns_of_gender(language, gender)
        }
    };
    if pool.is_empty() {
        return None;
    }
    let k = match language {
        Language::En => j,
        Language::Fr => j / 2,
    };
    Some((pool[k % pool.len()], pool[(k + 1) % pool.len()]))
}

/// Simple coordination, number: `The door and the windows is/are`.
///
/// English items are generated in present (`is/are`) and past (`was/were`)
/// tense, giving 16 cells per item; the tense is part of the item id
/// (`3.pres`, `3.past`). French uses `va/vont`.
pub fn generate_exp2_number(
    lexicon: &Lexicon,
    language: Language,
    items: usize,
) -> Result<Vec<StimulusItem>, StimulusError> {
    let b = Builder::new(lexicon, Design::Exp2Number, language)?;
    let mut out = Vec::new();
    if lexicon.nouns(language).is_empty() {
        return Ok(out);
    }
    let tenses: &[(&str, &str)] = match language {
        Language::En => &[("pres", "be"), ("past", "be.past")],
        Language::Fr => &[("", "aller")],
    };
    for j in 0..items {
        let Some((n1, n2)) = noun_pair(lexicon, language, j) else {
            continue;
        };
        for &(tense, lemma) in tenses {
            let conts = b.verb_pair(lemma)?;
            let item_id = if tense.is_empty() {
                (j + 1).to_string()
            } else {
                format!("{}.{tense}", j + 1)
            };
            for (a, c, z) in number_conditions() {
                let cond = format!("{}_{}_{}", feature_name(a), c, feature_name(z));
                let prefix = capitalize(&b.coord_np((n1, a), c, (n2, z))?);
                out.push(b.item(item_id.clone(), &cond, prefix, conts.clone()));
            }
        }
    }
    Ok(out)
}

/// Simple coordination, gender: `Les prix et les coûts sont importants/importantes`.
pub fn generate_exp2_gender(lexicon: &Lexicon, items: usize) -> Result<Vec<StimulusItem>, StimulusError> {
    let lang = Language::Fr;
    let b = Builder::new(lexicon, Design::Exp2Gender, lang)?;
    let mut out = Vec::new();
    let masc = lexicon.nouns_of_gender(lang, Gender::M);
    let fem = lexicon.nouns_of_gender(lang, Gender::F);
    if masc.is_empty() || fem.is_empty() {
        return Ok(out);
    }
    let conts = b.adjective_pair()?;
    let copula = b.verb("être", Number::Pl)?;
    for j in 0..items {
        let pick = |g: Gender, slot: usize| {
            let pool = if g == Gender::M { &masc } else { &fem };
            pool[(j + slot) % pool.len()]
        };
        for (g1, c, g2) in gender_conditions() {
            let cond = format!("{g1}_{c}_{g2}");
            let np = b.coord_np((pick(g1, 0), Number::Pl), c, (pick(g2, 1), Number::Pl))?;
            let prefix = format!("{} {copula}", capitalize(&np));
            out.push(b.item((j + 1).to_string(), &cond, prefix, conts.clone()));
        }
    }
    Ok(out)
}

/// Complex coordination: the and-coordination embedded under a matrix frame
/// that either takes a sentential complement (control) or not (critical).
/// Control and critical items with the same id differ only in the frame.
pub fn generate_exp3(
    lexicon: &Lexicon,
    language: Language,
    variant: Exp3Variant,
    mode: FeatureMode,
    items: usize,
) -> Result<Vec<StimulusItem>, StimulusError> {
    let b = Builder::new(lexicon, Design::Exp3 { variant, mode }, language)?;
    let frames = frames(language, variant);
    let mut out = Vec::new();
    match mode {
        FeatureMode::Number => {
            if lexicon.nouns(language).is_empty() {
                return Ok(out);
            }
            let lemma = match language {
                Language::En => "be",
                Language::Fr => "être.imparfait",
            };
            let conts = b.verb_pair(lemma)?;
            for j in 0..items {
                let Some((n1, n2)) = noun_pair(lexicon, language, j) else {
                    continue;
                };
                let frame = frames[j % frames.len()];
                for (a, c, z) in number_conditions().into_iter().take(4) {
                    let cond = format!("{a}_{c}_{z}");
                    let prefix = format!("{frame} {}", b.coord_np((n1, a), c, (n2, z))?);
                    out.push(b.item((j + 1).to_string(), &cond, prefix, conts.clone()));
                }
            }
        }
        FeatureMode::Gender => {
            let masc = lexicon.nouns_of_gender(language, Gender::M);
            let fem = lexicon.nouns_of_gender(language, Gender::F);
            if masc.is_empty() || fem.is_empty() {
                return Ok(out);
            }
            let conts = b.adjective_pair()?;
            let copula = b.verb("être.imparfait", Number::Pl)?;
            for j in 0..items {
                let frame = frames[j % frames.len()];
                let pick = |g: Gender, slot: usize| {
                    let pool = if g == Gender::M { &masc } else { &fem };
                    pool[(j + slot) % pool.len()]
                };
                for (g1, c, g2) in gender_conditions().into_iter().take(4) {
                    let cond = format!("{g1}_{c}_{g2}");
                    let np = b.coord_np((pick(g1, 0), Number::Pl), c, (pick(g2, 1), Number::Pl))?;
                    let prefix = format!("{frame} {np} {copula}");
                    out.push(b.item((j + 1).to_string(), &cond, prefix, conts.clone()));
                }
            }
        }
    }
    Ok(out)
}

/// Inverted coordination: `What are the door and`; the coordinator is the
/// single scored continuation. French questions are embedded under
/// `Je me demande où`.
pub fn generate_exp4(
    lexicon: &Lexicon,
    language: Language,
    items: usize,
) -> Result<Vec<StimulusItem>, StimulusError> {
    let b = Builder::new(lexicon, Design::Exp4, language)?;
    let nouns = lexicon.nouns(language);
    let mut out = Vec::new();
    if nouns.is_empty() {
        return Ok(out);
    }
    let coord = Coordinator::And.surface(language);
    let cont = vec![Continuation {
        text: coord.to_string(),
        class: coord.to_string(),
    }];
    for j in 0..items {
        let noun = nouns[j % nouns.len()];
        for (cond, vn, nn) in [
            ("Vpl_Npl", Number::Pl, Number::Pl),
            ("Vpl_Nsg", Number::Pl, Number::Sg),
            ("Vsg_Nsg", Number::Sg, Number::Sg),
        ] {
            let np = b.np(noun, nn)?;
            let prefix = match language {
                Language::En => format!("What {} {np}", b.verb("be", vn)?),
                Language::Fr => format!("Je me demande où {} {np}", b.verb("aller", vn)?),
            };
            out.push(b.item((j + 1).to_string(), cond, prefix, cont.clone()));
        }
    }
    Ok(out)
}

/// Dispatches on the experiment id.
pub fn generate_experiment(
    lexicon: &Lexicon,
    id: ExperimentId,
    items: usize,
) -> Result<Vec<StimulusItem>, StimulusError> {
    let lang = id.language;
    match id.design {
        Design::Exp1Number => generate_exp1(lexicon, lang, FeatureMode::Number, items),
        Design::Exp1Gender => generate_exp1(lexicon, lang, FeatureMode::Gender, items),
        Design::Exp2Number => generate_exp2_number(lexicon, lang, items),
        Design::Exp2Gender => {
            if lang != Language::Fr {
                return Err(StimulusError::Unsupported("gender designs are French only".into()));
            }
            generate_exp2_gender(lexicon, items)
        }
        Design::Exp3 { variant, mode } => generate_exp3(lexicon, lang, variant, mode, items),
        Design::Exp4 => generate_exp4(lexicon, lang, items),
    }
}
