//! Hypothesis parsing and rendering.
//!
//! A hypothesis is a single sentence relating exactly two lexicon entities.
//! It goes through the same matching, polarity and predicate machinery as
//! corpus sentences, so "It is not evident that X causes Y" and "X not
//! causes Y" normalize identically.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Sentence;
use crate::extraction::{classify_polarity_masked, extract_predicate, Polarity, Rules};
use crate::lexicon::{match_entities, Lexicon, Mention};
use crate::stem::stem;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HypothesisError {
    #[error("hypothesis must name two known entities; recognized {matched:?}")]
    UnrecognizedEntities { matched: Vec<String> },
    #[error("hypothesis names more than two entities: {matched:?}")]
    Ambiguous { matched: Vec<String> },
    #[error("unknown entity {0:?}")]
    UnknownEntity(String),
    #[error("subject and object are the same entity {0:?}")]
    SameEntity(String),
    #[error("{0:?} is not a known relation verb")]
    UnknownPredicate(String),
    #[error("rendered hypothesis {text:?} does not re-parse to the selection")]
    RenderMismatch { text: String },
}

/// Normalized hypothesis. Equality compares the normal form only: the
/// unordered entity pair, predicate stem and polarity. `source_text` and
/// the subject/object order are labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Hypothesis {
    pub subject: String,
    pub object: String,
    pub predicate: String,
    pub polarity: Polarity,
    pub source_text: String,
}

impl Hypothesis {
    pub fn normal_form(&self) -> (&str, &str, &str, Polarity) {
        let (a, b) = if self.subject <= self.object {
            (&self.subject, &self.object)
        } else {
            (&self.object, &self.subject)
        };
        (a, b, &self.predicate, self.polarity)
    }
}

impl PartialEq for Hypothesis {
    fn eq(&self, other: &Self) -> bool {
        self.normal_form() == other.normal_form()
    }
}

impl Eq for Hypothesis {}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, {})",
            self.subject, self.predicate, self.object, self.polarity
        )
    }
}

pub fn parse_hypothesis(text: &str, lexicon: &Lexicon, rules: &Rules) -> Result<Hypothesis, HypothesisError> {
    let sentence = Sentence::new(0, text.trim());
    let mentions = match_entities(&sentence, lexicon);
    let mut firsts: Vec<&Mention> = Vec::new();
    for m in &mentions {
        if !firsts.iter().any(|f| f.entity_id == m.entity_id) {
            firsts.push(m);
        }
    }
    let matched: Vec<String> = firsts.iter().map(|m| m.entity_id.clone()).collect();
    match firsts.len() {
        0 | 1 => return Err(HypothesisError::UnrecognizedEntities { matched }),
        2 => {}
        _ => return Err(HypothesisError::Ambiguous { matched }),
    }
    let predicate = extract_predicate(&sentence, (firsts[0], firsts[1]), &mentions, &rules.verbs);
    Ok(Hypothesis {
        subject: firsts[0].entity_id.clone(),
        object: firsts[1].entity_id.clone(),
        predicate,
        polarity: classify_polarity_masked(&sentence, &rules.negation, &mentions),
        source_text: sentence.text,
    })
}

/// Third-person singular of a verb stem ("cause" -> "causes").
pub fn third_person(verb: &str) -> String {
    let sibilant = ["s", "x", "z", "ch", "sh"].iter().any(|s| verb.ends_with(s));
    if sibilant {
        return format!("{verb}es");
    }
    if let Some(root) = verb.strip_suffix('y') {
        if root.chars().last().is_some_and(|c| !"aeiou".contains(c)) {
            return format!("{root}ies");
        }
    }
    format!("{verb}s")
}

/// Turns an entity pair picked in the network view into a hypothesis and its
/// sentence "<subject> [not] <predicate>s <object>". Entities may be given
/// by id or alias; the predicate is reduced to its stem.
pub fn hypothesis_from_selection(
    subject: &str,
    object: &str,
    predicate: &str,
    negated: bool,
    lexicon: &Lexicon,
    rules: &Rules,
) -> Result<(Hypothesis, String), HypothesisError> {
    let subj = lexicon
        .resolve(subject)
        .ok_or_else(|| HypothesisError::UnknownEntity(subject.to_string()))?;
    let obj = lexicon
        .resolve(object)
        .ok_or_else(|| HypothesisError::UnknownEntity(object.to_string()))?;
    if subj.entity_id == obj.entity_id {
        return Err(HypothesisError::SameEntity(subj.entity_id.clone()));
    }
    let stemmed = stem(&predicate.trim().to_lowercase());
    if !rules.verbs.contains_stem(&stemmed) {
        return Err(HypothesisError::UnknownPredicate(predicate.to_string()));
    }
    let text = format!(
        "{} {}{} {}",
        subj.canonical_name,
        if negated { "not " } else { "" },
        third_person(&stemmed),
        obj.canonical_name
    );
    let expected = Hypothesis {
        subject: subj.entity_id.clone(),
        object: obj.entity_id.clone(),
        predicate: stemmed,
        polarity: if negated {
            Polarity::Negative
        } else {
            Polarity::Positive
        },
        source_text: text.clone(),
    };
    match parse_hypothesis(&text, lexicon, rules) {
        Ok(parsed) if parsed == expected && parsed.subject == expected.subject => Ok((parsed, text)),
        _ => Err(HypothesisError::RenderMismatch { text }),
    }
}
