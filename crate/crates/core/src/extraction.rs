//! Signed relation extraction.
//!
//! A sentence mentioning two or more distinct entities yields one relation
//! per unordered entity pair. Every pair in a sentence shares the
//! sentence's polarity, which is the parity of the number of negation
//! words in it: even is positive, odd is negative. The predicate is the
//! stem of the first relation verb between the two mentions.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io;
use std::ops::{Mul, Range};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{tokenize, Document, Sentence};
use crate::lexicon::{match_entities, Lexicon, Mention};
use crate::stem::stem;

pub const BUNDLED_NEGATIONS: &str = include_str!("../data/negation.txt");
pub const BUNDLED_VERBS: &str = include_str!("../data/verbs.txt");

/// Predicate used when no relation verb is found around a pair.
pub const FALLBACK_PREDICATE: &str = "relate";

#[derive(Debug, Error)]
pub enum WordListError {
    #[error("cannot read word list {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("word list is empty")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn value(self) -> i8 {
        match self {
            Polarity::Positive => 1,
            Polarity::Negative => -1,
        }
    }

    pub fn from_parity(negations: usize) -> Self {
        if negations.is_multiple_of(2) {
            Polarity::Positive
        } else {
            Polarity::Negative
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
        }
    }
}

impl Mul for Polarity {
    type Output = Polarity;

    fn mul(self, rhs: Polarity) -> Polarity {
        if self == rhs {
            Polarity::Positive
        } else {
            Polarity::Negative
        }
    }
}

impl From<Polarity> for i8 {
    fn from(p: Polarity) -> i8 {
        p.value()
    }
}

impl TryFrom<i8> for Polarity {
    type Error = String;

    fn try_from(v: i8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Polarity::Positive),
            -1 => Ok(Polarity::Negative),
            other => Err(format!("polarity must be 1 or -1, got {other}")),
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Positive => "+1",
            Polarity::Negative => "-1",
        })
    }
}

/// A signed, undirected entity relation with document provenance.
/// `subject` sorts before `object`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Relation {
    pub subject: String,
    pub object: String,
    pub predicate: String,
    pub polarity: Polarity,
    pub doc_id: String,
    pub sentence_index: usize,
    pub evidence: String,
}

/// Deduplication key: one stored relation per document, entity pair,
/// predicate and polarity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationKey {
    pub doc_id: String,
    pub subject: String,
    pub object: String,
    pub predicate: String,
    pub polarity: Polarity,
}

impl Relation {
    /// Builds a relation, ordering the pair canonically. Returns `None` for
    /// a self-pair or an empty predicate.
    pub fn new(
        a: &str,
        b: &str,
        predicate: &str,
        polarity: Polarity,
        doc_id: &str,
        sentence_index: usize,
        evidence: &str,
    ) -> Option<Self> {
        if a == b || predicate.is_empty() {
            return None;
        }
        let (subject, object) = if a < b { (a, b) } else { (b, a) };
        Some(Self {
            subject: subject.to_string(),
            object: object.to_string(),
            predicate: predicate.to_string(),
            polarity,
            doc_id: doc_id.to_string(),
            sentence_index,
            evidence: evidence.to_string(),
        })
    }

    pub fn key(&self) -> RelationKey {
        RelationKey {
            doc_id: self.doc_id.clone(),
            subject: self.subject.clone(),
            object: self.object.clone(),
            predicate: self.predicate.clone(),
            polarity: self.polarity,
        }
    }

    pub fn involves(&self, entity_id: &str) -> bool {
        self.subject == entity_id || self.object == entity_id
    }

    /// The endpoint opposite `entity_id`, if it is an endpoint.
    pub fn other(&self, entity_id: &str) -> Option<&str> {
        if self.subject == entity_id {
            Some(&self.object)
        } else if self.object == entity_id {
            Some(&self.subject)
        } else {
            None
        }
    }

    pub fn connects(&self, a: &str, b: &str) -> bool {
        (self.subject == a && self.object == b) || (self.subject == b && self.object == a)
    }
}

fn parse_word_list(contents: &str) -> Vec<String> {
    contents
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

fn read_word_list(path: &Path) -> Result<Vec<String>, WordListError> {
    let contents = fs::read_to_string(path).map_err(|source| WordListError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(parse_word_list(&contents))
}

/// Negation words and phrases, stored as token sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegationLexicon {
    /// Longest entries first.
    entries: Vec<Vec<String>>,
}

impl Default for NegationLexicon {
    fn default() -> Self {
        Self::parse(BUNDLED_NEGATIONS).expect("bundled negation list is non-empty")
    }
}

impl NegationLexicon {
    pub fn new<I, S>(words: I) -> Result<Self, WordListError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut entries: Vec<Vec<String>> = words
            .into_iter()
            .map(|w| tokenize(w.as_ref()))
            .filter(|t| !t.is_empty())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        if entries.is_empty() {
            return Err(WordListError::Empty);
        }
        entries.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        Ok(Self { entries })
    }

    pub fn parse(contents: &str) -> Result<Self, WordListError> {
        Self::new(parse_word_list(contents))
    }

    pub fn load(path: &Path) -> Result<Self, WordListError> {
        Self::new(read_word_list(path)?)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.iter().any(|e| e.len() == 1 && e[0] == token)
    }

    /// Counts non-overlapping negation matches in `tokens`, longer entries
    /// first. Tokens inside `masked` spans (entity mentions) never count.
    pub fn count(&self, tokens: &[String], masked: &[Range<usize>]) -> usize {
        let mut used = vec![false; tokens.len()];
        for span in masked {
            for slot in &mut used[span.start.min(tokens.len())..span.end.min(tokens.len())] {
                *slot = true;
            }
        }
        let mut count = 0;
        for entry in &self.entries {
            let len = entry.len();
            let mut i = 0;
            while i + len <= tokens.len() {
                if !used[i..i + len].iter().any(|&u| u) && tokens[i..i + len] == entry[..] {
                    used[i..i + len].iter_mut().for_each(|u| *u = true);
                    count += 1;
                    i += len;
                } else {
                    i += 1;
                }
            }
        }
        count
    }
}

/// Closed list of relation verbs, held as stems.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerbList {
    stems: HashSet<String>,
}

impl Default for VerbList {
    fn default() -> Self {
        Self::parse(BUNDLED_VERBS).expect("bundled verb list is non-empty")
    }
}

impl VerbList {
    pub fn new<I, S>(verbs: I) -> Result<Self, WordListError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let stems: HashSet<String> = verbs
            .into_iter()
            .map(|v| stem(&v.as_ref().trim().to_lowercase()))
            .filter(|s| !s.is_empty())
            .collect();
        if stems.is_empty() {
            return Err(WordListError::Empty);
        }
        Ok(Self { stems })
    }

    pub fn parse(contents: &str) -> Result<Self, WordListError> {
        Self::new(parse_word_list(contents))
    }

    pub fn load(path: &Path) -> Result<Self, WordListError> {
        Self::new(read_word_list(path)?)
    }

    /// The verb stem of `token` if it is a relation verb.
    pub fn verb_stem(&self, token: &str) -> Option<String> {
        let s = stem(token);
        self.stems.contains(&s).then_some(s)
    }

    pub fn contains_stem(&self, stem: &str) -> bool {
        self.stems.contains(stem)
    }

    pub fn stems(&self) -> impl Iterator<Item = &str> {
        self.stems.iter().map(String::as_str)
    }
}

/// Negation and verb lists used together by extraction and hypothesis
/// parsing.
#[derive(Debug, Clone, Default)]
pub struct Rules {
    pub negation: NegationLexicon,
    pub verbs: VerbList,
}

/// Polarity of a whole sentence from negation parity.
pub fn classify_polarity(sentence: &Sentence, neg: &NegationLexicon) -> Polarity {
    Polarity::from_parity(neg.count(&sentence.tokens, &[]))
}

/// As [`classify_polarity`], ignoring negation words inside entity mentions.
pub fn classify_polarity_masked(sentence: &Sentence, neg: &NegationLexicon, mentions: &[Mention]) -> Polarity {
    let spans: Vec<Range<usize>> = mentions.iter().map(|m| m.token_span.clone()).collect();
    Polarity::from_parity(neg.count(&sentence.tokens, &spans))
}

/// Predicate for a pair of mentions: the first relation verb strictly
/// between them, else the first one after the later mention, else
/// [`FALLBACK_PREDICATE`]. Tokens covered by any of `mentions` are skipped.
pub fn extract_predicate(
    sentence: &Sentence,
    pair: (&Mention, &Mention),
    mentions: &[Mention],
    verbs: &VerbList,
) -> String {
    let (first, second) = if pair.0.token_span.start <= pair.1.token_span.start {
        pair
    } else {
        (pair.1, pair.0)
    };
    let covered = |i: usize| mentions.iter().any(|m| m.token_span.contains(&i));
    let between = first.token_span.end..second.token_span.start;
    let after = first.token_span.end.max(second.token_span.end)..sentence.tokens.len();
    between
        .chain(after)
        .filter(|&i| !covered(i))
        .find_map(|i| verbs.verb_stem(&sentence.tokens[i]))
        .unwrap_or_else(|| FALLBACK_PREDICATE.to_string())
}

/// Candidate relations for one sentence, before deduplication. Each entity
/// is represented by its first mention.
pub fn sentence_relations(sentence: &Sentence, doc_id: &str, lexicon: &Lexicon, rules: &Rules) -> Vec<Relation> {
    let mentions = match_entities(sentence, lexicon);
    let mut firsts: Vec<&Mention> = Vec::new();
    for m in &mentions {
        if !firsts.iter().any(|f| f.entity_id == m.entity_id) {
            firsts.push(m);
        }
    }
    if firsts.len() < 2 {
        return Vec::new();
    }
    let polarity = classify_polarity_masked(sentence, &rules.negation, &mentions);
    let mut out = Vec::new();
    for (i, a) in firsts.iter().enumerate() {
        for b in &firsts[i + 1..] {
            let predicate = extract_predicate(sentence, (a, b), &mentions, &rules.verbs);
            out.extend(Relation::new(
                &a.entity_id,
                &b.entity_id,
                &predicate,
                polarity,
                doc_id,
                sentence.index,
                &sentence.text,
            ));
        }
    }
    out
}

/// Deduplicated relations of a document, keeping the earliest sentence for
/// each key.
pub fn extract_relations(doc: &Document, lexicon: &Lexicon, rules: &Rules) -> Vec<Relation> {
    let mut seen: HashSet<RelationKey> = HashSet::new();
    let mut out = Vec::new();
    for sentence in &doc.sentences {
        for relation in sentence_relations(sentence, &doc.doc_id, lexicon, rules) {
            if seen.insert(relation.key()) {
                out.push(relation);
            }
        }
    }
    out
}
