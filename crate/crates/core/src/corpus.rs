//! Document collection: loading, persistence, sentence segmentation and
//! tokenization.
//!
//! Every document is split into sentences once, on insertion. Sentences
//! are the unit relation extraction runs over.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::log::AppendLog;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed record on line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate document id {id:?} on line {line}")]
    DuplicateRecord { line: usize, id: String },
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("document text is empty")]
    EmptyText,
    #[error("failed to persist document: {0}")]
    Persist(#[source] io::Error),
}

/// One record of the corpus JSONL format. `id` is optional and assigned on
/// insertion when absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default)]
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
    pub tokens: Vec<String>,
}

impl Sentence {
    pub fn new(index: usize, text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Self { index, text, tokens }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub text: String,
    pub sentences: Vec<Sentence>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, title: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let sentences = split_sentences(&text);
        Self {
            doc_id: doc_id.into(),
            title: title.into(),
            text,
            sentences,
        }
    }

    pub fn to_record(&self) -> DocumentRecord {
        DocumentRecord {
            id: Some(self.doc_id.clone()),
            title: self.title.clone(),
            text: self.text.clone(),
        }
    }
}

/// Lowercased word tokens of `text`.
///
/// Tokens are maximal runs of alphanumeric characters; a hyphen is kept when
/// it sits between two alphanumerics ("calmette-gurin", "il-6").
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if c == '-' && !current.is_empty() && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric()) {
            current.push('-');
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Abbreviations that end in a period but never end a sentence. Compared
/// against the lowercased whitespace-delimited word carrying the period.
pub const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "fig.", "figs.", "al.", "e.g.", "i.e.", "vs.", "cf.", "etc.", "approx.", "ca.", "eq.", "ref.", "refs.", "tab.",
    "no.", "dr.", "prof.", "mr.", "mrs.", "ms.", "st.", "sp.", "spp.", "subsp.", "var.", "inc.", "ltd.", "co.", "vol.",
    "pp.", "p.",
];

const CLOSERS: &[char] = &['"', '\'', ')', ']', '\u{201d}', '\u{2019}'];
const OPENERS: &[char] = &['"', '\'', '(', '[', '\u{201c}', '\u{2018}'];

/// Rule-based sentence splitter with a configurable abbreviation list.
///
/// A boundary is a run of `.`, `?` or `!` (plus optional closing quotes or
/// brackets) followed either by end of text or by whitespace and an
/// uppercase letter. A period closing a listed abbreviation is not a
/// boundary.
#[derive(Debug, Clone)]
pub struct SentenceSplitter {
    abbreviations: HashSet<String>,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        Self::new(DEFAULT_ABBREVIATIONS.iter().copied())
    }
}

impl SentenceSplitter {
    pub fn new<I, S>(abbreviations: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            abbreviations: abbreviations.into_iter().map(|a| a.as_ref().to_lowercase()).collect(),
        }
    }

    pub fn split(&self, text: &str) -> Vec<Sentence> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut spans = Vec::new();
        let mut start = 0usize; // byte offset
        let mut i = 0usize; // char position
        while i < chars.len() {
            let (_, c) = chars[i];
            if !matches!(c, '.' | '?' | '!') {
                i += 1;
                continue;
            }
            let punct_start = i;
            while i < chars.len() && matches!(chars[i].1, '.' | '?' | '!') {
                i += 1;
            }
            while i < chars.len() && CLOSERS.contains(&chars[i].1) {
                i += 1;
            }
            let end = chars.get(i).map_or(text.len(), |&(b, _)| b);
            let mut j = i;
            while j < chars.len() && chars[j].1.is_whitespace() {
                j += 1;
            }
            let boundary = if j == chars.len() {
                true
            } else if j == i {
                false
            } else {
                let mut k = j;
                while k < chars.len() && OPENERS.contains(&chars[k].1) {
                    k += 1;
                }
                chars.get(k).is_some_and(|&(_, n)| n.is_uppercase())
                    && !self.is_abbreviation(text, &chars, start, punct_start)
            };
            if boundary {
                spans.push((start, end));
                start = chars.get(j).map_or(text.len(), |&(b, _)| b);
            }
            i = j.max(i);
        }
        if start < text.len() {
            spans.push((start, text.len()));
        }
        spans
            .into_iter()
            .map(|(s, e)| text[s..e].trim())
            .filter(|s| !s.is_empty())
            .enumerate()
            .map(|(index, s)| Sentence::new(index, s))
            .collect()
    }

    /// Whether the punctuation run starting at char `punct` closes a listed
    /// abbreviation. Only a single period qualifies.
    fn is_abbreviation(&self, text: &str, chars: &[(usize, char)], floor: usize, punct: usize) -> bool {
        if chars[punct].1 != '.' {
            return false;
        }
        let mut w = punct;
        while w > 0 && chars[w - 1].0 >= floor && !chars[w - 1].1.is_whitespace() {
            w -= 1;
        }
        let word_end = chars[punct].0 + 1;
        let word = text[chars[w].0..word_end].trim_start_matches(OPENERS);
        self.abbreviations.contains(&word.to_lowercase())
    }
}

/// Segments `text` with the default abbreviation list.
pub fn split_sentences(text: &str) -> Vec<Sentence> {
    SentenceSplitter::default().split(text)
}

/// Ordered, append-only document collection, optionally backed by a JSONL
/// file that every insertion is appended to.
#[derive(Debug, Default)]
pub struct Corpus {
    documents: Vec<Document>,
    index: HashMap<String, usize>,
    next_auto: u64,
    log: Option<AppendLog>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Opens a persistent corpus stored at `path`, loading any documents
    /// already there. Later insertions are appended to the same file.
    pub fn open(path: &Path) -> Result<Self, CorpusError> {
        let log = AppendLog::open(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut corpus = load_corpus(path)?;
        corpus.log = Some(log);
        Ok(corpus)
    }

    /// N, the number of documents.
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn iter(&self) -> impl Iterator<Item = &Document> {
        self.documents.iter()
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.index.get(doc_id).map(|&i| &self.documents[i])
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.index.contains_key(doc_id)
    }

    /// Adds a document under a fresh `doc-<n>` id and returns the id.
    pub fn add_document(&mut self, title: &str, text: &str) -> Result<String, CorpusError> {
        self.insert(DocumentRecord {
            id: None,
            title: title.to_string(),
            text: text.to_string(),
        })
    }

    /// Adds a record, keeping its id when present.
    pub fn insert(&mut self, record: DocumentRecord) -> Result<String, CorpusError> {
        if record.text.trim().is_empty() {
            return Err(CorpusError::EmptyText);
        }
        let doc_id = match record.id {
            Some(id) if self.index.contains_key(&id) => return Err(CorpusError::DuplicateId(id)),
            Some(id) => id,
            None => self.fresh_id(),
        };
        let document = Document::new(doc_id.clone(), record.title, record.text);
        if let Some(log) = self.log.as_mut() {
            log.append(&document.to_record()).map_err(CorpusError::Persist)?;
        }
        self.index.insert(doc_id.clone(), self.documents.len());
        self.documents.push(document);
        Ok(doc_id)
    }

    pub fn storage_path(&self) -> Option<&Path> {
        self.log.as_ref().map(AppendLog::path)
    }

    fn fresh_id(&mut self) -> String {
        loop {
            self.next_auto += 1;
            let id = format!("doc-{}", self.next_auto);
            if !self.index.contains_key(&id) {
                return id;
            }
        }
    }
}

/// Parses corpus JSONL into records without assigning ids or checking
/// uniqueness. Blank lines are skipped; line numbers are 1-based.
pub fn parse_records(contents: &str) -> Result<Vec<DocumentRecord>, CorpusError> {
    contents
        .lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(n, line)| {
            serde_json::from_str(line).map_err(|e| CorpusError::Malformed {
                line: n + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Parses corpus JSONL text. Blank lines are skipped; line numbers in
/// errors are 1-based.
pub fn parse_corpus(contents: &str) -> Result<Corpus, CorpusError> {
    let mut corpus = Corpus::new();
    for (n, line) in contents.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: DocumentRecord = serde_json::from_str(line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        match corpus.insert(record) {
            Ok(_) => {}
            Err(CorpusError::DuplicateId(id)) => return Err(CorpusError::DuplicateRecord { line: line_no, id }),
            Err(CorpusError::EmptyText) => {
                return Err(CorpusError::Malformed {
                    line: line_no,
                    message: "empty text".into(),
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(corpus)
}

pub fn load_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    let contents = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_corpus(&contents)
}
