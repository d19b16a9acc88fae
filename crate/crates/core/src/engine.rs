//! Corpus, relation store and resources wired into one pipeline.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError, DocumentRecord};
use crate::extraction::{extract_relations, Rules};
use crate::hypothesis::{hypothesis_from_selection, parse_hypothesis, Hypothesis, HypothesisError};
use crate::lexicon::Lexicon;
use crate::network::{build_secondary_network, NetworkOptions, SecondaryNetwork};
use crate::stats::{evaluate_hypothesis, StatsError, TestParams, TestResult};
use crate::store::{RelationStore, StoreError};

pub const DOCUMENTS_FILE: &str = "documents.jsonl";
pub const RELATIONS_FILE: &str = "relations.jsonl";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Hypothesis(#[from] HypothesisError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("record {index}: {message}")]
    InvalidRecord { index: usize, message: String },
    #[error("record {index}: document {id:?} already exists with different content")]
    ConflictingDocument { index: usize, id: String },
    #[error("unknown entity {0:?}")]
    UnknownEntity(String),
    #[error("at least one seed entity is required")]
    NoSeeds,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    /// Records accepted, including ones already present.
    pub ingested: usize,
    pub documents_added: usize,
    /// Records whose id already existed with identical content.
    pub unchanged: usize,
    pub relations_added: usize,
}

/// Everything a hypothesis test needs. Mutation happens only via
/// [`Engine::ingest`].
#[derive(Debug)]
pub struct Engine {
    corpus: Corpus,
    store: RelationStore,
    lexicon: Lexicon,
    rules: Rules,
    data_dir: Option<PathBuf>,
}

impl Engine {
    pub fn in_memory(lexicon: Lexicon, rules: Rules) -> Self {
        Self {
            corpus: Corpus::new(),
            store: RelationStore::new(),
            lexicon,
            rules,
            data_dir: None,
        }
    }

    /// Opens (or creates) a persistent engine under `data_dir`. Documents
    /// whose extraction did not complete before the last shutdown are
    /// extracted again.
    pub fn open(data_dir: &Path, lexicon: Lexicon, rules: Rules) -> Result<Self, EngineError> {
        let corpus = Corpus::open(&data_dir.join(DOCUMENTS_FILE))?;
        let store = RelationStore::open(&data_dir.join(RELATIONS_FILE))?;
        let mut engine = Self {
            corpus,
            store,
            lexicon,
            rules,
            data_dir: Some(data_dir.to_path_buf()),
        };
        let pending: Vec<String> = engine
            .corpus
            .iter()
            .filter(|d| !engine.store.is_registered(&d.doc_id))
            .map(|d| d.doc_id.clone())
            .collect();
        for doc_id in pending {
            engine.extract_document(&doc_id)?;
        }
        Ok(engine)
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn store(&self) -> &RelationStore {
        &self.store
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn rules(&self) -> &Rules {
        &self.rules
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.data_dir.as_deref()
    }

    fn extract_document(&mut self, doc_id: &str) -> Result<usize, EngineError> {
        let doc = self
            .corpus
            .get(doc_id)
            .expect("extracting a document that is in the corpus");
        let mut added = 0;
        for relation in extract_relations(doc, &self.lexicon, &self.rules) {
            if self.store.save_relation(relation)? {
                added += 1;
            }
        }
        self.store.register_document(doc_id)?;
        Ok(added)
    }

    /// Adds documents and extracts their relations. The whole batch is
    /// validated before anything is written. A record whose id is already
    /// stored with the same title and text is accepted as unchanged.
    pub fn ingest(&mut self, records: Vec<DocumentRecord>) -> Result<IngestReport, EngineError> {
        let mut batch_ids: Vec<(&str, &DocumentRecord)> = Vec::new();
        for (index, record) in records.iter().enumerate() {
            if record.text.trim().is_empty() {
                return Err(EngineError::InvalidRecord {
                    index,
                    message: "empty text".into(),
                });
            }
            let Some(id) = record.id.as_deref() else {
                continue;
            };
            if id.trim().is_empty() {
                return Err(EngineError::InvalidRecord {
                    index,
                    message: "empty id".into(),
                });
            }
            let conflicts_stored = self
                .corpus
                .get(id)
                .is_some_and(|d| d.text != record.text || d.title != record.title);
            let conflicts_batch = batch_ids
                .iter()
                .any(|(other, r)| *other == id && (r.text != record.text || r.title != record.title));
            if conflicts_stored || conflicts_batch {
                return Err(EngineError::ConflictingDocument {
                    index,
                    id: id.to_string(),
                });
            }
            batch_ids.push((id, record));
        }

        let mut report = IngestReport::default();
        for record in records {
            report.ingested += 1;
            let existing = record
                .id
                .as_deref()
                .filter(|id| self.corpus.contains(id))
                .map(str::to_string);
            let doc_id = match existing {
                Some(id) => {
                    report.unchanged += 1;
                    if self.store.is_registered(&id) {
                        continue;
                    }
                    id
                }
                None => {
                    report.documents_added += 1;
                    self.corpus.insert(record)?
                }
            };
            report.relations_added += self.extract_document(&doc_id)?;
        }
        Ok(report)
    }

    pub fn parse_hypothesis(&self, text: &str) -> Result<Hypothesis, HypothesisError> {
        parse_hypothesis(text, &self.lexicon, &self.rules)
    }

    pub fn hypothesis_from_selection(
        &self,
        subject: &str,
        object: &str,
        predicate: &str,
        negated: bool,
    ) -> Result<(Hypothesis, String), HypothesisError> {
        hypothesis_from_selection(subject, object, predicate, negated, &self.lexicon, &self.rules)
    }

    pub fn evaluate(&self, h: &Hypothesis, params: &TestParams) -> Result<TestResult, StatsError> {
        evaluate_hypothesis(h, &self.store, &self.corpus, params)
    }

    /// Parses `text` and tests it against the corpus.
    pub fn test_hypothesis(&self, text: &str, params: &TestParams) -> Result<TestResult, EngineError> {
        params.validate()?;
        let h = self.parse_hypothesis(text)?;
        Ok(self.evaluate(&h, params)?)
    }

    /// Secondary network around entities given by id or alias.
    pub fn network<S: AsRef<str>>(
        &self,
        entities: &[S],
        opts: NetworkOptions,
    ) -> Result<SecondaryNetwork, EngineError> {
        if entities.is_empty() {
            return Err(EngineError::NoSeeds);
        }
        let seeds = entities
            .iter()
            .map(|name| {
                self.lexicon
                    .resolve(name.as_ref())
                    .map(|e| e.entity_id.clone())
                    .ok_or_else(|| EngineError::UnknownEntity(name.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.network_for_ids(&seeds, opts))
    }

    pub fn network_for_ids(&self, seeds: &[String], opts: NetworkOptions) -> SecondaryNetwork {
        build_secondary_network(&self.store, &self.lexicon, seeds, opts)
    }
}
