//! Deduplicated relation storage with per-document and per-entity indices.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extraction::{Relation, RelationKey};
use crate::log::AppendLog;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cannot open relation store {path}: {source}")]
    Open {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("corrupt relation store {path}, line {line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("failed to persist relation: {0}")]
    Persist(#[source] io::Error),
    #[error("unknown document {0:?}")]
    UnknownDocument(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum LogRecord {
    Document { doc_id: String },
    Relation(Relation),
}

/// Relations of a single document as an undirected signed graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaperGraph {
    pub doc_id: String,
    pub nodes: BTreeSet<String>,
    pub edges: Vec<Relation>,
}

impl PaperGraph {
    pub fn from_edges(doc_id: &str, edges: Vec<Relation>) -> Self {
        let nodes = edges
            .iter()
            .flat_map(|r| [r.subject.clone(), r.object.clone()])
            .collect();
        Self {
            doc_id: doc_id.to_string(),
            nodes,
            edges,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

fn stable_order(a: &Relation, b: &Relation) -> Ordering {
    a.doc_id
        .cmp(&b.doc_id)
        .then(a.sentence_index.cmp(&b.sentence_index))
        .then_with(|| a.subject.cmp(&b.subject))
        .then_with(|| a.object.cmp(&b.object))
        .then_with(|| a.predicate.cmp(&b.predicate))
        .then(a.polarity.cmp(&b.polarity))
}

/// Relation set keyed by [`RelationKey`]. Documents are registered once
/// their extraction has completed, which lets documents without relations
/// still be addressed by [`RelationStore::paper_graph`].
#[derive(Debug, Default)]
pub struct RelationStore {
    relations: Vec<Relation>,
    keys: HashMap<RelationKey, usize>,
    by_doc: BTreeMap<String, Vec<usize>>,
    by_entity: HashMap<String, Vec<usize>>,
    completed: BTreeSet<String>,
    log: Option<AppendLog>,
}

impl RelationStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Opens the store persisted at `path`, replaying its log.
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        let open_err = |source| StoreError::Open {
            path: path.to_path_buf(),
            source,
        };
        let log = AppendLog::open(path).map_err(open_err)?;
        let contents = fs::read_to_string(path).map_err(open_err)?;
        let mut store = Self::new();
        for (n, line) in contents.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: LogRecord = serde_json::from_str(line).map_err(|e| StoreError::Corrupt {
                path: path.to_path_buf(),
                line: n + 1,
                message: e.to_string(),
            })?;
            match record {
                LogRecord::Document { doc_id } => {
                    store.by_doc.entry(doc_id.clone()).or_default();
                    store.completed.insert(doc_id);
                }
                LogRecord::Relation(r) => {
                    store.index(r);
                }
            }
        }
        store.log = Some(log);
        Ok(store)
    }

    fn index(&mut self, r: Relation) -> bool {
        let key = r.key();
        if self.keys.contains_key(&key) {
            return false;
        }
        let slot = self.relations.len();
        self.keys.insert(key, slot);
        self.by_doc.entry(r.doc_id.clone()).or_default().push(slot);
        self.by_entity.entry(r.subject.clone()).or_default().push(slot);
        self.by_entity.entry(r.object.clone()).or_default().push(slot);
        self.relations.push(r);
        true
    }

    /// Stores `r` unless an equal key is already present. Returns whether
    /// it was new. The relation is on disk before the indices change.
    pub fn save_relation(&mut self, r: Relation) -> Result<bool, StoreError> {
        if self.keys.contains_key(&r.key()) {
            return Ok(false);
        }
        if let Some(log) = self.log.as_mut() {
            log.append(&LogRecord::Relation(r.clone()))
                .map_err(StoreError::Persist)?;
        }
        Ok(self.index(r))
    }

    /// Marks a document's extraction as complete.
    pub fn register_document(&mut self, doc_id: &str) -> Result<bool, StoreError> {
        if self.completed.contains(doc_id) {
            return Ok(false);
        }
        if let Some(log) = self.log.as_mut() {
            log.append(&LogRecord::Document {
                doc_id: doc_id.to_string(),
            })
            .map_err(StoreError::Persist)?;
        }
        self.by_doc.entry(doc_id.to_string()).or_default();
        self.completed.insert(doc_id.to_string());
        Ok(true)
    }

    pub fn is_registered(&self, doc_id: &str) -> bool {
        self.completed.contains(doc_id)
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn contains(&self, key: &RelationKey) -> bool {
        self.keys.contains_key(key)
    }

    /// Document ids known to the store, sorted.
    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.by_doc.keys().map(String::as_str)
    }

    fn collect_sorted(&self, slots: &[usize]) -> Vec<&Relation> {
        let mut out: Vec<&Relation> = slots.iter().map(|&i| &self.relations[i]).collect();
        out.sort_by(|a, b| stable_order(a, b));
        out
    }

    /// All relations ordered by document, sentence and pair.
    pub fn relations(&self) -> Vec<&Relation> {
        let mut out: Vec<&Relation> = self.relations.iter().collect();
        out.sort_by(|a, b| stable_order(a, b));
        out
    }

    pub fn paper_graph(&self, doc_id: &str) -> Result<PaperGraph, StoreError> {
        let slots = self
            .by_doc
            .get(doc_id)
            .ok_or_else(|| StoreError::UnknownDocument(doc_id.to_string()))?;
        let edges = self.collect_sorted(slots).into_iter().cloned().collect();
        Ok(PaperGraph::from_edges(doc_id, edges))
    }

    pub fn query_entity(&self, entity_id: &str) -> Vec<&Relation> {
        self.by_entity
            .get(entity_id)
            .map(|slots| self.collect_sorted(slots))
            .unwrap_or_default()
    }

    pub fn storage_path(&self) -> Option<&Path> {
        self.log.as_ref().map(AppendLog::path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::Polarity;
    use proptest::prelude::*;

    fn rel(a: &str, b: &str, p: Polarity, doc: &str) -> Relation {
        Relation::new(a, b, "bind", p, doc, 0, "evidence").unwrap()
    }

    #[test]
    fn save_is_deduplicated() {
        let mut store = RelationStore::new();
        assert!(store.save_relation(rel("A", "B", Polarity::Positive, "d1")).unwrap());
        assert!(!store.save_relation(rel("B", "A", Polarity::Positive, "d1")).unwrap());
        assert_eq!(store.len(), 1);
        assert!(store.save_relation(rel("A", "B", Polarity::Negative, "d1")).unwrap());
        assert_eq!(store.len(), 2);
    }

    #[test]
    fn paper_graph_contents() {
        let mut store = RelationStore::new();
        store.save_relation(rel("A", "B", Polarity::Positive, "d1")).unwrap();
        store.save_relation(rel("B", "C", Polarity::Positive, "d1")).unwrap();
        store.save_relation(rel("X", "Y", Polarity::Positive, "d2")).unwrap();
        store.register_document("d3").unwrap();
        let g = store.paper_graph("d1").unwrap();
        assert_eq!(g.nodes.len(), 3);
        assert_eq!(g.edges.len(), 2);
        assert!(store.paper_graph("d3").unwrap().is_empty());
        assert!(matches!(store.paper_graph("nope"), Err(StoreError::UnknownDocument(_))));
    }

    #[test]
    fn query_unknown_entity_is_empty() {
        let store = RelationStore::new();
        assert!(store.query_entity("Z").is_empty());
    }

    #[test]
    fn persists_across_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("relations.jsonl");
        let r = Relation::new(
            "MC4R",
            "Obesity",
            "cause",
            Polarity::Negative,
            "doc-3",
            4,
            "MC4R does not cause obesity.",
        )
        .unwrap();
        {
            let mut store = RelationStore::open(&path).unwrap();
            assert!(store.save_relation(r.clone()).unwrap());
            store.register_document("doc-3").unwrap();
        }
        let mut store = RelationStore::open(&path).unwrap();
        assert_eq!(store.query_entity("MC4R"), [&r]);
        assert!(store.is_registered("doc-3"));
        assert!(!store.save_relation(r).unwrap());
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn corrupt_log_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("relations.jsonl");
        fs::write(
            &path,
            "{\"kind\":\"document\",\"doc_id\":\"a\"}\n{\"kind\":\"bogus\"}\n",
        )
        .unwrap();
        assert!(matches!(
            RelationStore::open(&path),
            Err(StoreError::Corrupt { line: 2, .. })
        ));
    }

    fn arb_relations() -> impl Strategy<Value = Vec<Relation>> {
        proptest::collection::vec((0usize..5, 0usize..5, prop::bool::ANY, 0usize..3, 0usize..3), 0..40).prop_map(
            |specs| {
                specs
                    .into_iter()
                    .filter_map(|(a, b, neg, doc, sent)| {
                        let p = if neg { Polarity::Negative } else { Polarity::Positive };
                        Relation::new(
                            &format!("E{a}"),
                            &format!("E{b}"),
                            "bind",
                            p,
                            &format!("d{doc}"),
                            sent,
                            "",
                        )
                    })
                    .collect()
            },
        )
    }

    proptest! {
        #[test]
        fn indices_agree_with_full_scan(rels in arb_relations()) {
            let mut store = RelationStore::new();
            for r in &rels {
                store.save_relation(r.clone()).unwrap();
            }
            let all: Vec<Relation> = store.relations().into_iter().cloned().collect();
            // Per-document graphs partition the relation set.
            let total: usize = store.doc_ids().map(|d| store.paper_graph(d).unwrap().edges.len()).sum();
            prop_assert_eq!(total, store.len());
            for doc in store.doc_ids() {
                let mut expected: Vec<&Relation> = all.iter().filter(|r| r.doc_id == doc).collect();
                expected.sort_by(|a, b| stable_order(a, b));
                let graph = store.paper_graph(doc).unwrap();
                prop_assert_eq!(graph.edges.iter().collect::<Vec<_>>(), expected);
            }
            for e in 0..5 {
                let id = format!("E{e}");
                let expected: Vec<&Relation> = all.iter().filter(|r| r.involves(&id)).collect();
                prop_assert_eq!(store.query_entity(&id), expected);
            }
            // Re-saving everything is a no-op.
            for r in &rels {
                prop_assert!(!store.save_relation(r.clone()).unwrap());
            }
            prop_assert_eq!(store.len(), all.len());
        }
    }
}
