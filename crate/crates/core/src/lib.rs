//! Literature-backed hypothesis testing.
//!
//! Documents are segmented into sentences, entity mentions are resolved
//! against a lexicon, and each sentence naming two or more entities yields
//! signed relations (negation parity decides the sign). A hypothesis such
//! as "Carvedilol not causes Weight Gain" is normalized the same way, the
//! documents supporting it are counted, and a one-degree-of-freedom
//! chi-square test against a user-chosen expected count accepts or rejects
//! it. A secondary network of entities around the hypothesis pair supports
//! iterating on new hypotheses.

pub mod corpus;
pub mod engine;
pub mod extraction;
pub mod hypothesis;
pub mod lexicon;
mod log;
pub mod network;
pub mod stats;
pub mod stem;
pub mod store;

pub use corpus::{
    load_corpus, parse_corpus, parse_records, split_sentences, Corpus, Document, DocumentRecord, Sentence,
};
pub use engine::{Engine, EngineError, IngestReport};
pub use extraction::{
    classify_polarity, extract_predicate, extract_relations, NegationLexicon, Polarity, Relation, Rules, VerbList,
};
pub use hypothesis::{hypothesis_from_selection, parse_hypothesis, Hypothesis, HypothesisError};
pub use lexicon::{load_lexicon, match_entities, Entity, EntityType, Lexicon, Mention};
pub use network::{
    build_secondary_network, export_network, reachable, ExportFormat, GlobalGraph, NetworkOptions, SecondaryNetwork,
};
pub use stats::{
    chi_square, count_support, decide, p_value, paper_supports, Decision, SupportCount, SupportMode, SupportOptions,
    TestParams, TestResult,
};
pub use stem::stem;
pub use store::{PaperGraph, RelationStore};
