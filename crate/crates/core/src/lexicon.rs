//! Entity dictionary and mention matching.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{tokenize, Sentence};

/// Starter lexicon shipped with the crate.
pub const BUNDLED_LEXICON: &str = include_str!("../data/lexicon.jsonl");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read lexicon file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed lexicon entry on line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("ambiguous alias {alias:?}: claimed by {first} and {second}")]
    AmbiguousAlias {
        alias: String,
        first: String,
        second: String,
    },
    #[error("duplicate entity id {0:?}")]
    DuplicateEntity(String),
    #[error("entity {0:?} has no usable alias")]
    NoAliases(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityType {
    Gene,
    Protein,
    Disease,
    Drug,
    Chemical,
    Other,
}

impl EntityType {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityType::Gene => "gene",
            EntityType::Protein => "protein",
            EntityType::Disease => "disease",
            EntityType::Drug => "drug",
            EntityType::Chemical => "chemical",
            EntityType::Other => "other",
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gene" => Ok(EntityType::Gene),
            "protein" => Ok(EntityType::Protein),
            "disease" => Ok(EntityType::Disease),
            "drug" => Ok(EntityType::Drug),
            "chemical" => Ok(EntityType::Chemical),
            "other" => Ok(EntityType::Other),
            other => Err(format!("unknown entity type {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub entity_id: String,
    pub canonical_name: String,
    pub entity_type: EntityType,
    /// Always contains `canonical_name`.
    pub aliases: BTreeSet<String>,
}

impl Entity {
    pub fn new<I, S>(id: &str, entity_type: EntityType, canonical_name: &str, aliases: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut aliases: BTreeSet<String> = aliases.into_iter().map(Into::into).collect();
        aliases.insert(canonical_name.to_string());
        Self {
            entity_id: id.to_string(),
            canonical_name: canonical_name.to_string(),
            entity_type,
            aliases,
        }
    }
}

/// One line of the lexicon JSONL file. `name` defaults to the first alias.
#[derive(Debug, Deserialize)]
struct LexiconRecord {
    id: String,
    #[serde(rename = "type")]
    entity_type: EntityType,
    aliases: Vec<String>,
    #[serde(default)]
    name: Option<String>,
}

/// A resolved entity occurrence in a sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub entity_id: String,
    pub sentence_index: usize,
    pub token_span: Range<usize>,
    pub surface: String,
}

/// Immutable alias index over a set of entities. Aliases are matched as
/// case-folded token sequences.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entities: Vec<Entity>,
    by_id: HashMap<String, usize>,
    aliases: HashMap<String, usize>,
    max_alias_tokens: usize,
}

impl Lexicon {
    pub fn from_entities(entities: Vec<Entity>) -> Result<Self, LexiconError> {
        let mut lexicon = Lexicon::default();
        for entity in entities {
            lexicon.add(entity)?;
        }
        Ok(lexicon)
    }

    pub fn parse(contents: &str) -> Result<Self, LexiconError> {
        let mut lexicon = Lexicon::default();
        for (n, line) in contents.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let record: LexiconRecord = serde_json::from_str(line).map_err(|e| LexiconError::Malformed {
                line: n + 1,
                message: e.to_string(),
            })?;
            let name = match record.name.or_else(|| record.aliases.first().cloned()) {
                Some(name) => name,
                None => return Err(LexiconError::NoAliases(record.id)),
            };
            lexicon.add(Entity::new(&record.id, record.entity_type, &name, record.aliases))?;
        }
        Ok(lexicon)
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_LEXICON).expect("bundled lexicon is valid")
    }

    fn add(&mut self, entity: Entity) -> Result<(), LexiconError> {
        if self.by_id.contains_key(&entity.entity_id) {
            return Err(LexiconError::DuplicateEntity(entity.entity_id));
        }
        let slot = self.entities.len();
        let mut keys = Vec::new();
        for alias in &entity.aliases {
            let tokens = tokenize(alias);
            if tokens.is_empty() {
                continue;
            }
            let key = tokens.join(" ");
            if let Some(&other) = self.aliases.get(&key) {
                return Err(LexiconError::AmbiguousAlias {
                    alias: alias.clone(),
                    first: self.entities[other].entity_id.clone(),
                    second: entity.entity_id,
                });
            }
            keys.push((key, tokens.len()));
        }
        if keys.is_empty() {
            return Err(LexiconError::NoAliases(entity.entity_id));
        }
        for (key, len) in keys {
            self.max_alias_tokens = self.max_alias_tokens.max(len);
            self.aliases.insert(key, slot);
        }
        self.by_id.insert(entity.entity_id.clone(), slot);
        self.entities.push(entity);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn get(&self, entity_id: &str) -> Option<&Entity> {
        self.by_id.get(entity_id).map(|&i| &self.entities[i])
    }

    /// Looks up an entity by id, then by alias.
    pub fn resolve(&self, name: &str) -> Option<&Entity> {
        if let Some(entity) = self.get(name) {
            return Some(entity);
        }
        if let Some(entity) = self.entities.iter().find(|e| e.entity_id.eq_ignore_ascii_case(name)) {
            return Some(entity);
        }
        let key = tokenize(name).join(" ");
        self.aliases.get(&key).map(|&i| &self.entities[i])
    }

    /// Entities whose id or an alias contains `query` (case-insensitive),
    /// sorted by id. An empty query lists everything.
    pub fn search(&self, query: &str, limit: usize) -> Vec<&Entity> {
        let q = query.trim().to_lowercase();
        let mut hits: Vec<&Entity> = self
            .entities
            .iter()
            .filter(|e| {
                q.is_empty()
                    || e.entity_id.to_lowercase().contains(&q)
                    || e.aliases.iter().any(|a| a.to_lowercase().contains(&q))
            })
            .collect();
        hits.sort_by(|a, b| a.entity_id.cmp(&b.entity_id));
        hits.truncate(limit);
        hits
    }

    /// Non-overlapping alias matches over a token sequence. Among overlapping
    /// candidates the longest span wins; equal lengths go to the leftmost.
    /// Output is ordered by span start.
    pub fn match_tokens(&self, tokens: &[String]) -> Vec<(Range<usize>, &Entity)> {
        let mut candidates = Vec::new();
        for start in 0..tokens.len() {
            let longest = self.max_alias_tokens.min(tokens.len() - start);
            for len in 1..=longest {
                if let Some(&slot) = self.aliases.get(&tokens[start..start + len].join(" ")) {
                    candidates.push((start..start + len, slot));
                }
            }
        }
        candidates.sort_by(|(a, _), (b, _)| b.len().cmp(&a.len()).then(a.start.cmp(&b.start)));
        let mut taken = vec![false; tokens.len()];
        let mut chosen = Vec::new();
        for (span, slot) in candidates {
            if taken[span.clone()].iter().any(|&t| t) {
                continue;
            }
            taken[span.clone()].iter_mut().for_each(|t| *t = true);
            chosen.push((span, &self.entities[slot]));
        }
        chosen.sort_by_key(|(span, _)| span.start);
        chosen
    }
}

pub fn load_lexicon(path: &Path) -> Result<Lexicon, LexiconError> {
    let contents = fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Lexicon::parse(&contents)
}

pub fn match_entities(sentence: &Sentence, lexicon: &Lexicon) -> Vec<Mention> {
    lexicon
        .match_tokens(&sentence.tokens)
        .into_iter()
        .map(|(span, entity)| Mention {
            entity_id: entity.entity_id.clone(),
            sentence_index: sentence.index,
            surface: sentence.tokens[span.clone()].join(" "),
            token_span: span,
        })
        .collect()
}

/// Number of distinct entities among `mentions`.
pub fn distinct_entities(mentions: &[Mention]) -> usize {
    mentions
        .iter()
        .map(|m| m.entity_id.as_str())
        .collect::<BTreeSet<_>>()
        .len()
}
