//! Service configuration: defaults, a TOML or JSON file, then `HYPOTEST_*`
//! environment variables, then command-line flags.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use hypotest_core::extraction::{NegationLexicon, Rules, VerbList};
use hypotest_core::network::DEFAULT_MAX_HOPS;
use hypotest_core::stats::DEFAULT_ALPHA;
use hypotest_core::{load_corpus, load_lexicon, Engine, Lexicon};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_PREFIX: &str = "HYPOTEST_";
pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("invalid config file {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid value for {var}: {message}")]
    Env { var: String, message: String },
    #[error("alpha must lie in (0, 1), got {0}")]
    Alpha(f64),
    #[error("{what} path {path} is not readable")]
    Unreadable { what: &'static str, path: PathBuf },
}

/// Parses a hop bound: a non-negative integer, or "unbounded".
pub fn parse_hops(s: &str) -> Result<Option<usize>, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "unbounded" | "none" | "all" => Ok(None),
        n => n
            .parse()
            .map(Some)
            .map_err(|_| format!("expected a hop count or \"unbounded\", got {s:?}")),
    }
}

pub(crate) mod hops {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Count(usize),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<usize>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(n) => s.serialize_u64(*n as u64),
            None => s.serialize_str("unbounded"),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<usize>, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Count(n) => Ok(Some(n)),
            Raw::Text(t) => super::parse_hops(&t).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApiConfig {
    pub listen: String,
    /// Persistent storage. Without it everything lives in memory.
    pub data_dir: Option<PathBuf>,
    /// Corpus JSONL ingested at startup when the store holds no documents.
    pub corpus: Option<PathBuf>,
    /// Lexicon JSONL; the bundled lexicon when absent.
    pub lexicon: Option<PathBuf>,
    pub negation: Option<PathBuf>,
    pub verbs: Option<PathBuf>,
    pub alpha: f64,
    #[serde(with = "hops")]
    pub max_hops: Option<usize>,
    /// Directory served under `/`.
    pub static_dir: Option<PathBuf>,
}

impl Default for ApiConfig {
    fn default() -> Self {
        Self {
            listen: DEFAULT_LISTEN.to_string(),
            data_dir: None,
            corpus: None,
            lexicon: None,
            negation: None,
            verbs: None,
            alpha: DEFAULT_ALPHA,
            max_hops: Some(DEFAULT_MAX_HOPS),
            static_dir: None,
        }
    }
}

impl ApiConfig {
    /// Reads a config file. `.json` files are parsed as JSON, anything else
    /// as TOML.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let contents = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let parsed = if is_json {
            serde_json::from_str(&contents).map_err(|e| e.to_string())
        } else {
            toml::from_str(&contents).map_err(|e| e.to_string())
        };
        parsed.map_err(|message| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    /// Applies `HYPOTEST_<FIELD>` overrides read through `lookup`.
    pub fn apply_env<F>(&mut self, lookup: F) -> Result<(), ConfigError>
    where
        F: Fn(&str) -> Option<String>,
    {
        let var = |field: &str| {
            let name = format!("{ENV_PREFIX}{field}");
            lookup(&name).map(|v| (name, v))
        };
        if let Some((_, v)) = var("LISTEN") {
            self.listen = v;
        }
        for (field, slot) in [
            ("DATA_DIR", &mut self.data_dir),
            ("CORPUS", &mut self.corpus),
            ("LEXICON", &mut self.lexicon),
            ("NEGATION", &mut self.negation),
            ("VERBS", &mut self.verbs),
            ("STATIC_DIR", &mut self.static_dir),
        ] {
            if let Some((_, v)) = var(field) {
                *slot = (!v.is_empty()).then(|| PathBuf::from(v));
            }
        }
        if let Some((name, v)) = var("ALPHA") {
            self.alpha = v.trim().parse().map_err(|_| ConfigError::Env {
                var: name,
                message: format!("not a number: {v:?}"),
            })?;
        }
        if let Some((name, v)) = var("MAX_HOPS") {
            self.max_hops = parse_hops(&v).map_err(|message| ConfigError::Env { var: name, message })?;
        }
        Ok(())
    }

    pub fn apply_process_env(&mut self) -> Result<(), ConfigError> {
        self.apply_env(|name| std::env::var(name).ok())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ConfigError::Alpha(self.alpha));
        }
        for (what, path) in [
            ("corpus", &self.corpus),
            ("lexicon", &self.lexicon),
            ("negation list", &self.negation),
            ("verb list", &self.verbs),
        ] {
            if let Some(path) = path {
                if !path.is_file() {
                    return Err(ConfigError::Unreadable {
                        what,
                        path: path.clone(),
                    });
                }
            }
        }
        if let Some(dir) = &self.static_dir {
            if !dir.is_dir() {
                return Err(ConfigError::Unreadable {
                    what: "static",
                    path: dir.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn load_lexicon(&self) -> anyhow::Result<Lexicon> {
        Ok(match &self.lexicon {
            Some(path) => load_lexicon(path)?,
            None => Lexicon::bundled(),
        })
    }

    pub fn load_rules(&self) -> anyhow::Result<Rules> {
        let mut rules = Rules::default();
        if let Some(path) = &self.negation {
            rules.negation = NegationLexicon::load(path)?;
        }
        if let Some(path) = &self.verbs {
            rules.verbs = VerbList::load(path)?;
        }
        Ok(rules)
    }

    /// Builds the engine: opens the data directory (or memory), then
    /// ingests the configured corpus if no documents are stored yet.
    pub fn build_engine(&self) -> anyhow::Result<Engine> {
        let lexicon = self.load_lexicon()?;
        let rules = self.load_rules()?;
        let mut engine = match &self.data_dir {
            Some(dir) => Engine::open(dir, lexicon, rules)?,
            None => Engine::in_memory(lexicon, rules),
        };
        if let Some(path) = &self.corpus {
            if engine.corpus().is_empty() {
                let corpus = load_corpus(path)?;
                let records = corpus.iter().map(|d| d.to_record()).collect();
                let report = engine.ingest(records)?;
                tracing::info!(
                    documents = report.documents_added,
                    relations = report.relations_added,
                    "seeded corpus from {}",
                    path.display()
                );
            }
        }
        Ok(engine)
    }
}
