//! Secondary network: every entity within reach of the hypothesis entities
//! over the corpus-wide relation graph.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extraction::Polarity;
use crate::lexicon::{EntityType, Lexicon};
use crate::store::RelationStore;

pub const DEFAULT_MAX_HOPS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("unknown export format {0:?} (expected dot or json)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkOptions {
    /// `None` expands without bound.
    pub max_hops: Option<usize>,
    pub positive_only: bool,
}

impl Default for NetworkOptions {
    fn default() -> Self {
        Self {
            max_hops: Some(DEFAULT_MAX_HOPS),
            positive_only: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkNode {
    pub id: String,
    #[serde(rename = "type")]
    pub entity_type: EntityType,
    /// Distance to the nearest seed.
    pub hops: usize,
}

/// Corpus-wide edge: relations sharing pair, predicate and polarity merged
/// across documents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkEdge {
    pub source: String,
    pub target: String,
    pub predicate: String,
    pub polarity: Polarity,
    pub evidence_count: usize,
    pub doc_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecondaryNetwork {
    pub seeds: Vec<String>,
    pub nodes: Vec<NetworkNode>,
    pub edges: Vec<NetworkEdge>,
    #[serde(default)]
    pub max_hops: Option<usize>,
    /// Set when no relation touches any seed.
    #[serde(default)]
    pub no_evidence: bool,
}

impl SecondaryNetwork {
    pub fn node(&self, id: &str) -> Option<&NetworkNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn node_ids(&self) -> BTreeSet<&str> {
        self.nodes.iter().map(|n| n.id.as_str()).collect()
    }
}

/// Merged relation graph over all documents.
#[derive(Debug, Clone, Default)]
pub struct GlobalGraph {
    edges: Vec<NetworkEdge>,
    adjacency: BTreeMap<String, BTreeSet<String>>,
}

impl GlobalGraph {
    pub fn from_store(store: &RelationStore, positive_only: bool) -> Self {
        let mut merged: BTreeMap<(&str, &str, &str, Polarity), BTreeSet<&str>> = BTreeMap::new();
        for r in store.relations() {
            if positive_only && r.polarity == Polarity::Negative {
                continue;
            }
            merged
                .entry((&r.subject, &r.object, &r.predicate, r.polarity))
                .or_default()
                .insert(&r.doc_id);
        }
        let mut graph = GlobalGraph::default();
        for ((source, target, predicate, polarity), docs) in merged {
            graph.add_edge(NetworkEdge {
                source: source.to_string(),
                target: target.to_string(),
                predicate: predicate.to_string(),
                polarity,
                evidence_count: docs.len(),
                doc_ids: docs.into_iter().map(str::to_string).collect(),
            });
        }
        graph
    }

    pub fn from_edges(edges: impl IntoIterator<Item = NetworkEdge>) -> Self {
        let mut graph = GlobalGraph::default();
        for e in edges {
            graph.add_edge(e);
        }
        graph
    }

    fn add_edge(&mut self, edge: NetworkEdge) {
        self.adjacency
            .entry(edge.source.clone())
            .or_default()
            .insert(edge.target.clone());
        self.adjacency
            .entry(edge.target.clone())
            .or_default()
            .insert(edge.source.clone());
        self.edges.push(edge);
    }

    pub fn edges(&self) -> &[NetworkEdge] {
        &self.edges
    }

    pub fn neighbors(&self, entity: &str) -> impl Iterator<Item = &str> {
        self.adjacency
            .get(entity)
            .into_iter()
            .flat_map(|n| n.iter().map(String::as_str))
    }

    /// Multi-source BFS distances, bounded by `max_hops`.
    pub fn distances<S: AsRef<str>>(&self, seeds: &[S], max_hops: Option<usize>) -> BTreeMap<String, usize> {
        let mut dist: BTreeMap<String, usize> = BTreeMap::new();
        let mut queue = VecDeque::new();
        for s in seeds {
            let s = s.as_ref();
            if !dist.contains_key(s) {
                dist.insert(s.to_string(), 0);
                queue.push_back(s.to_string());
            }
        }
        while let Some(node) = queue.pop_front() {
            let d = dist[&node];
            if max_hops.is_some_and(|m| d >= m) {
                continue;
            }
            for next in self.neighbors(&node) {
                if !dist.contains_key(next) {
                    dist.insert(next.to_string(), d + 1);
                    queue.push_back(next.to_string());
                }
            }
        }
        dist
    }
}

/// Entities reachable from `from` within `max_hops`, including itself.
pub fn reachable(graph: &GlobalGraph, from: &str, max_hops: Option<usize>) -> BTreeSet<String> {
    graph.distances(&[from], max_hops).into_keys().collect()
}

pub fn build_secondary_network(
    store: &RelationStore,
    lexicon: &Lexicon,
    seeds: &[String],
    opts: NetworkOptions,
) -> SecondaryNetwork {
    let graph = GlobalGraph::from_store(store, opts.positive_only);
    network_from_graph(&graph, lexicon, seeds, opts.max_hops)
}

pub fn network_from_graph(
    graph: &GlobalGraph,
    lexicon: &Lexicon,
    seeds: &[String],
    max_hops: Option<usize>,
) -> SecondaryNetwork {
    let mut unique_seeds: Vec<String> = Vec::new();
    for s in seeds {
        if !unique_seeds.contains(s) {
            unique_seeds.push(s.clone());
        }
    }
    let dist = graph.distances(&unique_seeds, max_hops);
    let mut edges: Vec<NetworkEdge> = graph
        .edges()
        .iter()
        .filter(|e| dist.contains_key(&e.source) && dist.contains_key(&e.target))
        .cloned()
        .collect();
    edges.sort_by(|a, b| {
        (&a.source, &a.target, &a.predicate, a.polarity).cmp(&(&b.source, &b.target, &b.predicate, b.polarity))
    });
    let nodes = dist
        .into_iter()
        .map(|(id, hops)| NetworkNode {
            entity_type: lexicon.get(&id).map_or(EntityType::Other, |e| e.entity_type),
            id,
            hops,
        })
        .collect();
    SecondaryNetwork {
        no_evidence: edges.is_empty(),
        seeds: unique_seeds,
        nodes,
        edges,
        max_hops,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Dot,
    Json,
}

impl FromStr for ExportFormat {
    type Err = NetworkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dot" => Ok(ExportFormat::Dot),
            "json" => Ok(ExportFormat::Json),
            _ => Err(NetworkError::UnknownFormat(s.to_string())),
        }
    }
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn to_dot(n: &SecondaryNetwork) -> String {
    let mut out = String::from("graph secondary_network {\n");
    for node in &n.nodes {
        if n.seeds.contains(&node.id) {
            let _ = writeln!(out, "  {} [shape=doublecircle];", dot_id(&node.id));
        } else {
            let _ = writeln!(out, "  {};", dot_id(&node.id));
        }
    }
    for e in &n.edges {
        let tooltip = dot_id(&format!("{} ({})", e.predicate, e.evidence_count));
        let style = match e.polarity {
            Polarity::Negative => "style=dashed, label=\"-\"",
            Polarity::Positive => "label=\"+\"",
        };
        let _ = writeln!(
            out,
            "  {} -- {} [{style}, tooltip={tooltip}];",
            dot_id(&e.source),
            dot_id(&e.target)
        );
    }
    out.push_str("}\n");
    out
}

pub fn export_network(n: &SecondaryNetwork, format: ExportFormat) -> Vec<u8> {
    match format {
        ExportFormat::Dot => to_dot(n).into_bytes(),
        ExportFormat::Json => {
            let mut bytes = serde_json::to_vec_pretty(n).expect("network serializes");
            bytes.push(b'\n');
            bytes
        }
    }
}
