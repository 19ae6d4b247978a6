//! Knowledge-graph profiles: conversion to a qDB and reconstruction of
//! sub-profiles from sampled patterns.
//!
//! A profile is a graph whose nodes carry sets of concepts or terms and whose
//! edges carry a predicate and an occurrence count. Edges become items,
//! grouped into one transaction per node and direction.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qdb::{DbStats, PriceTable, QdbBuilder, QuantitativeDatabase};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileNode {
    pub id: String,
    pub concepts: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileEdge {
    pub id: String,
    pub source: String,
    pub predicate: String,
    pub target: String,
    pub weight: u64,
    /// Concepts of the source node this edge actually links from. Defaults
    /// to the whole source node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<BTreeSet<String>>,
    /// Concepts of the target node this edge links to. Defaults to the whole
    /// target node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<BTreeSet<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Profile {
    pub nodes: Vec<ProfileNode>,
    pub edges: Vec<ProfileEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ProfileStats {
    pub nodes: usize,
    pub edges: usize,
    pub predicates: usize,
    pub concepts: usize,
    pub transactions: DbStats,
}

impl Profile {
    pub fn from_json(text: &str) -> Result<Self> {
        let p: Profile = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let mut nodes: HashMap<&str, &ProfileNode> = HashMap::new();
        for n in &self.nodes {
            if n.concepts.is_empty() {
                return Err(Error::Profile(format!("node {:?} has no concepts", n.id)));
            }
            if nodes.insert(&n.id, n).is_some() {
                return Err(Error::Profile(format!("duplicate node id {:?}", n.id)));
            }
        }
        let mut edge_ids = HashSet::new();
        for e in &self.edges {
            if !edge_ids.insert(&e.id) {
                return Err(Error::Profile(format!("duplicate edge id {:?}", e.id)));
            }
            if e.weight == 0 {
                return Err(Error::Profile(format!("edge {:?} has weight 0", e.id)));
            }
            for (end, side, subset) in [
                (&e.source, "source", &e.subject),
                (&e.target, "target", &e.object),
            ] {
                let node = nodes.get(end.as_str()).ok_or_else(|| {
                    Error::Profile(format!("edge {:?} has unknown {side} {end:?}", e.id))
                })?;
                if let Some(subset) = subset {
                    if subset.is_empty() || !subset.is_subset(&node.concepts) {
                        return Err(Error::Profile(format!(
                            "edge {:?}: {side} concepts must be a non-empty subset of node {end:?}",
                            e.id
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn node(&self, id: &str) -> &ProfileNode {
        self.nodes
            .iter()
            .find(|n| n.id == id)
            .expect("validated endpoint")
    }

    fn subject_of(&self, e: &ProfileEdge) -> BTreeSet<String> {
        e.subject
            .clone()
            .unwrap_or_else(|| self.node(&e.source).concepts.clone())
    }

    fn object_of(&self, e: &ProfileEdge) -> BTreeSet<String> {
        e.object
            .clone()
            .unwrap_or_else(|| self.node(&e.target).concepts.clone())
    }

    pub fn stats(&self, weights: &PredicateWeights, direction: Direction) -> Result<ProfileStats> {
        let qdb = profile_to_qdb(self, weights, direction)?;
        let predicates: HashSet<&str> = self.edges.iter().map(|e| e.predicate.as_str()).collect();
        let concepts: HashSet<&str> = self
            .nodes
            .iter()
            .flat_map(|n| n.concepts.iter().map(String::as_str))
            .collect();
        Ok(ProfileStats {
            nodes: self.nodes.len(),
            edges: self.edges.len(),
            predicates: predicates.len(),
            concepts: concepts.len(),
            transactions: qdb.db.stats(),
        })
    }
}

/// User weight per predicate; predicates not listed weigh 1.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PredicateWeights(BTreeMap<String, u64>);

impl PredicateWeights {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, predicate: impl Into<String>, weight: u64) -> Result<()> {
        let predicate = predicate.into();
        if weight == 0 {
            return Err(Error::InvalidRequest(format!(
                "predicate {predicate:?} has weight 0"
            )));
        }
        self.0.insert(predicate, weight);
        Ok(())
    }

    pub fn get(&self, predicate: &str) -> u64 {
        self.0.get(predicate).copied().unwrap_or(1)
    }

    pub fn validate(&self) -> Result<()> {
        match self.0.iter().find(|(_, &w)| w == 0) {
            Some((p, _)) => Err(Error::InvalidRequest(format!("predicate {p:?} has weight 0"))),
            None => Ok(()),
        }
    }

    /// Sorted non-default entries; equal for weight tables that price every
    /// predicate the same.
    pub fn canonical(&self) -> Vec<(String, u64)> {
        self.0
            .iter()
            .filter(|(_, &w)| w != 1)
            .map(|(p, &w)| (p.clone(), w))
            .collect()
    }
}

impl FromIterator<(String, u64)> for PredicateWeights {
    fn from_iter<I: IntoIterator<Item = (String, u64)>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Out,
    In,
    #[default]
    Both,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Out => "out",
            Direction::In => "in",
            Direction::Both => "both",
        })
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "out" => Ok(Direction::Out),
            "in" => Ok(Direction::In),
            "both" => Ok(Direction::Both),
            _ => Err(Error::InvalidRequest(format!(
                "direction must be out, in or both, got {s:?}"
            ))),
        }
    }
}

/// A profile turned into a qDB. Item labels are edge ids; `ItemId(k)` is the
/// `k`-th profile edge.
#[derive(Debug, Clone)]
pub struct ProfileQdb {
    pub db: QuantitativeDatabase,
    /// Owning node and direction of each transaction.
    pub groups: Vec<(String, Direction)>,
}

/// One transaction per node and direction: OUT groups the edges leaving the
/// node, IN the edges entering it. Nodes are visited in profile order, OUT
/// before IN. Item price is the predicate weight, quantity the edge weight.
pub fn profile_to_qdb(
    profile: &Profile,
    weights: &PredicateWeights,
    direction: Direction,
) -> Result<ProfileQdb> {
    profile.validate()?;
    weights.validate()?;
    let prices: PriceTable = profile
        .edges
        .iter()
        .map(|e| (e.id.clone(), weights.get(&e.predicate)))
        .collect();
    let mut builder = QdbBuilder::new(prices);
    for e in &profile.edges {
        builder.intern(&e.id);
    }
    let mut groups = Vec::new();
    let sides: &[Direction] = match direction {
        Direction::Out => &[Direction::Out],
        Direction::In => &[Direction::In],
        Direction::Both => &[Direction::Out, Direction::In],
    };
    for node in &profile.nodes {
        for &side in sides {
            let items = profile
                .edges
                .iter()
                .filter(|e| match side {
                    Direction::Out => e.source == node.id,
                    _ => e.target == node.id,
                })
                .map(|e| (e.id.as_str(), e.weight));
            if builder.push(items)?.is_some() {
                groups.push((node.id.clone(), side));
            }
        }
    }
    Ok(ProfileQdb {
        db: builder.finish(),
        groups,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubProfileNode {
    pub id: String,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubProfileEdge {
    pub id: String,
    pub source: String,
    pub target: String,
    pub predicate: String,
    pub weight: u64,
}

/// Induced graph on a set of edges, with nodes sharing a concept merged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubProfile {
    pub nodes: Vec<SubProfileNode>,
    pub edges: Vec<SubProfileEdge>,
}

impl SubProfile {
    /// Number of triples.
    pub fn triples(&self) -> usize {
        self.edges.len()
    }
}

struct DisjointSets(Vec<usize>);

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

struct Endpoints {
    id: String,
    predicate: String,
    weight: u64,
    subject: BTreeSet<String>,
    object: BTreeSet<String>,
}

/// Merges endpoint sets that share a concept, transitively, and lays out the
/// result canonically: nodes sorted by labels, edges by id.
fn assemble(mut edges: Vec<Endpoints>) -> SubProfile {
    edges.sort_by(|a, b| a.id.cmp(&b.id));
    edges.dedup_by(|a, b| a.id == b.id);
    let slots: Vec<&BTreeSet<String>> = edges.iter().flat_map(|e| [&e.subject, &e.object]).collect();
    let mut sets = DisjointSets::new(slots.len());
    let mut owner: HashMap<&str, usize> = HashMap::new();
    for (slot, concepts) in slots.iter().enumerate() {
        for c in concepts.iter() {
            match owner.get(c.as_str()) {
                Some(&other) => sets.union(slot, other),
                None => {
                    owner.insert(c, slot);
                }
            }
        }
    }
    let mut merged: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
    for (slot, concepts) in slots.iter().enumerate() {
        let root = sets.find(slot);
        merged.entry(root).or_default().extend(concepts.iter().cloned());
    }
    let mut groups: Vec<(Vec<String>, usize)> = merged
        .into_iter()
        .map(|(root, labels)| (labels.into_iter().collect(), root))
        .collect();
    groups.sort();
    let node_id: HashMap<usize, String> = groups
        .iter()
        .enumerate()
        .map(|(k, (_, root))| (*root, format!("s{k}")))
        .collect();
    let nodes = groups
        .iter()
        .enumerate()
        .map(|(k, (labels, _))| SubProfileNode {
            id: format!("s{k}"),
            labels: labels.clone(),
        })
        .collect();
    let edges = edges
        .iter()
        .enumerate()
        .map(|(k, e)| SubProfileEdge {
            id: e.id.clone(),
            source: node_id[&sets.find(2 * k)].clone(),
            target: node_id[&sets.find(2 * k + 1)].clone(),
            predicate: e.predicate.clone(),
            weight: e.weight,
        })
        .collect();
    SubProfile { nodes, edges }
}

/// Sub-profile induced by the edges named in `items` (edge ids, as in
/// sample records).
pub fn pattern_to_subprofile<S: AsRef<str>>(items: &[S], profile: &Profile) -> Result<SubProfile> {
    let by_id: HashMap<&str, &ProfileEdge> =
        profile.edges.iter().map(|e| (e.id.as_str(), e)).collect();
    let edges = items
        .iter()
        .map(|item| {
            let e = by_id
                .get(item.as_ref())
                .ok_or_else(|| Error::UnmappedItem(item.as_ref().to_string()))?;
            Ok(Endpoints {
                id: e.id.clone(),
                predicate: e.predicate.clone(),
                weight: e.weight,
                subject: profile.subject_of(e),
                object: profile.object_of(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(edges))
}

/// Union of the edges of several sub-profiles, with nodes merged again.
pub fn merge_subprofiles(parts: &[SubProfile]) -> SubProfile {
    let mut edges = Vec::new();
    for part in parts {
        let labels: HashMap<&str, &Vec<String>> = part
            .nodes
            .iter()
            .map(|n| (n.id.as_str(), &n.labels))
            .collect();
        for e in &part.edges {
            let set = |id: &str| -> BTreeSet<String> {
                labels
                    .get(id)
                    .map(|l| l.iter().cloned().collect())
                    .unwrap_or_default()
            };
            edges.push(Endpoints {
                id: e.id.clone(),
                predicate: e.predicate.clone(),
                weight: e.weight,
                subject: set(&e.source),
                object: set(&e.target),
            });
        }
    }
    assemble(edges)
}
