//! The two news-centred meta-path schemas and their instance extraction.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::hetgraph::{project_subgraph, EdgeType, HeteroGraph, NodeType};
use crate::seed;

/// News -> Publisher -> News and News -> User -> News.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetaPathSchema {
    /// Other news from the same publisher.
    NewsPublisherNews,
    /// Other news tweeted by the same user.
    NewsUserNews,
}

impl MetaPathSchema {
    pub const ALL: [MetaPathSchema; 2] = [
        MetaPathSchema::NewsPublisherNews,
        MetaPathSchema::NewsUserNews,
    ];

    pub fn middle_type(self) -> NodeType {
        match self {
            MetaPathSchema::NewsPublisherNews => NodeType::Publisher,
            MetaPathSchema::NewsUserNews => NodeType::User,
        }
    }

    pub fn relation(self) -> EdgeType {
        match self {
            MetaPathSchema::NewsPublisherNews => EdgeType::Publication,
            MetaPathSchema::NewsUserNews => EdgeType::Tweet,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            MetaPathSchema::NewsPublisherNews => "PS",
            MetaPathSchema::NewsUserNews => "PU",
        }
    }
}

impl fmt::Display for MetaPathSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// A concrete `other -> middle -> target` node sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaPathInstance {
    pub other: String,
    pub middle: String,
    pub target: String,
    pub schema: MetaPathSchema,
    /// Earliest middle -> target tweet time; only on user paths.
    pub timestamp: Option<i64>,
}

/// Incidence of one schema's relation, built over the schema's two-type
/// projection of the graph.
#[derive(Debug, Clone)]
pub struct SchemaIndex {
    schema: MetaPathSchema,
    news: BTreeSet<String>,
    /// news -> (middle -> earliest timestamp)
    by_news: HashMap<String, BTreeMap<String, Option<i64>>>,
    /// middle -> news
    by_middle: HashMap<String, BTreeSet<String>>,
    all_types: HashMap<String, NodeType>,
}

impl SchemaIndex {
    pub fn new(g: &HeteroGraph, schema: MetaPathSchema) -> Result<Self> {
        let types: BTreeSet<NodeType> = [NodeType::News, schema.middle_type()].into();
        let sub = project_subgraph(g, &types)?;
        let mut by_news: HashMap<String, BTreeMap<String, Option<i64>>> = HashMap::new();
        let mut by_middle: HashMap<String, BTreeSet<String>> = HashMap::new();
        for e in sub.edges().iter().filter(|e| e.kind == schema.relation()) {
            let (w, v) = (sub.id(e.src), sub.id(e.dst));
            let slot = by_news
                .entry(v.to_string())
                .or_default()
                .entry(w.to_string())
                .or_insert(e.timestamp);
            if let (Some(old), Some(new)) = (*slot, e.timestamp) {
                *slot = Some(old.min(new));
            }
            by_middle
                .entry(w.to_string())
                .or_default()
                .insert(v.to_string());
        }
        Ok(Self {
            schema,
            news: sub.nodes_of_type(NodeType::News).map(String::from).collect(),
            by_news,
            by_middle,
            all_types: g.nodes().map(|(id, t)| (id.to_string(), t)).collect(),
        })
    }

    pub fn schema(&self) -> MetaPathSchema {
        self.schema
    }

    /// Every `(u, w, target)` with `u != target`, sorted by `(w, u)`.
    pub fn enumerate(&self, target: &str) -> Result<Vec<MetaPathInstance>> {
        match self.all_types.get(target) {
            None => return Err(Error::NotFound(format!("node `{target}`"))),
            Some(NodeType::News) => {}
            Some(t) => {
                return Err(Error::Type(format!(
                    "meta-path target `{target}` is a {t}, not news"
                )))
            }
        }
        debug_assert!(self.news.contains(target));
        let Some(middles) = self.by_news.get(target) else {
            return Ok(Vec::new());
        };
        let mut out = Vec::new();
        for (w, &ts) in middles {
            for u in &self.by_middle[w] {
                if u != target {
                    out.push(MetaPathInstance {
                        other: u.clone(),
                        middle: w.clone(),
                        target: target.to_string(),
                        schema: self.schema,
                        timestamp: ts,
                    });
                }
            }
        }
        Ok(out)
    }
}

/// Projects `g` onto the schema's node types and enumerates instances for `target`.
pub fn enumerate_instances(
    g: &HeteroGraph,
    target: &str,
    schema: MetaPathSchema,
) -> Result<Vec<MetaPathInstance>> {
    SchemaIndex::new(g, schema)?.enumerate(target)
}

/// Seed for sampling `target`'s instances of `schema` under a root seed.
pub fn instance_seed(root: u64, target: &str, schema: MetaPathSchema) -> u64 {
    seed::derive(seed::derive(root, schema.short_name()), target)
}

/// Uniform sample of `n` instances without replacement, in enumeration order.
pub fn sample_instances(
    instances: &[MetaPathInstance],
    n: usize,
    seed: u64,
) -> Result<Vec<MetaPathInstance>> {
    if n == 0 {
        return Err(Error::Precondition("sample size must be at least 1".into()));
    }
    if instances.len() <= n {
        return Ok(instances.to_vec());
    }
    let mut rng = seed::rng(seed);
    let mut idx = sample(&mut rng, instances.len(), n).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| instances[i].clone()).collect())
}

/// Stable ascending sort of user-path instances by engagement time.
pub fn sort_chronological(instances: &[MetaPathInstance]) -> Result<Vec<MetaPathInstance>> {
    for p in instances {
        if p.schema != MetaPathSchema::NewsUserNews {
            return Err(Error::Schema(format!(
                "only user-path instances are ordered in time, got {} instance {} -> {}",
                p.schema, p.other, p.middle
            )));
        }
        if p.timestamp.is_none() {
            return Err(Error::Schema(format!(
                "instance {} -> {} -> {} has no timestamp",
                p.other, p.middle, p.target
            )));
        }
    }
    let mut out = instances.to_vec();
    out.sort_by_key(|p| p.timestamp);
    Ok(out)
}
