//! Small hand-built graph used in tests, docs and the CLI smoke runs.
//!
//! Two publishers, four news items and three users. `news2` is the worked
//! extraction target: it shares `pub1` with `news1` and `news3`, and is
//! tweeted by `user1` (who also tweeted `news4`) and `user2` (who also
//! tweeted `news3`).

use std::collections::BTreeMap;

use crate::featurize::{hash_features, FeatureTable};
use crate::hetgraph::{EdgeType, HeteroGraph, Label, NodeType};

pub const TOY_FEATURE_SEED: u64 = 7;

pub fn toy_graph() -> HeteroGraph {
    let mut g = HeteroGraph::new();
    let nodes = [
        ("pub1", NodeType::Publisher),
        ("pub2", NodeType::Publisher),
        ("news1", NodeType::News),
        ("news2", NodeType::News),
        ("news3", NodeType::News),
        ("news4", NodeType::News),
        ("user1", NodeType::User),
        ("user2", NodeType::User),
        ("user3", NodeType::User),
    ];
    for (id, t) in nodes {
        g.add_node(id, t).expect("unique ids");
    }
    let labels = [
        ("news1", Label::Fake),
        ("news2", Label::Real),
        ("news3", Label::Fake),
        ("news4", Label::Real),
    ];
    for (id, l) in labels {
        g.set_label(id, l).expect("news node");
    }
    g.add_bidirectional("pub1", "pub2", EdgeType::Citation)
        .expect("valid citation");
    for (p, n) in [("pub1", "news1"), ("pub1", "news2"), ("pub1", "news3"), ("pub2", "news4")] {
        g.add_edge(p, n, EdgeType::Publication, None)
            .expect("valid publication");
    }
    let tweets = [
        ("user1", "news2", 200),
        ("user1", "news4", 150),
        ("user2", "news2", 100),
        ("user2", "news3", 120),
        ("user3", "news1", 50),
        ("user3", "news3", 60),
    ];
    for (u, n, t) in tweets {
        g.add_edge(u, n, EdgeType::Tweet, Some(t))
            .expect("valid tweet");
    }
    for (a, b) in [("user1", "user2"), ("user3", "user1")] {
        g.add_edge(a, b, EdgeType::Following, None)
            .expect("valid following");
    }
    g
}

/// Hashed features for every node of `g` (news 64, user 96, publisher 96).
pub fn toy_feature_tables(g: &HeteroGraph) -> Vec<FeatureTable> {
    toy_feature_tables_with_dims(g, 64, 96, 96)
}

pub fn toy_feature_tables_with_dims(
    g: &HeteroGraph,
    news_dim: usize,
    user_dim: usize,
    publisher_dim: usize,
) -> Vec<FeatureTable> {
    [
        (NodeType::News, news_dim, "article about"),
        (NodeType::User, user_dim, "profile of"),
        (NodeType::Publisher, publisher_dim, "about us page of"),
    ]
    .into_iter()
    .map(|(t, dim, prefix)| {
        let texts: BTreeMap<String, String> = g
            .nodes_of_type(t)
            .map(|id| (id.to_string(), format!("{prefix} {id} {id} {}", id.len())))
            .collect();
        hash_features(&texts, t, dim, TOY_FEATURE_SEED).expect("dim >= 8")
    })
    .collect()
}
