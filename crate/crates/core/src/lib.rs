//! Fake news detection over heterogeneous news graphs.
//!
//! News, publishers and users form a typed graph. Each news is represented
//! through two meta-paths (news-publisher-news and news-user-news): instances
//! are encoded with a knowledge-graph style relation operator, aggregated per
//! path (attention, or a GRU over engagement order on the user path), fused
//! with semantic attention and classified.

pub mod error;
pub mod eval;
pub mod featurize;
pub mod fixtures;
pub mod hetgraph;
pub mod kv;
pub mod metapath;
pub mod model;
pub mod numerics;
pub mod seed;
pub mod synthgen;
pub mod train;

pub use error::{Error, Result};
