//! Initial node feature vectors.
//!
//! Features come either from CSV files (one row per node: id followed by the
//! vector) or from a seeded signed feature-hashing of free text.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::hetgraph::{HeteroGraph, NodeType};
use crate::numerics::Tensor;
use crate::seed::{derive, fnv1a};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub node_type: NodeType,
    pub dim: usize,
    pub vectors: BTreeMap<String, Tensor>,
}

impl FeatureTable {
    pub fn new(node_type: NodeType, dim: usize) -> Self {
        Self {
            node_type,
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, id: &str, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Dimension(format!(
                "feature for `{id}` has {} values, table dim is {}",
                vector.len(),
                self.dim
            )));
        }
        if self.vectors.contains_key(id) {
            return Err(Error::Conflict(format!("duplicate feature row for `{id}`")));
        }
        self.vectors.insert(id.to_string(), Tensor::vector(vector));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Parses the feature CSV format; `path` is used for error messages.
pub fn read_features(reader: impl BufRead, path: &Path, node_type: NodeType) -> Result<FeatureTable> {
    let mut table: Option<FeatureTable> = None;
    for (n, line) in reader.lines().enumerate() {
        let row = n + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let ingest = |message: String| Error::Ingestion {
            path: path.to_path_buf(),
            line: row,
            message,
        };
        let mut cells = line.split(',');
        let id = cells.next().unwrap_or_default().trim();
        if id.is_empty() {
            return Err(ingest("empty node id".into()));
        }
        let values = cells
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| ingest(format!("bad number: {e}")))?;
        if values.is_empty() {
            return Err(ingest("row has no values".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(ingest(format!("non-finite value {v}")));
        }
        let t = table.get_or_insert_with(|| FeatureTable::new(node_type, values.len()));
        if values.len() != t.dim {
            return Err(ingest(format!(
                "ragged row: {} values, expected {}",
                values.len(),
                t.dim
            )));
        }
        match t.insert(id, values) {
            Err(Error::Conflict(m)) => return Err(Error::Conflict(format!("{m} (row {row})"))),
            other => other?,
        }
    }
    table.ok_or_else(|| Error::Ingestion {
        path: path.to_path_buf(),
        line: 0,
        message: "no feature rows".into(),
    })
}

pub fn load_features(path: impl AsRef<Path>, node_type: NodeType) -> Result<FeatureTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_features(BufReader::new(file), path, node_type)
}

/// Writes rows with 17 significant digits so values reload bit-exactly.
pub fn write_features(table: &FeatureTable, mut w: impl Write) -> std::io::Result<()> {
    for (id, v) in &table.vectors {
        w.write_all(id.as_bytes())?;
        for x in v.data() {
            write!(w, ",{x:.16e}")?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn save_features(table: &FeatureTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_features(table, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

/// Signed hashing of lowercase alphanumeric tokens into `dim` buckets,
/// L2-normalised (an empty text maps to the zero vector).
pub fn hash_text(text: &str, dim: usize, seed: u64) -> Vec<f64> {
    let bucket_key = derive(seed, "hash-bucket");
    let sign_key = derive(seed, "hash-sign");
    let mut v = vec![0.0; dim];
    let lower = text.to_lowercase();
    for token in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
        let h = fnv1a(token.as_bytes());
        let bucket = (derive(bucket_key, token) ^ h) % dim as u64;
        let sign = if (derive(sign_key, token) ^ h.rotate_left(17)) & 1 == 0 {
            1.0
        } else {
            -1.0
        };
        v[bucket as usize] += sign;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Deterministic hashed features for every text.
pub fn hash_features(
    texts: &BTreeMap<String, String>,
    node_type: NodeType,
    dim: usize,
    seed: u64,
) -> Result<FeatureTable> {
    if dim < 8 {
        return Err(Error::Precondition(format!("hashed feature dim {dim} < 8")));
    }
    let mut table = FeatureTable::new(node_type, dim);
    for (id, text) in texts {
        table.insert(id, hash_text(text, dim, seed))?;
    }
    Ok(table)
}

/// Feature tables bound to a graph: every node resolves to a vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBundle {
    tables: BTreeMap<NodeType, FeatureTable>,
    node_types: HashMap<String, NodeType>,
}

impl FeatureBundle {
    pub fn get(&self, id: &str) -> Option<&Tensor> {
        let t = self.node_types.get(id)?;
        self.tables.get(t)?.vectors.get(id)
    }

    /// Like [`get`](Self::get) but reports the missing id as a coverage error.
    pub fn lookup(&self, id: &str) -> Result<&Tensor> {
        self.get(id)
            .ok_or_else(|| Error::coverage(vec![id.to_string()]))
    }

    pub fn dim(&self, t: NodeType) -> Option<usize> {
        self.tables.get(&t).map(|tb| tb.dim)
    }

    pub fn dims(&self) -> BTreeMap<NodeType, usize> {
        self.tables.iter().map(|(t, tb)| (*t, tb.dim)).collect()
    }

    pub fn tables(&self) -> impl Iterator<Item = &FeatureTable> {
        self.tables.values()
    }

    pub fn table(&self, t: NodeType) -> Option<&FeatureTable> {
        self.tables.get(&t)
    }

    pub fn into_tables(self) -> Vec<FeatureTable> {
        self.tables.into_values().collect()
    }
}

/// Checks that every node of `g` has a feature vector of its type.
pub fn bind(g: &HeteroGraph, tables: Vec<FeatureTable>) -> Result<FeatureBundle> {
    let mut by_type = BTreeMap::new();
    for t in tables {
        let nt = t.node_type;
        if by_type.insert(nt, t).is_some() {
            return Err(Error::Conflict(format!("two feature tables for {nt} nodes")));
        }
    }
    let mut missing = Vec::new();
    let mut node_types = HashMap::with_capacity(g.node_count());
    for (id, t) in g.nodes() {
        let covered = by_type
            .get(&t)
            .is_some_and(|tb: &FeatureTable| tb.vectors.contains_key(id));
        if covered {
            node_types.insert(id.to_string(), t);
        } else {
            missing.push(id.to_string());
        }
    }
    if !missing.is_empty() {
        return Err(Error::coverage(missing));
    }
    Ok(FeatureBundle {
        tables: by_type,
        node_types,
    })
}
