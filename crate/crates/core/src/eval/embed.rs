use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::hetgraph::Label;
use crate::numerics::Tensor;

/// One exported news representation.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub label: Option<Label>,
    pub vector: Tensor,
}

/// Writes `id,label,e0..` rows; unknown labels leave the field empty and
/// values carry 17 significant digits.
pub fn write_embeddings(
    embeddings: &BTreeMap<String, Tensor>,
    labels: &BTreeMap<String, Label>,
    mut w: impl Write,
) -> Result<()> {
    let Some(first) = embeddings.values().next() else {
        return Err(Error::Precondition("no embeddings to export".into()));
    };
    let d = first.len();
    let io = |e: std::io::Error| Error::io("<embeddings>", e);
    let header: Vec<String> = (0..d).map(|i| format!("e{i}")).collect();
    writeln!(w, "id,label,{}", header.join(",")).map_err(io)?;
    for (id, v) in embeddings {
        if v.len() != d {
            return Err(Error::Dimension(format!("embedding `{id}` has length {} not {d}", v.len())));
        }
        let label = labels.get(id).map(|l| l.code().to_string()).unwrap_or_default();
        let values: Vec<String> = v.data().iter().map(|x| format!("{x:.16e}")).collect();
        writeln!(w, "{id},{label},{}", values.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn export_embeddings(
    embeddings: &BTreeMap<String, Tensor>,
    labels: &BTreeMap<String, Label>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_embeddings(embeddings, labels, BufWriter::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_embeddings(reader: impl BufRead, path: &Path) -> Result<BTreeMap<String, EmbeddingRecord>> {
    let bad = |line: usize, message: String| Error::Ingestion {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(h) => h.map_err(|e| Error::io(path, e))?,
        None => return Err(bad(1, "empty file".into())),
    };
    let cols = header.split(',').count();
    if cols < 3 || !header.starts_with("id,label,") {
        return Err(bad(1, format!("unexpected header `{header}`")));
    }
    let mut out = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(bad(n, format!("expected {cols} fields, got {}", fields.len())));
        }
        let label = match fields[1] {
            "" => None,
            code => Some(Label::from_code(
                code.parse().map_err(|_| bad(n, format!("bad label `{code}`")))?,
            )?),
        };
        let values = fields[2..]
            .iter()
            .map(|v| v.parse::<f64>().map_err(|_| bad(n, format!("bad value `{v}`"))))
            .collect::<Result<Vec<f64>>>()?;
        if out
            .insert(fields[0].to_string(), EmbeddingRecord { label, vector: Tensor::vector(values) })
            .is_some()
        {
            return Err(bad(n, format!("duplicate id `{}`", fields[0])));
        }
    }
    Ok(out)
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<BTreeMap<String, EmbeddingRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(BufReader::new(file), path)
}
