//! Plain-text checkpoint of a model configuration and its parameters.
//!
//! ```text
//! newsgraph-checkpoint 1
//! config d_hidden 512
//! ...
//! tensor relation.ps 512
//! 1.2e-2 -3.5e-2 ...
//! end
//! ```
//!
//! Values are written in shortest round-trip exponent form, so loading
//! restores every bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{validate_params, Model, ModelConfig};
use crate::error::{Error, Result};
use crate::numerics::{ParamStore, Tensor};

pub const CHECKPOINT_HEADER: &str = "newsgraph-checkpoint 1";

pub fn write_checkpoint(model: &Model, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{CHECKPOINT_HEADER}")?;
    for (k, v) in model.config.to_pairs() {
        writeln!(w, "config {k} {v}")?;
    }
    for (name, gp) in model.params.iter() {
        let shape: Vec<String> = gp.value.shape().iter().map(usize::to_string).collect();
        writeln!(w, "tensor {name} {}", shape.join("x"))?;
        let mut first = true;
        for x in gp.value.data() {
            if !first {
                w.write_all(b" ")?;
            }
            first = false;
            write!(w, "{x:e}")?;
        }
        w.write_all(b"\n")?;
    }
    writeln!(w, "end")?;
    w.flush()
}

pub fn save_checkpoint(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(model, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

/// Parses a checkpoint; `path` is only used in error messages.
pub fn read_checkpoint(reader: impl BufRead, path: &Path) -> Result<Model> {
    let err = |line: usize, message: String| Error::Ingestion {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |expect: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((n, Ok(l))) => Ok((n, l)),
            Some((_, Err(e))) => Err(Error::io(path, e)),
            None => Err(err(0, format!("unexpected end of file, expected {expect}"))),
        }
    };

    let (n, header) = next("header")?;
    if header.trim_end() != CHECKPOINT_HEADER {
        return Err(err(n, format!("unsupported checkpoint header `{header}`")));
    }
    let mut config = ModelConfig::default();
    let mut params = ParamStore::new();
    loop {
        let (n, line) = next("`end`")?;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("end") => break,
            Some("config") => {
                let (Some(k), Some(v), None) = (parts.next(), parts.next(), parts.next()) else {
                    return Err(err(n, "config lines are `config <key> <value>`".into()));
                };
                if !config.set(k, v).map_err(|e| err(n, e.to_string()))? {
                    return Err(err(n, format!("unknown config key `{k}`")));
                }
            }
            Some("tensor") => {
                let (Some(name), Some(shape), None) = (parts.next(), parts.next(), parts.next()) else {
                    return Err(err(n, "tensor lines are `tensor <name> <shape>`".into()));
                };
                let shape = shape
                    .split('x')
                    .map(str::parse::<usize>)
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| err(n, format!("bad shape `{shape}`: {e}")))?;
                let (m, values) = next("tensor values")?;
                let data = values
                    .split_whitespace()
                    .map(str::parse::<f64>)
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| err(m, format!("bad value in `{name}`: {e}")))?;
                let t = Tensor::new(shape, data).map_err(|e| err(m, format!("`{name}`: {e}")))?;
                params.insert(name, t).map_err(|e| err(n, e.to_string()))?;
            }
            _ => return Err(err(n, format!("unexpected line `{line}`"))),
        }
    }
    config.validate()?;
    validate_params(&params, &config)?;
    Ok(Model { config, params })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(file), path)
}
