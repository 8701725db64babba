use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::LEAKY_SLOPE;

/// How a meta-path instance `(u, w, v)` is turned into one vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EncoderKind {
    TransE,
    RotatE,
    ConvE,
}

impl EncoderKind {
    pub const ALL: [EncoderKind; 3] = [EncoderKind::TransE, EncoderKind::RotatE, EncoderKind::ConvE];

    pub fn as_str(self) -> &'static str {
        match self {
            EncoderKind::TransE => "transe",
            EncoderKind::RotatE => "rotate",
            EncoderKind::ConvE => "conve",
        }
    }
}

impl FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "transe" => Ok(EncoderKind::TransE),
            "rotate" => Ok(EncoderKind::RotatE),
            "conve" => Ok(EncoderKind::ConvE),
            other => Err(Error::Config(format!("unknown encoder `{other}`"))),
        }
    }
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Aggregator for the user meta-path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TemporalMode {
    /// Recurrent over chronologically ordered instances.
    Gru,
    /// Order-free multi-head attention, the same mechanism as the publisher path.
    Attention,
}

impl TemporalMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TemporalMode::Gru => "gru",
            TemporalMode::Attention => "attention",
        }
    }
}

impl FromStr for TemporalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gru" => Ok(TemporalMode::Gru),
            "attention" => Ok(TemporalMode::Attention),
            other => Err(Error::Config(format!("unknown temporal mode `{other}`"))),
        }
    }
}

impl fmt::Display for TemporalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvEConfig {
    pub kernel: usize,
    pub channels: usize,
    /// Rows of the 2-D reshape of each `d_hidden` vector.
    pub rows: usize,
}

impl Default for ConvEConfig {
    fn default() -> Self {
        Self {
            kernel: 3,
            channels: 8,
            rows: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub d_hidden: usize,
    pub heads: usize,
    pub d_semantic: usize,
    pub encoder: EncoderKind,
    pub temporal: TemporalMode,
    pub leaky_slope: f64,
    pub conve: ConvEConfig,
    /// Publisher-path instances sampled per news.
    pub sample_ps: usize,
    /// User-path instances sampled per news.
    pub sample_pu: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_hidden: 512,
            heads: 8,
            d_semantic: 128,
            encoder: EncoderKind::TransE,
            temporal: TemporalMode::Gru,
            leaky_slope: LEAKY_SLOPE,
            conve: ConvEConfig::default(),
            sample_ps: 16,
            sample_pu: 64,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d_hidden", self.d_hidden),
            ("heads", self.heads),
            ("d_semantic", self.d_semantic),
            ("sample_ps", self.sample_ps),
            ("sample_pu", self.sample_pu),
            ("conve_kernel", self.conve.kernel),
            ("conve_channels", self.conve.channels),
            ("conve_rows", self.conve.rows),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{k} must be positive")));
        }
        if !self.d_hidden.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "d_hidden {} is not divisible by heads {}",
                self.d_hidden, self.heads
            )));
        }
        if !(self.leaky_slope.is_finite() && self.leaky_slope >= 0.0) {
            return Err(Error::Config(format!("invalid leaky_slope {}", self.leaky_slope)));
        }
        if self.encoder == EncoderKind::ConvE {
            let c = self.conve;
            if !self.d_hidden.is_multiple_of(c.rows) {
                return Err(Error::Config(format!(
                    "d_hidden {} cannot be reshaped into {} rows",
                    self.d_hidden, c.rows
                )));
            }
            if c.kernel > 4 * c.rows || c.kernel > self.d_hidden / c.rows {
                return Err(Error::Config(format!(
                    "conve kernel {} does not fit a {}x{} image",
                    c.kernel,
                    4 * c.rows,
                    self.d_hidden / c.rows
                )));
            }
        }
        Ok(())
    }

    /// Flat key/value view, also used in checkpoints.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        vec![
            ("d_hidden".into(), self.d_hidden.to_string()),
            ("heads".into(), self.heads.to_string()),
            ("d_semantic".into(), self.d_semantic.to_string()),
            ("encoder".into(), self.encoder.to_string()),
            ("temporal".into(), self.temporal.to_string()),
            ("leaky_slope".into(), self.leaky_slope.to_string()),
            ("conve_kernel".into(), self.conve.kernel.to_string()),
            ("conve_channels".into(), self.conve.channels.to_string()),
            ("conve_rows".into(), self.conve.rows.to_string()),
            ("sample_ps".into(), self.sample_ps.to_string()),
            ("sample_pu".into(), self.sample_pu.to_string()),
        ]
    }

    /// Applies one key; returns `Ok(false)` when the key is not a model key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("invalid value `{v}` for {key}")))
        }
        match key {
            "d_hidden" => self.d_hidden = num(key, value)?,
            "heads" => self.heads = num(key, value)?,
            "d_semantic" => self.d_semantic = num(key, value)?,
            "encoder" => self.encoder = value.parse()?,
            "temporal" => self.temporal = value.parse()?,
            "leaky_slope" => self.leaky_slope = num(key, value)?,
            "conve_kernel" => self.conve.kernel = num(key, value)?,
            "conve_channels" => self.conve.channels = num(key, value)?,
            "conve_rows" => self.conve.rows = num(key, value)?,
            "sample_ps" => self.sample_ps = num(key, value)?,
            "sample_pu" => self.sample_pu = num(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ModelConfig::default().validate().unwrap();
        let c = ModelConfig {
            encoder: EncoderKind::ConvE,
            ..ModelConfig::default()
        };
        c.validate().unwrap();
    }

    #[test]
    fn invalid_configs() {
        let c = ModelConfig {
            heads: 7,
            ..ModelConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = ModelConfig {
            encoder: EncoderKind::ConvE,
            d_hidden: 24,
            heads: 4,
            conve: ConvEConfig {
                rows: 5,
                ..ConvEConfig::default()
            },
            ..ModelConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        assert!(matches!("distmult".parse::<EncoderKind>(), Err(Error::Config(_))));
    }

    #[test]
    fn pairs_round_trip() {
        let c = ModelConfig {
            d_hidden: 32,
            heads: 4,
            encoder: EncoderKind::RotatE,
            temporal: TemporalMode::Attention,
            leaky_slope: 0.2,
            ..ModelConfig::default()
        };
        let mut back = ModelConfig::default();
        for (k, v) in c.to_pairs() {
            assert!(back.set(&k, &v).unwrap());
        }
        assert_eq!(back, c);
        assert!(!back.set("lr", "0.1").unwrap());
    }
}
