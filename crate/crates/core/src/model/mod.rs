//! The meta-path classification network.
//!
//! Endpoint features are mapped to a shared space by type-specific linear
//! transforms, each sampled meta-path instance is encoded with a
//! relation-aware encoder, instances are aggregated per path (attention for
//! publisher paths, GRU or attention for user paths), the two path vectors are
//! fused with batch-level semantic attention and a linear layer produces
//! `[P_real, P_fake]`.

mod aggregate;
mod checkpoint;
mod config;
mod encode;
mod fuse;
mod network;

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::hetgraph::NodeType;
use crate::numerics::{matvec, ParamStore, Tensor, GRU_PARAM_NAMES};
use crate::seed;

pub use aggregate::{
    aggregate_publisher, aggregate_user_attention, aggregate_user_temporal, attention_weights,
    AttentionParams,
};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_HEADER};
pub use config::{ConvEConfig, EncoderKind, ModelConfig, TemporalMode};
pub use encode::{encode_conve, encode_rotate, encode_transe, ConvEParams};
pub use fuse::{semantic_fuse, Fused, SemanticParams};
pub use network::{backward, forward, forward_batch, BatchOutput, GraphContext};

/// Parameter names used in the store and in checkpoints.
pub mod names {
    pub const RELATION_PS: &str = "relation.ps";
    pub const RELATION_PU: &str = "relation.pu";
    pub const ATTN_PS_HEADS: &str = "attn_ps.heads";
    pub const ATTN_PS_MERGE: &str = "attn_ps.merge";
    pub const ATTN_PU_HEADS: &str = "attn_pu.heads";
    pub const ATTN_PU_MERGE: &str = "attn_pu.merge";
    pub const CONVE_KERNELS: &str = "conve.kernels";
    pub const CONVE_PROJ: &str = "conve.proj";
    pub const SEMANTIC_M: &str = "semantic.m";
    pub const SEMANTIC_B: &str = "semantic.b";
    pub const SEMANTIC_Q: &str = "semantic.q";
    pub const CLASSIFIER_W: &str = "classifier.w";
    pub const CLASSIFIER_B: &str = "classifier.b";
    pub const DEFAULT_PS: &str = "default.ps";
    pub const DEFAULT_PU: &str = "default.pu";

    use crate::hetgraph::NodeType;

    pub fn transform(t: NodeType) -> String {
        format!("transform.{}", t.as_str())
    }

    pub fn gru(part: &str) -> String {
        format!("gru.{part}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Init {
    Xavier,
    Zeros,
    Relation,
}

/// Every parameter the configuration needs, with shape and initializer.
fn layout(
    config: &ModelConfig,
    dims: &BTreeMap<NodeType, usize>,
) -> Result<Vec<(String, Vec<usize>, Init)>> {
    config.validate()?;
    let (d, k, dm) = (config.d_hidden, config.heads, config.d_semantic);
    let mut out = Vec::new();
    for t in [NodeType::News, NodeType::Publisher, NodeType::User] {
        let Some(&da) = dims.get(&t) else {
            return Err(Error::Config(format!("no feature dimension for {t} nodes")));
        };
        if da == 0 {
            return Err(Error::Config(format!("{t} feature dimension is zero")));
        }
        out.push((names::transform(t), vec![d, da], Init::Xavier));
    }
    out.push((names::RELATION_PS.into(), vec![d], Init::Relation));
    out.push((names::RELATION_PU.into(), vec![d], Init::Relation));
    out.push((names::ATTN_PS_HEADS.into(), vec![k, d], Init::Xavier));
    out.push((names::ATTN_PS_MERGE.into(), vec![d, k * d], Init::Xavier));
    match config.temporal {
        TemporalMode::Attention => {
            out.push((names::ATTN_PU_HEADS.into(), vec![k, d], Init::Xavier));
            out.push((names::ATTN_PU_MERGE.into(), vec![d, k * d], Init::Xavier));
        }
        TemporalMode::Gru => {
            for part in GRU_PARAM_NAMES {
                let (shape, init) = if part.starts_with('b') {
                    (vec![d], Init::Zeros)
                } else {
                    (vec![d, d], Init::Xavier)
                };
                out.push((names::gru(part), shape, init));
            }
        }
    }
    if config.encoder == EncoderKind::ConvE {
        let c = config.conve;
        let shape = encode::conve_shape(d, c.rows, c.channels, c.kernel)?;
        out.push((names::CONVE_KERNELS.into(), vec![c.channels, c.kernel, c.kernel], Init::Xavier));
        out.push((names::CONVE_PROJ.into(), vec![d, shape.out_len()], Init::Xavier));
    }
    out.push((names::SEMANTIC_M.into(), vec![dm, d], Init::Xavier));
    out.push((names::SEMANTIC_B.into(), vec![dm], Init::Zeros));
    out.push((names::SEMANTIC_Q.into(), vec![dm], Init::Xavier));
    out.push((names::CLASSIFIER_W.into(), vec![2, d], Init::Xavier));
    out.push((names::CLASSIFIER_B.into(), vec![2], Init::Zeros));
    out.push((names::DEFAULT_PS.into(), vec![d], Init::Zeros));
    out.push((names::DEFAULT_PU.into(), vec![d], Init::Zeros));
    Ok(out)
}

/// `(fan_in, fan_out)` of a parameter shape; vectors count as one output.
fn fans(shape: &[usize]) -> (usize, usize) {
    match shape {
        [n] => (*n, 1),
        [rows, cols] => (*cols, *rows),
        [c, kh, kw] => (kh * kw, c * kh * kw),
        _ => (1, 1),
    }
}

/// Fresh parameters for `config` and the bound feature dimensions.
///
/// Matrices are Xavier-uniform, biases and fallback path vectors zero,
/// relation vectors uniform in `[-0.1, 0.1]`.
pub fn init_params(config: &ModelConfig, dims: &BTreeMap<NodeType, usize>, seed: u64) -> Result<ParamStore> {
    let mut store = ParamStore::new();
    let root = seed::derive(seed, "init");
    for (name, shape, init) in layout(config, dims)? {
        let mut rng = seed::rng(seed::derive(root, &name));
        let n: usize = shape.iter().product();
        let data: Vec<f64> = match init {
            Init::Zeros => vec![0.0; n],
            Init::Relation => (0..n).map(|_| rng.random_range(-0.1..=0.1)).collect(),
            Init::Xavier => {
                let (fi, fo) = fans(&shape);
                let limit = (6.0 / (fi + fo) as f64).sqrt();
                (0..n).map(|_| rng.random_range(-limit..=limit)).collect()
            }
        };
        store.insert(name, Tensor::new(shape, data)?)?;
    }
    Ok(store)
}

/// Checks that `params` holds exactly the tensors `config` requires.
pub fn validate_params(params: &ParamStore, config: &ModelConfig) -> Result<()> {
    let dims = feature_dims(params)?;
    let expected = layout(config, &dims)?;
    for (name, shape, _) in &expected {
        let t = params
            .get(name)
            .map_err(|_| Error::Config(format!("missing parameter `{name}`")))?;
        if t.shape() != shape.as_slice() {
            return Err(Error::Dimension(format!(
                "parameter `{name}` has shape {:?}, expected {shape:?}",
                t.shape()
            )));
        }
    }
    if let Some(extra) = params
        .names()
        .find(|n| !expected.iter().any(|(e, _, _)| e == n))
    {
        return Err(Error::Config(format!("unexpected parameter `{extra}`")));
    }
    Ok(())
}

/// Feature dimension per node type as recorded by the transform matrices.
pub fn feature_dims(params: &ParamStore) -> Result<BTreeMap<NodeType, usize>> {
    let mut dims = BTreeMap::new();
    for t in NodeType::ALL {
        let name = names::transform(t);
        let w = params
            .get(&name)
            .map_err(|_| Error::Config(format!("missing parameter `{name}`")))?;
        if w.shape().len() != 2 {
            return Err(Error::Dimension(format!("`{name}` must be a matrix")));
        }
        dims.insert(t, w.cols());
    }
    Ok(dims)
}

/// `h = W_A x` with the transform of `node_type`.
pub fn transform_node(x: &Tensor, node_type: NodeType, params: &ParamStore) -> Result<Tensor> {
    let w = params.get(&names::transform(node_type))?;
    if x.shape() != [w.cols()] {
        return Err(Error::Dimension(format!(
            "{node_type} feature has shape {:?}, transform expects [{}]",
            x.shape(),
            w.cols()
        )));
    }
    Ok(Tensor::vector(matvec(w.data(), w.rows(), w.cols(), x.data())))
}

/// A configuration together with its trained parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
}

impl Model {
    pub fn new(config: ModelConfig, dims: &BTreeMap<NodeType, usize>, seed: u64) -> Result<Self> {
        let params = init_params(&config, dims, seed)?;
        Ok(Self { config, params })
    }
}
