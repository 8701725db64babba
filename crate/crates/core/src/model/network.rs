//! Batched forward pass with a cached state for the hand-written backward pass.

use std::collections::{BTreeMap, HashMap};

use super::aggregate::{attend, attend_backward, gru_run, gru_run_backward, AttnCache, AttnView};
use super::config::{EncoderKind, ModelConfig, TemporalMode};
use super::encode::{conve_shape, encode_backward_raw, encode_raw, ConvEGrads, ConvEView, EncodeCache};
use super::fuse::{fuse, fuse_backward, FuseCache, FuseGrads, FuseView};
use super::names;
use crate::error::{Error, Result};
use crate::featurize::FeatureBundle;
use crate::hetgraph::{HeteroGraph, NodeType};
use crate::metapath::{instance_seed, sample_instances, sort_chronological, MetaPathInstance, MetaPathSchema, SchemaIndex};
use crate::numerics::{
    matvec, matvec_t_acc, outer_acc, softmax_slice, GruGradBuf, GruStepCache, GruView, ParamStore, Tensor,
    GRU_PARAM_NAMES,
};

const PATHS: [MetaPathSchema; 2] = [MetaPathSchema::NewsPublisherNews, MetaPathSchema::NewsUserNews];

/// A graph with bound features and the full instance pool of every news.
#[derive(Debug, Clone)]
pub struct GraphContext {
    graph: HeteroGraph,
    features: FeatureBundle,
    pools: HashMap<String, [Vec<MetaPathInstance>; 2]>,
}

impl GraphContext {
    pub fn new(graph: HeteroGraph, features: FeatureBundle) -> Result<Self> {
        let indexes = [SchemaIndex::new(&graph, PATHS[0])?, SchemaIndex::new(&graph, PATHS[1])?];
        let mut pools = HashMap::new();
        for news in graph.nodes_of_type(NodeType::News) {
            let ps = indexes[0].enumerate(news)?;
            let pu = indexes[1].enumerate(news)?;
            pools.insert(news.to_string(), [ps, pu]);
        }
        Ok(Self {
            graph,
            features,
            pools,
        })
    }

    pub fn graph(&self) -> &HeteroGraph {
        &self.graph
    }

    pub fn features(&self) -> &FeatureBundle {
        &self.features
    }

    /// All instances of `schema` ending at `target`.
    pub fn pool(&self, target: &str, schema: MetaPathSchema) -> Result<&[MetaPathInstance]> {
        match self.pools.get(target) {
            Some(p) => Ok(&p[schema_index(schema)]),
            None => match self.graph.node_type(target) {
                None => Err(Error::NotFound(format!("node `{target}`"))),
                Some(t) => Err(Error::Type(format!("`{target}` is a {t}, not news"))),
            },
        }
    }

    /// True when both instance pools of `target` are empty.
    pub fn is_isolated(&self, target: &str) -> Result<bool> {
        for s in PATHS {
            if !self.pool(target, s)?.is_empty() {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn schema_index(s: MetaPathSchema) -> usize {
    match s {
        MetaPathSchema::NewsPublisherNews => 0,
        MetaPathSchema::NewsUserNews => 1,
    }
}

/// Borrowed parameters, shape-checked against the configuration.
struct Views<'a> {
    d: usize,
    kind: EncoderKind,
    transforms: BTreeMap<NodeType, &'a Tensor>,
    relation: [&'a [f64]; 2],
    attn_ps: AttnView<'a>,
    pu: PuView<'a>,
    conve: Option<ConvEView<'a>>,
    fuse: FuseView<'a>,
    cls_w: &'a [f64],
    cls_b: &'a [f64],
    default: [&'a [f64]; 2],
}

#[derive(Clone, Copy)]
enum PuView<'a> {
    Attention(AttnView<'a>),
    Gru(GruView<'a>),
}

fn param<'a>(p: &'a ParamStore, name: &str, shape: &[usize]) -> Result<&'a [f64]> {
    let t = p.get(name)?;
    if t.shape() != shape {
        return Err(Error::Dimension(format!(
            "parameter `{name}` has shape {:?}, expected {shape:?}",
            t.shape()
        )));
    }
    Ok(t.data())
}

impl<'a> Views<'a> {
    fn new(p: &'a ParamStore, c: &ModelConfig) -> Result<Self> {
        c.validate()?;
        let (d, k, dm) = (c.d_hidden, c.heads, c.d_semantic);
        let mut transforms = BTreeMap::new();
        for t in NodeType::ALL {
            let w = p.get(&names::transform(t))?;
            if w.shape().len() != 2 || w.rows() != d {
                return Err(Error::Dimension(format!(
                    "transform for {t} has shape {:?}, expected [{d} x d_{t}]",
                    w.shape()
                )));
            }
            transforms.insert(t, w);
        }
        let attn = |heads: &str, merge: &str| -> Result<AttnView<'a>> {
            Ok(AttnView {
                heads: param(p, heads, &[k, d])?,
                merge: param(p, merge, &[d, k * d])?,
                k,
                d,
                slope: c.leaky_slope,
            })
        };
        let pu = match c.temporal {
            TemporalMode::Attention => PuView::Attention(attn(names::ATTN_PU_HEADS, names::ATTN_PU_MERGE)?),
            TemporalMode::Gru => {
                let g = |part: &str, shape: &[usize]| param(p, &names::gru(part), shape);
                PuView::Gru(GruView {
                    d_in: d,
                    d_h: d,
                    w: [g("w_z", &[d, d])?, g("w_r", &[d, d])?, g("w_h", &[d, d])?],
                    u: [g("u_z", &[d, d])?, g("u_r", &[d, d])?, g("u_h", &[d, d])?],
                    b: [g("b_z", &[d])?, g("b_r", &[d])?, g("b_h", &[d])?],
                })
            }
        };
        let conve = if c.encoder == EncoderKind::ConvE {
            let cc = c.conve;
            let shape = conve_shape(d, cc.rows, cc.channels, cc.kernel)?;
            Some(ConvEView {
                kernels: param(p, names::CONVE_KERNELS, &[cc.channels, cc.kernel, cc.kernel])?,
                proj: param(p, names::CONVE_PROJ, &[d, shape.out_len()])?,
                shape,
                slope: c.leaky_slope,
            })
        } else {
            None
        };
        Ok(Self {
            d,
            kind: c.encoder,
            transforms,
            relation: [param(p, names::RELATION_PS, &[d])?, param(p, names::RELATION_PU, &[d])?],
            attn_ps: attn(names::ATTN_PS_HEADS, names::ATTN_PS_MERGE)?,
            pu,
            conve,
            fuse: FuseView {
                m: param(p, names::SEMANTIC_M, &[dm, d])?,
                b: param(p, names::SEMANTIC_B, &[dm])?,
                q: param(p, names::SEMANTIC_Q, &[dm])?,
                dm,
                d,
            },
            cls_w: param(p, names::CLASSIFIER_W, &[2, d])?,
            cls_b: param(p, names::CLASSIFIER_B, &[2])?,
            default: [param(p, names::DEFAULT_PS, &[d])?, param(p, names::DEFAULT_PU, &[d])?],
        })
    }
}

#[derive(Debug, Clone)]
struct NodeEntry {
    node_type: NodeType,
    x: Vec<f64>,
    h: Vec<f64>,
}

#[derive(Debug, Clone)]
enum AggCache {
    Attention(AttnCache),
    Gru(Vec<GruStepCache>),
}

#[derive(Debug, Clone)]
struct PathCache {
    /// `(other, middle)` indices into the node table, in aggregation order.
    pairs: Vec<(usize, usize)>,
    encoded: Vec<Vec<f64>>,
    encode_caches: Vec<EncodeCache>,
    agg: AggCache,
}

#[derive(Debug, Clone)]
struct BatchCache {
    version: u64,
    config: ModelConfig,
    nodes: Vec<NodeEntry>,
    /// Per news, per path; `None` means the learned default vector was used.
    paths: Vec<[Option<PathCache>; 2]>,
    path_h: [Vec<Vec<f64>>; 2],
    fuse: FuseCache,
}

/// Outputs of a batched forward pass plus the state backward needs.
#[derive(Debug, Clone)]
pub struct BatchOutput {
    pub targets: Vec<String>,
    /// Fused news representations `h_v`.
    pub embeddings: Vec<Tensor>,
    pub logits: Vec<[f64; 2]>,
    /// `[P_real, P_fake]` per news.
    pub probs: Vec<[f64; 2]>,
    /// Path weights `[beta_S, beta_U]` shared by the batch.
    pub beta: [f64; 2],
    cache: BatchCache,
}

impl BatchOutput {
    /// Number of publisher-path and user-path instances aggregated for news `i`.
    pub fn instance_counts(&self, i: usize) -> (usize, usize) {
        let n = |p: &Option<PathCache>| p.as_ref().map_or(0, |c| c.pairs.len());
        (n(&self.cache.paths[i][0]), n(&self.cache.paths[i][1]))
    }

    /// Path representations `(h_S, h_U)` of news `i` before fusion.
    pub fn path_vectors(&self, i: usize) -> (Tensor, Tensor) {
        (
            Tensor::vector(self.cache.path_h[0][i].clone()),
            Tensor::vector(self.cache.path_h[1][i].clone()),
        )
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

struct NodeTable<'a> {
    ctx: &'a GraphContext,
    views: &'a Views<'a>,
    nodes: Vec<NodeEntry>,
    index: HashMap<String, usize>,
}

impl NodeTable<'_> {
    fn get(&mut self, id: &str) -> Result<usize> {
        if let Some(&i) = self.index.get(id) {
            return Ok(i);
        }
        let node_type = self
            .ctx
            .graph
            .node_type(id)
            .ok_or_else(|| Error::NotFound(format!("node `{id}`")))?;
        let x = self.ctx.features.lookup(id)?;
        let w = self.views.transforms[&node_type];
        if x.len() != w.cols() {
            return Err(Error::Dimension(format!(
                "{node_type} `{id}` has {} features, transform expects {}",
                x.len(),
                w.cols()
            )));
        }
        let h = matvec(w.data(), w.rows(), w.cols(), x.data());
        self.nodes.push(NodeEntry {
            node_type,
            x: x.data().to_vec(),
            h,
        });
        self.index.insert(id.to_string(), self.nodes.len() - 1);
        Ok(self.nodes.len() - 1)
    }
}

/// Instances of `target` that enter aggregation under `seed`: a uniform
/// sample, chronologically sorted for the user path.
fn sampled(ctx: &GraphContext, target: &str, p: usize, n: usize, seed: u64) -> Result<Vec<MetaPathInstance>> {
    let schema = PATHS[p];
    let pool = ctx.pool(target, schema)?;
    let s = sample_instances(pool, n, instance_seed(seed, target, schema))?;
    if schema == MetaPathSchema::NewsUserNews {
        sort_chronological(&s)
    } else {
        Ok(s)
    }
}

/// Runs the network on a batch of news; the batch is also the context of the
/// semantic-level summary.
pub fn forward_batch<S: AsRef<str>>(
    ctx: &GraphContext,
    targets: &[S],
    params: &ParamStore,
    config: &ModelConfig,
    seed: u64,
) -> Result<BatchOutput> {
    if targets.is_empty() {
        return Err(Error::Precondition("forward needs at least one target".into()));
    }
    let views = Views::new(params, config)?;
    let d = views.d;
    let mut table = NodeTable {
        ctx,
        views: &views,
        nodes: Vec::new(),
        index: HashMap::new(),
    };
    let mut paths = Vec::with_capacity(targets.len());
    let mut path_h: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
    for target in targets {
        let target = target.as_ref();
        let chosen = [
            sampled(ctx, target, 0, config.sample_ps, seed)?,
            sampled(ctx, target, 1, config.sample_pu, seed)?,
        ];
        if chosen.iter().all(Vec::is_empty) {
            return Err(Error::Isolation(format!(
                "news `{target}` has neither publisher-path nor user-path instances"
            )));
        }
        let mut per_path: [Option<PathCache>; 2] = [None, None];
        for p in 0..2 {
            if chosen[p].is_empty() {
                path_h[p].push(views.default[p].to_vec());
                continue;
            }
            let mut pairs = Vec::with_capacity(chosen[p].len());
            let mut encoded = Vec::with_capacity(chosen[p].len());
            let mut encode_caches = Vec::with_capacity(chosen[p].len());
            for inst in &chosen[p] {
                let u = table.get(&inst.other)?;
                let w = table.get(&inst.middle)?;
                let (e, c) = encode_raw(
                    views.kind,
                    &table.nodes[u].h,
                    &table.nodes[w].h,
                    views.relation[p],
                    views.conve,
                );
                pairs.push((u, w));
                encoded.push(e);
                encode_caches.push(c);
            }
            let (h, agg) = match (p, views.pu) {
                (1, PuView::Gru(g)) => {
                    let (h, c) = gru_run(g, &encoded);
                    (h, AggCache::Gru(c))
                }
                (1, PuView::Attention(a)) => {
                    let (h, c) = attend(a, &encoded);
                    (h, AggCache::Attention(c))
                }
                _ => {
                    let (h, c) = attend(views.attn_ps, &encoded);
                    (h, AggCache::Attention(c))
                }
            };
            path_h[p].push(h);
            per_path[p] = Some(PathCache {
                pairs,
                encoded,
                encode_caches,
                agg,
            });
        }
        paths.push(per_path);
    }

    let (fused, fuse_cache) = fuse(views.fuse, [&path_h[0], &path_h[1]]);
    let mut logits = Vec::with_capacity(fused.len());
    let mut probs = Vec::with_capacity(fused.len());
    for h in &fused {
        let z = matvec(views.cls_w, 2, d, h);
        let z = [z[0] + views.cls_b[0], z[1] + views.cls_b[1]];
        let pr = softmax_slice(&z);
        logits.push(z);
        probs.push([pr[0], pr[1]]);
    }
    let beta = fuse_cache.beta;
    let nodes = table.nodes;
    Ok(BatchOutput {
        targets: targets.iter().map(|t| t.as_ref().to_string()).collect(),
        embeddings: fused.into_iter().map(Tensor::vector).collect(),
        logits,
        probs,
        beta,
        cache: BatchCache {
            version: params.version(),
            config: config.clone(),
            nodes,
            paths,
            path_h,
            fuse: fuse_cache,
        },
    })
}

/// Single-news forward: returns `(h_v, [P_real, P_fake])`.
pub fn forward(
    ctx: &GraphContext,
    target: &str,
    params: &ParamStore,
    config: &ModelConfig,
    seed: u64,
) -> Result<(Tensor, Tensor)> {
    let mut out = forward_batch(ctx, &[target], params, config, seed)?;
    let h = out.embeddings.pop().expect("one target");
    Ok((h, Tensor::vector(out.probs[0].to_vec())))
}

/// Accumulates parameter gradients given `d loss / d logits` per news.
pub fn backward(out: &BatchOutput, dlogits: &[[f64; 2]], params: &mut ParamStore) -> Result<()> {
    let cache = &out.cache;
    if cache.version != params.version() {
        return Err(Error::State(
            "forward cache is stale: parameters changed since the forward pass".into(),
        ));
    }
    if dlogits.len() != out.len() {
        return Err(Error::Dimension(format!(
            "{} logit gradients for a batch of {}",
            dlogits.len(),
            out.len()
        )));
    }
    let grads = {
        let views = Views::new(params, &cache.config)?;
        compute_grads(&views, cache, dlogits)
    };
    for (name, g) in grads {
        params.accumulate(&name, &g)?;
    }
    Ok(())
}

fn compute_grads(v: &Views<'_>, cache: &BatchCache, dlogits: &[[f64; 2]]) -> Vec<(String, Vec<f64>)> {
    let d = v.d;
    let n = dlogits.len();
    let zeros = |len: usize| vec![0.0; len];

    let mut g_cls_w = zeros(2 * d);
    let mut g_cls_b = zeros(2);
    let fused: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let b = cache.fuse.beta;
            cache.path_h[0][i]
                .iter()
                .zip(&cache.path_h[1][i])
                .map(|(s, u)| b[0] * s + b[1] * u)
                .collect()
        })
        .collect();
    let mut dfused = Vec::with_capacity(n);
    for (i, dz) in dlogits.iter().enumerate() {
        outer_acc(&mut g_cls_w, dz, &fused[i]);
        g_cls_b[0] += dz[0];
        g_cls_b[1] += dz[1];
        let mut dh = zeros(d);
        matvec_t_acc(v.cls_w, 2, d, dz, &mut dh);
        dfused.push(dh);
    }

    let (mut g_m, mut g_b, mut g_q) = (zeros(v.fuse.m.len()), zeros(v.fuse.dm), zeros(v.fuse.dm));
    let dpath = fuse_backward(
        v.fuse,
        [&cache.path_h[0], &cache.path_h[1]],
        &cache.fuse,
        &dfused,
        FuseGrads {
            m: &mut g_m,
            b: &mut g_b,
            q: &mut g_q,
        },
    );

    let mut g_rel = [zeros(d), zeros(d)];
    let mut g_default = [zeros(d), zeros(d)];
    let mut g_ps = (zeros(v.attn_ps.heads.len()), zeros(v.attn_ps.merge.len()));
    let mut g_pu_attn = match v.pu {
        PuView::Attention(a) => Some((zeros(a.heads.len()), zeros(a.merge.len()))),
        PuView::Gru(_) => None,
    };
    let mut g_gru = match v.pu {
        PuView::Gru(_) => Some(GruGradBuf::zeros(d, d)),
        PuView::Attention(_) => None,
    };
    let mut g_conve = v.conve.map(|c| (zeros(c.kernels.len()), zeros(c.proj.len())));
    let mut dnode: Vec<Vec<f64>> = cache.nodes.iter().map(|_| zeros(d)).collect();

    for (i, per_path) in cache.paths.iter().enumerate() {
        for p in 0..2 {
            let g = &dpath[p][i];
            let Some(pc) = &per_path[p] else {
                g_default[p].iter_mut().zip(g).for_each(|(a, b)| *a += b);
                continue;
            };
            let mut denc = vec![zeros(d); pc.encoded.len()];
            match &pc.agg {
                AggCache::Attention(ac) => {
                    let (view, bufs) = if p == 0 {
                        (v.attn_ps, &mut g_ps)
                    } else {
                        let PuView::Attention(a) = v.pu else {
                            unreachable!("attention cache on a recurrent user path")
                        };
                        (a, g_pu_attn.as_mut().expect("attention buffers"))
                    };
                    attend_backward(view, &pc.encoded, ac, g, &mut bufs.0, &mut bufs.1, &mut denc);
                }
                AggCache::Gru(steps) => {
                    let PuView::Gru(gv) = v.pu else {
                        unreachable!("recurrent cache on an attention user path")
                    };
                    gru_run_backward(gv, steps, g, g_gru.as_mut().expect("GRU buffers"), &mut denc);
                }
            }
            for (j, &(u, w)) in pc.pairs.iter().enumerate() {
                let (mut du, mut dw) = (zeros(d), zeros(d));
                encode_backward_raw(
                    v.kind,
                    &cache.nodes[u].h,
                    &cache.nodes[w].h,
                    v.relation[p],
                    v.conve,
                    &pc.encode_caches[j],
                    &denc[j],
                    &mut du,
                    &mut dw,
                    &mut g_rel[p],
                    g_conve.as_mut().map(|(k, pj)| ConvEGrads { kernels: k, proj: pj }),
                );
                dnode[u].iter_mut().zip(&du).for_each(|(a, b)| *a += b);
                dnode[w].iter_mut().zip(&dw).for_each(|(a, b)| *a += b);
            }
        }
    }

    let mut g_transform: BTreeMap<NodeType, Vec<f64>> =
        v.transforms.iter().map(|(t, w)| (*t, zeros(w.len()))).collect();
    for (node, dh) in cache.nodes.iter().zip(&dnode) {
        let buf = g_transform.get_mut(&node.node_type).expect("every type has a transform");
        outer_acc(buf, dh, &node.x);
    }

    let mut out: Vec<(String, Vec<f64>)> = g_transform
        .into_iter()
        .map(|(t, g)| (names::transform(t), g))
        .collect();
    let [rel_ps, rel_pu] = g_rel;
    let [def_ps, def_pu] = g_default;
    out.extend([
        (names::RELATION_PS.to_string(), rel_ps),
        (names::RELATION_PU.to_string(), rel_pu),
        (names::ATTN_PS_HEADS.to_string(), g_ps.0),
        (names::ATTN_PS_MERGE.to_string(), g_ps.1),
        (names::SEMANTIC_M.to_string(), g_m),
        (names::SEMANTIC_B.to_string(), g_b),
        (names::SEMANTIC_Q.to_string(), g_q),
        (names::CLASSIFIER_W.to_string(), g_cls_w),
        (names::CLASSIFIER_B.to_string(), g_cls_b),
        (names::DEFAULT_PS.to_string(), def_ps),
        (names::DEFAULT_PU.to_string(), def_pu),
    ]);
    if let Some((h, m)) = g_pu_attn {
        out.push((names::ATTN_PU_HEADS.to_string(), h));
        out.push((names::ATTN_PU_MERGE.to_string(), m));
    }
    if let Some(buf) = g_gru {
        for (part, g) in GRU_PARAM_NAMES.iter().zip(buf.into_ordered()) {
            out.push((names::gru(part), g));
        }
    }
    if let Some((k, p)) = g_conve {
        out.push((names::CONVE_KERNELS.to_string(), k));
        out.push((names::CONVE_PROJ.to_string(), p));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurize::bind;
    use crate::fixtures::{toy_feature_tables_with_dims, toy_graph};
    use crate::hetgraph::EdgeType;
    use crate::model::{init_params, ConvEConfig};
    use crate::numerics::{grad_check, GradCheckOptions};

    fn context(g: HeteroGraph) -> GraphContext {
        let tables = toy_feature_tables_with_dims(&g, 10, 9, 8);
        let bundle = bind(&g, tables).unwrap();
        GraphContext::new(g, bundle).unwrap()
    }

    fn config(temporal: TemporalMode, encoder: EncoderKind) -> ModelConfig {
        ModelConfig {
            d_hidden: 8,
            heads: 2,
            d_semantic: 5,
            temporal,
            encoder,
            conve: ConvEConfig {
                kernel: 3,
                channels: 2,
                rows: 2,
            },
            ..ModelConfig::default()
        }
    }

    fn setup(temporal: TemporalMode, encoder: EncoderKind) -> (GraphContext, ModelConfig, ParamStore) {
        let ctx = context(toy_graph());
        let c = config(temporal, encoder);
        let p = init_params(&c, &ctx.features().dims(), 11).unwrap();
        (ctx, c, p)
    }

    const ALL_NEWS: [&str; 4] = ["news1", "news2", "news3", "news4"];

    #[test]
    fn worked_target_uses_two_instances_per_path() {
        let (ctx, c, p) = setup(TemporalMode::Gru, EncoderKind::TransE);
        let out = forward_batch(&ctx, &["news2"], &p, &c, 0).unwrap();
        assert_eq!(out.instance_counts(0), (2, 2));
        let pr = out.probs[0];
        assert!((pr[0] + pr[1] - 1.0).abs() < 1e-12);
        let again = forward_batch(&ctx, &["news2"], &p, &c, 0).unwrap();
        assert_eq!(out.probs[0][0].to_bits(), again.probs[0][0].to_bits());
        assert_eq!(out.probs[0][1].to_bits(), again.probs[0][1].to_bits());
    }

    #[test]
    fn empty_pool_falls_back_and_isolation_fails() {
        let (ctx, c, p) = setup(TemporalMode::Gru, EncoderKind::TransE);
        let out = forward_batch(&ctx, &["news4"], &p, &c, 0).unwrap();
        assert_eq!(out.instance_counts(0), (0, 1));
        assert_eq!(out.path_vectors(0).0.data(), p.get(names::DEFAULT_PS).unwrap().data());

        let mut g = toy_graph();
        g.add_node("news9", NodeType::News).unwrap();
        let ctx = context(g);
        assert!(ctx.is_isolated("news9").unwrap());
        assert!(matches!(
            forward_batch(&ctx, &["news9"], &p, &c, 0),
            Err(Error::Isolation(_))
        ));
        assert!(matches!(forward(&ctx, "user1", &p, &c, 0), Err(Error::Type(_))));
        assert!(matches!(forward(&ctx, "nope", &p, &c, 0), Err(Error::NotFound(_))));
    }

    #[test]
    fn missing_feature_is_a_coverage_error() {
        let g = toy_graph();
        let tables = toy_feature_tables_with_dims(&g, 10, 9, 8);
        let bundle = bind(&g, tables).unwrap();
        let mut g2 = g.clone();
        g2.add_node("user9", NodeType::User).unwrap();
        g2.add_edge("user9", "news2", EdgeType::Tweet, Some(5)).unwrap();
        g2.add_edge("user9", "news1", EdgeType::Tweet, Some(6)).unwrap();
        let ctx = GraphContext::new(g2, bundle).unwrap();
        let c = config(TemporalMode::Gru, EncoderKind::TransE);
        let p = init_params(&c, &ctx.features().dims(), 1).unwrap();
        assert!(matches!(
            forward(&ctx, "news2", &p, &c, 0),
            Err(Error::Coverage { .. })
        ));
    }

    #[test]
    fn new_news_is_scored_without_retraining() {
        let (ctx, c, p) = setup(TemporalMode::Gru, EncoderKind::RotatE);
        let before = forward_batch(&ctx, &ALL_NEWS, &p, &c, 3).unwrap();
        let mut g = ctx.graph().clone();
        g.add_node("news5", NodeType::News).unwrap();
        g.add_edge("pub2", "news5", EdgeType::Publication, None).unwrap();
        g.add_edge("user3", "news5", EdgeType::Tweet, Some(400)).unwrap();
        let ctx2 = context(g);
        let (h, pr) = forward(&ctx2, "news5", &p, &c, 3).unwrap();
        assert_eq!(h.len(), c.d_hidden);
        assert!(pr.data().iter().all(|&x| (0.0..=1.0).contains(&x)));
        assert!((pr.sum() - 1.0).abs() < 1e-12);
        assert_eq!(before.probs.len(), 4);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let (ctx, c, mut p) = setup(TemporalMode::Attention, EncoderKind::ConvE);
        let out = forward_batch(&ctx, &ALL_NEWS, &p, &c, 0).unwrap();
        backward(&out, &[[0.0; 2]; 4], &mut p).unwrap();
        assert!(p.iter().all(|(_, gp)| gp.grad.data().iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn stale_cache_is_rejected() {
        let (ctx, c, mut p) = setup(TemporalMode::Gru, EncoderKind::TransE);
        let out = forward_batch(&ctx, &ALL_NEWS, &p, &c, 0).unwrap();
        p.value_mut(names::CLASSIFIER_B).unwrap().data_mut()[0] += 1.0;
        assert!(matches!(
            backward(&out, &[[1.0, -1.0]; 4], &mut p),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn unused_publisher_path_gets_no_publisher_gradient() {
        let (ctx, c, mut p) = setup(TemporalMode::Gru, EncoderKind::TransE);
        let out = forward_batch(&ctx, &["news4"], &p, &c, 0).unwrap();
        backward(&out, &[[0.3, -0.3]], &mut p).unwrap();
        let zero = |n: &str| p.grad(n).unwrap().data().iter().all(|&x| x == 0.0);
        assert!(zero("transform.publisher"));
        assert!(zero(names::ATTN_PS_HEADS) && zero(names::ATTN_PS_MERGE));
        assert!(!zero(names::DEFAULT_PS));
    }

    fn loss_and_grads(ctx: &GraphContext, c: &ModelConfig, p: &mut ParamStore) -> Result<f64> {
        let out = forward_batch(ctx, &ALL_NEWS, p, c, 5)?;
        let labels = [1usize, 0, 1, 0];
        let b = labels.len() as f64;
        let mut loss = 0.0;
        let mut dl = Vec::new();
        for (pr, &y) in out.probs.iter().zip(&labels) {
            loss -= pr[y].ln() / b;
            let mut g = *pr;
            g[y] -= 1.0;
            dl.push([g[0] / b, g[1] / b]);
        }
        backward(&out, &dl, p)?;
        Ok(loss)
    }

    #[test]
    fn full_model_gradients_match_finite_differences() {
        for (t, e) in [
            (TemporalMode::Gru, EncoderKind::TransE),
            (TemporalMode::Gru, EncoderKind::RotatE),
            (TemporalMode::Attention, EncoderKind::ConvE),
        ] {
            let (ctx, c, mut p) = setup(t, e);
            let report = grad_check(&mut p, 1e-5, GradCheckOptions::default(), |s| {
                loss_and_grads(&ctx, &c, s)
            })
            .unwrap();
            assert!(report.max_rel_error < 1e-3, "{t}/{e}: {:?}", report.worst());
            assert!(report.tensors.iter().all(|tc| tc.coords_checked >= 200.min(p.get(&tc.name).unwrap().len())));
        }
    }
}
