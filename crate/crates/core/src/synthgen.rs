//! Synthetic labeled news graphs with controllable temporal and feature signal.
//!
//! Every news gets one publisher and a Poisson number of tweets. Regular
//! users engage on an exponential decay after publication. Instigators are a
//! small, heavily active group. In the disinformation regime their tweets on
//! fake news land in bursts at multiples of the spike period; elsewhere they
//! follow the same decay as everyone else. The set of users reached is drawn
//! the same way for both classes, so with `signal_strength = 0` only the
//! timing distinguishes fake from real news.
//!
//! `signal_strength` in `[0, 1]` adds class-correlated structure: feature
//! offsets on news, leaning users and biased publishers, user homophily, and
//! a higher instigator share on fake news.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::{sample, sample_weighted};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp, Normal, Poisson};

use crate::error::{Error, Result};
use crate::featurize::{bind, hash_text, save_features, FeatureBundle, FeatureTable};
use crate::hetgraph::{save_graph, EdgeType, HeteroGraph, Label, NodeType};
use crate::kv::{format_kv, parse_kv};
use crate::seed;

/// Tweet timestamps are `BASE_EPOCH + hours * 3600` seconds.
pub const BASE_EPOCH: i64 = 1_500_000_000;
/// News publication times are spread uniformly over this many hours.
pub const PUBLISH_SPREAD_HOURS: f64 = 720.0;
pub const INSTIGATOR_OFFSET: f64 = 1.0;
const WORDS_PER_PROFILE: usize = 8;
const VOCABULARY: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Disinformation,
    Misinformation,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Disinformation => "disinformation",
            Regime::Misinformation => "misinformation",
        }
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "disinformation" => Ok(Regime::Disinformation),
            "misinformation" => Ok(Regime::Misinformation),
            other => Err(Error::Config(format!("unknown regime `{other}`"))),
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_news: usize,
    pub n_users: usize,
    pub n_publishers: usize,
    pub fake_frac: f64,
    pub regime: Regime,
    pub horizon_hours: u32,
    pub spike_period_hours: u32,
    /// Mean number of tweets per news.
    pub base_rate: f64,
    pub instigator_frac: f64,
    pub publisher_bias_strength: f64,
    pub news_dim: usize,
    pub user_dim: usize,
    pub publisher_dim: usize,
    pub seed: u64,
    pub signal_strength: f64,
    /// Share of tweets made by instigators.
    pub spike_weight: f64,
    pub decay_hours: f64,
    pub spike_jitter_hours: f64,
    pub follows_per_user: usize,
    pub citations_per_publisher: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_news: 500,
            n_users: 5000,
            n_publishers: 20,
            fake_frac: 0.4,
            regime: Regime::Disinformation,
            horizon_hours: 500,
            spike_period_hours: 72,
            base_rate: 40.0,
            instigator_frac: 0.05,
            publisher_bias_strength: 0.5,
            news_dim: 32,
            user_dim: 32,
            publisher_dim: 16,
            seed: 42,
            signal_strength: 0.0,
            spike_weight: 0.1,
            decay_hours: 6.0,
            spike_jitter_hours: 2.0,
            follows_per_user: 3,
            citations_per_publisher: 2,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_news < 2 || self.n_users == 0 || self.n_publishers == 0 {
            return bad(format!(
                "counts must be positive with at least 2 news (news {}, users {}, publishers {})",
                self.n_news, self.n_users, self.n_publishers
            ));
        }
        if !(self.fake_frac > 0.0 && self.fake_frac < 1.0) {
            return bad(format!("fake_frac {} outside (0, 1)", self.fake_frac));
        }
        let n_fake = self.fake_count();
        if n_fake == 0 || n_fake == self.n_news {
            return bad(format!("fake_frac {} leaves one class empty", self.fake_frac));
        }
        if self.spike_period_hours == 0 || self.horizon_hours == 0 {
            return bad("horizon and spike period must be positive".into());
        }
        if self.regime == Regime::Disinformation
            && self.horizon_hours < 2 * self.spike_period_hours
        {
            return bad(format!(
                "horizon {}h shorter than two spike periods of {}h",
                self.horizon_hours, self.spike_period_hours
            ));
        }
        if !(self.base_rate > 0.0 && self.base_rate.is_finite()) {
            return bad(format!("base_rate {} must be positive", self.base_rate));
        }
        for (name, v) in [
            ("instigator_frac", self.instigator_frac),
            ("publisher_bias_strength", self.publisher_bias_strength),
            ("signal_strength", self.signal_strength),
            ("spike_weight", self.spike_weight),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} {v} outside [0, 1]"));
            }
        }
        if !(self.decay_hours > 0.0 && self.decay_hours.is_finite()) {
            return bad(format!("decay_hours {} must be positive", self.decay_hours));
        }
        if !(self.spike_jitter_hours >= 0.0 && self.spike_jitter_hours.is_finite()) {
            return bad(format!("spike_jitter_hours {} must be >= 0", self.spike_jitter_hours));
        }
        for (name, d) in [
            ("news_dim", self.news_dim),
            ("user_dim", self.user_dim),
            ("publisher_dim", self.publisher_dim),
        ] {
            if d < 8 {
                return bad(format!("{name} {d} < 8"));
            }
        }
        Ok(())
    }

    pub fn fake_count(&self) -> usize {
        (self.fake_frac * self.n_news as f64).round() as usize
    }

    pub fn instigator_count(&self) -> usize {
        ((self.instigator_frac * self.n_users as f64).round() as usize).min(self.n_users)
    }

    pub fn biased_publisher_count(&self) -> usize {
        self.n_publishers / 2
    }

    /// Number of spike centres `k * period` inside the horizon.
    pub fn spike_count(&self) -> u32 {
        self.horizon_hours / self.spike_period_hours.max(1)
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let p = |k: &str, v: String| (k.to_string(), v);
        vec![
            p("n_news", self.n_news.to_string()),
            p("n_users", self.n_users.to_string()),
            p("n_publishers", self.n_publishers.to_string()),
            p("fake_frac", self.fake_frac.to_string()),
            p("regime", self.regime.to_string()),
            p("horizon_hours", self.horizon_hours.to_string()),
            p("spike_period_hours", self.spike_period_hours.to_string()),
            p("base_rate", self.base_rate.to_string()),
            p("instigator_frac", self.instigator_frac.to_string()),
            p("publisher_bias_strength", self.publisher_bias_strength.to_string()),
            p("news_dim", self.news_dim.to_string()),
            p("user_dim", self.user_dim.to_string()),
            p("publisher_dim", self.publisher_dim.to_string()),
            p("seed", self.seed.to_string()),
            p("signal_strength", self.signal_strength.to_string()),
            p("spike_weight", self.spike_weight.to_string()),
            p("decay_hours", self.decay_hours.to_string()),
            p("spike_jitter_hours", self.spike_jitter_hours.to_string()),
            p("follows_per_user", self.follows_per_user.to_string()),
            p("citations_per_publisher", self.citations_per_publisher.to_string()),
        ]
    }

    /// Sets one key; returns `false` for keys this config does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "n_news" => self.n_news = parse_num(key, value)?,
            "n_users" => self.n_users = parse_num(key, value)?,
            "n_publishers" => self.n_publishers = parse_num(key, value)?,
            "fake_frac" => self.fake_frac = parse_num(key, value)?,
            "regime" => self.regime = value.parse()?,
            "horizon_hours" => self.horizon_hours = parse_num(key, value)?,
            "spike_period_hours" => self.spike_period_hours = parse_num(key, value)?,
            "base_rate" => self.base_rate = parse_num(key, value)?,
            "instigator_frac" => self.instigator_frac = parse_num(key, value)?,
            "publisher_bias_strength" => self.publisher_bias_strength = parse_num(key, value)?,
            "news_dim" => self.news_dim = parse_num(key, value)?,
            "user_dim" => self.user_dim = parse_num(key, value)?,
            "publisher_dim" => self.publisher_dim = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "signal_strength" => self.signal_strength = parse_num(key, value)?,
            "spike_weight" => self.spike_weight = parse_num(key, value)?,
            "decay_hours" => self.decay_hours = parse_num(key, value)?,
            "spike_jitter_hours" => self.spike_jitter_hours = parse_num(key, value)?,
            "follows_per_user" => self.follows_per_user = parse_num(key, value)?,
            "citations_per_publisher" => self.citations_per_publisher = parse_num(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Parses a key-value file; unknown keys are rejected.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (k, v) in parse_kv(text)? {
            if !c.set(&k, &v)? {
                return Err(Error::Config(format!("unknown generator key `{k}`")));
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn to_kv(&self) -> String {
        format_kv(&self.to_pairs())
    }
}

/// Expected sizes and timing parameters of a generator run.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSummary {
    pub config: SynthConfig,
    pub expected_fake: usize,
    pub expected_real: usize,
    pub expected_instigators: usize,
    pub expected_biased_publishers: usize,
    pub expected_tweets: f64,
    pub expected_spikes: u32,
}

const SUMMARY_KEYS: [&str; 6] = [
    "expected_fake",
    "expected_real",
    "expected_instigators",
    "expected_biased_publishers",
    "expected_tweets",
    "expected_spikes",
];

impl SynthSummary {
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut pairs = self.config.to_pairs();
        let values = [
            self.expected_fake.to_string(),
            self.expected_real.to_string(),
            self.expected_instigators.to_string(),
            self.expected_biased_publishers.to_string(),
            self.expected_tweets.to_string(),
            self.expected_spikes.to_string(),
        ];
        pairs.extend(SUMMARY_KEYS.iter().zip(values).map(|(k, v)| (k.to_string(), v)));
        pairs
    }

    pub fn to_kv(&self) -> String {
        format_kv(&self.to_pairs())
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut config = SynthConfig::default();
        let mut extra = BTreeMap::new();
        for (k, v) in parse_kv(text)? {
            if !config.set(&k, &v)? {
                if !SUMMARY_KEYS.contains(&k.as_str()) {
                    return Err(Error::Config(format!("unknown summary key `{k}`")));
                }
                extra.insert(k, v);
            }
        }
        let get = |k: &str| {
            extra
                .get(k)
                .ok_or_else(|| Error::Config(format!("summary lacks `{k}`")))
        };
        Ok(Self {
            config,
            expected_fake: parse_num("expected_fake", get("expected_fake")?)?,
            expected_real: parse_num("expected_real", get("expected_real")?)?,
            expected_instigators: parse_num("expected_instigators", get("expected_instigators")?)?,
            expected_biased_publishers: parse_num(
                "expected_biased_publishers",
                get("expected_biased_publishers")?,
            )?,
            expected_tweets: parse_num("expected_tweets", get("expected_tweets")?)?,
            expected_spikes: parse_num("expected_spikes", get("expected_spikes")?)?,
        })
    }
}

pub fn describe(config: &SynthConfig) -> SynthSummary {
    let fake = config.fake_count().min(config.n_news);
    SynthSummary {
        config: config.clone(),
        expected_fake: fake,
        expected_real: config.n_news - fake,
        expected_instigators: config.instigator_count(),
        expected_biased_publishers: config.biased_publisher_count(),
        expected_tweets: config.n_news as f64 * config.base_rate,
        expected_spikes: match config.regime {
            Regime::Disinformation => config.spike_count(),
            Regime::Misinformation => 0,
        },
    }
}

/// A generated dataset plus the ground truth used to build it.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub graph: HeteroGraph,
    pub features: FeatureBundle,
    /// Publication time of each news, seconds since the epoch.
    pub published_at: BTreeMap<String, i64>,
    pub instigators: BTreeSet<String>,
    pub biased_publishers: BTreeSet<String>,
}

impl SynthData {
    /// Hours between publication and each tweet on news of the given class.
    pub fn engagement_hours(&self, label: Label) -> Vec<f64> {
        let g = &self.graph;
        g.edges()
            .iter()
            .filter(|e| e.kind == EdgeType::Tweet)
            .filter_map(|e| {
                let news = g.id(e.dst);
                (g.label(news) == Some(label)).then(|| {
                    (e.timestamp.unwrap_or(0) - self.published_at[news]) as f64 / 3600.0
                })
            })
            .collect()
    }

    /// Writes `graph.jsonl` and one feature CSV per node type into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_graph(&self.graph, dir.join("graph.jsonl"))?;
        for t in self.features.tables() {
            save_features(t, dir.join(format!("{}.csv", t.node_type)))?;
        }
        Ok(())
    }
}

fn ids(prefix: &str, n: usize) -> Vec<String> {
    let width = n.saturating_sub(1).to_string().len();
    (0..n).map(|i| format!("{prefix}{i:0width$}")).collect()
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let v: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    v.into_iter().map(|x| x / norm).collect()
}

fn profile(rng: &mut ChaCha8Rng, kind: &str, id: &str) -> String {
    let mut s = format!("{kind} {id}");
    for _ in 0..WORDS_PER_PROFILE {
        s.push_str(&format!(" w{}", rng.random_range(0..VOCABULARY)));
    }
    s
}

fn with_offset(mut base: Vec<f64>, dir: &[f64], scale: f64) -> Vec<f64> {
    if scale != 0.0 {
        base.iter_mut().zip(dir).for_each(|(x, d)| *x += scale * d);
    }
    base
}

fn sign(fake: bool) -> f64 {
    if fake {
        1.0
    } else {
        -1.0
    }
}

/// Directed preferential attachment: each node links to `m` distinct others
/// with probability proportional to in-degree plus one.
fn preferential_attachment(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<(usize, usize)> {
    let m = m.min(n.saturating_sub(1));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    // every node once, plus once per received edge
    let mut urn: Vec<usize> = (0..n).collect();
    let mut edges = Vec::with_capacity(n * m);
    for &src in &order {
        let mut picked = BTreeSet::new();
        while picked.len() < m {
            let dst = urn[rng.random_range(0..urn.len())];
            if dst != src {
                picked.insert(dst);
            }
        }
        for &dst in &picked {
            urn.push(dst);
            edges.push((src, dst));
        }
    }
    edges
}

pub fn generate(config: &SynthConfig) -> Result<SynthData> {
    config.validate()?;
    let c = config;
    let s = c.signal_strength;
    let stream = |label: &str| seed::rng(seed::derive(c.seed, &format!("synth-{label}")));

    let news = ids("news", c.n_news);
    let users = ids("user", c.n_users);
    let pubs = ids("pub", c.n_publishers);

    let mut rng = stream("roles");
    let fake: BTreeSet<usize> = sample(&mut rng, c.n_news, c.fake_count()).into_iter().collect();
    let instigators: BTreeSet<usize> =
        sample(&mut rng, c.n_users, c.instigator_count()).into_iter().collect();
    let biased: BTreeSet<usize> =
        sample(&mut rng, c.n_publishers, c.biased_publisher_count()).into_iter().collect();
    let regulars: Vec<usize> = (0..c.n_users).filter(|u| !instigators.contains(u)).collect();
    let inst_list: Vec<usize> = instigators.iter().copied().collect();
    // leaning of each regular user toward one class, used only under signal
    let leans_fake: Vec<bool> = regulars.iter().map(|_| rng.random_bool(c.fake_frac)).collect();
    let fake_leaning = leans_fake.iter().filter(|&&f| f).count().max(1) as f64;
    let real_leaning = (regulars.len() as f64 - fake_leaning).max(1.0);

    let mut g = HeteroGraph::new();
    for id in &pubs {
        g.add_node(id, NodeType::Publisher)?;
    }
    for (i, id) in news.iter().enumerate() {
        g.add_node(id, NodeType::News)?;
        g.set_label(id, if fake.contains(&i) { Label::Fake } else { Label::Real })?;
    }
    for id in &users {
        g.add_node(id, NodeType::User)?;
    }

    let mut rng = stream("publication");
    let biased_list: Vec<usize> = biased.iter().copied().collect();
    let unbiased_list: Vec<usize> = (0..c.n_publishers).filter(|p| !biased.contains(p)).collect();
    let mut published_at = BTreeMap::new();
    for (i, id) in news.iter().enumerate() {
        let p_biased = if fake.contains(&i) {
            0.5 + 0.5 * c.publisher_bias_strength
        } else {
            0.5 - 0.5 * c.publisher_bias_strength
        };
        let group = if rng.random_bool(p_biased) { &biased_list } else { &unbiased_list };
        let group = if group.is_empty() { &unbiased_list } else { group };
        let group = if group.is_empty() { &biased_list } else { group };
        let p = group[rng.random_range(0..group.len())];
        g.add_edge(&pubs[p], id, EdgeType::Publication, None)?;
        let hours = rng.random_range(0.0..PUBLISH_SPREAD_HOURS);
        published_at.insert(id.clone(), BASE_EPOCH + (hours * 3600.0).round() as i64);
    }

    let mut rng = stream("tweets");
    let poisson = Poisson::new(c.base_rate).map_err(|e| Error::Config(e.to_string()))?;
    let decay = Exp::new(1.0 / c.decay_hours).map_err(|e| Error::Config(e.to_string()))?;
    let jitter = Normal::new(0.0, c.spike_jitter_hours).map_err(|e| Error::Config(e.to_string()))?;
    let horizon = f64::from(c.horizon_hours);
    for (i, id) in news.iter().enumerate() {
        let is_fake = fake.contains(&i);
        let k = (poisson.sample(&mut rng) as usize).clamp(1, c.n_users);
        let share = (c.spike_weight * (1.0 + sign(is_fake) * s)).clamp(0.0, 1.0);
        let n_inst = Binomial::new(k as u64, share)
            .map_err(|e| Error::Config(e.to_string()))?
            .sample(&mut rng) as usize;
        let n_inst = n_inst.min(inst_list.len()).max(k.saturating_sub(regulars.len()));
        let n_reg = k - n_inst;

        let mut chosen: Vec<(usize, bool)> = sample(&mut rng, inst_list.len(), n_inst)
            .into_iter()
            .map(|j| (inst_list[j], true))
            .collect();
        if n_reg > 0 {
            let group_share = if is_fake { fake_leaning } else { real_leaning } / regulars.len() as f64;
            let weight = |j: usize| {
                let matches = leans_fake[j] == is_fake;
                let w = 1.0 - s + if matches { s / group_share } else { 0.0 };
                w.max(1e-9)
            };
            let picked = sample_weighted(&mut rng, regulars.len(), weight, n_reg)
                .map_err(|e| Error::Config(format!("user sampling failed: {e}")))?;
            chosen.extend(picked.into_iter().map(|j| (regulars[j], false)));
        }
        chosen.sort_unstable();

        let spikes = c.spike_count().max(1);
        for (u, is_inst) in chosen {
            let hours = if is_inst && is_fake && c.regime == Regime::Disinformation {
                let k = rng.random_range(1..=spikes);
                f64::from(k * c.spike_period_hours) + jitter.sample(&mut rng)
            } else {
                decay.sample(&mut rng)
            };
            let hours = hours.clamp(0.0, horizon);
            let ts = published_at[id] + (hours * 3600.0).round() as i64;
            g.add_edge(&users[u], id, EdgeType::Tweet, Some(ts))?;
        }
    }

    let mut rng = stream("social");
    for (a, b) in preferential_attachment(&mut rng, c.n_users, c.follows_per_user) {
        g.add_edge(&users[a], &users[b], EdgeType::Following, None)?;
    }
    for (a, b) in preferential_attachment(&mut rng, c.n_publishers, c.citations_per_publisher) {
        g.add_edge(&pubs[a], &pubs[b], EdgeType::Citation, None)?;
    }

    let mut rng = stream("features");
    let feature_seed = seed::derive(c.seed, "synth-hash");
    let news_dir = unit_vector(&mut rng, c.news_dim);
    let lean_dir = unit_vector(&mut rng, c.user_dim);
    let inst_dir = unit_vector(&mut rng, c.user_dim);
    let pub_dir = unit_vector(&mut rng, c.publisher_dim);

    let mut news_t = FeatureTable::new(NodeType::News, c.news_dim);
    for (i, id) in news.iter().enumerate() {
        let base = hash_text(&profile(&mut rng, "news", id), c.news_dim, feature_seed);
        news_t.insert(id, with_offset(base, &news_dir, s * sign(fake.contains(&i))))?;
    }
    let mut user_t = FeatureTable::new(NodeType::User, c.user_dim);
    let mut regular_pos = 0;
    for (u, id) in users.iter().enumerate() {
        let base = hash_text(&profile(&mut rng, "user", id), c.user_dim, feature_seed);
        let v = if instigators.contains(&u) {
            with_offset(base, &inst_dir, INSTIGATOR_OFFSET)
        } else {
            let lean = leans_fake[regular_pos];
            regular_pos += 1;
            with_offset(base, &lean_dir, s * sign(lean))
        };
        user_t.insert(id, v)?;
    }
    let mut pub_t = FeatureTable::new(NodeType::Publisher, c.publisher_dim);
    for (p, id) in pubs.iter().enumerate() {
        let base = hash_text(&profile(&mut rng, "publisher", id), c.publisher_dim, feature_seed);
        pub_t.insert(id, with_offset(base, &pub_dir, s * sign(biased.contains(&p))))?;
    }
    let features = bind(&g, vec![news_t, user_t, pub_t])?;

    Ok(SynthData {
        graph: g,
        features,
        published_at,
        instigators: instigators.iter().map(|&u| users[u].clone()).collect(),
        biased_publishers: biased.iter().map(|&p| pubs[p].clone()).collect(),
    })
}
