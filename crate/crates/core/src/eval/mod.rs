//! Detection metrics, an embedding probe, ablation harnesses and
//! embedding export.
//!
//! Real is always the positive class and scores are `P_real`.

mod embed;
mod metrics;
mod probe;

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::hetgraph::Label;
use crate::model::{forward_batch, EncoderKind, GraphContext, ModelConfig, TemporalMode};
use crate::numerics::{ParamStore, Tensor};
use crate::train::{eval_seed, partition_isolated, split_dataset, train_model, EpochRecord, Split, TrainConfig};

pub use embed::{export_embeddings, load_embeddings, read_embeddings, write_embeddings, EmbeddingRecord};
pub use metrics::{
    auc_bruteforce, compute_metrics, mean_interval, save_metrics_csv, write_metrics_csv, Interval,
    MetricsReport, MetricsRow, METRICS_HEADER,
};
pub use probe::{probe_logreg, PROBE_L2};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_RATIOS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

/// Model outputs for a set of news, isolated news left out.
#[derive(Debug, Clone)]
pub struct Scored {
    pub ids: Vec<String>,
    pub labels: Vec<Option<Label>>,
    /// `P_real` per news.
    pub scores: Vec<f64>,
    pub embeddings: Vec<Tensor>,
    pub isolated: Vec<String>,
}

impl Scored {
    pub fn embedding_map(&self) -> BTreeMap<String, Tensor> {
        self.ids.iter().cloned().zip(self.embeddings.iter().cloned()).collect()
    }

    pub fn label_map(&self) -> BTreeMap<String, Label> {
        self.ids
            .iter()
            .zip(&self.labels)
            .filter_map(|(id, l)| l.map(|l| (id.clone(), l)))
            .collect()
    }
}

/// Runs the trained network over `ids` as one batch with the evaluation
/// sampling stream of `seed`.
pub fn score_news(
    ctx: &GraphContext,
    ids: &[String],
    params: &ParamStore,
    config: &ModelConfig,
    seed: u64,
) -> Result<Scored> {
    let (keep, isolated) = partition_isolated(ctx, ids)?;
    if keep.is_empty() {
        return Err(Error::Data(format!("all {} news to score are isolated", ids.len())));
    }
    let out = forward_batch(ctx, &keep, params, config, eval_seed(seed))?;
    Ok(Scored {
        labels: keep.iter().map(|id| ctx.graph().label(id)).collect(),
        scores: out.probs.iter().map(|p| p[0]).collect(),
        embeddings: out.embeddings,
        ids: keep,
        isolated,
    })
}

/// Scores `ids` and computes metrics; every scored news must be labeled.
pub fn evaluate(
    ctx: &GraphContext,
    ids: &[String],
    params: &ParamStore,
    config: &ModelConfig,
    seed: u64,
) -> Result<(MetricsReport, Scored)> {
    let scored = score_news(ctx, ids, params, config, seed)?;
    let labels = scored
        .ids
        .iter()
        .zip(&scored.labels)
        .map(|(id, l)| l.ok_or_else(|| Error::Precondition(format!("news `{id}` has no label"))))
        .collect::<Result<Vec<Label>>>()?;
    let report = compute_metrics(&scored.scores, &labels, DEFAULT_THRESHOLD)?;
    Ok((report, scored))
}

#[derive(Debug, Clone)]
pub struct RunResult {
    /// Test-set metrics of the best-validation parameters.
    pub report: MetricsReport,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub initial_train_loss: f64,
    /// Isolated news dropped from training, validation or test.
    pub excluded: Vec<String>,
    pub params: ParamStore,
}

pub fn train_and_evaluate(
    ctx: &GraphContext,
    split: &Split,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
) -> Result<RunResult> {
    let outcome = train_model(ctx, split, model_config, train_config)?;
    let (report, scored) = evaluate(ctx, &split.test, &outcome.params, model_config, train_config.seed)?;
    let mut excluded = outcome.isolated;
    excluded.extend(scored.isolated);
    excluded.sort();
    Ok(RunResult {
        report,
        history: outcome.history,
        best_epoch: outcome.best_epoch,
        initial_train_loss: outcome.initial_train_loss,
        excluded,
        params: outcome.params,
    })
}

/// Paired runs differing only in the user-path aggregator.
#[derive(Debug, Clone)]
pub struct TemporalAblation {
    pub gru: RunResult,
    pub attention: RunResult,
}

pub fn ablate_temporal(
    ctx: &GraphContext,
    split: &Split,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
) -> Result<TemporalAblation> {
    let run = |mode| {
        let config = ModelConfig {
            temporal: mode,
            ..model_config.clone()
        };
        train_and_evaluate(ctx, split, &config, train_config)
    };
    Ok(TemporalAblation {
        gru: run(TemporalMode::Gru)?,
        attention: run(TemporalMode::Attention)?,
    })
}

/// One run per instance encoder, everything else fixed.
pub fn ablate_encoder(
    ctx: &GraphContext,
    split: &Split,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
) -> Result<Vec<(EncoderKind, RunResult)>> {
    EncoderKind::ALL
        .iter()
        .map(|&encoder| {
            let config = ModelConfig {
                encoder,
                ..model_config.clone()
            };
            Ok((encoder, train_and_evaluate(ctx, split, &config, train_config)?))
        })
        .collect()
}

fn opt_value(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

pub fn write_encoder_table(rows: &[(EncoderKind, MetricsReport)], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "encoder,precision,recall,f1,accuracy,auc")?;
    for (e, m) in rows {
        writeln!(
            w,
            "{e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            m.precision,
            m.recall,
            m.f1,
            m.accuracy,
            opt_value(m.auc)
        )?;
    }
    w.flush()
}

#[derive(Debug, Clone)]
pub struct RatioResult {
    pub ratio: f64,
    pub split: Split,
    pub run: RunResult,
}

/// Re-splits with each training ratio under the training seed, retrains and
/// evaluates on that split's test news.
pub fn sweep_training_ratio(
    ctx: &GraphContext,
    ratios: &[f64],
    model_config: &ModelConfig,
    train_config: &TrainConfig,
) -> Result<Vec<RatioResult>> {
    if ratios.is_empty() {
        return Err(Error::Precondition("no training ratios given".into()));
    }
    let labeled = ctx.graph().labeled_news();
    let mut out = Vec::with_capacity(ratios.len());
    for &ratio in ratios {
        let split = split_dataset(&labeled, ratio, train_config.seed)?;
        let classes = |ids: &[String]| {
            let l: Vec<Option<Label>> = ids.iter().map(|id| ctx.graph().label(id)).collect();
            (l.contains(&Some(Label::Real)), l.contains(&Some(Label::Fake)))
        };
        if classes(&split.train) != (true, true) || split.val.is_empty() || split.test.is_empty() {
            return Err(Error::Data(format!(
                "training ratio {ratio} gives a degenerate split (train {}, val {}, test {})",
                split.train.len(),
                split.val.len(),
                split.test.len()
            )));
        }
        let config = TrainConfig {
            train_frac: ratio,
            ..train_config.clone()
        };
        let run = train_and_evaluate(ctx, &split, model_config, &config)?;
        out.push(RatioResult { ratio, split, run });
    }
    Ok(out)
}

pub fn write_sweep_csv(rows: &[(f64, Option<f64>)], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "ratio,auc")?;
    for (ratio, auc) in rows {
        writeln!(w, "{ratio},{}", opt_value(*auc))?;
    }
    w.flush()
}
