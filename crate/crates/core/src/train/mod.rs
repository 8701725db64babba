//! Splitting, loss, optimization and the epoch loop.

mod optim;
mod split;

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::hetgraph::Label;
use crate::model::{backward, forward_batch, init_params, GraphContext, ModelConfig};
use crate::numerics::{ParamStore, Tensor};
use crate::seed;

pub use optim::{Optimizer, OptimizerKind, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use split::{split_dataset, Split};

/// Probabilities are clamped to this before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub train_frac: f64,
    pub patience: usize,
    pub max_epochs: usize,
    /// News per minibatch; 0 trains full-batch.
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            train_frac: 0.7,
            patience: 20,
            max_epochs: 300,
            batch_size: 32,
            seed: 42,
            optimizer: OptimizerKind::Adam,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return Err(Error::Config(format!("train_frac {} outside (0, 1)", self.train_frac)));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        vec![
            ("lr".into(), self.lr.to_string()),
            ("train_frac".into(), self.train_frac.to_string()),
            ("patience".into(), self.patience.to_string()),
            ("max_epochs".into(), self.max_epochs.to_string()),
            ("batch_size".into(), self.batch_size.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("optimizer".into(), self.optimizer.to_string()),
        ]
    }

    /// Applies one key; returns `Ok(false)` when the key is not a training key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("invalid value `{v}` for {key}")))
        }
        match key {
            "lr" => self.lr = num(key, value)?,
            "train_frac" => self.train_frac = num(key, value)?,
            "patience" => self.patience = num(key, value)?,
            "max_epochs" => self.max_epochs = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "optimizer" => self.optimizer = value.parse()?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

fn check_probs(probs: &[f64]) -> Result<()> {
    let ok = probs.len() == 2
        && probs.iter().all(|p| p.is_finite() && *p >= 0.0)
        && (probs[0] + probs[1] - 1.0).abs() < 1e-9;
    if ok {
        Ok(())
    } else {
        Err(Error::Domain(format!("{probs:?} is not a probability pair")))
    }
}

/// `-[y ln P_fake + (1 - y) ln P_real]` for `probs = [P_real, P_fake]`.
pub fn cross_entropy(probs: &Tensor, y: Label) -> Result<f64> {
    check_probs(probs.data())?;
    Ok(-probs.data()[y.code() as usize].max(PROB_FLOOR).ln())
}

/// Gradient of [`cross_entropy`] with respect to the logits: `probs - onehot(y)`.
pub fn cross_entropy_logit_grad(probs: &Tensor, y: Label) -> Result<[f64; 2]> {
    check_probs(probs.data())?;
    let mut g = [probs.data()[0], probs.data()[1]];
    g[y.code() as usize] -= 1.0;
    Ok(g)
}

/// Seed for sampling instances at evaluation time.
pub fn eval_seed(seed: u64) -> u64 {
    seed::derive(seed, "eval-sample")
}

/// Tracks the best validation loss; stops after `patience` epochs without
/// improvement.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: None,
            stale: 0,
        }
    }

    /// Records an epoch; returns true when it is the new best.
    pub fn update(&mut self, epoch: usize, val_loss: f64) -> bool {
        match self.best {
            Some((_, b)) if val_loss >= b => {
                self.stale += 1;
                false
            }
            _ => {
                self.best = Some((epoch, val_loss));
                self.stale = 0;
                true
            }
        }
    }

    pub fn should_stop(&self) -> bool {
        self.stale >= self.patience
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the best validation epoch.
    pub params: ParamStore,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    /// Mean training loss of the untrained model.
    pub initial_train_loss: f64,
    /// News left out because neither meta-path reaches them.
    pub isolated: Vec<String>,
}

/// Labels of `ids`, failing on unlabeled news.
pub fn labels_of(ctx: &GraphContext, ids: &[String]) -> Result<Vec<Label>> {
    ids.iter()
        .map(|id| {
            ctx.graph()
                .label(id)
                .ok_or_else(|| Error::Precondition(format!("news `{id}` has no label")))
        })
        .collect()
}

/// Splits `ids` into reachable and isolated news.
pub fn partition_isolated(ctx: &GraphContext, ids: &[String]) -> Result<(Vec<String>, Vec<String>)> {
    let mut keep = Vec::with_capacity(ids.len());
    let mut isolated = Vec::new();
    for id in ids {
        if ctx.is_isolated(id)? {
            isolated.push(id.clone());
        } else {
            keep.push(id.clone());
        }
    }
    Ok((keep, isolated))
}

/// Mean cross-entropy of `ids` evaluated as one batch.
pub fn mean_loss(
    ctx: &GraphContext,
    ids: &[String],
    params: &ParamStore,
    config: &ModelConfig,
    sample_seed: u64,
) -> Result<f64> {
    let labels = labels_of(ctx, ids)?;
    let out = forward_batch(ctx, ids, params, config, sample_seed)?;
    let mut total = 0.0;
    for (p, y) in out.probs.iter().zip(labels) {
        total += cross_entropy(&Tensor::vector(p.to_vec()), y)?;
    }
    Ok(total / ids.len() as f64)
}

/// One optimizer step on a minibatch; returns the batch mean loss.
fn train_batch(
    ctx: &GraphContext,
    batch: &[String],
    labels: &[Label],
    params: &mut ParamStore,
    config: &ModelConfig,
    opt: &mut Optimizer,
    sample_seed: u64,
) -> Result<f64> {
    let out = forward_batch(ctx, batch, params, config, sample_seed)?;
    let b = batch.len() as f64;
    let mut loss = 0.0;
    let mut dlogits = Vec::with_capacity(batch.len());
    for (p, &y) in out.probs.iter().zip(labels) {
        let probs = Tensor::vector(p.to_vec());
        loss += cross_entropy(&probs, y)?;
        let g = cross_entropy_logit_grad(&probs, y)?;
        dlogits.push([g[0] / b, g[1] / b]);
    }
    let loss = loss / b;
    if !loss.is_finite() {
        return Err(Error::Training(format!("batch loss became {loss}")));
    }
    backward(&out, &dlogits, params)?;
    opt.step(params)?;
    Ok(loss)
}

/// Trains from fresh parameters and returns the best-validation checkpoint.
pub fn train_model(
    ctx: &GraphContext,
    split: &Split,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
) -> Result<TrainOutcome> {
    model_config.validate()?;
    train_config.validate()?;
    if split.train.is_empty() || split.val.is_empty() {
        return Err(Error::Precondition("train and validation sets must be nonempty".into()));
    }
    let (train_ids, mut isolated) = partition_isolated(ctx, &split.train)?;
    if train_ids.is_empty() {
        return Err(Error::Data(format!(
            "all {} training news are isolated (no publisher or user meta-path)",
            split.train.len()
        )));
    }
    let (val_ids, val_isolated) = partition_isolated(ctx, &split.val)?;
    isolated.extend(val_isolated);
    if val_ids.is_empty() {
        return Err(Error::Data("every validation news is isolated".into()));
    }
    let train_labels = labels_of(ctx, &train_ids)?;
    labels_of(ctx, &val_ids)?;

    let root = train_config.seed;
    let mut params = init_params(model_config, &ctx.features().dims(), root)?;
    let mut opt = Optimizer::new(train_config.optimizer, train_config.lr)?;
    let eval = eval_seed(root);
    let initial_train_loss = mean_loss(ctx, &train_ids, &params, model_config, eval)?;

    let batch_size = match train_config.batch_size {
        0 => train_ids.len(),
        b => b,
    };
    let mut order: Vec<usize> = (0..train_ids.len()).collect();
    let mut stopper = EarlyStopping::new(train_config.patience);
    let mut best = params.clone();
    let mut history = Vec::new();
    for epoch in 1..=train_config.max_epochs {
        let mut rng = seed::rng(seed::derive_indexed(root, "shuffle", epoch as u64));
        order.shuffle(&mut rng);
        let sample_seed = seed::derive_indexed(root, "sample", epoch as u64);
        let mut total = 0.0;
        for chunk in order.chunks(batch_size) {
            let batch: Vec<String> = chunk.iter().map(|&i| train_ids[i].clone()).collect();
            let labels: Vec<Label> = chunk.iter().map(|&i| train_labels[i]).collect();
            let loss = train_batch(ctx, &batch, &labels, &mut params, model_config, &mut opt, sample_seed)?;
            total += loss * chunk.len() as f64;
        }
        let train_loss = total / train_ids.len() as f64;
        let val_loss = mean_loss(ctx, &val_ids, &params, model_config, eval)?;
        if !val_loss.is_finite() {
            return Err(Error::Training(format!("validation loss became {val_loss} at epoch {epoch}")));
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        if stopper.update(epoch, val_loss) {
            best = params.clone();
        }
        if stopper.should_stop() {
            break;
        }
    }
    let best_epoch = stopper.best().map_or(0, |(e, _)| e);
    best.zero_grads();
    Ok(TrainOutcome {
        params: best,
        history,
        best_epoch,
        initial_train_loss,
        isolated,
    })
}

pub fn write_history(history: &[EpochRecord], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "epoch,train_loss,val_loss")?;
    for r in history {
        writeln!(w, "{},{:.16e},{:.16e}", r.epoch, r.train_loss, r.val_loss)?;
    }
    w.flush()
}

pub fn save_history(history: &[EpochRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_history(history, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurize::bind;
    use crate::fixtures::{toy_feature_tables_with_dims, toy_graph};
    use crate::numerics::softmax_values;

    #[test]
    fn cross_entropy_examples() {
        let p = Tensor::vector(vec![0.0, 1.0]);
        assert_eq!(cross_entropy(&p, Label::Fake).unwrap(), 0.0);
        let half = Tensor::vector(vec![0.5, 0.5]);
        assert!((cross_entropy(&half, Label::Real).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((cross_entropy(&p, Label::Real).unwrap() + PROB_FLOOR.ln()).abs() < 1e-12);
        assert!(matches!(
            cross_entropy(&Tensor::vector(vec![0.7, 0.7]), Label::Real),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn logit_gradient_matches_finite_differences() {
        let z = [0.3, -1.1];
        for y in [Label::Real, Label::Fake] {
            let probs = Tensor::vector(softmax_values(&z).unwrap());
            let g = cross_entropy_logit_grad(&probs, y).unwrap();
            for k in 0..2 {
                let eps = 1e-6;
                let at = |delta: f64| {
                    let mut zz = z;
                    zz[k] += delta;
                    cross_entropy(&Tensor::vector(softmax_values(&zz).unwrap()), y).unwrap()
                };
                let num = (at(eps) - at(-eps)) / (2.0 * eps);
                assert!((g[k] - num).abs() / num.abs().max(1.0) < 1e-8, "{k}: {} vs {num}", g[k]);
            }
        }
    }

    #[test]
    fn early_stopping_logic() {
        let mut s = EarlyStopping::new(1);
        assert!(s.update(1, 0.5));
        assert!(!s.should_stop());
        assert!(!s.update(2, 0.6));
        assert!(s.should_stop());
        assert_eq!(s.best(), Some((1, 0.5)));

        let mut s = EarlyStopping::new(3);
        for (e, l) in [(1, 1.0), (2, 0.9), (3, 0.95), (4, 0.91), (5, 0.85)] {
            s.update(e, l);
        }
        assert_eq!(s.best(), Some((5, 0.85)));
        assert!(!s.should_stop());
    }

    #[test]
    fn config_validation_and_keys() {
        TrainConfig::default().validate().unwrap();
        let bad = TrainConfig {
            patience: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let mut c = TrainConfig::default();
        for (k, v) in [("lr", "0.01"), ("optimizer", "sgd"), ("batch_size", "0")] {
            assert!(c.set(k, v).unwrap());
        }
        assert_eq!(c.optimizer, OptimizerKind::Sgd);
        let mut back = TrainConfig::default();
        for (k, v) in c.to_pairs() {
            back.set(&k, &v).unwrap();
        }
        assert_eq!(back, c);
    }

    fn toy_context() -> GraphContext {
        let g = toy_graph();
        let bundle = bind(&g, toy_feature_tables_with_dims(&g, 10, 9, 8)).unwrap();
        GraphContext::new(g, bundle).unwrap()
    }

    fn tiny_model() -> ModelConfig {
        ModelConfig {
            d_hidden: 8,
            heads: 2,
            d_semantic: 4,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn toy_training_is_deterministic_and_keeps_best() {
        let ctx = toy_context();
        let split = Split {
            train: vec!["news1".into(), "news2".into(), "news3".into()],
            val: vec!["news4".into(), "news2".into()],
            test: vec![],
            seed: 0,
        };
        let tc = TrainConfig {
            lr: 0.01,
            max_epochs: 15,
            patience: 4,
            batch_size: 2,
            ..TrainConfig::default()
        };
        let a = train_model(&ctx, &split, &tiny_model(), &tc).unwrap();
        let b = train_model(&ctx, &split, &tiny_model(), &tc).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.params, b.params);
        let best = a.history[a.best_epoch - 1].val_loss;
        assert!(a.history[a.best_epoch - 1..].iter().all(|r| best <= r.val_loss));
        assert!(a.history.iter().all(|r| r.train_loss >= 0.0));
        let reached = mean_loss(&ctx, &split.val, &a.params, &tiny_model(), eval_seed(tc.seed)).unwrap();
        assert_eq!(reached.to_bits(), best.to_bits());

        let mut csv = Vec::new();
        write_history(&a.history, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("epoch,train_loss,val_loss\n1,"));
    }

    #[test]
    fn isolated_training_set_is_a_data_error() {
        let mut g = toy_graph();
        for id in ["news8", "news9"] {
            g.add_node(id, crate::hetgraph::NodeType::News).unwrap();
            g.set_label(id, Label::Fake).unwrap();
        }
        let bundle = bind(&g, toy_feature_tables_with_dims(&g, 10, 9, 8)).unwrap();
        let ctx = GraphContext::new(g, bundle).unwrap();
        let split = Split {
            train: vec!["news8".into(), "news9".into()],
            val: vec!["news1".into()],
            test: vec!["news2".into()],
            seed: 0,
        };
        assert!(matches!(
            train_model(&ctx, &split, &tiny_model(), &TrainConfig::default()),
            Err(Error::Data(_))
        ));
    }
}
