use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::hetgraph::Label;
use crate::numerics::Tensor;
use crate::seed;
use crate::train::Split;

use super::metrics::{compute_metrics, MetricsReport};

pub const PROBE_L2: f64 = 1e-3;
const PROBE_LR: f64 = 0.5;
const PROBE_STEPS: usize = 500;

fn rows_for<'a>(
    ids: &[String],
    embeddings: &'a BTreeMap<String, Tensor>,
    labels: &BTreeMap<String, Label>,
) -> Result<(Vec<&'a [f64]>, Vec<Label>)> {
    let missing: Vec<String> = ids
        .iter()
        .filter(|id| !embeddings.contains_key(*id) || !labels.contains_key(*id))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::coverage(missing));
    }
    Ok((
        ids.iter().map(|id| embeddings[id].data()).collect(),
        ids.iter().map(|id| labels[id]).collect(),
    ))
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// L2-regularised logistic regression on frozen embeddings, trained by
/// full-batch gradient descent on the training news (features standardised
/// with training statistics) and scored on the test news.
pub fn probe_logreg(
    embeddings: &BTreeMap<String, Tensor>,
    labels: &BTreeMap<String, Label>,
    split: &Split,
    seed: u64,
) -> Result<MetricsReport> {
    let (train_x, train_y) = rows_for(&split.train, embeddings, labels)?;
    let (test_x, test_y) = rows_for(&split.test, embeddings, labels)?;
    if !(train_y.contains(&Label::Real) && train_y.contains(&Label::Fake)) {
        return Err(Error::Precondition("probe training set needs both classes".into()));
    }
    if test_x.is_empty() {
        return Err(Error::Precondition("probe test set is empty".into()));
    }
    let d = train_x[0].len();
    if let Some(bad) = train_x.iter().chain(&test_x).find(|x| x.len() != d) {
        return Err(Error::Dimension(format!("embedding of length {} among length {d}", bad.len())));
    }

    let n = train_x.len() as f64;
    let mut mean = vec![0.0; d];
    for x in &train_x {
        mean.iter_mut().zip(*x).for_each(|(m, v)| *m += v / n);
    }
    let mut scale = vec![0.0; d];
    for x in &train_x {
        scale.iter_mut().zip(*x).zip(&mean).for_each(|((s, v), m)| *s += (v - m).powi(2) / n);
    }
    scale.iter_mut().for_each(|s| *s = if *s > 1e-24 { s.sqrt() } else { 1.0 });
    let standardize = |x: &[f64]| -> Vec<f64> {
        x.iter().zip(&mean).zip(&scale).map(|((v, m), s)| (v - m) / s).collect()
    };
    let train: Vec<Vec<f64>> = train_x.iter().map(|x| standardize(x)).collect();
    let target: Vec<f64> = train_y
        .iter()
        .map(|&y| if y == MetricsReport::POSITIVE_CLASS { 1.0 } else { 0.0 })
        .collect();

    let mut rng = seed::rng(seed::derive(seed, "probe"));
    let mut w: Vec<f64> = (0..d).map(|_| rng.random_range(-0.01..0.01)).collect();
    let mut b = 0.0;
    let mut gw = vec![0.0; d];
    for _ in 0..PROBE_STEPS {
        gw.iter_mut().zip(&w).for_each(|(g, wi)| *g = PROBE_L2 * wi);
        let mut gb = 0.0;
        for (x, t) in train.iter().zip(&target) {
            let z = b + x.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            let err = (sigmoid(z) - t) / n;
            gw.iter_mut().zip(x).for_each(|(g, a)| *g += err * a);
            gb += err;
        }
        w.iter_mut().zip(&gw).for_each(|(wi, g)| *wi -= PROBE_LR * g);
        b -= PROBE_LR * gb;
    }
    let scores: Vec<f64> = test_x
        .iter()
        .map(|x| {
            let x = standardize(x);
            sigmoid(b + x.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>())
        })
        .collect();
    compute_metrics(&scores, &test_y, 0.5)
}
