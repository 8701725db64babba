//! Per-path aggregation of encoded instances.
//!
//! Attention: per head `k`, `e_p = leaky(a_k . h_p)`, `alpha = softmax(e)`,
//! `head_k = tanh(sum_p alpha_p h_p)`; heads are concatenated and projected
//! back to `d` by `W_O`. Temporal: a GRU from the zero state over the
//! chronologically ordered instances, returning the last hidden state.

use crate::error::{Error, Result};
use crate::numerics::{
    gru_step, gru_step_backward, matvec, matvec_t_acc, outer_acc, softmax_backward_slice,
    softmax_slice, GruGradBuf, GruParams, GruStepCache, GruView, Tensor,
};

/// One attention block: `heads` is `[K x d]`, `merge` is `[d x K*d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub heads: Tensor,
    pub merge: Tensor,
    pub slope: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct AttnView<'a> {
    pub heads: &'a [f64],
    pub merge: &'a [f64],
    pub k: usize,
    pub d: usize,
    pub slope: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct AttnCache {
    /// `K x n` pre-activation scores.
    pre: Vec<f64>,
    /// `K x n` attention weights.
    alpha: Vec<f64>,
    /// `K*d` concatenated tanh heads.
    concat: Vec<f64>,
}

impl AttnCache {
    pub fn alpha(&self, head: usize, n: usize) -> &[f64] {
        &self.alpha[head * n..(head + 1) * n]
    }
}

pub(crate) fn attend(v: AttnView<'_>, hs: &[Vec<f64>]) -> (Vec<f64>, AttnCache) {
    let (k, d, n) = (v.k, v.d, hs.len());
    let mut pre = Vec::with_capacity(k * n);
    let mut alpha = Vec::with_capacity(k * n);
    let mut concat = Vec::with_capacity(k * d);
    for head in 0..k {
        let a = &v.heads[head * d..(head + 1) * d];
        let s: Vec<f64> = hs
            .iter()
            .map(|h| a.iter().zip(h).map(|(x, y)| x * y).sum())
            .collect();
        let e: Vec<f64> = s
            .iter()
            .map(|&x| if x > 0.0 { x } else { v.slope * x })
            .collect();
        let al = softmax_slice(&e);
        let mut pooled = vec![0.0; d];
        for (h, &w) in hs.iter().zip(&al) {
            for (p, x) in pooled.iter_mut().zip(h) {
                *p += w * x;
            }
        }
        concat.extend(pooled.into_iter().map(f64::tanh));
        pre.extend(s);
        alpha.extend(al);
    }
    let out = matvec(v.merge, d, k * d, &concat);
    (out, AttnCache { pre, alpha, concat })
}

/// Accumulates parameter gradients and per-instance input gradients.
pub(crate) fn attend_backward(
    v: AttnView<'_>,
    hs: &[Vec<f64>],
    cache: &AttnCache,
    g: &[f64],
    d_heads: &mut [f64],
    d_merge: &mut [f64],
    dhs: &mut [Vec<f64>],
) {
    let (k, d, n) = (v.k, v.d, hs.len());
    outer_acc(d_merge, g, &cache.concat);
    let mut dconcat = vec![0.0; k * d];
    matvec_t_acc(v.merge, d, k * d, g, &mut dconcat);
    for head in 0..k {
        let a = &v.heads[head * d..(head + 1) * d];
        let out = &cache.concat[head * d..(head + 1) * d];
        let ds: Vec<f64> = dconcat[head * d..(head + 1) * d]
            .iter()
            .zip(out)
            .map(|(g, y)| g * (1.0 - y * y))
            .collect();
        let al = cache.alpha(head, n);
        let dal: Vec<f64> = hs
            .iter()
            .map(|h| h.iter().zip(&ds).map(|(x, y)| x * y).sum())
            .collect();
        let de = softmax_backward_slice(al, &dal);
        let da = &mut d_heads[head * d..(head + 1) * d];
        for p in 0..n {
            let s = cache.pre[head * n + p];
            let dpre = if s > 0.0 { de[p] } else { v.slope * de[p] };
            let dh = &mut dhs[p];
            for i in 0..d {
                dh[i] += al[p] * ds[i] + dpre * a[i];
                da[i] += dpre * hs[p][i];
            }
        }
    }
}

pub(crate) fn gru_run(v: GruView<'_>, hs: &[Vec<f64>]) -> (Vec<f64>, Vec<GruStepCache>) {
    let mut h = vec![0.0; v.d_h];
    let mut caches = Vec::with_capacity(hs.len());
    for x in hs {
        let (next, cache) = gru_step(v, x, &h);
        h = next;
        caches.push(cache);
    }
    (h, caches)
}

pub(crate) fn gru_run_backward(
    v: GruView<'_>,
    caches: &[GruStepCache],
    g: &[f64],
    grads: &mut GruGradBuf,
    dhs: &mut [Vec<f64>],
) {
    let mut dh = g.to_vec();
    for (t, cache) in caches.iter().enumerate().rev() {
        let (dx, dprev) = gru_step_backward(v, cache, &dh, grads);
        for (a, b) in dhs[t].iter_mut().zip(&dx) {
            *a += b;
        }
        dh = dprev;
    }
}

impl AttentionParams {
    pub(crate) fn view(&self, d: usize) -> Result<AttnView<'_>> {
        let hs = self.heads.shape();
        if hs.len() != 2 || hs[1] != d {
            return Err(Error::Dimension(format!(
                "attention heads must be [K x {d}], got {hs:?}"
            )));
        }
        let k = hs[0];
        if self.merge.shape() != [d, k * d] {
            return Err(Error::Dimension(format!(
                "attention merge must be [{d} x {}], got {:?}",
                k * d,
                self.merge.shape()
            )));
        }
        Ok(AttnView {
            heads: self.heads.data(),
            merge: self.merge.data(),
            k,
            d,
            slope: self.slope,
        })
    }
}

fn rows_of(encoded: &[Tensor], what: &str) -> Result<(usize, Vec<Vec<f64>>)> {
    let Some(first) = encoded.first() else {
        return Err(Error::Precondition(format!("{what} needs at least one instance")));
    };
    let d = first.len();
    if let Some(bad) = encoded.iter().find(|t| t.shape() != [d]) {
        return Err(Error::Dimension(format!(
            "instance encodings must all be [{d}], found {:?}",
            bad.shape()
        )));
    }
    Ok((d, encoded.iter().map(|t| t.data().to_vec()).collect()))
}

/// Multi-head attention over publisher-path instances.
pub fn aggregate_publisher(encoded: &[Tensor], params: &AttentionParams) -> Result<Tensor> {
    let (d, rows) = rows_of(encoded, "attention")?;
    let (out, _) = attend(params.view(d)?, &rows);
    Ok(Tensor::vector(out))
}

/// The attention aggregator applied to the user path with its own parameters.
pub fn aggregate_user_attention(encoded: &[Tensor], params: &AttentionParams) -> Result<Tensor> {
    aggregate_publisher(encoded, params)
}

/// Attention weights per head (each a probability vector over the instances).
pub fn attention_weights(encoded: &[Tensor], params: &AttentionParams) -> Result<Vec<Vec<f64>>> {
    let (d, rows) = rows_of(encoded, "attention")?;
    let view = params.view(d)?;
    let (_, cache) = attend(view, &rows);
    Ok((0..view.k).map(|h| cache.alpha(h, rows.len()).to_vec()).collect())
}

/// Last GRU hidden state over the (already chronologically sorted) instances.
pub fn aggregate_user_temporal(encoded_sorted: &[Tensor], params: &GruParams) -> Result<Tensor> {
    let (d, rows) = rows_of(encoded_sorted, "temporal aggregation")?;
    params.validate()?;
    if params.d_in() != d {
        return Err(Error::Dimension(format!(
            "GRU input dim {} does not match instance dim {d}",
            params.d_in()
        )));
    }
    let (h, _) = gru_run(params.view(), &rows);
    Ok(Tensor::vector(h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{grad_check, gru_cell, GradCheckOptions, ParamStore};
    use crate::seed;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn random(n: usize, rng: &mut impl Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn attn(k: usize, d: usize, rng: &mut impl Rng) -> AttentionParams {
        AttentionParams {
            heads: Tensor::matrix(k, d, random(k * d, rng)).unwrap(),
            merge: Tensor::matrix(d, k * d, random(k * d * d, rng)).unwrap(),
            slope: 0.01,
        }
    }

    fn instances(n: usize, d: usize, rng: &mut impl Rng) -> Vec<Tensor> {
        (0..n).map(|_| Tensor::vector(random(d, rng))).collect()
    }

    #[test]
    fn singleton_and_duplicates() {
        let mut rng = seed::rng(1);
        let (k, d) = (3, 4);
        let p = attn(k, d, &mut rng);
        let h = instances(1, d, &mut rng);
        let out = aggregate_publisher(&h, &p).unwrap();
        let tanh_h: Vec<f64> = h[0].data().iter().map(|x| x.tanh()).collect();
        let repeated: Vec<f64> = (0..k).flat_map(|_| tanh_h.clone()).collect();
        let expected = matvec(p.merge.data(), d, k * d, &repeated);
        for (a, b) in out.data().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
        let twice = vec![h[0].clone(), h[0].clone()];
        let out2 = aggregate_publisher(&twice, &p).unwrap();
        for (a, b) in out.data().iter().zip(out2.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(matches!(aggregate_publisher(&[], &p), Err(Error::Precondition(_))));
    }

    #[test]
    fn attention_is_permutation_invariant() {
        let mut rng = seed::rng(2);
        let (k, d) = (4, 6);
        let p = attn(k, d, &mut rng);
        let mut h = instances(5, d, &mut rng);
        let base = aggregate_user_attention(&h, &p).unwrap();
        for _ in 0..100 {
            h.shuffle(&mut rng);
            let out = aggregate_user_attention(&h, &p).unwrap();
            let diff = base
                .data()
                .iter()
                .zip(out.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(diff < 1e-9);
        }
        for w in attention_weights(&h, &p).unwrap() {
            assert!(w.iter().all(|&x| x >= 0.0));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn temporal_is_order_sensitive() {
        let mut rng = seed::rng(3);
        let d = 5;
        let gru = GruParams::random(d, d, 0.5, &mut rng);
        let h = instances(5, d, &mut rng);
        let mut rev = h.clone();
        rev.reverse();
        let a = aggregate_user_temporal(&h, &gru).unwrap();
        let b = aggregate_user_temporal(&rev, &gru).unwrap();
        let dist: f64 = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(dist > 1e-8);

        let one = aggregate_user_temporal(&h[..1], &gru).unwrap();
        assert_eq!(one, gru_cell(&h[0], &Tensor::zeros(&[d]), &gru).unwrap());
        let zero = aggregate_user_temporal(&h, &GruParams::zeros(d, d)).unwrap();
        assert!(zero.data().iter().all(|&x| x == 0.0));

        let attn_out = aggregate_user_attention(&h, &attn(2, d, &mut rng)).unwrap();
        assert_ne!(attn_out, a);
    }

    #[test]
    fn attention_gradients() {
        let mut rng = seed::rng(4);
        let (k, d, n) = (3, 5, 4);
        let p = attn(k, d, &mut rng);
        let coef = random(d, &mut rng);
        let mut store = ParamStore::new();
        store.insert("heads", p.heads.clone()).unwrap();
        store.insert("merge", p.merge.clone()).unwrap();
        for i in 0..n {
            store.insert(format!("h{i}"), Tensor::vector(random(d, &mut rng))).unwrap();
        }
        let report = grad_check(&mut store, 1e-5, GradCheckOptions::default(), |s| {
            let heads = s.get("heads")?.data().to_vec();
            let merge = s.get("merge")?.data().to_vec();
            let hs: Vec<Vec<f64>> = (0..n)
                .map(|i| s.get(&format!("h{i}")).unwrap().data().to_vec())
                .collect();
            let view = AttnView {
                heads: &heads,
                merge: &merge,
                k,
                d,
                slope: 0.01,
            };
            let (out, cache) = attend(view, &hs);
            let (mut dh, mut dm) = (vec![0.0; heads.len()], vec![0.0; merge.len()]);
            let mut dhs = vec![vec![0.0; d]; n];
            attend_backward(view, &hs, &cache, &coef, &mut dh, &mut dm, &mut dhs);
            s.accumulate("heads", &dh)?;
            s.accumulate("merge", &dm)?;
            for (i, g) in dhs.iter().enumerate() {
                s.accumulate(&format!("h{i}"), g)?;
            }
            Ok(out.iter().zip(&coef).map(|(a, b)| a * b).sum())
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-5, "{:?}", report.worst());
    }
}
