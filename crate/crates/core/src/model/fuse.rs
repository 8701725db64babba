//! Semantic-level fusion of the publisher and user path representations.
//!
//! For each path `P`, `s_P` is the batch mean of `tanh(M h_P + b)`, its
//! importance is `tanh(q . s_P)`, and `beta = softmax` over the two paths is
//! shared by every news in the batch.

use crate::error::{Error, Result};
use crate::numerics::{matvec, matvec_t_acc, outer_acc, softmax_backward_slice, softmax_slice, Tensor};

/// `m` is `[d_m x d]`, `b` and `q` are `[d_m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticParams {
    pub m: Tensor,
    pub b: Tensor,
    pub q: Tensor,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct FuseView<'a> {
    pub m: &'a [f64],
    pub b: &'a [f64],
    pub q: &'a [f64],
    pub dm: usize,
    pub d: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct FuseCache {
    /// `t[path][news]` = tanh(M h + b).
    t: [Vec<Vec<f64>>; 2],
    s: [Vec<f64>; 2],
    e: [f64; 2],
    pub beta: [f64; 2],
}

pub(crate) struct FuseGrads<'a> {
    pub m: &'a mut [f64],
    pub b: &'a mut [f64],
    pub q: &'a mut [f64],
}

/// `paths[0]` holds the publisher-path vectors, `paths[1]` the user-path ones.
pub(crate) fn fuse(v: FuseView<'_>, paths: [&[Vec<f64>]; 2]) -> (Vec<Vec<f64>>, FuseCache) {
    let n = paths[0].len();
    let mut t: [Vec<Vec<f64>>; 2] = [Vec::with_capacity(n), Vec::with_capacity(n)];
    let mut s = [vec![0.0; v.dm], vec![0.0; v.dm]];
    let mut e = [0.0; 2];
    for p in 0..2 {
        for h in paths[p] {
            let mut row = matvec(v.m, v.dm, v.d, h);
            for (x, b) in row.iter_mut().zip(v.b) {
                *x = (*x + b).tanh();
            }
            for (acc, x) in s[p].iter_mut().zip(&row) {
                *acc += x;
            }
            t[p].push(row);
        }
        s[p].iter_mut().for_each(|x| *x /= n as f64);
        e[p] = v.q.iter().zip(&s[p]).map(|(a, b)| a * b).sum::<f64>().tanh();
    }
    let beta_v = softmax_slice(&e);
    let beta = [beta_v[0], beta_v[1]];
    let out = (0..n)
        .map(|i| {
            paths[0][i]
                .iter()
                .zip(&paths[1][i])
                .map(|(a, b)| beta[0] * a + beta[1] * b)
                .collect()
        })
        .collect();
    (out, FuseCache { t, s, e, beta })
}

/// Returns per-news gradients for both path inputs.
pub(crate) fn fuse_backward(
    v: FuseView<'_>,
    paths: [&[Vec<f64>]; 2],
    cache: &FuseCache,
    g: &[Vec<f64>],
    grads: FuseGrads<'_>,
) -> [Vec<Vec<f64>>; 2] {
    let n = g.len();
    let beta = cache.beta;
    let mut dpaths: [Vec<Vec<f64>>; 2] = [0, 1].map(|p| {
        g.iter()
            .map(|gi| gi.iter().map(|x| beta[p] * x).collect())
            .collect()
    });
    let dbeta: Vec<f64> = (0..2)
        .map(|p| {
            (0..n)
                .map(|i| g[i].iter().zip(&paths[p][i]).map(|(a, b)| a * b).sum::<f64>())
                .sum()
        })
        .collect();
    let de = softmax_backward_slice(&beta, &dbeta);
    for p in 0..2 {
        let dqs = de[p] * (1.0 - cache.e[p] * cache.e[p]);
        for (gq, s) in grads.q.iter_mut().zip(&cache.s[p]) {
            *gq += dqs * s;
        }
        let ds: Vec<f64> = v.q.iter().map(|q| dqs * q / n as f64).collect();
        for i in 0..n {
            let t = &cache.t[p][i];
            let dpre: Vec<f64> = ds.iter().zip(t).map(|(g, y)| g * (1.0 - y * y)).collect();
            outer_acc(grads.m, &dpre, &paths[p][i]);
            for (gb, x) in grads.b.iter_mut().zip(&dpre) {
                *gb += x;
            }
            matvec_t_acc(v.m, v.dm, v.d, &dpre, &mut dpaths[p][i]);
        }
    }
    dpaths
}

impl SemanticParams {
    pub(crate) fn view(&self, d: usize) -> Result<FuseView<'_>> {
        let dm = self.b.len();
        if self.m.shape() != [dm, d] || self.q.shape() != [dm] || self.b.shape() != [dm] {
            return Err(Error::Dimension(format!(
                "semantic parameters must be M [{dm} x {d}], b [{dm}], q [{dm}]; got {:?}, {:?}, {:?}",
                self.m.shape(),
                self.b.shape(),
                self.q.shape()
            )));
        }
        Ok(FuseView {
            m: self.m.data(),
            b: self.b.data(),
            q: self.q.data(),
            dm,
            d,
        })
    }
}

/// Fused representations of every news in the batch together with the
/// shared path weights `beta = [beta_S, beta_U]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fused {
    pub outputs: Vec<Tensor>,
    pub beta: [f64; 2],
}

/// Fuses a batch of `(h_S, h_U)` pairs.
pub fn semantic_fuse(batch: &[(Tensor, Tensor)], params: &SemanticParams) -> Result<Fused> {
    let Some((first, _)) = batch.first() else {
        return Err(Error::Precondition("semantic fusion needs a nonempty batch".into()));
    };
    let d = first.len();
    if let Some((a, b)) = batch.iter().find(|(a, b)| a.shape() != [d] || b.shape() != [d]) {
        return Err(Error::Dimension(format!(
            "path representations must be [{d}], got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let view = params.view(d)?;
    let hs: Vec<Vec<f64>> = batch.iter().map(|(a, _)| a.data().to_vec()).collect();
    let hu: Vec<Vec<f64>> = batch.iter().map(|(_, b)| b.data().to_vec()).collect();
    let (out, cache) = fuse(view, [&hs, &hu]);
    Ok(Fused {
        outputs: out.into_iter().map(Tensor::vector).collect(),
        beta: cache.beta,
    })
}
