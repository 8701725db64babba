//! Gated recurrent unit cell.
//!
//! ```text
//! z  = sigmoid(W_z x + U_z h + b_z)
//! r  = sigmoid(W_r x + U_r h + b_r)
//! c  = tanh(W_h x + U_h (r * h) + b_h)
//! h' = (1 - z) * h + z * c
//! ```

use rand::Rng;

use super::ops::sigmoid;
use super::tensor::{matvec, matvec_t_acc, outer_acc, Tensor};
use crate::error::{Error, Result};

/// Parameter names in their canonical order.
pub const GRU_PARAM_NAMES: [&str; 9] = [
    "w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h",
];

/// The nine GRU tensors: input weights `w_*` (hidden x input), recurrent
/// weights `u_*` (hidden x hidden) and biases `b_*`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub w_z: Tensor,
    pub u_z: Tensor,
    pub b_z: Tensor,
    pub w_r: Tensor,
    pub u_r: Tensor,
    pub b_r: Tensor,
    pub w_h: Tensor,
    pub u_h: Tensor,
    pub b_h: Tensor,
}

impl GruParams {
    pub fn zeros(d_in: usize, d_hidden: usize) -> Self {
        let w = || Tensor::zeros(&[d_hidden, d_in]);
        let u = || Tensor::zeros(&[d_hidden, d_hidden]);
        let b = || Tensor::zeros(&[d_hidden]);
        Self {
            w_z: w(),
            u_z: u(),
            b_z: b(),
            w_r: w(),
            u_r: u(),
            b_r: b(),
            w_h: w(),
            u_h: u(),
            b_h: b(),
        }
    }

    /// Uniform random weights in `[-scale, scale]`, biases included.
    pub fn random(d_in: usize, d_hidden: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(d_in, d_hidden);
        for t in p.tensors_mut() {
            t.data_mut()
                .iter_mut()
                .for_each(|v| *v = rng.random_range(-scale..=scale));
        }
        p
    }

    pub fn d_in(&self) -> usize {
        self.w_z.cols()
    }

    pub fn d_hidden(&self) -> usize {
        self.w_z.rows()
    }

    pub fn tensors(&self) -> [&Tensor; 9] {
        [
            &self.w_z, &self.u_z, &self.b_z, &self.w_r, &self.u_r, &self.b_r, &self.w_h,
            &self.u_h, &self.b_h,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 9] {
        [
            &mut self.w_z,
            &mut self.u_z,
            &mut self.b_z,
            &mut self.w_r,
            &mut self.u_r,
            &mut self.b_r,
            &mut self.w_h,
            &mut self.u_h,
            &mut self.b_h,
        ]
    }

    pub fn from_tensors(t: [Tensor; 9]) -> Result<Self> {
        let [w_z, u_z, b_z, w_r, u_r, b_r, w_h, u_h, b_h] = t;
        let p = Self {
            w_z,
            u_z,
            b_z,
            w_r,
            u_r,
            b_r,
            w_h,
            u_h,
            b_h,
        };
        p.validate()?;
        Ok(p)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let (h, i) = (self.w_z.rows(), self.w_z.cols());
        let ok = [&self.w_z, &self.w_r, &self.w_h]
            .iter()
            .all(|t| t.shape() == [h, i])
            && [&self.u_z, &self.u_r, &self.u_h]
                .iter()
                .all(|t| t.shape() == [h, h])
            && [&self.b_z, &self.b_r, &self.b_h]
                .iter()
                .all(|t| t.shape() == [h]);
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "inconsistent GRU parameter shapes for hidden {h}, input {i}"
            )))
        }
    }

    pub(crate) fn view(&self) -> GruView<'_> {
        GruView {
            d_in: self.d_in(),
            d_h: self.d_hidden(),
            w: [self.w_z.data(), self.w_r.data(), self.w_h.data()],
            u: [self.u_z.data(), self.u_r.data(), self.u_h.data()],
            b: [self.b_z.data(), self.b_r.data(), self.b_h.data()],
        }
    }
}

/// Borrowed GRU weights; index 0 = update gate, 1 = reset gate, 2 = candidate.
#[derive(Clone, Copy)]
pub(crate) struct GruView<'a> {
    pub d_in: usize,
    pub d_h: usize,
    pub w: [&'a [f64]; 3],
    pub u: [&'a [f64]; 3],
    pub b: [&'a [f64]; 3],
}

/// Gradient buffers laid out like [`GruView`].
#[derive(Debug, Clone)]
pub(crate) struct GruGradBuf {
    pub w: [Vec<f64>; 3],
    pub u: [Vec<f64>; 3],
    pub b: [Vec<f64>; 3],
}

impl GruGradBuf {
    pub fn zeros(d_in: usize, d_h: usize) -> Self {
        let w = || vec![0.0; d_h * d_in];
        let u = || vec![0.0; d_h * d_h];
        let b = || vec![0.0; d_h];
        Self {
            w: [w(), w(), w()],
            u: [u(), u(), u()],
            b: [b(), b(), b()],
        }
    }

    /// Buffers in [`GRU_PARAM_NAMES`] order.
    pub fn into_ordered(self) -> [Vec<f64>; 9] {
        let [wz, wr, wh] = self.w;
        let [uz, ur, uh] = self.u;
        let [bz, br, bh] = self.b;
        [wz, uz, bz, wr, ur, br, wh, uh, bh]
    }
}

/// Intermediate values of one step needed for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct GruStepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    rh: Vec<f64>,
    c: Vec<f64>,
}

pub(crate) fn gru_step(p: GruView<'_>, x: &[f64], h_prev: &[f64]) -> (Vec<f64>, GruStepCache) {
    let (di, dh) = (p.d_in, p.d_h);
    let gate = |k: usize, hin: &[f64]| -> Vec<f64> {
        let a = matvec(p.w[k], dh, di, x);
        let b = matvec(p.u[k], dh, dh, hin);
        a.iter()
            .zip(&b)
            .zip(p.b[k])
            .map(|((a, b), c)| a + b + c)
            .collect()
    };
    let z: Vec<f64> = gate(0, h_prev).into_iter().map(sigmoid).collect();
    let r: Vec<f64> = gate(1, h_prev).into_iter().map(sigmoid).collect();
    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
    let c: Vec<f64> = gate(2, &rh).into_iter().map(f64::tanh).collect();
    let h: Vec<f64> = (0..dh)
        .map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * c[i])
        .collect();
    let cache = GruStepCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        z,
        r,
        rh,
        c,
    };
    (h, cache)
}

/// Accumulates parameter gradients into `grads`; returns `(dx, dh_prev)`.
pub(crate) fn gru_step_backward(
    p: GruView<'_>,
    cache: &GruStepCache,
    dh: &[f64],
    grads: &mut GruGradBuf,
) -> (Vec<f64>, Vec<f64>) {
    let (di, dhn) = (p.d_in, p.d_h);
    let GruStepCache {
        x,
        h_prev,
        z,
        r,
        rh,
        c,
    } = cache;
    let mut dx = vec![0.0; di];
    let mut dh_prev: Vec<f64> = (0..dhn).map(|i| dh[i] * (1.0 - z[i])).collect();

    // candidate
    let dc_pre: Vec<f64> = (0..dhn)
        .map(|i| dh[i] * z[i] * (1.0 - c[i] * c[i]))
        .collect();
    outer_acc(&mut grads.w[2], &dc_pre, x);
    outer_acc(&mut grads.u[2], &dc_pre, rh);
    grads.b[2].iter_mut().zip(&dc_pre).for_each(|(b, g)| *b += g);
    matvec_t_acc(p.w[2], dhn, di, &dc_pre, &mut dx);
    let mut drh = vec![0.0; dhn];
    matvec_t_acc(p.u[2], dhn, dhn, &dc_pre, &mut drh);

    // gates
    let dz_pre: Vec<f64> = (0..dhn)
        .map(|i| dh[i] * (c[i] - h_prev[i]) * z[i] * (1.0 - z[i]))
        .collect();
    let dr_pre: Vec<f64> = (0..dhn)
        .map(|i| drh[i] * h_prev[i] * r[i] * (1.0 - r[i]))
        .collect();
    for i in 0..dhn {
        dh_prev[i] += drh[i] * r[i];
    }
    for (k, d) in [(0usize, &dz_pre), (1, &dr_pre)] {
        outer_acc(&mut grads.w[k], d, x);
        outer_acc(&mut grads.u[k], d, h_prev);
        grads.b[k].iter_mut().zip(d.iter()).for_each(|(b, g)| *b += g);
        matvec_t_acc(p.w[k], dhn, di, d, &mut dx);
        matvec_t_acc(p.u[k], dhn, dhn, d, &mut dh_prev);
    }
    (dx, dh_prev)
}

fn check_step(params: &GruParams, x: &Tensor, h_prev: &Tensor) -> Result<()> {
    params.validate()?;
    if x.shape() != [params.d_in()] || h_prev.shape() != [params.d_hidden()] {
        return Err(Error::Dimension(format!(
            "GRU expects input [{}] and state [{}], got {:?} and {:?}",
            params.d_in(),
            params.d_hidden(),
            x.shape(),
            h_prev.shape()
        )));
    }
    Ok(())
}

/// One GRU step.
pub fn gru_cell(x: &Tensor, h_prev: &Tensor, params: &GruParams) -> Result<Tensor> {
    check_step(params, x, h_prev)?;
    let (h, _) = gru_step(params.view(), x.data(), h_prev.data());
    Ok(Tensor::vector(h))
}

/// Final hidden state after running the cell over `xs` from `h0`.
pub fn gru_sequence(xs: &[Tensor], h0: &Tensor, params: &GruParams) -> Result<Tensor> {
    let mut h = h0.clone();
    for x in xs {
        h = gru_cell(x, &h, params)?;
    }
    Ok(h)
}

/// Gradients of a GRU unrolled over a sequence.
#[derive(Debug, Clone)]
pub struct GruSequenceGrad {
    pub params: GruParams,
    pub dxs: Vec<Tensor>,
    pub dh0: Tensor,
}

/// Backpropagates `dh_last` through the unrolled sequence.
pub fn gru_sequence_backward(
    xs: &[Tensor],
    h0: &Tensor,
    params: &GruParams,
    dh_last: &Tensor,
) -> Result<GruSequenceGrad> {
    if dh_last.shape() != [params.d_hidden()] {
        return Err(Error::Dimension(format!(
            "GRU upstream {:?} vs hidden {}",
            dh_last.shape(),
            params.d_hidden()
        )));
    }
    let view = params.view();
    let mut caches = Vec::with_capacity(xs.len());
    let mut h = h0.data().to_vec();
    for x in xs {
        check_step(params, x, h0)?;
        let (next, cache) = gru_step(view, x.data(), &h);
        caches.push(cache);
        h = next;
    }
    let mut grads = GruGradBuf::zeros(params.d_in(), params.d_hidden());
    let mut dh = dh_last.data().to_vec();
    let mut dxs = vec![Tensor::zeros(&[params.d_in()]); xs.len()];
    for (t, cache) in caches.iter().enumerate().rev() {
        let (dx, dh_prev) = gru_step_backward(view, cache, &dh, &mut grads);
        dxs[t] = Tensor::vector(dx);
        dh = dh_prev;
    }
    let shapes: Vec<Vec<usize>> = params.tensors().iter().map(|t| t.shape().to_vec()).collect();
    let ordered = grads.into_ordered();
    let mut tensors = Vec::with_capacity(9);
    for (data, shape) in ordered.into_iter().zip(shapes) {
        tensors.push(Tensor::new(shape, data)?);
    }
    let tensors: [Tensor; 9] = tensors.try_into().expect("nine GRU tensors");
    Ok(GruSequenceGrad {
        params: GruParams::from_tensors(tensors)?,
        dxs,
        dh0: Tensor::vector(dh),
    })
}
