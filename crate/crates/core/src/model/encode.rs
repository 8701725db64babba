//! Meta-path instance encoders.
//!
//! An instance `u -> w -> v` is encoded from the transformed endpoint
//! features `h_u`, `h_w` and the schema's relation vector `r`; the inverse
//! relation is its sign inverse `-r`.

use crate::error::{Error, Result};
use crate::model::config::EncoderKind;
use crate::numerics::{conv2d_backward_raw, conv2d_raw, matvec, matvec_t_acc, outer_acc, ConvShape, Tensor};

/// ConvE weights: `kernels` is `[C x k x k]`, `proj` is `[d x C*H'*W']`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvEParams {
    pub kernels: Tensor,
    pub proj: Tensor,
    pub rows: usize,
    pub slope: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvEView<'a> {
    pub kernels: &'a [f64],
    pub proj: &'a [f64],
    pub shape: ConvShape,
    pub slope: f64,
}

/// Image shape for vectors of length `d` reshaped into `rows` rows.
pub(crate) fn conve_shape(d: usize, rows: usize, channels: usize, kernel: usize) -> Result<ConvShape> {
    if rows == 0 || !d.is_multiple_of(rows) {
        return Err(Error::Config(format!(
            "vector length {d} cannot be reshaped into {rows} rows"
        )));
    }
    let shape = ConvShape {
        h: 4 * rows,
        w: d / rows,
        channels,
        kh: kernel,
        kw: kernel,
    };
    if kernel == 0 || kernel > shape.h || kernel > shape.w {
        return Err(Error::Config(format!(
            "kernel {kernel} does not fit a {}x{} image",
            shape.h, shape.w
        )));
    }
    Ok(shape)
}

#[derive(Debug, Clone)]
pub(crate) enum EncodeCache {
    Plain,
    ConvE { image: Vec<f64>, act: Vec<f64>, pre: Vec<f64> },
}

pub(crate) struct ConvEGrads<'a> {
    pub kernels: &'a mut [f64],
    pub proj: &'a mut [f64],
}

pub(crate) fn encode_raw(
    kind: EncoderKind,
    u: &[f64],
    w: &[f64],
    r: &[f64],
    conve: Option<ConvEView<'_>>,
) -> (Vec<f64>, EncodeCache) {
    match kind {
        EncoderKind::TransE => {
            let out = u
                .iter()
                .zip(w)
                .zip(r)
                .map(|((u, w), r)| (u + (w - r)) * 0.5)
                .collect();
            (out, EncodeCache::Plain)
        }
        EncoderKind::RotatE => {
            let out = u
                .iter()
                .zip(w)
                .zip(r)
                .map(|((u, w), r)| (-(u * r * r) + -(w * r)) * 0.5)
                .collect();
            (out, EncodeCache::Plain)
        }
        EncoderKind::ConvE => {
            let v = conve.expect("ConvE weights");
            let mut image = Vec::with_capacity(4 * u.len());
            image.extend_from_slice(u);
            image.extend_from_slice(r);
            image.extend_from_slice(w);
            image.extend(r.iter().map(|x| -x));
            let pre = conv2d_raw(v.shape, &image, v.kernels);
            let act: Vec<f64> = pre
                .iter()
                .map(|&x| if x > 0.0 { x } else { v.slope * x })
                .collect();
            let out = matvec(v.proj, u.len(), act.len(), &act);
            (out, EncodeCache::ConvE { image, act, pre })
        }
    }
}

/// Accumulates gradients of one encoded instance given upstream `g`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn encode_backward_raw(
    kind: EncoderKind,
    u: &[f64],
    w: &[f64],
    r: &[f64],
    conve: Option<ConvEView<'_>>,
    cache: &EncodeCache,
    g: &[f64],
    du: &mut [f64],
    dw: &mut [f64],
    dr: &mut [f64],
    conve_grads: Option<ConvEGrads<'_>>,
) {
    match kind {
        EncoderKind::TransE => {
            for i in 0..g.len() {
                du[i] += 0.5 * g[i];
                dw[i] += 0.5 * g[i];
                dr[i] -= 0.5 * g[i];
            }
        }
        EncoderKind::RotatE => {
            for i in 0..g.len() {
                du[i] -= 0.5 * g[i] * r[i] * r[i];
                dw[i] -= 0.5 * g[i] * r[i];
                dr[i] -= 0.5 * g[i] * (2.0 * u[i] * r[i] + w[i]);
            }
        }
        EncoderKind::ConvE => {
            let v = conve.expect("ConvE weights");
            let grads = conve_grads.expect("ConvE gradient buffers");
            let EncodeCache::ConvE { image, act, pre } = cache else {
                unreachable!("ConvE encoding without ConvE cache")
            };
            let d = g.len();
            outer_acc(grads.proj, g, act);
            let mut dact = vec![0.0; act.len()];
            matvec_t_acc(v.proj, d, act.len(), g, &mut dact);
            for (da, &p) in dact.iter_mut().zip(pre) {
                if p <= 0.0 {
                    *da *= v.slope;
                }
            }
            let mut dimage = vec![0.0; image.len()];
            conv2d_backward_raw(v.shape, image, v.kernels, &dact, &mut dimage, grads.kernels);
            for i in 0..d {
                du[i] += dimage[i];
                dr[i] += dimage[d + i] - dimage[3 * d + i];
                dw[i] += dimage[2 * d + i];
            }
        }
    }
}

fn check_triplet(h_u: &Tensor, h_w: &Tensor, r: &Tensor) -> Result<()> {
    let d = h_u.len();
    if h_u.shape() != [d] || h_w.shape() != [d] || r.shape() != [d] {
        return Err(Error::Dimension(format!(
            "encoder inputs must be equal-length vectors, got {:?}, {:?}, {:?}",
            h_u.shape(),
            h_w.shape(),
            r.shape()
        )));
    }
    Ok(())
}

/// `MEAN[h_u + r + r^-1, h_w + r^-1]` with `r^-1 = -r`, i.e. `(h_u + (h_w - r)) / 2`.
pub fn encode_transe(h_u: &Tensor, h_w: &Tensor, r: &Tensor) -> Result<Tensor> {
    check_triplet(h_u, h_w, r)?;
    let (out, _) = encode_raw(EncoderKind::TransE, h_u.data(), h_w.data(), r.data(), None);
    Ok(Tensor::vector(out))
}

/// `MEAN[h_u * r * r^-1, h_w * r^-1]` elementwise with `r^-1 = -r`.
pub fn encode_rotate(h_u: &Tensor, h_w: &Tensor, r: &Tensor) -> Result<Tensor> {
    check_triplet(h_u, h_w, r)?;
    let (out, _) = encode_raw(EncoderKind::RotatE, h_u.data(), h_w.data(), r.data(), None);
    Ok(Tensor::vector(out))
}

impl ConvEParams {
    pub(crate) fn view(&self, d: usize) -> Result<ConvEView<'_>> {
        let ks = self.kernels.shape();
        if ks.len() != 3 || ks[1] != ks[2] {
            return Err(Error::Dimension(format!(
                "ConvE kernels must be [C x k x k], got {ks:?}"
            )));
        }
        let shape = conve_shape(d, self.rows, ks[0], ks[1])?;
        if self.proj.shape() != [d, shape.out_len()] {
            return Err(Error::Dimension(format!(
                "ConvE projection must be [{d} x {}], got {:?}",
                shape.out_len(),
                self.proj.shape()
            )));
        }
        Ok(ConvEView {
            kernels: self.kernels.data(),
            proj: self.proj.data(),
            shape,
            slope: self.slope,
        })
    }
}

/// Stacks `h_u`, `r`, `h_w`, `-r` as a `(4 rows) x (d / rows)` image, convolves,
/// applies leaky ReLU and projects back to `d`.
pub fn encode_conve(h_u: &Tensor, h_w: &Tensor, r: &Tensor, params: &ConvEParams) -> Result<Tensor> {
    check_triplet(h_u, h_w, r)?;
    let view = params.view(h_u.len())?;
    let (out, _) = encode_raw(EncoderKind::ConvE, h_u.data(), h_w.data(), r.data(), Some(view));
    Ok(Tensor::vector(out))
}
