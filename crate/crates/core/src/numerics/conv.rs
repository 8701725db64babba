//! Valid, unit-stride 2-D cross-correlation over a single-channel image.

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvShape {
    pub h: usize,
    pub w: usize,
    pub channels: usize,
    pub kh: usize,
    pub kw: usize,
}

impl ConvShape {
    pub fn out_h(&self) -> usize {
        self.h - self.kh + 1
    }

    pub fn out_w(&self) -> usize {
        self.w - self.kw + 1
    }

    pub fn out_len(&self) -> usize {
        self.channels * self.out_h() * self.out_w()
    }
}

fn conv_shape(input: &Tensor, kernels: &Tensor) -> Result<ConvShape> {
    let (is, ks) = (input.shape(), kernels.shape());
    if is.len() != 2 || ks.len() != 3 {
        return Err(Error::Dimension(format!(
            "conv2d expects a 2-D input and 3-D kernels, got {is:?} and {ks:?}"
        )));
    }
    if ks[1] > is[0] || ks[2] > is[1] {
        return Err(Error::Dimension(format!(
            "kernel {ks:?} does not fit input {is:?}"
        )));
    }
    Ok(ConvShape {
        h: is[0],
        w: is[1],
        channels: ks[0],
        kh: ks[1],
        kw: ks[2],
    })
}

pub(crate) fn conv2d_raw(s: ConvShape, input: &[f64], kernels: &[f64]) -> Vec<f64> {
    let (oh, ow) = (s.out_h(), s.out_w());
    let mut out = vec![0.0; s.out_len()];
    for c in 0..s.channels {
        let k = &kernels[c * s.kh * s.kw..(c + 1) * s.kh * s.kw];
        for i in 0..oh {
            for j in 0..ow {
                let mut acc = 0.0;
                for a in 0..s.kh {
                    let row = &input[(i + a) * s.w + j..(i + a) * s.w + j + s.kw];
                    let krow = &k[a * s.kw..(a + 1) * s.kw];
                    acc += row.iter().zip(krow).map(|(x, w)| x * w).sum::<f64>();
                }
                out[(c * oh + i) * ow + j] = acc;
            }
        }
    }
    out
}

/// Accumulates `(d_input, d_kernels)` for upstream gradient `g`.
pub(crate) fn conv2d_backward_raw(
    s: ConvShape,
    input: &[f64],
    kernels: &[f64],
    g: &[f64],
    d_input: &mut [f64],
    d_kernels: &mut [f64],
) {
    let (oh, ow) = (s.out_h(), s.out_w());
    for c in 0..s.channels {
        let kbase = c * s.kh * s.kw;
        for i in 0..oh {
            for j in 0..ow {
                let gij = g[(c * oh + i) * ow + j];
                if gij == 0.0 {
                    continue;
                }
                for a in 0..s.kh {
                    for b in 0..s.kw {
                        let idx = (i + a) * s.w + j + b;
                        d_kernels[kbase + a * s.kw + b] += gij * input[idx];
                        d_input[idx] += gij * kernels[kbase + a * s.kw + b];
                    }
                }
            }
        }
    }
}

/// Per-channel valid cross-correlation: `[H x W] * [C x kh x kw] -> [C x H' x W']`.
pub fn conv2d(input: &Tensor, kernels: &Tensor) -> Result<Tensor> {
    let s = conv_shape(input, kernels)?;
    Tensor::new(
        vec![s.channels, s.out_h(), s.out_w()],
        conv2d_raw(s, input.data(), kernels.data()),
    )
}

/// Returns `(d_input, d_kernels)`.
pub fn conv2d_backward(input: &Tensor, kernels: &Tensor, g: &Tensor) -> Result<(Tensor, Tensor)> {
    let s = conv_shape(input, kernels)?;
    if g.shape() != [s.channels, s.out_h(), s.out_w()] {
        return Err(Error::Dimension(format!(
            "conv2d upstream {:?} vs output [{}, {}, {}]",
            g.shape(),
            s.channels,
            s.out_h(),
            s.out_w()
        )));
    }
    let mut di = Tensor::zeros(input.shape());
    let mut dk = Tensor::zeros(kernels.shape());
    conv2d_backward_raw(
        s,
        input.data(),
        kernels.data(),
        g.data(),
        di.data_mut(),
        dk.data_mut(),
    );
    Ok((di, dk))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ones_kernel_over_ones() {
        let input = Tensor::matrix(3, 3, vec![1.0; 9]).unwrap();
        let k = Tensor::new(vec![1, 2, 2], vec![1.0; 4]).unwrap();
        let out = conv2d(&input, &k).unwrap();
        assert_eq!(out.shape(), &[1, 2, 2]);
        assert_eq!(out.data(), &[4.0; 4]);
    }

    #[test]
    fn delta_kernel_crops() {
        let input = Tensor::matrix(3, 4, (0..12).map(f64::from).collect()).unwrap();
        let k = Tensor::new(vec![1, 2, 2], vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let out = conv2d(&input, &k).unwrap();
        assert_eq!(out.shape(), &[1, 2, 3]);
        assert_eq!(out.data(), &[0.0, 1.0, 2.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn oversized_kernel_rejected() {
        let input = Tensor::matrix(2, 2, vec![0.0; 4]).unwrap();
        let k = Tensor::zeros(&[1, 3, 3]);
        assert!(matches!(conv2d(&input, &k), Err(Error::Dimension(_))));
    }
}
