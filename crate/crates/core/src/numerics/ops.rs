//! Affine maps, activations and softmax with their hand-derived backward passes.

use std::fmt;
use std::str::FromStr;

use super::tensor::{matvec, matvec_t_acc, outer_acc, Tensor};
use crate::error::{Error, Result};

/// Default negative slope of the leaky ReLU.
pub const LEAKY_SLOPE: f64 = 0.01;

fn check_affine(w: &Tensor, x: &Tensor, b: Option<&Tensor>) -> Result<(usize, usize)> {
    if w.shape().len() != 2 || x.shape().len() != 1 || w.cols() != x.len() {
        return Err(Error::Dimension(format!(
            "affine weight {:?} vs input {:?}",
            w.shape(),
            x.shape()
        )));
    }
    if let Some(b) = b {
        if b.shape() != [w.rows()] {
            return Err(Error::Dimension(format!(
                "affine weight {:?} vs bias {:?}",
                w.shape(),
                b.shape()
            )));
        }
    }
    Ok((w.rows(), w.cols()))
}

/// `W x (+ b)`.
pub fn affine(w: &Tensor, x: &Tensor, b: Option<&Tensor>) -> Result<Tensor> {
    let (m, n) = check_affine(w, x, b)?;
    let mut y = matvec(w.data(), m, n, x.data());
    if let Some(b) = b {
        for (yi, bi) in y.iter_mut().zip(b.data()) {
            *yi += bi;
        }
    }
    Ok(Tensor::vector(y))
}

/// Gradients of [`affine`] given the upstream gradient `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineGrad {
    pub dw: Tensor,
    pub dx: Tensor,
    pub db: Tensor,
}

pub fn affine_backward(w: &Tensor, x: &Tensor, g: &Tensor) -> Result<AffineGrad> {
    let (m, n) = check_affine(w, x, None)?;
    if g.shape() != [m] {
        return Err(Error::Dimension(format!(
            "affine output {m} vs upstream {:?}",
            g.shape()
        )));
    }
    let mut dw = Tensor::zeros(&[m, n]);
    outer_acc(dw.data_mut(), g.data(), x.data());
    let mut dx = vec![0.0; n];
    matvec_t_acc(w.data(), m, n, g.data(), &mut dx);
    Ok(AffineGrad {
        dw,
        dx: Tensor::vector(dx),
        db: g.clone(),
    })
}

pub(crate) fn softmax_slice(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `dv = y * (g - <y, g>)` for `y = softmax(v)`.
pub(crate) fn softmax_backward_slice(y: &[f64], g: &[f64]) -> Vec<f64> {
    let inner: f64 = y.iter().zip(g).map(|(a, b)| a * b).sum();
    y.iter().zip(g).map(|(yi, gi)| yi * (gi - inner)).collect()
}

/// Numerically stable softmax over raw values.
pub fn softmax_values(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Domain("softmax of an empty vector".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("softmax input contains non-finite values".into()));
    }
    Ok(softmax_slice(v))
}

/// Numerically stable softmax over a vector.
pub fn softmax(v: &Tensor) -> Result<Tensor> {
    softmax_values(v.data()).map(Tensor::vector)
}

/// Backward of [`softmax`] given its output `y` and upstream gradient `g`.
pub fn softmax_backward(y: &Tensor, g: &Tensor) -> Result<Tensor> {
    if y.shape() != g.shape() {
        return Err(Error::Dimension(format!(
            "softmax output {:?} vs upstream {:?}",
            y.shape(),
            g.shape()
        )));
    }
    Ok(Tensor::vector(softmax_backward_slice(y.data(), g.data())))
}

/// Elementwise nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    LeakyRelu { slope: f64 },
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn leaky_relu() -> Self {
        Activation::LeakyRelu { slope: LEAKY_SLOPE }
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu { slope } => {
                if x >= 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative expressed through the input `x` and output `y`.
    #[inline]
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::LeakyRelu { slope } => {
                if x >= 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }

    pub fn forward(self, x: &Tensor) -> Tensor {
        x.map(|v| self.apply(v))
    }

    pub fn backward(self, x: &Tensor, y: &Tensor, g: &Tensor) -> Result<Tensor> {
        if x.shape() != y.shape() || x.shape() != g.shape() {
            return Err(Error::Dimension(format!(
                "activation input {:?}, output {:?}, upstream {:?}",
                x.shape(),
                y.shape(),
                g.shape()
            )));
        }
        let data = x
            .data()
            .iter()
            .zip(y.data())
            .zip(g.data())
            .map(|((&xi, &yi), &gi)| gi * self.derivative(xi, yi))
            .collect();
        Tensor::new(x.shape().to_vec(), data)
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "leaky_relu" | "leakyrelu" => Ok(Activation::leaky_relu()),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::LeakyRelu { .. } => f.write_str("leaky_relu"),
            Activation::Tanh => f.write_str("tanh"),
            Activation::Sigmoid => f.write_str("sigmoid"),
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
