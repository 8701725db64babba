use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            other => Err(Error::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        })
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam or plain SGD with per-tensor moment state.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    steps: u64,
    moments: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {lr} must be positive")));
        }
        Ok(Self {
            kind,
            lr,
            steps: 0,
            moments: BTreeMap::new(),
        })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update in parameter-name order and zeroes the gradients.
    /// Nothing is updated if any gradient is non-finite.
    pub fn step(&mut self, params: &mut ParamStore) -> Result<()> {
        if let Some((name, _)) = params
            .iter()
            .find(|(_, p)| p.grad.data().iter().any(|g| !g.is_finite()))
        {
            return Err(Error::Training(format!("non-finite gradient in `{name}`")));
        }
        self.steps += 1;
        let t = self.steps as i32;
        let lr = self.lr;
        for (name, p) in params.iter_mut() {
            match self.kind {
                OptimizerKind::Sgd => {
                    for (x, g) in p.value.data_mut().iter_mut().zip(p.grad.data()) {
                        *x -= lr * g;
                    }
                }
                OptimizerKind::Adam => {
                    let n = p.value.len();
                    let (m, v) = self
                        .moments
                        .entry(name.to_string())
                        .or_insert_with(|| (vec![0.0; n], vec![0.0; n]));
                    let c1 = 1.0 - ADAM_BETA1.powi(t);
                    let c2 = 1.0 - ADAM_BETA2.powi(t);
                    let grads = p.grad.data().to_vec();
                    for (i, x) in p.value.data_mut().iter_mut().enumerate() {
                        let g = grads[i];
                        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
                        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
                        *x -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
                    }
                }
            }
            p.grad.fill(0.0);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    fn scalar(value: f64, grad: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("w", Tensor::vector(vec![value])).unwrap();
        s.accumulate("w", &[grad]).unwrap();
        s
    }

    #[test]
    fn sgd_rule() {
        let mut s = scalar(1.0, 2.0);
        Optimizer::new(OptimizerKind::Sgd, 0.1).unwrap().step(&mut s).unwrap();
        assert!((s.get("w").unwrap().data()[0] - 0.8).abs() < 1e-15);
        assert_eq!(s.grad("w").unwrap().data()[0], 0.0);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        for g in [3.0, -0.02] {
            let mut s = scalar(0.5, g);
            Optimizer::new(OptimizerKind::Adam, 1e-3).unwrap().step(&mut s).unwrap();
            let moved = s.get("w").unwrap().data()[0] - 0.5;
            assert!(moved.signum() == -g.signum());
            assert!((moved.abs() - 1e-3).abs() < 1e-8, "{moved}");
        }
    }

    #[test]
    fn zero_gradients_leave_params() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let mut s = scalar(0.7, 0.0);
            let mut opt = Optimizer::new(kind, 0.5).unwrap();
            opt.step(&mut s).unwrap();
            opt.step(&mut s).unwrap();
            assert!((s.get("w").unwrap().data()[0] - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn nan_gradient_names_the_tensor() {
        let mut s = scalar(1.0, f64::NAN);
        s.insert("a", Tensor::vector(vec![2.0])).unwrap();
        match Optimizer::new(OptimizerKind::Adam, 0.1).unwrap().step(&mut s) {
            Err(Error::Training(m)) => assert!(m.contains("`w`")),
            other => panic!("{other:?}"),
        }
        assert_eq!(s.get("a").unwrap().data()[0], 2.0);
        assert!(matches!(Optimizer::new(OptimizerKind::Sgd, 0.0), Err(Error::Config(_))));
    }
}
