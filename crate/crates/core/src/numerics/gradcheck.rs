//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;

use super::params::ParamStore;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Coordinates checked per tensor; larger tensors are subsampled.
    pub max_coords_per_tensor: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            max_coords_per_tensor: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub coords_checked: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn worst(&self) -> Option<&TensorCheck> {
        self.tensors
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }
}

fn eval(f: &mut impl FnMut(&mut ParamStore) -> Result<f64>, params: &mut ParamStore) -> Result<f64> {
    let v = f(params)?;
    if !v.is_finite() {
        return Err(Error::Evaluation(format!("objective returned {v}")));
    }
    Ok(v)
}

/// Compares the gradient accumulated by `f` against central differences.
///
/// `f` must evaluate the scalar objective at the current parameter values and
/// add its analytic gradient into the store's gradient slots. The returned
/// error per coordinate is `|analytic - numeric| / max(1, |numeric|)`. On
/// return the store holds the original values and the analytic gradient.
pub fn grad_check(
    params: &mut ParamStore,
    eps: f64,
    options: GradCheckOptions,
    mut f: impl FnMut(&mut ParamStore) -> Result<f64>,
) -> Result<GradCheckReport> {
    if !(eps > 0.0 && eps <= 1e-2) {
        return Err(Error::Precondition(format!(
            "finite-difference step {eps} outside (0, 1e-2]"
        )));
    }
    params.zero_grads();
    eval(&mut f, params)?;
    let analytic: Vec<(String, Vec<f64>)> = params
        .iter()
        .map(|(n, p)| (n.to_string(), p.grad.data().to_vec()))
        .collect();

    let mut tensors = Vec::with_capacity(analytic.len());
    for (t_idx, (name, grad)) in analytic.iter().enumerate() {
        let n = grad.len();
        let coords: Vec<usize> = if n <= options.max_coords_per_tensor {
            (0..n).collect()
        } else {
            let mut rng = seed::rng(seed::derive_indexed(options.seed, "gradcheck", t_idx as u64));
            let mut c = sample(&mut rng, n, options.max_coords_per_tensor).into_vec();
            c.sort_unstable();
            c
        };
        let mut worst = 0.0f64;
        for &i in &coords {
            let orig = params.get(name)?.data()[i];
            params.value_mut(name)?.data_mut()[i] = orig + eps;
            let plus = eval(&mut f, params)?;
            params.value_mut(name)?.data_mut()[i] = orig - eps;
            let minus = eval(&mut f, params)?;
            params.value_mut(name)?.data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let rel = (grad[i] - numeric).abs() / numeric.abs().max(1.0);
            worst = worst.max(rel);
        }
        tensors.push(TensorCheck {
            name: name.clone(),
            coords_checked: coords.len(),
            max_rel_error: worst,
        });
    }

    params.zero_grads();
    for (name, grad) in &analytic {
        params.accumulate(name, grad)?;
    }
    let max_rel_error = tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        max_rel_error,
        tensors,
    })
}
