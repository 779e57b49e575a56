//! Uncertainty propagation through the surrogates and the Monte-Carlo
//! reference on the same inputs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{input_checksum, output_vector, solve_all, OutputLayout, PopfError, UncertaintySpec};
use crate::acopf::OracleConfig;
use crate::case_io::NetworkCase;
use crate::gpr::GpModel;

/// Mean, sample standard deviation and quantiles of one output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub q01: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
    pub q99: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> Result<Summary, PopfError> {
    if values.is_empty() {
        return Err(PopfError::Empty("cannot summarize an empty sample".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let std = if values.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Summary {
        mean,
        std,
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        q01: quantile(&sorted, 0.01),
        q05: quantile(&sorted, 0.05),
        q50: quantile(&sorted, 0.50),
        q95: quantile(&sorted, 0.95),
        q99: quantile(&sorted, 0.99),
    })
}

/// Surrogate predictions over a set of inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct GpSamples {
    pub checksum: String,
    /// Predictive means, `[output][sample]`.
    pub mean: Vec<Vec<f64>>,
    /// Predictive variances, `[output][sample]`.
    pub variance: Vec<Vec<f64>>,
}

impl GpSamples {
    pub fn n_samples(&self) -> usize {
        self.mean.first().map_or(0, Vec::len)
    }

    pub fn summaries(&self) -> Result<Vec<Summary>, PopfError> {
        self.mean.iter().map(|m| summarize(m)).collect()
    }
}

/// Predict every output at every input, outputs in parallel. No OPF is
/// solved and no model is modified.
pub fn propagate(models: &[GpModel], inputs: &[Vec<f64>]) -> Result<GpSamples, PopfError> {
    if inputs.is_empty() {
        return Err(PopfError::Empty("no test inputs".into()));
    }
    let preds = models
        .par_iter()
        .enumerate()
        .map(|(j, m)| {
            m.predict_batch(inputs)
                .map_err(|source| PopfError::Predict { output: j, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GpSamples {
        checksum: input_checksum(inputs),
        mean: preds.iter().map(|p| p.iter().map(|q| q.mean).collect()).collect(),
        variance: preds.iter().map(|p| p.iter().map(|q| q.variance).collect()).collect(),
    })
}

/// Direct OPF solutions at the same inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct McsSamples {
    pub checksum: String,
    /// `[output][sample]`; entries of non-converged samples are NaN.
    pub values: Vec<Vec<f64>>,
    pub converged: Vec<bool>,
}

impl McsSamples {
    pub fn n_converged(&self) -> usize {
        self.converged.iter().filter(|c| **c).count()
    }

    /// Values of output `j` at converged samples.
    pub fn converged_values(&self, j: usize) -> Vec<f64> {
        self.values[j]
            .iter()
            .zip(&self.converged)
            .filter(|(_, c)| **c)
            .map(|(v, _)| *v)
            .collect()
    }
}

pub fn mcs_reference(
    case: &NetworkCase,
    spec: &UncertaintySpec,
    inputs: &[Vec<f64>],
    oracle: &OracleConfig,
) -> Result<McsSamples, PopfError> {
    if inputs.is_empty() {
        return Err(PopfError::Empty("no test inputs".into()));
    }
    let m = OutputLayout::for_case(case).len();
    let sols = solve_all(case, spec, inputs, oracle)?;
    let mut values = vec![Vec::with_capacity(inputs.len()); m];
    let mut converged = Vec::with_capacity(inputs.len());
    for s in &sols {
        let row = if s.converged {
            output_vector(s)
        } else {
            vec![f64::NAN; m]
        };
        for (col, v) in values.iter_mut().zip(row) {
            col.push(v);
        }
        converged.push(s.converged);
    }
    let dropped = converged.iter().filter(|c| !**c).count();
    if dropped > 0 {
        log::warn!(
            "monte-carlo reference: {dropped} of {} samples did not converge",
            inputs.len()
        );
    }
    Ok(McsSamples {
        checksum: input_checksum(inputs),
        values,
        converged,
    })
}
