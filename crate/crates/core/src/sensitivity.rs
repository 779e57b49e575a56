//! Subspace-wise sensitivity `γ = l / σf` of fitted surrogates and its rank
//! relation to the spread of each output.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gpr::GpModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensitivityError {
    #[error("output range of an empty sample is undefined")]
    EmptySample,
    #[error("need at least 3 records, got {0}")]
    TooFewRecords(usize),
    #[error("non-finite value in output {0}")]
    NonFinite(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRecord {
    pub output_name: String,
    /// Standardized length-scale.
    pub l: f64,
    /// Standardized signal scale.
    pub sigma_f: f64,
    pub gamma: f64,
    /// `l / σf` with `σf` in output units.
    pub gamma_output_units: f64,
    /// max − min of the output over the test samples, output units.
    pub delta: f64,
    /// Set when `delta` is zero, i.e. the output never moved.
    pub flagged: bool,
}

/// `l / σf` on the standardized scale.
pub fn gamma(model: &GpModel) -> f64 {
    model.hp.l / model.hp.sigma_f
}

pub fn output_range(samples: &[f64]) -> Result<f64, SensitivityError> {
    let first = *samples.first().ok_or(SensitivityError::EmptySample)?;
    let (lo, hi) = samples
        .iter()
        .fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Ok(hi - lo)
}

pub fn record(name: &str, model: &GpModel, samples: &[f64]) -> Result<SensitivityRecord, SensitivityError> {
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(SensitivityError::NonFinite(name.to_string()));
    }
    let delta = output_range(samples)?;
    Ok(SensitivityRecord {
        output_name: name.to_string(),
        l: model.hp.l,
        sigma_f: model.hp.sigma_f,
        gamma: gamma(model),
        gamma_output_units: model.hp.l / (model.hp.sigma_f * model.y_scale),
        delta,
        flagged: delta == 0.0,
    })
}

/// Ranks starting at 1; tied values share the mean of their ranks.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation of average ranks; 0 when either side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseRelation {
    /// Spearman correlation between `gamma` and `delta`.
    pub spearman: f64,
    /// Same correlation with `gamma_output_units`.
    pub spearman_output_units: f64,
    pub n: usize,
    pub n_flagged: usize,
    /// Records sorted by increasing `gamma`.
    pub records: Vec<SensitivityRecord>,
}

impl InverseRelation {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("output_name,l,sigma_f,gamma,delta,flagged,gamma_output_units\n");
        for r in &self.records {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.output_name, r.l, r.sigma_f, r.gamma, r.delta, r.flagged, r.gamma_output_units
            ));
        }
        s
    }
}

pub fn inverse_relation_report(records: &[SensitivityRecord]) -> Result<InverseRelation, SensitivityError> {
    if records.len() < 3 {
        return Err(SensitivityError::TooFewRecords(records.len()));
    }
    let g: Vec<f64> = records.iter().map(|r| r.gamma).collect();
    let d: Vec<f64> = records.iter().map(|r| r.delta).collect();
    let g_out: Vec<f64> = records.iter().map(|r| r.gamma_output_units).collect();
    let mut sorted = records.to_vec();
    sorted.sort_by(|a, b| {
        a.gamma
            .total_cmp(&b.gamma)
            .then_with(|| a.output_name.cmp(&b.output_name))
    });
    Ok(InverseRelation {
        spearman: spearman(&g, &d),
        spearman_output_units: spearman(&g_out, &d),
        n: records.len(),
        n_flagged: records.iter().filter(|r| r.flagged).count(),
        records: sorted,
    })
}
