//! Surrogate-versus-Monte-Carlo error metrics.

use serde::{Deserialize, Serialize};

use super::{summarize, GpSamples, McsSamples, OutputLayout, PopfError, Summary};

/// `‖ŷ − y‖₁ / ‖ŷ‖₁ · 100`, with `ŷ` the reference.
pub fn l1_error(y_hat: &[f64], y: &[f64]) -> Result<f64, PopfError> {
    if y_hat.len() != y.len() {
        return Err(PopfError::Unpaired(format!(
            "vectors of length {} and {}",
            y_hat.len(),
            y.len()
        )));
    }
    let norm: f64 = y_hat.iter().map(|v| v.abs()).sum();
    if !(norm > 0.0) {
        return Err(PopfError::ZeroNorm);
    }
    let diff: f64 = y_hat.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
    Ok(diff / norm * 100.0)
}

/// `|a − b| / |b| · 100`; zero when both vanish.
pub fn pct_error(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs() * 100.0
    }
}

/// Fixed-width bins over `[0, max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let max = values.iter().cloned().fold(0.0f64, f64::max);
        let width = if max > 0.0 { max / bins as f64 } else { 1.0 };
        let edges = (0..=bins).map(|k| k as f64 * width).collect();
        let mut counts = vec![0; bins];
        for v in values {
            let b = ((v / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Histogram { edges, counts }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("lower,upper,count\n");
        for (k, c) in self.counts.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", self.edges[k], self.edges[k + 1], c));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostErrors {
    pub gp_mean: f64,
    pub gp_std: f64,
    pub mcs_mean: f64,
    pub mcs_std: f64,
    /// Percent error of the mean cost.
    pub mean_error_pct: f64,
    /// Percent error of the cost standard deviation.
    pub std_error_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1Summary {
    pub mean: f64,
    pub median: f64,
    pub max: f64,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputReport {
    pub name: String,
    pub gp: Summary,
    pub mcs: Summary,
    /// Average predictive variance over the samples.
    pub mean_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopfReport {
    pub n_test: usize,
    /// Samples used after dropping non-converged MCS solves.
    pub n_used: usize,
    pub n_dropped: usize,
    pub input_checksum: String,
    pub cost: CostErrors,
    pub l1_pg: L1Summary,
    pub l1_vm: L1Summary,
    pub outputs: Vec<OutputReport>,
}

/// Per-sample errors behind the report, paired with the used samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleErrors {
    /// Indices of the samples kept.
    pub used: Vec<usize>,
    pub l1_pg: Vec<f64>,
    pub l1_vm: Vec<f64>,
}

/// Compare surrogate and Monte-Carlo samples drawn from the same inputs.
pub fn compare(
    outputs: &OutputLayout,
    gp: &GpSamples,
    mcs: &McsSamples,
    bins: usize,
) -> Result<(PopfReport, SampleErrors), PopfError> {
    if gp.checksum != mcs.checksum {
        return Err(PopfError::Unpaired(format!(
            "input checksums differ ({} vs {})",
            gp.checksum, mcs.checksum
        )));
    }
    let m = outputs.len();
    if gp.mean.len() != m || mcs.values.len() != m || gp.n_samples() != mcs.converged.len() {
        return Err(PopfError::Unpaired("sample sets have different shapes".into()));
    }
    let used: Vec<usize> = (0..mcs.converged.len()).filter(|&s| mcs.converged[s]).collect();
    if used.is_empty() {
        return Err(PopfError::Empty("no converged Monte-Carlo samples".into()));
    }
    let pick = |col: &[f64]| used.iter().map(|&s| col[s]).collect::<Vec<f64>>();

    let mut reports = Vec::with_capacity(m);
    for j in 0..m {
        let g = pick(&gp.mean[j]);
        let r = pick(&mcs.values[j]);
        let var = pick(&gp.variance[j]);
        reports.push(OutputReport {
            name: outputs.names[j].clone(),
            gp: summarize(&g)?,
            mcs: summarize(&r)?,
            mean_variance: var.iter().sum::<f64>() / var.len() as f64,
        });
    }
    let c = &reports[0];
    let cost = CostErrors {
        gp_mean: c.gp.mean,
        gp_std: c.gp.std,
        mcs_mean: c.mcs.mean,
        mcs_std: c.mcs.std,
        mean_error_pct: pct_error(c.gp.mean, c.mcs.mean),
        std_error_pct: pct_error(c.gp.std, c.mcs.std),
    };

    let vector_errors = |range: std::ops::Range<usize>| -> Result<Vec<f64>, PopfError> {
        used.iter()
            .map(|&s| {
                let y_hat: Vec<f64> = range.clone().map(|j| mcs.values[j][s]).collect();
                let y: Vec<f64> = range.clone().map(|j| gp.mean[j][s]).collect();
                l1_error(&y_hat, &y)
            })
            .collect()
    };
    let l1_pg = vector_errors(outputs.pg())?;
    let l1_vm = vector_errors(outputs.vm())?;
    let l1_summary = |e: &[f64]| -> Result<L1Summary, PopfError> {
        let s = summarize(e)?;
        Ok(L1Summary {
            mean: s.mean,
            median: s.q50,
            max: s.max,
            histogram: Histogram::new(e, bins),
        })
    };
    let report = PopfReport {
        n_test: mcs.converged.len(),
        n_used: used.len(),
        n_dropped: mcs.converged.len() - used.len(),
        input_checksum: gp.checksum.clone(),
        cost,
        l1_pg: l1_summary(&l1_pg)?,
        l1_vm: l1_summary(&l1_vm)?,
        outputs: reports,
    };
    Ok((report, SampleErrors { used, l1_pg, l1_vm }))
}
