//! Learning-set construction and per-output surrogate fits.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{draw, output_vector, solve_all, OutputLayout, PopfError, SampleDistribution, UncertaintySpec};
use crate::acopf::OracleConfig;
use crate::case_io::NetworkCase;
use crate::gpr::{self, FitOptions, GpModel};

/// Largest fraction of non-converged draws tolerated while building a set.
pub const MAX_REJECTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    /// Inputs, one row per sample.
    pub x: Vec<Vec<f64>>,
    /// Outputs, one row per sample, in `outputs.names` order.
    pub y: Vec<Vec<f64>>,
    pub outputs: OutputLayout,
    /// Draws discarded because the OPF did not converge.
    pub rejected: usize,
}

impl TrainingSet {
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.y.iter().map(|r| r[j]).collect()
    }
}

/// Solve the OPF at `n` draws from `dist`. Draws whose OPF does not converge
/// are replaced by fresh independent uniform draws until the set is full;
/// more than `MAX_REJECTION · n` rejections is an error.
pub fn build_training_set(
    case: &NetworkCase,
    spec: &UncertaintySpec,
    n: usize,
    dist: &SampleDistribution,
    oracle: &OracleConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TrainingSet, PopfError> {
    if n == 0 {
        return Err(PopfError::Empty("training set size must be positive".into()));
    }
    let limit = (MAX_REJECTION * n as f64).floor() as usize;
    let mut x = draw(dist, spec, n, rng)?;
    let mut y: Vec<Option<Vec<f64>>> = vec![None; n];
    let mut pending: Vec<usize> = (0..n).collect();
    let mut rejected = 0;
    while !pending.is_empty() {
        let batch: Vec<Vec<f64>> = pending.iter().map(|&i| x[i].clone()).collect();
        let sols = solve_all(case, spec, &batch, oracle)?;
        let mut failed = Vec::new();
        for (&i, sol) in pending.iter().zip(sols) {
            if sol.converged {
                y[i] = Some(output_vector(&sol));
            } else {
                failed.push(i);
            }
        }
        rejected += failed.len();
        if rejected > limit {
            return Err(PopfError::RejectionBudget { rejected, limit, n });
        }
        let fresh = draw(&SampleDistribution::UniformBox, spec, failed.len(), rng)?;
        for (&i, row) in failed.iter().zip(fresh) {
            x[i] = row;
        }
        pending = failed;
    }
    if rejected > 0 {
        log::info!("training set: {rejected} non-converged draws replaced");
    }
    Ok(TrainingSet {
        x,
        y: y.into_iter().map(|r| r.expect("filled")).collect(),
        outputs: OutputLayout::for_case(case),
        rejected,
    })
}

/// Seed of the fit for output `j`, decorrelated from neighbouring outputs.
fn fit_seed(seed: u64, j: usize) -> u64 {
    let mut z = seed ^ (j as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One independent GP per output column, fitted concurrently, returned in
/// output order.
pub fn train_surrogates(ts: &TrainingSet, opts: &FitOptions) -> Result<Vec<GpModel>, PopfError> {
    (0..ts.outputs.len())
        .into_par_iter()
        .map(|j| {
            let o = FitOptions {
                seed: fit_seed(opts.seed, j),
                ..*opts
            };
            gpr::fit(&ts.x, &ts.column(j), &o).map_err(|source| PopfError::Fit {
                output: ts.outputs.names[j].clone(),
                source,
            })
        })
        .collect()
}
