//! Prediction from a saved model set, without any OPF solve.

use std::path::Path;

use anyhow::{bail, Result};
use gppopf::acopf::oracle_calls;
use gppopf::popf::{draw, model_digest, propagate, stream_rng, SampleDistribution, Stream};
use serde::{Deserialize, Serialize};

use crate::experiment::{gp_summaries, NamedSummary};
use crate::models;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictOutcome {
    pub experiment: String,
    pub distribution: SampleDistribution,
    pub n_test: usize,
    pub seed: u64,
    pub model_digest: String,
    pub input_checksum: String,
    pub gp_summaries: Vec<NamedSummary>,
}

/// Propagate a distribution through the models in `model_dir`. Unset
/// arguments default to the values the models were run with.
pub fn predict_only(
    model_dir: &Path,
    distribution: Option<SampleDistribution>,
    n_test: Option<usize>,
    seed: Option<u64>,
) -> Result<PredictOutcome> {
    let calls0 = oracle_calls();
    let (manifest, models) = models::load(model_dir)?;
    let distribution = distribution.unwrap_or_else(|| manifest.test_distribution.clone());
    let n_test = n_test.unwrap_or(manifest.n_test);
    let seed = seed.unwrap_or(manifest.seed);
    if n_test == 0 {
        bail!("n_test must be at least 1");
    }
    let inputs = draw(
        &distribution,
        &manifest.spec,
        n_test,
        &mut stream_rng(seed, Stream::Test),
    )?;
    let gp = propagate(&models, &inputs)?;
    let digest = model_digest(&models);
    if digest != manifest.digest {
        bail!("models changed during prediction");
    }
    let calls = oracle_calls() - calls0;
    if calls != 0 {
        bail!("prediction invoked the OPF oracle {calls} times");
    }
    Ok(PredictOutcome {
        experiment: manifest.experiment.clone(),
        distribution,
        n_test,
        seed,
        model_digest: digest,
        input_checksum: gp.checksum.clone(),
        gp_summaries: gp_summaries(&manifest.outputs, &gp)?,
    })
}
