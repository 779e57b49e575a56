//! Probabilistic OPF with GP surrogates: sample the uncertainty box, solve
//! the OPF there, fit one GP per output, push test distributions through the
//! surrogates, and check them against Monte-Carlo solves on the same inputs.

mod compare;
mod propagate;
mod sampling;
mod scenario;
mod training;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::acopf::{apply_input, solve_opf, InputVector, OpfError, OpfSolution, OracleConfig};
use crate::case_io::NetworkCase;
use crate::gpr::{GpError, GpModel};

pub use compare::{
    compare, l1_error, pct_error, CostErrors, Histogram, L1Summary, OutputReport, PopfReport, SampleErrors,
};
pub use propagate::{mcs_reference, propagate, summarize, GpSamples, McsSamples, Summary};
pub use sampling::{draw, BetaScope, SampleDistribution};
pub use scenario::{add_renewables, uncertainty_box, RenewableScenario, UncertaintySpec};
pub use training::{build_training_set, train_surrogates, TrainingSet, MAX_REJECTION};

#[derive(Debug, Error)]
pub enum PopfError {
    #[error("OPF at sample {index}: {source}")]
    Opf {
        index: usize,
        #[source]
        source: OpfError,
    },
    #[error("{rejected} of {n} draws did not converge (limit {limit}); the uncertainty box is too wide")]
    RejectionBudget { rejected: usize, limit: usize, n: usize },
    #[error("fitting output {output}: {source}")]
    Fit {
        output: String,
        #[source]
        source: GpError,
    },
    #[error("predicting output {output}: {source}")]
    Predict {
        output: usize,
        #[source]
        source: GpError,
    },
    #[error("distribution: {0}")]
    Distribution(String),
    #[error("unpaired samples: {0}")]
    Unpaired(String),
    #[error("reference vector has zero L1 norm")]
    ZeroNorm,
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("{0}")]
    Empty(String),
    #[error("io: {0}")]
    Io(String),
}

/// Learned outputs: cost, then `pg` and `qg` of every generator, then `vm`
/// of every bus, in case order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputLayout {
    pub names: Vec<String>,
    pub n_gen: usize,
    pub n_bus: usize,
}

impl OutputLayout {
    pub fn for_case(case: &NetworkCase) -> Self {
        let mut names = vec!["cost".to_string()];
        for prefix in ["pg", "qg"] {
            for (k, g) in case.generators.iter().enumerate() {
                names.push(format!("{prefix}_g{}_b{}", k + 1, g.bus));
            }
        }
        names.extend(case.buses.iter().map(|b| format!("vm_b{}", b.id)));
        OutputLayout {
            names,
            n_gen: case.generators.len(),
            n_bus: case.buses.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn pg(&self) -> std::ops::Range<usize> {
        1..1 + self.n_gen
    }

    pub fn qg(&self) -> std::ops::Range<usize> {
        1 + self.n_gen..1 + 2 * self.n_gen
    }

    pub fn vm(&self) -> std::ops::Range<usize> {
        1 + 2 * self.n_gen..1 + 2 * self.n_gen + self.n_bus
    }
}

pub fn output_vector(sol: &OpfSolution) -> Vec<f64> {
    let mut v = Vec::with_capacity(1 + sol.pg.len() + sol.qg.len() + sol.vm.len());
    v.push(sol.cost);
    v.extend(&sol.pg);
    v.extend(&sol.qg);
    v.extend(&sol.vm);
    v
}

/// Independent random streams derived from one experiment seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Training = 1,
    Test = 2,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// SHA-256 over the IEEE-754 bits of an input matrix, row by row.
pub fn input_checksum(inputs: &[Vec<f64>]) -> String {
    let mut h = Sha256::new();
    h.update((inputs.len() as u64).to_le_bytes());
    for r in inputs {
        h.update((r.len() as u64).to_le_bytes());
        for v in r {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// SHA-256 over the serialized models, in order.
pub fn model_digest(models: &[GpModel]) -> String {
    let mut h = Sha256::new();
    for m in models {
        h.update(m.to_json().as_bytes());
    }
    hex::encode(h.finalize())
}

/// OPF at every input, concurrently; results in input order.
pub(crate) fn solve_all(
    case: &NetworkCase,
    spec: &UncertaintySpec,
    inputs: &[Vec<f64>],
    oracle: &OracleConfig,
) -> Result<Vec<OpfSolution>, PopfError> {
    inputs
        .par_iter()
        .enumerate()
        .map(|(index, x)| {
            let wrap = |source| PopfError::Opf { index, source };
            let iv = InputVector::from_slice(&spec.layout, x).map_err(wrap)?;
            let c = apply_input(case, &iv, &spec.layout).map_err(wrap)?;
            solve_opf(&c, oracle).map_err(wrap)
        })
        .collect()
}
