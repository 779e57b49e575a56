//! Input distributions over the uncertainty box.

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{PopfError, UncertaintySpec};

/// Which coordinates a beta law applies to; the rest stay uniform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BetaScope {
    #[default]
    Renewables,
    Loads,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleDistribution {
    /// Independent uniform draws over the box.
    UniformBox,
    /// Stratified uniform design: each coordinate hits every one of the
    /// `n` equal strata exactly once.
    LatinHypercube,
    /// Normal around the box centre with standard deviation
    /// `std_fraction` × half-width, truncated to the box by rejection.
    TruncatedNormal { std_fraction: f64 },
    /// `lower + (upper − lower)·Beta(alpha, beta)` on the scoped coordinates.
    Beta {
        alpha: f64,
        beta: f64,
        #[serde(default)]
        scope: BetaScope,
    },
    /// Rows of a comma-separated file, resampled with replacement.
    EmpiricalFile { path: PathBuf },
    /// Every draw equals `x`.
    PointMass { x: Vec<f64> },
}

impl SampleDistribution {
    pub fn name(&self) -> &'static str {
        match self {
            SampleDistribution::UniformBox => "uniform_box",
            SampleDistribution::LatinHypercube => "latin_hypercube",
            SampleDistribution::TruncatedNormal { .. } => "truncated_normal",
            SampleDistribution::Beta { .. } => "beta",
            SampleDistribution::EmpiricalFile { .. } => "empirical_file",
            SampleDistribution::PointMass { .. } => "point_mass",
        }
    }
}

fn unsupported(msg: String) -> PopfError {
    PopfError::Distribution(msg)
}

/// Draw `n` inputs from `dist`. Every row lies inside the box.
pub fn draw(
    dist: &SampleDistribution,
    spec: &UncertaintySpec,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>, PopfError> {
    let d = spec.dim();
    let (lo, hi) = (&spec.x_lower, &spec.x_upper);
    let rows = match dist {
        SampleDistribution::UniformBox => (0..n)
            .map(|_| (0..d).map(|k| lo[k] + (hi[k] - lo[k]) * rng.random::<f64>()).collect())
            .collect(),
        SampleDistribution::LatinHypercube => {
            let mut rows = vec![vec![0.0; d]; n];
            let mut strata: Vec<usize> = (0..n).collect();
            for k in 0..d {
                strata.shuffle(rng);
                for (i, row) in rows.iter_mut().enumerate() {
                    let u = (strata[i] as f64 + rng.random::<f64>()) / n as f64;
                    row[k] = lo[k] + (hi[k] - lo[k]) * u;
                }
            }
            rows
        }
        SampleDistribution::TruncatedNormal { std_fraction } => {
            if !(*std_fraction > 0.0) || !std_fraction.is_finite() {
                return Err(unsupported(format!(
                    "truncated_normal std_fraction must be positive, got {std_fraction}"
                )));
            }
            let mut rows = vec![vec![0.0; d]; n];
            for row in rows.iter_mut() {
                for k in 0..d {
                    let c = 0.5 * (lo[k] + hi[k]);
                    let sd = std_fraction * 0.5 * (hi[k] - lo[k]);
                    if sd == 0.0 {
                        row[k] = c;
                        continue;
                    }
                    let normal = Normal::new(c, sd).expect("positive sd");
                    row[k] = loop {
                        let v = normal.sample(rng);
                        if v >= lo[k] && v <= hi[k] {
                            break v;
                        }
                    };
                }
            }
            rows
        }
        SampleDistribution::Beta { alpha, beta, scope } => {
            let law = Beta::new(*alpha, *beta).map_err(|e| unsupported(format!("beta({alpha}, {beta}): {e}")))?;
            let scoped = |k: usize| match scope {
                BetaScope::Renewables => spec.is_renewable_coord(k),
                BetaScope::Loads => !spec.is_renewable_coord(k),
                BetaScope::All => true,
            };
            (0..n)
                .map(|_| {
                    (0..d)
                        .map(|k| {
                            let u = if scoped(k) {
                                law.sample(rng)
                            } else {
                                rng.random::<f64>()
                            };
                            lo[k] + (hi[k] - lo[k]) * u
                        })
                        .collect()
                })
                .collect()
        }
        SampleDistribution::EmpiricalFile { path } => {
            let text = std::fs::read_to_string(path).map_err(|e| PopfError::Io(format!("{}: {e}", path.display())))?;
            let pool = parse_rows(&text, d)?;
            if let Some(i) = pool.iter().position(|r| !spec.contains(r)) {
                return Err(unsupported(format!(
                    "{} row {} lies outside the uncertainty box",
                    path.display(),
                    i + 1
                )));
            }
            (0..n).map(|_| pool[rng.random_range(0..pool.len())].clone()).collect()
        }
        SampleDistribution::PointMass { x } => {
            if !spec.contains(x) {
                return Err(unsupported("point mass lies outside the uncertainty box".into()));
            }
            vec![x.clone(); n]
        }
    };
    Ok(rows)
}

/// Numeric rows of a comma-separated table; a non-numeric first line is
/// taken as a header.
fn parse_rows(text: &str, d: usize) -> Result<Vec<Vec<f64>>, PopfError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| unsupported(format!("empirical file: {e}")))?;
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(r) if r.len() == d => rows.push(r),
            Ok(r) => {
                return Err(unsupported(format!(
                    "empirical file line {}: {} columns, expected {d}",
                    i + 1,
                    r.len()
                )))
            }
            Err(_) if i == 0 => continue,
            Err(e) => return Err(unsupported(format!("empirical file line {}: {e}", i + 1))),
        }
    }
    if rows.is_empty() {
        return Err(unsupported("empirical file has no rows".into()));
    }
    Ok(rows)
}
