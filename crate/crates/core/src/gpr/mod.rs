//! Exact Gaussian-process regression with an isotropic squared-exponential
//! kernel.
//!
//! Inputs are standardized per dimension and targets to zero mean and unit
//! variance before fitting; hyperparameters live on that standardized scale.
//! The noise term enters as `σn²·I`.

mod lml;
mod optimize;
mod persist;

use std::sync::atomic::{AtomicU64, Ordering};

use faer::linalg::solvers::Llt;
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use persist::MODEL_SCHEMA_VERSION;

static FACTORIZATIONS: AtomicU64 = AtomicU64::new(0);

/// Cholesky factorizations performed by this module in this process.
pub fn factorization_count() -> u64 {
    FACTORIZATIONS.load(Ordering::Relaxed)
}

/// First diagonal jitter tried; escalated ×10 per failure.
pub const JITTER_MIN: f64 = 1e-10;
pub const JITTER_MAX: f64 = 1e-6;
/// Smallest noise standard deviation on the standardized scale.
pub const SIGMA_N_FLOOR: f64 = 1e-6;
/// Length of the column blocks used by batched prediction.
const BLOCK: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpError {
    #[error("kernel matrix not positive definite even with jitter {0:e}")]
    Cholesky(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("need at least {need} training points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("non-finite training data")]
    NonFinite,
    #[error("all {0} optimizer restarts failed")]
    AllRestartsFailed(usize),
    #[error("predictive variance {0:e} is negative beyond round-off")]
    NegativeVariance(f64),
    #[error("model file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub l: f64,
    pub sigma_f: f64,
    pub sigma_n: f64,
}

impl Hyperparameters {
    fn from_log(t: &[f64; 3]) -> Self {
        Hyperparameters {
            l: t[0].exp(),
            sigma_f: t[1].exp(),
            sigma_n: t[2].exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

/// Affine map `z = (v − mean) / scale` per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Scaler {
    /// Column means and sample standard deviations; zero spread maps to scale 1.
    pub fn fit(rows: &[Vec<f64>], dim: usize) -> Self {
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let denom = (n - 1.0).max(1.0);
        let scale = var
            .iter()
            .map(|s| {
                let sd = (s / denom).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Scaler { mean, scale }
    }

    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = (v[k] - self.mean[k]) / self.scale[k];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Projected-gradient infinity-norm stopping threshold.
    pub grad_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            restarts: 5,
            seed: 0,
            max_iter: 200,
            grad_tol: 1e-5,
        }
    }
}

/// Log-space search box for `(l, σf, σn)`.
pub const SEARCH_BOX: [(f64, f64); 3] = [(1e-2, 1e3), (1e-3, 1e3), (SIGMA_N_FLOOR, 10.0)];
/// Ranges of the log-uniform restart draws. One extra start sits at the
/// median pairwise input distance, which the draws rarely reach in high
/// dimension.
pub const RESTART_BOX: [(f64, f64); 3] = [(0.1, 10.0), (0.1, 10.0), (1e-4, 1e-1)];

#[derive(Debug, Clone)]
pub struct GpModel {
    pub hp: Hyperparameters,
    /// Standardized training inputs, row-major `n_train × dim`.
    pub x_train: Vec<f64>,
    /// Standardized training targets.
    pub y_train: Vec<f64>,
    pub n_train: usize,
    pub dim: usize,
    pub alpha: Vec<f64>,
    /// Lower Cholesky factor of `K + (σn² + jitter)·I`.
    pub chol: Mat<f64>,
    pub jitter: f64,
    pub x_scaler: Scaler,
    /// Target mean and standard deviation.
    pub y_mean: f64,
    pub y_scale: f64,
    /// Log marginal likelihood of the standardized data.
    pub lml: f64,
    /// Set when the targets had zero variance and the model is a constant.
    pub constant: bool,
}

impl PartialEq for GpModel {
    fn eq(&self, o: &Self) -> bool {
        self.hp == o.hp
            && self.x_train == o.x_train
            && self.y_train == o.y_train
            && self.alpha == o.alpha
            && self.jitter == o.jitter
            && self.x_scaler == o.x_scaler
            && self.y_mean == o.y_mean
            && self.y_scale == o.y_scale
            && self.lml == o.lml
            && self.constant == o.constant
            && self.chol == o.chol
    }
}

/// `σf²·exp(−‖xi − xj‖² / (2l²))`.
pub fn kernel(xi: &[f64], xj: &[f64], hp: &Hyperparameters) -> f64 {
    hp.sigma_f * hp.sigma_f * (-0.5 * lml::sq_dist(xi, xj) / (hp.l * hp.l)).exp()
}

/// Factor `kf + (sn2 + jitter)·I`, escalating the jitter on failure.
pub(crate) fn cholesky(kf: &Mat<f64>, sn2: f64) -> Result<(Llt<f64>, f64), GpError> {
    let mut jitter = JITTER_MIN;
    loop {
        if let Ok(llt) = factor_with_jitter(kf, sn2, jitter) {
            return Ok((llt, jitter));
        }
        if jitter >= JITTER_MAX {
            return Err(GpError::Cholesky(jitter));
        }
        jitter *= 10.0;
    }
}

fn factor_with_jitter(kf: &Mat<f64>, sn2: f64, jitter: f64) -> Result<Llt<f64>, GpError> {
    FACTORIZATIONS.fetch_add(1, Ordering::Relaxed);
    let mut a = kf.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += sn2 + jitter;
    }
    a.llt(faer::Side::Lower).map_err(|_| GpError::Cholesky(jitter))
}

fn flatten(rows: &[Vec<f64>], dim: usize) -> Result<Vec<f64>, GpError> {
    let mut out = Vec::with_capacity(rows.len() * dim);
    for r in rows {
        if r.len() != dim {
            return Err(GpError::Dimension {
                expected: dim,
                got: r.len(),
            });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(GpError::NonFinite);
        }
        out.extend(r);
    }
    Ok(out)
}

/// Log marginal likelihood of `(x, y)` as given (no standardization) and its
/// gradient with respect to `(log l, log σf, log σn)`.
pub fn log_marginal_likelihood(x: &[Vec<f64>], y: &[f64], hp: &Hyperparameters) -> Result<(f64, [f64; 3]), GpError> {
    let n = x.len();
    if n == 0 || n != y.len() {
        return Err(GpError::Dimension {
            expected: n,
            got: y.len(),
        });
    }
    let dim = x[0].len();
    let flat = flatten(x, dim)?;
    let d2 = lml::sq_distances(&flat, n, dim);
    let e = lml::lml_from_distances(&d2, y, hp, true)?;
    Ok((e.value, e.grad))
}

impl GpModel {
    /// Model with fixed hyperparameters on standardized data.
    pub fn with_hyperparameters(x: &[Vec<f64>], y: &[f64], hp: Hyperparameters) -> Result<Self, GpError> {
        let (x_std, y_std, dim, x_scaler, y_mean, y_scale) = standardize(x, y)?;
        Self::assemble(x_std, y_std, dim, x_scaler, y_mean, y_scale, hp, None, false)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        x_train: Vec<f64>,
        y_train: Vec<f64>,
        dim: usize,
        x_scaler: Scaler,
        y_mean: f64,
        y_scale: f64,
        hp: Hyperparameters,
        jitter: Option<f64>,
        constant: bool,
    ) -> Result<Self, GpError> {
        let n = y_train.len();
        let d2 = lml::sq_distances(&x_train, n, dim);
        let kf = lml::kernel_matrix(&d2, &hp);
        let sn2 = hp.sigma_n * hp.sigma_n;
        let (llt, jitter) = match jitter {
            Some(j) => (factor_with_jitter(&kf, sn2, j)?, j),
            None => cholesky(&kf, sn2)?,
        };
        let chol = llt.L().to_owned();
        let mut a = Mat::<f64>::from_fn(n, 1, |i, _| y_train[i]);
        faer::linalg::triangular_solve::solve_lower_triangular_in_place(chol.as_ref(), a.as_mut(), faer::Par::Seq);
        let quad: f64 = (0..n).map(|i| a[(i, 0)] * a[(i, 0)]).sum();
        let logdet: f64 = (0..n).map(|i| chol[(i, i)].ln()).sum();
        faer::linalg::triangular_solve::solve_upper_triangular_in_place(chol.transpose(), a.as_mut(), faer::Par::Seq);
        let alpha = if constant {
            vec![0.0; n]
        } else {
            (0..n).map(|i| a[(i, 0)]).collect()
        };
        Ok(GpModel {
            hp,
            x_train,
            y_train,
            n_train: n,
            dim,
            alpha,
            chol,
            jitter,
            x_scaler,
            y_mean,
            y_scale,
            lml: -0.5 * quad - logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln(),
            constant,
        })
    }

    /// Rebuild the factor for serialized parts (used when loading).
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        x_train: Vec<f64>,
        y_train: Vec<f64>,
        dim: usize,
        x_scaler: Scaler,
        y_mean: f64,
        y_scale: f64,
        hp: Hyperparameters,
        jitter: f64,
        alpha: Vec<f64>,
        lml: f64,
        constant: bool,
    ) -> Result<Self, GpError> {
        let n = y_train.len();
        let d2 = lml::sq_distances(&x_train, n, dim);
        let kf = lml::kernel_matrix(&d2, &hp);
        let llt = factor_with_jitter(&kf, hp.sigma_n * hp.sigma_n, jitter)?;
        Ok(GpModel {
            hp,
            x_train,
            y_train,
            n_train: n,
            dim,
            alpha,
            chol: llt.L().to_owned(),
            jitter,
            x_scaler,
            y_mean,
            y_scale,
            lml,
            constant,
        })
    }

    pub fn predict(&self, x_star: &[f64]) -> Result<Prediction, GpError> {
        Ok(self.predict_batch(std::slice::from_ref(&x_star.to_vec()))?[0])
    }

    /// Row-wise prediction. Test points are processed in fixed-width column
    /// blocks (the last one zero-padded) so each point sees exactly the same
    /// arithmetic whether predicted alone or in a batch.
    pub fn predict_batch(&self, x_stars: &[Vec<f64>]) -> Result<Vec<Prediction>, GpError> {
        for r in x_stars {
            if r.len() != self.dim {
                return Err(GpError::Dimension {
                    expected: self.dim,
                    got: r.len(),
                });
            }
        }
        let mut std_rows = vec![0.0; x_stars.len() * self.dim];
        for (s, r) in x_stars.iter().enumerate() {
            self.x_scaler.apply(r, &mut std_rows[s * self.dim..(s + 1) * self.dim]);
        }
        self.predict_standardized(&std_rows, x_stars.len())
    }

    pub(crate) fn predict_standardized(&self, z: &[f64], count: usize) -> Result<Vec<Prediction>, GpError> {
        let (n, d) = (self.n_train, self.dim);
        let sf2 = self.hp.sigma_f * self.hp.sigma_f;
        let inv = -0.5 / (self.hp.l * self.hp.l);
        let mut out = Vec::with_capacity(count);
        let mut ks = Mat::<f64>::zeros(n, BLOCK);
        let mut means = [0.0; BLOCK];
        for start in (0..count).step_by(BLOCK) {
            let w = BLOCK.min(count - start);
            for c in 0..BLOCK {
                means[c] = 0.0;
                if c >= w {
                    for i in 0..n {
                        ks[(i, c)] = 0.0;
                    }
                    continue;
                }
                let zs = &z[(start + c) * d..(start + c + 1) * d];
                let mut m = 0.0;
                for i in 0..n {
                    let k = sf2 * (lml::sq_dist(zs, &self.x_train[i * d..(i + 1) * d]) * inv).exp();
                    ks[(i, c)] = k;
                    m += k * self.alpha[i];
                }
                means[c] = m;
            }
            faer::linalg::triangular_solve::solve_lower_triangular_in_place(
                self.chol.as_ref(),
                ks.as_mut(),
                faer::Par::Seq,
            );
            for c in 0..w {
                let mut q = 0.0;
                for i in 0..n {
                    q += ks[(i, c)] * ks[(i, c)];
                }
                let mut var = sf2 - q;
                if var < 0.0 {
                    if -var > 1e-10 * sf2.max(f64::MIN_POSITIVE) && !self.constant {
                        return Err(GpError::NegativeVariance(var));
                    }
                    var = 0.0;
                }
                out.push(Prediction {
                    mean: self.y_mean + self.y_scale * means[c],
                    variance: self.y_scale * self.y_scale * var,
                });
            }
        }
        Ok(out)
    }
}

type Standardized = (Vec<f64>, Vec<f64>, usize, Scaler, f64, f64);

fn standardize(x: &[Vec<f64>], y: &[f64]) -> Result<Standardized, GpError> {
    let n = x.len();
    if n == 0 {
        return Err(GpError::TooFewPoints { need: 1, got: 0 });
    }
    if y.len() != n {
        return Err(GpError::Dimension {
            expected: n,
            got: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(GpError::NonFinite);
    }
    let dim = x[0].len();
    flatten(x, dim)?;
    let x_scaler = Scaler::fit(x, dim);
    let mut x_std = vec![0.0; n * dim];
    for (i, r) in x.iter().enumerate() {
        x_scaler.apply(r, &mut x_std[i * dim..(i + 1) * dim]);
    }
    let ys: Vec<Vec<f64>> = y.iter().map(|v| vec![*v]).collect();
    let y_scaler = Scaler::fit(&ys, 1);
    let y_std = y.iter().map(|v| (v - y_scaler.mean[0]) / y_scaler.scale[0]).collect();
    Ok((x_std, y_std, dim, x_scaler, y_scaler.mean[0], y_scaler.scale[0]))
}

/// Median of the off-diagonal entries of a squared-distance matrix, square-rooted;
/// 1 when every point coincides.
fn median_distance(d2: &Mat<f64>) -> f64 {
    let n = d2.nrows();
    let mut v: Vec<f64> = (0..n)
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .map(|(i, j)| d2[(i, j)])
        .collect();
    if v.is_empty() {
        return 1.0;
    }
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    if *m > 0.0 {
        m.sqrt()
    } else {
        1.0
    }
}

/// Fit a GP by maximizing the log marginal likelihood from several restarts.
///
/// Targets with zero variance produce a constant model with `constant = true`.
pub fn fit(x: &[Vec<f64>], y: &[f64], opts: &FitOptions) -> Result<GpModel, GpError> {
    if x.len() < 2 {
        return Err(GpError::TooFewPoints { need: 2, got: x.len() });
    }
    let (x_std, y_std, dim, x_scaler, y_mean, y_scale) = standardize(x, y)?;
    let spread = y.iter().fold(0.0f64, |m, v| m.max((v - y_mean).abs()));
    if spread == 0.0 {
        log::warn!("constant training targets; returning a constant model");
        let hp = Hyperparameters {
            l: 1.0,
            sigma_f: SIGMA_N_FLOOR,
            sigma_n: SIGMA_N_FLOOR,
        };
        return GpModel::assemble(x_std, vec![0.0; y.len()], dim, x_scaler, y_mean, 1.0, hp, None, true);
    }
    let n = y.len();
    let d2 = lml::sq_distances(&x_std, n, dim);
    let lo = SEARCH_BOX.map(|(a, _)| a.ln());
    let hi = SEARCH_BOX.map(|(_, b)| b.ln());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(f64, [f64; 3], f64)> = None;
    let heuristic = [median_distance(&d2).ln(), 0.0, 0.1f64.ln()];
    for r in 0..=opts.restarts.max(1) {
        let t0 = if r == 0 {
            std::array::from_fn(|k| heuristic[k].clamp(lo[k], hi[k]))
        } else {
            RESTART_BOX.map(|(a, b)| rng.random_range(a.ln()..b.ln()))
        };
        let objective = |t: &[f64; 3]| {
            lml::lml_from_distances(&d2, &y_std, &Hyperparameters::from_log(t), true)
                .ok()
                .map(|e| (-e.value, e.grad.map(|g| -g), e.jitter))
        };
        match optimize::minimize(objective, t0, lo, hi, opts.max_iter, opts.grad_tol) {
            Some((f, t, jitter)) => {
                log::trace!("restart {r}: lml {}", -f);
                if best.is_none_or(|(bf, _, _)| f < bf) {
                    best = Some((f, t, jitter));
                }
            }
            None => log::debug!("restart {r} failed"),
        }
    }
    let (_, t, jitter) = best.ok_or(GpError::AllRestartsFailed(opts.restarts))?;
    GpModel::assemble(
        x_std,
        y_std,
        dim,
        x_scaler,
        y_mean,
        y_scale,
        Hyperparameters::from_log(&t),
        Some(jitter),
        false,
    )
}
