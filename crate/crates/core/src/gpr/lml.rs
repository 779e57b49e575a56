use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;

use super::{cholesky, GpError, Hyperparameters};

/// Pairwise squared distances of the rows of a row-major `n × d` matrix.
pub(crate) fn sq_distances(x: &[f64], n: usize, d: usize) -> Mat<f64> {
    let mut out = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let s = sq_dist(&x[i * d..(i + 1) * d], &x[j * d..(j + 1) * d]);
            out[(i, j)] = s;
            out[(j, i)] = s;
        }
    }
    out
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (p, q) in a.iter().zip(b) {
        let t = p - q;
        s += t * t;
    }
    s
}

/// Noise-free SE kernel matrix from precomputed squared distances.
pub(crate) fn kernel_matrix(d2: &Mat<f64>, hp: &Hyperparameters) -> Mat<f64> {
    let n = d2.nrows();
    let sf2 = hp.sigma_f * hp.sigma_f;
    let inv = -0.5 / (hp.l * hp.l);
    let mut k = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        k[(j, j)] = sf2;
        for i in j + 1..n {
            let v = sf2 * (d2[(i, j)] * inv).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

pub(crate) struct LmlEval {
    pub value: f64,
    /// Gradient with respect to `(log l, log σf, log σn)`.
    pub grad: [f64; 3],
    pub jitter: f64,
}

/// Log marginal likelihood and its log-space gradient given squared distances.
pub(crate) fn lml_from_distances(
    d2: &Mat<f64>,
    y: &[f64],
    hp: &Hyperparameters,
    with_grad: bool,
) -> Result<LmlEval, GpError> {
    let n = y.len();
    let kf = kernel_matrix(d2, hp);
    let sn2 = hp.sigma_n * hp.sigma_n;
    let (llt, jitter) = cholesky(&kf, sn2)?;
    let l = llt.L();

    let mut alpha = Mat::<f64>::from_fn(n, 1, |i, _| y[i]);
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, alpha.as_mut(), faer::Par::Seq);
    let mut quad = 0.0;
    for i in 0..n {
        quad += alpha[(i, 0)] * alpha[(i, 0)];
    }
    let mut logdet = 0.0;
    for i in 0..n {
        logdet += l[(i, i)].ln();
    }
    let value = -0.5 * quad - logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    if !with_grad {
        return Ok(LmlEval {
            value,
            grad: [0.0; 3],
            jitter,
        });
    }

    faer::linalg::triangular_solve::solve_upper_triangular_in_place(l.transpose(), alpha.as_mut(), faer::Par::Seq);
    let w = llt.inverse();
    // g_p = ½·Σ_ij (α_i α_j − W_ij)·∂K_ij/∂p, using symmetry.
    let inv_l2 = 1.0 / (hp.l * hp.l);
    let (mut gl, mut gf, mut gn) = (0.0, 0.0, 0.0);
    for j in 0..n {
        let aj = alpha[(j, 0)];
        let diag = aj * aj - w[(j, j)];
        gf += diag * kf[(j, j)];
        gn += diag;
        for i in j + 1..n {
            let c = 2.0 * (alpha[(i, 0)] * aj - w[(i, j)]);
            let k = kf[(i, j)];
            gl += c * k * d2[(i, j)];
            gf += c * k;
        }
    }
    Ok(LmlEval {
        value,
        grad: [0.5 * gl * inv_l2, gf, gn * sn2],
        jitter,
    })
}
