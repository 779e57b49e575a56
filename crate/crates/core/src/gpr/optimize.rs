//! Projected BFGS over a box, used for log-hyperparameter search.

type Objective<'a> = dyn Fn(&[f64; 3]) -> Option<(f64, [f64; 3], f64)> + 'a;

const ARMIJO: f64 = 1e-4;
/// Longest step allowed in any log-coordinate.
const MAX_STEP: f64 = 3.0;

fn project(t: &mut [f64; 3], lo: &[f64; 3], hi: &[f64; 3]) {
    for k in 0..3 {
        t[k] = t[k].clamp(lo[k], hi[k]);
    }
}

/// Minimize `f` over `[lo, hi]`. `f` returns `(value, gradient, extra)` or
/// `None` where it cannot be evaluated. Returns the best point with its
/// value and the `extra` reported there.
pub(crate) fn minimize(
    f: impl Fn(&[f64; 3]) -> Option<(f64, [f64; 3], f64)>,
    t0: [f64; 3],
    lo: [f64; 3],
    hi: [f64; 3],
    max_iter: usize,
    grad_tol: f64,
) -> Option<(f64, [f64; 3], f64)> {
    let f: &Objective = &f;
    let mut t = t0;
    project(&mut t, &lo, &hi);
    let (mut fx, mut g, mut extra) = f(&t)?;
    let mut h = identity();

    for _ in 0..max_iter {
        // Coordinates pinned at a bound with the gradient pushing outward
        // are held fixed for this iteration.
        let mut free = [true; 3];
        for k in 0..3 {
            if (t[k] <= lo[k] && g[k] > 0.0) || (t[k] >= hi[k] && g[k] < 0.0) {
                free[k] = false;
            }
        }
        let pg = (0..3).filter(|&k| free[k]).fold(0.0f64, |m, k| m.max(g[k].abs()));
        if pg < grad_tol {
            break;
        }
        let mut d = [0.0; 3];
        for r in 0..3 {
            if free[r] {
                d[r] = -(0..3).filter(|&c| free[c]).map(|c| h[r][c] * g[c]).sum::<f64>();
            }
        }
        if dot(&d, &g) >= 0.0 {
            h = identity();
            for k in 0..3 {
                d[k] = if free[k] { -g[k] } else { 0.0 };
            }
        }
        let longest = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if longest > MAX_STEP {
            d.iter_mut().for_each(|v| *v *= MAX_STEP / longest);
        }

        let mut step = 1.0;
        let mut accepted = None;
        // Backtrack until the move becomes negligible in log space.
        while step * longest.min(MAX_STEP) > 1e-8 {
            let mut tn = [t[0] + step * d[0], t[1] + step * d[1], t[2] + step * d[2]];
            project(&mut tn, &lo, &hi);
            let s = [tn[0] - t[0], tn[1] - t[1], tn[2] - t[2]];
            if let Some((fn_, gn, en)) = f(&tn) {
                if fn_ <= fx + ARMIJO * dot(&g, &s) {
                    accepted = Some((tn, s, fn_, gn, en));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((tn, s, fn_, gn, en)) = accepted else {
            break;
        };
        let y = [gn[0] - g[0], gn[1] - g[1], gn[2] - g[2]];
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            bfgs_update(&mut h, &s, &y, sy);
        }
        let done = (fx - fn_).abs() <= 1e-9 * (1.0 + fx.abs());
        t = tn;
        fx = fn_;
        g = gn;
        extra = en;
        if done {
            break;
        }
    }
    Some((fx, t, extra))
}

fn identity() -> [[f64; 3]; 3] {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Inverse-Hessian update `H ← (I − ρsyᵀ)H(I − ρysᵀ) + ρssᵀ`.
fn bfgs_update(h: &mut [[f64; 3]; 3], s: &[f64; 3], y: &[f64; 3], sy: f64) {
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..3).map(|r| (0..3).map(|c| h[r][c] * y[c]).sum()).collect();
    let yhy: f64 = (0..3).map(|r| y[r] * hy[r]).sum();
    for r in 0..3 {
        for c in 0..3 {
            h[r][c] += -rho * (hy[r] * s[c] + s[r] * hy[c]) + (rho * rho * yhy + rho) * s[r] * s[c];
        }
    }
}
