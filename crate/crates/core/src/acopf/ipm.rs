//! Primal-dual interior-point method for small dense nonlinear programs
//!
//! ```text
//! min f(x)  s.t.  g(x) = 0,  h(x) ≤ 0,  xmin ≤ x ≤ xmax
//! ```
//!
//! Variables with equal bounds become equality rows and finite bounds become
//! inequality rows, handled implicitly so the dense Jacobians only carry the
//! nonlinear constraints. Each iteration solves the reduced Newton system
//! `[M Jgᵀ; Jg 0]·[dx; dλ] = [−N; −g]` and uses a fraction-to-boundary step
//! rule with separate primal and dual step lengths.

use faer::prelude::*;
use faer::Mat;

pub(crate) struct Eval {
    pub f: f64,
    pub df: Vec<f64>,
    pub g: Vec<f64>,
    pub jg: Mat<f64>,
    pub h: Vec<f64>,
    pub jh: Mat<f64>,
}

pub(crate) trait Nlp {
    fn dim(&self) -> usize;
    fn n_eq(&self) -> usize;
    fn n_ineq(&self) -> usize;
    fn bounds(&self) -> (&[f64], &[f64]);
    /// Fill `out` at `x`. Jacobians arrive zeroed.
    fn eval(&self, x: &[f64], out: &mut Eval);
    /// Add `cost_mult·∇²f + Σλ∇²g + Σμ∇²h` into a zeroed `out`.
    fn hessian(&self, x: &[f64], cost_mult: f64, lam: &[f64], mu: &[f64], out: &mut Mat<f64>);
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct IpmOptions {
    pub feastol: f64,
    pub opttol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    NumericalFailure,
    /// Primal residual kept growing: the problem is most likely infeasible.
    Infeasible,
}

/// Final convergence measures of a solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Conditions {
    /// Largest equality residual or inequality violation (absolute).
    pub feas: f64,
    pub grad: f64,
    pub comp: f64,
    pub cost: f64,
}

pub(crate) struct IpmResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    pub conditions: Conditions,
}

const XI: f64 = 0.99995;
const SIGMA: f64 = 0.1;
const Z0: f64 = 1.0;
const ALPHA_MIN: f64 = 1e-12;
const REG: f64 = 1e-9;

struct BoundRow {
    var: usize,
    sign: f64,
    value: f64,
}

pub(crate) fn solve(nlp: &impl Nlp, x0: &[f64], opt: &IpmOptions) -> IpmResult {
    let n = nlp.dim();
    let (xmin, xmax) = nlp.bounds();
    let mut fixed = Vec::new();
    let mut rows = Vec::new();
    for i in 0..n {
        if xmin[i] == xmax[i] {
            fixed.push((i, xmin[i]));
            continue;
        }
        if xmax[i].is_finite() {
            rows.push(BoundRow {
                var: i,
                sign: 1.0,
                value: xmax[i],
            });
        }
        if xmin[i].is_finite() {
            rows.push(BoundRow {
                var: i,
                sign: -1.0,
                value: xmin[i],
            });
        }
    }
    let (neq_nl, niq_nl) = (nlp.n_eq(), nlp.n_ineq());
    let neq = neq_nl + fixed.len();
    let niq = niq_nl + rows.len();

    let mut ev = Eval {
        f: 0.0,
        df: vec![0.0; n],
        g: vec![0.0; neq_nl],
        jg: Mat::zeros(neq_nl, n),
        h: vec![0.0; niq_nl],
        jh: Mat::zeros(niq_nl, n),
    };
    let mut g = vec![0.0; neq];
    let mut h = vec![0.0; niq];
    let mut x = x0.to_vec();
    // Scale the objective to order one at the starting point so the
    // stationarity test is meaningful whatever the cost units.
    let cost_mult = {
        ev.jg.fill(0.0);
        ev.jh.fill(0.0);
        nlp.eval(&x, &mut ev);
        1.0 / ev.f.abs().max(1.0)
    };

    let evaluate = |x: &[f64], ev: &mut Eval, g: &mut [f64], h: &mut [f64]| {
        ev.jg.fill(0.0);
        ev.jh.fill(0.0);
        nlp.eval(x, ev);
        ev.f *= cost_mult;
        ev.df.iter_mut().for_each(|d| *d *= cost_mult);
        g[..neq_nl].copy_from_slice(&ev.g);
        for (k, &(i, v)) in fixed.iter().enumerate() {
            g[neq_nl + k] = x[i] - v;
        }
        h[..niq_nl].copy_from_slice(&ev.h);
        for (k, r) in rows.iter().enumerate() {
            h[niq_nl + k] = r.sign * (x[r.var] - r.value);
        }
    };
    evaluate(&x, &mut ev, &mut g, &mut h);

    let mut z: Vec<f64> = h.iter().map(|&hi| (-hi).max(Z0)).collect();
    let mut gamma = 1.0;
    let mut mu: Vec<f64> = z
        .iter()
        .map(|&zi| if gamma / zi > Z0 { gamma / zi } else { Z0 })
        .collect();
    let mut lam = vec![0.0; neq];
    let mut f0 = ev.f;

    let lagrangian_grad = |ev: &Eval, lam: &[f64], mu: &[f64]| {
        let mut lx = ev.df.clone();
        for r in 0..neq_nl {
            if lam[r] != 0.0 {
                for c in 0..n {
                    lx[c] += ev.jg[(r, c)] * lam[r];
                }
            }
        }
        for (k, &(i, _)) in fixed.iter().enumerate() {
            lx[i] += lam[neq_nl + k];
        }
        for r in 0..niq_nl {
            for c in 0..n {
                lx[c] += ev.jh[(r, c)] * mu[r];
            }
        }
        for (k, b) in rows.iter().enumerate() {
            lx[b.var] += b.sign * mu[niq_nl + k];
        }
        lx
    };

    let conditions = |x: &[f64], ev: &Eval, g: &[f64], h: &[f64], z: &[f64], lam: &[f64], mu: &[f64], f0: f64| {
        let lx = lagrangian_grad(ev, lam, mu);
        let norm = |v: &[f64]| v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let maxh = h.iter().fold(0.0f64, |m, a| m.max(*a));
        let zmu: f64 = z.iter().zip(mu).map(|(a, b)| a * b).sum();
        Conditions {
            feas: norm(g).max(maxh),
            grad: norm(&lx) / (1.0 + norm(lam).max(norm(mu))),
            comp: zmu / (1.0 + norm(x)),
            cost: (ev.f - f0).abs() / (1.0 + f0.abs()),
        }
    };

    let mut cond = conditions(&x, &ev, &g, &h, &z, &lam, &mu, f0);
    let initial_feas = cond.feas.max(1.0);
    let converged = |c: &Conditions, it: usize| {
        c.feas < opt.feastol && c.grad < opt.opttol && c.comp < opt.opttol && (it > 0 && c.cost < opt.opttol)
    };

    let dim = n + neq;
    let mut lxx = Mat::<f64>::zeros(n, n);
    let mut status = SolveStatus::MaxIterations;
    let mut it = 0;
    while it < opt.max_iter {
        it += 1;
        lxx.fill(0.0);
        nlp.hessian(&x, cost_mult, &lam[..neq_nl], &mu[..niq_nl], &mut lxx);

        let lx = lagrangian_grad(&ev, &lam, &mu);
        let mut kkt = Mat::<f64>::zeros(dim, dim);
        let mut rhs = Mat::<f64>::zeros(dim, 1);
        for r in 0..n {
            for c in 0..n {
                kkt[(r, c)] = lxx[(r, c)];
            }
            // Keeps the system solvable when the objective is flat along
            // feasible directions; the fixed point is unchanged.
            kkt[(r, r)] += REG;
            rhs[(r, 0)] = -lx[r];
        }
        for r in 0..niq_nl {
            let d = mu[r] / z[r];
            let w = (gamma + mu[r] * h[r]) / z[r];
            let nz: Vec<(usize, f64)> = (0..n).map(|c| (c, ev.jh[(r, c)])).filter(|(_, v)| *v != 0.0).collect();
            for &(a, va) in &nz {
                rhs[(a, 0)] -= va * w;
                for &(b, vb) in &nz {
                    kkt[(a, b)] += d * va * vb;
                }
            }
        }
        for (k, b) in rows.iter().enumerate() {
            let j = niq_nl + k;
            kkt[(b.var, b.var)] += mu[j] / z[j];
            rhs[(b.var, 0)] -= b.sign * (gamma + mu[j] * h[j]) / z[j];
        }
        for r in 0..neq_nl {
            for c in 0..n {
                let v = ev.jg[(r, c)];
                kkt[(n + r, c)] = v;
                kkt[(c, n + r)] = v;
            }
            rhs[(n + r, 0)] = -g[r];
        }
        for (k, &(i, _)) in fixed.iter().enumerate() {
            kkt[(n + neq_nl + k, i)] = 1.0;
            kkt[(i, n + neq_nl + k)] = 1.0;
            rhs[(n + neq_nl + k, 0)] = -g[neq_nl + k];
        }

        let sol = kkt.partial_piv_lu().solve(&rhs);
        if (0..dim).any(|i| !sol[(i, 0)].is_finite()) {
            status = SolveStatus::NumericalFailure;
            break;
        }
        let dx: Vec<f64> = (0..n).map(|i| sol[(i, 0)]).collect();
        let dlam: Vec<f64> = (0..neq).map(|i| sol[(n + i, 0)]).collect();

        let mut dz = vec![0.0; niq];
        for r in 0..niq_nl {
            let mut jdx = 0.0;
            for c in 0..n {
                jdx += ev.jh[(r, c)] * dx[c];
            }
            dz[r] = -h[r] - z[r] - jdx;
        }
        for (k, b) in rows.iter().enumerate() {
            let j = niq_nl + k;
            dz[j] = -h[j] - z[j] - b.sign * dx[b.var];
        }
        let dmu: Vec<f64> = (0..niq).map(|j| -mu[j] + (gamma - mu[j] * dz[j]) / z[j]).collect();

        let step = |v: &[f64], dv: &[f64]| {
            v.iter()
                .zip(dv)
                .filter(|(_, d)| **d < 0.0)
                .map(|(a, d)| XI * (-a / d))
                .fold(1.0f64, f64::min)
        };
        let alphap = step(&z, &dz);
        let alphad = step(&mu, &dmu);

        for i in 0..n {
            x[i] += alphap * dx[i];
        }
        for j in 0..niq {
            z[j] += alphap * dz[j];
            mu[j] += alphad * dmu[j];
        }
        for i in 0..neq {
            lam[i] += alphad * dlam[i];
        }
        if niq > 0 {
            gamma = SIGMA * z.iter().zip(&mu).map(|(a, b)| a * b).sum::<f64>() / niq as f64;
        }

        f0 = ev.f;
        evaluate(&x, &mut ev, &mut g, &mut h);
        cond = conditions(&x, &ev, &g, &h, &z, &lam, &mu, f0);
        if converged(&cond, it) {
            status = SolveStatus::Converged;
            break;
        }
        if x.iter().any(|v| !v.is_finite())
            || alphap < ALPHA_MIN
            || alphad < ALPHA_MIN
            || !gamma.is_finite()
            || gamma > 1.0 / f64::EPSILON
        {
            status = SolveStatus::NumericalFailure;
            break;
        }
        if cond.feas > 1e6 * initial_feas {
            status = SolveStatus::Infeasible;
            break;
        }
    }
    if status == SolveStatus::MaxIterations && cond.feas > 1e3 * opt.feastol.max(1e-6) {
        status = SolveStatus::Infeasible;
    }

    IpmResult {
        f: ev.f / cost_mult,
        x,
        iterations: it,
        status,
        conditions: cond,
    }
}
