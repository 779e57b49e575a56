//! Polar-coordinate power expressions and their first and second derivatives.
//!
//! Every nodal injection and branch-end flow is a sum of two kinds of terms
//! over local variables `(θa, θb, va, vb)`:
//!
//! * self terms `P = va²·G`, `Q = −va²·B`;
//! * pair terms `P = va·vb·(G cos θ + B sin θ)`, `Q = va·vb·(G sin θ − B cos θ)`
//!   with `θ = θa − θb`.

use crate::case_io::{admittance_matrix, branch_admittances, NetworkCase};

/// Local derivative slots: `[θa, θb, va, vb]`.
pub(crate) type Local = [f64; 4];

#[derive(Debug, Clone, Copy)]
pub(crate) struct Pair {
    pub p: f64,
    pub q: f64,
    pub dp: Local,
    pub dq: Local,
}

pub(crate) fn pair(g: f64, b: f64, va: f64, vb: f64, th: f64) -> Pair {
    let (s, c) = th.sin_cos();
    let gc_bs = g * c + b * s;
    let gs_bc = g * s - b * c;
    let vv = va * vb;
    Pair {
        p: vv * gc_bs,
        q: vv * gs_bc,
        dp: [-vv * gs_bc, vv * gs_bc, vb * gc_bs, va * gc_bs],
        dq: [vv * gc_bs, -vv * gc_bs, vb * gs_bc, va * gs_bc],
    }
}

/// Hessian of `lp·P + lq·Q` for a pair term, over `[θa, θb, va, vb]`.
pub(crate) fn pair_hessian(g: f64, b: f64, va: f64, vb: f64, th: f64, lp: f64, lq: f64) -> [[f64; 4]; 4] {
    let (s, c) = th.sin_cos();
    let c1 = lp * g - lq * b;
    let c2 = lp * b + lq * g;
    let phi = c1 * c + c2 * s;
    let dphi = -c1 * s + c2 * c;
    let vv = va * vb;
    [
        [-vv * phi, vv * phi, vb * dphi, va * dphi],
        [vv * phi, -vv * phi, -vb * dphi, -va * dphi],
        [vb * dphi, -vb * dphi, 0.0, phi],
        [va * dphi, -va * dphi, phi, 0.0],
    ]
}

/// Real and imaginary parts of the nodal admittance matrix in adjacency form.
#[derive(Debug, Clone)]
pub(crate) struct PolarNetwork {
    pub nb: usize,
    pub gd: Vec<f64>,
    pub bd: Vec<f64>,
    /// Off-diagonal nonzeros `(k, G_ik, B_ik)` per row.
    pub adj: Vec<Vec<(usize, f64, f64)>>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Injections {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl PolarNetwork {
    pub fn new(case: &NetworkCase) -> Self {
        let y = admittance_matrix(case);
        let nb = y.dim();
        let mut gd = vec![0.0; nb];
        let mut bd = vec![0.0; nb];
        let mut adj = vec![Vec::new(); nb];
        for i in 0..nb {
            for (k, v) in y.row(i).iter().enumerate() {
                if k == i {
                    gd[i] = v.re;
                    bd[i] = v.im;
                } else if v.re != 0.0 || v.im != 0.0 {
                    adj[i].push((k, v.re, v.im));
                }
            }
        }
        PolarNetwork { nb, gd, bd, adj }
    }

    pub fn injections(&self, va: &[f64], vm: &[f64]) -> Injections {
        let mut inj = Injections {
            p: vec![0.0; self.nb],
            q: vec![0.0; self.nb],
        };
        for i in 0..self.nb {
            let vi = vm[i];
            let mut p = vi * vi * self.gd[i];
            let mut q = -vi * vi * self.bd[i];
            for &(k, g, b) in &self.adj[i] {
                let (s, c) = (va[i] - va[k]).sin_cos();
                let vv = vi * vm[k];
                p += vv * (g * c + b * s);
                q += vv * (g * s - b * c);
            }
            inj.p[i] = p;
            inj.q[i] = q;
        }
        inj
    }

    /// Calls `emit(row_is_q, bus, var, value)` for every nonzero Jacobian
    /// entry; `var` indexes `[va(0..nb), vm(0..nb)]`.
    pub fn jacobian(&self, va: &[f64], vm: &[f64], mut emit: impl FnMut(bool, usize, usize, f64)) {
        let nb = self.nb;
        for i in 0..nb {
            let vi = vm[i];
            let mut dp_ti = 0.0;
            let mut dq_ti = 0.0;
            let mut dp_vi = 2.0 * vi * self.gd[i];
            let mut dq_vi = -2.0 * vi * self.bd[i];
            for &(k, g, b) in &self.adj[i] {
                let t = pair(g, b, vi, vm[k], va[i] - va[k]);
                dp_ti += t.dp[0];
                dq_ti += t.dq[0];
                dp_vi += t.dp[2];
                dq_vi += t.dq[2];
                emit(false, i, k, t.dp[1]);
                emit(true, i, k, t.dq[1]);
                emit(false, i, nb + k, t.dp[3]);
                emit(true, i, nb + k, t.dq[3]);
            }
            emit(false, i, i, dp_ti);
            emit(true, i, i, dq_ti);
            emit(false, i, nb + i, dp_vi);
            emit(true, i, nb + i, dq_vi);
        }
    }

    /// Adds the Hessian of `Σ lp_i·P_i + lq_i·Q_i` into `add(r, c, v)` over
    /// the `[va, vm]` block.
    pub fn hessian(&self, va: &[f64], vm: &[f64], lp: &[f64], lq: &[f64], mut add: impl FnMut(usize, usize, f64)) {
        let nb = self.nb;
        for i in 0..nb {
            add(nb + i, nb + i, 2.0 * (lp[i] * self.gd[i] - lq[i] * self.bd[i]));
            for &(k, g, b) in &self.adj[i] {
                let h = pair_hessian(g, b, vm[i], vm[k], va[i] - va[k], lp[i], lq[i]);
                let idx = [i, k, nb + i, nb + k];
                for (r, hr) in idx.iter().zip(&h) {
                    for (c, v) in idx.iter().zip(hr) {
                        if *v != 0.0 {
                            add(*r, *c, *v);
                        }
                    }
                }
            }
        }
    }
}

/// A thermally limited branch with its two-port admittances split into
/// real/imaginary parts, as seen from either end.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LimitedBranch {
    pub from: usize,
    pub to: usize,
    /// `(G_self, B_self, G_mutual, B_mutual)` seen from the from end.
    pub f: [f64; 4],
    /// The same seen from the to end.
    pub t: [f64; 4],
    /// Squared limit in pu.
    pub smax2: f64,
}

pub(crate) fn limited_branches(case: &NetworkCase) -> Vec<LimitedBranch> {
    branch_admittances(case)
        .into_iter()
        .filter(|(k, _)| case.branches[*k].rate_a > 0.0)
        .map(|(k, a)| {
            let smax = case.branches[k].rate_a / case.base_mva;
            LimitedBranch {
                from: a.from,
                to: a.to,
                f: [a.yff.re, a.yff.im, a.yft.re, a.yft.im],
                t: [a.ytt.re, a.ytt.im, a.ytf.re, a.ytf.im],
                smax2: smax * smax,
            }
        })
        .collect()
}

/// Flow at one branch end. Returns `(P, Q, dP, dQ)` over
/// `[θ_end, θ_other, v_end, v_other]`.
pub(crate) fn end_flow(y: &[f64; 4], va: f64, vb: f64, th: f64) -> Pair {
    let mut t = pair(y[2], y[3], va, vb, th);
    t.p += va * va * y[0];
    t.q -= va * va * y[1];
    t.dp[2] += 2.0 * va * y[0];
    t.dq[2] -= 2.0 * va * y[1];
    t
}

/// Hessian of `lp·P + lq·Q` of an end flow over `[θ_end, θ_other, v_end, v_other]`.
pub(crate) fn end_flow_hessian(y: &[f64; 4], va: f64, vb: f64, th: f64, lp: f64, lq: f64) -> [[f64; 4]; 4] {
    let mut h = pair_hessian(y[2], y[3], va, vb, th, lp, lq);
    h[2][2] += 2.0 * (lp * y[0] - lq * y[1]);
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case_io::fixtures;

    fn state(nb: usize) -> (Vec<f64>, Vec<f64>) {
        let va = (0..nb).map(|i| 0.05 * (i as f64 * 1.3).sin()).collect();
        let vm = (0..nb).map(|i| 1.0 + 0.03 * (i as f64 * 0.7).cos()).collect();
        (va, vm)
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let net = PolarNetwork::new(&fixtures::case14());
        let nb = net.nb;
        let (va, vm) = state(nb);
        let mut jac = vec![vec![0.0; 2 * nb]; 2 * nb];
        net.jacobian(&va, &vm, |q, i, v, d| jac[i + if q { nb } else { 0 }][v] += d);
        let h = 1e-6;
        for v in 0..2 * nb {
            let (mut a, mut m) = (va.clone(), vm.clone());
            let (mut a2, mut m2) = (va.clone(), vm.clone());
            if v < nb {
                a[v] += h;
                a2[v] -= h;
            } else {
                m[v - nb] += h;
                m2[v - nb] -= h;
            }
            let up = net.injections(&a, &m);
            let dn = net.injections(&a2, &m2);
            for i in 0..nb {
                let fp = (up.p[i] - dn.p[i]) / (2.0 * h);
                let fq = (up.q[i] - dn.q[i]) / (2.0 * h);
                assert!((fp - jac[i][v]).abs() < 1e-6, "dP{i}/d{v}");
                assert!((fq - jac[nb + i][v]).abs() < 1e-6, "dQ{i}/d{v}");
            }
        }
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let net = PolarNetwork::new(&fixtures::case14());
        let nb = net.nb;
        let (va, vm) = state(nb);
        let lp: Vec<f64> = (0..nb).map(|i| 0.3 + 0.1 * i as f64).collect();
        let lq: Vec<f64> = (0..nb).map(|i| -0.2 + 0.05 * i as f64).collect();
        let grad = |va: &[f64], vm: &[f64]| {
            let mut g = vec![0.0; 2 * nb];
            net.jacobian(va, vm, |q, i, v, d| g[v] += d * if q { lq[i] } else { lp[i] });
            g
        };
        let mut hess = vec![vec![0.0; 2 * nb]; 2 * nb];
        net.hessian(&va, &vm, &lp, &lq, |r, c, v| hess[r][c] += v);
        let h = 1e-6;
        for v in 0..2 * nb {
            let (mut a, mut m) = (va.clone(), vm.clone());
            let (mut a2, mut m2) = (va.clone(), vm.clone());
            if v < nb {
                a[v] += h;
                a2[v] -= h;
            } else {
                m[v - nb] += h;
                m2[v - nb] -= h;
            }
            let up = grad(&a, &m);
            let dn = grad(&a2, &m2);
            for r in 0..2 * nb {
                let fd = (up[r] - dn[r]) / (2.0 * h);
                assert!((fd - hess[r][v]).abs() < 1e-5, "H[{r}][{v}] {} vs {fd}", hess[r][v]);
            }
        }
    }

    #[test]
    fn end_flow_derivatives() {
        let y = [1.2, -8.0, -1.1, 7.5];
        let (va, vb, ta, tb) = (1.02, 0.97, 0.1, -0.05);
        let f = |x: &[f64; 4]| end_flow(&y, x[2], x[3], x[0] - x[1]);
        let x0 = [ta, tb, va, vb];
        let base = f(&x0);
        let (lp, lq) = (0.7, -1.3);
        let hess = end_flow_hessian(&y, va, vb, ta - tb, lp, lq);
        let h = 1e-6;
        for j in 0..4 {
            let mut xp = x0;
            let mut xm = x0;
            xp[j] += h;
            xm[j] -= h;
            let (up, dn) = (f(&xp), f(&xm));
            assert!(((up.p - dn.p) / (2.0 * h) - base.dp[j]).abs() < 1e-7);
            assert!(((up.q - dn.q) / (2.0 * h) - base.dq[j]).abs() < 1e-7);
            for i in 0..4 {
                let fd = (lp * (up.dp[i] - dn.dp[i]) + lq * (up.dq[i] - dn.dq[i])) / (2.0 * h);
                assert!((fd - hess[i][j]).abs() < 1e-6);
            }
        }
    }
}
