//! Polar AC-OPF as a dense nonlinear program.
//!
//! Variables (per unit): `[va(nb), vm(nb), pg(ng), qg(ng)]` over in-service
//! generators. Equalities are nodal P and Q balance; inequalities are squared
//! apparent-power limits at both ends of every rated branch.

use faer::Mat;

use super::ipm::{Eval, Nlp};
use super::network::{end_flow, end_flow_hessian, limited_branches, LimitedBranch, PolarNetwork};
use crate::case_io::NetworkCase;

pub(crate) struct AcProblem {
    pub net: PolarNetwork,
    limited: Vec<LimitedBranch>,
    pub nb: usize,
    /// Case indices of in-service generators, in variable order.
    pub gens: Vec<usize>,
    gbus: Vec<usize>,
    cost: Vec<(f64, f64, f64)>,
    pd: Vec<f64>,
    qd: Vec<f64>,
    base: f64,
    xmin: Vec<f64>,
    xmax: Vec<f64>,
}

impl AcProblem {
    pub fn new(case: &NetworkCase) -> Self {
        let net = PolarNetwork::new(case);
        let nb = net.nb;
        let base = case.base_mva;
        let lookup = case.bus_lookup();
        let gens: Vec<usize> = (0..case.generators.len())
            .filter(|&k| case.generators[k].status)
            .collect();
        let ng = gens.len();
        let gbus = gens.iter().map(|&k| lookup[&case.generators[k].bus]).collect();
        let cost = gens.iter().map(|&k| case.costs[k].quadratic()).collect();

        let n = 2 * nb + 2 * ng;
        let mut xmin = vec![f64::NEG_INFINITY; n];
        let mut xmax = vec![f64::INFINITY; n];
        let slack = case.slack_index();
        xmin[slack] = case.buses[slack].theta0;
        xmax[slack] = case.buses[slack].theta0;
        for (i, b) in case.buses.iter().enumerate() {
            xmin[nb + i] = b.vmin;
            xmax[nb + i] = b.vmax;
        }
        for (j, &k) in gens.iter().enumerate() {
            let g = &case.generators[k];
            xmin[2 * nb + j] = g.pmin / base;
            xmax[2 * nb + j] = g.pmax / base;
            xmin[2 * nb + ng + j] = g.qmin / base;
            xmax[2 * nb + ng + j] = g.qmax / base;
        }
        AcProblem {
            net,
            limited: limited_branches(case),
            nb,
            gens,
            gbus,
            cost,
            pd: case.buses.iter().map(|b| b.pd / base).collect(),
            qd: case.buses.iter().map(|b| b.qd / base).collect(),
            base,
            xmin,
            xmax,
        }
    }

    pub fn ng(&self) -> usize {
        self.gens.len()
    }

    pub fn cost(&self, pg_pu: &[f64]) -> f64 {
        self.cost
            .iter()
            .zip(pg_pu)
            .map(|(&(c2, c1, c0), &p)| {
                let mw = p * self.base;
                (c2 * mw + c1) * mw + c0
            })
            .sum()
    }

    fn end_terms(
        &self,
        br: &LimitedBranch,
        va: &[f64],
        vm: &[f64],
    ) -> [([usize; 4], super::network::Pair, [f64; 4]); 2] {
        let nb = self.nb;
        let (f, t) = (br.from, br.to);
        let idx_f = [f, t, nb + f, nb + t];
        let idx_t = [t, f, nb + t, nb + f];
        [
            (idx_f, end_flow(&br.f, vm[f], vm[t], va[f] - va[t]), br.f),
            (idx_t, end_flow(&br.t, vm[t], vm[f], va[t] - va[f]), br.t),
        ]
    }
}

impl Nlp for AcProblem {
    fn dim(&self) -> usize {
        2 * self.nb + 2 * self.ng()
    }

    fn n_eq(&self) -> usize {
        2 * self.nb
    }

    fn n_ineq(&self) -> usize {
        2 * self.limited.len()
    }

    fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.xmin, &self.xmax)
    }

    fn eval(&self, x: &[f64], out: &mut Eval) {
        let (nb, ng) = (self.nb, self.ng());
        let (va, rest) = x.split_at(nb);
        let (vm, rest) = rest.split_at(nb);
        let (pg, qg) = rest.split_at(ng);

        out.f = self.cost(pg);
        out.df.iter_mut().for_each(|d| *d = 0.0);
        for (j, &(c2, c1, _)) in self.cost.iter().enumerate() {
            out.df[2 * nb + j] = (2.0 * c2 * pg[j] * self.base + c1) * self.base;
        }

        let inj = self.net.injections(va, vm);
        for i in 0..nb {
            out.g[i] = inj.p[i] + self.pd[i];
            out.g[nb + i] = inj.q[i] + self.qd[i];
        }
        for (j, &i) in self.gbus.iter().enumerate() {
            out.g[i] -= pg[j];
            out.g[nb + i] -= qg[j];
            out.jg[(i, 2 * nb + j)] = -1.0;
            out.jg[(nb + i, 2 * nb + ng + j)] = -1.0;
        }
        let jg = &mut out.jg;
        self.net
            .jacobian(va, vm, |q, i, v, d| jg[(i + if q { nb } else { 0 }, v)] += d);

        for (l, br) in self.limited.iter().enumerate() {
            for (e, (idx, t, _)) in self.end_terms(br, va, vm).iter().enumerate() {
                let r = 2 * l + e;
                out.h[r] = t.p * t.p + t.q * t.q - br.smax2;
                for s in 0..4 {
                    out.jh[(r, idx[s])] += 2.0 * (t.p * t.dp[s] + t.q * t.dq[s]);
                }
            }
        }
    }

    fn hessian(&self, x: &[f64], cost_mult: f64, lam: &[f64], mu: &[f64], out: &mut Mat<f64>) {
        let nb = self.nb;
        let (va, rest) = x.split_at(nb);
        let vm = &rest[..nb];
        for (j, &(c2, _, _)) in self.cost.iter().enumerate() {
            out[(2 * nb + j, 2 * nb + j)] += cost_mult * 2.0 * c2 * self.base * self.base;
        }
        self.net
            .hessian(va, vm, &lam[..nb], &lam[nb..], |r, c, v| out[(r, c)] += v);
        for (l, br) in self.limited.iter().enumerate() {
            for (e, (idx, t, y)) in self.end_terms(br, va, vm).iter().enumerate() {
                let m = mu[2 * l + e];
                if m == 0.0 {
                    continue;
                }
                let (a, b) = (vm[idx[0]], vm[idx[1]]);
                let th = va[idx[0]] - va[idx[1]];
                let h2 = end_flow_hessian(y, a, b, th, 2.0 * m * t.p, 2.0 * m * t.q);
                for r in 0..4 {
                    for c in 0..4 {
                        let v = h2[r][c] + 2.0 * m * (t.dp[r] * t.dp[c] + t.dq[r] * t.dq[c]);
                        out[(idx[r], idx[c])] += v;
                    }
                }
            }
        }
    }
}
