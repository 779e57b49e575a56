//! Lossless linear (DC) OPF: angles and active dispatch only.

use faer::Mat;

use super::ipm::{Eval, Nlp};
use crate::case_io::NetworkCase;

pub(crate) struct DcProblem {
    pub nb: usize,
    pub gens: Vec<usize>,
    gbus: Vec<usize>,
    cost: Vec<(f64, f64, f64)>,
    /// Susceptance matrix in adjacency form: `(row, col, value)`.
    bbus: Vec<(usize, usize, f64)>,
    /// Fixed injection per bus: demand, shunt losses and phase-shifter terms.
    fixed: Vec<f64>,
    /// Rated branches: `(from, to, b, shift injection, limit)`.
    limited: Vec<(usize, usize, f64, f64, f64)>,
    base: f64,
    xmin: Vec<f64>,
    xmax: Vec<f64>,
}

impl DcProblem {
    pub fn new(case: &NetworkCase) -> Self {
        let nb = case.buses.len();
        let base = case.base_mva;
        let lookup = case.bus_lookup();
        let gens: Vec<usize> = (0..case.generators.len())
            .filter(|&k| case.generators[k].status)
            .collect();
        let ng = gens.len();
        let mut dense = vec![0.0; nb * nb];
        let mut fixed: Vec<f64> = case.buses.iter().map(|b| (b.pd + b.gs) / base).collect();
        let mut limited = Vec::new();
        for br in case.branches.iter().filter(|br| br.status) {
            let (f, t) = (lookup[&br.from], lookup[&br.to]);
            let b = 1.0 / (br.x * br.tap);
            dense[f * nb + f] += b;
            dense[t * nb + t] += b;
            dense[f * nb + t] -= b;
            dense[t * nb + f] -= b;
            let pfinj = -b * br.shift;
            fixed[f] += pfinj;
            fixed[t] -= pfinj;
            if br.rate_a > 0.0 {
                limited.push((f, t, b, pfinj, br.rate_a / base));
            }
        }
        let bbus = (0..nb * nb)
            .filter(|&k| dense[k] != 0.0)
            .map(|k| (k / nb, k % nb, dense[k]))
            .collect();

        let n = nb + ng;
        let mut xmin = vec![f64::NEG_INFINITY; n];
        let mut xmax = vec![f64::INFINITY; n];
        let slack = case.slack_index();
        xmin[slack] = case.buses[slack].theta0;
        xmax[slack] = case.buses[slack].theta0;
        for (j, &k) in gens.iter().enumerate() {
            xmin[nb + j] = case.generators[k].pmin / base;
            xmax[nb + j] = case.generators[k].pmax / base;
        }
        DcProblem {
            nb,
            gbus: gens.iter().map(|&k| lookup[&case.generators[k].bus]).collect(),
            cost: gens.iter().map(|&k| case.costs[k].quadratic()).collect(),
            gens,
            bbus,
            fixed,
            limited,
            base,
            xmin,
            xmax,
        }
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
}

impl Nlp for DcProblem {
    fn dim(&self) -> usize {
        self.nb + self.gens.len()
    }

    fn n_eq(&self) -> usize {
        self.nb
    }

    fn n_ineq(&self) -> usize {
        2 * self.limited.len()
    }

    fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.xmin, &self.xmax)
    }

    fn eval(&self, x: &[f64], out: &mut Eval) {
        let nb = self.nb;
        let (th, pg) = x.split_at(nb);
        out.f = self.cost(pg);
        out.df.iter_mut().for_each(|d| *d = 0.0);
        for (j, &(c2, c1, _)) in self.cost.iter().enumerate() {
            out.df[nb + j] = (2.0 * c2 * pg[j] * self.base + c1) * self.base;
        }
        out.g.copy_from_slice(&self.fixed);
        for &(r, c, v) in &self.bbus {
            out.g[r] += v * th[c];
            out.jg[(r, c)] = v;
        }
        for (j, &i) in self.gbus.iter().enumerate() {
            out.g[i] -= pg[j];
            out.jg[(i, nb + j)] = -1.0;
        }
        for (l, &(f, t, b, pfinj, smax)) in self.limited.iter().enumerate() {
            let pf = b * (th[f] - th[t]) + pfinj;
            out.h[2 * l] = pf - smax;
            out.h[2 * l + 1] = -pf - smax;
            out.jh[(2 * l, f)] = b;
            out.jh[(2 * l, t)] = -b;
            out.jh[(2 * l + 1, f)] = -b;
            out.jh[(2 * l + 1, t)] = b;
        }
    }

    fn hessian(&self, _x: &[f64], cost_mult: f64, _lam: &[f64], _mu: &[f64], out: &mut Mat<f64>) {
        for (j, &(c2, _, _)) in self.cost.iter().enumerate() {
            out[(self.nb + j, self.nb + j)] += cost_mult * 2.0 * c2 * self.base * self.base;
        }
    }
}
