//! Independent feasibility check of a solution using complex phasors.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::OpfSolution;
use crate::case_io::{admittance_matrix, branch_admittances, NetworkCase};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// Largest nodal active or reactive power mismatch, pu.
    pub balance: f64,
    /// Largest bound violation as a fraction of the variable's range
    /// (in pu for variables with a zero-width range).
    pub bounds: f64,
    /// Largest apparent-power overload on a rated branch end, pu.
    pub flow: f64,
}

/// Recompute `S = V ∘ conj(Y·V)` from the solution and compare with the
/// net scheduled injections.
pub fn check_solution(case: &NetworkCase, sol: &OpfSolution) -> Residuals {
    let base = case.base_mva;
    let y = admittance_matrix(case);
    let n = y.dim();
    let v: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(sol.vm[i], sol.va[i])).collect();

    let mut sched: Vec<Complex64> = case.buses.iter().map(|b| -Complex64::new(b.pd, b.qd) / base).collect();
    let lookup = case.bus_lookup();
    for (k, g) in case.generators.iter().enumerate() {
        if g.status {
            sched[lookup[&g.bus]] += Complex64::new(sol.pg[k], sol.qg[k]) / base;
        }
    }
    let mut balance = 0.0f64;
    for i in 0..n {
        let current: Complex64 = (0..n).map(|k| y.get(i, k) * v[k]).sum();
        let s = v[i] * current.conj();
        let d = s - sched[i];
        balance = balance.max(d.re.abs()).max(d.im.abs());
    }

    let viol = |x: f64, lo: f64, hi: f64| {
        let over = (x - hi).max(lo - x).max(0.0);
        let range = hi - lo;
        if range > 0.0 && range.is_finite() {
            over / range
        } else {
            over
        }
    };
    let mut bounds = 0.0f64;
    for (i, b) in case.buses.iter().enumerate() {
        bounds = bounds.max(viol(sol.vm[i], b.vmin, b.vmax));
    }
    for (k, g) in case.generators.iter().enumerate().filter(|(_, g)| g.status) {
        bounds = bounds.max(viol(sol.pg[k] / base, g.pmin / base, g.pmax / base));
        bounds = bounds.max(viol(sol.qg[k] / base, g.qmin / base, g.qmax / base));
    }

    let mut flow = 0.0f64;
    for (k, a) in branch_admittances(case) {
        let rate = case.branches[k].rate_a;
        if rate <= 0.0 {
            continue;
        }
        let (vf, vt) = (v[a.from], v[a.to]);
        let sf = vf * (a.yff * vf + a.yft * vt).conj();
        let st = vt * (a.ytf * vf + a.ytt * vt).conj();
        flow = flow.max(sf.norm() - rate / base).max(st.norm() - rate / base);
    }
    Residuals {
        balance,
        bounds,
        flow: flow.max(0.0),
    }
}
