//! Newton-Raphson power flow in polar coordinates.

use faer::prelude::*;
use faer::Mat;

use super::network::PolarNetwork;
use super::{OpfError, OpfSolution, OracleConfig};
use crate::acopf::ipm::{Conditions, SolveStatus};
use crate::case_io::{BusType, NetworkCase};

/// Solve the power flow with the dispatch fixed at the generators' `pg`
/// (PV and slack buses held at their `vg` setpoints). The slack bus absorbs
/// the active mismatch and every generator bus supplies the reactive power
/// it needs, shared equally between its in-service units.
pub fn solve_power_flow(case: &NetworkCase, cfg: &OracleConfig) -> Result<OpfSolution, OpfError> {
    cfg.check()?;
    let net = PolarNetwork::new(case);
    let nb = net.nb;
    let base = case.base_mva;
    let lookup = case.bus_lookup();
    let slack = case.slack_index();

    let mut units_at = vec![Vec::new(); nb];
    for (k, g) in case.generators.iter().enumerate() {
        if g.status {
            units_at[lookup[&g.bus]].push(k);
        }
    }
    if units_at[slack].is_empty() {
        return Err(OpfError::NoSlackGenerator(case.buses[slack].id));
    }
    // PV buses without a running unit fall back to PQ.
    let is_pv: Vec<bool> = (0..nb)
        .map(|i| i != slack && case.buses[i].bus_type == BusType::Pv && !units_at[i].is_empty())
        .collect();

    let mut va = vec![0.0; nb];
    let mut vm = vec![1.0; nb];
    for (i, b) in case.buses.iter().enumerate() {
        if cfg.flat_start {
            va[i] = case.buses[slack].theta0;
        } else {
            va[i] = b.theta0;
            vm[i] = b.v0;
        }
        if i == slack || is_pv[i] {
            vm[i] = case.generators[units_at[i][0]].vg;
        }
    }

    let mut p_spec: Vec<f64> = case.buses.iter().map(|b| -b.pd / base).collect();
    let mut q_spec: Vec<f64> = case.buses.iter().map(|b| -b.qd / base).collect();
    for (i, units) in units_at.iter().enumerate() {
        for &k in units {
            p_spec[i] += case.generators[k].pg / base;
            q_spec[i] += case.generators[k].qg / base;
        }
    }

    // Unknown ordering: angles at non-slack buses, then magnitudes at PQ buses.
    let ang: Vec<usize> = (0..nb).filter(|&i| i != slack).collect();
    let mag: Vec<usize> = (0..nb).filter(|&i| i != slack && !is_pv[i]).collect();
    let mut col_of = vec![usize::MAX; 2 * nb];
    for (c, &i) in ang.iter().enumerate() {
        col_of[i] = c;
    }
    for (c, &i) in mag.iter().enumerate() {
        col_of[nb + i] = ang.len() + c;
    }
    let dim = ang.len() + mag.len();

    let mismatch = |va: &[f64], vm: &[f64]| {
        let inj = net.injections(va, vm);
        let mut f = Vec::with_capacity(dim);
        f.extend(ang.iter().map(|&i| inj.p[i] - p_spec[i]));
        f.extend(mag.iter().map(|&i| inj.q[i] - q_spec[i]));
        f
    };
    let norm = |f: &[f64]| f.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut f = mismatch(&va, &vm);
    let mut iterations = 0;
    while norm(&f) > cfg.tol {
        if iterations == cfg.max_iter {
            return Err(OpfError::PowerFlowDiverged {
                iterations,
                residual: norm(&f),
            });
        }
        iterations += 1;
        let mut jac = Mat::<f64>::zeros(dim, dim);
        net.jacobian(&va, &vm, |q, i, v, d| {
            let row = if q {
                match mag.binary_search(&i) {
                    Ok(r) => ang.len() + r,
                    Err(_) => return,
                }
            } else {
                match ang.binary_search(&i) {
                    Ok(r) => r,
                    Err(_) => return,
                }
            };
            let col = col_of[v];
            if col != usize::MAX {
                jac[(row, col)] += d;
            }
        });
        let rhs = Mat::<f64>::from_fn(dim, 1, |r, _| -f[r]);
        let dx = jac.partial_piv_lu().solve(&rhs);
        if (0..dim).any(|r| !dx[(r, 0)].is_finite()) {
            return Err(OpfError::SingularJacobian);
        }
        for (c, &i) in ang.iter().enumerate() {
            va[i] += dx[(c, 0)];
        }
        for (c, &i) in mag.iter().enumerate() {
            vm[i] += dx[(ang.len() + c, 0)];
        }
        f = mismatch(&va, &vm);
        if !norm(&f).is_finite() {
            return Err(OpfError::PowerFlowDiverged {
                iterations,
                residual: f64::INFINITY,
            });
        }
    }

    let inj = net.injections(&va, &vm);
    let mut pg: Vec<f64> = case
        .generators
        .iter()
        .map(|g| if g.status { g.pg } else { 0.0 })
        .collect();
    let mut qg = vec![0.0; case.generators.len()];
    let first = units_at[slack][0];
    pg[first] = (inj.p[slack] * base + case.buses[slack].pd) - units_at[slack][1..].iter().map(|&k| pg[k]).sum::<f64>();
    for (i, units) in units_at.iter().enumerate() {
        if i == slack || is_pv[i] {
            let total = inj.q[i] * base + case.buses[i].qd;
            for &k in units {
                qg[k] = total / units.len() as f64;
            }
        } else {
            for &k in units {
                qg[k] = case.generators[k].qg;
            }
        }
    }
    Ok(OpfSolution {
        cost: case.dispatch_cost(&pg),
        pg,
        qg,
        vm,
        va,
        converged: true,
        iterations,
        status: SolveStatus::Converged,
        conditions: Conditions {
            feas: norm(&f),
            ..Default::default()
        },
    })
}
