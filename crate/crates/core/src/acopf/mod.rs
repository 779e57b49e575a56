//! Deterministic OPF oracle: polar AC-OPF by a primal-dual interior-point
//! method, a lossless DC variant, and Newton-Raphson power flow.

mod ac;
mod dc;
mod ipm;
mod network;
mod pf;
mod residual;

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case_io::{GenCost, NetworkCase};

pub use ipm::{Conditions, SolveStatus};
pub use pf::solve_power_flow;
pub use residual::{check_solution, Residuals};

static ORACLE_CALLS: AtomicU64 = AtomicU64::new(0);

/// Number of `solve_opf` invocations in this process.
pub fn oracle_calls() -> u64 {
    ORACLE_CALLS.load(Ordering::Relaxed)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpfError {
    #[error("input vector has {got} entries, layout expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no renewable generator at bus {0}")]
    MissingRenewable(u32),
    #[error("unknown bus {0} in input layout")]
    UnknownBus(u32),
    #[error("slack bus {0} has no in-service generator")]
    NoSlackGenerator(u32),
    #[error("power flow did not converge after {iterations} iterations (residual {residual:e})")]
    PowerFlowDiverged { iterations: usize, residual: f64 },
    #[error("singular power-flow Jacobian")]
    SingularJacobian,
    #[error("invalid oracle configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    #[default]
    AcIpm,
    DcQp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    /// Power-balance feasibility tolerance, pu.
    pub tol: f64,
    /// Stationarity, complementarity and cost-change tolerance.
    pub opt_tol: f64,
    pub max_iter: usize,
    pub flat_start: bool,
    pub mode: OracleMode,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            tol: 1e-8,
            opt_tol: 1e-6,
            max_iter: 150,
            flat_start: true,
            mode: OracleMode::AcIpm,
        }
    }
}

impl OracleConfig {
    pub fn dc() -> Self {
        OracleConfig {
            mode: OracleMode::DcQp,
            ..Default::default()
        }
    }

    pub(crate) fn check(&self) -> Result<(), OpfError> {
        if !(self.tol > 0.0) || !(self.opt_tol > 0.0) {
            return Err(OpfError::InvalidConfig("tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(OpfError::InvalidConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpfSolution {
    /// Objective, $/h.
    pub cost: f64,
    /// Active output per generator (case order), MW; zero when out of service.
    pub pg: Vec<f64>,
    /// Reactive output per generator, MVAr.
    pub qg: Vec<f64>,
    pub vm: Vec<f64>,
    /// Bus angles, rad.
    pub va: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub status: SolveStatus,
    pub conditions: Conditions,
}

/// Which buses the entries of an input vector refer to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputLayout {
    pub renewable_buses: Vec<u32>,
    pub load_buses: Vec<u32>,
}

impl InputLayout {
    pub fn dim(&self) -> usize {
        self.renewable_buses.len() + 2 * self.load_buses.len()
    }
}

/// Uncertain inputs `[P_r, P_d, Q_d]` in MW/MVAr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputVector {
    pub p_r: Vec<f64>,
    pub p_d: Vec<f64>,
    pub q_d: Vec<f64>,
}

impl InputVector {
    pub fn from_slice(layout: &InputLayout, x: &[f64]) -> Result<Self, OpfError> {
        if x.len() != layout.dim() {
            return Err(OpfError::DimensionMismatch {
                expected: layout.dim(),
                got: x.len(),
            });
        }
        let (r, nl) = (layout.renewable_buses.len(), layout.load_buses.len());
        Ok(InputVector {
            p_r: x[..r].to_vec(),
            p_d: x[r..r + nl].to_vec(),
            q_d: x[r + nl..].to_vec(),
        })
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.p_r.len() + self.p_d.len() + self.q_d.len());
        v.extend(&self.p_r);
        v.extend(&self.p_d);
        v.extend(&self.q_d);
        v
    }

    /// The input vector describing `case` as it stands.
    pub fn from_case(case: &NetworkCase, layout: &InputLayout) -> Result<Self, OpfError> {
        let mut p_r = Vec::new();
        for &bus in &layout.renewable_buses {
            let k = renewable_at(case, bus)?;
            p_r.push(case.generators[k].pmax);
        }
        let mut p_d = Vec::new();
        let mut q_d = Vec::new();
        for &bus in &layout.load_buses {
            let i = case.bus_index(bus).ok_or(OpfError::UnknownBus(bus))?;
            p_d.push(case.buses[i].pd);
            q_d.push(case.buses[i].qd);
        }
        Ok(InputVector { p_r, p_d, q_d })
    }
}

fn renewable_at(case: &NetworkCase, bus: u32) -> Result<usize, OpfError> {
    case.generators
        .iter()
        .position(|g| g.is_renewable && g.bus == bus)
        .ok_or(OpfError::MissingRenewable(bus))
}

/// Copy of `case` with the loads and renewable realizations of `x`.
///
/// Renewable units get `pmax = pg = p_r`, `pmin = 0` and zero cost, so the
/// OPF may curtail but never exceed the realization. Conventional units are
/// left untouched.
pub fn apply_input(case: &NetworkCase, x: &InputVector, layout: &InputLayout) -> Result<NetworkCase, OpfError> {
    let dims = [
        (layout.renewable_buses.len(), x.p_r.len()),
        (layout.load_buses.len(), x.p_d.len()),
        (layout.load_buses.len(), x.q_d.len()),
    ];
    if dims.iter().any(|(a, b)| a != b) {
        return Err(OpfError::DimensionMismatch {
            expected: layout.dim(),
            got: x.p_r.len() + x.p_d.len() + x.q_d.len(),
        });
    }
    let mut out = case.clone();
    for (&bus, &p) in layout.renewable_buses.iter().zip(&x.p_r) {
        let k = renewable_at(&out, bus)?;
        let g = &mut out.generators[k];
        g.pmax = p;
        g.pmin = 0.0;
        g.pg = p;
        out.costs[k] = GenCost::zero();
    }
    for ((&bus, &p), &q) in layout.load_buses.iter().zip(&x.p_d).zip(&x.q_d) {
        let i = out.bus_index(bus).ok_or(OpfError::UnknownBus(bus))?;
        out.buses[i].pd = p;
        out.buses[i].qd = q;
    }
    Ok(out)
}

/// Solve the OPF of `case` with the configured formulation.
///
/// Non-convergence is reported through `converged`/`status`, not as an error.
pub fn solve_opf(case: &NetworkCase, cfg: &OracleConfig) -> Result<OpfSolution, OpfError> {
    ORACLE_CALLS.fetch_add(1, Ordering::Relaxed);
    cfg.check()?;
    let opts = ipm::IpmOptions {
        feastol: cfg.tol,
        opttol: cfg.opt_tol,
        max_iter: cfg.max_iter,
    };
    match cfg.mode {
        OracleMode::AcIpm => Ok(solve_ac(case, cfg, &opts)),
        OracleMode::DcQp => Ok(solve_dc(case, &opts)),
    }
}

fn clamp(v: f64, lo: f64, hi: f64) -> f64 {
    v.max(lo).min(hi)
}

fn solve_ac(case: &NetworkCase, cfg: &OracleConfig, opts: &ipm::IpmOptions) -> OpfSolution {
    let prob = ac::AcProblem::new(case);
    let (nb, ng) = (prob.nb, prob.ng());
    let base = case.base_mva;

    let slack_angle = case.buses[case.slack_index()].theta0;
    let (va0, vm0, pg0, qg0) = match solve_power_flow(case, cfg) {
        Ok(pf) => (pf.va, pf.vm, pf.pg, pf.qg),
        Err(e) => {
            log::debug!("warm-start power flow failed ({e}); using a flat start");
            (
                vec![slack_angle; nb],
                case.buses.iter().map(|b| b.v0).collect(),
                case.generators.iter().map(|g| 0.5 * (g.pmin + g.pmax)).collect(),
                case.generators.iter().map(|g| clamp(0.0, g.qmin, g.qmax)).collect(),
            )
        }
    };
    let (xmin, xmax) = ipm::Nlp::bounds(&prob);
    let mut x0 = Vec::with_capacity(2 * nb + 2 * ng);
    x0.extend(&va0);
    x0.extend(&vm0);
    x0.extend(prob.gens.iter().map(|&k| pg0[k] / base));
    x0.extend(prob.gens.iter().map(|&k| qg0[k] / base));
    for i in nb..x0.len() {
        x0[i] = clamp(x0[i], xmin[i], xmax[i]);
    }

    let r = ipm::solve(&prob, &x0, opts);
    let mut pg = vec![0.0; case.generators.len()];
    let mut qg = vec![0.0; case.generators.len()];
    for (j, &k) in prob.gens.iter().enumerate() {
        pg[k] = r.x[2 * nb + j] * base;
        qg[k] = r.x[2 * nb + ng + j] * base;
    }
    OpfSolution {
        cost: r.f,
        pg,
        qg,
        vm: r.x[nb..2 * nb].to_vec(),
        va: r.x[..nb].to_vec(),
        converged: r.status == SolveStatus::Converged,
        iterations: r.iterations,
        status: r.status,
        conditions: r.conditions,
    }
}

fn solve_dc(case: &NetworkCase, opts: &ipm::IpmOptions) -> OpfSolution {
    let prob = dc::DcProblem::new(case);
    let nb = prob.nb;
    let base = case.base_mva;
    let slack_angle = case.buses[case.slack_index()].theta0;
    let mut x0 = vec![slack_angle; nb];
    for &k in &prob.gens {
        let g = &case.generators[k];
        x0.push(0.5 * (g.pmin + g.pmax) / base);
    }
    let r = ipm::solve(&prob, &x0, opts);
    let mut pg = vec![0.0; case.generators.len()];
    for (j, &k) in prob.gens.iter().enumerate() {
        pg[k] = r.x[nb + j] * base;
    }
    OpfSolution {
        cost: r.f,
        pg,
        qg: vec![0.0; case.generators.len()],
        vm: vec![1.0; nb],
        va: r.x[..nb].to_vec(),
        converged: r.status == SolveStatus::Converged,
        iterations: r.iterations,
        status: r.status,
        conditions: r.conditions,
    }
}
