//! MATPOWER case model, parser, writer and nodal admittance matrix.
//!
//! Only the version-2 table subset is supported: `baseMVA`, `bus`, `gen`,
//! `branch` and polynomial `gencost` rows of degree at most two. Powers are
//! kept in MW/MVAr as in the file; angles are converted to radians.

mod parser;
mod writer;

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parser::parse_case;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CaseError {
    #[error("syntax error on line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{table} row {row}: {message}")]
    Semantic {
        table: &'static str,
        row: usize,
        message: String,
    },
    #[error("invalid case: {0}")]
    Invalid(String),
    #[error("io error reading {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusType {
    Pq,
    Pv,
    Slack,
}

impl BusType {
    pub fn code(self) -> u8 {
        match self {
            BusType::Pq => 1,
            BusType::Pv => 2,
            BusType::Slack => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: u32,
    pub bus_type: BusType,
    /// Active demand, MW.
    pub pd: f64,
    /// Reactive demand, MVAr.
    pub qd: f64,
    /// Shunt conductance, MW consumed at 1 pu.
    pub gs: f64,
    /// Shunt susceptance, MVAr injected at 1 pu.
    pub bs: f64,
    pub area: u32,
    /// Initial voltage magnitude, pu (clamped into `[vmin, vmax]` on parse).
    pub v0: f64,
    /// Initial voltage angle, rad.
    pub theta0: f64,
    pub base_kv: f64,
    pub zone: u32,
    pub vmax: f64,
    pub vmin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: u32,
    pub pg: f64,
    pub qg: f64,
    pub qmax: f64,
    pub qmin: f64,
    /// Voltage magnitude setpoint, pu.
    pub vg: f64,
    pub mbase: f64,
    pub status: bool,
    pub pmax: f64,
    pub pmin: f64,
    /// Set by the experiment scenario, never read from the file.
    #[serde(default)]
    pub is_renewable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: u32,
    pub to: u32,
    pub r: f64,
    pub x: f64,
    /// Total line charging susceptance, pu.
    pub b: f64,
    /// Long-term rating, MVA. Zero means unlimited.
    pub rate_a: f64,
    pub rate_b: f64,
    pub rate_c: f64,
    /// Off-nominal turns ratio; 1.0 when the file gives 0.
    pub tap: f64,
    /// Phase shift, rad.
    pub shift: f64,
    pub status: bool,
    /// Angle difference limits kept in degrees; not enforced by the OPF.
    pub angmin: f64,
    pub angmax: f64,
}

/// Polynomial generator cost, coefficients highest order first, in $/h for
/// MW inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenCost {
    pub startup: f64,
    pub shutdown: f64,
    pub coeffs: Vec<f64>,
}

impl GenCost {
    pub fn zero() -> Self {
        GenCost {
            startup: 0.0,
            shutdown: 0.0,
            coeffs: vec![0.0, 0.0, 0.0],
        }
    }

    /// `(c2, c1, c0)` with missing leading coefficients as zero.
    pub fn quadratic(&self) -> (f64, f64, f64) {
        let mut c = [0.0; 3];
        let n = self.coeffs.len();
        for (k, v) in self.coeffs.iter().enumerate() {
            c[3 - n + k] = *v;
        }
        (c[0], c[1], c[2])
    }

    pub fn eval(&self, p_mw: f64) -> f64 {
        let (c2, c1, c0) = self.quadratic();
        (c2 * p_mw + c1) * p_mw + c0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCase {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub generators: Vec<Generator>,
    pub branches: Vec<Branch>,
    pub costs: Vec<GenCost>,
}

impl NetworkCase {
    /// Map from bus id to its row position.
    pub fn bus_lookup(&self) -> HashMap<u32, usize> {
        self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect()
    }

    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn slack_index(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.bus_type == BusType::Slack)
            .expect("validated case has a slack bus")
    }

    pub fn total_load_mw(&self) -> f64 {
        self.buses.iter().map(|b| b.pd).sum()
    }

    /// Total objective of a dispatch given in MW, one entry per generator.
    pub fn dispatch_cost(&self, pg_mw: &[f64]) -> f64 {
        self.generators
            .iter()
            .zip(&self.costs)
            .zip(pg_mw)
            .filter(|((g, _), _)| g.status)
            .map(|((_, c), p)| c.eval(*p))
            .sum()
    }

    /// Serialize back to MATPOWER text. Parsing the result reproduces this
    /// model field by field.
    pub fn to_matpower(&self) -> String {
        writer::write_case(self)
    }

    /// Check every model invariant. `parse_case` calls this; code that edits a
    /// case in place should call it again.
    pub fn validate(&self) -> Result<(), CaseError> {
        if !(self.base_mva > 0.0) {
            return Err(CaseError::Invalid(format!(
                "baseMVA must be positive, got {}",
                self.base_mva
            )));
        }
        let mut seen = HashMap::new();
        for (i, b) in self.buses.iter().enumerate() {
            if seen.insert(b.id, i).is_some() {
                return Err(sem("bus", i, format!("duplicate bus id {}", b.id)));
            }
            if !(b.vmin > 0.0) || b.vmin > b.vmax {
                return Err(sem(
                    "bus",
                    i,
                    format!("voltage bounds [{}, {}] are invalid", b.vmin, b.vmax),
                ));
            }
            if b.v0 < b.vmin || b.v0 > b.vmax {
                return Err(sem(
                    "bus",
                    i,
                    format!("initial voltage {} outside [{}, {}]", b.v0, b.vmin, b.vmax),
                ));
            }
        }
        let slack = self.buses.iter().filter(|b| b.bus_type == BusType::Slack).count();
        if slack != 1 {
            return Err(CaseError::Invalid(format!(
                "expected exactly one slack bus, found {slack}"
            )));
        }
        for (i, g) in self.generators.iter().enumerate() {
            if !seen.contains_key(&g.bus) {
                return Err(sem("gen", i, format!("references undefined bus {}", g.bus)));
            }
            if g.pmin > g.pmax {
                return Err(sem("gen", i, format!("pmin {} > pmax {}", g.pmin, g.pmax)));
            }
            if g.qmin > g.qmax {
                return Err(sem("gen", i, format!("qmin {} > qmax {}", g.qmin, g.qmax)));
            }
        }
        for (i, br) in self.branches.iter().enumerate() {
            for end in [br.from, br.to] {
                if !seen.contains_key(&end) {
                    return Err(sem("branch", i, format!("references undefined bus {end}")));
                }
            }
            if br.r == 0.0 && br.x == 0.0 {
                return Err(sem("branch", i, "zero series impedance".into()));
            }
            if !(br.tap > 0.0) {
                return Err(sem("branch", i, format!("tap ratio {} must be positive", br.tap)));
            }
        }
        if self.costs.len() != self.generators.len() {
            return Err(CaseError::Invalid(format!(
                "{} gencost rows for {} generators",
                self.costs.len(),
                self.generators.len()
            )));
        }
        for (i, c) in self.costs.iter().enumerate() {
            if c.coeffs.is_empty() || c.coeffs.len() > 3 {
                return Err(sem(
                    "gencost",
                    i,
                    format!("polynomial with {} coefficients unsupported", c.coeffs.len()),
                ));
            }
            if c.quadratic().0 < 0.0 {
                return Err(sem("gencost", i, "negative quadratic coefficient".into()));
            }
        }
        Ok(())
    }
}

fn sem(table: &'static str, row: usize, message: String) -> CaseError {
    CaseError::Semantic {
        table,
        row: row + 1,
        message,
    }
}

/// Dense complex matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(n: usize) -> Self {
        ComplexMatrix {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    fn add(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] += v;
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// Two-port admittances of one in-service branch (pi model with tap).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchAdmittance {
    pub from: usize,
    pub to: usize,
    pub yff: Complex64,
    pub yft: Complex64,
    pub ytf: Complex64,
    pub ytt: Complex64,
}

pub fn branch_admittance(br: &Branch, from: usize, to: usize) -> BranchAdmittance {
    let ys = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
    let ytt = ys + Complex64::new(0.0, br.b / 2.0);
    let tap = Complex64::from_polar(br.tap, br.shift);
    BranchAdmittance {
        from,
        to,
        yff: ytt / (br.tap * br.tap),
        yft: -ys / tap.conj(),
        ytf: -ys / tap,
        ytt,
    }
}

/// Per-branch two-port admittances for in-service branches, in row order.
pub fn branch_admittances(case: &NetworkCase) -> Vec<(usize, BranchAdmittance)> {
    let lookup = case.bus_lookup();
    case.branches
        .iter()
        .enumerate()
        .filter(|(_, br)| br.status)
        .map(|(k, br)| (k, branch_admittance(br, lookup[&br.from], lookup[&br.to])))
        .collect()
}

/// Nodal admittance matrix in per unit, bus shunts included.
pub fn admittance_matrix(case: &NetworkCase) -> ComplexMatrix {
    let n = case.buses.len();
    let mut y = ComplexMatrix::zeros(n);
    for (_, a) in branch_admittances(case) {
        y.add(a.from, a.from, a.yff);
        y.add(a.from, a.to, a.yft);
        y.add(a.to, a.from, a.ytf);
        y.add(a.to, a.to, a.ytt);
    }
    for (i, b) in case.buses.iter().enumerate() {
        y.add(i, i, Complex64::new(b.gs, b.bs) / case.base_mva);
    }
    y
}

/// Bundled test systems.
pub mod fixtures {
    use super::{parse_case, NetworkCase};

    pub const CASE14: &str = include_str!("../../data/case14.m");
    pub const CASE_IEEE30: &str = include_str!("../../data/case_ieee30.m");

    /// IEEE 14-bus system (MATPOWER `case14`).
    pub fn case14() -> NetworkCase {
        parse_case(CASE14).expect("bundled case14 parses")
    }

    /// Classic IEEE 30-bus system with 21 loads and no branch limits.
    pub fn case_ieee30() -> NetworkCase {
        parse_case(CASE_IEEE30).expect("bundled case_ieee30 parses")
    }

    /// Resolve `builtin:<name>` references used by experiment configs.
    pub fn builtin(name: &str) -> Option<NetworkCase> {
        match name {
            "case14" => Some(case14()),
            "case_ieee30" | "case30" => Some(case_ieee30()),
            _ => None,
        }
    }
}

/// Read a case from `path`, or a bundled case for `builtin:<name>`.
pub fn load_case(path: &str) -> Result<NetworkCase, CaseError> {
    if let Some(name) = path.strip_prefix("builtin:") {
        return fixtures::builtin(name).ok_or_else(|| CaseError::Invalid(format!("unknown builtin case {name}")));
    }
    let text = std::fs::read_to_string(path).map_err(|e| CaseError::Io {
        path: path.to_string(),
        message: e.to_string(),
    })?;
    parse_case(&text)
}
