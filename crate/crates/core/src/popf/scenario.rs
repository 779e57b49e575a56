//! Renewable scenario construction and the input uncertainty box.

use serde::{Deserialize, Serialize};

use super::PopfError;
use crate::acopf::InputLayout;
use crate::case_io::{GenCost, Generator, NetworkCase};

/// Renewable units to add to a base case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewableScenario {
    pub buses: Vec<u32>,
    /// Total renewable capacity as a percentage of the base-case active load,
    /// split equally between the buses.
    pub penetration: f64,
}

/// Box uncertainty `[x_lower, x_upper]` over `[P_r, P_d, Q_d]` (MW/MVAr).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySpec {
    pub layout: InputLayout,
    /// Nominal input, the centre of the box.
    pub base: Vec<f64>,
    pub x_lower: Vec<f64>,
    pub x_upper: Vec<f64>,
    pub load_fraction: f64,
    pub renewable_fraction: f64,
}

impl UncertaintySpec {
    pub fn dim(&self) -> usize {
        self.base.len()
    }

    pub fn renewable_buses(&self) -> &[u32] {
        &self.layout.renewable_buses
    }

    pub fn load_buses(&self) -> &[u32] {
        &self.layout.load_buses
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(&self.x_lower)
                .zip(&self.x_upper)
                .all(|((v, lo), hi)| v >= lo && v <= hi)
    }

    /// True for coordinates that carry a renewable realization.
    pub fn is_renewable_coord(&self, k: usize) -> bool {
        k < self.layout.renewable_buses.len()
    }
}

/// Case with zero-cost renewable units appended at `scenario.buses`.
///
/// Each unit gets capacity `penetration/100 · total load / n` and is
/// dispatched at half its capacity in the nominal case. Units have no
/// reactive capability.
pub fn add_renewables(case: &NetworkCase, scenario: &RenewableScenario) -> Result<NetworkCase, PopfError> {
    if !(scenario.penetration >= 0.0) {
        return Err(PopfError::Scenario("penetration must be nonnegative".into()));
    }
    let mut out = case.clone();
    if scenario.buses.is_empty() {
        return Ok(out);
    }
    let cap = scenario.penetration / 100.0 * case.total_load_mw() / scenario.buses.len() as f64;
    for (n, &bus) in scenario.buses.iter().enumerate() {
        let i = case
            .bus_index(bus)
            .ok_or_else(|| PopfError::Scenario(format!("renewable bus {bus} not in case")))?;
        if scenario.buses[..n].contains(&bus) {
            return Err(PopfError::Scenario(format!("renewable bus {bus} listed twice")));
        }
        out.generators.push(Generator {
            bus,
            pg: 0.5 * cap,
            qg: 0.0,
            qmax: 0.0,
            qmin: 0.0,
            vg: case.buses[i].v0,
            mbase: case.base_mva,
            status: true,
            pmax: cap,
            pmin: 0.0,
            is_renewable: true,
        });
        out.costs.push(GenCost::zero());
    }
    Ok(out)
}

/// Box around the nominal state of `case`: every bus with nonzero demand
/// varies by `±load_fraction`, every renewable unit by `±renewable_fraction`
/// around its nominal output (so `1.0` spans `[0, capacity]`).
pub fn uncertainty_box(
    case: &NetworkCase,
    load_fraction: f64,
    renewable_fraction: f64,
) -> Result<UncertaintySpec, PopfError> {
    for (name, f) in [
        ("load_fraction", load_fraction),
        ("renewable_fraction", renewable_fraction),
    ] {
        if !(0.0..=1.0).contains(&f) {
            return Err(PopfError::Scenario(format!("{name} must lie in [0, 1], got {f}")));
        }
    }
    let renewables: Vec<&Generator> = case.generators.iter().filter(|g| g.is_renewable).collect();
    let layout = InputLayout {
        renewable_buses: renewables.iter().map(|g| g.bus).collect(),
        load_buses: case
            .buses
            .iter()
            .filter(|b| b.pd != 0.0 || b.qd != 0.0)
            .map(|b| b.id)
            .collect(),
    };
    let mut base = Vec::with_capacity(layout.dim());
    let mut fractions = Vec::with_capacity(layout.dim());
    for g in &renewables {
        base.push(g.pg);
        fractions.push(renewable_fraction);
    }
    for &bus in &layout.load_buses {
        base.push(case.buses[case.bus_index(bus).expect("load bus")].pd);
        fractions.push(load_fraction);
    }
    for &bus in &layout.load_buses {
        base.push(case.buses[case.bus_index(bus).expect("load bus")].qd);
        fractions.push(load_fraction);
    }
    let (x_lower, x_upper) = base
        .iter()
        .zip(&fractions)
        .map(|(b, f)| {
            let (a, c) = (b * (1.0 - f), b * (1.0 + f));
            (a.min(c), a.max(c))
        })
        .unzip();
    Ok(UncertaintySpec {
        layout,
        base,
        x_lower,
        x_upper,
        load_fraction,
        renewable_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case_io::fixtures;

    #[test]
    fn capacity_matches_penetration() {
        let case = fixtures::case14();
        let sc = RenewableScenario {
            buses: vec![7, 9, 14],
            penetration: 12.0,
        };
        let out = add_renewables(&case, &sc).unwrap();
        let cap: f64 = out.generators.iter().filter(|g| g.is_renewable).map(|g| g.pmax).sum();
        assert!((cap / case.total_load_mw() * 100.0 - 12.0).abs() < 1e-12);
        assert_eq!(out.generators.len(), case.generators.len() + 3);
    }

    #[test]
    fn full_renewable_fraction_spans_zero_to_capacity() {
        let case = add_renewables(
            &fixtures::case14(),
            &RenewableScenario {
                buses: vec![9],
                penetration: 10.0,
            },
        )
        .unwrap();
        let spec = uncertainty_box(&case, 0.1, 1.0).unwrap();
        let cap = case.generators.last().unwrap().pmax;
        assert_eq!(spec.x_lower[0], 0.0);
        assert!((spec.x_upper[0] - cap).abs() < 1e-12);
        assert_eq!(spec.dim(), 1 + 2 * spec.load_buses().len());
        assert!(spec.contains(&spec.base));
    }

    #[test]
    fn rejects_unknown_and_duplicate_buses() {
        let case = fixtures::case14();
        for buses in [vec![99], vec![7, 7]] {
            let sc = RenewableScenario {
                buses,
                penetration: 5.0,
            };
            assert!(add_renewables(&case, &sc).is_err());
        }
        assert!(uncertainty_box(&case, 1.5, 0.0).is_err());
    }
}
