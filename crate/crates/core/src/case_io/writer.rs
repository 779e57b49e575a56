use std::fmt::Write;

use super::NetworkCase;

pub(super) fn write_case(case: &NetworkCase) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "function mpc = {}", case.name);
    s.push_str("mpc.version = '2';\n");
    let _ = writeln!(s, "mpc.baseMVA = {};", num(case.base_mva));

    s.push_str("\n%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin\nmpc.bus = [\n");
    for b in &case.buses {
        row(
            &mut s,
            &[
                b.id as f64,
                b.bus_type.code() as f64,
                b.pd,
                b.qd,
                b.gs,
                b.bs,
                b.area as f64,
                b.v0,
                degrees(b.theta0),
                b.base_kv,
                b.zone as f64,
                b.vmax,
                b.vmin,
            ],
        );
    }
    s.push_str("];\n\n%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\nmpc.gen = [\n");
    for g in &case.generators {
        row(
            &mut s,
            &[
                g.bus as f64,
                g.pg,
                g.qg,
                g.qmax,
                g.qmin,
                g.vg,
                g.mbase,
                flag(g.status),
                g.pmax,
                g.pmin,
            ],
        );
    }
    s.push_str(
        "];\n\n%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax\nmpc.branch = [\n",
    );
    for br in &case.branches {
        row(
            &mut s,
            &[
                br.from as f64,
                br.to as f64,
                br.r,
                br.x,
                br.b,
                br.rate_a,
                br.rate_b,
                br.rate_c,
                br.tap,
                degrees(br.shift),
                flag(br.status),
                br.angmin,
                br.angmax,
            ],
        );
    }
    s.push_str("];\n\n%\t2\tstartup\tshutdown\tn\tc(n-1)\t...\tc0\nmpc.gencost = [\n");
    for c in &case.costs {
        let mut v = vec![2.0, c.startup, c.shutdown, c.coeffs.len() as f64];
        v.extend(&c.coeffs);
        row(&mut s, &v);
    }
    s.push_str("];\n");
    s
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn row(s: &mut String, values: &[f64]) {
    s.push('\t');
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push('\t');
        }
        s.push_str(&num(*v));
    }
    s.push_str(";\n");
}

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "Inf".into()
    } else if v == f64::NEG_INFINITY {
        "-Inf".into()
    } else {
        // Rust's shortest round-trip formatting; reparses to the same bits.
        format!("{v}")
    }
}

/// A degree value whose `to_radians` reproduces `rad` exactly, so angles
/// survive a write/parse round trip bit for bit.
fn degrees(rad: f64) -> f64 {
    let d = rad.to_degrees();
    if d.to_radians() == rad {
        return d;
    }
    let mut up = d;
    let mut down = d;
    for _ in 0..64 {
        up = up.next_up();
        down = down.next_down();
        if up.to_radians() == rad {
            return up;
        }
        if down.to_radians() == rad {
            return down;
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::super::{fixtures, parse_case};
    use super::degrees;

    #[test]
    fn fixtures_round_trip() {
        for case in [fixtures::case14(), fixtures::case_ieee30()] {
            let again = parse_case(&case.to_matpower()).unwrap();
            assert_eq!(case, again);
        }
    }

    #[test]
    fn angle_preimage() {
        for r in [0.1_f64, -0.2732, 1e-3, 3.0, -0.5235987755982988] {
            assert_eq!(degrees(r).to_radians(), r);
        }
    }
}
