use std::collections::HashMap;

use super::{Branch, Bus, BusType, CaseError, GenCost, Generator, NetworkCase};

const BUS_COLS: usize = 13;
const GEN_COLS: usize = 10;
const BRANCH_COLS: usize = 11;

struct Row {
    line: usize,
    values: Vec<f64>,
}

enum Value {
    Scalar { line: usize, text: String },
    Matrix(Vec<Row>),
}

/// Parse MATPOWER case text into a validated model.
pub fn parse_case(text: &str) -> Result<NetworkCase, CaseError> {
    let (name, fields) = scan(text)?;

    let base_mva = match fields.get("baseMVA") {
        Some(Value::Scalar { line, text }) => parse_number(text, *line)?,
        Some(Value::Matrix(_)) => return Err(CaseError::Invalid("baseMVA must be a scalar".into())),
        None => return Err(CaseError::Invalid("missing mpc.baseMVA".into())),
    };
    if let Some(Value::Scalar { line, text }) = fields.get("version") {
        let v = text.trim_matches(|c| c == '\'' || c == '"');
        if v != "2" {
            return Err(CaseError::Syntax {
                line: *line,
                message: format!("unsupported case format version {v:?}"),
            });
        }
    }

    let bus_rows = table(&fields, "bus")?;
    let gen_rows = table(&fields, "gen")?;
    let branch_rows = table(&fields, "branch")?;
    let cost_rows = table(&fields, "gencost")?;

    let mut buses = Vec::with_capacity(bus_rows.len());
    for (i, r) in bus_rows.iter().enumerate() {
        need(r, BUS_COLS, "bus")?;
        let v = &r.values;
        let bus_type = match v[1] {
            1.0 => BusType::Pq,
            2.0 => BusType::Pv,
            3.0 => BusType::Slack,
            t => return Err(semantic("bus", i, format!("unsupported bus type {t}"))),
        };
        let (vmax, vmin) = (v[11], v[12]);
        buses.push(Bus {
            id: label(v[0], "bus", i)?,
            bus_type,
            pd: v[2],
            qd: v[3],
            gs: v[4],
            bs: v[5],
            area: label(v[6], "bus", i)?,
            // Published cases sometimes carry solved voltages slightly above
            // vmax; the initial point is only a starting guess.
            v0: if vmin <= vmax { v[7].clamp(vmin, vmax) } else { v[7] },
            theta0: v[8].to_radians(),
            base_kv: v[9],
            zone: label(v[10], "bus", i)?,
            vmax,
            vmin,
        });
    }

    let mut generators = Vec::with_capacity(gen_rows.len());
    for (i, r) in gen_rows.iter().enumerate() {
        need(r, GEN_COLS, "gen")?;
        let v = &r.values;
        generators.push(Generator {
            bus: label(v[0], "gen", i)?,
            pg: v[1],
            qg: v[2],
            qmax: v[3],
            qmin: v[4],
            vg: v[5],
            mbase: v[6],
            status: v[7] > 0.0,
            pmax: v[8],
            pmin: v[9],
            is_renewable: false,
        });
    }

    let mut branches = Vec::with_capacity(branch_rows.len());
    for (i, r) in branch_rows.iter().enumerate() {
        need(r, BRANCH_COLS, "branch")?;
        let v = &r.values;
        branches.push(Branch {
            from: label(v[0], "branch", i)?,
            to: label(v[1], "branch", i)?,
            r: v[2],
            x: v[3],
            b: v[4],
            rate_a: v[5],
            rate_b: v[6],
            rate_c: v[7],
            tap: if v[8] == 0.0 { 1.0 } else { v[8] },
            shift: v[9].to_radians(),
            status: v[10] > 0.0,
            angmin: v.get(11).copied().unwrap_or(-360.0),
            angmax: v.get(12).copied().unwrap_or(360.0),
        });
    }

    let mut costs = Vec::with_capacity(cost_rows.len());
    for (i, r) in cost_rows.iter().enumerate() {
        need(r, 4, "gencost")?;
        let v = &r.values;
        match v[0] {
            2.0 => {}
            1.0 => {
                return Err(semantic(
                    "gencost",
                    i,
                    "piecewise-linear cost model (type 1) is not supported".into(),
                ))
            }
            m => return Err(semantic("gencost", i, format!("unknown cost model type {m}"))),
        }
        let n = v[3];
        if n.fract() != 0.0 || !(1.0..=3.0).contains(&n) {
            return Err(semantic(
                "gencost",
                i,
                format!("polynomial with {n} coefficients is not supported (degree must be at most 2)"),
            ));
        }
        let n = n as usize;
        need(r, 4 + n, "gencost")?;
        costs.push(GenCost {
            startup: v[1],
            shutdown: v[2],
            coeffs: v[4..4 + n].to_vec(),
        });
    }

    let case = NetworkCase {
        name,
        base_mva,
        buses,
        generators,
        branches,
        costs,
    };
    case.validate()?;
    Ok(case)
}

fn semantic(table: &'static str, row: usize, message: String) -> CaseError {
    CaseError::Semantic {
        table,
        row: row + 1,
        message,
    }
}

fn need(r: &Row, n: usize, table: &str) -> Result<(), CaseError> {
    if r.values.len() < n {
        return Err(CaseError::Syntax {
            line: r.line,
            message: format!("{table} row has {} columns, expected at least {n}", r.values.len()),
        });
    }
    Ok(())
}

fn label(v: f64, table: &'static str, row: usize) -> Result<u32, CaseError> {
    if v.fract() != 0.0 || v < 0.0 || v > u32::MAX as f64 {
        return Err(semantic(table, row, format!("{v} is not a valid integer label")));
    }
    Ok(v as u32)
}

fn table<'a>(fields: &'a HashMap<String, Value>, name: &str) -> Result<&'a [Row], CaseError> {
    match fields.get(name) {
        Some(Value::Matrix(rows)) => Ok(rows),
        Some(Value::Scalar { line, .. }) => Err(CaseError::Syntax {
            line: *line,
            message: format!("mpc.{name} must be a matrix"),
        }),
        None => Err(CaseError::Invalid(format!("missing mpc.{name} table"))),
    }
}

fn parse_number(tok: &str, line: usize) -> Result<f64, CaseError> {
    let t = tok.trim();
    let v = match t {
        "Inf" | "inf" | "+Inf" => f64::INFINITY,
        "-Inf" | "-inf" => f64::NEG_INFINITY,
        _ => t.parse::<f64>().map_err(|_| CaseError::Syntax {
            line,
            message: format!("invalid number {t:?}"),
        })?,
    };
    if v.is_nan() {
        return Err(CaseError::Syntax {
            line,
            message: "NaN is not allowed".into(),
        });
    }
    Ok(v)
}

fn strip_comment(line: &str) -> &str {
    let mut in_quote = false;
    for (i, c) in line.char_indices() {
        match c {
            '\'' => in_quote = !in_quote,
            '%' if !in_quote => return &line[..i],
            _ => {}
        }
    }
    line
}

/// Split the file into `mpc.<field> = <value>` assignments.
fn scan(text: &str) -> Result<(String, HashMap<String, Value>), CaseError> {
    let mut name = String::from("case");
    let mut fields = HashMap::new();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, strip_comment(l)));

    while let Some((lineno, raw)) = lines.next() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("function") {
            if let Some((_, n)) = rest.split_once('=') {
                name = n.trim().trim_end_matches(';').trim().to_string();
            }
            continue;
        }
        let Some((lhs, rhs)) = line.split_once('=') else {
            return Err(CaseError::Syntax {
                line: lineno,
                message: format!("expected an assignment, found {line:?}"),
            });
        };
        let Some(key) = lhs.trim().strip_prefix("mpc.") else {
            return Err(CaseError::Syntax {
                line: lineno,
                message: format!("expected an mpc.<field> assignment, found {:?}", lhs.trim()),
            });
        };
        let key = key.trim().to_string();
        let rhs = rhs.trim();

        if let Some(body) = rhs.strip_prefix('[') {
            let mut rows = Vec::new();
            let mut chunk = body.to_string();
            let mut chunk_line = lineno;
            loop {
                if let Some(end) = chunk.find(']') {
                    push_rows(&chunk[..end], chunk_line, &mut rows)?;
                    let tail = chunk[end + 1..].trim().trim_end_matches(';').trim();
                    if !tail.is_empty() {
                        return Err(CaseError::Syntax {
                            line: chunk_line,
                            message: format!("unexpected text after matrix: {tail:?}"),
                        });
                    }
                    break;
                }
                push_rows(&chunk, chunk_line, &mut rows)?;
                match lines.next() {
                    Some((l, next)) => {
                        chunk = next.to_string();
                        chunk_line = l;
                    }
                    None => {
                        return Err(CaseError::Syntax {
                            line: lineno,
                            message: format!("matrix mpc.{key} is never closed with ']'"),
                        })
                    }
                }
            }
            if let Some(width) = rows.first().map(|r: &Row| r.values.len()) {
                if let Some(bad) = rows.iter().find(|r| r.values.len() != width) {
                    return Err(CaseError::Syntax {
                        line: bad.line,
                        message: format!("row has {} columns but mpc.{key} rows have {width}", bad.values.len()),
                    });
                }
            }
            fields.insert(key, Value::Matrix(rows));
        } else if rhs.starts_with('{') {
            // Cell arrays such as bus names carry nothing the model needs.
            let mut closed = rhs.contains('}');
            while !closed {
                match lines.next() {
                    Some((_, next)) => closed = next.contains('}'),
                    None => {
                        return Err(CaseError::Syntax {
                            line: lineno,
                            message: format!("cell array mpc.{key} is never closed with '}}'"),
                        })
                    }
                }
            }
        } else {
            let text = rhs.trim_end_matches(';').trim().to_string();
            if text.is_empty() {
                return Err(CaseError::Syntax {
                    line: lineno,
                    message: format!("missing value for mpc.{key}"),
                });
            }
            fields.insert(key, Value::Scalar { line: lineno, text });
        }
    }
    Ok((name, fields))
}

fn push_rows(chunk: &str, line: usize, rows: &mut Vec<Row>) -> Result<(), CaseError> {
    for seg in chunk.split(';') {
        let toks: Vec<&str> = seg
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .collect();
        if toks.is_empty() {
            continue;
        }
        let values = toks
            .iter()
            .map(|t| parse_number(t, line))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(Row { line, values });
    }
    Ok(())
}
