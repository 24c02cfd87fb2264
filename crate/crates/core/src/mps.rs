//! Free-format MPS reader and writer. Row and column names are the rendered tags.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::lp::{LinearProgram, LpError, Sense, Tag, TagError};

const OBJECTIVE: &str = "obj";
const RHS_SET: &str = "rhs";
const BOUND_SET: &str = "bnd";

#[derive(Debug, Error)]
pub enum MpsError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: bad name `{name}`: {source}")]
    Name {
        line: usize,
        name: String,
        source: TagError,
    },
    #[error(transparent)]
    Lp(#[from] LpError),
}

pub fn write_mps<W: Write>(lp: &LinearProgram, mut out: W) -> io::Result<()> {
    writeln!(out, "NAME {}", lp.name)?;
    writeln!(out, "ROWS")?;
    writeln!(out, " N {OBJECTIVE}")?;
    for row in lp.rows() {
        let s = match row.sense {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        };
        writeln!(out, " {s} {}", row.tag)?;
    }

    let mut by_column: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.num_columns()];
    for &(r, c, v) in lp.entries() {
        by_column[c].push((r, v));
    }
    writeln!(out, "COLUMNS")?;
    for (col, entries) in lp.columns().iter().zip(&by_column) {
        // the objective entry is always written so that empty columns survive a round trip
        writeln!(out, " {} {OBJECTIVE} {:?}", col.tag, col.cost)?;
        for &(r, v) in entries {
            writeln!(out, " {} {} {:?}", col.tag, lp.rows()[r].tag, v)?;
        }
    }

    writeln!(out, "RHS")?;
    for row in lp.rows() {
        if row.rhs != 0.0 {
            writeln!(out, " {RHS_SET} {} {:?}", row.tag, row.rhs)?;
        }
    }

    writeln!(out, "BOUNDS")?;
    for col in lp.columns() {
        let (lo, up) = (col.lower, col.upper);
        let name = &col.tag;
        if lo == up {
            writeln!(out, " FX {BOUND_SET} {name} {lo:?}")?;
            continue;
        }
        if lo == f64::NEG_INFINITY && up == f64::INFINITY {
            writeln!(out, " FR {BOUND_SET} {name}")?;
            continue;
        }
        if lo == f64::NEG_INFINITY {
            writeln!(out, " MI {BOUND_SET} {name}")?;
        } else if lo != 0.0 || up < 0.0 {
            writeln!(out, " LO {BOUND_SET} {name} {lo:?}")?;
        }
        if up.is_finite() {
            writeln!(out, " UP {BOUND_SET} {name} {up:?}")?;
        }
    }
    writeln!(out, "ENDATA")?;
    Ok(())
}

pub fn write_mps_string(lp: &LinearProgram) -> String {
    let mut buf = Vec::new();
    write_mps(lp, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Start,
    Rows,
    Columns,
    Rhs,
    Bounds,
    End,
}

pub fn read_mps<R: BufRead>(input: R) -> Result<LinearProgram, MpsError> {
    let mut lp = LinearProgram::new("");
    let mut section = Section::Start;
    let mut rows: HashMap<String, usize> = HashMap::new();
    let mut cols: HashMap<String, usize> = HashMap::new();
    let mut objective_name = None;
    let mut pending_rhs: Vec<f64> = Vec::new();

    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = n + 1;
        let syntax = |message: String| MpsError::Syntax { line: lineno, message };
        if line.trim().is_empty() || line.starts_with('*') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !line.starts_with(' ') && !line.starts_with('\t') {
            section = match fields[0] {
                "NAME" => {
                    lp.name = fields.get(1).copied().unwrap_or("").to_string();
                    Section::Start
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "RANGES" => return Err(syntax("RANGES section is not supported".into())),
                "ENDATA" => Section::End,
                other => return Err(syntax(format!("unknown section `{other}`"))),
            };
            continue;
        }
        let number = |s: &str| -> Result<f64, MpsError> {
            s.parse::<f64>()
                .map_err(|_| MpsError::Syntax { line: lineno, message: format!("invalid number `{s}`") })
        };
        let tag = |s: &str| -> Result<Tag, MpsError> {
            s.parse::<Tag>().map_err(|source| MpsError::Name {
                line: lineno,
                name: s.to_string(),
                source,
            })
        };
        match section {
            Section::Rows => {
                if fields.len() != 2 {
                    return Err(syntax("ROWS entry needs a type and a name".into()));
                }
                let sense = match fields[0] {
                    "N" => {
                        if objective_name.is_some() {
                            return Err(syntax("more than one objective row".into()));
                        }
                        objective_name = Some(fields[1].to_string());
                        continue;
                    }
                    "L" => Sense::Le,
                    "G" => Sense::Ge,
                    "E" => Sense::Eq,
                    other => return Err(syntax(format!("unknown row type `{other}`"))),
                };
                let r = lp.add_row(tag(fields[1])?, sense, 0.0)?;
                rows.insert(fields[1].to_string(), r);
                pending_rhs.push(0.0);
            }
            Section::Columns => {
                if fields.len() != 3 && fields.len() != 5 {
                    return Err(syntax("COLUMNS entry needs one or two (row, value) pairs".into()));
                }
                let c = match cols.get(fields[0]) {
                    Some(&c) => c,
                    None => {
                        let c = lp.add_column(tag(fields[0])?, 0.0, f64::INFINITY, 0.0)?;
                        cols.insert(fields[0].to_string(), c);
                        c
                    }
                };
                for pair in fields[1..].chunks(2) {
                    let v = number(pair[1])?;
                    if Some(pair[0]) == objective_name.as_deref() {
                        lp.set_cost(c, v);
                    } else {
                        let r = *rows
                            .get(pair[0])
                            .ok_or_else(|| syntax(format!("unknown row `{}`", pair[0])))?;
                        lp.add_entry(r, c, v);
                    }
                }
            }
            Section::Rhs => {
                if fields.len() != 3 && fields.len() != 5 {
                    return Err(syntax("RHS entry needs a set name and (row, value) pairs".into()));
                }
                for pair in fields[1..].chunks(2) {
                    let v = number(pair[1])?;
                    if Some(pair[0]) == objective_name.as_deref() {
                        return Err(syntax("objective constants are not supported".into()));
                    }
                    let r = *rows
                        .get(pair[0])
                        .ok_or_else(|| syntax(format!("unknown row `{}`", pair[0])))?;
                    pending_rhs[r] = v;
                }
            }
            Section::Bounds => {
                if fields.len() < 3 {
                    return Err(syntax("BOUNDS entry too short".into()));
                }
                let c = *cols
                    .get(fields[2])
                    .ok_or_else(|| syntax(format!("unknown column `{}`", fields[2])))?;
                let value = || -> Result<f64, MpsError> {
                    fields
                        .get(3)
                        .ok_or_else(|| syntax(format!("{} bound needs a value", fields[0])))
                        .and_then(|s| number(s))
                };
                let (mut lo, mut up) = (lp.columns()[c].lower, lp.columns()[c].upper);
                match fields[0] {
                    "LO" => lo = value()?,
                    "UP" => up = value()?,
                    "FX" => {
                        lo = value()?;
                        up = lo;
                    }
                    "FR" => {
                        lo = f64::NEG_INFINITY;
                        up = f64::INFINITY;
                    }
                    "MI" => lo = f64::NEG_INFINITY,
                    "PL" => up = f64::INFINITY,
                    other => return Err(syntax(format!("unknown bound type `{other}`"))),
                }
                lp.set_bounds(c, lo, up);
            }
            Section::Start | Section::End => {
                return Err(syntax("data outside of a section".into()));
            }
        }
    }
    if section != Section::End {
        return Err(MpsError::Syntax {
            line: 0,
            message: "missing ENDATA".into(),
        });
    }
    for (r, v) in pending_rhs.into_iter().enumerate() {
        lp.set_rhs(r, v);
    }
    lp.check()?;
    Ok(lp)
}

pub fn read_mps_str(text: &str) -> Result<LinearProgram, MpsError> {
    read_mps(text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::Family;

    fn sample() -> LinearProgram {
        let mut lp = LinearProgram::new("sample");
        let a = lp.add_column(Tag::fixed(Family::Capacity, "a@n"), 0.0, f64::INFINITY, 85810.5).unwrap();
        let b = lp.add_column(Tag::at(Family::Flow, "l1", 0), f64::NEG_INFINITY, f64::INFINITY, 0.0).unwrap();
        let c = lp.add_column(Tag::at(Family::Dispatch, "a@n", 0), 1.5, 2.5, 1e-7).unwrap();
        let d = lp.add_column(Tag::at(Family::Shed, "n", 0), -1.0, -1.0, 0.1).unwrap();
        let r0 = lp.add_row(Tag::at(Family::Balance, "n", 0), Sense::Eq, 80.0).unwrap();
        let r1 = lp.add_row(Tag::at(Family::GenUpper, "a@n", 0), Sense::Le, 0.0).unwrap();
        let r2 = lp.add_row(Tag::fixed(Family::VreDispatched, "system"), Sense::Ge, -3.25).unwrap();
        lp.add_entry(r0, c, 1.0);
        lp.add_entry(r0, b, -1.0);
        lp.add_entry(r1, c, 1.0);
        lp.add_entry(r1, a, -0.123456789012345);
        lp.add_entry(r2, d, 2.0);
        lp
    }

    #[test]
    fn round_trip_is_identity() {
        let lp = sample();
        let text = write_mps_string(&lp);
        let back = read_mps_str(&text).unwrap();
        assert_eq!(back.name, "sample");
        assert_eq!(back.columns(), lp.columns());
        assert_eq!(back.rows(), lp.rows());
        let mut x: Vec<_> = lp.entries().to_vec();
        let mut y: Vec<_> = back.entries().to_vec();
        x.sort_by(|p, q| p.partial_cmp(q).unwrap());
        y.sort_by(|p, q| p.partial_cmp(q).unwrap());
        assert_eq!(x, y);
        assert_eq!(write_mps_string(&back), text);
    }

    #[test]
    fn rejects_unknown_rows_and_ranges() {
        let text = "NAME x\nROWS\n N obj\nCOLUMNS\n cap.a obj 1 balance.n.t0 1\nRHS\nBOUNDS\nENDATA\n";
        assert!(read_mps_str(text).unwrap_err().to_string().contains("unknown row"));
        let text = "NAME x\nROWS\n N obj\nRANGES\nENDATA\n";
        assert!(read_mps_str(text).is_err());
        let text = "NAME x\nROWS\n N obj\n";
        assert!(read_mps_str(text).unwrap_err().to_string().contains("ENDATA"));
    }
}
