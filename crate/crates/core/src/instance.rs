//! Plain-text instance format.
//!
//! ```text
//! n 4
//! c 1 2 1.0
//! d 1 3 0.5
//! ```
//!
//! Vertices are 1-based. Pairs are sorted on read and repeated pairs are
//! summed. Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::WeightedGraphPair;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn parse(text: &str) -> Result<WeightedGraphPair> {
    let mut n: Option<usize> = None;
    let mut cost = Vec::new();
    let mut demand = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields[0] {
            "n" => {
                if n.is_some() {
                    return Err(parse_err(lineno, "duplicate vertex count line"));
                }
                if fields.len() != 2 {
                    return Err(parse_err(lineno, "expected `n <count>`"));
                }
                let count: usize = fields[1]
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad vertex count `{}`", fields[1])))?;
                if count < 2 {
                    return Err(parse_err(lineno, "vertex count must be at least 2"));
                }
                n = Some(count);
            }
            kind @ ("c" | "d") => {
                let count = n.ok_or_else(|| parse_err(lineno, "edge before `n` line"))?;
                if fields.len() != 4 {
                    return Err(parse_err(lineno, format!("expected `{kind} <i> <j> <w>`")));
                }
                let vertex = |s: &str| -> Result<usize> {
                    let v: usize = s
                        .parse()
                        .map_err(|_| parse_err(lineno, format!("bad vertex `{s}`")))?;
                    if v == 0 || v > count {
                        return Err(parse_err(lineno, format!("vertex {v} out of range 1..={count}")));
                    }
                    Ok(v - 1)
                };
                let i = vertex(fields[1])?;
                let j = vertex(fields[2])?;
                if i == j {
                    return Err(parse_err(lineno, format!("self-loop on vertex {}", i + 1)));
                }
                let w: f64 = fields[3]
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad weight `{}`", fields[3])))?;
                if !w.is_finite() || w < 0.0 {
                    return Err(parse_err(lineno, format!("weight {w} must be finite and non-negative")));
                }
                let edge = (i.min(j), i.max(j), w);
                if kind == "c" {
                    cost.push(edge);
                } else {
                    demand.push(edge);
                }
            }
            other => return Err(parse_err(lineno, format!("unknown record `{other}`"))),
        }
    }

    let n = n.ok_or_else(|| parse_err(0, "missing `n <count>` line"))?;
    WeightedGraphPair::from_edges(n, cost, demand)
}

/// Writes the canonical text form: cost lines then demand lines, each in
/// ascending pair order.
pub fn write(g: &WeightedGraphPair) -> String {
    let mut out = format!("n {}\n", g.n());
    for (&(i, j), w) in g.cost() {
        let _ = writeln!(out, "c {} {} {}", i + 1, j + 1, w);
    }
    for (&(i, j), w) in g.demand() {
        let _ = writeln!(out, "d {} {} {}", i + 1, j + 1, w);
    }
    out
}
