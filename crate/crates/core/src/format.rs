//! Native text formats for instances and bid profiles.
//!
//! Instance:
//! ```text
//! # comment
//! k m
//! u_00 u_01 ... (m rationals, `p/q` or `p`)
//! ...           (k rows)
//! ```
//! Bid profile: header `k m` then `k` rows of `m` characters `0`/`1`.

use crate::error::{Error, Result};
use crate::model::{BidProfile, Instance};
use crate::rational::{format_rational, parse_rational};

/// Non-blank, non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(n, l)| (n + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_header(line: Option<(usize, &str)>) -> Result<(usize, usize)> {
    let (n, text) = line.ok_or(Error::Parse { line: 1, message: "missing \"k m\" header".into() })?;
    let fields: Vec<&str> = text.split_whitespace().collect();
    let bad = || Error::Parse { line: n, message: format!("expected \"k m\" with positive integers, found {text:?}") };
    if fields.len() != 2 {
        return Err(bad());
    }
    let k: usize = fields[0].parse().map_err(|_| bad())?;
    let m: usize = fields[1].parse().map_err(|_| bad())?;
    if k == 0 || m == 0 {
        return Err(bad());
    }
    Ok((k, m))
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let mut lines = content_lines(text);
    let (k, m) = parse_header(lines.next())?;
    let mut rows = Vec::with_capacity(k);
    for (n, line) in lines {
        if rows.len() == k {
            return Err(Error::DimensionMismatch(format!("line {n}: more than the declared {k} utility rows")));
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                parse_rational(tok)
                    .ok_or_else(|| Error::Parse { line: n, message: format!("{tok:?} is not a rational number") })
            })
            .collect::<Result<Vec<_>>>()?;
        if row.len() != m {
            return Err(Error::DimensionMismatch(format!("line {n}: expected {m} utilities, found {}", row.len())));
        }
        rows.push(row);
    }
    if rows.len() != k {
        return Err(Error::DimensionMismatch(format!("expected {k} utility rows, found {}", rows.len())));
    }
    Instance::new(rows)
}

pub fn serialize_instance(instance: &Instance) -> String {
    let mut out = format!("{} {}\n", instance.num_agents(), instance.num_items());
    for row in instance.rows() {
        let cells: Vec<String> = row.iter().map(format_rational).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_bids(text: &str) -> Result<BidProfile> {
    let mut lines = content_lines(text);
    let (k, m) = parse_header(lines.next())?;
    let mut rows = Vec::with_capacity(k);
    for (n, line) in lines {
        if rows.len() == k {
            return Err(Error::DimensionMismatch(format!("line {n}: more than the declared {k} bid rows")));
        }
        let row = line
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse { line: n, message: format!("unexpected bid character {other:?}") }),
            })
            .collect::<Result<Vec<_>>>()?;
        if row.len() != m {
            return Err(Error::DimensionMismatch(format!("line {n}: expected {m} bids, found {}", row.len())));
        }
        rows.push(row);
    }
    if rows.len() != k {
        return Err(Error::DimensionMismatch(format!("expected {k} bid rows, found {}", rows.len())));
    }
    BidProfile::new(rows)
}

pub fn serialize_bids(bids: &BidProfile) -> String {
    let mut out = format!("{} {}\n", bids.num_agents(), bids.num_items());
    for row in bids.rows() {
        out.extend(row.iter().map(|&b| if b { '1' } else { '0' }));
        out.push('\n');
    }
    out
}
