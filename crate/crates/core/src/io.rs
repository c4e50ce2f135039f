//! Line-oriented instance files.
//!
//! ```text
//! d n_clients n_candidates k epsilon p
//! <d integers>              one line per client
//! <d integers> <weight>     one line per candidate
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so write -> parse
//! -> write is bit-exact.

use crate::error::Error;
use crate::instance::{Instance, Point};
use crate::Result;
use std::fmt::Write as _;
use std::path::Path;

pub fn write_instance(inst: &Instance) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{} {} {} {} {} {}",
        inst.dim,
        inst.clients.len(),
        inst.candidates.len(),
        inst.k,
        inst.epsilon,
        inst.exponent_p
    )
    .unwrap();
    for p in &inst.clients {
        writeln!(out, "{}", join_coords(&p.coords)).unwrap();
    }
    for (p, w) in inst.candidates.iter().zip(&inst.weights) {
        writeln!(out, "{} {}", join_coords(&p.coords), w).unwrap();
    }
    out
}

fn join_coords(coords: &[i64]) -> String {
    coords
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn save_instance(inst: &Instance, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_instance(inst))?;
    Ok(())
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 6 {
        return Err(Error::Parse(format!(
            "header needs 6 fields `d n_clients n_candidates k epsilon p`, got {}",
            fields.len()
        )));
    }
    let dim: usize = parse_field(fields[0], "d")?;
    let n_clients: usize = parse_field(fields[1], "n_clients")?;
    let n_candidates: usize = parse_field(fields[2], "n_candidates")?;
    let k: usize = parse_field(fields[3], "k")?;
    let epsilon: f64 = parse_field(fields[4], "epsilon")?;
    let p: u32 = parse_field(fields[5], "p")?;

    let mut clients = Vec::with_capacity(n_clients);
    for i in 0..n_clients {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing client line {i}")))?;
        clients.push(Point::new(parse_coords(line, dim, false)?.0));
    }
    let mut candidates = Vec::with_capacity(n_candidates);
    for i in 0..n_candidates {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing candidate line {i}")))?;
        let (coords, weight) = parse_coords(line, dim, true)?;
        candidates.push((Point::new(coords), weight.unwrap()));
    }
    if lines.next().is_some() {
        return Err(Error::Parse("trailing lines after the last candidate".into()));
    }
    Instance::new(dim, clients, candidates, k, epsilon).map(|inst| inst.with_exponent(p))
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    parse_instance(&std::fs::read_to_string(path)?)
}

fn parse_field<T: std::str::FromStr>(s: &str, name: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Parse(format!("bad {name}: {s:?}")))
}

fn parse_coords(line: &str, dim: usize, with_weight: bool) -> Result<(Vec<i64>, Option<f64>)> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    let want = dim + usize::from(with_weight);
    if fields.len() != want {
        return Err(Error::Parse(format!(
            "expected {want} fields, got {} in {line:?}",
            fields.len()
        )));
    }
    let coords = fields[..dim]
        .iter()
        .map(|f| parse_field(f, "coordinate"))
        .collect::<Result<Vec<i64>>>()?;
    let weight = if with_weight {
        Some(parse_field(fields[dim], "weight")?)
    } else {
        None
    };
    Ok((coords, weight))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_are_bit_exact() {
        let text = "2 2 2 1 0.3333333333333333 2\n\
                    0 0\n\
                    10 7\n\
                    1 2 0\n\
                    9 9 2.5000000000000004\n";
        let inst = parse_instance(text).unwrap();
        assert_eq!(write_instance(&inst), text);

        let back = parse_instance(&write_instance(&inst)).unwrap();
        assert_eq!(back.epsilon, inst.epsilon);
        assert_eq!(back.weights, inst.weights);
        assert_eq!(back.clients, inst.clients);
        assert_eq!(back.candidates, inst.candidates);
        assert_eq!(back.grid_side, inst.grid_side);
    }

    #[test]
    fn rejects_malformed_files() {
        assert!(parse_instance("").is_err());
        assert!(parse_instance("2 1 1 1 0.25\n0 0\n1 1 0\n").is_err()); // 5 header fields
        assert!(parse_instance("2 1 1 1 0.25 2\n0 0\n").is_err()); // missing candidate
        assert!(parse_instance("2 1 1 1 0.25 2\n0 0\n1 1\n").is_err()); // candidate lacks weight
        assert!(parse_instance("2 1 1 1 0.25 2\n0 0\n1 1 0\nextra\n").is_err());
        assert!(parse_instance("2 1 1 1 0.25 2\n0 x\n1 1 0\n").is_err());
        // Validation still applies: negative weight.
        assert!(parse_instance("2 1 1 1 0.25 2\n0 0\n1 1 -2\n").is_err());
    }
}
