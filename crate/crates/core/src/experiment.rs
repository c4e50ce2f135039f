//! Experiment matrices: run a grid of (instance family, algorithm, seed)
//! cells, stream one self-contained JSON record per line to disk, and derive
//! a CSV summary. The JSONL file is the primary artifact — append-only and
//! safe to interrupt — and re-running the same matrix skips every cell whose
//! key is already present.

use crate::driver::{self, DriverConfig, DriverTrace};
use crate::dp::DpProfile;
use crate::generator::{generate_instance, GenSpec};
use crate::instance::{eval_cost, Instance, Solution};
use crate::oracle::{exact_opt, OracleBudget};
use crate::seeding::{dsquared_seed, exhaustive_swap_search, lloyd_refine, SeedConfig};
use crate::Result;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

/// Algorithms a matrix can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// The full local-search scheme.
    Driver,
    /// D²-sampling alone (3 restarts).
    Dsquared,
    /// D²-sampling followed by alternating refinement.
    DsquaredLloyd,
    /// D²-sampling followed by exhaustive swap descent.
    SwapSearch,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Driver => "driver",
            Algorithm::Dsquared => "dsquared",
            Algorithm::DsquaredLloyd => "dsquared-lloyd",
            Algorithm::SwapSearch => "swap-search",
        }
    }
}

/// Shared per-cell algorithm parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellConfig {
    pub delta: usize,
    pub gamma: Option<f64>,
    pub retries: Option<usize>,
    pub profile: DpProfile,
    /// Iteration cap for the alternating refinement baseline.
    pub lloyd_iters: usize,
}

impl Default for CellConfig {
    fn default() -> Self {
        CellConfig {
            delta: 2,
            gamma: None,
            retries: None,
            profile: DpProfile::Desk,
            lloyd_iters: 50,
        }
    }
}

/// A full experiment grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixSpec {
    /// Named instance families; the name keys resumption, so keep each name
    /// unique within a matrix.
    pub instances: Vec<(String, GenSpec)>,
    pub algorithms: Vec<Algorithm>,
    /// Seeds double as instance-generation and algorithm seeds.
    pub seeds: Vec<u64>,
    pub config: CellConfig,
    /// Compute the exact optimum per (instance, seed) and record ratios.
    pub oracle: bool,
    pub oracle_budget: u64,
    /// Concurrent cells; 0 means one per available CPU.
    pub workers: usize,
}

/// One matrix cell's outcome. Serialized as a single JSON line.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentRecord {
    /// Resume key: `instance|algorithm|seed`.
    pub cell_key: String,
    pub instance: String,
    pub gen_spec: GenSpec,
    pub algorithm: String,
    pub config: CellConfig,
    pub seed: u64,
    pub status: String,
    pub error: Option<String>,
    pub final_cost: Option<f64>,
    pub oracle_cost: Option<f64>,
    /// `final_cost / oracle_cost`, when both are present and positive.
    pub ratio: Option<f64>,
    pub iterations: Option<usize>,
    pub wall_ms: f64,
    pub trace: Option<DriverTrace>,
}

fn cell_key(instance: &str, algorithm: Algorithm, seed: u64) -> String {
    format!("{instance}|{}|{seed}", algorithm.name())
}

fn run_algorithm(
    inst: &Instance,
    algorithm: Algorithm,
    seed: u64,
    config: &CellConfig,
) -> Result<(Solution, Option<DriverTrace>, Option<usize>)> {
    match algorithm {
        Algorithm::Driver => {
            let cfg = DriverConfig {
                seed,
                epsilon: None,
                delta: config.delta,
                gamma: config.gamma,
                retries: config.retries,
                profile: config.profile,
            };
            let (sol, trace) = driver::run(inst, &cfg)?;
            let iters = trace.iterations;
            Ok((sol, Some(trace), Some(iters)))
        }
        Algorithm::Dsquared => {
            let sol = dsquared_seed(inst, SeedConfig { seed, trials: 3 })?;
            Ok((eval_cost(inst, &sol.open)?, None, None))
        }
        Algorithm::DsquaredLloyd => {
            let seeded = dsquared_seed(inst, SeedConfig { seed, trials: 3 })?;
            let sol = lloyd_refine(inst, &seeded, config.lloyd_iters)?;
            Ok((sol, None, None))
        }
        Algorithm::SwapSearch => {
            let seeded = dsquared_seed(inst, SeedConfig { seed, trials: 3 })?;
            let sol = exhaustive_swap_search(inst, &seeded, config.delta, 0.0)?;
            Ok((sol, None, None))
        }
    }
}

fn read_existing(path: &Path) -> Result<Vec<ExperimentRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ExperimentRecord = serde_json::from_str(&line)
            .map_err(|e| crate::error::Error::Parse(format!("bad record line: {e}")))?;
        out.push(rec);
    }
    Ok(out)
}

fn csv_path(jsonl: &Path) -> std::path::PathBuf {
    jsonl.with_extension("csv")
}

fn write_csv(path: &Path, records: &[ExperimentRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "cell_key",
        "instance",
        "algorithm",
        "seed",
        "status",
        "final_cost",
        "oracle_cost",
        "ratio",
        "iterations",
        "wall_ms",
    ])?;
    let fmt_f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let fmt_u = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        w.write_record([
            r.cell_key.clone(),
            r.instance.clone(),
            r.algorithm.clone(),
            r.seed.to_string(),
            r.status.clone(),
            fmt_f(r.final_cost),
            fmt_f(r.oracle_cost),
            fmt_f(r.ratio),
            fmt_u(r.iterations),
            r.wall_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

impl From<csv::Error> for crate::error::Error {
    fn from(e: csv::Error) -> Self {
        crate::error::Error::Parse(format!("csv: {e}"))
    }
}

/// Run every cell of the matrix that is not already recorded in the JSONL
/// file at `out_path`, appending one record per freshly run cell, then
/// rewrite the derived CSV summary next to it. Returns all records (old and
/// new) sorted by cell key. Per-cell algorithm failures become records with
/// `status = "error"`; only I/O failures abort the run.
pub fn run_matrix(spec: &MatrixSpec, out_path: &Path) -> Result<Vec<ExperimentRecord>> {
    let existing = read_existing(out_path)?;
    let done: BTreeSet<String> = existing.iter().map(|r| r.cell_key.clone()).collect();

    struct Cell {
        name: String,
        gen: GenSpec,
        algorithm: Algorithm,
        seed: u64,
    }
    let mut pending = Vec::new();
    for (name, gen) in &spec.instances {
        for &algorithm in &spec.algorithms {
            for &seed in &spec.seeds {
                if !done.contains(&cell_key(name, algorithm, seed)) {
                    pending.push(Cell {
                        name: name.clone(),
                        gen: gen.clone(),
                        algorithm,
                        seed,
                    });
                }
            }
        }
    }

    // Exact optima are shared across algorithms: compute once per
    // (instance, seed) pair up front, sequentially.
    let mut oracle_costs: BTreeMap<(String, u64), Option<f64>> = BTreeMap::new();
    if spec.oracle {
        let budget = OracleBudget {
            max_solutions: spec.oracle_budget,
        };
        for cell in &pending {
            oracle_costs
                .entry((cell.name.clone(), cell.seed))
                .or_insert_with(|| {
                    generate_instance(&cell.gen, cell.seed)
                        .ok()
                        .and_then(|inst| exact_opt(&inst, budget).ok())
                        .map(|sol| sol.total())
                });
        }
    }

    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(out_path)?;
    let writer = Mutex::new(std::io::BufWriter::new(file));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| crate::error::Error::Parse(format!("thread pool: {e}")))?;
    let new_records: Vec<ExperimentRecord> = pool.install(|| {
        pending
            .par_iter()
            .map(|cell| {
                let mut record = ExperimentRecord {
                    cell_key: cell_key(&cell.name, cell.algorithm, cell.seed),
                    instance: cell.name.clone(),
                    gen_spec: cell.gen.clone(),
                    algorithm: cell.algorithm.name().to_string(),
                    config: spec.config.clone(),
                    seed: cell.seed,
                    status: "ok".to_string(),
                    error: None,
                    final_cost: None,
                    oracle_cost: oracle_costs
                        .get(&(cell.name.clone(), cell.seed))
                        .copied()
                        .flatten(),
                    ratio: None,
                    iterations: None,
                    wall_ms: 0.0,
                    trace: None,
                };
                match generate_instance(&cell.gen, cell.seed) {
                    Err(e) => {
                        record.status = "error".to_string();
                        record.error = Some(e.to_string());
                    }
                    Ok(inst) => {
                        // Timing starts after generation: the measurement is
                        // about the algorithm, not the harness.
                        let started = Instant::now();
                        match run_algorithm(&inst, cell.algorithm, cell.seed, &spec.config) {
                            Ok((sol, trace, iters)) => {
                                record.wall_ms = started.elapsed().as_secs_f64() * 1e3;
                                record.final_cost = Some(sol.total());
                                record.iterations = iters;
                                record.trace = trace;
                                if let Some(oc) = record.oracle_cost {
                                    if oc > 0.0 {
                                        record.ratio = Some(sol.total() / oc);
                                    }
                                }
                            }
                            Err(e) => {
                                record.wall_ms = started.elapsed().as_secs_f64() * 1e3;
                                record.status = "error".to_string();
                                record.error = Some(e.to_string());
                            }
                        }
                    }
                }
                let line = serde_json::to_string(&record)
                    .expect("experiment records always serialize");
                {
                    let mut w = writer.lock().expect("record writer poisoned");
                    writeln!(w, "{line}").expect("appending a record line");
                    w.flush().expect("flushing a record line");
                }
                record
            })
            .collect()
    });

    let mut all = existing;
    all.extend(new_records);
    all.sort_by(|a, b| a.cell_key.cmp(&b.cell_key));
    write_csv(&csv_path(out_path), &all)?;
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_matrix(dir: &Path, oracle: bool) -> (MatrixSpec, std::path::PathBuf) {
        let spec = MatrixSpec {
            instances: vec![(
                "uniform-tiny".to_string(),
                GenSpec::uniform(2, 6, 2, 0.5, 128),
            )],
            algorithms: vec![Algorithm::Driver, Algorithm::Dsquared],
            seeds: vec![1, 2, 3],
            config: CellConfig::default(),
            oracle,
            oracle_budget: 2_000_000,
            workers: 2,
        };
        (spec, dir.join("results.jsonl"))
    }

    #[test]
    fn empty_grid_writes_empty_output() {
        let dir = tempfile::tempdir().unwrap();
        let spec = MatrixSpec {
            instances: vec![],
            algorithms: vec![Algorithm::Driver],
            seeds: vec![1],
            config: CellConfig::default(),
            oracle: false,
            oracle_budget: 0,
            workers: 1,
        };
        let out = dir.path().join("results.jsonl");
        let records = run_matrix(&spec, &out).unwrap();
        assert!(records.is_empty());
        assert!(out.exists());
        assert_eq!(std::fs::read_to_string(&out).unwrap().trim(), "");
    }

    #[test]
    fn grid_cardinality_and_csv_row_count_match() {
        let dir = tempfile::tempdir().unwrap();
        let (spec, out) = tiny_matrix(dir.path(), false);
        let records = run_matrix(&spec, &out).unwrap();
        assert_eq!(records.len(), 6, "1 instance x 2 algorithms x 3 seeds");
        assert!(records.iter().all(|r| r.status == "ok"));
        let csv_text = std::fs::read_to_string(csv_path(&out)).unwrap();
        let rows = csv_text.lines().count();
        assert_eq!(rows, 7, "header plus one row per record");
    }

    #[test]
    fn reruns_are_no_ops_and_records_parse_back() {
        let dir = tempfile::tempdir().unwrap();
        let (spec, out) = tiny_matrix(dir.path(), false);
        let first = run_matrix(&spec, &out).unwrap();
        let lines_after_first = std::fs::read_to_string(&out).unwrap().lines().count();
        let second = run_matrix(&spec, &out).unwrap();
        let lines_after_second = std::fs::read_to_string(&out).unwrap().lines().count();
        assert_eq!(lines_after_first, 6);
        assert_eq!(
            lines_after_first, lines_after_second,
            "rerunning the same matrix must not append"
        );
        assert_eq!(first.len(), second.len());
        let parsed = read_existing(&out).unwrap();
        assert_eq!(parsed.len(), 6, "every line parses back");
        for (a, b) in first.iter().zip(second.iter()) {
            assert_eq!(a.cell_key, b.cell_key);
            assert_eq!(a.final_cost, b.final_cost);
        }
    }

    #[test]
    fn oracle_ratios_are_at_least_one() {
        let dir = tempfile::tempdir().unwrap();
        let (spec, out) = tiny_matrix(dir.path(), true);
        let records = run_matrix(&spec, &out).unwrap();
        let mut saw_ratio = false;
        for r in &records {
            if let Some(ratio) = r.ratio {
                assert!(
                    ratio >= 1.0 - 1e-9,
                    "cell {}: ratio {ratio} beats the exact optimum",
                    r.cell_key
                );
                saw_ratio = true;
            }
        }
        assert!(saw_ratio, "oracle-enabled tiny cells must produce ratios");
    }
}
