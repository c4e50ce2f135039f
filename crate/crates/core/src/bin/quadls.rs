//! Command-line harness: instance generation, single runs, experiment
//! matrices, the acceptance suite, and exact oracles.
//!
//! Exit codes: 0 on success, 2 when an enumeration budget is exhausted,
//! 1 on any other failure (including bad usage).

use clap::{Args, Parser, Subcommand, ValueEnum};
use quadls::driver::{self, DriverConfig};
use quadls::dp::DpProfile;
use quadls::experiment::{run_matrix, Algorithm, CellConfig, ExperimentRecord, MatrixSpec};
use quadls::generator::{generate_instance, CandidateMode, GenSpec, Shape};
use quadls::instance::eval_cost;
use quadls::io::{load_instance, save_instance, write_instance};
use quadls::oracle::{exact_opt, OracleBudget};
use quadls::seeding::{dsquared_seed, exhaustive_swap_search, lloyd_refine, SeedConfig};
use quadls::{Error, Instance, Solution};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "quadls",
    version,
    about = "Local-search clustering over discrete candidate sets, \
             accelerated by randomly shifted quadtree dissections"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProfileArg {
    /// Engineering resolution defaults.
    Desk,
    /// Resolution constants taken literally from the approximation analysis.
    PaperFaithful,
}

impl From<ProfileArg> for DpProfile {
    fn from(p: ProfileArg) -> DpProfile {
        match p {
            ProfileArg::Desk => DpProfile::Desk,
            ProfileArg::PaperFaithful => DpProfile::PaperFaithful,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AlgorithmArg {
    /// The full local-search scheme.
    Driver,
    /// D²-sampling alone (3 restarts).
    Dsquared,
    /// D²-sampling followed by alternating refinement.
    DsquaredLloyd,
    /// D²-sampling followed by exhaustive swap descent.
    SwapSearch,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Algorithm {
        match a {
            AlgorithmArg::Driver => Algorithm::Driver,
            AlgorithmArg::Dsquared => Algorithm::Dsquared,
            AlgorithmArg::DsquaredLloyd => Algorithm::DsquaredLloyd,
            AlgorithmArg::SwapSearch => Algorithm::SwapSearch,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ShapeArg {
    /// Clients uniform over the box.
    Uniform,
    /// Clients split over Gaussian blobs with uniformly placed means.
    Gaussian,
    /// Clients gathered around distinct cells of a coarse grid.
    GridClusters,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CandidatesArg {
    /// Every client plus geometrically spaced grid offsets around each.
    Surrogate,
    /// Exactly the client points.
    Clients,
}

/// Knobs shared by `run` and `matrix`.
#[derive(Args, Clone, Debug)]
struct SearchArgs {
    /// Swap budget handed to the DP (a remove + add pair costs two).
    #[arg(long, default_value_t = 2)]
    delta: usize,
    /// Moat width parameter; defaults to epsilon^13 / log2 n.
    #[arg(long)]
    gamma: Option<f64>,
    /// Dissections drawn per iteration; defaults to max(3, ceil(log2 k)).
    #[arg(long)]
    retries: Option<usize>,
    /// Rounding-resolution preset for the DP.
    #[arg(long, value_enum, default_value_t = ProfileArg::Desk)]
    profile: ProfileArg,
    /// Overrides the instance's epsilon for the search.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance and write it as an instance file.
    Gen {
        /// Client layout.
        #[arg(long, value_enum, default_value_t = ShapeArg::Uniform)]
        shape: ShapeArg,
        /// Number of clients.
        #[arg(long, default_value_t = 32)]
        n: usize,
        /// Number of centers to open.
        #[arg(short, long, default_value_t = 3)]
        k: usize,
        /// Dimension of the grid.
        #[arg(short, long, default_value_t = 2)]
        dim: usize,
        /// Side of the coordinate box.
        #[arg(long, default_value_t = 1024)]
        side: u64,
        /// Precision parameter in (0, 1).
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        /// Distance exponent of the objective (2 = squared Euclidean).
        #[arg(long, default_value_t = 2)]
        exponent: u32,
        /// Gaussian shape: number of blobs.
        #[arg(long, default_value_t = 3)]
        components: usize,
        /// Gaussian shape: per-axis standard deviation in grid units.
        #[arg(long, default_value_t = 16.0)]
        spread: f64,
        /// Grid-clusters shape: cells per axis of the coarse grid.
        #[arg(long, default_value_t = 4)]
        cells_per_axis: u64,
        /// Grid-clusters shape: number of occupied cells.
        #[arg(long, default_value_t = 3)]
        clusters: usize,
        /// Grid-clusters shape: displacement radius as a cell-side fraction.
        #[arg(long, default_value_t = 0.5)]
        jitter: f64,
        /// Candidate construction.
        #[arg(long, value_enum, default_value_t = CandidatesArg::Surrogate)]
        candidates: CandidatesArg,
        /// Opening weights uniform in [0, this]; 0 means unweighted.
        #[arg(long, default_value_t = 0.0)]
        weight_scale: f64,
        /// Generation seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one algorithm on an instance file and print a JSON report.
    Run {
        /// Instance file (see `gen`).
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = AlgorithmArg::Driver)]
        algorithm: AlgorithmArg,
        /// Algorithm seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        search: SearchArgs,
        /// Iteration cap for the alternating refinement baseline.
        #[arg(long, default_value_t = 50)]
        lloyd_iters: usize,
        /// Attach the full per-iteration trace to the report.
        #[arg(long)]
        trace: bool,
        /// Write the JSON report here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a grid of (instance, algorithm, seed) cells from a JSON spec.
    Matrix {
        /// Matrix spec file; `--template` prints an example of the format.
        spec: Option<PathBuf>,
        /// Print a template spec and exit.
        #[arg(long)]
        template: bool,
        /// Results file (JSON lines); a CSV summary lands next to it.
        #[arg(long, default_value = "results.jsonl")]
        out: PathBuf,
        /// Concurrent cells; 0 means one per available CPU.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run the acceptance suite and report one line per criterion.
    Verify,
    /// Solve an instance exactly by bounded enumeration.
    Oracle {
        /// Instance file (see `gen`).
        instance: PathBuf,
        /// Enumeration budget (candidate solutions).
        #[arg(long, default_value_t = OracleBudget::default().max_solutions)]
        budget: u64,
        /// Write the JSON report here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct RunReport {
    instance: String,
    algorithm: String,
    seed: u64,
    final_cost: f64,
    open: Vec<usize>,
    iterations: Option<usize>,
    wall_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<driver::DriverTrace>,
}

#[derive(Serialize)]
struct OracleReport {
    instance: String,
    optimum_cost: f64,
    open: Vec<usize>,
    wall_ms: f64,
}

fn emit_report<T: Serialize>(report: &T, out: Option<&PathBuf>) -> quadls::Result<()> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Parse(format!("serializing report: {e}")))?;
    println!("{text}");
    if let Some(path) = out {
        std::fs::write(path, text + "\n")?;
    }
    Ok(())
}

fn cmd_gen(spec: GenSpec, seed: u64, out: Option<PathBuf>) -> quadls::Result<()> {
    let inst = generate_instance(&spec, seed)?;
    match out {
        Some(path) => {
            save_instance(&inst, &path)?;
            eprintln!(
                "wrote {} ({} clients, {} candidates, k={})",
                path.display(),
                inst.clients.len(),
                inst.candidates.len(),
                inst.k
            );
        }
        None => print!("{}", write_instance(&inst)),
    }
    Ok(())
}

fn cmd_run(
    path: &PathBuf,
    algorithm: AlgorithmArg,
    seed: u64,
    search: &SearchArgs,
    lloyd_iters: usize,
    want_trace: bool,
    out: Option<&PathBuf>,
) -> quadls::Result<()> {
    let mut inst: Instance = load_instance(path)?;
    if let Some(e) = search.epsilon {
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::BadEpsilon(e));
        }
        inst.epsilon = e;
    }
    let started = Instant::now();
    let (sol, trace, iterations): (Solution, Option<driver::DriverTrace>, Option<usize>) =
        match algorithm {
            AlgorithmArg::Driver => {
                let cfg = DriverConfig {
                    seed,
                    epsilon: None,
                    delta: search.delta,
                    gamma: search.gamma,
                    retries: search.retries,
                    profile: search.profile.into(),
                };
                let (sol, trace) = driver::run(&inst, &cfg)?;
                let iters = trace.iterations;
                (sol, Some(trace), Some(iters))
            }
            AlgorithmArg::Dsquared => {
                let sol = dsquared_seed(&inst, SeedConfig { seed, trials: 3 })?;
                (eval_cost(&inst, &sol.open)?, None, None)
            }
            AlgorithmArg::DsquaredLloyd => {
                let seeded = dsquared_seed(&inst, SeedConfig { seed, trials: 3 })?;
                (lloyd_refine(&inst, &seeded, lloyd_iters)?, None, None)
            }
            AlgorithmArg::SwapSearch => {
                let seeded = dsquared_seed(&inst, SeedConfig { seed, trials: 3 })?;
                (
                    exhaustive_swap_search(&inst, &seeded, search.delta, 0.0)?,
                    None,
                    None,
                )
            }
        };
    let report = RunReport {
        instance: path.display().to_string(),
        algorithm: Algorithm::from(algorithm).name().to_string(),
        seed,
        final_cost: sol.total(),
        open: sol.open.clone(),
        iterations,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
        trace: if want_trace { trace } else { None },
    };
    emit_report(&report, out)
}

fn template_matrix() -> MatrixSpec {
    MatrixSpec {
        instances: vec![
            (
                "uniform-small".to_string(),
                GenSpec::uniform(2, 24, 3, 0.5, 512),
            ),
            (
                "mixture-small".to_string(),
                GenSpec {
                    dim: 2,
                    n_clients: 24,
                    k: 3,
                    epsilon: 0.5,
                    exponent_p: 2,
                    shape: Shape::GaussianMixture {
                        side: 512,
                        components: 3,
                        spread: 12.0,
                    },
                    candidates: CandidateMode::Clients,
                    weight_scale: 0.0,
                },
            ),
        ],
        algorithms: vec![Algorithm::Driver, Algorithm::Dsquared],
        seeds: vec![1, 2, 3],
        config: CellConfig::default(),
        oracle: true,
        oracle_budget: OracleBudget::default().max_solutions,
        workers: 0,
    }
}

fn cmd_matrix(
    spec_path: Option<&PathBuf>,
    template: bool,
    out: &std::path::Path,
    workers: Option<usize>,
) -> quadls::Result<()> {
    if template {
        let text = serde_json::to_string_pretty(&template_matrix())
            .map_err(|e| Error::Parse(format!("serializing template: {e}")))?;
        println!("{text}");
        return Ok(());
    }
    let Some(spec_path) = spec_path else {
        return Err(Error::Parse(
            "matrix needs a spec file (or --template to see the format)".into(),
        ));
    };
    let text = std::fs::read_to_string(spec_path)?;
    let mut spec: MatrixSpec =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("matrix spec: {e}")))?;
    if let Some(w) = workers {
        spec.workers = w;
    }
    let records: Vec<ExperimentRecord> = run_matrix(&spec, out)?;
    let ok = records.iter().filter(|r| r.status == "ok").count();
    eprintln!(
        "{} records ({} ok, {} error) in {} / {}",
        records.len(),
        ok,
        records.len() - ok,
        out.display(),
        out.with_extension("csv").display(),
    );
    Ok(())
}

fn cmd_verify() -> quadls::Result<bool> {
    let reports = quadls::acceptance::run_all()?;
    let mut all_pass = true;
    for r in &reports {
        println!("{r}");
        all_pass &= r.pass;
    }
    Ok(all_pass)
}

fn cmd_oracle(path: &PathBuf, budget: u64, out: Option<&PathBuf>) -> quadls::Result<()> {
    let inst = load_instance(path)?;
    let started = Instant::now();
    let sol = exact_opt(
        &inst,
        OracleBudget {
            max_solutions: budget,
        },
    )?;
    let report = OracleReport {
        instance: path.display().to_string(),
        optimum_cost: sol.total(),
        open: sol.open.clone(),
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    emit_report(&report, out)
}

fn dispatch(cli: Cli) -> quadls::Result<bool> {
    match cli.command {
        Command::Gen {
            shape,
            n,
            k,
            dim,
            side,
            epsilon,
            exponent,
            components,
            spread,
            cells_per_axis,
            clusters,
            jitter,
            candidates,
            weight_scale,
            seed,
            out,
        } => {
            let shape = match shape {
                ShapeArg::Uniform => Shape::UniformBox { side },
                ShapeArg::Gaussian => Shape::GaussianMixture {
                    side,
                    components,
                    spread,
                },
                ShapeArg::GridClusters => Shape::GridClusters {
                    side,
                    cells_per_axis,
                    clusters,
                    jitter,
                },
            };
            let spec = GenSpec {
                dim,
                n_clients: n,
                k,
                epsilon,
                exponent_p: exponent,
                shape,
                candidates: match candidates {
                    CandidatesArg::Surrogate => CandidateMode::Surrogate,
                    CandidatesArg::Clients => CandidateMode::Clients,
                },
                weight_scale,
            };
            cmd_gen(spec, seed, out)?;
            Ok(true)
        }
        Command::Run {
            instance,
            algorithm,
            seed,
            search,
            lloyd_iters,
            trace,
            out,
        } => {
            cmd_run(
                &instance,
                algorithm,
                seed,
                &search,
                lloyd_iters,
                trace,
                out.as_ref(),
            )?;
            Ok(true)
        }
        Command::Matrix {
            spec,
            template,
            out,
            workers,
        } => {
            cmd_matrix(spec.as_ref(), template, &out, workers)?;
            Ok(true)
        }
        Command::Verify => cmd_verify(),
        Command::Oracle {
            instance,
            budget,
            out,
        } => {
            cmd_oracle(&instance, budget, out.as_ref())?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    // Clap's own failure exit code is 2, which this tool reserves for budget
    // exhaustion; route usage errors to 1 and help/version to 0 instead.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.is_budget() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
