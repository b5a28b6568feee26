#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sem_fastdiag::bench::{
    bench_table, compare_table, emit, energy_table, poisson_table, residual_table, run_bench_scaling, run_ch,
    run_compare, run_poisson, run_schrodinger, schrodinger_table, validate_sweep, BenchConfig, BenchSolver,
    ChRunConfig, CompareConfig, PoissonConfig, SchrodingerConfig,
};
use sem_fastdiag::cahn_hilliard::{ChConfig, Droplets};
use sem_fastdiag::direct_solver::ErrorNorm;
use sem_fastdiag::sem1d::BoundaryCondition;
use sem_fastdiag::Error;

const SUBCOMMANDS: [&str; 5] = ["poisson", "schrodinger", "ch", "compare", "bench"];

/// Spectral-element fast-diagonalization solvers.
///
/// Options may also come from `--config FILE` (one `key = value` per line,
/// `#` comments); command-line flags take precedence.
#[derive(Parser, Debug)]
#[command(name = "semfd", version, args_override_self = true, allow_negative_numbers = true)]
struct Cli {
    /// Worker threads (default: RAYON_NUM_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// key = value file with default options for the subcommand.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Also report plan construction (offline) time.
    #[arg(long, global = true)]
    time_offline: bool,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Accuracy and timing study against built-in exact solutions.
    Poisson(PoissonArgs),
    /// PCG solve of α u − Δu + V u = f with the trigonometric potential.
    Schrodinger(SchrodingerArgs),
    /// Cahn–Hilliard two-droplet coalescence run.
    Ch(ChArgs),
    /// Q¹ periodic eigenbasis solve against the FFT solver.
    Compare(CompareArgs),
    /// Timing sweep and fitted complexity exponent.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
#[command(args_override_self = true, allow_negative_numbers = true)]
struct PoissonArgs {
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    order: usize,
    /// Cells per direction; a comma list runs a convergence study.
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16")]
    cells: Vec<usize>,
    #[arg(long, default_value = "neumann")]
    bc: BoundaryCondition,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value = "-1:1", value_parser = parse_domain, allow_hyphen_values = true)]
    domain: (f64, f64),
    #[arg(long, default_value_t = 1)]
    repeat: usize,
    /// quadrature | cell | max
    #[arg(long, default_value = "quadrature")]
    norm: ErrorNorm,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true, allow_negative_numbers = true)]
struct SchrodingerArgs {
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    order: usize,
    #[arg(long, default_value_t = 20)]
    cells: usize,
    #[arg(long, default_value = "periodic")]
    bc: BoundaryCondition,
    #[arg(long, default_value = "-16:16", value_parser = parse_domain, allow_hyphen_values = true)]
    domain: (f64, f64),
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Per-iteration relative residuals.
    #[arg(long, value_name = "FILE")]
    history: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true, allow_negative_numbers = true)]
struct ChArgs {
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    order: usize,
    #[arg(long, default_value_t = 20)]
    cells: usize,
    #[arg(long, default_value_t = 0.02)]
    eps: f64,
    #[arg(long, default_value_t = 0.02)]
    mobility: f64,
    #[arg(long, default_value_t = 0.001)]
    dt: f64,
    #[arg(long, default_value_t = 10000)]
    steps: usize,
    #[arg(long, default_value_t = 2.0)]
    stab: f64,
    /// Droplet radius.
    #[arg(long, default_value_t = 0.35)]
    radius: f64,
    /// Snapshot times.
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.4,0.8,1.6,3.2,10")]
    snapshots: Vec<f64>,
    #[arg(long)]
    vtk_dir: Option<PathBuf>,
    /// Energy and mass per step.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true, allow_negative_numbers = true)]
struct CompareArgs {
    /// Only `fft` is available.
    #[arg(long, default_value = "fft")]
    against: String,
    #[arg(long, default_value_t = 32)]
    cells: usize,
    #[arg(long, default_value = "periodic")]
    bc: BoundaryCondition,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    repeat: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true, allow_negative_numbers = true)]
struct BenchArgs {
    /// Target DoFs per direction.
    #[arg(long, value_delimiter = ',', default_value = "64,96,128,192,256")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    order: usize,
    #[arg(long, default_value_t = 20)]
    repeat: usize,
    #[arg(long, default_value = "periodic")]
    bc: BoundaryCondition,
    /// sem | fft
    #[arg(long, default_value = "sem")]
    solver: BenchSolver,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn parse_domain(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected a:b, got '{s}'"))?;
    let a: f64 = a.trim().parse().map_err(|_| format!("bad lower bound '{a}'"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("bad upper bound '{b}'"))?;
    if !(a < b) {
        return Err(format!("need a < b, got {a}:{b}"));
    }
    Ok((a, b))
}

fn read_config(path: &Path) -> Result<BTreeMap<String, String>, Error> {
    let text = std::fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("{}:{}: expected key = value", path.display(), i + 1))
        })?;
        let key = k.trim().replace('_', "-");
        if key == "config" {
            return Err(Error::Config(format!("{}:{}: nested config files are not supported", path.display(), i + 1)));
        }
        out.insert(key, v.trim().to_owned());
    }
    Ok(out)
}

/// Splices `--key=value` pairs from the config file right after the
/// subcommand name, skipping keys that are also given as flags.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, Error> {
    let s: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut path = None;
    for (i, a) in s.iter().enumerate() {
        if a == "--config" {
            path = s.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_owned());
        }
    }
    let Some(path) = path else { return Ok(args) };
    let Some(pos) = s.iter().position(|a| SUBCOMMANDS.contains(&a.as_str())) else {
        return Ok(args);
    };
    let given: Vec<&str> = s
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a))
        .collect();
    let mut out: Vec<OsString> = args[..=pos].to_vec();
    for (k, v) in read_config(Path::new(&path))? {
        if given.contains(&k.as_str()) {
            continue;
        }
        match v.as_str() {
            "true" => out.push(format!("--{k}").into()),
            "false" => {}
            _ => out.push(format!("--{k}={v}").into()),
        }
    }
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}

fn positive(name: &str, v: f64) -> Result<(), Error> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("--{name} must be a positive number, got {v}")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<(), Error> {
    if v >= min {
        Ok(())
    } else {
        Err(Error::Config(format!("--{name} must be at least {min}, got {v}")))
    }
}

fn dim_ok(v: usize) -> Result<(), Error> {
    if v == 2 || v == 3 {
        Ok(())
    } else {
        Err(Error::Config(format!("--dim must be 2 or 3, got {v}")))
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    if let Some(n) = cli.threads {
        at_least("threads", n, 1)?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot configure thread pool: {e}")))?;
    }
    let offline = cli.time_offline;
    match cli.cmd {
        Cmd::Poisson(a) => {
            dim_ok(a.dim)?;
            at_least("order", a.order, 1)?;
            at_least("repeat", a.repeat, 1)?;
            if a.cells.is_empty() || a.cells.contains(&0) {
                return Err(Error::Config("--cells must be a list of positive integers".into()));
            }
            let rows = run_poisson(&PoissonConfig {
                dim: a.dim,
                order: a.order,
                cells: a.cells,
                bc: a.bc,
                domain: a.domain,
                alpha: a.alpha,
                repeat: a.repeat,
                norm: a.norm,
            })?;
            emit(&poisson_table(&rows, offline), a.csv.as_deref())
        }
        Cmd::Schrodinger(a) => {
            dim_ok(a.dim)?;
            at_least("order", a.order, 1)?;
            at_least("cells", a.cells, 1)?;
            positive("beta", a.beta)?;
            positive("tol", a.tol)?;
            let r = run_schrodinger(&SchrodingerConfig {
                dim: a.dim,
                order: a.order,
                cells: a.cells,
                bc: a.bc,
                domain: a.domain,
                alpha: a.alpha,
                beta: a.beta,
                tol: a.tol,
                max_iters: a.max_iters,
            })?;
            emit(&schrodinger_table(&r, offline), a.csv.as_deref())?;
            if let Some(p) = &a.history {
                residual_table(&r.report).write(p)?;
            }
            if !r.report.converged {
                return Err(Error::NotConverged {
                    iterations: r.report.iterations,
                    residual: r.report.final_residual,
                });
            }
            Ok(())
        }
        Cmd::Ch(a) => {
            dim_ok(a.dim)?;
            at_least("order", a.order, 1)?;
            at_least("cells", a.cells, 1)?;
            positive("radius", a.radius)?;
            let ch = ChConfig {
                eps: a.eps,
                mobility: a.mobility,
                dt: a.dt,
                stab: a.stab,
                steps: a.steps,
            };
            ch.validate()?;
            let r = run_ch(&ChRunConfig {
                dim: a.dim,
                order: a.order,
                cells: a.cells,
                ch,
                drops: Droplets {
                    radius: a.radius,
                    ..Droplets::default()
                },
                snapshots: a.snapshots,
                vtk_dir: a.vtk_dir,
            })?;
            emit(&energy_table(&r.rows), a.csv.as_deref())?;
            eprintln!(
                "components {} -> {}, max energy increase {:e}, max mean drift {:e}, {} snapshots",
                r.components_initial,
                r.components_final,
                r.max_energy_increase,
                r.max_mean_drift,
                r.snapshot_files.len()
            );
            Ok(())
        }
        Cmd::Compare(a) => {
            if a.against != "fft" {
                return Err(Error::Config(format!("--against must be 'fft', got '{}'", a.against)));
            }
            if a.bc != BoundaryCondition::Periodic {
                return Err(Error::Config("the FFT comparison is only defined for --bc periodic".into()));
            }
            at_least("cells", a.cells, 2)?;
            at_least("repeat", a.repeat, 1)?;
            let r = run_compare(&CompareConfig {
                cells: a.cells,
                alpha: a.alpha,
                repeat: a.repeat,
                seed: a.seed,
            })?;
            emit(&compare_table(&r, offline), a.csv.as_deref())
        }
        Cmd::Bench(a) => {
            at_least("order", a.order, 1)?;
            at_least("repeat", a.repeat, 1)?;
            let order = if a.solver == BenchSolver::Fft { 1 } else { a.order };
            validate_sweep(&a.sizes, order)?;
            let rep = run_bench_scaling(&BenchConfig {
                sizes: a.sizes,
                order: a.order,
                repeat: a.repeat,
                bc: a.bc,
                solver: a.solver,
                seed: a.seed,
            })?;
            emit(&bench_table(&rep, offline), a.csv.as_deref())?;
            eprintln!("fitted exponent {:.4}", rep.slope);
            Ok(())
        }
    }
}

fn fail(kind: &str, msg: &str) -> ExitCode {
    eprintln!("error kind={kind} message={:?}", msg);
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let args = match expand_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => return fail(e.kind(), &e.to_string()),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return fail("usage", e.kind().as_str().unwrap_or("invalid arguments"));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string()),
    }
}
