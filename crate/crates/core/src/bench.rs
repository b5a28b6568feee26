//! Drivers behind the CLI: accuracy studies, timing sweeps, PCG runs,
//! Cahn–Hilliard simulations and the FFT comparison. Each returns plain
//! records plus a [`Table`] for CSV output.
//!
//! Timings cover the online step only. Plans (assembly and
//! eigendecompositions) are built first and timed separately, and one
//! warm-up solve is discarded.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cahn_hilliard::{count_components, droplet_initial, ChConfig, ChSetup, ChState, Droplets};
use crate::direct_solver::{plan_poisson, solve3d, uniform_specs, ErrorNorm, NullspacePolicy, TensorMesh};
use crate::error::{Error, Result};
use crate::fft_comparator::{fft_poisson_solve, FftPlan};
use crate::io::{write_vtk, Cell, Table};
use crate::krylov::{schrodinger_exact, schrodinger_potential, schrodinger_rhs, PcgConfig, PcgReport, PcgSolver};
use crate::sem1d::BoundaryCondition;
use crate::tensor_ops::Grid3;

/// Smooth exact solutions compatible with each boundary condition: a
/// trigonometric product with wave numbers (1, 2, 3) plus a polynomial
/// product (omitted for periodic data), defined on `[−1, 1]^d` and mapped
/// affinely onto `domain^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Manufactured {
    pub bc: BoundaryCondition,
    pub dim: usize,
    pub domain: (f64, f64),
}

impl Manufactured {
    pub fn new(bc: BoundaryCondition, dim: usize) -> Self {
        Manufactured {
            bc,
            dim,
            domain: (-1.0, 1.0),
        }
    }

    pub fn on(self, domain: (f64, f64)) -> Self {
        Manufactured { domain, ..self }
    }

    fn trig(&self, d: usize, t: f64) -> (f64, f64) {
        // (value, second derivative)
        let a = (d + 1) as f64 * PI;
        let v = match self.bc {
            BoundaryCondition::Dirichlet => (a * t).sin(),
            _ => (a * t).cos(),
        };
        (v, -a * a * v)
    }

    fn poly(&self, d: usize, t: f64) -> (f64, f64) {
        let s = 1.0 - t * t;
        match (self.bc, d) {
            (BoundaryCondition::Neumann, 0) => (s.powi(3), -6.0 * s * s + 24.0 * t * t * s),
            (BoundaryCondition::Neumann, 1) => (s * s, -4.0 + 12.0 * t * t),
            (BoundaryCondition::Neumann, _) => (s.powi(4), -8.0 * s.powi(3) + 48.0 * t * t * s * s),
            (BoundaryCondition::Dirichlet, 0) => (t - t.powi(3), -6.0 * t),
            (BoundaryCondition::Dirichlet, 1) => (t * t - t.powi(4), 2.0 - 12.0 * t * t),
            (BoundaryCondition::Dirichlet, _) => (s, -2.0),
            (BoundaryCondition::Periodic, _) => (0.0, 0.0),
        }
    }

    /// `(u, Δu)` at a point.
    fn eval(&self, x: [f64; 3]) -> (f64, f64) {
        let (a, b) = self.domain;
        let c = 2.0 / (b - a);
        let x = x.map(|t| c * (t - a) - 1.0);
        let mut u = 0.0;
        let mut lap = 0.0;
        for part in 0..2 {
            let f: Vec<(f64, f64)> = (0..self.dim)
                .map(|d| if part == 0 { self.trig(d, x[d]) } else { self.poly(d, x[d]) })
                .collect();
            let prod: f64 = f.iter().map(|p| p.0).product();
            u += prod;
            for d in 0..self.dim {
                let others: f64 = (0..self.dim).filter(|&e| e != d).map(|e| f[e].0).product();
                lap += f[d].1 * others;
            }
        }
        (u, c * c * lap)
    }

    pub fn exact(&self, x: f64, y: f64, z: f64) -> f64 {
        self.eval([x, y, z]).0
    }

    /// `α u − Δu`.
    pub fn rhs(&self, alpha: f64, x: f64, y: f64, z: f64) -> f64 {
        let (u, lap) = self.eval([x, y, z]);
        alpha * u - lap
    }
}

fn check_domain(domain: (f64, f64)) -> Result<()> {
    if !(domain.0 < domain.1) || !domain.0.is_finite() || !domain.1.is_finite() {
        return Err(Error::Config(format!(
            "domain must be a finite interval a:b with a < b, got {}:{}",
            domain.0, domain.1
        )));
    }
    Ok(())
}

fn check_dim(dim: usize) -> Result<()> {
    if !(2..=3).contains(&dim) {
        return Err(Error::Config(format!("dim must be 2 or 3, got {dim}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonConfig {
    pub dim: usize,
    pub order: usize,
    /// Cells per direction for each mesh of the study.
    pub cells: Vec<usize>,
    pub bc: BoundaryCondition,
    pub domain: (f64, f64),
    pub alpha: f64,
    pub repeat: usize,
    pub norm: ErrorNorm,
}

impl Default for PoissonConfig {
    fn default() -> Self {
        PoissonConfig {
            dim: 3,
            order: 5,
            cells: vec![2, 4, 8, 16],
            bc: BoundaryCondition::Neumann,
            domain: (-1.0, 1.0),
            alpha: 1.0,
            repeat: 1,
            norm: ErrorNorm::Quadrature,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonRow {
    pub cells: usize,
    /// DoFs per direction.
    pub n: usize,
    pub dofs: usize,
    pub l2_error: f64,
    pub max_error: f64,
    /// `log2(e_prev / e)` per mesh doubling.
    pub order: Option<f64>,
    pub time_offline: f64,
    pub time_total: f64,
    pub time_per_solve: f64,
}

/// Accuracy study with the built-in exact solutions.
pub fn run_poisson(cfg: &PoissonConfig) -> Result<Vec<PoissonRow>> {
    check_dim(cfg.dim)?;
    check_domain(cfg.domain)?;
    if cfg.cells.is_empty() {
        return Err(Error::Config("at least one mesh (cells) is required".into()));
    }
    if cfg.repeat == 0 {
        return Err(Error::Config("repeat must be at least 1".into()));
    }
    let problem = Manufactured::new(cfg.bc, cfg.dim).on(cfg.domain);
    let mut rows: Vec<PoissonRow> = Vec::new();
    for &cells in &cfg.cells {
        let specs = uniform_specs(cfg.dim, cfg.order, cells, cfg.domain.0, cfg.domain.1, cfg.bc);
        let t0 = Instant::now();
        let mesh = TensorMesh::from_specs(&specs)?;
        let plan = plan_poisson(mesh.ops(), cfg.alpha, NullspacePolicy::Reject)?;
        let time_offline = t0.elapsed().as_secs_f64();
        let f = mesh.sample(|x, y, z| problem.rhs(cfg.alpha, x, y, z));
        let mut u = solve3d(&plan, &f)?; // warm-up
        let t1 = Instant::now();
        for _ in 0..cfg.repeat {
            u = solve3d(&plan, &f)?;
        }
        let time_total = t1.elapsed().as_secs_f64();
        let exact = |x, y, z| problem.exact(x, y, z);
        let l2_error = mesh.error_norm(&u, exact, cfg.norm);
        let order = rows.last().map(|p| {
            (p.l2_error / l2_error).log2() / (cells as f64 / p.cells as f64).log2()
        });
        rows.push(PoissonRow {
            cells,
            n: mesh.dims()[0],
            dofs: mesh.dofs(),
            l2_error,
            max_error: mesh.error_norm(&u, exact, ErrorNorm::Max),
            order,
            time_offline,
            time_total,
            time_per_solve: time_total / cfg.repeat as f64,
        });
    }
    Ok(rows)
}

pub fn poisson_table(rows: &[PoissonRow], with_offline: bool) -> Table {
    let mut header = vec!["mesh", "dofs", "l2_error", "max_error", "order", "time_total", "time_per_solve"];
    if with_offline {
        header.push("time_offline");
    }
    let mut t = Table::new(&header);
    for r in rows {
        let mut row: Vec<Cell> = vec![
            r.cells.into(),
            r.dofs.into(),
            r.l2_error.into(),
            r.max_error.into(),
            r.order.into(),
            r.time_total.into(),
            r.time_per_solve.into(),
        ];
        if with_offline {
            row.push(r.time_offline.into());
        }
        t.push(row);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchSolver {
    /// Q^k fast diagonalization (dense eigenbasis contractions).
    Sem,
    /// Q^1 periodic solve through the 3D FFT.
    Fft,
}

impl std::str::FromStr for BenchSolver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sem" | "direct" => Ok(BenchSolver::Sem),
            "fft" => Ok(BenchSolver::Fft),
            other => Err(Error::Config(format!("unknown solver '{other}' (expected sem or fft)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Target DoFs per direction (rounded to a whole number of cells).
    pub sizes: Vec<usize>,
    pub order: usize,
    pub repeat: usize,
    pub bc: BoundaryCondition,
    pub solver: BenchSolver,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: vec![64, 96, 128, 192, 256],
            order: 5,
            repeat: 20,
            bc: BoundaryCondition::Periodic,
            solver: BenchSolver::Sem,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub n: usize,
    pub dofs: usize,
    pub repeats: usize,
    pub time_total: f64,
    pub time_per_solve: f64,
    /// Median single-solve time; the fit uses this so one interrupted
    /// solve on a busy machine does not skew a size.
    pub time_median: f64,
    pub time_offline: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub records: Vec<BenchRecord>,
    /// Least-squares slope of `log(median solve time)` against `log(N)`.
    pub slope: f64,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

type SolveFn = dyn Fn(&Grid3) -> Result<Grid3>;

/// Timing sweep of repeated 3D solves with random data; fits the exponent.
pub fn run_bench_scaling(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.repeat == 0 {
        return Err(Error::Config("repeat must be at least 1".into()));
    }
    let order = if cfg.solver == BenchSolver::Fft { 1 } else { cfg.order };
    let bc = if cfg.solver == BenchSolver::Fft { BoundaryCondition::Periodic } else { cfg.bc };
    validate_sweep(&cfg.sizes, order)?;
    let mut records = Vec::new();
    for &size in &cfg.sizes {
        let cells = ((size as f64 / order as f64).round() as usize).max(1);
        let specs = uniform_specs(3, order, cells, -1.0, 1.0, bc);
        let t0 = Instant::now();
        let mesh = TensorMesh::from_specs(&specs)?;
        let solve: Box<SolveFn> = match cfg.solver {
            BenchSolver::Sem => {
                let plan = plan_poisson(mesh.ops(), 1.0, NullspacePolicy::Reject)?;
                Box::new(move |f| solve3d(&plan, f))
            }
            BenchSolver::Fft => {
                let h = specs[0].cell_width();
                let plan = FftPlan::new(mesh.dims(), [h; 3], 1.0, NullspacePolicy::Reject)?;
                Box::new(move |f| fft_poisson_solve(&plan, f))
            }
        };
        let time_offline = t0.elapsed().as_secs_f64();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let f = Grid3::from_fn(mesh.dims(), |_, _, _| rng.random_range(-1.0..1.0));
        let _ = solve(&f)?; // warm-up
        let mut samples = Vec::with_capacity(cfg.repeat);
        for _ in 0..cfg.repeat {
            let t1 = Instant::now();
            std::hint::black_box(solve(&f)?);
            samples.push(t1.elapsed().as_secs_f64());
        }
        let time_total: f64 = samples.iter().sum();
        samples.sort_by(f64::total_cmp);
        let mid = samples.len() / 2;
        let time_median = if samples.len() % 2 == 1 {
            samples[mid]
        } else {
            0.5 * (samples[mid - 1] + samples[mid])
        };
        records.push(BenchRecord {
            n: mesh.dims()[0],
            dofs: mesh.dofs(),
            repeats: cfg.repeat,
            time_total,
            time_per_solve: time_total / cfg.repeat as f64,
            time_median,
            time_offline,
        });
    }
    let dofs: Vec<f64> = records.iter().map(|r| r.dofs as f64).collect();
    let times: Vec<f64> = records.iter().map(|r| r.time_median).collect();
    Ok(BenchReport {
        slope: loglog_slope(&dofs, &times),
        records,
    })
}

/// At least 4 distinct sizes spanning 16x in total DoFs, checked before
/// anything is allocated.
pub fn validate_sweep(sizes: &[usize], order: usize) -> Result<()> {
    let mut n: Vec<usize> = sizes
        .iter()
        .map(|&s| (((s as f64 / order as f64).round() as usize).max(1) * order).pow(3))
        .collect();
    n.sort_unstable();
    n.dedup();
    if n.len() < 4 || (n[n.len() - 1] as f64) < 16.0 * n[0] as f64 {
        return Err(Error::Config(format!(
            "a scaling fit needs at least 4 distinct sizes spanning 16x in total DoFs, got sizes {sizes:?}"
        )));
    }
    Ok(())
}

pub fn bench_table(rep: &BenchReport, with_offline: bool) -> Table {
    let mut header = vec!["n", "dofs", "repeats", "time_total", "time_per_solve", "time_median", "slope"];
    if with_offline {
        header.push("time_offline");
    }
    let mut t = Table::new(&header);
    for r in &rep.records {
        let mut row: Vec<Cell> = vec![
            r.n.into(),
            r.dofs.into(),
            r.repeats.into(),
            r.time_total.into(),
            r.time_per_solve.into(),
            r.time_median.into(),
            rep.slope.into(),
        ];
        if with_offline {
            row.push(r.time_offline.into());
        }
        t.push(row);
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchrodingerConfig {
    pub dim: usize,
    pub order: usize,
    pub cells: usize,
    pub bc: BoundaryCondition,
    pub domain: (f64, f64),
    pub alpha: f64,
    pub beta: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SchrodingerConfig {
    fn default() -> Self {
        SchrodingerConfig {
            dim: 3,
            order: 5,
            cells: 20,
            bc: BoundaryCondition::Periodic,
            domain: (-16.0, 16.0),
            alpha: 1.0,
            beta: 1.0,
            tol: 1e-12,
            max_iters: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchrodingerResult {
    pub dofs: usize,
    pub report: PcgReport,
    pub l2_error: f64,
    pub max_error: f64,
    pub time_offline: f64,
    pub time_solve: f64,
}

/// PCG on `α u − Δu + V u = f` with the cosine-product exact solution.
pub fn run_schrodinger(cfg: &SchrodingerConfig) -> Result<SchrodingerResult> {
    check_dim(cfg.dim)?;
    check_domain(cfg.domain)?;
    if !(cfg.beta > 0.0) {
        return Err(Error::Config(format!("beta must be > 0, got {}", cfg.beta)));
    }
    let t0 = Instant::now();
    let mesh = TensorMesh::from_specs(&uniform_specs(cfg.dim, cfg.order, cfg.cells, cfg.domain.0, cfg.domain.1, cfg.bc))?;
    let v = schrodinger_potential(cfg.beta, &mesh);
    let pcg = PcgConfig {
        rel_tol: cfg.tol,
        max_iters: cfg.max_iters,
        alpha: cfg.alpha,
        beta_bound: cfg.beta,
    };
    let solver = PcgSolver::new(&mesh, &v, pcg)?;
    let time_offline = t0.elapsed().as_secs_f64();
    let f = schrodinger_rhs(&mesh, cfg.alpha, &v)?;
    let t1 = Instant::now();
    let (u, report) = solver.solve(&f)?;
    let time_solve = t1.elapsed().as_secs_f64();
    Ok(SchrodingerResult {
        dofs: mesh.dofs(),
        l2_error: mesh.error_norm(&u, schrodinger_exact, ErrorNorm::Quadrature),
        max_error: mesh.error_norm(&u, schrodinger_exact, ErrorNorm::Max),
        report,
        time_offline,
        time_solve,
    })
}

pub fn schrodinger_table(r: &SchrodingerResult, with_offline: bool) -> Table {
    let mut header = vec![
        "dofs",
        "iterations",
        "converged",
        "final_residual",
        "l2_error",
        "max_error",
        "time_solve",
    ];
    if with_offline {
        header.push("time_offline");
    }
    let mut t = Table::new(&header);
    let mut row: Vec<Cell> = vec![
        r.dofs.into(),
        r.report.iterations.into(),
        r.report.converged.into(),
        r.report.final_residual.into(),
        r.l2_error.into(),
        r.max_error.into(),
        r.time_solve.into(),
    ];
    if with_offline {
        row.push(r.time_offline.into());
    }
    t.push(row);
    t
}

pub fn residual_table(r: &PcgReport) -> Table {
    let mut t = Table::new(&["iteration", "relative_residual"]);
    for (i, &v) in r.residual_history.iter().enumerate() {
        t.push(vec![(i + 1).into(), v.into()]);
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChRunConfig {
    pub dim: usize,
    pub order: usize,
    pub cells: usize,
    pub ch: ChConfig,
    pub drops: Droplets,
    /// Snapshot times; each maps to the nearest step index.
    pub snapshots: Vec<f64>,
    pub vtk_dir: Option<PathBuf>,
}

impl Default for ChRunConfig {
    fn default() -> Self {
        ChRunConfig {
            dim: 3,
            order: 5,
            cells: 20,
            ch: ChConfig::default(),
            drops: Droplets::default(),
            snapshots: vec![0.0, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2, 10.0],
            vtk_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRow {
    pub step: usize,
    pub time: f64,
    pub energy: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChRunResult {
    pub rows: Vec<EnergyRow>,
    pub snapshot_files: Vec<PathBuf>,
    pub components_initial: usize,
    pub components_final: usize,
    /// `max_n (E_{n+1} − E_n)`, positive values flag an energy increase.
    pub max_energy_increase: f64,
    /// `max_n |mean(φ_n) − mean(φ_0)|`.
    pub max_mean_drift: f64,
    pub time_offline: f64,
    pub time_steps: f64,
}

fn snapshot_steps(times: &[f64], dt: f64, steps: usize) -> Vec<usize> {
    let mut s: Vec<usize> = times
        .iter()
        .filter(|t| t.is_finite() && **t >= 0.0)
        .map(|t| (t / dt).round() as usize)
        .filter(|&n| n <= steps)
        .collect();
    s.sort_unstable();
    s.dedup();
    s
}

/// The two-droplet coalescence run on `[−1, 1]^3` (Neumann).
pub fn run_ch(cfg: &ChRunConfig) -> Result<ChRunResult> {
    check_dim(cfg.dim)?;
    cfg.ch.validate()?;
    let t0 = Instant::now();
    let specs = uniform_specs(cfg.dim, cfg.order, cfg.cells, -1.0, 1.0, BoundaryCondition::Neumann);
    let mesh = TensorMesh::from_specs(&specs)?;
    let setup = ChSetup::new(mesh.clone(), cfg.ch)?;
    let time_offline = t0.elapsed().as_secs_f64();
    if let Some(dir) = &cfg.vtk_dir {
        std::fs::create_dir_all(dir)?;
    }
    let snaps = snapshot_steps(&cfg.snapshots, cfg.ch.dt, cfg.ch.steps);
    let mut state = ChState::new(setup, droplet_initial(&mesh, &cfg.drops, cfg.ch.eps))?;
    let mean0 = state.mean();
    let components_initial = count_components(&state.phi_curr, 0.0);
    let mut rows = Vec::with_capacity(cfg.ch.steps + 1);
    let mut files = Vec::new();
    let mut max_inc = f64::NEG_INFINITY;
    let mut max_drift: f64 = 0.0;
    let record = |state: &ChState, rows: &mut Vec<EnergyRow>, files: &mut Vec<PathBuf>| -> Result<()> {
        rows.push(EnergyRow {
            step: state.step,
            time: state.time(),
            energy: state.energy(),
            mass: state.mass(),
        });
        if let Some(dir) = &cfg.vtk_dir {
            if snaps.binary_search(&state.step).is_ok() {
                let p = dir.join(format!("phi_{:06}.vtk", state.step));
                let title = format!("phi step {} t {}", state.step, state.time());
                write_vtk(&p, "phi", &title, &mesh, &state.phi_curr)?;
                files.push(p);
            }
        }
        Ok(())
    };
    record(&state, &mut rows, &mut files)?;
    let t1 = Instant::now();
    for _ in 0..cfg.ch.steps {
        state.advance(None)?;
        record(&state, &mut rows, &mut files)?;
        let n = rows.len();
        max_inc = max_inc.max(rows[n - 1].energy - rows[n - 2].energy);
        max_drift = max_drift.max((state.mean() - mean0).abs());
    }
    let time_steps = t1.elapsed().as_secs_f64();
    Ok(ChRunResult {
        components_final: count_components(&state.phi_curr, 0.0),
        rows,
        snapshot_files: files,
        components_initial,
        max_energy_increase: max_inc,
        max_mean_drift: max_drift,
        time_offline,
        time_steps,
    })
}

pub fn energy_table(rows: &[EnergyRow]) -> Table {
    let mut t = Table::new(&["step", "time", "energy", "mass"]);
    for r in rows {
        t.push(vec![r.step.into(), r.time.into(), r.energy.into(), r.mass.into()]);
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfig {
    pub cells: usize,
    pub alpha: f64,
    pub repeat: usize,
    pub seed: u64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            cells: 32,
            alpha: 1.0,
            repeat: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareResult {
    pub dofs: usize,
    /// `‖U_fft − U_sem‖₂ / ‖U_sem‖₂`.
    pub rel_difference: f64,
    pub time_sem: f64,
    pub time_fft: f64,
    pub time_offline_sem: f64,
    pub time_offline_fft: f64,
}

/// Q^1 periodic solve by the dense eigenbasis and by FFT on the same data.
pub fn run_compare(cfg: &CompareConfig) -> Result<CompareResult> {
    if cfg.repeat == 0 {
        return Err(Error::Config("repeat must be at least 1".into()));
    }
    if cfg.cells < 2 {
        return Err(Error::Config("compare needs at least 2 cells per direction".into()));
    }
    let specs = uniform_specs(3, 1, cfg.cells, -1.0, 1.0, BoundaryCondition::Periodic);
    let t0 = Instant::now();
    let mesh = TensorMesh::from_specs(&specs)?;
    let sem = plan_poisson(mesh.ops(), cfg.alpha, NullspacePolicy::Project)?;
    let time_offline_sem = t0.elapsed().as_secs_f64();
    let t0 = Instant::now();
    let h = specs[0].cell_width();
    let fft = FftPlan::new(mesh.dims(), [h; 3], cfg.alpha, NullspacePolicy::Project)?;
    let time_offline_fft = t0.elapsed().as_secs_f64();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut f = Grid3::from_fn(mesh.dims(), |_, _, _| rng.random_range(-1.0..1.0));
    if cfg.alpha == 0.0 {
        let mean = f.as_slice().iter().sum::<f64>() / f.len() as f64;
        f.as_mut_slice().iter_mut().for_each(|v| *v -= mean);
    }
    let mut a = solve3d(&sem, &f)?;
    let mut b = fft_poisson_solve(&fft, &f)?;
    let t = Instant::now();
    for _ in 0..cfg.repeat {
        a = solve3d(&sem, &f)?;
    }
    let time_sem = t.elapsed().as_secs_f64() / cfg.repeat as f64;
    let t = Instant::now();
    for _ in 0..cfg.repeat {
        b = fft_poisson_solve(&fft, &f)?;
    }
    let time_fft = t.elapsed().as_secs_f64() / cfg.repeat as f64;
    let norm = a.norm2();
    b.axpy(-1.0, &a)?;
    Ok(CompareResult {
        dofs: mesh.dofs(),
        rel_difference: b.norm2() / norm,
        time_sem,
        time_fft,
        time_offline_sem,
        time_offline_fft,
    })
}

pub fn compare_table(r: &CompareResult, with_offline: bool) -> Table {
    let mut header = vec!["dofs", "rel_difference", "time_sem", "time_fft"];
    if with_offline {
        header.extend(["time_offline_sem", "time_offline_fft"]);
    }
    let mut t = Table::new(&header);
    let mut row: Vec<Cell> = vec![r.dofs.into(), r.rel_difference.into(), r.time_sem.into(), r.time_fft.into()];
    if with_offline {
        row.extend([r.time_offline_sem.into(), r.time_offline_fft.into()]);
    }
    t.push(row);
    t
}

/// Writes `table` to `path`, or to stdout when `path` is `None`.
pub fn emit(table: &Table, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => table.write(p),
        None => table.write_to(std::io::stdout().lock()),
    }
}
