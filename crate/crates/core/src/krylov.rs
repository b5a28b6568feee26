//! Preconditioned conjugate gradient for `α u − Δu + V u = f`.
//!
//! The discrete operator `A = α + H_x ⊕ H_y ⊕ H_z + diag(V)` is not
//! symmetric in the Euclidean sense but it is self-adjoint and positive in
//! the mass inner product `⟨u, v⟩_M = Σ w u v`, and so is the preconditioner
//! `((α + β/2) − Δ_h)^{-1}`. CG is therefore run in that inner product; the
//! stopping test uses the plain Euclidean residual.

use crate::direct_solver::{apply_operator, plan_poisson, solve3d, NullspacePolicy, SolverPlan, TensorMesh};
use crate::error::{Error, Result};
use crate::tensor_ops::Grid3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgConfig {
    pub rel_tol: f64,
    pub max_iters: usize,
    pub alpha: f64,
    /// Upper bound `β` of the potential, `0 ≤ V ≤ β`.
    pub beta_bound: f64,
}

impl Default for PcgConfig {
    fn default() -> Self {
        PcgConfig {
            rel_tol: 1e-12,
            max_iters: 2000,
            alpha: 1.0,
            beta_bound: 0.0,
        }
    }
}

impl PcgConfig {
    pub fn new(alpha: f64, beta_bound: f64) -> Self {
        PcgConfig {
            alpha,
            beta_bound,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::Config(format!("rel_tol must be > 0, got {}", self.rel_tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.beta_bound >= 0.0) || !self.beta_bound.is_finite() {
            return Err(Error::Config(format!("beta bound must be finite and >= 0, got {}", self.beta_bound)));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::Config(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcgReport {
    pub iterations: usize,
    /// `‖F − A U_i‖₂ / ‖F‖₂` after each iteration (recurrence residual).
    pub residual_history: Vec<f64>,
    pub converged: bool,
    /// Recomputed `‖F − A U‖₂ / ‖F‖₂` for the returned iterate.
    pub final_residual: f64,
}

/// A PCG solver with its preconditioner plan built once (the offline step).
#[derive(Debug, Clone)]
pub struct PcgSolver<'a> {
    mesh: &'a TensorMesh,
    potential: Grid3,
    weights: Grid3,
    precond: SolverPlan,
    cfg: PcgConfig,
}

impl<'a> PcgSolver<'a> {
    pub fn new(mesh: &'a TensorMesh, potential: &Grid3, cfg: PcgConfig) -> Result<Self> {
        cfg.validate()?;
        potential.check_dims(mesh.dims())?;
        let slack = 1e-12 * cfg.beta_bound.max(1.0);
        if let Some(&v) = potential
            .as_slice()
            .iter()
            .find(|&&v| !(v >= -slack && v <= cfg.beta_bound + slack))
        {
            return Err(Error::Precondition(format!(
                "potential value {v} lies outside [0, {}]",
                cfg.beta_bound
            )));
        }
        let precond = plan_poisson(mesh.ops(), cfg.alpha + 0.5 * cfg.beta_bound, NullspacePolicy::Project)?;
        Ok(PcgSolver {
            mesh,
            potential: potential.clone(),
            weights: mesh.weights(),
            precond,
            cfg,
        })
    }

    pub fn config(&self) -> &PcgConfig {
        &self.cfg
    }

    pub fn apply(&self, u: &Grid3) -> Result<Grid3> {
        apply_operator(self.mesh, u, self.cfg.alpha, Some(&self.potential))
    }

    fn mdot(&self, a: &Grid3, b: &Grid3) -> f64 {
        self.weights
            .as_slice()
            .iter()
            .zip(a.as_slice().iter().zip(b.as_slice()))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }

    /// Runs PCG from `U₀ = 0`. Hitting `max_iters` is not an error: the
    /// last iterate is returned with `converged = false`.
    pub fn solve(&self, f: &Grid3) -> Result<(Grid3, PcgReport)> {
        f.check_dims(self.mesh.dims())?;
        let fnorm = f.norm2();
        let mut u = Grid3::zeros(f.dims());
        if fnorm == 0.0 {
            let report = PcgReport {
                iterations: 0,
                residual_history: Vec::new(),
                converged: true,
                final_residual: 0.0,
            };
            return Ok((u, report));
        }

        let mut r = f.clone();
        let mut z = solve3d(&self.precond, &r)?;
        let mut p = z.clone();
        let mut rz = self.mdot(&r, &z);
        let mut history = Vec::new();
        let mut converged = false;

        for _ in 0..self.cfg.max_iters {
            let ap = self.apply(&p)?;
            let pap = self.mdot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::Internal(format!("PCG breakdown: <p, Ap>_M = {pap:e}")));
            }
            let step = rz / pap;
            u.axpy(step, &p)?;
            r.axpy(-step, &ap)?;
            let rel = r.norm2() / fnorm;
            history.push(rel);
            if !rel.is_finite() {
                return Err(Error::Internal("PCG residual became non-finite".into()));
            }
            if rel <= self.cfg.rel_tol {
                converged = true;
                break;
            }
            z = solve3d(&self.precond, &r)?;
            let rz_next = self.mdot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            // p = z + beta p
            p.scale(beta);
            p.axpy(1.0, &z)?;
        }

        let mut res = self.apply(&u)?;
        res.axpy(-1.0, f)?;
        let report = PcgReport {
            iterations: history.len(),
            residual_history: history,
            converged,
            final_residual: res.norm2() / fnorm,
        };
        Ok((u, report))
    }
}

/// One-shot PCG solve of `α U + H U + V∘U = F`; builds the preconditioner
/// `plan_poisson(α + β/2)` and runs [`PcgSolver::solve`].
pub fn pcg_solve(mesh: &TensorMesh, v: &Grid3, f: &Grid3, cfg: &PcgConfig) -> Result<(Grid3, PcgReport)> {
    PcgSolver::new(mesh, v, *cfg)?.solve(f)
}

/// `V = β sin²(πx/4) sin²(πy/4) sin²(πz/4)` at the mesh nodes (z = 0 in 2D
/// drops the z factor).
pub fn schrodinger_potential(beta: f64, mesh: &TensorMesh) -> Grid3 {
    let s2 = |t: f64| (std::f64::consts::FRAC_PI_4 * t).sin().powi(2);
    let three_d = mesh.dim() == 3;
    mesh.sample(|x, y, z| beta * s2(x) * s2(y) * if three_d { s2(z) } else { 1.0 })
}

/// Exact solution `cos(πx/16) cos(πy/16) cos(πz/16)` of the benchmark problem.
pub fn schrodinger_exact(x: f64, y: f64, z: f64) -> f64 {
    let c = |t: f64| (std::f64::consts::PI * t / 16.0).cos();
    c(x) * c(y) * c(z)
}

/// Nodal right-hand side `(α + d(π/16)²) u + V u` for [`schrodinger_exact`].
pub fn schrodinger_rhs(mesh: &TensorMesh, alpha: f64, v: &Grid3) -> Result<Grid3> {
    v.check_dims(mesh.dims())?;
    let k2 = (std::f64::consts::PI / 16.0).powi(2) * mesh.dim() as f64;
    let mut f = mesh.sample(schrodinger_exact);
    for (fi, vi) in f.as_mut_slice().iter_mut().zip(v.as_slice()) {
        *fi *= alpha + k2 + vi;
    }
    Ok(f)
}
