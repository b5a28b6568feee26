//! Stabilized BDF2 stepping for the Cahn–Hilliard system with homogeneous
//! Neumann data.
//!
//! With `L = −Δ_h` (spectrum `s = λ_sum ≥ 0`) each step solves
//!
//! ```text
//! a φ + mδt ε L²φ + mδt (S/ε) L φ = φ̂ + δt f − mδt L ((1/ε) F'(φ̄) − (S/ε) φ̄)
//! ```
//!
//! which is diagonal in the shared eigenbasis: two forward transforms, two
//! entrywise symbols and one backward transform per step.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::direct_solver::{EigenBasis, SolverPlan, TensorMesh};
use crate::error::{Error, Result};
use crate::tensor_ops::Grid3;

/// Source term `f(t, x, y, z)` added to the phase equation.
pub type Forcing = dyn Fn(f64, f64, f64, f64) -> f64 + Send + Sync;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChConfig {
    pub eps: f64,
    pub mobility: f64,
    pub dt: f64,
    /// Linear stabilization coefficient `S`.
    pub stab: f64,
    pub steps: usize,
}

impl Default for ChConfig {
    fn default() -> Self {
        ChConfig {
            eps: 0.02,
            mobility: 0.02,
            dt: 0.001,
            stab: 2.0,
            steps: 10_000,
        }
    }
}

impl ChConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eps", self.eps), ("mobility", self.mobility), ("dt", self.dt)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !(self.stab >= 0.0) || !self.stab.is_finite() {
            return Err(Error::Config(format!("stab must be finite and >= 0, got {}", self.stab)));
        }
        Ok(())
    }

    /// `g_D(s) = 1 / (a + mδtε s² + mδt(S/ε) s)`.
    pub fn symbol_d(&self, a: f64, s: f64) -> f64 {
        let mdt = self.mobility * self.dt;
        1.0 / (a + mdt * self.eps * s * s + mdt * self.stab / self.eps * s)
    }

    /// `g_DΔ(s) = −s g_D(s)`.
    pub fn symbol_dlap(&self, a: f64, s: f64) -> f64 {
        -s * self.symbol_d(a, s)
    }
}

/// The two diagonal-symbol plans `(𝒟, 𝒟Δ)` for leading coefficient `a`.
pub fn ch_plans(basis: &Arc<EigenBasis>, cfg: &ChConfig, a: f64) -> Result<(SolverPlan, SolverPlan)> {
    cfg.validate()?;
    let d = SolverPlan::diagonal(basis.clone(), |s| cfg.symbol_d(a, s))?;
    let dl = SolverPlan::diagonal(basis.clone(), |s| cfg.symbol_dlap(a, s))?;
    Ok((d, dl))
}

/// Everything a run needs besides the phase fields: mesh, shared eigenbasis,
/// and the BDF1 (bootstrap) and BDF2 symbol plans.
#[derive(Debug)]
pub struct ChSetup {
    mesh: TensorMesh,
    basis: Arc<EigenBasis>,
    weights: Grid3,
    bdf1: (SolverPlan, SolverPlan),
    bdf2: (SolverPlan, SolverPlan),
    cfg: ChConfig,
}

impl ChSetup {
    pub fn new(mesh: TensorMesh, cfg: ChConfig) -> Result<Arc<Self>> {
        cfg.validate()?;
        let basis = Arc::new(EigenBasis::new(mesh.ops())?);
        let bdf1 = ch_plans(&basis, &cfg, 1.0)?;
        let bdf2 = ch_plans(&basis, &cfg, 1.5)?;
        let weights = mesh.weights();
        Ok(Arc::new(ChSetup {
            mesh,
            basis,
            weights,
            bdf1,
            bdf2,
            cfg,
        }))
    }

    pub fn mesh(&self) -> &TensorMesh {
        &self.mesh
    }

    pub fn config(&self) -> &ChConfig {
        &self.cfg
    }

    pub fn basis(&self) -> &Arc<EigenBasis> {
        &self.basis
    }

    /// `(𝒟, 𝒟Δ)` for BDF2 (`a = 3/2`).
    pub fn bdf2_plans(&self) -> &(SolverPlan, SolverPlan) {
        &self.bdf2
    }

    /// `(𝒟, 𝒟Δ)` for the BDF1 bootstrap (`a = 1`).
    pub fn bdf1_plans(&self) -> &(SolverPlan, SolverPlan) {
        &self.bdf1
    }

    fn bulk_energy(&self, phi: &Grid3) -> f64 {
        let f = |p: f64| 0.25 * (p * p - 1.0).powi(2);
        let s: f64 = self
            .weights
            .as_slice()
            .iter()
            .zip(phi.as_slice())
            .map(|(w, &p)| w * f(p))
            .sum();
        s / self.cfg.eps
    }
}

/// Phase-field state: `φ_n`, `φ_{n−1}`, the step index and the eigen
/// coefficients of `φ_n` (kept so the energy needs no extra transform).
#[derive(Debug, Clone)]
pub struct ChState {
    pub phi_curr: Grid3,
    pub phi_prev: Grid3,
    pub step: usize,
    coeffs: Grid3,
    setup: Arc<ChSetup>,
}

impl ChState {
    pub fn new(setup: Arc<ChSetup>, phi0: Grid3) -> Result<Self> {
        let coeffs = setup.basis.forward(&phi0)?;
        Ok(ChState {
            phi_prev: phi0.clone(),
            phi_curr: phi0,
            step: 0,
            coeffs,
            setup,
        })
    }

    pub fn setup(&self) -> &Arc<ChSetup> {
        &self.setup
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.setup.cfg.dt
    }

    /// `∫ φ` by quadrature.
    pub fn mass(&self) -> f64 {
        self.setup.weights.dot(&self.phi_curr)
    }

    /// Quadrature-weighted mean of `φ_n`.
    pub fn mean(&self) -> f64 {
        self.mass() / self.setup.weights.as_slice().iter().sum::<f64>()
    }

    /// Discrete energy of `φ_n`. In the M-orthonormal eigenbasis
    /// `⟨φ, Kφ⟩ = Σ λ_sum c²`, so this equals [`ch_energy`] up to round-off.
    pub fn energy(&self) -> f64 {
        let grad: f64 = self
            .setup
            .basis
            .lambda_sum()
            .as_slice()
            .iter()
            .zip(self.coeffs.as_slice())
            .map(|(l, c)| l * c * c)
            .sum();
        0.5 * self.setup.cfg.eps * grad + self.setup.bulk_energy(&self.phi_curr)
    }

    /// Advances one step; the first step is BDF1, later ones BDF2.
    pub fn advance(&mut self, forcing: Option<&Forcing>) -> Result<()> {
        let setup = self.setup.clone();
        let cfg = &setup.cfg;
        let (pd, pdl) = if self.step == 0 { &setup.bdf1 } else { &setup.bdf2 };
        let (mut hat, bar) = if self.step == 0 {
            (self.phi_curr.clone(), self.phi_curr.clone())
        } else {
            let mut hat = self.phi_curr.clone();
            hat.scale(2.0);
            hat.axpy(-0.5, &self.phi_prev)?;
            let mut bar = self.phi_curr.clone();
            bar.scale(2.0);
            bar.axpy(-1.0, &self.phi_prev)?;
            (hat, bar)
        };
        if let Some(f) = forcing {
            let t = (self.step + 1) as f64 * cfg.dt;
            hat.axpy(cfg.dt, &setup.mesh.sample(|x, y, z| f(t, x, y, z)))?;
        }
        // (mδt/ε)(F'(φ̄) − S φ̄)
        let c = cfg.mobility * cfg.dt / cfg.eps;
        let stab = cfg.stab;
        let nonlinear = bar.map(|p| c * (p * p * p - p - stab * p));

        let mut chat = setup.basis.forward(&hat)?;
        let mut cnl = setup.basis.forward(&nonlinear)?;
        pd.scale_coefficients(&mut chat)?;
        pdl.scale_coefficients(&mut cnl)?;
        chat.axpy(1.0, &cnl)?;
        let next = setup.basis.backward(&chat)?;
        if !next.all_finite() {
            return Err(Error::BlowUp { step: self.step + 1 });
        }
        self.phi_prev = std::mem::replace(&mut self.phi_curr, next);
        self.coeffs = chat;
        self.step += 1;
        Ok(())
    }
}

/// One time step (see [`ChState::advance`]).
pub fn ch_step(state: &mut ChState, forcing: Option<&Forcing>) -> Result<()> {
    state.advance(forcing)
}

/// `E_h = (ε/2) Σ w φ (H_sum φ) + (1/ε) Σ w F(φ)` with `F = ¼(φ² − 1)²`,
/// computed directly with mode contractions.
pub fn ch_energy(phi: &Grid3, mesh: &TensorMesh, eps: f64) -> Result<f64> {
    let lap = mesh.laplacian(phi)?;
    let w = mesh.weights();
    let mut grad = 0.0;
    let mut bulk = 0.0;
    for ((&wi, &p), &lp) in w.as_slice().iter().zip(phi.as_slice()).zip(lap.as_slice()) {
        grad += wi * p * lp;
        bulk += wi * 0.25 * (p * p - 1.0).powi(2);
    }
    Ok(0.5 * eps * grad + bulk / eps)
}

/// Two-sphere initial data
/// `1 − tanh((|x − c₁| − R)/(√2 ε)) − tanh((|x − c₂| − R)/(√2 ε))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Droplets {
    pub radius: f64,
    pub centers: [[f64; 3]; 2],
}

impl Default for Droplets {
    fn default() -> Self {
        Droplets {
            radius: 0.35,
            centers: [[0.0, 0.0, 0.37], [0.0, 0.0, -0.37]],
        }
    }
}

impl Droplets {
    pub fn eval(&self, eps: f64, x: f64, y: f64, z: f64) -> f64 {
        let w = std::f64::consts::SQRT_2 * eps;
        let t = |c: &[f64; 3]| {
            let r = ((x - c[0]).powi(2) + (y - c[1]).powi(2) + (z - c[2]).powi(2)).sqrt();
            ((r - self.radius) / w).tanh()
        };
        // One sum so that swapping the centers is exact.
        1.0 - (t(&self.centers[0]) + t(&self.centers[1]))
    }
}

pub fn droplet_initial(mesh: &TensorMesh, drops: &Droplets, eps: f64) -> Grid3 {
    mesh.sample(|x, y, z| drops.eval(eps, x, y, z))
}

/// Number of 6-connected components of `{φ > level}` on the nodal grid.
pub fn count_components(phi: &Grid3, level: f64) -> usize {
    let [nx, ny, nz] = phi.dims();
    let inside: Vec<bool> = phi.as_slice().iter().map(|&v| v > level).collect();
    let mut seen = vec![false; inside.len()];
    let mut queue = VecDeque::new();
    let mut count = 0;
    for start in 0..inside.len() {
        if !inside[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            let (i, j, k) = (idx % nx, (idx / nx) % ny, idx / (nx * ny));
            let mut visit = |cond: bool, n: usize| {
                if cond && inside[n] && !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            };
            visit(i > 0, idx.wrapping_sub(1));
            visit(i + 1 < nx, idx + 1);
            visit(j > 0, idx.wrapping_sub(nx));
            visit(j + 1 < ny, idx + nx);
            visit(k > 0, idx.wrapping_sub(nx * ny));
            visit(k + 1 < nz, idx + nx * ny);
        }
    }
    count
}

/// `φ* = cos(πx) cos(πy) cos(πz) eᵗ`.
pub fn manufactured_exact(t: f64, x: f64, y: f64, z: f64) -> f64 {
    let pi = std::f64::consts::PI;
    (pi * x).cos() * (pi * y).cos() * (pi * z).cos() * t.exp()
}

/// Source term making [`manufactured_exact`] solve `φ_t − mΔμ = f`,
/// `μ = −εΔφ + (1/ε)(φ³ − φ)`.
pub fn manufactured_forcing(eps: f64, mobility: f64) -> impl Fn(f64, f64, f64, f64) -> f64 + Send + Sync {
    move |t, x, y, z| {
        let pi = std::f64::consts::PI;
        let (sx, cx) = (pi * x).sin_cos();
        let (sy, cy) = (pi * y).sin_cos();
        let (sz, cz) = (pi * z).sin_cos();
        let e = t.exp();
        let phi = cx * cy * cz * e;
        let lap_phi = -3.0 * pi * pi * phi;
        let grad2 = pi * pi * e * e * ((sx * cy * cz).powi(2) + (cx * sy * cz).powi(2) + (cx * cy * sz).powi(2));
        let lap_cube = 3.0 * phi * phi * lap_phi + 6.0 * phi * grad2;
        let lap_mu = -eps * (-3.0 * pi * pi) * lap_phi + (lap_cube - lap_phi) / eps;
        phi - mobility * lap_mu
    }
}
