//! Fast-diagonalization solves on tensor-product meshes.
//!
//! With `H = M^{-1} S = T Λ T^{-1}` per direction, the operator
//! `α + H_x ⊕ H_y ⊕ H_z` becomes diagonal in the basis `T_z ⊗ T_y ⊗ T_x`.
//! A [`SolverPlan`] stores that basis and one multiplier per eigenmode, so a
//! solve is three forward contractions, an entrywise product and three
//! backward contractions.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sem1d::{assemble_1d, eig_pencil, BoundaryCondition, MeshSpec1D, Operator1D, Spectral1D};
use crate::tensor_ops::{mode1_apply, mode2_apply, mode3_apply, tensor_apply, Grid2, Grid3};

/// Per-direction operators of a 2D or 3D tensor-product mesh together with
/// the dense strong-form matrices `H = M^{-1} S`.
#[derive(Debug, Clone)]
pub struct TensorMesh {
    ops: Vec<Operator1D>,
    h: Vec<DMatrix<f64>>,
}

impl TensorMesh {
    pub fn new(ops: Vec<Operator1D>) -> Result<Self> {
        if !(2..=3).contains(&ops.len()) {
            return Err(Error::InvalidSpec(format!(
                "expected 2 or 3 directions, got {}",
                ops.len()
            )));
        }
        let h = ops.iter().map(Operator1D::mass_inverse_stiffness).collect();
        Ok(TensorMesh { ops, h })
    }

    /// Same 1D mesh in every direction.
    pub fn uniform(dim: usize, spec: MeshSpec1D) -> Result<Self> {
        let op = assemble_1d(&spec)?;
        TensorMesh::new(vec![op; dim])
    }

    pub fn from_specs(specs: &[MeshSpec1D]) -> Result<Self> {
        let ops = specs.iter().map(assemble_1d).collect::<Result<Vec<_>>>()?;
        TensorMesh::new(ops)
    }

    pub fn dim(&self) -> usize {
        self.ops.len()
    }

    pub fn ops(&self) -> &[Operator1D] {
        &self.ops
    }

    pub fn dims(&self) -> [usize; 3] {
        dims_of(self.ops.iter().map(Operator1D::len))
    }

    pub fn dofs(&self) -> usize {
        self.dims().iter().product()
    }

    /// Tensor-product quadrature weights `M_x ⊗ M_y ⊗ M_z` as a grid.
    pub fn weights(&self) -> Grid3 {
        let m = |d: usize, i: usize| self.ops.get(d).map_or(1.0, |o| o.mass[i]);
        Grid3::from_fn(self.dims(), |i, j, k| m(0, i) * m(1, j) * m(2, k))
    }

    /// Nodal values of `f(x, y, z)`; `z` is 0 for 2D meshes.
    pub fn sample<F: Fn(f64, f64, f64) -> f64>(&self, f: F) -> Grid3 {
        let x = |d: usize, i: usize| self.ops.get(d).map_or(0.0, |o| o.nodes[i]);
        Grid3::from_fn(self.dims(), |i, j, k| f(x(0, i), x(1, j), x(2, k)))
    }

    /// `(H_x ⊕ H_y ⊕ H_z) U`, the strong-form discrete `-Δ`.
    pub fn laplacian(&self, u: &Grid3) -> Result<Grid3> {
        u.check_dims(self.dims())?;
        let mut out = mode1_apply(&self.h[0], u)?;
        out.axpy(1.0, &mode2_apply(&self.h[1], u)?)?;
        if let Some(hz) = self.h.get(2) {
            out.axpy(1.0, &mode3_apply(hz, u)?)?;
        }
        Ok(out)
    }

    /// `sqrt(Σ w_ijk u_ijk^2)`.
    pub fn weighted_norm(&self, u: &Grid3) -> f64 {
        self.weights()
            .as_slice()
            .iter()
            .zip(u.as_slice())
            .map(|(w, v)| w * v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// `Σ w_ijk u_ijk v_ijk`.
    pub fn weighted_dot(&self, u: &Grid3, v: &Grid3) -> f64 {
        self.weights()
            .as_slice()
            .iter()
            .zip(u.as_slice().iter().zip(v.as_slice()))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    /// Quadrature-weighted mean `Σ w u / Σ w`.
    pub fn weighted_mean(&self, u: &Grid3) -> f64 {
        let w = self.weights();
        let total: f64 = w.as_slice().iter().sum();
        w.dot(u) / total
    }

    /// Quadrature-weighted discrete L2 error against `exact`.
    pub fn l2_error<F: Fn(f64, f64, f64) -> f64>(&self, u: &Grid3, exact: F) -> f64 {
        self.error_norm(u, exact, ErrorNorm::Quadrature)
    }

    /// Nodal error against `exact` measured in the given norm.
    pub fn error_norm<F: Fn(f64, f64, f64) -> f64>(&self, u: &Grid3, exact: F, norm: ErrorNorm) -> f64 {
        let mut e = self.sample(exact);
        e.axpy(-1.0, u).expect("sampled grid matches mesh dims");
        match norm {
            ErrorNorm::Quadrature => self.weighted_norm(&e),
            ErrorNorm::CellScaled => {
                let jac: f64 = self.ops.iter().map(|o| 0.5 * o.spec.cell_width()).product();
                e.norm2() * jac.sqrt()
            }
            ErrorNorm::Max => e.norm_inf(),
        }
    }
}

/// Discrete error norms for nodal fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorNorm {
    /// `sqrt(Σ w e²)` with tensor GLL weights.
    #[default]
    Quadrature,
    /// `sqrt(Π(h_d/2) Σ e²)`: plain nodal sum scaled by the reference-cell
    /// Jacobian. Tracks the quadrature norm up to a k-dependent constant.
    CellScaled,
    Max,
}

impl std::str::FromStr for ErrorNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quadrature" | "weighted" => Ok(ErrorNorm::Quadrature),
            "cell" | "cell-scaled" => Ok(ErrorNorm::CellScaled),
            "max" | "inf" => Ok(ErrorNorm::Max),
            other => Err(Error::Config(format!(
                "unknown error norm '{other}' (expected quadrature, cell-scaled or max)"
            ))),
        }
    }
}

fn dims_of<I: Iterator<Item = usize>>(lens: I) -> [usize; 3] {
    let mut d = [1; 3];
    for (slot, n) in d.iter_mut().zip(lens) {
        *slot = n;
    }
    d
}

/// `α U + (H_x ⊕ H_y ⊕ H_z) U + V ∘ U`.
pub fn apply_operator(mesh: &TensorMesh, u: &Grid3, alpha: f64, potential: Option<&Grid3>) -> Result<Grid3> {
    let mut out = mesh.laplacian(u)?;
    out.axpy(alpha, u)?;
    if let Some(v) = potential {
        v.check_dims(mesh.dims())?;
        for ((o, &ui), &vi) in out.as_mut_slice().iter_mut().zip(u.as_slice()).zip(v.as_slice()) {
            *o += vi * ui;
        }
    }
    Ok(out)
}

/// Per-direction eigendecompositions and the eigenvalue sums
/// `λx_i + λy_j + λz_k` (the spectrum of the discrete `-Δ`).
#[derive(Debug, Clone)]
pub struct EigenBasis {
    spectra: Vec<Spectral1D>,
    dims: [usize; 3],
    lambda_sum: Grid3,
}

impl EigenBasis {
    pub fn new(ops: &[Operator1D]) -> Result<Self> {
        if !(2..=3).contains(&ops.len()) {
            return Err(Error::InvalidSpec(format!(
                "expected 2 or 3 directions, got {}",
                ops.len()
            )));
        }
        let spectra = ops.iter().map(eig_pencil).collect::<Result<Vec<_>>>()?;
        let dims = dims_of(spectra.iter().map(Spectral1D::len));
        let l = |d: usize, i: usize| spectra.get(d).map_or(0.0, |s| s.lambdas[i]);
        let lambda_sum = Grid3::from_fn(dims, |i, j, k| l(0, i) + l(1, j) + l(2, k));
        Ok(EigenBasis {
            spectra,
            dims,
            lambda_sum,
        })
    }

    pub fn spectra(&self) -> &[Spectral1D] {
        &self.spectra
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn lambda_sum(&self) -> &Grid3 {
        &self.lambda_sum
    }

    pub fn lambda_sum_max(&self) -> f64 {
        self.lambda_sum.norm_inf()
    }

    /// Threshold below which `|α + λ_sum|` counts as a null mode.
    pub fn null_threshold(&self) -> f64 {
        1e-10 * (1.0 + self.lambda_sum_max())
    }

    /// Coefficients in the eigenbasis: `(T_z^{-1} ⊗ T_y^{-1} ⊗ T_x^{-1}) vec(F)`.
    pub fn forward(&self, f: &Grid3) -> Result<Grid3> {
        f.check_dims(self.dims)?;
        let s = &self.spectra;
        tensor_apply(Some(&s[0].t_inv), Some(&s[1].t_inv), s.get(2).map(|z| &z.t_inv), f)
    }

    /// Nodal values from eigen-coefficients: `(T_z ⊗ T_y ⊗ T_x) vec(C)`.
    pub fn backward(&self, c: &Grid3) -> Result<Grid3> {
        c.check_dims(self.dims)?;
        let s = &self.spectra;
        tensor_apply(Some(&s[0].t), Some(&s[1].t), s.get(2).map(|z| &z.t), c)
    }
}

/// What to do with modes where `α + λ_sum` vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NullspacePolicy {
    Reject,
    /// Zero the coefficient (pseudo-inverse, mean-zero solution).
    #[default]
    Project,
}

/// A precomputed diagonal solve `T diag(multiplier) T^{-1}`.
#[derive(Debug, Clone)]
pub struct SolverPlan {
    basis: Arc<EigenBasis>,
    alpha: Option<f64>,
    multiplier: Grid3,
    projected: usize,
}

impl SolverPlan {
    /// Inverse of `α + (-Δ_h)`: multiplier `1 / (α + λ_sum)`.
    pub fn poisson(basis: Arc<EigenBasis>, alpha: f64, policy: NullspacePolicy) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::Precondition(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        let eps = basis.null_threshold();
        let mut projected = 0;
        let mut data = Vec::with_capacity(basis.lambda_sum.len());
        for &l in basis.lambda_sum.as_slice() {
            let den = alpha + l;
            if den.abs() < eps {
                if policy == NullspacePolicy::Reject {
                    return Err(Error::Singular(format!(
                        "alpha + lambda = {den:e} is below the null threshold {eps:e}; \
                         use alpha > 0 or the project policy"
                    )));
                }
                projected += 1;
                data.push(0.0);
            } else {
                data.push(1.0 / den);
            }
        }
        let multiplier = Grid3::from_vec(basis.dims, data)?;
        Ok(SolverPlan {
            basis,
            alpha: Some(alpha),
            multiplier,
            projected,
        })
    }

    /// General diagonal symbol: multiplier `g(λ_sum)`.
    pub fn diagonal<G: Fn(f64) -> f64>(basis: Arc<EigenBasis>, g: G) -> Result<Self> {
        let mut data = Vec::with_capacity(basis.lambda_sum.len());
        for &l in basis.lambda_sum.as_slice() {
            let v = g(l);
            if !v.is_finite() {
                return Err(Error::NonFiniteSymbol { lambda: l, value: v });
            }
            data.push(v);
        }
        let multiplier = Grid3::from_vec(basis.dims, data)?;
        Ok(SolverPlan {
            basis,
            alpha: None,
            multiplier,
            projected: 0,
        })
    }

    pub fn basis(&self) -> &Arc<EigenBasis> {
        &self.basis
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn multiplier(&self) -> &Grid3 {
        &self.multiplier
    }

    /// Number of modes zeroed by the projection policy.
    pub fn projected_count(&self) -> usize {
        self.projected
    }

    pub fn dims(&self) -> [usize; 3] {
        self.basis.dims
    }

    /// Entrywise product with the multiplier, in eigen-coefficient space.
    pub fn scale_coefficients(&self, c: &mut Grid3) -> Result<()> {
        c.mul_assign(&self.multiplier)
    }
}

/// Fast-diagonalization plan for `α - Δ_h` on the given directions.
pub fn plan_poisson(ops: &[Operator1D], alpha: f64, policy: NullspacePolicy) -> Result<SolverPlan> {
    SolverPlan::poisson(Arc::new(EigenBasis::new(ops)?), alpha, policy)
}

/// Plan applying `T diag(g(λ_sum)) T^{-1}`.
pub fn plan_diagonal<G: Fn(f64) -> f64>(ops: &[Operator1D], g: G) -> Result<SolverPlan> {
    SolverPlan::diagonal(Arc::new(EigenBasis::new(ops)?), g)
}

/// `vec(U) = (Tz ⊗ Ty ⊗ Tx) diag(multiplier) (Tz^{-1} ⊗ Ty^{-1} ⊗ Tx^{-1}) vec(F)`.
pub fn solve3d(plan: &SolverPlan, f: &Grid3) -> Result<Grid3> {
    let mut c = plan.basis.forward(f)?;
    plan.scale_coefficients(&mut c)?;
    plan.basis.backward(&c)
}

/// `U = Tx [(Tx^{-1} F Ty^{-T}) ./ Λ2D] Ty^T` for a two-direction plan.
pub fn solve2d(plan: &SolverPlan, f: &Grid2) -> Result<Grid2> {
    if plan.basis.spectra.len() != 2 {
        return Err(Error::Precondition("solve2d needs a two-direction plan".into()));
    }
    let u = solve3d(plan, &Grid3::from(f.clone()))?;
    Grid2::try_from(u)
}

/// Convenience: uniform mesh in every direction with the given boundary condition.
pub fn uniform_specs(dim: usize, order: usize, cells: usize, a: f64, b: f64, bc: BoundaryCondition) -> Vec<MeshSpec1D> {
    vec![MeshSpec1D::new(order, cells, a, b, bc); dim]
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use BoundaryCondition::*;

    fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(a.nrows() * b.nrows(), a.ncols() * b.ncols(), |r, c| {
            a[(r / b.nrows(), c / b.ncols())] * b[(r % b.nrows(), c % b.ncols())]
        })
    }

    /// Dense `α I + Σ_d I ⊗ .. ⊗ H_d ⊗ .. ⊗ I` in vec ordering (x fastest).
    fn dense_operator(mesh: &TensorMesh, alpha: f64) -> DMatrix<f64> {
        let hs = mesh.ops().iter().map(|o| o.mass_inverse_stiffness()).collect::<Vec<_>>();
        let eye = |n: usize| DMatrix::<f64>::identity(n, n);
        let n = mesh.dofs();
        let mut a = eye(n) * alpha;
        for d in 0..hs.len() {
            // Kronecker factors ordered slowest (last axis) to fastest.
            let mut m = DMatrix::<f64>::identity(1, 1);
            for axis in (0..hs.len()).rev() {
                let f = if axis == d { hs[axis].clone() } else { eye(hs[axis].nrows()) };
                m = kron(&m, &f);
            }
            a += m;
        }
        a
    }

    fn random_grid(dims: [usize; 3], seed: u64) -> Grid3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Grid3::from_fn(dims, |_, _, _| rng.random_range(-1.0..1.0))
    }

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        let num = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        num / b.iter().map(|y| y * y).sum::<f64>().sqrt()
    }

    fn mesh(specs: &[(usize, usize, BoundaryCondition)]) -> TensorMesh {
        let specs = specs
            .iter()
            .map(|&(k, n, bc)| MeshSpec1D::new(k, n, -1.0, 1.0, bc))
            .collect::<Vec<_>>();
        TensorMesh::from_specs(&specs).unwrap()
    }

    #[test]
    fn multiplier_examples() {
        // One Q1 cell of width sqrt(2): lambdas {0, 2}.
        let spec = MeshSpec1D::new(1, 1, 0.0, 2f64.sqrt(), Neumann);
        let ops = vec![assemble_1d(&spec).unwrap(); 3];
        let plan = plan_poisson(&ops, 1.0, NullspacePolicy::Reject).unwrap();
        let m = plan.multiplier();
        assert!((m.get(0, 0, 0) - 1.0).abs() < 1e-14);
        assert!((m.get(1, 1, 1) - 1.0 / 7.0).abs() < 1e-14);
        assert_eq!(plan.projected_count(), 0);

        let plan = plan_poisson(&ops, 0.0, NullspacePolicy::Project).unwrap();
        assert_eq!(plan.multiplier().get(0, 0, 0), 0.0);
        assert_eq!(plan.projected_count(), 1);
        assert!(plan.multiplier().all_finite());

        let err = plan_poisson(&ops, 0.0, NullspacePolicy::Reject).unwrap_err();
        assert!(matches!(err, Error::Singular(_)));

        let m = mesh(&[(2, 3, Dirichlet); 3]);
        let plan = plan_poisson(m.ops(), 0.0, NullspacePolicy::Reject).unwrap();
        assert!(plan.multiplier().as_slice().iter().all(|&v| v.is_finite() && v > 0.0));
    }

    #[test]
    fn constant_data_is_reproduced() {
        let m = mesh(&[(3, 2, Neumann); 3]);
        let plan = plan_poisson(m.ops(), 1.0, NullspacePolicy::Reject).unwrap();
        let f = Grid3::filled(m.dims(), 2.5);
        let u = solve3d(&plan, &f).unwrap();
        assert!(u.as_slice().iter().all(|&v| (v - 2.5).abs() < 1e-12));
        let r = apply_operator(&m, &f, 1.0, None).unwrap();
        assert!(r.as_slice().iter().all(|&v| (v - 2.5).abs() < 1e-11));

        let m2 = mesh(&[(3, 2, Neumann); 2]);
        let plan = plan_poisson(m2.ops(), 1.0, NullspacePolicy::Reject).unwrap();
        let f = Grid2::from_fn([m2.dims()[0], m2.dims()[1]], |_, _| -1.0);
        let u = solve2d(&plan, &f).unwrap();
        assert!(u.as_slice().iter().all(|&v| (v + 1.0).abs() < 1e-12));
    }

    #[test]
    fn matches_dense_solve_on_tiny_meshes() {
        for bc in [Dirichlet, Neumann, Periodic] {
            for k in [1, 2] {
                let m = mesh(&[(k, 2, bc); 3]);
                let plan = plan_poisson(m.ops(), 1.0, NullspacePolicy::Reject).unwrap();
                let f = random_grid(m.dims(), 7);
                let u = solve3d(&plan, &f).unwrap();
                let a = dense_operator(&m, 1.0);
                let expect = a.lu().solve(&DVector::from_column_slice(f.as_slice())).unwrap();
                assert!(rel(u.as_slice(), expect.as_slice()) < 1e-12, "bc={bc} k={k}");
            }
        }
        let m = mesh(&[(2, 1, Dirichlet), (2, 2, Dirichlet), (2, 1, Dirichlet)]);
        let plan = plan_poisson(m.ops(), 0.0, NullspacePolicy::Reject).unwrap();
        let f = random_grid(m.dims(), 3);
        let u = solve3d(&plan, &f).unwrap();
        let expect = dense_operator(&m, 0.0).lu().solve(&DVector::from_column_slice(f.as_slice())).unwrap();
        assert!(rel(u.as_slice(), expect.as_slice()) < 1e-12);
    }

    #[test]
    fn solve2d_matches_dense() {
        let m = mesh(&[(2, 1, Neumann), (1, 1, Neumann)]);
        let plan = plan_poisson(m.ops(), 1.0, NullspacePolicy::Reject).unwrap();
        let [nx, ny, _] = m.dims();
        let f = Grid2::from_fn([nx, ny], |i, j| (i as f64 + 1.0) * (2.0 - j as f64));
        let u = solve2d(&plan, &f).unwrap();
        let expect = dense_operator(&m, 1.0).lu().solve(&DVector::from_column_slice(f.as_slice())).unwrap();
        assert!(rel(u.as_slice(), expect.as_slice()) < 1e-12);
    }

    #[test]
    fn operator_matches_dense_multiply() {
        let m = mesh(&[(2, 2, Periodic), (1, 3, Neumann), (2, 1, Dirichlet)]);
        let u = random_grid(m.dims(), 11);
        let v = random_grid(m.dims(), 12).map(f64::abs);
        let got = apply_operator(&m, &u, 0.7, Some(&v)).unwrap();
        let mut a = dense_operator(&m, 0.7);
        for i in 0..m.dofs() {
            a[(i, i)] += v.as_slice()[i];
        }
        let expect = a * DVector::from_column_slice(u.as_slice());
        assert!(rel(got.as_slice(), expect.as_slice()) < 1e-12);
    }

    #[test]
    fn diagonal_plans() {
        let m = mesh(&[(2, 2, Neumann); 3]);
        let basis = Arc::new(EigenBasis::new(m.ops()).unwrap());
        let f = random_grid(m.dims(), 5);

        let id = SolverPlan::diagonal(basis.clone(), |_| 1.0).unwrap();
        let u = solve3d(&id, &f).unwrap();
        assert!(rel(u.as_slice(), f.as_slice()) < 1e-12);

        let g = SolverPlan::diagonal(basis.clone(), |s| 1.0 / (1.0 + s)).unwrap();
        let p = SolverPlan::poisson(basis.clone(), 1.0, NullspacePolicy::Reject).unwrap();
        let (ug, up) = (solve3d(&g, &f).unwrap(), solve3d(&p, &f).unwrap());
        assert!(rel(ug.as_slice(), up.as_slice()) < 1e-14);

        let lap = SolverPlan::diagonal(basis.clone(), |s| s).unwrap();
        let got = solve3d(&lap, &f).unwrap();
        let expect = dense_operator(&m, 0.0) * DVector::from_column_slice(f.as_slice());
        assert!(rel(got.as_slice(), expect.as_slice()) < 1e-12);

        let err = SolverPlan::diagonal(basis, |s| 1.0 / s).unwrap_err();
        assert!(matches!(err, Error::NonFiniteSymbol { .. }));
    }

    #[test]
    fn shape_errors() {
        let m = mesh(&[(2, 2, Neumann); 3]);
        let plan = plan_poisson(m.ops(), 1.0, NullspacePolicy::Reject).unwrap();
        let f = Grid3::zeros([2, 2, 2]);
        assert!(matches!(solve3d(&plan, &f), Err(Error::Shape { .. })));
        assert!(matches!(apply_operator(&m, &f, 1.0, None), Err(Error::Shape { .. })));
        let f2 = Grid2::from_fn([5, 5], |_, _| 0.0);
        assert!(solve2d(&plan, &f2).is_err());
        assert!(TensorMesh::new(vec![m.ops()[0].clone()]).is_err());
        assert!(plan_poisson(m.ops(), -1.0, NullspacePolicy::Project).is_err());
    }

    #[test]
    fn inverse_round_trip_and_self_adjointness() {
        for bc in [Dirichlet, Neumann, Periodic] {
            for (k, n) in [(1, 12), (2, 6), (5, 2)] {
                let m = mesh(&[(k, n, bc); 3]);
                let plan = plan_poisson(m.ops(), 1.0, NullspacePolicy::Reject).unwrap();
                let f = random_grid(m.dims(), 21);
                let g = random_grid(m.dims(), 22);
                let u = solve3d(&plan, &f).unwrap();
                let mut back = apply_operator(&m, &u, 1.0, None).unwrap();
                back.axpy(-1.0, &f).unwrap();
                assert!(back.norm_inf() <= 1e-9 * f.norm_inf(), "bc={bc} k={k}");

                let v = solve3d(&plan, &g).unwrap();
                let lhs = m.weighted_dot(&u, &g);
                let rhs = m.weighted_dot(&f, &v);
                assert!((lhs - rhs).abs() <= 1e-9 * f.norm2() * g.norm2());
            }
        }
    }

    #[test]
    fn pure_neumann_projection() {
        let m = mesh(&[(3, 3, Neumann); 3]);
        let plan = plan_poisson(m.ops(), 0.0, NullspacePolicy::Project).unwrap();
        assert_eq!(plan.projected_count(), 1);
        let f = random_grid(m.dims(), 9);
        let u = solve3d(&plan, &f).unwrap();
        assert!(m.weighted_mean(&u).abs() < 1e-10);
        let r = apply_operator(&m, &u, 0.0, None).unwrap();
        let mean = m.weighted_mean(&f);
        let mut expect = f.clone();
        expect.as_mut_slice().iter_mut().for_each(|v| *v -= mean);
        let mut diff = r;
        diff.axpy(-1.0, &expect).unwrap();
        assert!(diff.norm_inf() < 1e-10 * f.norm_inf());
    }

    #[test]
    fn q2_dirichlet_2d_superconvergence() {
        let pi = std::f64::consts::PI;
        let exact = |x: f64, y: f64, _z: f64| (pi * x).sin() * (pi * y).sin();
        let error = |cells: usize| {
            let specs = uniform_specs(2, 2, cells, -1.0, 1.0, Dirichlet);
            let m = TensorMesh::from_specs(&specs).unwrap();
            let plan = plan_poisson(m.ops(), 0.0, NullspacePolicy::Reject).unwrap();
            let f = m.sample(|x, y, z| 2.0 * pi * pi * exact(x, y, z));
            let u = solve3d(&plan, &f).unwrap();
            m.l2_error(&u, exact)
        };
        let (e4, e8) = (error(4), error(8));
        let order = (e4 / e8).log2();
        assert!(order >= 3.0, "order {order}");
    }
}
