//! One-dimensional spectral-element operators on a uniform mesh and the
//! eigendecomposition of the pencil `(S, M)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::quadrature::{diff_matrix, gll_rule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
    Periodic,
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BoundaryCondition::Dirichlet => "dirichlet",
            BoundaryCondition::Neumann => "neumann",
            BoundaryCondition::Periodic => "periodic",
        };
        f.write_str(s)
    }
}

impl FromStr for BoundaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dirichlet" => Ok(BoundaryCondition::Dirichlet),
            "neumann" => Ok(BoundaryCondition::Neumann),
            "periodic" => Ok(BoundaryCondition::Periodic),
            other => Err(Error::Config(format!(
                "unknown boundary condition '{other}' (expected dirichlet, neumann or periodic)"
            ))),
        }
    }
}

/// Uniform mesh of `cells` elements of order `order` on `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshSpec1D {
    pub order: usize,
    pub cells: usize,
    pub a: f64,
    pub b: f64,
    pub bc: BoundaryCondition,
}

impl MeshSpec1D {
    pub fn new(order: usize, cells: usize, a: f64, b: f64, bc: BoundaryCondition) -> Self {
        MeshSpec1D {
            order,
            cells,
            a,
            b,
            bc,
        }
    }

    /// Number of unknowns after boundary treatment.
    pub fn dofs(&self) -> usize {
        let kn = self.order * self.cells;
        match self.bc {
            BoundaryCondition::Neumann => kn + 1,
            BoundaryCondition::Dirichlet => kn.saturating_sub(1),
            BoundaryCondition::Periodic => kn,
        }
    }

    pub fn cell_width(&self) -> f64 {
        (self.b - self.a) / self.cells as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 1 {
            return Err(Error::InvalidSpec(format!("order must be >= 1, got {}", self.order)));
        }
        if self.cells < 1 {
            return Err(Error::InvalidSpec(format!("cells must be >= 1, got {}", self.cells)));
        }
        if !(self.a < self.b) || !self.a.is_finite() || !self.b.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "interval must satisfy a < b, got [{}, {}]",
                self.a, self.b
            )));
        }
        if self.dofs() == 0 {
            return Err(Error::InvalidSpec(
                "Dirichlet mesh with order * cells = 1 has no interior unknowns".into(),
            ));
        }
        Ok(())
    }
}

/// Assembled 1D operator: stiffness `S`, lumped (diagonal) mass and the
/// physical coordinates of the unknowns.
#[derive(Debug, Clone)]
pub struct Operator1D {
    pub spec: MeshSpec1D,
    pub stiffness: DMatrix<f64>,
    pub mass: Vec<f64>,
    pub nodes: Vec<f64>,
}

impl Operator1D {
    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// Dense `H = M^{-1} S`.
    pub fn mass_inverse_stiffness(&self) -> DMatrix<f64> {
        let mut h = self.stiffness.clone();
        for (i, &m) in self.mass.iter().enumerate() {
            h.row_mut(i).scale_mut(1.0 / m);
        }
        h
    }
}

/// Assemble the C0 spectral-element stiffness and mass matrices.
pub fn assemble_1d(spec: &MeshSpec1D) -> Result<Operator1D> {
    spec.validate()?;
    let k = spec.order;
    let n = spec.cells;
    let h = spec.cell_width();
    let rule = gll_rule(k + 1)?;
    let d = diff_matrix(&rule);

    // K_loc = (2/h) D^T W D, M_loc = (h/2) W
    let mut k_loc = DMatrix::zeros(k + 1, k + 1);
    for i in 0..=k {
        for j in 0..=k {
            let mut s = 0.0;
            for q in 0..=k {
                s += d[(q, i)] * rule.weights[q] * d[(q, j)];
            }
            k_loc[(i, j)] = 2.0 / h * s;
        }
    }
    // Exact symmetry of the local block carries over to the global matrix.
    for i in 0..=k {
        for j in (i + 1)..=k {
            let v = 0.5 * (k_loc[(i, j)] + k_loc[(j, i)]);
            k_loc[(i, j)] = v;
            k_loc[(j, i)] = v;
        }
    }

    let full = k * n + 1;
    let mut s_full = DMatrix::zeros(full, full);
    let mut m_full = vec![0.0; full];
    let mut x_full = vec![0.0; full];
    for c in 0..n {
        let left = spec.a + h * c as f64;
        for i in 0..=k {
            let gi = c * k + i;
            m_full[gi] += 0.5 * h * rule.weights[i];
            x_full[gi] = left + 0.5 * h * (rule.nodes[i] + 1.0);
            for j in 0..=k {
                s_full[(gi, c * k + j)] += k_loc[(i, j)];
            }
        }
    }
    x_full[0] = spec.a;
    x_full[full - 1] = spec.b;

    let (stiffness, mass, nodes) = match spec.bc {
        BoundaryCondition::Neumann => (s_full, m_full, x_full),
        BoundaryCondition::Dirichlet => {
            let inner = full - 2;
            let s = s_full.view((1, 1), (inner, inner)).into_owned();
            (s, m_full[1..full - 1].to_vec(), x_full[1..full - 1].to_vec())
        }
        BoundaryCondition::Periodic => {
            let np = full - 1;
            let wrap = |i: usize| if i == np { 0 } else { i };
            let mut s = DMatrix::zeros(np, np);
            let mut m = vec![0.0; np];
            for i in 0..full {
                m[wrap(i)] += m_full[i];
                for j in 0..full {
                    let v = s_full[(i, j)];
                    if v != 0.0 {
                        s[(wrap(i), wrap(j))] += v;
                    }
                }
            }
            (s, m, x_full[..np].to_vec())
        }
    };

    Ok(Operator1D {
        spec: *spec,
        stiffness,
        mass,
        nodes,
    })
}

/// Eigendecomposition of the pencil `(S, M)`: `S T = M T diag(lambdas)`.
#[derive(Debug, Clone)]
pub struct Spectral1D {
    pub lambdas: Vec<f64>,
    pub t: DMatrix<f64>,
    pub t_inv: DMatrix<f64>,
}

impl Spectral1D {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambdas.iter().fold(0.0f64, |m, &l| m.max(l.abs()))
    }
}

/// Eigenvalues below this fraction of the largest one are the discrete
/// constant mode of a Neumann/periodic operator and are set to zero.
const NULL_EIGENVALUE_REL: f64 = 1e-11;

/// Symmetric reduction `S1 = M^{-1/2} S M^{-1/2} = Q Λ Q^T`, returning
/// `T = M^{-1/2} Q` and `T^{-1} = Q^T M^{1/2}`.
///
/// Eigenvalues are sorted ascending and each column of `Q` is signed so its
/// largest-magnitude entry is positive.
pub fn eig_pencil(op: &Operator1D) -> Result<Spectral1D> {
    let n = op.len();
    if n == 0 {
        return Err(Error::InvalidOperator("empty operator".into()));
    }
    if op.stiffness.nrows() != n || op.stiffness.ncols() != n {
        return Err(Error::shape(&[n, n], &[op.stiffness.nrows(), op.stiffness.ncols()]));
    }
    if let Some((i, m)) = op.mass.iter().enumerate().find(|(_, &m)| !(m > 0.0)) {
        return Err(Error::InvalidOperator(format!(
            "mass entry {i} is not strictly positive ({m})"
        )));
    }

    let inv_sqrt_m = op.mass.iter().map(|m| 1.0 / m.sqrt()).collect::<Vec<_>>();
    let sqrt_m = op.mass.iter().map(|m| m.sqrt()).collect::<Vec<_>>();
    let mut s1 = DMatrix::from_fn(n, n, |i, j| inv_sqrt_m[i] * op.stiffness[(i, j)] * inv_sqrt_m[j]);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (s1[(i, j)] + s1[(j, i)]);
            s1[(i, j)] = v;
            s1[(j, i)] = v;
        }
    }

    let eig = SymmetricEigen::try_new(s1, f64::EPSILON, 0)
        .ok_or_else(|| Error::Internal(format!("symmetric eigensolver did not converge (n = {n})")))?;

    let mut order = (0..n).collect::<Vec<_>>();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let lambda_max = eig.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let mut lambdas = Vec::with_capacity(n);
    let mut q = DMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let mut l = eig.eigenvalues[src];
        if l.abs() <= NULL_EIGENVALUE_REL * lambda_max {
            l = 0.0;
        }
        lambdas.push(l);
        let v = eig.eigenvectors.column(src);
        let mut pivot = 0;
        for i in 1..n {
            if v[i].abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            q[(i, col)] = sign * v[i];
        }
    }

    let t = DMatrix::from_fn(n, n, |i, j| inv_sqrt_m[i] * q[(i, j)]);
    let t_inv = DMatrix::from_fn(n, n, |i, j| q[(j, i)] * sqrt_m[j]);
    Ok(Spectral1D { lambdas, t, t_inv })
}
