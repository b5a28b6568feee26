//! Legendre polynomials, Gauss–Lobatto–Legendre rules and nodal
//! differentiation matrices on the reference interval `[-1, 1]`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const NEWTON_MAX_ITERS: usize = 200;

/// Value and first derivative of the Legendre polynomial `P_n` at `x`.
///
/// Uses the three-term recurrence for the value and
/// `P'_{k+1} = P'_{k-1} + (2k+1) P_k` for the derivative, which stays
/// accurate at the endpoints.
pub fn legendre_eval(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    let (mut dp_prev, mut dp) = (0.0, 1.0);
    for k in 1..n {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        let dp_next = dp_prev + (2.0 * kf + 1.0) * p;
        p_prev = p;
        p = p_next;
        dp_prev = dp;
        dp = dp_next;
    }
    (p, dp)
}

/// A quadrature rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// The `p`-point Gauss–Lobatto–Legendre rule.
///
/// Interior nodes are the roots of `P'_{p-1}`, found by Newton's method
/// from Chebyshev–Gauss–Lobatto starting points. Weights are
/// `2 / (p (p-1) P_{p-1}(x_i)^2)`.
pub fn gll_rule(p: usize) -> Result<QuadRule> {
    if p < 2 {
        return Err(Error::InvalidSpec(format!(
            "GLL rule needs at least 2 points, got {p}"
        )));
    }
    let n = p - 1;
    let nf = n as f64;
    let mut nodes = vec![0.0; p];
    nodes[0] = -1.0;
    nodes[n] = 1.0;

    // Only the left half is iterated; the right half is mirrored so the
    // rule is exactly symmetric.
    for i in 1..=(n / 2) {
        let mut x = -(std::f64::consts::PI * i as f64 / nf).cos();
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITERS {
            let (pn, dpn) = legendre_eval(n, x);
            // P'' from the Legendre ODE: (1 - x^2) P'' = 2x P' - n(n+1) P
            let d2pn = (2.0 * x * dpn - nf * (nf + 1.0) * pn) / (1.0 - x * x);
            let dx = dpn / d2pn;
            x -= dx;
            if dx.abs() <= 4.0 * f64::EPSILON * x.abs().max(1e-3) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Internal(format!(
                "GLL Newton iteration did not converge for p = {p}, node {i}"
            )));
        }
        nodes[i] = x;
        nodes[n - i] = -x;
    }
    if n.is_multiple_of(2) {
        nodes[n / 2] = 0.0;
    }

    let weights = nodes
        .iter()
        .map(|&x| {
            let (pn, _) = legendre_eval(n, x);
            2.0 / (nf * (nf + 1.0) * pn * pn)
        })
        .collect::<Vec<_>>();
    let mut weights = weights;
    for i in 0..p / 2 {
        let w = 0.5 * (weights[i] + weights[n - i]);
        weights[i] = w;
        weights[n - i] = w;
    }

    Ok(QuadRule { nodes, weights })
}

/// Nodal differentiation matrix: entry `(i, j)` is `l_j'(x_i)` where `l_j`
/// is the Lagrange polynomial through the rule's nodes.
///
/// Built from barycentric weights; the diagonal is the negative row sum
/// of the off-diagonal entries.
pub fn diff_matrix(rule: &QuadRule) -> DMatrix<f64> {
    let x = &rule.nodes;
    let p = x.len();
    let bary = (0..p)
        .map(|j| {
            let prod: f64 = (0..p).filter(|&k| k != j).map(|k| x[j] - x[k]).product();
            1.0 / prod
        })
        .collect::<Vec<_>>();

    let mut d = DMatrix::zeros(p, p);
    for i in 0..p {
        let mut diag = 0.0;
        for j in 0..p {
            if i != j {
                let v = (bary[j] / bary[i]) / (x[i] - x[j]);
                d[(i, j)] = v;
                diag -= v;
            }
        }
        d[(i, i)] = diag;
    }
    d
}
