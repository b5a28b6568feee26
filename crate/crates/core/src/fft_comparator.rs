//! Second-order periodic reference solver: the Q^1 periodic stiffness is
//! circulant, so its eigenbasis is the DFT and `α − Δ_h` can be inverted
//! with three FFT passes each way.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::direct_solver::NullspacePolicy;
use crate::error::{Error, Result};
use crate::tensor_ops::Grid3;

/// `λ_j = (2 − 2cos(2πj/n)) / h²`, `j = 0..n`.
pub fn q1_periodic_eigs(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|j| (2.0 - 2.0 * (2.0 * PI * j as f64 / n as f64).cos()) / (h * h))
        .collect()
}

/// Forward/inverse 3D FFTs for fixed dims.
#[derive(Clone)]
pub struct Fft3 {
    dims: [usize; 3],
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
}

impl std::fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("dims", &self.dims).finish()
    }
}

impl Fft3 {
    pub fn new(dims: [usize; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidSpec(format!("FFT dims must be positive, got {dims:?}")));
        }
        let mut planner = FftPlanner::new();
        let fwd = dims.map(|n| planner.plan_fft(n, FftDirection::Forward));
        let inv = dims.map(|n| planner.plan_fft(n, FftDirection::Inverse));
        Ok(Fft3 { dims, fwd, inv })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Unnormalized forward DFT in place.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.run(buf, &self.fwd);
    }

    /// Inverse DFT in place, normalized by `1/N`.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.run(buf, &self.inv);
        let s = 1.0 / buf.len() as f64;
        buf.par_iter_mut().for_each(|v| *v *= s);
    }

    fn run(&self, buf: &mut [Complex64], ffts: &[Arc<dyn Fft<f64>>; 3]) {
        let [nx, ny, nz] = self.dims;
        assert_eq!(buf.len(), nx * ny * nz);
        // x lines are contiguous.
        if nx > 1 {
            let fft = &ffts[0];
            buf.par_chunks_mut(nx * ny).for_each(|page| fft.process(page));
        }
        if ny > 1 {
            strided_pass(buf, &ffts[1], nx, ny, nx, nz, nx * ny);
        }
        if nz > 1 {
            strided_pass(buf, &ffts[2], nx, nz, nx * ny, ny, nx);
        }
    }
}

/// Columns gathered per task in [`strided_pass`].
const BLOCK: usize = 32;

#[derive(Clone, Copy)]
struct SharedBuf(*mut Complex64);

// SAFETY: tasks of `strided_pass` touch pairwise disjoint index sets.
unsafe impl Send for SharedBuf {}
unsafe impl Sync for SharedBuf {}

impl SharedBuf {
    // A method (rather than `.0`) makes closures capture the whole wrapper.
    /// # Safety
    /// `offset` must lie inside the wrapped buffer.
    unsafe fn at(self, offset: usize) -> *mut Complex64 {
        unsafe { self.0.add(offset) }
    }
}

/// Transforms every line of length `len` and element stride `stride`.
/// Line starts are `o·outer_stride + i` for `o < outer`, `i < nx`; each
/// task gathers up to `BLOCK` neighbouring columns into a padded scratch
/// so that neither the reads nor the FFTs run at a power-of-two stride.
fn strided_pass(
    buf: &mut [Complex64],
    fft: &Arc<dyn Fft<f64>>,
    nx: usize,
    len: usize,
    stride: usize,
    outer: usize,
    outer_stride: usize,
) {
    let ld = len + 8;
    let blocks = nx.div_ceil(BLOCK);
    let total = buf.len();
    let ptr = SharedBuf(buf.as_mut_ptr());
    (0..outer * blocks).into_par_iter().for_each_init(
        || {
            (
                vec![Complex64::default(); BLOCK * ld],
                vec![Complex64::default(); fft.get_inplace_scratch_len()],
            )
        },
        |(lines, scratch), task| {
            let (o, b) = (task / blocks, task % blocks);
            let i0 = b * BLOCK;
            let w = BLOCK.min(nx - i0);
            let base = o * outer_stride + i0;
            assert!(base + (len - 1) * stride + w <= total);
            for t in 0..len {
                // SAFETY: in bounds (asserted above); this task is the only
                // one touching columns i0..i0+w of line group `o`.
                let row = unsafe { std::slice::from_raw_parts(ptr.at(base + t * stride), w) };
                for (c, &v) in row.iter().enumerate() {
                    lines[c * ld + t] = v;
                }
            }
            for c in 0..w {
                fft.process_with_scratch(&mut lines[c * ld..c * ld + len], scratch);
            }
            for t in 0..len {
                let row = unsafe { std::slice::from_raw_parts_mut(ptr.at(base + t * stride), w) };
                for (c, v) in row.iter_mut().enumerate() {
                    *v = lines[c * ld + t];
                }
            }
        },
    );
}

/// Diagonal FFT solve of `α − Δ_h` for the Q^1 periodic (7-point) operator.
#[derive(Debug, Clone)]
pub struct FftPlan {
    fft: Fft3,
    lambdas: [Vec<f64>; 3],
    multiplier: Grid3,
    projected: usize,
}

impl FftPlan {
    /// `h[d]` is the grid spacing along axis `d`; an axis with one point is
    /// treated as absent.
    pub fn new(dims: [usize; 3], h: [f64; 3], alpha: f64, policy: NullspacePolicy) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::Precondition(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        if h.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidSpec(format!("grid spacing must be positive, got {h:?}")));
        }
        let fft = Fft3::new(dims)?;
        let lambdas = [0, 1, 2].map(|d| q1_periodic_eigs(dims[d], h[d]));
        let lmax: f64 = lambdas.iter().map(|l| l.iter().cloned().fold(0.0, f64::max)).sum();
        let eps = 1e-10 * (1.0 + lmax);
        let mut projected = 0;
        let mut data = Vec::with_capacity(dims.iter().product());
        for lz in &lambdas[2] {
            for ly in &lambdas[1] {
                for lx in &lambdas[0] {
                    let den = alpha + lx + ly + lz;
                    if den.abs() < eps {
                        if policy == NullspacePolicy::Reject {
                            return Err(Error::Singular(format!(
                                "alpha + lambda = {den:e} is below the null threshold {eps:e}"
                            )));
                        }
                        projected += 1;
                        data.push(0.0);
                    } else {
                        data.push(1.0 / den);
                    }
                }
            }
        }
        Ok(FftPlan {
            fft,
            lambdas,
            multiplier: Grid3::from_vec(dims, data)?,
            projected,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.fft.dims()
    }

    pub fn lambdas(&self) -> &[Vec<f64>; 3] {
        &self.lambdas
    }

    pub fn multiplier(&self) -> &Grid3 {
        &self.multiplier
    }

    pub fn projected_count(&self) -> usize {
        self.projected
    }

    pub fn fft(&self) -> &Fft3 {
        &self.fft
    }
}

/// `real(ifftn(fftn(F) .* multiplier))`.
pub fn fft_poisson_solve(plan: &FftPlan, f: &Grid3) -> Result<Grid3> {
    f.check_dims(plan.dims())?;
    let mut buf: Vec<Complex64> = f.as_slice().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan.fft.forward(&mut buf);
    buf.par_iter_mut()
        .zip(plan.multiplier.as_slice().par_iter())
        .for_each(|(c, &m)| *c *= m);
    plan.fft.inverse(&mut buf);
    Grid3::from_vec(plan.dims(), buf.into_iter().map(|c| c.re).collect())
}

/// `α U + Σ_d (2U − U_{+1} − U_{−1}) / h_d²` with periodic wrap.
pub fn apply_periodic_stencil(u: &Grid3, h: [f64; 3], alpha: f64) -> Grid3 {
    let [nx, ny, nz] = u.dims();
    let n = [nx, ny, nz];
    Grid3::from_fn(u.dims(), |i, j, k| {
        let c = u.get(i, j, k);
        let mut v = alpha * c;
        let idx = [i, j, k];
        for d in 0..3 {
            if n[d] == 1 {
                continue;
            }
            let mut up = idx;
            let mut dn = idx;
            up[d] = (idx[d] + 1) % n[d];
            dn[d] = (idx[d] + n[d] - 1) % n[d];
            v += (2.0 * c - u.get(up[0], up[1], up[2]) - u.get(dn[0], dn[1], dn[2])) / (h[d] * h[d]);
        }
        v
    })
}
