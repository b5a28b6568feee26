//! Dense 3D arrays and mode-wise matrix contractions.
//!
//! A [`Grid3`] stores entry `(i, j, k)` at `i + nx*j + nx*ny*k`, so that
//! `vec(U)` in the Kronecker identities is just the data slice. Applying a
//! matrix along one axis is one dense GEMM (axis 0 and 2) or a batch of
//! page-wise GEMMs (axis 1); no Kronecker matrix is ever formed.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Dense 3D array of nodal values, x index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Grid3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Grid3 {
            dims,
            data: vec![0.0; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn filled(dims: [usize; 3], value: f64) -> Self {
        Grid3 {
            dims,
            data: vec![value; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        let len = dims[0] * dims[1] * dims[2];
        if data.len() != len {
            return Err(Error::shape(&[len], &[data.len()]));
        }
        Ok(Grid3 { dims, data })
    }

    pub fn from_fn<F: FnMut(usize, usize, usize) -> f64>(dims: [usize; 3], mut f: F) -> Self {
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    data.push(f(i, j, k));
                }
            }
        }
        Grid3 { dims, data }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.index(i, j, k);
        self.data[idx] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn map<F: Fn(f64) -> f64 + Sync>(&self, f: F) -> Grid3 {
        Grid3 {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &Grid3) -> Result<()> {
        self.check_same(other)?;
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
        Ok(())
    }

    /// Entrywise product in place.
    pub fn mul_assign(&mut self, other: &Grid3) -> Result<()> {
        self.check_same(other)?;
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x *= y;
        }
        Ok(())
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|x| *x *= a);
    }

    pub fn dot(&self, other: &Grid3) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn check_dims(&self, dims: [usize; 3]) -> Result<()> {
        if self.dims != dims {
            return Err(Error::shape(&dims, &self.dims));
        }
        Ok(())
    }

    fn check_same(&self, other: &Grid3) -> Result<()> {
        other.check_dims(self.dims)
    }
}

/// Dense 2D array, x index fastest. Converts losslessly to a `Grid3` with
/// a single z plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2 {
    dims: [usize; 2],
    data: Vec<f64>,
}

impl Grid2 {
    pub fn from_vec(dims: [usize; 2], data: Vec<f64>) -> Result<Self> {
        if data.len() != dims[0] * dims[1] {
            return Err(Error::shape(&[dims[0] * dims[1]], &[data.len()]));
        }
        Ok(Grid2 { dims, data })
    }

    pub fn from_fn<F: FnMut(usize, usize) -> f64>(dims: [usize; 2], mut f: F) -> Self {
        let g = Grid3::from_fn([dims[0], dims[1], 1], |i, j, _| f(i, j));
        Grid2 { dims, data: g.data }
    }

    pub fn dims(&self) -> [usize; 2] {
        self.dims
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i + self.dims[0] * j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

impl From<Grid2> for Grid3 {
    fn from(g: Grid2) -> Self {
        Grid3 {
            dims: [g.dims[0], g.dims[1], 1],
            data: g.data,
        }
    }
}

impl TryFrom<Grid3> for Grid2 {
    type Error = Error;

    fn try_from(g: Grid3) -> Result<Self> {
        if g.dims[2] != 1 {
            return Err(Error::shape(&[g.dims[0], g.dims[1], 1], &g.dims));
        }
        Ok(Grid2 {
            dims: [g.dims[0], g.dims[1]],
            data: g.data,
        })
    }
}

/// Read-only strided matrix view.
#[derive(Clone, Copy)]
struct MatRef<'a> {
    rows: usize,
    cols: usize,
    rs: isize,
    cs: isize,
    data: &'a [f64],
}

impl<'a> MatRef<'a> {
    fn of(m: &'a DMatrix<f64>) -> Self {
        MatRef {
            rows: m.nrows(),
            cols: m.ncols(),
            rs: 1,
            cs: m.nrows() as isize,
            data: m.as_slice(),
        }
    }

    fn transposed(self) -> Self {
        MatRef {
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
            data: self.data,
        }
    }

    fn max_offset(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            return 0;
        }
        ((self.rows - 1) as isize * self.rs + (self.cols - 1) as isize * self.cs) as usize
    }
}

/// `c = a * b` where `a` is `m x k` and `b`, `c` are described by raw
/// column-major slices with the given strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    a: MatRef<'_>,
    b: &[f64],
    b_rs: isize,
    b_cs: isize,
    n: usize,
    c: &mut [f64],
    c_rs: isize,
    c_cs: isize,
) {
    let (m, k) = (a.rows, a.cols);
    if m == 0 || n == 0 {
        return;
    }
    assert!(a.max_offset() < a.data.len().max(1));
    if k > 0 {
        assert!((((k - 1) as isize) * b_rs + ((n - 1) as isize) * b_cs) < b.len() as isize);
    }
    assert!((((m - 1) as isize) * c_rs + ((n - 1) as isize) * c_cs) < c.len() as isize);
    // SAFETY: all three operands were bounds-checked against their extents
    // above, and `c` is uniquely borrowed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.rs,
            a.cs,
            b.as_ptr(),
            b_rs,
            b_cs,
            0.0,
            c.as_mut_ptr(),
            c_rs,
            c_cs,
        );
    }
}

fn chunk_count(total: usize, work_per_item: usize) -> usize {
    // Aim for at least ~64k flops per task.
    let threads = rayon::current_num_threads().max(1);
    let min_items = (65_536 / work_per_item.max(1)).max(1);
    (total / min_items).clamp(1, 4 * threads)
}

fn check_cols(a: MatRef<'_>, n: usize) -> Result<()> {
    if a.cols != n {
        return Err(Error::shape(&[a.rows, n], &[a.rows, a.cols]));
    }
    Ok(())
}

/// `Y(i,j,k) = sum_p A(i,p) U(p,j,k)` as a single GEMM over the
/// `nx x (ny*nz)` unfolding, split into static column panels.
fn contract_axis0(a: MatRef<'_>, u: &Grid3) -> Result<Grid3> {
    let [nx, ny, nz] = u.dims;
    check_cols(a, nx)?;
    let m = a.rows;
    let mut y = Grid3::zeros([m, ny, nz]);
    let total = ny * nz;
    if total == 0 || m == 0 {
        return Ok(y);
    }
    let chunks = chunk_count(total, m * nx);
    let per = total.div_ceil(chunks);
    y.data
        .par_chunks_mut(m * per)
        .zip(u.data.par_chunks(nx * per))
        .for_each(|(yc, uc)| {
            let ncols = uc.len() / nx.max(1);
            gemm(a, uc, 1, nx as isize, ncols, yc, 1, m as isize);
        });
    Ok(y)
}

/// `Y(i,j,k) = sum_p A(j,p) U(i,p,k)`, one GEMM `U_k A^T` per page.
fn contract_axis1(a: MatRef<'_>, u: &Grid3) -> Result<Grid3> {
    let [nx, ny, nz] = u.dims;
    check_cols(a, ny)?;
    let m = a.rows;
    let mut y = Grid3::zeros([nx, m, nz]);
    if nx == 0 || m == 0 || nz == 0 {
        return Ok(y);
    }
    y.data
        .par_chunks_mut(nx * m)
        .zip(u.data.par_chunks(nx * ny))
        .for_each(|(yp, up)| {
            // Y_k^T (m x nx) = A (m x ny) * U_k^T (ny x nx)
            gemm(a, up, nx as isize, 1, nx, yp, nx as isize, 1);
        });
    Ok(y)
}

/// `Y(i,j,k) = sum_p A(k,p) U(i,j,p)` as a GEMM on the `(nx*ny) x nz`
/// unfolding, split into static row panels.
fn contract_axis2(a: MatRef<'_>, u: &Grid3) -> Result<Grid3> {
    let [nx, ny, nz] = u.dims;
    check_cols(a, nz)?;
    let m = a.rows;
    let plane = nx * ny;
    let mut y = Grid3::zeros([nx, ny, m]);
    if plane == 0 || m == 0 {
        return Ok(y);
    }
    let chunks = chunk_count(plane, m * nz);
    let per = plane.div_ceil(chunks);
    let out = SharedOut(y.data.as_mut_ptr(), y.data.len());
    (0..chunks).into_par_iter().for_each(|c| {
        let start = c * per;
        if start >= plane {
            return;
        }
        let rows = per.min(plane - start);
        // Y^T block (m x rows) = A (m x nz) * U_block^T (nz x rows)
        let b = &u.data[start..];
        // SAFETY: each task writes rows [start, start+rows) of the
        // (plane x m) unfolding only; row ranges are disjoint.
        let c_slice = unsafe { out.slice_from(start) };
        gemm(a, b, plane as isize, 1, rows, c_slice, plane as isize, 1);
    });
    Ok(y)
}

#[derive(Clone, Copy)]
struct SharedOut(*mut f64, usize);

unsafe impl Send for SharedOut {}
unsafe impl Sync for SharedOut {}

impl SharedOut {
    #[allow(clippy::mut_from_ref)]
    unsafe fn slice_from(&self, start: usize) -> &mut [f64] {
        std::slice::from_raw_parts_mut(self.0.add(start), self.1 - start)
    }
}

/// `Y(i,j,k) = sum_p A(i,p) U(p,j,k)`.
pub fn mode1_apply(a: &DMatrix<f64>, u: &Grid3) -> Result<Grid3> {
    contract_axis0(MatRef::of(a), u)
}

/// `Y(i,j,k) = sum_p A(j,p) U(i,p,k)`.
pub fn mode2_apply(a: &DMatrix<f64>, u: &Grid3) -> Result<Grid3> {
    contract_axis1(MatRef::of(a), u)
}

/// `Y(i,j,k) = sum_p A(k,p) U(i,j,p)`.
pub fn mode3_apply(a: &DMatrix<f64>, u: &Grid3) -> Result<Grid3> {
    contract_axis2(MatRef::of(a), u)
}

/// `vec(Y) = (A3^T ⊗ A2^T ⊗ A1) vec(U)`, the convention in which the
/// second and third factors multiply from the right (`U ×_3 A3`, then
/// `×_2 A2`, then `A1 ×_1`). Output dims are
/// `(rows(A1), cols(A2), cols(A3))`.
pub fn kron_apply(a1: &DMatrix<f64>, a2: &DMatrix<f64>, a3: &DMatrix<f64>, u: &Grid3) -> Result<Grid3> {
    let y = contract_axis2(MatRef::of(a3).transposed(), u)?;
    let y = contract_axis1(MatRef::of(a2).transposed(), &y)?;
    contract_axis0(MatRef::of(a1), &y)
}

/// `vec(Y) = (Az ⊗ Ay ⊗ Ax) vec(U)`: each factor acts along its own axis.
/// Output dims are the factors' row counts. A `None` factor is the identity.
pub fn tensor_apply(
    ax: Option<&DMatrix<f64>>,
    ay: Option<&DMatrix<f64>>,
    az: Option<&DMatrix<f64>>,
    u: &Grid3,
) -> Result<Grid3> {
    let mut cur: Option<Grid3> = None;
    if let Some(az) = az {
        cur = Some(contract_axis2(MatRef::of(az), u)?);
    }
    if let Some(ay) = ay {
        cur = Some(contract_axis1(MatRef::of(ay), cur.as_ref().unwrap_or(u))?);
    }
    if let Some(ax) = ax {
        cur = Some(contract_axis0(MatRef::of(ax), cur.as_ref().unwrap_or(u))?);
    }
    Ok(cur.unwrap_or_else(|| u.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Dense Kronecker product `a ⊗ b`.
    fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(a.nrows() * b.nrows(), a.ncols() * b.ncols(), |r, c| {
            a[(r / b.nrows(), c / b.ncols())] * b[(r % b.nrows(), c % b.ncols())]
        })
    }

    fn naive_mode(axis: usize, a: &DMatrix<f64>, u: &Grid3) -> Grid3 {
        let mut d = u.dims();
        d[axis] = a.nrows();
        Grid3::from_fn(d, |i, j, k| {
            let idx = [i, j, k];
            (0..a.ncols())
                .map(|p| {
                    let mut src = idx;
                    src[axis] = p;
                    a[(idx[axis], p)] * u.get(src[0], src[1], src[2])
                })
                .sum()
        })
    }

    fn seq(dims: [usize; 3]) -> Grid3 {
        let n = dims[0] * dims[1] * dims[2];
        Grid3::from_vec(dims, (1..=n).map(|v| v as f64).collect()).unwrap()
    }

    fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
        let num = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let den = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-300);
        num / den
    }

    #[test]
    fn identity_factors() {
        let u = seq([3, 4, 2]);
        let i3 = DMatrix::identity(3, 3);
        let i4 = DMatrix::identity(4, 4);
        let i2 = DMatrix::identity(2, 2);
        assert_eq!(mode1_apply(&i3, &u).unwrap(), u);
        assert_eq!(mode2_apply(&i4, &u).unwrap(), u);
        assert_eq!(mode3_apply(&i2, &u).unwrap(), u);
        assert_eq!(kron_apply(&i3, &i4, &i2, &u).unwrap(), u);
        assert_eq!(tensor_apply(None, None, None, &u).unwrap(), u);
    }

    #[test]
    fn constant_field_gives_row_sums() {
        let u = Grid3::filled([3, 3, 3], 1.0);
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, -1.0, 0.5, 0.25]);
        let sums = [6.0, -0.25];
        let y = mode1_apply(&a, &u).unwrap();
        assert_eq!(y.dims(), [2, 3, 3]);
        let y2 = mode2_apply(&a, &u).unwrap();
        assert_eq!(y2.dims(), [3, 2, 3]);
        let y3 = mode3_apply(&a, &u).unwrap();
        assert_eq!(y3.dims(), [3, 3, 2]);
        for r in 0..2 {
            for p in 0..3 {
                for q in 0..3 {
                    assert_eq!(y.get(r, p, q), sums[r]);
                    assert_eq!(y2.get(p, r, q), sums[r]);
                    assert_eq!(y3.get(p, q, r), sums[r]);
                }
            }
        }
    }

    #[test]
    fn swap_matrix_by_hand() {
        // U(i,j,k) = 1 + i + 2j + 4k
        let u = seq([2, 2, 2]);
        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let y = mode1_apply(&swap, &u).unwrap();
        assert_eq!(y.as_slice(), &[2.0, 1.0, 4.0, 3.0, 6.0, 5.0, 8.0, 7.0]);
        let y = mode2_apply(&swap, &u).unwrap();
        assert_eq!(y.as_slice(), &[3.0, 4.0, 1.0, 2.0, 7.0, 8.0, 5.0, 6.0]);
        let y = mode3_apply(&swap, &u).unwrap();
        assert_eq!(y.as_slice(), &[5.0, 6.0, 7.0, 8.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn kron_apply_matches_dense_2x2x2() {
        let a1 = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let a2 = DMatrix::from_row_slice(2, 2, &[0.5, -1.0, 2.0, 0.0]);
        let a3 = DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, 1.0, 3.0]);
        let u = seq([2, 2, 2]);
        let big = kron(&kron(&a3.transpose(), &a2.transpose()), &a1);
        let expect = &big * nalgebra::DVector::from_column_slice(u.as_slice());
        let y = kron_apply(&a1, &a2, &a3, &u).unwrap();
        assert!(rel_diff(y.as_slice(), expect.as_slice()) < 1e-14);
    }

    #[test]
    fn rectangular_shapes() {
        let u = seq([3, 2, 2]);
        let a1 = DMatrix::from_fn(4, 3, |i, j| (i + 2 * j) as f64);
        let a2 = DMatrix::from_fn(2, 5, |i, j| (i * j) as f64 + 1.0);
        let a3 = DMatrix::from_fn(2, 1, |i, _| i as f64 - 0.5);
        assert_eq!(kron_apply(&a1, &a2, &a3, &u).unwrap().dims(), [4, 5, 1]);
        let ay = DMatrix::from_fn(5, 2, |i, j| (i + j) as f64);
        let az = DMatrix::from_fn(1, 2, |_, j| j as f64);
        assert_eq!(tensor_apply(Some(&a1), Some(&ay), Some(&az), &u).unwrap().dims(), [4, 5, 1]);
    }

    #[test]
    fn shape_errors() {
        let u = seq([3, 2, 2]);
        let bad = DMatrix::identity(4, 4);
        assert!(matches!(mode1_apply(&bad, &u), Err(Error::Shape { .. })));
        assert!(matches!(mode2_apply(&bad, &u), Err(Error::Shape { .. })));
        assert!(matches!(mode3_apply(&bad, &u), Err(Error::Shape { .. })));
        assert!(Grid3::from_vec([2, 2, 2], vec![0.0; 7]).is_err());
    }

    #[test]
    fn large_contractions_match_naive() {
        let dims = [37, 29, 23];
        let u = Grid3::from_fn(dims, |i, j, k| ((i * 7 + j * 13 + k * 3) % 17) as f64 - 8.0);
        for axis in 0..3 {
            let n = dims[axis];
            let a = DMatrix::from_fn(n + 3, n, |i, j| ((i * 5 + j * 11) % 7) as f64 - 3.0);
            let y = match axis {
                0 => mode1_apply(&a, &u),
                1 => mode2_apply(&a, &u),
                _ => mode3_apply(&a, &u),
            }
            .unwrap();
            let expect = naive_mode(axis, &a, &u);
            assert_eq!(y.dims(), expect.dims());
            assert!(rel_diff(y.as_slice(), expect.as_slice()) < 1e-14, "axis {axis}");
        }
    }

    #[test]
    fn repeated_calls_are_bitwise_identical() {
        let dims = [41, 41, 41];
        let u = Grid3::from_fn(dims, |i, j, k| ((i + 3 * j + 7 * k) as f64).sin());
        let a = DMatrix::from_fn(41, 41, |i, j| ((i * j) as f64 * 0.1).cos());
        let y1 = tensor_apply(Some(&a), Some(&a), Some(&a), &u).unwrap();
        let y2 = tensor_apply(Some(&a), Some(&a), Some(&a), &u).unwrap();
        assert_eq!(y1.as_slice(), y2.as_slice());
    }

    fn grid_strategy(dims: [usize; 3]) -> impl Strategy<Value = Grid3> {
        prop::collection::vec(-1.0f64..1.0, dims[0] * dims[1] * dims[2])
            .prop_map(move |v| Grid3::from_vec(dims, v).unwrap())
    }

    fn mat_strategy(r: usize, c: usize) -> impl Strategy<Value = DMatrix<f64>> {
        prop::collection::vec(-1.0f64..1.0, r * c).prop_map(move |v| DMatrix::from_vec(r, c, v))
    }

    proptest! {
        #[test]
        fn kron_apply_oracle_and_linearity(
            u in grid_strategy([4, 3, 2]),
            v in grid_strategy([4, 3, 2]),
            a1 in mat_strategy(4, 4),
            a2 in mat_strategy(3, 3),
            a3 in mat_strategy(2, 2),
            alpha in -2.0f64..2.0,
            beta in -2.0f64..2.0,
        ) {
            let big = kron(&kron(&a3.transpose(), &a2.transpose()), &a1);
            let expect = &big * nalgebra::DVector::from_column_slice(u.as_slice());
            let y = kron_apply(&a1, &a2, &a3, &u).unwrap();
            prop_assert!(rel_diff(y.as_slice(), expect.as_slice()) < 1e-12);

            let mut w = u.clone();
            w.scale(alpha);
            w.axpy(beta, &v).unwrap();
            let lhs = kron_apply(&a1, &a2, &a3, &w).unwrap();
            let mut rhs = y.clone();
            rhs.scale(alpha);
            rhs.axpy(beta, &kron_apply(&a1, &a2, &a3, &v).unwrap()).unwrap();
            prop_assert!(rel_diff(lhs.as_slice(), rhs.as_slice()) < 1e-12);
        }

        #[test]
        fn axis_wise_composition(
            u in grid_strategy([4, 3, 2]),
            a1 in mat_strategy(4, 4),
            a2 in mat_strategy(3, 3),
            a3 in mat_strategy(2, 2),
        ) {
            let (i4, i3, i2) = (DMatrix::identity(4, 4), DMatrix::identity(3, 3), DMatrix::identity(2, 2));
            let step = kron_apply(&a1, &i3, &i2, &u).unwrap();
            let step = kron_apply(&i4, &a2, &i2, &step).unwrap();
            let step = kron_apply(&i4, &i3, &a3, &step).unwrap();
            let all = kron_apply(&a1, &a2, &a3, &u).unwrap();
            prop_assert!(rel_diff(step.as_slice(), all.as_slice()) < 1e-12);

            let big = kron(&kron(&a3, &a2), &a1);
            let expect = &big * nalgebra::DVector::from_column_slice(u.as_slice());
            let y = tensor_apply(Some(&a1), Some(&a2), Some(&a3), &u).unwrap();
            prop_assert!(rel_diff(y.as_slice(), expect.as_slice()) < 1e-12);
        }
    }
}
