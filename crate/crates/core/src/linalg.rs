//! Dense/sparse linear-algebra helpers: SVD with an explicit rank policy,
//! principal angles, sparse Cholesky wrappers and sparse slicing.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::ops::serial::{spmm_csc_dense, spmm_csr_dense, spsolve_csc_lower_triangular};
use nalgebra_sparse::ops::Op;
use nalgebra_sparse::{CooMatrix, CscMatrix, CsrMatrix};

use crate::{Error, Result};

/// Singular values `σ_i > cutoff·σ_max` are accepted; the ratio between the
/// smallest accepted and the largest rejected value must be at least `gap`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankPolicy {
    pub cutoff: f64,
    pub gap: f64,
}

impl Default for RankPolicy {
    fn default() -> Self {
        Self { cutoff: 1e-8, gap: 1e3 }
    }
}

impl RankPolicy {
    /// Numerical rank of a descending list of singular values.
    pub fn rank(&self, sv: &[f64], context: &str) -> Result<usize> {
        self.rank_scaled(sv, 0.0, context)
    }

    /// As [`Self::rank`], but relative to `max(σ_max, scale)`: used when the
    /// matrix is a difference of operators of norm `scale` and may vanish.
    pub fn rank_scaled(&self, sv: &[f64], scale: f64, context: &str) -> Result<usize> {
        let smax = sv.first().copied().unwrap_or(0.0).max(scale);
        if smax <= f64::MIN_POSITIVE {
            return Ok(0);
        }
        let r = sv.iter().take_while(|&&s| s > self.cutoff * smax).count();
        if r > 0 && r < sv.len() {
            let rejected = sv[r].max(f64::MIN_POSITIVE);
            let gap = sv[r - 1] / rejected;
            if gap < self.gap {
                return Err(Error::RankAmbiguous { context: context.to_string(), gap, required: self.gap });
            }
        }
        Ok(r)
    }
}

/// Thin-on-the-left, full-on-the-right SVD with singular values sorted
/// descending and a thresholded rank.
#[derive(Clone, Debug)]
pub struct Svd {
    /// Left singular vectors, `m × min(m,n)`.
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    /// Right singular vectors as columns, `n × n`.
    pub v: DMatrix<f64>,
    pub rank: usize,
}

/// `(U, σ descending, V)` with `V` the full `n × n` right basis, so that the
/// trailing columns span the rest of the null space when `m < n`.
type Decomposition = (DMatrix<f64>, Vec<f64>, DMatrix<f64>);

fn sorted(u: DMatrix<f64>, s: Vec<f64>, v: DMatrix<f64>) -> Decomposition {
    let kk = s.len();
    let mut order: Vec<usize> = (0..kk).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    let (m, n) = (u.nrows(), v.nrows());
    let su = DMatrix::from_fn(m, kk, |r, c| u[(r, order[c])]);
    let vcol = |c: usize| if c < kk { order[c] } else { c };
    let sv = DMatrix::from_fn(n, v.ncols(), |r, c| v[(r, vcol(c))]);
    (su, order.iter().map(|&i| s[i]).collect(), sv)
}

/// Dense SVD through faer, much faster than nalgebra's. faer's
/// divide-and-conquer path can lose all accuracy on spectra made of large
/// clusters of equal values (a 1080×810 stack of two orthonormal bases came
/// back with backward error 1.2e-4), so every result is probed with a few
/// fixed random vectors and rejected when `‖(A − USVᵀ)x‖` is not at
/// round-off level.
fn faer_svd(a: &DMatrix<f64>) -> Option<Decomposition> {
    let (m, n) = a.shape();
    let fa = faer::Mat::<f64>::from_fn(m, n, |i, j| a[(i, j)]);
    let svd = if m >= n { fa.thin_svd() } else { fa.svd() }.ok()?;
    let (fu, fs, fv) = (svd.U(), svd.S().column_vector(), svd.V());
    let kk = m.min(n);
    let u = DMatrix::from_fn(m, kk, |r, c| fu[(r, c)]);
    let s: Vec<f64> = (0..kk).map(|i| fs[i]).collect();
    let v = DMatrix::from_fn(n, n, |r, c| fv[(r, c)]);
    let (u, s, v) = sorted(u, s, v);
    let smax = s.first().copied().unwrap_or(0.0);
    if smax > 0.0 {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5bd1e995);
        let x = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-1.0..1.0));
        let vk = v.columns(0, kk);
        let mut y = vk.transpose() * &x;
        for (i, &si) in s.iter().enumerate() {
            y.row_mut(i).scale_mut(si);
        }
        let err = (a * &x - &u * y).norm();
        if !(err <= 1e-11 * smax * x.norm()) {
            return None;
        }
    }
    Some((u, s, v))
}

/// Fallback: nalgebra's bidiagonal QR SVD (slow, robust). Wide matrices are
/// padded with zero rows so the full right basis comes out.
fn nalgebra_svd(a: &DMatrix<f64>) -> Option<Decomposition> {
    let (m, n) = a.shape();
    let b = if m >= n { a.clone() } else { a.clone().insert_rows(m, n - m, 0.0) };
    let svd = nalgebra::linalg::SVD::try_new(b, true, true, f64::EPSILON, 0)?;
    let (u, vt) = (svd.u?, svd.v_t?);
    let (u, s, v) = sorted(u, svd.singular_values.iter().copied().collect(), vt.transpose());
    let kk = m.min(n);
    Some((u.view((0, 0), (m, kk)).into_owned(), s[..kk].to_vec(), v))
}

impl Svd {
    pub fn new(a: &DMatrix<f64>, policy: &RankPolicy, context: &str) -> Result<Self> {
        Self::with_scale(a, 0.0, policy, context)
    }

    /// SVD whose rank threshold is relative to `max(σ_max, scale)`.
    pub fn with_scale(a: &DMatrix<f64>, scale: f64, policy: &RankPolicy, context: &str) -> Result<Self> {
        let (m, n) = a.shape();
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::SolverFailure(format!("non-finite entries in {context}")));
        }
        if n == 0 {
            return Ok(Self { u: DMatrix::zeros(m, 0), s: vec![], v: DMatrix::zeros(0, 0), rank: 0 });
        }
        if m == 0 {
            return Ok(Self { u: DMatrix::zeros(0, 0), s: vec![], v: DMatrix::identity(n, n), rank: 0 });
        }
        let (u, s, v) = match faer_svd(a) {
            Some(x) => x,
            None => nalgebra_svd(a).ok_or_else(|| Error::SolverFailure(format!("svd did not converge in {context}")))?,
        };
        let rank = policy.rank_scaled(&s, scale, context)?;
        Ok(Self { u, s, v, rank })
    }

    /// Orthonormal basis of the null space (columns).
    pub fn null_space(&self) -> DMatrix<f64> {
        let n = self.v.ncols();
        self.v.columns(self.rank, n - self.rank).into_owned()
    }

    /// Orthonormal basis of the row space.
    pub fn row_space(&self) -> DMatrix<f64> {
        self.v.columns(0, self.rank).into_owned()
    }

    /// Orthonormal basis of the column space.
    pub fn col_space(&self) -> DMatrix<f64> {
        self.u.columns(0, self.rank).into_owned()
    }

    /// Minimum-norm least-squares solution `A⁺ b` (columnwise).
    pub fn pinv_apply(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let r = self.rank;
        let ur = self.u.columns(0, r);
        let mut t = ur.transpose() * b;
        for i in 0..r {
            t.row_mut(i).scale_mut(1.0 / self.s[i]);
        }
        self.v.columns(0, r) * t
    }

    /// `(AᵀA)⁺ b`.
    pub fn gram_pinv_apply(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let r = self.rank;
        let vr = self.v.columns(0, r);
        let mut t = vr.transpose() * b;
        for i in 0..r {
            t.row_mut(i).scale_mut(1.0 / (self.s[i] * self.s[i]));
        }
        vr * t
    }

    pub fn smax(&self) -> f64 {
        self.s.first().copied().unwrap_or(0.0)
    }
}

pub fn null_space(a: &DMatrix<f64>, policy: &RankPolicy, context: &str) -> Result<DMatrix<f64>> {
    Ok(Svd::new(a, policy, context)?.null_space())
}

pub fn rank(a: &DMatrix<f64>, policy: &RankPolicy, context: &str) -> Result<usize> {
    Ok(Svd::new(a, policy, context)?.rank)
}

/// Orthonormal basis of the column space of `a`.
pub fn orth(a: &DMatrix<f64>, policy: &RankPolicy, context: &str) -> Result<DMatrix<f64>> {
    Ok(Svd::new(a, policy, context)?.col_space())
}

/// Stack matrices with equal column counts vertically.
pub fn vstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let n = blocks.first().map(|b| b.ncols()).unwrap_or(0);
    let m: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(m, n);
    let mut r = 0;
    for b in blocks {
        assert_eq!(b.ncols(), n, "vstack column mismatch");
        out.rows_mut(r, b.nrows()).copy_from(b);
        r += b.nrows();
    }
    out
}

pub fn hstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let m = blocks.first().map(|b| b.nrows()).unwrap_or(0);
    let n: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(m, n);
    let mut c = 0;
    for b in blocks {
        assert_eq!(b.nrows(), m, "hstack row mismatch");
        out.columns_mut(c, b.ncols()).copy_from(b);
        c += b.ncols();
    }
    out
}

/// Principal angles (ascending) between the column spans of two matrices
/// with orthonormal columns. Small angles come from sines, large ones from
/// cosines, so both ends are accurate.
pub fn principal_angles(q1: &DMatrix<f64>, q2: &DMatrix<f64>) -> Vec<f64> {
    let (q1, q2) = if q2.ncols() <= q1.ncols() { (q1, q2) } else { (q2, q1) };
    let q = q2.ncols();
    if q == 0 {
        return vec![];
    }
    let c = q1.transpose() * q2;
    let mut cos: Vec<f64> = c.clone().singular_values().iter().copied().collect();
    cos.sort_by(|a, b| b.total_cmp(a));
    let resid = q2 - q1 * &c;
    let mut sin: Vec<f64> = resid.singular_values().iter().copied().collect();
    sin.sort_by(|a, b| a.total_cmp(b));
    (0..q)
        .map(|i| {
            let ci = cos.get(i).copied().unwrap_or(0.0).min(1.0);
            if ci < std::f64::consts::FRAC_1_SQRT_2 {
                ci.acos()
            } else {
                sin[i].min(1.0).asin()
            }
        })
        .collect()
}

/// Largest principal angle; `π/2` when dimensions differ. Zero for two
/// zero-dimensional spaces.
pub fn subspace_distance(q1: &DMatrix<f64>, q2: &DMatrix<f64>) -> f64 {
    if q1.ncols() != q2.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    principal_angles(q1, q2).last().copied().unwrap_or(0.0)
}

/// Smallest principal angle; `π/2` when either space is trivial.
pub fn separation(q1: &DMatrix<f64>, q2: &DMatrix<f64>) -> f64 {
    principal_angles(q1, q2).first().copied().unwrap_or(std::f64::consts::FRAC_PI_2)
}

/// Angle of the worst column of `x` to the span of orthonormal `q`
/// (0 for zero columns).
pub fn containment_angle(q: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..x.ncols() {
        let col = x.column(j);
        let nrm = col.norm();
        if nrm == 0.0 {
            continue;
        }
        let proj = if q.ncols() > 0 { q * (q.transpose() * col) } else { DVector::zeros(col.len()) };
        let s = ((col - proj).norm() / nrm).min(1.0);
        worst = worst.max(s.asin());
    }
    worst
}

/// Spectral norm.
pub fn norm2(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().max()
}

/// Sparse Cholesky factor `M = LLᵀ` of a symmetric positive-definite matrix.
pub struct SpdFactor {
    chol: Option<CscCholesky<f64>>,
    n: usize,
}

impl std::fmt::Debug for SpdFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SpdFactor(n={})", self.n)
    }
}

impl SpdFactor {
    pub fn new(m: &CsrMatrix<f64>, what: &str) -> Result<Self> {
        let n = m.nrows();
        if n == 0 {
            return Ok(Self { chol: None, n });
        }
        let csc = CscMatrix::from(m);
        let chol = CscCholesky::factor(&csc)
            .map_err(|e| Error::SolverFailure(format!("Cholesky of {what} failed: {e:?}")))?;
        Ok(Self { chol: Some(chol), n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `M⁻¹ B`.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.chol {
            Some(c) if b.ncols() > 0 => c.solve(b),
            _ => DMatrix::zeros(self.n, b.ncols()),
        }
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        match &self.chol {
            Some(c) => c.solve(b).column(0).into_owned(),
            None => DVector::zeros(0),
        }
    }

    /// `L⁻¹ B`.
    pub fn l_solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        if let (Some(c), true) = (&self.chol, b.ncols() > 0) {
            spsolve_csc_lower_triangular(Op::NoOp(c.l()), &mut x).expect("triangular solve");
        }
        x
    }

    /// `L⁻ᵀ B`.
    pub fn lt_solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        if let (Some(c), true) = (&self.chol, b.ncols() > 0) {
            spsolve_csc_lower_triangular(Op::Transpose(c.l()), &mut x).expect("triangular solve");
        }
        x
    }

    /// `Lᵀ B`.
    pub fn lt_mul(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.n, b.ncols());
        if let (Some(l), true) = (&self.chol, b.ncols() > 0) {
            spmm_csc_dense(0.0, &mut c, 1.0, Op::Transpose(l.l()), Op::NoOp(b));
        }
        c
    }
}

/// Sparse × dense product, tolerant of empty shapes.
pub fn spmm(a: &CsrMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(a.nrows(), b.ncols());
    if a.nrows() > 0 && b.ncols() > 0 && a.ncols() > 0 {
        spmm_csr_dense(0.0, &mut c, 1.0, Op::NoOp(a), Op::NoOp(b));
    }
    c
}

/// Transposed sparse × dense product `Aᵀ B`.
pub fn spmm_t(a: &CsrMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(a.ncols(), b.ncols());
    if a.ncols() > 0 && b.ncols() > 0 && a.nrows() > 0 {
        spmm_csr_dense(0.0, &mut c, 1.0, Op::Transpose(a), Op::NoOp(b));
    }
    c
}

pub fn spmv(a: &CsrMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let xm = DMatrix::from_column_slice(x.len(), 1, x.as_slice());
    spmm(a, &xm).column(0).into_owned()
}

pub fn spmv_t(a: &CsrMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let xm = DMatrix::from_column_slice(x.len(), 1, x.as_slice());
    spmm_t(a, &xm).column(0).into_owned()
}

pub fn to_dense(a: &CsrMatrix<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(a.nrows(), a.ncols());
    for (i, j, v) in a.triplet_iter() {
        d[(i, j)] += *v;
    }
    d
}

/// `A[rows, cols]` for sorted or unsorted index lists.
pub fn select(a: &CsrMatrix<f64>, rows: &[usize], cols: &[usize]) -> CsrMatrix<f64> {
    let mut colmap = vec![usize::MAX; a.ncols()];
    for (new, &old) in cols.iter().enumerate() {
        colmap[old] = new;
    }
    let mut coo = CooMatrix::new(rows.len(), cols.len());
    for (new_r, &r) in rows.iter().enumerate() {
        let row = a.row(r);
        for (&c, &v) in row.col_indices().iter().zip(row.values()) {
            if colmap[c] != usize::MAX {
                coo.push(new_r, colmap[c], v);
            }
        }
    }
    CsrMatrix::from(&coo)
}

/// Block-diagonal / block-structured assembly: place each `(row_off, col_off, A)`.
pub fn assemble_blocks(nrows: usize, ncols: usize, blocks: &[(usize, usize, f64, &CsrMatrix<f64>)]) -> CsrMatrix<f64> {
    let mut coo = CooMatrix::new(nrows, ncols);
    for &(ro, co, scale, a) in blocks {
        if scale == 0.0 {
            continue;
        }
        for (i, j, v) in a.triplet_iter() {
            coo.push(ro + i, co + j, scale * v);
        }
    }
    CsrMatrix::from(&coo)
}

pub fn identity(n: usize) -> CsrMatrix<f64> {
    CsrMatrix::identity(n)
}

pub fn zeros(m: usize, n: usize) -> CsrMatrix<f64> {
    CsrMatrix::zeros(m, n)
}
