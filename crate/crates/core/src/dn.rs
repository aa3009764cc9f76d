//! The Dirichlet-to-Neumann map `Λ_X`, its dual, the recovery operators and
//! the Hilbert transform.
//!
//! `Λ_X θ` is a boundary form of complementary degree; on Whitney spaces it
//! is represented weakly, through its pairing with boundary cochains:
//! `S θ = (∫_{∂M} e_i ∧ Λ_X θ)_i = F(d_X ω_θ)`, where `ω_θ` solves the DN
//! problem and `F` is the weak flux. `S` is the Schur complement of the
//! `d_X`-energy onto boundary dofs, so it is symmetric positive semidefinite.
//! The companion `N = T Π_{ker d_X} M⁻¹ Tᵀ` maps covectors back to primal
//! boundary cochains and plays the role of `Λ_X⁻¹` in the recovery formula:
//!
//! ```text
//! R  = S − d_∂ᵀ N⁺ d_∂      (range: fluxes of 𝓗_D of the next grade)
//! R* = N − d_∂ S⁺ d_∂ᵀ      (range: traces of 𝓗_N)
//! ```
//!
//! All comparisons use boundary mass-orthonormal coordinates: `L_∂ᵀθ` for
//! primal cochains and `L_∂⁻¹f` for covectors.

use std::path::Path;

use nalgebra::DMatrix;
use nalgebra_sparse::CooMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bvp::{to_cochains, DnSolver, HarmonicSpaces};
use crate::linalg::{self, Svd};
use crate::witten::{GradedComplex, Grading, VectorFieldSpec};
use crate::{exec, Error, Result, Tolerances};

/// One grade of the DN map, `S : C^g(∂M) → C^g(∂M)*`, and its dual `N`.
#[derive(Clone, Debug)]
pub struct DnBlock {
    pub grade: usize,
    pub label: String,
    /// Raw coordinates: primal boundary cochain → covector.
    pub s: DMatrix<f64>,
    /// Raw coordinates: covector → primal boundary cochain.
    pub n: DMatrix<f64>,
    /// `L⁻¹ S L⁻ᵀ` and `Lᵀ N L` in boundary orthonormal coordinates.
    pub s_ortho: DMatrix<f64>,
    pub n_ortho: DMatrix<f64>,
    pub rank: usize,
    pub rank_dual: usize,
    /// Harmonic extensions `ω_j` of the boundary basis (columns).
    pub extensions: DMatrix<f64>,
    /// `‖S − F(d_X ω)‖ / ‖S‖`: Green-formula column check.
    pub flux_residual: f64,
    /// `‖S − Sᵀ‖ / ‖S‖`.
    pub asymmetry: f64,
    /// Strong route `θ ↦ i*⋆d ω_θ` (X = 0, degree grading only), as raw
    /// boundary cochains of complementary degree.
    pub strong: Option<DMatrix<f64>>,
    /// Mismatch between strong and weak routes on the smooth modes of `Λ`.
    pub strong_residual: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct DNMap {
    pub field: VectorFieldSpec,
    pub grading: Grading,
    pub blocks: Vec<DnBlock>,
}

fn ortho_covector(b: &GradedComplex, g: usize, f: &DMatrix<f64>) -> DMatrix<f64> {
    b.grades[g].factor().l_solve(f)
}

fn ortho_primal(b: &GradedComplex, g: usize, x: &DMatrix<f64>) -> DMatrix<f64> {
    b.to_ortho(g, x)
}

fn scale_of(blocks: &[DnBlock], f: impl Fn(&DnBlock) -> &DMatrix<f64>) -> f64 {
    blocks.iter().map(|b| linalg::norm2(f(b))).fold(0.0, f64::max)
}

fn rel(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den.max(f64::MIN_POSITIVE)
    }
}

impl DNMap {
    /// Assemble every boundary grade. Columns are solved in parallel chunks
    /// against one factorisation per grade.
    pub fn assemble(c: &GradedComplex, h: &HarmonicSpaces, tol: &Tolerances) -> Result<Self> {
        let b = c.boundary.as_deref().ok_or_else(|| Error::Config("the DN map needs a nonempty boundary".into()))?;
        let mut blocks = exec::map_range(b.num_grades(), |g| assemble_block(c, b, h, g, tol))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        // Some grades of Λ vanish identically (e.g. on exact boundary
        // cohomology), so ranks are judged against the whole map.
        let (ss, ns) = (scale_of(&blocks, |b| &b.s_ortho), scale_of(&blocks, |b| &b.n_ortho));
        let policy = tol.rank_policy();
        for blk in &mut blocks {
            blk.rank = Svd::with_scale(&blk.s_ortho, ss, &policy, &format!("rank Λ grade {}", blk.label))?.rank;
            blk.rank_dual = Svd::with_scale(&blk.n_ortho, ns, &policy, &format!("rank Λ* grade {}", blk.label))?.rank;
        }
        // residuals were stored unnormalised
        let raw = blocks.iter().map(|b| b.s.norm()).fold(0.0, f64::max);
        for blk in &mut blocks {
            blk.asymmetry = rel(blk.asymmetry, raw);
            blk.flux_residual = rel(blk.flux_residual, raw);
        }
        Ok(Self { field: c.field, grading: c.grading, blocks })
    }

    /// `max_g ‖S̃_g‖₂`.
    pub fn s_scale(&self) -> f64 {
        scale_of(&self.blocks, |b| &b.s_ortho)
    }

    /// `max_g ‖Ñ_g‖₂`.
    pub fn n_scale(&self) -> f64 {
        scale_of(&self.blocks, |b| &b.n_ortho)
    }

    pub fn block(&self, g: usize) -> &DnBlock {
        &self.blocks[g]
    }

    /// `Λ_X θ` in weak form (covector).
    pub fn apply(&self, g: usize, theta: &DMatrix<f64>) -> DMatrix<f64> {
        &self.blocks[g].s * theta
    }

    /// Write each `S` block as MatrixMarket plus a JSON metadata file.
    pub fn export(&self, dir: impl AsRef<Path>, stem: &str, meta: &serde_json::Value) -> Result<Vec<std::path::PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut blocks = Vec::new();
        for blk in &self.blocks {
            let name = format!("{stem}_grade{}.mtx", blk.grade);
            let path = dir.join(&name);
            write_matrix_market(&blk.s, &path)?;
            written.push(path);
            blocks.push(serde_json::json!({
                "grade": blk.label,
                "file": name,
                "shape": [blk.s.nrows(), blk.s.ncols()],
                "rank": blk.rank,
                "asymmetry": blk.asymmetry,
                "flux_residual": blk.flux_residual,
                "strong_residual": blk.strong_residual,
            }));
        }
        let json = serde_json::json!({
            "field": self.field,
            "grading": self.grading,
            "representation": "weak: S_ij = ∫_∂M e_i ∧ Λ e_j",
            "blocks": blocks,
            "meta": meta,
        });
        let path = dir.join(format!("{stem}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&json).expect("json"))?;
        written.push(path);
        Ok(written)
    }
}

/// Dense matrix → MatrixMarket coordinate file (exact zeros dropped).
pub fn write_matrix_market(a: &DMatrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    let mut coo = CooMatrix::new(a.nrows(), a.ncols());
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if a[(i, j)] != 0.0 {
                coo.push(i, j, a[(i, j)]);
            }
        }
    }
    nalgebra_sparse::io::save_to_matrix_market_file(&coo, path).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Sparse matrix → MatrixMarket coordinate file.
pub fn write_sparse_matrix_market(a: &nalgebra_sparse::CsrMatrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    nalgebra_sparse::io::save_to_matrix_market_file(a, path).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

fn assemble_block(c: &GradedComplex, b: &GradedComplex, h: &HarmonicSpaces, g: usize, tol: &Tolerances) -> Result<DnBlock> {
    let policy = tol.rank_policy();
    let nb = c.boundary_dim(g);
    let solver = DnSolver::new(c, g, tol)?;
    let eye = DMatrix::<f64>::identity(nb, nb);
    const CHUNK: usize = 32;
    let chunks: Vec<(usize, usize)> = (0..nb).step_by(CHUNK).map(|s| (s, CHUNK.min(nb - s))).collect();
    let none = DMatrix::zeros(c.grades[g].dim, 0);
    let parts = exec::map_slice(&chunks, |&(s, w)| solver.solve(c, h, &eye.columns(s, w).into_owned(), &none, tol))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let omega = linalg::hstack(&parts.iter().collect::<Vec<_>>());

    let (s, flux_residual) = match c.next(g) {
        Some(q) => {
            let dw = linalg::spmm(c.witten_d(g), &omega);
            let e = c.extend(g, &eye);
            let de = linalg::spmm(c.witten_d(g), &e);
            let s = c.to_ortho(q, &de).transpose() * c.to_ortho(q, &dw);
            let f = c.flux(g, &dw);
            let fr = (&s - f).norm();
            (s, fr)
        }
        None => (DMatrix::zeros(nb, nb), 0.0),
    };
    let asymmetry = (&s - s.transpose()).norm();

    // dual map N = Yᵀ(I − QQᵀ)Y with Y = L⁻¹Tᵀ and Q the row space of D̃_g
    let y = c.grades[g].factor().l_solve(&c.trace_t(g, &eye));
    let q = Svd::new(c.d_ortho(g), &policy, "row space of d_X")?.row_space();
    let qy = q.transpose() * &y;
    let n = y.transpose() * &y - qy.transpose() * qy;

    let lb = b.grades[g].factor();
    let s_ortho = {
        let t = lb.l_solve(&s);
        lb.l_solve(&t.transpose()).transpose()
    };
    let n_ortho = {
        let t = lb.lt_mul(&n);
        lb.lt_mul(&t.transpose()).transpose()
    };

    let strong = strong_route(c, g, &omega);
    let strong_residual = strong.as_ref().map(|lam| strong_mismatch(c, b, g, lam, &s, &s_ortho));
    Ok(DnBlock {
        grade: g,
        label: c.label(g).to_string(),
        s,
        n,
        s_ortho,
        n_ortho,
        rank: 0,
        rank_dual: 0,
        extensions: omega,
        flux_residual,
        asymmetry,
        strong,
        strong_residual,
    })
}

/// `θ ↦ i*(⋆ d ω_θ)` through the Galerkin Hodge star (zero backend only).
fn strong_route(c: &GradedComplex, g: usize, omega: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if c.field != VectorFieldSpec::Zero || c.grading != Grading::Degree {
        return None;
    }
    let bundle = c.base();
    let n = bundle.dim();
    bundle.boundary.as_ref()?;
    if g + 1 > n {
        return None;
    }
    let dw = linalg::spmm(&bundle.d[g], omega);
    let star = bundle.star_matrix(g + 1) * dw;
    Some(linalg::spmm(&bundle.trace[n - g - 1], &star))
}

/// Number of low modes of `Λ` used to compare the strong and weak routes.
const SMOOTH_MODES: usize = 5;

/// Relative mismatch `‖L⁻¹(W_∂Λ_strong − S)θ‖ / ‖L⁻¹Sθ‖` over the
/// eigenvectors of the `SMOOTH_MODES` smallest nonzero eigenvalues of `S̃`. The
/// Galerkin star resolves only smooth data, so high modes are excluded.
fn strong_mismatch(c: &GradedComplex, b: &GradedComplex, g: usize, lam: &DMatrix<f64>, s: &DMatrix<f64>, s_ortho: &DMatrix<f64>) -> f64 {
    let nb = s.nrows();
    if nb == 0 {
        return 0.0;
    }
    let bb = c.base().boundary.as_ref().expect("boundary");
    let weak = linalg::spmm(&bb.wedge[g], lam);
    let eig = s_ortho.clone().symmetric_eigen();
    let top = eig.eigenvalues.amax();
    // skip the kernel: there S vanishes and the comparison carries no scale
    let mut idx: Vec<usize> = (0..nb).filter(|&i| eig.eigenvalues[i] > 1e-8 * top).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let m = SMOOTH_MODES.min(idx.len());
    let u = DMatrix::from_fn(nb, m, |r, k| eig.eigenvectors[(r, idx[k])]);
    let theta = b.from_ortho(g, &u);
    let lf = b.grades[g].factor();
    let diff = lf.l_solve(&((weak - s) * &theta));
    let reference = lf.l_solve(&(s * &theta));
    rel(diff.norm(), reference.norm())
}

/// Residuals of `Λ² = 0`, `Λ d = 0`, `d Λ = 0`, nonnegativity and the
/// energy identity, for one boundary grade.
#[derive(Clone, Debug, Serialize)]
pub struct DnIdentities {
    pub grade: String,
    pub lambda_squared: f64,
    pub lambda_d: f64,
    pub d_lambda: f64,
    /// `min θᵀSθ / (‖θ‖²‖S‖)` over random trials.
    pub min_quadratic: f64,
    /// `max |θᵀSθ − ‖d_Xω‖² − ‖δ_Xω‖²| / (‖θ‖²‖S‖)`.
    pub energy_residual: f64,
}

pub fn dn_identities(c: &GradedComplex, dn: &DNMap, g: usize, trials: usize, seed: u64) -> DnIdentities {
    let b = c.boundary.as_deref().expect("boundary");
    let blk = &dn.blocks[g];
    let (s, n) = (&blk.s_ortho, &blk.n_ortho);
    let ns = dn.s_scale().max(f64::MIN_POSITIVE);
    let nn = dn.n_scale().max(f64::MIN_POSITIVE);
    let lambda_squared = rel(linalg::norm2(&(s * n)), ns * nn).max(rel(linalg::norm2(&(n * s)), ns * nn));

    let d_into = b.d_ortho_into(g); // primal prev → primal g
    let d_out = b.d_ortho(g); // primal g → primal next
    let nd_in = linalg::norm2(&d_into).max(f64::MIN_POSITIVE);
    let nd_out = linalg::norm2(d_out).max(f64::MIN_POSITIVE);
    let lambda_d = rel(linalg::norm2(&(s * &d_into)), ns * nd_in).max(rel(linalg::norm2(&(n * d_out.transpose())), nn * nd_out));
    let d_lambda = rel(linalg::norm2(&(d_into.transpose() * s)), ns * nd_in).max(rel(linalg::norm2(&(d_out * n)), nn * nd_out));

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (g as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let nb = s.nrows();
    let mut min_quadratic = f64::INFINITY;
    let mut energy_residual: f64 = 0.0;
    let raw_s = &blk.s;
    for _ in 0..trials {
        if nb == 0 {
            break;
        }
        let theta = DMatrix::from_fn(nb, 1, |_, _| rng.random_range(-1.0..1.0));
        let u = ortho_primal(b, g, &theta);
        let quad = (u.transpose() * s * &u)[(0, 0)];
        let scale = u.norm_squared() * ns;
        min_quadratic = min_quadratic.min(quad / scale);
        // ‖d_Xω‖² + ‖δ_Xω‖² for the DN extension of θ
        let w = &blk.extensions * &theta;
        let mut energy = 0.0;
        if let Some(q) = c.next(g) {
            energy += c.to_ortho(q, &linalg::spmm(c.witten_d(g), &w)).norm_squared();
        }
        if c.prev(g).is_some() {
            // codifferential of the trace-free part, in interior coordinates
            let z = c.grades[g].interior_factor().lt_mul(&c.interior_rows(g, &(&w - c.extend(g, &theta))));
            energy += (c.d_dd_into(g).transpose() * z).norm_squared();
        }
        let direct = (theta.transpose() * raw_s * &theta)[(0, 0)];
        energy_residual = energy_residual.max((direct - energy).abs() / scale);
    }
    if min_quadratic == f64::INFINITY {
        min_quadratic = 0.0;
    }
    DnIdentities { grade: blk.label.clone(), lambda_squared, lambda_d, d_lambda, min_quadratic, energy_residual }
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelRange {
    pub grade: String,
    pub dim_kernel: usize,
    pub dim_range: usize,
    /// Largest principal angle between `ker Λ` and `ran Λ`.
    pub kernel_range_angle: f64,
    /// Largest principal angle between `ker Λ` and `i*𝓗`.
    pub kernel_trace_angle: f64,
    /// `dim 𝓔(∂M)` = rank of `d_∂` into this grade.
    pub dim_exact: usize,
    /// `dim[ker Λ / 𝓔(∂M)]`.
    pub quotient_dim: usize,
    /// Angle of `𝓔(∂M)` to `ker Λ` (containment).
    pub exact_in_kernel_angle: f64,
}

pub fn kernel_range_analysis(c: &GradedComplex, h: &HarmonicSpaces, dn: &DNMap, g: usize, tol: &Tolerances) -> Result<KernelRange> {
    let policy = tol.rank_policy();
    let b = c.boundary.as_deref().expect("boundary");
    let blk = &dn.blocks[g];
    let ker = Svd::with_scale(&blk.s_ortho, dn.s_scale(), &policy, "ker Λ")?.null_space();
    let ran = Svd::with_scale(&blk.n_ortho, dn.n_scale(), &policy, "ran Λ")?.col_space();
    let th = ortho_primal(b, g, &c.trace(g, &to_cochains(c, g, &h.grades[g].harmonic)));
    let th = linalg::orth(&th, &policy, "i*𝓗")?;
    let d_into = b.d_ortho_into(g);
    let exact = linalg::orth(&d_into, &policy, "𝓔(∂M)")?;
    Ok(KernelRange {
        grade: blk.label.clone(),
        dim_kernel: ker.ncols(),
        dim_range: ran.ncols(),
        kernel_range_angle: linalg::subspace_distance(&ker, &ran),
        kernel_trace_angle: linalg::subspace_distance(&ker, &th),
        dim_exact: exact.ncols(),
        quotient_dim: ker.ncols().saturating_sub(exact.ncols()),
        exact_in_kernel_angle: linalg::containment_angle(&ker, &exact),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RecoveryReport {
    pub grade: String,
    /// rank of `R = S − d_∂ᵀ N⁺ d_∂`
    pub rank: usize,
    /// rank of `R* = N − d_∂ S⁺ d_∂ᵀ`
    pub rank_dual: usize,
    /// `dim 𝓗_D` of the next grade (= `dim 𝓗_N^{n−next}`), computed in the interior.
    pub expected_rank: usize,
    /// `dim 𝓗_N` of this grade.
    pub expected_rank_dual: usize,
    /// Angle between `ran R` and `F(𝓗_D^{next})`.
    pub range_angle: f64,
    /// Angle between `ran R*` and `i*𝓗_N`.
    pub range_dual_angle: f64,
    /// Component of `d_∂θ` off `ran N` (should vanish), relative.
    pub projection_residual: f64,
    #[serde(skip)]
    pub range: DMatrix<f64>,
    #[serde(skip)]
    pub range_dual: DMatrix<f64>,
}

/// `F(𝓗_D)` of grade `next(g)` as orthonormal boundary covectors of grade `g`.
pub fn flux_of_dirichlet(c: &GradedComplex, h: &HarmonicSpaces, g: usize) -> DMatrix<f64> {
    let b = c.boundary.as_deref().expect("boundary");
    match c.next(g) {
        Some(q) => ortho_covector(b, g, &c.flux(g, &to_cochains(c, q, &h.grades[q].dirichlet))),
        None => DMatrix::zeros(c.boundary_dim(g), 0),
    }
}

/// `i*𝓗_N` of grade `g` in orthonormal boundary coordinates.
pub fn trace_of_neumann(c: &GradedComplex, h: &HarmonicSpaces, g: usize) -> DMatrix<f64> {
    let b = c.boundary.as_deref().expect("boundary");
    ortho_primal(b, g, &c.trace(g, &to_cochains(c, g, &h.grades[g].neumann)))
}

pub fn recovery_operator(c: &GradedComplex, h: &HarmonicSpaces, dn: &DNMap, g: usize, tol: &Tolerances) -> Result<RecoveryReport> {
    let policy = tol.rank_policy();
    let b = c.boundary.as_deref().expect("boundary");
    let blk = &dn.blocks[g];
    let label = blk.label.clone();

    let mut r = blk.s_ortho.clone();
    let mut projection_residual: f64 = 0.0;
    if let Some(q) = b.next(g) {
        let dq = b.d_ortho(g);
        let nsvd = Svd::with_scale(&dn.blocks[q].n_ortho, dn.n_scale(), &policy, &format!("pinv Λ* grade {}", b.label(q)))?;
        r -= dq.transpose() * nsvd.pinv_apply(dq);
        let ran = nsvd.col_space();
        let off = dq - &ran * (ran.transpose() * dq);
        projection_residual = rel(off.norm(), dq.norm());
    }
    let mut rd = blk.n_ortho.clone();
    if let Some(p) = b.prev(g) {
        let dp = b.d_ortho(p);
        let ssvd = Svd::with_scale(&dn.blocks[p].s_ortho, dn.s_scale(), &policy, &format!("pinv Λ grade {}", b.label(p)))?;
        rd -= dp * ssvd.pinv_apply(&dp.transpose());
    }
    let rsvd = Svd::with_scale(&r, dn.s_scale(), &policy, &format!("rank R grade {label}"))?;
    let rdsvd = Svd::with_scale(&rd, dn.n_scale(), &policy, &format!("rank R* grade {label}"))?;
    let range = rsvd.col_space();
    let range_dual = rdsvd.col_space();

    let fhd = linalg::orth(&flux_of_dirichlet(c, h, g), &policy, "F(𝓗_D)")?;
    let thn = linalg::orth(&trace_of_neumann(c, h, g), &policy, "i*𝓗_N")?;
    let expected_rank = c.next(g).map(|q| h.grades[q].dirichlet.ncols()).unwrap_or(0);
    Ok(RecoveryReport {
        grade: label,
        rank: rsvd.rank,
        rank_dual: rdsvd.rank,
        expected_rank,
        expected_rank_dual: h.grades[g].neumann.ncols(),
        range_angle: linalg::subspace_distance(&range, &fhd),
        range_dual_angle: linalg::subspace_distance(&range_dual, &thn),
        projection_residual,
        range,
        range_dual,
    })
}

/// `T_X φ = d_∂ Λ⁺ φ` for a covector `φ` of grade `g` (raw coordinates);
/// returns a primal boundary cochain of grade `next(g)`. `φ` must lie in
/// `ran Λ` to within `θ_tol`.
pub fn hilbert_transform(c: &GradedComplex, dn: &DNMap, g: usize, phi: &DMatrix<f64>, tol: &Tolerances) -> Result<DMatrix<f64>> {
    let b = c.boundary.as_deref().expect("boundary");
    let Some(q) = b.next(g) else {
        return Ok(DMatrix::zeros(0, phi.ncols()));
    };
    let svd = Svd::with_scale(&dn.blocks[g].s_ortho, dn.s_scale(), &tol.rank_policy(), "pinv Λ")?;
    let pt = ortho_covector(b, g, phi);
    let angle = linalg::containment_angle(&svd.col_space(), &pt);
    if angle > tol.theta {
        return Err(Error::OutOfDomain(angle));
    }
    let u = svd.pinv_apply(&pt);
    let theta = b.from_ortho(g, &u);
    debug_assert_eq!(b.grades[q].dim, b.witten_d(g).nrows());
    Ok(linalg::spmm(b.witten_d(g), &theta))
}

/// Dual transform `φ ↦ d_∂ᵀ N⁺ φ` for a primal boundary cochain `φ ∈ ran N`
/// of grade `g`; returns a covector of grade `prev(g)`.
pub fn hilbert_transform_dual(c: &GradedComplex, dn: &DNMap, g: usize, phi: &DMatrix<f64>, tol: &Tolerances) -> Result<DMatrix<f64>> {
    let b = c.boundary.as_deref().expect("boundary");
    let Some(p) = b.prev(g) else {
        return Ok(DMatrix::zeros(0, phi.ncols()));
    };
    let svd = Svd::with_scale(&dn.blocks[g].n_ortho, dn.n_scale(), &tol.rank_policy(), "pinv Λ*")?;
    let pt = ortho_primal(b, g, phi);
    let angle = linalg::containment_angle(&svd.col_space(), &pt);
    if angle > tol.theta {
        return Err(Error::OutOfDomain(angle));
    }
    let ft = svd.pinv_apply(&pt);
    let raw = l_mul(b, g, &ft);
    Ok(linalg::spmm_t(b.witten_d(p), &raw))
}

/// `L x` for the boundary mass factor of grade `g`.
fn l_mul(b: &GradedComplex, g: usize, x: &DMatrix<f64>) -> DMatrix<f64> {
    b.grades[g].factor().lt_mul(&DMatrix::identity(x.nrows(), x.nrows())).transpose() * x
}
