//! Additive and multiplicative structure recovered from boundary data.
//!
//! **Exact sequence.** For each boundary grade `g` there are three nodes, all
//! realised as subspaces of boundary orthonormal coordinates:
//!
//! * `Abs(g) = i*𝓗_N^g` (primal, grade `g`)              ≅ `H^g(M)`
//! * `Bd(g)`  = harmonic fields of `∂M`                     ≅ `H^g(∂M)`
//! * `Rel(q) = L⁻¹F(𝓗_D^q)` (covector, grade `prev(q)`)    ≅ `H^q(M, ∂M)`
//!
//! joined by `Rel(g) →ρ̄ Abs(g) →ī Bd(g) →π̄ Rel(next g)` with
//! `ρ̄ = −d_∂Λ⁺`, `ī` the orthogonal projection and `π̄ = Λ`. Exactness is
//! checked as coincidence of image and kernel (principal angles), and each
//! map is compared with the one computed from interior data.
//!
//! **Cup product.** For `α ∈ 𝓗_N^a` and `β ∈ 𝓗_D^b ∩ ran d_X`,
//! `F(P_{𝓗_D}(α∧β)) = Λ((−1)^a i*α ∧ Λ⁺F(β))` up to discretisation error.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bvp::{to_cochains, HarmonicSpaces};
use crate::dec::{Cochain, OperatorBundle};
use crate::dn::{self, DNMap};
use crate::linalg::{self, Svd};
use crate::mesh::{betti_oracle, rational_rank};
use crate::witten::{GradedComplex, Grading, Kind, VectorFieldSpec};
use crate::{exec, Error, Result, Tolerances};

// ---- exact oracle for graded complexes ------------------------------------

/// Cohomology dimensions per grade, computed exactly.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GradedBetti {
    pub absolute: Vec<usize>,
    pub relative: Vec<usize>,
    pub boundary: Vec<usize>,
}

/// Integer triplets of `q·A` where every entry of `A` is a multiple of `1/q`.
fn integer_entries(a: &CsrMatrix<f64>, rows: Option<&[usize]>, cols: Option<&[usize]>, q: i64) -> (usize, usize, Vec<(usize, usize, i64)>) {
    let rmap = remap(a.nrows(), rows);
    let cmap = remap(a.ncols(), cols);
    let mut out = Vec::new();
    for (i, j, &v) in a.triplet_iter() {
        let (Some(r), Some(c)) = (rmap[i], cmap[j]) else { continue };
        // `±s` entries round to `±ŝ`; keep them nonzero so ŝ ≠ 0 whenever s ≠ 0
        let x = v * q as f64;
        let k = if x.round() == 0.0 && v != 0.0 { x.signum() } else { x.round() };
        if k != 0.0 {
            out.push((r, c, k as i64));
        }
    }
    let nr = rows.map(|r| r.len()).unwrap_or(a.nrows());
    let nc = cols.map(|c| c.len()).unwrap_or(a.ncols());
    (nr, nc, out)
}

fn remap(n: usize, keep: Option<&[usize]>) -> Vec<Option<usize>> {
    match keep {
        None => (0..n).map(Some).collect(),
        Some(k) => {
            let mut m = vec![None; n];
            for (new, &old) in k.iter().enumerate() {
                m[old] = Some(new);
            }
            m
        }
    }
}

/// Common denominator making `d_X` integral: `s` is rounded to a rational
/// `ŝ` with denominator at most 10⁶. Only `s = 0` versus `s ≠ 0` matters,
/// since `d_X(s) = diag(1, 1/s)·d_X(1)·diag(1, s)` blockwise, so every rank
/// (also on the trace-free rows and columns) is the same for all `s ≠ 0`.
fn denominator(field: &VectorFieldSpec) -> i64 {
    let s = field.speed();
    if s == 0.0 {
        return 1;
    }
    let r = Ratio::<i64>::approximate_float(s).unwrap_or_else(|| Ratio::new((s * 1e6).round() as i64, 1_000_000));
    let r = if (*r.denom()) > 1_000_000 { Ratio::new((s * 1e6).round() as i64, 1_000_000) } else { r };
    *r.denom()
}

fn graded_ranks(c: &GradedComplex, relative: bool) -> Vec<usize> {
    let q = denominator(&c.field);
    let n = c.num_grades();
    let rank_d: Vec<usize> = (0..n)
        .map(|g| match c.next(g) {
            None => 0,
            Some(t) => {
                let (r, k, e) = if relative {
                    integer_entries(c.witten_d(g), Some(&c.grades[t].interior), Some(&c.grades[g].interior), q)
                } else {
                    integer_entries(c.witten_d(g), None, None, q)
                };
                rational_rank(r, k, &e)
            }
        })
        .collect();
    (0..n)
        .map(|g| {
            let dim = if relative { c.grades[g].interior.len() } else { c.grades[g].dim };
            let into = c.prev(g).map(|p| rank_d[p]).unwrap_or(0);
            dim - rank_d[g] - into
        })
        .collect()
}

/// Exact cohomology of `(C, d_X)`, of its trace-free subcomplex and of the
/// boundary complex, by rational elimination of `d_X` (entries `±1`, `±s`).
pub fn graded_oracle(c: &GradedComplex) -> GradedBetti {
    let absolute = graded_ranks(c, false);
    let relative = graded_ranks(c, true);
    let boundary = match c.boundary.as_deref() {
        Some(b) => graded_ranks(b, false),
        None => vec![0; c.num_grades()],
    };
    GradedBetti { absolute, relative, boundary }
}

/// Oracle appropriate to the backend: simplicial Betti numbers for `X = 0`
/// in degree grading, the graded elimination otherwise.
pub fn oracle(c: &GradedComplex) -> GradedBetti {
    if c.field == VectorFieldSpec::Zero && c.grading == Grading::Degree {
        let b = betti_oracle(c.base().complex());
        let n = c.num_grades();
        let mut boundary = b.boundary.clone();
        boundary.resize(n, 0);
        GradedBetti { absolute: b.absolute, relative: b.relative, boundary }
    } else {
        graded_oracle(c)
    }
}

// ---- graded wedge ---------------------------------------------------------

/// Galerkin wedge of `x` (grade `g1`) and `y` (grade `g2`). On the product
/// backend `(α₁ + dt∧β₁) ∧ (α₂ + dt∧β₂) = α₁∧α₂ + dt∧((−1)^{|α₁|} α₁∧β₂ + β₁∧α₂)`;
/// the common factor `L` of the masses cancels in the projection.
pub fn graded_wedge(c: &GradedComplex, g1: usize, x: &DVector<f64>, g2: usize, y: &DVector<f64>) -> Result<(usize, DVector<f64>)> {
    let target = match c.grading {
        Grading::Degree => {
            let t = g1 + g2;
            if t >= c.num_grades() {
                return Err(Error::DegreeOverflow(t, c.dim));
            }
            t
        }
        Grading::Parity => (g1 + g2) % 2,
    };
    let base = c.base();
    let m = base.dim();
    let mut out = DVector::zeros(c.grades[target].dim);
    for c1 in &c.grades[g1].components {
        for c2 in &c.grades[g2].components {
            let deg = c1.degree + c2.degree;
            if deg > m {
                continue;
            }
            let (kind, sign) = match (c1.kind, c2.kind) {
                (Kind::Beta, Kind::Beta) => continue,
                (Kind::Alpha, Kind::Beta) => (Kind::Beta, if c1.degree % 2 == 0 { 1.0 } else { -1.0 }),
                (Kind::Beta, Kind::Alpha) => (Kind::Beta, 1.0),
                (k, _) => (k, 1.0),
            };
            let Some(tc) = c.grades[target].component(kind, deg) else { continue };
            let a = Cochain::new(c1.degree, x.rows(c1.offset, c1.len).into_owned());
            let b = Cochain::new(c2.degree, y.rows(c2.offset, c2.len).into_owned());
            let w = base.wedge_product(&a, &b)?;
            let mut slot = out.rows_mut(tc.offset, tc.len);
            slot.axpy(sign, &w.values, 1.0);
        }
    }
    Ok((target, out))
}

/// `(−1)^a` for a grade `a` (degree, or `0/1` for `±`).
fn grade_sign(a: usize) -> f64 {
    if a % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

// ---- exact sequence -------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NodeKind {
    Rel,
    Abs,
    Bd,
}

#[derive(Clone, Debug, Serialize)]
pub struct SeqNode {
    pub kind: NodeKind,
    /// Interior grade (`Rel`, `Abs`) or boundary grade (`Bd`).
    pub grade: usize,
    pub label: String,
    pub dim: usize,
    pub oracle_dim: usize,
    /// Principal-angle distance between incoming image and outgoing kernel.
    pub exactness_angle: f64,
    /// Orthonormal basis in ambient boundary coordinates.
    #[serde(skip)]
    pub basis: DMatrix<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SeqMap {
    pub name: String,
    pub from: usize,
    pub to: usize,
    pub rank: usize,
    /// `‖(I − P_target) A B_source‖ / scale`: the image stays in the node.
    pub containment: f64,
    /// Reference norm for rank decisions (the ambient operator's).
    pub scale: f64,
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Commutativity {
    pub square: String,
    pub grade: String,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SequenceCheck {
    pub nodes: Vec<SeqNode>,
    pub maps: Vec<SeqMap>,
    pub commutativity: Vec<Commutativity>,
    pub cyclic: bool,
}

impl SequenceCheck {
    pub fn node_dims(&self) -> Vec<usize> {
        self.nodes.iter().map(|n| n.dim).collect()
    }

    pub fn exactness_angles(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.exactness_angle).collect()
    }

    pub fn commutativity_residuals(&self) -> Vec<f64> {
        self.commutativity.iter().map(|c| c.residual).collect()
    }

    pub fn dims_match_oracle(&self) -> bool {
        self.nodes.iter().all(|n| n.dim == n.oracle_dim)
    }

    pub fn max_exactness_angle(&self) -> f64 {
        self.exactness_angles().into_iter().fold(0.0, f64::max)
    }

    pub fn max_commutativity(&self) -> f64 {
        self.commutativity_residuals().into_iter().chain(self.maps.iter().map(|m| m.containment)).fold(0.0, f64::max)
    }

    /// `Err(ExactnessFailure)` for the first node whose angle exceeds `θ_tol`.
    pub fn verify(&self, tol: &Tolerances) -> Result<()> {
        for (i, n) in self.nodes.iter().enumerate() {
            if n.exactness_angle > tol.theta {
                return Err(Error::ExactnessFailure { node: i, angle: n.exactness_angle });
            }
        }
        Ok(())
    }
}

fn rel(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den.max(f64::MIN_POSITIVE)
    }
}

/// Orthonormal basis of the boundary harmonic fields of grade `g`.
fn boundary_harmonics(hb: &HarmonicSpaces, g: usize) -> DMatrix<f64> {
    hb.grades[g].harmonic.clone()
}

/// Build and check the sequence. `hb` are the harmonic spaces of the
/// boundary complex (closed, so all flavours coincide).
pub fn check_exact_sequence(c: &GradedComplex, h: &HarmonicSpaces, hb: &HarmonicSpaces, dn: &DNMap, tol: &Tolerances) -> Result<SequenceCheck> {
    let policy = tol.rank_policy();
    let b = c.boundary.as_deref().ok_or(Error::EmptyBoundarySubspace)?;
    let oracle = oracle(c);
    let ng = c.num_grades();
    let nb = b.num_grades();
    let cyclic = c.grading == Grading::Parity;

    // ambient operators in boundary orthonormal coordinates
    let s_scale = dn.s_scale();
    let ssvd: Vec<Svd> = (0..nb)
        .map(|g| Svd::with_scale(&dn.blocks[g].s_ortho, s_scale, &policy, &format!("pinv Λ grade {}", b.label(g))))
        .collect::<Result<_>>()?;
    // ρ̄ on covectors of boundary grade p: −d̃_∂ S̃⁺, landing in primal next(p)
    let rho = |p: usize| -> DMatrix<f64> {
        let d = b.d_ortho(p);
        -(d * ssvd[p].pinv_apply(&DMatrix::identity(b.grades[p].dim, b.grades[p].dim)))
    };

    // nodes, in sequence order
    let mut nodes: Vec<SeqNode> = Vec::new();
    let mut push = |kind: NodeKind, grade: usize, label: String, basis: DMatrix<f64>, oracle_dim: usize| {
        nodes.push(SeqNode { kind, grade, label, dim: basis.ncols(), oracle_dim, exactness_angle: 0.0, basis });
    };
    let rel_basis = |q: usize| -> Result<DMatrix<f64>> {
        match c.prev(q) {
            Some(p) if p < nb => linalg::orth(&dn::flux_of_dirichlet(c, h, p), &policy, "Rel node"),
            _ => Ok(DMatrix::zeros(0, 0)),
        }
    };
    let abs_basis = |g: usize| -> Result<DMatrix<f64>> {
        if g < nb {
            linalg::orth(&dn::trace_of_neumann(c, h, g), &policy, "Abs node")
        } else {
            Ok(DMatrix::zeros(0, 0))
        }
    };
    for g in 0..ng {
        push(NodeKind::Rel, g, format!("Rel({})", c.label(g)), rel_basis(g)?, oracle.relative[g]);
        push(NodeKind::Abs, g, format!("Abs({})", c.label(g)), abs_basis(g)?, oracle.absolute[g]);
        if g < nb {
            push(NodeKind::Bd, g, format!("Bd({})", b.label(g)), boundary_harmonics(hb, g), oracle.boundary[g]);
        }
    }

    // maps between consecutive nodes
    let nn = nodes.len();
    let nmaps = if cyclic { nn } else { nn - 1 };
    let mut maps = Vec::with_capacity(nmaps);
    for i in 0..nmaps {
        let j = (i + 1) % nn;
        let (src, dst) = (&nodes[i], &nodes[j]);
        let (name, ambient, scale): (&str, Option<DMatrix<f64>>, f64) = match src.kind {
            // Rel(g) → Abs(g): covectors of prev(g) → primal g
            NodeKind::Rel => match c.prev(src.grade) {
                Some(p) if p < nb && src.dim > 0 && dst.dim > 0 => {
                    let r = rho(p);
                    let sc = linalg::norm2(&r);
                    ("rho", Some(r), sc)
                }
                _ => ("rho", None, 1.0),
            },
            NodeKind::Abs => ("i", None, 1.0),
            NodeKind::Bd => ("pi", Some(dn.blocks[src.grade].s_ortho.clone()), s_scale),
        };
        let (matrix, containment) = match (&ambient, src.dim, dst.dim) {
            (_, 0, _) | (_, _, 0) => (DMatrix::zeros(dst.dim, src.dim), 0.0),
            (None, _, _) => (dst.basis.transpose() * &src.basis, 0.0),
            (Some(a), _, _) => {
                let img = a * &src.basis;
                let m = dst.basis.transpose() * &img;
                let off = &img - &dst.basis * &m;
                (m, rel(linalg::norm2(&off), scale))
            }
        };
        // containment into a zero node (e.g. π̄ into Rel when 𝓗_D = 0)
        let containment = if dst.dim == 0 && src.dim > 0 {
            match &ambient {
                Some(a) => rel(linalg::norm2(&(a * &src.basis)), scale),
                None => 0.0,
            }
        } else {
            containment
        };
        let sc = if ambient.is_some() { scale } else { 1.0 };
        let rank = Svd::with_scale(&matrix, sc, &policy, &format!("sequence map {name} at node {i}"))?.rank;
        maps.push(SeqMap { name: name.to_string(), from: i, to: j, rank, containment, scale: sc, matrix });
    }

    // exactness: image of incoming vs kernel of outgoing, in node coordinates
    for k in 0..nn {
        let dim = nodes[k].dim;
        if dim == 0 {
            continue;
        }
        let incoming = if cyclic || k > 0 { Some(&maps[(k + nn - 1) % nn]) } else { None };
        let outgoing = if cyclic || k + 1 < nn { Some(&maps[k]) } else { None };
        let image = match incoming {
            Some(m) if m.matrix.ncols() > 0 => Svd::with_scale(&m.matrix, m.scale, &policy, "image")?.col_space(),
            _ => DMatrix::zeros(dim, 0),
        };
        let kernel = match outgoing {
            Some(m) if m.matrix.nrows() > 0 => Svd::with_scale(&m.matrix, m.scale, &policy, "kernel")?.null_space(),
            _ => DMatrix::identity(dim, dim),
        };
        nodes[k].exactness_angle = if image.ncols() != kernel.ncols() {
            std::f64::consts::FRAC_PI_2
        } else {
            linalg::subspace_distance(&image, &kernel)
        };
    }

    let commutativity = commutativity_squares(c, h, hb, dn, tol, &ssvd)?;
    Ok(SequenceCheck { nodes, maps, commutativity, cyclic })
}

/// The three squares relating boundary maps to interior ones.
fn commutativity_squares(c: &GradedComplex, h: &HarmonicSpaces, hb: &HarmonicSpaces, dn: &DNMap, tol: &Tolerances, ssvd: &[Svd]) -> Result<Vec<Commutativity>> {
    let policy = tol.rank_policy();
    let b = c.boundary.as_deref().expect("boundary");
    let nb = b.num_grades();
    let s_scale = dn.s_scale();
    let mut out = Vec::new();
    for g in 0..nb {
        let label = b.label(g).to_string();
        let bd = boundary_harmonics(hb, g);
        // h∘π* vs π̄*: θ ∈ 𝓗(∂M) ↦ F(P_{𝓗_D} d(zero extension of θ))
        if let Some(q) = c.next(g) {
            if bd.ncols() > 0 {
                let theta = b.from_ortho(g, &bd);
                let dz = c.to_ortho(q, &linalg::spmm(c.witten_d(g), &c.extend_by_zero(g, &theta)));
                let hd = &h.grades[q].dirichlet;
                let kappa = to_cochains(c, q, &(hd * (hd.transpose() * dz)));
                let lhs = b.grades[g].factor().l_solve(&c.flux(g, &kappa));
                let rhs = &dn.blocks[g].s_ortho * &bd;
                out.push(Commutativity { square: "h∘π* − π̄*∘ι".into(), grade: label.clone(), residual: rel(linalg::norm2(&(lhs - rhs)), s_scale) });
            }
        }
        // f∘ρ* vs ρ̄*∘h: κ ∈ 𝓗_D^{next g} ↦ i*P_{𝓗_N}κ vs −d_∂Λ⁺F(κ)
        if let (Some(q), Some(bq)) = (c.next(g), b.next(g)) {
            let hd = &h.grades[q].dirichlet;
            if hd.ncols() > 0 {
                let kappa = to_cochains(c, q, hd);
                let hn = &h.grades[q].neumann;
                let pn = to_cochains(c, q, &(hn * (hn.transpose() * hd)));
                let lhs = b.to_ortho(bq, &c.trace(q, &pn));
                let phi = b.grades[g].factor().l_solve(&c.flux(g, &kappa));
                let rhs = -(b.d_ortho(g) * ssvd[g].pinv_apply(&phi));
                let scale = linalg::norm2(&lhs).max(linalg::norm2(&rhs)).max(1.0);
                out.push(Commutativity { square: "f∘ρ* − ρ̄*∘h".into(), grade: b.label(bq).to_string(), residual: rel(linalg::norm2(&(lhs - rhs)), scale) });
            }
        }
        // ι∘ī* vs i*∘f: a ∈ 𝓗_N^g ↦ projection of i*a vs i*a minus its exact part
        let hn = &h.grades[g].neumann;
        if hn.ncols() > 0 {
            let u = b.to_ortho(g, &c.trace(g, &to_cochains(c, g, hn)));
            let lhs = &bd * (bd.transpose() * &u);
            let exact = match b.prev(g) {
                Some(p) => {
                    let d = b.d_ortho(p);
                    let svd = Svd::new(d, &policy, "exact part of a boundary trace")?;
                    d * svd.pinv_apply(&u)
                }
                None => DMatrix::zeros(u.nrows(), u.ncols()),
            };
            let rhs = &u - exact;
            out.push(Commutativity { square: "ι∘ī* − i*∘f".into(), grade: label, residual: rel(linalg::norm2(&(lhs - rhs)), linalg::norm2(&u).max(1.0)) });
        }
    }
    Ok(out)
}

// ---- cup product ----------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct CupCheck {
    /// Grades of `α` (Neumann) and `β` (exact Dirichlet).
    pub alpha_grade: String,
    pub beta_grade: String,
    /// `"basis(i,j)"` or `"trial k"`.
    pub input: String,
    /// `‖F(P_{𝓗_D}(α∧β))‖` in boundary orthonormal coordinates.
    pub lhs_norm: f64,
    /// Relative residual against the boundary formula.
    pub residual: f64,
}

/// Evaluate both sides for one pair; returns `(lhs, rhs)` in orthonormal
/// covector coordinates of boundary grade `prev(a + b)`.
pub fn cup_sides(c: &GradedComplex, h: &HarmonicSpaces, dn: &DNMap, a: usize, alpha: &DVector<f64>, bg: usize, beta: &DVector<f64>, tol: &Tolerances) -> Result<(DVector<f64>, DVector<f64>)> {
    let policy = tol.rank_policy();
    let bc = c.boundary.as_deref().ok_or(Error::EmptyBoundarySubspace)?;
    let (t, w) = graded_wedge(c, a, alpha, bg, beta)?;
    let p = c.prev(t).ok_or(Error::DegreeOutOfRange { degree: t, max: c.dim })?;
    let pb = c.prev(bg).ok_or(Error::DegreeOutOfRange { degree: bg, max: c.dim })?;

    // interior side: Dirichlet harmonic part of α∧β, then its flux
    let hd = &h.grades[t].dirichlet;
    let eta = to_cochains(c, t, &(hd * (hd.transpose() * c.to_ortho(t, &DMatrix::from_column_slice(w.len(), 1, w.as_slice())))));
    let lhs = bc.grades[p].factor().l_solve(&c.flux(p, &eta));

    // boundary side: Λ((−1)^a i*α ∧ Λ⁺F(β))
    let beta_m = DMatrix::from_column_slice(beta.len(), 1, beta.as_slice());
    let psi = bc.grades[pb].factor().l_solve(&c.flux(pb, &beta_m));
    let svd = Svd::with_scale(&dn.blocks[pb].s_ortho, dn.s_scale(), &policy, "pinv Λ (cup)")?;
    let pot = bc.from_ortho(pb, &svd.pinv_apply(&psi));
    let phi = c.trace(a, &DMatrix::from_column_slice(alpha.len(), 1, alpha.as_slice()));
    let (tb, wb) = graded_wedge(bc, a, &phi.column(0).into_owned(), pb, &pot.column(0).into_owned())?;
    debug_assert_eq!(tb, p);
    let sign = grade_sign(a);
    let rhs = &dn.blocks[p].s_ortho * bc.to_ortho(p, &DMatrix::from_column_slice(wb.len(), 1, wb.as_slice())) * sign;
    Ok((lhs.column(0).into_owned(), rhs.column(0).into_owned()))
}

/// All grade pairs `(a, b)` with `𝓗_N^a ≠ 0` and `𝓔𝓗_D^b ≠ 0`: every basis
/// pair plus `trials` seeded random combinations. `EmptyBoundarySubspace`
/// when no exact Dirichlet field exists (the check is vacuous).
pub fn check_cup_product(c: &GradedComplex, h: &HarmonicSpaces, dn: &DNMap, trials: usize, seed: u64, tol: &Tolerances) -> Result<Vec<CupCheck>> {
    let ng = c.num_grades();
    let ehd: Vec<DMatrix<f64>> = (0..ng).map(|g| h.exact_dirichlet(c, g, tol)).collect::<Result<_>>()?;
    if ehd.iter().all(|e| e.ncols() == 0) {
        return Err(Error::EmptyBoundarySubspace);
    }
    let mut jobs: Vec<(usize, usize, String, DVector<f64>, DVector<f64>)> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for a in 0..ng {
        let hn = to_cochains(c, a, &h.grades[a].neumann);
        for bg in 0..ng {
            let eb = to_cochains(c, bg, &ehd[bg]);
            if hn.ncols() == 0 || eb.ncols() == 0 {
                continue;
            }
            let t = match c.grading {
                Grading::Degree => a + bg,
                Grading::Parity => (a + bg) % 2,
            };
            if t >= ng || c.prev(t).is_none() || c.prev(bg).is_none() {
                continue;
            }
            for i in 0..hn.ncols() {
                for j in 0..eb.ncols() {
                    jobs.push((a, bg, format!("basis({i},{j})"), hn.column(i).into_owned(), eb.column(j).into_owned()));
                }
            }
            for k in 0..trials {
                let x = DVector::from_fn(hn.ncols(), |_, _| rng.random_range(-1.0..1.0));
                let y = DVector::from_fn(eb.ncols(), |_, _| rng.random_range(-1.0..1.0));
                jobs.push((a, bg, format!("trial {k}"), &hn * x, &eb * y));
            }
        }
    }
    if jobs.is_empty() {
        return Err(Error::EmptyBoundarySubspace);
    }
    exec::map_slice(&jobs, |(a, bg, input, alpha, beta)| {
        let (lhs, rhs) = cup_sides(c, h, dn, *a, alpha, *bg, beta, tol)?;
        let ln = lhs.norm();
        Ok(CupCheck {
            alpha_grade: c.label(*a).to_string(),
            beta_grade: c.label(*bg).to_string(),
            input: input.clone(),
            lhs_norm: ln,
            residual: rel((&lhs - &rhs).norm(), ln.max(rhs.norm())),
        })
    })
    .into_iter()
    .collect()
}

pub fn max_cup_residual(checks: &[CupCheck]) -> f64 {
    checks.iter().map(|c| c.residual).fold(0.0, f64::max)
}

// ---- equivariant report, five-term identity, kernel bound -----------------

#[derive(Clone, Debug, Serialize)]
pub struct EquivariantRow {
    pub field: VectorFieldSpec,
    pub grade: String,
    pub rank_r: usize,
    /// `dim H(F)` (empty fixed set) for `s ≠ 0`; exact invariant cohomology for `s = 0`.
    pub expected: usize,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivariantReport {
    pub rows: Vec<EquivariantRow>,
    pub oracle: GradedBetti,
    pub oracle_untwisted: GradedBetti,
}

impl EquivariantReport {
    pub fn holds(&self) -> bool {
        self.rows.iter().all(|r| r.holds)
    }
}

/// Recovery ranks on `B × S¹` for the given rotation and for `s = 0`. The
/// action is free, so for `s ≠ 0` the fixed set is empty and every rank must
/// vanish; for `s = 0` the ranks are the invariant cohomology of the product.
pub fn equivariant_report(base: Arc<OperatorBundle>, field: VectorFieldSpec, tol: &Tolerances) -> Result<EquivariantReport> {
    let VectorFieldSpec::ProductRotation { l, .. } = field else {
        return Err(Error::BackendMismatch("the equivariant report needs the product backend".into()));
    };
    let untwisted = VectorFieldSpec::ProductRotation { s: 0.0, l };
    let mut rows = Vec::new();
    let mut oracles = Vec::new();
    for f in [field, untwisted] {
        let c = GradedComplex::product(base.clone(), f)?;
        let h = HarmonicSpaces::compute(&c, tol)?;
        let map = DNMap::assemble(&c, &h, tol)?;
        let orc = graded_oracle(&c);
        for g in 0..map.blocks.len() {
            let r = dn::recovery_operator(&c, &h, &map, g, tol)?;
            let q = c.next(g).expect("parity grading");
            let expected = if f.speed() != 0.0 { 0 } else { orc.relative[q] };
            rows.push(EquivariantRow { field: f, grade: r.grade.clone(), rank_r: r.rank, expected, holds: r.rank == expected });
        }
        oracles.push(orc);
    }
    let oracle_untwisted = oracles.pop().unwrap();
    let oracle = oracles.pop().unwrap();
    Ok(EquivariantReport { rows, oracle, oracle_untwisted })
}

#[derive(Clone, Debug, Serialize)]
pub struct FiveTerm {
    pub grade: String,
    pub harmonic: usize,
    pub neumann: usize,
    pub dirichlet: usize,
    pub ex_co: usize,
    pub holds: bool,
}

/// `dim 𝓗 = dim 𝓗_N + dim 𝓗_D + dim 𝓗_ex,co` per grade. Without boundary
/// the three spaces coincide, and the count becomes `𝓗 = 𝓗_N = 𝓗_D`.
pub fn five_term(c: &GradedComplex, h: &HarmonicSpaces) -> Vec<FiveTerm> {
    let closed = !c.has_boundary();
    h.grades
        .iter()
        .enumerate()
        .map(|(g, x)| {
            let (hh, n, d, e) = (x.harmonic.ncols(), x.neumann.ncols(), x.dirichlet.ncols(), x.ex_co.ncols());
            FiveTerm { grade: c.label(g).to_string(), harmonic: hh, neumann: n, dirichlet: d, ex_co: e, holds: if closed { hh == n && n == d } else { hh == n + d + e } }
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelBound {
    pub grade: String,
    pub quotient_dim: usize,
    pub boundary_cohomology: usize,
    pub interior_cohomology: usize,
    pub holds: bool,
}

/// `dim[ker Λ / 𝓔(∂M)] ≤ min(dim H(∂M), dim H(M))` per boundary grade.
pub fn kernel_bound(c: &GradedComplex, h: &HarmonicSpaces, hb: &HarmonicSpaces, dn: &DNMap, tol: &Tolerances) -> Result<Vec<KernelBound>> {
    (0..dn.blocks.len())
        .map(|g| {
            let k = dn::kernel_range_analysis(c, h, dn, g, tol)?;
            let bdim = hb.grades[g].harmonic.ncols();
            let idim = h.grades[g].neumann.ncols();
            Ok(KernelBound {
                grade: k.grade,
                quotient_dim: k.quotient_dim,
                boundary_cohomology: bdim,
                interior_cohomology: idim,
                holds: k.quotient_dim <= bdim.min(idim),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dec::assemble;
    use crate::mesh::{generate, Shape};
    use crate::witten::product_base;

    struct Setup {
        c: GradedComplex,
        h: HarmonicSpaces,
        hb: HarmonicSpaces,
        dn: DNMap,
        tol: Tolerances,
    }

    fn setup(shape: Shape, res: usize, field: VectorFieldSpec) -> Setup {
        let tol = Tolerances::default();
        let c = match field {
            VectorFieldSpec::Zero => GradedComplex::zero(Arc::new(assemble(&generate(shape, res).unwrap()).unwrap()), Grading::Degree),
            _ => GradedComplex::product(Arc::new(assemble(&product_base(shape, res).unwrap()).unwrap()), field),
        }
        .unwrap();
        let h = HarmonicSpaces::compute(&c, &tol).unwrap();
        let hb = HarmonicSpaces::compute(c.boundary.as_deref().unwrap(), &tol).unwrap();
        let dn = DNMap::assemble(&c, &h, &tol).unwrap();
        Setup { c, h, hb, dn, tol }
    }

    #[test]
    fn graded_oracle_agrees_with_simplicial_betti() {
        let k = generate(Shape::Annulus, 6).unwrap();
        let c = GradedComplex::zero(Arc::new(assemble(&k).unwrap()), Grading::Degree).unwrap();
        let b = betti_oracle(&k);
        let g = graded_oracle(&c);
        assert_eq!(g.absolute, b.absolute);
        assert_eq!(g.relative, b.relative);
        assert_eq!(&g.boundary[..2], &b.boundary[..]);
    }

    #[test]
    fn product_oracle_is_kunneth_or_trivial() {
        let base = Arc::new(assemble(&generate(Shape::Interval, 4).unwrap()).unwrap());
        // H(I × S¹) = H(I) ⊗ H(S¹): one class in each parity
        let c0 = GradedComplex::product(base.clone(), VectorFieldSpec::rotation(0.0)).unwrap();
        let o = graded_oracle(&c0);
        assert_eq!(o.absolute, vec![1, 1]);
        assert_eq!(o.relative, vec![1, 1]);
        assert_eq!(o.boundary, vec![2, 2]);
        for s in [1.0, 0.5, 2.25] {
            let c = GradedComplex::product(base.clone(), VectorFieldSpec::rotation(s)).unwrap();
            let o = graded_oracle(&c);
            assert_eq!((o.absolute, o.relative, o.boundary), (vec![0, 0], vec![0, 0], vec![0, 0]), "s = {s}");
        }
    }

    #[test]
    fn graded_wedge_unit_and_sign() {
        let base = Arc::new(assemble(&generate(Shape::Square, 3).unwrap()).unwrap());
        let c = GradedComplex::product(base, VectorFieldSpec::rotation(1.0)).unwrap();
        let one = {
            let mut v = DVector::zeros(c.grades[0].dim);
            let a0 = c.grades[0].component(Kind::Alpha, 0).unwrap();
            v.rows_mut(a0.offset, a0.len).fill(1.0);
            v
        };
        let x = DVector::from_fn(c.grades[1].dim, |i, _| (i as f64 * 0.37).sin());
        let (t, w) = graded_wedge(&c, 0, &one, 1, &x).unwrap();
        assert_eq!(t, 1);
        assert!((w - &x).norm() < 1e-10 * x.norm());
    }

    fn check_sequence(s: &Setup) -> SequenceCheck {
        let seq = check_exact_sequence(&s.c, &s.h, &s.hb, &s.dn, &s.tol).unwrap();
        assert!(seq.dims_match_oracle(), "{:?}", seq.nodes.iter().map(|n| (&n.label, n.dim, n.oracle_dim)).collect::<Vec<_>>());
        assert!(seq.max_exactness_angle() < 1e-6, "{:?} {:?}", seq.exactness_angles(), seq.maps.iter().map(|m| (&m.name, m.rank, m.matrix.as_slice().to_vec())).collect::<Vec<_>>());
        assert!(seq.max_commutativity() < 1e-6, "{:?} {:?}", seq.commutativity, seq.maps);
        seq.verify(&s.tol).unwrap();
        seq
    }

    #[test]
    fn disk_sequence_collapses() {
        let s = setup(Shape::Disk, 4, VectorFieldSpec::Zero);
        let seq = check_sequence(&s);
        assert_eq!(seq.node_dims(), vec![0, 1, 1, 0, 0, 1, 1, 0]);
    }

    #[test]
    fn annulus_sequence_is_exact() {
        let s = setup(Shape::Annulus, 6, VectorFieldSpec::Zero);
        let seq = check_sequence(&s);
        assert_eq!(seq.node_dims(), vec![0, 1, 2, 1, 1, 2, 1, 0]);
    }

    #[test]
    fn product_annulus_sequence() {
        let s = setup(Shape::Annulus, 6, VectorFieldSpec::rotation(1.0));
        let seq = check_sequence(&s);
        assert!(seq.node_dims().iter().all(|&d| d == 0));
        let s = setup(Shape::Annulus, 6, VectorFieldSpec::rotation(0.0));
        let seq = check_sequence(&s);
        assert_eq!(seq.node_dims(), vec![1, 1, 2, 1, 1, 2]);
    }

    #[test]
    fn cup_product_on_disk_and_annulus() {
        let s = setup(Shape::Disk, 4, VectorFieldSpec::Zero);
        let cups = check_cup_product(&s.c, &s.h, &s.dn, 3, 0, &s.tol).unwrap();
        assert!(!cups.is_empty());
        assert!(max_cup_residual(&cups) < 1e-8, "{cups:?}");
        let s = setup(Shape::Annulus, 8, VectorFieldSpec::Zero);
        let cups = check_cup_product(&s.c, &s.h, &s.dn, 2, 0, &s.tol).unwrap();
        assert!(cups.iter().any(|c| c.alpha_grade == "1" && c.beta_grade == "1"));
        assert!(max_cup_residual(&cups) < 0.5, "{cups:?}");
    }

    #[test]
    fn cup_is_vacuous_without_exact_dirichlet_fields() {
        let s = setup(Shape::Annulus, 6, VectorFieldSpec::rotation(1.0));
        assert!(matches!(check_cup_product(&s.c, &s.h, &s.dn, 1, 0, &s.tol), Err(Error::EmptyBoundarySubspace)));
    }

    #[test]
    fn equivariant_ranks() {
        let base = Arc::new(assemble(&product_base(Shape::Annulus, 6).unwrap()).unwrap());
        let rep = equivariant_report(base, VectorFieldSpec::rotation(1.0), &Tolerances::default()).unwrap();
        assert!(rep.holds(), "{rep:?}");
        assert!(rep.rows.iter().filter(|r| r.field.speed() != 0.0).all(|r| r.rank_r == 0));
        assert!(rep.rows.iter().filter(|r| r.field.speed() == 0.0).all(|r| r.rank_r == 1));
    }

    #[test]
    fn five_term_and_kernel_bound() {
        for (shape, field) in [(Shape::Annulus, VectorFieldSpec::Zero), (Shape::Square, VectorFieldSpec::rotation(1.0))] {
            let s = setup(shape, 4, field);
            assert!(five_term(&s.c, &s.h).iter().all(|f| f.holds));
            assert!(kernel_bound(&s.c, &s.h, &s.hb, &s.dn, &s.tol).unwrap().iter().all(|k| k.holds));
        }
    }

    /// Torus in ℝ³ with one grid square removed; `H¹(M,∂M) → H¹(M)` is an
    /// isomorphism there, so the sign of `ρ̄` is exercised.
    fn punctured_torus(n: usize) -> crate::mesh::SimplicialComplex {
        use std::f64::consts::TAU;
        let mut coords = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let (u, v) = (TAU * i as f64 / n as f64, TAU * j as f64 / n as f64);
                coords.push(vec![(2.0 + v.cos()) * u.cos(), (2.0 + v.cos()) * u.sin(), v.sin()]);
            }
        }
        let id = |i: usize, j: usize| (i % n) * n + (j % n);
        let mut cells = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i == 0 && j == 0 {
                    continue;
                }
                cells.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                cells.push(vec![id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        crate::mesh::SimplicialComplex::new(coords, cells).unwrap()
    }

    #[test]
    fn punctured_torus_sequence_exercises_rho() {
        let tol = Tolerances::default();
        let k = punctured_torus(6);
        let c = GradedComplex::zero(Arc::new(assemble(&k).unwrap()), Grading::Degree).unwrap();
        let h = HarmonicSpaces::compute(&c, &tol).unwrap();
        let hb = HarmonicSpaces::compute(c.boundary.as_deref().unwrap(), &tol).unwrap();
        let dn = DNMap::assemble(&c, &h, &tol).unwrap();
        let s = Setup { c, h, hb, dn, tol };
        let seq = check_sequence(&s);
        assert_eq!(seq.node_dims(), vec![0, 1, 1, 2, 2, 1, 1, 0]);
        let rho = seq.maps.iter().find(|m| m.name == "rho" && m.from == 3).unwrap();
        assert_eq!(rho.rank, 2);
        assert!(seq.commutativity.iter().any(|c| c.square.starts_with("f∘ρ*")));
    }
}
