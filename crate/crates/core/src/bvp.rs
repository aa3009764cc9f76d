//! Harmonic-field spaces, Hodge–Morrey–Friedrichs decompositions and the
//! two boundary value problems (prescribed `d_X`, `δ_X` and trace; and the
//! Dirichlet problem behind the DN map).
//!
//! Everything is computed in mass-orthonormal coordinates `y = Lᵀx`, where
//! the `L²` inner product is Euclidean and subspace angles are meaningful.
//! Null spaces come from dense SVDs with the rank policy of
//! [`Tolerances::rank_policy`].

use nalgebra::{DMatrix, DVector};

use crate::linalg::{self, RankPolicy, Svd};
use crate::witten::GradedComplex;
use crate::{exec, Error, Result, Tolerances};

/// Harmonic-field bases of one grade, as columns in orthonormal coordinates.
#[derive(Clone, Debug)]
pub struct GradeHarmonics {
    /// `𝓗_N = {d_X ω = 0, δ_X ω = 0}` (natural boundary condition).
    pub neumann: DMatrix<f64>,
    /// `𝓗_D = {d_X ω = 0, δ_X ω = 0, i*ω = 0}`.
    pub dirichlet: DMatrix<f64>,
    /// `𝓗 = {d_X ω = 0, δ_X ω = 0}` with `δ_X` tested only on trace-free forms.
    pub harmonic: DMatrix<f64>,
    /// `𝓗 ∩ ran d_X`.
    pub exact: DMatrix<f64>,
    /// `𝓗 ⊖ 𝓗_D`.
    pub coexact: DMatrix<f64>,
    /// `𝓗_ex ∩ 𝓗_co`.
    pub ex_co: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct HarmonicSpaces {
    pub grades: Vec<GradeHarmonics>,
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct HarmonicDims {
    pub neumann: Vec<usize>,
    pub dirichlet: Vec<usize>,
    pub harmonic: Vec<usize>,
    pub ex_co: Vec<usize>,
}

/// Orthonormal basis of `span(q1) ∩ span(q2)` (both orthonormal), via the
/// null space of `[q1, −q2]` under the rank policy.
pub fn intersect(q1: &DMatrix<f64>, q2: &DMatrix<f64>, policy: &RankPolicy, ctx: &str) -> Result<DMatrix<f64>> {
    let m = q1.nrows();
    if q1.ncols() == 0 || q2.ncols() == 0 {
        return Ok(DMatrix::zeros(m, 0));
    }
    let stacked = linalg::hstack(&[q1, &(-q2)]);
    let null = linalg::null_space(&stacked, policy, ctx)?;
    if null.ncols() == 0 {
        return Ok(DMatrix::zeros(m, 0));
    }
    let vecs = q1 * null.rows(0, q1.ncols());
    // each null vector has unit norm split evenly between the two halves,
    // so the natural scale is 1 even when `vecs` is round-off
    let svd = Svd::with_scale(&vecs, 1.0, policy, ctx)?;
    Ok(svd.col_space())
}

/// `span(q) ⊖ span(p)` inside `span(q)` for orthonormal `q`, `p ⊆ q`.
fn complement_within(q: &DMatrix<f64>, p: &DMatrix<f64>, policy: &RankPolicy, ctx: &str) -> Result<DMatrix<f64>> {
    if q.ncols() == 0 {
        return Ok(q.clone());
    }
    let proj = q - p * (p.transpose() * q);
    // `proj` may be pure round-off (p = q); measure it against ‖q‖ = 1
    let svd = Svd::with_scale(&proj, 1.0, policy, ctx)?;
    Ok(svd.col_space())
}

impl HarmonicSpaces {
    pub fn compute(c: &GradedComplex, tol: &Tolerances) -> Result<Self> {
        let policy = tol.rank_policy();
        let grades = exec::map_range(c.num_grades(), |g| grade_harmonics(c, g, &policy))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { grades })
    }

    pub fn dims(&self) -> HarmonicDims {
        let f = |k: fn(&GradeHarmonics) -> &DMatrix<f64>| self.grades.iter().map(|g| k(g).ncols()).collect();
        HarmonicDims { neumann: f(|g| &g.neumann), dirichlet: f(|g| &g.dirichlet), harmonic: f(|g| &g.harmonic), ex_co: f(|g| &g.ex_co) }
    }

    /// Smallest principal angle between `𝓗_N` and `𝓗_D` of grade `g`
    /// (`π/2` if either is trivial).
    pub fn separation(&self, g: usize) -> f64 {
        linalg::separation(&self.grades[g].neumann, &self.grades[g].dirichlet)
    }

    /// `𝓔𝓗_D`: Dirichlet harmonic fields that are `d_X`-exact.
    pub fn exact_dirichlet(&self, c: &GradedComplex, g: usize, tol: &Tolerances) -> Result<DMatrix<f64>> {
        let policy = tol.rank_policy();
        let ran = linalg::orth(&c.d_ortho_into(g), &policy, "ran d_X")?;
        intersect(&self.grades[g].dirichlet, &ran, &policy, "exact Dirichlet fields")
    }
}

/// Basis of `𝓗_N` etc. as cochains (columns) rather than orthonormal coordinates.
pub fn to_cochains(c: &GradedComplex, g: usize, q: &DMatrix<f64>) -> DMatrix<f64> {
    c.from_ortho(g, q)
}

fn grade_harmonics(c: &GradedComplex, g: usize, policy: &RankPolicy) -> Result<GradeHarmonics> {
    let label = c.label(g).to_string();
    let dg = c.d_ortho(g);
    let dp = c.d_ortho_into(g);
    let neumann = linalg::null_space(&linalg::vstack(&[dg, &dp.transpose()]), policy, &format!("H_N grade {label}"))?;

    let add = c.d_dd(g);
    let adp = c.d_dd_into(g);
    let dz = linalg::null_space(&linalg::vstack(&[add, &adp.transpose()]), policy, &format!("H_D grade {label}"))?;
    // interior orthonormal coordinates → full orthonormal coordinates
    let dirichlet = c.to_ortho(g, &c.from_ortho_interior(g, &dz));

    let ahp = c.d_hat_into(g);
    let harmonic = linalg::null_space(&linalg::vstack(&[dg, &ahp.transpose()]), policy, &format!("H grade {label}"))?;

    let ran = linalg::orth(&dp, policy, &format!("ran d_X grade {label}"))?;
    let exact = intersect(&harmonic, &ran, policy, &format!("H_ex grade {label}"))?;
    let coexact = complement_within(&harmonic, &dirichlet, policy, &format!("H_co grade {label}"))?;
    let ex_co = intersect(&exact, &coexact, policy, &format!("H_ex,co grade {label}"))?;
    Ok(GradeHarmonics { neumann, dirichlet, harmonic, exact, coexact, ex_co })
}

/// `ω = e + c + h` with the Friedrichs refinements of `h`, all as cochains.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub input: DVector<f64>,
    /// `d_X σ` with `i*σ = 0`
    pub e_part: DVector<f64>,
    /// `δ_X τ` (Neumann)
    pub c_part: DVector<f64>,
    pub h_part: DVector<f64>,
    /// `h = h_d + h_co`, `h_d ∈ 𝓗_D`
    pub h_dirichlet: DVector<f64>,
    pub h_coexact: DVector<f64>,
    /// `h = h_n + h_ex`, `h_n ∈ 𝓗_N`
    pub h_neumann: DVector<f64>,
    pub h_exact: DVector<f64>,
    /// Minimum-norm trace-free potential of `e_part`.
    pub potential: DVector<f64>,
    /// `max(‖Σ parts − ω‖, pairwise |⟨·,·⟩|) / ‖ω‖²`-style diagnostics.
    pub resum_residual: f64,
    pub orthogonality_residual: f64,
    pub potential_trace: f64,
}

pub fn hmf_decompose(c: &GradedComplex, h: &HarmonicSpaces, g: usize, omega: &DVector<f64>, tol: &Tolerances) -> Result<Decomposition> {
    if omega.len() != c.grades[g].dim || omega.iter().any(|v| !v.is_finite()) {
        return Err(Error::SolverFailure("input cochain has wrong length or non-finite entries".into()));
    }
    let policy = tol.rank_policy();
    let x = DMatrix::from_column_slice(omega.len(), 1, omega.as_slice());
    let y = c.to_ortho(g, &x);

    // 𝓔: range of Â_into (Dirichlet potentials)
    let a = c.d_hat_into(g);
    let asvd = Svd::new(&a, &policy, "exact part")?;
    let z = asvd.pinv_apply(&y);
    let ye = &a * &z;
    // 𝓒: row space of D̃_g
    let qrow = Svd::new(c.d_ortho(g), &policy, "coexact part")?.row_space();
    let yc = &qrow * (qrow.transpose() * &y);
    let yh = &y - &ye - &yc;

    let gh = &h.grades[g];
    let proj = |q: &DMatrix<f64>, v: &DMatrix<f64>| q * (q.transpose() * v);
    let yhd = proj(&gh.dirichlet, &yh);
    let yhn = proj(&gh.neumann, &yh);

    let back = |v: &DMatrix<f64>| DVector::from_column_slice(c.from_ortho(g, v).as_slice());
    let nrm = y.norm().max(f64::MIN_POSITIVE);
    let parts = [&ye, &yc, &yh];
    let resum = (parts.iter().fold(DMatrix::zeros(y.nrows(), 1), |acc, p| acc + *p) - &y).norm() / nrm;
    let mut orth: f64 = 0.0;
    for i in 0..3 {
        for j in i + 1..3 {
            orth = orth.max((parts[i].transpose() * parts[j])[(0, 0)].abs() / (nrm * nrm));
        }
    }
    let potential = match c.prev(g) {
        Some(p) => c.from_ortho_interior(p, &z),
        None => DMatrix::zeros(0, 1),
    };
    let potential_trace = c.prev(g).map(|p| c.trace(p, &potential).norm()).unwrap_or(0.0);
    Ok(Decomposition {
        input: omega.clone(),
        e_part: back(&ye),
        c_part: back(&yc),
        h_part: back(&yh),
        h_dirichlet: back(&yhd),
        h_coexact: back(&(&yh - &yhd)),
        h_neumann: back(&yhn),
        h_exact: back(&(&yh - &yhn)),
        potential: DVector::from_column_slice(potential.as_slice()),
        resum_residual: resum,
        orthogonality_residual: orth,
        potential_trace,
    })
}

/// Which integrability condition failed.
fn infeasible(which: &str, value: f64) -> Error {
    Error::Infeasible(format!("{which} violated (residual {value:.3e})"))
}

/// Minimum-norm `ω` (grade `g`) with `d_X ω = χ`, `δ_X ω = ρ` (tested on
/// trace-free forms) and `i*ω = ψ`, after checking the integrability
/// conditions: `δ_X ρ = 0`, `ρ ⟂ 𝓗_D`, `d_X χ = 0`, `i*χ = d_X ψ` and
/// `⟨χ, κ⟩ = ψ·F(κ)` for `κ ∈ 𝓗_D` of the next grade.
pub fn solve_dirichlet_data_bvp(
    c: &GradedComplex,
    h: &HarmonicSpaces,
    g: usize,
    chi: &DVector<f64>,
    rho: &DVector<f64>,
    psi: &DVector<f64>,
    tol: &Tolerances,
) -> Result<DVector<f64>> {
    let policy = tol.rank_policy();
    let col = |v: &DVector<f64>| DMatrix::from_column_slice(v.len(), 1, v.as_slice());
    let (chi, rho, psi) = (col(chi), col(rho), col(psi));
    if chi.nrows() != c.dim_next(g) || rho.nrows() != c.dim_prev(g) || psi.nrows() != c.boundary_dim(g) {
        return Err(Error::Config("boundary value data have the wrong dimensions".into()));
    }
    let rel = |v: f64, scale: f64| v / scale.max(f64::MIN_POSITIVE);

    // eq. for ρ
    if let Some(p) = c.prev(g) {
        let yr = c.to_ortho(p, &rho);
        let scale = yr.norm();
        let div = (c.d_hat_into(p).transpose() * &yr).norm();
        if rel(div, scale) > tol.bvp {
            return Err(infeasible("δ_X ρ = 0", rel(div, scale)));
        }
        let hd = (h.grades[p].dirichlet.transpose() * &yr).norm();
        if rel(hd, scale) > tol.bvp {
            return Err(infeasible("ρ ⟂ 𝓗_D", rel(hd, scale)));
        }
    }
    // eqs. for χ
    if let Some(q) = c.next(g) {
        let yc = c.to_ortho(q, &chi);
        let scale = yc.norm();
        let dchi = (c.d_ortho(q) * &yc).norm();
        if rel(dchi, scale) > tol.bvp {
            return Err(infeasible("d_X χ = 0", rel(dchi, scale)));
        }
        if let Some(b) = &c.boundary {
            let lhs = c.trace(q, &chi);
            let rhs = linalg::spmm(b.witten_d(g), &psi);
            let r = (lhs - rhs).norm();
            let s = c.trace(q, &chi).norm().max(psi.norm());
            if rel(r, s) > tol.bvp {
                return Err(infeasible("i*χ = d_X ψ", rel(r, s)));
            }
        }
        let kd = c.from_ortho(q, &h.grades[q].dirichlet);
        if kd.ncols() > 0 {
            let lhs = yc.transpose() * &h.grades[q].dirichlet;
            let flux = if c.boundary_dim(g) > 0 { c.flux(g, &kd) } else { DMatrix::zeros(0, kd.ncols()) };
            let rhs = psi.transpose() * flux;
            let r = (lhs - &rhs).norm();
            let s = scale.max(rhs.norm());
            if rel(r, s) > tol.bvp {
                return Err(infeasible("⟨χ, κ⟩ = ∫ψ∧i*⋆κ", rel(r, s)));
            }
        }
    }

    let e = c.extend(g, &psi);
    let mut rhs_blocks = Vec::new();
    let mut op_blocks = Vec::new();
    let a_hat = c.d_hat(g);
    let b1 = match c.next(g) {
        Some(q) => c.to_ortho(q, &(chi.clone() - linalg::spmm(c.witten_d(g), &e))),
        None => DMatrix::zeros(0, 1),
    };
    op_blocks.push(a_hat.clone());
    rhs_blocks.push(b1);
    let at = c.d_dd_into(g).transpose();
    let b2 = match c.prev(g) {
        Some(p) => {
            let mr = linalg::spmm(c.mass(p), &rho);
            c.grades[p].interior_factor().l_solve(&c.interior_rows(p, &mr))
        }
        None => DMatrix::zeros(0, 1),
    };
    op_blocks.push(at);
    rhs_blocks.push(b2);
    let op = linalg::vstack(&op_blocks.iter().collect::<Vec<_>>());
    let rhs = linalg::vstack(&rhs_blocks.iter().collect::<Vec<_>>());
    let svd = Svd::new(&op, &policy, "Dirichlet-data BVP")?;
    let z = svd.pinv_apply(&rhs);
    let resid = (&op * &z - &rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE);
    if resid > tol.bvp && rhs.norm() > 0.0 {
        return Err(Error::SolverFailure(format!("Dirichlet-data BVP residual {resid:.3e}")));
    }
    let omega = e + c.from_ortho_interior(g, &z);
    Ok(DVector::from_column_slice(omega.as_slice()))
}

/// Factorisation shared by all DN solves of one grade:
/// `G = [Â_g; Ã_{prev}ᵀ]` acting on trace-free orthonormal coordinates.
pub struct DnSolver {
    pub grade: usize,
    svd: Svd,
    rows_d: usize,
}

impl DnSolver {
    pub fn new(c: &GradedComplex, g: usize, tol: &Tolerances) -> Result<Self> {
        let a = c.d_hat(g);
        let at = c.d_dd_into(g).transpose();
        let op = linalg::vstack(&[a, &at]);
        let svd = Svd::new(&op, &tol.rank_policy(), &format!("DN solve grade {}", c.label(g)))?;
        Ok(Self { grade: g, svd, rows_d: a.nrows() })
    }

    /// Columns of `θ` (boundary values) and `η` (sources) → columns of `ω`.
    pub fn solve(&self, c: &GradedComplex, h: &HarmonicSpaces, theta: &DMatrix<f64>, eta: &DMatrix<f64>, tol: &Tolerances) -> Result<DMatrix<f64>> {
        let g = self.grade;
        let gr = &c.grades[g];
        // solvability: η ⟂ 𝓗_D
        if eta.ncols() > 0 {
            let ye = c.to_ortho(g, eta);
            let proj = h.grades[g].dirichlet.transpose() * &ye;
            for j in 0..eta.ncols() {
                let r = proj.column(j).norm() / ye.column(j).norm().max(f64::MIN_POSITIVE);
                if r > tol.bvp && ye.column(j).norm() > 0.0 {
                    return Err(Error::NotSolvable(r));
                }
            }
        }
        let ncols = theta.ncols().max(eta.ncols());
        let e = if theta.ncols() > 0 { c.extend(g, theta) } else { DMatrix::zeros(gr.dim, ncols) };
        let mut rhs = DMatrix::zeros(self.svd.u.nrows(), ncols);
        if let (Some(q), true) = (c.next(g), theta.ncols() > 0) {
            let b = c.to_ortho(q, &linalg::spmm(c.witten_d(g), &e));
            rhs.rows_mut(0, self.rows_d).copy_from(&(-b));
        }
        let mut z = self.svd.pinv_apply(&rhs);
        if eta.ncols() > 0 {
            let me = linalg::spmm(&gr.mass, eta);
            let et = gr.interior_factor().l_solve(&c.interior_rows(g, &me));
            z += self.svd.gram_pinv_apply(&et);
        }
        Ok(e + c.from_ortho_interior(g, &z))
    }
}

/// Minimum-norm solution of `Δ_X ω = η`, `i*ω = θ`, `i*δ_X ω = 0` (weakly),
/// columnwise. `θ` or `η` may have zero columns.
pub fn solve_dn_bvp(c: &GradedComplex, h: &HarmonicSpaces, g: usize, theta: &DMatrix<f64>, eta: &DMatrix<f64>, tol: &Tolerances) -> Result<DMatrix<f64>> {
    DnSolver::new(c, g, tol)?.solve(c, h, theta, eta, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dec::{assemble, Flavor};
    use crate::mesh::{betti_oracle, generate, Shape};
    use crate::witten::{Grading, VectorFieldSpec};
    use std::sync::Arc;

    fn zero(shape: Shape, res: usize) -> GradedComplex {
        let b = Arc::new(assemble(&generate(shape, res).unwrap()).unwrap());
        GradedComplex::zero(b, Grading::Degree).unwrap()
    }

    #[test]
    fn top_degree_harmonic_is_dirichlet_on_ball() {
        // 𝓗ⁿ = 𝓗_Dⁿ exactly, so the coexact complement is empty, not round-off
        let c = zero(Shape::Ball, 1);
        let h = HarmonicSpaces::compute(&c, &Tolerances::default()).unwrap();
        let d = h.dims();
        assert_eq!((d.harmonic[3], d.dirichlet[3], d.neumann[3], d.ex_co[3]), (1, 1, 0, 0));
        for g in 0..4 {
            assert_eq!(d.harmonic[g], d.neumann[g] + d.dirichlet[g] + d.ex_co[g], "grade {g}");
        }
    }

    #[test]
    fn disk_and_annulus_dims_match_oracle() {
        for (shape, res) in [(Shape::Disk, 2), (Shape::Annulus, 8), (Shape::Square, 3)] {
            let c = zero(shape, res);
            let h = HarmonicSpaces::compute(&c, &Tolerances::default()).unwrap();
            let b = betti_oracle(c.base().complex());
            let d = h.dims();
            let n = 2;
            for k in 0..=n {
                assert_eq!(d.neumann[k], b.absolute[k], "{shape} N{k}");
                assert_eq!(d.dirichlet[k], b.absolute[n - k], "{shape} D{k}");
            }
        }
    }

    #[test]
    fn rotation_kills_cohomology() {
        let b = Arc::new(assemble(&generate(Shape::Interval, 6).unwrap()).unwrap());
        let c = GradedComplex::product(b, VectorFieldSpec::rotation(1.0)).unwrap();
        let h = HarmonicSpaces::compute(&c, &Tolerances::default()).unwrap();
        assert_eq!(h.dims().neumann, vec![0, 0]);
        assert_eq!(h.dims().dirichlet, vec![0, 0]);
    }

    #[test]
    fn harmonic_fields_are_annihilated() {
        let c = zero(Shape::Annulus, 8);
        let h = HarmonicSpaces::compute(&c, &Tolerances::default()).unwrap();
        let x = to_cochains(&c, 1, &h.grades[1].neumann);
        let dx = linalg::spmm(c.witten_d(1), &x);
        let del = c.witten_delta(1, Flavor::Neumann) * &x;
        assert!(dx.norm() < 1e-9 && del.norm() < 1e-9);
    }

    #[test]
    fn dn_solution_with_zero_data_is_zero() {
        let c = zero(Shape::Annulus, 8);
        let h = HarmonicSpaces::compute(&c, &Tolerances::default()).unwrap();
        let th = DMatrix::zeros(c.boundary_dim(1), 1);
        let w = solve_dn_bvp(&c, &h, 1, &th, &DMatrix::zeros(c.grades[1].dim, 0), &Tolerances::default()).unwrap();
        assert_eq!(w.norm(), 0.0);
    }

    #[test]
    fn constant_boundary_data_extends_to_constant() {
        let c = zero(Shape::Disk, 3);
        let h = HarmonicSpaces::compute(&c, &Tolerances::default()).unwrap();
        let th = DMatrix::from_element(c.boundary_dim(0), 1, 2.5);
        let w = solve_dn_bvp(&c, &h, 0, &th, &DMatrix::zeros(c.grades[0].dim, 0), &Tolerances::default()).unwrap();
        assert!(w.iter().all(|v| (v - 2.5).abs() < 1e-10));
    }

    #[test]
    fn source_in_dirichlet_fields_is_not_solvable() {
        let c = zero(Shape::Disk, 2);
        let h = HarmonicSpaces::compute(&c, &Tolerances::default()).unwrap();
        let kappa = to_cochains(&c, 2, &h.grades[2].dirichlet);
        let th = DMatrix::zeros(0, 0);
        let r = solve_dn_bvp(&c, &h, 2, &th, &kappa, &Tolerances::default());
        assert!(matches!(r, Err(Error::NotSolvable(_))));
    }
}
