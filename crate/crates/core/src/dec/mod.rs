//! Whitney/Galerkin operators on a simplicial complex: incidence matrices,
//! mass matrices, wedge pairings, the Galerkin Hodge star, trace and
//! codifferentials.

pub mod whitney;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::linalg::{self, SpdFactor};
use crate::mesh::SimplicialComplex;
use crate::{exec, Error, Result};
use whitney::{local_faces, Form, Geometry};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flavor {
    Neumann,
    Dirichlet,
}

/// A cochain on `M` or `∂M`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cochain {
    pub degree: usize,
    pub values: DVector<f64>,
}

impl Cochain {
    pub fn new(degree: usize, values: DVector<f64>) -> Self {
        Self { degree, values }
    }
}

pub struct OperatorBundle {
    complex: Arc<SimplicialComplex>,
    geometry: Vec<Geometry>,
    /// `d[k] : C^k → C^{k+1}` with integer entries.
    pub d_int: Vec<CsrMatrix<i32>>,
    pub d: Vec<CsrMatrix<f64>>,
    pub mass: Vec<CsrMatrix<f64>>,
    factors: Vec<SpdFactor>,
    /// `wedge[k]_{ij} = ∫_M w_i^{(k)} ∧ w_j^{(n−k)}`.
    pub wedge: Vec<CsrMatrix<f64>>,
    /// `trace[k] : C^k(M) → C^k(∂M)`, 0/1 restriction (empty when `∂M = ∅`).
    pub trace: Vec<CsrMatrix<f64>>,
    pub boundary: Option<Arc<OperatorBundle>>,
}

impl std::fmt::Debug for OperatorBundle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorBundle").field("dim", &self.dim()).field("counts", &self.complex.counts()).finish()
    }
}

pub fn assemble(k: &SimplicialComplex) -> Result<OperatorBundle> {
    OperatorBundle::new(Arc::new(k.clone()))
}

impl OperatorBundle {
    pub fn new(complex: Arc<SimplicialComplex>) -> Result<Self> {
        let n = complex.dim();
        let cells = complex.simplices(n);
        let geometry = exec::map_range(cells.len(), |c| {
            let verts: Vec<&[f64]> = cells[c].iter().map(|&v| complex.coords()[v].as_slice()).collect();
            Geometry::new(&verts).ok_or(Error::DegenerateSimplex { degree: n, index: c })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

        let d_int: Vec<CsrMatrix<i32>> = (0..n).map(|k| complex.coboundary(k)).collect();
        let d = d_int.iter().map(to_f64).collect();
        let mass: Vec<CsrMatrix<f64>> = exec::map_range(n + 1, |k| assemble_mass(&complex, &geometry, k));
        let factors = exec::map_range(n + 1, |k| SpdFactor::new(&mass[k], &format!("mass[{k}]")))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let wedge = (0..=n).map(|k| assemble_wedge(&complex, k)).collect();

        let (trace, boundary) = match complex.boundary() {
            Some(b) if complex.has_boundary() => {
                let trace = (0..n)
                    .map(|k| {
                        let mut coo = CooMatrix::new(b.complex.num(k), complex.num(k));
                        for (i, &p) in b.parent[k].iter().enumerate() {
                            coo.push(i, p, 1.0);
                        }
                        CsrMatrix::from(&coo)
                    })
                    .collect();
                (trace, Some(Arc::new(OperatorBundle::new(Arc::new(b.complex.clone()))?)))
            }
            _ => (vec![], None),
        };
        Ok(Self { complex, geometry, d_int, d, mass, factors, wedge, trace, boundary })
    }

    pub fn dim(&self) -> usize {
        self.complex.dim()
    }

    pub fn complex(&self) -> &SimplicialComplex {
        &self.complex
    }

    pub fn num(&self, k: usize) -> usize {
        self.complex.num(k)
    }

    pub fn factor(&self, k: usize) -> &SpdFactor {
        &self.factors[k]
    }

    pub fn has_boundary(&self) -> bool {
        self.boundary.is_some()
    }

    /// `d[k]` as a float matrix, with an empty `0 × |C^n|` map at the top degree.
    pub fn d_or_zero(&self, k: usize) -> CsrMatrix<f64> {
        if k < self.dim() {
            self.d[k].clone()
        } else {
            CsrMatrix::zeros(0, self.num(k))
        }
    }

    pub fn inner(&self, k: usize, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        a.dot(&linalg::spmv(&self.mass[k], b))
    }

    /// `∫_M α ∧ β` for `deg α + deg β = n`.
    pub fn integrate_wedge(&self, k: usize, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        a.dot(&linalg::spmv(&self.wedge[k], b))
    }

    /// Galerkin Hodge star `C^k → C^{n−k}`: `mass[n−k]·⋆α = W[k]ᵀα`.
    pub fn star(&self, k: usize, a: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        self.factors[n - k].solve_vec(&linalg::spmv_t(&self.wedge[k], a))
    }

    pub fn star_matrix(&self, k: usize) -> DMatrix<f64> {
        let n = self.dim();
        let wt = linalg::to_dense(&self.wedge[k]).transpose();
        self.factors[n - k].solve(&wt)
    }

    /// `i*(⋆ω)` — trace of the Galerkin star, an `(n−k)`-cochain on `∂M`.
    pub fn trace_star(&self, k: usize, w: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.dim();
        if k > n {
            return Err(Error::DegreeOutOfRange { degree: k, max: n });
        }
        if n - k >= n || self.trace.is_empty() {
            return Ok(DVector::zeros(self.boundary.as_ref().map(|b| b.num(n - k)).unwrap_or(0)));
        }
        Ok(linalg::spmv(&self.trace[n - k], &self.star(k, w)))
    }

    /// Codifferential `C^k → C^{k−1}` as a dense matrix.
    ///
    /// Neumann: `mass[k−1]⁻¹ d[k−1]ᵀ mass[k]`, the full adjoint of `d`.
    /// Dirichlet: the same tested only against cochains with zero trace; the
    /// result is supported on interior (k−1)-simplices.
    pub fn codifferential(&self, k: usize, flavor: Flavor) -> Result<DMatrix<f64>> {
        let n = self.dim();
        if k == 0 || k > n {
            return Err(Error::DegreeOutOfRange { degree: k, max: n });
        }
        let rhs = linalg::spmm_t(&self.d[k - 1], &linalg::to_dense(&self.mass[k]));
        match flavor {
            Flavor::Neumann => Ok(self.factors[k - 1].solve(&rhs)),
            Flavor::Dirichlet => {
                let int = self.complex.interior(k - 1);
                let mdd = linalg::select(&self.mass[k - 1], &int, &int);
                let f = SpdFactor::new(&mdd, "interior mass")?;
                let sub = DMatrix::from_fn(int.len(), rhs.ncols(), |i, j| rhs[(int[i], j)]);
                let x = f.solve(&sub);
                let mut out = DMatrix::zeros(self.num(k - 1), rhs.ncols());
                for (i, &r) in int.iter().enumerate() {
                    out.row_mut(r).copy_from(&x.row(i));
                }
                Ok(out)
            }
        }
    }

    /// Galerkin wedge product: `mass[k+l]·(α∧β)_ρ = Σ α_σ β_τ ∫⟨w_σ∧w_τ, w_ρ⟩`.
    pub fn wedge_product(&self, a: &Cochain, b: &Cochain) -> Result<Cochain> {
        let n = self.dim();
        let (k, l) = (a.degree, b.degree);
        if k + l > n {
            return Err(Error::DegreeOverflow(k + l, n));
        }
        let rhs = self.wedge_rhs(a, b);
        Ok(Cochain::new(k + l, self.factors[k + l].solve_vec(&rhs)))
    }

    /// Right-hand side of the Galerkin wedge (exact per-element integrals).
    pub fn wedge_rhs(&self, a: &Cochain, b: &Cochain) -> DVector<f64> {
        let n = self.dim();
        let (k, l) = (a.degree, b.degree);
        let cx = &self.complex;
        let fk = local_faces(n, k);
        let fl = local_faces(n, l);
        let fr = local_faces(n, k + l);
        let wk: Vec<Form> = fk.iter().map(|f| whitney::whitney(f)).collect();
        let wl: Vec<Form> = fl.iter().map(|f| whitney::whitney(f)).collect();
        let wr: Vec<Form> = fr.iter().map(|f| whitney::whitney(f)).collect();
        let cells = cx.simplices(n);
        let parts = exec::map_range(cells.len(), |c| {
            let cell = &cells[c];
            let glob = |k: usize, f: &[usize]| cx.index_of(k, &f.iter().map(|&i| cell[i]).collect::<Vec<_>>()).unwrap();
            let mut fa: Form = Vec::new();
            for (f, w) in fk.iter().zip(&wk) {
                let v = a.values[glob(k, f)];
                if v != 0.0 {
                    fa.extend(whitney::scale(w, v));
                }
            }
            let mut fb: Form = Vec::new();
            for (f, w) in fl.iter().zip(&wl) {
                let v = b.values[glob(l, f)];
                if v != 0.0 {
                    fb.extend(whitney::scale(w, v));
                }
            }
            let prod = whitney::wedge(&fa, &fb);
            fr.iter().zip(&wr).map(|(f, w)| (glob(k + l, f), self.geometry[c].inner(&prod, w))).collect::<Vec<_>>()
        });
        let mut rhs = DVector::zeros(cx.num(k + l));
        for part in parts {
            for (i, v) in part {
                rhs[i] += v;
            }
        }
        rhs
    }

    /// Triple tensor `∫_M ⟨w_σ ∧ w_τ, w_ρ⟩` as `(σ, τ, ρ, value)` entries.
    pub fn wedge3(&self, k: usize, l: usize) -> Result<Vec<(usize, usize, usize, f64)>> {
        let n = self.dim();
        if k + l > n {
            return Err(Error::DegreeOverflow(k + l, n));
        }
        let cx = &self.complex;
        let (fk, fl, fr) = (local_faces(n, k), local_faces(n, l), local_faces(n, k + l));
        let mut acc = std::collections::BTreeMap::new();
        for (c, cell) in cx.simplices(n).iter().enumerate() {
            let glob = |k: usize, f: &[usize]| cx.index_of(k, &f.iter().map(|&i| cell[i]).collect::<Vec<_>>()).unwrap();
            for s in &fk {
                for t in &fl {
                    let p = whitney::wedge(&whitney::whitney(s), &whitney::whitney(t));
                    if p.is_empty() {
                        continue;
                    }
                    for r in &fr {
                        let v = self.geometry[c].inner(&p, &whitney::whitney(r));
                        if v != 0.0 {
                            *acc.entry((glob(k, s), glob(l, t), glob(k + l, r))).or_insert(0.0) += v;
                        }
                    }
                }
            }
        }
        Ok(acc.into_iter().map(|((a, b, c), v)| (a, b, c, v)).collect())
    }

    /// Interpolate a top-degree density `f ≡ c` as the cochain `c·∫_T vol`
    /// in the sorted orientation of each cell.
    pub fn volume_form(&self) -> DVector<f64> {
        let n = self.dim();
        DVector::from_iterator(self.num(n), (0..self.num(n)).map(|c| self.geometry[c].vol * self.complex.orientation_sign(n, c) as f64))
    }

    /// `∫_M ω` for an n-cochain.
    pub fn integrate_top(&self, w: &DVector<f64>) -> f64 {
        let n = self.dim();
        (0..self.num(n)).map(|c| w[c] * self.complex.orientation_sign(n, c) as f64).sum()
    }

    pub fn cell_volumes(&self) -> Vec<f64> {
        self.geometry.iter().map(|g| g.vol).collect()
    }

    /// Largest edge length (mesh size `h`).
    pub fn mesh_size(&self) -> f64 {
        let cx = &self.complex;
        if cx.dim() == 0 {
            return 0.0;
        }
        cx.simplices(1)
            .iter()
            .map(|e| {
                let (a, b) = (&cx.coords()[e[0]], &cx.coords()[e[1]]);
                a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    }
}

fn to_f64(a: &CsrMatrix<i32>) -> CsrMatrix<f64> {
    let mut coo = CooMatrix::new(a.nrows(), a.ncols());
    for (i, j, &v) in a.triplet_iter() {
        coo.push(i, j, v as f64);
    }
    CsrMatrix::from(&coo)
}

fn assemble_mass(cx: &SimplicialComplex, geo: &[Geometry], k: usize) -> CsrMatrix<f64> {
    let n = cx.dim();
    let faces = local_faces(n, k);
    let forms: Vec<Form> = faces.iter().map(|f| whitney::whitney(f)).collect();
    let cells = cx.simplices(n);
    let local = exec::map_range(cells.len(), |c| {
        let ids: Vec<usize> = faces.iter().map(|f| cx.index_of(k, &f.iter().map(|&i| cells[c][i]).collect::<Vec<_>>()).unwrap()).collect();
        let mut out = Vec::with_capacity(ids.len() * ids.len());
        for (a, fa) in forms.iter().enumerate() {
            for (b, fb) in forms.iter().enumerate().skip(a) {
                let v = geo[c].inner(fa, fb);
                out.push((ids[a], ids[b], v));
                if a != b {
                    out.push((ids[b], ids[a], v));
                }
            }
        }
        out
    });
    let mut coo = CooMatrix::new(cx.num(k), cx.num(k));
    for part in local {
        for (i, j, v) in part {
            coo.push(i, j, v);
        }
    }
    // duplicates are summed in no particular order; restore exact symmetry
    let m = CsrMatrix::from(&coo);
    (&m + &m.transpose()) * 0.5
}

fn assemble_wedge(cx: &SimplicialComplex, k: usize) -> CsrMatrix<f64> {
    let n = cx.dim();
    let fk = local_faces(n, k);
    let fl = local_faces(n, n - k);
    let mut coo = CooMatrix::new(cx.num(k), cx.num(n - k));
    for (c, cell) in cx.simplices(n).iter().enumerate() {
        let s = cx.orientation_sign(n, c) as f64;
        for a in &fk {
            let wa = whitney::whitney(a);
            let ia = cx.index_of(k, &a.iter().map(|&i| cell[i]).collect::<Vec<_>>()).unwrap();
            for b in &fl {
                let v = whitney::integrate_top(&whitney::wedge(&wa, &whitney::whitney(b)), n);
                if v != 0.0 {
                    let ib = cx.index_of(n - k, &b.iter().map(|&i| cell[i]).collect::<Vec<_>>()).unwrap();
                    coo.push(ia, ib, s * v);
                }
            }
        }
    }
    CsrMatrix::from(&coo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate, Shape};

    #[test]
    fn interval_mass_rows_sum_to_length() {
        let b = assemble(&generate(Shape::Interval, 5).unwrap()).unwrap();
        let total: f64 = b.mass[0].values().iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn trace_commutes_with_d() {
        let b = assemble(&generate(Shape::Disk, 2).unwrap()).unwrap();
        let bd = b.boundary.as_ref().unwrap();
        let lhs = &b.trace[1] * &b.d[0];
        let rhs = &bd.d[0] * &b.trace[0];
        assert_eq!(linalg::to_dense(&lhs), linalg::to_dense(&rhs));
    }

    #[test]
    fn star_of_area_form_is_one() {
        let b = assemble(&generate(Shape::Disk, 3).unwrap()).unwrap();
        let one = b.star(2, &b.volume_form());
        assert!(one.iter().all(|x| (x - 1.0).abs() < 1e-12));
        let ts = b.trace_star(2, &b.volume_form()).unwrap();
        assert!(ts.iter().all(|x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn closed_complex_flavors_coincide() {
        // boundary of a tetrahedron: a closed surface
        let coords = vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let cells = vec![vec![0, 2, 1], vec![0, 1, 3], vec![0, 3, 2], vec![1, 2, 3]];
        let k = SimplicialComplex::new(coords, cells).unwrap();
        assert!(!k.has_boundary());
        let b = assemble(&k).unwrap();
        for deg in 1..=2 {
            let n = b.codifferential(deg, Flavor::Neumann).unwrap();
            let d = b.codifferential(deg, Flavor::Dirichlet).unwrap();
            assert!((n - d).norm() < 1e-13);
        }
    }

    #[test]
    fn wedge3_matches_wedge_rhs() {
        let b = assemble(&generate(Shape::Square, 2).unwrap()).unwrap();
        let t = b.wedge3(1, 1).unwrap();
        let a = Cochain::new(1, DVector::from_fn(b.num(1), |i, _| (i as f64 * 0.37).sin()));
        let c = Cochain::new(1, DVector::from_fn(b.num(1), |i, _| (i as f64 * 0.91).cos()));
        let mut rhs = DVector::zeros(b.num(2));
        for (i, j, r, v) in t {
            rhs[r] += a.values[i] * c.values[j] * v;
        }
        assert!((rhs - b.wedge_rhs(&a, &c)).norm() < 1e-13);
    }
}
