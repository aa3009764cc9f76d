//! Oriented simplicial manifolds with boundary.
//!
//! Every k-simplex is stored as a sorted vertex tuple; cochain values are
//! taken with respect to that sorted orientation. Only top-dimensional
//! simplices carry an extra sign relating the sorted order to the manifold
//! orientation.

mod generate;
mod off;
mod oracle;

pub use generate::{generate, Shape};
pub use off::{load_off, parse_off, to_off_string, write_off, OffMesh};
pub use oracle::{betti_oracle, rational_rank, BettiTable};

use std::collections::{BTreeSet, HashMap, VecDeque};

use itertools::Itertools;
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct SimplicialComplex {
    dim: usize,
    coords: Vec<Vec<f64>>,
    simplices: Vec<Vec<Vec<usize>>>,
    lookup: Vec<HashMap<Vec<usize>, usize>>,
    orientation: Vec<i8>,
    boundary: Option<Box<Boundary>>,
}

/// The boundary `∂M` as a closed complex of dimension `n − 1`, with
/// orientation induced by the outward normal and index maps into the parent.
#[derive(Clone, Debug)]
pub struct Boundary {
    pub complex: SimplicialComplex,
    /// `parent[k][i]` = index in the parent of boundary k-simplex `i`.
    pub parent: Vec<Vec<usize>>,
}

impl SimplicialComplex {
    /// Build and validate a manifold from top-dimensional cells. The
    /// orientation of cell 0 as listed is kept and propagated breadth-first.
    pub fn new(coords: Vec<Vec<f64>>, cells: Vec<Vec<usize>>) -> Result<Self> {
        let dim = cells.first().map(|c| c.len().saturating_sub(1)).unwrap_or(0);
        if cells.is_empty() || !(1..=3).contains(&dim) {
            return Err(Error::NotManifold(format!("need cells of dimension 1..=3, got {} cells", cells.len())));
        }
        Self::build(coords, cells, None, true)
    }

    fn build(coords: Vec<Vec<f64>>, cells: Vec<Vec<usize>>, signs: Option<Vec<i8>>, with_boundary: bool) -> Result<Self> {
        let dim = cells.first().map(|c| c.len() - 1).unwrap_or(0);
        let nv = coords.len();
        if let Some(bad) = coords.iter().position(|c| c.iter().any(|x| !x.is_finite())) {
            return Err(Error::NotManifold(format!("vertex {bad} has non-finite coordinates")));
        }
        let mut used = vec![false; nv];
        let mut input_parity = Vec::with_capacity(cells.len());
        let mut tops = Vec::with_capacity(cells.len());
        let mut seen = HashMap::new();
        for (ci, cell) in cells.iter().enumerate() {
            if cell.len() != dim + 1 {
                return Err(Error::NotManifold(format!("cell {ci} has {} vertices, expected {}", cell.len(), dim + 1)));
            }
            if let Some(&v) = cell.iter().find(|&&v| v >= nv) {
                return Err(Error::NotManifold(format!("cell {ci} references missing vertex {v}")));
            }
            let (sorted, parity) = sort_with_parity(cell);
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::NotManifold(format!("cell {ci} repeats a vertex")));
            }
            if seen.insert(sorted.clone(), ci).is_some() {
                return Err(Error::NotManifold(format!("cell {ci} duplicates an earlier cell")));
            }
            for &v in &sorted {
                used[v] = true;
            }
            input_parity.push(parity);
            tops.push(sorted);
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::NotManifold(format!("vertex {v} belongs to no cell")));
        }

        let mut simplices: Vec<Vec<Vec<usize>>> = Vec::with_capacity(dim + 1);
        for k in 0..dim {
            let set: BTreeSet<Vec<usize>> = tops.iter().flat_map(|t| t.iter().copied().combinations(k + 1)).collect();
            simplices.push(set.into_iter().collect());
        }
        simplices.push(tops);
        let lookup: Vec<HashMap<Vec<usize>, usize>> = simplices
            .iter()
            .map(|s| s.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect())
            .collect();

        let orientation = match signs {
            Some(s) => s,
            None => orient(dim, &simplices, &lookup, input_parity[0])?,
        };
        let mut cx = Self { dim, coords, simplices, lookup, orientation, boundary: None };
        if with_boundary {
            cx.boundary = Some(Box::new(cx.extract_boundary()?));
        }
        Ok(cx)
    }

    fn extract_boundary(&self) -> Result<Boundary> {
        let n = self.dim;
        let cofaces = self.facet_cofaces();
        let mut facets = Vec::new();
        let mut signs = Vec::new();
        for (f, cf) in cofaces.iter().enumerate() {
            if cf.len() == 1 {
                let (c, i) = cf[0];
                facets.push(self.simplices[n - 1][f].clone());
                signs.push(self.orientation[c] * alt(i));
            }
        }
        let verts: Vec<usize> = facets.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
        let mut remap = vec![usize::MAX; self.coords.len()];
        for (new, &old) in verts.iter().enumerate() {
            remap[old] = new;
        }
        let coords = verts.iter().map(|&v| self.coords[v].clone()).collect();
        let cells: Vec<Vec<usize>> = facets.iter().map(|f| f.iter().map(|&v| remap[v]).collect()).collect();
        let complex = if cells.is_empty() {
            Self::empty(n - 1, self.embed_dim())
        } else {
            Self::build(coords, cells, Some(signs), false)?
        };
        // closedness: every codimension-one face of ∂M bounds exactly two facets
        if complex.dim >= 1 && complex.num(complex.dim) > 0 {
            if let Some((f, cf)) = complex.facet_cofaces().iter().enumerate().find(|(_, cf)| cf.len() != 2) {
                return Err(Error::NotManifold(format!(
                    "boundary is not closed: boundary face {:?} lies in {} boundary facets",
                    complex.simplices[complex.dim - 1][f],
                    cf.len()
                )));
            }
        }
        let parent = (0..complex.simplices.len())
            .map(|k| {
                complex.simplices[k].iter().map(|s| self.lookup[k][&s.iter().map(|&v| verts[v]).collect::<Vec<_>>()]).collect()
            })
            .collect();
        Ok(Boundary { complex, parent })
    }

    fn empty(dim: usize, embed: usize) -> Self {
        let _ = embed;
        Self {
            dim,
            coords: vec![],
            simplices: vec![vec![]; dim + 1],
            lookup: vec![HashMap::new(); dim + 1],
            orientation: vec![],
            boundary: None,
        }
    }

    /// For each (n−1)-simplex, the list of (cell, local index of the opposite vertex).
    fn facet_cofaces(&self) -> Vec<Vec<(usize, usize)>> {
        let n = self.dim;
        let mut out = vec![Vec::new(); self.num(n - 1)];
        for (c, cell) in self.simplices[n].iter().enumerate() {
            for i in 0..=n {
                let f = face_without(cell, i);
                out[self.lookup[n - 1][&f]].push((c, i));
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embed_dim(&self) -> usize {
        self.coords.first().map(|c| c.len()).unwrap_or(0)
    }

    pub fn coords(&self) -> &[Vec<f64>] {
        &self.coords
    }

    pub fn num(&self, k: usize) -> usize {
        self.simplices.get(k).map(|s| s.len()).unwrap_or(0)
    }

    pub fn counts(&self) -> Vec<usize> {
        (0..=self.dim).map(|k| self.num(k)).collect()
    }

    pub fn simplices(&self, k: usize) -> &[Vec<usize>] {
        &self.simplices[k]
    }

    pub fn index_of(&self, k: usize, verts: &[usize]) -> Option<usize> {
        self.lookup.get(k)?.get(verts).copied()
    }

    /// Orientation sign of simplex `i` of degree `k` relative to its sorted
    /// vertex order (always +1 below the top degree).
    pub fn orientation_sign(&self, k: usize, i: usize) -> i8 {
        if k == self.dim {
            self.orientation[i]
        } else {
            1
        }
    }

    pub fn top_orientation(&self) -> &[i8] {
        &self.orientation
    }

    pub fn boundary(&self) -> Option<&Boundary> {
        self.boundary.as_deref()
    }

    pub fn has_boundary(&self) -> bool {
        self.boundary.as_ref().map(|b| b.complex.num(b.complex.dim) > 0).unwrap_or(false)
    }

    pub fn euler_characteristic(&self) -> i64 {
        (0..=self.dim).map(|k| if k % 2 == 0 { self.num(k) as i64 } else { -(self.num(k) as i64) }).sum()
    }

    /// `on_boundary(k)[i]` — whether k-simplex `i` lies in ∂M.
    pub fn on_boundary(&self, k: usize) -> Vec<bool> {
        let mut flags = vec![false; self.num(k)];
        if let Some(b) = self.boundary() {
            if let Some(p) = b.parent.get(k) {
                for &i in p {
                    flags[i] = true;
                }
            }
        }
        flags
    }

    /// Indices of k-simplices not contained in ∂M (the Dirichlet degrees of freedom).
    pub fn interior(&self, k: usize) -> Vec<usize> {
        self.on_boundary(k).iter().enumerate().filter(|(_, &b)| !b).map(|(i, _)| i).collect()
    }

    /// Integer coboundary `d_k : C^k → C^{k+1}`, `(dc)(τ) = Σ_i (−1)^i c(τ∖τ_i)`.
    pub fn coboundary(&self, k: usize) -> CsrMatrix<i32> {
        let mut coo = CooMatrix::new(self.num(k + 1), self.num(k));
        if k < self.dim {
            for (r, s) in self.simplices[k + 1].iter().enumerate() {
                for i in 0..=k + 1 {
                    coo.push(r, self.lookup[k][&face_without(s, i)], alt(i) as i32);
                }
            }
        }
        CsrMatrix::from(&coo)
    }
}

fn alt(i: usize) -> i8 {
    if i % 2 == 0 {
        1
    } else {
        -1
    }
}

pub(crate) fn face_without(s: &[usize], i: usize) -> Vec<usize> {
    s.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).collect()
}

/// Sort a tuple, returning the sign of the sorting permutation.
pub(crate) fn sort_with_parity(v: &[usize]) -> (Vec<usize>, i8) {
    let mut s = v.to_vec();
    let mut sign = 1i8;
    for i in 0..s.len() {
        for j in 0..s.len() - 1 - i {
            if s[j] > s[j + 1] {
                s.swap(j, j + 1);
                sign = -sign;
            }
        }
    }
    (s, sign)
}

/// Breadth-first orientation propagation across interior facets.
fn orient(dim: usize, simplices: &[Vec<Vec<usize>>], lookup: &[HashMap<Vec<usize>, usize>], seed: i8) -> Result<Vec<i8>> {
    let cells = &simplices[dim];
    let mut cofaces: Vec<Vec<(usize, usize)>> = vec![Vec::new(); simplices[dim - 1].len()];
    for (c, cell) in cells.iter().enumerate() {
        for i in 0..=dim {
            cofaces[lookup[dim - 1][&face_without(cell, i)]].push((c, i));
        }
    }
    if let Some(cf) = cofaces.iter().position(|cf| cf.len() > 2) {
        return Err(Error::NotManifold(format!(
            "face {:?} is shared by {} cells",
            simplices[dim - 1][cf],
            cofaces[cf].len()
        )));
    }
    let mut adj: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); cells.len()];
    for cf in cofaces.iter().filter(|cf| cf.len() == 2) {
        let ((a, ia), (b, ib)) = (cf[0], cf[1]);
        adj[a].push((b, ia, ib));
        adj[b].push((a, ib, ia));
    }
    let mut sign = vec![0i8; cells.len()];
    for start in 0..cells.len() {
        if sign[start] != 0 {
            continue;
        }
        sign[start] = if start == 0 { seed } else { 1 };
        let mut queue = VecDeque::from([start]);
        while let Some(c) = queue.pop_front() {
            for &(nb, ic, inb) in &adj[c] {
                // induced orientations on the shared face must cancel
                let want = -sign[c] * alt(ic) * alt(inb);
                if sign[nb] == 0 {
                    sign[nb] = want;
                    queue.push_back(nb);
                } else if sign[nb] != want {
                    return Err(Error::NotOrientable);
                }
            }
        }
    }
    Ok(sign)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> SimplicialComplex {
        SimplicialComplex::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]], vec![vec![0, 1, 2]]).unwrap()
    }

    #[test]
    fn single_triangle_has_three_boundary_edges() {
        let t = triangle();
        assert_eq!(t.dim(), 2);
        let b = t.boundary().unwrap();
        assert_eq!(b.complex.num(1), 3);
        assert_eq!(b.complex.num(0), 3);
        assert!(t.interior(1).is_empty());
    }

    #[test]
    fn boundary_orientation_is_induced() {
        let t = triangle();
        let b = t.boundary().unwrap();
        // ∂[0,1,2] = [1,2] − [0,2] + [0,1]
        let s: Vec<(Vec<usize>, i8)> =
            (0..3).map(|i| (b.complex.simplices(1)[i].clone(), b.complex.orientation_sign(1, i))).collect();
        assert!(s.contains(&(vec![0, 1], 1)));
        assert!(s.contains(&(vec![0, 2], -1)));
        assert!(s.contains(&(vec![1, 2], 1)));
    }

    #[test]
    fn input_orientation_of_first_cell_is_kept() {
        let t = SimplicialComplex::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]], vec![vec![1, 0, 2]]).unwrap();
        assert_eq!(t.top_orientation(), &[-1]);
    }

    #[test]
    fn three_cells_on_one_edge_is_not_a_manifold() {
        let c = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0], vec![1.0, 1.0]];
        let e = SimplicialComplex::new(c, vec![vec![0, 1, 2], vec![0, 1, 3], vec![0, 1, 4]]).unwrap_err();
        assert!(matches!(e, Error::NotManifold(_)));
    }

    #[test]
    fn pinched_vertex_is_rejected() {
        let c = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]];
        let e = SimplicialComplex::new(c, vec![vec![0, 1, 2], vec![0, 3, 4]]).unwrap_err();
        assert!(matches!(e, Error::NotManifold(_)));
    }

    #[test]
    fn coboundary_squares_to_zero() {
        let t = triangle();
        let p = &t.coboundary(1) * &t.coboundary(0);
        assert!(p.values().iter().all(|&v| v == 0));
    }

    #[test]
    fn parity_of_sort() {
        assert_eq!(sort_with_parity(&[2, 0, 1]), (vec![0, 1, 2], 1));
        assert_eq!(sort_with_parity(&[1, 0, 2]), (vec![0, 1, 2], -1));
    }
}
