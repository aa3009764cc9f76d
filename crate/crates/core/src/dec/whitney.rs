//! Whitney forms on a single affine simplex, in barycentric form.
//!
//! A term is `c · λ^e · dλ_S` with `e` a multi-index over the local vertices
//! and `S` a sorted set of local vertices (bit mask). Integrals use
//! `∫_T λ^e = |T| n! e! / (n + |e|)!`; inner products of `dλ_S, dλ_R` are
//! Gram determinants of barycentric gradients. Nothing here depends on the
//! embedding dimension, so the same code handles boundary surfaces in ℝ³.

use nalgebra::{DMatrix, Matrix3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Term {
    pub c: f64,
    pub exp: [u8; 4],
    pub dl: u8,
}

pub type Form = Vec<Term>;

const FACT: [f64; 11] = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0, 5040.0, 40320.0, 362880.0, 3628800.0];

fn fact(k: usize) -> f64 {
    FACT[k]
}

pub fn mask(ids: &[usize]) -> u8 {
    ids.iter().fold(0u8, |m, &i| m | (1 << i))
}

fn members(m: u8) -> Vec<usize> {
    (0..8).filter(|i| m & (1 << i) != 0).collect()
}

/// Whitney form of the local face with sorted vertex list `face`:
/// `k! Σ_i (−1)^i λ_{f_i} dλ_{f_0} ∧ … ∧ (omit f_i) ∧ … ∧ dλ_{f_k}`.
pub fn whitney(face: &[usize]) -> Form {
    let k = face.len() - 1;
    (0..=k)
        .map(|i| {
            let mut exp = [0u8; 4];
            exp[face[i]] = 1;
            let rest: Vec<usize> = face.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).collect();
            Term { c: fact(k) * if i % 2 == 0 { 1.0 } else { -1.0 }, exp, dl: mask(&rest) }
        })
        .collect()
}

/// Sign of the permutation sorting the concatenation of sorted sets `a` then `b`.
fn merge_sign(a: u8, b: u8) -> f64 {
    let mut inv = 0;
    for x in members(a) {
        inv += members(b).iter().filter(|&&y| y < x).count();
    }
    if inv % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn wedge(a: &[Term], b: &[Term]) -> Form {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for s in a {
        for t in b {
            if s.dl & t.dl != 0 {
                continue;
            }
            let mut exp = s.exp;
            for i in 0..4 {
                exp[i] += t.exp[i];
            }
            out.push(Term { c: s.c * t.c * merge_sign(s.dl, t.dl), exp, dl: s.dl | t.dl });
        }
    }
    out
}

pub fn scale(a: &[Term], s: f64) -> Form {
    a.iter().map(|t| Term { c: t.c * s, ..*t }).collect()
}

fn exp_factor(exp: &[u8; 4], n: usize) -> f64 {
    let tot: usize = exp.iter().map(|&e| e as usize).sum();
    exp.iter().map(|&e| fact(e as usize)).product::<f64>() / fact(n + tot)
}

/// `∫_T ω` for a top-degree form over the simplex oriented by its local
/// vertex order (metric-free).
pub fn integrate_top(form: &[Term], n: usize) -> f64 {
    let full = (1u16 << (n + 1)) - 1;
    form.iter()
        .map(|t| {
            debug_assert_eq!(t.dl.count_ones() as usize, n);
            // dλ over {0..n}∖{m} equals (−1)^m dλ_1∧…∧dλ_n
            let m = (full as u8 & !t.dl).trailing_zeros() as usize;
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            t.c * sign * exp_factor(&t.exp, n)
        })
        .sum()
}

/// Metric data of an affine simplex: volume and Gram matrix of barycentric gradients.
#[derive(Clone, Debug)]
pub struct Geometry {
    pub n: usize,
    pub vol: f64,
    pub gram: DMatrix<f64>,
}

impl Geometry {
    /// `None` if the simplex is degenerate.
    pub fn new(verts: &[&[f64]]) -> Option<Self> {
        let n = verts.len() - 1;
        let dim = verts[0].len();
        let e = DMatrix::from_fn(dim, n, |r, c| verts[c + 1][r] - verts[0][r]);
        let g = e.transpose() * &e;
        let det = if n == 0 { 1.0 } else { g.determinant() };
        let diam2 = (0..n).map(|c| g[(c, c)]).fold(0.0, f64::max);
        if n > 0 && !(det > 1e-20 * diam2.powi(n as i32)) {
            return None;
        }
        let vol = det.max(0.0).sqrt() / fact(n);
        let ginv = if n == 0 { DMatrix::zeros(0, 0) } else { g.try_inverse()? };
        // covectors of dλ_a in the coordinate basis: dλ_0 = −Σ dλ_i
        let c = DMatrix::from_fn(n, n + 1, |r, a| if a == 0 { -1.0 } else if a == r + 1 { 1.0 } else { 0.0 });
        let gram = c.transpose() * ginv * &c;
        Some(Self { n, vol, gram })
    }

    fn det_sub(&self, rows: &[usize], cols: &[usize]) -> f64 {
        match rows.len() {
            0 => 1.0,
            1 => self.gram[(rows[0], cols[0])],
            2 => {
                self.gram[(rows[0], cols[0])] * self.gram[(rows[1], cols[1])]
                    - self.gram[(rows[0], cols[1])] * self.gram[(rows[1], cols[0])]
            }
            3 => Matrix3::from_fn(|i, j| self.gram[(rows[i], cols[j])]).determinant(),
            _ => DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.gram[(rows[i], cols[j])]).determinant(),
        }
    }

    /// `∫_T ⟨a, b⟩ dvol` for forms of equal degree.
    pub fn inner(&self, a: &[Term], b: &[Term]) -> f64 {
        let mut s = 0.0;
        for x in a {
            let rx = members(x.dl);
            for y in b {
                let mut exp = x.exp;
                for i in 0..4 {
                    exp[i] += y.exp[i];
                }
                let g = self.det_sub(&rx, &members(y.dl));
                if g != 0.0 {
                    s += x.c * y.c * g * exp_factor(&exp, self.n);
                }
            }
        }
        s * self.vol * fact(self.n)
    }
}

/// Sorted local faces of dimension `k` of the standard `n`-simplex.
pub fn local_faces(n: usize, k: usize) -> Vec<Vec<usize>> {
    use itertools::Itertools;
    (0..=n).combinations(k + 1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri(p: [[f64; 2]; 3]) -> Geometry {
        Geometry::new(&[&p[0][..], &p[1][..], &p[2][..]]).unwrap()
    }

    #[test]
    fn hat_mass_on_interval() {
        let g = Geometry::new(&[&[0.0][..], &[0.5][..]]).unwrap();
        let w0 = whitney(&[0]);
        let w1 = whitney(&[1]);
        assert!((g.inner(&w0, &w0) - 0.5 / 3.0).abs() < 1e-15);
        assert!((g.inner(&w0, &w1) - 0.5 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn top_form_integrates_to_one() {
        for n in 1..=3 {
            let face: Vec<usize> = (0..=n).collect();
            assert!((integrate_top(&whitney(&face), n) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn edge_form_norm_on_reference_triangle() {
        // w01 = (1−y)dx + x dy, so ‖w01‖² = ∫(1−y)² + x² = 1/4 + 1/12
        let g = tri([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let w = whitney(&[0, 1]);
        assert!((g.inner(&w, &w) - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_simplex_detected() {
        assert!(Geometry::new(&[&[0.0, 0.0][..], &[1.0, 0.0][..], &[2.0, 0.0][..]]).is_none());
    }

    #[test]
    fn wedge_is_graded_commutative() {
        let a = whitney(&[0, 1]);
        let b = whitney(&[1, 2]);
        let ab = integrate_top(&wedge(&a, &b), 2);
        let ba = integrate_top(&wedge(&b, &a), 2);
        assert!((ab + ba).abs() < 1e-15);
    }
}
