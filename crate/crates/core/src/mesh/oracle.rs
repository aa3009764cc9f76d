//! Exact Betti numbers via rational Gaussian elimination on the integer
//! incidence matrices. No floating point is involved; elimination runs over
//! `Ratio<i64>` with checked arithmetic and restarts over `BigRational` if
//! anything would overflow.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{CheckedDiv, CheckedMul, CheckedSub, One, Zero};
use serde::{Deserialize, Serialize};

use super::SimplicialComplex;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BettiTable {
    pub absolute: Vec<usize>,
    pub boundary: Vec<usize>,
    pub relative: Vec<usize>,
}

impl BettiTable {
    /// `β_k(M) = β_{n−k}(M, ∂M)`.
    pub fn lefschetz_dual(&self) -> bool {
        let n = self.absolute.len() - 1;
        (0..=n).all(|k| self.absolute[k] == self.relative[n - k])
    }
}

pub fn betti_oracle(k: &SimplicialComplex) -> BettiTable {
    let n = k.dim();
    let absolute = betti(&(0..=n).map(|j| k.num(j)).collect::<Vec<_>>(), |j| incidence(k, j, None));
    let boundary = match k.boundary() {
        Some(b) if b.complex.num(b.complex.dim()) > 0 => {
            let c = &b.complex;
            betti(&(0..=c.dim()).map(|j| c.num(j)).collect::<Vec<_>>(), |j| incidence(c, j, None))
        }
        _ => vec![0; n],
    };
    let interior: Vec<Vec<usize>> = (0..=n).map(|j| k.interior(j)).collect();
    let relative = betti(&interior.iter().map(Vec::len).collect::<Vec<_>>(), |j| incidence(k, j, Some(&interior)));
    BettiTable { absolute, boundary, relative }
}

/// `β_k = dim C^k − rank d_k − rank d_{k−1}` for a cochain complex with the given sizes.
fn betti(sizes: &[usize], d: impl Fn(usize) -> (usize, usize, Vec<(usize, usize, i64)>)) -> Vec<usize> {
    let n = sizes.len() - 1;
    let ranks: Vec<usize> = (0..n)
        .map(|j| {
            let (r, c, e) = d(j);
            rational_rank(r, c, &e)
        })
        .collect();
    (0..=n)
        .map(|j| sizes[j] - if j < n { ranks[j] } else { 0 } - if j > 0 { ranks[j - 1] } else { 0 })
        .collect()
}

/// Entries of `d_j`, optionally restricted to the given simplex subsets.
fn incidence(k: &SimplicialComplex, j: usize, subset: Option<&Vec<Vec<usize>>>) -> (usize, usize, Vec<(usize, usize, i64)>) {
    let d = k.coboundary(j);
    match subset {
        None => (d.nrows(), d.ncols(), d.triplet_iter().map(|(r, c, &v)| (r, c, v as i64)).collect()),
        Some(sub) => {
            let rmap: HashMap<usize, usize> = sub[j + 1].iter().enumerate().map(|(a, &b)| (b, a)).collect();
            let cmap: HashMap<usize, usize> = sub[j].iter().enumerate().map(|(a, &b)| (b, a)).collect();
            let e = d
                .triplet_iter()
                .filter_map(|(r, c, &v)| Some((*rmap.get(&r)?, *cmap.get(&c)?, v as i64)))
                .collect();
            (sub[j + 1].len(), sub[j].len(), e)
        }
    }
}

/// Exact rank over ℚ of an integer matrix given as `(row, col, value)` triplets.
pub fn rational_rank(rows: usize, cols: usize, entries: &[(usize, usize, i64)]) -> usize {
    let _ = cols;
    let mut by_row: Vec<Vec<(usize, i64)>> = vec![Vec::new(); rows];
    for &(r, c, v) in entries {
        if v != 0 {
            by_row[r].push((c, v));
        }
    }
    for r in &mut by_row {
        r.sort_unstable_by_key(|e| e.0);
        // merge duplicates
        let mut merged: Vec<(usize, i64)> = Vec::with_capacity(r.len());
        for &(c, v) in r.iter() {
            match merged.last_mut() {
                Some(last) if last.0 == c => last.1 += v,
                _ => merged.push((c, v)),
            }
        }
        merged.retain(|e| e.1 != 0);
        *r = merged;
    }
    match eliminate::<Ratio<i64>>(&by_row, |v| Ratio::from_integer(v)) {
        Some(r) => r,
        None => eliminate::<BigRational>(&by_row, |v| BigRational::from_integer(BigInt::from(v)))
            .expect("big rational elimination cannot overflow"),
    }
}

trait Exact: Clone + Zero + One + PartialEq + CheckedMul + CheckedSub + CheckedDiv {}
impl<T: Clone + Zero + One + PartialEq + CheckedMul + CheckedSub + CheckedDiv> Exact for T {}

type SparseRow<F> = Vec<(usize, F)>;

/// Incremental row echelon form keyed by leading column. `None` on overflow.
fn eliminate<F: Exact>(rows: &[Vec<(usize, i64)>], lift: impl Fn(i64) -> F) -> Option<usize> {
    let mut pivots: HashMap<usize, SparseRow<F>> = HashMap::new();
    for row in rows {
        let mut r: SparseRow<F> = row.iter().map(|&(c, v)| (c, lift(v))).collect();
        while let Some((c, v)) = r.first().cloned() {
            match pivots.get(&c) {
                Some(p) => r = axpy(&r, &v, p)?,
                None => {
                    let inv = F::one().checked_div(&v)?;
                    let normed = r.iter().map(|(c, x)| Some((*c, x.checked_mul(&inv)?))).collect::<Option<Vec<_>>>()?;
                    pivots.insert(c, normed);
                    break;
                }
            }
        }
    }
    Some(pivots.len())
}

/// `r − a·p` for sorted sparse rows.
fn axpy<F: Exact>(r: &SparseRow<F>, a: &F, p: &SparseRow<F>) -> Option<SparseRow<F>> {
    let mut out = Vec::with_capacity(r.len() + p.len());
    let (mut i, mut j) = (0, 0);
    while i < r.len() || j < p.len() {
        let ci = r.get(i).map(|e| e.0).unwrap_or(usize::MAX);
        let cj = p.get(j).map(|e| e.0).unwrap_or(usize::MAX);
        if ci < cj {
            out.push(r[i].clone());
            i += 1;
        } else {
            let prod = a.checked_mul(&p[j].1)?;
            let val = if ci == cj {
                let v = r[i].1.checked_sub(&prod)?;
                i += 1;
                v
            } else {
                F::zero().checked_sub(&prod)?
            };
            j += 1;
            if !val.is_zero() {
                out.push((cj, val));
            }
        }
    }
    Some(out)
}
