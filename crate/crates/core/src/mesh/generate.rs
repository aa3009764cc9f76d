//! Deterministic mesh generators.
//!
//! | shape         | minimum | construction                                              |
//! |---------------|---------|-----------------------------------------------------------|
//! | `interval`    | 1       | `r` segments on [0,1]                                     |
//! | `square`      | 1       | `r × r` grid on [0,1]², two triangles per cell            |
//! | `disk`        | 1       | centre + `r` rings of `max(8, 4r)` vertices, unit radius   |
//! | `annulus`     | 3       | `r` angular segments × `max(1, r/4)` layers, radii 1..2   |
//! | `ball`        | 1       | `r³` cubes on [0,1]³, Kuhn split into 6 tetrahedra each    |
//! | `solid_torus` | 3       | `q × q` section (`q = max(1, r/3)`) × `r` segments, Kuhn  |

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use super::SimplicialComplex;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Interval,
    Disk,
    Annulus,
    Square,
    SolidTorus,
    Ball,
}

impl Shape {
    pub const ALL: [Shape; 6] = [Shape::Interval, Shape::Disk, Shape::Annulus, Shape::Square, Shape::SolidTorus, Shape::Ball];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Interval => "interval",
            Shape::Disk => "disk",
            Shape::Annulus => "annulus",
            Shape::Square => "square",
            Shape::SolidTorus => "solid_torus",
            Shape::Ball => "ball",
        }
    }

    pub fn min_resolution(self) -> usize {
        match self {
            Shape::Annulus | Shape::SolidTorus => 3,
            _ => 1,
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Shape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Shape::ALL
            .into_iter()
            .find(|sh| sh.name() == s || (s == "solid-torus" && *sh == Shape::SolidTorus))
            .ok_or_else(|| Error::Config(format!("unknown shape `{s}`")))
    }
}

pub fn generate(shape: Shape, res: usize) -> Result<SimplicialComplex> {
    if res < shape.min_resolution() {
        return Err(Error::ResolutionTooSmall { shape: shape.name(), got: res, min: shape.min_resolution() });
    }
    let (coords, cells) = match shape {
        Shape::Interval => interval(res),
        Shape::Square => square(res),
        Shape::Disk => disk(res),
        Shape::Annulus => annulus(res),
        Shape::Ball => ball(res),
        Shape::SolidTorus => solid_torus(res),
    };
    SimplicialComplex::new(coords, cells)
}

type Raw = (Vec<Vec<f64>>, Vec<Vec<usize>>);

fn interval(r: usize) -> Raw {
    let coords = (0..=r).map(|i| vec![i as f64 / r as f64]).collect();
    let cells = (0..r).map(|i| vec![i, i + 1]).collect();
    (coords, cells)
}

fn square(r: usize) -> Raw {
    let id = |i: usize, j: usize| i * (r + 1) + j;
    let coords = (0..=r).cartesian_product(0..=r).map(|(i, j)| vec![j as f64 / r as f64, i as f64 / r as f64]).collect();
    let mut cells = Vec::with_capacity(2 * r * r);
    for (i, j) in (0..r).cartesian_product(0..r) {
        cells.push(vec![id(i, j), id(i, j + 1), id(i + 1, j + 1)]);
        cells.push(vec![id(i, j), id(i + 1, j + 1), id(i + 1, j)]);
    }
    (coords, cells)
}

fn disk(r: usize) -> Raw {
    let m = (4 * r).max(8);
    let mut coords = vec![vec![0.0, 0.0]];
    for ring in 1..=r {
        let rad = ring as f64 / r as f64;
        for j in 0..m {
            let t = TAU * j as f64 / m as f64;
            coords.push(vec![rad * t.cos(), rad * t.sin()]);
        }
    }
    let v = |ring: usize, j: usize| 1 + (ring - 1) * m + j % m;
    let mut cells = Vec::new();
    for j in 0..m {
        cells.push(vec![0, v(1, j), v(1, j + 1)]);
    }
    for ring in 1..r {
        for j in 0..m {
            cells.push(vec![v(ring, j), v(ring + 1, j), v(ring + 1, j + 1)]);
            cells.push(vec![v(ring, j), v(ring + 1, j + 1), v(ring, j + 1)]);
        }
    }
    (coords, cells)
}

fn annulus(r: usize) -> Raw {
    let m = r;
    let layers = (r / 4).max(1);
    let mut coords = Vec::new();
    for l in 0..=layers {
        let rad = 1.0 + l as f64 / layers as f64;
        for j in 0..m {
            let t = TAU * j as f64 / m as f64;
            coords.push(vec![rad * t.cos(), rad * t.sin()]);
        }
    }
    let v = |l: usize, j: usize| l * m + j % m;
    let mut cells = Vec::with_capacity(2 * m * layers);
    for l in 0..layers {
        for j in 0..m {
            cells.push(vec![v(l, j), v(l + 1, j), v(l + 1, j + 1)]);
            cells.push(vec![v(l, j), v(l + 1, j + 1), v(l, j + 1)]);
        }
    }
    (coords, cells)
}

/// Kuhn subdivision of the unit cube at `base`: one tetrahedron per axis permutation.
fn kuhn(base: [usize; 3]) -> impl Iterator<Item = [[usize; 3]; 4]> {
    [0usize, 1, 2].into_iter().permutations(3).map(move |p| {
        let mut v = base;
        let mut out = [v; 4];
        for (s, &ax) in p.iter().enumerate() {
            v[ax] += 1;
            out[s + 1] = v;
        }
        out
    })
}

fn ball(r: usize) -> Raw {
    let id = |p: [usize; 3]| (p[0] * (r + 1) + p[1]) * (r + 1) + p[2];
    let h = 1.0 / r as f64;
    let mut coords = Vec::with_capacity((r + 1).pow(3));
    for i in 0..=r {
        for j in 0..=r {
            for k in 0..=r {
                coords.push(vec![i as f64 * h, j as f64 * h, k as f64 * h]);
            }
        }
    }
    let mut cells = Vec::with_capacity(6 * r * r * r);
    for i in 0..r {
        for j in 0..r {
            for k in 0..r {
                cells.extend(kuhn([i, j, k]).map(|t| t.iter().map(|&p| id(p)).collect()));
            }
        }
    }
    (coords, cells)
}

fn solid_torus(r: usize) -> Raw {
    let m = r;
    let q = (r / 3).max(1);
    let id = |p: [usize; 3]| ((p[2] % m) * (q + 1) + p[0]) * (q + 1) + p[1];
    let major = 2.0;
    let mut coords = vec![vec![]; m * (q + 1) * (q + 1)];
    for z in 0..m {
        let phi = TAU * z as f64 / m as f64;
        for x in 0..=q {
            for y in 0..=q {
                let a = x as f64 / q as f64 - 0.5;
                let b = y as f64 / q as f64 - 0.5;
                coords[id([x, y, z])] = vec![(major + a) * phi.cos(), (major + a) * phi.sin(), b];
            }
        }
    }
    let mut cells = Vec::with_capacity(6 * q * q * m);
    for z in 0..m {
        for x in 0..q {
            for y in 0..q {
                cells.extend(kuhn([x, y, z]).map(|t| t.iter().map(|&p| id(p)).collect()));
            }
        }
    }
    (coords, cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_4() {
        let k = generate(Shape::Interval, 4).unwrap();
        assert_eq!(k.num(0), 5);
        assert_eq!(k.boundary().unwrap().complex.num(0), 2);
    }

    #[test]
    fn annulus_triangle_count() {
        for r in [3, 8, 12, 16] {
            let k = generate(Shape::Annulus, r).unwrap();
            assert_eq!(k.num(2), 2 * r * (r / 4).max(1));
        }
    }

    #[test]
    fn solid_torus_sizes() {
        assert_eq!(generate(Shape::SolidTorus, 6).unwrap().num(3), 144);
        assert_eq!(generate(Shape::SolidTorus, 9).unwrap().num(3), 486);
    }

    #[test]
    fn too_small() {
        assert!(matches!(generate(Shape::Annulus, 2), Err(Error::ResolutionTooSmall { .. })));
        assert!(matches!(generate(Shape::Disk, 0), Err(Error::ResolutionTooSmall { .. })));
    }

    #[test]
    fn deterministic() {
        let a = generate(Shape::Disk, 3).unwrap();
        let b = generate(Shape::Disk, 3).unwrap();
        assert_eq!(a.simplices(2), b.simplices(2));
        assert_eq!(a.top_orientation(), b.top_orientation());
        assert_eq!(a.coords(), b.coords());
    }

    #[test]
    fn shape_names_round_trip() {
        for s in Shape::ALL {
            assert_eq!(s.name().parse::<Shape>().unwrap(), s);
        }
    }
}
