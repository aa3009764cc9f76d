//! ASCII OFF reader/writer. Cell records may be edges, triangles or
//! tetrahedra but must all have the same arity.

use std::fmt::Write as _;
use std::path::Path;

use super::SimplicialComplex;
use crate::{Error, Result};

/// Raw contents of an OFF file before validation.
#[derive(Clone, Debug, PartialEq)]
pub struct OffMesh {
    pub vertices: Vec<Vec<f64>>,
    pub cells: Vec<Vec<usize>>,
}

pub fn load_off(path: impl AsRef<Path>) -> Result<SimplicialComplex> {
    let text = std::fs::read_to_string(path)?;
    let raw = parse_off(&text)?;
    SimplicialComplex::new(raw.vertices, raw.cells)
}

pub fn parse_off(text: &str) -> Result<OffMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let err = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };

    let (ln, header) = lines.next().ok_or_else(|| err(0, "empty file"))?;
    let mut header_tokens = header.split_whitespace();
    if header_tokens.next() != Some("OFF") {
        return Err(err(ln, "missing OFF header"));
    }
    // counts may follow the keyword on the same line
    let rest: Vec<&str> = header_tokens.collect();
    let (ln, counts) = if rest.is_empty() {
        let (l, c) = lines.next().ok_or_else(|| err(ln, "missing counts"))?;
        (l, c.split_whitespace().collect::<Vec<_>>())
    } else {
        (ln, rest)
    };
    let parse_count = |s: Option<&&str>| -> Result<usize> {
        s.ok_or_else(|| err(ln, "missing count"))?.parse().map_err(|_| err(ln, "bad count"))
    };
    let nv = parse_count(counts.first())?;
    let nf = parse_count(counts.get(1))?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (l, text) = lines.next().ok_or_else(|| err(ln, "unexpected end of vertex list"))?;
        let xs: std::result::Result<Vec<f64>, _> = text.split_whitespace().map(str::parse).collect();
        let xs = xs.map_err(|_| err(l, "bad coordinate"))?;
        if xs.is_empty() {
            return Err(err(l, "empty vertex record"));
        }
        vertices.push(xs);
    }
    let width = vertices.iter().map(Vec::len).max().unwrap_or(0);
    for v in &mut vertices {
        v.resize(width, 0.0);
    }

    let mut cells = Vec::with_capacity(nf);
    let mut arity = None;
    for _ in 0..nf {
        let (l, text) = lines.next().ok_or_else(|| err(ln, "unexpected end of cell list"))?;
        let mut toks = text.split_whitespace();
        let k: usize = toks.next().and_then(|t| t.parse().ok()).ok_or_else(|| err(l, "bad cell arity"))?;
        if *arity.get_or_insert(k) != k {
            return Err(err(l, "cells of mixed dimension"));
        }
        let idx: std::result::Result<Vec<usize>, _> = toks.take(k).map(str::parse).collect();
        let idx = idx.map_err(|_| err(l, "bad vertex index"))?;
        if idx.len() != k {
            return Err(err(l, "truncated cell record"));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= nv) {
            return Err(err(l, &format!("vertex index {bad} out of range")));
        }
        cells.push(idx);
    }
    if !(2..=4).contains(&arity.unwrap_or(0)) {
        return Err(err(ln, "cells must be edges, triangles or tetrahedra"));
    }
    Ok(OffMesh { vertices, cells })
}

/// Serialise a complex; each cell is written in an order realising its orientation.
pub fn write_off(k: &SimplicialComplex, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_off_string(k))?;
    Ok(())
}

pub fn to_off_string(k: &SimplicialComplex) -> String {
    let n = k.dim();
    let mut s = String::new();
    let _ = writeln!(s, "OFF");
    let _ = writeln!(s, "{} {} 0", k.num(0), k.num(n));
    for c in k.coords() {
        let mut c = c.clone();
        c.resize(3.max(c.len()), 0.0);
        let _ = writeln!(s, "{}", c.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" "));
    }
    for (i, cell) in k.simplices(n).iter().enumerate() {
        let mut cell = cell.clone();
        if k.orientation_sign(n, i) < 0 {
            cell.swap(0, 1);
        }
        let _ = writeln!(s, "{} {}", cell.len(), cell.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_with_inline_counts() {
        let m = parse_off("OFF 3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n").unwrap();
        assert_eq!(m.cells, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let m = parse_off("# hi\nOFF\n\n2 1 0\n0 0 0 # a\n1 0 0\n2 0 1\n").unwrap();
        assert_eq!(m.vertices.len(), 2);
    }

    #[test]
    fn malformed_files_are_parse_errors() {
        for bad in ["", "PLY\n", "OFF\n3 1 0\n0 0 0\n", "OFF\n3 1 0\n0 0 0\n1 0 0\n0 x 0\n3 0 1 2\n", "OFF\n3 1 0\n0 0\n1 0\n0 1\n3 0 1 7\n"] {
            assert!(matches!(parse_off(bad), Err(Error::Parse { .. })), "{bad:?}");
        }
    }

    #[test]
    fn mixed_arity_is_rejected() {
        let t = "OFF\n4 2 0\n0 0 0\n1 0 0\n0 1 0\n1 1 0\n3 0 1 2\n2 2 3\n";
        assert!(matches!(parse_off(t), Err(Error::Parse { .. })));
    }
}
