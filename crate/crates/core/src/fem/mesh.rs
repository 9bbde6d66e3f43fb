use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::network::fmt17;

/// Linear triangle mesh with precomputed shape-function gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    areas: Vec<f64>,
    grads: Vec<[[f64; 2]; 3]>,
}

impl Mesh {
    /// Builds a mesh, reordering clockwise triangles to counter-clockwise.
    pub fn new(nodes: Vec<[f64; 2]>, mut triangles: Vec<[usize; 3]>) -> Result<Self> {
        if nodes.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::config("mesh has non-finite node coordinates"));
        }
        let mut areas = Vec::with_capacity(triangles.len());
        let mut grads = Vec::with_capacity(triangles.len());
        for (e, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&n| n >= nodes.len()) {
                return Err(Error::config(format!("triangle {e} references a missing node")));
            }
            let mut twice = signed_twice_area(&nodes, tri);
            if twice < 0.0 {
                tri.swap(1, 2);
                twice = -twice;
            }
            let scale = nodes[tri[0]][0].abs().max(nodes[tri[0]][1].abs()).max(1.0);
            if !(twice > 1e-14 * scale * scale) {
                return Err(Error::config(format!("triangle {e} is degenerate")));
            }
            let [x0, x1, x2] = tri.map(|n| nodes[n]);
            let g = |a: [f64; 2], b: [f64; 2]| [(a[1] - b[1]) / twice, (b[0] - a[0]) / twice];
            grads.push([g(x1, x2), g(x2, x0), g(x0, x1)]);
            areas.push(0.5 * twice);
        }
        Ok(Mesh {
            nodes,
            triangles,
            areas,
            grads,
        })
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn area(&self, e: usize) -> f64 {
        self.areas[e]
    }

    /// Gradients of the three shape functions of element `e`.
    pub fn grads(&self, e: usize) -> &[[f64; 2]; 3] {
        &self.grads[e]
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.nodes {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        (lo, hi)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("nodes {} triangles {}\n", self.nodes.len(), self.triangles.len());
        for p in &self.nodes {
            let _ = writeln!(s, "{} {}", fmt17(p[0]), fmt17(p[1]));
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (n_nodes, n_tris) = parse_header(&mut lines)?;
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let (ln, l) = lines.next().ok_or_else(|| Error::parse(0, "missing node lines"))?;
            let v = parse_fields::<f64>(ln, l, 2)?;
            nodes.push([v[0], v[1]]);
        }
        let mut tris = Vec::with_capacity(n_tris);
        for _ in 0..n_tris {
            let (ln, l) = lines.next().ok_or_else(|| Error::parse(0, "missing triangle lines"))?;
            let v = parse_fields::<usize>(ln, l, 3)?;
            tris.push([v[0], v[1], v[2]]);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(Error::parse(ln, "unexpected trailing content"));
        }
        Mesh::new(nodes, tris)
    }
}

fn signed_twice_area(nodes: &[[f64; 2]], t: &[usize; 3]) -> f64 {
    let [a, b, c] = t.map(|n| nodes[n]);
    (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
}

pub(crate) fn parse_header<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
) -> Result<(usize, usize)> {
    let (ln, l) = lines.next().ok_or_else(|| Error::parse(1, "empty mesh"))?;
    let f: Vec<&str> = l.split_whitespace().collect();
    match f.as_slice() {
        ["nodes", n, "triangles", m] => Ok((
            n.parse().map_err(|_| Error::parse(ln, "bad node count"))?,
            m.parse().map_err(|_| Error::parse(ln, "bad triangle count"))?,
        )),
        _ => Err(Error::parse(ln, "expected 'nodes <n> triangles <m>'")),
    }
}

pub(crate) fn parse_fields<T: std::str::FromStr>(ln: usize, line: &str, n: usize) -> Result<Vec<T>> {
    let v: Vec<T> = line
        .split_whitespace()
        .map(|t| t.parse::<T>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse(ln, format!("could not parse '{line}'")))?;
    if v.len() != n {
        return Err(Error::parse(ln, format!("expected {n} fields, found {}", v.len())));
    }
    Ok(v)
}
