use std::collections::HashMap;
use std::f64::consts::FRAC_PI_4;

use nalgebra::Matrix2;

use super::{DofPartition, FixedGroup, Mesh};
use crate::error::{Error, Result};

/// Radial grading exponent; values above one cluster elements at the hole.
const RADIAL_GRADING: f64 = 1.3;

/// Structured mesh of one mapped block, `map(s, r)` over the unit square.
struct BlockMesher {
    nodes: Vec<[f64; 2]>,
    lookup: HashMap<(i64, i64), usize>,
    triangles: Vec<[usize; 3]>,
}

impl BlockMesher {
    fn new() -> Self {
        BlockMesher {
            nodes: Vec::new(),
            lookup: HashMap::new(),
            triangles: Vec::new(),
        }
    }

    fn node(&mut self, p: [f64; 2]) -> usize {
        let key = ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64);
        *self.lookup.entry(key).or_insert_with(|| {
            self.nodes.push(p);
            self.nodes.len() - 1
        })
    }

    fn block(&mut self, ns: usize, nr: usize, map: impl Fn(f64, f64) -> [f64; 2]) {
        let mut ids = vec![vec![0; nr + 1]; ns + 1];
        for (i, row) in ids.iter_mut().enumerate() {
            for (k, id) in row.iter_mut().enumerate() {
                *id = self.node(map(i as f64 / ns as f64, k as f64 / nr as f64));
            }
        }
        for i in 0..ns {
            for k in 0..nr {
                let (a, b, c, d) = (ids[i][k], ids[i + 1][k], ids[i + 1][k + 1], ids[i][k + 1]);
                let dist = |p: usize, q: usize| {
                    let (x, y) = (self.nodes[p], self.nodes[q]);
                    (x[0] - y[0]).hypot(x[1] - y[1])
                };
                if dist(a, c) <= dist(b, d) {
                    self.triangles.push([a, b, c]);
                    self.triangles.push([a, c, d]);
                } else {
                    self.triangles.push([a, b, d]);
                    self.triangles.push([b, c, d]);
                }
            }
        }
    }

    fn finish(self) -> Result<Mesh> {
        Mesh::new(self.nodes, self.triangles)
    }
}

fn lerp(a: [f64; 2], b: [f64; 2], t: f64) -> [f64; 2] {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Unit square split into `nx * ny` cells of two triangles each.
pub fn square_mesh(nx: usize, ny: usize) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::config("square mesh needs at least one cell per side"));
    }
    let mut m = BlockMesher::new();
    m.block(nx, ny, |s, r| [s, r]);
    m.finish()
}

/// Unit square with a quarter-circle hole of radius `radius` centred at the
/// origin. Two mapped blocks run from the arc to the right and top edges,
/// with `n_ang` angular cells per block and `n_rad` radial cells.
pub fn plate_with_hole(n_ang: usize, n_rad: usize, radius: f64) -> Result<Mesh> {
    if n_ang == 0 || n_rad == 0 || !(radius > 0.0 && radius < 0.9) {
        return Err(Error::config("plate-with-hole mesh needs positive counts and 0 < radius < 0.9"));
    }
    let arc = |theta: f64| [radius * theta.cos(), radius * theta.sin()];
    let mut m = BlockMesher::new();
    m.block(n_ang, n_rad, |s, r| {
        lerp(arc(s * FRAC_PI_4), [1.0, s], r.powf(RADIAL_GRADING))
    });
    m.block(n_ang, n_rad, |s, r| {
        lerp(arc((1.0 + s) * FRAC_PI_4), [1.0 - s, 1.0], r.powf(RADIAL_GRADING))
    });
    m.finish()
}

/// Unit square with one off-centre circular hole, meshed as four mapped
/// blocks between the hole and the four edges.
pub fn validation_mesh(n_ang: usize, n_rad: usize) -> Result<Mesh> {
    if n_ang == 0 || n_rad == 0 {
        return Err(Error::config("validation mesh needs positive cell counts"));
    }
    let (cx, cy, radius) = (0.42, 0.56, 0.18);
    let corners = [[1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.0]];
    let mut m = BlockMesher::new();
    for q in 0..4 {
        let (c0, c1) = (corners[q], corners[(q + 1) % 4]);
        let start = -FRAC_PI_4 + 2.0 * FRAC_PI_4 * q as f64;
        m.block(n_ang, n_rad, |s, r| {
            let th = start + 2.0 * FRAC_PI_4 * s;
            let inner = [cx + radius * th.cos(), cy + radius * th.sin()];
            lerp(inner, lerp(c0, c1, s), r.powf(RADIAL_GRADING))
        });
    }
    m.finish()
}

/// Mesh, reaction groups and the displacement pattern applied per unit of
/// the load parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Specimen {
    pub mesh: Mesh,
    pub partition: DofPartition,
    /// Prescribed displacement per unit load, indexed by DOF.
    pub load_pattern: Vec<f64>,
}

fn edge_nodes(mesh: &Mesh, axis: usize, at_max: bool) -> Vec<usize> {
    let (lo, hi) = mesh.bounds();
    let target = if at_max { hi[axis] } else { lo[axis] };
    let tol = 1e-9 * (hi[0] - lo[0]).max(hi[1] - lo[1]);
    (0..mesh.n_nodes())
        .filter(|&n| (mesh.nodes()[n][axis] - target).abs() <= tol)
        .collect()
}

impl Specimen {
    pub fn target(&self, delta: f64) -> Vec<f64> {
        self.load_pattern.iter().map(|v| v * delta).collect()
    }

    /// Symmetry on the left and bottom edges, `u_x = delta` on the right
    /// edge and `u_y = delta / 2` on the top edge.
    pub fn biaxial(mesh: Mesh) -> Result<Self> {
        let left = edge_nodes(&mesh, 0, false);
        let bottom = edge_nodes(&mesh, 1, false);
        let right = edge_nodes(&mesh, 0, true);
        let top = edge_nodes(&mesh, 1, true);
        let mut load_pattern = vec![0.0; mesh.n_dofs()];
        for &n in &right {
            load_pattern[2 * n] = 1.0;
        }
        for &n in &top {
            load_pattern[2 * n + 1] = 0.5;
        }
        let group = |name: &str, nodes: &[usize], c: usize| FixedGroup {
            name: name.into(),
            dofs: nodes.iter().map(|n| 2 * n + c).collect(),
        };
        let groups = vec![
            group("left-x", &left, 0),
            group("bottom-y", &bottom, 1),
            group("right-x", &right, 0),
            group("top-y", &top, 1),
        ];
        let partition = DofPartition::new(mesh.n_dofs(), groups)?;
        Ok(Specimen {
            mesh,
            partition,
            load_pattern,
        })
    }

    /// `u_y = 0` on the bottom edge, `u_x = 0` at its leftmost node and
    /// `u_y = delta` on the top edge.
    pub fn uniaxial(mesh: Mesh) -> Result<Self> {
        let bottom = edge_nodes(&mesh, 1, false);
        let top = edge_nodes(&mesh, 1, true);
        let anchor = *bottom
            .iter()
            .min_by(|&&a, &&b| mesh.nodes()[a][0].total_cmp(&mesh.nodes()[b][0]))
            .ok_or_else(|| Error::config("mesh has no bottom edge"))?;
        let mut load_pattern = vec![0.0; mesh.n_dofs()];
        for &n in &top {
            load_pattern[2 * n + 1] = 1.0;
        }
        let groups = vec![
            FixedGroup {
                name: "bottom-y".into(),
                dofs: bottom.iter().map(|n| 2 * n + 1).collect(),
            },
            FixedGroup {
                name: "anchor-x".into(),
                dofs: vec![2 * anchor],
            },
            FixedGroup {
                name: "top-y".into(),
                dofs: top.iter().map(|n| 2 * n + 1).collect(),
            },
        ];
        let partition = DofPartition::new(mesh.n_dofs(), groups)?;
        Ok(Specimen {
            mesh,
            partition,
            load_pattern,
        })
    }

    /// Displacements `(A - I) X` prescribed on every bounding-box edge node.
    pub fn affine(mesh: Mesh, a: &Matrix2<f64>) -> Result<Self> {
        let mut boundary: Vec<usize> = [(0, false), (1, false), (0, true), (1, true)]
            .iter()
            .flat_map(|&(axis, hi)| edge_nodes(&mesh, axis, hi))
            .collect();
        boundary.sort_unstable();
        boundary.dedup();
        let mut load_pattern = vec![0.0; mesh.n_dofs()];
        for &n in &boundary {
            let [x, y] = mesh.nodes()[n];
            load_pattern[2 * n] = (a[(0, 0)] - 1.0) * x + a[(0, 1)] * y;
            load_pattern[2 * n + 1] = a[(1, 0)] * x + (a[(1, 1)] - 1.0) * y;
        }
        let groups = (0..2)
            .map(|c| FixedGroup {
                name: ["boundary-x", "boundary-y"][c].into(),
                dofs: boundary.iter().map(|n| 2 * n + c).collect(),
            })
            .collect();
        let partition = DofPartition::new(mesh.n_dofs(), groups)?;
        Ok(Specimen {
            mesh,
            partition,
            load_pattern,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn training_mesh_size() {
        let m = plate_with_hole(10, 18, 0.2).unwrap();
        assert_eq!(m.n_nodes(), 21 * 19);
        assert_eq!(m.n_elements(), 2 * 20 * 18);
        let area: f64 = (0..m.n_elements()).map(|e| m.area(e)).sum();
        let exact = 1.0 - std::f64::consts::PI * 0.04 / 4.0;
        assert!((area - exact).abs() < 2e-3, "{area} vs {exact}");
    }

    #[test]
    fn validation_mesh_is_valid() {
        let m = validation_mesh(8, 6).unwrap();
        assert_eq!(m.n_nodes(), 32 * 7);
        let area: f64 = (0..m.n_elements()).map(|e| m.area(e)).sum();
        assert!((area - (1.0 - std::f64::consts::PI * 0.18 * 0.18)).abs() < 5e-3);
    }

    #[test]
    fn biaxial_groups() {
        let s = Specimen::biaxial(plate_with_hole(4, 4, 0.2).unwrap()).unwrap();
        let names: Vec<_> = s.partition.groups().iter().map(|g| g.name.as_str()).collect();
        assert_eq!(names, ["left-x", "bottom-y", "right-x", "top-y"]);
        let t = s.target(0.2);
        for &d in &s.partition.groups()[3].dofs {
            assert_eq!(t[d], 0.1);
        }
    }
}
