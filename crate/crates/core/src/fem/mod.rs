//! Plane-strain finite elements with linear triangles and one quadrature
//! point per element.
//!
//! Degree of freedom `2 * node + component` holds displacement component
//! `component` of `node`.

mod dataset;
mod mesh;
mod specimen;

pub use dataset::{generate_dataset, NoiseOptions, Snapshot, SpecimenDataset};
pub use mesh::Mesh;
pub use specimen::{plate_with_hole, square_mesh, validation_mesh, Specimen};

use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::{Matrix2, Matrix4};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hyperelasticity::MaterialModel;

/// DOFs tied to one measured reaction force.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedGroup {
    pub name: String,
    pub dofs: Vec<usize>,
}

/// Split of the DOFs into free ones and reaction groups.
#[derive(Clone, Debug, PartialEq)]
pub struct DofPartition {
    n_dofs: usize,
    free: Vec<usize>,
    groups: Vec<FixedGroup>,
}

impl DofPartition {
    pub fn new(n_dofs: usize, groups: Vec<FixedGroup>) -> Result<Self> {
        let mut seen = vec![false; n_dofs];
        for g in &groups {
            for &d in &g.dofs {
                if d >= n_dofs {
                    return Err(Error::config(format!("group '{}' has DOF {d} out of range", g.name)));
                }
                if seen[d] {
                    return Err(Error::config(format!("DOF {d} belongs to more than one group")));
                }
                seen[d] = true;
            }
        }
        let free = (0..n_dofs).filter(|&d| !seen[d]).collect();
        Ok(DofPartition {
            n_dofs,
            free,
            groups,
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn groups(&self) -> &[FixedGroup] {
        &self.groups
    }

    pub fn fixed(&self) -> impl Iterator<Item = usize> + '_ {
        self.groups.iter().flat_map(|g| g.dofs.iter().copied())
    }
}

/// `F = I + sum_a u^a (x) grad N^a` on element `e`.
pub fn element_deformation_gradient(mesh: &Mesh, u: &[f64], e: usize) -> Matrix2<f64> {
    let tri = mesh.triangles()[e];
    let g = mesh.grads(e);
    let mut f = Matrix2::identity();
    for a in 0..3 {
        for i in 0..2 {
            for j in 0..2 {
                f[(i, j)] += u[2 * tri[a] + i] * g[a][j];
            }
        }
    }
    f
}

/// Element force vector `A * P_ij * dN^a/dX_j`, indexed `2 * a + i`.
pub fn element_forces(mesh: &Mesh, e: usize, p: &Matrix2<f64>) -> [f64; 6] {
    let g = mesh.grads(e);
    let area = mesh.area(e);
    let mut fe = [0.0; 6];
    for a in 0..3 {
        for i in 0..2 {
            fe[2 * a + i] = area * (p[(i, 0)] * g[a][0] + p[(i, 1)] * g[a][1]);
        }
    }
    fe
}

fn element_stiffness(mesh: &Mesh, e: usize, c: &Matrix4<f64>) -> [[f64; 6]; 6] {
    let g = mesh.grads(e);
    let area = mesh.area(e);
    let mut ke = [[0.0; 6]; 6];
    for a in 0..3 {
        for i in 0..2 {
            for b in 0..3 {
                for k in 0..2 {
                    let mut s = 0.0;
                    for j in 0..2 {
                        for l in 0..2 {
                            s += c[(2 * i + j, 2 * k + l)] * g[a][j] * g[b][l];
                        }
                    }
                    ke[2 * a + i][2 * b + k] = area * s;
                }
            }
        }
    }
    ke
}

fn element_error(e: usize) -> impl Fn(Error) -> Error {
    move |source| Error::Element {
        element: e,
        source: Box::new(source),
    }
}

fn scatter(mesh: &Mesh, per_element: &[[f64; 6]]) -> Vec<f64> {
    let mut f = vec![0.0; mesh.n_dofs()];
    for (e, fe) in per_element.iter().enumerate() {
        let tri = mesh.triangles()[e];
        for a in 0..3 {
            for i in 0..2 {
                f[2 * tri[a] + i] += fe[2 * a + i];
            }
        }
    }
    f
}

/// Internal nodal forces for displacements `u`.
pub fn nodal_forces(mesh: &Mesh, u: &[f64], model: &MaterialModel) -> Result<Vec<f64>> {
    let per_element = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let f = element_deformation_gradient(mesh, u, e);
            let r = model.plane_response(&f, false).map_err(element_error(e))?;
            Ok(element_forces(mesh, e, &r.stress))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(scatter(mesh, &per_element))
}

/// `R^beta = sum of f over the DOFs of group beta`.
pub fn reactions(partition: &DofPartition, f: &[f64]) -> Vec<f64> {
    partition
        .groups()
        .iter()
        .map(|g| g.dofs.iter().map(|&d| f[d]).sum())
        .collect()
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Uniform load increments per solve.
    pub increments: usize,
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// Convergence when `max |f_free| < rel_tol * (1 + |R|)`.
    pub rel_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            increments: 1,
            max_iterations: 25,
            max_halvings: 4,
            rel_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub u: Vec<f64>,
    pub forces: Vec<f64>,
    pub reactions: Vec<f64>,
    /// Linear solves performed, predictors included.
    pub iterations: usize,
    /// Free-DOF residual after every solve of the last increment.
    pub residuals: Vec<f64>,
}

struct Assembly {
    forces: Vec<f64>,
    matrix: SparseColMat<usize, f64>,
    /// `-K_fc * du_c` for the prescribed increment `du_c`.
    predictor_rhs: Vec<f64>,
}

fn assemble(
    mesh: &Mesh,
    free_index: &[Option<usize>],
    n_free: usize,
    u: &[f64],
    du_fixed: Option<&[f64]>,
    model: &MaterialModel,
) -> Result<Assembly> {
    let per_element = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let f = element_deformation_gradient(mesh, u, e);
            let r = model.plane_response(&f, true).map_err(element_error(e))?;
            let c = r.tangent.expect("tangent requested");
            Ok((element_forces(mesh, e, &r.stress), element_stiffness(mesh, e, &c)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut triplets = Vec::with_capacity(36 * per_element.len());
    let mut predictor_rhs = vec![0.0; n_free];
    for (e, (_, ke)) in per_element.iter().enumerate() {
        let dofs: Vec<usize> = mesh.triangles()[e]
            .iter()
            .flat_map(|&n| [2 * n, 2 * n + 1])
            .collect();
        for (r, &dr) in dofs.iter().enumerate() {
            let Some(fr) = free_index[dr] else { continue };
            for (c, &dc) in dofs.iter().enumerate() {
                match free_index[dc] {
                    Some(fc) => triplets.push(Triplet::new(fr, fc, ke[r][c])),
                    None => {
                        if let Some(du) = du_fixed {
                            predictor_rhs[fr] -= ke[r][c] * du[dc];
                        }
                    }
                }
            }
        }
    }
    let forces = scatter(mesh, &per_element.iter().map(|p| p.0).collect::<Vec<_>>());
    let matrix = SparseColMat::try_new_from_triplets(n_free, n_free, &triplets)
        .map_err(|e| Error::Solver(format!("stiffness assembly failed: {e:?}")))?;
    Ok(Assembly {
        forces,
        matrix,
        predictor_rhs,
    })
}

fn linear_solve(matrix: &SparseColMat<usize, f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    let lu = matrix
        .sp_lu()
        .map_err(|e| Error::Solver(format!("stiffness factorization failed: {e:?}")))?;
    let mut b = faer::Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    lu.solve_in_place(b.as_mut());
    let x: Vec<f64> = (0..rhs.len()).map(|i| b[(i, 0)]).collect();
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Solver("singular stiffness matrix".into()))
    }
}

/// Newton solve for prescribed values `target` on the fixed DOFs, starting
/// from `start` (zero displacement if absent) and ramping the prescribed
/// values linearly.
pub fn solve(
    mesh: &Mesh,
    partition: &DofPartition,
    model: &MaterialModel,
    target: &[f64],
    start: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<Solution> {
    let n = mesh.n_dofs();
    if target.len() != n || partition.n_dofs() != n || start.is_some_and(|s| s.len() != n) {
        return Err(Error::Argument("displacement vector length does not match the mesh".into()));
    }
    if opts.increments == 0 {
        return Err(Error::Argument("at least one load increment is needed".into()));
    }
    let mut free_index = vec![None; n];
    for (k, &d) in partition.free().iter().enumerate() {
        free_index[d] = Some(k);
    }
    let n_free = partition.free().len();
    let fixed: Vec<usize> = partition.fixed().collect();
    let mut u = start.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
    let origin: Vec<f64> = fixed.iter().map(|&d| u[d]).collect();

    let mut done = 0.0;
    let base = 1.0 / opts.increments as f64;
    let mut step = base;
    let mut halvings = 0;
    let mut total_iterations = 0;
    let mut last_error = None;
    loop {
        let next = (done + step).min(1.0);
        let mut trial = u.clone();
        let mut du = vec![0.0; n];
        for (k, &d) in fixed.iter().enumerate() {
            let v = origin[k] + next * (target[d] - origin[k]);
            du[d] = v - u[d];
        }
        match newton(mesh, partition, &free_index, n_free, &mut trial, &du, model, opts) {
            Ok((forces, iters, residuals)) => {
                total_iterations += iters;
                u = trial;
                done = next;
                if done >= 1.0 {
                    let reactions = reactions(partition, &forces);
                    return Ok(Solution {
                        u,
                        forces,
                        reactions,
                        iterations: total_iterations,
                        residuals,
                    });
                }
            }
            Err(e) if e.is_numerical() && halvings < opts.max_halvings => {
                halvings += 1;
                step *= 0.5;
                last_error = Some(e);
            }
            Err(e) => {
                let detail = last_error.map(|l| format!("; earlier: {l}")).unwrap_or_default();
                return Err(match e {
                    Error::Solver(msg) => Error::Solver(format!(
                        "{msg} at load fraction {next:.4} after {halvings} halvings{detail}"
                    )),
                    other => other,
                });
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn newton(
    mesh: &Mesh,
    partition: &DofPartition,
    free_index: &[Option<usize>],
    n_free: usize,
    u: &mut [f64],
    du_fixed: &[f64],
    model: &MaterialModel,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, usize, Vec<f64>)> {
    let free = partition.free();
    let mut residuals = Vec::new();
    let mut iterations = 0;
    for it in 0..=opts.max_iterations {
        let predictor = it == 0;
        let asm = assemble(mesh, free_index, n_free, u, predictor.then_some(du_fixed), model)?;
        let res = free.iter().map(|&d| asm.forces[d].abs()).fold(0.0, f64::max);
        if !res.is_finite() {
            return Err(Error::Solver("non-finite residual".into()));
        }
        if !predictor {
            residuals.push(res);
            let r = reactions(partition, &asm.forces);
            let rnorm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            if res < opts.rel_tol * (1.0 + rnorm) {
                return Ok((asm.forces, iterations, residuals));
            }
        }
        if it == opts.max_iterations {
            return Err(Error::Solver(format!(
                "no convergence in {} iterations, residual {res:.3e}",
                opts.max_iterations
            )));
        }
        let rhs: Vec<f64> = free
            .iter()
            .enumerate()
            .map(|(k, &d)| -asm.forces[d] + asm.predictor_rhs[k])
            .collect();
        let x = linear_solve(&asm.matrix, &rhs)?;
        iterations += 1;
        for (k, &d) in free.iter().enumerate() {
            u[d] += x[k];
        }
        if predictor {
            for (d, v) in du_fixed.iter().enumerate() {
                u[d] += v;
            }
        }
    }
    unreachable!("loop returns on its last iteration")
}
