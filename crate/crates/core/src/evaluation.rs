//! Homogeneous evaluation paths and full-field parity against a reference
//! material.

use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::fem::{element_deformation_gradient, solve, SolverOptions, Specimen};
use crate::hyperelasticity::{embed_plane, DeformationState, MaterialModel};

/// Default number of uniform samples per path, endpoints included.
pub const PATH_SAMPLES: usize = 41;

/// Plane-strain loading paths, all with `F33 = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Path {
    UniaxialTension,
    UniaxialCompression,
    BiaxialTension,
    BiaxialCompression,
    SimpleShear,
    PureShear,
}

pub const PATHS: [Path; 6] = [
    Path::UniaxialTension,
    Path::UniaxialCompression,
    Path::BiaxialTension,
    Path::BiaxialCompression,
    Path::SimpleShear,
    Path::PureShear,
];

impl Path {
    pub fn code(self) -> &'static str {
        match self {
            Path::UniaxialTension => "UT",
            Path::UniaxialCompression => "UC",
            Path::BiaxialTension => "BT",
            Path::BiaxialCompression => "BC",
            Path::SimpleShear => "SS",
            Path::PureShear => "PS",
        }
    }

    /// Upper end of the loading parameter range.
    pub fn gamma_max(self) -> f64 {
        match self {
            Path::UniaxialTension | Path::BiaxialTension | Path::BiaxialCompression => 2.0,
            _ => 1.0,
        }
    }

    pub fn deformation(self, gamma: f64) -> Matrix2<f64> {
        let s = 1.0 + gamma;
        match self {
            Path::UniaxialTension => Matrix2::new(s, 0.0, 0.0, 1.0),
            Path::UniaxialCompression => Matrix2::new(1.0 / s, 0.0, 0.0, 1.0),
            Path::BiaxialTension => Matrix2::new(s, 0.0, 0.0, s),
            Path::BiaxialCompression => Matrix2::new(1.0 / s, 0.0, 0.0, 1.0 / s),
            Path::SimpleShear => Matrix2::new(1.0, gamma, 0.0, 1.0),
            Path::PureShear => Matrix2::new(s, 0.0, 0.0, 1.0 / s),
        }
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Path {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PATHS
            .into_iter()
            .find(|p| p.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Argument(format!("unknown evaluation path '{s}'")))
    }
}

/// `n` uniform samples of `[0, gamma_max]`.
pub fn gamma_samples(gamma_max: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(gamma_max > 0.0) {
        return Err(Error::Argument("a path needs at least two samples and a positive range".into()));
    }
    Ok((0..n).map(|i| gamma_max * i as f64 / (n - 1) as f64).collect())
}

/// Energy and in-plane first Piola-Kirchhoff stress along one path.
#[derive(Clone, Debug, PartialEq)]
pub struct PathCurve {
    pub path: Path,
    pub gammas: Vec<f64>,
    pub energy: Vec<f64>,
    pub stress: Vec<Matrix2<f64>>,
}

pub fn evaluate_path(model: &MaterialModel, path: Path, gammas: &[f64]) -> Result<PathCurve> {
    let mut energy = Vec::with_capacity(gammas.len());
    let mut stress = Vec::with_capacity(gammas.len());
    for &g in gammas {
        let r = model.plane_response(&path.deformation(g), false)?;
        energy.push(r.energy);
        stress.push(r.stress);
    }
    Ok(PathCurve {
        path,
        gammas: gammas.to_vec(),
        energy,
        stress,
    })
}

/// Root-mean-square stress error over all in-plane components and samples,
/// relative to the root-mean-square reference stress.
pub fn relative_rms(reference: &PathCurve, predicted: &PathCurve) -> Result<f64> {
    if reference.gammas != predicted.gammas {
        return Err(Error::Argument("curves are sampled at different loads".into()));
    }
    let (mut err, mut norm) = (0.0, 0.0);
    for (a, b) in reference.stress.iter().zip(&predicted.stress) {
        err += (b - a).norm_squared();
        norm += a.norm_squared();
    }
    if norm == 0.0 {
        return Err(Error::Evaluation("reference stress vanishes along the path".into()));
    }
    Ok((err / norm).sqrt())
}

/// Relative RMS error of a single stress component `(i, j)`.
pub fn relative_rms_component(reference: &PathCurve, predicted: &PathCurve, i: usize, j: usize) -> Result<f64> {
    if reference.gammas != predicted.gammas {
        return Err(Error::Argument("curves are sampled at different loads".into()));
    }
    let (mut err, mut norm) = (0.0, 0.0);
    for (a, b) in reference.stress.iter().zip(&predicted.stress) {
        err += (b[(i, j)] - a[(i, j)]).powi(2);
        norm += a[(i, j)].powi(2);
    }
    if norm == 0.0 {
        return Err(Error::Evaluation(format!("reference P{}{} vanishes along the path", i + 1, j + 1)));
    }
    Ok((err / norm).sqrt())
}

/// Coefficient of determination of `predicted` against `reference`.
pub fn r2_score(reference: &[f64], predicted: &[f64]) -> f64 {
    assert_eq!(reference.len(), predicted.len());
    let n = reference.len() as f64;
    let mean = reference.iter().sum::<f64>() / n;
    let ss_res: f64 = reference.iter().zip(predicted).map(|(a, b)| (a - b).powi(2)).sum();
    let ss_tot: f64 = reference.iter().map(|a| (a - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}

/// Isochoric first invariant and volume ratio of every element.
pub fn element_invariants(specimen: &Specimen, u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mesh = &specimen.mesh;
    let mut itil1 = Vec::with_capacity(mesh.n_elements());
    let mut j = Vec::with_capacity(mesh.n_elements());
    for e in 0..mesh.n_elements() {
        let f = embed_plane(&element_deformation_gradient(mesh, u, e));
        let s = DeformationState::new(&f).map_err(|source| Error::Element {
            element: e,
            source: Box::new(source),
        })?;
        itil1.push(s.itil1);
        j.push(s.j);
    }
    Ok((itil1, j))
}

/// Result of solving one specimen with a reference and a learned material.
#[derive(Clone, Debug)]
pub struct ParityReport {
    pub deltas: Vec<f64>,
    pub u_reference: Vec<f64>,
    pub u_learned: Vec<f64>,
    /// Per-element `(reference, learned)` at the final load.
    pub itil1: Vec<(f64, f64)>,
    pub j: Vec<(f64, f64)>,
    pub r2_itil1: f64,
    pub r2_j: f64,
    /// Reactions per load level and group.
    pub reactions_reference: Vec<Vec<f64>>,
    pub reactions_learned: Vec<Vec<f64>>,
}

fn solve_sequence(
    specimen: &Specimen,
    model: &MaterialModel,
    deltas: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut u: Option<Vec<f64>> = None;
    let mut reactions = Vec::with_capacity(deltas.len());
    for (t, &d) in deltas.iter().enumerate() {
        let sol = solve(
            &specimen.mesh,
            &specimen.partition,
            model,
            &specimen.target(d),
            u.as_deref(),
            opts,
        )
        .map_err(|e| Error::Snapshot {
            snapshot: t,
            source: Box::new(e),
        })?;
        reactions.push(sol.reactions);
        u = Some(sol.u);
    }
    Ok((u.unwrap_or_else(|| vec![0.0; specimen.mesh.n_dofs()]), reactions))
}

/// Solves the specimen through every load level with both materials and
/// compares the final element invariants. Errors name the failing model.
pub fn parity(
    specimen: &Specimen,
    reference: &MaterialModel,
    learned: &MaterialModel,
    deltas: &[f64],
    opts: &SolverOptions,
) -> Result<ParityReport> {
    if deltas.is_empty() {
        return Err(Error::Argument("at least one load level is needed".into()));
    }
    let tag = |name: &str| {
        let name = name.to_string();
        move |e: Error| Error::Solver(format!("{name} model failed: {e}"))
    };
    let (u_reference, reactions_reference) =
        solve_sequence(specimen, reference, deltas, opts).map_err(tag(&format!("reference ({})", reference.name())))?;
    let (u_learned, reactions_learned) =
        solve_sequence(specimen, learned, deltas, opts).map_err(tag(&format!("learned ({})", learned.name())))?;
    let (i_ref, j_ref) = element_invariants(specimen, &u_reference)?;
    let (i_lrn, j_lrn) = element_invariants(specimen, &u_learned)?;
    Ok(ParityReport {
        deltas: deltas.to_vec(),
        r2_itil1: r2_score(&i_ref, &i_lrn),
        r2_j: r2_score(&j_ref, &j_lrn),
        itil1: i_ref.into_iter().zip(i_lrn).collect(),
        j: j_ref.into_iter().zip(j_lrn).collect(),
        u_reference,
        u_learned,
        reactions_reference,
        reactions_learned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::validation_mesh;

    #[test]
    fn paths_start_at_identity_and_stay_admissible() {
        for p in PATHS {
            assert_eq!(p.deformation(0.0), Matrix2::identity());
            for g in gamma_samples(p.gamma_max(), PATH_SAMPLES).unwrap() {
                assert!(p.deformation(g).determinant() > 0.0);
            }
            assert_eq!(p.code().parse::<Path>().unwrap(), p);
        }
        assert!("XX".parse::<Path>().is_err());
    }

    #[test]
    fn neo_hookean_uniaxial_energy() {
        let c = evaluate_path(&MaterialModel::NeoHookean, Path::UniaxialTension, &[0.0, 0.5]).unwrap();
        assert!(c.energy[0].abs() < 1e-14);
        assert!(c.stress[0].norm() < 1e-12);
        assert!((c.energy[1] - 0.4966).abs() < 1e-4);
    }

    #[test]
    fn identical_models_have_zero_error() {
        let g = gamma_samples(1.0, 11).unwrap();
        let a = evaluate_path(&MaterialModel::NeoHookean, Path::SimpleShear, &g).unwrap();
        assert_eq!(relative_rms(&a, &a).unwrap(), 0.0);
        let b = evaluate_path(&MaterialModel::GentThomas, Path::SimpleShear, &g).unwrap();
        assert!(relative_rms(&a, &b).unwrap() > 0.01);
    }

    #[test]
    fn r2_edge_cases() {
        assert_eq!(r2_score(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 1.0);
        assert!((r2_score(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0])).abs() < 1e-15);
        assert_eq!(r2_score(&[1.0, 1.0], &[1.0, 1.0]), 1.0);
    }

    #[test]
    fn self_parity_is_exact() {
        let s = Specimen::uniaxial(validation_mesh(4, 3).unwrap()).unwrap();
        let m = MaterialModel::NeoHookean;
        let r = parity(&s, &m, &m, &[0.05, 0.1], &SolverOptions::default()).unwrap();
        assert_eq!(r.r2_itil1, 1.0);
        assert_eq!(r.r2_j, 1.0);
        assert_eq!(r.itil1.len(), s.mesh.n_elements());
    }
}
