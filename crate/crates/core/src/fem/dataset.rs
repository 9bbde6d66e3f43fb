use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::mesh::{parse_fields, parse_header};
use super::{solve, DofPartition, FixedGroup, Mesh, SolverOptions, Specimen};
use crate::error::{Error, Result};
use crate::hyperelasticity::MaterialModel;
use crate::network::fmt17;

const HEADER: &str = "ickan-dataset v1";

/// Displacements and measured reactions at one load level.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub delta: f64,
    pub u: Vec<f64>,
    pub reactions: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpecimenDataset {
    pub mesh: Mesh,
    pub partition: DofPartition,
    pub snapshots: Vec<Snapshot>,
    pub noise_sigma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseOptions {
    pub sigma: f64,
    pub seed: u64,
    /// Reuse one draw per DOF for every snapshot instead of drawing anew.
    pub per_dof_constant: bool,
}

impl NoiseOptions {
    pub fn none() -> Self {
        NoiseOptions {
            sigma: 0.0,
            seed: 0,
            per_dof_constant: false,
        }
    }
}

/// Solves the specimen at every load level in turn and perturbs the
/// displacements with Gaussian noise; reactions stay noiseless.
pub fn generate_dataset(
    specimen: &Specimen,
    model: &MaterialModel,
    deltas: &[f64],
    noise: &NoiseOptions,
    opts: &SolverOptions,
) -> Result<SpecimenDataset> {
    if !(noise.sigma >= 0.0) || !noise.sigma.is_finite() {
        return Err(Error::config(format!("noise level {} must be non-negative", noise.sigma)));
    }
    if deltas.is_empty() {
        return Err(Error::config("at least one load level is needed"));
    }
    let n = specimen.mesh.n_dofs();
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let normal = Normal::new(0.0, noise.sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::config(format!("invalid noise level: {e}")))?;
    let constant: Vec<f64> = if noise.per_dof_constant && noise.sigma > 0.0 {
        (0..n).map(|_| normal.sample(&mut rng)).collect()
    } else {
        Vec::new()
    };
    let mut snapshots = Vec::with_capacity(deltas.len());
    let mut previous: Option<Vec<f64>> = None;
    for (t, &delta) in deltas.iter().enumerate() {
        let sol = solve(
            &specimen.mesh,
            &specimen.partition,
            model,
            &specimen.target(delta),
            previous.as_deref(),
            opts,
        )
        .map_err(|e| Error::Snapshot {
            snapshot: t,
            source: Box::new(e),
        })?;
        let mut u = sol.u.clone();
        if noise.sigma > 0.0 {
            for (d, v) in u.iter_mut().enumerate() {
                *v += if noise.per_dof_constant {
                    constant[d]
                } else {
                    normal.sample(&mut rng)
                };
            }
        }
        snapshots.push(Snapshot {
            delta,
            u,
            reactions: sol.reactions,
        });
        previous = Some(sol.u);
    }
    Ok(SpecimenDataset {
        mesh: specimen.mesh.clone(),
        partition: specimen.partition.clone(),
        snapshots,
        noise_sigma: noise.sigma,
    })
}

impl SpecimenDataset {
    pub fn validate(&self) -> Result<()> {
        let n = self.mesh.n_dofs();
        if self.partition.n_dofs() != n {
            return Err(Error::config("DOF partition does not match the mesh"));
        }
        for (t, s) in self.snapshots.iter().enumerate() {
            if s.u.len() != n || s.reactions.len() != self.partition.groups().len() {
                return Err(Error::config(format!("snapshot {t} has inconsistent sizes")));
            }
            if s.u.iter().chain(&s.reactions).any(|v| !v.is_finite()) {
                return Err(Error::config(format!("snapshot {t} has non-finite values")));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{HEADER}\nnoise {}\n", fmt17(self.noise_sigma));
        s.push_str(&self.mesh.to_text());
        let _ = writeln!(s, "groups {}", self.partition.groups().len());
        for g in self.partition.groups() {
            let dofs: Vec<String> = g.dofs.iter().map(|d| d.to_string()).collect();
            let _ = writeln!(s, "group {} {} {}", g.name, g.dofs.len(), dofs.join(" "));
        }
        let _ = writeln!(s, "snapshots {}", self.snapshots.len());
        for snap in &self.snapshots {
            let _ = writeln!(s, "snapshot {}", fmt17(snap.delta));
            for pair in snap.u.chunks(2) {
                let _ = writeln!(s, "{} {}", fmt17(pair[0]), fmt17(pair[1]));
            }
            let r: Vec<String> = snap.reactions.iter().map(|&v| fmt17(v)).collect();
            let _ = writeln!(s, "reactions {}", r.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::parse(0, format!("unexpected end of file, expected {what}")))
        };
        let (ln, l) = next("header")?;
        if l != HEADER {
            return Err(Error::parse(ln, format!("expected header '{HEADER}'")));
        }
        let noise_sigma = keyed::<f64>(next("noise")?, "noise")?;

        let header = next("mesh header")?;
        let (n_nodes, n_tris) = parse_header(&mut std::iter::once(header))?;
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let (ln, l) = next("node")?;
            let v = parse_fields::<f64>(ln, l, 2)?;
            nodes.push([v[0], v[1]]);
        }
        let mut tris = Vec::with_capacity(n_tris);
        for _ in 0..n_tris {
            let (ln, l) = next("triangle")?;
            let v = parse_fields::<usize>(ln, l, 3)?;
            tris.push([v[0], v[1], v[2]]);
        }
        let mesh = Mesh::new(nodes, tris)?;

        let n_groups = keyed::<usize>(next("groups")?, "groups")?;
        let mut groups = Vec::with_capacity(n_groups);
        for _ in 0..n_groups {
            let (ln, l) = next("group")?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() < 3 || f[0] != "group" {
                return Err(Error::parse(ln, "expected 'group <name> <count> <dofs...>'"));
            }
            let count: usize = f[2].parse().map_err(|_| Error::parse(ln, "bad DOF count"))?;
            let dofs = parse_fields::<usize>(ln, &f[3..].join(" "), count)?;
            groups.push(FixedGroup {
                name: f[1].to_string(),
                dofs,
            });
        }
        let partition = DofPartition::new(mesh.n_dofs(), groups)?;

        let n_snap = keyed::<usize>(next("snapshots")?, "snapshots")?;
        let mut snapshots = Vec::with_capacity(n_snap);
        for _ in 0..n_snap {
            let delta = keyed::<f64>(next("snapshot")?, "snapshot")?;
            let mut u = Vec::with_capacity(mesh.n_dofs());
            for _ in 0..mesh.n_nodes() {
                let (ln, l) = next("displacement")?;
                u.extend(parse_fields::<f64>(ln, l, 2)?);
            }
            let (ln, l) = next("reactions")?;
            let rest = l
                .strip_prefix("reactions")
                .ok_or_else(|| Error::parse(ln, "expected 'reactions ...'"))?;
            let reactions = parse_fields::<f64>(ln, rest, partition.groups().len())?;
            snapshots.push(Snapshot {
                delta,
                u,
                reactions,
            });
        }
        if let Ok((ln, _)) = next("end of file") {
            return Err(Error::parse(ln, "unexpected trailing content"));
        }
        let ds = SpecimenDataset {
            mesh,
            partition,
            snapshots,
            noise_sigma,
        };
        ds.validate()?;
        Ok(ds)
    }
}

fn keyed<T: std::str::FromStr>((ln, line): (usize, &str), key: &str) -> Result<T> {
    let mut it = line.split_whitespace();
    match (it.next(), it.next(), it.next()) {
        (Some(k), Some(v), None) if k == key => v
            .parse()
            .map_err(|_| Error::parse(ln, format!("bad value for '{key}'"))),
        _ => Err(Error::parse(ln, format!("expected '{key} <value>'"))),
    }
}
