//! Unsupervised training against nodal force balance and measured reactions.

use std::time::{Duration, Instant};

use nalgebra::Matrix2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{element_deformation_gradient, element_forces, nodal_forces, SpecimenDataset};
use crate::hyperelasticity::{plane_k_derivatives, MaterialModel};
use crate::network::{Architecture, GradientAccumulator, IckanModel, ParameterGradient};

/// Elements per work unit; fixes the summation order of the gradient.
const CHUNK: usize = 128;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub base_lr: f64,
    pub max_lr: f64,
    /// Epochs per half cycle of the learning-rate schedule.
    pub cycle_step: usize,
    pub ensemble_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Multiplier on the reaction terms of the loss.
    pub reaction_weight: f64,
    pub architecture: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1000,
            base_lr: 0.001,
            max_lr: 0.1,
            cycle_step: 50,
            ensemble_size: 10,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            reaction_weight: 1.0,
            architecture: Architecture::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be positive"));
        }
        if !(self.base_lr > 0.0 && self.base_lr <= self.max_lr) {
            return Err(Error::config("learning rates need 0 < base_lr <= max_lr"));
        }
        if self.cycle_step == 0 {
            return Err(Error::config("cycle_step must be positive"));
        }
        if self.ensemble_size == 0 {
            return Err(Error::config("ensemble size must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return Err(Error::config("Adam needs betas in [0, 1) and a positive epsilon"));
        }
        if !(self.reaction_weight >= 0.0) {
            return Err(Error::config("reaction weight must be non-negative"));
        }
        self.architecture.validate()
    }

    /// Triangular cyclic schedule, starting at `base_lr` in epoch 0.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        let e = epoch as f64;
        let step = self.cycle_step as f64;
        let cycle = (1.0 + e / (2.0 * step)).floor();
        let x = (e / step - 2.0 * cycle + 1.0).abs();
        self.base_lr + (self.max_lr - self.base_lr) * (1.0 - x).max(0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub seed: u64,
    /// Loss before each update.
    pub losses: Vec<f64>,
    /// Loss of the returned parameters.
    pub final_loss: f64,
    pub wall_time: Duration,
    pub selected: bool,
    pub aborted: Option<String>,
}

struct ElementData {
    snapshot: usize,
    element: usize,
    k: [f64; 3],
    dk: [Matrix2<f64>; 3],
}

/// Kinematics of every element in every snapshot, fixed for training.
pub struct TrainingProblem<'a> {
    dataset: &'a SpecimenDataset,
    elements: Vec<ElementData>,
    reaction_weight: f64,
}

impl<'a> TrainingProblem<'a> {
    pub fn new(dataset: &'a SpecimenDataset, reaction_weight: f64) -> Result<Self> {
        dataset.validate()?;
        let mesh = &dataset.mesh;
        let n_el = mesh.n_elements();
        let elements = (0..dataset.snapshots.len() * n_el)
            .into_par_iter()
            .map(|idx| {
                let (t, e) = (idx / n_el, idx % n_el);
                let f = element_deformation_gradient(mesh, &dataset.snapshots[t].u, e);
                let (k, dk) = plane_k_derivatives(&f).map_err(|source| Error::Snapshot {
                    snapshot: t,
                    source: Box::new(Error::Element {
                        element: e,
                        source: Box::new(source),
                    }),
                })?;
                Ok(ElementData {
                    snapshot: t,
                    element: e,
                    k,
                    dk,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainingProblem {
            dataset,
            elements,
            reaction_weight,
        })
    }

    fn forces(&self, model: &IckanModel) -> Result<Vec<Vec<f64>>> {
        let per_element = self
            .elements
            .par_iter()
            .map(|el| {
                let (_, g) = model.forward_with_gradient(&el.k).map_err(|source| Error::Snapshot {
                    snapshot: el.snapshot,
                    source: Box::new(Error::Element {
                        element: el.element,
                        source: Box::new(source),
                    }),
                })?;
                let p = el.dk[0] * g[0] + el.dk[1] * g[1] + el.dk[2] * g[2];
                Ok(element_forces(&self.dataset.mesh, el.element, &p))
            })
            .collect::<Result<Vec<_>>>()?;
        let mesh = &self.dataset.mesh;
        let mut f = vec![vec![0.0; mesh.n_dofs()]; self.dataset.snapshots.len()];
        for (el, fe) in self.elements.iter().zip(&per_element) {
            let tri = mesh.triangles()[el.element];
            let ft = &mut f[el.snapshot];
            for a in 0..3 {
                ft[2 * tri[a]] += fe[2 * a];
                ft[2 * tri[a] + 1] += fe[2 * a + 1];
            }
        }
        Ok(f)
    }

    /// Loss and its adjoint with respect to the nodal forces.
    fn loss_with_adjoint(&self, forces: &[Vec<f64>]) -> (f64, Vec<Vec<f64>>) {
        let part = &self.dataset.partition;
        let mut loss = 0.0;
        let mut adjoint = Vec::with_capacity(forces.len());
        for (snap, f) in self.dataset.snapshots.iter().zip(forces) {
            let mut fbar = vec![0.0; f.len()];
            for &d in part.free() {
                loss += f[d] * f[d];
                fbar[d] = 2.0 * f[d];
            }
            for (g, &r) in part.groups().iter().zip(&snap.reactions) {
                let gap = r - g.dofs.iter().map(|&d| f[d]).sum::<f64>();
                loss += self.reaction_weight * gap * gap;
                for &d in &g.dofs {
                    fbar[d] = -2.0 * self.reaction_weight * gap;
                }
            }
            adjoint.push(fbar);
        }
        (loss, adjoint)
    }

    pub fn loss(&self, model: &IckanModel) -> Result<f64> {
        Ok(self.loss_with_adjoint(&self.forces(model)?).0)
    }

    pub fn loss_and_gradient(&self, model: &IckanModel) -> Result<(f64, ParameterGradient)> {
        let forces = self.forces(model)?;
        let (loss, adjoint) = self.loss_with_adjoint(&forces);
        let mesh = &self.dataset.mesh;
        let partials = self
            .elements
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = GradientAccumulator::new(model);
                for el in chunk {
                    let tri = mesh.triangles()[el.element];
                    let g = mesh.grads(el.element);
                    let fbar = &adjoint[el.snapshot];
                    let mut pbar = Matrix2::zeros();
                    for a in 0..3 {
                        for i in 0..2 {
                            let fb = fbar[2 * tri[a] + i];
                            pbar[(i, 0)] += fb * g[a][0];
                            pbar[(i, 1)] += fb * g[a][1];
                        }
                    }
                    pbar *= mesh.area(el.element);
                    let s = [
                        pbar.dot(&el.dk[0]),
                        pbar.dot(&el.dk[1]),
                        pbar.dot(&el.dk[2]),
                    ];
                    model.accumulate(&el.k, 0.0, &s, 1.0, &mut acc)?;
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut total = GradientAccumulator::new(model);
        for p in &partials {
            total.merge(p);
        }
        Ok((loss, total.finish(model)))
    }
}

/// Loss evaluated through the finite element force assembly with the
/// network as material model.
pub fn loss(model: &IckanModel, dataset: &SpecimenDataset) -> Result<f64> {
    let material = MaterialModel::ickan(model.clone())?;
    let part = &dataset.partition;
    let mut total = 0.0;
    for (t, snap) in dataset.snapshots.iter().enumerate() {
        let f = nodal_forces(&dataset.mesh, &snap.u, &material).map_err(|e| Error::Snapshot {
            snapshot: t,
            source: Box::new(e),
        })?;
        total += part.free().iter().map(|&d| f[d] * f[d]).sum::<f64>();
        for (g, &r) in part.groups().iter().zip(&snap.reactions) {
            let gap = r - g.dofs.iter().map(|&d| f[d]).sum::<f64>();
            total += gap * gap;
        }
    }
    Ok(total)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, cfg: &TrainConfig, lr: f64, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + cfg.epsilon);
        }
    }
}

/// Freshly initialized model for one seed.
pub fn initial_model(arch: &Architecture, seed: u64) -> Result<IckanModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = IckanModel::random(arch, &mut rng)?;
    model.grid_initialize()?;
    Ok(model)
}

/// Trains one model from `initial`.
pub fn train_from(
    cfg: &TrainConfig,
    problem: &TrainingProblem,
    mut model: IckanModel,
) -> Result<(IckanModel, TrainReport)> {
    cfg.validate()?;
    let start = Instant::now();
    let mut params = model.parameters();
    let mut adam = Adam::new(params.len());
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (loss, grad) = problem
            .loss_and_gradient(&model)
            .map_err(|e| Error::Training {
                epoch,
                reason: e.to_string(),
            })?;
        let flat = grad.flatten();
        if !loss.is_finite() || flat.iter().any(|g| !g.is_finite()) {
            return Err(Error::Training {
                epoch,
                reason: format!("non-finite loss or gradient (loss = {loss})"),
            });
        }
        losses.push(loss);
        adam.step(cfg, cfg.learning_rate(epoch), &mut params, &flat);
        model.set_parameters(&params)?;
    }
    let final_loss = problem.loss(&model).map_err(|e| Error::Training {
        epoch: cfg.epochs,
        reason: e.to_string(),
    })?;
    if !final_loss.is_finite() {
        return Err(Error::Training {
            epoch: cfg.epochs,
            reason: "non-finite final loss".into(),
        });
    }
    Ok((
        model,
        TrainReport {
            seed: 0,
            losses,
            final_loss,
            wall_time: start.elapsed(),
            selected: false,
            aborted: None,
        },
    ))
}

/// Trains one model seeded with `cfg.seed`.
pub fn train(cfg: &TrainConfig, dataset: &SpecimenDataset) -> Result<(IckanModel, TrainReport)> {
    cfg.validate()?;
    let problem = TrainingProblem::new(dataset, cfg.reaction_weight)?;
    let (model, mut report) = train_from(cfg, &problem, initial_model(&cfg.architecture, cfg.seed)?)?;
    report.seed = cfg.seed;
    report.selected = true;
    Ok((model, report))
}

/// Trains `ensemble_size` members with seeds `seed, seed + 1, ...` and
/// returns the member with the lowest final loss.
pub fn train_ensemble(
    cfg: &TrainConfig,
    dataset: &SpecimenDataset,
) -> Result<(IckanModel, Vec<TrainReport>)> {
    cfg.validate()?;
    let problem = TrainingProblem::new(dataset, cfg.reaction_weight)?;
    let runs: Vec<(u64, Result<(IckanModel, TrainReport)>)> = (0..cfg.ensemble_size as u64)
        .into_par_iter()
        .map(|m| {
            let seed = cfg.seed.wrapping_add(m);
            let run = initial_model(&cfg.architecture, seed)
                .and_then(|init| train_from(cfg, &problem, init));
            (seed, run)
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    let mut reports = Vec::with_capacity(runs.len());
    let mut models = Vec::with_capacity(runs.len());
    let mut last_error = None;
    for (i, (seed, run)) in runs.into_iter().enumerate() {
        match run {
            Ok((model, mut report)) => {
                report.seed = seed;
                if best.is_none_or(|(_, l)| report.final_loss < l) {
                    best = Some((i, report.final_loss));
                }
                reports.push(report);
                models.push(Some(model));
            }
            Err(e) => {
                reports.push(TrainReport {
                    seed,
                    losses: Vec::new(),
                    final_loss: f64::INFINITY,
                    wall_time: Duration::ZERO,
                    selected: false,
                    aborted: Some(e.to_string()),
                });
                models.push(None);
                last_error = Some(e);
            }
        }
    }
    let (idx, _) = best.ok_or_else(|| last_error.expect("every member failed with an error"))?;
    reports[idx].selected = true;
    let model = models[idx].take().expect("selected member has a model");
    Ok((model, reports))
}
