//! Layered Kolmogorov–Arnold network with spline activations.
//!
//! Layer `r` maps `z` of width `n_r` to width `n_{r+1}` by
//! `z'_i = sum_j phi_{r,i,j}(z_j)`. In constrained mode every activation is
//! `softplus(w_s) * psi(x)` with a monotone-convex spline `psi`, which makes
//! the network output convex and non-decreasing in each input. Vanilla mode
//! uses `w_b * silu(x) + w_s * psi(x)` with free control points.
//!
//! Parameter gradients are accumulated in reverse over the fixed layer
//! structure. Besides the plain value seed, the reverse pass accepts a seed
//! on a directional input derivative, which is what the force-residual loss
//! needs (stresses are input gradients of the energy).

use std::fmt::Write as _;

use rand::Rng;

use crate::bspline::{ControlSensitivity, KnotVector, Parameterization, Spline};
use crate::error::{Error, Result};

/// Input range used for grid initialization of the first layer.
pub const GRID_INIT_RANGE: (f64, f64) = (-5.0, 25.0);
/// Number of dummy samples propagated during grid initialization.
pub const GRID_INIT_SAMPLES: usize = 100;
/// Minimum width of a spline domain after grid initialization.
pub const MIN_DOMAIN_WIDTH: f64 = 1e-6;

const CHECKPOINT_HEADER: &str = "ickan-checkpoint v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Constrained,
    Vanilla,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Constrained => "constrained",
            Mode::Vanilla => "vanilla",
        }
    }
}

/// Network shape and spline resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct Architecture {
    pub dims: Vec<usize>,
    pub order: usize,
    pub n_basis: usize,
    pub mode: Mode,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            dims: vec![3, 2, 1],
            order: 5,
            n_basis: 17,
            mode: Mode::Constrained,
        }
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.dims.len() < 2 {
            return Err(Error::config("network needs at least one layer"));
        }
        if self.dims[0] != 3 {
            return Err(Error::config("network input must be 3-dimensional"));
        }
        if *self.dims.last().unwrap() != 1 {
            return Err(Error::config("network output must be scalar"));
        }
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::config("layer widths must be positive"));
        }
        // Surfaces order/n_basis problems early.
        KnotVector::uniform(0.0, 1.0, self.order, self.n_basis)?;
        if self.mode == Mode::Constrained && self.n_basis < 3 {
            return Err(Error::config("constrained splines need at least 3 control points"));
        }
        Ok(())
    }
}

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// SiLU and its first two derivatives.
fn silu(x: f64) -> (f64, f64, f64) {
    let s = sigmoid(x);
    let ds = s * (1.0 - s);
    (x * s, s + x * ds, ds * (2.0 + x * (1.0 - 2.0 * s)))
}

/// One edge function `phi`.
#[derive(Clone, Debug, PartialEq)]
pub struct Activation {
    pub spline: Spline,
    pub w_s: f64,
    pub w_b: f64,
    pub mode: Mode,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActivationValue {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Activation {
    pub fn eval(&self, x: f64) -> ActivationValue {
        let s = self.spline.eval(x);
        match self.mode {
            Mode::Constrained => {
                let g = softplus(self.w_s);
                ActivationValue {
                    value: g * s.value,
                    d1: g * s.d1,
                    d2: g * s.d2,
                }
            }
            Mode::Vanilla => {
                let (b, db, ddb) = silu(x);
                ActivationValue {
                    value: self.w_b * b + self.w_s * s.value,
                    d1: self.w_b * db + self.w_s * s.d1,
                    d2: self.w_b * ddb + self.w_s * s.d2,
                }
            }
        }
    }

    /// Effective multiplier applied to the spline.
    pub fn spline_scale(&self) -> f64 {
        match self.mode {
            Mode::Constrained => softplus(self.w_s),
            Mode::Vanilla => self.w_s,
        }
    }

    fn n_params(&self) -> usize {
        self.spline.raw().len() + if self.mode == Mode::Vanilla { 2 } else { 1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    /// Row-major: activation `(i, j)` maps input `j` to output `i`.
    pub acts: Vec<Activation>,
}

impl Layer {
    pub fn act(&self, i: usize, j: usize) -> &Activation {
        &self.acts[i * self.n_in + j]
    }

    pub fn act_mut(&mut self, i: usize, j: usize) -> &mut Activation {
        &mut self.acts[i * self.n_in + j]
    }

    fn apply(&self, z: &[f64]) -> Vec<f64> {
        (0..self.n_out)
            .map(|i| (0..self.n_in).map(|j| self.act(i, j).eval(z[j]).value).sum())
            .collect()
    }
}

/// Gradient of one activation's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationGradient {
    pub raw: Vec<f64>,
    pub w_s: f64,
    pub w_b: f64,
}

/// Parameter gradient laid out like the model.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterGradient {
    pub layers: Vec<Vec<ActivationGradient>>,
    mode: Mode,
}

impl ParameterGradient {
    pub fn zeros_like(model: &IckanModel) -> Self {
        ParameterGradient {
            layers: model
                .layers
                .iter()
                .map(|l| {
                    l.acts
                        .iter()
                        .map(|a| ActivationGradient {
                            raw: vec![0.0; a.spline.raw().len()],
                            w_s: 0.0,
                            w_b: 0.0,
                        })
                        .collect()
                })
                .collect(),
            mode: model.mode,
        }
    }

    /// Same ordering as [`IckanModel::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            for a in layer {
                out.extend_from_slice(&a.raw);
                out.push(a.w_s);
                if self.mode == Mode::Vanilla {
                    out.push(a.w_b);
                }
            }
        }
        out
    }

    pub fn add_assign(&mut self, other: &ParameterGradient) {
        for (la, lb) in self.layers.iter_mut().zip(&other.layers) {
            for (a, b) in la.iter_mut().zip(lb) {
                for (x, y) in a.raw.iter_mut().zip(&b.raw) {
                    *x += y;
                }
                a.w_s += b.w_s;
                a.w_b += b.w_b;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.is_finite())
    }
}

/// Reverse-pass accumulator in control-point space. The map from raw
/// parameters to control points is applied once at the end.
#[derive(Clone, Debug)]
pub struct GradientAccumulator {
    layers: Vec<Vec<ActivationGradient>>,
}

impl GradientAccumulator {
    pub fn new(model: &IckanModel) -> Self {
        GradientAccumulator {
            layers: ParameterGradient::zeros_like(model).layers,
        }
    }

    pub fn merge(&mut self, other: &GradientAccumulator) {
        for (la, lb) in self.layers.iter_mut().zip(&other.layers) {
            for (a, b) in la.iter_mut().zip(lb) {
                for (x, y) in a.raw.iter_mut().zip(&b.raw) {
                    *x += y;
                }
                a.w_s += b.w_s;
                a.w_b += b.w_b;
            }
        }
    }

    pub fn finish(self, model: &IckanModel) -> ParameterGradient {
        let layers = self
            .layers
            .into_iter()
            .zip(&model.layers)
            .map(|(grads, layer)| {
                grads
                    .into_iter()
                    .zip(&layer.acts)
                    .map(|(g, act)| ActivationGradient {
                        raw: act.spline.raw_gradient(&g.raw),
                        w_s: g.w_s,
                        w_b: g.w_b,
                    })
                    .collect()
            })
            .collect();
        ParameterGradient {
            layers,
            mode: model.mode,
        }
    }
}

struct EdgeEval {
    d1: f64,
    d2: f64,
    psi: f64,
    psi_d1: f64,
    silu: (f64, f64),
    sens: ControlSensitivity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IckanModel {
    pub layers: Vec<Layer>,
    pub mode: Mode,
    order: usize,
    n_basis: usize,
}

impl IckanModel {
    /// Randomly initialized model with the grid-initialization first-layer
    /// domain on every spline; call [`IckanModel::grid_initialize`] before use.
    ///
    /// Raw control parameters are drawn from U(-0.1, 0.1). In constrained mode
    /// `w_s = ln(e - 1)` so the initial scale `softplus(w_s)` is 1; in vanilla
    /// mode `w_s = 1` and `w_b ~ U(-0.1, 0.1)`.
    pub fn random<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Result<Self> {
        Self::build(arch, |_| {
            let raw: Vec<f64> = (0..arch.n_basis).map(|_| rng.random_range(-0.1..0.1)).collect();
            let w_b = if arch.mode == Mode::Vanilla {
                rng.random_range(-0.1..0.1)
            } else {
                0.0
            };
            (raw, w_b)
        })
    }

    /// Model with all raw parameters set to zero (flat splines).
    pub fn flat(arch: &Architecture) -> Result<Self> {
        Self::build(arch, |_| (vec![0.0; arch.n_basis], 0.0))
    }

    fn build(
        arch: &Architecture,
        mut init: impl FnMut(usize) -> (Vec<f64>, f64),
    ) -> Result<Self> {
        arch.validate()?;
        let param = match arch.mode {
            Mode::Constrained => Parameterization::MonotoneConvex,
            Mode::Vanilla => Parameterization::Free,
        };
        let w_s = match arch.mode {
            Mode::Constrained => (std::f64::consts::E - 1.0).ln(),
            Mode::Vanilla => 1.0,
        };
        let (lo, hi) = GRID_INIT_RANGE;
        let mut layers = Vec::with_capacity(arch.dims.len() - 1);
        let mut counter = 0;
        for w in arch.dims.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let mut acts = Vec::with_capacity(n_in * n_out);
            for _ in 0..n_in * n_out {
                let (raw, w_b) = init(counter);
                counter += 1;
                let knots = KnotVector::uniform(lo, hi, arch.order, arch.n_basis)?;
                acts.push(Activation {
                    spline: Spline::new(knots, raw, param)?,
                    w_s,
                    w_b,
                    mode: arch.mode,
                });
            }
            layers.push(Layer { n_in, n_out, acts });
        }
        Ok(IckanModel {
            layers,
            mode: arch.mode,
            order: arch.order,
            n_basis: arch.n_basis,
        })
    }

    pub fn architecture(&self) -> Architecture {
        let mut dims: Vec<usize> = self.layers.iter().map(|l| l.n_in).collect();
        dims.push(self.layers.last().map_or(0, |l| l.n_out));
        Architecture {
            dims,
            order: self.order,
            n_basis: self.n_basis,
            mode: self.mode,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Sets spline domains layer by layer from propagated dummy inputs.
    ///
    /// First-layer splines get `[-5, 25]`. Each later layer gets, per input
    /// dimension, the observed range of the previous layer's output over 100
    /// uniformly spaced dummy inputs. Zero-width ranges are widened
    /// symmetrically to [`MIN_DOMAIN_WIDTH`].
    pub fn grid_initialize(&mut self) -> Result<()> {
        let (lo, hi) = GRID_INIT_RANGE;
        let n0 = self.layers[0].n_in;
        let mut samples: Vec<Vec<f64>> = (0..GRID_INIT_SAMPLES)
            .map(|s| {
                let t = lo + (hi - lo) * s as f64 / (GRID_INIT_SAMPLES - 1) as f64;
                vec![t; n0]
            })
            .collect();
        for r in 0..self.layers.len() {
            let n_in = self.layers[r].n_in;
            for j in 0..n_in {
                let (dlo, dhi) = if r == 0 {
                    (lo, hi)
                } else {
                    let (mn, mx) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), z| {
                        (a.min(z[j]), b.max(z[j]))
                    });
                    widen(mn, mx)?
                };
                for i in 0..self.layers[r].n_out {
                    self.layers[r].act_mut(i, j).spline.set_domain(dlo, dhi)?;
                }
            }
            samples = samples.iter().map(|z| self.layers[r].apply(z)).collect();
        }
        Ok(())
    }

    fn check_input(k: &[f64; 3]) -> Result<()> {
        if k.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Evaluation(format!("non-finite network input {k:?}")))
        }
    }

    pub fn forward(&self, k: &[f64; 3]) -> Result<f64> {
        Self::check_input(k)?;
        let mut z = k.to_vec();
        for layer in &self.layers {
            z = layer.apply(&z);
        }
        Ok(z[0])
    }

    /// Output and its gradient with respect to the inputs.
    pub fn forward_with_gradient(&self, k: &[f64; 3]) -> Result<(f64, [f64; 3])> {
        Self::check_input(k)?;
        if self.order < 2 {
            return Err(Error::config("input gradients need spline order >= 2"));
        }
        let mut z = k.to_vec();
        let mut jac: Vec<[f64; 3]> = (0..3)
            .map(|m| {
                let mut e = [0.0; 3];
                e[m] = 1.0;
                e
            })
            .collect();
        for layer in &self.layers {
            let mut nz = vec![0.0; layer.n_out];
            let mut nj = vec![[0.0; 3]; layer.n_out];
            for i in 0..layer.n_out {
                for j in 0..layer.n_in {
                    let a = layer.act(i, j).eval(z[j]);
                    nz[i] += a.value;
                    for m in 0..3 {
                        nj[i][m] += a.d1 * jac[j][m];
                    }
                }
            }
            z = nz;
            jac = nj;
        }
        Ok((z[0], jac[0]))
    }

    /// Output, input gradient and input Hessian.
    pub fn forward_with_input_derivatives(
        &self,
        k: &[f64; 3],
    ) -> Result<(f64, [f64; 3], [[f64; 3]; 3])> {
        Self::check_input(k)?;
        if self.order < 3 {
            return Err(Error::config("input Hessians need spline order >= 3"));
        }
        let mut z = k.to_vec();
        let mut jac: Vec<[f64; 3]> = (0..3)
            .map(|m| {
                let mut e = [0.0; 3];
                e[m] = 1.0;
                e
            })
            .collect();
        let mut hess: Vec<[[f64; 3]; 3]> = vec![[[0.0; 3]; 3]; 3];
        for layer in &self.layers {
            let mut nz = vec![0.0; layer.n_out];
            let mut nj = vec![[0.0; 3]; layer.n_out];
            let mut nh = vec![[[0.0; 3]; 3]; layer.n_out];
            for i in 0..layer.n_out {
                for j in 0..layer.n_in {
                    let a = layer.act(i, j).eval(z[j]);
                    nz[i] += a.value;
                    for m in 0..3 {
                        nj[i][m] += a.d1 * jac[j][m];
                        for n in 0..3 {
                            nh[i][m][n] += a.d2 * jac[j][m] * jac[j][n] + a.d1 * hess[j][m][n];
                        }
                    }
                }
            }
            z = nz;
            jac = nj;
            hess = nh;
        }
        Ok((z[0], jac[0], hess[0]))
    }

    /// `d(seed * W) / dQ`.
    pub fn backward(&self, k: &[f64; 3], seed: f64) -> Result<ParameterGradient> {
        let mut acc = GradientAccumulator::new(self);
        self.accumulate(k, seed, &[0.0; 3], 0.0, &mut acc)?;
        Ok(acc.finish(self))
    }

    /// `d(seed * (grad_K W . direction)) / dQ`.
    pub fn backward_directional(
        &self,
        k: &[f64; 3],
        direction: &[f64; 3],
        seed: f64,
    ) -> Result<ParameterGradient> {
        let mut acc = GradientAccumulator::new(self);
        self.accumulate(k, 0.0, direction, seed, &mut acc)?;
        Ok(acc.finish(self))
    }

    /// Adds `d(value_seed * W + slope_seed * (grad_K W . direction)) / dQ`
    /// to `acc` in control-point space.
    pub fn accumulate(
        &self,
        k: &[f64; 3],
        value_seed: f64,
        direction: &[f64; 3],
        slope_seed: f64,
        acc: &mut GradientAccumulator,
    ) -> Result<()> {
        Self::check_input(k)?;
        // Forward with one tangent direction, keeping every edge evaluation.
        let mut zs: Vec<Vec<f64>> = vec![k.to_vec()];
        let mut dzs: Vec<Vec<f64>> = vec![direction.to_vec()];
        let mut evals: Vec<Vec<EdgeEval>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let z = zs.last().unwrap();
            let dz = dzs.last().unwrap();
            let mut nz = vec![0.0; layer.n_out];
            let mut ndz = vec![0.0; layer.n_out];
            let mut le = Vec::with_capacity(layer.acts.len());
            for i in 0..layer.n_out {
                for j in 0..layer.n_in {
                    let act = layer.act(i, j);
                    let (s, sens) = act.spline.eval_with_sensitivity(z[j]);
                    let (value, d1, d2, sl) = match act.mode {
                        Mode::Constrained => {
                            let g = softplus(act.w_s);
                            (g * s.value, g * s.d1, g * s.d2, (0.0, 0.0))
                        }
                        Mode::Vanilla => {
                            let (b, db, ddb) = silu(z[j]);
                            (
                                act.w_b * b + act.w_s * s.value,
                                act.w_b * db + act.w_s * s.d1,
                                act.w_b * ddb + act.w_s * s.d2,
                                (b, db),
                            )
                        }
                    };
                    nz[i] += value;
                    ndz[i] += d1 * dz[j];
                    le.push(EdgeEval {
                        d1,
                        d2,
                        psi: s.value,
                        psi_d1: s.d1,
                        silu: sl,
                        sens,
                    });
                }
            }
            zs.push(nz);
            dzs.push(ndz);
            evals.push(le);
        }
        if !zs.last().unwrap()[0].is_finite() {
            return Err(Error::Evaluation("non-finite network output".into()));
        }

        let mut bar = vec![value_seed];
        let mut dbar = vec![slope_seed];
        for (r, layer) in self.layers.iter().enumerate().rev() {
            let dz = &dzs[r];
            let mut in_bar = vec![0.0; layer.n_in];
            let mut in_dbar = vec![0.0; layer.n_in];
            let grads = &mut acc.layers[r];
            for i in 0..layer.n_out {
                let (yb, ydb) = (bar[i], dbar[i]);
                if yb == 0.0 && ydb == 0.0 {
                    continue;
                }
                for j in 0..layer.n_in {
                    let idx = i * layer.n_in + j;
                    let e = &evals[r][idx];
                    let act = &layer.acts[idx];
                    in_bar[j] += yb * e.d1 + ydb * e.d2 * dz[j];
                    in_dbar[j] += ydb * e.d1;
                    // d(phi)/d(c) = scale * B, d(phi')/d(c) = scale * B'
                    let scale = act.spline_scale();
                    let wv = yb * scale;
                    let wd = ydb * dz[j] * scale;
                    let g = &mut grads[idx];
                    let sens = &e.sens;
                    for q in 0..sens.len {
                        g.raw[sens.first + q] += wv * sens.value[q] + wd * sens.d1[q];
                    }
                    match act.mode {
                        Mode::Constrained => {
                            let ds = sigmoid(act.w_s);
                            g.w_s += ds * (yb * e.psi + ydb * dz[j] * e.psi_d1);
                        }
                        Mode::Vanilla => {
                            g.w_s += yb * e.psi + ydb * dz[j] * e.psi_d1;
                            g.w_b += yb * e.silu.0 + ydb * dz[j] * e.silu.1;
                        }
                    }
                }
            }
            bar = in_bar;
            dbar = in_dbar;
        }
        Ok(())
    }

    /// Flat parameter vector: per activation (row-major within each layer)
    /// the raw spline parameters, then `w_s`, then `w_b` in vanilla mode.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            for a in &layer.acts {
                out.extend_from_slice(a.spline.raw());
                out.push(a.w_s);
                if self.mode == Mode::Vanilla {
                    out.push(a.w_b);
                }
            }
        }
        out
    }

    pub fn n_parameters(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.acts.iter())
            .map(Activation::n_params)
            .sum()
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_parameters() {
            return Err(Error::Argument(format!(
                "expected {} parameters, got {}",
                self.n_parameters(),
                params.len()
            )));
        }
        let mut pos = 0;
        let vanilla = self.mode == Mode::Vanilla;
        for layer in &mut self.layers {
            for a in &mut layer.acts {
                let n = a.spline.raw().len();
                a.spline.set_raw(&params[pos..pos + n]);
                pos += n;
                a.w_s = params[pos];
                pos += 1;
                if vanilla {
                    a.w_b = params[pos];
                    pos += 1;
                }
            }
        }
        Ok(())
    }

    /// Self-describing text checkpoint. Reals use 17 significant digits.
    pub fn to_checkpoint(&self) -> String {
        let mut s = String::new();
        let arch = self.architecture();
        writeln!(s, "{CHECKPOINT_HEADER}").unwrap();
        writeln!(s, "mode {}", self.mode.name()).unwrap();
        let dims: Vec<String> = arch.dims.iter().map(|d| d.to_string()).collect();
        writeln!(s, "dims {}", dims.join(" ")).unwrap();
        writeln!(s, "order {}", self.order).unwrap();
        writeln!(s, "basis {}", self.n_basis).unwrap();
        for (r, layer) in self.layers.iter().enumerate() {
            for i in 0..layer.n_out {
                for j in 0..layer.n_in {
                    let a = layer.act(i, j);
                    let (lo, hi) = a.spline.domain();
                    writeln!(s, "activation {r} {i} {j}").unwrap();
                    writeln!(s, "domain {} {}", fmt17(lo), fmt17(hi)).unwrap();
                    writeln!(s, "w_s {}", fmt17(a.w_s)).unwrap();
                    writeln!(s, "w_b {}", fmt17(a.w_b)).unwrap();
                    let raw: Vec<String> = a.spline.raw().iter().map(|&v| fmt17(v)).collect();
                    writeln!(s, "raw {}", raw.join(" ")).unwrap();
                }
            }
        }
        s
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (n, header) = lines.next().ok_or_else(|| Error::parse(1, "empty checkpoint"))?;
        if header != CHECKPOINT_HEADER {
            return Err(Error::parse(n, format!("unexpected header {header:?}")));
        }
        let mut field = |key: &str| -> Result<(usize, Vec<String>)> {
            let (n, line) = lines
                .next()
                .ok_or_else(|| Error::parse(0, format!("missing `{key}` line")))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(key) {
                return Err(Error::parse(n, format!("expected `{key}`")));
            }
            Ok((n, parts.map(str::to_string).collect()))
        };
        let (n, mode) = field("mode")?;
        let mode = match mode.first().map(String::as_str) {
            Some("constrained") => Mode::Constrained,
            Some("vanilla") => Mode::Vanilla,
            _ => return Err(Error::parse(n, "unknown mode")),
        };
        let (n, dims) = field("dims")?;
        let dims = parse_all::<usize>(n, &dims)?;
        let (n, order) = field("order")?;
        let order = parse_one::<usize>(n, &order)?;
        let (n, basis) = field("basis")?;
        let n_basis = parse_one::<usize>(n, &basis)?;
        let arch = Architecture {
            dims,
            order,
            n_basis,
            mode,
        };
        let mut model = IckanModel::flat(&arch)?;
        for r in 0..model.layers.len() {
            let (n_in, n_out) = (model.layers[r].n_in, model.layers[r].n_out);
            for i in 0..n_out {
                for j in 0..n_in {
                    let (n, idx) = field("activation")?;
                    if parse_all::<usize>(n, &idx)? != vec![r, i, j] {
                        return Err(Error::parse(n, format!("expected activation {r} {i} {j}")));
                    }
                    let (n, dom) = field("domain")?;
                    let dom = parse_all::<f64>(n, &dom)?;
                    if dom.len() != 2 {
                        return Err(Error::parse(n, "domain needs two values"));
                    }
                    let (n, ws) = field("w_s")?;
                    let w_s = parse_one::<f64>(n, &ws)?;
                    let (n, wb) = field("w_b")?;
                    let w_b = parse_one::<f64>(n, &wb)?;
                    let (n, raw) = field("raw")?;
                    let raw = parse_all::<f64>(n, &raw)?;
                    if raw.len() != n_basis {
                        return Err(Error::parse(n, "wrong number of raw parameters"));
                    }
                    let act = model.layers[r].act_mut(i, j);
                    act.spline
                        .set_domain(dom[0], dom[1])
                        .map_err(|e| Error::parse(n, e.to_string()))?;
                    act.spline.set_raw(&raw);
                    act.w_s = w_s;
                    act.w_b = w_b;
                }
            }
        }
        Ok(model)
    }
}

fn widen(mn: f64, mx: f64) -> Result<(f64, f64)> {
    if !(mn.is_finite() && mx.is_finite()) {
        return Err(Error::Evaluation("non-finite range during grid initialization".into()));
    }
    if mx - mn < MIN_DOMAIN_WIDTH {
        let mid = 0.5 * (mn + mx);
        Ok((mid - 0.5 * MIN_DOMAIN_WIDTH, mid + 0.5 * MIN_DOMAIN_WIDTH))
    } else {
        Ok((mn, mx))
    }
}

pub(crate) fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_one<T: std::str::FromStr>(line: usize, parts: &[String]) -> Result<T> {
    match parts {
        [one] => one
            .parse()
            .map_err(|_| Error::parse(line, format!("cannot parse {one:?}"))),
        _ => Err(Error::parse(line, "expected exactly one value")),
    }
}

fn parse_all<T: std::str::FromStr>(line: usize, parts: &[String]) -> Result<Vec<T>> {
    parts
        .iter()
        .map(|p| {
            p.parse()
                .map_err(|_| Error::parse(line, format!("cannot parse {p:?}")))
        })
        .collect()
}
