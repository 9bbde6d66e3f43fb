//! Closed-form distillation of trained networks.
//!
//! Every activation is replaced by `c * f(a * x + b) + d` with `f` drawn from
//! a small library of convex non-decreasing functions and `a, c >= 0`, so the
//! assembled expression stays convex and non-decreasing in each input.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::jet::Jet3;
use crate::network::{fmt17, softplus, Activation, IckanModel, Mode};

pub const FIT_SAMPLES: usize = 100;
pub const GRID_POINTS: usize = 21;
pub const GRID_ROUNDS: usize = 3;
pub const GRID_SHRINK: f64 = 5.0;
pub const A_RANGE: (f64, f64) = (0.0, 10.0);
pub const B_RANGE: (f64, f64) = (-10.0, 10.0);
pub const LAMBDA_SYM: f64 = 0.8;
pub const PARITY_SAMPLES: usize = 1000;

const TREE_HEADER: &str = "ickan-expression v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Candidate {
    Identity,
    Exp,
    /// `softplus(x)^n` for `n` in `1..=4`.
    Softplus(u8),
}

/// Library order, which also breaks ties.
pub const LIBRARY: [Candidate; 6] = [
    Candidate::Identity,
    Candidate::Exp,
    Candidate::Softplus(1),
    Candidate::Softplus(2),
    Candidate::Softplus(3),
    Candidate::Softplus(4),
];

impl Candidate {
    pub fn complexity(self) -> u32 {
        match self {
            Candidate::Identity => 1,
            _ => 2,
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Candidate::Identity => x,
            Candidate::Exp => x.exp(),
            Candidate::Softplus(n) => softplus(x).powi(n as i32),
        }
    }

    pub fn jet(self, x: Jet3) -> Jet3 {
        match self {
            Candidate::Identity => x,
            Candidate::Exp => x.exp(),
            Candidate::Softplus(1) => x.softplus(),
            Candidate::Softplus(n) => x.softplus().powi(n as i32),
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Candidate::Identity => "id",
            Candidate::Exp => "exp",
            Candidate::Softplus(1) => "softplus",
            Candidate::Softplus(2) => "softplus^2",
            Candidate::Softplus(3) => "softplus^3",
            Candidate::Softplus(_) => "softplus^4",
        }
    }

    pub fn from_token(tok: &str) -> Option<Self> {
        LIBRARY.iter().copied().find(|c| c.token() == tok)
    }
}

/// `c * f(a * x + b) + d` together with its coefficient of determination.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FittedActivation {
    pub candidate: Candidate,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub r2: f64,
}

impl FittedActivation {
    pub fn eval(&self, x: f64) -> f64 {
        self.c * self.candidate.eval(self.a * x + self.b) + self.d
    }

    pub fn score(&self, lambda: f64) -> f64 {
        lambda * self.candidate.complexity() as f64
            + (1.0 - lambda) * (1.0 + 1e-5 - self.r2).log2()
    }
}

fn r_squared(ys: &[f64], sse: f64) -> f64 {
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let sst: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    if sst <= 1e-12 {
        return if sse < 1e-12 { 1.0 } else { 0.0 };
    }
    (1.0 - sse / sst).min(1.0)
}

/// Least squares for `y ~ c * u + d` with `c >= 0`; returns `(c, d, sse)`.
fn fit_affine(us: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let n = ys.len() as f64;
    let (mut su, mut suu, mut sy, mut suy) = (0.0, 0.0, 0.0, 0.0);
    for (&u, &y) in us.iter().zip(ys) {
        su += u;
        suu += u * u;
        sy += y;
        suy += u * y;
    }
    if !(su.is_finite() && suu.is_finite() && suy.is_finite()) {
        return None;
    }
    let mean_y = sy / n;
    let mean_u = su / n;
    let var_u: f64 = us.iter().map(|u| (u - mean_u).powi(2)).sum();
    let (mut c, mut d) = (0.0, mean_y);
    if var_u > 1e-14 * suu.max(f64::MIN_POSITIVE) {
        let cov: f64 = us.iter().zip(ys).map(|(u, y)| (u - mean_u) * (y - mean_y)).sum();
        let slope = cov / var_u;
        if slope > 0.0 {
            c = slope;
            d = mean_y - slope * mean_u;
        }
    }
    let sse: f64 = us.iter().zip(ys).map(|(u, y)| (c * u + d - y).powi(2)).sum();
    sse.is_finite().then_some((c, d, sse))
}

/// Fits one library member to samples `(xs, ys)`.
pub fn fit_candidate(candidate: Candidate, xs: &[f64], ys: &[f64]) -> Result<FittedActivation> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Argument("fit needs at least two paired samples".into()));
    }
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::Evaluation("non-finite activation sample".into()));
    }
    if candidate == Candidate::Identity {
        let (c, d, sse) = fit_affine(xs, ys)
            .ok_or_else(|| Error::Evaluation("non-finite linear fit".into()))?;
        return Ok(FittedActivation {
            candidate,
            a: 1.0,
            b: 0.0,
            c,
            d,
            r2: r_squared(ys, sse),
        });
    }
    let mut a_range = A_RANGE;
    let mut b_range = B_RANGE;
    let mut best: Option<(f64, f64, f64, f64, f64)> = None;
    let mut us = vec![0.0; xs.len()];
    for _ in 0..GRID_ROUNDS {
        let step = |r: (f64, f64), k: usize| r.0 + (r.1 - r.0) * k as f64 / (GRID_POINTS - 1) as f64;
        for ia in 0..GRID_POINTS {
            let a = step(a_range, ia);
            for ib in 0..GRID_POINTS {
                let b = step(b_range, ib);
                for (u, &x) in us.iter_mut().zip(xs) {
                    *u = candidate.eval(a * x + b);
                }
                if let Some((c, d, sse)) = fit_affine(&us, ys) {
                    if best.is_none_or(|bst| sse < bst.4) {
                        best = Some((a, b, c, d, sse));
                    }
                }
            }
        }
        let Some((a, b, ..)) = best else { break };
        let half_a = (a_range.1 - a_range.0) / (2.0 * GRID_SHRINK);
        let half_b = (b_range.1 - b_range.0) / (2.0 * GRID_SHRINK);
        let a_lo = (a - half_a).max(0.0);
        a_range = (a_lo, a_lo + 2.0 * half_a);
        b_range = (b - half_b, b + half_b);
    }
    let (a, b, c, d, sse) = best.ok_or_else(|| {
        Error::Evaluation(format!("no finite fit for candidate {}", candidate.token()))
    })?;
    Ok(FittedActivation {
        candidate,
        a,
        b,
        c,
        d,
        r2: r_squared(ys, sse),
    })
}

/// Lowest score wins; ties go to lower complexity, then library order.
pub fn select_candidate(fits: &[FittedActivation], lambda: f64) -> Result<FittedActivation> {
    let rank = |c: Candidate| LIBRARY.iter().position(|&l| l == c).unwrap_or(usize::MAX);
    fits.iter()
        .copied()
        .min_by(|x, y| {
            x.score(lambda)
                .total_cmp(&y.score(lambda))
                .then(x.candidate.complexity().cmp(&y.candidate.complexity()))
                .then(rank(x.candidate).cmp(&rank(y.candidate)))
        })
        .ok_or_else(|| Error::Argument("no candidate fits to select from".into()))
}

/// Uniform sample points over a domain.
pub fn sample_points(domain: (f64, f64)) -> Result<Vec<f64>> {
    let (lo, hi) = domain;
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Argument(format!("degenerate fit domain [{lo}, {hi}]")));
    }
    Ok((0..FIT_SAMPLES)
        .map(|i| lo + (hi - lo) * i as f64 / (FIT_SAMPLES - 1) as f64)
        .collect())
}

/// Fits every library member to `phi` on `domain` and selects one.
pub fn fit_activation(phi: &Activation, domain: (f64, f64), lambda: f64) -> Result<FittedActivation> {
    let xs = sample_points(domain)?;
    let ys: Vec<f64> = xs.iter().map(|&x| phi.eval(x).value).collect();
    let fits = LIBRARY
        .iter()
        .map(|&c| fit_candidate(c, &xs, &ys))
        .collect::<Result<Vec<_>>>()?;
    select_candidate(&fits, lambda)
}

/// `coef * f(inner)`, remembering which activation produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub coef: f64,
    pub func: Candidate,
    pub inner: Node,
    pub source: (usize, usize, usize),
}

/// `constant + sum_m linear[m] * K_m + sum of terms`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Node {
    pub constant: f64,
    pub linear: [f64; 3],
    pub terms: Vec<Term>,
}

impl Node {
    fn var(m: usize) -> Self {
        let mut n = Node::default();
        n.linear[m] = 1.0;
        n
    }

    fn add_scaled(&mut self, other: &Node, s: f64) {
        self.constant += s * other.constant;
        for m in 0..3 {
            self.linear[m] += s * other.linear[m];
        }
        for t in &other.terms {
            let mut t = t.clone();
            t.coef *= s;
            self.terms.push(t);
        }
    }

    pub fn eval_jet(&self, k: &[Jet3; 3]) -> Jet3 {
        let mut out = Jet3::constant(self.constant);
        for m in 0..3 {
            if self.linear[m] != 0.0 {
                out = out + k[m] * self.linear[m];
            }
        }
        for t in &self.terms {
            out = out + t.func.jet(t.inner.eval_jet(k)) * t.coef;
        }
        out
    }

    pub fn eval(&self, k: &[f64; 3]) -> f64 {
        let mut v = self.constant;
        for m in 0..3 {
            v += self.linear[m] * k[m];
        }
        for t in &self.terms {
            v += t.coef * t.func.eval(t.inner.eval(k));
        }
        v
    }

    fn infix(&self) -> String {
        let mut parts: Vec<(f64, String)> = Vec::new();
        for m in 0..3 {
            if self.linear[m] != 0.0 {
                parts.push((self.linear[m], format!("K{}", m + 1)));
            }
        }
        for t in &self.terms {
            let inner = t.inner.infix();
            let body = match t.func {
                Candidate::Identity => format!("({inner})"),
                Candidate::Exp => format!("exp({inner})"),
                Candidate::Softplus(1) => format!("softplus({inner})"),
                Candidate::Softplus(n) => format!("softplus({inner})^{n}"),
            };
            parts.push((t.coef, body));
        }
        if self.constant != 0.0 {
            parts.push((self.constant, String::new()));
        }
        if parts.is_empty() {
            return "0".into();
        }
        let mut s = String::new();
        for (idx, (coef, body)) in parts.iter().enumerate() {
            let neg = *coef < 0.0;
            match (idx, neg) {
                (0, true) => s.push('-'),
                (0, false) => {}
                (_, true) => s.push_str(" - "),
                (_, false) => s.push_str(" + "),
            }
            let mag = fmt_sig(coef.abs());
            if body.is_empty() {
                s.push_str(&mag);
            } else if coef.abs() == 1.0 {
                s.push_str(body);
            } else {
                s.push_str(&format!("{mag}*{body}"));
            }
        }
        s
    }

    fn prefix(&self, out: &mut String) {
        out.push_str(&format!(
            "(sum {} {} {} {}",
            fmt17(self.constant),
            fmt17(self.linear[0]),
            fmt17(self.linear[1]),
            fmt17(self.linear[2])
        ));
        for t in &self.terms {
            out.push_str(&format!(
                " (term {} {} {} {} {} ",
                fmt17(t.coef),
                t.func.token(),
                t.source.0,
                t.source.1,
                t.source.2
            ));
            t.inner.prefix(out);
            out.push(')');
        }
        out.push(')');
    }
}

/// Four significant digits, plain notation where readable.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let e = v.abs().log10().floor() as i32;
    if (-4..6).contains(&e) {
        let decimals = (3 - e).max(0) as usize;
        let s = format!("{v:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{v:.3e}")
    }
}

/// Assembled closed-form energy in terms of `(K1, K2, K3)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolicEnergy {
    pub root: Node,
}

impl SymbolicEnergy {
    pub fn eval(&self, k: &[f64; 3]) -> f64 {
        self.root.eval(k)
    }

    /// Value, gradient and Hessian with respect to `K`.
    pub fn eval_k(&self, k: &[f64; 3]) -> Result<Jet3> {
        let vars = [Jet3::var(k[0], 0), Jet3::var(k[1], 1), Jet3::var(k[2], 2)];
        let j = self.root.eval_jet(&vars);
        let finite = j.v.is_finite()
            && j.g.iter().all(|x| x.is_finite())
            && j.h.iter().flatten().all(|x| x.is_finite());
        if finite {
            Ok(j)
        } else {
            Err(Error::Evaluation(format!("symbolic energy not finite at K = {k:?}")))
        }
    }

    /// Slopes `dW/dK_m` at the undeformed state `K = 0`.
    pub fn coefficients_at_origin(&self) -> Result<[f64; 3]> {
        Ok(self.eval_k(&[0.0; 3])?.g)
    }

    pub fn to_infix(&self) -> String {
        self.root.infix()
    }

    pub fn to_prefix(&self) -> String {
        let mut s = String::from(TREE_HEADER);
        s.push('\n');
        self.root.prefix(&mut s);
        s.push('\n');
        s
    }

    pub fn from_prefix(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == TREE_HEADER => {}
            _ => return Err(Error::parse(1, format!("expected header '{TREE_HEADER}'"))),
        }
        let body: String = lines.collect::<Vec<_>>().join(" ");
        let spaced = body.replace('(', " ( ").replace(')', " ) ");
        let tokens: Vec<&str> = spaced.split_whitespace().collect();
        let mut pos = 0;
        let root = parse_node(&tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err(Error::parse(2, "trailing tokens after expression"));
        }
        Ok(SymbolicEnergy { root })
    }
}

fn expect(tokens: &[&str], pos: &mut usize, want: &str) -> Result<()> {
    match tokens.get(*pos) {
        Some(&t) if t == want => {
            *pos += 1;
            Ok(())
        }
        other => Err(Error::parse(2, format!("expected '{want}', found {other:?}"))),
    }
}

fn next_number<T: std::str::FromStr>(tokens: &[&str], pos: &mut usize) -> Result<T> {
    let t = tokens
        .get(*pos)
        .ok_or_else(|| Error::parse(2, "unexpected end of expression"))?;
    *pos += 1;
    t.parse()
        .map_err(|_| Error::parse(2, format!("bad number '{t}'")))
}

fn parse_node(tokens: &[&str], pos: &mut usize) -> Result<Node> {
    expect(tokens, pos, "(")?;
    expect(tokens, pos, "sum")?;
    let mut node = Node {
        constant: next_number(tokens, pos)?,
        ..Node::default()
    };
    for m in 0..3 {
        node.linear[m] = next_number(tokens, pos)?;
    }
    while tokens.get(*pos) == Some(&"(") {
        *pos += 1;
        expect(tokens, pos, "term")?;
        let coef = next_number(tokens, pos)?;
        let tok = tokens
            .get(*pos)
            .ok_or_else(|| Error::parse(2, "missing function name"))?;
        let func = Candidate::from_token(tok)
            .ok_or_else(|| Error::parse(2, format!("unknown function '{tok}'")))?;
        *pos += 1;
        let source = (
            next_number(tokens, pos)?,
            next_number(tokens, pos)?,
            next_number(tokens, pos)?,
        );
        let inner = parse_node(tokens, pos)?;
        expect(tokens, pos, ")")?;
        node.terms.push(Term {
            coef,
            func,
            inner,
            source,
        });
    }
    expect(tokens, pos, ")")?;
    Ok(node)
}

/// Fit of one network activation.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationFit {
    pub layer: usize,
    pub i: usize,
    pub j: usize,
    pub domain: (f64, f64),
    pub fit: FittedActivation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Distillation {
    pub energy: SymbolicEnergy,
    pub fits: Vec<ActivationFit>,
    /// R^2 of the expression against the network on sampled `K`.
    pub parity_r2: f64,
}

/// Replaces every activation by its selected fit and assembles the result.
pub fn distill(model: &IckanModel, lambda: f64) -> Result<Distillation> {
    if model.mode != Mode::Constrained {
        return Err(Error::config("distillation needs a constrained model"));
    }
    let jobs: Vec<(usize, usize, usize)> = model
        .layers
        .iter()
        .enumerate()
        .flat_map(|(r, l)| (0..l.n_out).flat_map(move |i| (0..l.n_in).map(move |j| (r, i, j))))
        .collect();
    let fits: Vec<ActivationFit> = jobs
        .par_iter()
        .map(|&(r, i, j)| {
            let act = model.layers[r].act(i, j);
            let domain = act.spline.domain();
            fit_activation(act, domain, lambda)
                .map(|fit| ActivationFit {
                    layer: r,
                    i,
                    j,
                    domain,
                    fit,
                })
                .map_err(|e| {
                    Error::Evaluation(format!("activation ({r}, {i}, {j}) could not be fitted: {e}"))
                })
        })
        .collect::<Result<_>>()?;

    let mut nodes: Vec<Node> = (0..3).map(Node::var).collect();
    let mut idx = 0;
    for (r, layer) in model.layers.iter().enumerate() {
        let mut next = vec![Node::default(); layer.n_out];
        for i in 0..layer.n_out {
            for j in 0..layer.n_in {
                let f = &fits[idx].fit;
                idx += 1;
                let z = &nodes[j];
                let out = &mut next[i];
                if f.candidate == Candidate::Identity {
                    out.add_scaled(z, f.c * f.a);
                    out.constant += f.c * f.b + f.d;
                } else if f.c == 0.0 || f.a == 0.0 {
                    out.constant += f.c * f.candidate.eval(f.b) + f.d;
                } else {
                    let mut inner = Node::default();
                    inner.add_scaled(z, f.a);
                    inner.constant += f.b;
                    out.terms.push(Term {
                        coef: f.c,
                        func: f.candidate,
                        inner,
                        source: (r, i, j),
                    });
                    out.constant += f.d;
                }
            }
        }
        nodes = next;
    }
    let energy = SymbolicEnergy {
        root: nodes.swap_remove(0),
    };
    let parity_r2 = parity(model, &energy)?;
    Ok(Distillation {
        energy,
        fits,
        parity_r2,
    })
}

/// R^2 of the expression against the network over the first-layer domain.
fn parity(model: &IckanModel, energy: &SymbolicEnergy) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let first = &model.layers[0];
    let dom: Vec<(f64, f64)> = (0..3).map(|j| first.act(0, j).spline.domain()).collect();
    let mut truth = Vec::with_capacity(PARITY_SAMPLES);
    let mut sse = 0.0;
    for _ in 0..PARITY_SAMPLES {
        let k: [f64; 3] = std::array::from_fn(|m| rng.random_range(dom[m].0..=dom[m].1));
        let w = model.forward(&k)?;
        let s = energy.eval(&k);
        if !s.is_finite() {
            return Err(Error::Evaluation(format!("symbolic energy not finite at K = {k:?}")));
        }
        sse += (w - s).powi(2);
        truth.push(w);
    }
    Ok(r_squared(&truth, sse))
}
