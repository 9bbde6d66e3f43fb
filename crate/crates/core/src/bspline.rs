//! Uniform B-splines with exact derivatives.
//!
//! Basis functions follow the Cox–de Boor recursion on a uniformly spaced
//! knot vector `t_0 < t_1 < ... < t_{m-1}` with `m = n + k + 1` knots for
//! `n` control points of order `k`. The natural domain, where the basis is a
//! partition of unity, is `[t_k, t_n]` (0-based; `[t_{k+1}, t_{m-k}]` in the
//! usual 1-based notation).
//!
//! A [`Spline`] carries trainable raw parameters. In the monotone-convex
//! parameterization the raw vector is mapped through [`reparameterize`], whose
//! output satisfies `c[i+2] - c[i+1] >= c[i+1] - c[i] >= 0` exactly, so the
//! curve is convex and non-decreasing regardless of knot spacing. Outside the
//! natural domain the curve is continued linearly with the endpoint slope.

use crate::error::{Error, Result};

/// Highest spline order supported by the fixed-size local evaluation.
pub const MAX_ORDER: usize = 9;

#[derive(Clone, Debug, PartialEq)]
pub struct KnotVector {
    knots: Vec<f64>,
    order: usize,
    spacing: f64,
}

impl KnotVector {
    /// Uniform knots whose natural domain is exactly `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, order: usize, n_basis: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return Err(Error::config(format!("invalid spline domain [{lo}, {hi}]")));
        }
        check_counts(order, n_basis)?;
        let spacing = (hi - lo) / (n_basis - order) as f64;
        let m = n_basis + order + 1;
        let mut knots: Vec<f64> = (0..m)
            .map(|i| lo + (i as f64 - order as f64) * spacing)
            .collect();
        // Pin the domain ends so that the natural domain is bit-exact.
        knots[order] = lo;
        knots[n_basis] = hi;
        Ok(KnotVector {
            knots,
            order,
            spacing,
        })
    }

    /// Validates an explicit knot list.
    pub fn from_knots(knots: Vec<f64>, order: usize) -> Result<Self> {
        if knots.len() < order + 2 {
            return Err(Error::config(format!(
                "{} knots cannot carry an order-{order} basis",
                knots.len()
            )));
        }
        let n_basis = knots.len() - order - 1;
        check_counts(order, n_basis)?;
        let spacing = knots[1] - knots[0];
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::config("knot spacing must be positive"));
        }
        let scale = knots.iter().fold(0.0_f64, |a, t| a.max(t.abs()));
        let tol = 1e-12 * spacing + 4.0 * f64::EPSILON * scale;
        for w in knots.windows(2) {
            if ((w[1] - w[0]) - spacing).abs() > tol {
                return Err(Error::config("knots are not uniformly spaced"));
            }
        }
        Ok(KnotVector {
            knots,
            order,
            spacing,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Number of basis functions (control points) the knots pair with.
    pub fn n_basis(&self) -> usize {
        self.knots.len() - self.order - 1
    }

    /// Natural domain `[t_k, t_n]`.
    pub fn domain(&self) -> (f64, f64) {
        (self.knots[self.order], self.knots[self.n_basis()])
    }

    /// Local basis at `x`, which is clamped into the natural domain.
    pub fn local_basis(&self, x: f64) -> LocalBasis {
        let k = self.order;
        let n = self.n_basis();
        let (lo, hi) = self.domain();
        let x = x.clamp(lo, hi);
        let rel = (x - lo) / self.spacing;
        let cell = (rel.floor() as usize).min(n - k - 1);
        let u = (rel - cell as f64).clamp(0.0, 1.0);
        local_table(u, k, self.spacing, cell)
    }
}

fn check_counts(order: usize, n_basis: usize) -> Result<()> {
    if order > MAX_ORDER {
        return Err(Error::config(format!(
            "spline order {order} exceeds the supported maximum {MAX_ORDER}"
        )));
    }
    if n_basis < order + 1 {
        return Err(Error::config(format!(
            "order-{order} spline needs at least {} control points, got {n_basis}",
            order + 1
        )));
    }
    Ok(())
}

/// The `k + 1` non-zero basis functions at a point, with their first and
/// second derivatives. Entry `r` belongs to basis index `first + r`.
#[derive(Clone, Copy, Debug)]
pub struct LocalBasis {
    pub first: usize,
    pub len: usize,
    pub value: [f64; MAX_ORDER + 1],
    pub d1: [f64; MAX_ORDER + 1],
    pub d2: [f64; MAX_ORDER + 1],
}

impl LocalBasis {
    pub fn combine(&self, coeffs: &[f64]) -> (f64, f64, f64) {
        let c = &coeffs[self.first..self.first + self.len];
        let mut v = 0.0;
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for r in 0..self.len {
            v += c[r] * self.value[r];
            d1 += c[r] * self.d1[r];
            d2 += c[r] * self.d2[r];
        }
        (v, d1, d2)
    }
}

// Triangular Cox–de Boor table on one knot cell. With uniform knots the
// recursion only depends on the local coordinate `u` in [0, 1].
fn local_table(u: f64, k: usize, spacing: f64, cell: usize) -> LocalBasis {
    // tab[p][r] = B_{cell + k - p + r, p}
    let mut tab = [[0.0_f64; MAX_ORDER + 1]; MAX_ORDER + 1];
    tab[0][0] = 1.0;
    for p in 1..=k {
        let pf = p as f64;
        for r in 0..=p {
            let left = if r >= 1 { tab[p - 1][r - 1] } else { 0.0 };
            let right = if r < p { tab[p - 1][r] } else { 0.0 };
            tab[p][r] = ((u + pf - r as f64) * left + (r as f64 + 1.0 - u) * right) / pf;
        }
    }
    let mut out = LocalBasis {
        first: cell,
        len: k + 1,
        value: [0.0; MAX_ORDER + 1],
        d1: [0.0; MAX_ORDER + 1],
        d2: [0.0; MAX_ORDER + 1],
    };
    out.value[..=k].copy_from_slice(&tab[k][..=k]);
    let get = |p: usize, q: isize| -> f64 {
        if q < 0 || q as usize > p {
            0.0
        } else {
            tab[p][q as usize]
        }
    };
    if k >= 1 {
        for r in 0..=k {
            let r = r as isize;
            out.d1[r as usize] = (get(k - 1, r - 1) - get(k - 1, r)) / spacing;
        }
    }
    if k >= 2 {
        let s2 = spacing * spacing;
        for r in 0..=k {
            let r = r as isize;
            out.d2[r as usize] =
                (get(k - 2, r - 2) - 2.0 * get(k - 2, r - 1) + get(k - 2, r)) / s2;
        }
    }
    out
}

/// All `B_{i,p}(x)` for the given order `p`, by the full Cox–de Boor recursion
/// over the knot vector. `x` equal to the right end of the natural domain is
/// evaluated as the limit from the left.
fn basis_of_order(x: f64, knots: &KnotVector, p: usize) -> Vec<f64> {
    let t = &knots.knots;
    let m = t.len();
    let (_, hi) = knots.domain();
    let last_cell = knots.n_basis() - 1;
    let mut b: Vec<f64> = (0..m - 1)
        .map(|i| {
            let inside = if x == hi {
                i == last_cell
            } else {
                t[i] <= x && x < t[i + 1]
            };
            if inside {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    for q in 1..=p {
        let next: Vec<f64> = (0..m - 1 - q)
            .map(|i| {
                let a = (x - t[i]) / (t[i + q] - t[i]) * b[i];
                let c = (t[i + q + 1] - x) / (t[i + q + 1] - t[i + 1]) * b[i + 1];
                a + c
            })
            .collect();
        b = next;
    }
    b
}

/// `B_{i,k}(x)` for `i = 0..n`.
pub fn eval_basis(x: f64, knots: &KnotVector) -> Vec<f64> {
    basis_of_order(x, knots, knots.order)
}

/// First or second derivative of every basis function, from the
/// lower-order basis through the uniform difference formulas.
pub fn eval_basis_derivatives(x: f64, knots: &KnotVector, deriv: usize) -> Result<Vec<f64>> {
    let k = knots.order;
    let n = knots.n_basis();
    let s = knots.spacing;
    match deriv {
        1 if k >= 1 => {
            let lower = basis_of_order(x, knots, k - 1);
            Ok((0..n).map(|i| (lower[i] - lower[i + 1]) / s).collect())
        }
        2 if k >= 2 => {
            let lower = basis_of_order(x, knots, k - 2);
            Ok((0..n)
                .map(|i| (lower[i] - 2.0 * lower[i + 1] + lower[i + 2]) / (s * s))
                .collect())
        }
        1 | 2 => Err(Error::config(format!(
            "derivative of order {deriv} needs spline order >= {deriv}, got {k}"
        ))),
        _ => Err(Error::config(format!("unsupported derivative order {deriv}"))),
    }
}

/// Maps unconstrained parameters to monotone-convex control points.
///
/// `h = [p0, max(0, p1), ..., max(0, p_{n-1})]`, `d = [h0, h1, h1 + h2, ...]`,
/// `c = cumsum(d)`.
pub fn reparameterize(raw: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(raw.len());
    let mut slope = 0.0;
    let mut acc = 0.0;
    for (i, &p) in raw.iter().enumerate() {
        let d = if i == 0 {
            p
        } else {
            slope += p.max(0.0);
            slope
        };
        acc += d;
        out.push(acc);
    }
    out
}

/// Pulls a gradient with respect to control points back to the raw
/// parameters. The clamp has subgradient 1 at zero.
pub fn reparameterize_adjoint(raw: &[f64], control_grad: &[f64]) -> Vec<f64> {
    let n = raw.len();
    // d_bar[j] = sum_{i >= j} c_bar[i]; h_bar[j] = sum_{i >= j} d_bar[i] for j >= 1
    let mut d_bar = vec![0.0; n];
    let mut acc = 0.0;
    for j in (0..n).rev() {
        acc += control_grad[j];
        d_bar[j] = acc;
    }
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    let mut acc = 0.0;
    for j in (1..n).rev() {
        acc += d_bar[j];
        out[j] = if raw[j] >= 0.0 { acc } else { 0.0 };
    }
    out[0] = d_bar[0];
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parameterization {
    /// Control points derived by [`reparameterize`].
    MonotoneConvex,
    /// Raw parameters are the control points.
    Free,
}

/// How the endpoint slope of the linear extension is obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Extrapolation {
    /// Exact derivative at the endpoint.
    Analytic,
    /// One-sided difference with offset `rel * spacing`, `0 < rel < 1`.
    FiniteDifference { rel: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplineValue {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Sensitivities of value and slope with respect to the control points
/// touched at one evaluation point.
#[derive(Clone, Debug)]
pub struct ControlSensitivity {
    pub first: usize,
    pub len: usize,
    pub value: [f64; 2 * MAX_ORDER + 2],
    pub d1: [f64; 2 * MAX_ORDER + 2],
    pub d2: [f64; 2 * MAX_ORDER + 2],
}

/// One trainable univariate spline.
#[derive(Clone, Debug, PartialEq)]
pub struct Spline {
    knots: KnotVector,
    raw: Vec<f64>,
    control: Vec<f64>,
    param: Parameterization,
    extrapolation: Extrapolation,
}

impl Spline {
    pub fn new(knots: KnotVector, raw: Vec<f64>, param: Parameterization) -> Result<Self> {
        if raw.len() != knots.n_basis() {
            return Err(Error::config(format!(
                "{} raw parameters for {} basis functions",
                raw.len(),
                knots.n_basis()
            )));
        }
        if param == Parameterization::MonotoneConvex && raw.len() < 3 {
            return Err(Error::config("monotone-convex spline needs at least 3 control points"));
        }
        let mut s = Spline {
            knots,
            control: Vec::new(),
            raw,
            param,
            extrapolation: Extrapolation::Analytic,
        };
        s.refresh();
        Ok(s)
    }

    pub fn with_extrapolation(mut self, extrapolation: Extrapolation) -> Result<Self> {
        if let Extrapolation::FiniteDifference { rel } = extrapolation {
            if !(rel > 0.0 && rel < 1.0) {
                return Err(Error::config(format!(
                    "extrapolation offset {rel} must lie in (0, 1) knot spacings"
                )));
            }
        }
        self.extrapolation = extrapolation;
        Ok(self)
    }

    fn refresh(&mut self) {
        self.control = match self.param {
            Parameterization::MonotoneConvex => reparameterize(&self.raw),
            Parameterization::Free => self.raw.clone(),
        };
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    pub fn control_points(&self) -> &[f64] {
        &self.control
    }

    pub fn parameterization(&self) -> Parameterization {
        self.param
    }

    pub fn extrapolation(&self) -> Extrapolation {
        self.extrapolation
    }

    pub fn set_raw(&mut self, raw: &[f64]) {
        assert_eq!(raw.len(), self.raw.len());
        self.raw.copy_from_slice(raw);
        self.refresh();
    }

    /// Replaces the knots, keeping the raw parameters.
    pub fn set_domain(&mut self, lo: f64, hi: f64) -> Result<()> {
        self.knots = KnotVector::uniform(lo, hi, self.knots.order, self.knots.n_basis())?;
        Ok(())
    }

    pub fn domain(&self) -> (f64, f64) {
        self.knots.domain()
    }

    fn endpoint_slope_basis(&self, at_left: bool) -> LocalBasis {
        let (lo, hi) = self.domain();
        let x0 = if at_left { lo } else { hi };
        let mut basis = self.knots.local_basis(x0);
        if let Extrapolation::FiniteDifference { rel } = self.extrapolation {
            // eps < spacing keeps x1 in the same knot cell as the endpoint.
            let eps = rel * self.knots.spacing;
            let x1 = if at_left { lo + eps } else { hi - eps };
            let other = self.knots.local_basis(x1);
            debug_assert_eq!(other.first, basis.first);
            for r in 0..basis.len {
                basis.d1[r] = if at_left {
                    (other.value[r] - basis.value[r]) / eps
                } else {
                    (basis.value[r] - other.value[r]) / eps
                };
            }
        }
        basis
    }

    /// Value and first two derivatives of the extended curve.
    pub fn eval(&self, x: f64) -> SplineValue {
        let (lo, hi) = self.domain();
        if x < lo || x > hi {
            let left = x < lo;
            let b = self.endpoint_slope_basis(left);
            let (v0, slope, _) = b.combine(&self.control);
            let x0 = if left { lo } else { hi };
            SplineValue {
                value: v0 + slope * (x - x0),
                d1: slope,
                d2: 0.0,
            }
        } else {
            let (value, d1, d2) = self.knots.local_basis(x).combine(&self.control);
            SplineValue { value, d1, d2 }
        }
    }

    /// Value, derivatives and their sensitivities to the control points.
    pub fn eval_with_sensitivity(&self, x: f64) -> (SplineValue, ControlSensitivity) {
        let (lo, hi) = self.domain();
        let mut sens = ControlSensitivity {
            first: 0,
            len: 0,
            value: [0.0; 2 * MAX_ORDER + 2],
            d1: [0.0; 2 * MAX_ORDER + 2],
            d2: [0.0; 2 * MAX_ORDER + 2],
        };
        if x < lo || x > hi {
            let left = x < lo;
            let b = self.endpoint_slope_basis(left);
            let x0 = if left { lo } else { hi };
            let dx = x - x0;
            sens.first = b.first;
            sens.len = b.len;
            for r in 0..b.len {
                sens.value[r] = b.value[r] + b.d1[r] * dx;
                sens.d1[r] = b.d1[r];
            }
        } else {
            let b = self.knots.local_basis(x);
            sens.first = b.first;
            sens.len = b.len;
            sens.value[..b.len].copy_from_slice(&b.value[..b.len]);
            sens.d1[..b.len].copy_from_slice(&b.d1[..b.len]);
            sens.d2[..b.len].copy_from_slice(&b.d2[..b.len]);
        }
        let c = &self.control[sens.first..sens.first + sens.len];
        let mut v = SplineValue {
            value: 0.0,
            d1: 0.0,
            d2: 0.0,
        };
        for r in 0..sens.len {
            v.value += c[r] * sens.value[r];
            v.d1 += c[r] * sens.d1[r];
            v.d2 += c[r] * sens.d2[r];
        }
        (v, sens)
    }

    /// Maps a control-point gradient to the raw parameters.
    pub fn raw_gradient(&self, control_grad: &[f64]) -> Vec<f64> {
        match self.param {
            Parameterization::MonotoneConvex => reparameterize_adjoint(&self.raw, control_grad),
            Parameterization::Free => control_grad.to_vec(),
        }
    }
}
