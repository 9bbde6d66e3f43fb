//! Second-order truncated Taylor numbers in three variables.
//!
//! Used to push closed-form scalar expressions (energies written in terms of
//! invariants or of the network inputs) through to exact gradients and
//! Hessians.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet3 {
    pub v: f64,
    pub g: [f64; 3],
    pub h: [[f64; 3]; 3],
}

impl Jet3 {
    pub fn constant(v: f64) -> Self {
        Jet3 {
            v,
            g: [0.0; 3],
            h: [[0.0; 3]; 3],
        }
    }

    /// Independent variable number `idx` with value `v`.
    pub fn var(v: f64, idx: usize) -> Self {
        let mut j = Jet3::constant(v);
        j.g[idx] = 1.0;
        j
    }

    /// Applies a scalar function given its value and first two derivatives
    /// at `self.v`.
    pub fn chain(self, f0: f64, f1: f64, f2: f64) -> Self {
        let mut out = Jet3::constant(f0);
        for a in 0..3 {
            out.g[a] = f1 * self.g[a];
            for b in 0..3 {
                out.h[a][b] = f1 * self.h[a][b] + f2 * self.g[a] * self.g[b];
            }
        }
        out
    }

    pub fn powf(self, p: f64) -> Self {
        let v = self.v;
        self.chain(v.powf(p), p * v.powf(p - 1.0), p * (p - 1.0) * v.powf(p - 2.0))
    }

    pub fn powi(self, n: i32) -> Self {
        let v = self.v;
        let nf = n as f64;
        let d1 = if n == 0 { 0.0 } else { nf * v.powi(n - 1) };
        let d2 = if n < 2 && n >= 0 { 0.0 } else { nf * (nf - 1.0) * v.powi(n - 2) };
        self.chain(v.powi(n), d1, d2)
    }

    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn ln(self) -> Self {
        let v = self.v;
        self.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
    }

    pub fn recip(self) -> Self {
        let v = self.v;
        self.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }

    /// `ln(1 + exp(x))`, computed without overflow.
    pub fn softplus(self) -> Self {
        let x = self.v;
        let s = crate::network::sigmoid(x);
        self.chain(crate::network::softplus(x), s, s * (1.0 - s))
    }

    /// `ln(sinh(x) / x)` for `x > 0`.
    pub fn ln_sinhc(self) -> Self {
        let x = self.v;
        let coth = 1.0 / x.tanh();
        let f0 = (x.sinh() / x).ln();
        let f1 = coth - 1.0 / x;
        let f2 = 1.0 - coth * coth + 1.0 / (x * x);
        self.chain(f0, f1, f2)
    }
}

impl Add for Jet3 {
    type Output = Jet3;
    fn add(self, o: Jet3) -> Jet3 {
        let mut r = self;
        r.v += o.v;
        for a in 0..3 {
            r.g[a] += o.g[a];
            for b in 0..3 {
                r.h[a][b] += o.h[a][b];
            }
        }
        r
    }
}

impl Add<f64> for Jet3 {
    type Output = Jet3;
    fn add(mut self, o: f64) -> Jet3 {
        self.v += o;
        self
    }
}

impl Sub for Jet3 {
    type Output = Jet3;
    fn sub(self, o: Jet3) -> Jet3 {
        self + (-o)
    }
}

impl Sub<f64> for Jet3 {
    type Output = Jet3;
    fn sub(mut self, o: f64) -> Jet3 {
        self.v -= o;
        self
    }
}

impl Neg for Jet3 {
    type Output = Jet3;
    fn neg(self) -> Jet3 {
        self * -1.0
    }
}

impl Mul for Jet3 {
    type Output = Jet3;
    fn mul(self, o: Jet3) -> Jet3 {
        let mut r = Jet3::constant(self.v * o.v);
        for a in 0..3 {
            r.g[a] = self.v * o.g[a] + o.v * self.g[a];
            for b in 0..3 {
                r.h[a][b] = self.v * o.h[a][b]
                    + o.v * self.h[a][b]
                    + self.g[a] * o.g[b]
                    + o.g[a] * self.g[b];
            }
        }
        r
    }
}

impl Mul<f64> for Jet3 {
    type Output = Jet3;
    fn mul(self, s: f64) -> Jet3 {
        let mut r = self;
        r.v *= s;
        for a in 0..3 {
            r.g[a] *= s;
            for b in 0..3 {
                r.h[a][b] *= s;
            }
        }
        r
    }
}

impl Mul<Jet3> for f64 {
    type Output = Jet3;
    fn mul(self, j: Jet3) -> Jet3 {
        j * self
    }
}

impl Sub<Jet3> for f64 {
    type Output = Jet3;
    fn sub(self, j: Jet3) -> Jet3 {
        -j + self
    }
}

impl Div for Jet3 {
    type Output = Jet3;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet3) -> Jet3 {
        self * o.recip()
    }
}

impl Div<f64> for Jet3 {
    type Output = Jet3;
    fn div(self, s: f64) -> Jet3 {
        self * (1.0 / s)
    }
}
