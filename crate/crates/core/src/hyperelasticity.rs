//! Invariants, strain energies, stresses and tangents.
//!
//! Second-order tensors are `Matrix3` (or `Matrix2` in plane strain). Fourth
//! order tangents are flattened to `Tangent` with row `3 * i + j` and column
//! `3 * k + l` holding `dP_ij / dF_kl`.

use nalgebra::{Matrix2, Matrix3, Matrix4, SMatrix};

use crate::error::{Error, Result};
use crate::jet::Jet3;
use crate::network::IckanModel;
use crate::symreg::SymbolicEnergy;

pub type Tangent = SMatrix<f64, 9, 9>;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// First and second F-derivatives of `I1`, `I2` and `J`.
struct InvariantBasis {
    i1: f64,
    i2: f64,
    j: f64,
    d: [Matrix3<f64>; 3],
    d2: Option<[Tangent; 3]>,
}

impl InvariantBasis {
    fn new(f: &Matrix3<f64>, second: bool) -> Result<Self> {
        let j = f.determinant();
        if !(j > 0.0) || !j.is_finite() {
            return Err(Error::InadmissibleDeformation { det: j });
        }
        let c = f.transpose() * f;
        let i1 = c.trace();
        let i2 = 0.5 * (i1 * i1 - (c * c).trace());
        let finv = f
            .try_inverse()
            .ok_or(Error::InadmissibleDeformation { det: j })?;
        let fc = f * c;
        let d = [2.0 * f, 2.0 * (i1 * f - fc), j * finv.transpose()];
        let d2 = second.then(|| {
            let b = f * f.transpose();
            let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
            let mut h1 = Tangent::zeros();
            let mut h2 = Tangent::zeros();
            let mut h3 = Tangent::zeros();
            for i in 0..3 {
                for jj in 0..3 {
                    for k in 0..3 {
                        for l in 0..3 {
                            let (r, s) = (3 * i + jj, 3 * k + l);
                            let dd = delta(i, k) * delta(jj, l);
                            h1[(r, s)] = 2.0 * dd;
                            h2[(r, s)] = 4.0 * f[(i, jj)] * f[(k, l)] + 2.0 * i1 * dd
                                - 2.0
                                    * (delta(i, k) * c[(l, jj)]
                                        + f[(i, l)] * f[(k, jj)]
                                        + b[(i, k)] * delta(jj, l));
                            h3[(r, s)] =
                                j * (finv[(jj, i)] * finv[(l, k)] - finv[(l, i)] * finv[(jj, k)]);
                        }
                    }
                }
            }
            [h1, h2, h3]
        });
        Ok(InvariantBasis { i1, i2, j, d, d2 })
    }

    fn vars(&self) -> [Jet3; 3] {
        [
            Jet3::var(self.i1, 0),
            Jet3::var(self.i2, 1),
            Jet3::var(self.j, 2),
        ]
    }

    fn stress(&self, w: &Jet3) -> Matrix3<f64> {
        self.d[0] * w.g[0] + self.d[1] * w.g[1] + self.d[2] * w.g[2]
    }

    fn tangent(&self, w: &Jet3) -> Tangent {
        let d2 = self.d2.as_ref().expect("second derivatives requested");
        let mut t = d2[0] * w.g[0] + d2[1] * w.g[1] + d2[2] * w.g[2];
        for a in 0..3 {
            let da = flatten(&self.d[a]);
            for b in 0..3 {
                if w.h[a][b] != 0.0 {
                    t += w.h[a][b] * da * flatten(&self.d[b]).transpose();
                }
            }
        }
        t
    }
}

fn flatten(m: &Matrix3<f64>) -> SMatrix<f64, 9, 1> {
    SMatrix::<f64, 9, 1>::from_fn(|r, _| m[(r / 3, r % 3)])
}

/// `(K1, K2, K3)` as jets over `(I1, I2, J)`.
fn k_jets(v: [Jet3; 3]) -> [Jet3; 3] {
    let [i1, i2, j] = v;
    [
        i1 * j.powf(-2.0 / 3.0) - 3.0,
        i2.powf(1.5) * j.powi(-2) - 3.0 * SQRT3,
        (j - 1.0).powi(2),
    ]
}

/// Composes `W(K)` given as value, gradient and Hessian in `K` with the
/// `K` jets to obtain a jet over `(I1, I2, J)`.
fn compose(kj: &[Jet3; 3], w: f64, g: &[f64; 3], h: &[[f64; 3]; 3]) -> Jet3 {
    let mut out = Jet3::constant(w);
    for a in 0..3 {
        out.g[a] = (0..3).map(|m| g[m] * kj[m].g[a]).sum();
        for b in 0..3 {
            let mut s = 0.0;
            for m in 0..3 {
                s += g[m] * kj[m].h[a][b];
                for n in 0..3 {
                    s += h[m][n] * kj[m].g[a] * kj[n].g[b];
                }
            }
            out.h[a][b] = s;
        }
    }
    out
}

/// Kinematic quantities of one deformation gradient.
#[derive(Clone, Debug)]
pub struct DeformationState {
    pub f: Matrix3<f64>,
    pub c: Matrix3<f64>,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub j: f64,
    pub itil1: f64,
    pub i2star: f64,
    pub k: [f64; 3],
    pub dk_df: [Matrix3<f64>; 3],
    pub d2k_df: [Tangent; 3],
}

impl DeformationState {
    pub fn new(f: &Matrix3<f64>) -> Result<Self> {
        let basis = InvariantBasis::new(f, true)?;
        let kj = k_jets(basis.vars());
        let c = f.transpose() * f;
        let j = basis.j;
        Ok(DeformationState {
            f: *f,
            c,
            i1: basis.i1,
            i2: basis.i2,
            i3: c.determinant(),
            j,
            itil1: basis.i1 * j.powf(-2.0 / 3.0),
            i2star: basis.i2.powf(1.5) * j.powi(-2),
            k: [kj[0].v, kj[1].v, kj[2].v],
            dk_df: [
                basis.stress(&kj[0]),
                basis.stress(&kj[1]),
                basis.stress(&kj[2]),
            ],
            d2k_df: [
                basis.tangent(&kj[0]),
                basis.tangent(&kj[1]),
                basis.tangent(&kj[2]),
            ],
        })
    }
}

/// `K` and its in-plane F-derivatives for a plane-strain deformation.
pub fn plane_k_derivatives(f2: &Matrix2<f64>) -> Result<([f64; 3], [Matrix2<f64>; 3])> {
    let basis = InvariantBasis::new(&embed_plane(f2), false)?;
    let kj = k_jets(basis.vars());
    let d = |m: usize| restrict_stress(&basis.stress(&kj[m]));
    Ok(([kj[0].v, kj[1].v, kj[2].v], [d(0), d(1), d(2)]))
}

/// Plane-strain embedding with `F33 = 1` and no out-of-plane shear.
pub fn embed_plane(f2: &Matrix2<f64>) -> Matrix3<f64> {
    Matrix3::new(
        f2[(0, 0)],
        f2[(0, 1)],
        0.0,
        f2[(1, 0)],
        f2[(1, 1)],
        0.0,
        0.0,
        0.0,
        1.0,
    )
}

pub fn restrict_stress(p: &Matrix3<f64>) -> Matrix2<f64> {
    p.fixed_view::<2, 2>(0, 0).into_owned()
}

/// In-plane block of a tangent; index `2 * i + j`.
pub fn restrict_tangent(t: &Tangent) -> Matrix4<f64> {
    Matrix4::from_fn(|r, s| t[(3 * (r / 2) + r % 2, 3 * (s / 2) + s % 2)])
}

/// Inverse Langevin function, Padé approximant.
pub fn inverse_langevin(y: f64) -> Result<f64> {
    if !(y.abs() < 1.0) {
        return Err(Error::LangevinSaturation { arg: y });
    }
    Ok(y * (3.0 - y * y) / (1.0 - y * y))
}

/// Eight-chain model with the energy offset computed so that `W(I) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrudaBoyce {
    pub n_c: f64,
    pub offset: f64,
}

impl ArrudaBoyce {
    pub fn new(n_c: f64) -> Result<Self> {
        if !(n_c > 1.0) {
            return Err(Error::config(format!("chain segment count {n_c} must exceed 1")));
        }
        let mut ab = ArrudaBoyce { n_c, offset: 0.0 };
        ab.offset = ab.raw_energy(Jet3::constant(3.0))?.v;
        Ok(ab)
    }

    fn raw_energy(&self, itil1: Jet3) -> Result<Jet3> {
        let sn = self.n_c.sqrt();
        let lam = (itil1 / 3.0).sqrt();
        let y = lam / sn;
        if !(y.v.abs() < 1.0) {
            return Err(Error::LangevinSaturation { arg: y.v });
        }
        let beta = y * (3.0 - y * y) / (1.0 - y * y);
        Ok(2.5 * sn * (beta * lam - sn * beta.ln_sinhc()))
    }
}

/// Isochoric Ogden term plus the common volumetric penalty.
#[derive(Clone, Debug, PartialEq)]
pub struct Ogden {
    pub mu: f64,
    pub eta: f64,
}

impl Ogden {
    /// Relative finite-difference step for the stress.
    pub const STRESS_STEP: f64 = 1e-6;
    /// Relative finite-difference step for the tangent.
    pub const TANGENT_STEP: f64 = 1e-4;

    /// Energy from the spectrum of `C - I`, arranged so that small strains
    /// lose no digits to cancellation.
    pub fn energy(&self, f: &Matrix3<f64>) -> Result<f64> {
        let det = f.determinant();
        if !(det > 0.0) || !det.is_finite() {
            return Err(Error::InadmissibleDeformation { det });
        }
        let h = f - Matrix3::identity();
        let e = h + h.transpose() + h.transpose() * h;
        let eig = nalgebra::SymmetricEigen::new(e).eigenvalues;
        let mut l = [0.0; 3];
        for k in 0..3 {
            if !(eig[k] > -1.0) {
                return Err(Error::InadmissibleDeformation { det });
            }
            l[k] = eig[k].ln_1p();
        }
        let mean = (l[0] + l[1] + l[2]) / 3.0;
        let iso: f64 = l.iter().map(|lk| (0.5 * self.eta * (lk - mean)).exp_m1()).sum();
        let jm1 = (1.5 * mean).exp_m1();
        Ok(self.mu / self.eta * iso + 1.5 * jm1 * jm1)
    }
}

/// Learned network energy shifted by `W0 = -W(K = 0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct IckanEnergy {
    pub model: IckanModel,
    pub w0: f64,
}

impl IckanEnergy {
    pub fn new(model: IckanModel) -> Result<Self> {
        let w0 = -model.forward(&[0.0; 3])?;
        Ok(IckanEnergy { model, w0 })
    }
}

/// Distilled closed form shifted so that `W(I) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolicModel {
    pub energy: SymbolicEnergy,
    pub w0: f64,
}

impl SymbolicModel {
    pub fn new(energy: SymbolicEnergy) -> Result<Self> {
        let w0 = -energy.eval_k(&[0.0; 3])?.v;
        Ok(SymbolicModel { energy, w0 })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MaterialModel {
    NeoHookean,
    Isihara,
    HainesWilson,
    GentThomas,
    ArrudaBoyce(ArrudaBoyce),
    Ogden(Ogden),
    Ickan(IckanEnergy),
    Symbolic(SymbolicModel),
}

/// Energy, stress and optionally tangent at one deformation.
#[derive(Clone, Debug)]
pub struct Response {
    pub energy: f64,
    pub stress: Matrix3<f64>,
    pub tangent: Option<Tangent>,
}

/// Plane-strain restriction of [`Response`].
#[derive(Clone, Debug)]
pub struct PlaneResponse {
    pub energy: f64,
    pub stress: Matrix2<f64>,
    pub tangent: Option<Matrix4<f64>>,
}

/// Names accepted by [`MaterialModel::benchmark`].
pub const BENCHMARKS: [&str; 6] = ["NH", "IH", "HW", "GT", "AB", "OG"];

impl MaterialModel {
    pub fn benchmark(name: &str) -> Result<Self> {
        Ok(match name.to_ascii_uppercase().as_str() {
            "NH" => MaterialModel::NeoHookean,
            "IH" => MaterialModel::Isihara,
            "HW" => MaterialModel::HainesWilson,
            "GT" => MaterialModel::GentThomas,
            "AB" => MaterialModel::ArrudaBoyce(ArrudaBoyce::new(28.0)?),
            "OG" => MaterialModel::Ogden(Ogden { mu: 1.3, eta: 1.3 }),
            _ => {
                return Err(Error::config(format!(
                    "unknown material model '{name}' (expected one of {})",
                    BENCHMARKS.join(", ")
                )))
            }
        })
    }

    pub fn ickan(model: IckanModel) -> Result<Self> {
        Ok(MaterialModel::Ickan(IckanEnergy::new(model)?))
    }

    pub fn symbolic(energy: SymbolicEnergy) -> Result<Self> {
        Ok(MaterialModel::Symbolic(SymbolicModel::new(energy)?))
    }

    pub fn name(&self) -> &'static str {
        match self {
            MaterialModel::NeoHookean => "NH",
            MaterialModel::Isihara => "IH",
            MaterialModel::HainesWilson => "HW",
            MaterialModel::GentThomas => "GT",
            MaterialModel::ArrudaBoyce(_) => "AB",
            MaterialModel::Ogden(_) => "OG",
            MaterialModel::Ickan(_) => "ICKAN",
            MaterialModel::Symbolic(_) => "SYM",
        }
    }

    /// Energy as a jet over `(I1, I2, J)`; `None` for the spectral model.
    fn invariant_jet(&self, basis: &InvariantBasis, second: bool) -> Result<Option<Jet3>> {
        let [i1, i2, j] = basis.vars();
        let itil1 = i1 * j.powf(-2.0 / 3.0);
        let itil2 = i2 * j.powf(-4.0 / 3.0);
        let vol = 1.5 * (j - 1.0).powi(2);
        let a = itil1 - 3.0;
        let w = match self {
            MaterialModel::NeoHookean => 0.5 * a + vol,
            MaterialModel::Isihara => 0.5 * a + (itil2 - 3.0) + a * a + vol,
            MaterialModel::HainesWilson => {
                let b = itil2 - 3.0;
                0.5 * a + b + 0.7 * a * b + 0.2 * a.powi(3) + vol
            }
            MaterialModel::GentThomas => 0.5 * a + (itil2 / 3.0).ln() + vol,
            MaterialModel::ArrudaBoyce(ab) => ab.raw_energy(itil1)? - ab.offset + vol,
            MaterialModel::Ogden(_) => return Ok(None),
            MaterialModel::Ickan(m) => {
                let kj = k_jets(basis.vars());
                let k = [kj[0].v, kj[1].v, kj[2].v];
                let (v, g, h) = if second {
                    m.model.forward_with_input_derivatives(&k)?
                } else {
                    let (v, g) = m.model.forward_with_gradient(&k)?;
                    (v, g, [[0.0; 3]; 3])
                };
                compose(&kj, v + m.w0, &g, &h)
            }
            MaterialModel::Symbolic(s) => {
                let kj = k_jets(basis.vars());
                let wk = s.energy.eval_k(&[kj[0].v, kj[1].v, kj[2].v])?;
                compose(&kj, wk.v + s.w0, &wk.g, &wk.h)
            }
        };
        Ok(Some(w))
    }

    pub fn energy(&self, f: &Matrix3<f64>) -> Result<f64> {
        if let MaterialModel::Ogden(og) = self {
            return og.energy(f);
        }
        if let MaterialModel::Ickan(m) = self {
            let basis = InvariantBasis::new(f, false)?;
            let kj = k_jets(basis.vars());
            return Ok(m.model.forward(&[kj[0].v, kj[1].v, kj[2].v])? + m.w0);
        }
        let basis = InvariantBasis::new(f, false)?;
        Ok(self.invariant_jet(&basis, false)?.map(|w| w.v).unwrap_or(0.0))
    }

    pub fn stress(&self, f: &Matrix3<f64>) -> Result<Matrix3<f64>> {
        Ok(self.response(f, false)?.stress)
    }

    pub fn tangent(&self, f: &Matrix3<f64>) -> Result<Tangent> {
        Ok(self.response(f, true)?.tangent.expect("tangent requested"))
    }

    pub fn response(&self, f: &Matrix3<f64>, want_tangent: bool) -> Result<Response> {
        if let MaterialModel::Ogden(og) = self {
            let energy = og.energy(f)?;
            let h = Ogden::STRESS_STEP * f.norm();
            let stress = fd_gradient(|g| og.energy(g), f, h, 9)?;
            let tangent = if want_tangent {
                let ht = Ogden::TANGENT_STEP * f.norm();
                Some(fd_jacobian(|g| fd_gradient(|q| og.energy(q), g, h, 9), f, ht, 9)?)
            } else {
                None
            };
            return Ok(Response {
                energy,
                stress,
                tangent,
            });
        }
        let basis = InvariantBasis::new(f, want_tangent)?;
        let w = self
            .invariant_jet(&basis, want_tangent)?
            .expect("invariant-based model");
        Ok(Response {
            energy: w.v,
            stress: basis.stress(&w),
            tangent: want_tangent.then(|| basis.tangent(&w)),
        })
    }

    /// Plane-strain response; the spectral model differentiates only the
    /// in-plane entries.
    pub fn plane_response(&self, f2: &Matrix2<f64>, want_tangent: bool) -> Result<PlaneResponse> {
        let f = embed_plane(f2);
        if let MaterialModel::Ogden(og) = self {
            let energy = og.energy(&f)?;
            let h = Ogden::STRESS_STEP * f.norm();
            let stress3 = fd_gradient(|g| og.energy(g), &f, h, 4)?;
            let tangent = if want_tangent {
                let ht = Ogden::TANGENT_STEP * f.norm();
                let t = fd_jacobian(|g| fd_gradient(|q| og.energy(q), g, h, 4), &f, ht, 4)?;
                Some(restrict_tangent(&t))
            } else {
                None
            };
            return Ok(PlaneResponse {
                energy,
                stress: restrict_stress(&stress3),
                tangent,
            });
        }
        let r = self.response(&f, want_tangent)?;
        Ok(PlaneResponse {
            energy: r.energy,
            stress: restrict_stress(&r.stress),
            tangent: r.tangent.as_ref().map(restrict_tangent),
        })
    }
}

/// Entries `(i, j)` perturbed by the plane (`n = 4`) or full (`n = 9`)
/// finite-difference loops.
fn fd_entries(n: usize) -> Vec<(usize, usize)> {
    if n == 4 {
        vec![(0, 0), (0, 1), (1, 0), (1, 1)]
    } else {
        (0..9).map(|r| (r / 3, r % 3)).collect()
    }
}

/// Central difference of a scalar function over the entries of `F`.
pub fn fd_gradient(
    w: impl Fn(&Matrix3<f64>) -> Result<f64>,
    f: &Matrix3<f64>,
    h: f64,
    n: usize,
) -> Result<Matrix3<f64>> {
    let mut p = Matrix3::zeros();
    for (i, j) in fd_entries(n) {
        let mut fp = *f;
        let mut fm = *f;
        fp[(i, j)] += h;
        fm[(i, j)] -= h;
        p[(i, j)] = (w(&fp)? - w(&fm)?) / (2.0 * h);
    }
    Ok(p)
}

/// Central difference of a tensor function over the entries of `F`.
pub fn fd_jacobian(
    p: impl Fn(&Matrix3<f64>) -> Result<Matrix3<f64>>,
    f: &Matrix3<f64>,
    h: f64,
    n: usize,
) -> Result<Tangent> {
    let mut t = Tangent::zeros();
    for (k, l) in fd_entries(n) {
        let mut fp = *f;
        let mut fm = *f;
        fp[(k, l)] += h;
        fm[(k, l)] -= h;
        let dp = (p(&fp)? - p(&fm)?) / (2.0 * h);
        for (i, j) in fd_entries(9) {
            t[(3 * i + j, 3 * k + l)] = dp[(i, j)];
        }
    }
    Ok(t)
}

/// `|W(RF) - W(F)|` for a proper rotation `R`.
pub fn objectivity_check(model: &MaterialModel, f: &Matrix3<f64>, r: &Matrix3<f64>) -> Result<f64> {
    let orth = (r.transpose() * r - Matrix3::identity()).norm();
    if !(orth < 1e-10) || !((r.determinant() - 1.0).abs() < 1e-10) {
        return Err(Error::Argument(
            "objectivity check needs a proper rotation".into(),
        ));
    }
    Ok((model.energy(&(r * f))? - model.energy(f)?).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_state() {
        let s = DeformationState::new(&Matrix3::identity()).unwrap();
        assert_eq!((s.i1, s.i2, s.j), (3.0, 3.0, 1.0));
        for m in 0..3 {
            assert!(s.k[m].abs() < 1e-15);
            assert!(s.dk_df[m].norm() < 1e-15);
        }
    }

    #[test]
    fn uniaxial_state() {
        let s = DeformationState::new(&Matrix3::from_diagonal(&[2.0, 1.0, 1.0].into())).unwrap();
        assert_relative_eq!(s.i1, 6.0);
        assert_relative_eq!(s.i2, 9.0);
        assert_relative_eq!(s.j, 2.0);
        assert_relative_eq!(s.itil1, 3.7798, epsilon = 1e-4);
        assert_relative_eq!(s.i2star, 6.750, epsilon = 1e-3);
        assert_relative_eq!(s.k[1], 1.554, epsilon = 1e-3);
        assert_relative_eq!(s.j * s.j, s.i3, max_relative = 1e-12);
    }

    #[test]
    fn simple_shear_state() {
        let f = Matrix3::new(1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        let s = DeformationState::new(&f).unwrap();
        assert_relative_eq!(s.i1, 4.0);
        assert_relative_eq!(s.i2, 4.0);
        assert_relative_eq!(s.k[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(s.k[1], 8.0 - 3.0 * SQRT3, epsilon = 1e-13);
        assert_eq!(s.k[2], 0.0);
    }

    #[test]
    fn inadmissible_rejected() {
        let f = Matrix3::from_diagonal(&[-1.0, 1.0, 1.0].into());
        assert!(matches!(
            DeformationState::new(&f),
            Err(Error::InadmissibleDeformation { .. })
        ));
    }

    #[test]
    fn neo_hookean_uniaxial_energy() {
        let f = Matrix3::from_diagonal(&[1.5, 1.0, 1.0].into());
        let w = MaterialModel::NeoHookean.energy(&f).unwrap();
        let expected = 0.5 * (4.25 * 1.5f64.powf(-2.0 / 3.0) - 3.0) + 1.5 * 0.25;
        assert_relative_eq!(w, expected, max_relative = 1e-14);
        assert_relative_eq!(w, 0.4966, epsilon = 1e-4);
    }

    #[test]
    fn arruda_boyce_offset() {
        let ab = ArrudaBoyce::new(28.0).unwrap();
        assert!((ab.offset - 3.7910).abs() < 1e-3);
        let m = MaterialModel::ArrudaBoyce(ab);
        assert!(m.energy(&Matrix3::identity()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn langevin_saturation() {
        assert!(matches!(
            inverse_langevin(1.0),
            Err(Error::LangevinSaturation { .. })
        ));
        let m = MaterialModel::benchmark("AB").unwrap();
        let t = 1.0 / 30f64.sqrt();
        let f = Matrix3::from_diagonal(&[30.0, t, t].into());
        assert!(matches!(m.energy(&f), Err(Error::LangevinSaturation { .. })));
    }

    #[test]
    fn ogden_with_exponent_two_is_neo_hookean() {
        let og = MaterialModel::Ogden(Ogden { mu: 1.0, eta: 2.0 });
        let f = Matrix3::new(1.2, 0.3, 0.0, -0.1, 0.9, 0.05, 0.0, 0.1, 1.1);
        let a = og.response(&f, true).unwrap();
        let b = MaterialModel::NeoHookean.response(&f, true).unwrap();
        assert_relative_eq!(a.energy, b.energy, max_relative = 1e-12);
        assert!((a.stress - b.stress).norm() < 1e-8);
        assert!((a.tangent.unwrap() - b.tangent.unwrap()).norm() < 1e-5);
    }

    #[test]
    fn plane_response_matches_full_restriction() {
        let f2 = Matrix2::new(1.1, 0.2, -0.05, 0.95);
        for name in BENCHMARKS {
            let m = MaterialModel::benchmark(name).unwrap();
            let p = m.plane_response(&f2, true).unwrap();
            let full = m.response(&embed_plane(&f2), true).unwrap();
            assert!((p.stress - restrict_stress(&full.stress)).norm() < 1e-8, "{name}");
            let dt = p.tangent.unwrap() - restrict_tangent(&full.tangent.unwrap());
            assert!(dt.norm() < 1e-5, "{name}");
        }
    }

    #[test]
    fn unknown_benchmark() {
        assert!(matches!(MaterialModel::benchmark("XX"), Err(Error::Config(_))));
    }

    #[test]
    fn rotation_check_rejects_reflection() {
        let r = Matrix3::from_diagonal(&[1.0, 1.0, -1.0].into());
        let res = objectivity_check(&MaterialModel::NeoHookean, &Matrix3::identity(), &r);
        assert!(matches!(res, Err(Error::Argument(_))));
    }
}
