//! Scalar media ε(x), μ(x) with n = √(εμ) and derivative jets of ln n.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::linalg::{Tensor3, M3, V3, ZERO_T3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediumKind {
    Homogeneous,
    TanhSlab,
    GaussianLens,
    ExpGradient,
}

/// Flat parameter block shared by all built-in profiles. Unused entries are ignored by a given kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MediumParams {
    pub kind: MediumKind,
    pub n_left: f64,
    pub n_right: f64,
    pub axis: [f64; 3],
    pub center: f64,
    pub width: f64,
    pub alpha: f64,
    pub amplitude: f64,
    pub sigma: f64,
}

impl Default for MediumParams {
    fn default() -> Self {
        MediumParams {
            kind: MediumKind::TanhSlab,
            n_left: 1.0,
            n_right: 1.5,
            axis: [0.0, 1.0, 0.0],
            center: 0.0,
            width: 1.0,
            alpha: 0.1,
            amplitude: 0.2,
            sigma: 1.0,
        }
    }
}

/// Value and derivatives of ln n at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogIndexJet {
    pub n: f64,
    pub grad: V3,
    pub hess: M3,
    pub third: Tensor3,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsMuJet {
    pub eps: f64,
    pub mu: f64,
    pub grad_ln_eps: V3,
    pub grad_ln_mu: V3,
}

type IndexFn = dyn Fn(&V3) -> f64 + Send + Sync;

#[derive(Clone)]
enum Profile {
    Homogeneous { n: f64 },
    TanhSlab { n_left: f64, n_right: f64, axis: V3, center: f64, width: f64 },
    GaussianLens { n_bg: f64, amplitude: f64, center: V3, sigma: f64 },
    ExpGradient { n0: f64, alpha: f64, axis: V3, center: f64 },
    Custom(Arc<IndexFn>),
}

/// Immutable medium description. μ is a positive constant (1 unless overridden) and ε = n²/μ.
#[derive(Clone)]
pub struct MediumModel {
    profile: Profile,
    mu: f64,
}

impl fmt::Debug for MediumModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match &self.profile {
            Profile::Homogeneous { .. } => "homogeneous",
            Profile::TanhSlab { .. } => "tanh_slab",
            Profile::GaussianLens { .. } => "gaussian_lens",
            Profile::ExpGradient { .. } => "exp_gradient",
            Profile::Custom(_) => "custom",
        };
        f.debug_struct("MediumModel").field("kind", &name).field("mu", &self.mu).finish()
    }
}

fn finite(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(SimError::config(key, "parameter must be finite"))
    }
}

fn unit_axis(axis: [f64; 3]) -> Result<V3> {
    let a = V3::from(axis);
    if !a.iter().all(|x| x.is_finite()) || a.norm() < 1e-12 {
        return Err(SimError::config("medium.axis", "axis must be a finite nonzero vector"));
    }
    Ok(a / a.norm())
}

impl MediumModel {
    pub fn homogeneous(n: f64) -> Result<Self> {
        let n = finite("medium.n_left", n)?;
        if n < 1.0 {
            return Err(SimError::config("medium.n_left", "refractive index must be >= 1"));
        }
        Ok(MediumModel { profile: Profile::Homogeneous { n }, mu: 1.0 })
    }

    pub fn tanh_slab(n_left: f64, n_right: f64, axis: [f64; 3], center: f64, width: f64) -> Result<Self> {
        let n_left = finite("medium.n_left", n_left)?;
        let n_right = finite("medium.n_right", n_right)?;
        let center = finite("medium.center", center)?;
        let width = finite("medium.width", width)?;
        if n_left < 1.0 || n_right < 1.0 {
            return Err(SimError::config("medium.n_left", "refractive indices must be >= 1"));
        }
        if width <= 0.0 {
            return Err(SimError::config("medium.width", "width must be positive"));
        }
        let axis = unit_axis(axis)?;
        Ok(MediumModel { profile: Profile::TanhSlab { n_left, n_right, axis, center, width }, mu: 1.0 })
    }

    /// n = n_bg + amplitude·exp(−|x − c|²/(2σ²)).
    pub fn gaussian_lens(n_bg: f64, amplitude: f64, center: V3, sigma: f64) -> Result<Self> {
        let n_bg = finite("medium.n_left", n_bg)?;
        let amplitude = finite("medium.amplitude", amplitude)?;
        let sigma = finite("medium.sigma", sigma)?;
        if !center.iter().all(|x| x.is_finite()) {
            return Err(SimError::config("medium.center", "parameter must be finite"));
        }
        if sigma <= 0.0 {
            return Err(SimError::config("medium.sigma", "sigma must be positive"));
        }
        if n_bg < 1.0 || n_bg + amplitude.min(0.0) < 1.0 {
            return Err(SimError::config("medium.amplitude", "refractive index must stay >= 1"));
        }
        Ok(MediumModel { profile: Profile::GaussianLens { n_bg, amplitude, center, sigma }, mu: 1.0 })
    }

    /// n = n0·exp(α(x·â − c)).
    pub fn exp_gradient(n0: f64, alpha: f64, axis: [f64; 3], center: f64) -> Result<Self> {
        let n0 = finite("medium.n_left", n0)?;
        let alpha = finite("medium.alpha", alpha)?;
        let center = finite("medium.center", center)?;
        if n0 <= 0.0 {
            return Err(SimError::config("medium.n_left", "base index must be positive"));
        }
        let axis = unit_axis(axis)?;
        Ok(MediumModel { profile: Profile::ExpGradient { n0, alpha, axis, center }, mu: 1.0 })
    }

    /// User-supplied index profile. Jets come from Richardson-extrapolated central differences.
    pub fn custom<F>(n: F) -> Self
    where
        F: Fn(&V3) -> f64 + Send + Sync + 'static,
    {
        MediumModel { profile: Profile::Custom(Arc::new(n)), mu: 1.0 }
    }

    pub fn from_params(p: &MediumParams) -> Result<Self> {
        match p.kind {
            MediumKind::Homogeneous => Self::homogeneous(p.n_left),
            MediumKind::TanhSlab => Self::tanh_slab(p.n_left, p.n_right, p.axis, p.center, p.width),
            MediumKind::GaussianLens => {
                let axis = unit_axis(p.axis)?;
                Self::gaussian_lens(p.n_left, p.amplitude, axis * finite("medium.center", p.center)?, p.sigma)
            }
            MediumKind::ExpGradient => Self::exp_gradient(p.n_left, p.alpha, p.axis, p.center),
        }
    }

    /// Replaces the constant permeability; ε follows as n²/μ.
    pub fn with_mu(mut self, mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(SimError::config("medium.mu", "permeability must be positive"));
        }
        self.mu = mu;
        Ok(self)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn is_homogeneous(&self) -> bool {
        matches!(self.profile, Profile::Homogeneous { .. })
    }

    pub fn index(&self, x: &V3) -> f64 {
        match &self.profile {
            Profile::Homogeneous { n } => *n,
            Profile::TanhSlab { n_left, n_right, axis, center, width } => {
                let t = ((x.dot(axis) - center) / width).tanh();
                n_left + (n_right - n_left) * (1.0 + t) * 0.5
            }
            Profile::GaussianLens { n_bg, amplitude, center, sigma } => {
                let r2 = (x - center).norm_squared();
                n_bg + amplitude * (-r2 / (2.0 * sigma * sigma)).exp()
            }
            Profile::ExpGradient { n0, alpha, axis, center } => n0 * (alpha * (x.dot(axis) - center)).exp(),
            Profile::Custom(f) => f(x),
        }
    }

    /// Lower and upper bounds of ε over space (upper bound may be infinite).
    pub fn eps_bounds(&self) -> (f64, f64) {
        let sq = |a: f64, b: f64| (a.min(b).powi(2) / self.mu, a.max(b).powi(2) / self.mu);
        match &self.profile {
            Profile::Homogeneous { n } => sq(*n, *n),
            Profile::TanhSlab { n_left, n_right, .. } => sq(*n_left, *n_right),
            Profile::GaussianLens { n_bg, amplitude, .. } => sq(*n_bg, n_bg + amplitude),
            Profile::ExpGradient { alpha, .. } if *alpha == 0.0 => {
                let n = self.index(&V3::zeros());
                sq(n, n)
            }
            Profile::ExpGradient { .. } | Profile::Custom(_) => (0.0, f64::INFINITY),
        }
    }

    pub fn log_index_jet(&self, x: &V3) -> LogIndexJet {
        match &self.profile {
            Profile::Homogeneous { n } => {
                LogIndexJet { n: *n, grad: V3::zeros(), hess: M3::zeros(), third: ZERO_T3 }
            }
            Profile::TanhSlab { n_left, n_right, axis, center, width } => {
                let t = ((x.dot(axis) - center) / width).tanh();
                let half = 0.5 * (n_right - n_left);
                let sech2 = 1.0 - t * t;
                let n = n_left + half * (1.0 + t);
                let n1 = half * sech2 / width;
                let n2 = half * (-2.0 * t * sech2) / (width * width);
                let n3 = half * sech2 * (6.0 * t * t - 2.0) / (width * width * width);
                axial_jet(n, n1, n2, n3, axis)
            }
            Profile::ExpGradient { alpha, axis, .. } => {
                let n = self.index(x);
                let mut jet = axial_jet(1.0, 0.0, 0.0, 0.0, axis);
                jet.n = n;
                jet.grad = axis * *alpha;
                jet
            }
            Profile::GaussianLens { n_bg, amplitude, center, sigma } => {
                let y = x - center;
                let s2 = sigma * sigma;
                let h = amplitude * (-y.norm_squared() / (2.0 * s2)).exp();
                let n = n_bg + h;
                let dn = -y * (h / s2);
                let ddn = (y * y.transpose() / (s2 * s2) - M3::identity() / s2) * h;
                let mut d3n = ZERO_T3;
                for i in 0..3 {
                    for j in 0..3 {
                        for k in 0..3 {
                            let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                            d3n[i][j][k] = h
                                * (-y[i] * y[j] * y[k] / (s2 * s2 * s2)
                                    + (d(i, j) * y[k] + d(i, k) * y[j] + d(j, k) * y[i]) / (s2 * s2));
                        }
                    }
                }
                log_jet_from_index_derivs(n, &dn, &ddn, &d3n)
            }
            Profile::Custom(f) => fd_log_jet(&|p: &V3| f(p).ln(), x, f(x)),
        }
    }

    pub fn eps_mu_jet(&self, x: &V3) -> EpsMuJet {
        let jet = self.log_index_jet(x);
        EpsMuJet {
            eps: jet.n * jet.n / self.mu,
            mu: self.mu,
            grad_ln_eps: jet.grad * 2.0,
            grad_ln_mu: V3::zeros(),
        }
    }

    /// Largest |D^α ε|, |D^α μ| over 1 ≤ |α| ≤ 3 at `x0`.
    pub fn near_homogeneity_defect(&self, x0: &V3) -> f64 {
        let jet = self.log_index_jet(x0);
        let eps = jet.n * jet.n / self.mu;
        // ε = exp(g) with g = 2 ln n − ln μ
        let g1 = jet.grad * 2.0;
        let g2 = jet.hess * 2.0;
        let mut m = g1.amax() * eps;
        for i in 0..3 {
            for j in 0..3 {
                m = m.max((eps * (g2[(i, j)] + g1[i] * g1[j])).abs());
                for k in 0..3 {
                    let v = 2.0 * jet.third[i][j][k]
                        + g2[(i, j)] * g1[k]
                        + g2[(i, k)] * g1[j]
                        + g2[(j, k)] * g1[i]
                        + g1[i] * g1[j] * g1[k];
                    m = m.max((eps * v).abs());
                }
            }
        }
        m
    }
}

pub fn eval_log_index_jet(medium: &MediumModel, x: &V3) -> LogIndexJet {
    medium.log_index_jet(x)
}

pub fn eval_eps_mu_jet(medium: &MediumModel, x: &V3) -> EpsMuJet {
    medium.eps_mu_jet(x)
}

pub fn near_homogeneity_defect(medium: &MediumModel, x0: &V3) -> f64 {
    medium.near_homogeneity_defect(x0)
}

/// Jet of ln n for n depending only on x·â, from the derivatives of n along â.
fn axial_jet(n: f64, n1: f64, n2: f64, n3: f64, axis: &V3) -> LogIndexJet {
    let f1 = n1 / n;
    let f2 = n2 / n - f1 * f1;
    let f3 = n3 / n - 3.0 * f1 * n2 / n + 2.0 * f1 * f1 * f1;
    let mut third = ZERO_T3;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                third[i][j][k] = f3 * axis[i] * axis[j] * axis[k];
            }
        }
    }
    LogIndexJet { n, grad: axis * f1, hess: axis * axis.transpose() * f2, third }
}

fn log_jet_from_index_derivs(n: f64, dn: &V3, ddn: &M3, d3n: &Tensor3) -> LogIndexJet {
    let grad = dn / n;
    let hess = ddn / n - grad * grad.transpose();
    let mut third = ZERO_T3;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                third[i][j][k] = d3n[i][j][k] / n
                    - (ddn[(i, j)] * dn[k] + ddn[(i, k)] * dn[j] + ddn[(j, k)] * dn[i]) / (n * n)
                    + 2.0 * grad[i] * grad[j] * grad[k];
            }
        }
    }
    LogIndexJet { n, grad, hess, third }
}

const FD_STEP_GRAD: f64 = 1e-4;
const FD_STEP_HESS: f64 = 1e-3;
const FD_STEP_THIRD: f64 = 1e-2;

/// Two Richardson refinements of a second-order central difference with error series in h².
fn richardson<F: Fn(f64) -> f64>(d: F, h: f64) -> f64 {
    let a0 = d(h);
    let a1 = d(h / 2.0);
    let a2 = d(h / 4.0);
    let b0 = (4.0 * a1 - a0) / 3.0;
    let b1 = (4.0 * a2 - a1) / 3.0;
    (16.0 * b1 - b0) / 15.0
}

fn fd_grad(f: &dyn Fn(&V3) -> f64, x: &V3, h: f64) -> V3 {
    let mut g = V3::zeros();
    for i in 0..3 {
        let e = V3::ith(i, 1.0);
        g[i] = richardson(|s| (f(&(x + e * s)) - f(&(x - e * s))) / (2.0 * s), h);
    }
    g
}

fn fd_hess(f: &dyn Fn(&V3) -> f64, x: &V3, h: f64) -> M3 {
    let f0 = f(x);
    let mut m = M3::zeros();
    for i in 0..3 {
        let ei = V3::ith(i, 1.0);
        m[(i, i)] = richardson(|s| (f(&(x + ei * s)) - 2.0 * f0 + f(&(x - ei * s))) / (s * s), h);
        for j in (i + 1)..3 {
            let ej = V3::ith(j, 1.0);
            let v = richardson(
                |s| {
                    (f(&(x + (ei + ej) * s)) - f(&(x + (ei - ej) * s)) - f(&(x + (ej - ei) * s))
                        + f(&(x - (ei + ej) * s)))
                        / (4.0 * s * s)
                },
                h,
            );
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn fd_log_jet(lnf: &dyn Fn(&V3) -> f64, x: &V3, n: f64) -> LogIndexJet {
    let grad = fd_grad(lnf, x, FD_STEP_GRAD);
    let hess = fd_hess(lnf, x, FD_STEP_HESS);
    let mut third = ZERO_T3;
    for k in 0..3 {
        let ek = V3::ith(k, 1.0);
        let mut dk = [[0.0; 3]; 3];
        for (i, row) in dk.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = richardson(
                    |s| {
                        (fd_hess(lnf, &(x + ek * s), FD_STEP_HESS)[(i, j)]
                            - fd_hess(lnf, &(x - ek * s), FD_STEP_HESS)[(i, j)])
                            / (2.0 * s)
                    },
                    FD_STEP_THIRD,
                );
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                third[i][j][k] = dk[i][j];
            }
        }
    }
    // symmetrise over all index permutations
    let mut sym = ZERO_T3;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                sym[i][j][k] = (third[i][j][k]
                    + third[i][k][j]
                    + third[j][i][k]
                    + third[j][k][i]
                    + third[k][i][j]
                    + third[k][j][i])
                    / 6.0;
            }
        }
    }
    LogIndexJet { n, grad, hess, third: sym }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slab() -> MediumModel {
        MediumModel::tanh_slab(1.0, 1.5, [0.0, 1.0, 0.0], 0.0, 1.0).unwrap()
    }

    #[test]
    fn homogeneous_jet_is_trivial() {
        let m = MediumModel::homogeneous(1.0).unwrap();
        let j = m.log_index_jet(&V3::new(3.0, -2.0, 7.0));
        assert_eq!(j.n, 1.0);
        assert_eq!(j.grad, V3::zeros());
        assert_eq!(j.hess, M3::zeros());
        assert_eq!(j.third, ZERO_T3);
        let e = m.eps_mu_jet(&V3::zeros());
        assert_eq!((e.eps, e.mu), (1.0, 1.0));
        assert_eq!(e.grad_ln_eps, V3::zeros());
        assert_eq!(m.near_homogeneity_defect(&V3::zeros()), 0.0);
    }

    #[test]
    fn exp_gradient_at_origin() {
        let m = MediumModel::exp_gradient(1.0, 0.1, [0.0, 1.0, 0.0], 0.0).unwrap();
        let j = m.log_index_jet(&V3::zeros());
        assert_eq!(j.grad, V3::new(0.0, 0.1, 0.0));
        assert_eq!(j.hess, M3::zeros());
        assert_eq!(j.third, ZERO_T3);
    }

    #[test]
    fn slab_gradient_matches_stencil() {
        let m = slab();
        let x = V3::zeros();
        let h = 1e-4;
        let j = m.log_index_jet(&x);
        for i in 0..3 {
            let e = V3::ith(i, h);
            let fd = (m.index(&(x + e)).ln() - m.index(&(x - e)).ln()) / (2.0 * h);
            assert!((fd - j.grad[i]).abs() < 1e-6 * j.grad.norm().max(1e-300) + 1e-12);
        }
    }

    #[test]
    fn eps_gradient_is_twice_log_index() {
        let m = slab();
        let x = V3::new(0.3, 0.4, -1.0);
        let e = m.eps_mu_jet(&x);
        let j = m.log_index_jet(&x);
        assert!((e.grad_ln_eps - 2.0 * j.grad).amax() < 1e-12);
        assert_eq!(e.grad_ln_mu, V3::zeros());
    }

    #[test]
    fn defect_far_and_near_slab() {
        let m = slab();
        assert!(m.near_homogeneity_defect(&V3::zeros()) > 0.0);
        // the third derivative of ε dominates: 2·n'''(x) ≈ 16·(Δn/2)·e^{-2d/w} on the n = 1 side
        assert!(m.near_homogeneity_defect(&V3::new(0.0, -11.0, 0.0)) < 1e-8);
        let at10 = m.near_homogeneity_defect(&V3::new(0.0, -10.0, 0.0));
        let tail = 16.0 * 0.25 * 2.0 * (-20.0f64).exp();
        assert!((at10 / tail - 1.0).abs() < 1e-3, "{at10} vs {tail}");
    }

    #[test]
    fn custom_profile_matches_analytic() {
        let reference = MediumModel::gaussian_lens(1.0, 0.3, V3::new(0.1, 0.0, -0.2), 0.8).unwrap();
        let r2 = reference.clone();
        let custom = MediumModel::custom(move |x| r2.index(x));
        let x = V3::new(0.4, -0.3, 0.25);
        let a = reference.log_index_jet(&x);
        let b = custom.log_index_jet(&x);
        assert!((a.grad - b.grad).amax() < 1e-9);
        assert!((a.hess - b.hess).amax() < 1e-8);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    assert!((a.third[i][j][k] - b.third[i][j][k]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(MediumModel::homogeneous(0.5).is_err());
        assert!(MediumModel::tanh_slab(1.0, 1.5, [0.0; 3], 0.0, 1.0).is_err());
        assert!(MediumModel::tanh_slab(1.0, f64::NAN, [0.0, 1.0, 0.0], 0.0, 1.0).is_err());
        assert!(MediumModel::gaussian_lens(1.0, -0.5, V3::zeros(), 1.0).is_err());
    }
}
