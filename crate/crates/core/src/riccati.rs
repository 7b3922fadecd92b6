//! Complex phase Hessian M = V J⁻¹ along the ray, propagated through the linear (J, V) system.

use nalgebra::SymmetricEigen;

use crate::error::{Result, SimError};
use crate::geometry::{geodesic_rhs, RayState};
use crate::linalg::{csymmetrize, im_part, is_symmetric, min_sym_eig, re_part, to_complex, CM3, CV3, C64, I, M3, V3};
use crate::medium::MediumModel;
use crate::ode::{self, OdeSystem, Stepper};

/// Condition number of J beyond which M is not formed.
pub const COND_LIMIT: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HessianPropagator {
    pub j: CM3,
    pub v: CM3,
    pub c_gamma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lnr {
    pub l: M3,
    pub n: M3,
    pub r: M3,
}

/// Quantities derived from (J, V) at one instant.
#[derive(Clone, Copy, Debug)]
pub struct HessianData {
    pub m: CM3,
    pub dm: CM3,
    /// A = 2i Im M.
    pub a: CM3,
    pub b: M3,
    /// Im M.
    pub s: M3,
    pub da_inv_dt: CM3,
    /// iA⁻¹ = ½ (Im M)⁻¹, real SPD.
    pub ia_inv: M3,
    /// d(iA⁻¹)/dt, real symmetric.
    pub d_ia_inv: M3,
}

pub fn lnr_matrices(ray: &RayState, medium: &MediumModel, c_gamma: f64) -> Lnr {
    let jet = medium.log_index_jet(&ray.x);
    let n2 = jet.n * jet.n;
    let gd = ray.p / n2;
    let l = -(gd * gd.transpose() * n2 - M3::identity()) / (n2 * c_gamma);
    let n = -(jet.grad * gd.transpose());
    let r = -(jet.hess - jet.grad * jet.grad.transpose()) * c_gamma;
    Lnr { l, n, r }
}

pub fn riccati_rhs(prop: &HessianPropagator, lnr: &Lnr) -> (CM3, CM3) {
    let l = to_complex(&lnr.l);
    let n = to_complex(&lnr.n);
    let r = to_complex(&lnr.r);
    (n.transpose() * prop.j + l * prop.v, -(n * prop.v) - r * prop.j)
}

/// Riccati right-hand side −(MLM + NM + MNᵀ + R).
pub fn riccati_m_rhs(m: &CM3, lnr: &Lnr) -> CM3 {
    let l = to_complex(&lnr.l);
    let n = to_complex(&lnr.n);
    let r = to_complex(&lnr.r);
    -(m * l * m + n * m + m * n.transpose() + r)
}

pub fn hessian_and_a(prop: &HessianPropagator, lnr: &Lnr) -> Result<HessianData> {
    let lu = prop.j.lu();
    let j_inv = lu.try_inverse().ok_or_else(|| SimError::Propagation { t: f64::NAN, msg: "J is singular".into() })?;
    let cond = crate::linalg::cnorm_inf(&prop.j) * crate::linalg::cnorm_inf(&j_inv);
    if !cond.is_finite() || cond > COND_LIMIT {
        return Err(SimError::Propagation { t: f64::NAN, msg: format!("J ill-conditioned (cond {cond:.3e})") });
    }
    // M = V J⁻¹ via Jᵀ Mᵀ = Vᵀ
    let mt = prop.j.transpose().lu().solve(&prop.v.transpose()).unwrap_or(prop.v * j_inv);
    let m = csymmetrize(&mt.transpose());
    let dm = csymmetrize(&riccati_m_rhs(&m, lnr));
    let s = im_part(&m);
    let b = re_part(&m);
    let s_inv = s.try_inverse().ok_or_else(|| SimError::Propagation { t: f64::NAN, msg: "Im M is singular".into() })?;
    let ds = im_part(&dm);
    let ia_inv = crate::linalg::symmetrize(&(s_inv * 0.5));
    let d_ia_inv = crate::linalg::symmetrize(&(-(s_inv * ds * s_inv) * 0.5));
    // A⁻¹ = −i·iA⁻¹
    let da_inv_dt = to_complex(&d_ia_inv) * (-I);
    Ok(HessianData { m, dm, a: to_complex(&s) * (I * 2.0), b, s, da_inv_dt, ia_inv, d_ia_inv })
}

pub fn init_propagator(s0: &M3, b0: &M3, c_gamma: f64) -> Result<HessianPropagator> {
    if !is_symmetric(s0, 1e-12) {
        return Err(SimError::input("S0 must be symmetric"));
    }
    if !is_symmetric(b0, 1e-12) {
        return Err(SimError::input("B0 must be symmetric"));
    }
    if !(min_sym_eig(s0) > 0.0) {
        return Err(SimError::input("S0 must be positive definite"));
    }
    if !(c_gamma > 0.0 && c_gamma.is_finite()) {
        return Err(SimError::input("c_gamma must be positive"));
    }
    let v = b0.map(|x| C64::new(x, 0.0)) + s0.map(|x| C64::new(0.0, x));
    Ok(HessianPropagator { j: CM3::identity(), v, c_gamma })
}

/// (Jv)·conj(Vv) − (Vv)·conj(Jv); conserved for symmetric L, R.
pub fn symplectic_pairing(prop: &HessianPropagator, v: &CV3) -> C64 {
    let a = prop.j * v;
    let b = prop.v * v;
    crate::linalg::hdot(&a, &b) - crate::linalg::hdot(&b, &a)
}

/// M(t) = (M0⁻¹ + tL)⁻¹ for a constant L with N = R = 0.
pub fn homogeneous_closed_form(m0: &CM3, l: &M3, t: f64) -> Option<CM3> {
    let inv0 = m0.try_inverse()?;
    (inv0 + to_complex(l) * C64::new(t, 0.0)).try_inverse()
}

pub fn pack_cm3(m: &CM3, out: &mut [f64]) {
    for i in 0..3 {
        for j in 0..3 {
            out[2 * (3 * i + j)] = m[(i, j)].re;
            out[2 * (3 * i + j) + 1] = m[(i, j)].im;
        }
    }
}

pub fn unpack_cm3(y: &[f64]) -> CM3 {
    CM3::from_fn(|i, j| C64::new(y[2 * (3 * i + j)], y[2 * (3 * i + j) + 1]))
}

/// Ray and propagator together, 42 reals: x, p, J, V.
pub struct RayHessianSystem<'a> {
    pub medium: &'a MediumModel,
    pub c_gamma: f64,
}

impl RayHessianSystem<'_> {
    pub fn pack(ray: &RayState, prop: &HessianPropagator) -> Vec<f64> {
        let mut y = vec![0.0; 42];
        y[..6].copy_from_slice(&ray.to_array());
        pack_cm3(&prop.j, &mut y[6..24]);
        pack_cm3(&prop.v, &mut y[24..42]);
        y
    }

    pub fn unpack(&self, y: &[f64]) -> (RayState, HessianPropagator) {
        (
            RayState::from_slice(&y[..6]),
            HessianPropagator { j: unpack_cm3(&y[6..24]), v: unpack_cm3(&y[24..42]), c_gamma: self.c_gamma },
        )
    }
}

pub(crate) fn ray_hessian_rhs(ray: &RayState, prop: &HessianPropagator, medium: &MediumModel, dy: &mut [f64]) {
    let (dx, dp) = geodesic_rhs(ray, medium);
    dy[..3].copy_from_slice(dx.as_slice());
    dy[3..6].copy_from_slice(dp.as_slice());
    let lnr = lnr_matrices(ray, medium, prop.c_gamma);
    let (dj, dv) = riccati_rhs(prop, &lnr);
    pack_cm3(&dj, &mut dy[6..24]);
    pack_cm3(&dv, &mut dy[24..42]);
}

impl OdeSystem for RayHessianSystem<'_> {
    fn dim(&self) -> usize {
        42
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let (ray, prop) = self.unpack(y);
        ray_hessian_rhs(&ray, &prop, self.medium, dy);
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RiccatiSample {
    pub t: f64,
    pub ray: RayState,
    pub prop: HessianPropagator,
    pub m: CM3,
    pub min_eig_im_m: f64,
    pub det_j: f64,
}

pub fn propagate_hessian(
    ray0: &RayState,
    prop0: &HessianPropagator,
    medium: &MediumModel,
    times: &[f64],
    stepper: Stepper,
) -> Result<Vec<RiccatiSample>> {
    let sys = RayHessianSystem { medium, c_gamma: prop0.c_gamma };
    let sol = ode::integrate(&sys, 0.0, &RayHessianSystem::pack(ray0, prop0), times, stepper)?;
    sol.t
        .iter()
        .zip(&sol.y)
        .map(|(&t, y)| {
            let (ray, prop) = sys.unpack(y);
            let lnr = lnr_matrices(&ray, medium, prop.c_gamma);
            let h = hessian_and_a(&prop, &lnr).map_err(|e| e.at_time(t))?;
            let min_eig = SymmetricEigen::new(h.s).eigenvalues.min();
            if !(min_eig > 0.0) {
                return Err(SimError::Propagation { t, msg: "Im M lost positivity".into() });
            }
            Ok(RiccatiSample { t, ray, prop, m: h.m, min_eig_im_m: min_eig, det_j: prop.j.determinant().norm() })
        })
        .collect()
}

/// Symmetric positive part of `v` as used by callers building S0 from eigenvalues.
pub fn spd_from_eigen(vals: &V3, frame: &M3) -> M3 {
    frame * M3::from_diagonal(vals) * frame.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ray_from_beam;
    use crate::linalg::{c, cmax_abs};

    #[test]
    fn lnr_homogeneous_and_exp_gradient() {
        let m = MediumModel::homogeneous(1.0).unwrap();
        let ray = ray_from_beam(&V3::zeros(), &V3::x(), &m).unwrap();
        let k = 2.0;
        let lnr = lnr_matrices(&ray, &m, k);
        let e1 = V3::x();
        assert!((lnr.l + (e1 * e1.transpose() - M3::identity()) / k).amax() < 1e-15);
        assert_eq!(lnr.n, M3::zeros());
        assert_eq!(lnr.r, M3::zeros());

        let alpha = 0.1;
        let m = MediumModel::exp_gradient(1.0, alpha, [0.0, 1.0, 0.0], 0.0).unwrap();
        let ray = ray_from_beam(&V3::zeros(), &V3::x(), &m).unwrap();
        let lnr = lnr_matrices(&ray, &m, k);
        let e2 = V3::y();
        assert!((lnr.n + e2 * e1.transpose() * alpha).amax() < 1e-15);
        assert!((lnr.r - e2 * e2.transpose() * (k * alpha * alpha)).amax() < 1e-15);
        assert!(is_symmetric(&lnr.l, 1e-15) && is_symmetric(&lnr.r, 1e-15));
    }

    #[test]
    fn rhs_substitution() {
        let prop = init_propagator(&M3::identity(), &M3::zeros(), 1.0).unwrap();
        let zero = Lnr { l: M3::zeros(), n: M3::zeros(), r: M3::zeros() };
        let (dj, dv) = riccati_rhs(&prop, &zero);
        assert_eq!(dj, CM3::zeros());
        assert_eq!(dv, CM3::zeros());
        let l = M3::new(1.0, 0.2, 0.0, 0.2, 0.5, 0.1, 0.0, 0.1, 0.3);
        let (dj, dv) = riccati_rhs(&prop, &Lnr { l, ..zero });
        assert!(cmax_abs(&(dj - to_complex(&l) * prop.v)) < 1e-15);
        assert_eq!(dv, CM3::zeros());
    }

    #[test]
    fn hessian_data_for_identity() {
        let prop = init_propagator(&M3::identity(), &M3::zeros(), 1.0).unwrap();
        let zero = Lnr { l: M3::zeros(), n: M3::zeros(), r: M3::zeros() };
        let h = hessian_and_a(&prop, &zero).unwrap();
        assert!(cmax_abs(&(h.m - CM3::identity() * I)) < 1e-15);
        assert!(cmax_abs(&(h.a - CM3::identity() * (I * 2.0))) < 1e-15);
        assert_eq!(h.b, M3::zeros());
        assert!((h.ia_inv - M3::identity() * 0.5).amax() < 1e-15);
        // iA⁻¹ really is i times the inverse of A
        let a_inv = h.a.try_inverse().unwrap();
        assert!(cmax_abs(&(a_inv * I - to_complex(&h.ia_inv))) < 1e-15);
    }

    #[test]
    fn rejects_bad_s0() {
        let bad = M3::new(1.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(init_propagator(&bad, &M3::zeros(), 1.0).is_err());
        assert!(init_propagator(&M3::from_diagonal(&V3::new(1.0, -1.0, 1.0)), &M3::zeros(), 1.0).is_err());
        let p = init_propagator(&(M3::identity() * 3.0), &M3::zeros(), 1.0).unwrap();
        assert!(cmax_abs(&(p.v - CM3::identity() * c(0.0, 3.0))) < 1e-15);
    }

    #[test]
    fn singular_j_is_reported() {
        let mut prop = init_propagator(&M3::identity(), &M3::zeros(), 1.0).unwrap();
        prop.j[(2, 2)] = c(1e-14, 0.0);
        let zero = Lnr { l: M3::zeros(), n: M3::zeros(), r: M3::zeros() };
        assert!(matches!(hessian_and_a(&prop, &zero), Err(SimError::Propagation { .. })));
    }

    #[test]
    fn pairing_derivative_vanishes() {
        // one tiny explicit step: d/dt pairing ≈ 0 for symmetric L, R and arbitrary N
        let l = M3::new(0.3, 0.1, -0.2, 0.1, 0.7, 0.05, -0.2, 0.05, 0.4);
        let r = M3::new(-0.1, 0.2, 0.0, 0.2, 0.5, 0.3, 0.0, 0.3, -0.6);
        let n = M3::new(0.1, -0.4, 0.2, 0.3, 0.0, 0.9, -0.5, 0.6, 0.2);
        let lnr = Lnr { l, n, r };
        let mut prop = init_propagator(&M3::new(2.0, 0.1, 0.0, 0.1, 1.0, 0.2, 0.0, 0.2, 1.5), &l, 1.0).unwrap();
        prop.j += CM3::from_fn(|i, j| c(0.1 * (i as f64) - 0.05 * j as f64, 0.02 * (i + j) as f64));
        let v = CV3::new(c(1.0, 0.2), c(-0.3, 1.0), c(0.5, -0.7));
        let (dj, dv) = riccati_rhs(&prop, &lnr);
        let a = prop.j * v;
        let b = prop.v * v;
        let (da, db) = (dj * v, dv * v);
        use crate::linalg::hdot;
        let deriv = hdot(&da, &b) + hdot(&a, &db) - hdot(&db, &a) - hdot(&b, &da);
        assert!(deriv.norm() < 1e-12, "{deriv}");
        let h = 1e-6;
        let stepped = HessianPropagator { j: prop.j + dj * c(h, 0.0), v: prop.v + dv * c(h, 0.0), ..prop };
        let fd = (symplectic_pairing(&stepped, &v) - symplectic_pairing(&prop, &v)) / h;
        assert!(fd.norm() < 1e-5);
    }
}
