//! Leading amplitude e₀ along the ray, the magnetic partner h₀, helicity and conserved densities.

use std::f64::consts::PI;

use crate::error::{Result, SimError};
use crate::geometry::RayState;
use crate::linalg::{ccross, cvec, hdot, CM3, CV3, C64, I, M3, V3};
use crate::medium::MediumModel;

/// h₀ = −(1/(μφ̇)) ∇φ × e₀ with ∇φ = c_γ p and φ̇ = −c_γ.
pub fn h0_from_e0(e0: &CV3, ray: &RayState, medium: &MediumModel, c_gamma: f64) -> CV3 {
    let grad_phi = cvec(&(ray.p * c_gamma));
    let phi_dot = -c_gamma;
    ccross(&grad_phi, e0) * C64::new(-1.0 / (medium.mu() * phi_dot), 0.0)
}

/// Time derivatives of φ along the ray reconstructed from (p, M): returns (∇φ̇, φ̈).
pub fn phase_time_derivatives(ray: &RayState, m: &CM3, n: f64, grad_ln_n: &V3, c_gamma: f64) -> (CV3, C64) {
    let n2 = n * n;
    let grad_phi = cvec(&(ray.p * c_gamma));
    let phi_dot = -c_gamma;
    let grad_phi_dot = (m * grad_phi) / C64::new(n2 * phi_dot, 0.0) - cvec(grad_ln_n) * C64::from(phi_dot);
    let phi_ddot = (grad_phi.transpose() * grad_phi_dot)[0] / (n2 * phi_dot);
    (grad_phi_dot, phi_ddot)
}

/// Derivative of e₀ along the ray.
pub fn transport_rhs_e0(e0: &CV3, ray: &RayState, m: &CM3, medium: &MediumModel, c_gamma: f64) -> CV3 {
    let jet = medium.log_index_jet(&ray.x);
    let em = medium.eps_mu_jet(&ray.x);
    let n2 = jet.n * jet.n;
    let phi_dot = -c_gamma;
    let grad_phi = ray.p * c_gamma;
    let (_, phi_ddot) = phase_time_derivatives(ray, m, jet.n, &jet.grad, c_gamma);
    let lap = m.trace();
    let scalar = lap - phi_ddot * n2 - grad_phi.dot(&em.grad_ln_mu);
    let grad_ln_n2 = jet.grad * 2.0;
    let along: C64 = (0..3).map(|i| e0[i] * grad_ln_n2[i]).sum();
    (e0 * scalar + cvec(&grad_phi) * along) / C64::new(2.0 * n2 * phi_dot, 0.0)
}

/// s = i n e₀·h̄₀ / (ε e₀·ē₀).
pub fn polarization_s(e0: &CV3, h0: &CV3, n: f64, eps: f64) -> Result<f64> {
    let norm2 = hdot(e0, e0).re;
    if norm2.sqrt() < 1e-14 {
        return Err(SimError::Degenerate("|e0| vanishes".into()));
    }
    let s = I * n * hdot(e0, h0) / (eps * norm2);
    debug_assert!(s.im.abs() < 1e-8 * s.re.abs().max(1.0), "complex helicity {s}");
    Ok(s.re)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConservedDensities {
    pub c_e: C64,
    pub c_h: C64,
    pub c_x: C64,
}

/// Densities divided by √det(A/2πi) = √det(Im M/π).
pub fn conserved_densities(e0: &CV3, h0: &CV3, im_m: &M3, eps: f64, mu: f64, n: f64) -> Result<ConservedDensities> {
    let det = (im_m / PI).determinant();
    if !(det > 0.0) {
        return Err(SimError::Degenerate(format!("det(A/2πi) = {det:e} is not positive")));
    }
    let w = 1.0 / det.sqrt();
    Ok(ConservedDensities {
        c_e: hdot(e0, e0) * (eps * w),
        c_h: hdot(h0, h0) * (mu * w),
        c_x: hdot(e0, h0) * (n * w),
    })
}

/// e₀ = a (z₁ m + z₂ m̄) with m = (X − iY)/√2, z₁ = √((1+s)/2), z₂ = √((1−s)/2).
pub fn e0_from_helicity(amplitude: f64, s: f64, x: &V3, y: &V3) -> CV3 {
    let m = (cvec(x) - cvec(y) * I) / C64::new(2f64.sqrt(), 0.0);
    let mbar = m.map(|z| z.conj());
    let z1 = ((1.0 + s) / 2.0).max(0.0).sqrt();
    let z2 = ((1.0 - s) / 2.0).max(0.0).sqrt();
    (m * C64::from(z1) + mbar * C64::from(z2)) * C64::from(amplitude)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ray_from_beam;
    use crate::linalg::c;

    #[test]
    fn h0_examples() {
        let m = MediumModel::homogeneous(1.0).unwrap();
        let ray = ray_from_beam(&V3::zeros(), &V3::z(), &m).unwrap();
        let h0 = h0_from_e0(&cvec(&V3::x()), &ray, &m, 2.0);
        assert!((h0 - cvec(&V3::y())).norm() < 1e-15);
        let par = h0_from_e0(&cvec(&V3::z()), &ray, &m, 2.0);
        assert_eq!(par.norm(), 0.0);

        let m = MediumModel::homogeneous(1.5).unwrap();
        let ray = ray_from_beam(&V3::zeros(), &V3::z(), &m).unwrap();
        let e0 = e0_from_helicity(1.0, 1.0, &V3::x(), &V3::y());
        let h0 = h0_from_e0(&e0, &ray, &m, 1.0 / 1.5);
        assert!((h0.norm() - 1.5 * e0.norm()).abs() < 1e-12);
        // μ|h₀|² = ε|e₀|²
        assert!((hdot(&h0, &h0).re - 2.25 * hdot(&e0, &e0).re).abs() < 1e-12);
    }

    #[test]
    fn helicity_values() {
        let m = MediumModel::homogeneous(1.3).unwrap();
        let ray = ray_from_beam(&V3::zeros(), &V3::z(), &m).unwrap();
        let eps = 1.69;
        for s in [-1.0, -0.3, 0.0, 0.5, 1.0] {
            let e0 = e0_from_helicity(0.7, s, &V3::x(), &V3::y());
            let h0 = h0_from_e0(&e0, &ray, &m, 1.0);
            assert!((polarization_s(&e0, &h0, 1.3, eps).unwrap() - s).abs() < 1e-10);
        }
        let lin = CV3::new(c(1.0, 0.0), c(0.5, 0.0), c(0.0, 0.0));
        let h0 = h0_from_e0(&lin, &ray, &m, 1.0);
        assert!(polarization_s(&lin, &h0, 1.3, eps).unwrap().abs() < 1e-15);
        assert!(polarization_s(&CV3::zeros(), &h0, 1.3, eps).is_err());
    }

    #[test]
    fn homogeneous_transport_is_scalar() {
        let m = MediumModel::homogeneous(1.2).unwrap();
        let ray = ray_from_beam(&V3::zeros(), &V3::z(), &m).unwrap();
        let mm = CM3::identity() * c(0.0, 0.8);
        let e0 = e0_from_helicity(1.0, 0.4, &V3::x(), &V3::y());
        let d = transport_rhs_e0(&e0, &ray, &mm, &m, 2.0);
        // d ∥ e0
        assert!(ccross(&d, &e0).norm() < 1e-14 * d.norm().max(1.0));
        assert_eq!(transport_rhs_e0(&CV3::zeros(), &ray, &mm, &m, 2.0), CV3::zeros());
    }

    #[test]
    fn densities_are_positive_and_equal() {
        let m = MediumModel::tanh_slab(1.0, 1.5, [0.0, 1.0, 0.0], 0.0, 1.0).unwrap();
        let d = V3::new(0.6, 0.8, 0.0);
        let ray = ray_from_beam(&V3::new(0.0, 0.2, 0.0), &d, &m).unwrap();
        let n = m.index(&ray.x);
        let x = V3::z();
        let y = d.cross(&x);
        let e0 = e0_from_helicity(1.3, 0.2, &x, &y);
        let h0 = h0_from_e0(&e0, &ray, &m, 1.0 / n);
        let s = M3::new(2.0, 0.1, 0.0, 0.1, 1.0, 0.0, 0.0, 0.0, 3.0);
        let cd = conserved_densities(&e0, &h0, &s, n * n, 1.0, n).unwrap();
        assert!(cd.c_e.re > 0.0 && cd.c_e.im == 0.0 && cd.c_h.re > 0.0);
        assert!((cd.c_e - cd.c_h).norm() < 1e-10 * cd.c_e.norm());
        assert!(conserved_densities(&e0, &h0, &-s, n * n, 1.0, n).is_err());
    }
}
