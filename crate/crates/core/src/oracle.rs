//! Brute-force moments of explicit Gaussian fields, used to check the moment formulas.

use serde::Serialize;

use crate::dynamics::BeamSample;
use crate::error::{Result, SimError};
use crate::initial::{density_jets, phase_jet, AmplitudeJets, BeamSpec, MomentState};
use crate::linalg::{bdot, ccross, conj_vec, hdot, im_part, min_sym_eig, re_vec, sym6, CM3, CV3, C64, M3, V3, ZERO_T3};
use crate::medium::MediumModel;
use crate::quadrature::{GaussianFrame, GridSpec, QuadResult, TensorGrid, TAIL_WARN};
use crate::transport::h0_from_e0;

/// Degree-0 Gaussian packet at one instant: constant amplitudes, quadratic phase about γ.
#[derive(Clone, Copy, Debug)]
pub struct GaussianPacket {
    pub center: V3,
    /// ∇φ at the center.
    pub grad_phi: V3,
    pub m: CM3,
    pub e0: CV3,
    pub h0: CV3,
    pub n: f64,
    pub mu: f64,
}

impl GaussianPacket {
    pub fn from_sample(sample: &BeamSample, medium: &MediumModel) -> Self {
        let st = &sample.state;
        let c_gamma = st.prop.c_gamma;
        GaussianPacket {
            center: st.ray.x,
            grad_phi: st.ray.p * c_gamma,
            m: sample.hessian.m,
            e0: st.e0,
            h0: h0_from_e0(&st.e0, &st.ray, medium, c_gamma),
            n: medium.index(&st.ray.x),
            mu: medium.mu(),
        }
    }

    pub fn eps(&self) -> f64 {
        self.n * self.n / self.mu
    }

    /// φ − φ(γ) on the quadratic truncation.
    pub fn phase(&self, x: &V3) -> C64 {
        let r = x - self.center;
        let rc = r.map(|v| C64::new(v, 0.0));
        C64::new(self.grad_phi.dot(&r), 0.0) + bdot(&rc, &(self.m * rc)) * 0.5
    }

    /// Energy density weight ¼(ε e₀·ē₀ + μ h₀·h̄₀).
    pub fn u(&self) -> f64 {
        0.25 * (self.eps() * hdot(&self.e0, &self.e0).re + self.mu * hdot(&self.h0, &self.h0).re)
    }

    /// Momentum density weight (n²/2) Re(e₀ × h̄₀).
    pub fn v(&self) -> V3 {
        re_vec(&ccross(&self.e0, &conj_vec(&self.h0))) * (0.5 * self.n * self.n)
    }

    /// Principal frame of the density |e^{iωφ}|² = e^{−2ω Im φ}.
    pub fn frame(&self, omega: f64) -> Result<GaussianFrame> {
        GaussianFrame::from_precision(self.center, &(im_part(&self.m) * (2.0 * omega)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Densities {
    pub energy: f64,
    pub momentum: V3,
}

/// Energy and momentum density of the packet at `x`.
pub fn density_at(x: &V3, packet: &GaussianPacket, omega: f64, include_oscillatory: bool) -> Densities {
    let phi = packet.phase(x);
    let scale = omega.powf(1.5);
    let decay = (-2.0 * omega * phi.im).exp();
    let mut energy = packet.u() * decay;
    let mut momentum = packet.v() * decay;
    if include_oscillatory {
        let osc = (C64::new(0.0, 2.0 * omega) * phi).exp();
        let ee = bdot(&packet.e0, &packet.e0) * packet.eps() + bdot(&packet.h0, &packet.h0) * packet.mu;
        energy += 0.25 * (ee * osc).re;
        momentum += re_vec(&(ccross(&packet.e0, &packet.h0) * osc)) * (0.5 * packet.n * packet.n);
    }
    Densities { energy: scale * energy, momentum: momentum * scale }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OracleMoments {
    pub e: f64,
    pub x: V3,
    pub p: V3,
    pub j: V3,
    pub q: M3,
}

impl OracleMoments {
    pub fn as_moment_state(&self) -> MomentState {
        MomentState { e: self.e, x: self.x, p: self.p, j: self.j, q: self.q }
    }
}

fn warning_for(tail: f64) -> Option<String> {
    (tail > TAIL_WARN).then(|| format!("estimated tail mass {tail:.2e} exceeds {TAIL_WARN:.0e}"))
}

/// Moments of an arbitrary pair of densities. X is integrated first, then J and Q about it.
pub fn moments_of<F>(density: F, frame: &GaussianFrame, grid: &GridSpec) -> Result<QuadResult<OracleMoments>>
where
    F: Fn(&V3) -> Densities + Sync,
{
    let tg = TensorGrid::new(frame, grid)?;
    let c = frame.center;
    let first = tg.integrate(7, |x, o| {
        let d = density(x);
        let r = x - c;
        o[0] = d.energy;
        for i in 0..3 {
            o[1 + i] = r[i] * d.energy;
            o[4 + i] = d.momentum[i];
        }
    });
    let e = first[0];
    if !(e > 0.0) || !e.is_finite() {
        return Err(SimError::Verification(format!("oracle energy is not positive ({e})")));
    }
    let x = c + V3::new(first[1], first[2], first[3]) / e;
    let p = V3::new(first[4], first[5], first[6]);
    let second = tg.integrate(9, |pt, o| {
        let d = density(pt);
        let r = pt - x;
        let jv = r.cross(&d.momentum);
        o[..3].copy_from_slice(jv.as_slice());
        let qv = sym6(&(r * r.transpose() * d.energy));
        o[3..].copy_from_slice(&qv);
    });
    let j = V3::new(second[0], second[1], second[2]);
    let q = crate::linalg::from_sym6(&second[3..]);
    Ok(QuadResult {
        value: OracleMoments { e, x, p, j, q },
        tail_estimate: tg.tail_estimate,
        warning: warning_for(tg.tail_estimate),
    })
}

/// Moments of the degree-0 packet by tensor quadrature on its principal frame.
pub fn quadrature_moments(packet: &GaussianPacket, omega: f64, grid: &GridSpec) -> Result<QuadResult<OracleMoments>> {
    if !(min_sym_eig(&im_part(&packet.m)) > 0.0) {
        return Err(SimError::Degenerate("Im M is not positive definite".into()));
    }
    let frame = packet.frame(omega)?;
    moments_of(|x| density_at(x, packet, omega, grid.include_oscillatory), &frame, grid)
}

/// Initial moments of the explicit field e = e₀ + ω⁻¹e₁, h = h₀ + ω⁻¹h₁ built from the amplitude jets,
/// with ε and n evaluated pointwise.
pub fn initial_field_moments(
    spec: &BeamSpec,
    jets: &AmplitudeJets,
    medium: &MediumModel,
    grid: &GridSpec,
) -> Result<QuadResult<OracleMoments>> {
    spec.validate()?;
    let w = spec.omega.recip();
    let dj = density_jets(spec, jets, medium);
    let phi = phase_jet(spec);
    let mu = medium.mu();
    let e_at = |x: &V3| CV3::from_fn(|i, _| jets.e0[i].eval(x)) + dj.e1 * C64::from(w);
    let h_at = |x: &V3| CV3::from_fn(|i, _| dj.h0[i].eval(x)) + dj.h1 * C64::from(w);
    let omega = spec.omega;
    let scale = omega.powf(1.5);
    let density = |x: &V3| {
        let f = phi.eval(x);
        let decay = (-2.0 * omega * f.im).exp();
        let n = medium.index(x);
        let e = e_at(x);
        let h = h_at(x);
        let u = 0.25 * (n * n / mu * hdot(&e, &e).re + mu * hdot(&h, &h).re);
        let v = re_vec(&ccross(&e, &conj_vec(&h))) * (0.5 * n * n);
        Densities { energy: scale * u * decay, momentum: v * (scale * decay) }
    };
    let frame = GaussianFrame::from_precision(spec.x0, &(spec.s0 * (2.0 * omega)))?;
    moments_of(density, &frame, grid)
}

/// Explicit field at a trajectory sample: the amplitude jets are rebuilt from the transported e₀ and M(t)
/// with the constraint construction used for initial data, and the third derivatives of Im φ set to zero.
pub fn field_moments_at(sample: &BeamSample, medium: &MediumModel, omega: f64, grid: &GridSpec) -> Result<QuadResult<OracleMoments>> {
    let st = &sample.state;
    let grad_phi = st.ray.p * st.prop.c_gamma;
    let spec = BeamSpec {
        x0: st.ray.x,
        k: grad_phi.norm(),
        direction: grad_phi.normalize(),
        s0: sample.hessian.s,
        b0: sample.hessian.b,
        phi3: ZERO_T3,
        amplitude: 1.0,
        s: sample.helicity.clamp(-1.0, 1.0),
        omega,
    };
    let jets = AmplitudeJets::from_leading(&spec, &st.e0, medium);
    initial_field_moments(&spec, &jets, medium, grid)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Delta {
    pub abs: f64,
    pub rel: f64,
}

impl Delta {
    fn new(abs: f64, scale: f64) -> Self {
        Delta { abs, rel: if scale > 0.0 { abs / scale } else { abs } }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CompareReport {
    pub e: Delta,
    /// Relative to the rms radius of the oracle density.
    pub x: Delta,
    pub p: Delta,
    pub j: Delta,
    pub q: Delta,
    pub j_parallel: f64,
    pub j_perp: V3,
    pub j_parallel_ode: f64,
    /// cos of the angle between the two J vectors.
    pub j_cos: f64,
}

/// Deltas between the integrated moments and the oracle, with the oracle J split along `direction`.
pub fn compare_report(ode: &MomentState, oracle: &OracleMoments, direction: &V3) -> CompareReport {
    let d = direction.normalize();
    let rms = (oracle.q.trace() / oracle.e).sqrt();
    let j_parallel = oracle.j.dot(&d);
    let j_cos = {
        let den = oracle.j.norm() * ode.j.norm();
        if den > 0.0 {
            oracle.j.dot(&ode.j) / den
        } else {
            0.0
        }
    };
    CompareReport {
        e: Delta::new((ode.e - oracle.e).abs(), oracle.e.abs()),
        x: Delta::new((ode.x - oracle.x).norm(), rms),
        p: Delta::new((ode.p - oracle.p).norm(), oracle.p.norm()),
        j: Delta::new((ode.j - oracle.j).norm(), oracle.j.norm()),
        q: Delta::new((ode.q - oracle.q).amax(), oracle.q.amax()),
        j_parallel,
        j_perp: oracle.j - d * j_parallel,
        j_parallel_ode: ode.j.dot(&d),
        j_cos,
    }
}

/// Gaussian covariance check: Q against (2ω Im M)⁻¹ E, relative in the max norm.
pub fn covariance_defect(oracle: &OracleMoments, m: &CM3, omega: f64) -> f64 {
    let cov = (im_part(m) * (2.0 * omega)).try_inverse().unwrap_or_else(M3::zeros) * oracle.e;
    (oracle.q - cov).amax() / oracle.q.amax()
}

/// Size of the oscillating part of the energy density relative to the smooth part (zero for circular packets).
pub fn oscillatory_weight(packet: &GaussianPacket) -> f64 {
    let ee = bdot(&packet.e0, &packet.e0).norm() * packet.eps() + bdot(&packet.h0, &packet.h0).norm() * packet.mu;
    ee / (4.0 * packet.u())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial::{circular_initial_moments, frame_from_direction};
    use crate::linalg::{cvec, I};
    use crate::transport::e0_from_helicity;

    fn packet(omega_free: bool) -> GaussianPacket {
        let d = V3::new(1.0, 1.0, 0.0).normalize();
        let (x, y) = frame_from_direction(&d);
        let e0 = if omega_free { e0_from_helicity(1.0, 1.0, &x, &y) } else { cvec(&x) };
        let n = 1.3;
        let p = d * n;
        let h0 = ccross(&cvec(&p), &e0);
        let s = M3::new(1.0, 0.2, 0.0, 0.2, 1.5, 0.1, 0.0, 0.1, 0.8);
        let b = M3::new(0.1, 0.0, 0.0, 0.0, -0.2, 0.0, 0.0, 0.0, 0.05);
        GaussianPacket {
            center: V3::new(0.5, -1.0, 2.0),
            grad_phi: d,
            m: b.map(|v| C64::new(v, 0.0)) + s.map(|v| I * v),
            e0,
            h0,
            n,
            mu: 1.0,
        }
    }

    #[test]
    fn density_peak_and_tail() {
        let pk = packet(true);
        let omega = 100.0;
        let d = density_at(&pk.center, &pk, omega, false);
        assert!((d.energy - omega.powf(1.5) * pk.u()).abs() < 1e-12 * d.energy);
        assert!((d.momentum - pk.v() * omega.powf(1.5)).norm() < 1e-12 * d.momentum.norm());
        let f = pk.frame(omega).unwrap();
        let far = pk.center + f.axes.column(0) * (6.0 * f.sigma[0]);
        assert!(density_at(&far, &pk, omega, false).energy < (-18.0f64).exp() * d.energy * 1.0001);
        // ε|e₀|² = μ|h₀|²
        assert!((pk.eps() * hdot(&pk.e0, &pk.e0).re - pk.mu * hdot(&pk.h0, &pk.h0).re).abs() < 1e-10);
    }

    #[test]
    fn gaussian_moment_identities() {
        let pk = packet(true);
        let omega = 200.0;
        let r = quadrature_moments(&pk, omega, &GridSpec::default()).unwrap();
        assert!(r.warning.is_none());
        let m = r.value;
        assert!((m.x - pk.center).norm() < 1e-10);
        assert!(covariance_defect(&m, &pk.m, omega) < 1e-6);
        let s = im_part(&pk.m);
        let expect = pk.u() * omega.powf(1.5) * std::f64::consts::PI.powf(1.5) / (omega.powi(3) * s.determinant()).sqrt();
        assert!((m.e - expect).abs() < 1e-6 * expect);
        assert!((m.p - pk.v() * (m.e / pk.u())).norm() < 1e-8 * m.p.norm());
        assert!(m.j.norm() < 1e-10 * m.p.norm());
    }

    #[test]
    fn oscillatory_terms_vanish_for_circular_and_decay_for_linear() {
        let circ = packet(true);
        assert!(oscillatory_weight(&circ) < 1e-12);
        let lin = packet(false);
        let grid = GridSpec { include_oscillatory: true, points_per_axis: 151, ..GridSpec::default() };
        let plain = GridSpec { points_per_axis: 151, ..GridSpec::default() };
        let on = quadrature_moments(&lin, 400.0, &grid).unwrap().value;
        let off = quadrature_moments(&lin, 400.0, &plain).unwrap().value;
        assert!((on.e - off.e).abs() < 1e-4 * off.e);
    }

    #[test]
    fn field_oracle_matches_circular_formula() {
        let medium = MediumModel::homogeneous(1.2).unwrap();
        let spec = BeamSpec {
            x0: V3::new(0.3, 0.0, -0.4),
            direction: V3::new(0.0, 0.6, 0.8),
            k: 1.5,
            s0: M3::new(1.0, 0.1, 0.0, 0.1, 0.7, 0.0, 0.0, 0.0, 1.2),
            omega: 200.0,
            ..BeamSpec::default()
        };
        let jets = AmplitudeJets::minimal(&spec, &medium);
        let orc = initial_field_moments(&spec, &jets, &medium, &GridSpec::default()).unwrap().value;
        let ode = circular_initial_moments(&spec, &medium).unwrap();
        let rep = compare_report(&ode, &orc, &spec.direction);
        assert!(rep.e.rel < 1e-2 && rep.p.rel < 1e-2 && rep.q.rel < 1e-2 && rep.x.rel < 1e-2, "{rep:?}");
        assert!(rep.j_cos > 0.99, "{rep:?}");
        assert!(rep.j_perp.norm() < 1e-2 * rep.j_parallel.abs());
    }
}
