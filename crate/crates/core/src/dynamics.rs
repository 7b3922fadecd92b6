//! Co-integration of ray, Hessian propagator, leading amplitude and the moments (X, P, J, Q).

use log::warn;

use crate::error::{Result, SimError};
use crate::geometry::{geodesic_rhs, hamiltonian, ray_from_beam, RayState};
use crate::initial::{initial_moments, BeamSpec, MomentState};
use crate::linalg::{from_sym6, levi, min_sym_eig, sym6, t3_contract2, CV3, C64, M3, V3};
use crate::medium::MediumModel;
use crate::ode::{self, OdeSystem, Stepper};
use crate::riccati::{hessian_and_a, init_propagator, lnr_matrices, pack_cm3, riccati_rhs, unpack_cm3, HessianData, HessianPropagator};
use crate::transport::{conserved_densities, h0_from_e0, polarization_s, transport_rhs_e0, ConservedDensities};

pub const STATE_DIM: usize = 63;

#[derive(Clone, Copy, Debug)]
pub struct AugmentedState {
    pub ray: RayState,
    pub prop: HessianPropagator,
    pub e0: CV3,
    pub moments: MomentState,
}

impl AugmentedState {
    pub fn pack(&self) -> Vec<f64> {
        let mut y = vec![0.0; STATE_DIM];
        y[..6].copy_from_slice(&self.ray.to_array());
        pack_cm3(&self.prop.j, &mut y[6..24]);
        pack_cm3(&self.prop.v, &mut y[24..42]);
        for i in 0..3 {
            y[42 + 2 * i] = self.e0[i].re;
            y[43 + 2 * i] = self.e0[i].im;
        }
        let m = &self.moments;
        y[48..51].copy_from_slice(m.x.as_slice());
        y[51..54].copy_from_slice(m.p.as_slice());
        y[54..57].copy_from_slice(m.j.as_slice());
        y[57..63].copy_from_slice(&sym6(&m.q));
        y
    }

    /// Inverse of [`pack`]; E and c_γ are not part of the state vector.
    pub fn unpack(y: &[f64], e: f64, c_gamma: f64) -> Self {
        AugmentedState {
            ray: RayState::from_slice(&y[..6]),
            prop: HessianPropagator { j: unpack_cm3(&y[6..24]), v: unpack_cm3(&y[24..42]), c_gamma },
            e0: CV3::from_fn(|i, _| C64::new(y[42 + 2 * i], y[43 + 2 * i])),
            moments: MomentState {
                e,
                x: V3::new(y[48], y[49], y[50]),
                p: V3::new(y[51], y[52], y[53]),
                j: V3::new(y[54], y[55], y[56]),
                q: from_sym6(&y[57..63]),
            },
        }
    }
}

/// Derivatives of the moments given the Hessian data at the ray point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentRates {
    pub x: V3,
    pub p: V3,
    pub j: V3,
    pub q: M3,
}

pub fn moment_rates(m: &MomentState, hd: &HessianData, medium: &MediumModel, omega: f64) -> MomentRates {
    let jet = medium.log_index_jet(&m.x);
    debug_assert!(jet.n >= 1.0 - 1e-12, "refractive index below 1 at {:?}", m.x);
    let e = m.e;
    let n2 = jet.n * jet.n;
    let g = jet.grad;
    let qdot = hd.d_ia_inv * (e / omega);
    let q_h = m.q.component_mul(&jet.hess).sum();
    let xdot = m.p / (e * n2) - m.j.cross(&g) / (e * n2) - qdot * g / e
        - (m.p * q_h + (m.q * g) * (2.0 * m.p.dot(&g))) / (e * e * n2);
    let pdot = g * e + t3_contract2(&jet.third, &m.q);
    let qh = m.q * jet.hess;
    let mut jdot = m.p.cross(&xdot);
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                jdot[i] += levi(i, j, k) * qh[(j, k)];
            }
        }
    }
    MomentRates { x: xdot, p: pdot, j: jdot, q: qdot }
}

/// Full right-hand side; returns the Hessian data as a by-product.
pub fn dynamics_rhs(aug: &AugmentedState, medium: &MediumModel, omega: f64, dy: &mut [f64]) -> Result<HessianData> {
    let c_gamma = aug.prop.c_gamma;
    let (dx, dp) = geodesic_rhs(&aug.ray, medium);
    dy[..3].copy_from_slice(dx.as_slice());
    dy[3..6].copy_from_slice(dp.as_slice());
    let lnr = lnr_matrices(&aug.ray, medium, c_gamma);
    let (dj, dv) = riccati_rhs(&aug.prop, &lnr);
    pack_cm3(&dj, &mut dy[6..24]);
    pack_cm3(&dv, &mut dy[24..42]);
    let hd = hessian_and_a(&aug.prop, &lnr)?;
    let de0 = transport_rhs_e0(&aug.e0, &aug.ray, &hd.m, medium, c_gamma);
    for i in 0..3 {
        dy[42 + 2 * i] = de0[i].re;
        dy[43 + 2 * i] = de0[i].im;
    }
    let r = moment_rates(&aug.moments, &hd, medium, omega);
    dy[48..51].copy_from_slice(r.x.as_slice());
    dy[51..54].copy_from_slice(r.p.as_slice());
    dy[54..57].copy_from_slice(r.j.as_slice());
    dy[57..63].copy_from_slice(&sym6(&r.q));
    Ok(hd)
}

pub struct BeamSystem<'a> {
    pub medium: &'a MediumModel,
    pub omega: f64,
    pub e: f64,
    pub c_gamma: f64,
}

impl OdeSystem for BeamSystem<'_> {
    fn dim(&self) -> usize {
        STATE_DIM
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let aug = AugmentedState::unpack(y, self.e, self.c_gamma);
        dynamics_rhs(&aug, self.medium, self.omega, dy)?;
        if dy.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(SimError::Integration { t: 0.0, msg: "non-finite derivative".into() })
        }
    }
}

#[derive(Clone, Debug)]
pub struct BeamSample {
    pub t: f64,
    pub state: AugmentedState,
    pub hessian: HessianData,
    pub helicity: f64,
    pub hamiltonian: f64,
    pub min_eig_im_m: f64,
    pub densities: ConservedDensities,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub spec: BeamSpec,
    pub c_gamma: f64,
    pub energy: f64,
    pub samples: Vec<BeamSample>,
}

pub fn initial_state(spec: &BeamSpec, medium: &MediumModel) -> Result<AugmentedState> {
    spec.validate()?;
    let ray = ray_from_beam(&spec.x0, &spec.direction, medium)?;
    let c_gamma = spec.c_gamma(medium);
    let prop = init_propagator(&spec.s0, &spec.b0, c_gamma)?;
    let moments = initial_moments(spec, medium)?;
    Ok(AugmentedState { ray, prop, e0: spec.e0(), moments })
}

fn make_sample(t: f64, state: AugmentedState, medium: &MediumModel) -> Result<BeamSample> {
    let c_gamma = state.prop.c_gamma;
    let lnr = lnr_matrices(&state.ray, medium, c_gamma);
    let hessian = hessian_and_a(&state.prop, &lnr).map_err(|e| e.at_time(t))?;
    let min_eig_im_m = min_sym_eig(&hessian.s);
    let em = medium.eps_mu_jet(&state.ray.x);
    let n = medium.index(&state.ray.x);
    let h0 = h0_from_e0(&state.e0, &state.ray, medium, c_gamma);
    let helicity = polarization_s(&state.e0, &h0, n, em.eps)?;
    let densities = conserved_densities(&state.e0, &h0, &hessian.s, em.eps, em.mu, n)?;
    let qmin = min_sym_eig(&state.moments.q);
    if !(qmin > 0.0) {
        debug_assert!(qmin > 0.0, "Q lost positivity at t = {t}");
        warn!("quadrupole moment not positive definite at t = {t} (min eigenvalue {qmin:e})");
    }
    Ok(BeamSample { t, state, hessian, helicity, hamiltonian: hamiltonian(&state.ray, medium), min_eig_im_m, densities })
}

/// Integrates one beam and samples it at `times` (ascending, starting at or after 0).
pub fn integrate_beam_at(spec: &BeamSpec, medium: &MediumModel, times: &[f64], stepper: Stepper) -> Result<Trajectory> {
    let init = initial_state(spec, medium)?;
    let c_gamma = init.prop.c_gamma;
    let energy = init.moments.e;
    let sys = BeamSystem { medium, omega: spec.omega, e: energy, c_gamma };
    let sol = ode::integrate(&sys, 0.0, &init.pack(), times, stepper)?;
    let samples = sol
        .t
        .iter()
        .zip(&sol.y)
        .map(|(&t, y)| make_sample(t, AugmentedState::unpack(y, energy, c_gamma), medium))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory { spec: spec.clone(), c_gamma, energy, samples })
}

pub fn integrate_beam(spec: &BeamSpec, medium: &MediumModel, t_end: f64, stride: f64, stepper: Stepper) -> Result<Trajectory> {
    if !(t_end > 0.0) || !(stride > 0.0) {
        return Err(SimError::input("t_end and the sample stride must be positive"));
    }
    integrate_beam_at(spec, medium, &ode::sample_times(t_end, stride), stepper)
}

/// Sign of the ∇ln n term in the transverse part of the late-time angular momentum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransverseGradientSign {
    /// −(φ̇/E)|P| (A⁻¹∇ln n) inside the bracket, as printed.
    AsPrinted,
    /// The opposite sign.
    Flipped,
}

/// Closed-form predictions of J and Q at a sample.
pub fn closed_form_jq(sample: &BeamSample, spec: &BeamSpec, medium: &MediumModel, c_gamma: f64) -> (V3, M3) {
    closed_form_jq_with(sample, spec, medium, c_gamma, TransverseGradientSign::Flipped)
}

pub fn closed_form_jq_with(
    sample: &BeamSample,
    spec: &BeamSpec,
    medium: &MediumModel,
    c_gamma: f64,
    sign: TransverseGradientSign,
) -> (V3, M3) {
    let m = &sample.state.moments;
    let w = spec.omega.recip();
    let phi_dot0 = -c_gamma;
    let pn = m.p.norm();
    let ph = m.p / pn;
    // iA⁻¹ is real, so every i·A⁻¹ product below is real
    let k = sample.hessian.ia_inv;
    let kb = k * sample.hessian.b;
    let g = medium.log_index_jet(&m.x).grad;
    let mut eps_pkb = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                eps_pkb += levi(a, b, c) * ph[a] * kb[(b, c)];
            }
        }
    }
    let pref = w * m.e / phi_dot0;
    let long = ph * (pref * (spec.s - eps_pkb));
    let grad_coef = match sign {
        TransverseGradientSign::AsPrinted => 1.0,
        TransverseGradientSign::Flipped => -1.0,
    };
    let bracket = kb.transpose() * ph - k * g * (grad_coef * phi_dot0 / m.e * pn);
    let trans = bracket.cross(&ph) * pref;
    (long + trans, k * (w * m.e))
}

#[derive(Clone, Debug)]
pub struct PairReport {
    pub times: Vec<f64>,
    pub sep: Vec<V3>,
    /// Distance of the s = +1 centroid from the ray.
    pub geo_dev: Vec<f64>,
    pub geodesic: Vec<V3>,
    /// cos of the angle between d(sep)/dt and P × ∇ln n where |∇ln n(X)| peaks.
    pub mid_cos_angle: f64,
    pub mid_time: f64,
    pub plus: Trajectory,
    pub minus: Trajectory,
}

pub fn spin_hall_pair(spec: &BeamSpec, medium: &MediumModel, times: &[f64], stepper: Stepper) -> Result<PairReport> {
    if spec.s != 1.0 {
        return Err(SimError::input("pair runs start from the s = +1 beam"));
    }
    let (plus, minus) = rayon::join(
        || integrate_beam_at(spec, medium, times, stepper),
        || integrate_beam_at(&spec.with_helicity(-1.0), medium, times, stepper),
    );
    let (plus, minus) = (plus?, minus?);
    let mut sep = Vec::with_capacity(times.len());
    let mut geo_dev = Vec::with_capacity(times.len());
    let mut geodesic = Vec::with_capacity(times.len());
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (i, (a, b)) in plus.samples.iter().zip(&minus.samples).enumerate() {
        sep.push(a.state.moments.x - b.state.moments.x);
        geo_dev.push((a.state.moments.x - a.state.ray.x).norm());
        geodesic.push(a.state.ray.x);
        let gn = medium.log_index_jet(&a.state.moments.x).grad.norm();
        if gn > best.0 {
            best = (gn, i);
        }
    }
    let i = best.1;
    let vel = |s: &BeamSample| -> Result<V3> {
        let r = moment_rates(&s.state.moments, &s.hessian, medium, spec.omega);
        Ok(r.x)
    };
    let a = &plus.samples[i];
    let dsep = vel(a)? - vel(&minus.samples[i])?;
    let m = &a.state.moments;
    let dir = m.p.cross(&medium.log_index_jet(&m.x).grad);
    let mid_cos_angle = if dir.norm() > 0.0 && dsep.norm() > 0.0 { dsep.dot(&dir) / (dsep.norm() * dir.norm()) } else { f64::NAN };
    Ok(PairReport { times: plus.samples.iter().map(|s| s.t).collect(), sep, geo_dev, geodesic, mid_cos_angle, mid_time: a.t, plus, minus })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{linspace, Tolerances};

    fn spec() -> BeamSpec {
        BeamSpec {
            x0: V3::new(0.0, -4.0, 0.0),
            direction: V3::new(1.0, 1.0, 0.0).normalize(),
            k: 1.0,
            s0: M3::from_diagonal(&V3::new(1.0, 1.5, 0.8)),
            omega: 400.0,
            ..BeamSpec::default()
        }
    }

    #[test]
    fn pack_roundtrip() {
        let m = MediumModel::homogeneous(1.3).unwrap();
        let aug = initial_state(&spec(), &m).unwrap();
        let back = AugmentedState::unpack(&aug.pack(), aug.moments.e, aug.prop.c_gamma);
        assert_eq!(back.pack(), aug.pack());
    }

    #[test]
    fn homogeneous_rates() {
        let m = MediumModel::homogeneous(1.3).unwrap();
        let aug = initial_state(&spec(), &m).unwrap();
        let mut dy = vec![0.0; STATE_DIM];
        dynamics_rhs(&aug, &m, 400.0, &mut dy).unwrap();
        let mo = &aug.moments;
        let xdot = V3::new(dy[48], dy[49], dy[50]);
        assert!((xdot - mo.p / (mo.e * 1.69)).norm() < 1e-15);
        assert_eq!(&dy[51..54], &[0.0; 3]);
        // J̇ = P × Ẋ = 0 for parallel vectors
        assert!(V3::new(dy[54], dy[55], dy[56]).norm() < 1e-15 * mo.p.norm());
    }

    #[test]
    fn bare_moments_follow_geodesic_form() {
        let m = MediumModel::tanh_slab(1.0, 1.5, [0.0, 1.0, 0.0], 0.0, 1.0).unwrap();
        let mut aug = initial_state(&spec(), &m).unwrap();
        aug.moments.x = V3::new(0.0, 0.1, 0.0);
        aug.moments.j = V3::zeros();
        aug.moments.q = M3::zeros();
        let hd = hessian_and_a(&aug.prop, &lnr_matrices(&aug.ray, &m, aug.prop.c_gamma)).unwrap();
        let r = moment_rates(&aug.moments, &hd, &m, 400.0);
        let n = m.index(&aug.moments.x);
        // Q̇ still forces Ẋ through the substituted form, so compare after removing it
        let g = m.log_index_jet(&aug.moments.x).grad;
        let bare = aug.moments.p / (aug.moments.e * n * n);
        assert!((r.x + r.q * g / aug.moments.e - bare).norm() < 1e-15);
    }

    #[test]
    fn exp_gradient_momentum_rate_is_constant() {
        let alpha = 0.1;
        let m = MediumModel::exp_gradient(1.0, alpha, [0.0, 1.0, 0.0], -10.0).unwrap();
        let traj = integrate_beam(&BeamSpec { x0: V3::zeros(), ..spec() }, &m, 2.0, 0.5, Stepper::default()).unwrap();
        let e = traj.energy;
        for s in &traj.samples {
            let r = moment_rates(&s.state.moments, &s.hessian, &m, 400.0);
            assert!((r.p - V3::new(0.0, alpha * e, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn homogeneous_centroid_is_straight_and_q_tracks_a_inverse() {
        let m = MediumModel::homogeneous(1.2).unwrap();
        let sp = spec();
        let tol = Tolerances::default();
        let traj = integrate_beam_at(&sp, &m, &linspace(5.0, 11), Stepper::Adaptive(tol)).unwrap();
        let s0 = &traj.samples[0].state.moments;
        for s in &traj.samples {
            let mo = &s.state.moments;
            let want = s0.x + s0.p * (s.t / (mo.e * 1.44));
            assert!((mo.x - want).norm() < 1e-9);
            let q_pred = s.hessian.ia_inv * (mo.e / sp.omega);
            assert!((mo.q - q_pred).amax() <= 10.0 * tol.rtol * mo.q.amax());
        }
    }
}
