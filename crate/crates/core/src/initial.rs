//! Initial energy and moments (E, X, P, J, Q) of a Gaussian wave packet.

use log::warn;

use crate::error::{Result, SimError};
use crate::jet::{conj_jets, cross_jets, dot_jets, grad_jet, scale_jets, value_vec, TaylorJet3, VecJet};
use crate::linalg::{ccross, cvec, hdot, is_symmetric, levi, min_sym_eig, t3_max_abs, CM3, CV3, C64, I, M3, Tensor3, V3, ZERO_T3};
use crate::medium::MediumModel;
use crate::stationary::{l1_apply, PhaseData};
use crate::transport::e0_from_helicity;

/// Defect above which circular data is reported as not locally homogeneous.
pub const HOMOGENEITY_WARN: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct BeamSpec {
    pub x0: V3,
    /// |∇φ| at x0.
    pub k: f64,
    pub direction: V3,
    /// ∇∇Im φ at x0.
    pub s0: M3,
    /// ∇∇Re φ at x0.
    pub b0: M3,
    /// ∇∇∇Im φ at x0 (general path only).
    pub phi3: Tensor3,
    pub amplitude: f64,
    pub s: f64,
    pub omega: f64,
}

impl Default for BeamSpec {
    fn default() -> Self {
        BeamSpec {
            x0: V3::zeros(),
            k: 1.0,
            direction: V3::z(),
            s0: M3::identity(),
            b0: M3::zeros(),
            phi3: ZERO_T3,
            amplitude: 1.0,
            s: 1.0,
            omega: 400.0,
        }
    }
}

impl BeamSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.x0.iter().all(|v| v.is_finite()) {
            return Err(SimError::config("beam.x0", "must be finite"));
        }
        if (self.direction.norm() - 1.0).abs() > 1e-12 {
            return Err(SimError::config("beam.direction", "must be a unit vector"));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(SimError::config("beam.k", "must be positive"));
        }
        if !is_symmetric(&self.s0, 1e-12) || !(min_sym_eig(&self.s0) > 0.0) {
            return Err(SimError::config("beam.S0", "must be symmetric positive definite"));
        }
        if !is_symmetric(&self.b0, 1e-12) {
            return Err(SimError::config("beam.B0", "must be symmetric"));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(SimError::config("beam.amplitude", "must be positive"));
        }
        if !(-1.0..=1.0).contains(&self.s) {
            return Err(SimError::config("beam.s", "must lie in [-1, 1]"));
        }
        if !(self.omega > 1.0 && self.omega.is_finite()) {
            return Err(SimError::config("beam.omega", "must be greater than 1"));
        }
        Ok(())
    }

    pub fn c_gamma(&self, medium: &MediumModel) -> f64 {
        self.k / medium.index(&self.x0)
    }

    /// Complex phase Hessian M0 = B0 + i S0.
    pub fn m0(&self) -> CM3 {
        self.b0.map(|x| C64::new(x, 0.0)) + self.s0.map(|x| C64::new(0.0, x))
    }

    /// Whether the circular closed form applies.
    pub fn is_circular(&self) -> bool {
        self.s.abs() == 1.0 && self.b0 == M3::zeros() && t3_max_abs(&self.phi3) == 0.0
    }

    pub fn with_helicity(&self, s: f64) -> Self {
        BeamSpec { s, ..self.clone() }
    }

    /// Leading amplitude e₀ at x0.
    pub fn e0(&self) -> CV3 {
        let (x, y) = frame_from_direction(&self.direction);
        e0_from_helicity(self.amplitude, self.s, &x, &y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentState {
    pub e: f64,
    pub x: V3,
    pub p: V3,
    pub j: V3,
    pub q: M3,
}

/// Completes `direction` to a positively oriented orthonormal frame (direction, X, Y).
pub fn frame_from_direction(direction: &V3) -> (V3, V3) {
    let d = direction.normalize();
    let mut seed = 0;
    for i in 1..3 {
        if d[i].abs() < d[seed].abs() {
            seed = i;
        }
    }
    let mut e = V3::zeros();
    e[seed] = 1.0;
    let x = (e - d * d.dot(&e)).normalize();
    (x, d.cross(&x))
}

/// √det(A/2πi) = √det(S/π).
pub fn sqrt_det_weight(s: &M3) -> f64 {
    (s / std::f64::consts::PI).determinant().sqrt()
}

/// Closed-form initial moments for circularly polarised data in a locally homogeneous medium.
pub fn circular_initial_moments(spec: &BeamSpec, medium: &MediumModel) -> Result<MomentState> {
    spec.validate()?;
    if spec.s.abs() != 1.0 {
        return Err(SimError::input("circular data needs s = ±1; use the general path"));
    }
    if spec.b0 != M3::zeros() || t3_max_abs(&spec.phi3) != 0.0 {
        return Err(SimError::input("circular data needs B0 = 0 and vanishing third derivatives; use the general path"));
    }
    let defect = medium.near_homogeneity_defect(&spec.x0);
    if defect > HOMOGENEITY_WARN {
        warn!("medium is not locally homogeneous at x0 (defect {defect:.3e}); circular initial data is approximate");
    }
    let em = medium.eps_mu_jet(&spec.x0);
    let n = medium.index(&spec.x0);
    let (x, y) = frame_from_direction(&spec.direction);
    let d = spec.direction;
    let k = spec.k;
    let s = &spec.s0;
    let w = spec.omega.recip();
    let e0 = em.eps * spec.amplitude.powi(2) / (2.0 * sqrt_det_weight(s));
    let proj = x * x.transpose() + y * y.transpose();
    // −iA:(XX+YY)/8 with A = 2iS
    let e = e0 * (1.0 + w * (s.component_mul(&proj)).sum() / (4.0 * k * k));
    // i(XX+YY)A∇φ/(4k³) = −(XX+YY)S d̂/(2k²)
    let p = (d - proj * s * d * (w / (2.0 * k * k))) * (n * e0);
    // spin along −d̂ for s = +1: the field rotates clockwise about d̂ since φ̇ < 0
    let j = -d * (w * spec.s * e0 * n / k);
    let q = s.try_inverse().expect("S0 is SPD") * (0.5 * w * e);
    Ok(MomentState { e, x: spec.x0, p, j, q })
}

/// Taylor data of the amplitudes at x0 used by the general path.
#[derive(Clone, Debug)]
pub struct AmplitudeJets {
    /// e₀ to order 2.
    pub e0: VecJet,
    /// e₁ at x0.
    pub e1: CV3,
}

impl AmplitudeJets {
    /// Jets that satisfy the orthogonality constraints with every unconstrained component set to zero.
    pub fn minimal(spec: &BeamSpec, medium: &MediumModel) -> Self {
        Self::from_leading(spec, &spec.e0(), medium)
    }

    /// Same construction for a given leading amplitude e₀ ⊥ ∇φ at x0.
    pub fn from_leading(spec: &BeamSpec, e0: &CV3, medium: &MediumModel) -> Self {
        let k2 = spec.k * spec.k;
        let gphi = cvec(&(spec.direction * spec.k));
        let m = spec.m0();
        let e0 = *e0;
        let phi3 = complex_phi3(spec);
        // ∇_a e0^i = −(1/k²)(e0^b M_ab) ∇^iφ
        let em = m * e0;
        let grad = CM3::from_fn(|i, a| -em[a] * gphi[i] / k2);
        let mut hess = [CM3::zeros(); 3];
        for (i, h) in hess.iter_mut().enumerate() {
            for a in 0..3 {
                for b in 0..3 {
                    let mut br = C64::new(0.0, 0.0);
                    for c in 0..3 {
                        br += grad[(c, a)] * m[(b, c)] + grad[(c, b)] * m[(a, c)] + e0[c] * phi3[a][b][c];
                    }
                    h[(a, b)] = -br * gphi[i] / k2;
                }
            }
        }
        let ej: VecJet = [0, 1, 2].map(|i| {
            TaylorJet3::from_derivatives(
                spec.x0,
                2,
                e0[i],
                Some(&CV3::new(grad[(i, 0)], grad[(i, 1)], grad[(i, 2)])),
                Some(&hess[i]),
                None,
                None,
            )
        });
        let div: C64 = (0..3).map(|i| grad[(i, i)]).sum();
        let gle = medium.eps_mu_jet(&spec.x0).grad_ln_eps;
        let e0_gle: C64 = (0..3).map(|i| e0[i] * gle[i]).sum();
        let e1 = gphi * ((div + e0_gle) * I / k2);
        AmplitudeJets { e0: ej, e1 }
    }

    /// Largest violation of e₀·∇φ = 0 to order 2 and of the e₁ constraint at x0.
    pub fn constraint_residual(&self, spec: &BeamSpec, medium: &MediumModel) -> f64 {
        let phi = phase_jet(spec);
        let gphi = grad_jet(&phi);
        let c0 = dot_jets(&self.e0, &gphi.clone().map(|g| g.truncate(2)));
        let mut worst: f64 = 0.0;
        for a in 0..=2 {
            for b in 0..=2 - a {
                for c in 0..=2 - a - b {
                    worst = worst.max(c0.coeff(a, b, c).norm());
                }
            }
        }
        let div: C64 = (0..3).map(|i| self.e0[i].partial(i).value()).sum();
        let gle = medium.eps_mu_jet(&spec.x0).grad_ln_eps;
        let e0 = value_vec(&self.e0);
        let e0_gle: C64 = (0..3).map(|i| e0[i] * gle[i]).sum();
        let g0 = value_vec(&gphi);
        let c1: C64 = (0..3).map(|i| self.e1[i] * g0[i]).sum::<C64>() - I * div - I * e0_gle;
        worst.max(c1.norm())
    }
}

fn complex_phi3(spec: &BeamSpec) -> [[[C64; 3]; 3]; 3] {
    spec.phi3.map(|a| a.map(|b| b.map(|x| C64::new(0.0, x))))
}

/// φ − φ(x0) to order 4: k d̂·r + ½ r M0 r + (i/6) ∇³Imφ rrr.
pub fn phase_jet(spec: &BeamSpec) -> TaylorJet3 {
    let g = cvec(&(spec.direction * spec.k));
    let m0 = spec.m0();
    let t3 = complex_phi3(spec);
    TaylorJet3::from_derivatives(spec.x0, 4, C64::new(0.0, 0.0), Some(&g), Some(&m0), Some(&t3), None)
}

/// Jet of ln n (order 3) at x0.
fn log_index_taylor(medium: &MediumModel, x0: &V3) -> TaylorJet3 {
    let jet = medium.log_index_jet(x0);
    let third = jet.third.map(|a| a.map(|b| b.map(|x| C64::new(x, 0.0))));
    TaylorJet3::from_derivatives(
        *x0,
        3,
        C64::new(jet.n.ln(), 0.0),
        Some(&cvec(&jet.grad)),
        Some(&jet.hess.map(|x| C64::new(x, 0.0))),
        Some(&third),
        None,
    )
}

/// Intermediate densities of the general path, exposed for verification.
#[derive(Clone, Debug)]
pub struct DensityJets {
    pub u0: TaylorJet3,
    pub v0: VecJet,
    pub u1: f64,
    pub v1: V3,
    pub h0: VecJet,
    pub h1: CV3,
    pub e1: CV3,
}

fn re_jet(j: &TaylorJet3) -> TaylorJet3 {
    (j + &j.conj()).scale(C64::new(0.5, 0.0))
}

/// h₀ jet (order 2), h₁ at x0, and the quadratic densities.
pub fn density_jets(spec: &BeamSpec, jets: &AmplitudeJets, medium: &MediumModel) -> DensityJets {
    let mu = medium.mu();
    let phi = phase_jet(spec);
    let gphi = grad_jet(&phi); // order 3
    let ln_n = log_index_taylor(medium, &spec.x0);
    let n = ln_n.exp();
    let n2 = &n * &n;
    // σ = |∇φ|/n = −φ̇
    let sigma = &dot_jets(&gphi, &gphi).sqrt() * &n.recip();
    let phi_dot = sigma.scale(C64::new(-1.0, 0.0));
    let eps = n2.scale(C64::new(1.0 / mu, 0.0));

    let gphi2 = gphi.clone().map(|g| g.truncate(2));
    // h₀ = −(1/(μφ̇)) ∇φ × e₀
    let inv = phi_dot.truncate(2).recip().scale(C64::new(-1.0 / mu, 0.0));
    let h0 = scale_jets(&cross_jets(&gphi2, &jets.e0), &inv);

    let u0 = (&(&eps.truncate(2) * &dot_jets(&jets.e0, &conj_jets(&jets.e0))) + &dot_jets(&h0, &conj_jets(&h0)).scale(C64::new(mu, 0.0)))
        .scale(C64::new(0.25, 0.0));
    let half_n2 = n2.truncate(2).scale(C64::new(0.5, 0.0));
    let exh = cross_jets(&jets.e0, &conj_jets(&h0));
    let v0 = exh.map(|c| re_jet(&(&c * &half_n2)));

    // values at x0
    let nv = n.value().re;
    let n2v = nv * nv;
    let pd = phi_dot.value();
    let gp = value_vec(&gphi);
    let e0 = value_vec(&jets.e0);
    let h0v = value_vec(&h0);
    let grad_ln_n = cvec(&medium.log_index_jet(&spec.x0).grad);
    let grad_ln_eps = cvec(&medium.eps_mu_jet(&spec.x0).grad_ln_eps);
    let lap = spec.m0().trace();
    // φ̈ = ∇φ·∇σ / (n² σ) with σ = −φ̇
    let gs = sigma.grad();
    let phi_ddot = (0..3).map(|i| gp[i] * gs[i]).sum::<C64>() / (n2v * sigma.value());
    let curl_e0 = CV3::new(
        jets.e0[2].partial(1).value() - jets.e0[1].partial(2).value(),
        jets.e0[0].partial(2).value() - jets.e0[2].partial(0).value(),
        jets.e0[1].partial(0).value() - jets.e0[0].partial(1).value(),
    );
    let gdh = CV3::from_fn(|i, _| (0..3).map(|j| gp[j] * h0[i].partial(j).value()).sum());
    let h_gln2: C64 = (0..3).map(|m| h0v[m] * grad_ln_n[m] * 2.0).sum();
    let g_gle: C64 = (0..3).map(|m| gp[m] * grad_ln_eps[m]).sum();
    let c1 = C64::from(-1.0) / (pd * mu);
    let h1 = ccross(&gp, &jets.e1) * c1 + curl_e0 * (I / (pd * mu)) + gdh * (I / (pd * pd * n2v))
        + (h0v * lap - h0v * (phi_ddot * n2v) + gp * h_gln2 - h0v * g_gle) * (I / (pd * pd * 2.0 * n2v));

    let epsv = eps.value().re;
    let u1 = 0.5 * (hdot(&e0, &jets.e1) * epsv + hdot(&h0v, &h1) * mu).re;
    let v1 = (ccross(&e0, &h1.map(|z| z.conj())) + ccross(&jets.e1, &h0v.map(|z| z.conj()))).map(|z| z.re) * (0.5 * n2v);
    DensityJets { u0, v0, u1, v1, h0, h1, e1: jets.e1 }
}

/// Moments from Taylor jets of the amplitudes through the stationary-phase expansion.
pub fn general_initial_moments(spec: &BeamSpec, jets: &AmplitudeJets, medium: &MediumModel) -> Result<MomentState> {
    spec.validate()?;
    if jets.e0.iter().any(|j| j.order < 2) {
        return Err(SimError::input("e0 jet must have order 2"));
    }
    let resid = jets.constraint_residual(spec, medium);
    let scale = spec.amplitude * spec.k.max(1.0) * spec.s0.amax().max(1.0);
    if resid > 1e-10 * scale {
        return Err(SimError::input(format!("amplitude jets violate the constraints (residual {resid:.3e})")));
    }
    let dj = density_jets(spec, jets, medium);
    let w = spec.omega.recip();
    // f = 2i Im φ
    let phi = phase_jet(spec);
    let f = (&phi - &phi.conj()).scale(C64::new(1.0, 0.0));
    let phase = PhaseData::from_jet(f)?;
    let a_inv = *phase.a_inv();
    let sq = sqrt_det_weight(&spec.s0);

    let u0 = dj.u0.value().re;
    let e = (u0 + w * (dj.u1 + l1_apply(&dj.u0, &phase)?.re)) / sq;
    let mut p = V3::zeros();
    for i in 0..3 {
        p[i] = (dj.v0[i].value().re + w * (dj.v1[i] + l1_apply(&dj.v0[i], &phase)?.re)) / sq;
    }
    let grad_u = dj.u0.grad();
    let t3 = complex_phi3(spec).map(|a| a.map(|b| b.map(|z| z.im)));
    let mut contr = CV3::zeros();
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                contr[a] += a_inv[(b, c)] * t3[a][b][c];
            }
        }
    }
    let x = spec.x0 + ((a_inv * grad_u * I) / C64::from(u0) + a_inv * contr).map(|z| z.re) * w;
    let mut j = V3::zeros();
    for i in 0..3 {
        let mut acc = C64::new(0.0, 0.0);
        for jj in 0..3 {
            for kk in 0..3 {
                let l = levi(i, jj, kk);
                if l == 0.0 {
                    continue;
                }
                let gv = dj.v0[kk].grad();
                let term = (a_inv * gv)[jj] * I - (a_inv * grad_u)[jj] * I * dj.v0[kk].value() / u0;
                acc += term * l;
            }
        }
        j[i] = acc.re * w / sq;
    }
    let q = (a_inv * I).map(|z| z.re) * (w * e);
    Ok(MomentState { e, x, p, j, q })
}

/// Dispatches to the circular closed form when it applies and to the general path otherwise.
pub fn initial_moments(spec: &BeamSpec, medium: &MediumModel) -> Result<MomentState> {
    if spec.is_circular() {
        circular_initial_moments(spec, medium)
    } else {
        general_initial_moments(spec, &AmplitudeJets::minimal(spec, medium), medium)
    }
}

/// Rescales the amplitude so that E = 1.
pub fn normalize_energy(spec: &BeamSpec, medium: &MediumModel) -> Result<BeamSpec> {
    let e = initial_moments(spec, medium)?.e;
    if !(e > 0.0) {
        return Err(SimError::Degenerate("initial energy is not positive".into()));
    }
    Ok(BeamSpec { amplitude: spec.amplitude / e.sqrt(), ..spec.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circ_spec() -> BeamSpec {
        BeamSpec {
            x0: V3::new(0.1, -0.2, 0.3),
            k: 1.7,
            direction: V3::new(1.0, 2.0, 2.0) / 3.0,
            s0: M3::new(1.2, 0.3, -0.1, 0.3, 0.9, 0.2, -0.1, 0.2, 1.5),
            amplitude: 1.3,
            s: 1.0,
            omega: 50.0,
            ..BeamSpec::default()
        }
    }

    #[test]
    fn frames() {
        let (x, y) = frame_from_direction(&V3::z());
        assert_eq!((x, y), (V3::x(), V3::y()));
        let (x, y) = frame_from_direction(&V3::x());
        assert!(x[0].abs() < 1e-15 && y[0].abs() < 1e-15);
        let d = V3::new(-0.3, 0.5, 0.7).normalize();
        let (x, y) = frame_from_direction(&d);
        assert!(x.dot(&y).abs() < 1e-14 && x.dot(&d).abs() < 1e-14 && y.dot(&d).abs() < 1e-14);
        assert!((M3::from_columns(&[d, x, y]).determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn circular_homogeneous_unit() {
        let m = MediumModel::homogeneous(1.0).unwrap();
        let spec = BeamSpec { s0: M3::identity() * 2.0, ..BeamSpec::default() };
        let st = circular_initial_moments(&spec, &m).unwrap();
        let want = M3::identity() * (st.e / (spec.omega * 4.0));
        assert!((st.q - want).amax() < 1e-15);
        let (x, y) = frame_from_direction(&spec.direction);
        assert!(st.j.dot(&x).abs() < 1e-15 && st.j.dot(&y).abs() < 1e-15);
        let neg = circular_initial_moments(&spec.with_helicity(-1.0), &m).unwrap();
        assert_eq!(neg.j, -st.j);
        assert_eq!((neg.e, neg.x, neg.p, neg.q), (st.e, st.x, st.p, st.q));
        assert!(circular_initial_moments(&BeamSpec { b0: M3::identity(), ..spec.clone() }, &m).is_err());
    }

    #[test]
    fn minimal_jets_satisfy_constraints() {
        let m = MediumModel::tanh_slab(1.0, 1.5, [0.0, 1.0, 0.0], 0.0, 1.0).unwrap();
        let mut spec = circ_spec();
        spec.b0 = M3::new(0.2, 0.1, 0.0, 0.1, -0.3, 0.05, 0.0, 0.05, 0.1);
        spec.phi3[0][1][2] = 0.3;
        spec.phi3[1][0][2] = 0.3;
        spec.phi3[2][1][0] = 0.3;
        spec.phi3[0][2][1] = 0.3;
        spec.phi3[1][2][0] = 0.3;
        spec.phi3[2][0][1] = 0.3;
        let jets = AmplitudeJets::minimal(&spec, &m);
        assert!(jets.constraint_residual(&spec, &m) < 1e-12);
    }

    #[test]
    fn general_path_reproduces_circular_closed_form() {
        let m = MediumModel::homogeneous(1.4).unwrap();
        for s in [1.0, -1.0] {
            let spec = circ_spec().with_helicity(s);
            let c = circular_initial_moments(&spec, &m).unwrap();
            let g = general_initial_moments(&spec, &AmplitudeJets::minimal(&spec, &m), &m).unwrap();
            let tol = 1e-10 * c.e;
            assert!((c.e - g.e).abs() < tol, "E {} {}", c.e, g.e);
            assert!((c.x - g.x).norm() < 1e-10, "X {:?} {:?}", c.x, g.x);
            assert!((c.p - g.p).norm() < tol, "P {:?} {:?}", c.p, g.p);
            assert!((c.j - g.j).norm() < tol, "J {:?} {:?}", c.j, g.j);
            assert!((c.q - g.q).amax() < tol * 1e-2);
        }
    }

    #[test]
    fn energy_normalisation() {
        let m = MediumModel::homogeneous(1.2).unwrap();
        let spec = normalize_energy(&circ_spec(), &m).unwrap();
        assert!((initial_moments(&spec, &m).unwrap().e - 1.0).abs() < 1e-14);
    }
}
