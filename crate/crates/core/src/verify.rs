//! Self-checks of the moment formulas against quadrature and closed forms. Shared by the `verify`
//! subcommand and the acceptance suite.

use std::f64::consts::PI;
use std::time::Instant;

use serde::Serialize;

use crate::dynamics::{integrate_beam_at, Trajectory};
use crate::error::Result;
use crate::fit::loglog_slope;
use crate::geometry::ray_from_beam;
use crate::initial::{circular_initial_moments, AmplitudeJets, BeamSpec};
use crate::jet::TaylorJet3;
use crate::linalg::{c, cnorm_inf, CV3, C64, I, M3, V3};
use crate::medium::MediumModel;
use crate::ode::{linspace, Stepper, Tolerances};
use crate::oracle::{
    compare_report, covariance_defect, field_moments_at, initial_field_moments, quadrature_moments, GaussianPacket,
};
use crate::quadrature::{brute_force_integral, GaussianFrame, GridSpec};
use crate::riccati::{homogeneous_closed_form, init_propagator, lnr_matrices, propagate_hessian, symplectic_pairing};
use crate::stationary::{expand_integral, PhaseData};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, threshold, pass: value <= threshold, detail: String::new() }
    }

    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, threshold, pass: value >= threshold, detail: String::new() }
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Check { name: name.into(), value: ok as u8 as f64, threshold: 1.0, pass: ok, detail: String::new() }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

/// Geometric ω grid from `lo` to `hi` with `n` points.
pub fn omega_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

fn gaussian_phase(s: &M3) -> TaylorJet3 {
    let h = s.map(|x| c(0.0, 2.0 * x));
    TaylorJet3::from_derivatives(V3::zeros(), 4, c(0.0, 0.0), None, Some(&h), None, None)
}

/// Stationary-phase expansion against exact Gaussian moments and brute-force quadrature.
pub fn verify_stationary(omegas: &[f64], grid: &GridSpec) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let s = M3::new(1.0, 0.3, 0.1, 0.3, 2.0, -0.2, 0.1, -0.2, 1.5);
    let phase = PhaseData::from_jet(gaussian_phase(&s))?;
    let ctr = V3::zeros();
    let x = TaylorJet3::displacement(ctr, 4, 0);
    let y = TaylorJet3::displacement(ctr, 4, 1);
    let z = TaylorJet3::displacement(ctr, 4, 2);
    // q = c0 + b·r + ½ rHr has ∫ q e^{−ω rSr} = (π/ω)^{3/2}/√det S · (c0 + ½ tr(H Σ)), Σ = (2ωS)⁻¹
    let c0 = c(1.0, -0.5);
    let b = CV3::new(c(0.4, 0.0), c(-1.0, 0.3), c(0.2, 0.0));
    let h = M3::new(2.0, 0.5, -1.0, 0.5, -0.6, 0.3, -1.0, 0.3, 1.4).map(|v| c(v, 0.1 * v));
    let mut q = TaylorJet3::constant(ctr, 4, c0);
    for (i, r) in [&x, &y, &z].into_iter().enumerate() {
        q = &q + &r.scale(b[i]);
        for (j, rj) in [&x, &y, &z].into_iter().enumerate() {
            q = &q + &(r * rj).scale(h[(i, j)] * 0.5);
        }
    }
    let mut worst_exact: f64 = 0.0;
    let mut worst_brute: f64 = 0.0;
    for omega in [3.0, 50.0, 400.0] {
        let sigma = (s * (2.0 * omega)).try_inverse().expect("S is SPD");
        let tr: C64 = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| h[(i, j)] * sigma[(j, i)]).sum();
        let want = (c0 + tr * 0.5) * ((PI / omega).powf(1.5) / s.determinant().sqrt());
        let got = expand_integral(&q, &phase, omega, 1)?;
        worst_exact = worst_exact.max((got - want).norm() / want.norm());
        let frame = GaussianFrame::from_precision(ctr, &(s * (2.0 * omega)))?;
        let brute = brute_force_integral(|p| q.eval(p), |p| c(0.0, (p.transpose() * s * p)[0]), omega, &frame, grid)?;
        worst_brute = worst_brute.max((brute.value - want).norm() / want.norm());
    }
    out.push(Check::at_most("stationary.quadratic_exact", worst_exact, 1e-8).with_detail("expansion vs closed-form Gaussian moments"));
    out.push(Check::at_most("stationary.quadratic_quadrature", worst_brute, 1e-8).with_detail("quadrature vs closed-form Gaussian moments"));

    // cubic and quartic phase terms, q = exp(x) cos(y)
    let mut f = gaussian_phase(&M3::new(1.0, 0.2, 0.0, 0.2, 1.5, 0.1, 0.0, 0.1, 0.8));
    f.set_coeff(3, 0, 0, c(0.3, 0.0));
    f.set_coeff(1, 1, 1, c(0.0, 0.2));
    f.set_coeff(0, 4, 0, c(0.1, 0.0));
    let s2 = M3::new(1.0, 0.2, 0.0, 0.2, 1.5, 0.1, 0.0, 0.1, 0.8);
    let phase = PhaseData::from_jet(f.clone())?;
    let iy = y.scale(I);
    let cos_y = (&iy.exp() + &iy.scale(c(-1.0, 0.0)).exp()).scale(c(0.5, 0.0));
    let q = &x.exp() * &cos_y;
    let mut errs = Vec::new();
    for &omega in omegas {
        let frame = GaussianFrame::from_precision(ctr, &(s2 * (2.0 * omega)))?;
        let brute = brute_force_integral(|p| c(p[0].exp() * p[1].cos(), 0.0), |p| f.eval(p), omega, &frame, grid)?.value;
        let e1 = expand_integral(&q, &phase, omega, 1)?;
        errs.push((omega, (e1 - brute).norm() / brute.norm()));
    }
    let fit = loglog_slope(&errs);
    out.push(
        Check::at_most("stationary.smooth_residual_exponent", fit.slope, -1.8)
            .with_detail(format!("relative residuals {errs:?}")),
    );
    Ok(out)
}

/// SPD matrices used when no random source is wanted.
pub fn fixed_spd_samples() -> [M3; 3] {
    [
        M3::new(1.0, 0.2, -0.1, 0.2, 0.8, 0.05, -0.1, 0.05, 1.3),
        M3::new(2.5, -0.4, 0.3, -0.4, 0.6, 0.1, 0.3, 0.1, 1.1),
        M3::new(0.4, 0.1, 0.0, 0.1, 0.9, -0.3, 0.0, -0.3, 3.0),
    ]
}

/// Maximum ‖M(t) − (M0⁻¹ + tL)⁻¹‖∞ and the worst relative drift of the symplectic pairing for one
/// homogeneous run on t ∈ [0, t_end].
pub fn riccati_homogeneous_errors(s0: &M3, b0: &M3, t_end: f64, tol: Tolerances) -> Result<(f64, f64, f64)> {
    let medium = MediumModel::homogeneous(1.3)?;
    let dir = V3::new(0.3, -0.5, 0.8).normalize();
    let ray = ray_from_beam(&V3::zeros(), &dir, &medium)?;
    let c_gamma = 1.7 / medium.index(&ray.x);
    let prop = init_propagator(s0, b0, c_gamma)?;
    let l = lnr_matrices(&ray, &medium, c_gamma).l;
    let m0 = prop.v * prop.j.try_inverse().expect("J0 = I");
    let samples = propagate_hessian(&ray, &prop, &medium, &linspace(t_end, 51), Stepper::Adaptive(tol))?;
    let basis = [V3::x(), V3::y(), V3::z()].map(|v| v.map(|x| C64::new(x, 0.0)));
    let p0 = basis.map(|v| symplectic_pairing(&prop, &v));
    let mut err: f64 = 0.0;
    let mut drift: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    for s in &samples {
        let want = homogeneous_closed_form(&m0, &l, s.t).expect("closed form is regular");
        err = err.max(cnorm_inf(&(s.m - want)));
        for (v, p) in basis.iter().zip(&p0) {
            drift = drift.max((symplectic_pairing(&s.prop, v) - p).norm() / p.norm());
        }
        min_eig = min_eig.min(s.min_eig_im_m);
    }
    Ok((err, drift, min_eig))
}

pub fn verify_riccati(tol: Tolerances) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (i, s0) in fixed_spd_samples().iter().enumerate() {
        let b0 = if i == 1 { M3::new(0.2, 0.1, 0.0, 0.1, -0.3, 0.0, 0.0, 0.0, 0.1) } else { M3::zeros() };
        let (err, drift, min_eig) = riccati_homogeneous_errors(s0, &b0, 5.0, tol)?;
        out.push(Check::at_most(&format!("riccati.closed_form[{i}]"), err, 1e-8));
        out.push(Check::at_most(&format!("riccati.symplectic_drift[{i}]"), drift, 1e-8));
        out.push(Check::at_least(&format!("riccati.min_eig_im_m[{i}]"), min_eig, f64::MIN_POSITIVE));
    }
    Ok(out)
}

/// Beam used by the initial-data checks: exactly homogeneous medium, oblique direction, anisotropic width.
pub fn initial_check_setup(omega: f64) -> Result<(BeamSpec, MediumModel)> {
    let medium = MediumModel::homogeneous(1.2)?;
    let spec = BeamSpec {
        x0: V3::new(0.3, 0.0, -0.4),
        direction: V3::new(0.0, 0.6, 0.8),
        k: 1.5,
        s0: M3::new(1.0, 0.1, 0.0, 0.1, 0.7, 0.0, 0.0, 0.0, 1.2),
        omega,
        ..BeamSpec::default()
    };
    Ok((spec, medium))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InitialDeltas {
    pub omega: f64,
    pub e: f64,
    pub x: f64,
    pub p: f64,
    pub q: f64,
    pub j: f64,
    pub rel_e: f64,
    pub rel_x: f64,
    pub rel_p: f64,
    pub rel_q: f64,
    pub j_cos: f64,
    pub j_perp_ratio: f64,
}

/// Closed-form circular moments against the explicit-field oracle, one row per ω.
pub fn initial_deltas(omegas: &[f64], grid: &GridSpec) -> Result<Vec<InitialDeltas>> {
    omegas
        .iter()
        .map(|&omega| {
            let (spec, medium) = initial_check_setup(omega)?;
            let jets = AmplitudeJets::minimal(&spec, &medium);
            let orc = initial_field_moments(&spec, &jets, &medium, grid)?.value;
            let ode = circular_initial_moments(&spec, &medium)?;
            let r = compare_report(&ode, &orc, &spec.direction);
            Ok(InitialDeltas {
                omega,
                e: r.e.abs,
                x: r.x.abs,
                p: r.p.abs,
                q: r.q.abs,
                j: r.j.abs,
                rel_e: r.e.rel,
                rel_x: r.x.rel,
                rel_p: r.p.rel,
                rel_q: r.q.rel,
                j_cos: r.j_cos,
                j_perp_ratio: r.j_perp.norm() / r.j_parallel.abs(),
            })
        })
        .collect()
}

pub fn verify_initial(omegas: &[f64], grid: &GridSpec) -> Result<Vec<Check>> {
    let rows = initial_deltas(omegas, grid)?;
    let mut out = Vec::new();
    let anchor = rows.iter().min_by(|a, b| (a.omega - 200.0).abs().total_cmp(&(b.omega - 200.0).abs())).expect("nonempty sweep");
    let tag = |q: &str| format!("initial.rel_{q}@{}", anchor.omega);
    out.push(Check::at_most(&tag("E"), anchor.rel_e, 1e-2));
    out.push(Check::at_most(&tag("X"), anchor.rel_x, 1e-2).with_detail("relative to the rms radius"));
    out.push(Check::at_most(&tag("P"), anchor.rel_p, 1e-2));
    out.push(Check::at_most(&tag("Q"), anchor.rel_q, 1e-2));
    let worst_cos = rows.iter().map(|r| r.j_cos).fold(1.0, f64::min);
    out.push(Check::at_least("initial.J_direction_cos", worst_cos, 0.99).with_detail("same direction and sign at every ω"));
    for (name, pick) in [
        ("E", (|r: &InitialDeltas| r.e) as fn(&InitialDeltas) -> f64),
        ("X", |r| r.x),
        ("P", |r| r.p),
        ("Q", |r| r.q),
    ] {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.omega, pick(r))).collect();
        let fit = loglog_slope(&pts);
        out.push(Check::at_most(&format!("initial.delta_{name}_exponent"), fit.slope, -1.8).with_detail(format!("{pts:?}")));
    }
    Ok(out)
}

/// Degree-0 oracle along an integrated beam.
pub fn verify_moments(spec: &BeamSpec, medium: &MediumModel, t_end: f64, tol: Tolerances, omegas: &[f64], grid: &GridSpec) -> Result<Vec<Check>> {
    let times = linspace(t_end, 5);
    let mut out = Vec::new();
    let traj = integrate_beam_at(spec, medium, &times, Stepper::Adaptive(tol))?;
    let mut cov: f64 = 0.0;
    let mut xdev: f64 = 0.0;
    let mut energies = Vec::new();
    let mut signs = Vec::new();
    let mut ode_signs = Vec::new();
    for s in &traj.samples {
        let pk = GaussianPacket::from_sample(s, medium);
        let m = quadrature_moments(&pk, spec.omega, grid)?.value;
        cov = cov.max(covariance_defect(&m, &s.hessian.m, spec.omega));
        xdev = xdev.max((m.x - pk.center).norm() / (m.q.trace() / m.e).sqrt());
        energies.push(m.e);
        let f = field_moments_at(s, medium, spec.omega, grid)?.value;
        let d = s.state.ray.p.normalize();
        signs.push(f.j.dot(&d).signum());
        ode_signs.push(s.state.moments.j.dot(&d).signum());
    }
    let e0 = energies[0];
    let e_drift = energies.iter().map(|e| (e - e0).abs() / e0).fold(0.0, f64::max);
    out.push(Check::at_most("moments.covariance_identity", cov, 1e-5));
    out.push(Check::at_most("moments.centroid_on_ray", xdev, 1e-10).with_detail("relative to the rms radius"));
    out.push(Check::at_most("moments.oracle_energy_drift", e_drift, 1e-5));
    let consistent = signs.iter().all(|s| *s == signs[0]) && signs == ode_signs;
    out.push(Check::flag("moments.J_parallel_sign", consistent).with_detail(format!("oracle {signs:?}, integrated {ode_signs:?}")));

    if spec.omega >= 400.0 {
        let pk = GaussianPacket::from_sample(traj.samples.last().expect("samples"), medium);
        let off = quadrature_moments(&pk, spec.omega, grid)?.value;
        let on = quadrature_moments(&pk, spec.omega, &GridSpec { include_oscillatory: true, ..*grid })?.value;
        out.push(Check::at_most("moments.oscillatory_share", (on.e - off.e).abs() / off.e, 1e-4));
    }

    let mut xs = Vec::new();
    let mut ps = Vec::new();
    for &omega in omegas {
        let sp = BeamSpec { omega, ..spec.clone() };
        let tr = integrate_beam_at(&sp, medium, &times, Stepper::Adaptive(tol))?;
        let (dx, dp) = sweep_deltas(&tr, medium, grid)?;
        xs.push((omega, dx));
        ps.push((omega, dp));
    }
    out.push(Check::at_most("moments.delta_X_exponent", loglog_slope(&xs).slope, -0.9).with_detail(format!("{xs:?}")));
    out.push(Check::at_most("moments.delta_P_exponent", loglog_slope(&ps).slope, -0.9).with_detail(format!("{ps:?}")));
    Ok(out)
}

fn sweep_deltas(tr: &Trajectory, medium: &MediumModel, grid: &GridSpec) -> Result<(f64, f64)> {
    let mut dx: f64 = 0.0;
    let mut dp: f64 = 0.0;
    for s in &tr.samples {
        let pk = GaussianPacket::from_sample(s, medium);
        let m = quadrature_moments(&pk, tr.spec.omega, grid)?.value;
        let r = compare_report(&s.state.moments, &m, &s.state.ray.p);
        dx = dx.max(r.x.abs);
        dp = dp.max(r.p.abs);
    }
    Ok((dx, dp))
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub all_pass: bool,
    pub seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerifyTarget {
    Stationary,
    Initial,
    Moments,
    Riccati,
    All,
}

pub struct VerifyInputs<'a> {
    pub spec: &'a BeamSpec,
    pub medium: &'a MediumModel,
    pub t_end: f64,
    pub tol: Tolerances,
    /// Overrides the default ω sweep of each check.
    pub omegas: Option<Vec<f64>>,
    pub grid: GridSpec,
}

pub fn run_verify(target: VerifyTarget, inp: &VerifyInputs) -> Result<VerifyReport> {
    let start = Instant::now();
    let mut checks = Vec::new();
    let pick = |default: &[f64]| inp.omegas.clone().unwrap_or_else(|| default.to_vec());
    let wants = |t: VerifyTarget| target == VerifyTarget::All || target == t;
    if wants(VerifyTarget::Stationary) {
        checks.extend(verify_stationary(&pick(&[50.0, 100.0, 200.0, 400.0]), &inp.grid)?);
    }
    if wants(VerifyTarget::Riccati) {
        checks.extend(verify_riccati(inp.tol)?);
    }
    if wants(VerifyTarget::Initial) {
        checks.extend(verify_initial(&pick(&[100.0, 200.0, 400.0, 800.0]), &inp.grid)?);
    }
    if wants(VerifyTarget::Moments) {
        checks.extend(verify_moments(inp.spec, inp.medium, inp.t_end, inp.tol, &pick(&[100.0, 200.0, 400.0, 800.0]), &inp.grid)?);
    }
    let all_pass = all_pass(&checks);
    Ok(VerifyReport { checks, all_pass, seconds: start.elapsed().as_secs_f64() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omega_grid_doubles() {
        let g = omega_grid(100.0, 800.0, 4);
        for (a, b) in g.iter().zip([100.0, 200.0, 400.0, 800.0]) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn riccati_checks_pass() {
        assert!(all_pass(&verify_riccati(Tolerances::default()).unwrap()));
    }

    #[test]
    fn stationary_checks_pass() {
        let checks = verify_stationary(&[50.0, 100.0, 200.0, 400.0], &GridSpec::default()).unwrap();
        assert!(all_pass(&checks), "{checks:#?}");
    }
}
