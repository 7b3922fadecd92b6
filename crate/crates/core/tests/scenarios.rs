use spinhall::config::{parse_config, ScenarioConfig};
use spinhall::dynamics::{integrate_beam_at, spin_hall_pair};
use spinhall::initial::BeamSpec;
use spinhall::ode::{sample_times, Stepper};
use spinhall::runner::summarize;
use spinhall::MediumModel;

#[test]
fn helicities_separate_symmetrically_off_axis() {
    let cfg = ScenarioConfig::default();
    let medium = cfg.medium_model().unwrap();
    let spec = BeamSpec { omega: 400.0, s: 1.0, ..cfg.beam_spec(&medium).unwrap() };
    let pair = spin_hall_pair(&spec, &medium, &sample_times(20.0, 0.5), Stepper::default()).unwrap();
    let sep = *pair.sep.last().unwrap();
    // in-plane (x, y) motion, transverse shift out of the plane
    assert!(sep.z.abs() > 0.99 * sep.norm(), "{sep:?}");
    let ray_plus = pair.plus.samples.last().unwrap().state.ray.x;
    let ray_minus = pair.minus.samples.last().unwrap().state.ray.x;
    assert_eq!(ray_plus, ray_minus);
    let zp = pair.plus.samples.last().unwrap().state.moments.x.z;
    let zm = pair.minus.samples.last().unwrap().state.moments.x.z;
    assert!((zp + zm).abs() < 1e-9 * zp.abs().max(1.0), "z+ {zp}, z- {zm}");
}

#[test]
fn linear_polarisation_sits_between_helicities() {
    let cfg = ScenarioConfig::default();
    let medium = cfg.medium_model().unwrap();
    let base = cfg.beam_spec(&medium).unwrap();
    let times = sample_times(20.0, 1.0);
    let z = |s: f64| {
        let t = integrate_beam_at(&base.with_helicity(s), &medium, &times, Stepper::default()).unwrap();
        t.samples.last().unwrap().state.moments.x.z
    };
    let (zp, z0, zm) = (z(1.0), z(0.0), z(-1.0));
    assert!(z0.abs() < 1e-9, "linear drift {z0}");
    assert!(zp > 0.0 && zm < 0.0 || zp < 0.0 && zm > 0.0);
}

#[test]
fn every_medium_kind_integrates() {
    let docs = [
        r#"{"medium": {"kind": "homogeneous", "n_left": 1.4}}"#,
        r#"{"medium": {"kind": "gaussian_lens", "n_left": 1.0, "amplitude": 0.2, "sigma": 2.0}, "beam": {"x0": [-5, 0.3, 0], "direction": [1, 0, 0]}}"#,
        r#"{"medium": {"kind": "exp_gradient", "n_left": 1.2, "alpha": 0.05}, "beam": {"x0": [0, 0, 0]}}"#,
        r#"{"medium": {"kind": "tanh_slab"}}"#,
    ];
    for doc in docs {
        let cfg = parse_config(doc).unwrap();
        let medium = cfg.medium_model().unwrap();
        let spec = cfg.beam_spec(&medium).unwrap();
        let t = integrate_beam_at(&spec, &medium, &sample_times(6.0, 0.5), Stepper::default()).unwrap();
        let s = summarize(&t, &medium);
        assert!(s.min_eig_im_m > 0.0 && s.min_eig_q > 0.0, "{doc}");
        assert!(s.max_hamiltonian_drift < 1e-8, "{doc}: {}", s.max_hamiltonian_drift);
        assert!(s.max_quadrupole_identity_defect < 1e-8, "{doc}");
    }
}

#[test]
fn custom_medium_matches_builtin_slab() {
    let slab = MediumModel::tanh_slab(1.0, 1.5, [0.0, 1.0, 0.0], 0.0, 1.0).unwrap();
    let custom = MediumModel::custom(|x| 1.25 + 0.25 * x.y.tanh());
    let cfg = ScenarioConfig::default();
    let spec = cfg.beam_spec(&slab).unwrap();
    let times = sample_times(12.0, 1.0);
    let a = integrate_beam_at(&spec, &slab, &times, Stepper::default()).unwrap();
    let b = integrate_beam_at(&spec, &custom, &times, Stepper::default()).unwrap();
    let (xa, xb) = (a.samples.last().unwrap().state.moments.x, b.samples.last().unwrap().state.moments.x);
    assert!((xa - xb).norm() < 1e-5, "{xa:?} vs {xb:?}");
}
