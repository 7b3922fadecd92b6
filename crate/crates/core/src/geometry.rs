//! Rays of the optical metric n²δ as Hamiltonian flow with H = ½|p|²/n².

use crate::error::{Result, SimError};
use crate::medium::MediumModel;
use crate::linalg::V3;
use crate::ode::{self, OdeSystem, Stepper, Tolerances};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayState {
    pub x: V3,
    pub p: V3,
}

impl RayState {
    pub fn to_array(&self) -> [f64; 6] {
        [self.x[0], self.x[1], self.x[2], self.p[0], self.p[1], self.p[2]]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        RayState { x: V3::new(y[0], y[1], y[2]), p: V3::new(y[3], y[4], y[5]) }
    }

    /// Coordinate velocity p/n².
    pub fn velocity(&self, medium: &MediumModel) -> V3 {
        let n = medium.index(&self.x);
        self.p / (n * n)
    }
}

pub fn ray_from_beam(x0: &V3, direction: &V3, medium: &MediumModel) -> Result<RayState> {
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(SimError::input("launch point must be finite"));
    }
    if ((direction.norm() - 1.0).abs()) > 1e-12 {
        return Err(SimError::input("direction must be a unit vector"));
    }
    Ok(RayState { x: *x0, p: direction * medium.index(x0) })
}

pub fn hamiltonian(state: &RayState, medium: &MediumModel) -> f64 {
    let n = medium.index(&state.x);
    0.5 * state.p.norm_squared() / (n * n)
}

/// Returns (ẋ, ṗ) on the H = ½ shell.
pub fn geodesic_rhs(state: &RayState, medium: &MediumModel) -> (V3, V3) {
    let jet = medium.log_index_jet(&state.x);
    debug_assert!(jet.n >= 1.0 - 1e-12, "refractive index below 1 at {:?}", state.x);
    (state.p / (jet.n * jet.n), jet.grad)
}

struct GeodesicSystem<'a> {
    medium: &'a MediumModel,
}

impl OdeSystem for GeodesicSystem<'_> {
    fn dim(&self) -> usize {
        6
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let (dx, dp) = geodesic_rhs(&RayState::from_slice(y), self.medium);
        dy[..3].copy_from_slice(dx.as_slice());
        dy[3..].copy_from_slice(dp.as_slice());
        if dy.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(SimError::Integration { t: 0.0, msg: "non-finite ray derivative".into() })
        }
    }
}

/// Samples the ray at `times` (ascending, starting at or after 0).
pub fn integrate_geodesic_at(
    init: &RayState,
    medium: &MediumModel,
    times: &[f64],
    stepper: Stepper,
) -> Result<Vec<(f64, RayState)>> {
    let sol = ode::integrate(&GeodesicSystem { medium }, 0.0, &init.to_array(), times, stepper)?;
    Ok(sol.t.into_iter().zip(sol.y.iter().map(|y| RayState::from_slice(y))).collect())
}

/// Integrates to `t_end` and samples `samples` equally spaced times including both ends.
pub fn integrate_geodesic(
    init: &RayState,
    medium: &MediumModel,
    t_end: f64,
    tol: Tolerances,
    samples: usize,
) -> Result<Vec<(f64, RayState)>> {
    if !(t_end > 0.0) {
        return Err(SimError::input("t_end must be positive"));
    }
    integrate_geodesic_at(init, medium, &ode::linspace(t_end, samples.max(2)), Stepper::Adaptive(tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn launch_is_on_shell() {
        let m = MediumModel::tanh_slab(1.0, 1.5, [0.0, 1.0, 0.0], 0.0, 1.0).unwrap();
        let x0 = V3::new(0.3, 0.2, -0.1);
        let d = V3::new(1.0, 2.0, 2.0) / 3.0;
        let r = ray_from_beam(&x0, &d, &m).unwrap();
        assert!((hamiltonian(&r, &m) - 0.5).abs() < 1e-15);
        assert!((r.velocity(&m).norm() - 1.0 / m.index(&x0)).abs() < 1e-15);
        assert!(ray_from_beam(&x0, &V3::new(1.0, 1.0, 0.0), &m).is_err());
    }

    #[test]
    fn straight_line_in_homogeneous_medium() {
        let m = MediumModel::homogeneous(1.0).unwrap();
        let r = ray_from_beam(&V3::zeros(), &V3::x(), &m).unwrap();
        let traj = integrate_geodesic(&r, &m, 10.0, Tolerances::default(), 11).unwrap();
        let (t, end) = traj.last().unwrap();
        assert_eq!(*t, 10.0);
        assert!((end.x - V3::new(10.0, 0.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn exp_gradient_momentum_is_linear() {
        let m = MediumModel::exp_gradient(1.0, 0.1, [0.0, 1.0, 0.0], 0.0).unwrap();
        let r = ray_from_beam(&V3::zeros(), &V3::x(), &m).unwrap();
        let (_, dp) = geodesic_rhs(&r, &m);
        assert!((dp - V3::new(0.0, 0.1, 0.0)).norm() < 1e-15);
        for (t, s) in integrate_geodesic(&r, &m, 5.0, Tolerances::default(), 21).unwrap() {
            assert!((s.p - (r.p + V3::new(0.0, 0.1, 0.0) * t)).norm() < 1e-9);
        }
    }

    #[test]
    fn slab_conserves_transverse_momentum_and_reverses() {
        let m = MediumModel::tanh_slab(1.0, 1.5, [0.0, 1.0, 0.0], 0.0, 1.0).unwrap();
        let d = V3::new(1.0, 1.0, 0.3).normalize();
        let r = ray_from_beam(&V3::new(0.0, -3.0, 0.0), &d, &m).unwrap();
        let traj = integrate_geodesic(&r, &m, 10.0, Tolerances::default(), 101).unwrap();
        for (_, s) in &traj {
            assert!((s.p[0] - r.p[0]).abs() < 1e-9 && (s.p[2] - r.p[2]).abs() < 1e-9);
            assert!((hamiltonian(s, &m) - 0.5).abs() < 1e-8);
        }
        let end = traj.last().unwrap().1;
        let back = RayState { x: end.x, p: -end.p };
        let ret = integrate_geodesic(&back, &m, 10.0, Tolerances::default(), 2).unwrap();
        let fin = ret.last().unwrap().1;
        assert!((fin.x - r.x).norm() < 1e-7 && (fin.p + r.p).norm() < 1e-7);
    }
}
