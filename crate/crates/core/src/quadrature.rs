//! Tensor-product quadrature on boxes aligned with the principal axes of a Gaussian weight.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::linalg::{sym_eigen, C64, M3, V3};

/// Relative tail mass above which a quadrature result carries a warning.
pub const TAIL_WARN: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QuadRule {
    #[default]
    GaussLegendre,
    Midpoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub half_width_sigmas: f64,
    pub points_per_axis: usize,
    pub include_oscillatory: bool,
    pub rule: QuadRule,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { half_width_sigmas: 8.0, points_per_axis: 61, include_oscillatory: false, rule: QuadRule::GaussLegendre }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.points_per_axis < 21 || self.points_per_axis.is_multiple_of(2) {
            return Err(SimError::config("grid.points_per_axis", "must be an odd integer >= 21"));
        }
        if !(self.half_width_sigmas >= 4.0) || !self.half_width_sigmas.is_finite() {
            return Err(SimError::config("grid.half_width_sigmas", "must be >= 4"));
        }
        Ok(())
    }

    /// Fraction of a unit Gaussian's mass outside the box (union bound over axes).
    pub fn tail_estimate(&self) -> f64 {
        3.0 * libm::erfc(self.half_width_sigmas / std::f64::consts::SQRT_2)
    }

    fn rule_1d(&self) -> Vec<(f64, f64)> {
        let n = self.points_per_axis;
        match self.rule {
            QuadRule::GaussLegendre => GaussLegendre::new(NonZeroUsize::new(n).expect("n > 0"))
                .as_node_weight_pairs()
                .to_vec(),
            QuadRule::Midpoint => {
                let h = 2.0 / n as f64;
                (0..n).map(|i| (-1.0 + h * (i as f64 + 0.5), h)).collect()
            }
        }
    }
}

/// Center, orthonormal principal axes (columns) and standard deviations of a Gaussian weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianFrame {
    pub center: V3,
    pub axes: M3,
    pub sigma: V3,
}

impl GaussianFrame {
    /// Frame of the weight exp(−½ rᵀ K r).
    pub fn from_precision(center: V3, k: &M3) -> Result<Self> {
        let (vals, axes) = sym_eigen(k);
        if !(vals[0] > 0.0) {
            return Err(SimError::Degenerate("Gaussian weight is not positive definite".into()));
        }
        Ok(GaussianFrame { center, axes, sigma: vals.map(|l| 1.0 / l.sqrt()) })
    }
}

pub struct TensorGrid {
    pub points: Vec<V3>,
    pub weights: Vec<f64>,
    pub tail_estimate: f64,
}

impl TensorGrid {
    pub fn new(frame: &GaussianFrame, spec: &GridSpec) -> Result<Self> {
        spec.validate()?;
        let rule = spec.rule_1d();
        let half = frame.sigma * spec.half_width_sigmas;
        let jac = half[0] * half[1] * half[2];
        let n = rule.len();
        let mut points = Vec::with_capacity(n * n * n);
        let mut weights = Vec::with_capacity(n * n * n);
        for &(a, wa) in &rule {
            for &(b, wb) in &rule {
                for &(c, wc) in &rule {
                    let local = V3::new(a * half[0], b * half[1], c * half[2]);
                    points.push(frame.center + frame.axes * local);
                    weights.push(wa * wb * wc * jac);
                }
            }
        }
        Ok(TensorGrid { points, weights, tail_estimate: spec.tail_estimate() })
    }

    /// Integrates `n_out` real functions at once. Slabs are reduced in a fixed order.
    pub fn integrate<F>(&self, n_out: usize, f: F) -> Vec<f64>
    where
        F: Fn(&V3, &mut [f64]) + Sync,
    {
        let chunk = (self.points.len() / 64).max(1);
        let partial: Vec<Vec<f64>> = self
            .points
            .par_chunks(chunk)
            .zip(self.weights.par_chunks(chunk))
            .map(|(pts, ws)| {
                let mut acc = vec![0.0; n_out];
                let mut buf = vec![0.0; n_out];
                for (p, w) in pts.iter().zip(ws) {
                    buf.iter_mut().for_each(|v| *v = 0.0);
                    f(p, &mut buf);
                    for (a, b) in acc.iter_mut().zip(&buf) {
                        *a += w * b;
                    }
                }
                acc
            })
            .collect();
        let mut total = vec![0.0; n_out];
        for p in &partial {
            for (t, v) in total.iter_mut().zip(p) {
                *t += v;
            }
        }
        total
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadResult<T> {
    pub value: T,
    pub tail_estimate: f64,
    pub warning: Option<String>,
}

fn tail_warning(tail: f64) -> Option<String> {
    (tail > TAIL_WARN).then(|| format!("estimated tail mass {tail:.2e} exceeds {TAIL_WARN:.0e}"))
}

/// ∫ q e^{iωf} over a box around `frame`, where `frame` describes |e^{iωf}|.
pub fn brute_force_integral<Q, F>(q: Q, f: F, omega: f64, frame: &GaussianFrame, spec: &GridSpec) -> Result<QuadResult<C64>>
where
    Q: Fn(&V3) -> C64 + Sync,
    F: Fn(&V3) -> C64 + Sync,
{
    let grid = TensorGrid::new(frame, spec)?;
    let out = grid.integrate(2, |x, o| {
        let v = q(x) * (C64::new(0.0, omega) * f(x)).exp();
        o[0] = v.re;
        o[1] = v.im;
    });
    Ok(QuadResult { value: C64::new(out[0], out[1]), tail_estimate: grid.tail_estimate, warning: tail_warning(grid.tail_estimate) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_gaussian() {
        // e^{-|x|^2} = e^{iωf} with f = i|x|^2, ω = 1; precision 2I
        let frame = GaussianFrame::from_precision(V3::zeros(), &(M3::identity() * 2.0)).unwrap();
        let r = brute_force_integral(|_| C64::new(1.0, 0.0), |x| C64::new(0.0, x.norm_squared()), 1.0, &frame, &GridSpec::default())
            .unwrap();
        assert!((r.value.re - PI.powf(1.5)).abs() < 1e-10 * PI.powf(1.5));
        assert!(r.warning.is_none());
        let six = GridSpec { half_width_sigmas: 6.0, ..GridSpec::default() };
        let r6 = brute_force_integral(|_| C64::new(1.0, 0.0), |x| C64::new(0.0, x.norm_squared()), 1.0, &frame, &six).unwrap();
        assert!(r6.warning.is_some());
        assert!((r6.value.re - PI.powf(1.5)).abs() < 1e-8 * PI.powf(1.5));
    }

    #[test]
    fn rotated_anisotropic_second_moment() {
        let axes = nalgebra::Rotation3::from_euler_angles(0.3, -0.5, 1.1).into_inner();
        let k = axes * M3::from_diagonal(&V3::new(1.0, 4.0, 9.0)) * axes.transpose();
        let frame = GaussianFrame::from_precision(V3::new(1.0, 2.0, -1.0), &k).unwrap();
        let grid = TensorGrid::new(&frame, &GridSpec::default()).unwrap();
        let c = frame.center;
        let out = grid.integrate(2, |x, o| {
            let r = x - c;
            let w = (-0.5 * (r.transpose() * k * r)[0]).exp();
            o[0] = w;
            o[1] = w * r[0] * r[1];
        });
        let cov = k.try_inverse().unwrap();
        let norm = (2.0 * PI).powf(1.5) / k.determinant().sqrt();
        assert!((out[0] - norm).abs() < 1e-10 * norm);
        assert!((out[1] / out[0] - cov[(0, 1)]).abs() < 1e-10);
    }

    #[test]
    fn midpoint_rule_and_validation() {
        let frame = GaussianFrame::from_precision(V3::zeros(), &(M3::identity() * 2.0)).unwrap();
        let mid = GridSpec { rule: QuadRule::Midpoint, points_per_axis: 81, ..GridSpec::default() };
        let r = brute_force_integral(|_| C64::new(1.0, 0.0), |x| C64::new(0.0, x.norm_squared()), 1.0, &frame, &mid).unwrap();
        assert!((r.value.re - PI.powf(1.5)).abs() < 1e-8);
        assert!(GridSpec { points_per_axis: 20, ..GridSpec::default() }.validate().is_err());
        assert!(GridSpec { points_per_axis: 22, ..GridSpec::default() }.validate().is_err());
        assert!(GridSpec { half_width_sigmas: 3.0, ..GridSpec::default() }.validate().is_err());
    }
}
