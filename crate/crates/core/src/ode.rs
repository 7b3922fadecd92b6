//! Explicit Runge–Kutta integrators: Dormand–Prince 5(4) with dense output, and classical RK4.

use crate::error::{Result, SimError};

pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-9, atol: 1e-12 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stepper {
    Adaptive(Tolerances),
    /// Classical RK4 with step `dt`; the last step before each output time is shortened to land on it.
    Fixed { dt: f64 },
}

impl Default for Stepper {
    fn default() -> Self {
        Stepper::Adaptive(Tolerances::default())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub stats: Stats,
}

const MAX_STEPS: usize = 2_000_000;

// Dormand–Prince tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Integrates from `t0` and records the state at each time in `t_out` (ascending, all ≥ t0).
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t_out: &[f64],
    stepper: Stepper,
) -> Result<Solution> {
    if t_out.windows(2).any(|w| w[1] < w[0]) || t_out.first().is_some_and(|&t| t < t0) {
        return Err(SimError::input("output times must be ascending and not before t0"));
    }
    if y0.len() != sys.dim() {
        return Err(SimError::input("initial state has the wrong dimension"));
    }
    match stepper {
        Stepper::Adaptive(tol) => {
            if !(tol.rtol > 0.0 && tol.atol > 0.0) {
                return Err(SimError::input("tolerances must be positive"));
            }
            dopri5(sys, t0, y0, t_out, tol)
        }
        Stepper::Fixed { dt } => {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(SimError::input("fixed step must be positive"));
            }
            rk4(sys, t0, y0, t_out, dt)
        }
    }
}

fn err_norm(y: &[f64], ynew: &[f64], err: &[f64], tol: Tolerances) -> f64 {
    let mut acc = 0.0;
    for i in 0..y.len() {
        let sc = tol.atol + tol.rtol * y[i].abs().max(ynew[i].abs());
        acc += (err[i] / sc).powi(2);
    }
    (acc / y.len() as f64).sqrt()
}

fn initial_step<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    tol: Tolerances,
    span: f64,
    stats: &mut Stats,
) -> Result<f64> {
    let n = y0.len();
    let sc: Vec<f64> = y0.iter().map(|y| tol.atol + tol.rtol * y.abs()).collect();
    let d0 = (y0.iter().zip(&sc).map(|(y, s)| (y / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d1 = (f0.iter().zip(&sc).map(|(f, s)| (f / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; n];
    sys.rhs(t0 + h0, &y1, &mut f1)?;
    stats.rhs_evals += 1;
    let d2 = (f1.iter().zip(f0).zip(&sc).map(|((a, b), s)| ((a - b) / s).powi(2)).sum::<f64>() / n as f64)
        .sqrt()
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    Ok((100.0 * h0).min(h1).min(span))
}

fn dopri5<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t_out: &[f64],
    tol: Tolerances,
) -> Result<Solution> {
    let n = y0.len();
    let t_end = t_out.last().copied().unwrap_or(t0);
    let mut sol = Solution { t: Vec::with_capacity(t_out.len()), y: Vec::with_capacity(t_out.len()), stats: Stats::default() };
    let mut next = 0;
    while next < t_out.len() && t_out[next] == t0 {
        sol.t.push(t0);
        sol.y.push(y0.to_vec());
        next += 1;
    }
    if next == t_out.len() {
        return Ok(sol);
    }

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    sys.rhs(t, &y, &mut k1).map_err(|e| e.at_time(t))?;
    sol.stats.rhs_evals += 1;
    let mut h = initial_step(sys, t, &y, &k1, tol, t_end - t0, &mut sol.stats)?;

    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut steps = 0usize;
    let mut reject_streak = false;

    while next < t_out.len() {
        steps += 1;
        if steps > MAX_STEPS {
            return Err(SimError::Integration { t, msg: "maximum number of steps exceeded".into() });
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(SimError::Integration { t, msg: "step size underflow".into() });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }

        let stages = (|| -> Result<()> {
            for i in 0..n {
                ytmp[i] = y[i] + h * A21 * k1[i];
            }
            sys.rhs(t + C2 * h, &ytmp, &mut k2)?;
            for i in 0..n {
                ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            sys.rhs(t + C3 * h, &ytmp, &mut k3)?;
            for i in 0..n {
                ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            sys.rhs(t + C4 * h, &ytmp, &mut k4)?;
            for i in 0..n {
                ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            sys.rhs(t + C5 * h, &ytmp, &mut k5)?;
            for i in 0..n {
                ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            sys.rhs(t + h, &ytmp, &mut k6)?;
            for i in 0..n {
                ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            sys.rhs(t + h, &ynew, &mut k7)?;
            Ok(())
        })();
        sol.stats.rhs_evals += 6;

        let e = match stages {
            Ok(()) => {
                for i in 0..n {
                    err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                }
                err_norm(&y, &ynew, &err, tol)
            }
            // a failing trial stage (e.g. leaving the domain) is treated like a large error
            Err(_) if h > 1e-10 * t.abs().max(1.0) => f64::INFINITY,
            Err(e) => return Err(e.at_time(t)),
        };

        if e.is_finite() && e <= 1.0 {
            let t_new = if last { t_end } else { t + h };
            while next < t_out.len() && t_out[next] <= t_new {
                let theta = if h > 0.0 { (t_out[next] - t) / h } else { 1.0 };
                let theta = theta.clamp(0.0, 1.0);
                let mut yo = vec![0.0; n];
                if theta == 1.0 {
                    yo.copy_from_slice(&ynew);
                } else {
                    let th1 = 1.0 - theta;
                    for i in 0..n {
                        let r1 = y[i];
                        let r2 = ynew[i] - y[i];
                        let r3 = h * k1[i] - r2;
                        let r4 = r2 - h * k7[i] - r3;
                        let r5 = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                        yo[i] = r1 + theta * (r2 + th1 * (r3 + theta * (r4 + th1 * r5)));
                    }
                }
                sol.t.push(t_out[next]);
                sol.y.push(yo);
                next += 1;
            }
            t = t_new;
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            sol.stats.accepted += 1;
            let fac = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
            h *= if reject_streak { fac.min(1.0) } else { fac };
            reject_streak = false;
        } else {
            sol.stats.rejected += 1;
            let fac = if e.is_finite() { (0.9 * e.powf(-0.2)).clamp(0.1, 0.9) } else { 0.25 };
            h *= fac;
            reject_streak = true;
        }
    }
    Ok(sol)
}

fn rk4<S: OdeSystem + ?Sized>(sys: &S, t0: f64, y0: &[f64], t_out: &[f64], dt: f64) -> Result<Solution> {
    let n = y0.len();
    let mut sol = Solution { t: Vec::with_capacity(t_out.len()), y: Vec::with_capacity(t_out.len()), stats: Stats::default() };
    let mut t = t0;
    let mut y = y0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut ytmp = vec![0.0; n];
    for &target in t_out {
        let mut steps = 0usize;
        while t < target {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(SimError::Integration { t, msg: "maximum number of steps exceeded".into() });
            }
            let h = if t + dt >= target * (1.0 - 1e-15) { target - t } else { dt };
            let step = (|| -> Result<()> {
                sys.rhs(t, &y, &mut k1)?;
                for i in 0..n {
                    ytmp[i] = y[i] + 0.5 * h * k1[i];
                }
                sys.rhs(t + 0.5 * h, &ytmp, &mut k2)?;
                for i in 0..n {
                    ytmp[i] = y[i] + 0.5 * h * k2[i];
                }
                sys.rhs(t + 0.5 * h, &ytmp, &mut k3)?;
                for i in 0..n {
                    ytmp[i] = y[i] + h * k3[i];
                }
                sys.rhs(t + h, &ytmp, &mut k4)
            })();
            step.map_err(|e| e.at_time(t))?;
            for i in 0..n {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(SimError::Integration { t, msg: "non-finite state".into() });
            }
            t = if h == target - t { target } else { t + h };
            sol.stats.accepted += 1;
            sol.stats.rhs_evals += 4;
        }
        sol.t.push(target);
        sol.y.push(y.clone());
    }
    Ok(sol)
}

/// `n` equally spaced times from 0 to `t_end` inclusive.
pub fn linspace(t_end: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![t_end];
    }
    (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect()
}

/// Output times from 0 to `t_end` with spacing close to `stride`, always ending exactly at `t_end`.
pub fn sample_times(t_end: f64, stride: f64) -> Vec<f64> {
    let n = ((t_end / stride).round() as usize).max(1);
    linspace(t_end, n + 1)
}
