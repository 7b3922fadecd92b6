//! Scenario orchestration and file output for the command line tool.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{OutputConfig, OutputFormat, ScenarioConfig};
use crate::dynamics::{closed_form_jq, integrate_beam_at, spin_hall_pair, BeamSample, PairReport, Trajectory};
use crate::error::{Result, SimError};
use crate::fit::{loglog_slope, PowerFit};
use crate::geometry::{hamiltonian, integrate_geodesic_at, ray_from_beam};
use crate::linalg::{csym6, sym6};
use crate::medium::MediumModel;
use crate::ode::{sample_times, Stepper};
use crate::riccati::{init_propagator, propagate_hessian};
use crate::verify::{run_verify, VerifyInputs, VerifyReport, VerifyTarget};

pub const TRAJECTORY_COLUMNS: [&str; 25] = [
    "t", "X1", "X2", "X3", "P1", "P2", "P3", "J1", "J2", "J3", "Q11", "Q12", "Q13", "Q22", "Q23", "Q33", "gx1", "gx2", "gx3",
    "gp1", "gp2", "gp3", "s", "H", "minEigImM",
];
pub const GEODESIC_COLUMNS: [&str; 8] = ["t", "x1", "x2", "x3", "p1", "p2", "p3", "H"];
pub const RICCATI_COLUMNS: [&str; 15] = [
    "t", "ReM11", "ReM12", "ReM13", "ReM22", "ReM23", "ReM33", "ImM11", "ImM12", "ImM13", "ImM22", "ImM23", "ImM33",
    "min_eig_ImM", "absdetJ",
];
pub const SEP_COLUMNS: [&str; 6] = ["t", "sep1", "sep2", "sep3", "sep_norm", "geo_dev"];

/// Output settings resolved from the config and command line.
#[derive(Clone, Debug)]
pub struct RunContext {
    pub config: ScenarioConfig,
    pub out_dir: PathBuf,
    pub stepper: Stepper,
}

impl RunContext {
    pub fn new(config: ScenarioConfig, out_override: Option<PathBuf>, fixed_step: Option<f64>) -> Result<Self> {
        let stepper = config.stepper(fixed_step)?;
        let out_dir = out_override.unwrap_or_else(|| PathBuf::from(&config.output.dir));
        Ok(RunContext { config, out_dir, stepper })
    }

    fn output(&self) -> &OutputConfig {
        &self.config.output
    }

    fn times(&self) -> Vec<f64> {
        sample_times(self.config.integration.t_end, self.config.integration.sample_stride)
    }

    fn ensure_dir(&self) -> Result<()> {
        fs::create_dir_all(&self.out_dir).map_err(|source| SimError::Io { path: self.out_dir.clone(), source })
    }

    fn table_path(&self, stem: &str) -> PathBuf {
        let ext = match self.output().format {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        };
        self.out_dir.join(format!("{stem}.{ext}"))
    }
}

/// `precision` significant digits in scientific notation; 17 digits round-trip every f64.
pub fn format_number(v: f64, precision: usize) -> String {
    if v.is_finite() {
        format!("{:.*e}", precision.saturating_sub(1), v)
    } else {
        format!("{v}")
    }
}

fn rounded(v: f64, precision: usize) -> f64 {
    format_number(v, precision).parse().unwrap_or(v)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path, e: csv::Error) -> SimError {
    let source = match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => std::io::Error::other(format!("{other:?}")),
    };
    SimError::Io { path: path.to_path_buf(), source }
}

/// Writes a numeric table in the configured format.
pub fn write_table(path: &Path, columns: &[&str], rows: &[Vec<f64>], out: &OutputConfig) -> Result<()> {
    match out.format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
            w.write_record(columns).map_err(|e| csv_err(path, e))?;
            for r in rows {
                w.write_record(r.iter().map(|v| format_number(*v, out.precision))).map_err(|e| csv_err(path, e))?;
            }
            w.flush().map_err(io_err(path))
        }
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct Table<'a> {
                columns: &'a [&'a str],
                rows: Vec<Vec<f64>>,
            }
            let rows = rows.iter().map(|r| r.iter().map(|v| rounded(*v, out.precision)).collect()).collect();
            write_json(path, &Table { columns, rows })
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report serialises");
    fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn trajectory_row(s: &BeamSample) -> Vec<f64> {
    let m = &s.state.moments;
    let mut row = Vec::with_capacity(TRAJECTORY_COLUMNS.len());
    row.push(s.t);
    row.extend_from_slice(m.x.as_slice());
    row.extend_from_slice(m.p.as_slice());
    row.extend_from_slice(m.j.as_slice());
    row.extend_from_slice(&sym6(&m.q));
    row.extend_from_slice(s.state.ray.x.as_slice());
    row.extend_from_slice(s.state.ray.p.as_slice());
    row.extend_from_slice(&[s.helicity, s.hamiltonian, s.min_eig_im_m]);
    row
}

/// Invariant maxima along one trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct InvariantSummary {
    pub omega: f64,
    pub helicity: f64,
    pub energy: f64,
    pub max_hamiltonian_drift: f64,
    pub max_helicity_drift: f64,
    pub max_density_drift: f64,
    pub min_eig_im_m: f64,
    pub min_eig_q: f64,
    /// max ‖Q − iω⁻¹E A⁻¹‖ / ‖Q‖
    pub max_quadrupole_identity_defect: f64,
    /// max ‖J‖ ω / E
    pub max_scaled_angular_momentum: f64,
    /// max ‖J − J_pred‖ against the late-time closed form
    pub max_closed_form_j_delta: f64,
}

pub fn summarize(traj: &Trajectory, medium: &MediumModel) -> InvariantSummary {
    let first = &traj.samples[0];
    let omega = traj.spec.omega;
    let rel = |a: num_complex::Complex64, b: num_complex::Complex64| (a - b).norm() / b.norm();
    let mut s = InvariantSummary {
        omega,
        helicity: traj.spec.s,
        energy: traj.energy,
        max_hamiltonian_drift: 0.0,
        max_helicity_drift: 0.0,
        max_density_drift: 0.0,
        min_eig_im_m: f64::INFINITY,
        min_eig_q: f64::INFINITY,
        max_quadrupole_identity_defect: 0.0,
        max_scaled_angular_momentum: 0.0,
        max_closed_form_j_delta: 0.0,
    };
    for x in &traj.samples {
        let m = &x.state.moments;
        s.max_hamiltonian_drift = s.max_hamiltonian_drift.max((x.hamiltonian - first.hamiltonian).abs());
        s.max_helicity_drift = s.max_helicity_drift.max((x.helicity - first.helicity).abs());
        let d = &x.densities;
        let f = &first.densities;
        s.max_density_drift = s.max_density_drift.max(rel(d.c_e, f.c_e).max(rel(d.c_h, f.c_h)).max(rel(d.c_x, f.c_x)));
        s.min_eig_im_m = s.min_eig_im_m.min(x.min_eig_im_m);
        s.min_eig_q = s.min_eig_q.min(crate::linalg::min_sym_eig(&m.q));
        let q_pred = x.hessian.ia_inv * (m.e / omega);
        s.max_quadrupole_identity_defect = s.max_quadrupole_identity_defect.max((m.q - q_pred).norm() / m.q.norm());
        s.max_scaled_angular_momentum = s.max_scaled_angular_momentum.max(m.j.norm() * omega / m.e);
        let (j_pred, _) = closed_form_jq(x, &traj.spec, medium, traj.c_gamma);
        s.max_closed_form_j_delta = s.max_closed_form_j_delta.max((m.j - j_pred).norm());
    }
    s
}

pub fn run_geodesic(ctx: &RunContext) -> Result<PathBuf> {
    let medium = ctx.config.medium_model()?;
    let spec = ctx.config.beam_spec(&medium)?;
    let ray = ray_from_beam(&spec.x0, &spec.direction, &medium)?;
    let samples = integrate_geodesic_at(&ray, &medium, &ctx.times(), ctx.stepper)?;
    let rows: Vec<Vec<f64>> = samples
        .iter()
        .map(|(t, r)| {
            let mut row = vec![*t];
            row.extend_from_slice(&r.to_array());
            row.push(hamiltonian(r, &medium));
            row
        })
        .collect();
    ctx.ensure_dir()?;
    let path = ctx.table_path("geodesic");
    write_table(&path, &GEODESIC_COLUMNS, &rows, ctx.output())?;
    Ok(path)
}

pub fn run_riccati(ctx: &RunContext) -> Result<PathBuf> {
    let medium = ctx.config.medium_model()?;
    let spec = ctx.config.beam_spec(&medium)?;
    let ray = ray_from_beam(&spec.x0, &spec.direction, &medium)?;
    let prop = init_propagator(&spec.s0, &spec.b0, spec.c_gamma(&medium))?;
    let samples = propagate_hessian(&ray, &prop, &medium, &ctx.times(), ctx.stepper)?;
    let rows: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| {
            let m6 = csym6(&s.m);
            let mut row = vec![s.t];
            row.extend(m6.iter().map(|z| z.re));
            row.extend(m6.iter().map(|z| z.im));
            row.extend_from_slice(&[s.min_eig_im_m, s.det_j]);
            row
        })
        .collect();
    ctx.ensure_dir()?;
    let path = ctx.table_path("riccati");
    write_table(&path, &RICCATI_COLUMNS, &rows, ctx.output())?;
    Ok(path)
}

fn write_trajectory(ctx: &RunContext, stem: &str, traj: &Trajectory) -> Result<PathBuf> {
    let rows: Vec<Vec<f64>> = traj.samples.iter().map(trajectory_row).collect();
    let path = ctx.table_path(stem);
    write_table(&path, &TRAJECTORY_COLUMNS, &rows, ctx.output())?;
    Ok(path)
}

pub fn run_beam(ctx: &RunContext) -> Result<Vec<PathBuf>> {
    let medium = ctx.config.medium_model()?;
    let spec = ctx.config.beam_spec(&medium)?;
    let traj = integrate_beam_at(&spec, &medium, &ctx.times(), ctx.stepper)?;
    ctx.ensure_dir()?;
    let a = write_trajectory(ctx, "trajectory", &traj)?;
    let b = ctx.out_dir.join("report.json");
    write_json(&b, &summarize(&traj, &medium))?;
    Ok(vec![a, b])
}

#[derive(Clone, Debug, Serialize)]
pub struct SpinHallReport {
    pub omega: f64,
    pub sep_norm_final: f64,
    pub sep_final: [f64; 3],
    pub geo_dev_sup: f64,
    /// cos of the angle between d(sep)/dt and P × ∇ln n where |∇ln n(X)| is largest.
    pub mid_cos_angle: f64,
    pub mid_time: f64,
    /// Separation and deviation exponents from a second pair run at 2ω.
    pub sep_exponent: f64,
    pub geo_dev_ratio: f64,
    pub plus: InvariantSummary,
    pub minus: InvariantSummary,
}

fn pair_for(ctx: &RunContext, medium: &MediumModel, omega: f64) -> Result<PairReport> {
    let spec = ctx.config.beam_spec(medium)?;
    let spec = crate::initial::BeamSpec { omega, s: 1.0, ..spec };
    spin_hall_pair(&spec, medium, &ctx.times(), ctx.stepper)
}

fn sup(v: &[f64]) -> f64 {
    v.iter().cloned().fold(0.0, f64::max)
}

pub fn run_spinhall(ctx: &RunContext) -> Result<SpinHallReport> {
    let medium = ctx.config.medium_model()?;
    let omega = ctx.config.beam.omega;
    let (pair, twice) = rayon::join(|| pair_for(ctx, &medium, omega), || pair_for(ctx, &medium, 2.0 * omega));
    let (pair, twice) = (pair?, twice?);
    ctx.ensure_dir()?;
    write_trajectory(ctx, "trajectory_plus", &pair.plus)?;
    write_trajectory(ctx, "trajectory_minus", &pair.minus)?;
    let rows: Vec<Vec<f64>> = pair
        .times
        .iter()
        .zip(&pair.sep)
        .zip(&pair.geo_dev)
        .map(|((t, s), g)| vec![*t, s[0], s[1], s[2], s.norm(), *g])
        .collect();
    write_table(&ctx.table_path("sep"), &SEP_COLUMNS, &rows, ctx.output())?;
    let last = *pair.sep.last().expect("samples");
    let last2 = twice.sep.last().expect("samples").norm();
    let report = SpinHallReport {
        omega,
        sep_norm_final: last.norm(),
        sep_final: [last[0], last[1], last[2]],
        geo_dev_sup: sup(&pair.geo_dev),
        mid_cos_angle: pair.mid_cos_angle,
        mid_time: pair.mid_time,
        sep_exponent: (last2 / last.norm()).ln() / 2f64.ln(),
        geo_dev_ratio: sup(&pair.geo_dev) / sup(&twice.geo_dev),
        plus: summarize(&pair.plus, &medium),
        minus: summarize(&pair.minus, &medium),
    };
    write_json(&ctx.out_dir.join("report.json"), &report)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub omega: f64,
    /// ‖X₊(T) − X₋(T)‖, present when both helicities ±1 are swept.
    pub sep_norm_final: Option<f64>,
    pub geo_dev_sup: f64,
    pub closed_form_j_delta_sup: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub sep_fit: Option<PowerFit>,
    pub geo_dev_fit: PowerFit,
    pub closed_form_j_fit: PowerFit,
    pub sep_exponent_pass: Option<bool>,
    pub geo_dev_exponent_pass: bool,
    pub closed_form_j_pass: bool,
    pub runs: Vec<InvariantSummary>,
}

/// Key for merging sweep results: ω bits are ordered like the values for positive ω.
type RunKey = (u64, i64);

pub fn run_sweep(ctx: &RunContext) -> Result<SweepReport> {
    let medium = ctx.config.medium_model()?;
    let base = ctx.config.beam_spec(&medium)?;
    let times = ctx.times();
    let jobs: Vec<(f64, f64)> =
        ctx.config.sweep.omega_list.iter().flat_map(|&w| ctx.config.sweep.helicities.iter().map(move |&s| (w, s))).collect();
    let results: Vec<(RunKey, Trajectory)> = jobs
        .par_iter()
        .map(|&(omega, s)| {
            let spec = crate::initial::BeamSpec { omega, s, ..base.clone() };
            let key = (omega.to_bits(), (s * 1e6).round() as i64);
            integrate_beam_at(&spec, &medium, &times, ctx.stepper).map(|t| (key, t))
        })
        .collect::<Result<Vec<_>>>()?;
    let runs: BTreeMap<RunKey, Trajectory> = results.into_iter().collect();
    ctx.ensure_dir()?;
    for ((wb, sk), traj) in &runs {
        let stem = format!("trajectory_w{}_s{:+}", f64::from_bits(*wb), *sk as f64 / 1e6);
        write_trajectory(ctx, &stem, traj)?;
    }
    let mut rows = Vec::new();
    let mut omegas: Vec<f64> = ctx.config.sweep.omega_list.clone();
    omegas.sort_by(f64::total_cmp);
    omegas.dedup();
    for &omega in &omegas {
        let of = |s: f64| runs.get(&(omega.to_bits(), (s * 1e6).round() as i64));
        let any = runs.range((omega.to_bits(), i64::MIN)..=(omega.to_bits(), i64::MAX)).map(|(_, t)| t).next().expect("run");
        let sep = match (of(1.0), of(-1.0)) {
            (Some(a), Some(b)) => {
                Some((a.samples.last().expect("s").state.moments.x - b.samples.last().expect("s").state.moments.x).norm())
            }
            _ => None,
        };
        let reference = of(1.0).unwrap_or(any);
        let geo = sup(&reference.samples.iter().map(|s| (s.state.moments.x - s.state.ray.x).norm()).collect::<Vec<_>>());
        let jd = runs
            .range((omega.to_bits(), i64::MIN)..=(omega.to_bits(), i64::MAX))
            .map(|(_, t)| summarize(t, &medium).max_closed_form_j_delta)
            .fold(0.0, f64::max);
        rows.push(SweepRow { omega, sep_norm_final: sep, geo_dev_sup: geo, closed_form_j_delta_sup: jd });
    }
    let sep_pts: Option<Vec<(f64, f64)>> = rows.iter().map(|r| r.sep_norm_final.map(|s| (r.omega, s))).collect();
    let sep_fit = sep_pts.filter(|p| p.len() >= 2).map(|p| loglog_slope(&p));
    let geo_dev_fit = loglog_slope(&rows.iter().map(|r| (r.omega, r.geo_dev_sup)).collect::<Vec<_>>());
    let closed_form_j_fit = loglog_slope(&rows.iter().map(|r| (r.omega, r.closed_form_j_delta_sup)).collect::<Vec<_>>());
    let in_band = |f: &PowerFit| (-1.1..=-0.9).contains(&f.slope);
    let report = SweepReport {
        sep_exponent_pass: sep_fit.as_ref().map(in_band),
        geo_dev_exponent_pass: in_band(&geo_dev_fit),
        closed_form_j_pass: closed_form_j_fit.slope <= -1.8,
        sep_fit,
        geo_dev_fit,
        closed_form_j_fit,
        rows,
        runs: runs.values().map(|t| summarize(t, &medium)).collect(),
    };
    write_json(&ctx.out_dir.join("sweep.json"), &report)?;
    info!("sweep over {} runs written to {}", runs.len(), ctx.out_dir.display());
    Ok(report)
}

pub fn run_verification(ctx: &RunContext, target: VerifyTarget, omegas: Option<Vec<f64>>, grid_points: Option<usize>) -> Result<VerifyReport> {
    let medium = ctx.config.medium_model()?;
    let spec = ctx.config.beam_spec(&medium)?;
    let mut grid = ctx.config.grid;
    if let Some(n) = grid_points {
        grid.points_per_axis = n;
        grid.validate().map_err(|_| SimError::config("--grid-points", "must be an odd integer >= 21"))?;
    }
    let tol = ctx.config.tolerances();
    let inputs = VerifyInputs { spec: &spec, medium: &medium, t_end: ctx.config.integration.t_end, tol, omegas, grid };
    let report = run_verify(target, &inputs)?;
    ctx.ensure_dir()?;
    write_json(&ctx.out_dir.join("verify.json"), &report)?;
    Ok(report)
}
