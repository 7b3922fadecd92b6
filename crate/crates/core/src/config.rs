//! Scenario documents (JSON) with defaults and key-path validation.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::initial::{normalize_energy, BeamSpec};
use crate::linalg::{from_sym6, sym6, M3, V3, ZERO_T3};
use crate::medium::{MediumModel, MediumParams};
use crate::ode::{Stepper, Tolerances};
use crate::quadrature::GridSpec;

/// A symmetric matrix given either as a scalar multiple of the identity or as the six entries
/// (11, 12, 13, 22, 23, 33).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SymInput {
    Scalar(f64),
    Entries([f64; 6]),
}

impl SymInput {
    pub fn matrix(&self) -> M3 {
        match self {
            SymInput::Scalar(a) => M3::identity() * *a,
            SymInput::Entries(v) => from_sym6(v),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamConfig {
    pub x0: [f64; 3],
    /// Normalised on load.
    pub direction: [f64; 3],
    pub k: f64,
    #[serde(rename = "S0")]
    pub s0: SymInput,
    #[serde(rename = "B0")]
    pub b0: SymInput,
    pub amplitude: f64,
    pub s: f64,
    pub omega: f64,
    pub normalize_energy: bool,
}

impl Default for BeamConfig {
    fn default() -> Self {
        let d = 0.5f64.sqrt();
        BeamConfig {
            x0: [0.0, -8.0, 0.0],
            direction: [d, d, 0.0],
            k: 1.0,
            s0: SymInput::Scalar(1.0),
            b0: SymInput::Scalar(0.0),
            amplitude: 1.0,
            s: 1.0,
            omega: 400.0,
            normalize_energy: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegrationConfig {
    pub t_end: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Spacing of the output samples in time.
    pub sample_stride: f64,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        let tol = Tolerances::default();
        IntegrationConfig { t_end: 20.0, rtol: tol.rtol, atol: tol.atol, sample_stride: 0.1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    pub format: OutputFormat,
    /// Significant digits of every emitted number.
    pub precision: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "out".into(), format: OutputFormat::Csv, precision: 17 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub omega_list: Vec<f64>,
    pub helicities: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { omega_list: vec![100.0, 200.0, 400.0, 800.0], helicities: vec![1.0, -1.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub medium: MediumParams,
    pub beam: BeamConfig,
    pub integration: IntegrationConfig,
    pub output: OutputConfig,
    pub sweep: SweepConfig,
    pub grid: GridSpec,
}

/// Parses and validates a scenario document. Errors carry the offending key path.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let key = if path == "." || path == "?" { "<document>".to_string() } else { path };
        SimError::config(key, format!("{inner}"))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SimError::config(key, format!("must be a positive finite number, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.medium_model()?;
        let d = V3::from(self.beam.direction);
        if !(d.norm() > 1e-12) || !d.iter().all(|v| v.is_finite()) {
            return Err(SimError::config("beam.direction", "must be a finite nonzero vector"));
        }
        self.raw_beam_spec().validate()?;
        let it = &self.integration;
        positive("integration.t_end", it.t_end)?;
        positive("integration.atol", it.atol)?;
        positive("integration.sample_stride", it.sample_stride)?;
        if !(it.rtol > 0.0 && it.rtol < 1.0) {
            return Err(SimError::config("integration.rtol", "must lie in (0, 1)"));
        }
        if it.sample_stride > it.t_end {
            return Err(SimError::config("integration.sample_stride", "must not exceed integration.t_end"));
        }
        if !(1..=17).contains(&self.output.precision) {
            return Err(SimError::config("output.precision", "must be between 1 and 17"));
        }
        if self.output.dir.is_empty() {
            return Err(SimError::config("output.dir", "must not be empty"));
        }
        if self.sweep.omega_list.is_empty() {
            return Err(SimError::config("sweep.omega_list", "must not be empty"));
        }
        for (i, w) in self.sweep.omega_list.iter().enumerate() {
            if !(*w > 1.0 && w.is_finite()) {
                return Err(SimError::config(format!("sweep.omega_list[{i}]"), "must be greater than 1"));
            }
        }
        if self.sweep.helicities.is_empty() {
            return Err(SimError::config("sweep.helicities", "must not be empty"));
        }
        for (i, s) in self.sweep.helicities.iter().enumerate() {
            if !(-1.0..=1.0).contains(s) {
                return Err(SimError::config(format!("sweep.helicities[{i}]"), "must lie in [-1, 1]"));
            }
        }
        self.grid.validate()
    }

    pub fn medium_model(&self) -> Result<MediumModel> {
        MediumModel::from_params(&self.medium)
    }

    fn raw_beam_spec(&self) -> BeamSpec {
        let b = &self.beam;
        BeamSpec {
            x0: V3::from(b.x0),
            k: b.k,
            direction: V3::from(b.direction).normalize(),
            s0: b.s0.matrix(),
            b0: b.b0.matrix(),
            phi3: ZERO_T3,
            amplitude: b.amplitude,
            s: b.s,
            omega: b.omega,
        }
    }

    /// Beam parameters with the energy normalisation applied when requested.
    pub fn beam_spec(&self, medium: &MediumModel) -> Result<BeamSpec> {
        let spec = self.raw_beam_spec();
        spec.validate()?;
        if self.beam.normalize_energy {
            normalize_energy(&spec, medium)
        } else {
            Ok(spec)
        }
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances { rtol: self.integration.rtol, atol: self.integration.atol }
    }

    /// Adaptive stepping unless a fixed step is given.
    pub fn stepper(&self, fixed_step: Option<f64>) -> Result<Stepper> {
        match fixed_step {
            Some(dt) if dt > 0.0 && dt.is_finite() => Ok(Stepper::Fixed { dt }),
            Some(dt) => Err(SimError::config("--fixed-step", format!("step must be positive, got {dt}"))),
            None => Ok(Stepper::Adaptive(self.tolerances())),
        }
    }

    /// The default scenario as a pretty-printed document.
    pub fn defaults_document() -> String {
        serde_json::to_string_pretty(&ScenarioConfig::default()).expect("defaults serialise")
    }
}

/// Six-entry form of a symmetric matrix, for writing configs programmatically.
pub fn sym_input(m: &M3) -> SymInput {
    SymInput::Entries(sym6(m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_and_defaults() {
        let cfg = parse_config(r#"{"medium": {"kind": "homogeneous"}}"#).unwrap();
        assert_eq!(cfg.beam, BeamConfig::default());
        assert!(cfg.medium_model().unwrap().is_homogeneous());
        let back = parse_config(&ScenarioConfig::defaults_document()).unwrap();
        assert_eq!(back, ScenarioConfig::default());
        assert_eq!(parse_config("{}").unwrap(), ScenarioConfig::default());
    }

    fn key_of(text: &str) -> String {
        match parse_config(text) {
            Err(SimError::Config { key, .. }) => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn rejections_name_the_key() {
        assert_eq!(key_of(r#"{"beam": {"S0": [1, 0, 0, -1, 0, 1]}}"#), "beam.S0");
        assert_eq!(key_of(r#"{"beam": {"omega": 0.5}}"#), "beam.omega");
        assert_eq!(key_of(r#"{"beam": {"colour": 1}}"#), "beam.colour");
        assert_eq!(key_of(r#"{"integration": {"t_end": -1}}"#), "integration.t_end");
        assert_eq!(key_of(r#"{"sweep": {"omega_list": [100, 1]}}"#), "sweep.omega_list[1]");
        assert_eq!(key_of(r#"{"medium": {"kind": "tanh_slab", "width": 0}}"#), "medium.width");
        assert_eq!(key_of(r#"{"output": {"precision": 30}}"#), "output.precision");
        assert_eq!(key_of("{"), "<document>");
    }

    #[test]
    fn scalar_and_entries() {
        let cfg = parse_config(r#"{"beam": {"S0": 2.5, "B0": [0.1, 0, 0, 0.2, 0, 0.3], "direction": [0, 0, 2]}}"#).unwrap();
        let m = cfg.medium_model().unwrap();
        let spec = cfg.beam_spec(&m).unwrap();
        assert_eq!(spec.s0, M3::identity() * 2.5);
        assert_eq!(spec.b0[(2, 2)], 0.3);
        assert_eq!(spec.direction, V3::z());
    }

    #[test]
    fn normalized_energy_is_one() {
        let cfg = parse_config(r#"{"medium": {"kind": "homogeneous", "n_left": 1.3}, "beam": {"normalize_energy": true}}"#).unwrap();
        let m = cfg.medium_model().unwrap();
        let spec = cfg.beam_spec(&m).unwrap();
        let e = crate::initial::initial_moments(&spec, &m).unwrap().e;
        assert!((e - 1.0).abs() < 1e-12);
    }
}
