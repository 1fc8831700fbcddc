//! Run configuration files.
//!
//! A config is TOML with unit-suffixed keys. Unknown keys are rejected so
//! that a misspelt unit fails loudly instead of silently using a default.
//!
//! ```toml
//! seed = 0
//! device = "device/reference.toml"   # optional, relative to this file
//!
//! [protocol]
//! kind = "adiabatic_transfer"        # adiabatic_half, relay_transfer, relay_half
//! gbar_mhz_over_2pi = 15.0
//! t_f_ns = 132.0
//!
//! [loss]
//! preset = "max-loss"                # or t1r_ns = 28.7, or lossless = true
//! ```

use std::path::{Path, PathBuf};

use qlink_core::circuit::T1Table;
use qlink_core::experiment::{Dephasing, ExperimentSpec, ReadoutModel, SweepMetric, SweepSpec, TransferTimeRule};
use qlink_core::integrator::{StepControl, SweepParameter};
use qlink_core::model::DeviceParams;
use qlink_core::schedules::Protocol;
use qlink_core::statespace::Representation;
use qlink_core::tomography::{AssignmentMatrix, ReadoutCorrection};
use serde::{Deserialize, Serialize};

use crate::device::{load_device, parse_device, REFERENCE_DEVICE};
use crate::error::{HarnessError, Result};
use crate::tables::read_t1_table;

/// Named channel-loss settings and their mode lifetimes in ns.
pub const LOSS_PRESETS: [(&str, f64); 7] = [
    ("intrinsic", 3410.0),
    ("t1r-503", 503.0),
    ("t1r-336", 336.0),
    ("t1r-101.1", 101.1),
    ("t1r-49.8", 49.8),
    ("t1r-28.7", 28.7),
    ("max-loss", 28.7),
];

pub fn loss_preset(name: &str) -> Option<f64> {
    LOSS_PRESETS.iter().find(|(n, _)| *n == name).map(|&(_, t)| t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    AdiabaticTransfer,
    AdiabaticHalf,
    RelayTransfer,
    RelayHalf,
}

impl From<ProtocolKind> for Protocol {
    fn from(k: ProtocolKind) -> Self {
        match k {
            ProtocolKind::AdiabaticTransfer => Protocol::AdiabaticTransfer,
            ProtocolKind::AdiabaticHalf => Protocol::AdiabaticHalf,
            ProtocolKind::RelayTransfer => Protocol::RelayTransfer,
            ProtocolKind::RelayHalf => Protocol::RelayHalf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    pub kind: ProtocolKind,
    #[serde(default = "default_gbar")]
    pub gbar_mhz_over_2pi: f64,
    #[serde(default = "default_t_f")]
    pub t_f_ns: f64,
    #[serde(default = "default_relay_g")]
    pub relay_g_mhz_over_2pi: f64,
    /// Defaults to 10 ns for half protocols and 0 otherwise.
    #[serde(default)]
    pub release_ns: Option<f64>,
}

fn default_gbar() -> f64 {
    15.0
}
fn default_t_f() -> f64 {
    132.0
}
fn default_relay_g() -> f64 {
    5.0
}
fn default_true() -> bool {
    true
}
fn default_loading_detuning() -> f64 {
    1.0
}
fn default_dephasing() -> String {
    String::from("echo")
}
fn default_side_modes() -> usize {
    2
}
fn default_max_step() -> f64 {
    0.05
}
fn default_min_step() -> f64 {
    1e-6
}
fn default_spacing() -> f64 {
    1.0
}
fn default_return_index() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSection {
    /// One of [`LOSS_PRESETS`].
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub t1r_ns: Option<f64>,
    /// Turns off every dissipative channel.
    #[serde(default)]
    pub lossless: bool,
    #[serde(default = "default_true")]
    pub spurious_loading: bool,
    #[serde(default = "default_loading_detuning")]
    pub loading_detuning_mhz_over_2pi: f64,
    /// "echo", "ramsey" or "off".
    #[serde(default = "default_dephasing")]
    pub dephasing: String,
    /// Loaded-Q1 T1 table (CSV) used instead of the circuit model; it
    /// belongs to one mode lifetime, so it cannot be combined with a T1r sweep.
    #[serde(default)]
    pub t1_table: Option<PathBuf>,
}

impl Default for LossSection {
    fn default() -> Self {
        Self {
            preset: None,
            t1r_ns: None,
            lossless: false,
            spurious_loading: true,
            loading_detuning_mhz_over_2pi: default_loading_detuning(),
            dephasing: default_dephasing(),
            t1_table: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_side_modes")]
    pub n_side_modes: usize,
    /// Integrate in the single-excitation subspace.
    #[serde(default)]
    pub subspace: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { n_side_modes: default_side_modes(), subspace: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default = "default_max_step")]
    pub max_step_ns: f64,
    /// Step-doubling error bound; absent means fixed steps.
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default = "default_min_step")]
    pub min_step_ns: f64,
    #[serde(default = "default_spacing")]
    pub sample_spacing_ns: f64,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        Self {
            max_step_ns: default_max_step(),
            tolerance: None,
            min_step_ns: default_min_step(),
            sample_spacing_ns: default_spacing(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutKind {
    /// Exact outcome probabilities.
    #[default]
    None,
    /// Assignment errors from the device readout fidelities.
    Device,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionKind {
    #[default]
    Projected,
    Raw,
}

impl From<CorrectionKind> for ReadoutCorrection {
    fn from(c: CorrectionKind) -> Self {
        match c {
            CorrectionKind::Projected => ReadoutCorrection::Projected,
            CorrectionKind::Raw => ReadoutCorrection::Raw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographySection {
    /// Q2 frame correction; defaults to π for transfers and 0 for half protocols.
    #[serde(default)]
    pub phase_q2_rad: Option<f64>,
    #[serde(default)]
    pub readout: ReadoutKind,
    #[serde(default)]
    pub correction: CorrectionKind,
    /// Shots per setting; absent means exact probabilities.
    #[serde(default)]
    pub shots: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameterKind {
    TF,
    Gbar,
    T1r,
    RelayG,
}

impl From<SweepParameterKind> for SweepParameter {
    fn from(k: SweepParameterKind) -> Self {
        match k {
            SweepParameterKind::TF => SweepParameter::TransferTime,
            SweepParameterKind::Gbar => SweepParameter::Gbar,
            SweepParameterKind::T1r => SweepParameter::T1r,
            SweepParameterKind::RelayG => SweepParameter::RelayG,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    #[default]
    Efficiency,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TfRuleKind {
    #[default]
    Fixed,
    DarkStateReturn,
}

/// Sweep values are in the swept key's units: ns for `t_f` and `t1r`,
/// MHz/2π for `gbar` and `relay_g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameterKind,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub start: Option<f64>,
    #[serde(default)]
    pub stop: Option<f64>,
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default)]
    pub metric: MetricKind,
    #[serde(default)]
    pub t_f_rule: TfRuleKind,
    #[serde(default = "default_return_index")]
    pub return_index: usize,
    /// Protocols to run; defaults to `[protocol].kind`.
    #[serde(default)]
    pub protocols: Option<Vec<ProtocolKind>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Device file; the shipped reference device when absent.
    #[serde(default)]
    pub device: Option<PathBuf>,
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub loss: LossSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub tomography: TomographySection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
}

/// Command-line overrides applied on top of a config.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub no_spurious_loading: bool,
    pub subspace: bool,
}

/// A parsed config together with its source text.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub origin: String,
    /// Exact input bytes, kept for the result snapshot.
    pub text: String,
    pub config: RunConfig,
    pub device: DeviceParams,
    pub device_text: String,
    pub t1_table: Option<T1Table>,
}

/// What a config resolves to.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub spec: ExperimentSpec,
    pub sweep: Option<SweepSpec>,
    pub protocols: Vec<Protocol>,
    pub seed: u64,
}

pub fn parse_config(text: &str, origin: &str, base_dir: Option<&Path>) -> Result<LoadedConfig> {
    let config: RunConfig = toml::from_str(text).map_err(|e| HarnessError::config(origin, e.to_string()))?;
    let locate = |p: &PathBuf, what: &str| -> Result<PathBuf> {
        let path = match base_dir {
            Some(b) if p.is_relative() => b.join(p),
            _ => p.clone(),
        };
        if !path.exists() {
            return Err(HarnessError::config(origin, format!("{what} {} does not exist", path.display())));
        }
        Ok(path)
    };
    let (device, device_text) = match &config.device {
        None => (parse_device(REFERENCE_DEVICE, "reference device")?, REFERENCE_DEVICE.to_owned()),
        Some(p) => load_device(&locate(p, "device file")?)?,
    };
    let t1_table = match &config.loss.t1_table {
        None => None,
        Some(p) => Some(read_t1_table(&locate(p, "T1 table")?)?),
    };
    let loaded =
        LoadedConfig { origin: origin.to_owned(), text: text.to_owned(), config, device, device_text, t1_table };
    loaded.resolve(&Overrides::default())?;
    Ok(loaded)
}

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Read { path: path.into(), source })?;
    parse_config(&text, &path.display().to_string(), path.parent())
}

impl LoadedConfig {
    fn err(&self, field: &str, message: impl std::fmt::Display) -> HarnessError {
        HarnessError::config(&self.origin, format!("{field}: {message}"))
    }

    fn positive(&self, field: &str, v: f64) -> Result<f64> {
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(self.err(field, format!("must be positive, got {v}")))
        }
    }

    /// Mode lifetime in ns, `None` for a lossless run.
    pub fn t1r_ns(&self) -> Result<Option<f64>> {
        let loss = &self.config.loss;
        match (&loss.preset, loss.t1r_ns, loss.lossless) {
            (Some(_), Some(_), _) => Err(self.err("loss", "set either preset or t1r_ns, not both")),
            (Some(name), None, false) => match loss_preset(name) {
                Some(t) => Ok(Some(t)),
                None => {
                    let names: Vec<&str> = LOSS_PRESETS.iter().map(|p| p.0).collect();
                    Err(self.err("loss.preset", format!("unknown preset {name:?}; expected one of {names:?}")))
                }
            },
            (None, Some(t), false) => self.positive("loss.t1r_ns", t).map(Some),
            (None, None, false) => Ok(Some(self.device.channel.t1r_int_ns)),
            (_, _, true) => Ok(None),
        }
    }

    pub fn resolve(&self, o: &Overrides) -> Result<Resolved> {
        let c = &self.config;
        let p = &c.protocol;
        let protocol: Protocol = p.kind.into();
        self.positive("protocol.gbar_mhz_over_2pi", p.gbar_mhz_over_2pi)?;
        self.positive("protocol.t_f_ns", p.t_f_ns)?;
        self.positive("protocol.relay_g_mhz_over_2pi", p.relay_g_mhz_over_2pi)?;
        let release = p.release_ns.unwrap_or(if protocol.is_half() { 10.0 } else { 0.0 });
        if !(release >= 0.0 && release.is_finite()) {
            return Err(self.err("protocol.release_ns", format!("must be ≥ 0, got {release}")));
        }
        if release > 0.0 && !protocol.is_half() {
            return Err(self.err("protocol.release_ns", "only half protocols have a release ramp"));
        }
        let dephasing = Dephasing::parse(&c.loss.dephasing).ok_or_else(|| {
            self.err("loss.dephasing", format!("expected echo, ramsey or off, got {:?}", c.loss.dephasing))
        })?;
        let ig = &c.integrator;
        self.positive("integrator.max_step_ns", ig.max_step_ns)?;
        self.positive("integrator.min_step_ns", ig.min_step_ns)?;
        self.positive("integrator.sample_spacing_ns", ig.sample_spacing_ns)?;
        if let Some(t) = ig.tolerance {
            self.positive("integrator.tolerance", t)?;
        }
        if c.loss.loading_detuning_mhz_over_2pi.is_nan() {
            return Err(self.err("loss.loading_detuning_mhz_over_2pi", "must be a number"));
        }
        let seed = o.seed.unwrap_or(c.seed);
        let readout = match c.tomography.readout {
            ReadoutKind::None => None,
            ReadoutKind::Device => {
                let (q1, q2) = (&self.device.q1, &self.device.q2);
                let assignment =
                    AssignmentMatrix::from_fidelities(q1.readout_fg, q1.readout_fe, q2.readout_fg, q2.readout_fe)
                        .map_err(|e| self.err("tomography.readout", e))?;
                Some(ReadoutModel {
                    assignment,
                    correction: c.tomography.correction.into(),
                    shots: c.tomography.shots,
                    seed,
                })
            }
        };
        if c.tomography.shots == Some(0) {
            return Err(self.err("tomography.shots", "must be at least 1"));
        }
        let spec = ExperimentSpec {
            device: self.device.clone(),
            protocol,
            gbar_mhz: p.gbar_mhz_over_2pi,
            t_f_ns: p.t_f_ns,
            relay_g_mhz: p.relay_g_mhz_over_2pi,
            release_ns: release,
            n_side_modes: c.model.n_side_modes,
            representation: if c.model.subspace || o.subspace {
                Representation::SingleExcitation
            } else {
                Representation::Full
            },
            t1r_ns: self.t1r_ns()?,
            lossless: c.loss.lossless,
            spurious_loading: c.loss.spurious_loading && !o.no_spurious_loading,
            loading_detuning_mhz: c.loss.loading_detuning_mhz_over_2pi,
            t1_table: self.t1_table.clone(),
            dephasing,
            step: StepControl { max_step_ns: ig.max_step_ns, tolerance: ig.tolerance, min_step_ns: ig.min_step_ns },
            sample_spacing_ns: ig.sample_spacing_ns,
            phase_q2: c.tomography.phase_q2_rad,
            readout,
        };
        spec.schedule().map_err(|e| self.err("protocol", e))?;
        spec.space().check_dense().map_err(|e| self.err("model.n_side_modes", e))?;
        let sweep = c.sweep.as_ref().map(|s| self.sweep_spec(s)).transpose()?;
        if self.t1_table.is_some() && sweep.as_ref().is_some_and(|s| s.parameter == SweepParameter::T1r) {
            return Err(self.err("loss.t1_table", "a fixed T1 table cannot be combined with a t1r sweep"));
        }
        let protocols = match c.sweep.as_ref().and_then(|s| s.protocols.clone()) {
            Some(list) if list.is_empty() => return Err(self.err("sweep.protocols", "must not be empty")),
            Some(list) => list.into_iter().map(Protocol::from).collect(),
            None => vec![protocol],
        };
        Ok(Resolved { spec, sweep, protocols, seed })
    }

    fn sweep_spec(&self, s: &SweepSection) -> Result<SweepSpec> {
        let values = match (&s.values, s.start, s.stop, s.step) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(h)) => {
                self.positive("sweep.step", h)?;
                if b < a {
                    return Err(self.err("sweep.stop", "must not be below sweep.start"));
                }
                qlink_core::experiment::linspace_step(a, b, h)
            }
            _ => return Err(self.err("sweep", "give either values or start, stop and step")),
        };
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(self.err("sweep.values", format!("non-finite value {bad}")));
        }
        if s.t_f_rule == TfRuleKind::DarkStateReturn && s.return_index == 0 {
            return Err(self.err("sweep.return_index", "must be at least 1"));
        }
        Ok(SweepSpec {
            parameter: s.parameter.into(),
            values,
            metric: match s.metric {
                MetricKind::Efficiency => SweepMetric::Efficiency,
                MetricKind::Full => SweepMetric::Full,
            },
            t_f_rule: match s.t_f_rule {
                TfRuleKind::Fixed => TransferTimeRule::Fixed,
                TfRuleKind::DarkStateReturn => TransferTimeRule::DarkStateReturn(s.return_index),
            },
        })
    }
}
