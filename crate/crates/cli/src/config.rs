//! Run configuration: a TOML file with one table per block. Every key has
//! a default, unknown keys are rejected, frequencies are given in Hz
//! (`_hz` keys) and converted to rad/s when the library types are built.

use serde::{Deserialize, Serialize};

use modeswap::dynamics::{NoiseModel, Tolerance};
use modeswap::fock::{make_thermal, ModeDim};
use modeswap::presets;
use modeswap::protocols::{CoolingSchedule, HeatingExperiment, Readout, SwapModel, SwapPlacement};
use modeswap::spectroscopy::LaserProbe;
use modeswap::trap::{coupling_rate, swap_time, Axis, Curvature, DrivePulse, EnvelopeKind, FullFrameOptions, TrapConfig};
use modeswap::units::{hz, ATOMIC_MASS_UNIT, ELEMENTARY_CHARGE};

use crate::error::{CliError, CliResult};

/// Above this g/ω the RWA is flagged by `validate`.
pub const RWA_WARNING_RATIO: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub trap: TrapSection,
    pub drive: DriveSection,
    pub noise: NoiseSection,
    pub probe: ProbeSection,
    pub numerics: NumericsSection,
    pub swap: SwapSection,
    pub cool: CoolSection,
    pub heatrate: HeatrateSection,
    pub crossing: CrossingSection,
    pub bessel: BesselSection,
    pub squeeze: SqueezeSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            trap: TrapSection::default(),
            drive: DriveSection::default(),
            noise: NoiseSection::default(),
            probe: ProbeSection::default(),
            numerics: NumericsSection::default(),
            swap: SwapSection::default(),
            cool: CoolSection::default(),
            heatrate: HeatrateSection::default(),
            crossing: CrossingSection::default(),
            bessel: BesselSection::default(),
            squeeze: SqueezeSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PerAxis {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl PerAxis {
    fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OptionalAxes {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
}

/// Second-order lengths per axis pair; a negative value flips the sign of
/// the term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Pairs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xx: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub yy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub yz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapSection {
    pub mass_amu: f64,
    /// In elementary charges.
    pub charge_e: f64,
    pub laser_wavelength_m: f64,
    pub resonance_guard_hz: f64,
    pub frequencies_hz: PerAxis,
    pub laser_projection: PerAxis,
    pub linear_m: OptionalAxes,
    pub curvature_m: Pairs,
}

impl Default for TrapSection {
    fn default() -> Self {
        let p = presets::laser_projection();
        TrapSection {
            mass_amu: 40.0,
            charge_e: 1.0,
            laser_wavelength_m: presets::LASER_WAVELENGTH,
            resonance_guard_hz: 20e3,
            frequencies_hz: PerAxis { x: 2.6e6, y: 2.9e6, z: 1.0e6 },
            laser_projection: PerAxis { x: p[0], y: p[1], z: p[2] },
            linear_m: OptionalAxes::default(),
            curvature_m: Pairs { xz: Some(presets::CROSS_CURVATURE), xy: Some(presets::CROSS_CURVATURE), ..Pairs::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveSection {
    /// Coupled pair; the first entry is the primary (cooled, probed) mode.
    pub modes: [String; 2],
    pub envelope: String,
    /// Coupling strength g/2π. At most one of `coupling_hz`,
    /// `amplitude_v` and `swap_time_s` may be set; with none, the SWAP
    /// time defaults to 90 µs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude_v: Option<f64>,
    /// Rectangle-equivalent SWAP time.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub swap_time_s: Option<f64>,
    /// Absolute drive frequency; overrides `detuning_hz`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequency_hz: Option<f64>,
    /// Δ/2π: drive this far below the pair's resonance.
    pub detuning_hz: f64,
    pub phase: f64,
    /// Pulse length; defaults to the SWAP duration for the envelope.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
}

impl Default for DriveSection {
    fn default() -> Self {
        DriveSection {
            modes: ["z".into(), "x".into()],
            envelope: "blackman".into(),
            coupling_hz: None,
            amplitude_v: None,
            swap_time_s: None,
            frequency_hz: None,
            detuning_hz: 0.0,
            phase: 0.0,
            duration_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub cooling_target: f64,
    /// ṅ per axis in quanta/s.
    pub heating_rates: PerAxis,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection { cooling_target: 0.1, heating_rates: PerAxis { x: 0.0, y: 0.0, z: 0.0 } }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    /// Carrier Rabi frequency Ω/2π.
    pub rabi_frequency_hz: f64,
    pub detuning_hz: f64,
    /// Defaults to the trap value of the probed mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lamb_dicke: Option<f64>,
    /// Defaults to the sideband π time.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pulse_time_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coherence_time_s: Option<f64>,
}

impl Default for ProbeSection {
    fn default() -> Self {
        ProbeSection { rabi_frequency_hz: 100e3, detuning_hz: 0.0, lamb_dicke: None, pulse_time_s: None, coherence_time_s: None }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsSection {
    /// `rwa` or `full`.
    pub model: String,
    pub linear_drive: bool,
    pub trap_modulation: bool,
    pub step_norm: f64,
    pub steps_per_period: f64,
    pub lindblad_step_norm: f64,
    pub ensemble_discard: f64,
    /// Fock cutoff per mode; defaults to 10·n̄ + 15 of the hottest
    /// initial state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
}

impl Default for NumericsSection {
    fn default() -> Self {
        let t = Tolerance::default();
        NumericsSection {
            model: "rwa".into(),
            linear_drive: false,
            trap_modulation: false,
            step_norm: t.step_norm,
            steps_per_period: t.steps_per_period,
            lindblad_step_norm: t.lindblad_step_norm,
            ensemble_discard: t.ensemble_discard,
            cutoff: None,
        }
    }
}

/// `points` values from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n).map(|k| self.start + (self.stop - self.start) * k as f64 / (n - 1) as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SwapSection {
    pub initial_n: [f64; 2],
    /// Pulse lengths scanned from 0 to `max_duration_s`.
    pub points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_duration_s: Option<f64>,
}

impl Default for SwapSection {
    fn default() -> Self {
        SwapSection { initial_n: [0.2, 6.0], points: 61, max_duration_s: None }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoolSection {
    /// `interleaved` or `single`.
    pub placement: String,
    pub cycles: usize,
    pub cool_duration_s: f64,
    pub initial_n: [f64; 2],
    /// Defaults to `noise.cooling_target`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
}

impl Default for CoolSection {
    fn default() -> Self {
        CoolSection { placement: "interleaved".into(), cycles: 8, cool_duration_s: 1e-3, initial_n: [0.2, 6.0], target: None }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatrateSection {
    /// `double_swap` or `direct`.
    pub readout: String,
    /// Zero means exact probabilities.
    pub shots: u32,
    pub max_pulse_time_s: f64,
    pub cool_duration_s: f64,
    pub initial_n: [f64; 2],
    pub waits_s: Grid,
}

impl Default for HeatrateSection {
    fn default() -> Self {
        HeatrateSection {
            readout: "double_swap".into(),
            shots: 500,
            max_pulse_time_s: 100e-6,
            cool_duration_s: 1e-3,
            initial_n: [6.0, 6.0],
            waits_s: Grid { start: 0.0, stop: 2e-3, points: 11 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrossingSection {
    /// Zero means exact line shapes.
    pub shots: u32,
    pub min_relative_peak: f64,
    pub drive_detunings_hz: Grid,
    pub laser_detunings_hz: Grid,
}

impl Default for CrossingSection {
    fn default() -> Self {
        CrossingSection {
            shots: 200,
            min_relative_peak: 0.05,
            drive_detunings_hz: Grid { start: -15e3, stop: 15e3, points: 25 },
            laser_detunings_hz: Grid { start: -20e3, stop: 20e3, points: 401 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct BesselSection {
    pub relative_noise: f64,
    /// Pair whose coupling rate normalises the driven amplitude.
    pub coupling_modes: [String; 2],
    pub amplitudes_v: Grid,
}

impl Default for BesselSection {
    fn default() -> Self {
        BesselSection {
            relative_noise: 0.02,
            coupling_modes: ["x".into(), "z".into()],
            amplitudes_v: Grid { start: 0.0, stop: 0.03, points: 61 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SqueezeSection {
    pub gt: Grid,
}

impl Default for SqueezeSection {
    fn default() -> Self {
        SqueezeSection { gt: Grid { start: 0.0, stop: 2.0, points: 9 } }
    }
}

/// Which resonance the drive frequency is measured from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resonance {
    Difference,
    Sum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub key: String,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct Report {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl Report {
    fn error(&mut self, key: &str, message: impl Into<String>) {
        self.errors.push(Issue { key: key.into(), message: message.into() });
    }

    fn warn(&mut self, key: &str, message: impl Into<String>) {
        self.warnings.push(Issue { key: key.into(), message: message.into() });
    }

    fn absorb<T>(&mut self, r: CliResult<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(CliError::Config { key, message }) => {
                self.error(&key, message);
                None
            }
            Err(e) => {
                self.error("", e.to_string());
                None
            }
        }
    }
}

/// Parses TOML text, rejecting unknown keys.
pub fn parse(text: &str) -> CliResult<RunConfig> {
    let value: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::config("", one_line(&e.to_string())))?;
    from_table(value)
}

fn from_table(table: toml::Table) -> CliResult<RunConfig> {
    RunConfig::deserialize(toml::Value::Table(table)).map_err(|e| {
        let msg = one_line(&e.to_string());
        let key = unknown_field_key(&msg).unwrap_or_default();
        CliError::config(key, msg)
    })
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn unknown_field_key(msg: &str) -> Option<String> {
    let rest = msg.split("unknown field `").nth(1)?;
    Some(rest.split('`').next()?.to_string())
}

/// Applies `key.path=value` overrides, then parses.
pub fn parse_with_overrides(text: &str, overrides: &[String]) -> CliResult<RunConfig> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::config("", one_line(&e.to_string())))?;
    for o in overrides {
        let (path, raw) = o.split_once('=').ok_or_else(|| CliError::config(o.clone(), "override must look like key.path=value"))?;
        let value = parse_value(raw.trim());
        set_path(&mut table, path.trim(), value)?;
    }
    from_table(table)
}

fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_path(table: &mut toml::Table, path: &str, value: toml::Value) -> CliResult<()> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::config(path, "empty key segment"));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| CliError::config(path, format!("`{p}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn axis(key: &str, s: &str) -> CliResult<Axis> {
    s.parse().map_err(|_| CliError::config(key, format!("unknown axis `{s}`; expected x, y or z")))
}

fn pair(key: &str, p: &[String; 2]) -> CliResult<(Axis, Axis)> {
    let a = axis(&format!("{key}[0]"), &p[0])?;
    let b = axis(&format!("{key}[1]"), &p[1])?;
    if a == b {
        return Err(CliError::config(key, "the two modes must differ"));
    }
    Ok((a, b))
}

fn core(block: &str) -> impl Fn(modeswap::Error) -> CliError + '_ {
    move |e| CliError::from_core(e, block)
}

fn positive(key: &str, v: f64) -> CliResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::config(key, format!("must be positive and finite, got {v}")))
    }
}

fn non_negative(key: &str, v: f64) -> CliResult<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::config(key, format!("must be >= 0 and finite, got {v}")))
    }
}

fn grid(key: &str, g: &Grid, min_points: usize) -> CliResult<Vec<f64>> {
    if !(g.start.is_finite() && g.stop.is_finite()) {
        return Err(CliError::config(key, "start and stop must be finite"));
    }
    if g.points < min_points {
        return Err(CliError::config(format!("{key}.points"), format!("need at least {min_points}, got {}", g.points)));
    }
    Ok(g.values())
}

/// Default cutoff for thermal states with the given occupations.
pub fn thermal_rule(n: &[f64]) -> usize {
    let hottest = n.iter().cloned().fold(0.0, f64::max);
    (10.0 * hottest + 15.0).ceil() as usize
}

impl RunConfig {
    pub fn trap(&self) -> CliResult<TrapConfig> {
        let t = &self.trap;
        let mass = positive("trap.mass_amu", t.mass_amu)? * ATOMIC_MASS_UNIT;
        let charge = positive("trap.charge_e", t.charge_e)? * ELEMENTARY_CHARGE;
        let lambda = positive("trap.laser_wavelength_m", t.laser_wavelength_m)?;
        let f = t.frequencies_hz.to_array();
        for (a, v) in Axis::ALL.iter().zip(f) {
            positive(&format!("trap.frequencies_hz.{a}"), v)?;
        }
        let mut cfg = TrapConfig {
            mass,
            charge,
            omega: f.map(hz),
            curvature: [[None; 3]; 3],
            linear: [t.linear_m.x, t.linear_m.y, t.linear_m.z],
            laser_projection: t.laser_projection.to_array(),
            laser_wavenumber: std::f64::consts::TAU / lambda,
            resonance_guard: hz(non_negative("trap.resonance_guard_hz", t.resonance_guard_hz)?),
        };
        let c = &t.curvature_m;
        for (a, b, v) in [
            (Axis::X, Axis::X, c.xx),
            (Axis::Y, Axis::Y, c.yy),
            (Axis::Z, Axis::Z, c.zz),
            (Axis::X, Axis::Y, c.xy),
            (Axis::X, Axis::Z, c.xz),
            (Axis::Y, Axis::Z, c.yz),
        ] {
            if let Some(len) = v {
                if !(len != 0.0 && len.is_finite()) {
                    return Err(CliError::config(format!("trap.curvature_m.{a}{b}"), format!("must be finite and nonzero, got {len}")));
                }
                cfg.set_curvature(a, b, Some(Curvature { length: len.abs(), negative: len < 0.0 }));
            }
        }
        cfg.validate().map_err(core("trap"))?;
        Ok(cfg)
    }

    pub fn modes(&self) -> CliResult<(Axis, Axis)> {
        pair("drive.modes", &self.drive.modes)
    }

    /// Drive pulse for the configured pair, measured from `resonance`.
    pub fn pulse(&self, cfg: &TrapConfig, resonance: Resonance) -> CliResult<DrivePulse> {
        let d = &self.drive;
        let modes = self.modes()?;
        let envelope: EnvelopeKind =
            d.envelope.parse().map_err(|_| CliError::config("drive.envelope", format!("unknown envelope `{}`; expected rectangular or blackman", d.envelope)))?;
        let set = [d.coupling_hz.is_some(), d.amplitude_v.is_some(), d.swap_time_s.is_some()].iter().filter(|b| **b).count();
        if set > 1 {
            return Err(CliError::config("drive.coupling_hz", "set at most one of coupling_hz, amplitude_v and swap_time_s"));
        }
        let (wa, wb) = (cfg.omega(modes.0), cfg.omega(modes.1));
        let centre = match resonance {
            Resonance::Difference => (wa - wb).abs(),
            Resonance::Sum => wa + wb,
        };
        let frequency = match d.frequency_hz {
            Some(f) => hz(positive("drive.frequency_hz", f)?),
            None => centre - hz(d.detuning_hz),
        };
        if !(frequency > 0.0 && frequency.is_finite()) {
            return Err(CliError::config("drive.detuning_hz", format!("gives a non-positive drive frequency {frequency:e} rad/s")));
        }
        if !d.phase.is_finite() {
            return Err(CliError::config("drive.phase", "must be finite"));
        }
        let unit = DrivePulse { amplitude: 1.0, frequency, phase: d.phase, envelope, duration: 1.0 };
        let per_volt = coupling_rate(cfg, &unit, modes).map_err(core("drive"))?.abs();
        let g = if let Some(v) = d.amplitude_v {
            non_negative("drive.amplitude_v", v)? * per_volt
        } else if let Some(f) = d.coupling_hz {
            hz(non_negative("drive.coupling_hz", f)?)
        } else {
            let t = positive("drive.swap_time_s", d.swap_time_s.unwrap_or(90e-6))?;
            std::f64::consts::PI / (2.0 * t)
        };
        if g > 0.0 && !(per_volt > 0.0) {
            return Err(CliError::config("drive.modes", "the trap has no curvature term coupling this pair"));
        }
        let amplitude = if g == 0.0 { 0.0 } else { g / per_volt };
        let duration = match d.duration_s {
            Some(t) => positive("drive.duration_s", t)?,
            None if g > 0.0 => {
                let t_rect = swap_time(g).map_err(core("drive"))?;
                DrivePulse::with_rect_equivalent(amplitude, frequency, envelope, t_rect).duration
            }
            None => 1e-3,
        };
        let pulse = DrivePulse { amplitude, duration, ..unit };
        pulse.validate().map_err(core("drive"))?;
        Ok(pulse)
    }

    pub fn noise(&self) -> CliResult<NoiseModel> {
        let n = &self.noise;
        let rates = n.heating_rates.to_array();
        for (a, r) in Axis::ALL.iter().zip(rates) {
            non_negative(&format!("noise.heating_rates.{a}"), r)?;
        }
        let model = NoiseModel { heating_rate: rates, cooling_target: non_negative("noise.cooling_target", n.cooling_target)? };
        model.validate().map_err(core("noise"))?;
        Ok(model)
    }

    pub fn probe(&self, cfg: &TrapConfig, axis: Axis) -> CliResult<LaserProbe> {
        let p = &self.probe;
        let rabi = hz(positive("probe.rabi_frequency_hz", p.rabi_frequency_hz)?);
        let mut probe = LaserProbe::for_mode(cfg, axis, rabi, 0.0);
        if let Some(eta) = p.lamb_dicke {
            probe.lamb_dicke = eta;
        }
        probe.detuning = hz(p.detuning_hz);
        probe.coherence_time = p.coherence_time_s;
        probe.validate().map_err(core("probe"))?;
        probe.pulse_time = match p.pulse_time_s {
            Some(t) => non_negative("probe.pulse_time_s", t)?,
            None => probe.sideband_pi_time(),
        };
        probe.validate().map_err(core("probe"))?;
        Ok(probe)
    }

    pub fn model(&self) -> CliResult<SwapModel> {
        let n = &self.numerics;
        match n.model.as_str() {
            "rwa" => Ok(SwapModel::Rwa),
            "full" => Ok(SwapModel::Full(FullFrameOptions { linear_drive: n.linear_drive, trap_modulation: n.trap_modulation })),
            other => Err(CliError::config("numerics.model", format!("unknown model `{other}`; expected rwa or full"))),
        }
    }

    pub fn tolerance(&self) -> CliResult<Tolerance> {
        let n = &self.numerics;
        let discard = n.ensemble_discard;
        if !(0.0..0.5).contains(&discard) {
            return Err(CliError::config("numerics.ensemble_discard", format!("must lie in [0, 0.5), got {discard}")));
        }
        Ok(Tolerance {
            step_norm: positive("numerics.step_norm", n.step_norm)?,
            steps_per_period: positive("numerics.steps_per_period", n.steps_per_period)?,
            lindblad_step_norm: positive("numerics.lindblad_step_norm", n.lindblad_step_norm)?,
            ensemble_discard: discard,
            ..Tolerance::default()
        })
    }

    /// Cutoff for thermal states with occupations `n`, checked for
    /// truncation.
    pub fn cutoff(&self, block: &str, n: &[f64]) -> CliResult<ModeDim> {
        for (k, v) in n.iter().enumerate() {
            non_negative(&format!("{block}.initial_n[{k}]"), *v)?;
        }
        let c = self.numerics.cutoff.unwrap_or_else(|| thermal_rule(n));
        let dim = ModeDim::new(c).map_err(|e| CliError::config("numerics.cutoff", e.to_string()))?;
        for v in n {
            make_thermal(*v, dim).map_err(|e| CliError::config("numerics.cutoff", format!("{e}; raise the cutoff or leave it unset")))?;
        }
        Ok(dim)
    }

    pub fn schedule(&self) -> CliResult<CoolingSchedule> {
        let c = &self.cool;
        let placement = match c.placement.as_str() {
            "interleaved" => SwapPlacement::Interleaved,
            "single" | "single_final" => SwapPlacement::SingleFinal,
            other => return Err(CliError::config("cool.placement", format!("unknown placement `{other}`; expected interleaved or single"))),
        };
        let cycles = match placement {
            SwapPlacement::SingleFinal => 1,
            SwapPlacement::Interleaved => c.cycles,
        };
        let target = non_negative("cool.target", c.target.unwrap_or(self.noise.cooling_target))?;
        let s = CoolingSchedule { cycles, target, placement, cool_duration: c.cool_duration_s };
        s.validate().map_err(core("cool"))?;
        Ok(s)
    }

    pub fn heating_experiment(&self) -> CliResult<HeatingExperiment> {
        let h = &self.heatrate;
        let readout: Readout = h.readout.parse().map_err(|_| CliError::config("heatrate.readout", format!("unknown readout `{}`; expected double_swap or direct", h.readout)))?;
        let waits = grid("heatrate.waits_s", &h.waits_s, 2)?;
        if waits.iter().any(|w| *w < 0.0) {
            return Err(CliError::config("heatrate.waits_s", "waits must be >= 0"));
        }
        for (k, v) in h.initial_n.iter().enumerate() {
            non_negative(&format!("heatrate.initial_n[{k}]"), *v)?;
        }
        Ok(HeatingExperiment {
            waits,
            readout,
            shots: (h.shots > 0).then_some(h.shots),
            rabi_frequency: hz(positive("probe.rabi_frequency_hz", self.probe.rabi_frequency_hz)?),
            max_pulse_time: positive("heatrate.max_pulse_time_s", h.max_pulse_time_s)?,
            initial: (h.initial_n[0], h.initial_n[1]),
            cool_duration: non_negative("heatrate.cool_duration_s", h.cool_duration_s)?,
        })
    }

    pub fn crossing_grids(&self) -> CliResult<(Vec<f64>, Vec<f64>)> {
        let c = &self.crossing;
        let drive = grid("crossing.drive_detunings_hz", &c.drive_detunings_hz, 1)?;
        let laser = grid("crossing.laser_detunings_hz", &c.laser_detunings_hz, 8)?;
        if !(0.0..=1.0).contains(&c.min_relative_peak) {
            return Err(CliError::config("crossing.min_relative_peak", "must lie in [0, 1]"));
        }
        Ok((drive.into_iter().map(hz).collect(), laser.into_iter().map(hz).collect()))
    }

    pub fn bessel_amplitudes(&self) -> CliResult<Vec<f64>> {
        let v = grid("bessel.amplitudes_v", &self.bessel.amplitudes_v, 3)?;
        if v.iter().any(|a| *a < 0.0) {
            return Err(CliError::config("bessel.amplitudes_v", "amplitudes must be >= 0"));
        }
        non_negative("bessel.relative_noise", self.bessel.relative_noise)?;
        Ok(v)
    }

    pub fn bessel_modes(&self) -> CliResult<(Axis, Axis)> {
        pair("bessel.coupling_modes", &self.bessel.coupling_modes)
    }

    pub fn squeeze_gt(&self) -> CliResult<Vec<f64>> {
        let v = grid("squeeze.gt", &self.squeeze.gt, 1)?;
        if v.iter().any(|x| *x < 0.0) {
            return Err(CliError::config("squeeze.gt", "gt must be >= 0"));
        }
        Ok(v)
    }

    /// Full check of every block without running dynamics.
    pub fn check(&self) -> Report {
        let mut r = Report::default();
        if self.seed > i64::MAX as u64 {
            r.error("seed", format!("must be at most {}", i64::MAX));
        }
        let trap = r.absorb(self.trap());
        r.absorb(self.modes());
        r.absorb(self.noise());
        r.absorb(self.model());
        r.absorb(self.tolerance());
        r.absorb(self.schedule());
        r.absorb(self.heating_experiment());
        r.absorb(self.crossing_grids());
        r.absorb(self.bessel_amplitudes());
        r.absorb(self.bessel_modes());
        r.absorb(self.squeeze_gt());
        r.absorb(self.cutoff("swap", &self.swap.initial_n));
        r.absorb(self.cutoff("cool", &self.cool.initial_n));
        r.absorb(self.cutoff("heatrate", &self.heatrate.initial_n));
        if self.swap.points < 2 {
            r.error("swap.points", format!("need at least 2, got {}", self.swap.points));
        }
        if let Some(t) = self.swap.max_duration_s {
            r.absorb(positive("swap.max_duration_s", t));
        }
        let Some(trap) = trap else { return r };
        if let Ok(modes) = self.modes() {
            r.absorb(self.probe(&trap, modes.0));
            if let Some(pulse) = r.absorb(self.pulse(&trap, Resonance::Difference)) {
                let g = coupling_rate(&trap, &pulse, modes).map(f64::abs).unwrap_or(0.0);
                let w = trap.omega(modes.0).min(trap.omega(modes.1));
                if g / w > RWA_WARNING_RATIO && self.numerics.model == "rwa" {
                    r.warn(
                        "drive.coupling_hz",
                        format!("g/omega = {:.3e} exceeds {RWA_WARNING_RATIO}; the RWA may fail, consider numerics.model = \"full\"", g / w),
                    );
                }
            }
        }
        r
    }
}
