//! Scripted experiments: SWAP, interleaved and single-SWAP cooling, the
//! heating-rate measurement and the two-mode squeezing demonstration.
//!
//! Cooling and heating act on single modes, so the protocols keep the two
//! modes as a pair of marginals between pulses. A SWAP tensors the
//! marginals, propagates the joint state and traces back out; heating
//! during a pulse is split symmetrically around it.

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::dynamics::{evolve_unitary, heat_mode, squeeze_evolution, EvolutionReport, NoiseModel, Tolerance};
use crate::error::{Error, Result};
use crate::fit::{weighted_line, LineFit};
use crate::fock::{make_thermal, tensor, thermal_cutoff, ModeDim, ModeSlot, ModeState, TwoModeState};
use crate::spectroscopy::{binomial_sigma, estimate_nbar, point_rng, sideband_excitation, LaserProbe, Sideband};
use crate::trap::{build_hamiltonian, coupling_rate, Axis, DrivePulse, Frame, FullFrameOptions, TrapConfig};

/// Propagation model for SWAP pulses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SwapModel {
    /// Beamsplitter in the frame of the drive; a drive frequency away from
    /// `|ω_i − ω_j|` enters as the detuning of the detuned frame.
    Rwa,
    Full(FullFrameOptions),
}

/// Signed detuning of the drive from the difference resonance, in the
/// convention of [`Frame::RwaDetuned`] for the ordered pair `modes`.
pub fn pair_detuning(cfg: &TrapConfig, pulse: &DrivePulse, modes: (Axis, Axis)) -> f64 {
    let diff = cfg.omega(modes.0) - cfg.omega(modes.1);
    diff.signum() * (diff.abs() - pulse.frequency)
}

fn frame_for(cfg: &TrapConfig, pulse: &DrivePulse, modes: (Axis, Axis), model: SwapModel) -> Frame {
    match model {
        SwapModel::Full(opts) => Frame::FullLabInteraction(opts),
        SwapModel::Rwa => {
            let delta = pair_detuning(cfg, pulse, modes);
            if delta == 0.0 {
                Frame::RwaDifference
            } else {
                Frame::RwaDetuned(delta)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct SwapOutcome {
    pub state: TwoModeState,
    /// `1 − |⟨n_i⟩_final − ⟨n_j⟩_initial| / max(⟨n_j⟩_initial, 1)`.
    pub fidelity: f64,
    pub report: EvolutionReport,
}

/// Drives the pair `modes` (slot I, slot J) with `pulse` for its full
/// duration.
pub fn swap(
    state: &TwoModeState,
    cfg: &TrapConfig,
    pulse: &DrivePulse,
    modes: (Axis, Axis),
    model: SwapModel,
    tol: &Tolerance,
) -> Result<SwapOutcome> {
    let h = build_hamiltonian(cfg, pulse, modes, frame_for(cfg, pulse, modes, model))?;
    let report = evolve_unitary(state, &h, (0.0, pulse.duration), tol)?.ok()?;
    let nj0 = state.mean_n(ModeSlot::J);
    let ni1 = report.final_state.mean_n(ModeSlot::I);
    let fidelity = 1.0 - (ni1 - nj0).abs() / nj0.max(1.0);
    Ok(SwapOutcome { state: report.final_state.clone(), fidelity, report })
}

/// States at each of `times` (ascending, within `[0, pulse.duration]`) of a
/// single pulse, evolved segment by segment.
pub fn swap_trajectory(
    state: &TwoModeState,
    cfg: &TrapConfig,
    pulse: &DrivePulse,
    modes: (Axis, Axis),
    model: SwapModel,
    times: &[f64],
    tol: &Tolerance,
) -> Result<Vec<TwoModeState>> {
    if times.windows(2).any(|w| !(w[1] >= w[0])) || times.iter().any(|t| !(*t >= 0.0 && *t <= pulse.duration)) {
        return Err(Error::invalid("times", "must be ascending within the pulse"));
    }
    let h = build_hamiltonian(cfg, pulse, modes, frame_for(cfg, pulse, modes, model))?;
    let mut out = Vec::with_capacity(times.len());
    let (mut current, mut t) = (state.clone(), 0.0);
    for &next in times {
        if next > t {
            current = evolve_unitary(&current, &h, (t, next), tol)?.ok()?.final_state;
            t = next;
        }
        out.push(current.clone());
    }
    Ok(out)
}

/// One recorded stage of a protocol.
#[derive(Clone, Debug)]
pub struct ProtocolStep {
    pub label: String,
    /// Elapsed protocol time at the end of the stage.
    pub time: f64,
    /// `(n̄_primary, n̄_secondary)`, or `(n̄_i, n̄_j)` for two-mode protocols.
    pub n_bar: [f64; 2],
    /// Marginal states after the stage.
    pub states: Option<(ModeState, ModeState)>,
    /// Measured quantity with its uncertainty, when the stage is a readout.
    pub estimate: Option<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct ProtocolResult {
    pub steps: Vec<ProtocolStep>,
    /// Extracted quantities `(name, value, uncertainty)`.
    pub observables: Vec<(String, f64, f64)>,
    /// SHA-256 of the protocol inputs.
    pub config_hash: String,
    pub seed: Option<u64>,
}

impl ProtocolResult {
    pub fn observable(&self, name: &str) -> Option<(f64, f64)> {
        self.observables.iter().find(|o| o.0 == name).map(|o| (o.1, o.2))
    }

    pub fn final_n_bar(&self) -> [f64; 2] {
        self.steps.last().map_or([f64::NAN; 2], |s| s.n_bar)
    }
}

/// Hex SHA-256 of the debug rendering of the inputs.
pub fn provenance_hash(inputs: &impl std::fmt::Debug) -> String {
    let digest = Sha256::digest(format!("{inputs:?}").as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SwapPlacement {
    /// A SWAP after every cooling stage.
    Interleaved,
    /// Cooling first, one SWAP at the end.
    SingleFinal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoolingSchedule {
    /// Number of SWAP pulses; exactly 1 for a single SWAP.
    pub cycles: usize,
    /// Occupation left in the primary mode by each cooling stage.
    pub target: f64,
    pub placement: SwapPlacement,
    /// Duration of each cooling stage.
    pub cool_duration: f64,
}

impl CoolingSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.cycles < 1 {
            return Err(Error::invalid("cycles", "must be >= 1"));
        }
        if self.placement == SwapPlacement::SingleFinal && self.cycles != 1 {
            return Err(Error::invalid("cycles", "a single-SWAP schedule has exactly one cycle"));
        }
        if !(self.target >= 0.0) {
            return Err(Error::invalid("target", "must be >= 0"));
        }
        if !(self.cool_duration >= 0.0) {
            return Err(Error::invalid("cool_duration", "must be >= 0"));
        }
        Ok(())
    }
}

/// Shared inputs of the cooling protocols.
#[derive(Clone, Copy, Debug)]
pub struct PairDrive<'a> {
    pub cfg: &'a TrapConfig,
    /// SWAP pulse.
    pub pulse: &'a DrivePulse,
    /// `(primary, secondary)`; the primary is the optically cooled mode.
    pub modes: (Axis, Axis),
    pub noise: &'a NoiseModel,
    pub model: SwapModel,
    pub tol: &'a Tolerance,
}

/// Marginal bookkeeping shared by the cooling and heating protocols.
struct Pair<'a> {
    drive: PairDrive<'a>,
    primary: ModeState,
    secondary: ModeState,
    time: f64,
    steps: Vec<ProtocolStep>,
}

impl<'a> Pair<'a> {
    fn new(drive: PairDrive<'a>, primary: ModeState, secondary: ModeState) -> Self {
        let mut p = Pair { drive, primary, secondary, time: 0.0, steps: Vec::new() };
        p.record("initial");
        p
    }

    fn record(&mut self, label: &str) {
        self.steps.push(ProtocolStep {
            label: label.to_string(),
            time: self.time,
            n_bar: [self.primary.mean_n(), self.secondary.mean_n()],
            states: Some((self.primary.clone(), self.secondary.clone())),
            estimate: None,
        });
    }

    fn heat(&mut self, duration: f64) -> Result<()> {
        let (rp, rs) = (self.drive.noise.rate(self.drive.modes.0), self.drive.noise.rate(self.drive.modes.1));
        self.primary = heat_mode(&self.primary, rp, duration, self.drive.tol)?;
        self.secondary = heat_mode(&self.secondary, rs, duration, self.drive.tol)?;
        Ok(())
    }

    /// Primary replaced by thermal(target) after `duration`, the secondary
    /// heating meanwhile.
    fn cool(&mut self, target: f64, duration: f64, label: &str) -> Result<()> {
        let rs = self.drive.noise.rate(self.drive.modes.1);
        self.secondary = heat_mode(&self.secondary, rs, duration, self.drive.tol)?;
        self.primary = make_thermal(target, self.secondary.dim())?;
        self.time += duration;
        self.record(label);
        Ok(())
    }

    fn swap(&mut self, label: &str) -> Result<f64> {
        let d = self.drive;
        let half = 0.5 * d.pulse.duration;
        self.heat(half)?;
        let joint = tensor(&self.primary, &self.secondary, d.tol.budget)?;
        let out = swap(&joint, d.cfg, d.pulse, d.modes, d.model, d.tol)?;
        self.primary = out.state.partial_trace(ModeSlot::I)?;
        self.secondary = out.state.partial_trace(ModeSlot::J)?;
        self.heat(half)?;
        self.time += d.pulse.duration;
        self.record(label);
        Ok(out.fidelity)
    }
}

/// Alternates cooling of the primary with SWAPs: an initial cooling stage,
/// then `cycles × (SWAP, cooling)`. The working cutoff is that of the
/// initial secondary state.
pub fn interleaved_cooling(
    initial: (&ModeState, &ModeState),
    schedule: &CoolingSchedule,
    drive: PairDrive<'_>,
) -> Result<ProtocolResult> {
    schedule.validate()?;
    drive.noise.validate()?;
    if schedule.placement != SwapPlacement::Interleaved {
        return Err(Error::invalid("placement", "interleaved cooling needs the interleaved placement"));
    }
    let mut pair = Pair::new(drive, initial.0.clone(), initial.1.clone());
    pair.cool(schedule.target, schedule.cool_duration, "cool 0")?;
    let mut worst: f64 = 1.0;
    for k in 1..=schedule.cycles {
        worst = worst.min(pair.swap(&format!("swap {k}"))?);
        pair.cool(schedule.target, schedule.cool_duration, &format!("cool {k}"))?;
    }
    let [np, ns] = [pair.primary.mean_n(), pair.secondary.mean_n()];
    Ok(ProtocolResult {
        steps: pair.steps,
        observables: vec![
            ("n_primary".into(), np, 0.0),
            ("n_secondary".into(), ns, 0.0),
            ("min_swap_fidelity".into(), worst, 0.0),
        ],
        config_hash: provenance_hash(&(initial, schedule, &drive.cfg, &drive.pulse, drive.modes, &drive.noise, drive.model)),
        seed: None,
    })
}

/// Cools the primary for `schedule.cool_duration`, then swaps once: the
/// secondary ends cold, the primary takes over the secondary's heat.
pub fn single_swap_cooling(
    initial: (&ModeState, &ModeState),
    schedule: &CoolingSchedule,
    drive: PairDrive<'_>,
) -> Result<ProtocolResult> {
    schedule.validate()?;
    drive.noise.validate()?;
    if schedule.placement != SwapPlacement::SingleFinal {
        return Err(Error::invalid("placement", "single-SWAP cooling needs the single_final placement"));
    }
    let mut pair = Pair::new(drive, initial.0.clone(), initial.1.clone());
    pair.cool(schedule.target, schedule.cool_duration, "cool")?;
    let fidelity = pair.swap("swap")?;
    let [np, ns] = [pair.primary.mean_n(), pair.secondary.mean_n()];
    Ok(ProtocolResult {
        steps: pair.steps,
        observables: vec![
            ("n_primary".into(), np, 0.0),
            ("n_secondary".into(), ns, 0.0),
            ("swap_fidelity".into(), fidelity, 0.0),
        ],
        config_hash: provenance_hash(&(initial, schedule, &drive.cfg, &drive.pulse, drive.modes, &drive.noise, drive.model)),
        seed: None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Readout {
    /// Sidebands of the secondary mode itself.
    Direct,
    /// SWAP back into the primary and read the primary's sidebands.
    DoubleSwap,
}

impl std::str::FromStr for Readout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" | "direct_y" => Ok(Readout::Direct),
            "double_swap" | "double_swap_via_x" => Ok(Readout::DoubleSwap),
            other => Err(Error::invalid("readout", format!("unknown readout `{other}`"))),
        }
    }
}

/// Settings of the heating-rate measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct HeatingExperiment {
    /// Waiting times after preparation.
    pub waits: Vec<f64>,
    pub readout: Readout,
    /// Shots per sideband per wait point; `None` is the noiseless limit.
    pub shots: Option<u32>,
    /// Bare carrier Rabi frequency of the probe laser.
    pub rabi_frequency: f64,
    /// Longest usable probe pulse; sideband pulses are the single-phonon
    /// π-time or this, whichever is shorter.
    pub max_pulse_time: f64,
    /// Occupations before preparation `(primary, secondary)`.
    pub initial: (f64, f64),
    /// Length of the cooling stage of the preparation.
    pub cool_duration: f64,
}

/// Noise-free sideband probabilities at one wait time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReadoutPoint {
    pub wait: f64,
    /// Occupation of the mode whose sidebands are read.
    pub true_n_bar: f64,
    /// True occupation of the secondary before readout.
    pub secondary_n_bar: f64,
    pub p_red: f64,
    pub p_blue: f64,
    pub pulse_time: f64,
}

/// Prepares the secondary by single-SWAP cooling, re-cools the primary,
/// then for each wait time heats both modes and evaluates the readout
/// sideband probabilities exactly.
pub fn heating_readouts(exp: &HeatingExperiment, drive: PairDrive<'_>) -> Result<Vec<ReadoutPoint>> {
    drive.noise.validate()?;
    if exp.waits.len() < 3 {
        return Err(Error::invalid("waits", "need at least 3 wait times"));
    }
    if exp.waits.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid("waits", "must be non-negative"));
    }
    let t_max = exp.waits.iter().cloned().fold(0.0, f64::max);
    let n_cool = drive.noise.cooling_target;
    let (rp, rs) = (drive.noise.rate(drive.modes.0), drive.noise.rate(drive.modes.1));
    let n_top = exp.initial.0.max(exp.initial.1).max(n_cool + rp.max(rs) * (t_max + 4.0 * drive.pulse.duration + exp.cool_duration));
    let dim = ModeDim::new(thermal_cutoff(n_top, 1e-10).max(10 * n_top.ceil() as usize + 15))?;
    let mut pair = Pair::new(drive, make_thermal(exp.initial.0, dim)?, make_thermal(exp.initial.1, dim)?);
    pair.cool(n_cool, exp.cool_duration, "cool")?;
    pair.swap("swap")?;
    pair.primary = make_thermal(n_cool, dim)?;
    let (read_axis, slot_state) = match exp.readout {
        Readout::Direct => (drive.modes.1, false),
        Readout::DoubleSwap => (drive.modes.0, true),
    };
    let base = LaserProbe::for_mode(drive.cfg, read_axis, exp.rabi_frequency, 0.0);
    let pulse_time = base.sideband_pi_time().min(exp.max_pulse_time);
    let probe = LaserProbe { pulse_time, ..base };
    probe.validate()?;
    let (p0, s0) = (pair.primary.clone(), pair.secondary.clone());
    exp.waits
        .par_iter()
        .map(|&wait| -> Result<ReadoutPoint> {
            let mut p = Pair { drive, primary: p0.clone(), secondary: s0.clone(), time: 0.0, steps: Vec::new() };
            p.heat(wait)?;
            let secondary_n_bar = p.secondary.mean_n();
            if slot_state {
                p.swap("readback")?;
            }
            let read = if slot_state { &p.primary } else { &p.secondary };
            let pops = read.populations();
            Ok(ReadoutPoint {
                wait,
                true_n_bar: read.mean_n(),
                secondary_n_bar,
                p_red: sideband_excitation(&pops, &probe, Sideband::Red, pulse_time)?,
                p_blue: sideband_excitation(&pops, &probe, Sideband::Blue, pulse_time)?,
                pulse_time,
            })
        })
        .collect()
}

/// Samples the readouts at `shots` per sideband, converts them to `n̄ ± σ`
/// and fits a weighted line. Points whose sampled ratio is not thermal are
/// dropped; the fit fails with fewer than two usable points.
pub fn fit_heating_rate(points: &[ReadoutPoint], shots: Option<u32>, seed: u64) -> Result<(LineFit, Vec<Option<(f64, f64)>>)> {
    let mut estimates = Vec::with_capacity(points.len());
    let (mut x, mut y, mut s, mut blue) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (k, pt) in points.iter().enumerate() {
        let mut rng = point_rng(seed, k);
        let sample = |p: f64, rng: &mut rand_chacha::ChaCha8Rng| match shots {
            None => p,
            Some(n) => {
                use rand_distr::{Binomial, Distribution};
                Binomial::new(n as u64, p.clamp(0.0, 1.0)).map_or(p, |b| b.sample(rng) as f64 / n as f64)
            }
        };
        let (r, b) = (sample(pt.p_red, &mut rng), sample(pt.p_blue, &mut rng));
        match estimate_nbar(r, b, shots) {
            Ok(e) => {
                let sigma = if shots.is_some() { e.sigma } else { 1e-3 * (1.0 + e.n_bar) };
                x.push(pt.wait);
                y.push(e.n_bar);
                s.push(sigma.max(binomial_sigma(0.0, shots)));
                blue.push(b);
                estimates.push(Some((e.n_bar, e.sigma)));
            }
            Err(_) => estimates.push(None),
        }
    }
    if x.len() < 2 {
        return Err(Error::FitFailed("fewer than two usable sideband readouts".into()));
    }
    let first = weighted_line(&x, &y, &s)?;
    if shots.is_none() {
        return Ok((first, estimates));
    }
    // reweight at the fitted occupation so that weights do not track the noise
    for ((sk, &xk), &bk) in s.iter_mut().zip(&x).zip(&blue) {
        let n = (first.intercept + first.slope * xk).max(0.0);
        let red = bk * n / (n + 1.0);
        if let Ok(e) = estimate_nbar(red, bk, shots) {
            *sk = e.sigma.max(binomial_sigma(0.0, shots));
        }
    }
    Ok((weighted_line(&x, &y, &s)?, estimates))
}

/// Full heating-rate measurement: preparation, waits, sampled readout and
/// line fit. The slope is reported as `heating_rate`.
pub fn heating_rate_experiment(exp: &HeatingExperiment, drive: PairDrive<'_>, seed: u64) -> Result<ProtocolResult> {
    let points = heating_readouts(exp, drive)?;
    let (fit, estimates) = fit_heating_rate(&points, exp.shots, seed)?;
    let steps = points
        .iter()
        .zip(&estimates)
        .map(|(p, e)| ProtocolStep {
            label: "readout".into(),
            time: p.wait,
            n_bar: [p.true_n_bar, p.secondary_n_bar],
            states: None,
            estimate: *e,
        })
        .collect();
    Ok(ProtocolResult {
        steps,
        observables: vec![
            ("heating_rate".into(), fit.slope, fit.slope_err),
            ("intercept".into(), fit.intercept, fit.intercept_err),
            ("chi2".into(), fit.chi2, 0.0),
        ],
        config_hash: provenance_hash(&(exp, &drive.cfg, &drive.pulse, drive.modes, &drive.noise, drive.model)),
        seed: Some(seed),
    })
}

/// Parametric amplification from the ground state: `pulse.frequency` must
/// sit at `ω_i + ω_j` within the trap's resonance guard. Each time in
/// `times` is an independent run; the witness is recorded as the step
/// estimate.
pub fn squeeze_experiment(
    cfg: &TrapConfig,
    pulse: &DrivePulse,
    modes: (Axis, Axis),
    times: &[f64],
    cutoff: ModeDim,
    tol: &Tolerance,
) -> Result<ProtocolResult> {
    let sum = cfg.omega(modes.0) + cfg.omega(modes.1);
    if (pulse.frequency - sum).abs() > cfg.resonance_guard {
        return Err(Error::invalid("pulse.frequency", format!("must be within the guard band of ω_i + ω_j = {sum:e} rad/s")));
    }
    let g = coupling_rate(cfg, pulse, modes)?.abs();
    let runs: Vec<_> = times
        .par_iter()
        .map(|&t| squeeze_evolution(g, t, cutoff, tol).map(|r| (t, r)))
        .collect::<Result<_>>()?;
    let steps = runs
        .into_iter()
        .map(|(t, r)| ProtocolStep {
            label: format!("corr {:.6e}", r.correlation.norm()),
            time: t,
            n_bar: [r.n_i, r.n_j],
            states: Some((r.state.partial_trace(ModeSlot::I).expect("valid"), r.state.partial_trace(ModeSlot::J).expect("valid"))),
            estimate: Some((r.witness, 0.0)),
        })
        .collect();
    Ok(ProtocolResult {
        steps,
        observables: vec![("g".into(), g, 0.0)],
        config_hash: provenance_hash(&(cfg, pulse, modes, times, cutoff)),
        seed: None,
    })
}
