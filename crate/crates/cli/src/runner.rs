use rayon::prelude::*;

use modeswap::dynamics::squeeze_cutoff;
use modeswap::fock::{make_thermal, tensor, ModeDim};
use modeswap::presets::BESSEL_DRIVE_HZ;
use modeswap::protocols::{fit_heating_rate, heating_readouts, interleaved_cooling, single_swap_cooling, squeeze_experiment, swap, swap_trajectory, PairDrive, SwapPlacement};
use modeswap::spectroscopy::{avoided_crossing_scan, bessel_characterization_scan, sideband_excitation, BesselScan, CrossingScan};
use modeswap::trap::coupling_rate;
use modeswap::units::{hz, to_hz};
use modeswap::{DrivePulse, EnvelopeKind, ModeSlot, Sideband, TwoModeState};

use crate::config::{Grid, Report, Resonance, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{RunOutput, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Swap,
    Cool,
    Heatrate,
    Crossing,
    Bessel,
    Squeeze,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Swap => "swap",
            Command::Cool => "cool",
            Command::Heatrate => "heatrate",
            Command::Crossing => "crossing",
            Command::Bessel => "bessel",
            Command::Squeeze => "squeeze",
        }
    }
}

fn core(block: &'static str) -> impl Fn(modeswap::Error) -> CliError {
    move |e| CliError::from_core(e, block)
}

/// Runs `cmd` after checking the whole config.
pub fn run(cmd: Command, cfg: &RunConfig) -> CliResult<RunOutput> {
    let report = cfg.check();
    if let Some(first) = report.errors.into_iter().next() {
        return Err(CliError::Config { key: first.key, message: first.message });
    }
    match cmd {
        Command::Swap => run_swap(cfg),
        Command::Cool => run_cool(cfg),
        Command::Heatrate => run_heatrate(cfg),
        Command::Crossing => run_crossing(cfg),
        Command::Bessel => run_bessel(cfg),
        Command::Squeeze => run_squeeze(cfg),
    }
}

pub fn validate(cfg: &RunConfig) -> Report {
    cfg.check()
}

/// Sideband probabilities and occupations of both modes after pulses of
/// increasing length.
fn run_swap(cfg: &RunConfig) -> CliResult<RunOutput> {
    let trap = cfg.trap()?;
    let modes = cfg.modes()?;
    let pulse = cfg.pulse(&trap, Resonance::Difference)?;
    let (model, tol) = (cfg.model()?, cfg.tolerance()?);
    let dim = cfg.cutoff("swap", &cfg.swap.initial_n)?;
    let [na, nb] = cfg.swap.initial_n;
    let a = make_thermal(na, dim).map_err(core("numerics"))?;
    let b = make_thermal(nb, dim).map_err(core("numerics"))?;
    let state = tensor(&a, &b, tol.budget).map_err(core("numerics"))?;
    let probes = (cfg.probe(&trap, modes.0)?, cfg.probe(&trap, modes.1)?);
    let tmax = cfg.swap.max_duration_s.unwrap_or(2.0 * pulse.duration);
    let times = Grid { start: 0.0, stop: tmax, points: cfg.swap.points }.values();
    // a rectangular pulse is one continuous evolution; other envelopes
    // change shape with their length
    let states: Vec<TwoModeState> = if pulse.envelope == EnvelopeKind::Rectangular {
        let long = DrivePulse { duration: tmax, ..pulse };
        swap_trajectory(&state, &trap, &long, modes, model, &times, &tol).map_err(core("numerics"))?
    } else {
        times
            .par_iter()
            .map(|&t| match t > 0.0 {
                true => swap(&state, &trap, &DrivePulse { duration: t, ..pulse }, modes, model, &tol).map(|o| o.state),
                false => Ok(state.clone()),
            })
            .collect::<modeswap::Result<_>>()
            .map_err(core("numerics"))?
    };
    let rows: Vec<[f64; 5]> = times
        .par_iter()
        .zip(&states)
        .map(|(&t, s)| -> CliResult<[f64; 5]> {
            let ma = s.partial_trace(ModeSlot::I).map_err(core("numerics"))?;
            let mb = s.partial_trace(ModeSlot::J).map_err(core("numerics"))?;
            let ra = sideband_excitation(&ma.populations(), &probes.0, Sideband::Red, probes.0.pulse_time).map_err(core("probe"))?;
            let rb = sideband_excitation(&mb.populations(), &probes.1, Sideband::Red, probes.1.pulse_time).map_err(core("probe"))?;
            Ok([t, ma.mean_n(), mb.mean_n(), ra, rb])
        })
        .collect::<CliResult<_>>()?;
    let (ka, kb) = (modes.0.to_string(), modes.1.to_string());
    let names = ["t_s".to_string(), format!("n_{ka}"), format!("n_{kb}"), format!("p_red_{ka}"), format!("p_red_{kb}")];
    let mut table = Table::new(&names.iter().map(String::as_str).collect::<Vec<_>>());
    for r in rows {
        table.push(r.iter().map(|&v| v.into()).collect());
    }
    let g = coupling_rate(&trap, &pulse, modes).map_err(core("drive"))?.abs();
    Ok(RunOutput { table, observables: vec![("coupling_hz".into(), to_hz(g), 0.0), ("pulse_duration_s".into(), pulse.duration, 0.0)] })
}

fn run_cool(cfg: &RunConfig) -> CliResult<RunOutput> {
    let trap = cfg.trap()?;
    let modes = cfg.modes()?;
    let pulse = cfg.pulse(&trap, Resonance::Difference)?;
    let (model, tol, noise) = (cfg.model()?, cfg.tolerance()?, cfg.noise()?);
    let schedule = cfg.schedule()?;
    let dim = cfg.cutoff("cool", &cfg.cool.initial_n)?;
    let [np, ns] = cfg.cool.initial_n;
    let p = make_thermal(np, dim).map_err(core("numerics"))?;
    let s = make_thermal(ns, dim).map_err(core("numerics"))?;
    let drive = PairDrive { cfg: &trap, pulse: &pulse, modes, noise: &noise, model, tol: &tol };
    let result = match schedule.placement {
        SwapPlacement::Interleaved => interleaved_cooling((&p, &s), &schedule, drive),
        SwapPlacement::SingleFinal => single_swap_cooling((&p, &s), &schedule, drive),
    }
    .map_err(core("cool"))?;
    let (ka, kb) = (modes.0.to_string(), modes.1.to_string());
    let names = ["step".to_string(), "label".into(), "t_s".into(), format!("n_{ka}"), format!("n_{kb}")];
    let mut table = Table::new(&names.iter().map(String::as_str).collect::<Vec<_>>());
    for (k, st) in result.steps.iter().enumerate() {
        table.push(vec![k.into(), st.label.as_str().into(), st.time.into(), st.n_bar[0].into(), st.n_bar[1].into()]);
    }
    Ok(RunOutput { table, observables: result.observables })
}

fn run_heatrate(cfg: &RunConfig) -> CliResult<RunOutput> {
    let trap = cfg.trap()?;
    let modes = cfg.modes()?;
    let pulse = cfg.pulse(&trap, Resonance::Difference)?;
    let (model, tol, noise) = (cfg.model()?, cfg.tolerance()?, cfg.noise()?);
    let exp = cfg.heating_experiment()?;
    let drive = PairDrive { cfg: &trap, pulse: &pulse, modes, noise: &noise, model, tol: &tol };
    let points = heating_readouts(&exp, drive).map_err(core("heatrate"))?;
    let (fit, estimates) = fit_heating_rate(&points, exp.shots, cfg.seed).map_err(core("heatrate"))?;
    let mut table = Table::new(&[
        "wait_s",
        "n_true",
        "n_secondary_true",
        "p_red",
        "p_blue",
        "pulse_time_s",
        "n_est",
        "n_est_err",
        "rate",
        "rate_err",
    ]);
    for (p, e) in points.iter().zip(&estimates) {
        let (n, s) = e.unwrap_or((f64::NAN, f64::NAN));
        table.push(vec![
            p.wait.into(),
            p.true_n_bar.into(),
            p.secondary_n_bar.into(),
            p.p_red.into(),
            p.p_blue.into(),
            p.pulse_time.into(),
            n.into(),
            s.into(),
            fit.slope.into(),
            fit.slope_err.into(),
        ]);
    }
    Ok(RunOutput {
        table,
        observables: vec![
            ("heating_rate".into(), fit.slope, fit.slope_err),
            ("intercept".into(), fit.intercept, fit.intercept_err),
            ("chi2".into(), fit.chi2, 0.0),
        ],
    })
}

fn run_crossing(cfg: &RunConfig) -> CliResult<RunOutput> {
    let trap = cfg.trap()?;
    let modes = cfg.modes()?;
    let pulse = cfg.pulse(&trap, Resonance::Difference)?;
    let probe = cfg.probe(&trap, modes.0)?;
    let (drive_detunings, laser_detunings) = cfg.crossing_grids()?;
    let c = &cfg.crossing;
    let scan = CrossingScan {
        drive_detunings,
        laser_detunings,
        shots: (c.shots > 0).then_some(c.shots),
        seed: cfg.seed,
        min_relative_peak: c.min_relative_peak,
    };
    let r = avoided_crossing_scan(&trap, &pulse, modes, &probe, &scan).map_err(core("crossing"))?;
    let mut table =
        Table::new(&["delta_hz", "separation_hz", "separation_err_hz", "splitting_hz", "center_1_hz", "center_2_hz", "flag"]);
    for p in &r.points {
        let c1 = p.peaks.first().map_or(f64::NAN, |q| q.center);
        let c2 = p.peaks.get(1).map_or(c1, |q| q.center);
        table.push(vec![
            to_hz(p.x).into(),
            to_hz(p.values[0]).into(),
            to_hz(p.errors[0]).into(),
            to_hz(p.values[1]).into(),
            to_hz(c1).into(),
            to_hz(c2).into(),
            p.flag.clone().unwrap_or_default().into(),
        ]);
    }
    let observables = r.fitted.iter().map(|(n, v, e)| (format!("{n}_hz"), to_hz(*v), to_hz(*e))).collect();
    Ok(RunOutput { table, observables })
}

fn run_bessel(cfg: &RunConfig) -> CliResult<RunOutput> {
    let trap = cfg.trap()?;
    let frequency = hz(cfg.drive.frequency_hz.unwrap_or(BESSEL_DRIVE_HZ));
    let pulse = DrivePulse { amplitude: 0.0, frequency, phase: cfg.drive.phase, envelope: EnvelopeKind::Rectangular, duration: 1e-3 };
    pulse.validate().map_err(core("drive"))?;
    let scan = BesselScan {
        amplitudes: cfg.bessel_amplitudes()?,
        relative_noise: cfg.bessel.relative_noise,
        seed: cfg.seed,
        coupling_modes: cfg.bessel_modes()?,
    };
    let r = bessel_characterization_scan(&trap, &pulse, &scan).map_err(core("bessel"))?;
    let mut table = Table::new(&["amplitude_v", "ka", "carrier_ratio", "sideband_ratio", "coupling_hz"]);
    for p in &r.points {
        table.push(vec![p.x.into(), p.values[0].into(), p.values[1].into(), p.values[2].into(), to_hz(p.values[3]).into()]);
    }
    let mut observables = r.fitted.clone();
    if let Some((v, e)) = r.fitted("a_per_g") {
        // m per 2π·Hz
        observables.push(("a_per_g_hz".into(), v * hz(1.0), e * hz(1.0)));
    }
    Ok(RunOutput { table, observables })
}

fn run_squeeze(cfg: &RunConfig) -> CliResult<RunOutput> {
    let trap = cfg.trap()?;
    let modes = cfg.modes()?;
    let pulse = cfg.pulse(&trap, Resonance::Sum)?;
    let tol = cfg.tolerance()?;
    let gt = cfg.squeeze_gt()?;
    let g = coupling_rate(&trap, &pulse, modes).map_err(core("drive"))?.abs();
    if !(g > 0.0) {
        return Err(CliError::config("drive.coupling_hz", "squeezing needs a nonzero coupling"));
    }
    let gmax = gt.iter().cloned().fold(0.0, f64::max);
    let cutoff = match cfg.numerics.cutoff {
        Some(c) => c,
        None => squeeze_cutoff(gmax, 1e-10),
    };
    let dim = ModeDim::new(cutoff).map_err(|e| CliError::config("numerics.cutoff", e.to_string()))?;
    let times: Vec<f64> = gt.iter().map(|x| x / g).collect();
    let r = squeeze_experiment(&trap, &pulse, modes, &times, dim, &tol).map_err(core("squeeze"))?;
    let (ka, kb) = (modes.0.to_string(), modes.1.to_string());
    let names = ["gt".to_string(), "t_s".into(), format!("n_{ka}"), format!("n_{kb}"), "witness".into()];
    let mut table = Table::new(&names.iter().map(String::as_str).collect::<Vec<_>>());
    for (x, st) in gt.iter().zip(&r.steps) {
        let w = st.estimate.map_or(f64::NAN, |e| e.0);
        table.push(vec![(*x).into(), st.time.into(), st.n_bar[0].into(), st.n_bar[1].into(), w.into()]);
    }
    Ok(RunOutput { table, observables: vec![("coupling_hz".into(), to_hz(g), 0.0), ("cutoff".into(), cutoff as f64, 0.0)] })
}
