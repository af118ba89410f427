use modeswap::dynamics::{evolve_unitary, NoiseModel, Tolerance};
use modeswap::fock::{make_thermal, thermal_cutoff, ModeDim, TwoModeDims, TwoModeState};
use modeswap::presets;
use modeswap::protocols::{
    fit_heating_rate, heating_readouts, interleaved_cooling, single_swap_cooling, squeeze_experiment, PairDrive, Readout,
    SwapModel, SwapPlacement,
};
use modeswap::trap::{build_hamiltonian, coupling_rate, swap_time, Axis, DrivePulse, EnvelopeKind, Frame, FullFrameOptions};
use modeswap::units::hz;

#[test]
fn ideal_interleaved_cooling_reaches_vacuum() {
    let cfg = presets::coupling_only_trap();
    let modes = (Axis::Z, Axis::X);
    let pulse = presets::swap_pulse(&cfg, modes, EnvelopeKind::Rectangular, 90e-6, 0.0).unwrap();
    let noise = NoiseModel::noiseless();
    let tol = Tolerance::default();
    let drive = PairDrive { cfg: &cfg, pulse: &pulse, modes, noise: &noise, model: SwapModel::Rwa, tol: &tol };
    let d = ModeDim::new(215).unwrap();
    let (z, x) = (make_thermal(20.0, d).unwrap(), make_thermal(6.0, d).unwrap());
    let sched = modeswap::CoolingSchedule { target: 0.0, ..presets::cooling_schedule(SwapPlacement::Interleaved) };
    let [np, ns] = interleaved_cooling((&z, &x), &sched, drive).unwrap().final_n_bar();
    assert!(np < 1e-3 && ns < 1e-3, "{np} {ns}");
}

#[test]
fn single_swap_is_more_sensitive_to_drive_frequency() {
    let fix = presets::cooling_fixture();
    let d = ModeDim::new(thermal_cutoff(presets::COOLING_INITIAL.1, 1e-4)).unwrap();
    let (z, x) = (make_thermal(presets::COOLING_INITIAL.0, d).unwrap(), make_thermal(presets::COOLING_INITIAL.1, d).unwrap());
    let g = coupling_rate(&fix.cfg, &fix.pulse, fix.modes).unwrap().abs();
    // 5% of g on each side of the already offset fixture drive
    let shifted = DrivePulse { frequency: fix.pulse.frequency - 0.1 * g, ..fix.pulse };
    let inter = presets::cooling_schedule(SwapPlacement::Interleaved);
    let single = presets::cooling_schedule(SwapPlacement::SingleFinal);
    let run = |pulse: &DrivePulse, interleaved: bool| {
        let drive = PairDrive { pulse, ..fix.drive() };
        let r = if interleaved {
            interleaved_cooling((&z, &x), &inter, drive)
        } else {
            single_swap_cooling((&z, &x), &single, drive)
        };
        r.unwrap().final_n_bar()[1]
    };
    let di = run(&shifted, true) - run(&fix.pulse, true);
    let ds = run(&shifted, false) - run(&fix.pulse, false);
    assert!(ds > di && ds > 0.0, "single {ds} interleaved {di}");
}

#[test]
fn no_heating_gives_flat_line() {
    let mut fix = presets::heating_fixture();
    fix.noise = NoiseModel { heating_rate: [0.0; 3], cooling_target: 0.1 };
    let exp = presets::heating_experiment(Readout::DoubleSwap);
    let pts = heating_readouts(&exp, fix.drive()).unwrap();
    let (fit, _) = fit_heating_rate(&pts, exp.shots, 5).unwrap();
    assert!(fit.slope.abs() < 3.0 * fit.slope_err, "{} +- {}", fit.slope, fit.slope_err);
}

#[test]
fn exact_readout_recovers_rate() {
    let fix = presets::heating_fixture();
    let exp = modeswap::protocols::HeatingExperiment { shots: None, ..presets::heating_experiment(Readout::DoubleSwap) };
    let pts = heating_readouts(&exp, fix.drive()).unwrap();
    let (fit, _) = fit_heating_rate(&pts, None, 0).unwrap();
    assert!((fit.slope - 810.0).abs() < 1e-3 * 810.0, "{}", fit.slope);
}

#[test]
fn squeezing_witness_decreases() {
    let cfg = presets::coupling_only_trap();
    let modes = (Axis::X, Axis::Z);
    let unit = DrivePulse {
        amplitude: 1.0,
        frequency: cfg.omega(Axis::X) + cfg.omega(Axis::Z),
        phase: 0.0,
        envelope: EnvelopeKind::Rectangular,
        duration: 1.0,
    };
    let g = hz(2e3);
    let pulse = DrivePulse { amplitude: g / coupling_rate(&cfg, &unit, modes).unwrap(), ..unit };
    let times: Vec<f64> = (0..=6).map(|k| 0.2 * k as f64 / g).collect();
    let r = squeeze_experiment(&cfg, &pulse, modes, &times, ModeDim::new(60).unwrap(), &Tolerance::default()).unwrap();
    let w: Vec<f64> = r.steps.iter().map(|s| s.estimate.unwrap().0).collect();
    assert!((w[0] - 0.5).abs() < 1e-12);
    assert!(w.windows(2).all(|p| p[1] < p[0]), "{w:?}");
    assert!((r.steps[5].n_bar[0] - 1f64.sinh().powi(2)).abs() < 0.01 * 1f64.sinh().powi(2));
}

#[test]
fn squeezing_needs_sum_frequency() {
    let cfg = presets::coupling_only_trap();
    let p = DrivePulse { amplitude: 0.1, frequency: hz(1.6e6), phase: 0.0, envelope: EnvelopeKind::Rectangular, duration: 1.0 };
    let err = squeeze_experiment(&cfg, &p, (Axis::X, Axis::Z), &[0.0], ModeDim::new(4).unwrap(), &Tolerance::default());
    assert!(err.is_err());
}

#[test]
fn full_frame_overlaps_rwa_for_weak_coupling() {
    let cfg = presets::coupling_only_trap();
    let modes = (Axis::Z, Axis::X);
    let g = 1e-3 * cfg.omega(Axis::Z);
    let pulse = presets::swap_pulse(&cfg, modes, EnvelopeKind::Rectangular, swap_time(g).unwrap(), 0.0).unwrap();
    let s = TwoModeState::fock(0, 1, TwoModeDims::new(4, 4).unwrap()).unwrap();
    let tol = Tolerance::default();
    let mut amps = Vec::new();
    for frame in [Frame::RwaDifference, Frame::FullLabInteraction(FullFrameOptions::default())] {
        let h = build_hamiltonian(&cfg, &pulse, modes, frame).unwrap();
        let r = evolve_unitary(&s, &h, (0.0, pulse.duration), &tol).unwrap().ok().unwrap();
        amps.push(r.final_state.amplitudes().unwrap().clone());
    }
    let overlap = amps[0].dotc(&amps[1]).norm_sqr();
    assert!(overlap >= 0.99, "{overlap}");
}

mod cycles {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(6))]

        /// Without heating, more interleaved cycles never leave the secondary
        /// warmer, for full and partial exchanges alike.
        #[test]
        fn interleaved_cooling_is_monotone_in_cycles(
            n_secondary in 0.5f64..4.0,
            target in 0.0f64..0.4,
            fraction in 0.3f64..1.0,
        ) {
            let cfg = presets::coupling_only_trap();
            let modes = (Axis::Z, Axis::X);
            let full = presets::swap_pulse(&cfg, modes, EnvelopeKind::Rectangular, 90e-6, 0.0).unwrap();
            let pulse = DrivePulse { duration: fraction * full.duration, ..full };
            let noise = NoiseModel::noiseless();
            let tol = Tolerance::default();
            let drive = PairDrive { cfg: &cfg, pulse: &pulse, modes, noise: &noise, model: SwapModel::Rwa, tol: &tol };
            let d = ModeDim::new(thermal_cutoff(n_secondary, 1e-9)).unwrap();
            let (z, x) = (make_thermal(0.2, d).unwrap(), make_thermal(n_secondary, d).unwrap());
            let mut last = f64::INFINITY;
            for cycles in 1..=4 {
                let sched = modeswap::CoolingSchedule { cycles, target, placement: SwapPlacement::Interleaved, cool_duration: 1e-3 };
                let n = interleaved_cooling((&z, &x), &sched, drive).unwrap().final_n_bar()[1];
                prop_assert!(n <= last + 1e-9, "cycles {}: {} after {}", cycles, n, last);
                prop_assert!(n >= target - 1e-6, "{} below target {}", n, target);
                last = n;
            }
        }
    }
}
