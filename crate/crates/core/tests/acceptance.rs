//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any fails.

use std::f64::consts::PI;
use std::time::Instant;

use modeswap::dynamics::{evolve_lindblad, evolve_schrodinger, evolve_unitary, residual_excitation, Channel, Envelope};
use modeswap::fock::{make_thermal, tensor, thermal_cutoff, MemoryBudget, ModeDim, ModeSlot, TwoModeDims, TwoModeState};
use modeswap::presets;
use modeswap::protocols::{
    fit_heating_rate, heating_readouts, interleaved_cooling, single_swap_cooling, squeeze_experiment, swap, Readout,
    SwapModel, SwapPlacement,
};
use modeswap::spectroscopy::{
    avoided_crossing_scan, bessel_characterization_scan, estimate_nbar, sideband_excitation, BesselScan, CrossingScan,
    LaserProbe, Sideband,
};
use modeswap::trap::{
    build_hamiltonian, coupling_rate, swap_time, Axis, Coefficient, DrivePulse, EnvelopeKind, Frame, FullFrameOptions,
    HamiltonianSpec, Monomial, Term,
};
use modeswap::units::hz;
use modeswap::dynamics::Tolerance;
use num_complex::Complex64 as C64;

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, msg: String) -> Check {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn criterion_1() -> Check {
    let cfg = presets::coupling_only_trap();
    let modes = (Axis::Z, Axis::X);
    let d = ModeDim::new(presets::COOLING_CUTOFF).unwrap();
    let state = tensor(&make_thermal(0.2, d).unwrap(), &make_thermal(6.0, d).unwrap(), MemoryBudget::default()).unwrap();
    let pulse = presets::swap_pulse(&cfg, modes, EnvelopeKind::Rectangular, 90e-6, 0.0).unwrap();
    let start = Instant::now();
    let out = swap(&state, &cfg, &pulse, modes, SwapModel::Rwa, &Tolerance::default()).map_err(|e| e.to_string())?;
    let rwa_time = start.elapsed().as_secs_f64();
    let (nz, nx) = (out.state.mean_n(ModeSlot::I), out.state.mean_n(ModeSlot::J));
    let transfer = rel(nz, 6.0).max(rel(nx, 0.2));

    // full frame needs g/ω < 1e-3: g = 2π·0.9 kHz against ω_z = 2π·1 MHz
    let g = hz(0.9e3);
    let slow = presets::swap_pulse(&cfg, modes, EnvelopeKind::Rectangular, swap_time(g).unwrap(), 0.0).unwrap();
    let dfull = ModeDim::new(80).unwrap();
    let coarse = tensor(&make_thermal(0.2, dfull).unwrap(), &make_thermal(6.0, dfull).unwrap(), MemoryBudget::default()).unwrap();
    let tol = Tolerance { ensemble_discard: 6e-2, ..Tolerance::default() };
    let mut finals = Vec::new();
    let start = Instant::now();
    for frame in [Frame::RwaDifference, Frame::FullLabInteraction(FullFrameOptions::default())] {
        let h = build_hamiltonian(&cfg, &slow, modes, frame).map_err(|e| e.to_string())?;
        let r = evolve_unitary(&coarse, &h, (0.0, slow.duration), &tol).and_then(|r| r.ok()).map_err(|e| e.to_string())?;
        finals.push(*r.mean_n.last().unwrap());
    }
    let full_time = start.elapsed().as_secs_f64();
    let agree = rel(finals[1][0], finals[0][0]).max(rel(finals[1][1], finals[0][1]));
    ensure(
        transfer < 0.02 && agree < 0.02 && rwa_time < 10.0,
        format!(
            "swap 90us: n=({nz:.4}, {nx:.4}) transfer error {:.2}% in {rwa_time:.2}s; full vs RWA at g/w={:.1e}: {:.2e} in {full_time:.1}s",
            100.0 * transfer,
            g / cfg.omega(Axis::Z),
            agree
        ),
    )
}

fn criterion_2() -> Check {
    let cfg = presets::coupling_only_trap();
    let modes = (Axis::X, Axis::Z);
    let mut worst_min: f64 = 0.0;
    let mut worst_point: f64 = 0.0;
    let mut flagged = 0;
    for khz in [2.0, 5.0, 10.0] {
        let g = hz(khz * 1e3);
        let pulse = presets::swap_pulse(&cfg, modes, EnvelopeKind::Rectangular, swap_time(g).unwrap(), 0.0).unwrap();
        let eta = cfg.lamb_dicke(Axis::X);
        let probe = LaserProbe::for_mode(&cfg, Axis::X, g / (5.0 * eta), 0.0);
        let scan = CrossingScan {
            drive_detunings: (0..=24).map(|k| g * (-3.0 + 0.25 * k as f64)).collect(),
            laser_detunings: (0..=400).map(|k| g * (-4.0 + 0.02 * k as f64)).collect(),
            shots: Some(200),
            seed: 7,
            min_relative_peak: 0.05,
        };
        let r = avoided_crossing_scan(&cfg, &pulse, modes, &probe, &scan).map_err(|e| e.to_string())?;
        let (min, _) = r.fitted("min_separation").ok_or("no resolved doublet")?;
        worst_min = worst_min.max(rel(min, 2.0 * g));
        for p in &r.points {
            if p.flag.is_some() {
                flagged += 1;
                continue;
            }
            worst_point = worst_point.max(rel(p.values[0], p.values[1]));
        }
    }
    ensure(
        worst_min < 0.05 && worst_point < 0.05 && flagged == 0,
        format!(
            "crossing g=2,5,10 kHz: min separation vs 2g worst {:.2}%, pointwise vs diagonalisation worst {:.2}%, {flagged} flagged",
            100.0 * worst_min,
            100.0 * worst_point
        ),
    )
}

/// `J_n(x) = (1/π) ∫₀^π cos(nθ − x sin θ) dθ`, composite Simpson.
fn bessel_oracle(n: u32, x: f64) -> f64 {
    let m = 2000;
    let h = PI / m as f64;
    let f = |t: f64| (n as f64 * t - x * t.sin()).cos();
    let mut s = f(0.0) + f(PI);
    for k in 1..m {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
    }
    s * h / 3.0 / PI
}

fn criterion_3() -> Check {
    let cfg = presets::calcium_trap();
    let pulse = DrivePulse {
        amplitude: 0.0,
        frequency: hz(presets::BESSEL_DRIVE_HZ),
        phase: 0.0,
        envelope: EnvelopeKind::Rectangular,
        duration: 1e-3,
    };
    let amplitudes: Vec<f64> = (0..=60).map(|k| 0.5e-3 * k as f64).collect();
    let exact = BesselScan { amplitudes: amplitudes.clone(), relative_noise: 0.0, seed: 3, coupling_modes: (Axis::X, Axis::Z) };
    let r = bessel_characterization_scan(&cfg, &pulse, &exact).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let mut ka_max: f64 = 0.0;
    for p in &r.points {
        let ka = p.values[0];
        ka_max = ka_max.max(ka);
        worst = worst.max((p.values[1] - bessel_oracle(0, ka).abs()).abs());
        worst = worst.max((p.values[2] - bessel_oracle(1, ka).abs()).abs());
    }
    let noisy = BesselScan { relative_noise: 0.02, ..exact };
    let r = bessel_characterization_scan(&cfg, &pulse, &noisy).map_err(|e| e.to_string())?;
    let (a_per_g, _) = r.fitted("a_per_g").ok_or("no fit")?;
    let nm_per_khz = a_per_g * hz(1e3) * 1e9;
    ensure(
        worst < 1e-3 && ka_max >= 4.5 && rel(nm_per_khz, 497.0) < 0.02,
        format!("bessel kA<= {ka_max:.2}: worst ratio error {worst:.1e}; A/g = {nm_per_khz:.1} nm per 2pi kHz"),
    )
}

fn criterion_4() -> Check {
    let cfg = presets::residual_trap();
    let tol = Tolerance::default();
    let d = ModeDim::new(30).unwrap();
    let modes = (Axis::X, Axis::Z);
    let rect = presets::swap_pulse(&cfg, modes, EnvelopeKind::Rectangular, presets::RESIDUAL_SWAP_TIME, 0.0).unwrap();
    let black = presets::swap_pulse(&cfg, modes, EnvelopeKind::Blackman, presets::RESIDUAL_SWAP_TIME, 0.0).unwrap();
    let g = coupling_rate(&cfg, &rect, modes).unwrap();
    let nr = residual_excitation(&cfg, &rect, Axis::X, d, &tol).map_err(|e| e.to_string())?;
    let nb = residual_excitation(&cfg, &black, Axis::X, d, &tol).map_err(|e| e.to_string())?;
    let sweep: Vec<f64> = presets::ADIABATIC_SWEEP
        .iter()
        .map(|&t| residual_excitation(&cfg, &DrivePulse { duration: t, ..black }, Axis::X, d, &tol))
        .collect::<modeswap::Result<_>>()
        .map_err(|e| e.to_string())?;
    let monotone = sweep.windows(2).all(|w| w[1] < w[0]);
    ensure(
        nb < 0.3 && nb < nr && monotone,
        format!(
            "residual at g=2pi*{:.2} kHz: blackman {nb:.2e}, rectangular {nr:.3}; sweep x8 {:?}",
            g / hz(1e3),
            sweep.iter().map(|v| format!("{v:.1e}")).collect::<Vec<_>>()
        ),
    )
}

fn criterion_5() -> Check {
    let fix = presets::cooling_fixture();
    let d = ModeDim::new(presets::COOLING_CUTOFF).unwrap();
    let (z, x) = (make_thermal(presets::COOLING_INITIAL.0, d).unwrap(), make_thermal(presets::COOLING_INITIAL.1, d).unwrap());
    let inter = presets::cooling_schedule(SwapPlacement::Interleaved);
    let a = interleaved_cooling((&z, &x), &inter, fix.drive()).map_err(|e| e.to_string())?.final_n_bar();
    let single = presets::cooling_schedule(SwapPlacement::SingleFinal);
    let s = single_swap_cooling((&z, &x), &single, fix.drive()).map_err(|e| e.to_string())?.final_n_bar();
    let long = DrivePulse { duration: fix.pulse.duration * 1.1, ..fix.pulse };
    let b = interleaved_cooling((&z, &x), &inter, modeswap::protocols::PairDrive { pulse: &long, ..fix.drive() })
        .map_err(|e| e.to_string())?
        .final_n_bar();
    let sens = rel(b[0], a[0]).max(rel(b[1], a[1]));
    let near = (a[0] - 0.13).abs() < 0.05 && (a[1] - 0.31).abs() < 0.05;
    ensure(
        a[0] < 0.5 && a[1] < 0.5 && near && s[1] < 1.0 && s[0] > 3.0 && sens < 0.25,
        format!(
            "cooling (z, x): interleaved ({:.3}, {:.3}), single swap ({:.2}, {:.3}), +10% duration changes n by {:.1}%",
            a[0],
            a[1],
            s[0],
            s[1],
            100.0 * sens
        ),
    )
}

fn criterion_6() -> Check {
    let fix = presets::heating_fixture();
    let truth = fix.noise.rate(Axis::Y);
    let double = presets::heating_experiment(Readout::DoubleSwap);
    let pts = heating_readouts(&double, fix.drive()).map_err(|e| e.to_string())?;
    let fits: Vec<_> = (0..50)
        .map(|seed| fit_heating_rate(&pts, double.shots, seed).map(|f| f.0))
        .collect::<modeswap::Result<_>>()
        .map_err(|e| e.to_string())?;
    let single = &fits[0];
    let mean = fits.iter().map(|f| f.slope).sum::<f64>() / fits.len() as f64;
    let direct = presets::heating_experiment(Readout::Direct);
    let dpts = heating_readouts(&direct, fix.drive()).map_err(|e| e.to_string())?;
    let dfit = fit_heating_rate(&dpts, direct.shots, 0).map_err(|e| e.to_string())?.0;
    ensure(
        rel(single.slope, truth) < 0.10 && rel(mean, truth) < 0.03 && dfit.slope_err > single.slope_err,
        format!(
            "heating rate {truth}: double swap {:.0} +- {:.0}, 50-seed mean {mean:.1}; direct {:.0} +- {:.0}",
            single.slope, single.slope_err, dfit.slope, dfit.slope_err
        ),
    )
}

fn criterion_7() -> Check {
    let cfg = presets::coupling_only_trap();
    let modes = (Axis::X, Axis::Z);
    let g = hz(5e3);
    let unit = DrivePulse {
        amplitude: 1.0,
        frequency: cfg.omega(Axis::X) + cfg.omega(Axis::Z),
        phase: 0.0,
        envelope: EnvelopeKind::Rectangular,
        duration: 1.0,
    };
    let pulse = DrivePulse { amplitude: g / coupling_rate(&cfg, &unit, modes).unwrap(), ..unit };
    let gts: Vec<f64> = (0..=8).map(|k| 0.25 * k as f64).collect();
    let times: Vec<f64> = gts.iter().map(|gt| gt / g).collect();
    let cutoff = ModeDim::new(modeswap::dynamics::squeeze_cutoff(2.0, 1e-10)).unwrap();
    let r = squeeze_experiment(&cfg, &pulse, modes, &times, cutoff, &Tolerance::default()).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let mut max_witness: f64 = 0.0;
    for (step, gt) in r.steps.iter().zip(&gts) {
        let want = gt.sinh().powi(2);
        worst = worst.max((step.n_bar[0] - want).abs() / want.max(1e-3));
        if *gt > 0.0 {
            max_witness = max_witness.max(step.estimate.unwrap().0);
        }
    }
    ensure(
        worst < 0.01 && max_witness < 0.5,
        format!("squeezing gt<=2: n vs sinh^2 worst {:.1e}, largest witness for gt>0 {max_witness:.4}", worst),
    )
}

fn criterion_8() -> Check {
    // closed evolution through the stepping integrator
    let cfg = presets::coupling_only_trap();
    let modes = (Axis::Z, Axis::X);
    let pulse = presets::swap_pulse(&cfg, modes, EnvelopeKind::Blackman, 90e-6, 0.3).unwrap();
    let d = ModeDim::new(20).unwrap();
    let s = tensor(&make_thermal(0.2, d).unwrap(), &make_thermal(1.0, d).unwrap(), MemoryBudget::default()).unwrap();
    let h = build_hamiltonian(&cfg, &pulse, modes, Frame::RwaDetuned(modeswap::protocols::pair_detuning(&cfg, &pulse, modes)))
        .map_err(|e| e.to_string())?;
    let closed = evolve_unitary(&s, &h, (0.0, pulse.duration), &Tolerance::default()).map_err(|e| e.to_string())?;

    let dims = TwoModeDims::new(8, 8).unwrap();
    let mut channels = Vec::new();
    channels.extend(Channel::heating(ModeSlot::I, dims, 300.0).unwrap());
    channels.extend(Channel::heating(ModeSlot::J, dims, 800.0).unwrap());
    let start = TwoModeState::fock(1, 0, dims).unwrap();
    let short = DrivePulse { duration: 200e-6, ..pulse };
    let hl = build_hamiltonian(&cfg, &short, modes, Frame::RwaDifference).map_err(|e| e.to_string())?;
    let open = evolve_lindblad(&start, &hl, &channels, (0.0, short.duration), &Tolerance::default()).map_err(|e| e.to_string())?;

    let hc = HamiltonianSpec {
        terms: vec![
            Term {
                op: Monomial::new(1, 0, 0, 1),
                coeff: Coefficient { amplitude: 1.0, envelope: None, phasors: vec![(C64::new(1.0, 0.0), 0.7)] },
            },
            Term {
                op: Monomial::new(1, 0, 1, 0),
                coeff: Coefficient {
                    amplitude: 0.3,
                    envelope: Some(Envelope::new(EnvelopeKind::Blackman, 3.0).unwrap()),
                    phasors: vec![(C64::new(0.0, 1.0), 2.1)],
                },
            },
        ],
    };
    let psi = TwoModeState::fock(2, 1, TwoModeDims::new(12, 12).unwrap()).unwrap();
    let run = |n: usize| {
        let tol = Tolerance { fixed_steps: Some(n), ..Tolerance::default() };
        evolve_schrodinger(&psi, &hc, (0.0, 3.0), &tol).unwrap().final_state.amplitudes().unwrap().clone()
    };
    let reference = run(8192);
    let ratio = (run(16) - &reference).norm() / (run(32) - &reference).norm();

    let probe = LaserProbe::for_mode(&cfg, Axis::X, hz(100e3), 0.0);
    let mut therm: f64 = 0.0;
    for k in 0..=24 {
        let n = 0.05 * 400f64.powf(k as f64 / 24.0);
        let pops = make_thermal(n, ModeDim::new(thermal_cutoff(n, 1e-12)).unwrap()).unwrap().populations();
        let t = probe.sideband_pi_time().min(100e-6);
        let r = sideband_excitation(&pops, &probe, Sideband::Red, t).unwrap();
        let b = sideband_excitation(&pops, &probe, Sideband::Blue, t).unwrap();
        therm = therm.max(rel(estimate_nbar(r, b, None).map_err(|e| e.to_string())?.n_bar, n));
    }
    ensure(
        closed.max_norm_drift < 1e-7 && open.max_norm_drift < 1e-7 && ratio >= 8.0 && therm < 0.02,
        format!(
            "numerics: norm drift {:.1e}, trace drift {:.1e}, step-halving ratio {ratio:.1}, thermometry worst {:.2e} over n in [0.05, 20]",
            closed.max_norm_drift, open.max_norm_drift, therm
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("1 swap", criterion_1),
        ("2 avoided crossing", criterion_2),
        ("3 bessel suppression", criterion_3),
        ("4 adiabatic shaping", criterion_4),
        ("5 cooling", criterion_5),
        ("6 heating rate", criterion_6),
        ("7 squeezing", criterion_7),
        ("8 numerics", criterion_8),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {name}: PASS ({secs:.1}s) {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {name}: FAIL ({secs:.1}s) {msg}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
