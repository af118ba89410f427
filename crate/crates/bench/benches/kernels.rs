use criterion::{black_box, criterion_group, criterion_main, Criterion};

use modeswap::dynamics::{heat_mode, squeeze_evolution, Tolerance};
use modeswap::fock::{make_thermal, tensor, ModeDim};
use modeswap::presets;
use modeswap::protocols::{swap, SwapModel};
use modeswap::spectroscopy::{avoided_crossing_scan, CrossingScan};
use modeswap::trap::{rate_for_swap_time, Axis, EnvelopeKind};
use modeswap::LaserProbe;

fn swap_pulses(c: &mut Criterion) {
    let cfg = presets::coupling_only_trap();
    let modes = (Axis::Z, Axis::X);
    let d = ModeDim::new(30).unwrap();
    let state = tensor(&make_thermal(0.2, d).unwrap(), &make_thermal(2.0, d).unwrap(), Default::default()).unwrap();
    let tol = Tolerance::default();
    let mut group = c.benchmark_group("swap");
    group.sample_size(10);
    for (name, env, drift) in [
        ("rectangular_resonant", EnvelopeKind::Rectangular, 0.0),
        ("blackman_resonant", EnvelopeKind::Blackman, 0.0),
        ("rectangular_detuned", EnvelopeKind::Rectangular, 0.5),
    ] {
        let pulse = presets::swap_pulse(&cfg, modes, env, 90e-6, drift).unwrap();
        group.bench_function(name, |b| b.iter(|| swap(black_box(&state), &cfg, &pulse, modes, SwapModel::Rwa, &tol).unwrap()));
    }
    group.finish();
}

fn heating(c: &mut Criterion) {
    let d = ModeDim::new(75).unwrap();
    let s = make_thermal(0.2, d).unwrap();
    let tol = Tolerance::default();
    c.bench_function("heat_mode_1ms", |b| b.iter(|| heat_mode(black_box(&s), 150.0, 1e-3, &tol).unwrap()));
}

fn squeezing(c: &mut Criterion) {
    let g = rate_for_swap_time(90e-6).unwrap();
    let tol = Tolerance::default();
    let d = ModeDim::new(40).unwrap();
    c.bench_function("squeeze_gt1", |b| b.iter(|| squeeze_evolution(g, black_box(1.0 / g), d, &tol).unwrap()));
}

fn crossing(c: &mut Criterion) {
    let cfg = presets::coupling_only_trap();
    let modes = (Axis::X, Axis::Z);
    let g = rate_for_swap_time(50e-6).unwrap();
    let pulse = presets::swap_pulse(&cfg, modes, EnvelopeKind::Rectangular, 50e-6, 0.0).unwrap();
    let probe = LaserProbe::for_mode(&cfg, Axis::X, g / (5.0 * cfg.lamb_dicke(Axis::X)), 0.0);
    let scan = CrossingScan {
        drive_detunings: (0..=8).map(|k| g * (-2.0 + 0.5 * k as f64)).collect(),
        laser_detunings: (0..=200).map(|k| g * (-4.0 + 0.04 * k as f64)).collect(),
        shots: Some(200),
        seed: 1,
        min_relative_peak: 0.05,
    };
    let mut group = c.benchmark_group("crossing");
    group.sample_size(10);
    group.bench_function("scan_9x201", |b| b.iter(|| avoided_crossing_scan(&cfg, &pulse, modes, &probe, black_box(&scan)).unwrap()));
    group.finish();
}

criterion_group!(benches, swap_pulses, heating, squeezing, crossing);
criterion_main!(benches);
