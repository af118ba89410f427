//! Ready-made parameter sets for a single ⁴⁰Ca⁺ ion in a surface trap.
//!
//! Electrode geometry is not modelled, so the expansion lengths below are
//! chosen to reproduce measured derived quantities (coupling rates, the
//! driven-motion-to-coupling ratio) rather than computed from a layout.

use crate::dynamics::{NoiseModel, Tolerance};
use crate::error::Result;
use crate::protocols::{CoolingSchedule, HeatingExperiment, PairDrive, Readout, SwapModel, SwapPlacement};
use crate::trap::{coupling_rate, rate_for_swap_time, Axis, Curvature, DrivePulse, EnvelopeKind, TrapConfig};
use crate::units::{hz, ATOMIC_MASS_UNIT, ELEMENTARY_CHARGE};

/// 729 nm probe laser.
pub const LASER_WAVELENGTH: f64 = 729e-9;
/// Second-order length for the x–z and x–y cross terms.
pub const CROSS_CURVATURE: f64 = 500e-6;
/// First-order length along x giving a driven amplitude of 497 nm per
/// 2π·1 kHz of x–z coupling at a 2π·1.7 MHz drive.
pub const LINEAR_X: f64 = 585.5e-6;
/// Bessel characterisation drive frequency.
pub const BESSEL_DRIVE_HZ: f64 = 1.7e6;

/// Laser direction cosines: 45° in the x–z plane, 9° out of it toward y.
pub fn laser_projection() -> [f64; 3] {
    let (tilt, azimuth) = (9f64.to_radians(), 45f64.to_radians());
    [tilt.cos() * azimuth.cos(), tilt.sin(), tilt.cos() * azimuth.sin()]
}

/// Secular frequencies 2π·(2.6, 2.9, 1.0) MHz, x–z and x–y cross terms,
/// a linear field along x.
pub fn calcium_trap() -> TrapConfig {
    let mut cfg = TrapConfig {
        mass: 40.0 * ATOMIC_MASS_UNIT,
        charge: ELEMENTARY_CHARGE,
        omega: [hz(2.6e6), hz(2.9e6), hz(1.0e6)],
        curvature: [[None; 3]; 3],
        linear: [Some(LINEAR_X), None, None],
        laser_projection: laser_projection(),
        laser_wavenumber: std::f64::consts::TAU / LASER_WAVELENGTH,
        resonance_guard: hz(20e3),
    };
    cfg.set_curvature(Axis::X, Axis::Z, Some(Curvature::positive(CROSS_CURVATURE)));
    cfg.set_curvature(Axis::X, Axis::Y, Some(Curvature::positive(CROSS_CURVATURE)));
    cfg
}

/// Same trap with a weak linear field along x (D_1,x = 100 mm): the
/// off-resonant driven motion of a 5 kHz coupling pulse peaks near two
/// quanta.
pub fn residual_trap() -> TrapConfig {
    TrapConfig { linear: [Some(0.1), None, None], ..calcium_trap() }
}

/// Rectangle-equivalent SWAP time of the residual-excitation pulse. Off
/// the 1 µs period of the x detuning, so the rectangular pulse does not end
/// on a node of the driven motion.
pub const RESIDUAL_SWAP_TIME: f64 = 50.5e-6;

/// Blackman durations for the adiabaticity sweep: half-integer multiples
/// of the 1 µs detuning period, where the two switching edges add.
pub const ADIABATIC_SWEEP: [f64; 4] = [2.5e-6, 5.5e-6, 10.5e-6, 20.5e-6];

/// Trap with no linear field, for pure coupling dynamics.
pub fn coupling_only_trap() -> TrapConfig {
    TrapConfig { linear: [None; 3], ..calcium_trap() }
}

/// Step bound used by the protocol fixtures. Results differ from the default
/// tolerance by about 1e-8 in n̄.
pub fn protocol_tolerance() -> Tolerance {
    Tolerance { step_norm: 0.4, ..Tolerance::default() }
}

/// A mode pair with its drive, noise and tolerance.
#[derive(Debug, Clone)]
pub struct PairFixture {
    pub cfg: TrapConfig,
    pub pulse: DrivePulse,
    pub modes: (Axis, Axis),
    pub noise: NoiseModel,
    pub tol: Tolerance,
}

impl PairFixture {
    pub fn drive(&self) -> PairDrive<'_> {
        PairDrive {
            cfg: &self.cfg,
            pulse: &self.pulse,
            modes: self.modes,
            noise: &self.noise,
            model: SwapModel::Rwa,
            tol: &self.tol,
        }
    }
}

/// Difference-frequency pulse on `modes` scaled to give a full SWAP in
/// `swap_time` (rectangle-equivalent), detuned by `drift·g`.
pub fn swap_pulse(cfg: &TrapConfig, modes: (Axis, Axis), envelope: EnvelopeKind, swap_time: f64, drift: f64) -> Result<DrivePulse> {
    let g = rate_for_swap_time(swap_time)?;
    let diff = (cfg.omega(modes.0) - cfg.omega(modes.1)).abs();
    let unit = DrivePulse::with_rect_equivalent(1.0, diff, envelope, swap_time);
    let per_volt = coupling_rate(cfg, &unit, modes)?;
    let mut pulse = DrivePulse { amplitude: g / per_volt, ..unit };
    pulse.frequency -= drift * g;
    Ok(pulse)
}

/// Occupations before cooling: (z, x).
pub const COOLING_INITIAL: (f64, f64) = (0.2, 6.0);
/// Fock cutoff for the cooling fixture.
pub const COOLING_CUTOFF: usize = 75;

/// z (primary, directly cooled) and x (secondary) with a 90 µs Blackman
/// SWAP whose drive sits 0.5 g below the difference frequency, x heating
/// at 150 quanta/s and z at 30 quanta/s.
pub fn cooling_fixture() -> PairFixture {
    let cfg = coupling_only_trap();
    let modes = (Axis::Z, Axis::X);
    let pulse = swap_pulse(&cfg, modes, EnvelopeKind::Blackman, 90e-6, 0.5).expect("fixture pulse");
    PairFixture {
        cfg,
        pulse,
        modes,
        noise: NoiseModel { heating_rate: [150.0, 0.0, 30.0], cooling_target: 0.1 },
        tol: protocol_tolerance(),
    }
}

/// Eight SWAP/cool cycles with 1 ms of cooling to n̄ = 0.1.
pub fn cooling_schedule(placement: SwapPlacement) -> CoolingSchedule {
    let cycles = match placement {
        SwapPlacement::Interleaved => 8,
        SwapPlacement::SingleFinal => 1,
    };
    CoolingSchedule { cycles, target: 0.1, placement, cool_duration: 1e-3 }
}

/// x (primary, read out) and y (secondary, 810 quanta/s) with a 50 µs
/// rectangular SWAP.
pub fn heating_fixture() -> PairFixture {
    let cfg = coupling_only_trap();
    let modes = (Axis::X, Axis::Y);
    let pulse = swap_pulse(&cfg, modes, EnvelopeKind::Rectangular, 50e-6, 0.0).expect("fixture pulse");
    PairFixture {
        cfg,
        pulse,
        modes,
        noise: NoiseModel { heating_rate: [100.0, 810.0, 0.0], cooling_target: 0.1 },
        tol: Tolerance::default(),
    }
}

/// Eleven waits over 0–2 ms, 500 shots each, 2π·100 kHz carrier Rabi
/// frequency and pulses capped at 100 µs.
pub fn heating_experiment(readout: Readout) -> HeatingExperiment {
    HeatingExperiment {
        waits: (0..=10).map(|k| k as f64 * 0.2e-3).collect(),
        readout,
        shots: Some(500),
        rabi_frequency: hz(100e3),
        max_pulse_time: 100e-6,
        initial: (6.0, 6.0),
        cool_duration: 1e-3,
    }
}
