//! Optical readout of the motional state: sideband Rabi dynamics,
//! sideband-ratio thermometry, Bessel suppression from driven motion, and
//! the two spectroscopic scans.

use nalgebra::{Complex, DMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fit::{fit_lorentzians, fit_scale, lorentzian, Peak};
use crate::fock::{TwoModeDims, C64};
use crate::special::bessel_j;
use crate::trap::{build_hamiltonian, coupling_rate, projected_driven_amplitude, Axis, DrivePulse, Frame, TrapConfig};

/// Upper end of the Lamb–Dicke regime assumed by the sideband model.
pub const LAMB_DICKE_LIMIT: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaserProbe {
    /// Bare carrier Rabi frequency Ω_c.
    pub rabi_frequency: f64,
    /// η of the probed mode.
    pub lamb_dicke: f64,
    /// Laser detuning from the addressed transition.
    pub detuning: f64,
    pub pulse_time: f64,
    /// Contrast decay time; the oscillating part of the excitation is damped
    /// by `exp(−t/τ)`. `None` is fully coherent.
    pub coherence_time: Option<f64>,
}

impl LaserProbe {
    /// Probe on `axis` with the trap's Lamb–Dicke parameter.
    pub fn for_mode(cfg: &TrapConfig, axis: Axis, rabi_frequency: f64, pulse_time: f64) -> Self {
        LaserProbe { rabi_frequency, lamb_dicke: cfg.lamb_dicke(axis), detuning: 0.0, pulse_time, coherence_time: None }
    }

    /// Sideband π-time for a single phonon.
    pub fn sideband_pi_time(&self) -> f64 {
        std::f64::consts::PI / (self.rabi_frequency * self.lamb_dicke)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lamb_dicke >= 0.0 && self.lamb_dicke < LAMB_DICKE_LIMIT) {
            return Err(Error::invalid(
                "probe.lamb_dicke",
                format!("{} outside the Lamb–Dicke regime [0, {LAMB_DICKE_LIMIT})", self.lamb_dicke),
            ));
        }
        if !(self.rabi_frequency > 0.0 && self.rabi_frequency.is_finite()) {
            return Err(Error::invalid("probe.rabi_frequency", "must be positive"));
        }
        if !(self.pulse_time >= 0.0 && self.pulse_time.is_finite()) {
            return Err(Error::invalid("probe.pulse_time", "must be non-negative"));
        }
        if !self.detuning.is_finite() {
            return Err(Error::invalid("probe.detuning", "must be finite"));
        }
        if let Some(tau) = self.coherence_time {
            if !(tau > 0.0) {
                return Err(Error::invalid("probe.coherence_time", "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sideband {
    Red,
    Blue,
    Carrier,
}

impl std::str::FromStr for Sideband {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "red" => Ok(Sideband::Red),
            "blue" => Ok(Sideband::Blue),
            "carrier" => Ok(Sideband::Carrier),
            other => Err(Error::invalid("sideband", format!("unknown sideband `{other}`"))),
        }
    }
}

/// Rabi frequency of `|S, n⟩` on the given transition.
pub fn rabi_frequency(probe: &LaserProbe, sideband: Sideband, n: usize) -> f64 {
    let (oc, eta) = (probe.rabi_frequency, probe.lamb_dicke);
    match sideband {
        Sideband::Red => oc * eta * (n as f64).sqrt(),
        Sideband::Blue => oc * eta * (n as f64 + 1.0).sqrt(),
        Sideband::Carrier => oc * (1.0 - eta * eta * (n as f64 + 0.5)),
    }
}

/// Excitation probability after a probe pulse of length `t` on a motional
/// state with Fock populations `p`:
/// `Σ_n p_n (Ω_n²/W_n²)·½(1 − e^{−t/τ} cos(W_n t))`, `W_n² = Ω_n² + δ²`.
pub fn sideband_excitation(p: &[f64], probe: &LaserProbe, sideband: Sideband, t: f64) -> Result<f64> {
    probe.validate()?;
    if !(t >= 0.0) {
        return Err(Error::invalid("t", "must be non-negative"));
    }
    let contrast = probe.coherence_time.map_or(1.0, |tau| (-t / tau).exp());
    let d2 = probe.detuning * probe.detuning;
    let mut total = 0.0;
    for (n, &pn) in p.iter().enumerate() {
        if pn == 0.0 {
            continue;
        }
        let w = rabi_frequency(probe, sideband, n);
        let w2 = w * w;
        if w2 == 0.0 {
            continue;
        }
        let big = (w2 + d2).sqrt();
        total += pn * (w2 / (w2 + d2)) * 0.5 * (1.0 - contrast * (big * t).cos());
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Thermometry result.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NbarEstimate {
    pub n_bar: f64,
    /// One-sigma uncertainty; zero at infinite shots.
    pub sigma: f64,
}

/// Binomial standard error of a probability estimated from `shots`, using
/// the add-one smoothed estimate so that P = 0 or 1 keeps a nonzero error.
pub fn binomial_sigma(p: f64, shots: Option<u32>) -> f64 {
    match shots {
        None => 0.0,
        Some(n) => {
            let n = n as f64;
            let q = (p * n + 1.0) / (n + 2.0);
            (q * (1.0 - q) / (n + 2.0)).sqrt()
        }
    }
}

/// Sideband-ratio thermometry `n̄ = R/(1 − R)`, `R = P_red/P_blue`, with
/// the uncertainty propagated from binomial errors at `shots` per
/// sideband.
pub fn estimate_nbar(p_red: f64, p_blue: f64, shots: Option<u32>) -> Result<NbarEstimate> {
    if !(0.0..=1.0).contains(&p_red) || !(0.0..=1.0).contains(&p_blue) {
        return Err(Error::invalid("sideband probabilities", format!("outside [0, 1]: {p_red}, {p_blue}")));
    }
    if p_red >= p_blue {
        return Err(Error::NonThermalRatio { red: p_red, blue: p_blue });
    }
    let r = p_red / p_blue;
    let n_bar = r / (1.0 - r);
    let (sr, sb) = (binomial_sigma(p_red, shots), binomial_sigma(p_blue, shots));
    let sigma_r = ((sr / p_blue).powi(2) + (p_red * sb / (p_blue * p_blue)).powi(2)).sqrt();
    Ok(NbarEstimate { n_bar, sigma: sigma_r / (1.0 - r).powi(2) })
}

/// Relative Rabi frequency `|J_n(kA)|` of the n-th driven-motion sideband.
pub fn carrier_suppression(ka: f64, n: u32) -> f64 {
    bessel_j(n, ka).abs()
}

/// Relative Rabi frequency of the n-th drive sideband seen by an ion whose
/// laser phase is modulated as `kA sin(ω_p t)`: the Fourier component of
/// `e^{i kA sin θ}` at `e^{i n θ}`, averaged over one drive period.
pub fn modulated_rabi_ratio(ka: f64, n: u32) -> f64 {
    const SAMPLES: usize = 256;
    let mut acc = C64::new(0.0, 0.0);
    for m in 0..SAMPLES {
        let th = std::f64::consts::TAU * m as f64 / SAMPLES as f64;
        acc += C64::from_polar(1.0, ka * th.sin() - n as f64 * th);
    }
    acc.norm() / SAMPLES as f64
}

/// Scan record: one row per grid point with named value columns.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanResult {
    /// Name of the independent variable.
    pub axis: String,
    /// Names of the value columns.
    pub columns: Vec<String>,
    pub points: Vec<ScanPoint>,
    /// Fitted scan-level quantities `(name, value, uncertainty)`.
    pub fitted: Vec<(String, f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanPoint {
    pub x: f64,
    pub values: Vec<f64>,
    /// One-sigma errors, aligned with `values`.
    pub errors: Vec<f64>,
    /// Per-point peak fits (crossing scan).
    pub peaks: Vec<Peak>,
    /// Set when the per-point analysis failed; the scan carries on.
    pub flag: Option<String>,
}

impl ScanResult {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.points.iter().map(|p| p.values[k]).collect())
    }

    pub fn fitted(&self, name: &str) -> Option<(f64, f64)> {
        self.fitted.iter().find(|f| f.0 == name).map(|f| (f.1, f.2))
    }
}

/// Per-point generator split from the master seed.
pub fn point_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

fn sample_probability(p: f64, shots: Option<u32>, rng: &mut ChaCha8Rng) -> f64 {
    match shots {
        None => p,
        Some(n) => Binomial::new(n as u64, p.clamp(0.0, 1.0)).map_or(p, |b| b.sample(rng) as f64 / n as f64),
    }
}

/// Settings of the avoided-crossing scan.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossingScan {
    /// Drive detunings `Δ = (ω_i − ω_j) − ω_p`.
    pub drive_detunings: Vec<f64>,
    /// Laser detunings from the bare sideband of the probed mode.
    pub laser_detunings: Vec<f64>,
    pub shots: Option<u32>,
    pub seed: u64,
    /// Second peaks weaker than this fraction of the first are ignored.
    pub min_relative_peak: f64,
}

/// Dressed single-phonon lines of the detuned Hamiltonian: energies and
/// overlaps with `a_i†|00⟩`, by diagonalisation on the two-level cutoffs.
pub fn dressed_lines(cfg: &TrapConfig, pulse: &DrivePulse, modes: (Axis, Axis), delta: f64) -> Result<Vec<(f64, f64)>> {
    let dims = TwoModeDims::new(2, 2)?;
    let h = build_hamiltonian(cfg, pulse, modes, Frame::RwaDetuned(delta))?.instantiate(dims)?;
    let m = h.matrix_at(0.0);
    let (b10, b01) = (dims.index(1, 0), dims.index(0, 1));
    let block = DMatrix::<Complex<f64>>::from_fn(2, 2, |r, c| {
        let idx = [b10, b01];
        m[(idx[r], idx[c])]
    });
    let e0 = m[(0, 0)].re;
    let eig = block.symmetric_eigen();
    let mut lines: Vec<(f64, f64)> = (0..2)
        .map(|k| (eig.eigenvalues[k] - e0, eig.eigenvectors[(0, k)].norm_sqr()))
        .collect();
    lines.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(lines)
}

/// Blue-sideband spectrum of the probed mode `modes.0` from the ground
/// state while the parametric drive dresses it with `modes.1`.
///
/// Each dressed line is the time-averaged Rabi response
/// `½ Ω_k²/(Ω_k² + (δ − E_k)²)` with `Ω_k = Ω_c η √w_k`, a Lorentzian of
/// FWHM `2Ω_k`. Per Δ, two Lorentzians are fitted and their separation
/// reported next to the diagonalised splitting.
pub fn avoided_crossing_scan(
    cfg: &TrapConfig,
    pulse: &DrivePulse,
    modes: (Axis, Axis),
    probe: &LaserProbe,
    scan: &CrossingScan,
) -> Result<ScanResult> {
    probe.validate()?;
    if scan.laser_detunings.len() < 8 {
        return Err(Error::invalid("laser_detunings", "need at least 8 points"));
    }
    let g = coupling_rate(cfg, pulse, modes)?.abs();
    let base = probe.rabi_frequency * probe.lamb_dicke;
    let points: Vec<ScanPoint> = scan
        .drive_detunings
        .par_iter()
        .enumerate()
        .map(|(k, &delta)| -> Result<ScanPoint> {
            let lines = dressed_lines(cfg, pulse, modes, delta)?;
            let mut rng = point_rng(scan.seed, k);
            let ys: Vec<f64> = scan
                .laser_detunings
                .iter()
                .map(|&d| {
                    let p: f64 = lines
                        .iter()
                        .filter(|l| l.1 > 0.0)
                        .map(|&(e, w)| lorentzian(d, e, 2.0 * base * w.sqrt(), 0.5))
                        .sum();
                    sample_probability(p.min(1.0), scan.shots, &mut rng)
                })
                .collect();
            let expected = crate::trap::detuned_splitting(g, delta);
            let mut point = ScanPoint {
                x: delta,
                values: vec![f64::NAN, expected],
                errors: vec![f64::NAN, 0.0],
                peaks: Vec::new(),
                flag: None,
            };
            match fit_lorentzians(&scan.laser_detunings, &ys, base, scan.min_relative_peak) {
                Ok(fit) => {
                    point.values[0] = fit.separation();
                    point.errors[0] = fit.peaks.iter().map(|p| p.fwhm).fold(0.0, f64::max)
                        / (ys.len() as f64).sqrt();
                    if !fit.converged {
                        point.flag = Some("fit did not converge".into());
                    } else if fit.peaks.len() < 2 {
                        point.flag = Some("single peak resolved".into());
                    }
                    point.peaks = fit.peaks;
                }
                Err(e) => point.flag = Some(e.to_string()),
            }
            Ok(point)
        })
        .collect::<Result<_>>()?;
    let min = points
        .iter()
        .filter(|p| p.flag.is_none())
        .map(|p| p.values[0])
        .fold(f64::INFINITY, f64::min);
    let min_err = points
        .iter()
        .filter(|p| p.flag.is_none() && p.values[0] == min)
        .map(|p| p.errors[0])
        .next()
        .unwrap_or(f64::NAN);
    let mut fitted = vec![("g".to_string(), g, 0.0)];
    if min.is_finite() {
        fitted.push(("min_separation".into(), min, min_err));
        fitted.push(("g_estimate".into(), 0.5 * min, 0.5 * min_err));
    }
    Ok(ScanResult {
        axis: "drive_detuning".into(),
        columns: vec!["separation".into(), "diagonalized_splitting".into()],
        points,
        fitted,
    })
}

/// Settings of the Bessel characterisation scan.
#[derive(Clone, Debug, PartialEq)]
pub struct BesselScan {
    /// Drive amplitudes V0 in volts.
    pub amplitudes: Vec<f64>,
    /// Relative Gaussian error on each measured Rabi ratio; zero is exact.
    pub relative_noise: f64,
    pub seed: u64,
    /// Mode pair whose coupling rate normalises the driven amplitude.
    pub coupling_modes: (Axis, Axis),
}

/// Carrier and first drive-sideband Rabi ratios versus drive amplitude at
/// the fixed off-resonant frequency `pulse.frequency`.
///
/// Fits `|J_0(sV)|`, `|J_1(sV)|` jointly for the modulation index per volt
/// `s`; reports `kA_per_volt`, the driven amplitude per volt and the ratio
/// of driven amplitude to coupling rate `a_per_g` (m per rad/s).
pub fn bessel_characterization_scan(cfg: &TrapConfig, pulse: &DrivePulse, scan: &BesselScan) -> Result<ScanResult> {
    cfg.validate()?;
    if scan.amplitudes.len() < 3 {
        return Err(Error::invalid("amplitudes", "need at least 3 points"));
    }
    if scan.amplitudes.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::invalid("amplitudes", "must be non-negative"));
    }
    let k = cfg.laser_wavenumber;
    let noise = Normal::new(0.0, scan.relative_noise.max(0.0)).map_err(|e| Error::invalid("relative_noise", e.to_string()))?;
    let points: Vec<ScanPoint> = scan
        .amplitudes
        .par_iter()
        .enumerate()
        .map(|(idx, &v)| -> Result<ScanPoint> {
            let p = DrivePulse { amplitude: v, ..*pulse };
            let ka = (k * projected_driven_amplitude(cfg, &p)?).abs();
            let mut rng = point_rng(scan.seed, idx);
            let mut measure = |n: u32| {
                let r = modulated_rabi_ratio(ka, n);
                if scan.relative_noise > 0.0 {
                    (r * (1.0 + noise.sample(&mut rng))).max(0.0)
                } else {
                    r
                }
            };
            let (c, s) = (measure(0), measure(1));
            let g = coupling_rate(cfg, &p, scan.coupling_modes)?.abs();
            Ok(ScanPoint {
                x: v,
                values: vec![ka, c, s, g],
                errors: vec![0.0, scan.relative_noise * c, scan.relative_noise * s, 0.0],
                peaks: Vec::new(),
                flag: None,
            })
        })
        .collect::<Result<_>>()?;

    let n = points.len();
    let vmax = scan.amplitudes.iter().cloned().fold(0.0, f64::max);
    if !(vmax > 0.0) {
        return Err(Error::FitFailed("all amplitudes are zero".into()));
    }
    // index-encoded joint data: first n carrier, next n sideband
    let xs: Vec<f64> = (0..2 * n).map(|i| i as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.values[1]).chain(points.iter().map(|p| p.values[2])).collect();
    let model = |s: f64, xi: f64| {
        let i = xi as usize;
        let v = scan.amplitudes[i % n];
        carrier_suppression(s * v, (i / n) as u32)
    };
    let s = fit_scale(model, &xs, &ys, 0.0, 12.0 / vmax)?;
    let cost = |s: f64| xs.iter().zip(&ys).map(|(&x, &y)| (model(s, x) - y).powi(2)).sum::<f64>();
    let h = 1e-4 * s.max(1e-12);
    let curv = (cost(s + h) - 2.0 * cost(s) + cost(s - h)) / (h * h);
    let dof = (2 * n).saturating_sub(1).max(1) as f64;
    let s_err = if curv > 0.0 { (2.0 * cost(s) / dof / curv).sqrt() } else { f64::NAN };

    let unit = DrivePulse { amplitude: 1.0, ..*pulse };
    let g_per_volt = coupling_rate(cfg, &unit, scan.coupling_modes)?.abs();
    let a_per_volt = s / k;
    let a_per_g = a_per_volt / g_per_volt;
    Ok(ScanResult {
        axis: "amplitude".into(),
        columns: vec!["ka".into(), "carrier_ratio".into(), "sideband_ratio".into(), "coupling_rate".into()],
        points,
        fitted: vec![
            ("ka_per_volt".into(), s, s_err),
            ("a_per_volt".into(), a_per_volt, s_err / k),
            ("a_per_g".into(), a_per_g, s_err / k / g_per_volt),
        ],
    })
}
