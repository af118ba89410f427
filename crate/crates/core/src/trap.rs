//! Trap and drive parameters, and their mapping onto interaction-picture
//! Hamiltonians for a pair of motional modes.
//!
//! A Hamiltonian is built symbolically as a list of terms `c(t)·O + h.c.`,
//! where `O` is a normal-ordered ladder monomial on the two modes and
//! `c(t) = amplitude · envelope(t) · Σ_k w_k e^{iν_k t}`. The symbolic form
//! is independent of the Fock cutoff; [`HamiltonianSpec::instantiate`] turns
//! it into sparse matrices for a given pair of cutoffs. All energies are
//! divided by ħ, so `H` is an angular frequency.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix2};

use crate::dynamics::Envelope;
use crate::error::{Error, Result};
use crate::fock::{ModeDim, ModeOperator, SparseOperator, TwoModeDims, C64};
use crate::units::HBAR;

/// Secular mode axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(Error::invalid("axis", format!("unknown axis `{other}`"))),
        }
    }
}

/// Second-order expansion length `D_ij` of the drive electrode potential,
/// with the sign of its contribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Curvature {
    /// Length in metres, > 0.
    pub length: f64,
    pub negative: bool,
}

impl Curvature {
    pub fn positive(length: f64) -> Self {
        Curvature { length, negative: false }
    }

    fn sign(self) -> f64 {
        if self.negative {
            -1.0
        } else {
            1.0
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrapConfig {
    /// kg
    pub mass: f64,
    /// C
    pub charge: f64,
    /// Secular angular frequencies (ω_x, ω_y, ω_z), rad/s.
    pub omega: [f64; 3],
    /// Symmetric table of second-order lengths; `None` means the term is
    /// absent from the drive potential.
    pub curvature: [[Option<Curvature>; 3]; 3],
    /// First-order lengths `D_1,i` in metres; `None` means no linear field.
    pub linear: [Option<f64>; 3],
    /// Direction cosines of the laser wavevector on the mode axes.
    pub laser_projection: [f64; 3],
    /// rad/m
    pub laser_wavenumber: f64,
    /// Minimum |ω_p − ω_i| (rad/s) for the off-resonant driven-motion
    /// response to be used.
    pub resonance_guard: f64,
}

impl TrapConfig {
    pub fn omega(&self, axis: Axis) -> f64 {
        self.omega[axis.index()]
    }

    pub fn set_omega(&mut self, axis: Axis, w: f64) {
        self.omega[axis.index()] = w;
    }

    pub fn curvature(&self, a: Axis, b: Axis) -> Option<Curvature> {
        self.curvature[a.index()][b.index()]
    }

    /// Sets `D_ab` and `D_ba`.
    pub fn set_curvature(&mut self, a: Axis, b: Axis, c: Option<Curvature>) {
        self.curvature[a.index()][b.index()] = c;
        self.curvature[b.index()][a.index()] = c;
    }

    /// Lamb–Dicke parameter `k·k̂_i·√(ħ/2mω_i)`.
    pub fn lamb_dicke(&self, axis: Axis) -> f64 {
        self.laser_wavenumber * self.laser_projection[axis.index()].abs() * (HBAR / (2.0 * self.mass * self.omega(axis))).sqrt()
    }

    /// Checks every physical invariant, reporting the first violation with
    /// the field name.
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
            }
        };
        pos("mass", self.mass)?;
        pos("charge", self.charge)?;
        pos("laser_wavenumber", self.laser_wavenumber)?;
        for a in Axis::ALL {
            pos(&format!("omega.{a}"), self.omega(a))?;
        }
        for a in Axis::ALL {
            for b in Axis::ALL {
                if a < b && self.omega(a) == self.omega(b) {
                    return Err(Error::invalid(format!("omega.{b}"), format!("coincides with omega.{a}")));
                }
                if self.curvature(a, b) != self.curvature(b, a) {
                    return Err(Error::invalid(format!("curvature.{a}{b}"), "table must be symmetric"));
                }
                if let Some(c) = self.curvature(a, b) {
                    pos(&format!("curvature.{a}{b}"), c.length)?;
                }
            }
            if let Some(d1) = self.linear[a.index()] {
                if !(d1 != 0.0 && d1.is_finite()) {
                    return Err(Error::invalid(format!("linear.{a}"), format!("must be finite and nonzero, got {d1}")));
                }
            }
        }
        let norm = self.laser_projection.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(norm <= 1.0 + 1e-12) {
            return Err(Error::invalid("laser_projection", format!("direction cosines have norm {norm} > 1")));
        }
        if !(self.resonance_guard >= 0.0) {
            return Err(Error::invalid("resonance_guard", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EnvelopeKind {
    Rectangular,
    Blackman,
}

impl FromStr for EnvelopeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rectangular" | "square" | "rect" => Ok(EnvelopeKind::Rectangular),
            "blackman" => Ok(EnvelopeKind::Blackman),
            other => Err(Error::invalid("envelope", format!("unknown envelope `{other}`"))),
        }
    }
}

/// Blackman area fraction: `∫₀ᵀ B_T dt = BLACKMAN_AREA · T`.
pub const BLACKMAN_AREA: f64 = 0.42;

/// Parametric drive `V(t) = V0·envelope(t)·cos(ω_p t + φ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DrivePulse {
    /// V0 in volts.
    pub amplitude: f64,
    /// ω_p in rad/s.
    pub frequency: f64,
    pub phase: f64,
    pub envelope: EnvelopeKind,
    /// Full pulse length in seconds. For a Blackman pulse this is the
    /// window length `T`, whose rectangular equivalent is `0.42·T`.
    pub duration: f64,
}

impl DrivePulse {
    /// Pulse whose area equals a rectangular pulse of length `t_rect`.
    pub fn with_rect_equivalent(amplitude: f64, frequency: f64, envelope: EnvelopeKind, t_rect: f64) -> Self {
        let duration = match envelope {
            EnvelopeKind::Rectangular => t_rect,
            EnvelopeKind::Blackman => t_rect / BLACKMAN_AREA,
        };
        DrivePulse { amplitude, frequency, phase: 0.0, envelope, duration }
    }

    pub fn rect_equivalent(&self) -> f64 {
        match self.envelope {
            EnvelopeKind::Rectangular => self.duration,
            EnvelopeKind::Blackman => BLACKMAN_AREA * self.duration,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::invalid("duration", format!("must be positive, got {}", self.duration)));
        }
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(Error::invalid("amplitude", format!("must be >= 0, got {}", self.amplitude)));
        }
        if !(self.frequency >= 0.0) || !self.frequency.is_finite() {
            return Err(Error::invalid("frequency", format!("must be >= 0, got {}", self.frequency)));
        }
        if !self.phase.is_finite() {
            return Err(Error::invalid("phase", "must be finite"));
        }
        Ok(())
    }
}

/// Optional extra terms of the full interaction-picture Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct FullFrameOptions {
    /// Linear displacement term from `D_1,i`.
    pub linear_drive: bool,
    /// Single-mode `r_i²` frequency modulation from `D_ii`.
    pub trap_modulation: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Frame {
    FullLabInteraction(FullFrameOptions),
    /// Beamsplitter `g(e^{−iφ} a_i†a_j + h.c.)`.
    RwaDifference,
    /// Amplifier `g(e^{−iφ} a_i†a_j† + h.c.)`.
    RwaSum,
    /// `(Δ/2)(n_i − n_j) + g(e^{−iφ} a_i†a_j + h.c.)` in the frame rotating
    /// with the drive, `Δ = (ω_i − ω_j) − ω_p`.
    RwaDetuned(f64),
}

impl Frame {
    /// Parses a frame tag; `delta` is required for `rwa_detuned`.
    pub fn parse(tag: &str, delta: Option<f64>, options: FullFrameOptions) -> Result<Frame> {
        match tag {
            "full" | "full_lab_interaction" => Ok(Frame::FullLabInteraction(options)),
            "rwa_difference" => Ok(Frame::RwaDifference),
            "rwa_sum" => Ok(Frame::RwaSum),
            "rwa_detuned" => delta
                .map(Frame::RwaDetuned)
                .ok_or_else(|| Error::invalid("frame", "rwa_detuned requires a detuning")),
            other => Err(Error::invalid("frame", format!("unknown frame tag `{other}`"))),
        }
    }
}

/// `a_i†^{ci} a_i^{ai} ⊗ a_j†^{cj} a_j^{aj}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Monomial {
    pub create_i: u8,
    pub annihilate_i: u8,
    pub create_j: u8,
    pub annihilate_j: u8,
}

impl Monomial {
    pub const fn new(create_i: u8, annihilate_i: u8, create_j: u8, annihilate_j: u8) -> Self {
        Monomial { create_i, annihilate_i, create_j, annihilate_j }
    }

    fn single(dim: ModeDim, create: u8, annihilate: u8) -> DMatrix<C64> {
        let a = ModeOperator::annihilate(dim);
        let ad = ModeOperator::create(dim);
        let mut m = DMatrix::identity(dim.cutoff(), dim.cutoff());
        for _ in 0..create {
            m = &m * ad.matrix();
        }
        for _ in 0..annihilate {
            m = &m * a.matrix();
        }
        m
    }

    pub fn to_sparse(self, dims: TwoModeDims) -> SparseOperator {
        SparseOperator::kron(
            &Self::single(dims.i, self.create_i, self.annihilate_i),
            &Self::single(dims.j, self.create_j, self.annihilate_j),
        )
    }

    /// Change in `(n_i, n_j)` produced by the monomial.
    pub fn shift(self) -> (i32, i32) {
        (
            self.create_i as i32 - self.annihilate_i as i32,
            self.create_j as i32 - self.annihilate_j as i32,
        )
    }
}

/// `c(t) = amplitude · envelope(t) · Σ w_k e^{iν_k t}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficient {
    pub amplitude: f64,
    pub envelope: Option<Envelope>,
    /// `(w_k, ν_k)` pairs; ν in rad/s.
    pub phasors: Vec<(C64, f64)>,
}

impl Coefficient {
    pub fn constant(amplitude: f64, w: C64) -> Self {
        Coefficient { amplitude, envelope: None, phasors: vec![(w, 0.0)] }
    }

    /// Drive factor `cos(ω_p t + φ)` times `e^{iν t}`.
    fn cosine(amplitude: f64, envelope: Option<Envelope>, pulse: &DrivePulse, nu: f64) -> Self {
        let half = 0.5;
        Coefficient {
            amplitude,
            envelope,
            phasors: vec![
                (C64::from_polar(half, pulse.phase), nu + pulse.frequency),
                (C64::from_polar(half, -pulse.phase), nu - pulse.frequency),
            ],
        }
    }

    #[inline]
    pub fn at(&self, t: f64) -> C64 {
        let env = self.envelope.map_or(1.0, |e| e.value(t));
        if env == 0.0 || self.amplitude == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let s: C64 = self.phasors.iter().map(|&(w, nu)| w * C64::from_polar(1.0, nu * t)).sum();
        s * (self.amplitude * env)
    }

    /// Upper bound on `|c(t)|`.
    pub fn bound(&self) -> f64 {
        self.amplitude.abs() * self.phasors.iter().map(|p| p.0.norm()).sum::<f64>()
    }

    pub fn max_frequency(&self) -> f64 {
        self.phasors.iter().map(|p| p.1.abs()).fold(0.0, f64::max)
    }

    /// `(envelope, c)` with `c(t) = envelope(t)·c` when no phasor oscillates.
    pub fn separable(&self) -> Option<(Option<Envelope>, C64)> {
        if self.phasors.iter().any(|p| p.1 != 0.0) {
            return None;
        }
        let w: C64 = self.phasors.iter().map(|p| p.0).sum();
        Some((self.envelope, w * self.amplitude))
    }
}

/// One symbolic term `c(t)·O + h.c.`.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub op: Monomial,
    pub coeff: Coefficient,
}

/// Cutoff-independent Hamiltonian description.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianSpec {
    pub terms: Vec<Term>,
}

impl HamiltonianSpec {
    pub fn zero() -> Self {
        HamiltonianSpec { terms: Vec::new() }
    }

    pub fn instantiate(&self, dims: TwoModeDims) -> Result<Hamiltonian> {
        let terms = self
            .terms
            .iter()
            .filter(|t| t.coeff.amplitude != 0.0)
            .map(|t| {
                let op = t.op.to_sparse(dims);
                let adj = op.adjoint();
                InstTerm { op, adj, coeff: t.coeff.clone(), shift: t.op.shift() }
            })
            .collect();
        Ok(Hamiltonian { dims, terms })
    }

    /// Fastest oscillation frequency among the coefficients.
    pub fn max_frequency(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.max_frequency()).fold(0.0, f64::max)
    }

    /// True if every term conserves `n_i + n_j`.
    pub fn conserves_total_number(&self) -> bool {
        self.terms.iter().all(|t| {
            let (a, b) = t.op.shift();
            a + b == 0
        })
    }
}

#[derive(Clone, Debug)]
pub(crate) struct InstTerm {
    pub(crate) op: SparseOperator,
    pub(crate) adj: SparseOperator,
    pub(crate) coeff: Coefficient,
    pub(crate) shift: (i32, i32),
}

/// Time-dependent Hamiltonian on a concrete two-mode space.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    dims: TwoModeDims,
    pub(crate) terms: Vec<InstTerm>,
}

impl Hamiltonian {
    pub fn dims(&self) -> TwoModeDims {
        self.dims
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Dense `H(t)`.
    pub fn matrix_at(&self, t: f64) -> DMatrix<C64> {
        let d = self.dims.total();
        let mut m = DMatrix::zeros(d, d);
        for term in &self.terms {
            let c = term.coeff.at(t);
            for (r, col, v) in term.op.triplets() {
                m[(r, col)] += c * v;
            }
            for (r, col, v) in term.adj.triplets() {
                m[(r, col)] += c.conj() * v;
            }
        }
        m
    }

    /// Upper bound on `‖H(t)‖` over all `t`.
    pub fn norm_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.bound() * 2.0 * t.op.norm_bound()).sum()
    }

    pub fn max_frequency(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.max_frequency()).fold(0.0, f64::max)
    }

    /// Operators with their adjoints, for reachability analysis.
    pub(crate) fn operators(&self) -> impl Iterator<Item = &SparseOperator> {
        self.terms.iter().flat_map(|t| [&t.op, &t.adj])
    }
}

fn pair_axes(modes: (Axis, Axis)) -> Result<()> {
    if modes.0 == modes.1 {
        return Err(Error::invalid(
            "modes",
            "mode pair must be distinct; single-mode r² modulation is a full-frame option",
        ));
    }
    Ok(())
}

/// `g_ij = q V0 / (4 m √(ω_i ω_j) D_ij²)`, signed by the curvature sign.
pub fn coupling_rate(cfg: &TrapConfig, pulse: &DrivePulse, modes: (Axis, Axis)) -> Result<f64> {
    pair_axes(modes)?;
    let (i, j) = modes;
    let c = cfg
        .curvature(i, j)
        .ok_or_else(|| Error::invalid(format!("curvature.{i}{j}"), "no cross term for this mode pair"))?;
    if !(c.length > 0.0) || !c.length.is_finite() {
        return Err(Error::invalid(format!("curvature.{i}{j}"), format!("must be positive, got {}", c.length)));
    }
    Ok(c.sign() * cfg.charge * pulse.amplitude
        / (4.0 * cfg.mass * (cfg.omega(i) * cfg.omega(j)).sqrt() * c.length * c.length))
}

/// Single-mode modulation rate `g_ii = q V0 / (4 m ω_i D_ii²)`; zero when
/// `D_ii` is absent.
pub fn modulation_rate(cfg: &TrapConfig, pulse: &DrivePulse, axis: Axis) -> f64 {
    cfg.curvature(axis, axis).map_or(0.0, |c| {
        c.sign() * cfg.charge * pulse.amplitude / (4.0 * cfg.mass * cfg.omega(axis) * c.length * c.length)
    })
}

/// Linear drive rate `f_i = q V0 / (D_1,i √(2ħ m ω_i))`; zero when `D_1,i`
/// is absent.
pub fn linear_drive_rate(cfg: &TrapConfig, pulse: &DrivePulse, axis: Axis) -> f64 {
    cfg.linear[axis.index()].map_or(0.0, |d1| {
        cfg.charge * pulse.amplitude / (d1 * (2.0 * HBAR * cfg.mass * cfg.omega(axis)).sqrt())
    })
}

/// Full population exchange time `π/(2g)`.
pub fn swap_time(g: f64) -> Result<f64> {
    if !(g > 0.0) {
        return Err(Error::invalid("g", format!("must be positive, got {g}")));
    }
    Ok(std::f64::consts::FRAC_PI_2 / g)
}

/// Coupling rate that gives a full exchange in `t_swap`.
pub fn rate_for_swap_time(t_swap: f64) -> Result<f64> {
    if !(t_swap > 0.0) {
        return Err(Error::invalid("t_swap", format!("must be positive, got {t_swap}")));
    }
    Ok(std::f64::consts::FRAC_PI_2 / t_swap)
}

/// Signed steady-state amplitude of mode `axis` under the off-resonant
/// linear force: `(q V0 / (m D_1,i)) / (ω_i² − ω_p²)`.
pub fn driven_motion_amplitude(cfg: &TrapConfig, pulse: &DrivePulse, axis: Axis) -> Result<f64> {
    let w = cfg.omega(axis);
    let Some(d1) = cfg.linear[axis.index()] else {
        return Ok(0.0);
    };
    if (pulse.frequency - w).abs() < cfg.resonance_guard {
        return Err(Error::ResonantDrive { drive: pulse.frequency, mode: w });
    }
    Ok(cfg.charge * pulse.amplitude / (cfg.mass * d1) / (w * w - pulse.frequency * pulse.frequency))
}

/// Driven amplitude along the laser: `Σ_i A_i k̂_i`.
pub fn projected_driven_amplitude(cfg: &TrapConfig, pulse: &DrivePulse) -> Result<f64> {
    let mut a = 0.0;
    for axis in Axis::ALL {
        a += driven_motion_amplitude(cfg, pulse, axis)? * cfg.laser_projection[axis.index()];
    }
    Ok(a)
}

/// Interaction-picture Hamiltonian for the pair `modes = (i, j)`; mode `i`
/// occupies slot I of the two-mode state.
pub fn build_hamiltonian(cfg: &TrapConfig, pulse: &DrivePulse, modes: (Axis, Axis), frame: Frame) -> Result<HamiltonianSpec> {
    cfg.validate()?;
    pulse.validate()?;
    pair_axes(modes)?;
    let (i, j) = modes;
    let env = Some(Envelope::from_pulse(pulse));
    let g = coupling_rate(cfg, pulse, modes)?;
    let (wi, wj) = (cfg.omega(i), cfg.omega(j));
    let rwa = C64::from_polar(1.0, -pulse.phase);
    let mut terms = Vec::new();
    match frame {
        Frame::FullLabInteraction(opts) => {
            // 2g cos(ω_p t + φ)(e^{i(ωi+ωj)t} a_i†a_j† + e^{i(ωi−ωj)t} a_i†a_j) + h.c.
            terms.push(Term { op: Monomial::new(1, 0, 1, 0), coeff: Coefficient::cosine(2.0 * g, env, pulse, wi + wj) });
            terms.push(Term { op: Monomial::new(1, 0, 0, 1), coeff: Coefficient::cosine(2.0 * g, env, pulse, wi - wj) });
            if opts.trap_modulation {
                for (k, w, slot_i) in [(i, wi, true), (j, wj, false)] {
                    let gk = modulation_rate(cfg, pulse, k);
                    if gk == 0.0 {
                        continue;
                    }
                    let (sq, num) = if slot_i {
                        (Monomial::new(2, 0, 0, 0), Monomial::new(1, 1, 0, 0))
                    } else {
                        (Monomial::new(0, 0, 2, 0), Monomial::new(0, 0, 1, 1))
                    };
                    // g_kk cos(ω_p t + φ)(e^{2iω_k t} a_k†² + h.c. + 2 n_k + 1); the
                    // identity part is a global phase and is dropped
                    terms.push(Term { op: sq, coeff: Coefficient::cosine(gk, env, pulse, 2.0 * w) });
                    terms.push(Term { op: num, coeff: Coefficient::cosine(gk, env, pulse, 0.0) });
                }
            }
            if opts.linear_drive {
                for (k, w, op) in [(i, wi, Monomial::new(1, 0, 0, 0)), (j, wj, Monomial::new(0, 0, 1, 0))] {
                    let f = linear_drive_rate(cfg, pulse, k);
                    if f != 0.0 {
                        terms.push(Term { op, coeff: Coefficient::cosine(f, env, pulse, w) });
                    }
                }
            }
        }
        Frame::RwaDifference => {
            terms.push(Term { op: Monomial::new(1, 0, 0, 1), coeff: enveloped(g, env, rwa) });
        }
        Frame::RwaSum => {
            terms.push(Term { op: Monomial::new(1, 0, 1, 0), coeff: enveloped(g, env, rwa) });
        }
        Frame::RwaDetuned(delta) => {
            if !delta.is_finite() {
                return Err(Error::invalid("delta", "must be finite"));
            }
            // (Δ/4)·n + h.c. = (Δ/2)·n
            terms.push(Term { op: Monomial::new(1, 1, 0, 0), coeff: Coefficient::constant(0.25 * delta, C64::new(1.0, 0.0)) });
            terms.push(Term { op: Monomial::new(0, 0, 1, 1), coeff: Coefficient::constant(-0.25 * delta, C64::new(1.0, 0.0)) });
            terms.push(Term { op: Monomial::new(1, 0, 0, 1), coeff: enveloped(g, env, rwa) });
        }
    }
    Ok(HamiltonianSpec { terms })
}

fn enveloped(amplitude: f64, envelope: Option<Envelope>, w: C64) -> Coefficient {
    Coefficient { amplitude, envelope, phasors: vec![(w, 0.0)] }
}

/// Linear-drive-only Hamiltonian on `axis` (slot I), used for the driven
/// off-resonant excitation of a single mode.
pub fn linear_drive_hamiltonian(cfg: &TrapConfig, pulse: &DrivePulse, axis: Axis) -> Result<HamiltonianSpec> {
    cfg.validate()?;
    pulse.validate()?;
    let f = linear_drive_rate(cfg, pulse, axis);
    let env = Some(Envelope::from_pulse(pulse));
    Ok(HamiltonianSpec {
        terms: vec![Term { op: Monomial::new(1, 0, 0, 0), coeff: Coefficient::cosine(f, env, pulse, cfg.omega(axis)) }],
    })
}

/// Eigenvalue splitting of the single-excitation block
/// `[[Δ/2, g], [g, −Δ/2]]` of the detuned Hamiltonian, by direct
/// diagonalisation.
pub fn detuned_splitting(g: f64, delta: f64) -> f64 {
    let m = Matrix2::new(0.5 * delta, g, g, -0.5 * delta);
    let ev = m.symmetric_eigen().eigenvalues;
    (ev[0] - ev[1]).abs()
}
