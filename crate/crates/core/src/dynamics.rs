//! Time evolution: pulse envelopes, closed-system propagation and Lindblad
//! master equations.
//!
//! Closed evolution uses the fourth-order commutator-free Magnus integrator
//! with two Gauss–Legendre nodes per step. Each exponential is applied to
//! the state vector by a Taylor series, so no propagator matrix is formed.
//! Before stepping, the state is restricted to the subspace the Hamiltonian
//! can reach from it, which for number-conserving Hamiltonians is a single
//! excitation shell.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{
    min_eigenvalue, MemoryBudget, Member, ModeDim, ModeOperator, ModeSlot, ModeState, SparseOperator, TwoModeDims,
    TwoModeState, C64,
};
use crate::trap::{
    linear_drive_hamiltonian, Axis, Coefficient, DrivePulse, EnvelopeKind, HamiltonianSpec, Monomial, Term, TrapConfig,
    BLACKMAN_AREA,
};

const ZERO: C64 = C64::new(0.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

pub const BLACKMAN_ALPHA: f64 = 0.16;

/// `B_T(t) = (1−α)/2 − ½cos(2πt/T) + (α/2)cos(4πt/T)`.
#[inline]
pub fn blackman(t: f64, duration: f64) -> f64 {
    let x = std::f64::consts::TAU * t / duration;
    0.5 * (1.0 - BLACKMAN_ALPHA) - 0.5 * x.cos() + 0.5 * BLACKMAN_ALPHA * (2.0 * x).cos()
}

/// Pulse envelope, zero outside `[0, duration]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Envelope {
    pub kind: EnvelopeKind,
    pub duration: f64,
}

impl Envelope {
    pub fn new(kind: EnvelopeKind, duration: f64) -> Result<Self> {
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::invalid("duration", format!("must be positive, got {duration}")));
        }
        Ok(Envelope { kind, duration })
    }

    pub fn from_pulse(pulse: &DrivePulse) -> Self {
        Envelope { kind: pulse.envelope, duration: pulse.duration }
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.duration {
            return 0.0;
        }
        match self.kind {
            EnvelopeKind::Rectangular => 1.0,
            EnvelopeKind::Blackman => blackman(t, self.duration),
        }
    }

    /// `∫_a^b envelope dt`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let prim = |t: f64| {
            let t = t.clamp(0.0, self.duration);
            match self.kind {
                EnvelopeKind::Rectangular => t,
                EnvelopeKind::Blackman => {
                    let k = std::f64::consts::TAU / self.duration;
                    0.5 * (1.0 - BLACKMAN_ALPHA) * t - 0.5 * (k * t).sin() / k
                        + 0.25 * BLACKMAN_ALPHA * (2.0 * k * t).sin() / k
                }
            }
        };
        prim(b) - prim(a)
    }

    /// `∫ envelope dt`.
    pub fn area(&self) -> f64 {
        match self.kind {
            EnvelopeKind::Rectangular => self.duration,
            EnvelopeKind::Blackman => BLACKMAN_AREA * self.duration,
        }
    }
}

/// Drive voltage `V(t) = V0·envelope(t)·cos(ω_p t + φ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Waveform {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
    pub envelope: Envelope,
}

impl Waveform {
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        self.amplitude * self.envelope.value(t) * (self.frequency * t + self.phase).cos()
    }

    /// Slowly varying amplitude `V0·envelope(t)`.
    #[inline]
    pub fn amplitude_at(&self, t: f64) -> f64 {
        self.amplitude * self.envelope.value(t)
    }
}

pub fn apply_envelope(pulse: &DrivePulse) -> Result<Waveform> {
    pulse.validate()?;
    Ok(Waveform {
        amplitude: pulse.amplitude,
        frequency: pulse.frequency,
        phase: pulse.phase,
        envelope: Envelope::new(pulse.envelope, pulse.duration)?,
    })
}

/// Heating and cooling parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    /// ṅ per axis (x, y, z), quanta/s.
    pub heating_rate: [f64; 3],
    /// Occupation left behind by the cooling channel.
    pub cooling_target: f64,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel { heating_rate: [0.0; 3], cooling_target: 0.0 }
    }

    pub fn rate(&self, axis: Axis) -> f64 {
        self.heating_rate[axis.index()]
    }

    pub fn validate(&self) -> Result<()> {
        for a in Axis::ALL {
            let r = self.rate(a);
            if !(r >= 0.0) || !r.is_finite() {
                return Err(Error::invalid(format!("heating_rate.{a}"), format!("must be >= 0, got {r}")));
            }
        }
        if !(self.cooling_target >= 0.0) || !self.cooling_target.is_finite() {
            return Err(Error::invalid("cooling_target", "must be >= 0"));
        }
        Ok(())
    }
}

/// Integrator controls and failure thresholds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    /// Closed runs fail when `|‖ψ‖ − 1|` exceeds this.
    pub norm_drift: f64,
    /// Lindblad runs fail when `|Tr ρ − 1|` exceeds this.
    pub trace_drift: f64,
    /// Lindblad runs fail below this eigenvalue.
    pub min_eigenvalue: f64,
    /// Closed step bound `‖H‖·dt`.
    pub step_norm: f64,
    /// Closed step bound: steps per period of the fastest phasor.
    pub steps_per_period: f64,
    /// Lindblad step bound `‖𝓛‖·dt`.
    pub lindblad_step_norm: f64,
    /// Overrides the step rules with a fixed number of equal steps.
    pub fixed_steps: Option<usize>,
    /// Number of equally spaced observation times including both ends;
    /// values below 2 record only the endpoints.
    pub samples: usize,
    /// Keep the full state at every observation time.
    pub keep_snapshots: bool,
    /// Weight discarded when decomposing mixed states into pure members.
    pub ensemble_discard: f64,
    /// Excitation-number window, beyond the initial support, kept for
    /// Hamiltonians that do not conserve `n_i + n_j`.
    pub shell_margin: usize,
    /// Population allowed on the outermost shell of a truncated window
    /// before the window is widened.
    pub boundary_population: f64,
    pub budget: MemoryBudget,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            norm_drift: 1e-7,
            trace_drift: 1e-7,
            min_eigenvalue: -1e-6,
            step_norm: 0.1,
            steps_per_period: 40.0,
            lindblad_step_norm: 0.05,
            fixed_steps: None,
            samples: 0,
            keep_snapshots: false,
            ensemble_discard: 1e-9,
            shell_margin: 2,
            boundary_population: 1e-10,
            budget: MemoryBudget::default(),
        }
    }
}

impl Tolerance {
    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    fn sample_times(&self, t0: f64, t1: f64) -> Vec<f64> {
        let n = self.samples.max(2);
        (0..n).map(|k| t0 + (t1 - t0) * k as f64 / (n - 1) as f64).collect()
    }
}

#[derive(Clone, Debug)]
pub struct EvolutionReport {
    pub final_state: TwoModeState,
    pub times: Vec<f64>,
    /// `(⟨n_i⟩, ⟨n_j⟩)` at each observation time.
    pub mean_n: Vec<[f64; 2]>,
    /// States at each observation time, if requested.
    pub snapshots: Vec<TwoModeState>,
    /// Largest `|‖ψ‖ − 1|` (closed) or `|Tr ρ − 1|` (Lindblad).
    pub max_norm_drift: f64,
    /// Smallest density-matrix eigenvalue seen (Lindblad only).
    pub min_eigenvalue: Option<f64>,
    pub steps: usize,
    pub failure: Option<String>,
}

impl EvolutionReport {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    /// Converts a failed report into an error.
    pub fn ok(self) -> Result<Self> {
        match &self.failure {
            Some(msg) => Err(Error::Numerical(msg.clone())),
            None => Ok(self),
        }
    }
}

/// One instantiated `c(t)·O + h.c.` term on a (possibly restricted) basis.
#[derive(Clone, Debug)]
struct Generator {
    ops: Vec<(SparseOperator, SparseOperator, Coefficient)>,
    dim: usize,
    // all operators merged into one CSR pattern; `slot` selects the
    // coefficient (2k for O_k, 2k+1 for O_k†)
    row_ptr: Vec<usize>,
    col: Vec<u32>,
    slot: Vec<u32>,
    val: Vec<C64>,
}

impl Generator {
    fn restricted(h: &crate::trap::Hamiltonian, subspace: &[usize]) -> Self {
        let ops: Vec<_> = h
            .terms
            .iter()
            .map(|t| (t.op.restrict(subspace), t.adj.restrict(subspace), t.coeff.clone()))
            .collect();
        let dim = subspace.len();
        let mut entries: Vec<(usize, u32, u32, C64)> = Vec::new();
        for (k, (o, a, _)) in ops.iter().enumerate() {
            for (r, c, v) in o.triplets() {
                entries.push((r, c as u32, 2 * k as u32, v));
            }
            for (r, c, v) in a.triplets() {
                entries.push((r, c as u32, 2 * k as u32 + 1, v));
            }
        }
        entries.sort_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0usize; dim + 1];
        for e in &entries {
            row_ptr[e.0 + 1] += 1;
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Generator {
            ops,
            dim,
            row_ptr,
            col: entries.iter().map(|e| e.1).collect(),
            slot: entries.iter().map(|e| e.2).collect(),
            val: entries.iter().map(|e| e.3).collect(),
        }
    }

    fn norm_bound(&self) -> f64 {
        self.ops.iter().map(|(o, a, c)| c.bound() * (o.norm_bound() + a.norm_bound())).sum()
    }

    fn max_frequency(&self) -> f64 {
        self.ops.iter().map(|(_, _, c)| c.max_frequency()).fold(0.0, f64::max)
    }

    /// `y = (Σ coef[slot]·O) x` over the merged pattern.
    #[inline]
    fn apply(&self, coef: &[C64], x: &[C64], y: &mut [C64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += coef[self.slot[k] as usize] * self.val[k] * x[self.col[k] as usize];
            }
            *yr = acc;
        }
    }

    /// `x ← exp(−i h H_w) x` by Taylor series.
    fn expmv(&self, w: &[C64], h: f64, x: &mut [C64], scratch: &mut Scratch) {
        scratch.term.clear();
        scratch.term.extend_from_slice(x);
        scratch.coef.clear();
        for &wk in w {
            scratch.coef.push(wk);
            scratch.coef.push(wk.conj());
        }
        let base: Vec<C64> = scratch.coef.clone();
        for k in 1..80 {
            let s = -I * (h / k as f64);
            for (c, b) in scratch.coef.iter_mut().zip(&base) {
                *c = s * b;
            }
            self.apply(&scratch.coef, &scratch.term, &mut scratch.next);
            std::mem::swap(&mut scratch.term, &mut scratch.next);
            let mut tn = 0.0;
            for (xv, tv) in x.iter_mut().zip(scratch.term.iter()) {
                *xv += *tv;
                tn += tv.norm_sqr();
            }
            if tn < 1e-32 {
                break;
            }
        }
    }

    /// `H(t) = s(t)·H_0` with a common envelope `s`: returns `s` and the
    /// coefficients of `H_0`. Such generators commute with themselves at all
    /// times and are propagated exactly.
    fn separable(&self) -> Option<(Option<Envelope>, Vec<C64>)> {
        let mut env = None;
        let mut w = Vec::with_capacity(self.ops.len());
        for (k, (_, _, c)) in self.ops.iter().enumerate() {
            let (e, v) = c.separable()?;
            if k == 0 {
                env = e;
            } else if e != env {
                return None;
            }
            w.push(v);
        }
        Some((env, w))
    }

    /// `x ← exp(−iθ H_0) x` in chunks of unit norm.
    fn exact(&self, w: &[C64], theta: f64, x: &mut [C64], scratch: &mut Scratch) -> usize {
        let norm: f64 = self.ops.iter().zip(w).map(|((o, a, _), wk)| wk.norm() * (o.norm_bound() + a.norm_bound())).sum();
        let m = ((theta.abs() * norm).ceil() as usize).max(1);
        for _ in 0..m {
            self.expmv(w, theta / m as f64, x, scratch);
        }
        m
    }

    /// One commutator-free fourth-order Magnus step from `t` to `t + h`.
    fn step(&self, t: f64, h: f64, x: &mut [C64], scratch: &mut Scratch) {
        const S3: f64 = 0.288_675_134_594_812_9; // √3/6
        const A1: f64 = 0.25 - S3; // (3 − 2√3)/12
        const A2: f64 = 0.25 + S3;
        let (t1, t2) = (t + (0.5 - S3) * h, t + (0.5 + S3) * h);
        scratch.w1.clear();
        scratch.w2.clear();
        for (_, _, c) in &self.ops {
            let (z1, z2) = (c.at(t1), c.at(t2));
            scratch.w1.push(z1 * A2 + z2 * A1);
            scratch.w2.push(z1 * A1 + z2 * A2);
        }
        let (w1, w2) = (std::mem::take(&mut scratch.w1), std::mem::take(&mut scratch.w2));
        self.expmv(&w1, h, x, scratch);
        self.expmv(&w2, h, x, scratch);
        scratch.w1 = w1;
        scratch.w2 = w2;
    }
}

#[derive(Default)]
struct Scratch {
    coef: Vec<C64>,
    w1: Vec<C64>,
    w2: Vec<C64>,
    term: Vec<C64>,
    next: Vec<C64>,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        Scratch { coef: Vec::new(), w1: Vec::new(), w2: Vec::new(), term: Vec::with_capacity(dim), next: vec![ZERO; dim] }
    }
}

/// Basis indices reachable from `seed` under repeated application of the
/// Hamiltonian's operators, optionally restricted to an excitation window.
fn reachable(
    h: &crate::trap::Hamiltonian,
    seed: &[usize],
    window: Option<(usize, usize)>,
) -> (Vec<usize>, bool) {
    let dims = h.dims();
    let d = dims.total();
    let mut seen = vec![false; d];
    let mut stack: Vec<usize> = Vec::new();
    let mut clipped = false;
    for &s in seed {
        if !seen[s] {
            seen[s] = true;
            stack.push(s);
        }
    }
    let ops: Vec<&SparseOperator> = h.operators().collect();
    while let Some(r) = stack.pop() {
        for op in &ops {
            for &c in op.row_columns(r) {
                if seen[c] {
                    continue;
                }
                if let Some((lo, hi)) = window {
                    let (a, b) = dims.split(c);
                    let n = a + b;
                    if n < lo || n > hi {
                        clipped = true;
                        continue;
                    }
                }
                seen[c] = true;
                stack.push(c);
            }
        }
    }
    ((0..d).filter(|&k| seen[k]).collect(), clipped)
}

fn total_number_range(dims: TwoModeDims, support: &[usize]) -> (usize, usize) {
    support.iter().fold((usize::MAX, 0), |(lo, hi), &k| {
        let (a, b) = dims.split(k);
        (lo.min(a + b), hi.max(a + b))
    })
}

fn step_count(gen: &Generator, span: f64, tol: &Tolerance) -> usize {
    if span <= 0.0 {
        return 0;
    }
    let norm = gen.norm_bound();
    let mut dt = f64::INFINITY;
    if norm > 0.0 {
        dt = dt.min(tol.step_norm / norm);
    }
    let wmax = gen.max_frequency();
    if wmax > 0.0 {
        dt = dt.min(std::f64::consts::TAU / (tol.steps_per_period * wmax));
    }
    if !dt.is_finite() {
        return 1;
    }
    ((span / dt).ceil() as usize).max(1)
}

/// Result of propagating one pure vector on a restricted basis.
struct PureRun {
    amplitudes: Vec<C64>,
    subspace: Vec<usize>,
    mean_n: Vec<[f64; 2]>,
    snapshots: Vec<Vec<C64>>,
    drift: f64,
    steps: usize,
}

fn mean_n_restricted(dims: TwoModeDims, subspace: &[usize], x: &[C64]) -> [f64; 2] {
    let mut out = [0.0; 2];
    for (&k, v) in subspace.iter().zip(x) {
        let p = v.norm_sqr();
        if p != 0.0 {
            let (a, b) = dims.split(k);
            out[0] += a as f64 * p;
            out[1] += b as f64 * p;
        }
    }
    out
}

fn run_pure(
    h: &crate::trap::Hamiltonian,
    psi: &DVector<C64>,
    times: &[f64],
    tol: &Tolerance,
    snapshots: bool,
) -> Result<PureRun> {
    let dims = h.dims();
    let support: Vec<usize> = (0..psi.len()).filter(|&k| psi[k] != ZERO).collect();
    if support.is_empty() {
        return Err(Error::Numerical("state vector is zero".into()));
    }
    let conserving = h.terms.iter().all(|t| t.shift.0 + t.shift.1 == 0);
    let (lo, hi) = total_number_range(dims, &support);
    let mut margin = tol.shell_margin.max(1);
    let limit = dims.i.cutoff() + dims.j.cutoff();
    loop {
        let window = if conserving || margin >= limit { None } else { Some((lo.saturating_sub(margin), hi + margin)) };
        let (subspace, clipped) = reachable(h, &support, window);
        let run = run_on_subspace(h, psi, &subspace, times, tol, snapshots)?;
        if !clipped {
            return Ok(run);
        }
        // population on the outermost shells of the window
        let (wlo, whi) = window.expect("clipping implies a window");
        let edge: f64 = run
            .subspace
            .iter()
            .zip(&run.amplitudes)
            .filter(|(&k, _)| {
                let (a, b) = dims.split(k);
                let n = a + b;
                (n == whi) || (n == wlo && wlo > 0)
            })
            .map(|(_, v)| v.norm_sqr())
            .sum();
        if edge <= tol.boundary_population {
            return Ok(run);
        }
        margin *= 2;
    }
}

fn run_on_subspace(
    h: &crate::trap::Hamiltonian,
    psi: &DVector<C64>,
    subspace: &[usize],
    times: &[f64],
    tol: &Tolerance,
    snapshots: bool,
) -> Result<PureRun> {
    let dims = h.dims();
    let gen = Generator::restricted(h, subspace);
    let separable = gen.separable();
    let mut x: Vec<C64> = subspace.iter().map(|&k| psi[k]).collect();
    let norm0: f64 = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let mut scratch = Scratch::new(gen.dim);
    let mut drift: f64 = 0.0;
    let mut steps = 0;
    let mut mean_n = vec![mean_n_restricted(dims, subspace, &x)];
    let mut snaps = Vec::new();
    if snapshots {
        snaps.push(x.clone());
    }
    let total_span = times.last().copied().unwrap_or(0.0) - times[0];
    for w in times.windows(2) {
        let (a, b) = (w[0], w[1]);
        let n = match tol.fixed_steps {
            Some(n) => ((n as f64 * (b - a) / total_span).round() as usize).max(1),
            None => step_count(&gen, b - a, tol),
        };
        let dt = (b - a) / n as f64;
        if let (Some((env, w)), None, false) = (&separable, tol.fixed_steps, gen.ops.is_empty()) {
            let theta = env.map_or(b - a, |e| e.integral(a, b));
            steps += gen.exact(w, theta, &mut x, &mut scratch);
        } else if !gen.ops.is_empty() {
            for k in 0..n {
                gen.step(a + k as f64 * dt, dt, &mut x, &mut scratch);
            }
            steps += n;
        }
        let norm: f64 = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::Numerical("state norm became non-finite".into()));
        }
        drift = drift.max((norm - norm0).abs());
        mean_n.push(mean_n_restricted(dims, subspace, &x));
        if snapshots {
            snaps.push(x.clone());
        }
    }
    Ok(PureRun { amplitudes: x, subspace: subspace.to_vec(), mean_n, snapshots: snaps, drift, steps })
}

fn lift(d: usize, subspace: &[usize], x: &[C64]) -> DVector<C64> {
    let mut v = DVector::zeros(d);
    for (&k, &a) in subspace.iter().zip(x) {
        v[k] = a;
    }
    v
}

fn check_hermitian(h: &crate::trap::Hamiltonian, t: f64) -> Result<()> {
    if h.dims().total() <= 64 {
        let m = h.matrix_at(t);
        let dev = crate::fock::hermitian_deviation(&m);
        if dev > 1e-12 * m.norm().max(1.0) {
            return Err(Error::NonHermitian { deviation: dev });
        }
    }
    Ok(())
}

/// Solves `i∂ψ/∂t = H(t)ψ` for a pure state over `t_span`.
pub fn evolve_schrodinger(
    state: &TwoModeState,
    h: &HamiltonianSpec,
    t_span: (f64, f64),
    tol: &Tolerance,
) -> Result<EvolutionReport> {
    if !state.is_pure() {
        return Err(Error::invalid("state", "closed evolution needs a pure state; use evolve_unitary"));
    }
    evolve_unitary(state, h, t_span, tol)
}

/// Closed evolution of any state: pure states are propagated directly,
/// mixed states member by member (in parallel) after decomposition into a
/// pure-state ensemble.
pub fn evolve_unitary(
    state: &TwoModeState,
    h: &HamiltonianSpec,
    t_span: (f64, f64),
    tol: &Tolerance,
) -> Result<EvolutionReport> {
    let dims = state.dims();
    let (t0, t1) = t_span;
    if !(t1 >= t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::invalid("t_span", format!("need finite t0 <= t1, got ({t0}, {t1})")));
    }
    tol.budget.check_vector(dims.total())?;
    let ham = h.instantiate(dims)?;
    check_hermitian(&ham, t0)?;
    let times = tol.sample_times(t0, t1);
    let members: Vec<Member> = match state.amplitudes() {
        Some(v) => vec![Member { weight: 1.0, amplitudes: v.clone() }],
        None => state.members(tol.ensemble_discard),
    };
    let runs: Vec<Result<(f64, PureRun)>> = members
        .par_iter()
        .map(|m| run_pure(&ham, &m.amplitudes, &times, tol, tol.keep_snapshots).map(|r| (m.weight, r)))
        .collect();
    let runs: Vec<(f64, PureRun)> = runs.into_iter().collect::<Result<_>>()?;
    let d = dims.total();
    let mut mean_n = vec![[0.0; 2]; times.len()];
    let mut drift: f64 = 0.0;
    let mut steps = 0;
    for (w, r) in &runs {
        for (acc, m) in mean_n.iter_mut().zip(&r.mean_n) {
            acc[0] += w * m[0];
            acc[1] += w * m[1];
        }
        drift = drift.max(r.drift);
        steps = steps.max(r.steps);
    }
    let pure_input = state.is_pure();
    let build = |pick: &dyn Fn(&PureRun) -> &Vec<C64>| -> Result<TwoModeState> {
        if pure_input {
            let r = &runs[0].1;
            return Ok(TwoModeState::from_members(dims, vec![Member { weight: 1.0, amplitudes: lift(d, &r.subspace, pick(r)) }])?
                .into_pure_if_single());
        }
        TwoModeState::from_members(
            dims,
            runs.iter().map(|(w, r)| Member { weight: *w, amplitudes: lift(d, &r.subspace, pick(r)) }).collect(),
        )
    };
    let final_state = build(&|r| &r.amplitudes)?;
    let mut snapshots = Vec::new();
    if tol.keep_snapshots {
        for k in 0..times.len() {
            snapshots.push(build(&|r| &r.snapshots[k])?);
        }
    }
    let failure = (drift > tol.norm_drift).then(|| format!("norm drift {drift:e} exceeds {:e}", tol.norm_drift));
    Ok(EvolutionReport { final_state, times, mean_n, snapshots, max_norm_drift: drift, min_eigenvalue: None, steps, failure })
}

/// A Lindblad channel `γ·D[L]`.
#[derive(Clone, Debug)]
pub struct Channel {
    pub operator: SparseOperator,
    pub rate: f64,
}

impl Channel {
    pub fn on_mode(op: &ModeOperator, slot: ModeSlot, dims: TwoModeDims, rate: f64) -> Result<Self> {
        Ok(Channel { operator: SparseOperator::on_mode(op, slot, dims)?, rate })
    }

    /// Infinite-temperature heating at `ṅ`: `L = a` and `L = a†`, both at
    /// rate `ṅ`, giving `d⟨n⟩/dt = ṅ`.
    pub fn heating(slot: ModeSlot, dims: TwoModeDims, rate: f64) -> Result<[Channel; 2]> {
        let d = dims.of(slot);
        Ok([
            Self::on_mode(&ModeOperator::annihilate(d), slot, dims, rate)?,
            Self::on_mode(&ModeOperator::create(d), slot, dims, rate)?,
        ])
    }

    pub fn damping(slot: ModeSlot, dims: TwoModeDims, rate: f64) -> Result<Self> {
        Self::on_mode(&ModeOperator::annihilate(dims.of(slot)), slot, dims, rate)
    }
}

struct LindbladRun {
    snapshots: Vec<DMatrix<C64>>,
    drift: f64,
    min_eig: f64,
    steps: usize,
}

/// Fixed-step RK4 on a dense density matrix with sparse operators.
fn lindblad_core(
    rho0: DMatrix<C64>,
    h: Option<&crate::trap::Hamiltonian>,
    channels: &[(SparseOperator, f64)],
    times: &[f64],
    tol: &Tolerance,
) -> Result<LindbladRun> {
    let d = rho0.nrows();
    let prepared: Vec<(SparseOperator, SparseOperator, f64)> = channels
        .iter()
        .filter(|(_, r)| *r > 0.0)
        .map(|(l, r)| {
            let ldl = l.adjoint().matmul(l).expect("same dimension");
            (l.clone(), ldl, *r)
        })
        .collect();
    let mut gen_norm: f64 = prepared.iter().map(|(_, ldl, r)| 2.0 * r * ldl.norm_bound()).sum();
    if let Some(h) = h {
        gen_norm += 2.0 * h.norm_bound();
    }
    let wmax = h.map_or(0.0, |h| h.max_frequency());
    let rhs = |t: f64, rho: &DMatrix<C64>, out: &mut DMatrix<C64>| {
        out.fill(ZERO);
        if let Some(h) = h {
            // −i[H, ρ] with ρH = (Hρ)†
            let mut a = DMatrix::zeros(d, d);
            for term in &h.terms {
                let c = term.coeff.at(t);
                if c != ZERO {
                    term.op.mul_dense_add(c, rho, &mut a);
                    term.adj.mul_dense_add(c.conj(), rho, &mut a);
                }
            }
            *out += (&a - a.adjoint()) * (-I);
        }
        for (l, ldl, r) in &prepared {
            let rate = C64::new(*r, 0.0);
            let mut lr = DMatrix::zeros(d, d);
            l.mul_dense_add(C64::new(1.0, 0.0), rho, &mut lr);
            let lr_dag = lr.adjoint();
            let mut b = DMatrix::zeros(d, d);
            l.mul_dense_add(rate, &lr_dag, &mut b);
            let mut c = DMatrix::zeros(d, d);
            ldl.mul_dense_add(rate * 0.5, rho, &mut c);
            *out += b - &c - c.adjoint();
        }
    };
    let tr0 = rho0.trace().re;
    let mut rho = rho0;
    let mut snapshots = vec![rho.clone()];
    let mut drift: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    let check_eig = d <= 400;
    if check_eig {
        min_eig = min_eig.min(min_eigenvalue(&rho));
    }
    let mut steps = 0;
    let (mut k1, mut k2, mut k3, mut k4) =
        (DMatrix::zeros(d, d), DMatrix::zeros(d, d), DMatrix::zeros(d, d), DMatrix::zeros(d, d));
    let total_span = times.last().copied().unwrap_or(0.0) - times[0];
    for w in times.windows(2) {
        let (a, b) = (w[0], w[1]);
        let span = b - a;
        let n = match tol.fixed_steps {
            Some(n) => ((n as f64 * span / total_span).round() as usize).max(1),
            None => {
                let mut dt = f64::INFINITY;
                if gen_norm > 0.0 {
                    dt = tol.lindblad_step_norm / gen_norm;
                }
                if wmax > 0.0 {
                    dt = dt.min(std::f64::consts::TAU / (tol.steps_per_period * wmax));
                }
                if dt.is_finite() && span > 0.0 {
                    ((span / dt).ceil() as usize).max(1)
                } else {
                    1
                }
            }
        };
        let dt = span / n as f64;
        if gen_norm > 0.0 && span > 0.0 {
            let hdt = C64::new(0.5 * dt, 0.0);
            let fdt = C64::new(dt, 0.0);
            for s in 0..n {
                let t = a + s as f64 * dt;
                rhs(t, &rho, &mut k1);
                rhs(t + 0.5 * dt, &(&rho + &k1 * hdt), &mut k2);
                rhs(t + 0.5 * dt, &(&rho + &k2 * hdt), &mut k3);
                rhs(t + dt, &(&rho + &k3 * fdt), &mut k4);
                rho += (&k1 + (&k2 + &k3) * C64::new(2.0, 0.0) + &k4) * C64::new(dt / 6.0, 0.0);
                // keep exact Hermiticity against roundoff accumulation
                rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
            }
            steps += n;
        }
        let tr = rho.trace().re;
        if !tr.is_finite() {
            return Err(Error::Numerical("density matrix became non-finite".into()));
        }
        drift = drift.max((tr - tr0).abs());
        if check_eig {
            min_eig = min_eig.min(min_eigenvalue(&rho));
        }
        snapshots.push(rho.clone());
    }
    Ok(LindbladRun { snapshots, drift, min_eig: if check_eig { min_eig } else { f64::NAN }, steps })
}

/// Integrates `dρ/dt = −i[H,ρ] + Σ_k γ_k(L_kρL_k† − ½{L_k†L_k, ρ})`.
pub fn evolve_lindblad(
    state: &TwoModeState,
    h: &HamiltonianSpec,
    channels: &[Channel],
    t_span: (f64, f64),
    tol: &Tolerance,
) -> Result<EvolutionReport> {
    let dims = state.dims();
    let (t0, t1) = t_span;
    if !(t1 >= t0) {
        return Err(Error::invalid("t_span", "need t0 <= t1"));
    }
    for c in channels {
        if !(c.rate >= 0.0) {
            return Err(Error::invalid("rate", format!("channel rates must be >= 0, got {}", c.rate)));
        }
        if c.operator.dim() != dims.total() {
            return Err(Error::DimensionMismatch { expected: dims.total(), found: c.operator.dim() });
        }
    }
    let rho0 = state.to_density(tol.budget)?;
    let ham = h.instantiate(dims)?;
    check_hermitian(&ham, t0)?;
    let times = tol.sample_times(t0, t1);
    let ch: Vec<(SparseOperator, f64)> = channels.iter().map(|c| (c.operator.clone(), c.rate)).collect();
    let run = lindblad_core(rho0, (!ham.is_zero()).then_some(&ham), &ch, &times, tol)?;
    let mut mean_n = Vec::with_capacity(run.snapshots.len());
    let mut snapshots = Vec::new();
    for rho in &run.snapshots {
        let s = TwoModeState::from_density_unchecked(dims, rho.clone());
        mean_n.push([s.mean_n(ModeSlot::I), s.mean_n(ModeSlot::J)]);
        if tol.keep_snapshots {
            snapshots.push(s);
        }
    }
    let final_state = TwoModeState::from_density_unchecked(dims, run.snapshots.last().expect("initial snapshot").clone());
    let min_eig = (!run.min_eig.is_nan()).then_some(run.min_eig);
    let mut failure = None;
    if run.drift > tol.trace_drift {
        failure = Some(format!("trace drift {:e} exceeds {:e}", run.drift, tol.trace_drift));
    }
    if let Some(e) = min_eig {
        if e < tol.min_eigenvalue {
            failure = Some(format!("density matrix eigenvalue {e:e} below {:e}", tol.min_eigenvalue));
        }
    }
    Ok(EvolutionReport {
        final_state,
        times,
        mean_n,
        snapshots,
        max_norm_drift: run.drift,
        min_eigenvalue: min_eig,
        steps: run.steps,
        failure,
    })
}

/// Single-mode master-equation run with snapshots at `tol.samples` times.
#[derive(Clone, Debug)]
pub struct ModeEvolution {
    pub times: Vec<f64>,
    pub states: Vec<ModeState>,
    pub max_trace_drift: f64,
    pub min_eigenvalue: f64,
    pub steps: usize,
}

impl ModeEvolution {
    pub fn final_state(&self) -> &ModeState {
        self.states.last().expect("at least the initial state")
    }
}

/// Lindblad evolution of one mode under the given `(L, γ)` channels and no
/// Hamiltonian (the free evolution is removed by the interaction picture).
pub fn evolve_mode_lindblad(
    state: &ModeState,
    channels: &[(ModeOperator, f64)],
    duration: f64,
    tol: &Tolerance,
) -> Result<ModeEvolution> {
    if !(duration >= 0.0) {
        return Err(Error::invalid("duration", format!("must be >= 0, got {duration}")));
    }
    let d = state.dim().cutoff();
    let mut ch = Vec::new();
    for (op, rate) in channels {
        if op.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: op.dim() });
        }
        if !(*rate >= 0.0) {
            return Err(Error::invalid("rate", format!("channel rates must be >= 0, got {rate}")));
        }
        ch.push((SparseOperator::from_dense(op.matrix()), *rate));
    }
    let times = tol.sample_times(0.0, duration);
    let evo = match population_run(state, channels, &times, tol) {
        Some(evo) => evo,
        None => {
            let run = lindblad_core(state.density(), None, &ch, &times, tol)?;
            ModeEvolution {
                times,
                states: run.snapshots.into_iter().map(ModeState::from_density_unchecked).collect(),
                max_trace_drift: run.drift,
                min_eigenvalue: run.min_eig,
                steps: run.steps,
            }
        }
    };
    if evo.max_trace_drift > tol.trace_drift {
        return Err(Error::Numerical(format!("trace drift {:e} exceeds {:e}", evo.max_trace_drift, tol.trace_drift)));
    }
    if evo.min_eigenvalue < tol.min_eigenvalue {
        return Err(Error::Numerical(format!(
            "density matrix eigenvalue {:e} below {:e}",
            evo.min_eigenvalue, tol.min_eigenvalue
        )));
    }
    Ok(evo)
}

/// Rate-equation path: a Fock-diagonal state under channels whose
/// operators each shift `n` by a fixed amount stays diagonal, so RK4 runs
/// on the populations alone with the same step rule.
fn population_run(
    state: &ModeState,
    channels: &[(ModeOperator, f64)],
    times: &[f64],
    tol: &Tolerance,
) -> Option<ModeEvolution> {
    let d = state.dim().cutoff();
    let rho = state.density();
    let offdiag = (0..d).flat_map(|r| (0..d).map(move |c| (r, c))).filter(|(r, c)| r != c);
    if offdiag.clone().any(|(r, c)| rho[(r, c)] != ZERO) {
        return None;
    }
    // transitions (from, to, rate)
    let mut moves: Vec<(usize, usize, f64)> = Vec::new();
    let mut gen_norm = 0.0;
    for (op, rate) in channels {
        let m = op.matrix();
        let mut shift = None;
        let mut ldl_max: f64 = 0.0;
        for (r, c) in (0..d).flat_map(|r| (0..d).map(move |c| (r, c))) {
            let v = m[(r, c)];
            if v == ZERO {
                continue;
            }
            let k = r as isize - c as isize;
            if *shift.get_or_insert(k) != k {
                return None;
            }
            moves.push((c, r, rate * v.norm_sqr()));
            ldl_max = ldl_max.max(v.norm_sqr());
        }
        gen_norm += 2.0 * rate * ldl_max;
    }
    let mut p: Vec<f64> = (0..d).map(|k| rho[(k, k)].re).collect();
    let tr0: f64 = p.iter().sum();
    let rhs = |p: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(from, to, r) in &moves {
            out[to] += r * p[from];
            out[from] -= r * p[from];
        }
    };
    let total_span = times.last().copied().unwrap_or(0.0) - times[0];
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut states = vec![state.clone()];
    let mut steps = 0;
    let mut drift: f64 = 0.0;
    let mut min_eig = p.iter().cloned().fold(f64::INFINITY, f64::min);
    for w in times.windows(2) {
        let span = w[1] - w[0];
        let n = match tol.fixed_steps {
            Some(n) => ((n as f64 * span / total_span).round() as usize).max(1),
            None if gen_norm > 0.0 && span > 0.0 => ((span * gen_norm / tol.lindblad_step_norm).ceil() as usize).max(1),
            None => 0,
        };
        let dt = if n > 0 { span / n as f64 } else { 0.0 };
        for _ in 0..n {
            rhs(&p, &mut k1);
            tmp.iter_mut().zip(&p).zip(&k1).for_each(|((t, p), k)| *t = p + 0.5 * dt * k);
            rhs(&tmp, &mut k2);
            tmp.iter_mut().zip(&p).zip(&k2).for_each(|((t, p), k)| *t = p + 0.5 * dt * k);
            rhs(&tmp, &mut k3);
            tmp.iter_mut().zip(&p).zip(&k3).for_each(|((t, p), k)| *t = p + dt * k);
            rhs(&tmp, &mut k4);
            for i in 0..d {
                p[i] += dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
            }
        }
        steps += n;
        drift = drift.max((p.iter().sum::<f64>() - tr0).abs());
        min_eig = min_eig.min(p.iter().cloned().fold(f64::INFINITY, f64::min));
        let rho = DMatrix::from_diagonal(&DVector::from_iterator(d, p.iter().map(|&v| C64::new(v, 0.0))));
        states.push(ModeState::from_density_unchecked(rho));
    }
    Some(ModeEvolution { times: times.to_vec(), states, max_trace_drift: drift, min_eigenvalue: min_eig, steps })
}

/// Heats one mode at `ṅ` for `duration`.
pub fn heat_mode(state: &ModeState, rate: f64, duration: f64, tol: &Tolerance) -> Result<ModeState> {
    if rate == 0.0 || duration == 0.0 {
        return Ok(state.clone());
    }
    let d = state.dim();
    let run = evolve_mode_lindblad(
        state,
        &[(ModeOperator::annihilate(d), rate), (ModeOperator::create(d), rate)],
        duration,
        &Tolerance { samples: 2, ..*tol },
    )?;
    Ok(run.final_state().clone())
}

/// Occupation left in `axis` after the linear drive term of `pulse` acts
/// on its ground state.
pub fn residual_excitation(cfg: &TrapConfig, pulse: &DrivePulse, axis: Axis, cutoff: ModeDim, tol: &Tolerance) -> Result<f64> {
    let h = linear_drive_hamiltonian(cfg, pulse, axis)?;
    if cfg.linear[axis.index()].is_some() {
        let w = cfg.omega(axis);
        if (pulse.frequency - w).abs() < cfg.resonance_guard {
            return Err(Error::ResonantDrive { drive: pulse.frequency, mode: w });
        }
    }
    let dims = TwoModeDims { i: cutoff, j: ModeDim::new(2)? };
    let tol = Tolerance { samples: tol.samples.max(33), keep_snapshots: true, ..*tol };
    let report = evolve_unitary(&TwoModeState::vacuum(dims), &h, (0.0, pulse.duration), &tol)?.ok()?;
    let top = cutoff.cutoff() - 1;
    let worst = report
        .snapshots
        .iter()
        .map(|s| s.marginal_populations(ModeSlot::I)[top])
        .fold(0.0, f64::max);
    if worst > 1e-8 {
        return Err(Error::TruncationInsufficient(format!(
            "driven motion reaches the top Fock level (population {worst:e}) at cutoff {}",
            cutoff.cutoff()
        )));
    }
    Ok(report.final_state.mean_n(ModeSlot::I))
}

/// First and second moments of the two-mode state used by the squeezing
/// witness.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub n_i: f64,
    pub n_j: f64,
    pub a_i: C64,
    pub a_j: C64,
    pub a_i_sq: C64,
    pub a_j_sq: C64,
    /// `⟨a_i a_j⟩`
    pub a_i_a_j: C64,
    /// `⟨a_i† a_j⟩`
    pub ad_i_a_j: C64,
}

pub fn moments(state: &TwoModeState) -> Result<Moments> {
    use crate::fock::Observable::Joint;
    let dims = state.dims();
    let mono = |m: Monomial| m.to_sparse(dims);
    let e = |m: Monomial| state.expect(Joint(&mono(m)));
    Ok(Moments {
        n_i: state.mean_n(ModeSlot::I),
        n_j: state.mean_n(ModeSlot::J),
        a_i: e(Monomial::new(0, 1, 0, 0))?,
        a_j: e(Monomial::new(0, 0, 0, 1))?,
        a_i_sq: e(Monomial::new(0, 2, 0, 0))?,
        a_j_sq: e(Monomial::new(0, 0, 0, 2))?,
        a_i_a_j: e(Monomial::new(0, 1, 0, 1))?,
        ad_i_a_j: e(Monomial::new(1, 0, 0, 1))?,
    })
}

/// Smallest variance of a quadrature of `c = (a_i − a_j)/√2`, minimised
/// over the quadrature phase. Equals ½ for vacuum; values below ½ witness
/// two-mode squeezing.
pub fn squeezing_witness(m: &Moments) -> f64 {
    let c = (m.a_i - m.a_j) / 2f64.sqrt();
    let cdc = 0.5 * (m.n_i + m.n_j - 2.0 * m.ad_i_a_j.re);
    let cc = 0.5 * (m.a_i_sq + m.a_j_sq - 2.0 * m.a_i_a_j);
    let cdc_c = cdc - c.norm_sqr();
    let cc_c = cc - c * c;
    cdc_c + 0.5 - cc_c.norm()
}

#[derive(Clone, Debug)]
pub struct SqueezeReport {
    pub n_i: f64,
    pub n_j: f64,
    /// `⟨a_i a_j⟩`
    pub correlation: C64,
    pub witness: f64,
    pub top_population: f64,
    pub state: TwoModeState,
}

/// Evolves the two-mode vacuum under `g(a_i†a_j† + a_i a_j)` for time `t`.
pub fn squeeze_evolution(g: f64, t: f64, cutoff: ModeDim, tol: &Tolerance) -> Result<SqueezeReport> {
    if !g.is_finite() || !(t >= 0.0) {
        return Err(Error::invalid("g, t", "need finite g and t >= 0"));
    }
    let dims = TwoModeDims { i: cutoff, j: cutoff };
    let h = HamiltonianSpec {
        terms: vec![Term { op: Monomial::new(1, 0, 1, 0), coeff: Coefficient::constant(g, C64::new(1.0, 0.0)) }],
    };
    let report = evolve_unitary(&TwoModeState::vacuum(dims), &h, (0.0, t), tol)?.ok()?;
    let state = report.final_state;
    let top = cutoff.cutoff() - 1;
    let top_population = state.marginal_populations(ModeSlot::I)[top];
    if top_population > 1e-8 {
        return Err(Error::TruncationInsufficient(format!(
            "squeezed state has top-level population {top_population:e} at cutoff {}",
            cutoff.cutoff()
        )));
    }
    let m = moments(&state)?;
    Ok(SqueezeReport { n_i: m.n_i, n_j: m.n_j, correlation: m.a_i_a_j, witness: squeezing_witness(&m), top_population, state })
}

/// Cutoff at which the ideal two-mode squeezed state at `gt` has less than
/// `tail` population on the top level.
pub fn squeeze_cutoff(gt: f64, tail: f64) -> usize {
    let r = gt.abs().tanh().powi(2);
    if r == 0.0 {
        return 2;
    }
    let p0 = 1.0 / gt.cosh().powi(2);
    let n = ((tail / p0).ln() / r.ln()).ceil().max(1.0) as usize;
    n + 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::make_thermal;
    use crate::presets;
    use crate::trap::{build_hamiltonian, coupling_rate, Frame, FullFrameOptions};
    use crate::units::hz;
    use std::f64::consts::PI;

    fn dims(a: usize, b: usize) -> TwoModeDims {
        TwoModeDims::new(a, b).unwrap()
    }

    fn beamsplitter(g: f64) -> HamiltonianSpec {
        HamiltonianSpec {
            terms: vec![Term { op: Monomial::new(1, 0, 0, 1), coeff: Coefficient::constant(g, C64::new(1.0, 0.0)) }],
        }
    }

    #[test]
    fn blackman_values() {
        let t = 3e-4;
        assert!(blackman(0.0, t).abs() < 1e-15);
        assert!(blackman(t, t).abs() < 1e-15);
        assert!((blackman(0.5 * t, t) - 1.0).abs() < 1e-15);
        // Simpson quadrature of the window
        let n = 2000;
        let h = t / n as f64;
        let mut s = blackman(0.0, t) + blackman(t, t);
        for k in 1..n {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * blackman(k as f64 * h, t);
        }
        assert!((s * h / 3.0 - 0.42 * t).abs() < 1e-12 * t);
    }

    #[test]
    fn envelope_rejects_bad_duration() {
        assert!(Envelope::new(EnvelopeKind::Blackman, 0.0).is_err());
        let p = DrivePulse { amplitude: 1.0, frequency: 1.0, phase: 0.0, envelope: EnvelopeKind::Blackman, duration: -1.0 };
        assert!(apply_envelope(&p).is_err());
    }

    #[test]
    fn waveform_area_matches_rect() {
        let rect = DrivePulse::with_rect_equivalent(2.0, 0.0, EnvelopeKind::Rectangular, 1e-4);
        let bl = DrivePulse::with_rect_equivalent(2.0, 0.0, EnvelopeKind::Blackman, 1e-4);
        let (wr, wb) = (apply_envelope(&rect).unwrap(), apply_envelope(&bl).unwrap());
        assert!((wr.envelope.area() * 2.0 - wb.envelope.area() * 2.0).abs() < 1e-18);
        assert!(wb.value(0.0).abs() < 1e-15);
        assert!((wb.value(0.5 * bl.duration) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_hamiltonian_leaves_state() {
        let s = TwoModeState::fock(1, 2, dims(4, 4)).unwrap();
        let r = evolve_schrodinger(&s, &HamiltonianSpec::zero(), (0.0, 1.0), &Tolerance::default()).unwrap();
        assert_eq!(r.max_norm_drift, 0.0);
        assert_eq!(r.final_state.amplitudes().unwrap(), s.amplitudes().unwrap());
    }

    #[test]
    fn beamsplitter_transfers_single_phonon() {
        let g = hz(2.78e3);
        let s = TwoModeState::fock(1, 0, dims(3, 3)).unwrap();
        let t = PI / (2.0 * g);
        let r = evolve_schrodinger(&s, &beamsplitter(g), (0.0, t), &Tolerance::default().with_samples(11)).unwrap();
        let v = r.final_state.amplitudes().unwrap();
        assert!(v[dims(3, 3).index(0, 1)].norm_sqr() > 1.0 - 1e-6);
        for (k, m) in r.mean_n.iter().enumerate() {
            let want = (g * r.times[k]).cos().powi(2);
            assert!((m[0] - want).abs() < 1e-7);
            assert!((m[0] + m[1] - 1.0).abs() < 1e-9);
        }
        assert!(r.max_norm_drift < 1e-7);
    }

    #[test]
    fn fourth_order_convergence() {
        // time-dependent coefficients so that the Magnus error is visible
        let g = 1.0;
        let h = HamiltonianSpec {
            terms: vec![
                Term {
                    op: Monomial::new(1, 0, 0, 1),
                    coeff: Coefficient { amplitude: g, envelope: None, phasors: vec![(C64::new(1.0, 0.0), 0.7)] },
                },
                Term {
                    op: Monomial::new(1, 0, 1, 0),
                    coeff: Coefficient { amplitude: 0.3, envelope: None, phasors: vec![(C64::new(0.0, 1.0), 2.1)] },
                },
            ],
        };
        let s = TwoModeState::fock(2, 1, dims(12, 12)).unwrap();
        let run = |n: usize| {
            let tol = Tolerance { fixed_steps: Some(n), ..Tolerance::default() };
            evolve_schrodinger(&s, &h, (0.0, 3.0), &tol).unwrap().final_state.amplitudes().unwrap().clone()
        };
        let reference = run(4096);
        let e1 = (run(16) - &reference).norm();
        let e2 = (run(32) - &reference).norm();
        assert!(e1 / e2 >= 8.0, "error ratio {}", e1 / e2);
    }

    #[test]
    fn mixed_swap_exchanges_thermal_occupations() {
        let a = make_thermal(0.2, ModeDim::new(30).unwrap()).unwrap();
        let b = make_thermal(6.0, ModeDim::new(80).unwrap()).unwrap();
        let g = hz(2.78e3);
        // pad the cold mode so the exchanged thermal(6) fits
        let a = a.resized(ModeDim::new(80).unwrap(), 0.0).unwrap();
        let s = crate::fock::tensor(&a, &b, MemoryBudget::default()).unwrap();
        let tol = Tolerance { ensemble_discard: 1e-6, ..Tolerance::default() };
        let r = evolve_unitary(&s, &beamsplitter(g), (0.0, PI / (2.0 * g)), &tol).unwrap();
        let [ni, nj] = *r.mean_n.last().unwrap();
        assert!((ni - b.mean_n()).abs() < 1e-3 * b.mean_n(), "{ni}");
        assert!((nj - a.mean_n()).abs() < 1e-2 * a.mean_n(), "{nj}");
    }

    #[test]
    fn lindblad_trivial_and_heating() {
        let d = ModeDim::new(30).unwrap();
        let dd = TwoModeDims { i: d, j: ModeDim::new(2).unwrap() };
        let s = TwoModeState::vacuum(dd);
        let r = evolve_lindblad(&s, &HamiltonianSpec::zero(), &[], (0.0, 1e-3), &Tolerance::default()).unwrap();
        let rho0 = s.to_density(MemoryBudget::default()).unwrap();
        assert_eq!(r.final_state.to_density(MemoryBudget::default()).unwrap(), rho0);
        let ch = Channel::heating(ModeSlot::I, dd, 810.0).unwrap();
        let r = evolve_lindblad(&s, &HamiltonianSpec::zero(), &ch, (0.0, 2e-3), &Tolerance::default().with_samples(5)).unwrap();
        let r = r.ok().unwrap();
        let n = r.mean_n.last().unwrap()[0];
        assert!((n - 1.62).abs() < 0.0162, "⟨n⟩ = {n}");
        assert!(r.max_norm_drift < 1e-7);
        assert!(r.min_eigenvalue.unwrap() > -1e-9);
    }

    #[test]
    fn lindblad_damping_decays_exponentially() {
        let d = ModeDim::new(80).unwrap();
        let th = make_thermal(6.0, d).unwrap();
        let gamma = 2e3;
        let run = evolve_mode_lindblad(&th, &[(ModeOperator::annihilate(d), gamma)], 1e-3, &Tolerance::default().with_samples(6)).unwrap();
        for (t, s) in run.times.iter().zip(&run.states) {
            let want = th.mean_n() * (-gamma * t).exp();
            assert!((s.mean_n() - want).abs() < 0.01 * want, "t = {t}");
        }
    }

    #[test]
    fn lindblad_with_hamiltonian_matches_closed_evolution() {
        let g = 1e3;
        let s = TwoModeState::fock(1, 0, dims(3, 3)).unwrap();
        let t = 1e-3;
        let a = evolve_lindblad(&s, &beamsplitter(g), &[], (0.0, t), &Tolerance::default()).unwrap();
        let b = evolve_schrodinger(&s, &beamsplitter(g), (0.0, t), &Tolerance::default()).unwrap();
        assert!((a.mean_n[1][0] - b.mean_n[1][0]).abs() < 1e-6);
    }

    #[test]
    fn squeezing_follows_sinh_squared() {
        let g = 1.0;
        for &t in &[0.0, 0.5, 1.0, 2.0] {
            let c = ModeDim::new(squeeze_cutoff(g * t, 1e-10)).unwrap();
            let r = squeeze_evolution(g, t, c, &Tolerance::default()).unwrap();
            let want = (g * t).sinh().powi(2);
            assert!((r.n_i - want).abs() <= 0.01 * want.max(1e-12) + 1e-12, "t={t}: {} vs {want}", r.n_i);
            assert!((r.n_i - r.n_j).abs() < 1e-9);
            let w = 0.5 * (-2.0 * g * t).exp();
            assert!((r.witness - w).abs() < 1e-3 * w, "witness {} vs {w}", r.witness);
        }
    }

    #[test]
    fn squeeze_rejects_small_cutoff() {
        assert!(matches!(
            squeeze_evolution(1.0, 2.0, ModeDim::new(20).unwrap(), &Tolerance::default()),
            Err(Error::TruncationInsufficient(_))
        ));
    }

    #[test]
    fn residual_excitation_zero_voltage() {
        let cfg = presets::calcium_trap();
        let p = DrivePulse { amplitude: 0.0, frequency: hz(1.6e6), phase: 0.0, envelope: EnvelopeKind::Blackman, duration: 1e-4 };
        let n = residual_excitation(&cfg, &p, Axis::X, ModeDim::new(10).unwrap(), &Tolerance::default()).unwrap();
        assert_eq!(n, 0.0);
    }

    #[test]
    fn residual_excitation_matches_classical_displacement() {
        // a linearly driven oscillator stays coherent; the final amplitude is
        // β = −i ∫ f·env(t)·cos(ω_p t)·e^{iωt} dt
        let cfg = presets::residual_trap();
        let p = DrivePulse { amplitude: 0.08, frequency: hz(1.6e6), phase: 0.0, envelope: EnvelopeKind::Rectangular, duration: 13.3e-6 };
        let f = crate::trap::linear_drive_rate(&cfg, &p, Axis::X);
        let w = cfg.omega(Axis::X);
        let n_quad = 200_000;
        let h = p.duration / n_quad as f64;
        let mut beta = C64::new(0.0, 0.0);
        for k in 0..n_quad {
            let t = (k as f64 + 0.5) * h;
            beta += C64::from_polar(f * (p.frequency * t).cos() * h, w * t);
        }
        let want = beta.norm_sqr();
        let n = residual_excitation(&cfg, &p, Axis::X, ModeDim::new(160).unwrap(), &Tolerance::default()).unwrap();
        assert!((n - want).abs() < 1e-4 * want.max(1e-3), "{n} vs {want}");
    }

    #[test]
    fn parametric_amplification_at_twice_mode_frequency() {
        let mut cfg = presets::calcium_trap();
        cfg.set_curvature(Axis::Z, Axis::Z, Some(crate::trap::Curvature::positive(2e-4)));
        cfg.set_curvature(Axis::X, Axis::Z, None);
        cfg.set_curvature(Axis::X, Axis::Z, Some(crate::trap::Curvature::positive(1.0)));
        let wz = cfg.omega(Axis::Z);
        let p = DrivePulse { amplitude: 0.01, frequency: 2.0 * wz, phase: 0.0, envelope: EnvelopeKind::Rectangular, duration: 40e-6 };
        let opts = FullFrameOptions { linear_drive: false, trap_modulation: true };
        let h = build_hamiltonian(&cfg, &p, (Axis::X, Axis::Z), Frame::FullLabInteraction(opts)).unwrap();
        let s = TwoModeState::vacuum(dims(2, 40));
        let r = evolve_unitary(&s, &h, (0.0, p.duration), &Tolerance { samples: 9, ..Tolerance::default() }).unwrap().ok().unwrap();
        let nz: Vec<f64> = r.mean_n.iter().map(|m| m[1]).collect();
        assert!(nz.windows(2).all(|w| w[1] > w[0]), "{nz:?}");
        assert!(*nz.last().unwrap() > 0.1 && *nz.last().unwrap() < 5.0);
    }

    #[test]
    fn off_resonant_modulation_does_nothing() {
        let mut cfg = presets::calcium_trap();
        cfg.set_curvature(Axis::Z, Axis::Z, Some(crate::trap::Curvature::positive(2e-4)));
        cfg.set_curvature(Axis::X, Axis::X, Some(crate::trap::Curvature::positive(2e-4)));
        let p = DrivePulse { amplitude: 0.05, frequency: hz(0.77e6), phase: 0.0, envelope: EnvelopeKind::Rectangular, duration: 1.0 };
        let g = coupling_rate(&cfg, &p, (Axis::X, Axis::Z)).unwrap();
        let t = PI / (2.0 * g);
        let opts = FullFrameOptions { linear_drive: false, trap_modulation: true };
        let h = build_hamiltonian(&cfg, &DrivePulse { duration: t, ..p }, (Axis::X, Axis::Z), Frame::FullLabInteraction(opts)).unwrap();
        let s = TwoModeState::fock(0, 1, dims(4, 5)).unwrap();
        let r = evolve_unitary(&s, &h, (0.0, t), &Tolerance::default().with_samples(5)).unwrap().ok().unwrap();
        for m in &r.mean_n {
            assert!((m[1] - 1.0).abs() < 0.05, "{m:?}");
        }
    }

    #[test]
    fn moments_of_vacuum_give_half() {
        let m = moments(&TwoModeState::vacuum(dims(3, 3))).unwrap();
        assert!((squeezing_witness(&m) - 0.5).abs() < 1e-15);
    }
}
