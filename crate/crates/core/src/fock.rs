//! Truncated Fock-space linear algebra for one or two motional modes.
//!
//! Basis convention for two modes: `|n_i⟩ ⊗ |n_j⟩` lives at flat index
//! `n_i * d_j + n_j` (mode `i` varies slowest). Every module uses this
//! ordering; [`TwoModeDims::index`] and [`TwoModeDims::split`] are the only
//! places that encode it.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Norm tolerance for pure states.
pub const NORM_TOL: f64 = 1e-9;
/// Hermiticity tolerance for density matrices.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Most negative eigenvalue tolerated in a density matrix.
pub const POSITIVITY_TOL: f64 = 1e-9;

/// Number of Fock levels kept for one mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeDim(usize);

impl ModeDim {
    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff < 2 {
            return Err(Error::invalid("cutoff", format!("must be at least 2, got {cutoff}")));
        }
        Ok(ModeDim(cutoff))
    }

    #[inline]
    pub fn cutoff(self) -> usize {
        self.0
    }
}

/// Which of the two simulated modes an operation targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModeSlot {
    I,
    J,
}

impl ModeSlot {
    pub fn other(self) -> Self {
        match self {
            ModeSlot::I => ModeSlot::J,
            ModeSlot::J => ModeSlot::I,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TwoModeDims {
    pub i: ModeDim,
    pub j: ModeDim,
}

impl TwoModeDims {
    pub fn new(cutoff_i: usize, cutoff_j: usize) -> Result<Self> {
        Ok(TwoModeDims { i: ModeDim::new(cutoff_i)?, j: ModeDim::new(cutoff_j)? })
    }

    #[inline]
    pub fn total(&self) -> usize {
        self.i.0 * self.j.0
    }

    #[inline]
    pub fn index(&self, n_i: usize, n_j: usize) -> usize {
        n_i * self.j.0 + n_j
    }

    #[inline]
    pub fn split(&self, index: usize) -> (usize, usize) {
        (index / self.j.0, index % self.j.0)
    }

    pub fn of(&self, slot: ModeSlot) -> ModeDim {
        match slot {
            ModeSlot::I => self.i,
            ModeSlot::J => self.j,
        }
    }
}

/// Upper bound on the number of complex elements a single state may hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MemoryBudget {
    pub max_elements: usize,
}

impl Default for MemoryBudget {
    /// 2^25 complex elements, i.e. 512 MiB.
    fn default() -> Self {
        MemoryBudget { max_elements: 1 << 25 }
    }
}

impl MemoryBudget {
    pub fn check_vector(&self, dim: usize) -> Result<()> {
        if dim > self.max_elements {
            return Err(Error::MemoryBudget { dim, budget: self.max_elements });
        }
        Ok(())
    }

    pub fn check_matrix(&self, dim: usize) -> Result<()> {
        match dim.checked_mul(dim) {
            Some(n) if n <= self.max_elements => Ok(()),
            _ => Err(Error::MemoryBudget { dim, budget: self.max_elements }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorLabel {
    Annihilate,
    Create,
    Number,
    Identity,
    Custom,
}

/// Dense single-mode operator.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeOperator {
    matrix: DMatrix<C64>,
    label: OperatorLabel,
}

impl ModeOperator {
    /// `a` with `⟨n-1|a|n⟩ = √n`.
    pub fn annihilate(dim: ModeDim) -> Self {
        let d = dim.cutoff();
        let matrix = DMatrix::from_fn(d, d, |r, c| {
            if c == r + 1 {
                C64::new((c as f64).sqrt(), 0.0)
            } else {
                ZERO
            }
        });
        ModeOperator { matrix, label: OperatorLabel::Annihilate }
    }

    pub fn create(dim: ModeDim) -> Self {
        let mut op = Self::annihilate(dim).dagger();
        op.label = OperatorLabel::Create;
        op
    }

    pub fn number(dim: ModeDim) -> Self {
        let d = dim.cutoff();
        let matrix = DMatrix::from_fn(d, d, |r, c| if r == c { C64::new(r as f64, 0.0) } else { ZERO });
        ModeOperator { matrix, label: OperatorLabel::Number }
    }

    pub fn identity(dim: ModeDim) -> Self {
        let d = dim.cutoff();
        ModeOperator { matrix: DMatrix::identity(d, d), label: OperatorLabel::Identity }
    }

    pub fn custom(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        ModeDim::new(matrix.nrows())?;
        Ok(ModeOperator { matrix, label: OperatorLabel::Custom })
    }

    pub fn dagger(&self) -> Self {
        let label = match self.label {
            OperatorLabel::Annihilate => OperatorLabel::Create,
            OperatorLabel::Create => OperatorLabel::Annihilate,
            other => other,
        };
        ModeOperator { matrix: self.matrix.adjoint(), label }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn label(&self) -> OperatorLabel {
        self.label
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Operator product `self · rhs`, labelled custom.
    pub fn compose(&self, rhs: &ModeOperator) -> Result<ModeOperator> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: rhs.dim() });
        }
        Ok(ModeOperator { matrix: &self.matrix * &rhs.matrix, label: OperatorLabel::Custom })
    }
}

/// Compressed-row sparse operator on a flat basis.
///
/// Ladder-operator monomials on two modes have at most one entry per row,
/// so the joint operators built from them stay `O(d)` in storage and in
/// application cost even when `d = d_i·d_j` runs into the thousands.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<C64>,
}

impl SparseOperator {
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col = Vec::with_capacity(triplets.len());
        let mut val: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *val.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            row_ptr[r + 1] += 1;
            col.push(c);
            val.push(v);
            last = Some((r, c));
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut op = SparseOperator { dim, row_ptr, col, val };
        op.prune_zeros();
        op
    }

    fn prune_zeros(&mut self) {
        if self.val.iter().all(|v| *v != ZERO) {
            return;
        }
        let mut trip = Vec::with_capacity(self.val.len());
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.val[k] != ZERO {
                    trip.push((r, self.col[k], self.val[k]));
                }
            }
        }
        let mut row_ptr = vec![0usize; self.dim + 1];
        for &(r, _, _) in &trip {
            row_ptr[r + 1] += 1;
        }
        for r in 0..self.dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        self.col = trip.iter().map(|t| t.1).collect();
        self.val = trip.iter().map(|t| t.2).collect();
        self.row_ptr = row_ptr;
    }

    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        let mut trip = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)] != ZERO {
                    trip.push((r, c, m[(r, c)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), trip)
    }

    /// `a ⊗ b` in the mode-`i`-slowest convention.
    pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> Self {
        let (da, db) = (a.nrows(), b.nrows());
        let nz = |m: &DMatrix<C64>| {
            let mut v = Vec::new();
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    if m[(r, c)] != ZERO {
                        v.push((r, c, m[(r, c)]));
                    }
                }
            }
            v
        };
        let (na, nb) = (nz(a), nz(b));
        let mut trip = Vec::with_capacity(na.len() * nb.len());
        for &(ra, ca, va) in &na {
            for &(rb, cb, vb) in &nb {
                trip.push((ra * db + rb, ca * db + cb, va * vb));
            }
        }
        Self::from_triplets(da * db, trip)
    }

    /// Embeds a single-mode operator acting on `slot` into the joint space.
    pub fn on_mode(op: &ModeOperator, slot: ModeSlot, dims: TwoModeDims) -> Result<Self> {
        let expected = dims.of(slot).cutoff();
        if op.dim() != expected {
            return Err(Error::DimensionMismatch { expected, found: op.dim() });
        }
        Ok(match slot {
            ModeSlot::I => Self::kron(op.matrix(), &DMatrix::identity(dims.j.cutoff(), dims.j.cutoff())),
            ModeSlot::J => Self::kron(&DMatrix::identity(dims.i.cutoff(), dims.i.cutoff()), op.matrix()),
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(dim, (0..dim).map(|k| (k, k, ONE)).collect())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col[k], self.val[k])))
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect())
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.val.iter_mut().for_each(|v| *v *= s);
        out.prune_zeros();
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        Ok(Self::from_triplets(self.dim, self.triplets().chain(other.triplets()).collect()))
    }

    /// Sparse product `self · rhs`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.dim != rhs.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: rhs.dim });
        }
        let mut trip = Vec::new();
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let mid = self.col[k];
                for m in rhs.row_ptr[mid]..rhs.row_ptr[mid + 1] {
                    trip.push((r, rhs.col[m], self.val[k] * rhs.val[m]));
                }
            }
        }
        Ok(Self::from_triplets(self.dim, trip))
    }

    /// `y += s · A x`.
    #[inline]
    pub fn mul_vec_add(&self, s: C64, x: &[C64], y: &mut [C64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.dim) {
            let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
            if a == b {
                continue;
            }
            let mut acc = ZERO;
            for k in a..b {
                acc += self.val[k] * x[self.col[k]];
            }
            *yr += s * acc;
        }
    }

    pub fn mul_vec(&self, x: &DVector<C64>) -> DVector<C64> {
        let mut y = DVector::zeros(self.dim);
        self.mul_vec_add(ONE, x.as_slice(), y.as_mut_slice());
        y
    }

    /// `out += s · A ρ` for a dense column-major `ρ`.
    pub fn mul_dense_add(&self, s: C64, rho: &DMatrix<C64>, out: &mut DMatrix<C64>) {
        for c in 0..rho.ncols() {
            let x = rho.column(c);
            let xs = x.as_slice();
            let mut y = out.column_mut(c);
            self.mul_vec_add(s, xs, y.as_mut_slice());
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    /// Bound on the spectral norm: `sqrt(‖A‖₁ ‖A‖∞)`.
    pub fn norm_bound(&self) -> f64 {
        let mut row_max: f64 = 0.0;
        let mut col_sum = vec![0.0; self.dim];
        for r in 0..self.dim {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let a = self.val[k].norm();
                s += a;
                col_sum[self.col[k]] += a;
            }
            row_max = row_max.max(s);
        }
        let col_max = col_sum.into_iter().fold(0.0, f64::max);
        (row_max * col_max).sqrt()
    }

    pub fn hermitian_deviation(&self) -> f64 {
        let d = self.to_dense();
        (&d - d.adjoint()).iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Column indices reachable from `row` in one application.
    pub fn row_columns(&self, row: usize) -> &[usize] {
        &self.col[self.row_ptr[row]..self.row_ptr[row + 1]]
    }

    /// Restriction onto the basis subset `subspace` (sorted, ascending).
    /// Entries leaving the subset are dropped; callers are responsible for
    /// choosing a subset that is invariant under the operator.
    pub fn restrict(&self, subspace: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.dim];
        for (k, &s) in subspace.iter().enumerate() {
            map[s] = k;
        }
        let mut trip = Vec::new();
        for (k, &r) in subspace.iter().enumerate() {
            for m in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = map[self.col[m]];
                if c != usize::MAX {
                    trip.push((k, c, self.val[m]));
                }
            }
        }
        Self::from_triplets(subspace.len(), trip)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum SingleRepr {
    Pure(DVector<C64>),
    Mixed(DMatrix<C64>),
}

/// Single-mode state, pure or mixed.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeState {
    dim: ModeDim,
    repr: SingleRepr,
}

impl ModeState {
    pub fn fock(n: usize, dim: ModeDim) -> Result<Self> {
        if n >= dim.cutoff() {
            return Err(Error::invalid("n", format!("Fock level {n} outside cutoff {}", dim.cutoff())));
        }
        let mut v = DVector::zeros(dim.cutoff());
        v[n] = ONE;
        Ok(ModeState { dim, repr: SingleRepr::Pure(v) })
    }

    pub fn vacuum(dim: ModeDim) -> Self {
        Self::fock(0, dim).expect("cutoff >= 2")
    }

    pub fn from_amplitudes(amplitudes: DVector<C64>) -> Result<Self> {
        let dim = ModeDim::new(amplitudes.len())?;
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::invalid("amplitudes", format!("norm {norm} is not 1")));
        }
        Ok(ModeState { dim, repr: SingleRepr::Pure(amplitudes) })
    }

    /// Mixed state from a density matrix, validated for unit trace,
    /// Hermiticity and positivity.
    pub fn from_density(rho: DMatrix<C64>) -> Result<Self> {
        if rho.nrows() != rho.ncols() {
            return Err(Error::DimensionMismatch { expected: rho.nrows(), found: rho.ncols() });
        }
        let dim = ModeDim::new(rho.nrows())?;
        check_density(&rho)?;
        Ok(ModeState { dim, repr: SingleRepr::Mixed(rho) })
    }

    pub(crate) fn from_density_unchecked(rho: DMatrix<C64>) -> Self {
        let dim = ModeDim(rho.nrows());
        ModeState { dim, repr: SingleRepr::Mixed(rho) }
    }

    /// Diagonal state with the given populations (must sum to 1).
    pub fn from_populations(p: &[f64]) -> Result<Self> {
        let dim = ModeDim::new(p.len())?;
        if p.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::invalid("populations", "must be finite and non-negative"));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > NORM_TOL {
            return Err(Error::invalid("populations", format!("sum {s} is not 1")));
        }
        let rho = DMatrix::from_diagonal(&DVector::from_iterator(p.len(), p.iter().map(|&x| C64::new(x, 0.0))));
        Ok(ModeState { dim, repr: SingleRepr::Mixed(rho) })
    }

    pub fn dim(&self) -> ModeDim {
        self.dim
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.repr, SingleRepr::Pure(_))
    }

    pub fn amplitudes(&self) -> Option<&DVector<C64>> {
        match &self.repr {
            SingleRepr::Pure(v) => Some(v),
            SingleRepr::Mixed(_) => None,
        }
    }

    pub fn density(&self) -> DMatrix<C64> {
        match &self.repr {
            SingleRepr::Pure(v) => v * v.adjoint(),
            SingleRepr::Mixed(m) => m.clone(),
        }
    }

    pub fn populations(&self) -> Vec<f64> {
        match &self.repr {
            SingleRepr::Pure(v) => v.iter().map(|c| c.norm_sqr()).collect(),
            SingleRepr::Mixed(m) => (0..m.nrows()).map(|k| m[(k, k)].re).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        self.populations().iter().sum()
    }

    pub fn mean_n(&self) -> f64 {
        self.populations().iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn expect(&self, op: &ModeOperator) -> Result<C64> {
        if op.dim() != self.dim.cutoff() {
            return Err(Error::DimensionMismatch { expected: self.dim.cutoff(), found: op.dim() });
        }
        Ok(match &self.repr {
            SingleRepr::Pure(v) => v.dotc(&(op.matrix() * v)),
            SingleRepr::Mixed(m) => (m * op.matrix()).trace(),
        })
    }

    /// Eigen-decomposition into weighted pure components.
    pub fn components(&self) -> Vec<(f64, DVector<C64>)> {
        match &self.repr {
            SingleRepr::Pure(v) => vec![(1.0, v.clone())],
            SingleRepr::Mixed(m) => hermitian_components(m),
        }
    }

    /// Returns the same state with the cutoff changed. Growing pads with
    /// empty levels; shrinking fails if discarded levels carry more than
    /// `tol` population.
    pub fn resized(&self, dim: ModeDim, tol: f64) -> Result<ModeState> {
        let (old, new) = (self.dim.cutoff(), dim.cutoff());
        let lost: f64 = self.populations().iter().skip(new).sum();
        if lost > tol {
            return Err(Error::TruncationInsufficient(format!(
                "resizing to cutoff {new} discards population {lost:e}"
            )));
        }
        let keep = old.min(new);
        let repr = match &self.repr {
            SingleRepr::Pure(v) => {
                let mut w = DVector::zeros(new);
                w.rows_mut(0, keep).copy_from(&v.rows(0, keep));
                let n = w.norm();
                SingleRepr::Pure(w / C64::new(n, 0.0))
            }
            SingleRepr::Mixed(m) => {
                let mut w = DMatrix::zeros(new, new);
                w.view_mut((0, 0), (keep, keep)).copy_from(&m.view((0, 0), (keep, keep)));
                let t = w.trace().re;
                SingleRepr::Mixed(w / C64::new(t, 0.0))
            }
        };
        Ok(ModeState { dim, repr })
    }

    pub fn validate(&self) -> Result<()> {
        match &self.repr {
            SingleRepr::Pure(v) => {
                let n = v.norm();
                if (n - 1.0).abs() > NORM_TOL {
                    return Err(Error::Numerical(format!("state norm {n} deviates from 1")));
                }
                Ok(())
            }
            SingleRepr::Mixed(m) => check_density(m),
        }
    }
}

/// Thermal state `p_n = n̄ⁿ/(n̄+1)^{n+1}`, renormalised on the truncated
/// basis. Fails when truncation shifts `⟨n⟩` by more than 1 %.
pub fn make_thermal(n_bar: f64, dim: ModeDim) -> Result<ModeState> {
    if !(n_bar >= 0.0) || !n_bar.is_finite() {
        return Err(Error::invalid("n_bar", format!("must be finite and >= 0, got {n_bar}")));
    }
    let d = dim.cutoff();
    let ratio = n_bar / (n_bar + 1.0);
    let mut p = Vec::with_capacity(d);
    let mut term = 1.0 / (n_bar + 1.0);
    for _ in 0..d {
        p.push(term);
        term *= ratio;
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    let mean: f64 = p.iter().enumerate().map(|(n, x)| n as f64 * x).sum();
    if n_bar > 0.0 && (mean - n_bar).abs() > 0.01 * n_bar {
        return Err(Error::TruncationInsufficient(format!(
            "thermal n̄ = {n_bar} at cutoff {d} has truncated mean {mean:.4}"
        )));
    }
    ModeState::from_populations(&p)
}

/// Smallest cutoff for which [`make_thermal`] meets `tail` on the
/// population of the top retained level.
pub fn thermal_cutoff(n_bar: f64, tail: f64) -> usize {
    if n_bar <= 0.0 {
        return 2;
    }
    let r = n_bar / (n_bar + 1.0);
    let n = ((tail * (n_bar + 1.0)).ln() / r.ln()).ceil();
    (n as usize + 1).max(2)
}

/// One weighted pure component of an ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct Member {
    pub weight: f64,
    pub amplitudes: DVector<C64>,
}

#[derive(Clone, Debug, PartialEq)]
enum Repr {
    Pure(DVector<C64>),
    Mixed(DMatrix<C64>),
    /// Factorised `ρ_i ⊗ ρ_j`, expanded only when a joint operation needs it.
    Product(ModeState, ModeState),
    /// `ρ = Σ_k w_k |ψ_k⟩⟨ψ_k|`.
    Ensemble(Vec<Member>),
}

/// State of the two simulated modes.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoModeState {
    dims: TwoModeDims,
    repr: Repr,
}

/// Operator argument for [`TwoModeState::expect`].
#[derive(Clone, Copy, Debug)]
pub enum Observable<'a> {
    Mode(ModeSlot, &'a ModeOperator),
    Joint(&'a SparseOperator),
}

impl TwoModeState {
    pub fn vacuum(dims: TwoModeDims) -> Self {
        let mut v = DVector::zeros(dims.total());
        v[0] = ONE;
        TwoModeState { dims, repr: Repr::Pure(v) }
    }

    pub fn fock(n_i: usize, n_j: usize, dims: TwoModeDims) -> Result<Self> {
        if n_i >= dims.i.cutoff() || n_j >= dims.j.cutoff() {
            return Err(Error::invalid("fock", format!("|{n_i},{n_j}⟩ outside cutoffs")));
        }
        let mut v = DVector::zeros(dims.total());
        v[dims.index(n_i, n_j)] = ONE;
        Ok(TwoModeState { dims, repr: Repr::Pure(v) })
    }

    pub fn from_amplitudes(dims: TwoModeDims, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != dims.total() {
            return Err(Error::DimensionMismatch { expected: dims.total(), found: amplitudes.len() });
        }
        let s = TwoModeState { dims, repr: Repr::Pure(amplitudes) };
        s.validate()?;
        Ok(s)
    }

    pub fn from_density(dims: TwoModeDims, rho: DMatrix<C64>) -> Result<Self> {
        if rho.nrows() != dims.total() || rho.ncols() != dims.total() {
            return Err(Error::DimensionMismatch { expected: dims.total(), found: rho.nrows() });
        }
        check_density(&rho)?;
        Ok(TwoModeState { dims, repr: Repr::Mixed(rho) })
    }

    /// Ensemble state; weights are renormalised to sum to one.
    pub fn from_members(dims: TwoModeDims, mut members: Vec<Member>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::invalid("members", "ensemble is empty"));
        }
        let total: f64 = members.iter().map(|m| m.weight).sum();
        if !(total > 0.0) {
            return Err(Error::invalid("members", "total weight must be positive"));
        }
        for m in &mut members {
            if m.amplitudes.len() != dims.total() {
                return Err(Error::DimensionMismatch { expected: dims.total(), found: m.amplitudes.len() });
            }
            m.weight /= total;
        }
        Ok(TwoModeState { dims, repr: Repr::Ensemble(members) })
    }

    pub(crate) fn from_density_unchecked(dims: TwoModeDims, rho: DMatrix<C64>) -> Self {
        TwoModeState { dims, repr: Repr::Mixed(rho) }
    }

    /// Collapses a single-member ensemble to a pure state.
    pub(crate) fn into_pure_if_single(self) -> Self {
        match self.repr {
            Repr::Ensemble(mut ms) if ms.len() == 1 => {
                TwoModeState { dims: self.dims, repr: Repr::Pure(ms.pop().expect("one member").amplitudes) }
            }
            repr => TwoModeState { dims: self.dims, repr },
        }
    }

    pub fn dims(&self) -> TwoModeDims {
        self.dims
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.repr, Repr::Pure(_))
    }

    pub fn amplitudes(&self) -> Option<&DVector<C64>> {
        match &self.repr {
            Repr::Pure(v) => Some(v),
            _ => None,
        }
    }

    /// Factors of a product state, if stored factorised.
    pub fn factors(&self) -> Option<(&ModeState, &ModeState)> {
        match &self.repr {
            Repr::Product(a, b) => Some((a, b)),
            _ => None,
        }
    }

    /// Trace of the density matrix (squared norm for pure states).
    pub fn trace(&self) -> f64 {
        match &self.repr {
            Repr::Pure(v) => v.norm_squared(),
            Repr::Mixed(m) => m.trace().re,
            Repr::Product(a, b) => a.trace() * b.trace(),
            Repr::Ensemble(ms) => ms.iter().map(|m| m.weight * m.amplitudes.norm_squared()).sum(),
        }
    }

    /// Dense density matrix; subject to `budget`.
    pub fn to_density(&self, budget: MemoryBudget) -> Result<DMatrix<C64>> {
        let d = self.dims.total();
        budget.check_matrix(d)?;
        Ok(match &self.repr {
            Repr::Pure(v) => v * v.adjoint(),
            Repr::Mixed(m) => m.clone(),
            Repr::Product(a, b) => a.density().kronecker(&b.density()),
            Repr::Ensemble(ms) => {
                let mut rho = DMatrix::zeros(d, d);
                for m in ms {
                    rho.ger(C64::new(m.weight, 0.0), &m.amplitudes, &m.amplitudes, ONE);
                }
                rho
            }
        })
    }

    /// Converts to the dense mixed representation.
    pub fn into_mixed(self, budget: MemoryBudget) -> Result<Self> {
        let rho = self.to_density(budget)?;
        Ok(TwoModeState { dims: self.dims, repr: Repr::Mixed(rho) })
    }

    /// Decomposes the state into weighted pure components, largest weight
    /// first, discarding the smallest components whose combined weight is
    /// at most `discard` (remaining weights are renormalised).
    pub fn members(&self, discard: f64) -> Vec<Member> {
        let mut all: Vec<Member> = match &self.repr {
            Repr::Pure(v) => vec![Member { weight: 1.0, amplitudes: v.clone() }],
            Repr::Ensemble(ms) => ms.clone(),
            Repr::Mixed(m) => hermitian_components(m)
                .into_iter()
                .map(|(w, v)| Member { weight: w, amplitudes: v })
                .collect(),
            Repr::Product(a, b) => {
                let ca = a.components();
                let cb = b.components();
                let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(ca.len() * cb.len());
                for (x, (wa, _)) in ca.iter().enumerate() {
                    for (y, (wb, _)) in cb.iter().enumerate() {
                        let w = wa * wb;
                        if w > 0.0 {
                            pairs.push((w, x, y));
                        }
                    }
                }
                pairs.sort_by(|p, q| q.0.total_cmp(&p.0));
                let cut = keep_count(pairs.iter().map(|p| p.0), discard);
                pairs.truncate(cut);
                pairs
                    .into_iter()
                    .map(|(w, x, y)| Member { weight: w, amplitudes: ca[x].1.kronecker(&cb[y].1) })
                    .collect()
            }
        };
        all.retain(|m| m.weight > 0.0);
        all.sort_by(|p, q| q.weight.total_cmp(&p.weight));
        let cut = keep_count(all.iter().map(|m| m.weight), discard);
        all.truncate(cut.max(1));
        let total: f64 = all.iter().map(|m| m.weight).sum();
        all.iter_mut().for_each(|m| m.weight /= total);
        all
    }

    pub fn expect(&self, obs: Observable<'_>) -> Result<C64> {
        match obs {
            Observable::Mode(slot, op) => {
                let expected = self.dims.of(slot).cutoff();
                if op.dim() != expected {
                    return Err(Error::DimensionMismatch { expected, found: op.dim() });
                }
                if let Repr::Product(a, b) = &self.repr {
                    return match slot {
                        ModeSlot::I => a.expect(op),
                        ModeSlot::J => b.expect(op),
                    };
                }
                self.partial_trace(slot)?.expect(op)
            }
            Observable::Joint(op) => {
                let d = self.dims.total();
                if op.dim() != d {
                    return Err(Error::DimensionMismatch { expected: d, found: op.dim() });
                }
                let pure = |v: &DVector<C64>| v.dotc(&op.mul_vec(v));
                Ok(match &self.repr {
                    Repr::Pure(v) => pure(v),
                    Repr::Ensemble(ms) => ms.iter().map(|m| C64::new(m.weight, 0.0) * pure(&m.amplitudes)).sum(),
                    Repr::Mixed(rho) => {
                        let mut s = ZERO;
                        for (r, c, v) in op.triplets() {
                            s += v * rho[(c, r)];
                        }
                        s
                    }
                    Repr::Product(a, b) => {
                        let (da, db) = (a.dim().cutoff(), b.dim().cutoff());
                        let (ra, rb) = (a.density(), b.density());
                        let mut s = ZERO;
                        for (r, c, v) in op.triplets() {
                            let (r1, r2) = (r / db, r % db);
                            let (c1, c2) = (c / db, c % db);
                            debug_assert!(r1 < da && c1 < da);
                            s += v * ra[(c1, r1)] * rb[(c2, r2)];
                        }
                        s
                    }
                })
            }
        }
    }

    /// Real part of a Hermitian expectation value; fails if the imaginary
    /// part exceeds 1e-9.
    pub fn expect_real(&self, obs: Observable<'_>) -> Result<f64> {
        let v = self.expect(obs)?;
        if v.im.abs() > 1e-9 * v.re.abs().max(1.0) {
            return Err(Error::Numerical(format!("expectation value has imaginary part {:e}", v.im)));
        }
        Ok(v.re)
    }

    pub fn mean_n(&self, slot: ModeSlot) -> f64 {
        self.marginal_populations(slot).iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// Diagonal of the reduced density matrix of `slot`.
    pub fn marginal_populations(&self, slot: ModeSlot) -> Vec<f64> {
        let (di, dj) = (self.dims.i.cutoff(), self.dims.j.cutoff());
        let size = self.dims.of(slot).cutoff();
        let mut p = vec![0.0; size];
        let mut add_vec = |v: &DVector<C64>, w: f64| {
            for (k, c) in v.iter().enumerate() {
                let a = c.norm_sqr();
                if a != 0.0 {
                    let n = match slot {
                        ModeSlot::I => k / dj,
                        ModeSlot::J => k % dj,
                    };
                    p[n] += w * a;
                }
            }
        };
        match &self.repr {
            Repr::Pure(v) => add_vec(v, 1.0),
            Repr::Ensemble(ms) => ms.iter().for_each(|m| add_vec(&m.amplitudes, m.weight)),
            Repr::Product(a, b) => {
                return match slot {
                    ModeSlot::I => a.populations(),
                    ModeSlot::J => b.populations(),
                }
            }
            Repr::Mixed(rho) => {
                for k in 0..di * dj {
                    let n = match slot {
                        ModeSlot::I => k / dj,
                        ModeSlot::J => k % dj,
                    };
                    p[n] += rho[(k, k)].re;
                }
            }
        }
        p
    }

    /// Reduced density matrix of the mode `keep`.
    pub fn partial_trace(&self, keep: ModeSlot) -> Result<ModeState> {
        let (di, dj) = (self.dims.i.cutoff(), self.dims.j.cutoff());
        let dk = self.dims.of(keep).cutoff();
        let mut out = DMatrix::<C64>::zeros(dk, dk);
        // Accumulates w·ψψ† traced over the other mode, touching only the
        // non-zero amplitudes.
        let mut add_vec = |v: &DVector<C64>, w: f64| {
            let other = match keep {
                ModeSlot::I => dj,
                ModeSlot::J => di,
            };
            let mut groups: Vec<Vec<(usize, C64)>> = vec![Vec::new(); other];
            for (k, c) in v.iter().enumerate() {
                if *c != ZERO {
                    let (a, b) = (k / dj, k % dj);
                    match keep {
                        ModeSlot::I => groups[b].push((a, *c)),
                        ModeSlot::J => groups[a].push((b, *c)),
                    }
                }
            }
            let w = C64::new(w, 0.0);
            for g in &groups {
                for &(r, x) in g {
                    for &(c, y) in g {
                        out[(r, c)] += w * x * y.conj();
                    }
                }
            }
        };
        match &self.repr {
            Repr::Pure(v) => add_vec(v, 1.0),
            Repr::Ensemble(ms) => ms.iter().for_each(|m| add_vec(&m.amplitudes, m.weight)),
            Repr::Product(a, b) => {
                let (keep_state, other) = match keep {
                    ModeSlot::I => (a, b),
                    ModeSlot::J => (b, a),
                };
                let t = other.trace();
                return Ok(ModeState::from_density_unchecked(keep_state.density() * C64::new(t, 0.0)));
            }
            Repr::Mixed(rho) => {
                for r in 0..dk {
                    for c in 0..dk {
                        let mut s = ZERO;
                        match keep {
                            ModeSlot::I => {
                                for b in 0..dj {
                                    s += rho[(r * dj + b, c * dj + b)];
                                }
                            }
                            ModeSlot::J => {
                                for a in 0..di {
                                    s += rho[(a * dj + r, a * dj + c)];
                                }
                            }
                        }
                        out[(r, c)] = s;
                    }
                }
            }
        }
        Ok(ModeState::from_density_unchecked(out))
    }

    /// Checks the representation invariants: unit norm for pure states,
    /// unit trace, Hermiticity and positivity for dense mixed states.
    pub fn validate(&self) -> Result<()> {
        match &self.repr {
            Repr::Pure(v) => {
                let n = v.norm();
                if (n - 1.0).abs() > NORM_TOL {
                    return Err(Error::Numerical(format!("state norm {n} deviates from 1")));
                }
                Ok(())
            }
            Repr::Mixed(m) => check_density(m),
            Repr::Product(a, b) => a.validate().and(b.validate()),
            Repr::Ensemble(ms) => {
                let w: f64 = ms.iter().map(|m| m.weight).sum();
                if (w - 1.0).abs() > NORM_TOL || ms.iter().any(|m| m.weight < 0.0) {
                    return Err(Error::Numerical(format!("ensemble weights sum to {w}")));
                }
                for m in ms {
                    let n = m.amplitudes.norm();
                    if (n - 1.0).abs() > NORM_TOL {
                        return Err(Error::Numerical(format!("ensemble member norm {n} deviates from 1")));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Kronecker product of two single-mode states. Pure ⊗ pure stays pure;
/// anything involving a mixed factor is a mixed state kept in factorised
/// form until a joint operation needs the dense matrix.
pub fn tensor(state_i: &ModeState, state_j: &ModeState, budget: MemoryBudget) -> Result<TwoModeState> {
    let dims = TwoModeDims { i: state_i.dim(), j: state_j.dim() };
    budget.check_vector(dims.total())?;
    let repr = match (state_i.amplitudes(), state_j.amplitudes()) {
        (Some(a), Some(b)) => Repr::Pure(a.kronecker(b)),
        _ => Repr::Product(state_i.clone(), state_j.clone()),
    };
    Ok(TwoModeState { dims, repr })
}

/// Count of leading weights to keep so that the dropped tail sums to at
/// most `discard`.
fn keep_count(sorted_desc: impl DoubleEndedIterator<Item = f64> + ExactSizeIterator, discard: f64) -> usize {
    let n = sorted_desc.len();
    let mut tail = 0.0;
    let mut keep = n;
    for w in sorted_desc.rev() {
        if tail + w > discard {
            break;
        }
        tail += w;
        keep -= 1;
    }
    keep
}

fn hermitian_components(m: &DMatrix<C64>) -> Vec<(f64, DVector<C64>)> {
    let d = m.nrows();
    let diagonal = (0..d).all(|r| (0..d).all(|c| r == c || m[(r, c)] == ZERO));
    if diagonal {
        return (0..d)
            .filter(|&k| m[(k, k)].re > 0.0)
            .map(|k| {
                let mut v = DVector::zeros(d);
                v[k] = ONE;
                (m[(k, k)].re, v)
            })
            .collect();
    }
    let eig = m.clone().symmetric_eigen();
    (0..d)
        .filter(|&k| eig.eigenvalues[k] > 0.0)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned()))
        .collect()
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &DMatrix<C64>) -> f64 {
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn hermitian_deviation(m: &DMatrix<C64>) -> f64 {
    (m - m.adjoint()).iter().fold(0.0, |acc, v| acc.max(v.norm()))
}

fn check_density(m: &DMatrix<C64>) -> Result<()> {
    let tr = m.trace();
    if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
        return Err(Error::Numerical(format!("density matrix trace {tr} is not 1")));
    }
    let dev = hermitian_deviation(m);
    if dev > HERMITIAN_TOL {
        return Err(Error::NonHermitian { deviation: dev });
    }
    let lo = min_eigenvalue(m);
    if lo < -POSITIVITY_TOL {
        return Err(Error::Numerical(format!("density matrix has eigenvalue {lo:e}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dim(n: usize) -> ModeDim {
        ModeDim::new(n).unwrap()
    }

    #[test]
    fn cutoff_below_two_is_rejected() {
        assert!(ModeDim::new(1).is_err());
        assert!(ModeDim::new(2).is_ok());
    }

    #[test]
    fn ladder_matrix_elements() {
        let a = ModeOperator::annihilate(dim(6));
        for n in 1..6 {
            assert_eq!(a.matrix()[(n - 1, n)], C64::new((n as f64).sqrt(), 0.0));
        }
        let ad = ModeOperator::create(dim(6));
        assert_eq!(ad.label(), OperatorLabel::Create);
        assert_eq!(ad.matrix()[(3, 2)], C64::new(3f64.sqrt(), 0.0));
    }

    #[test]
    fn commutator_is_identity_below_top_level() {
        let d = dim(12);
        let a = ModeOperator::annihilate(d);
        let ad = ModeOperator::create(d);
        let comm = a.matrix() * ad.matrix() - ad.matrix() * a.matrix();
        for r in 0..11 {
            for c in 0..11 {
                let want = if r == c { ONE } else { ZERO };
                // a a† and a† a are products of square roots; where both
                // roots are integers the result is exact
                let exact = [r, r + 1].iter().all(|&k| {
                    let s = (k as f64).sqrt() as usize;
                    s * s == k
                });
                if exact {
                    assert_eq!(comm[(r, c)], want, "entry ({r},{c})");
                } else {
                    assert!((comm[(r, c)] - want).norm() < 1e-14, "entry ({r},{c})");
                }
            }
        }
        // the top level carries the truncation artefact -(d-1)
        assert!((comm[(11, 11)] - C64::new(-11.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn thermal_zero_is_ground_state() {
        let s = make_thermal(0.0, dim(5)).unwrap();
        assert_eq!(s.populations(), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn thermal_six_at_cutoff_eighty() {
        let s = make_thermal(6.0, dim(80)).unwrap();
        assert!((s.mean_n() - 6.0).abs() <= 0.06, "⟨n⟩ = {}", s.mean_n());
    }

    #[test]
    fn thermal_ground_population() {
        let s = make_thermal(0.2, dim(20)).unwrap();
        // p0 = 1/(n̄+1), computed directly
        assert_relative_eq!(s.populations()[0], 1.0 / 1.2, max_relative = 1e-12);
    }

    #[test]
    fn thermal_truncation_is_a_hard_error() {
        assert!(matches!(make_thermal(6.0, dim(10)), Err(Error::TruncationInsufficient(_))));
        assert!(make_thermal(-0.1, dim(10)).is_err());
    }

    #[test]
    fn thermal_cutoff_rule_is_sufficient() {
        for &n in &[0.05, 0.2, 1.0, 6.0, 20.0] {
            let c = thermal_cutoff(n, 1e-6);
            assert!(make_thermal(n, dim(c)).is_ok(), "n̄ = {n}, cutoff {c}");
        }
    }

    #[test]
    fn vacuum_tensor_vacuum() {
        let v = ModeState::vacuum(dim(4));
        let s = tensor(&v, &v, MemoryBudget::default()).unwrap();
        assert!(s.is_pure());
        assert_relative_eq!(s.trace(), 1.0);
        assert_eq!(s.amplitudes().unwrap()[0], ONE);
    }

    #[test]
    fn fock_tensor_occupations() {
        let s = tensor(&ModeState::fock(1, dim(4)).unwrap(), &ModeState::vacuum(dim(3)), MemoryBudget::default()).unwrap();
        assert_relative_eq!(s.mean_n(ModeSlot::I), 1.0);
        assert_relative_eq!(s.mean_n(ModeSlot::J), 0.0);
        let n = ModeOperator::number(dim(4));
        assert_relative_eq!(s.expect_real(Observable::Mode(ModeSlot::I, &n)).unwrap(), 1.0);
    }

    #[test]
    fn tensor_respects_budget() {
        let v = ModeState::vacuum(dim(100));
        let budget = MemoryBudget { max_elements: 5000 };
        assert!(matches!(tensor(&v, &v, budget), Err(Error::MemoryBudget { .. })));
        let s = tensor(&make_thermal(1.0, dim(40)).unwrap(), &v, MemoryBudget { max_elements: 10_000 }).unwrap();
        assert!(matches!(s.to_density(MemoryBudget { max_elements: 10_000 }), Err(Error::MemoryBudget { .. })));
    }

    #[test]
    fn thermal_product_marginals() {
        let a = make_thermal(0.2, dim(20)).unwrap();
        let b = make_thermal(6.0, dim(80)).unwrap();
        let s = tensor(&a, &b, MemoryBudget::default()).unwrap();
        assert_relative_eq!(s.trace(), 1.0, epsilon = 1e-12);
        // marginals by direct summation over the joint distribution
        let (pa, pb) = (a.populations(), b.populations());
        let oracle_i: f64 = (0..20).map(|x| (0..80).map(|y| x as f64 * pa[x] * pb[y]).sum::<f64>()).sum();
        let oracle_j: f64 = (0..20).map(|x| (0..80).map(|y| y as f64 * pa[x] * pb[y]).sum::<f64>()).sum();
        assert_relative_eq!(s.mean_n(ModeSlot::I), oracle_i, epsilon = 1e-12);
        assert_relative_eq!(s.mean_n(ModeSlot::J), oracle_j, epsilon = 1e-12);
        assert!((oracle_i - 0.2).abs() < 0.002 && (oracle_j - 6.0).abs() < 0.06);
    }

    #[test]
    fn number_expectations() {
        let d = dim(10);
        let n = ModeOperator::number(d);
        assert_eq!(ModeState::vacuum(d).expect(&n).unwrap(), ZERO);
        assert_eq!(ModeState::fock(3, d).unwrap().expect(&n).unwrap().re, 3.0);
        let th = make_thermal(6.0, dim(80)).unwrap();
        let oracle: f64 = th.populations().iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        assert_relative_eq!(th.expect(&ModeOperator::number(dim(80))).unwrap().re, oracle, epsilon = 1e-12);
    }

    #[test]
    fn expect_rejects_wrong_dimension() {
        let s = TwoModeState::vacuum(TwoModeDims::new(3, 4).unwrap());
        let n = ModeOperator::number(dim(5));
        assert!(matches!(s.expect(Observable::Mode(ModeSlot::I, &n)), Err(Error::DimensionMismatch { .. })));
        let j = SparseOperator::identity(7);
        assert!(s.expect(Observable::Joint(&j)).is_err());
    }

    #[test]
    fn partial_trace_of_vacuum_times_thermal() {
        let s = tensor(&ModeState::vacuum(dim(5)), &make_thermal(6.0, dim(80)).unwrap(), MemoryBudget::default())
            .unwrap()
            .into_mixed(MemoryBudget::default())
            .unwrap();
        let r = s.partial_trace(ModeSlot::I).unwrap().density();
        assert_relative_eq!(r[(0, 0)].re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.iter().map(|v| v.norm()).sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn partial_trace_of_bell_state() {
        let dims = TwoModeDims::new(2, 2).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut v = DVector::zeros(4);
        v[dims.index(0, 1)] = C64::new(h, 0.0);
        v[dims.index(1, 0)] = C64::new(h, 0.0);
        let s = TwoModeState::from_amplitudes(dims, v).unwrap();
        let r = s.partial_trace(ModeSlot::I).unwrap().density();
        assert_relative_eq!(r[(0, 0)].re, 0.5, epsilon = 1e-15);
        assert_relative_eq!(r[(1, 1)].re, 0.5, epsilon = 1e-15);
        assert!(r[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn partial_trace_recovers_thermal_factor() {
        let a = make_thermal(0.2, dim(12)).unwrap();
        let b = make_thermal(6.0, dim(80)).unwrap();
        let rho = a.density().kronecker(&b.density());
        let s = TwoModeState::from_density(TwoModeDims { i: a.dim(), j: b.dim() }, rho).unwrap();
        let kept = s.partial_trace(ModeSlot::J).unwrap().density();
        let want = b.density();
        let err = (&kept - &want).iter().fold(0.0f64, |m, v| m.max(v.norm()));
        assert!(err < 1e-12, "max deviation {err:e}");
    }

    #[test]
    fn ensemble_and_dense_agree() {
        let a = make_thermal(0.5, dim(8)).unwrap();
        let b = make_thermal(1.0, dim(12)).unwrap();
        let prod = tensor(&a, &b, MemoryBudget::default()).unwrap();
        let ens = TwoModeState::from_members(prod.dims(), prod.members(0.0)).unwrap();
        let dense = prod.clone().into_mixed(MemoryBudget::default()).unwrap();
        for slot in [ModeSlot::I, ModeSlot::J] {
            let p = ens.partial_trace(slot).unwrap().density();
            let q = dense.partial_trace(slot).unwrap().density();
            assert!((&p - &q).iter().all(|v| v.norm() < 1e-13));
            assert_relative_eq!(ens.mean_n(slot), prod.mean_n(slot), epsilon = 1e-12);
        }
        let a_i = SparseOperator::on_mode(&ModeOperator::number(dim(8)), ModeSlot::I, prod.dims()).unwrap();
        let n1 = ens.expect(Observable::Joint(&a_i)).unwrap();
        let n2 = dense.expect(Observable::Joint(&a_i)).unwrap();
        let n3 = prod.expect(Observable::Joint(&a_i)).unwrap();
        assert!((n1 - n2).norm() < 1e-12 && (n1 - n3).norm() < 1e-12);
    }

    #[test]
    fn member_pruning_drops_only_the_tail() {
        let prod = tensor(&make_thermal(0.2, dim(20)).unwrap(), &make_thermal(6.0, dim(80)).unwrap(), MemoryBudget::default()).unwrap();
        let all = prod.members(0.0);
        let some = prod.members(1e-3);
        assert!(some.len() < all.len());
        let w: f64 = some.iter().map(|m| m.weight).sum();
        assert_relative_eq!(w, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sparse_kron_matches_dense() {
        let a = ModeOperator::create(dim(3));
        let b = ModeOperator::annihilate(dim(4));
        let s = SparseOperator::kron(a.matrix(), b.matrix());
        let d = a.matrix().kronecker(b.matrix());
        assert_eq!(s.to_dense(), d);
        assert_eq!(s.adjoint().to_dense(), d.adjoint());
        let prod = s.matmul(&s.adjoint()).unwrap().to_dense();
        let want = &d * d.adjoint();
        assert!((&prod - &want).iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn invalid_density_rejected() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![C64::new(1.2, 0.0), C64::new(-0.2, 0.0)]));
        assert!(ModeState::from_density(m).is_err());
    }

    #[test]
    fn resize_checks_population() {
        let s = make_thermal(1.0, dim(40)).unwrap();
        assert!(s.resized(dim(5), 1e-6).is_err());
        let bigger = s.resized(dim(60), 0.0).unwrap();
        assert_relative_eq!(bigger.mean_n(), s.mean_n(), epsilon = 1e-12);
    }
}
