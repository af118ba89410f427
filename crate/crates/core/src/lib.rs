//! Simulation of parametric coupling between the motional modes of a single
//! trapped ion.
//!
//! The crate is layered bottom-up:
//!
//! * [`fock`]: truncated two-mode Fock space, states and ladder operators.
//! * [`trap`]: trap and drive parameters mapped onto Hamiltonian
//!   coefficients (coupling rate, driven motion, frame selection).
//! * [`dynamics`]: closed (Magnus exponential) and open (Lindblad RK4)
//!   propagation, pulse envelopes, squeezing.
//! * [`spectroscopy`]: sideband readout, thermometry, Bessel carrier
//!   suppression and the spectroscopic scans.
//! * [`protocols`]: SWAP, cooling, heating-rate and squeezing experiments.
//!
//! All quantities are SI; every frequency is an angular frequency in rad/s.

pub mod dynamics;
pub mod error;
pub mod fit;
pub mod fock;
pub mod presets;
pub mod protocols;
pub mod spectroscopy;
pub mod special;
pub mod trap;
pub mod units;

pub use error::{Error, Result};
pub use fock::{MemoryBudget, ModeDim, ModeOperator, ModeSlot, ModeState, TwoModeDims, TwoModeState};
pub use trap::{Axis, DrivePulse, EnvelopeKind, Frame, TrapConfig};
pub use dynamics::{EvolutionReport, NoiseModel};
pub use spectroscopy::{LaserProbe, ScanResult, Sideband};
pub use protocols::{CoolingSchedule, ProtocolResult};
