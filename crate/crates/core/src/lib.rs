//! Single-photon emission portraits of artificial atoms in a rectangular
//! waveguide.
//!
//! The crate provides three cross-checking emission models and the
//! machinery around them:
//!
//! * [`wigner_weisskopf`]: ideal spontaneous emission, mode amplitudes and
//!   the frequency/time portrait.
//! * [`input_output`]: driven two-level emitter, steady state and the closed
//!   form for the field after a one-pole amplifier filter.
//! * [`lindblad`]: numerical master equation for up to three emitters with
//!   collective decay and direct coupling.
//! * [`filter_chain`]: the amplifier filter, heterodyne raw-signal synthesis
//!   and envelope demodulation.
//! * [`waveguide`]: TE10 cutoff, emitter decay rate and a memory-kernel check
//!   of the Markov approximation near cutoff.
//! * [`fitting`]: damped least squares extraction of physical parameters from
//!   filtered traces.
//!
//! Units: time in ns, angular frequency in rad/ns. Use [`units`] to convert
//! from MHz/GHz.

pub mod error;
pub mod filter_chain;
pub mod fitting;
pub mod grid;
pub mod input_output;
pub mod lindblad;
pub mod params;
pub mod trace;
pub mod units;
pub mod waveguide;
pub mod wigner_weisskopf;

pub mod analysis;
mod numeric;

pub use error::{Error, Result};
pub use grid::PortraitGrid;
pub use num_complex::Complex64;
pub use params::{DrivePulse, FilterParams, PulseShape, QubitParams};
pub use trace::{ComplexTrace, RealTrace};
