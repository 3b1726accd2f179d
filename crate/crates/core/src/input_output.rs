//! Driven two-level emitter in the input-output picture: steady state under
//! a long drive, free decay after the drive stops, and the closed-form field
//! after the one-pole amplifier filter.
//!
//! Traces are in the frame rotating at the drive frequency. Times passed to
//! the filtered-trace functions are measured from the moment the drive stops.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter_chain::add_noise;
use crate::grid::PortraitGrid;
use crate::numeric::exprel;
use crate::params::{DrivePulse, FilterParams, QubitParams};
use crate::trace::ComplexTrace;

/// Coherence and excited population reached under a constant drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub s0: Complex64,
    pub rho0: f64,
}

impl SteadyState {
    /// `(2 Re s, 2 Im s, 2 rho - 1)`.
    pub fn bloch_vector(&self) -> [f64; 3] {
        [2.0 * self.s0.re, 2.0 * self.s0.im, 2.0 * self.rho0 - 1.0]
    }
}

/// Steady state for a real drive amplitude `alpha` and detuning
/// `delta = omega_q - omega`.
pub fn steady_state(qubit: &QubitParams, alpha: f64, delta: f64) -> SteadyState {
    let gamma = qubit.gamma();
    let beta = qubit.beta();
    let d = delta * delta + gamma * gamma / 4.0 + alpha * alpha * beta * gamma;
    let s0 = -alpha * (gamma * beta / 2.0).sqrt() * Complex64::new(delta, gamma / 2.0) / d;
    let rho0 = alpha * alpha * beta * gamma / 2.0 / d;
    SteadyState { s0, rho0 }
}

/// Rotating-frame Bloch equations: returns `(ds/dt, drho/dt)`.
pub fn bloch_rhs(qubit: &QubitParams, alpha: f64, delta: f64, s: Complex64, rho: f64) -> (Complex64, f64) {
    let gamma = qubit.gamma();
    let k = (gamma * qubit.beta() / 2.0).sqrt();
    let i = Complex64::i();
    let ds = -(i * delta + gamma / 2.0) * s + i * alpha * k * (2.0 * rho - 1.0);
    let drho = (-i * k * (alpha * s.conj() - alpha * s)).re - gamma * rho;
    (ds, drho)
}

/// Bloch vectors of the resonant steady state for each drive amplitude.
pub fn steady_state_arc(qubit: &QubitParams, alphas: &[f64]) -> Vec<[f64; 3]> {
    alphas.iter().map(|&a| steady_state(qubit, a, 0.0).bloch_vector()).collect()
}

/// Output field after the drive stops at `t = 0`,
/// `-i sqrt(gamma beta / 2) s0 e^{-i omega_q t - gamma t / 2}`, in a frame
/// rotating at `frame_omega` (0 for the lab frame).
pub fn free_decay(
    qubit: &QubitParams,
    initial: &SteadyState,
    frame_omega: f64,
    t0: f64,
    dt: f64,
    len: usize,
) -> Result<ComplexTrace> {
    let k = (qubit.gamma() * qubit.beta() / 2.0).sqrt();
    let rate = Complex64::new(-qubit.gamma() / 2.0, -(qubit.omega_q - frame_omega));
    ComplexTrace::from_fn(t0, dt, len, |t| -Complex64::i() * k * initial.s0 * (rate * t).exp())
}

/// Parameter set of the closed-form filtered field, in rad/ns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub gamma: f64,
    pub beta: f64,
    /// `omega_q - omega`.
    pub delta_qd: f64,
    /// `omega - omega_amp`.
    pub delta_da: f64,
    pub kappa: f64,
    /// Amplitude gain `sqrt(G)`.
    pub gain: f64,
    /// Global phase (rad).
    pub phase: f64,
    pub offset_re: f64,
    pub offset_im: f64,
}

/// Names of the [`ModelParams`] fields in index order.
pub const PARAM_NAMES: [&str; 10] =
    ["alpha", "gamma", "beta", "delta_qd", "delta_da", "kappa", "gain", "phase", "offset_re", "offset_im"];

impl ModelParams {
    pub fn to_array(&self) -> [f64; 10] {
        [
            self.alpha,
            self.gamma,
            self.beta,
            self.delta_qd,
            self.delta_da,
            self.kappa,
            self.gain,
            self.phase,
            self.offset_re,
            self.offset_im,
        ]
    }

    pub fn from_array(v: &[f64; 10]) -> Self {
        Self {
            alpha: v[0],
            gamma: v[1],
            beta: v[2],
            delta_qd: v[3],
            delta_da: v[4],
            kappa: v[5],
            gain: v[6],
            phase: v[7],
            offset_re: v[8],
            offset_im: v[9],
        }
    }

    /// Parameters of a physical configuration. Detunings come from the drive
    /// and filter frequencies; phase and offset are zero.
    pub fn from_config(config: &DrivenQubitConfig) -> Self {
        Self {
            alpha: config.drive.alpha,
            gamma: config.qubit.gamma(),
            beta: config.qubit.beta(),
            delta_qd: config.qubit.omega_q - config.drive.omega,
            delta_da: config.drive.omega - config.filter.omega_amp,
            kappa: config.filter.kappa,
            gain: config.filter.gain,
            phase: 0.0,
            offset_re: 0.0,
            offset_im: 0.0,
        }
    }

    /// Filtered field at time `t` after the drive stop.
    pub fn eval(&self, t: f64) -> Result<Complex64> {
        let p = Complex64::new(self.kappa, -self.delta_da);
        if p.norm() < 1e-14 {
            return Err(Error::Domain("filter pole kappa - i(omega - omega_amp) vanishes".into()));
        }
        let g2 = self.gamma / 2.0;
        let d = self.alpha * self.alpha * self.beta * self.gamma + g2 * g2 + self.delta_qd * self.delta_qd;
        if d == 0.0 {
            return Ok(self.offset());
        }
        let c = self.alpha * self.beta * g2 * Complex64::new(g2, -self.delta_qd) / d;
        let a = self.alpha - c;
        let field = if t < 0.0 {
            a / p
        } else {
            let q = Complex64::new(g2, self.delta_qd);
            let z = (p - q) * t;
            let ept = (-p * t).exp();
            let decay = if z.norm() < 1.0 { -c * ept * t * exprel(z) } else { c * ((-q * t).exp() - ept) / (q - p) };
            a / p * ept + decay
        };
        Ok(self.gain * Complex64::from_polar(1.0, self.phase) * field + self.offset())
    }

    fn offset(&self) -> Complex64 {
        Complex64::new(self.offset_re, self.offset_im)
    }
}

/// Closed-form filtered field for arbitrary (independent) qubit, drive and
/// filter frequencies, on the grid `t0 + n dt`.
pub fn detuned_fit_model(params: &ModelParams, t0: f64, dt: f64, len: usize) -> Result<ComplexTrace> {
    let samples = (0..len).map(|n| params.eval(t0 + n as f64 * dt)).collect::<Result<Vec<_>>>()?;
    ComplexTrace::new(t0, dt, samples)
}

/// Emitter, long drive and amplifier filter. `filter.omega_amp` is the
/// absolute (lab) center frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrivenQubitConfig {
    pub qubit: QubitParams,
    pub drive: DrivePulse,
    pub filter: FilterParams,
}

impl DrivenQubitConfig {
    pub fn validate(&self) -> Result<()> {
        self.qubit.validate()?;
        self.drive.validate()?;
        self.filter.validate()
    }
}

/// Filtered output field around the end of a long drive, `t = 0` being the
/// drive stop. Adds seeded noise when `filter.noise_sigma > 0`.
pub fn analytic_filtered_trace(config: &DrivenQubitConfig, t0: f64, dt: f64, len: usize) -> Result<ComplexTrace> {
    filtered_trace_stream(config, t0, dt, len, 0)
}

fn filtered_trace_stream(
    config: &DrivenQubitConfig,
    t0: f64,
    dt: f64,
    len: usize,
    stream: u64,
) -> Result<ComplexTrace> {
    config.validate()?;
    if config.drive.duration() < 5.0 / config.qubit.gamma() {
        log::warn!(
            "drive lasts {:.1} ns, shorter than 5/gamma; the steady-state assumption is poor",
            config.drive.duration()
        );
    }
    let clean = detuned_fit_model(&ModelParams::from_config(config), t0, dt, len)?;
    Ok(add_noise(&clean, config.filter.noise_sigma, config.filter.seed, stream))
}

/// One filtered trace per filter center; `centers` are `omega_amp - omega_q`.
/// Magnitudes are normalized to the grid maximum.
pub fn analytic_portrait(
    config: &DrivenQubitConfig,
    centers: &[f64],
    t0: f64,
    dt: f64,
    len: usize,
) -> Result<PortraitGrid> {
    let rows = centers
        .par_iter()
        .enumerate()
        .map(|(i, &c)| {
            let mut cfg = *config;
            cfg.filter.omega_amp = config.qubit.omega_q + c;
            filtered_trace_stream(&cfg, t0, dt, len, i as u64)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PortraitGrid::from_rows(centers.to_vec(), rows)?.normalized_to_max())
}
