//! Ideal spontaneous emission with a flat coupling: excited-state amplitude,
//! per-mode photon amplitudes `f_k(t)`, the frequency-integrated envelope and
//! the resulting portraits.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::filter_chain::filter_apply_stream;
use crate::filter_chain::FilterState;
use crate::grid::PortraitGrid;
use crate::params::FilterParams;
use crate::trace::ComplexTrace;

/// Emitter with a flat coupling `g` to a continuum of modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WWModel {
    pub omega_q: f64,
    pub gamma: f64,
    pub g: f64,
}

impl WWModel {
    pub fn new(omega_q: f64, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be > 0, got {gamma}")));
        }
        Ok(Self { omega_q, gamma, g: 1.0 })
    }

    pub fn with_coupling(self, g: f64) -> Self {
        Self { g, ..self }
    }

    /// Time treated as the end of the emission, `40 / gamma`.
    pub fn t_infinity(&self) -> f64 {
        40.0 / self.gamma
    }
}

/// `e^{-t (gamma/2 - i omega_q)}`.
pub fn excited_amplitude(model: &WWModel, t: f64) -> Complex64 {
    if t.is_infinite() {
        return Complex64::default();
    }
    Complex64::new(-model.gamma / 2.0, model.omega_q).scale(t).exp()
}

/// Photon amplitude in the mode at `detuning = omega_k - omega_q`:
/// `g / (i gamma/2 + detuning) * (1 - e^{-t (gamma/2 - i detuning)})`,
/// times `e^{-i omega_k t}` when `with_phase` is set.
pub fn mode_amplitude(model: &WWModel, detuning: f64, t: f64, with_phase: bool) -> Complex64 {
    let pole = Complex64::new(detuning, model.gamma / 2.0);
    let growth = if t.is_infinite() {
        Complex64::new(1.0, 0.0)
    } else {
        -crate::numeric::expm1(Complex64::new(-model.gamma / 2.0, detuning) * t)
    };
    let f = model.g * growth / pole;
    if with_phase && t.is_finite() {
        f * Complex64::from_polar(1.0, -(model.omega_q + detuning) * t)
    } else {
        f
    }
}

/// Portrait of mode amplitudes over a detuning grid and times, normalized
/// by the zero-detuning long-time value `2 g / gamma`.
pub fn ww_portrait(model: &WWModel, detunings: &[f64], times: &[f64]) -> Result<PortraitGrid> {
    let values: Vec<Vec<Complex64>> = detunings
        .par_iter()
        .map(|&d| times.iter().map(|&t| mode_amplitude(model, d, t.max(0.0), false)).collect())
        .collect();
    Ok(PortraitGrid::new(detunings.to_vec(), times.to_vec(), values)?.normalized_by(2.0 * model.g / model.gamma))
}

/// Frequency-integrated field: zero before `t = 0`, `e^{-gamma t/2}` after,
/// with the carrier `e^{-i omega_q t}` unless `rotating`.
pub fn ww_envelope(model: &WWModel, t0: f64, dt: f64, len: usize, rotating: bool) -> Result<ComplexTrace> {
    ComplexTrace::from_fn(t0, dt, len, |t| envelope_value(model, t, rotating))
}

fn envelope_value(model: &WWModel, t: f64, rotating: bool) -> Complex64 {
    if t < 0.0 {
        return Complex64::default();
    }
    let a = (-model.gamma * t / 2.0).exp();
    if rotating {
        Complex64::new(a, 0.0)
    } else {
        Complex64::from_polar(a, -model.omega_q * t)
    }
}

/// Field rebuilt by summing mode amplitudes over a detuning grid with
/// trapezoid weights, in the frame rotating at `omega_q` and normalized so
/// the continuum limit is `e^{-gamma t/2}` for `t > 0`.
pub fn mode_summed_field(model: &WWModel, detunings: &[f64], times: &[f64]) -> Vec<Complex64> {
    let weights = trapezoid_weights(detunings);
    // Continuum value of the sum at t = 0+ is -i pi g per unit mode density.
    let norm = Complex64::new(0.0, -std::f64::consts::PI * model.g);
    times
        .par_iter()
        .map(|&t| {
            let sum: Complex64 = detunings
                .iter()
                .zip(&weights)
                .map(|(&d, &w)| w * mode_amplitude(model, d, t, false) * Complex64::from_polar(1.0, -d * t))
                .sum();
            sum / norm
        })
        .collect()
}

/// Fourier transform of the rotating-frame envelope over `[0, t_max]`,
/// `integral e^{-gamma t/2} e^{i detuning t} dt`, on the FFT detuning bins.
/// Returns `(detunings ascending, spectrum)`.
pub fn envelope_spectrum(model: &WWModel, t_max: f64, len: usize) -> Result<(Vec<f64>, Vec<Complex64>)> {
    if len < 4 || !(t_max > 0.0) {
        return Err(Error::InvalidParameter("need at least 4 samples and t_max > 0".into()));
    }
    let dt = t_max / len as f64;
    let mut buf: Vec<Complex64> = (0..len).map(|n| envelope_value(model, n as f64 * dt, true)).collect();
    // Trapezoid end correction at t = 0; the tail at t_max is negligible.
    buf[0] *= 0.5;
    FftPlanner::new().plan_fft_inverse(len).process(&mut buf);
    let mut pairs: Vec<(f64, Complex64)> = buf
        .into_iter()
        .enumerate()
        .map(|(m, v)| {
            let k = if m <= len / 2 { m as f64 } else { m as f64 - len as f64 };
            (std::f64::consts::TAU * k / t_max, v * dt)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs.into_iter().unzip())
}

fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { x[i] - x[i - 1] } else { 0.0 };
            let right = if i + 1 < n { x[i + 1] - x[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// Outcome of [`normalization_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationCheck {
    /// `sum_k |f_k(inf)|^2` with the mode density applied.
    pub sum: f64,
    /// Set when the grid spans less than `100 gamma`.
    pub narrow_grid: bool,
}

/// Total photon number `sum_k |f_k(inf)|^2` over a detuning grid, with the
/// mode density `rho` (modes per rad/ns). `None` selects the density that
/// makes the emitted photon number one, `gamma / (2 pi g^2)`.
pub fn normalization_check(
    model: &WWModel,
    mode_density: Option<f64>,
    detunings: &[f64],
) -> Result<NormalizationCheck> {
    if detunings.len() < 2 || detunings.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("detuning grid must be ascending with >= 2 points".into()));
    }
    let rho = mode_density.unwrap_or(model.gamma / (std::f64::consts::TAU * model.g * model.g));
    let sum = detunings
        .iter()
        .zip(trapezoid_weights(detunings))
        .map(|(&d, w)| w * rho * mode_amplitude(model, d, f64::INFINITY, false).norm_sqr())
        .sum();
    let span = detunings[detunings.len() - 1] - detunings[0];
    let narrow_grid = span < 100.0 * model.gamma;
    if narrow_grid {
        log::warn!("normalization grid spans {:.1} gamma (< 100 gamma)", span / model.gamma);
    }
    Ok(NormalizationCheck { sum, narrow_grid })
}

/// Portrait seen through the amplifier filter: the rotating-frame envelope is
/// filtered once per filter center. `centers` are `omega_amp - omega_q`;
/// the `omega_amp` of `filter` is ignored. Rows are normalized to the grid
/// maximum.
pub fn ww_filtered_portrait(
    model: &WWModel,
    filter: &FilterParams,
    centers: &[f64],
    t0: f64,
    dt: f64,
    len: usize,
) -> Result<PortraitGrid> {
    let env = ww_envelope(model, t0, dt, len, true)?;
    let rows = centers
        .par_iter()
        .enumerate()
        .map(|(i, &c)| {
            let f = FilterParams { omega_amp: c, ..*filter };
            filter_apply_stream(&env, &f, FilterState { memory: Complex64::default(), time: t0 }, i as u64)
                .map(|(t, _)| t)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PortraitGrid::from_rows(centers.to_vec(), rows)?.normalized_to_max())
}
