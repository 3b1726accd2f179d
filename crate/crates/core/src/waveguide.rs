//! TE10 rectangular-waveguide physics: cutoff, the dispersion factor that
//! weights the mode density, the emitter decay rate, and a numerical
//! solution of the emitter amplitude with the full frequency integral.
//!
//! Frequencies are angular (rad/ns); geometry is in metres.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{exprel, phi2};
use crate::trace::ComplexTrace;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;
const HBAR: f64 = 1.054_571_817e-34;
const VACUUM_IMPEDANCE: f64 = 376.730_313_412;

/// Cross section and filling of the waveguide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveguideGeometry {
    /// Broad wall (m).
    pub a: f64,
    /// Narrow wall (m).
    pub b: f64,
    pub eps_r: f64,
    pub mu_r: f64,
}

impl WaveguideGeometry {
    pub fn new(a: f64, b: f64, eps_r: f64, mu_r: f64) -> Result<Self> {
        let g = Self { a, b, eps_r, mu_r };
        g.validate()?;
        Ok(g)
    }

    /// Standard WR90 guide, 22.86 mm x 10.16 mm, empty.
    pub fn wr90() -> Self {
        Self { a: 22.86e-3, b: 10.16e-3, eps_r: 1.0, mu_r: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.a > self.b) {
            return Err(Error::InvalidParameter(format!("waveguide needs a > b > 0 (a={}, b={})", self.a, self.b)));
        }
        if !(self.eps_r >= 1.0 && self.mu_r > 0.0) {
            return Err(Error::InvalidParameter("need eps_r >= 1 and mu_r > 0".into()));
        }
        Ok(())
    }

    /// Wave impedance of the filling medium (ohm).
    pub fn impedance(&self) -> f64 {
        VACUUM_IMPEDANCE * (self.mu_r / self.eps_r).sqrt()
    }
}

/// Electric dipole of the emitter inside the guide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipoleConfig {
    /// Transition dipole magnitude (C m).
    pub d_eg: f64,
    /// Angle between the dipole and the TE10 electric field (rad).
    pub theta: f64,
    /// Transverse position across the broad wall (m).
    pub x0: f64,
}

impl DipoleConfig {
    pub fn validate(&self, geom: &WaveguideGeometry) -> Result<()> {
        if !(self.d_eg > 0.0) {
            return Err(Error::InvalidParameter("dipole moment must be > 0".into()));
        }
        if !(self.x0 >= 0.0 && self.x0 <= geom.a) {
            return Err(Error::InvalidParameter(format!("dipole position {} outside [0, {}]", self.x0, geom.a)));
        }
        Ok(())
    }
}

/// How strongly the emitter couples to the guide.
///
/// The decay rate is `gamma(omega) = K omega^2 / sqrt(omega^2 - omega_c^2)`.
/// `Dipole` computes `K` from the dipole and geometry; `Prefactor` takes `K`
/// directly (units rad/ns per rad/ns), which is convenient when only the
/// measured linewidth is known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    Dipole(DipoleConfig),
    Prefactor(f64),
}

impl Coupling {
    /// Prefactor `K` such that `gamma(omega_q) = K` times the dispersion factor.
    pub fn prefactor(&self, geom: &WaveguideGeometry) -> Result<f64> {
        match *self {
            Coupling::Dipole(d) => {
                d.validate(geom)?;
                let angular = d.theta.cos().powi(2) * (d.x0 * std::f64::consts::PI / geom.a).sin().powi(2);
                // SI rate in 1/s; the omega^2/sqrt(..) factor has one power of
                // frequency, so evaluating it in rad/ns yields 1/ns directly.
                Ok(2.0 * d.d_eg * d.d_eg * angular * geom.impedance() / (HBAR * geom.a * geom.b))
            }
            Coupling::Prefactor(k) => {
                if !(k >= 0.0) {
                    return Err(Error::InvalidParameter("coupling prefactor must be >= 0".into()));
                }
                Ok(k)
            }
        }
    }

    /// Prefactor chosen so that the decay rate at `omega_q` equals `gamma`.
    pub fn from_rate(geom: &WaveguideGeometry, omega_q: f64, gamma: f64) -> Result<Self> {
        Ok(Coupling::Prefactor(gamma / mode_weight(geom, omega_q)?))
    }
}

/// TE10 cutoff angular frequency `(pi / a) / sqrt(eps mu)` in rad/ns.
pub fn cutoff_frequency(geom: &WaveguideGeometry) -> f64 {
    SPEED_OF_LIGHT * std::f64::consts::PI / geom.a / (geom.eps_r * geom.mu_r).sqrt() * 1e-9
}

/// `omega^2 / sqrt(omega^2 - omega_c^2)` (rad/ns).
fn mode_weight(geom: &WaveguideGeometry, omega: f64) -> Result<f64> {
    let wc = cutoff_frequency(geom);
    if !(omega > wc) {
        return Err(Error::Domain(format!("frequency {omega} rad/ns is at or below the cutoff {wc} rad/ns")));
    }
    Ok(omega * omega / (omega * omega - wc * wc).sqrt())
}

/// Dispersion factor `omega^2 / sqrt(eps mu omega^2 - k_c^2)` relative to its
/// value at `omega_ref`.
pub fn dispersion_factor(omega: f64, geom: &WaveguideGeometry, omega_ref: f64) -> Result<f64> {
    Ok(mode_weight(geom, omega)? / mode_weight(geom, omega_ref)?)
}

/// Spread `(max - min) / F(center)` of the dispersion factor over a window
/// of full width `width` around `center`.
pub fn dispersion_variation(geom: &WaveguideGeometry, center: f64, width: f64) -> Result<f64> {
    let n = 201;
    let lo = center - width / 2.0;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for i in 0..n {
        let f = dispersion_factor(lo + width * i as f64 / (n - 1) as f64, geom, center)?;
        min = min.min(f);
        max = max.max(f);
    }
    Ok(max - min)
}

/// Radiative decay rate of the emitter into the fundamental mode (rad/ns).
pub fn decay_rate(geom: &WaveguideGeometry, coupling: &Coupling, omega_q: f64) -> Result<f64> {
    geom.validate()?;
    Ok(coupling.prefactor(geom)? * mode_weight(geom, omega_q)?)
}

/// Frequency and time discretization for [`kernel_decay_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelGrid {
    /// Upper integration limit above `omega_q`, in units of `gamma(omega_q)`.
    pub span_above: f64,
    /// Frequency cell width in units of `gamma(omega_q)`.
    pub spacing: f64,
    /// Freeze the mode weight at `omega_q` and extend the integral to
    /// minus infinity, which reduces the kernel to a delta function.
    pub markov: bool,
}

impl Default for KernelGrid {
    fn default() -> Self {
        Self { span_above: 200.0, spacing: 0.05, markov: false }
    }
}

/// Antiderivative of `omega^2 / sqrt(omega^2 - wc^2)`.
fn weight_antiderivative(omega: f64, wc: f64) -> f64 {
    let r = (omega * omega - wc * wc).max(0.0).sqrt();
    0.5 * (omega * r + wc * wc * (omega + r).ln())
}

/// Excited-state amplitude `c_e(t)` of an emitter in the guide, from the
/// memory-kernel equation
/// `dc/dt = -integral_0^t dt' integral_{omega_c} dw J(w) e^{i(omega_q - w)(t - t')} c(t')`
/// with `J(w) = gamma(w) / 2 pi`.
///
/// The frequency integral is cut at `omega_q + span_above * gamma` and
/// discretized into cells carrying the exact integral of `J`. Each cell keeps
/// its own history accumulator, updated exactly under a linear `c` within a
/// step; `c` is advanced by the trapezoid rule.
pub fn kernel_decay_check(
    geom: &WaveguideGeometry,
    coupling: &Coupling,
    omega_q: f64,
    t_max: f64,
    grid: &KernelGrid,
) -> Result<ComplexTrace> {
    let gamma = decay_rate(geom, coupling, omega_q)?;
    if !(t_max > 0.0) {
        return Err(Error::InvalidParameter("t_max must be > 0".into()));
    }
    if !(grid.spacing > 0.0 && grid.span_above > 0.0) {
        return Err(Error::Config("kernel grid spacing and span must be > 0".into()));
    }
    if grid.spacing > 0.1 {
        return Err(Error::Config(format!(
            "frequency spacing {} gamma is too coarse to resolve the linewidth (max 0.1 gamma)",
            grid.spacing
        )));
    }
    let one = Complex64::new(1.0, 0.0);
    if gamma == 0.0 {
        let dt = t_max / 1000.0;
        return ComplexTrace::new(0.0, dt, vec![one; 1001]);
    }

    let wc = cutoff_frequency(geom);
    let upper = omega_q + grid.span_above * gamma;
    let dw = grid.spacing * gamma;
    let bandwidth = (omega_q - wc).max(upper - omega_q);
    let h_max = (1.0 / (50.0 * gamma)).min(std::f64::consts::PI / (4.0 * bandwidth));
    let steps = (t_max / h_max).ceil() as usize;
    let h = t_max / steps as f64;

    if grid.markov {
        let e = (-gamma * h / 2.0).exp();
        let mut c = one;
        let mut out = Vec::with_capacity(steps + 1);
        out.push(c);
        for _ in 0..steps {
            c *= e;
            out.push(c);
        }
        return ComplexTrace::new(0.0, h, out);
    }

    let k = coupling.prefactor(geom)? / std::f64::consts::TAU;
    let cells = ((upper - wc) / dw).ceil() as usize;
    let dw = (upper - wc) / cells as f64;
    struct Cell {
        weight: f64,
        decay: Complex64,
        w_now: Complex64,
        w_ramp: Complex64,
    }
    let table: Vec<Cell> = (0..cells)
        .map(|i| {
            let lo = wc + i as f64 * dw;
            let hi = lo + dw;
            let weight = k * (weight_antiderivative(hi, wc) - weight_antiderivative(lo, wc));
            let nu = omega_q - (lo + hi) / 2.0;
            let z = Complex64::new(0.0, nu * h);
            Cell { weight, decay: z.exp(), w_now: h * exprel(z), w_ramp: h * phi2(z) }
        })
        .collect();
    let ramp_sum: Complex64 = table.iter().map(|c| c.weight * c.w_ramp).sum();

    let mut acc = vec![Complex64::default(); cells];
    let mut c = one;
    let mut s = Complex64::default();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(c);
    for _ in 0..steps {
        // S_{n+1} = a + ramp_sum * c_{n+1}
        let a: Complex64 = table
            .iter()
            .zip(&acc)
            .map(|(cell, b)| cell.weight * (cell.decay * b + (cell.w_now - cell.w_ramp) * c))
            .sum();
        let c_next = (c - 0.5 * h * (s + a)) / (1.0 + 0.5 * h * ramp_sum);
        for (cell, b) in table.iter().zip(acc.iter_mut()) {
            *b = cell.decay * *b + cell.w_now * c + cell.w_ramp * (c_next - c);
        }
        s = a + ramp_sum * c_next;
        c = c_next;
        out.push(c);
    }
    ComplexTrace::new(0.0, h, out)
}

/// Largest relative deviation of `|c(t)|` from `e^{-gamma t / 2}` for
/// `t` in `[0, t_hi]`.
pub fn deviation_from_exponential(trace: &ComplexTrace, gamma: f64, t_hi: f64) -> f64 {
    (0..trace.len())
        .filter(|&n| trace.time(n) <= t_hi)
        .map(|n| {
            let e = (-gamma * trace.time(n) / 2.0).exp();
            (trace.samples()[n].norm() - e).abs() / e
        })
        .fold(0.0, f64::max)
}
