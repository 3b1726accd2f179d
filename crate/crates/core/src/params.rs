//! Emitter, drive and filter parameter sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single two-level emitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitParams {
    /// Transition angular frequency (rad/ns).
    pub omega_q: f64,
    /// Radiative decay rate into the waveguide (rad/ns).
    pub gamma_wg: f64,
    /// Non-radiative decay rate (rad/ns).
    pub gamma_int: f64,
}

impl QubitParams {
    pub fn new(omega_q: f64, gamma_wg: f64, gamma_int: f64) -> Result<Self> {
        let q = Self { omega_q, gamma_wg, gamma_int };
        q.validate()?;
        Ok(q)
    }

    /// Builds from total linewidth and radiative fraction.
    pub fn from_gamma_beta(omega_q: f64, gamma: f64, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::InvalidParameter(format!("beta must be in (0, 1], got {beta}")));
        }
        Self::new(omega_q, gamma * beta, gamma * (1.0 - beta))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_wg >= 0.0 && self.gamma_int >= 0.0 && self.gamma() > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "decay rates must be >= 0 with positive sum (gamma_wg={}, gamma_int={})",
                self.gamma_wg, self.gamma_int
            )));
        }
        if !self.omega_q.is_finite() {
            return Err(Error::InvalidParameter("omega_q must be finite".into()));
        }
        Ok(())
    }

    /// Total linewidth `gamma_wg + gamma_int`.
    pub fn gamma(&self) -> f64 {
        self.gamma_wg + self.gamma_int
    }

    /// Radiative fraction.
    pub fn beta(&self) -> f64 {
        self.gamma_wg / self.gamma()
    }
}

/// Pulse envelope shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PulseShape {
    Rectangular,
    /// Rectangular with raised-cosine rise and fall of the given duration (ns).
    RaisedCosine {
        edge: f64,
    },
}

/// Coherent drive `alpha e^{-i omega t}` applied between `t_start` and `t_stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrivePulse {
    /// Amplitude as square-root photon flux (1/sqrt(ns)).
    pub alpha: f64,
    /// Drive angular frequency (rad/ns).
    pub omega: f64,
    pub t_start: f64,
    pub t_stop: f64,
    pub shape: PulseShape,
}

impl DrivePulse {
    pub fn rectangular(alpha: f64, omega: f64, t_start: f64, t_stop: f64) -> Result<Self> {
        let p = Self { alpha, omega, t_start, t_stop, shape: PulseShape::Rectangular };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_stop > self.t_start) {
            return Err(Error::InvalidParameter("drive t_stop must exceed t_start".into()));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::InvalidParameter("drive alpha must be >= 0".into()));
        }
        if let PulseShape::RaisedCosine { edge } = self.shape {
            if !(edge >= 0.0 && edge < (self.t_stop - self.t_start) / 2.0) {
                return Err(Error::InvalidParameter(
                    "raised-cosine edge must be >= 0 and shorter than half the pulse".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.t_stop - self.t_start
    }

    /// Envelope in [0, 1] at time `t`; the pulse is on for `t_start <= t < t_stop`.
    pub fn envelope(&self, t: f64) -> f64 {
        if t < self.t_start || t >= self.t_stop {
            return 0.0;
        }
        match self.shape {
            PulseShape::Rectangular => 1.0,
            PulseShape::RaisedCosine { edge } => {
                if edge == 0.0 {
                    return 1.0;
                }
                let rise = (t - self.t_start) / edge;
                let fall = (self.t_stop - t) / edge;
                let x = rise.min(fall);
                if x >= 1.0 {
                    1.0
                } else {
                    0.5 * (1.0 - (std::f64::consts::PI * x).cos())
                }
            }
        }
    }

    /// Times where the envelope is not smooth, inside `[t_start, t_stop]`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = vec![self.t_start];
        if let PulseShape::RaisedCosine { edge } = self.shape {
            if edge > 0.0 {
                b.push(self.t_start + edge);
                b.push(self.t_stop - edge);
            }
        }
        b.push(self.t_stop);
        b
    }
}

/// One-pole amplifier filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    /// Center angular frequency (rad/ns). For [`crate::filter_chain::filter_apply`]
    /// this is read relative to the frame of the filtered trace; see
    /// [`FilterParams::in_frame`].
    pub omega_amp: f64,
    /// Field half-bandwidth (rad/ns).
    pub kappa: f64,
    /// Linear amplitude gain `sqrt(G)`.
    pub gain: f64,
    /// Standard deviation of additive complex Gaussian noise per output sample.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl FilterParams {
    pub fn new(omega_amp: f64, kappa: f64, gain: f64) -> Result<Self> {
        let f = Self { omega_amp, kappa, gain, noise_sigma: 0.0, seed: 0 };
        f.validate()?;
        Ok(f)
    }

    pub fn with_noise(mut self, sigma: f64, seed: u64) -> Self {
        self.noise_sigma = sigma;
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(Error::InvalidParameter(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if !(self.gain > 0.0) {
            return Err(Error::InvalidParameter(format!("gain must be > 0, got {}", self.gain)));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::InvalidParameter("noise sigma must be >= 0".into()));
        }
        Ok(())
    }

    /// Copy with the center expressed relative to a frame rotating at
    /// `omega_frame`.
    pub fn in_frame(&self, omega_frame: f64) -> Self {
        Self { omega_amp: self.omega_amp - omega_frame, ..*self }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qubit_invariants() {
        assert!(QubitParams::new(1.0, 0.0, 0.0).is_err());
        assert!(QubitParams::new(1.0, -0.1, 0.2).is_err());
        let q = QubitParams::from_gamma_beta(45.0, 0.01, 0.9).unwrap();
        assert!((q.beta() - 0.9).abs() < 1e-12);
        assert!((q.gamma() - 0.01).abs() < 1e-15);
        assert!(QubitParams::from_gamma_beta(45.0, 0.01, 0.0).is_err());
        assert_eq!(QubitParams::new(1.0, 0.0, 0.3).unwrap().beta(), 0.0);
    }

    #[test]
    fn pulse_envelope() {
        assert!(DrivePulse::rectangular(1.0, 0.0, 0.0, 0.0).is_err());
        assert!(DrivePulse::rectangular(-1.0, 0.0, 0.0, 1.0).is_err());
        let p = DrivePulse::rectangular(1.0, 0.0, -10.0, 0.0).unwrap();
        assert_eq!(p.envelope(-10.0), 1.0);
        assert_eq!(p.envelope(0.0), 0.0);
        let mut rc = p;
        rc.shape = PulseShape::RaisedCosine { edge: 2.0 };
        assert!(rc.validate().is_ok());
        assert!((rc.envelope(-9.0) - 0.5).abs() < 1e-12);
        assert_eq!(rc.envelope(-5.0), 1.0);
        rc.shape = PulseShape::RaisedCosine { edge: 5.0 };
        assert!(rc.validate().is_err());
    }

    #[test]
    fn filter_invariants() {
        assert!(FilterParams::new(0.0, 0.0, 1.0).is_err());
        assert!(FilterParams::new(0.0, 1.0, 0.0).is_err());
        assert!(FilterParams::new(0.0, 1.0, 1.0).unwrap().with_noise(-1.0, 0).validate().is_err());
        let f = FilterParams::new(5.0, 1.0, 1.0).unwrap().in_frame(4.5);
        assert_eq!(f.omega_amp, 0.5);
    }
}
