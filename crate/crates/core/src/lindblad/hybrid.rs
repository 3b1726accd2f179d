//! Symmetric and antisymmetric single-excitation states of an emitter pair.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateLabel {
    Bright,
    Dark,
}

/// A two-emitter state with its energy relative to the bare transition.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveState {
    pub label: StateLabel,
    /// Energy shift (rad/ns).
    pub energy: f64,
    /// Amplitudes in the four-state basis (bit `i` set means emitter `i` excited).
    pub amplitudes: DVector<Complex64>,
}

/// Bright `(|01> + |10>)/sqrt 2` and dark `(|01> - |10>)/sqrt 2` states of two
/// identical emitters with exchange `g`. The bright state sits at `+g`, so the
/// ordering flips with the sign of `g`.
pub fn hybridized_states(g: f64) -> [CollectiveState; 2] {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let z = Complex64::default();
    [
        CollectiveState { label: StateLabel::Bright, energy: g, amplitudes: DVector::from_vec(vec![z, h, h, z]) },
        CollectiveState { label: StateLabel::Dark, energy: -g, amplitudes: DVector::from_vec(vec![z, h, -h, z]) },
    ]
}

fn single_excitation(state: &CollectiveState) -> Result<[Complex64; 2]> {
    if state.amplitudes.len() != 4 {
        return Err(Error::InvalidParameter("collective state must have four amplitudes".into()));
    }
    Ok([state.amplitudes[1], state.amplitudes[2]])
}

/// Matrix element `<00| d (sigma-_1 + sigma-_2) |state>`.
pub fn transition_dipole(state: &CollectiveState, d: f64) -> Result<f64> {
    let [a, b] = single_excitation(state)?;
    Ok(d * (a + b).norm())
}

/// Radiative rate `v^dagger gamma v` of the single-excitation part `v`.
pub fn radiative_rate(state: &CollectiveState, gamma: &DMatrix<f64>) -> Result<f64> {
    if gamma.shape() != (2, 2) {
        return Err(Error::InvalidParameter("decay matrix must be 2x2".into()));
    }
    let v = single_excitation(state)?;
    let mut rate = Complex64::default();
    for i in 0..2 {
        for j in 0..2 {
            rate += v[i].conj() * gamma[(i, j)] * v[j];
        }
    }
    Ok(rate.re)
}
