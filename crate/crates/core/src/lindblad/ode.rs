//! Adaptive Dormand-Prince 5(4) integrator for complex vector ODEs.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerances and step limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Largest allowed step (ns).
    pub max_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12, max_step: f64::INFINITY }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Difference between fifth- and fourth-order weights.
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

/// Stateful integrator that carries its step size between calls.
pub struct DormandPrince {
    tol: Tolerances,
    h: Option<f64>,
    k: Vec<Vec<Complex64>>,
    scratch: Vec<Complex64>,
    candidate: Vec<Complex64>,
    pub accepted: usize,
    pub rejected: usize,
}

impl DormandPrince {
    pub fn new(tol: Tolerances, dim: usize) -> Self {
        Self {
            tol,
            h: None,
            k: vec![vec![Complex64::default(); dim]; 7],
            scratch: vec![Complex64::default(); dim],
            candidate: vec![Complex64::default(); dim],
            accepted: 0,
            rejected: 0,
        }
    }

    /// Advances `y` from `t` to `t_end`, never stepping across `t_end`.
    pub fn advance<F>(&mut self, f: &mut F, t: f64, t_end: f64, y: &mut [Complex64]) -> Result<()>
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        let mut t = t;
        let span = t_end - t;
        if span <= 0.0 {
            return Ok(());
        }
        let mut h = self.h.unwrap_or_else(|| (span / 100.0).min(self.tol.max_step));
        f(t, y, &mut self.k[0]);
        while t < t_end {
            h = h.min(self.tol.max_step);
            let last = t + h >= t_end;
            let step = if last { t_end - t } else { h };
            if !last && step < 1e-14 * t_end.abs().max(1.0) {
                return Err(Error::Integrator(format!("step size underflow at t = {t}")));
            }
            for s in 1..7 {
                for i in 0..y.len() {
                    let mut acc = Complex64::default();
                    for (j, a) in A[s][..s].iter().enumerate() {
                        if *a != 0.0 {
                            acc += *a * self.k[j][i];
                        }
                    }
                    self.scratch[i] = y[i] + step * acc;
                }
                f(t + C[s] * step, &self.scratch, &mut self.k[s]);
                if s == 6 {
                    // last row of A holds the fifth-order weights
                    self.candidate.copy_from_slice(&self.scratch);
                }
            }
            let mut err = 0.0f64;
            for i in 0..y.len() {
                let mut e = Complex64::default();
                for (s, w) in E.iter().enumerate() {
                    e += *w * self.k[s][i];
                }
                let scale = self.tol.atol + self.tol.rtol * y[i].norm().max(self.candidate[i].norm());
                err = err.max((step * e).norm() / scale);
            }
            if !err.is_finite() {
                return Err(Error::Integrator(format!("non-finite state at t = {t}")));
            }
            if err <= 1.0 {
                t = if last { t_end } else { t + step };
                y.copy_from_slice(&self.candidate);
                // first-same-as-last
                let (first, rest) = self.k.split_at_mut(1);
                first[0].copy_from_slice(&rest[5]);
                self.accepted += 1;
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || step >= h {
                    h = step * grow;
                }
            } else {
                self.rejected += 1;
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            }
        }
        self.h = Some(h);
        Ok(())
    }
}
