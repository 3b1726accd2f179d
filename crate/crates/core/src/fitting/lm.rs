//! Levenberg-Marquardt with Marquardt diagonal scaling and box clamping.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct LmSettings {
    pub max_iterations: usize,
    pub ftol: f64,
    pub xtol: f64,
    /// Loss at or below this counts as an exact fit.
    pub loss_floor: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct LmOutcome {
    pub u: Vec<f64>,
    pub residuals: Vec<f64>,
    pub loss: f64,
    pub jacobian: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub message: String,
    /// Loss after every accepted step, starting with the initial loss.
    pub history: Vec<f64>,
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Central-difference Jacobian with step `max(1e-6, 1e-4 |u_j|)`.
pub(crate) fn jacobian<F>(f: &F, u: &[f64], m: usize) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = u.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut up = u.to_vec();
    for j in 0..n {
        let h = (1e-4 * u[j].abs()).max(1e-6);
        up[j] = u[j] + h;
        let rp = f(&up)?;
        up[j] = u[j] - h;
        let rm = f(&up)?;
        up[j] = u[j];
        for i in 0..m {
            jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

pub(crate) fn minimize<F>(f: &F, u0: &[f64], lower: &[f64], upper: &[f64], s: LmSettings) -> Result<LmOutcome>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = u0.len();
    let clamp = |u: &mut [f64]| {
        for j in 0..n {
            u[j] = u[j].clamp(lower[j], upper[j]);
        }
    };
    let mut u = u0.to_vec();
    clamp(&mut u);
    let mut r = f(&u)?;
    let m = r.len();
    if m < n {
        return Err(Error::Degenerate(format!("{m} residuals cannot determine {n} parameters")));
    }
    let mut loss = sum_sq(&r);
    if !loss.is_finite() {
        return Err(Error::Domain("loss is not finite at the initial guess".into()));
    }
    let mut history = vec![loss];
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut message = String::from("maximum iterations reached");
    let mut iterations = 0;
    let mut jac = jacobian(f, &u, m)?;

    while iterations < s.max_iterations {
        if loss <= s.loss_floor {
            converged = true;
            message = "exact fit".into();
            break;
        }
        iterations += 1;
        let jt = jac.transpose();
        let a = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);
        let max_diag = a.diagonal().max();
        let mut accepted = None;
        while lambda < 1e16 {
            let mut lhs = a.clone();
            for j in 0..n {
                lhs[(j, j)] += lambda * a[(j, j)].max(1e-12 * max_diag).max(f64::MIN_POSITIVE);
            }
            let Some(chol) = lhs.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-&g));
            let mut trial: Vec<f64> = u.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            clamp(&mut trial);
            let r_trial = f(&trial);
            match r_trial {
                Ok(rt) if sum_sq(&rt).is_finite() && sum_sq(&rt) < loss => {
                    lambda = (lambda / 3.0).max(1e-15);
                    accepted = Some((trial, rt));
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        let Some((trial, rt)) = accepted else {
            converged = true;
            message = "no further decrease of the loss".into();
            break;
        };
        let new_loss = sum_sq(&rt);
        let step: f64 = trial.iter().zip(&u).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let norm: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let reduction = (loss - new_loss) / loss;
        u = trial;
        r = rt;
        loss = new_loss;
        history.push(loss);
        jac = jacobian(f, &u, m)?;
        if reduction < s.ftol {
            converged = true;
            message = "relative loss reduction below tolerance".into();
            break;
        }
        if step <= s.xtol * (norm + s.xtol) {
            converged = true;
            message = "step size below tolerance".into();
            break;
        }
    }
    Ok(LmOutcome { u, residuals: r, loss, jacobian: jac, iterations, converged, message, history })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> LmSettings {
        LmSettings { max_iterations: 200, ftol: 1e-14, xtol: 1e-12, loss_floor: 1e-30 }
    }

    #[test]
    fn fits_exponential() {
        let ts: Vec<f64> = (0..40).map(|k| k as f64 * 0.1).collect();
        let data: Vec<f64> = ts.iter().map(|t| 2.0 * (-1.3 * t).exp()).collect();
        let f = |u: &[f64]| -> Result<Vec<f64>> {
            Ok(ts.iter().zip(&data).map(|(t, d)| u[0] * (-u[1] * t).exp() - d).collect())
        };
        let out = minimize(&f, &[1.0, 0.5], &[-10.0, -10.0], &[10.0, 10.0], settings()).unwrap();
        assert!(out.converged);
        assert!((out.u[0] - 2.0).abs() < 1e-8 && (out.u[1] - 1.3).abs() < 1e-8);
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn respects_bounds() {
        let f = |u: &[f64]| -> Result<Vec<f64>> { Ok(vec![u[0] - 5.0, 0.1 * (u[0] - 5.0)]) };
        let out = minimize(&f, &[0.0], &[-1.0], &[2.0], settings()).unwrap();
        assert!((out.u[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rosenbrock() {
        let f = |u: &[f64]| -> Result<Vec<f64>> { Ok(vec![10.0 * (u[1] - u[0] * u[0]), 1.0 - u[0]]) };
        let out = minimize(&f, &[-1.2, 1.0], &[-5.0, -5.0], &[5.0, 5.0], settings()).unwrap();
        assert!((out.u[0] - 1.0).abs() < 1e-6 && (out.u[1] - 1.0).abs() < 1e-6);
    }
}
