//! Row-by-row fits of a portrait grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::PortraitGrid;

use super::{fit, FitProblem, FitResult, FitSpec, Param};

/// Outcome for one filter detuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortraitRowFit {
    /// `omega_amp - omega` of the row (rad/ns).
    pub detuning: f64,
    pub result: Option<FitResult>,
    pub error: Option<String>,
    /// Standard error of `delta_qd` above the confidence limit, or missing.
    pub low_confidence: bool,
}

/// Fits every row of `grid` with `spec`. Row detunings are read as the
/// filter center relative to the drive, `omega_amp - omega`, so
/// `delta_da = -d` is fixed per row and `delta_qd` must be free. Rows are fitted in
/// parallel on the raw (unnormalized) values. A row fails on its own without
/// stopping the others.
pub fn fit_portrait(grid: &PortraitGrid, spec: &FitSpec, confidence_limit: f64) -> Result<Vec<PortraitRowFit>> {
    if !spec.free.contains_key(&Param::DeltaQd) {
        return Err(Error::Config("portrait fits need delta_qd free".into()));
    }
    let rows: Vec<usize> = (0..grid.detunings().len()).collect();
    Ok(rows
        .par_iter()
        .map(|&i| {
            let d = grid.detunings()[i];
            let row_spec = spec.clone().fix(Param::DeltaDa, -d);
            match fit(&FitProblem::new(grid.raw_row(i), row_spec)) {
                Ok(r) => {
                    let low_confidence = r.std_error(Param::DeltaQd).is_none_or(|s| s > confidence_limit);
                    PortraitRowFit { detuning: d, result: Some(r), error: None, low_confidence }
                }
                Err(e) => {
                    PortraitRowFit { detuning: d, result: None, error: Some(e.to_string()), low_confidence: true }
                }
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::tests::truth;
    use crate::input_output::{analytic_portrait, DrivenQubitConfig, ModelParams};
    use crate::params::{DrivePulse, FilterParams, QubitParams};
    use crate::units::mhz_to_rad_per_ns;

    fn config(noise: f64) -> DrivenQubitConfig {
        let t = truth();
        let qubit = QubitParams::from_gamma_beta(45.8, t.gamma, t.beta).unwrap();
        let omega = qubit.omega_q - t.delta_qd;
        DrivenQubitConfig {
            qubit,
            drive: DrivePulse::rectangular(t.alpha, omega, -1000.0, 0.0).unwrap(),
            filter: FilterParams { omega_amp: omega, kappa: t.kappa, gain: 1.0, noise_sigma: noise, seed: 4 },
        }
    }

    fn spec() -> FitSpec {
        let t = truth();
        let start = ModelParams { delta_qd: 0.0, phase: 0.0, ..t };
        FitSpec::new(start).free(Param::DeltaQd, -0.05, 0.05).free(Param::Alpha, 0.1 * t.alpha, 10.0 * t.alpha)
    }

    /// Raw-valued copy with detunings measured from the drive.
    fn relative_to_drive(grid: &PortraitGrid) -> PortraitGrid {
        let raw = grid.values().iter().map(|r| r.iter().map(|v| v * grid.scale()).collect()).collect();
        let d = grid.detunings().iter().map(|c| c + truth().delta_qd).collect();
        PortraitGrid::new(d, grid.times().to_vec(), raw).unwrap()
    }

    #[test]
    fn noiseless_rows_converge_to_constant_detuning() {
        let cfg = config(0.0);
        let centers: Vec<f64> = (-3..=3).map(|k| mhz_to_rad_per_ns(1.0) * k as f64).collect();
        let grid = analytic_portrait(&cfg, &centers, -300.0, 4.0, 400).unwrap();
        let rows = fit_portrait(&relative_to_drive(&grid), &spec(), 1.0).unwrap();
        for r in &rows {
            let res = r.result.as_ref().unwrap();
            assert!(res.converged);
            assert!((res.params.delta_qd - truth().delta_qd).abs() < 1e-8);
        }
    }

    #[test]
    fn distant_rows_are_less_certain() {
        let t = truth();
        let cfg = config(0.0);
        let centers = vec![0.0, 12.0 * t.kappa];
        let clean = analytic_portrait(&cfg, &centers, -300.0, 4.0, 400).unwrap();
        let noisy_cfg = config(0.01 * clean.scale());
        let grid = relative_to_drive(&analytic_portrait(&noisy_cfg, &centers, -300.0, 4.0, 400).unwrap());
        let rows = fit_portrait(&grid, &spec(), mhz_to_rad_per_ns(0.01)).unwrap();
        let s0 = rows[0].result.as_ref().unwrap().std_error(Param::DeltaQd).unwrap();
        let s1 =
            rows[1].result.as_ref().map_or(f64::INFINITY, |r| r.std_error(Param::DeltaQd).unwrap_or(f64::INFINITY));
        assert!(s1 > 5.0 * s0, "{s0} {s1}");
        assert!(!rows[0].low_confidence);
        assert!(rows[1].low_confidence);
    }

    #[test]
    fn requires_free_detuning() {
        let cfg = config(0.0);
        let grid = analytic_portrait(&cfg, &[0.0], -100.0, 4.0, 50).unwrap();
        assert!(fit_portrait(&grid, &FitSpec::new(truth()).free(Param::Alpha, 0.01, 1.0), 1.0).is_err());
    }
}
