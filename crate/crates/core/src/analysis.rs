//! Small signal-analysis helpers shared by the models, the CLI and the
//! test suites: regressions, widths, phase unwrapping, extrema.

use num_complex::Complex64;

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of `ln|y|` against `t`, restricted to `t` in `[t_lo, t_hi]`.
pub fn log_slope(times: &[f64], values: &[Complex64], t_lo: f64, t_hi: f64) -> f64 {
    let (x, y): (Vec<f64>, Vec<f64>) =
        times.iter().zip(values).filter(|(t, _)| **t >= t_lo && **t <= t_hi).map(|(t, v)| (*t, v.norm().ln())).unzip();
    linear_fit(&x, &y).0
}

/// Unwrapped phase of a complex sequence.
pub fn unwrap_phase(values: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut offset = 0.0;
    let mut prev = None;
    for v in values {
        let p = v.arg();
        if let Some(q) = prev {
            let d: f64 = p - q;
            if d > std::f64::consts::PI {
                offset -= std::f64::consts::TAU;
            } else if d < -std::f64::consts::PI {
                offset += std::f64::consts::TAU;
            }
        }
        prev = Some(p);
        out.push(p + offset);
    }
    out
}

/// Full width at half maximum of a sampled peak, with linear interpolation
/// of the half-maximum crossings. Returns `None` when the peak does not fall
/// below half maximum on both sides.
pub fn fwhm(x: &[f64], y: &[f64]) -> Option<f64> {
    let (imax, &ymax) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    let half = ymax / 2.0;
    let left = (1..=imax).rev().find(|&i| y[i - 1] < half).map(|i| {
        let (x0, x1, y0, y1) = (x[i - 1], x[i], y[i - 1], y[i]);
        x0 + (half - y0) * (x1 - x0) / (y1 - y0)
    })?;
    let right = (imax..y.len() - 1).find(|&i| y[i + 1] < half).map(|i| {
        let (x0, x1, y0, y1) = (x[i], x[i + 1], y[i], y[i + 1]);
        x0 + (half - y0) * (x1 - x0) / (y1 - y0)
    })?;
    Some(right - left)
}

/// Indices of strict interior local minima.
pub fn local_minima(y: &[f64]) -> Vec<usize> {
    (1..y.len().saturating_sub(1)).filter(|&i| y[i] < y[i - 1] && y[i] <= y[i + 1]).collect()
}

/// Relative L2 distance `|a - b| / |b|`.
pub fn relative_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

/// Relative L2 distance of real sequences.
pub fn relative_l2_real(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}
