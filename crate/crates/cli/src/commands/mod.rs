//! Subcommand implementations. Each takes resolved parameters in user units
//! (MHz, GHz, ns, mm) and converts to rad/ns and ns at the boundary.

pub mod filter;
pub mod fit;
pub mod simulate;

use portrait_core::ComplexTrace;

use crate::svg::Series;
use crate::CliError;

/// `n` evenly spaced points from `lo` to `hi`; a single point sits midway.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Number of samples on `t_min, t_min + dt, ..` up to `t_max`.
pub fn sample_count(t_min: f64, t_max: f64, dt: f64) -> Result<usize, CliError> {
    crate::config::positive("dt_ns", dt)?;
    if !(t_max > t_min) {
        return Err(CliError::Config(format!("field `t_max_ns`: must exceed t_min_ns ({t_max} <= {t_min})")));
    }
    Ok(((t_max - t_min) / dt).round() as usize + 1)
}

/// Magnitude, real and imaginary parts of a trace against time.
pub fn trace_series(trace: &ComplexTrace, name: &str) -> Vec<Series> {
    let t = trace.times();
    vec![
        Series::new(format!("|{name}|"), t.clone(), trace.magnitudes()),
        Series::new(format!("Re {name}"), t.clone(), trace.samples().iter().map(|z| z.re).collect()),
        Series::new(format!("Im {name}"), t, trace.samples().iter().map(|z| z.im).collect()),
    ]
}
