//! Uniformly sampled signals.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Uniformly sampled complex field amplitude.
///
/// Sample `n` sits at `t0 + n * dt`; times are never stored per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTrace {
    t0: f64,
    dt: f64,
    samples: Vec<Complex64>,
}

impl ComplexTrace {
    pub fn new(t0: f64, dt: f64, samples: Vec<Complex64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("trace dt must be > 0, got {dt}")));
        }
        if !t0.is_finite() {
            return Err(Error::InvalidParameter("trace t0 must be finite".into()));
        }
        if samples.is_empty() {
            return Err(Error::InvalidParameter("trace has no samples".into()));
        }
        Ok(Self { t0, dt, samples })
    }

    /// Evaluates `f` on the grid `t0 + n dt`, `n < len`.
    pub fn from_fn(t0: f64, dt: f64, len: usize, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let samples = (0..len).map(|n| f(t0 + n as f64 * dt)).collect();
        Self::new(t0, dt, samples)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.time(n)).collect()
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.norm()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }

    /// Same grid, samples transformed pointwise with their time.
    pub fn map(&self, f: impl Fn(f64, Complex64) -> Complex64) -> Self {
        let samples = self.samples.iter().enumerate().map(|(n, &s)| f(self.time(n), s)).collect();
        Self { t0: self.t0, dt: self.dt, samples }
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        self.map(|_, s| s * factor)
    }

    /// Moves the trace from a frame rotating at `omega_from` to one rotating
    /// at `omega_to` (both rad/ns, `e^{-i omega t}` convention). Use
    /// `omega_to = 0` for the lab frame.
    pub fn change_frame(&self, omega_from: f64, omega_to: f64) -> Self {
        let w = omega_to - omega_from;
        self.map(|t, s| s * Complex64::from_polar(1.0, w * t))
    }

    /// Interpolated value at time `t` (4-point cubic Lagrange, clamped
    /// stencil at the ends). Outside the trace span the end samples are held.
    pub fn value_at(&self, t: f64) -> Complex64 {
        interpolate(&self.samples, (t - self.t0) / self.dt)
    }

    /// Resamples onto a grid covering the same interval.
    ///
    /// The number of intervals is `round(span / new_dt)` and the step is
    /// adjusted so both end points are kept; resampling onto the current
    /// step returns the samples unchanged. Interpolation is cubic.
    pub fn resample(&self, new_dt: f64) -> Result<Self> {
        if !(new_dt > 0.0 && new_dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("new dt must be > 0, got {new_dt}")));
        }
        let span = self.t_end() - self.t0;
        if new_dt > span {
            return Err(Error::InvalidParameter(format!("new dt {new_dt} exceeds trace span {span}")));
        }
        let intervals = (span / new_dt).round().max(1.0) as usize;
        let dt = span / intervals as f64;
        if intervals + 1 == self.len() {
            return Ok(self.clone());
        }
        let samples = (0..=intervals)
            .map(|n| {
                if n == intervals {
                    *self.samples.last().unwrap()
                } else {
                    interpolate(&self.samples, n as f64 * dt / self.dt)
                }
            })
            .collect();
        Self::new(self.t0, dt, samples)
    }

    /// Writes `t_ns,re,im` CSV.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t_ns", "re", "im"])?;
        for (n, s) in self.samples.iter().enumerate() {
            wr.write_record([self.time(n).to_string(), s.re.to_string(), s.im.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads `t_ns,re,im` CSV. The time column must be uniform.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t_ns", "re", "im"] {
            return Err(Error::Parse(format!(
                "expected header t_ns,re,im, found {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut times = Vec::new();
        let mut samples = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            let field = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Parse(format!("row {}: missing column {i}", line + 2)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", line + 2)))
            };
            times.push(field(0)?);
            samples.push(Complex64::new(field(1)?, field(2)?));
        }
        if times.len() < 2 {
            return Err(Error::Parse("trace CSV needs at least two rows".into()));
        }
        let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        for (n, t) in times.iter().enumerate() {
            if (t - (times[0] + n as f64 * dt)).abs() > 1e-6 * dt.abs().max(1e-12) {
                return Err(Error::Parse(format!("non-uniform time grid at row {}", n + 2)));
            }
        }
        Self::new(times[0], dt, samples)
    }
}

/// Uniformly sampled real signal (digitized voltage).
#[derive(Debug, Clone, PartialEq)]
pub struct RealTrace {
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<f64>,
}

impl RealTrace {
    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Cubic Lagrange interpolation at fractional index `x`.
fn interpolate(y: &[Complex64], x: f64) -> Complex64 {
    let n = y.len();
    if n == 1 || x <= 0.0 {
        return y[0];
    }
    if x >= (n - 1) as f64 {
        return y[n - 1];
    }
    let i = x.floor() as usize;
    let frac = x - i as f64;
    if frac == 0.0 {
        return y[i];
    }
    if n < 4 {
        return y[i] * (1.0 - frac) + y[i + 1] * frac;
    }
    let start = i.saturating_sub(1).min(n - 4);
    let u = x - start as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..4 {
        let mut w = 1.0;
        for m in 0..4 {
            if m != j {
                w *= (u - m as f64) / (j as f64 - m as f64);
            }
        }
        acc += y[start + j] * w;
    }
    acc
}
