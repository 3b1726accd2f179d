//! Detuning x time matrices of complex amplitudes.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::trace::ComplexTrace;

/// Portrait of a photon: complex amplitude per (detuning, time) cell.
///
/// `values[i][j]` belongs to `detunings[i]` and `times[j]`. Times are a
/// uniform grid. `scale` records the factor the values were divided by when
/// the grid was normalized, so `values * scale` are the raw model amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct PortraitGrid {
    detunings: Vec<f64>,
    times: Vec<f64>,
    values: Vec<Vec<Complex64>>,
    scale: f64,
}

fn strictly_ascending(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

impl PortraitGrid {
    pub fn new(detunings: Vec<f64>, times: Vec<f64>, values: Vec<Vec<Complex64>>) -> Result<Self> {
        if detunings.is_empty() || times.is_empty() {
            return Err(Error::InvalidParameter("portrait grid axes must be non-empty".into()));
        }
        if !strictly_ascending(&detunings) || !strictly_ascending(&times) {
            return Err(Error::InvalidParameter("portrait detunings and times must be strictly ascending".into()));
        }
        if values.len() != detunings.len() || values.iter().any(|r| r.len() != times.len()) {
            return Err(Error::InvalidParameter(format!(
                "portrait values must be {}x{}",
                detunings.len(),
                times.len()
            )));
        }
        Ok(Self { detunings, times, values, scale: 1.0 })
    }

    /// Assembles a grid from one trace per detuning. All traces must share
    /// the same time grid.
    pub fn from_rows(detunings: Vec<f64>, rows: Vec<ComplexTrace>) -> Result<Self> {
        let first = rows.first().ok_or_else(|| Error::InvalidParameter("no rows".into()))?;
        let times = first.times();
        for r in &rows {
            if r.len() != first.len() || r.t0() != first.t0() || r.dt() != first.dt() {
                return Err(Error::InvalidParameter("rows have different time grids".into()));
            }
        }
        let values = rows.into_iter().map(ComplexTrace::into_samples).collect();
        Self::new(detunings, times, values)
    }

    /// Divides all values by the largest magnitude so the peak is 1.
    pub fn normalized_to_max(mut self) -> Self {
        let m = self.max_abs();
        if m > 0.0 {
            self.scale *= m;
            for row in &mut self.values {
                for v in row.iter_mut() {
                    *v /= m;
                }
            }
        }
        self
    }

    /// Divides all values by `norm` (recorded in `scale`).
    pub fn normalized_by(mut self, norm: f64) -> Self {
        self.scale *= norm;
        for row in &mut self.values {
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
        self
    }

    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<Complex64>] {
        &self.values
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.detunings.len(), self.times.len())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn magnitudes(&self) -> Vec<Vec<f64>> {
        self.values.iter().map(|r| r.iter().map(|v| v.norm()).collect()).collect()
    }

    /// Row `i` as a trace (normalized values).
    pub fn row(&self, i: usize) -> ComplexTrace {
        let dt = if self.times.len() > 1 { self.times[1] - self.times[0] } else { 1.0 };
        ComplexTrace::new(self.times[0], dt, self.values[i].clone()).expect("grid invariants")
    }

    /// Row `i` multiplied back by `scale`.
    pub fn raw_row(&self, i: usize) -> ComplexTrace {
        self.row(i).scaled(Complex64::new(self.scale, 0.0))
    }

    /// Column at time index `j` (one spectral cut).
    pub fn column(&self, j: usize) -> Vec<Complex64> {
        self.values.iter().map(|r| r[j]).collect()
    }

    /// Writes the portrait CSV: a `time_ns,<t0>,<t1>,...` header row, then
    /// one row per detuning `<detuning_rad_per_ns>,<re;im>,<re;im>,...`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["time_ns".to_string()];
        header.extend(self.times.iter().map(|t| t.to_string()));
        wr.write_record(&header)?;
        for (d, row) in self.detunings.iter().zip(&self.values) {
            let mut rec = vec![d.to_string()];
            rec.extend(row.iter().map(|v| format!("{};{}", v.re, v.im)));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(r);
        let mut records = rd.records();
        let header = records.next().ok_or_else(|| Error::Parse("empty portrait CSV".into()))??;
        if header.get(0) != Some("time_ns") {
            return Err(Error::Parse("portrait CSV must start with time_ns".into()));
        }
        let num = |s: &str, line: usize| -> Result<f64> {
            s.parse::<f64>().map_err(|e| Error::Parse(format!("line {line}: {e}")))
        };
        let times = header.iter().skip(1).map(|s| num(s, 1)).collect::<Result<Vec<_>>>()?;
        let mut detunings = Vec::new();
        let mut values = Vec::new();
        for (k, rec) in records.enumerate() {
            let rec = rec?;
            let line = k + 2;
            detunings.push(num(rec.get(0).unwrap_or(""), line)?);
            let row = rec
                .iter()
                .skip(1)
                .map(|cell| {
                    let (re, im) = cell
                        .split_once(';')
                        .ok_or_else(|| Error::Parse(format!("line {line}: cell '{cell}' is not re;im")))?;
                    Ok(Complex64::new(num(re, line)?, num(im, line)?))
                })
                .collect::<Result<Vec<_>>>()?;
            values.push(row);
        }
        Self::new(detunings, times, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PortraitGrid {
        PortraitGrid::new(
            vec![-1.0, 0.0, 2.5],
            vec![0.0, 0.5, 1.0, 1.5],
            (0..3).map(|i| (0..4).map(|j| Complex64::new(i as f64, -(j as f64) * 0.25)).collect()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn invariants() {
        assert!(PortraitGrid::new(vec![1.0, 0.0], vec![0.0], vec![vec![Complex64::default()]; 2]).is_err());
        assert!(PortraitGrid::new(vec![0.0], vec![0.0, 1.0], vec![vec![Complex64::default()]]).is_err());
        assert!(PortraitGrid::new(vec![], vec![0.0], vec![]).is_err());
        assert_eq!(small().shape(), (3, 4));
    }

    #[test]
    fn normalization_keeps_raw_rows() {
        let g = small();
        let raw = g.row(2);
        let n = g.clone().normalized_to_max();
        assert!((n.max_abs() - 1.0).abs() < 1e-15);
        let back = n.raw_row(2);
        for (a, b) in back.samples().iter().zip(raw.samples()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn csv_round_trip() {
        let g = small();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("time_ns,0,0.5,1,1.5\n-1,0;-0,0;-0.25,"));
        let back = PortraitGrid::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.values(), g.values());
        assert_eq!(back.detunings(), g.detunings());
    }
}
