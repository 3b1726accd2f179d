//! Starting values for a fit, read off the shape of the trace.

use num_complex::Complex64;

use crate::analysis::{linear_fit, unwrap_phase};
use crate::error::{Error, Result};
use crate::input_output::ModelParams;

use super::Param;

/// Parameter values the caller already knows; these pass through unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KnownParams([Option<f64>; 10]);

impl KnownParams {
    pub fn with(mut self, p: Param, value: f64) -> Self {
        self.0[p.index()] = Some(value);
        self
    }

    pub fn get(&self, p: Param) -> Option<f64> {
        self.0[p.index()]
    }
}

/// Heuristic starting point:
///
/// * `gamma` from the late log-magnitude slope (times two),
/// * `delta_qd` from the late phase slope,
/// * `kappa` by a coarse scan, with `alpha` solved at each step so the
///   model matches the pre-stop plateau,
/// * `phase` from the plateau argument.
///
/// `beta` defaults to 0.9, `gain` to 1 and the rest to 0.
pub fn initial_guess(data: &crate::trace::ComplexTrace, known: &KnownParams) -> Result<ModelParams> {
    let samples = data.samples();
    let peak = data.max_abs();
    if !(peak > 0.0) {
        return Err(Error::Degenerate("data are identically zero".into()));
    }
    let times = data.times();
    let offset = Complex64::new(known.get(Param::OffsetRe).unwrap_or(0.0), known.get(Param::OffsetIm).unwrap_or(0.0));
    let centered: Vec<Complex64> = samples.iter().map(|z| z - offset).collect();

    let pre: Vec<usize> = (0..samples.len()).filter(|&n| times[n] < 0.0).collect();
    let (t_ref, plateau) = if pre.is_empty() {
        let k = samples.len().min(3);
        (times[0], centered[..k].iter().sum::<Complex64>() / k as f64)
    } else {
        let tail = &pre[pre.len() / 2..];
        (times[tail[0]], tail.iter().map(|&n| centered[n]).sum::<Complex64>() / tail.len() as f64)
    };

    // noise level from the spread of the plateau
    let noise = if pre.len() >= 8 {
        let tail = &pre[pre.len() / 2..];
        (tail.iter().map(|&n| (centered[n] - plateau).norm_sqr()).sum::<f64>() / tail.len() as f64).sqrt()
    } else {
        0.0
    };
    // late decay: samples well above the noise, second half of the time
    // they span after the stop
    let floor = (0.01 * peak).max(5.0 * noise);
    let post: Vec<usize> = (0..samples.len()).filter(|&n| times[n] >= 0.0 && centered[n].norm() > floor).collect();
    let t_last = post.last().map_or(0.0, |&n| times[n]);
    let late: Vec<usize> = post.iter().copied().filter(|&n| times[n] >= 0.5 * t_last).collect();
    let (gamma_fit, delta_fit) = if late.len() >= 4 {
        let t: Vec<f64> = late.iter().map(|&n| times[n]).collect();
        let logm: Vec<f64> = late.iter().map(|&n| centered[n].norm().ln()).collect();
        let phase = unwrap_phase(&late.iter().map(|&n| centered[n]).collect::<Vec<_>>());
        let (slope, _) = linear_fit(&t, &logm);
        let (phase_slope, _) = linear_fit(&t, &phase);
        (Some(-2.0 * slope).filter(|g| *g > 0.0), Some(-phase_slope))
    } else {
        (None, None)
    };
    let span = times[times.len() - 1] - times[0];
    let gamma = known.get(Param::Gamma).or(gamma_fit).unwrap_or(10.0 / span.max(1e-9));

    let mut p = ModelParams {
        alpha: 0.0,
        gamma,
        beta: known.get(Param::Beta).unwrap_or(0.9),
        delta_qd: known.get(Param::DeltaQd).or(delta_fit).unwrap_or(0.0),
        delta_da: known.get(Param::DeltaDa).unwrap_or(0.0),
        kappa: 0.0,
        gain: known.get(Param::Gain).unwrap_or(1.0),
        phase: 0.0,
        offset_re: offset.re,
        offset_im: offset.im,
    };

    let magnitude_loss = |m: &ModelParams| -> f64 {
        samples
            .iter()
            .zip(&times)
            .map(|(d, &t)| m.eval(t).map_or(f64::INFINITY, |v| (v.norm() - d.norm()).powi(2)))
            .sum()
    };
    let solve_alpha = |m: &mut ModelParams| {
        if let Some(a) = known.get(Param::Alpha) {
            m.alpha = a;
            return;
        }
        let target = plateau.norm();
        let level = |a: f64, m: &ModelParams| {
            let mut x = *m;
            x.alpha = a;
            x.offset_re = 0.0;
            x.offset_im = 0.0;
            x.eval(t_ref).map_or(f64::NAN, |v| v.norm())
        };
        let mut hi = gamma.sqrt();
        let mut guard = 0;
        while level(hi, m) < target && guard < 60 {
            hi *= 2.0;
            guard += 1;
        }
        let mut lo = 0.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if level(mid, m) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        m.alpha = 0.5 * (lo + hi);
    };

    if let Some(k) = known.get(Param::Kappa) {
        p.kappa = k;
        solve_alpha(&mut p);
    } else {
        let mut best = (f64::INFINITY, p);
        for i in 0..41 {
            let mut trial = p;
            trial.kappa = gamma * 10f64.powf(-1.0 + 3.0 * i as f64 / 40.0);
            solve_alpha(&mut trial);
            let l = magnitude_loss(&trial);
            if l < best.0 {
                best = (l, trial);
            }
        }
        p = best.1;
    }

    p.phase = match known.get(Param::Phase) {
        Some(ph) => ph,
        None => {
            let mut unit = p;
            unit.phase = 0.0;
            unit.offset_re = 0.0;
            unit.offset_im = 0.0;
            let model = unit.eval(t_ref)?;
            if model.norm() > 0.0 {
                (plateau / model).arg()
            } else {
                0.0
            }
        }
    };
    Ok(p)
}
