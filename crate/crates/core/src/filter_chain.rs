//! Measurement chain: one-pole amplifier filter, heterodyne raw-signal
//! synthesis and envelope demodulation.
//!
//! The amplifier acts on the field as the causal convolution
//! `y(t) = sqrt(G) * integral x(tau) e^{-(i w + kappa)(t - tau)} dtau + noise`,
//! where `w` is the filter center in the frame of the trace. It is evaluated
//! with an exponential recursion that integrates a piecewise-linear input
//! exactly over each step.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numeric::{exprel, phi2};
use crate::params::FilterParams;
use crate::trace::{ComplexTrace, RealTrace};

/// Filter memory `m(t) = integral x(tau) e^{-p (t - tau)} dtau` (before gain).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FilterState {
    pub memory: Complex64,
    pub time: f64,
}

/// Deterministic noise generator for a (seed, stream) pair. Each portrait
/// row uses its own stream so results do not depend on evaluation order.
pub fn noise_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Complex Gaussian sample with `E|n|^2 = sigma^2`.
fn complex_gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> Complex64 {
    let s = sigma / std::f64::consts::SQRT_2;
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Adds seeded complex Gaussian noise of standard deviation `sigma` per sample.
pub fn add_noise(trace: &ComplexTrace, sigma: f64, seed: u64, stream: u64) -> ComplexTrace {
    if sigma == 0.0 {
        return trace.clone();
    }
    let mut rng = noise_rng(seed, stream);
    let samples = trace.samples().iter().map(|s| s + complex_gaussian(&mut rng, sigma)).collect();
    ComplexTrace::new(trace.t0(), trace.dt(), samples).expect("same grid")
}

/// Applies the amplifier filter starting from an empty memory.
pub fn filter_apply(input: &ComplexTrace, filter: &FilterParams) -> Result<ComplexTrace> {
    filter_apply_stream(input, filter, FilterState { memory: Complex64::default(), time: input.t0() }, 0)
        .map(|(t, _)| t)
}

/// Applies the filter from a given memory state; returns the output and the
/// final state.
pub fn filter_apply_from(
    input: &ComplexTrace,
    filter: &FilterParams,
    state: FilterState,
) -> Result<(ComplexTrace, FilterState)> {
    filter_apply_stream(input, filter, state, 0)
}

/// As [`filter_apply_from`], drawing noise from RNG stream `stream`.
pub fn filter_apply_stream(
    input: &ComplexTrace,
    filter: &FilterParams,
    state: FilterState,
    stream: u64,
) -> Result<(ComplexTrace, FilterState)> {
    filter.validate()?;
    let p = Complex64::new(filter.kappa, filter.omega_amp);
    let dt = input.dt();
    // Inputs sampled coarser than 1/(10 kappa) are refined by cubic
    // interpolation before the recursion; the output is read back on the
    // original grid.
    let refine = ((dt * 10.0 * filter.kappa).ceil() as usize).max(1);
    let h = dt / refine as f64;
    let z = -p * h;
    let decay = z.exp();
    let w_now = h * exprel(z);
    let w_ramp = h * phi2(z);

    let mut m = state.memory;
    let mut out = Vec::with_capacity(input.len());
    out.push(m);
    let xs = input.samples();
    let mut x_prev = xs[0];
    for n in 0..input.len() - 1 {
        for k in 1..=refine {
            let x_next = if k == refine { xs[n + 1] } else { input.value_at(input.time(n) + k as f64 * h) };
            m = decay * m + w_now * x_prev + w_ramp * (x_next - x_prev);
            x_prev = x_next;
        }
        out.push(m);
    }
    let final_state = FilterState { memory: m, time: input.t_end() };
    let mut rng = noise_rng(filter.seed, stream);
    let samples = out
        .into_iter()
        .map(|m| {
            let y = m * filter.gain;
            if filter.noise_sigma > 0.0 {
                y + complex_gaussian(&mut rng, filter.noise_sigma)
            } else {
                y
            }
        })
        .collect();
    Ok((ComplexTrace::new(input.t0(), dt, samples)?, final_state))
}

/// Steady-state complex gain for an input tone offset by `delta` (rad/ns)
/// from the filter center: `sqrt(G) / (kappa - i delta)`.
pub fn filter_frequency_response(filter: &FilterParams, delta: f64) -> Complex64 {
    filter.gain / Complex64::new(filter.kappa, -delta)
}

/// How repeated acquisitions are emulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AveragingMode {
    /// One noise draw with `sigma / sqrt(runs)`.
    Analytic,
    /// `runs` independent noise draws, averaged.
    MonteCarlo,
}

/// Noisy average of `runs` acquisitions of a clean signal.
pub fn average_runs(
    signal: &ComplexTrace,
    sigma: f64,
    runs: usize,
    seed: u64,
    mode: AveragingMode,
) -> Result<ComplexTrace> {
    if runs == 0 {
        return Err(Error::InvalidParameter("runs must be >= 1".into()));
    }
    match mode {
        AveragingMode::Analytic => Ok(add_noise(signal, sigma / (runs as f64).sqrt(), seed, 0)),
        AveragingMode::MonteCarlo => {
            let mut acc = vec![Complex64::default(); signal.len()];
            for r in 0..runs {
                let noisy = add_noise(signal, sigma, seed, r as u64);
                for (a, s) in acc.iter_mut().zip(noisy.samples()) {
                    *a += s;
                }
            }
            let inv = 1.0 / runs as f64;
            ComplexTrace::new(signal.t0(), signal.dt(), acc.into_iter().map(|a| a * inv).collect())
        }
    }
}

/// Digitized voltage `Re[x(t) e^{-i 2 pi f_if t}]` sampled at `sample_rate`.
///
/// Frequencies are ordinary (GHz = 1/ns), `sample_rate` in samples per ns.
pub fn synthesize_raw_signal(trace: &ComplexTrace, f_if: f64, sample_rate: f64) -> Result<RealTrace> {
    if !(f_if > 0.0) {
        return Err(Error::InvalidParameter("intermediate frequency must be > 0".into()));
    }
    if !(sample_rate > 4.0 * f_if) {
        return Err(Error::InvalidParameter(format!(
            "sample rate {sample_rate} must exceed 4 x f_IF = {}",
            4.0 * f_if
        )));
    }
    let dt = 1.0 / sample_rate;
    let span = trace.t_end() - trace.t0();
    let len = (span / dt).floor() as usize + 1;
    let w = std::f64::consts::TAU * f_if;
    let samples = (0..len)
        .map(|n| {
            let t = trace.t0() + n as f64 * dt;
            (trace.value_at(t) * Complex64::from_polar(1.0, -w * t)).re
        })
        .collect();
    Ok(RealTrace { t0: trace.t0(), dt, samples })
}

/// Complex envelope of a real heterodyne record: mix down by `f_if`,
/// low-pass with a zero-phase (forward-backward) one-pole filter of corner
/// `lp_bandwidth`, and double to restore the amplitude.
pub fn demodulate_envelope(raw: &RealTrace, f_if: f64, lp_bandwidth: f64) -> Result<ComplexTrace> {
    if !(lp_bandwidth > 0.0 && lp_bandwidth < f_if / 2.0) {
        return Err(Error::InvalidParameter(format!(
            "low-pass bandwidth {lp_bandwidth} must be in (0, f_IF/2 = {})",
            f_if / 2.0
        )));
    }
    if raw.is_empty() {
        return Err(Error::InvalidParameter("empty raw record".into()));
    }
    let w = std::f64::consts::TAU * f_if;
    let mixed: Vec<Complex64> =
        raw.samples.iter().enumerate().map(|(n, &v)| v * Complex64::from_polar(1.0, w * raw.time(n))).collect();
    let a = (-std::f64::consts::TAU * lp_bandwidth * raw.dt).exp();
    // Mirror-pad by three filter time constants so both passes start
    // settled, and seed each pass with the mean over one IF period so the
    // start-up carries no image component.
    let n = mixed.len();
    let pad = ((3.0 / (std::f64::consts::TAU * lp_bandwidth * raw.dt)).ceil() as usize).min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend(mixed[1..=pad].iter().rev());
    ext.extend_from_slice(&mixed);
    ext.extend(mixed[n - 1 - pad..n - 1].iter().rev());
    let period = ((1.0 / (f_if * raw.dt)).round() as usize).clamp(1, ext.len());
    let mean = |s: &[Complex64]| s.iter().sum::<Complex64>() / s.len() as f64;

    let mut fwd = Vec::with_capacity(ext.len());
    let mut y = mean(&ext[..period]);
    for &x in &ext {
        y = a * y + (1.0 - a) * x;
        fwd.push(y);
    }
    let mut back = vec![Complex64::default(); fwd.len()];
    let mut y = mean(&fwd[fwd.len() - period..]);
    for (i, &x) in fwd.iter().enumerate().rev() {
        y = a * y + (1.0 - a) * x;
        back[i] = 2.0 * y;
    }
    let out = back[pad..pad + n].to_vec();
    ComplexTrace::new(raw.t0, raw.dt, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{linear_fit, relative_l2, unwrap_phase};

    fn filt(kappa: f64, center: f64, gain: f64) -> FilterParams {
        FilterParams::new(center, kappa, gain).unwrap()
    }

    /// Trapezoidal quadrature of the convolution integral, O(N^2).
    fn brute_force(input: &ComplexTrace, f: &FilterParams) -> Vec<Complex64> {
        let p = Complex64::new(f.kappa, f.omega_amp);
        let xs = input.samples();
        let h = input.dt();
        (0..input.len())
            .map(|n| {
                let t = input.time(n);
                let mut acc = Complex64::default();
                for k in (0..=n).filter(|_| n > 0) {
                    let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                    acc += w * xs[k] * (-p * (t - input.time(k))).exp();
                }
                acc * h * f.gain
            })
            .collect()
    }

    #[test]
    fn constant_input_settles_to_gain_over_kappa() {
        let f = filt(0.5, 0.0, 3.0);
        let a = Complex64::new(0.7, -0.2);
        let input = ComplexTrace::new(0.0, 0.01, vec![a; 6001]).unwrap();
        let out = filter_apply(&input, &f).unwrap();
        let last = *out.samples().last().unwrap();
        assert!((last - 3.0 * a / 0.5).norm() < 1e-6);
        // closed form of the step response: (1 - e^{-kappa t}) / kappa
        for n in [10, 100, 1000] {
            let t = input.time(n);
            let expect = 3.0 * a * (1.0 - (-0.5 * t).exp()) / 0.5;
            assert!((out.samples()[n] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn homogeneous_decay() {
        let f = filt(0.3, 0.2, 1.0);
        let zero = ComplexTrace::new(0.0, 0.05, vec![Complex64::default(); 400]).unwrap();
        let y0 = Complex64::new(0.0, 2.0);
        let (out, st) = filter_apply_from(&zero, &f, FilterState { memory: y0, time: 0.0 }).unwrap();
        for n in 0..out.len() {
            let t = out.time(n);
            assert!((out.samples()[n].norm() - 2.0 * (-0.3 * t).exp()).abs() < 1e-12);
        }
        assert!((st.memory.norm() - 2.0 * (-0.3 * zero.t_end()).exp()).abs() < 1e-12);
    }

    #[test]
    fn matches_brute_force_quadrature() {
        let kappa = 1.0;
        let f = filt(kappa, 0.4, 1.0);
        let dt = 1.0 / (1000.0 * kappa);
        let input =
            ComplexTrace::from_fn(0.0, dt, 3001, |t| Complex64::from_polar((-0.7 * t).exp(), -2.0 * t) + 0.3).unwrap();
        let out = filter_apply(&input, &f).unwrap();
        let oracle = brute_force(&input, &f);
        assert!(relative_l2(out.samples(), &oracle) < 1e-6);
        // closed form of the same convolution
        let q = Complex64::new(0.7, 2.0);
        let p = Complex64::new(kappa, 0.4);
        let exact: Vec<Complex64> = (0..input.len())
            .map(|n| {
                let t = input.time(n);
                ((-q * t).exp() - (-p * t).exp()) / (p - q) + 0.3 * (1.0 - (-p * t).exp()) / p
            })
            .collect();
        assert!(relative_l2(out.samples(), &exact) < 1e-6);
    }

    #[test]
    fn tone_response_matches_frequency_response() {
        let kappa = 0.2;
        let f = filt(kappa, 0.05, 2.0);
        let delta = 0.13;
        let input = ComplexTrace::from_fn(0.0, 0.01, 12001, |t| Complex64::from_polar(1.0, -delta * t)).unwrap();
        let out = filter_apply(&input, &f).unwrap();
        let h = filter_frequency_response(&f, delta - f.omega_amp);
        for n in (0..input.len()).filter(|&n| input.time(n) > 10.0 / kappa) {
            let expect = h * input.samples()[n];
            assert!((out.samples()[n] - expect).norm() / expect.norm() < 1e-4);
        }
    }

    #[test]
    fn frequency_response_points() {
        let f = filt(2.0, 0.0, 4.0);
        assert!((filter_frequency_response(&f, 0.0) - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        let r = filter_frequency_response(&f, 2.0).norm() / filter_frequency_response(&f, 0.0).norm();
        assert!((r - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        // power full width at half maximum is 2 kappa
        let kappa = crate::units::mhz_to_rad_per_ns(2.5);
        let f = filt(kappa, 0.0, 1.0);
        let p = |d: f64| filter_frequency_response(&f, d).norm_sqr();
        let half = p(0.0) / 2.0;
        assert!((p(kappa) - half).abs() < 1e-9 * half);
        assert!((crate::units::rad_per_ns_to_mhz(2.0 * kappa) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn linear_and_time_invariant() {
        let f = filt(0.4, -0.3, 1.5);
        let a = ComplexTrace::from_fn(0.0, 0.02, 2000, |t| Complex64::new(t.sin(), 0.1 * t)).unwrap();
        let b = ComplexTrace::from_fn(0.0, 0.02, 2000, |t| Complex64::new((-t).exp(), t.cos())).unwrap();
        let sum = a.map(|t, s| s + b.value_at(t));
        let fa = filter_apply(&a, &f).unwrap();
        let fb = filter_apply(&b, &f).unwrap();
        let fs = filter_apply(&sum, &f).unwrap();
        for n in 0..fs.len() {
            assert!((fs.samples()[n] - fa.samples()[n] - fb.samples()[n]).norm() < 1e-12);
        }
        // Delay by 150 samples.
        let shift = 150;
        let mut delayed = vec![Complex64::default(); shift];
        delayed.extend_from_slice(&a.samples()[..a.len() - shift]);
        let da = ComplexTrace::new(0.0, 0.02, delayed).unwrap();
        let fda = filter_apply(&da, &f).unwrap();
        for n in shift..fda.len() {
            assert!((fda.samples()[n] - fa.samples()[n - shift]).norm() < 1e-12);
        }
    }

    #[test]
    fn coarse_input_is_refined() {
        let kappa = 1.0;
        let f = filt(kappa, 0.0, 1.0);
        let g = |t: f64| Complex64::from_polar((-0.2 * t).exp(), -0.5 * t);
        let coarse = ComplexTrace::from_fn(0.0, 0.5, 81, g).unwrap();
        let fine = ComplexTrace::from_fn(0.0, 0.0005, 80001, g).unwrap();
        let out_c = filter_apply(&coarse, &f).unwrap();
        let out_f = filter_apply(&fine, &f).unwrap();
        for n in 0..coarse.len() {
            assert!((out_c.samples()[n] - out_f.samples()[n * 1000]).norm() < 1e-3);
        }
    }

    #[test]
    fn errors() {
        let tr = ComplexTrace::new(0.0, 0.1, vec![Complex64::default(); 4]).unwrap();
        let mut f = filt(1.0, 0.0, 1.0);
        f.kappa = 0.0;
        assert!(filter_apply(&tr, &f).is_err());
        f.kappa = -1.0;
        assert!(filter_apply(&tr, &f).is_err());
    }

    #[test]
    fn raw_signal_and_envelope() {
        let f_if = 0.05;
        let rate = 0.8;
        let ones = ComplexTrace::new(0.0, 1.0, vec![Complex64::new(1.0, 0.0); 201]).unwrap();
        let raw = synthesize_raw_signal(&ones, f_if, rate).unwrap();
        for n in 0..raw.len() {
            let t = raw.time(n);
            assert!((raw.samples[n] - (std::f64::consts::TAU * f_if * t).cos()).abs() < 1e-12);
        }
        let zero = ComplexTrace::new(0.0, 1.0, vec![Complex64::default(); 50]).unwrap();
        assert!(synthesize_raw_signal(&zero, f_if, rate).unwrap().samples.iter().all(|v| *v == 0.0));
        assert!(synthesize_raw_signal(&ones, f_if, 0.2).is_err());

        // pure tone at f_IF
        let env = demodulate_envelope(&raw, f_if, 0.005).unwrap();
        for s in env.samples() {
            assert!((s.norm() - 1.0).abs() < 0.01, "{}", s.norm());
        }
        assert!(demodulate_envelope(&raw, f_if, 0.03).is_err());
    }

    #[test]
    fn decaying_envelope_round_trip() {
        let gamma = crate::units::mhz_to_rad_per_ns(1.5);
        let tr =
            ComplexTrace::from_fn(0.0, 0.5, 3001, |t| Complex64::from_polar((-gamma * t / 2.0).exp(), 0.3)).unwrap();
        let raw = synthesize_raw_signal(&tr, 0.05, 0.8).unwrap();
        let env = demodulate_envelope(&raw, 0.05, 0.01).unwrap();
        for n in 0..env.len() {
            let t = env.time(n);
            if t > 100.0 && t < 1300.0 {
                let expect = tr.value_at(t).norm();
                assert!((env.samples()[n].norm() - expect).abs() < 0.02 * expect);
            }
        }
    }

    #[test]
    fn detuned_tone_rotates() {
        let df = 0.002;
        let tr = ComplexTrace::from_fn(0.0, 0.5, 4001, |t| Complex64::from_polar(1.0, -std::f64::consts::TAU * df * t))
            .unwrap();
        let raw = synthesize_raw_signal(&tr, 0.05, 0.8).unwrap();
        let env = demodulate_envelope(&raw, 0.05, 0.01).unwrap();
        let phase = unwrap_phase(env.samples());
        let times: Vec<f64> = (0..env.len()).map(|n| env.time(n)).collect();
        let lo = times.len() / 10;
        let hi = times.len() * 9 / 10;
        let (slope, _) = linear_fit(&times[lo..hi], &phase[lo..hi]);
        let measured = -slope / std::f64::consts::TAU;
        assert!((measured - df).abs() < 0.05 * df, "{measured}");
    }

    #[test]
    fn noise_only_has_no_coherent_component() {
        let f_if = 0.05;
        let dt = 1.25;
        let runs = 400;
        let sigma = 0.3;
        let mut acc = vec![Complex64::default(); 800];
        let mut mean_mag = 0.0;
        let mut mean_mag_double = 0.0;
        for r in 0..runs {
            let mut rng = noise_rng(99, r);
            let samples: Vec<f64> = (0..800)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    sigma * z
                })
                .collect();
            let raw = RealTrace { t0: 0.0, dt, samples: samples.clone() };
            let env = demodulate_envelope(&raw, f_if, 0.01).unwrap();
            let raw2 = RealTrace { t0: 0.0, dt, samples: samples.iter().map(|v| 2.0 * v).collect() };
            let env2 = demodulate_envelope(&raw2, f_if, 0.01).unwrap();
            mean_mag += env.samples()[400].norm();
            mean_mag_double += env2.samples()[400].norm();
            for (a, s) in acc.iter_mut().zip(env.samples()) {
                *a += s;
            }
        }
        // linear in sigma
        assert!((mean_mag_double / mean_mag - 2.0).abs() < 1e-12);
        // per-sample spread of a single envelope
        let spread = (mean_mag / runs as f64) * 2.0 / std::f64::consts::PI.sqrt();
        let bound = 3.0 * spread / (runs as f64).sqrt();
        for n in [100, 400, 700] {
            let avg = acc[n] / runs as f64;
            assert!(avg.norm() < bound, "{} vs {}", avg.norm(), bound);
        }
    }

    #[test]
    fn averaging_modes_agree_in_spread() {
        let clean = ComplexTrace::new(0.0, 1.0, vec![Complex64::new(1.0, 0.0); 4000]).unwrap();
        let sigma = 0.5;
        let runs = 64;
        let std_of =
            |t: &ComplexTrace| (t.samples().iter().map(|s| (s - 1.0).norm_sqr()).sum::<f64>() / t.len() as f64).sqrt();
        let a = average_runs(&clean, sigma, runs, 3, AveragingMode::Analytic).unwrap();
        let m = average_runs(&clean, sigma, runs, 3, AveragingMode::MonteCarlo).unwrap();
        let expect = sigma / (runs as f64).sqrt();
        assert!((std_of(&a) / expect - 1.0).abs() < 0.05);
        assert!((std_of(&m) / expect - 1.0).abs() < 0.05);
        assert_eq!(a, average_runs(&clean, sigma, runs, 3, AveragingMode::Analytic).unwrap());
        assert!(average_runs(&clean, sigma, 0, 3, AveragingMode::Analytic).is_err());
    }
}
