//! Damped least-squares extraction of emitter, drive and filter parameters
//! from filtered traces, using the closed-form model of
//! [`crate::input_output::ModelParams`].
//!
//! Rates `gamma`, `kappa` and the gain are fitted in log space so they stay
//! positive. All other free parameters are clamped to their bounds.
//! Fitting `beta` and `gain` together is refused: one trace cannot separate
//! them.

mod guess;
mod lm;
mod portrait;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::input_output::{ModelParams, PARAM_NAMES};
use crate::trace::ComplexTrace;

pub use guess::{initial_guess, KnownParams};
pub use portrait::{fit_portrait, PortraitRowFit};

/// A parameter of the closed-form model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Alpha,
    Gamma,
    Beta,
    DeltaQd,
    DeltaDa,
    Kappa,
    Gain,
    Phase,
    OffsetRe,
    OffsetIm,
}

impl Param {
    pub const ALL: [Param; 10] = [
        Param::Alpha,
        Param::Gamma,
        Param::Beta,
        Param::DeltaQd,
        Param::DeltaDa,
        Param::Kappa,
        Param::Gain,
        Param::Phase,
        Param::OffsetRe,
        Param::OffsetIm,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        PARAM_NAMES[self.index()]
    }

    /// Fitted through its logarithm.
    pub fn is_log(self) -> bool {
        matches!(self, Param::Gamma | Param::Kappa | Param::Gain)
    }

    /// Carries units of angular frequency.
    pub fn is_frequency(self) -> bool {
        matches!(self, Param::Gamma | Param::Kappa | Param::DeltaQd | Param::DeltaDa)
    }

    pub fn get(self, p: &ModelParams) -> f64 {
        p.to_array()[self.index()]
    }

    pub fn set(self, p: &mut ModelParams, value: f64) {
        let mut a = p.to_array();
        a[self.index()] = value;
        *p = ModelParams::from_array(&a);
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Param::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            Error::Parse(format!("unknown fit parameter '{s}' (expected one of {})", PARAM_NAMES.join(", ")))
        })
    }
}

/// Residual definition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// Real and imaginary parts jointly.
    #[default]
    Complex,
    /// Magnitudes only.
    Magnitude,
}

/// Unit of the internal frequency coordinates. The optimum does not depend
/// on this choice; the numerical path does slightly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitUnits {
    #[default]
    RadPerNs,
    Mhz,
}

impl FitUnits {
    /// Size of one unit in rad/ns.
    pub fn scale(self) -> f64 {
        match self {
            FitUnits::RadPerNs => 1.0,
            FitUnits::Mhz => 2.0 * std::f64::consts::PI * 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Stop when an accepted step lowers the loss by less than this fraction.
    pub ftol: f64,
    /// Stop when the step is this small relative to the parameter vector.
    pub xtol: f64,
    /// Number of starts; extra starts are drawn uniformly inside the bounds.
    pub starts: usize,
    pub seed: u64,
    pub units: FitUnits,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_iterations: 200, ftol: 1e-12, xtol: 1e-10, starts: 1, seed: 0, units: FitUnits::RadPerNs }
    }
}

/// Everything about a fit except the data.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSpec {
    /// Starting point; also supplies the values of fixed parameters.
    pub initial: ModelParams,
    /// Free parameters with their `(lower, upper)` bounds.
    pub free: BTreeMap<Param, (f64, f64)>,
    pub mode: FitMode,
    /// Per-sample weights.
    pub weights: Option<Vec<f64>>,
    pub options: FitOptions,
}

impl FitSpec {
    /// All parameters fixed at `initial`.
    pub fn new(initial: ModelParams) -> Self {
        Self { initial, free: BTreeMap::new(), mode: FitMode::Complex, weights: None, options: FitOptions::default() }
    }

    pub fn free(mut self, p: Param, lower: f64, upper: f64) -> Self {
        self.free.insert(p, (lower, upper));
        self
    }

    pub fn fix(mut self, p: Param, value: f64) -> Self {
        self.free.remove(&p);
        p.set(&mut self.initial, value);
        self
    }

    pub fn with_mode(mut self, mode: FitMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_options(mut self, options: FitOptions) -> Self {
        self.options = options;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.free.is_empty() {
            return Err(Error::Config("no free parameters".into()));
        }
        if self.free.contains_key(&Param::Beta) && self.free.contains_key(&Param::Gain) {
            return Err(Error::Config(
                "beta and gain cannot both be free: one trace does not separate them; fix one".into(),
            ));
        }
        for (&p, &(lo, hi)) in &self.free {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!("{p}: bounds must be finite with lower < upper")));
            }
            if p.is_log() && lo <= 0.0 {
                return Err(Error::Config(format!("{p}: lower bound must be > 0")));
            }
            let v = p.get(&self.initial);
            if !(v >= lo && v <= hi) {
                return Err(Error::Config(format!("{p}: initial value {v} outside [{lo}, {hi}]")));
            }
        }
        if let Some(w) = &self.weights {
            if w.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                return Err(Error::Config("weights must be finite and >= 0".into()));
            }
        }
        if self.options.max_iterations == 0 || self.options.starts == 0 {
            return Err(Error::Config("max_iterations and starts must be >= 1".into()));
        }
        Ok(())
    }

    fn coords(&self) -> Coords {
        let unit = self.options.units.scale();
        let params: Vec<Param> = self.free.keys().copied().collect();
        let to_u = |p: Param, v: f64| {
            let v = if p.is_frequency() { v / unit } else { v };
            if p.is_log() {
                v.ln()
            } else {
                v
            }
        };
        let lower = params.iter().map(|&p| to_u(p, self.free[&p].0)).collect();
        let upper = params.iter().map(|&p| to_u(p, self.free[&p].1)).collect();
        Coords { params, unit, lower, upper, base: self.initial }
    }
}

/// Map between free-parameter coordinates and [`ModelParams`].
struct Coords {
    params: Vec<Param>,
    unit: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    base: ModelParams,
}

impl Coords {
    fn to_internal(&self, m: &ModelParams) -> Vec<f64> {
        self.params
            .iter()
            .map(|&p| {
                let v = p.get(m);
                let v = if p.is_frequency() { v / self.unit } else { v };
                if p.is_log() {
                    v.ln()
                } else {
                    v
                }
            })
            .collect()
    }

    fn from_internal(&self, u: &[f64]) -> ModelParams {
        let mut m = self.base;
        for (&p, &x) in self.params.iter().zip(u) {
            let v = if p.is_log() { x.exp() } else { x };
            p.set(&mut m, if p.is_frequency() { v * self.unit } else { v });
        }
        m
    }

    /// `d value / d u` at `value`.
    fn derivative(&self, p: Param, value: f64) -> f64 {
        if p.is_log() {
            value
        } else if p.is_frequency() {
            self.unit
        } else {
            1.0
        }
    }
}

/// Data plus fit specification.
#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem {
    pub data: ComplexTrace,
    pub spec: FitSpec,
}

impl FitProblem {
    pub fn new(data: ComplexTrace, spec: FitSpec) -> Self {
        Self { data, spec }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if let Some(w) = &self.spec.weights {
            if w.len() != self.data.len() {
                return Err(Error::Config(format!("{} weights for {} samples", w.len(), self.data.len())));
            }
        }
        if self.data.samples().iter().all(|z| *z == Complex64::default()) {
            return Err(Error::Degenerate("data are identically zero".into()));
        }
        Ok(())
    }

    fn weight(&self, n: usize) -> f64 {
        self.spec.weights.as_ref().map_or(1.0, |w| w[n])
    }

    /// Weighted residuals `model - data`.
    pub fn residuals(&self, params: &ModelParams) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(2 * self.data.len());
        for (n, d) in self.data.samples().iter().enumerate() {
            let m = params.eval(self.data.time(n))?;
            let w = self.weight(n);
            match self.spec.mode {
                FitMode::Complex => {
                    out.push(w * (m.re - d.re));
                    out.push(w * (m.im - d.im));
                }
                FitMode::Magnitude => out.push(w * (m.norm() - d.norm())),
            }
        }
        Ok(out)
    }

    /// Sum of squared residuals.
    pub fn loss(&self, params: &ModelParams) -> Result<f64> {
        Ok(self.residuals(params)?.iter().map(|r| r * r).sum())
    }

    /// Gradient of [`FitProblem::loss`] with respect to the free parameters
    /// (physical units), ordered as [`FitProblem::free_params`].
    pub fn loss_gradient(&self, params: &ModelParams) -> Result<Vec<f64>> {
        let coords = self.spec.coords();
        let u = coords.to_internal(params);
        let f = |u: &[f64]| self.residuals(&coords.from_internal(u));
        let r = f(&u)?;
        let jac = lm::jacobian(&f, &u, r.len())?;
        let g = jac.transpose() * nalgebra::DVector::from_vec(r) * 2.0;
        Ok(coords.params.iter().enumerate().map(|(j, &p)| g[j] / coords.derivative(p, p.get(params))).collect())
    }

    pub fn free_params(&self) -> Vec<Param> {
        self.spec.free.keys().copied().collect()
    }

    /// `data - model`, or the magnitude difference in the real part for
    /// magnitude fits.
    pub fn residual_trace(&self, params: &ModelParams) -> Result<ComplexTrace> {
        let samples = self
            .data
            .samples()
            .iter()
            .enumerate()
            .map(|(n, d)| {
                let m = params.eval(self.data.time(n))?;
                Ok(match self.spec.mode {
                    FitMode::Complex => d - m,
                    FitMode::Magnitude => Complex64::new(d.norm() - m.norm(), 0.0),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ComplexTrace::new(self.data.t0(), self.data.dt(), samples)
    }
}

/// Fitted parameters with diagnostics. Frequencies are in rad/ns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: ModelParams,
    /// Linearized standard errors of the free parameters; `null` where the
    /// data do not constrain the parameter.
    pub std_errors: BTreeMap<String, Option<f64>>,
    pub free_parameters: Vec<String>,
    pub mode: FitMode,
    /// Root-mean-square residual.
    pub residual: f64,
    pub loss: f64,
    pub iterations: usize,
    pub converged: bool,
    pub message: String,
    /// Loss after every accepted iteration, starting with the initial loss.
    pub loss_history: Vec<f64>,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn std_error(&self, p: Param) -> Option<f64> {
        self.std_errors.get(p.name()).copied().flatten()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit result serializes")
    }
}

/// Singular directions and standard errors from the final Jacobian.
fn covariance(jac: &DMatrix<f64>, loss: f64, coords: &Coords, params: &ModelParams) -> (Vec<Option<f64>>, Vec<String>) {
    let (m, n) = jac.shape();
    let mut norms: Vec<f64> = (0..n).map(|j| jac.column(j).norm()).collect();
    // columns at roundoff level carry no information
    let largest = norms.iter().copied().fold(0.0, f64::max);
    let mut warnings = Vec::new();
    for j in 0..n {
        if norms[j] <= 1e-7 * largest {
            norms[j] = 0.0;
            warnings.push(format!("loss is flat in {} at the solution", coords.params[j]));
        }
    }
    let mut scaled = jac.clone();
    for j in 0..n {
        if norms[j] > 0.0 {
            scaled.column_mut(j).scale_mut(1.0 / norms[j]);
        } else {
            scaled.column_mut(j).fill(0.0);
        }
    }
    let svd = scaled.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let s_max = svd.singular_values.max();
    let mut undetermined = vec![false; n];
    let mut pinv = DMatrix::<f64>::zeros(n, n);
    for k in 0..svd.singular_values.len() {
        let s = svd.singular_values[k];
        let row = v_t.row(k);
        if s <= 1e-8 * s_max || s == 0.0 {
            let names: Vec<String> = (0..n)
                .filter(|&j| row[j].abs() > 0.3 && norms[j] > 0.0)
                .map(|j| {
                    undetermined[j] = true;
                    format!("{:+.2}*{}", row[j], coords.params[j])
                })
                .collect();
            if !names.is_empty() {
                warnings.push(format!("rank-deficient Jacobian; unidentifiable direction {}", names.join(" ")));
            }
            continue;
        }
        pinv += row.transpose() * row / (s * s);
    }
    for j in 0..n {
        if norms[j] == 0.0 {
            undetermined[j] = true;
        }
    }
    let dof = m as f64 - n as f64;
    let s2 = if dof > 0.0 { loss / dof } else { f64::NAN };
    let errors = (0..n)
        .map(|j| {
            if undetermined[j] || !s2.is_finite() {
                return None;
            }
            let var_u = s2 * pinv[(j, j)] / (norms[j] * norms[j]);
            let p = coords.params[j];
            Some(var_u.sqrt() * coords.derivative(p, p.get(params)).abs())
        })
        .collect();
    (errors, warnings)
}

/// Minimizes the loss of `problem` from `problem.spec.initial` (and extra
/// random starts when requested). Deterministic for identical inputs.
pub fn fit(problem: &FitProblem) -> Result<FitResult> {
    problem.validate()?;
    let spec = &problem.spec;
    let coords = spec.coords();
    let f = |u: &[f64]| problem.residuals(&coords.from_internal(u));
    let data_norm: f64 = problem.data.samples().iter().map(|z| z.norm_sqr()).sum();
    let settings = lm::LmSettings {
        max_iterations: spec.options.max_iterations,
        ftol: spec.options.ftol,
        xtol: spec.options.xtol,
        loss_floor: 1e-30 * data_norm,
    };
    let mut starts = vec![coords.to_internal(&spec.initial)];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.options.seed);
    for _ in 1..spec.options.starts {
        starts.push(coords.lower.iter().zip(&coords.upper).map(|(lo, hi)| rng.random_range(*lo..=*hi)).collect());
    }
    let mut best: Option<lm::LmOutcome> = None;
    for (k, u0) in starts.iter().enumerate() {
        match lm::minimize(&f, u0, &coords.lower, &coords.upper, settings) {
            Ok(out) => {
                if best.as_ref().is_none_or(|b| out.loss < b.loss) {
                    best = Some(out);
                }
            }
            // a random start may land where the model is undefined
            Err(e) if k > 0 => log::debug!("start {k} failed: {e}"),
            Err(e) => return Err(e),
        }
    }
    let out = best.expect("at least one start");
    let params = coords.from_internal(&out.u);
    let (errors, mut warnings) = covariance(&out.jacobian, out.loss, &coords, &params);
    if !out.converged {
        warnings.push(format!("did not converge in {} iterations", out.iterations));
    }
    let std_errors = coords.params.iter().zip(errors).map(|(p, e)| (p.name().to_string(), e)).collect();
    let n_res = out.residuals.len().max(1) as f64;
    Ok(FitResult {
        params,
        std_errors,
        free_parameters: coords.params.iter().map(|p| p.name().to_string()).collect(),
        mode: spec.mode,
        residual: (out.loss / n_res).sqrt(),
        loss: out.loss,
        iterations: out.iterations,
        converged: out.converged,
        message: out.message,
        loss_history: out.history,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter_chain::add_noise;
    use crate::input_output::detuned_fit_model;
    use crate::units::mhz_to_rad_per_ns;

    pub(super) fn truth() -> ModelParams {
        let gamma = mhz_to_rad_per_ns(1.5);
        ModelParams {
            alpha: gamma.sqrt(),
            gamma,
            beta: 0.9,
            delta_qd: mhz_to_rad_per_ns(0.12),
            delta_da: 0.0,
            kappa: mhz_to_rad_per_ns(2.5),
            gain: 1.0,
            phase: 0.3,
            offset_re: 0.0,
            offset_im: 0.0,
        }
    }

    fn data(p: &ModelParams, noise_fraction: f64, seed: u64) -> ComplexTrace {
        let clean = detuned_fit_model(p, -400.0, 2.0, 1200).unwrap();
        add_noise(&clean, noise_fraction * clean.max_abs(), seed, 0)
    }

    fn spec(start: ModelParams) -> FitSpec {
        let t = truth();
        FitSpec::new(start)
            .free(Param::Alpha, 0.01 * t.alpha, 100.0 * t.alpha)
            .free(Param::Gamma, 0.1 * t.gamma, 10.0 * t.gamma)
            .free(Param::Kappa, 0.1 * t.kappa, 10.0 * t.kappa)
            .free(Param::DeltaQd, -0.05, 0.05)
            .free(Param::Gain, 0.01, 100.0)
            .free(Param::Phase, -10.0, 10.0)
    }

    fn perturbed() -> ModelParams {
        let mut s = truth();
        s.alpha *= 1.2;
        s.gamma *= 0.8;
        s.kappa *= 1.25;
        s.delta_qd = 0.0;
        s.gain = 0.9;
        s.phase = 0.1;
        s
    }

    #[test]
    fn param_names_round_trip() {
        for p in Param::ALL {
            assert_eq!(p.name().parse::<Param>().unwrap(), p);
        }
        assert!("omega".parse::<Param>().is_err());
    }

    #[test]
    fn noiseless_recovery() {
        let t = truth();
        let problem = FitProblem::new(data(&t, 0.0, 0), spec(perturbed()));
        let r = fit(&problem).unwrap();
        assert!(r.converged, "{}", r.message);
        for p in [Param::Alpha, Param::Gamma, Param::Kappa, Param::DeltaQd, Param::Gain] {
            let rel = (p.get(&r.params) - p.get(&t)).abs() / p.get(&t).abs();
            assert!(rel < 1e-4, "{p}: {rel}");
        }
        let signal: f64 = problem.data.samples().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(r.loss.sqrt() < 1e-8 * signal);
    }

    #[test]
    fn noisy_round_trip() {
        let t = truth();
        let problem = FitProblem::new(data(&t, 0.01, 7), spec(perturbed()));
        let r = fit(&problem).unwrap();
        assert!(r.converged);
        assert!((r.params.gamma / t.gamma - 1.0).abs() < 0.02);
        assert!((r.params.kappa / t.kappa - 1.0).abs() < 0.02);
        assert!((r.params.delta_qd - t.delta_qd).abs() < mhz_to_rad_per_ns(0.01));
        assert!(r.std_error(Param::Gamma).unwrap() > 0.0);
        assert!(r.loss_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn starting_at_optimum() {
        let t = truth();
        let problem = FitProblem::new(data(&t, 0.0, 0), spec(t));
        let r = fit(&problem).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 2);
    }

    #[test]
    fn magnitude_mode() {
        let t = truth();
        // the magnitude is stationary in delta_qd at zero, so start away from it
        let start = ModelParams { delta_qd: 0.5 * t.delta_qd, ..perturbed() };
        let s = spec(start).fix(Param::Phase, 0.0).with_mode(FitMode::Magnitude);
        let r = fit(&FitProblem::new(data(&t, 0.0, 0), s)).unwrap();
        assert!((r.params.gamma / t.gamma - 1.0).abs() < 1e-3);
        assert!((r.params.kappa / t.kappa - 1.0).abs() < 1e-3);
    }

    #[test]
    fn unit_choice_does_not_move_the_optimum() {
        let t = truth();
        let d = data(&t, 0.01, 3);
        let tight = FitOptions { ftol: 1e-15, xtol: 1e-13, ..FitOptions::default() };
        let a = fit(&FitProblem::new(d.clone(), spec(perturbed()).with_options(tight))).unwrap();
        let mhz = FitOptions { units: FitUnits::Mhz, ..tight };
        let b = fit(&FitProblem::new(d, spec(perturbed()).with_options(mhz))).unwrap();
        for p in [Param::Alpha, Param::Gamma, Param::Kappa, Param::DeltaQd, Param::Gain, Param::Phase] {
            let (x, y) = (p.get(&a.params), p.get(&b.params));
            assert!((x - y).abs() <= 1e-8 * x.abs().max(y.abs()), "{p}: {x} vs {y}");
        }
    }

    #[test]
    fn gradient_matches_loss_differences() {
        let t = truth();
        let problem = FitProblem::new(data(&t, 0.01, 11), spec(perturbed()));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = fit(&problem).unwrap();
        for at in [perturbed(), r.params] {
            let grad = problem.loss_gradient(&at).unwrap();
            let free = problem.free_params();
            let v: Vec<f64> = free.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
            // direction in physical units, sized to each parameter
            let scale: Vec<f64> = free.iter().map(|p| 1e-5 * p.get(&at).abs().max(1e-4)).collect();
            let eps = 1.0;
            let shifted = |sign: f64| {
                let mut m = at;
                for ((p, vi), s) in free.iter().zip(&v).zip(&scale) {
                    p.set(&mut m, p.get(&at) + sign * eps * vi * s);
                }
                problem.loss(&m).unwrap()
            };
            let fd = (shifted(1.0) - shifted(-1.0)) / (2.0 * eps);
            let analytic: f64 = grad.iter().zip(&v).zip(&scale).map(|((g, vi), s)| g * vi * s).sum();
            let loss = problem.loss(&at).unwrap();
            assert!((fd - analytic).abs() <= 1e-4 * fd.abs().max(1e-6 * loss), "{fd} vs {analytic}");
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let t = truth();
        let d = data(&t, 0.0, 0);
        let both = FitSpec::new(t).free(Param::Beta, 0.1, 1.0).free(Param::Gain, 0.1, 10.0);
        assert!(matches!(fit(&FitProblem::new(d.clone(), both)), Err(Error::Config(_))));
        let outside = FitSpec::new(t).free(Param::Gamma, 1.0, 2.0);
        assert!(matches!(fit(&FitProblem::new(d.clone(), outside)), Err(Error::Config(_))));
        let negative_log = FitSpec::new(t).free(Param::Kappa, -1.0, 2.0);
        assert!(fit(&FitProblem::new(d.clone(), negative_log)).is_err());
        assert!(fit(&FitProblem::new(d.clone(), FitSpec::new(t))).is_err());
        let zeros = ComplexTrace::new(0.0, 1.0, vec![Complex64::default(); 50]).unwrap();
        assert!(matches!(fit(&FitProblem::new(zeros, spec(t))), Err(Error::Degenerate(_))));
    }

    #[test]
    fn flags_phase_in_magnitude_mode() {
        let t = truth();
        // phase is invisible in magnitude mode
        let s = spec(perturbed()).with_mode(FitMode::Magnitude);
        let r = fit(&FitProblem::new(data(&t, 0.0, 0), s)).unwrap();
        assert!(r.warnings.iter().any(|w| w.contains("phase")));
        assert_eq!(r.std_error(Param::Phase), None);
    }

    #[test]
    fn multi_start_is_deterministic() {
        let t = truth();
        let opts = FitOptions { starts: 3, seed: 9, ..FitOptions::default() };
        let p = FitProblem::new(data(&t, 0.01, 1), spec(perturbed()).with_options(opts));
        assert_eq!(fit(&p).unwrap(), fit(&p).unwrap());
    }

    #[test]
    fn json_keys_are_stable() {
        let t = truth();
        let r = fit(&FitProblem::new(data(&t, 0.0, 0), spec(t))).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in ["params", "std_errors", "free_parameters", "residual", "iterations", "converged", "loss_history"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        for name in PARAM_NAMES {
            assert!(v["params"].get(name).is_some(), "{name}");
        }
        let back: FitResult = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back.params, r.params);
    }
}
