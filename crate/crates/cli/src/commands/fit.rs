//! `fit` and `fit-portrait`: closed-form fits of traces and portrait rows.

use std::f64::consts::TAU;
use std::path::PathBuf;

use serde::Serialize;

use portrait_core::fitting::{
    fit as run_fit, fit_portrait as run_fit_portrait, initial_guess, FitMode, FitOptions, FitProblem, FitResult,
    FitSpec, FitUnits, KnownParams, Param, PortraitRowFit,
};
use portrait_core::input_output::{detuned_fit_model, ModelParams};
use portrait_core::units::{mhz_to_rad_per_ns, rad_per_ns_to_mhz};
use portrait_core::{ComplexTrace, PortraitGrid};

use super::filter::read_trace;
use crate::config::{at_least, existing_file, params, positive};
use crate::svg::{export_svg_lines, Series};
use crate::{CliError, Context};

/// Shared fit keys; extra entries are appended to the list.
macro_rules! fit_params {
    ($args:ident => $res:ident, free = [$($free:literal),*] { $($extra:tt)* }) => {
        params! {
            $args => $res {
                mode: String = "complex".into(), "[-] residual: complex (re and im) or magnitude";
                #[arg(value_delimiter = ',')]
                free: Vec<String> = [$($free),*].map(String::from).to_vec(),
                    "[-] free parameters; the rest stay fixed at their start values";
                units: String = "rad_per_ns".into(), "[-] internal frequency coordinates: rad_per_ns or mhz";
                max_iterations: usize = 200, "[-] iteration limit per start";
                starts: usize = 1, "[-] number of starts; extra starts are drawn inside the bounds";
                seed: u64 = 0, "[-] seed of the extra starts";
                range_factor: f64 = 20.0, "[-] alpha, gamma, kappa and gain are bounded to [v/f, v*f] around the start";
                detuning_range_mhz: f64 = 5.0, "[MHz] detunings are bounded to the start ± this";
                $($extra)*
            }
            optional {
                alpha: f64, "[1/sqrt(ns)] start value of the drive amplitude; estimated when missing";
                gamma_mhz: f64, "[MHz] start value of the total decay rate γ/2π; estimated when missing";
                beta: f64, "[-] start value of the radiative fraction (default 0.9)";
                delta_qd_mhz: f64, "[MHz] start value of emitter minus drive frequency; estimated when missing";
                delta_da_mhz: f64, "[MHz] start value of drive minus amplifier center (default 0)";
                kappa_mhz: f64, "[MHz] start value of the amplifier half-bandwidth; estimated when missing";
                gain: f64, "[-] start value of the amplitude gain (default 1)";
                phase: f64, "[rad] start value of the global phase; estimated when missing";
                offset_re: f64, "[-] start value of the real offset (default 0)";
                offset_im: f64, "[-] start value of the imaginary offset (default 0)";
            }
        }
    };
}

fit_params! {
    FitArgs => FitKeys, free = ["alpha", "gamma", "delta_qd", "kappa", "phase"] {}
}

// portrait files are normalized, so the gain has to absorb the lost scale
fit_params! {
    FitPortraitArgs => FitPortraitKeys, free = ["alpha", "gamma", "delta_qd", "kappa", "phase", "gain"] {
        confidence_khz: f64 = 10.0, "[kHz] rows whose delta_qd standard error exceeds this are flagged";
    }
}

#[derive(Debug, clap::Args)]
pub struct FitCmd {
    #[arg(value_name = "TRACE", value_parser = existing_file, help = "[path] trace CSV with columns t_ns,re,im")]
    pub input: PathBuf,
    #[command(flatten)]
    pub keys: FitArgs,
}

#[derive(Debug, clap::Args)]
pub struct FitPortraitCmd {
    #[arg(value_name = "GRID", value_parser = existing_file, help = "[path] portrait CSV as written by analytic-portrait")]
    pub input: PathBuf,
    #[command(flatten)]
    pub keys: FitPortraitArgs,
}

/// Settings common to both fit commands, in internal units.
struct Setup {
    mode: FitMode,
    free: Vec<Param>,
    options: FitOptions,
    range_factor: f64,
    detuning_range: f64,
    known: KnownParams,
}

#[allow(clippy::too_many_arguments)]
fn setup(
    mode: &str,
    free: &[String],
    units: &str,
    max_iterations: usize,
    starts: usize,
    seed: u64,
    range_factor: f64,
    detuning_range_mhz: f64,
    start: [Option<f64>; 10],
) -> Result<Setup, CliError> {
    let mode = match mode {
        "complex" => FitMode::Complex,
        "magnitude" => FitMode::Magnitude,
        m => return Err(CliError::Config(format!("field `mode`: expected complex or magnitude, got '{m}'"))),
    };
    let units = match units {
        "rad_per_ns" => FitUnits::RadPerNs,
        "mhz" => FitUnits::Mhz,
        u => return Err(CliError::Config(format!("field `units`: expected rad_per_ns or mhz, got '{u}'"))),
    };
    let free = free
        .iter()
        .map(|s| s.trim().parse::<Param>().map_err(|e| CliError::Config(format!("field `free`: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    at_least("max_iterations", max_iterations, 1)?;
    at_least("starts", starts, 1)?;
    if !(range_factor > 1.0 && range_factor.is_finite()) {
        return Err(CliError::Config(format!("field `range_factor`: must be > 1, got {range_factor}")));
    }
    positive("detuning_range_mhz", detuning_range_mhz)?;
    let mut known = KnownParams::default();
    for (p, v) in Param::ALL.into_iter().zip(start) {
        if let Some(v) = v {
            if !v.is_finite() {
                return Err(CliError::Config(format!("start value of `{}` must be finite, got {v}", p.name())));
            }
            known = known.with(p, v);
        }
    }
    Ok(Setup {
        mode,
        free,
        options: FitOptions { max_iterations, starts, seed, units, ..FitOptions::default() },
        range_factor,
        detuning_range: mhz_to_rad_per_ns(detuning_range_mhz),
        known,
    })
}

/// Start values in internal units, in `Param::ALL` order.
fn start_values(
    alpha: Option<f64>,
    gamma_mhz: Option<f64>,
    beta: Option<f64>,
    delta_qd_mhz: Option<f64>,
    delta_da_mhz: Option<f64>,
    kappa_mhz: Option<f64>,
    gain: Option<f64>,
    phase: Option<f64>,
    offset_re: Option<f64>,
    offset_im: Option<f64>,
) -> [Option<f64>; 10] {
    let f = |v: Option<f64>| v.map(mhz_to_rad_per_ns);
    [alpha, f(gamma_mhz), beta, f(delta_qd_mhz), f(delta_da_mhz), f(kappa_mhz), gain, phase, offset_re, offset_im]
}

impl Setup {
    /// Fit setup around `initial`; free parameters get bounds from the ranges,
    /// and the start is clamped into them.
    fn spec(&self, initial: ModelParams, data_peak: f64) -> FitSpec {
        let mut spec = FitSpec::new(initial).with_mode(self.mode).with_options(self.options);
        for &p in &self.free {
            let v = p.get(&initial);
            let f = self.range_factor;
            let (lo, hi) = match p {
                Param::Alpha | Param::Gamma | Param::Kappa | Param::Gain => {
                    let v = if v > 0.0 { v } else { 1e-6 };
                    (v / f, v * f)
                }
                Param::Beta => (1e-3, 1.0),
                Param::DeltaQd | Param::DeltaDa => (v - self.detuning_range, v + self.detuning_range),
                Param::Phase => (v - TAU, v + TAU),
                Param::OffsetRe | Param::OffsetIm => (v - v.abs() - data_peak, v + v.abs() + data_peak),
            };
            spec = spec.fix(p, v.clamp(lo, hi)).free(p, lo, hi);
        }
        spec
    }
}

fn known_start(known: &KnownParams, guess: ModelParams) -> ModelParams {
    let mut p = guess;
    for q in Param::ALL {
        if let Some(v) = known.get(q) {
            q.set(&mut p, v);
        }
    }
    p
}

/// Fitted result with its residual and model traces on the data grid.
pub struct TraceFit {
    pub result: FitResult,
    pub residual: ComplexTrace,
    pub model: ComplexTrace,
}

/// Fits `data` with the keys of the `fit` command.
pub fn fit_trace(k: &FitKeys, data: &ComplexTrace) -> Result<TraceFit, CliError> {
    let start = start_values(
        k.alpha,
        k.gamma_mhz,
        k.beta,
        k.delta_qd_mhz,
        k.delta_da_mhz,
        k.kappa_mhz,
        k.gain,
        k.phase,
        k.offset_re,
        k.offset_im,
    );
    let s = setup(
        &k.mode,
        &k.free,
        &k.units,
        k.max_iterations,
        k.starts,
        k.seed,
        k.range_factor,
        k.detuning_range_mhz,
        start,
    )?;
    let initial = known_start(&s.known, initial_guess(data, &s.known)?);
    let problem = FitProblem::new(data.clone(), s.spec(initial, data.max_abs()));
    let result = run_fit(&problem)?;
    if !result.converged {
        log::warn!("fit did not converge: {}", result.message);
    }
    let residual = problem.residual_trace(&result.params)?;
    let model = detuned_fit_model(&result.params, data.t0(), data.dt(), data.len())?;
    Ok(TraceFit { result, residual, model })
}

pub fn write_fit(ctx: &mut Context, name: &str, data: &ComplexTrace, f: &TraceFit) -> Result<(), CliError> {
    let out = &mut ctx.output;
    out.json(&format!("{name}.json"), &f.result)?;
    out.csv(&format!("{name}_residual.csv"), |w| f.residual.write_csv(w))?;
    out.csv(&format!("{name}_model.csv"), |w| f.model.write_csv(w))?;
    out.svg(&format!("{name}.svg"), || overlay(data, &f.model))
}

pub fn fit(cmd: &FitCmd, ctx: &mut Context) -> Result<(), CliError> {
    let k = cmd.keys.resolve()?;
    let data = read_trace(&cmd.input)?;
    let f = fit_trace(&k, &data)?;
    write_fit(ctx, "fit", &data, &f)
}

fn overlay(data: &ComplexTrace, model: &ComplexTrace) -> portrait_core::Result<String> {
    let s = [
        Series::new("|data|", data.times(), data.magnitudes()),
        Series::new("|model|", model.times(), model.magnitudes()),
    ];
    export_svg_lines(&s, "closed-form fit", "time (ns)", "amplitude")
}

fn read_grid(path: &std::path::Path) -> Result<PortraitGrid, CliError> {
    let file =
        std::fs::File::open(path).map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
    PortraitGrid::read_csv(file).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Row of the detuning map, in user units.
#[derive(Debug, Serialize)]
struct MapRow {
    detuning_mhz: f64,
    delta_qd_khz: Option<f64>,
    delta_qd_stderr_khz: Option<f64>,
    converged: bool,
    low_confidence: bool,
    error: String,
}

impl MapRow {
    fn new(r: &PortraitRowFit) -> Self {
        let khz = |v: f64| rad_per_ns_to_mhz(v) * 1e3;
        Self {
            detuning_mhz: rad_per_ns_to_mhz(r.detuning),
            delta_qd_khz: r.result.as_ref().map(|f| khz(f.params.delta_qd)),
            delta_qd_stderr_khz: r.result.as_ref().and_then(|f| f.std_error(Param::DeltaQd)).map(khz),
            converged: r.result.as_ref().is_some_and(|f| f.converged),
            low_confidence: r.low_confidence,
            error: r.error.clone().unwrap_or_default(),
        }
    }
}

pub fn fit_portrait(cmd: &FitPortraitCmd, ctx: &mut Context) -> Result<(), CliError> {
    let k = cmd.keys.resolve()?;
    let start = start_values(
        k.alpha,
        k.gamma_mhz,
        k.beta,
        k.delta_qd_mhz,
        k.delta_da_mhz,
        k.kappa_mhz,
        k.gain,
        k.phase,
        k.offset_re,
        k.offset_im,
    );
    let s = setup(
        &k.mode,
        &k.free,
        &k.units,
        k.max_iterations,
        k.starts,
        k.seed,
        k.range_factor,
        k.detuning_range_mhz,
        start,
    )?;
    if s.free.contains(&Param::DeltaDa) {
        return Err(CliError::Config("field `free`: delta_da is set by each row and cannot be free".into()));
    }
    if !s.free.contains(&Param::DeltaQd) {
        return Err(CliError::Config("field `free`: portrait fits need delta_qd free".into()));
    }
    positive("confidence_khz", k.confidence_khz)?;
    let grid = read_grid(&cmd.input)?;
    let strongest = (0..grid.detunings().len())
        .max_by(|&a, &b| grid.raw_row(a).max_abs().total_cmp(&grid.raw_row(b).max_abs()))
        .unwrap_or(0);
    let row = grid.raw_row(strongest);
    let known = s.known.with(Param::DeltaDa, -grid.detunings()[strongest]);
    let initial = known_start(&known, initial_guess(&row, &known)?);
    let peak = grid.values().iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    let spec = s.spec(initial, peak);
    let rows = run_fit_portrait(&grid, &spec, mhz_to_rad_per_ns(k.confidence_khz * 1e-3))?;
    let failed = rows.iter().filter(|r| r.result.is_none()).count();
    if failed > 0 {
        log::warn!("{failed} of {} rows failed to fit", rows.len());
    }
    let map: Vec<MapRow> = rows.iter().map(MapRow::new).collect();

    let out = &mut ctx.output;
    out.json("fit_portrait.json", &rows)?;
    out.csv("fit_portrait_map.csv", |w| {
        let mut csv = csv::Writer::from_writer(w);
        for m in &map {
            csv.serialize(m)?;
        }
        csv.flush()?;
        Ok(())
    })?;
    out.svg("fit_portrait.svg", || {
        let (x, y): (Vec<f64>, Vec<f64>) =
            map.iter().filter_map(|m| m.delta_qd_khz.map(|v| (m.detuning_mhz, v))).unzip();
        export_svg_lines(
            &[Series::new("delta_qd", x, y)],
            "fitted emitter-drive detuning",
            "amplifier detuning (MHz)",
            "delta_qd/2π (kHz)",
        )
    })
}
