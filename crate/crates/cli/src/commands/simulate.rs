//! Forward models: ideal portraits, closed-form traces, master-equation runs
//! and the waveguide memory-kernel check.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use portrait_core::analysis::{fwhm, log_slope};
use portrait_core::filter_chain::{add_noise, filter_apply};
use portrait_core::input_output::{self, analytic_filtered_trace, DrivenQubitConfig, ModelParams};
use portrait_core::lindblad::{
    bloch_trajectory, integrate_master_equation, output_field, InitialState, MultiQubitSystem, RunConfig, Site,
    Tolerances, Trajectory,
};
use portrait_core::units::{
    db_to_amplitude_gain, ghz_to_rad_per_ns, mhz_to_rad_per_ns, rad_per_ns_to_ghz, rad_per_ns_to_mhz,
};
use portrait_core::waveguide::{
    cutoff_frequency, deviation_from_exponential, dispersion_variation, kernel_decay_check, Coupling, KernelGrid,
    WaveguideGeometry,
};
use portrait_core::wigner_weisskopf::{self, ww_envelope, ww_filtered_portrait, WWModel};
use portrait_core::{Complex64, ComplexTrace, DrivePulse, FilterParams, PortraitGrid, PulseShape, QubitParams};

use super::{linspace, sample_count, trace_series};
use crate::config::{at_least, finite, in_range, non_negative, params, positive};
use crate::svg::{export_svg_heatmap, export_svg_lines, Series};
use crate::{CliError, Context};

params! {
    WwPortraitArgs => WwPortrait {
        gamma_mhz: f64 = 1.5, "[MHz] radiative decay rate γ/2π";
        qubit_ghz: f64 = 7.0, "[GHz] emitter frequency";
        span_mhz: f64 = 10.0, "[MHz] detunings cover ± this around the emitter";
        nfreq: usize = 401, "[-] number of detuning rows";
        tmax_ns: f64 = 5000.0, "[ns] last time column";
        ntime: usize = 101, "[-] number of time columns from 0 to tmax_ns";
        #[arg(num_args = 0..=1, default_missing_value = "true")]
        filtered: bool = false, "[-] view the modes through the amplifier filter";
        kappa_mhz: f64 = 2.5, "[MHz] amplifier half-bandwidth κ/2π, used with filtered";
        filter_dt_ns: f64 = 0.5, "[ns] step of the filtered envelope, used with filtered";
    }
}

impl WwPortrait {
    fn validate(&self) -> Result<(), CliError> {
        positive("gamma_mhz", self.gamma_mhz)?;
        positive("qubit_ghz", self.qubit_ghz)?;
        positive("span_mhz", self.span_mhz)?;
        at_least("nfreq", self.nfreq, 1)?;
        positive("tmax_ns", self.tmax_ns)?;
        at_least("ntime", self.ntime, 2)?;
        positive("kappa_mhz", self.kappa_mhz)?;
        positive("filter_dt_ns", self.filter_dt_ns)
    }
}

#[derive(Debug, Serialize)]
struct WwSummary {
    gamma_mhz: f64,
    kappa_mhz: Option<f64>,
    times_ns: Vec<f64>,
    /// Full width at half maximum of |f|^2 per time column.
    fwhm_mhz: Vec<Option<f64>>,
    final_fwhm_mhz: Option<f64>,
}

/// Power FWHM (MHz) of every time column of a portrait.
pub fn column_widths(grid: &PortraitGrid) -> Vec<Option<f64>> {
    let det: Vec<f64> = grid.detunings().iter().map(|&d| rad_per_ns_to_mhz(d)).collect();
    let mags = grid.magnitudes();
    (0..grid.times().len())
        .map(|j| {
            let power: Vec<f64> = mags.iter().map(|r| r[j] * r[j]).collect();
            if det.len() < 3 {
                None
            } else {
                fwhm(&det, &power)
            }
        })
        .collect()
}

pub fn ww_portrait(p: &WwPortrait, ctx: &mut Context, name: &str) -> Result<(), CliError> {
    p.validate()?;
    let model = WWModel::new(ghz_to_rad_per_ns(p.qubit_ghz), mhz_to_rad_per_ns(p.gamma_mhz))?;
    let h = mhz_to_rad_per_ns(p.span_mhz);
    let det = linspace(-h, h, p.nfreq);
    let times = linspace(0.0, p.tmax_ns, p.ntime);
    let grid = if p.filtered {
        let filter = FilterParams::new(0.0, mhz_to_rad_per_ns(p.kappa_mhz), 1.0)?;
        let len = (p.tmax_ns / p.filter_dt_ns).round() as usize + 1;
        let dt = p.tmax_ns / (len - 1) as f64;
        let fine = ww_filtered_portrait(&model, &filter, &det, 0.0, dt, len)?;
        let mut cols: Vec<usize> = times.iter().map(|t| ((t / dt).round() as usize).min(len - 1)).collect();
        cols.dedup();
        let values = fine.values().iter().map(|r| cols.iter().map(|&j| r[j]).collect()).collect();
        let col_times = cols.iter().map(|&j| fine.times()[j]).collect();
        PortraitGrid::new(det, col_times, values)?.normalized_to_max()
    } else {
        wigner_weisskopf::ww_portrait(&model, &det, &times)?
    };
    let widths = column_widths(&grid);
    let summary = WwSummary {
        gamma_mhz: p.gamma_mhz,
        kappa_mhz: p.filtered.then_some(p.kappa_mhz),
        times_ns: grid.times().to_vec(),
        final_fwhm_mhz: widths.last().copied().flatten(),
        fwhm_mhz: widths,
    };
    let envelope = ww_envelope(&model, 0.0, p.tmax_ns / 1000.0, 1001, true)?;

    let out = &mut ctx.output;
    out.csv(&format!("{name}.csv"), |w| grid.write_csv(w))?;
    out.json(&format!("{name}.json"), &summary)?;
    let title = if p.filtered { "filtered ideal emission" } else { "ideal emission |f_k(t)|" };
    out.svg(&format!("{name}.svg"), || export_svg_heatmap(&grid, ctx.colormap, title))?;
    out.csv(&format!("{name}_envelope.csv"), |w| envelope.write_csv(w))?;
    out.svg(&format!("{name}_envelope.svg"), || {
        let s = Series::new("|E(t)|", envelope.times(), envelope.magnitudes());
        export_svg_lines(&[s], "frequency-integrated field", "time (ns)", "amplitude")
    })
}

params! {
    AnalyticTraceArgs => AnalyticTrace {
        qubit_ghz: f64 = 7.0, "[GHz] emitter frequency";
        gamma_mhz: f64 = 1.5, "[MHz] total decay rate γ/2π";
        beta: f64 = 1.0, "[-] radiative fraction β of the decay rate";
        alpha_ratio: f64 = 1.0, "[-] drive amplitude α/√γ";
        delta_qd_mhz: f64 = 0.0, "[MHz] emitter minus drive frequency";
        delta_da_mhz: f64 = 0.0, "[MHz] drive minus amplifier center frequency";
        kappa_mhz: f64 = 2.5, "[MHz] amplifier half-bandwidth κ/2π";
        gain_db: f64 = 0.0, "[dB] amplifier power gain";
        pulse_ns: f64 = 1000.0, "[ns] drive length; the drive stops at t = 0";
        t_min_ns: f64 = -200.0, "[ns] first sample time";
        t_max_ns: f64 = 600.0, "[ns] last sample time";
        dt_ns: f64 = 1.0, "[ns] sampling step";
        noise_sigma: f64 = 0.0, "[-] std of complex Gaussian noise per sample, relative to the peak magnitude";
        seed: u64 = 0, "[-] noise seed";
    }
}

fn driven_config(
    qubit_ghz: f64,
    gamma_mhz: f64,
    beta: f64,
    alpha_ratio: f64,
    delta_qd_mhz: f64,
    delta_da_mhz: f64,
    kappa_mhz: f64,
    gain: f64,
    pulse_ns: f64,
) -> Result<DrivenQubitConfig, CliError> {
    positive("qubit_ghz", qubit_ghz)?;
    positive("gamma_mhz", gamma_mhz)?;
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(CliError::Config(format!("field `beta`: must lie in (0, 1], got {beta}")));
    }
    non_negative("alpha_ratio", alpha_ratio)?;
    finite("delta_qd_mhz", delta_qd_mhz)?;
    finite("delta_da_mhz", delta_da_mhz)?;
    positive("kappa_mhz", kappa_mhz)?;
    positive("gain_db", gain)?;
    positive("pulse_ns", pulse_ns)?;
    let qubit = QubitParams::from_gamma_beta(ghz_to_rad_per_ns(qubit_ghz), mhz_to_rad_per_ns(gamma_mhz), beta)?;
    let omega = qubit.omega_q - mhz_to_rad_per_ns(delta_qd_mhz);
    let drive = DrivePulse::rectangular(alpha_ratio * qubit.gamma().sqrt(), omega, -pulse_ns, 0.0)?;
    let filter = FilterParams::new(omega - mhz_to_rad_per_ns(delta_da_mhz), mhz_to_rad_per_ns(kappa_mhz), gain)?;
    Ok(DrivenQubitConfig { qubit, drive, filter })
}

impl AnalyticTrace {
    pub fn config(&self) -> Result<DrivenQubitConfig, CliError> {
        driven_config(
            self.qubit_ghz,
            self.gamma_mhz,
            self.beta,
            self.alpha_ratio,
            self.delta_qd_mhz,
            self.delta_da_mhz,
            self.kappa_mhz,
            db_to_amplitude_gain(self.gain_db),
            self.pulse_ns,
        )
    }

    /// Trace with noise, and the closed-form parameters behind it.
    pub fn generate(&self) -> Result<(ComplexTrace, ModelParams), CliError> {
        let cfg = self.config()?;
        non_negative("noise_sigma", self.noise_sigma)?;
        let len = sample_count(self.t_min_ns, self.t_max_ns, self.dt_ns)?;
        let clean = analytic_filtered_trace(&cfg, self.t_min_ns, self.dt_ns, len)?;
        let trace = add_noise(&clean, self.noise_sigma * clean.max_abs(), self.seed, 0);
        Ok((trace, ModelParams::from_config(&cfg)))
    }
}

pub fn analytic_trace(p: &AnalyticTrace, ctx: &mut Context, name: &str) -> Result<(), CliError> {
    let (trace, params) = p.generate()?;
    let out = &mut ctx.output;
    out.csv(&format!("{name}.csv"), |w| trace.write_csv(w))?;
    out.json(&format!("{name}.json"), &params)?;
    out.svg(&format!("{name}.svg"), || {
        export_svg_lines(&trace_series(&trace, "a"), "filtered output field", "time (ns)", "amplitude")
    })
}

params! {
    AnalyticPortraitArgs => AnalyticPortrait {
        qubit_ghz: f64 = 7.0, "[GHz] emitter frequency";
        gamma_mhz: f64 = 1.5, "[MHz] total decay rate γ/2π";
        beta: f64 = 1.0, "[-] radiative fraction β of the decay rate";
        alpha_ratio: f64 = 1.0, "[-] drive amplitude α/√γ";
        delta_qd_mhz: f64 = 0.0, "[MHz] emitter minus drive frequency";
        kappa_mhz: f64 = 2.5, "[MHz] amplifier half-bandwidth κ/2π";
        gain_db: f64 = 0.0, "[dB] amplifier power gain";
        pulse_ns: f64 = 1000.0, "[ns] drive length; the drive stops at t = 0";
        span_mhz: f64 = 10.0, "[MHz] amplifier centers cover the drive frequency ± this";
        nfreq: usize = 41, "[-] number of amplifier centers (rows)";
        t_min_ns: f64 = -200.0, "[ns] first sample time";
        t_max_ns: f64 = 1000.0, "[ns] last sample time";
        dt_ns: f64 = 2.0, "[ns] sampling step";
        noise_sigma: f64 = 0.0, "[-] std of complex Gaussian noise per sample, relative to the grid peak";
        seed: u64 = 0, "[-] noise seed";
    }
}

impl AnalyticPortrait {
    /// Portrait normalized to its maximum, rows labelled by the amplifier
    /// center minus the drive frequency.
    pub fn generate(&self) -> Result<PortraitGrid, CliError> {
        let cfg = driven_config(
            self.qubit_ghz,
            self.gamma_mhz,
            self.beta,
            self.alpha_ratio,
            self.delta_qd_mhz,
            0.0,
            self.kappa_mhz,
            db_to_amplitude_gain(self.gain_db),
            self.pulse_ns,
        )?;
        positive("span_mhz", self.span_mhz)?;
        at_least("nfreq", self.nfreq, 1)?;
        non_negative("noise_sigma", self.noise_sigma)?;
        let len = sample_count(self.t_min_ns, self.t_max_ns, self.dt_ns)?;
        let h = mhz_to_rad_per_ns(self.span_mhz);
        let rows = linspace(-h, h, self.nfreq);
        // analytic_portrait takes centers relative to the emitter
        let delta_qd = cfg.qubit.omega_q - cfg.drive.omega;
        let centers: Vec<f64> = rows.iter().map(|d| d - delta_qd).collect();
        let clean = input_output::analytic_portrait(&cfg, &centers, self.t_min_ns, self.dt_ns, len)?;
        let sigma = self.noise_sigma * clean.scale();
        let values =
            (0..rows.len()).map(|i| add_noise(&clean.raw_row(i), sigma, self.seed, i as u64).into_samples()).collect();
        Ok(PortraitGrid::new(rows, clean.times().to_vec(), values)?.normalized_to_max())
    }
}

pub fn write_portrait(grid: &PortraitGrid, ctx: &mut Context, name: &str, title: &str) -> Result<(), CliError> {
    ctx.output.csv(&format!("{name}.csv"), |w| grid.write_csv(w))?;
    let scale = ctx.colormap;
    ctx.output.svg(&format!("{name}.svg"), || export_svg_heatmap(grid, scale, title))
}

pub fn analytic_portrait(p: &AnalyticPortrait, ctx: &mut Context, name: &str) -> Result<(), CliError> {
    let grid = p.generate()?;
    write_portrait(&grid, ctx, name, "input-output portrait |a_amp|")
}

params! {
    LindbladRunArgs => LindbladRun {
        #[arg(value_delimiter = ',')]
        qubit_ghz: Vec<f64> = vec![7.0], "[GHz] emitter frequencies, one per emitter (1 to 3)";
        #[arg(value_delimiter = ',')]
        gamma_mhz: Vec<f64> = vec![1.5], "[MHz] radiative decay rates γ/2π into the waveguide, one per emitter";
        #[arg(value_delimiter = ',')]
        gamma_int_mhz: Vec<f64> = vec![], "[MHz] non-radiative decay rates, one per emitter; empty means none";
        #[arg(value_delimiter = ',')]
        position_mm: Vec<f64> = vec![], "[mm] positions along the waveguide; empty places every emitter at 0";
        #[arg(value_delimiter = ',')]
        coupling_mhz: Vec<f64> = vec![], "[MHz] direct couplings g12,g13,g23 (upper triangle); empty means none";
        speed_mm_per_ns: f64 = 299.792458, "[mm/ns] propagation speed along the waveguide";
        drive_ghz: f64 = 7.0, "[GHz] drive frequency";
        alpha_ratio: f64 = 0.1, "[-] drive amplitude α/√γ, with γ the total rate of the first emitter";
        pulse_ns: f64 = 1000.0, "[ns] drive length, ending at t = 0; 0 disables the drive";
        edge_ns: f64 = 0.0, "[ns] raised-cosine rise and fall time; 0 gives a rectangular pulse";
        initial: String = "ground".into(), "[-] initial state: ground, excited, bright, dark, or a basis index";
        t_min_ns: f64 = -1000.0, "[ns] start of the integration and first recorded time";
        t_max_ns: f64 = 500.0, "[ns] last recorded time";
        dt_ns: f64 = 1.0, "[ns] recording step";
        rtol: f64 = 1e-9, "[-] relative tolerance of the integrator";
        atol: f64 = 1e-12, "[-] absolute tolerance of the integrator";
        filter_kappa_mhz: f64 = 0.0, "[MHz] amplifier half-bandwidth κ/2π; 0 skips the filter";
        filter_center_mhz: f64 = 0.0, "[MHz] amplifier center minus the frame (drive) frequency";
        gain_db: f64 = 0.0, "[dB] amplifier power gain";
        noise_sigma: f64 = 0.0, "[-] std of complex Gaussian noise on the filtered trace, relative to its peak";
        seed: u64 = 0, "[-] noise seed";
    }
}

/// Master-equation run and the output field in the drive frame.
#[derive(Debug, Clone)]
pub struct LindbladOutcome {
    pub system: MultiQubitSystem,
    pub drive: Option<DrivePulse>,
    pub trajectory: Trajectory,
    pub field: ComplexTrace,
    pub filtered: Option<ComplexTrace>,
}

impl LindbladRun {
    fn per_emitter(&self, field: &str, v: &[f64], n: usize) -> Result<Vec<f64>, CliError> {
        match v.len() {
            0 => Ok(vec![0.0; n]),
            k if k == n => Ok(v.to_vec()),
            k => Err(CliError::Config(format!("field `{field}`: expected {n} values (one per emitter), got {k}"))),
        }
    }

    pub fn system(&self) -> Result<MultiQubitSystem, CliError> {
        let n = self.qubit_ghz.len();
        if n == 0 || n > 3 {
            return Err(CliError::Config(format!("field `qubit_ghz`: 1 to 3 emitters supported, got {n}")));
        }
        if self.gamma_mhz.len() != n {
            return Err(CliError::Config(format!(
                "field `gamma_mhz`: expected {n} values (one per emitter), got {}",
                self.gamma_mhz.len()
            )));
        }
        let internal = self.per_emitter("gamma_int_mhz", &self.gamma_int_mhz, n)?;
        let position = self.per_emitter("position_mm", &self.position_mm, n)?;
        let pairs = n * (n - 1) / 2;
        let coupling = match self.coupling_mhz.len() {
            0 => vec![0.0; pairs],
            k if k == pairs => self.coupling_mhz.clone(),
            k => {
                return Err(CliError::Config(format!(
                    "field `coupling_mhz`: expected {pairs} values (upper triangle), got {k}"
                )))
            }
        };
        positive("speed_mm_per_ns", self.speed_mm_per_ns)?;
        let mut sites = Vec::with_capacity(n);
        for i in 0..n {
            positive("qubit_ghz", self.qubit_ghz[i])?;
            non_negative("gamma_mhz", self.gamma_mhz[i])?;
            non_negative("gamma_int_mhz", internal[i])?;
            finite("position_mm", position[i])?;
            let q = QubitParams::new(
                ghz_to_rad_per_ns(self.qubit_ghz[i]),
                mhz_to_rad_per_ns(self.gamma_mhz[i]),
                mhz_to_rad_per_ns(internal[i]),
            )?;
            sites.push(Site::from_qubit(&q, position[i] * 1e-3));
        }
        let mut direct = DMatrix::zeros(n, n);
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                finite("coupling_mhz", coupling[k])?;
                direct[(i, j)] = mhz_to_rad_per_ns(coupling[k]);
                direct[(j, i)] = direct[(i, j)];
                k += 1;
            }
        }
        Ok(MultiQubitSystem::new(sites, direct, self.speed_mm_per_ns * 1e-3)?)
    }

    pub fn drive(&self, system: &MultiQubitSystem) -> Result<Option<DrivePulse>, CliError> {
        non_negative("pulse_ns", self.pulse_ns)?;
        if self.pulse_ns == 0.0 {
            return Ok(None);
        }
        positive("drive_ghz", self.drive_ghz)?;
        non_negative("alpha_ratio", self.alpha_ratio)?;
        non_negative("edge_ns", self.edge_ns)?;
        let first = system.sites()[0];
        let gamma = first.gamma_radiative() + first.gamma_internal;
        let shape =
            if self.edge_ns > 0.0 { PulseShape::RaisedCosine { edge: self.edge_ns } } else { PulseShape::Rectangular };
        let drive = DrivePulse {
            alpha: self.alpha_ratio * gamma.sqrt(),
            omega: ghz_to_rad_per_ns(self.drive_ghz),
            t_start: -self.pulse_ns,
            t_stop: 0.0,
            shape,
        };
        drive.validate()?;
        if self.t_min_ns > drive.t_start {
            log::warn!("integration starts at {} ns, after the drive onset at {} ns", self.t_min_ns, drive.t_start);
        }
        Ok(Some(drive))
    }

    pub fn initial_state(&self, n: usize) -> Result<InitialState, CliError> {
        let bad = |m: String| CliError::Config(format!("field `initial`: {m}"));
        let s = self.initial.trim();
        match s {
            "ground" => Ok(InitialState::Ground),
            "excited" => Ok(InitialState::Basis((1 << n) - 1)),
            "bright" | "dark" => {
                if n != 2 {
                    return Err(bad(format!("'{s}' needs exactly two emitters, got {n}")));
                }
                let sign = if s == "bright" { 1.0 } else { -1.0 };
                let mut psi = DVector::zeros(4);
                psi[1] = Complex64::new(1.0, 0.0);
                psi[2] = Complex64::new(sign, 0.0);
                Ok(InitialState::Pure(psi))
            }
            _ => match s.parse::<usize>() {
                Ok(k) if k < (1 << n) => Ok(InitialState::Basis(k)),
                Ok(k) => Err(bad(format!("basis index {k} out of range for {n} emitters"))),
                Err(_) => Err(bad(format!("unknown state '{s}' (ground, excited, bright, dark or an index)"))),
            },
        }
    }

    pub fn simulate(&self) -> Result<LindbladOutcome, CliError> {
        let system = self.system()?;
        let drive = self.drive(&system)?;
        let len = sample_count(self.t_min_ns, self.t_max_ns, self.dt_ns)?;
        positive("rtol", self.rtol)?;
        positive("atol", self.atol)?;
        let mut cfg =
            RunConfig::new(self.t_min_ns, self.dt_ns, len).with_initial(self.initial_state(system.n_qubits())?);
        cfg.tolerances = Tolerances { rtol: self.rtol, atol: self.atol, ..Tolerances::default() };
        let trajectory = integrate_master_equation(&system, drive.as_ref(), &cfg)?;
        let field = output_field(&trajectory, &system, drive.as_ref())?;
        non_negative("filter_kappa_mhz", self.filter_kappa_mhz)?;
        let filtered = if self.filter_kappa_mhz > 0.0 {
            non_negative("noise_sigma", self.noise_sigma)?;
            let center = trajectory.frame_omega + mhz_to_rad_per_ns(self.filter_center_mhz);
            let f = FilterParams::new(
                center,
                mhz_to_rad_per_ns(self.filter_kappa_mhz),
                db_to_amplitude_gain(self.gain_db),
            )?;
            let clean = filter_apply(&field, &f.in_frame(trajectory.frame_omega))?;
            Some(add_noise(&clean, self.noise_sigma * clean.max_abs(), self.seed, 0))
        } else {
            None
        };
        Ok(LindbladOutcome { system, drive, trajectory, field, filtered })
    }
}

#[derive(Debug, Serialize)]
struct LindbladSummary {
    n_qubits: usize,
    frame_ghz: f64,
    max_trace_error: f64,
    max_hermiticity_error: f64,
    final_excitation: f64,
    final_bloch: Vec<[f64; 3]>,
}

pub fn lindblad_run(p: &LindbladRun, ctx: &mut Context, name: &str) -> Result<(), CliError> {
    let r = p.simulate()?;
    let traj = &r.trajectory;
    let final_bloch = (0..traj.n_qubits())
        .map(|q| bloch_trajectory(traj, q).map(|b| b[b.len() - 1]))
        .collect::<portrait_core::Result<Vec<_>>>()?;
    let summary = LindbladSummary {
        n_qubits: traj.n_qubits(),
        frame_ghz: rad_per_ns_to_ghz(traj.frame_omega),
        max_trace_error: traj.max_trace_error,
        max_hermiticity_error: traj.max_hermiticity_error,
        final_excitation: traj.excitation[traj.len() - 1],
        final_bloch,
    };
    let out = &mut ctx.output;
    out.csv(&format!("{name}_trajectory.csv"), |w| traj.write_csv(w))?;
    out.csv(&format!("{name}_output.csv"), |w| r.field.write_csv(w))?;
    if let Some(f) = &r.filtered {
        out.csv(&format!("{name}_filtered.csv"), |w| f.write_csv(w))?;
    }
    out.json(&format!("{name}.json"), &summary)?;
    out.svg(&format!("{name}_output.svg"), || {
        let mut s = vec![Series::new("|a_out|", r.field.times(), r.field.magnitudes())];
        if let Some(f) = &r.filtered {
            s.push(Series::new("|a_amp|", f.times(), f.magnitudes()));
        }
        export_svg_lines(&s, "output field", "time (ns)", "amplitude")
    })?;
    out.svg(&format!("{name}_populations.svg"), || {
        let t: Vec<f64> = (0..traj.len()).map(|n| traj.time(n)).collect();
        let mut s: Vec<Series> = (0..traj.n_qubits())
            .map(|q| Series::new(format!("<σz{}>", q + 1), t.clone(), traj.sigma_z[q].clone()))
            .collect();
        s.push(Series::new("excitation", t, traj.excitation.clone()));
        export_svg_lines(&s, "emitter populations", "time (ns)", "expectation")
    })
}

params! {
    KernelCheckArgs => KernelCheck {
        qubit_ghz: f64 = 7.3, "[GHz] emitter frequency";
        gamma_mhz: f64 = 15.0, "[MHz] radiative decay rate γ/2π at the emitter frequency";
        t_max_ns: f64 = 64.0, "[ns] length of the simulated decay";
        a_mm: f64 = 22.86, "[mm] broad wall of the waveguide";
        b_mm: f64 = 10.16, "[mm] narrow wall of the waveguide";
        eps_r: f64 = 1.0, "[-] relative permittivity of the filling";
        mu_r: f64 = 1.0, "[-] relative permeability of the filling";
        span_gamma: f64 = 200.0, "[-] frequency integration range above the emitter, in units of γ";
        spacing_gamma: f64 = 0.05, "[-] frequency cell width in units of γ (at most 0.1)";
        #[arg(num_args = 0..=1, default_missing_value = "true")]
        markov: bool = false, "[-] replace the memory kernel by its Markov limit";
        window_mhz: f64 = 60.0, "[MHz] window of the dispersion-factor variation, centered on the emitter";
    }
}

#[derive(Debug, Serialize)]
pub struct KernelSummary {
    pub cutoff_ghz: f64,
    pub gamma_mhz: f64,
    /// Fitted log-slope of |c_e| over [1/γ, 5/γ] divided by -γ/2.
    pub slope_ratio: Option<f64>,
    /// Largest relative deviation of |c_e| from e^{-γt/2} over the run.
    pub max_deviation: f64,
    /// (max - min) / value at the center of the dispersion factor over the window.
    pub dispersion_variation: Option<f64>,
}

impl KernelCheck {
    pub fn evaluate(&self) -> Result<(ComplexTrace, KernelSummary), CliError> {
        positive("qubit_ghz", self.qubit_ghz)?;
        positive("gamma_mhz", self.gamma_mhz)?;
        positive("t_max_ns", self.t_max_ns)?;
        positive("a_mm", self.a_mm)?;
        positive("b_mm", self.b_mm)?;
        in_range("eps_r", self.eps_r, 1.0, 1e3)?;
        in_range("mu_r", self.mu_r, 1.0, 1e3)?;
        non_negative("window_mhz", self.window_mhz)?;
        let geom = WaveguideGeometry::new(self.a_mm * 1e-3, self.b_mm * 1e-3, self.eps_r, self.mu_r)?;
        let wq = ghz_to_rad_per_ns(self.qubit_ghz);
        let gamma = mhz_to_rad_per_ns(self.gamma_mhz);
        let wc = cutoff_frequency(&geom);
        if wq <= wc {
            return Err(CliError::Config(format!(
                "field `qubit_ghz`: {} GHz is below the cutoff {:.4} GHz",
                self.qubit_ghz,
                rad_per_ns_to_ghz(wc)
            )));
        }
        let coupling = Coupling::from_rate(&geom, wq, gamma)?;
        let grid = KernelGrid { span_above: self.span_gamma, spacing: self.spacing_gamma, markov: self.markov };
        let c = kernel_decay_check(&geom, &coupling, wq, self.t_max_ns, &grid)?;
        let slope_ratio = (self.t_max_ns >= 5.0 / gamma)
            .then(|| log_slope(&c.times(), c.samples(), 1.0 / gamma, 5.0 / gamma) / (-gamma / 2.0));
        let half = mhz_to_rad_per_ns(self.window_mhz) / 2.0;
        let dispersion_variation = (self.window_mhz > 0.0 && wq - half > wc)
            .then(|| dispersion_variation(&geom, wq, 2.0 * half))
            .transpose()?;
        let summary = KernelSummary {
            cutoff_ghz: rad_per_ns_to_ghz(wc),
            gamma_mhz: self.gamma_mhz,
            slope_ratio,
            max_deviation: deviation_from_exponential(&c, gamma, self.t_max_ns),
            dispersion_variation,
        };
        Ok((c, summary))
    }
}

pub fn kernel_check(p: &KernelCheck, ctx: &mut Context, name: &str) -> Result<(), CliError> {
    let (c, summary) = p.evaluate()?;
    let gamma = mhz_to_rad_per_ns(p.gamma_mhz);
    let out = &mut ctx.output;
    out.csv(&format!("{name}.csv"), |w| c.write_csv(w))?;
    out.json(&format!("{name}.json"), &summary)?;
    out.svg(&format!("{name}.svg"), || {
        let t = c.times();
        let markov = t.iter().map(|&x| (-gamma * x / 2.0).exp()).collect();
        let s = [Series::new("|c_e|", t.clone(), c.magnitudes()), Series::new("exp(-γt/2)", t, markov)];
        export_svg_lines(&s, "excited-state amplitude", "time (ns)", "amplitude")
    })
}
