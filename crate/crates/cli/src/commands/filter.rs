//! `filter`: amplifier response, noise and an optional heterodyne round trip.

use std::path::PathBuf;

use portrait_core::filter_chain::{add_noise, demodulate_envelope, filter_apply, synthesize_raw_signal};
use portrait_core::units::{db_to_amplitude_gain, mhz_to_rad_per_ns};
use portrait_core::{ComplexTrace, FilterParams, RealTrace};

use super::trace_series;
use crate::config::{existing_file, non_negative, params, positive};
use crate::svg::export_svg_lines;
use crate::{CliError, Context};

params! {
    FilterArgs => FilterKeys {
        kappa_mhz: f64 = 2.5, "[MHz] amplifier half-bandwidth κ/2π";
        center_mhz: f64 = 0.0, "[MHz] amplifier center relative to the frame of the input trace";
        gain_db: f64 = 0.0, "[dB] amplifier power gain";
        noise_sigma: f64 = 0.0, "[-] std of complex Gaussian noise per sample, relative to the filtered peak";
        seed: u64 = 0, "[-] noise seed";
        if_mhz: f64 = 0.0, "[MHz] intermediate frequency of a synthesized heterodyne record; 0 skips it";
        sample_rate_mhz: f64 = 1000.0, "[MHz] digitizer sample rate of the heterodyne record";
        lp_mhz: f64 = 10.0, "[MHz] low-pass corner used when demodulating the heterodyne record";
    }
}

#[derive(Debug, clap::Args)]
pub struct FilterCmd {
    #[arg(value_name = "TRACE", value_parser = existing_file, help = "[path] input trace CSV with columns t_ns,re,im")]
    pub input: PathBuf,
    #[command(flatten)]
    pub keys: FilterArgs,
}

pub fn read_trace(path: &std::path::Path) -> Result<ComplexTrace, CliError> {
    let file =
        std::fs::File::open(path).map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
    ComplexTrace::read_csv(file).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn write_real(trace: &RealTrace, w: &mut Vec<u8>) -> portrait_core::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t_ns", "v"])?;
    for (n, v) in trace.samples.iter().enumerate() {
        out.write_record([trace.time(n).to_string(), v.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Filters `input`; with a nonzero IF the filtered trace is first sent
/// through a synthesized heterodyne record and recovered by demodulation.
pub fn filter(cmd: &FilterCmd, ctx: &mut Context) -> Result<(), CliError> {
    let k = cmd.keys.resolve()?;
    positive("kappa_mhz", k.kappa_mhz)?;
    non_negative("noise_sigma", k.noise_sigma)?;
    non_negative("if_mhz", k.if_mhz)?;
    let input = read_trace(&cmd.input)?;
    let params = FilterParams::new(
        mhz_to_rad_per_ns(k.center_mhz),
        mhz_to_rad_per_ns(k.kappa_mhz),
        db_to_amplitude_gain(k.gain_db),
    )?;
    let clean = filter_apply(&input, &params)?;
    let filtered = add_noise(&clean, k.noise_sigma * clean.max_abs(), k.seed, 0);

    let out = &mut ctx.output;
    out.csv("filtered.csv", |w| filtered.write_csv(w))?;
    let mut series = trace_series(&filtered, "a_amp");
    if k.if_mhz > 0.0 {
        positive("sample_rate_mhz", k.sample_rate_mhz)?;
        positive("lp_mhz", k.lp_mhz)?;
        let raw = synthesize_raw_signal(&filtered, k.if_mhz * 1e-3, k.sample_rate_mhz * 1e-3)?;
        let demod = demodulate_envelope(&raw, k.if_mhz * 1e-3, k.lp_mhz * 1e-3)?;
        out.csv("raw.csv", |w| write_real(&raw, w))?;
        out.csv("demodulated.csv", |w| demod.write_csv(w))?;
        series.extend(trace_series(&demod, "demodulated").into_iter().take(1));
    }
    out.svg("filtered.svg", || export_svg_lines(&series, "filtered trace", "time (ns)", "amplitude"))
}
