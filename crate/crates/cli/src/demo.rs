//! Built-in presets that regenerate the reference figures.

use portrait_core::filter_chain::filter_apply;
use portrait_core::units::mhz_to_rad_per_ns;
use portrait_core::{ComplexTrace, FilterParams, PortraitGrid};

use crate::commands::fit::{fit_trace, write_fit, FitArgs};
use crate::commands::linspace;
use crate::commands::simulate::{
    self, analytic_portrait, analytic_trace, lindblad_run, ww_portrait, AnalyticPortraitArgs, AnalyticTraceArgs,
    LindbladRunArgs, WwPortraitArgs,
};
use crate::{CliError, Context};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    /// Ideal emission portrait and its frequency-integrated envelope.
    Fig1a,
    /// Resonant trace through the amplifier with a closed-form fit.
    Fig3a,
    /// The same with the amplifier detuned by 2 MHz.
    Fig3b,
    /// Single-emitter portraits: input-output and filtered ideal emission.
    Fig4b,
    /// Bright-state portraits of two coupled emitters.
    Fig4d,
    /// Master-equation output field through the amplifier sweep, with emitter.
    Fig8a,
    /// The same sweep of the bare drive.
    Fig8b,
    All,
}

#[derive(Debug, clap::Args)]
pub struct DemoArgs {
    #[arg(value_enum, help = "[-] figure to regenerate")]
    pub figure: Figure,
}

const FIGURES: [Figure; 7] =
    [Figure::Fig1a, Figure::Fig3a, Figure::Fig3b, Figure::Fig4b, Figure::Fig4d, Figure::Fig8a, Figure::Fig8b];

pub fn demo(args: &DemoArgs, ctx: &mut Context) -> Result<(), CliError> {
    match args.figure {
        Figure::All => FIGURES.iter().try_for_each(|&f| figure(f, ctx)),
        f => figure(f, ctx),
    }
}

fn figure(f: Figure, ctx: &mut Context) -> Result<(), CliError> {
    match f {
        Figure::Fig1a => ww_portrait(&WwPortraitArgs::default().resolve()?, ctx, "fig1a"),
        Figure::Fig3a => trace_and_fit(ctx, "fig3a", 0.0),
        Figure::Fig3b => trace_and_fit(ctx, "fig3b", -2.0),
        Figure::Fig4b => {
            let io = AnalyticPortraitArgs { beta: Some(0.9), ..Default::default() };
            analytic_portrait(&io.resolve()?, ctx, "fig4b_io")?;
            let ww = WwPortraitArgs {
                gamma_mhz: Some(1.35),
                span_mhz: Some(10.0),
                nfreq: Some(41),
                tmax_ns: Some(1000.0),
                filtered: Some(true),
                ..Default::default()
            };
            ww_portrait(&ww.resolve()?, ctx, "fig4b_ww")
        }
        Figure::Fig4d => {
            // bright state: radiative rate doubles, internal loss and drive amplitude stay
            let (gamma_wg, gamma_int) = (2.7, 0.15);
            let total = gamma_wg + gamma_int;
            let io = AnalyticPortraitArgs {
                gamma_mhz: Some(total),
                beta: Some(gamma_wg / total),
                alpha_ratio: Some((1.5f64 / total).sqrt()),
                ..Default::default()
            };
            analytic_portrait(&io.resolve()?, ctx, "fig4d_io")?;
            let ww = WwPortraitArgs {
                gamma_mhz: Some(gamma_wg),
                span_mhz: Some(10.0),
                nfreq: Some(41),
                tmax_ns: Some(1000.0),
                filtered: Some(true),
                ..Default::default()
            };
            ww_portrait(&ww.resolve()?, ctx, "fig4d_ww")
        }
        Figure::Fig8a => lindblad_sweep(ctx, "fig8a", true),
        Figure::Fig8b => lindblad_sweep(ctx, "fig8b", false),
        Figure::All => unreachable!("expanded by demo"),
    }
}

fn trace_and_fit(ctx: &mut Context, name: &str, delta_da_mhz: f64) -> Result<(), CliError> {
    let args = AnalyticTraceArgs { delta_da_mhz: Some(delta_da_mhz), noise_sigma: Some(0.01), ..Default::default() };
    let p = args.resolve()?;
    analytic_trace(&p, ctx, name)?;
    let (data, _) = p.generate()?;
    let keys = FitArgs { beta: Some(p.beta), delta_da_mhz: Some(delta_da_mhz), ..Default::default() }.resolve()?;
    let f = fit_trace(&keys, &data)?;
    write_fit(ctx, &format!("{name}_fit"), &data, &f)
}

/// Output field of a 1 us resonant pulse seen through 41 amplifier centers.
fn lindblad_sweep(ctx: &mut Context, name: &str, with_emitter: bool) -> Result<(), CliError> {
    let args = LindbladRunArgs {
        alpha_ratio: Some(1.0),
        t_min_ns: Some(-1000.0),
        t_max_ns: Some(600.0),
        dt_ns: Some(2.0),
        ..Default::default()
    };
    let p = args.resolve()?;
    let field = if with_emitter {
        lindblad_run(&p, ctx, name)?;
        p.simulate()?.field
    } else {
        let system = p.system()?;
        let drive = p.drive(&system)?.expect("preset has a drive");
        let len = crate::commands::sample_count(p.t_min_ns, p.t_max_ns, p.dt_ns)?;
        ComplexTrace::from_fn(p.t_min_ns, p.dt_ns, len, |t| (drive.alpha * drive.envelope(t)).into())?
    };
    let h = mhz_to_rad_per_ns(10.0);
    let centers = linspace(-h, h, 41);
    let kappa = mhz_to_rad_per_ns(2.5);
    let rows = centers
        .iter()
        .map(|&c| filter_apply(&field, &FilterParams::new(c, kappa, 1.0)?))
        .collect::<portrait_core::Result<Vec<_>>>()?;
    let grid = PortraitGrid::from_rows(centers, rows)?.normalized_to_max();
    let title = if with_emitter { "output field through the amplifier" } else { "bare drive through the amplifier" };
    simulate::write_portrait(&grid, ctx, &format!("{name}_portrait"), title)
}
