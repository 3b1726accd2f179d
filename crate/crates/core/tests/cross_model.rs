//! Agreement between the master-equation model, the closed form and the
//! filter chain.

use std::f64::consts::PI;

use portrait_core::analysis::relative_l2;
use portrait_core::filter_chain::filter_apply;
use portrait_core::input_output::{analytic_filtered_trace, DrivenQubitConfig};
use portrait_core::lindblad::{integrate_master_equation, output_field, MultiQubitSystem, RunConfig};
use portrait_core::units::mhz_to_rad_per_ns;
use portrait_core::{ComplexTrace, DrivePulse, FilterParams, QubitParams};

const OMEGA_Q: f64 = 2.0 * PI * 7.0;

fn filtered_lindblad(
    system: &MultiQubitSystem,
    drive: &DrivePulse,
    filter: &FilterParams,
    dt: f64,
    t_end: f64,
) -> ComplexTrace {
    let len = ((t_end - drive.t_start) / dt).round() as usize + 1;
    let traj = integrate_master_equation(system, Some(drive), &RunConfig::new(drive.t_start, dt, len)).unwrap();
    assert!(traj.max_trace_error < 1e-9);
    assert!(traj.max_hermiticity_error < 1e-10);
    let field = output_field(&traj, system, Some(drive)).unwrap();
    filter_apply(&field, &filter.in_frame(drive.omega)).unwrap()
}

fn window(trace: &ComplexTrace, t_lo: f64) -> ComplexTrace {
    let skip = ((t_lo - trace.t0()) / trace.dt()).round() as usize;
    ComplexTrace::new(trace.time(skip), trace.dt(), trace.samples()[skip..].to_vec()).unwrap()
}

#[test]
fn filtered_master_equation_matches_closed_form() {
    let qubit = QubitParams::from_gamma_beta(OMEGA_Q, mhz_to_rad_per_ns(5.0), 0.9).unwrap();
    let omega = OMEGA_Q - mhz_to_rad_per_ns(0.5);
    let drive = DrivePulse::rectangular(0.7 * qubit.gamma().sqrt(), omega, -800.0, 0.0).unwrap();
    let filter = FilterParams {
        omega_amp: omega + mhz_to_rad_per_ns(1.0),
        kappa: mhz_to_rad_per_ns(4.0),
        gain: 2.0,
        noise_sigma: 0.0,
        seed: 0,
    };
    let system = MultiQubitSystem::single(&qubit).unwrap();
    let numeric = window(&filtered_lindblad(&system, &drive, &filter, 0.125, 400.0), -200.0);
    let cfg = DrivenQubitConfig { qubit, drive, filter };
    let closed = analytic_filtered_trace(&cfg, numeric.t0(), numeric.dt(), numeric.len()).unwrap();
    let err = relative_l2(numeric.samples(), closed.samples());
    assert!(err < 1e-3, "relative L2 {err}");
}

#[test]
fn bright_pair_behaves_as_single_emitter_with_double_rate() {
    let gamma = mhz_to_rad_per_ns(1.5);
    let qubit = QubitParams::from_gamma_beta(OMEGA_Q, gamma, 1.0).unwrap();
    let g12 = mhz_to_rad_per_ns(60.0);
    let pair = MultiQubitSystem::co_located_pair(&qubit, g12).unwrap();
    let omega = OMEGA_Q + g12;
    let drive = DrivePulse::rectangular(0.1 * gamma.sqrt(), omega, -2000.0, 0.0).unwrap();
    let filter = FilterParams { omega_amp: omega, kappa: mhz_to_rad_per_ns(2.5), gain: 1.0, noise_sigma: 0.0, seed: 0 };
    let numeric = window(&filtered_lindblad(&pair, &drive, &filter, 0.5, 1000.0), -200.0);

    // the single emitter sits at the bright-state frequency
    let single = QubitParams::from_gamma_beta(omega, 2.0 * gamma, 1.0).unwrap();
    let cfg = DrivenQubitConfig { qubit: single, drive, filter };
    let closed = analytic_filtered_trace(&cfg, numeric.t0(), numeric.dt(), numeric.len()).unwrap();
    let err = relative_l2(numeric.samples(), closed.samples());
    assert!(err < 0.05, "relative L2 {err}");
}

#[test]
fn weak_drive_output_scales_out_with_gain() {
    let gamma = mhz_to_rad_per_ns(1.5);
    let qubit = QubitParams::from_gamma_beta(OMEGA_Q, gamma, 0.9).unwrap();
    let system = MultiQubitSystem::single(&qubit).unwrap();
    let base = 0.005 * gamma.sqrt();
    let filter =
        FilterParams { omega_amp: OMEGA_Q, kappa: mhz_to_rad_per_ns(2.5), gain: 1.0, noise_sigma: 0.0, seed: 0 };
    let run = |k: f64| {
        let drive = DrivePulse::rectangular(k * base, OMEGA_Q, -1500.0, 0.0).unwrap();
        let f = FilterParams { gain: 1.0 / k, ..filter };
        window(&filtered_lindblad(&system, &drive, &f, 1.0, 800.0), -200.0)
    };
    let (a, b) = (run(1.0), run(2.0));
    let norm = |t: &ComplexTrace| t.samples().iter().map(|z| z / t.max_abs()).collect::<Vec<_>>();
    let err = relative_l2(&norm(&b), &norm(&a));
    assert!(err < 0.01, "relative L2 {err}");
}
