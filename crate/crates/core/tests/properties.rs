use std::f64::consts::PI;

use nalgebra::DMatrix;
use proptest::prelude::*;

use portrait_core::filter_chain::{add_noise, filter_apply};
use portrait_core::fitting::{fit, FitProblem, FitSpec, Param};
use portrait_core::input_output::{detuned_fit_model, steady_state, ModelParams};
use portrait_core::lindblad::{build_hamiltonian, collective_couplings, MultiQubitSystem, Site};
use portrait_core::{Complex64, ComplexTrace, DrivePulse, FilterParams, QubitParams};

fn site() -> impl Strategy<Value = Site> {
    (40.0..50.0f64, 0.0..0.01f64, -0.05..0.05f64, 0.0..0.01f64).prop_map(|(omega, g, x, gamma_internal)| Site {
        omega,
        g,
        x,
        gamma_internal,
    })
}

fn system() -> impl Strategy<Value = MultiQubitSystem> {
    (prop::collection::vec(site(), 1..=3), prop::collection::vec(-0.1..0.1f64, 3)).prop_map(|(sites, c)| {
        let n = sites.len();
        let mut g = DMatrix::zeros(n, n);
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                g[(i, j)] = c[k];
                g[(j, i)] = c[k];
                k += 1;
            }
        }
        MultiQubitSystem::new(sites, g, 0.3).unwrap()
    })
}

fn samples(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| Complex64::new(a, b)), len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hamiltonian_is_hermitian(sys in system(), alpha in 0.0..1.0f64, omega in 40.0..50.0f64, env in 0.0..1.0f64) {
        let drive = DrivePulse::rectangular(alpha, omega, 0.0, 1.0).unwrap();
        let c = collective_couplings(&sys, Some(&drive));
        let h = build_hamiltonian(&sys, &c, omega, env);
        let err = (&h - h.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-14);
    }

    #[test]
    fn decay_matrix_is_positive_for_equal_frequencies(mut sys_sites in prop::collection::vec(site(), 1..=3)) {
        for s in &mut sys_sites {
            s.omega = 45.0;
        }
        let n = sys_sites.len();
        let sys = MultiQubitSystem::new(sys_sites, DMatrix::zeros(n, n), 0.3).unwrap();
        let gamma = collective_couplings(&sys, None).gamma;
        let min = gamma.symmetric_eigen().eigenvalues.min();
        prop_assert!(min > -1e-15);
    }

    #[test]
    fn steady_state_inside_bloch_ball(alpha in 0.0..3.0f64, delta in -0.1..0.1f64, beta in 0.05..1.0f64) {
        let q = QubitParams::from_gamma_beta(45.0, 0.03, beta).unwrap();
        let [x, y, z] = steady_state(&q, alpha, delta).bloch_vector();
        prop_assert!(x * x + y * y + z * z <= 1.0 + 1e-12);
    }

    #[test]
    fn trace_csv_round_trip(s in samples(17), t0 in -100.0..100.0f64, dt in 0.01..10.0f64) {
        let trace = ComplexTrace::new(t0, dt, s).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let back = ComplexTrace::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.samples(), trace.samples());
        prop_assert!((back.dt() - dt).abs() < 1e-9 * dt);
    }

    #[test]
    fn filter_is_linear(a in samples(64), b in samples(64), c in -2.0..2.0f64, kappa in 0.01..0.5f64, w in -0.3..0.3f64) {
        let f = FilterParams { omega_amp: w, kappa, gain: 1.7, noise_sigma: 0.0, seed: 0 };
        let ta = ComplexTrace::new(0.0, 0.5, a.clone()).unwrap();
        let tb = ComplexTrace::new(0.0, 0.5, b.clone()).unwrap();
        let sum: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x + c * y).collect();
        let ts = ComplexTrace::new(0.0, 0.5, sum).unwrap();
        let (fa, fb, fs) = (filter_apply(&ta, &f).unwrap(), filter_apply(&tb, &f).unwrap(), filter_apply(&ts, &f).unwrap());
        for k in 0..64 {
            let expect = fa.samples()[k] + c * fb.samples()[k];
            prop_assert!((fs.samples()[k] - expect).norm() < 1e-12 * (1.0 + expect.norm()));
        }
    }

    #[test]
    fn closed_form_is_continuous_at_stop(
        alpha in 0.0..0.3f64,
        dqd in -0.02..0.02f64,
        dda in -0.05..0.05f64,
        kappa in 0.005..0.1f64,
        phase in -PI..PI,
    ) {
        let p = ModelParams {
            alpha, gamma: 0.01, beta: 0.8, delta_qd: dqd, delta_da: dda, kappa,
            gain: 1.3, phase, offset_re: 0.01, offset_im: -0.02,
        };
        let before = p.eval(-1e-12).unwrap();
        let after = p.eval(0.0).unwrap();
        prop_assert!((before - after).norm() < 1e-9 * (1.0 + before.norm()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn accepted_losses_never_increase(seed in 0u64..1000, scale in 0.5..1.5f64) {
        let gamma = 2.0 * PI * 1.5e-3;
        let truth = ModelParams {
            alpha: gamma.sqrt(), gamma, beta: 0.9, delta_qd: 0.0005, delta_da: 0.0,
            kappa: 2.0 * PI * 2.5e-3, gain: 1.0, phase: 0.2, offset_re: 0.0, offset_im: 0.0,
        };
        let clean = detuned_fit_model(&truth, -300.0, 3.0, 500).unwrap();
        let data = add_noise(&clean, 0.01 * clean.max_abs(), seed, 0);
        let start = ModelParams { gamma: gamma * scale, kappa: truth.kappa / scale, ..truth };
        let spec = FitSpec::new(start)
            .free(Param::Gamma, 0.1 * gamma, 10.0 * gamma)
            .free(Param::Kappa, 0.1 * truth.kappa, 10.0 * truth.kappa)
            .free(Param::DeltaQd, -0.01, 0.01)
            .free(Param::Phase, -4.0, 4.0);
        let r = fit(&FitProblem::new(data, spec)).unwrap();
        prop_assert!(r.loss_history.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(r.residual >= 0.0);
    }
}
