//! Cross-module workflows: a plan produced by the design module must be
//! honored by the dynamics, and a designed gate must survive the open-system
//! treatment.

use qtrans::design::{design_gate, parse_rational, plan_transfer, predict_gate_output, GateFixing};
use qtrans::dynamics::{survival_probabilities, QubitState};
use qtrans::network::NetworkConfig;
use qtrans::open_system::{exchange_exponent, fidelity_point, rho_series, ReservoirParams};

#[test]
fn planned_transfer_window_delivers_the_state() {
    // omega = 4, lambda = 1: kappa = 8, tau = pi/4. Build the fully resonant
    // bus of that size and check the drain probability at the window.
    let omega = parse_rational("4").unwrap();
    let lambda = parse_rational("1").unwrap();
    let plan = plan_transfer(&omega, &lambda, 1).unwrap();
    let kappa = plan.kappa_usize().unwrap();
    assert_eq!(kappa, 8);

    let cfg = NetworkConfig::new(4.0, 1.0, kappa, kappa, 0.0).unwrap();
    let psi = QubitState::from_polar(0.6, 1.3);
    let (_, p_d) = survival_probabilities(&cfg, &psi, plan.tau_trans);
    assert!((p_d - 1.0).abs() < 1e-6, "p_d = {p_d}");
}

#[test]
fn gigahertz_plan_drives_a_real_network() {
    // The kappa = 2048 plan, executed on the actual 2050-site network.
    let omega = parse_rational("1e10").unwrap();
    let lambda = parse_rational("1e4").unwrap();
    let plan = plan_transfer(&omega, &lambda, 1).unwrap();
    let kappa = plan.kappa_usize().unwrap();
    let cfg = NetworkConfig::new(1e10, 1e4, kappa, kappa, 0.0).unwrap();
    let psi = QubitState::from_polar(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let (_, p_d) = survival_probabilities(&cfg, &psi, plan.tau_trans);
    assert!((p_d - 1.0).abs() < 1e-6, "p_d = {p_d}");
}

#[test]
fn designed_gate_survives_mild_damping() {
    // Design the gate, run the open system through the series, and compare
    // the achieved fidelity with the closed form.
    let phi = -2.0;
    let plan = design_gate(
        phi,
        GateFixing::LambdaKappa {
            lambda: 1.0,
            kappa: 2,
        },
        None,
    )
    .unwrap();
    let cfg = NetworkConfig::new(plan.omega, plan.lambda, 2, 2, 0.0).unwrap();
    let psi = QubitState::from_polar(0.8, 0.25);
    let reservoir = ReservoirParams::new(0.03, 0.2).unwrap();
    let rho = rho_series(&cfg, &reservoir, &psi, plan.t_ex, 4, 1e-8).unwrap();

    let ideal = predict_gate_output(&plan, &psi);
    let space = rho.space();
    let mut target = nalgebra::DVector::<num_complex::Complex64>::zeros(space.dim());
    target[0] = ideal.a0();
    target[space.single_excitation(cfg.drain_index())] = ideal.a1();
    let achieved = rho.expectation(&target);

    let x = exchange_exponent(0.03, 1.0, 2);
    let expected = fidelity_point(2, x, 0.2, psi.alpha()).unwrap();
    assert!(
        (achieved - expected).abs() < 1e-6,
        "series fidelity {achieved} vs closed form {expected}"
    );
    assert!(achieved > 0.9);
}
