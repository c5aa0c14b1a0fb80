//! The `validate` subcommand: run the oracle-equivalence suite and report
//! one row per check.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

use qtrans::design::{design_gate, GateFixing};
use qtrans::dispersive::{simulate_dispersive, DispersiveConfig};
use qtrans::dynamics::{Propagator, QubitState};
use qtrans::network::{build_hamiltonian, NetworkConfig};
use qtrans::open_system::{exchange_exponent, fidelity_avg, fidelity_point};
use qtrans::oracle::{
    average_over_states, eig_hermitian, lindblad_integrate, DensityMatrix, StateMeasure,
    StepControl, TruncatedFockSpace, UnitaryPropagator,
};
use qtrans::spectral::analytic_spectrum;

pub struct CheckRow {
    pub check: &'static str,
    pub config: String,
    pub max_error: f64,
    pub tolerance: f64,
}

impl CheckRow {
    pub fn pass(&self) -> bool {
        self.max_error <= self.tolerance
    }

    pub fn to_json(&self) -> Value {
        json!({
            "check": self.check,
            "config": self.config,
            "max_error": self.max_error,
            "tolerance": self.tolerance,
            "pass": self.pass(),
        })
    }
}

fn random_config(rng: &mut StdRng) -> NetworkConfig {
    let cap_n = rng.gen_range(1..=12);
    let kappa = rng.gen_range(0..=cap_n);
    let lambda = 10f64.powf(rng.gen_range(-2.0..0.0));
    let delta = if rng.gen_bool(0.2) {
        0.0
    } else {
        10f64.powf(rng.gen_range(-2.0..2.0)) * lambda * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }
    };
    NetworkConfig::new(1.0, lambda, cap_n, kappa, delta).unwrap()
}

pub fn run_suite() -> Vec<CheckRow> {
    let mut rows = Vec::new();
    let mut rng = StdRng::seed_from_u64(4242);

    // 1. Closed-form spectrum vs dense eigensolver.
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let cfg = random_config(&mut rng);
        let s = analytic_spectrum(&cfg);
        let h = build_hamiltonian(&cfg);
        let (vals, _) = eig_hermitian(h.as_matrix()).unwrap();
        let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for (g, o) in s.sorted_eigenvalues().iter().zip(vals.iter()) {
            worst = worst.max((g - o).abs() / scale);
        }
        let d = s.vectors().transpose() * h.as_matrix() * s.vectors();
        for i in 0..cfg.dim() {
            for j in 0..cfg.dim() {
                if i != j {
                    worst = worst.max(d[(i, j)].abs() / cfg.omega());
                }
            }
        }
    }
    rows.push(CheckRow {
        check: "spectrum-vs-eigensolver",
        config: "20 random networks, N <= 12".into(),
        max_error: worst,
        tolerance: 1e-10,
    });

    // 2. Transfer amplitudes vs matrix-exponential propagation.
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let cfg = random_config(&mut rng);
        let prop = Propagator::new(&cfg);
        let oracle = UnitaryPropagator::new(build_hamiltonian(&cfg).as_matrix()).unwrap();
        let mut e0 = DVector::<Complex64>::zeros(cfg.dim());
        e0[0] = Complex64::new(1.0, 0.0);
        for k in 0..200 {
            let t = 20.0 / cfg.lambda() * k as f64 / 199.0;
            let u = prop.u_exact(t);
            let v = oracle.apply(&e0, t);
            worst = worst
                .max((u.u_plus - v[0]).norm())
                .max((u.u_minus - v[cfg.drain_index()]).norm());
        }
    }
    rows.push(CheckRow {
        check: "transfer-amplitudes-vs-propagator",
        config: "5 random networks x 200 times".into(),
        max_error: worst,
        tolerance: 1e-10,
    });

    // 3. Single-mode thermal relaxation law.
    let mut worst = 0.0f64;
    {
        let space = TruncatedFockSpace::new(1, 14).unwrap();
        let h = nalgebra::DMatrix::from_row_slice(1, 1, &[1.0]);
        let (gamma, nbar) = (0.6, 0.35);
        let mut psi = DVector::<Complex64>::zeros(space.dim());
        psi[space.single_excitation(0)] = Complex64::new(1.0, 0.0);
        let rho0 = DensityMatrix::from_pure(space.clone(), &psi);
        for &t in &[0.5, 1.5, 3.0] {
            let rho =
                lindblad_integrate(&h, gamma, nbar, &rho0, t, &StepControl::default()).unwrap();
            let n_mean: f64 = (0..space.dim())
                .map(|i| space.occupation(i, 0) as f64 * rho.matrix()[(i, i)].re)
                .sum();
            let expected = (-gamma * t).exp() + nbar * (1.0 - (-gamma * t).exp());
            worst = worst.max((n_mean - expected).abs());
        }
    }
    rows.push(CheckRow {
        check: "lindblad-single-mode-occupation",
        config: "gamma = 0.6, nbar = 0.35, n_max = 14".into(),
        max_error: worst,
        tolerance: 1e-6,
    });

    // 4. Closed-form fidelity vs integrated master equation.
    let worst = {
        let phi = std::f64::consts::FRAC_PI_2;
        let plan = design_gate(
            phi,
            GateFixing::LambdaKappa {
                lambda: 1.0,
                kappa: 1,
            },
            None,
        )
        .expect("gate plan");
        let cfg = NetworkConfig::new(plan.omega, 1.0, 1, 1, 0.0).unwrap();
        let (gamma, nbar, alpha) = (0.1, 0.3, std::f64::consts::FRAC_1_SQRT_2);
        let space = TruncatedFockSpace::new(cfg.dim(), 4).unwrap();
        let mut psi0 = DVector::<Complex64>::zeros(space.dim());
        psi0[0] = Complex64::new(alpha, 0.0);
        psi0[space.single_excitation(0)] = Complex64::new((1.0 - alpha * alpha).sqrt(), 0.0);
        let rho0 = DensityMatrix::from_pure(space.clone(), &psi0);
        let rho = lindblad_integrate(
            build_hamiltonian(&cfg).as_matrix(),
            gamma,
            nbar,
            &rho0,
            plan.t_ex,
            &StepControl::default(),
        )
        .unwrap();
        let mut target = DVector::<Complex64>::zeros(space.dim());
        target[0] = Complex64::new(alpha, 0.0);
        target[space.single_excitation(cfg.drain_index())] =
            Complex64::from_polar((1.0 - alpha * alpha).sqrt(), phi);
        let f_oracle = rho.expectation(&target);
        let f_formula = fidelity_point(1, exchange_exponent(gamma, 1.0, 1), nbar, alpha).unwrap();
        (f_oracle - f_formula).abs()
    };
    rows.push(CheckRow {
        check: "fidelity-closed-form-vs-integrator",
        config: "kappa = N = 1, gamma/lambda = 0.1, nbar = 0.3, alpha = 1/sqrt(2)".into(),
        max_error: worst,
        tolerance: 1e-2,
    });

    // 5. Averaged fidelity vs quadrature of the pointwise form.
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let kappa = rng.gen_range(1..=40);
        let nbar = rng.gen_range(0.0..1.0);
        let x = exchange_exponent(rng.gen_range(0.0..1.0), 1.0, kappa);
        let direct = fidelity_avg(kappa, x, nbar).unwrap();
        let quad = average_over_states(
            |psi: &QubitState| fidelity_point(kappa, x, nbar, psi.alpha()).unwrap(),
            StateMeasure::AlphaUniform,
            64,
            false,
        );
        worst = worst.max((direct - quad).abs());
    }
    rows.push(CheckRow {
        check: "average-fidelity-vs-quadrature",
        config: "100 random (kappa, nbar, gamma) points".into(),
        max_error: worst,
        tolerance: 1e-12,
    });

    // 6. Dispersive factorization and phase against the joint oracle.
    let worst = {
        let cfg = DispersiveConfig {
            omega0: 10.0,
            nu: 3.0,
            g: 0.1,
            gamma_spont: 0.02,
            nbar_field: 0.5,
        };
        let field = QubitState::from_polar(0.6, 0.8);
        let out = simulate_dispersive(&cfg, &field, 21.0).unwrap();
        (out.field_purity - 1.0).abs().max(out.phase_error)
    };
    rows.push(CheckRow {
        check: "dispersive-factorization",
        config: "omega0 = 10, nu = 3, g = 0.1, t = 21".into(),
        max_error: worst,
        tolerance: 1e-10,
    });

    rows
}
