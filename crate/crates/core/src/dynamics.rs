//! Closed-system time evolution in the vacuum + single-excitation sector.
//!
//! The two matrix elements that drive everything are
//!
//!   u+(t) = <1_s|U(t)|1_s> = [Lambda(t) + 1] e^{-i omega t} / 2,
//!   u-(t) = <1_d|U(t)|1_s> = [Lambda(t) - 1] e^{-i omega t} / 2,
//!
//! with `Lambda(t) = sum_j A_j e^{-i R_j t / 3}` over the cubic trio. Each
//! call cross-checks the three-term closed form against the full spectral sum
//! `sum_l C_0l C_0l e^{-i Omega_l t}`; a discrepancy beyond 1e-8 panics, since
//! it would mean the closed form and the spectrum disagree about the same
//! Hamiltonian.

use num_complex::Complex64;

use crate::network::{blocking_margin, NetworkConfig};
use crate::spectral::{analytic_spectrum, cubic_params, CubicSpectralParams, Spectrum};

/// Tolerance for the internal closed-form vs spectral-sum cross-check.
const CROSS_CHECK_TOL: f64 = 1e-8;

/// Single-qubit state `a0 |0> + a1 |1>` with unit norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    a0: Complex64,
    a1: Complex64,
}

impl QubitState {
    /// Build from complex amplitudes, normalizing checks to 1e-12.
    pub fn new(a0: Complex64, a1: Complex64) -> Self {
        let norm = (a0.norm_sqr() + a1.norm_sqr() - 1.0).abs();
        assert!(
            norm < 1e-12,
            "qubit state must be normalized (off by {norm:.3e})"
        );
        Self { a0, a1 }
    }

    /// `alpha |0> + sqrt(1-alpha^2) e^{i theta} |1>` with real `alpha in [0,1]`.
    pub fn from_polar(alpha: f64, theta: f64) -> Self {
        assert!((0.0..=1.0).contains(&alpha), "alpha must lie in [0, 1]");
        let beta = (1.0 - alpha * alpha).max(0.0).sqrt();
        Self {
            a0: Complex64::new(alpha, 0.0),
            a1: Complex64::from_polar(beta, theta),
        }
    }

    pub fn a0(&self) -> Complex64 {
        self.a0
    }

    pub fn a1(&self) -> Complex64 {
        self.a1
    }

    /// Magnitude of the |0> amplitude.
    pub fn alpha(&self) -> f64 {
        self.a0.norm()
    }

    /// Magnitude of the |1> amplitude.
    pub fn beta(&self) -> f64 {
        self.a1.norm()
    }

    /// Phase of the |1> amplitude relative to the |0> amplitude.
    pub fn relative_phase(&self) -> f64 {
        self.a1.arg() - self.a0.arg()
    }
}

/// Source-survival and drain-arrival amplitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferAmplitudes {
    pub u_plus: Complex64,
    pub u_minus: Complex64,
}

/// Vacuum amplitude plus the N+2 site amplitudes of the excitation.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleExcitationState {
    pub vacuum: Complex64,
    pub sites: Vec<Complex64>,
}

impl SingleExcitationState {
    pub fn norm_sqr(&self) -> f64 {
        self.vacuum.norm_sqr() + self.sites.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn source(&self) -> Complex64 {
        self.sites[0]
    }

    pub fn drain(&self) -> Complex64 {
        *self.sites.last().expect("site list is never empty")
    }
}

/// Warning attached to approximate-regime results evaluated outside the
/// blocking regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeWarning {
    /// `(lambda/|delta|) * 3 sqrt(N)`, infinite when delta = 0.
    pub ratio: f64,
    pub threshold: f64,
}

/// Spectral data of one network, reusable across many evaluation times.
pub struct Propagator {
    omega: f64,
    params: CubicSpectralParams,
    spectrum: Spectrum,
    drain: usize,
}

impl Propagator {
    pub fn new(config: &NetworkConfig) -> Self {
        Self {
            omega: config.omega(),
            params: cubic_params(config),
            spectrum: analytic_spectrum(config),
            drain: config.drain_index(),
        }
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    fn lambda_sum(&self, t: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (r, a) in self
            .params
            .roots()
            .into_iter()
            .zip(self.params.amplitudes())
        {
            if a != 0.0 {
                acc += Complex64::from_polar(a, -r * t / 3.0);
            }
        }
        acc
    }

    fn spectral_u(&self, t: f64) -> (Complex64, Complex64) {
        let c = self.spectrum.vectors();
        let mut u_plus = Complex64::new(0.0, 0.0);
        let mut u_minus = Complex64::new(0.0, 0.0);
        for (l, &omega_l) in self.spectrum.eigenvalues().iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -omega_l * t);
            let c0 = c[(0, l)];
            u_plus += phase * (c0 * c0);
            u_minus += phase * (c[(self.drain, l)] * c0);
        }
        (u_plus, u_minus)
    }

    /// Exact transfer amplitudes at time `t`.
    pub fn u_exact(&self, t: f64) -> TransferAmplitudes {
        assert!(t >= 0.0, "time must be non-negative");
        let phase = Complex64::from_polar(0.5, -self.omega * t);
        let lambda = self.lambda_sum(t);
        let u_plus = (lambda + 1.0) * phase;
        let u_minus = (lambda - 1.0) * phase;

        let (sp, sm) = self.spectral_u(t);
        let err = (u_plus - sp).norm().max((u_minus - sm).norm());
        assert!(
            err <= CROSS_CHECK_TOL,
            "closed-form and spectral transfer amplitudes disagree by {err:.3e} at t = {t}"
        );
        TransferAmplitudes { u_plus, u_minus }
    }

    /// Survival probabilities (p_s, p_d) for the information encoded in `psi`.
    pub fn survival_probabilities(&self, psi: &QubitState, t: f64) -> (f64, f64) {
        let u = self.u_exact(t);
        let alpha2 = psi.a0.norm_sqr();
        let beta2 = psi.a1.norm_sqr();
        let p_s = (alpha2 + beta2 * u.u_plus).norm_sqr();
        let p_d = (alpha2 + beta2 * u.u_minus).norm_sqr();
        (p_s, p_d)
    }

    /// Full closed-system state at time `t` for the excitation initially on
    /// the source with qubit amplitudes `psi`.
    pub fn evolve_closed(&self, psi: &QubitState, t: f64) -> SingleExcitationState {
        let dim = self.spectrum.dim();
        let c = self.spectrum.vectors();
        let mut sites = vec![Complex64::new(0.0, 0.0); dim];
        for (l, &omega_l) in self.spectrum.eigenvalues().iter().enumerate() {
            let coeff = Complex64::from_polar(c[(0, l)], -omega_l * t) * psi.a1;
            for (site, amp) in sites.iter_mut().enumerate() {
                *amp += coeff * c[(site, l)];
            }
        }
        SingleExcitationState {
            vacuum: psi.a0,
            sites,
        }
    }
}

/// Exact transfer amplitudes; see [`Propagator::u_exact`]. Prefer building a
/// [`Propagator`] once when sweeping over time grids.
pub fn u_exact(config: &NetworkConfig, t: f64) -> TransferAmplitudes {
    Propagator::new(config).u_exact(t)
}

/// Resonant-transfer approximation
/// `u+ = e^{-i w t} cos^2(sqrt(k/2) l t)`, `u- = -e^{-i w t} sin^2(...)`;
/// exact when kappa = N, and valid in the blocking regime otherwise. The
/// second return value warns when the configuration is outside that regime.
pub fn u_approx(config: &NetworkConfig, t: f64) -> (TransferAmplitudes, Option<RegimeWarning>) {
    let phase = Complex64::from_polar(1.0, -config.omega() * t);
    let arg = (config.kappa() as f64 / 2.0).sqrt() * config.lambda() * t;
    let (sin, cos) = arg.sin_cos();
    let amplitudes = TransferAmplitudes {
        u_plus: phase * (cos * cos),
        u_minus: -phase * (sin * sin),
    };
    let warning = if config.kappa() == config.bus_count() {
        None
    } else {
        match blocking_margin(config) {
            Ok(m) if m.in_blocking_regime => None,
            Ok(m) => Some(RegimeWarning {
                ratio: m.ratio,
                threshold: m.threshold,
            }),
            Err(_) => Some(RegimeWarning {
                ratio: f64::INFINITY,
                threshold: crate::network::DEFAULT_MARGIN_THRESHOLD,
            }),
        }
    };
    (amplitudes, warning)
}

/// Survival probabilities (p_s, p_d); see [`Propagator::survival_probabilities`].
pub fn survival_probabilities(config: &NetworkConfig, psi: &QubitState, t: f64) -> (f64, f64) {
    Propagator::new(config).survival_probabilities(psi, t)
}

/// Closed-system evolution; see [`Propagator::evolve_closed`].
pub fn evolve_closed(config: &NetworkConfig, psi: &QubitState, t: f64) -> SingleExcitationState {
    Propagator::new(config).evolve_closed(psi, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::build_hamiltonian;
    use crate::oracle::UnitaryPropagator;
    use nalgebra::DVector;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn oracle_u(config: &NetworkConfig, t: f64) -> (Complex64, Complex64) {
        let h = build_hamiltonian(config);
        let prop = UnitaryPropagator::new(h.as_matrix()).unwrap();
        let dim = config.dim();
        let mut e0 = DVector::<Complex64>::zeros(dim);
        e0[0] = Complex64::new(1.0, 0.0);
        let v = prop.apply(&e0, t);
        (v[0], v[config.drain_index()])
    }

    #[test]
    fn identity_at_time_zero() {
        let cfg = NetworkConfig::new(1.0, 0.1, 3, 2, 0.4).unwrap();
        let u = u_exact(&cfg, 0.0);
        assert!((u.u_plus - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!(u.u_minus.norm() < 1e-14);
    }

    #[test]
    fn fully_resonant_network_matches_closed_form_and_oracle() {
        let cfg = NetworkConfig::new(1.0, 0.05, 4, 4, 0.9).unwrap();
        let prop = Propagator::new(&cfg);
        for &t in &[0.3, 2.0, 7.7, 31.0] {
            let u = prop.u_exact(t);
            let arg = (2.0f64).sqrt() * 0.05 * t; // sqrt(kappa/2) lambda t
            let phase = Complex64::from_polar(1.0, -t);
            let expected_plus = phase * arg.cos().powi(2);
            let expected_minus = -phase * arg.sin().powi(2);
            assert!((u.u_plus - expected_plus).norm() < 1e-12);
            assert!((u.u_minus - expected_minus).norm() < 1e-12);

            let (op, om) = oracle_u(&cfg, t);
            assert!((u.u_plus - op).norm() < 1e-10);
            assert!((u.u_minus - om).norm() < 1e-10);
        }
    }

    #[test]
    fn detuned_point_matches_matrix_exponential_oracle() {
        let cfg = NetworkConfig::new(1.0, 0.01, 2, 1, 0.7).unwrap();
        let u = u_exact(&cfg, 50.0);
        let (op, om) = oracle_u(&cfg, 50.0);
        assert!((u.u_plus - op).norm() < 1e-10);
        assert!((u.u_minus - om).norm() < 1e-10);
    }

    #[test]
    fn approximate_amplitudes_in_and_out_of_regime() {
        // kappa = 0 blocks: u+ is a bare phase, u- = 0.
        let cfg = NetworkConfig::new(1.0, 1e-4, 9, 0, 1.0).unwrap();
        let (u, warning) = u_approx(&cfg, 13.0);
        assert!((u.u_plus - Complex64::from_polar(1.0, -13.0)).norm() < 1e-14);
        assert_eq!(u.u_minus, Complex64::new(0.0, 0.0));
        assert!(warning.is_none());

        // Full transfer at t = pi / (lambda sqrt(2 kappa)).
        let cfg = NetworkConfig::new(1.0, 0.1, 2, 2, 0.0).unwrap();
        let t = std::f64::consts::PI / (0.1 * 2.0);
        let (u, warning) = u_approx(&cfg, t);
        assert!(u.u_plus.norm() < 1e-15);
        assert!((u.u_minus.norm() - 1.0).abs() < 1e-12);
        assert!(warning.is_none());

        // Out of regime: lambda/delta too large.
        let cfg = NetworkConfig::new(1.0, 0.5, 4, 1, 0.6).unwrap();
        let (_, warning) = u_approx(&cfg, 1.0);
        assert!(warning.is_some());
    }

    #[test]
    fn approximation_error_is_uniformly_small_in_blocking_regime() {
        // lambda/delta = 1e-4, N = 9, kappa = 2.
        let lambda = 1e-4;
        let cfg = NetworkConfig::new(1.0, lambda, 9, 2, 1.0).unwrap();
        let prop = Propagator::new(&cfg);
        let t_max = 10.0 / (lambda * 2.0); // 10 / (lambda sqrt(2 kappa))
        for k in 0..=400 {
            let t = t_max * k as f64 / 400.0;
            let exact = prop.u_exact(t);
            let (approx, _) = u_approx(&cfg, t);
            assert!(
                (exact.u_plus - approx.u_plus).norm() <= 1e-2
                    && (exact.u_minus - approx.u_minus).norm() <= 1e-2,
                "t = {t}"
            );
        }
    }

    #[test]
    fn vacuum_component_is_stationary() {
        let cfg = NetworkConfig::new(1.0, 0.1, 2, 1, 0.5).unwrap();
        let psi = QubitState::from_polar(1.0, 0.0);
        let prop = Propagator::new(&cfg);
        for &t in &[0.0, 3.0, 17.0] {
            let (p_s, p_d) = prop.survival_probabilities(&psi, t);
            assert!((p_s - 1.0).abs() < 1e-12);
            assert!((p_d - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deep_blocking_traps_the_information_at_the_source() {
        let lambda = 5e-4;
        let cfg = NetworkConfig::new(1.0, lambda, 9, 0, 9.0).unwrap();
        let psi = QubitState::from_polar(0.6, 0.0);
        let prop = Propagator::new(&cfg);
        let alpha4 = 0.6f64.powi(4);
        let lower = (1.0f64 - 2.0 * 0.8 * 0.8).powi(2);
        let mut saw_dip = false;
        for k in 0..=2000 {
            let t = 200.0 * std::f64::consts::PI * k as f64 / 2000.0;
            let (p_s, p_d) = prop.survival_probabilities(&psi, t);
            assert!(
                p_s <= 1.0 + 1e-3 && p_s >= lower - 1e-3,
                "p_s = {p_s} at t = {t}"
            );
            assert!((p_d - alpha4).abs() < 1e-3, "p_d = {p_d} at t = {t}");
            saw_dip |= p_s < lower + 1e-2;
        }
        assert!(saw_dip, "p_s never reached its lower envelope");
    }

    #[test]
    fn blocking_recurrence_restores_the_source() {
        let lambda = 5e-4;
        let cfg = NetworkConfig::new(1.0, lambda, 9, 0, 9.0).unwrap();
        let psi = QubitState::from_polar(0.3, 1.1);
        let prop = Propagator::new(&cfg);
        for n in [1u32, 7, 50, 100] {
            let t = 2.0 * std::f64::consts::PI * n as f64;
            let state = prop.evolve_closed(&psi, t);
            assert!((state.source() - psi.a1()).norm() < 1e-3, "n = {n}");
            for amp in &state.sites[1..] {
                assert!(amp.norm() <= 1e-3);
            }
        }
    }

    #[test]
    fn closed_evolution_matches_oracle_and_preserves_norm() {
        let mut rng = StdRng::seed_from_u64(40);
        for _ in 0..25 {
            let cap_n = rng.gen_range(1..=10);
            let kappa = rng.gen_range(0..=cap_n);
            let cfg = NetworkConfig::new(
                1.0,
                rng.gen_range(0.01..0.3),
                cap_n,
                kappa,
                rng.gen_range(-1.0..1.0),
            )
            .unwrap();
            let psi = QubitState::from_polar(rng.gen_range(0.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU));
            let t = rng.gen_range(0.0..30.0);
            let state = evolve_closed(&cfg, &psi, t);
            assert!((state.norm_sqr() - 1.0).abs() < 1e-12);
            assert_eq!(state.vacuum, psi.a0());

            let u = Propagator::new(&cfg).u_exact(t);
            assert!(u.u_plus.norm_sqr() + u.u_minus.norm_sqr() <= 1.0 + 1e-12);

            let h = build_hamiltonian(&cfg);
            let prop = UnitaryPropagator::new(h.as_matrix()).unwrap();
            let dim = cfg.dim();
            let mut v0 = DVector::<Complex64>::zeros(dim);
            v0[0] = psi.a1();
            let v = prop.apply(&v0, t);
            for site in 0..dim {
                assert!((state.sites[site] - v[site]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn excitation_starts_on_the_source() {
        let cfg = NetworkConfig::new(1.0, 0.1, 2, 1, 0.5).unwrap();
        let psi = QubitState::from_polar(0.5, 0.3);
        let state = evolve_closed(&cfg, &psi, 0.0);
        assert!((state.source() - psi.a1()).norm() < 1e-13);
        for amp in &state.sites[1..] {
            assert!(amp.norm() < 1e-13);
        }
    }

    #[test]
    fn mirror_symmetry_of_the_drain_amplitude() {
        // The network is invariant under swapping source and drain, so the
        // cross amplitude is symmetric; check through the oracle.
        let cfg = NetworkConfig::new(1.0, 0.07, 5, 3, 0.8).unwrap();
        let h = build_hamiltonian(&cfg);
        let prop = UnitaryPropagator::new(h.as_matrix()).unwrap();
        let dim = cfg.dim();
        let t = 11.0;
        let mut from_source = DVector::<Complex64>::zeros(dim);
        from_source[0] = Complex64::new(1.0, 0.0);
        let mut from_drain = DVector::<Complex64>::zeros(dim);
        from_drain[cfg.drain_index()] = Complex64::new(1.0, 0.0);
        let a = prop.apply(&from_source, t)[cfg.drain_index()];
        let b = prop.apply(&from_drain, t)[0];
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn kappa_equals_n_makes_the_approximation_exact() {
        let cfg = NetworkConfig::new(1.3, 0.08, 6, 6, 2.0).unwrap();
        let prop = Propagator::new(&cfg);
        let t_scale = 1.0 / (0.08 * (12.0f64).sqrt());
        for k in 0..=100 {
            let t = 10.0 * t_scale * k as f64 / 100.0;
            let exact = prop.u_exact(t);
            let (approx, warning) = u_approx(&cfg, t);
            assert!(warning.is_none());
            assert!((exact.u_plus - approx.u_plus).norm() < 1e-12);
            assert!((exact.u_minus - approx.u_minus).norm() < 1e-12);
        }
    }

    #[test]
    fn recurrence_times_of_the_resonant_network() {
        let cfg = NetworkConfig::new(1.0, 0.1, 4, 4, 0.0).unwrap();
        let prop = Propagator::new(&cfg);
        let period = std::f64::consts::PI / (0.1 * (2.0f64).sqrt()); // pi / (lambda sqrt(kappa/2))
        for k in 1..=5 {
            let u = prop.u_exact(period * k as f64);
            assert!((u.u_plus.norm() - 1.0).abs() < 1e-10, "k = {k}");
        }
    }

    #[test]
    fn survival_reduces_to_amplitude_moduli_for_pure_excitation() {
        let cfg = NetworkConfig::new(1.0, 0.1, 3, 1, 0.4).unwrap();
        let psi = QubitState::from_polar(0.0, 0.0);
        let prop = Propagator::new(&cfg);
        for &t in &[0.5, 4.0, 9.0] {
            let (p_s, p_d) = prop.survival_probabilities(&psi, t);
            let u = prop.u_exact(t);
            assert!((p_s - u.u_plus.norm_sqr()).abs() < 1e-12);
            assert!((p_d - u.u_minus.norm_sqr()).abs() < 1e-12);
        }
    }
}
