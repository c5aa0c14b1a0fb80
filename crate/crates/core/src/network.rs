//! Network configuration and the single-excitation Hamiltonian.
//!
//! Site convention for the (N+2)-dimensional single-excitation basis:
//! index 0 is the source, indices 1..=kappa are the resonant bus oscillators,
//! indices kappa+1..=N are the detuned bus oscillators, index N+1 is the
//! drain. Every matrix-valued operation in this crate uses this labeling.

use nalgebra::DMatrix;
use serde::Deserialize;
use thiserror::Error;

/// Default operationalization of the "much smaller than" blocking condition.
pub const DEFAULT_MARGIN_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("omega must be positive (got {0})")]
    NonPositiveOmega(f64),
    #[error("lambda must be positive (got {0})")]
    NonPositiveLambda(f64),
    #[error("omega must be finite (got {0})")]
    NonFiniteOmega(f64),
    #[error("lambda must be finite (got {0})")]
    NonFiniteLambda(f64),
    #[error("delta must be finite (got {0})")]
    NonFiniteDelta(f64),
    #[error("the data bus needs at least one oscillator (N = 0)")]
    EmptyBus,
    #[error("kappa = {kappa} exceeds the bus size N = {cap_n}")]
    KappaOutOfRange { kappa: usize, cap_n: usize },
    #[error("blocking-regime operation requires delta != 0 when kappa < N")]
    DegenerateDetuning,
    #[error("config parse error: {0}")]
    Parse(String),
}

/// Physical parameters of the source / data-bus / drain network.
///
/// `omega` is the common angular frequency of the source, drain and resonant
/// bus oscillators, `lambda` the (real, identical) coupling of each end
/// oscillator to every bus oscillator, `cap_n` the bus size, `kappa` the
/// number of resonant bus oscillators and `delta` the detuning of the
/// remaining `cap_n - kappa` oscillators (`omega_tilde = omega + delta`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig {
    omega: f64,
    lambda: f64,
    cap_n: usize,
    kappa: usize,
    delta: f64,
}

/// File schema for config ingestion; `units` selects Hz (converted by 2*pi)
/// or angular input for omega, lambda and delta.
#[derive(Debug, Deserialize)]
struct ConfigFile {
    omega: f64,
    lambda: f64,
    #[serde(rename = "N")]
    cap_n: usize,
    kappa: usize,
    delta: f64,
    #[serde(default)]
    units: Units,
}

#[derive(Debug, Clone, Copy, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
enum Units {
    #[default]
    Angular,
    Hz,
}

impl NetworkConfig {
    pub fn new(
        omega: f64,
        lambda: f64,
        cap_n: usize,
        kappa: usize,
        delta: f64,
    ) -> Result<Self, ConfigError> {
        if !omega.is_finite() {
            return Err(ConfigError::NonFiniteOmega(omega));
        }
        if !lambda.is_finite() {
            return Err(ConfigError::NonFiniteLambda(lambda));
        }
        if !delta.is_finite() {
            return Err(ConfigError::NonFiniteDelta(delta));
        }
        if omega <= 0.0 {
            return Err(ConfigError::NonPositiveOmega(omega));
        }
        if lambda <= 0.0 {
            return Err(ConfigError::NonPositiveLambda(lambda));
        }
        if cap_n == 0 {
            return Err(ConfigError::EmptyBus);
        }
        if kappa > cap_n {
            return Err(ConfigError::KappaOutOfRange { kappa, cap_n });
        }
        Ok(Self {
            omega,
            lambda,
            cap_n,
            kappa,
            delta,
        })
    }

    /// Parse a JSON document `{omega, lambda, N, kappa, delta, units}`.
    pub fn from_json(json: &str) -> Result<Self, ConfigError> {
        let file: ConfigFile =
            serde_json::from_str(json).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let scale = match file.units {
            Units::Angular => 1.0,
            Units::Hz => 2.0 * std::f64::consts::PI,
        };
        Self::new(
            file.omega * scale,
            file.lambda * scale,
            file.cap_n,
            file.kappa,
            file.delta * scale,
        )
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Total number of data-bus oscillators.
    pub fn bus_count(&self) -> usize {
        self.cap_n
    }

    /// Number of resonant data-bus oscillators.
    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Frequency of the detuned bus oscillators.
    pub fn omega_tilde(&self) -> f64 {
        self.omega + self.delta
    }

    pub fn detuned_count(&self) -> usize {
        self.cap_n - self.kappa
    }

    /// Dimension of the single-excitation site basis.
    pub fn dim(&self) -> usize {
        self.cap_n + 2
    }

    /// Detuning as seen by the spectral formulas. With `kappa == N` there are
    /// no detuned oscillators, so `delta` never enters the Hamiltonian and is
    /// treated as zero; this keeps the cubic free of the spurious root at
    /// `omega + delta`.
    pub fn effective_delta(&self) -> f64 {
        if self.kappa == self.cap_n {
            0.0
        } else {
            self.delta
        }
    }

    pub fn source_index(&self) -> usize {
        0
    }

    pub fn drain_index(&self) -> usize {
        self.cap_n + 1
    }
}

/// Real symmetric matrix, which is Hermitian on the nose.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(DMatrix<f64>);

impl HermitianMatrix {
    /// Wrap a matrix, requiring exact symmetry (the constructors in this
    /// crate build symmetric matrices entry by entry).
    pub fn try_new(m: DMatrix<f64>) -> Result<Self, &'static str> {
        if m.nrows() != m.ncols() {
            return Err("matrix is not square");
        }
        for i in 0..m.nrows() {
            for j in 0..i {
                if m[(i, j)] != m[(j, i)] {
                    return Err("matrix is not symmetric");
                }
            }
        }
        Ok(Self(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

/// Build the (N+2)x(N+2) single-excitation Hamiltonian: `omega` on the ends
/// and the resonant bus diagonal, `omega + delta` on the detuned diagonal,
/// `lambda` between each end oscillator and every bus oscillator, and no
/// bus-bus or source-drain coupling.
pub fn build_hamiltonian(config: &NetworkConfig) -> HermitianMatrix {
    let dim = config.dim();
    let src = config.source_index();
    let drn = config.drain_index();
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    h[(src, src)] = config.omega();
    h[(drn, drn)] = config.omega();
    for m in 1..=config.bus_count() {
        h[(m, m)] = if m <= config.kappa() {
            config.omega()
        } else {
            config.omega_tilde()
        };
        h[(src, m)] = config.lambda();
        h[(m, src)] = config.lambda();
        h[(drn, m)] = config.lambda();
        h[(m, drn)] = config.lambda();
    }
    HermitianMatrix(h)
}

/// Outcome of the blocking-regime check `lambda/|delta| << 1/(3 sqrt(N))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockingMargin {
    /// `(lambda/|delta|) * 3 sqrt(N)`; blocking needs this to be small.
    pub ratio: f64,
    pub threshold: f64,
    pub in_blocking_regime: bool,
}

/// Blocking check with the default threshold of 0.1.
pub fn blocking_margin(config: &NetworkConfig) -> Result<BlockingMargin, ConfigError> {
    blocking_margin_with(config, DEFAULT_MARGIN_THRESHOLD)
}

pub fn blocking_margin_with(
    config: &NetworkConfig,
    threshold: f64,
) -> Result<BlockingMargin, ConfigError> {
    if config.delta() == 0.0 {
        return Err(ConfigError::DegenerateDetuning);
    }
    let ratio = config.lambda() / config.delta().abs() * 3.0 * (config.bus_count() as f64).sqrt();
    Ok(BlockingMargin {
        ratio,
        threshold,
        in_blocking_regime: ratio <= threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn three_by_three_star() {
        let cfg = NetworkConfig::new(1.0, 0.1, 1, 1, 0.0).unwrap();
        let h = build_hamiltonian(&cfg);
        let expected = [[1.0, 0.1, 0.0], [0.1, 1.0, 0.1], [0.0, 0.1, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(h.as_matrix()[(i, j)], expected[i][j]);
            }
        }
    }

    #[test]
    fn four_by_four_with_detuned_oscillator() {
        let cfg = NetworkConfig::new(1.0, 0.1, 2, 1, 0.5).unwrap();
        let h = build_hamiltonian(&cfg);
        let m = h.as_matrix();
        assert_eq!(m[(0, 0)], 1.0);
        assert_eq!(m[(1, 1)], 1.0);
        assert_eq!(m[(2, 2)], 1.5);
        assert_eq!(m[(3, 3)], 1.0);
        for col in [1, 2] {
            assert_eq!(m[(0, col)], 0.1);
            assert_eq!(m[(3, col)], 0.1);
            assert_eq!(m[(col, 0)], 0.1);
            assert_eq!(m[(col, 3)], 0.1);
        }
        assert_eq!(m[(0, 3)], 0.0);
        assert_eq!(m[(1, 2)], 0.0);
    }

    #[test]
    fn hamiltonian_is_symmetric_with_diagonal_bus_block() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let cap_n = rng.gen_range(1..=12);
            let kappa = rng.gen_range(0..=cap_n);
            let cfg = NetworkConfig::new(
                rng.gen_range(0.5..5.0),
                rng.gen_range(0.01..1.0),
                cap_n,
                kappa,
                rng.gen_range(-2.0..2.0),
            )
            .unwrap();
            let h = build_hamiltonian(&cfg);
            let m = h.as_matrix();
            assert_eq!(m, &m.transpose());
            for i in 1..=cap_n {
                for j in 1..=cap_n {
                    if i != j {
                        assert_eq!(m[(i, j)], 0.0);
                    }
                }
            }
            assert_eq!(m[(0, cap_n + 1)], 0.0);
        }
    }

    #[test]
    fn resonant_relabeling_is_a_permutation_similarity() {
        // Swapping two resonant bus sites leaves the matrix invariant, so the
        // permutation similarity P H P^T equals H itself.
        let cfg = NetworkConfig::new(1.0, 0.3, 5, 3, 0.8).unwrap();
        let h = build_hamiltonian(&cfg).into_matrix();
        let dim = cfg.dim();
        let mut p = DMatrix::<f64>::identity(dim, dim);
        p.swap_rows(1, 3);
        let permuted = &p * &h * p.transpose();
        assert_eq!(permuted, h);
    }

    #[test]
    fn margin_examples() {
        let cfg = NetworkConfig::new(1.0, 1e4, 9, 0, 1e8).unwrap();
        let m = blocking_margin(&cfg).unwrap();
        assert!((m.ratio - 9e-4).abs() < 1e-18);
        assert!(m.in_blocking_regime);

        let cfg = NetworkConfig::new(1.0, 1.0, 1, 0, 1.0).unwrap();
        let m = blocking_margin(&cfg).unwrap();
        assert!((m.ratio - 3.0).abs() < 1e-12);
        assert!(!m.in_blocking_regime);

        let cfg = NetworkConfig::new(1.0, 1.0, 1, 0, 0.0).unwrap();
        assert_eq!(blocking_margin(&cfg), Err(ConfigError::DegenerateDetuning));
    }

    #[test]
    fn invalid_configs_name_the_violated_invariant() {
        assert!(matches!(
            NetworkConfig::new(-1.0, 0.1, 1, 0, 0.0),
            Err(ConfigError::NonPositiveOmega(_))
        ));
        assert!(matches!(
            NetworkConfig::new(1.0, 0.0, 1, 0, 0.0),
            Err(ConfigError::NonPositiveLambda(_))
        ));
        assert!(matches!(
            NetworkConfig::new(1.0, 0.1, 0, 0, 0.0),
            Err(ConfigError::EmptyBus)
        ));
        assert!(matches!(
            NetworkConfig::new(1.0, 0.1, 2, 3, 0.0),
            Err(ConfigError::KappaOutOfRange { .. })
        ));
    }

    #[test]
    fn json_ingestion_converts_hz() {
        let cfg = NetworkConfig::from_json(
            r#"{"omega": 1.0, "lambda": 0.1, "N": 2, "kappa": 1, "delta": 0.5, "units": "hz"}"#,
        )
        .unwrap();
        let tau = 2.0 * std::f64::consts::PI;
        assert!((cfg.omega() - tau).abs() < 1e-15);
        assert!((cfg.lambda() - 0.1 * tau).abs() < 1e-15);
        assert!((cfg.delta() - 0.5 * tau).abs() < 1e-15);

        let cfg = NetworkConfig::from_json(
            r#"{"omega": 1.0, "lambda": 0.1, "N": 2, "kappa": 1, "delta": 0.5}"#,
        )
        .unwrap();
        assert_eq!(cfg.omega(), 1.0);
    }
}
