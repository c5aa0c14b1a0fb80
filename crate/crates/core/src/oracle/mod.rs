//! Independent brute-force reference implementations.
//!
//! Everything here is deliberately decoupled from the closed-form modules:
//! the eigensolver is a dense numerical routine, time evolution goes through
//! it rather than through the analytic spectrum, the master equation is
//! integrated step by step, and state averages are done by quadrature. The
//! analytic modules are validated against these in tests and in the
//! `validate` CLI subcommand; they never feed them.

mod lindblad;
mod quadrature;

pub use crate::fock::{DensityMatrix, FockError, TruncatedFockSpace, DIMENSION_GUARD};
pub use lindblad::{lindblad_integrate, LindbladOps, StepControl};
pub use quadrature::{average_over_states, gauss_legendre_unit, StateMeasure};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("matrix is not Hermitian (max asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },
    #[error("matrix dimension {got} does not match expected {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("truncated Fock dimension {dim} exceeds the guard {DIMENSION_GUARD}")]
    DimensionGuard { dim: usize },
    #[error("numerical instability at t = {t:.6e} with step {h:.6e}: {detail}")]
    NumericalInstability { t: f64, h: f64, detail: String },
    #[error(
        "step halving did not converge after {refinements} refinements \
         (last trace-distance change {last_change:.3e})"
    )]
    NoConvergence { refinements: u32, last_change: f64 },
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a real symmetric
/// matrix, backed by a dense numerical eigensolver.
pub fn eig_hermitian(matrix: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>), OracleError> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(OracleError::DimensionMismatch {
            got: matrix.ncols(),
            want: n,
        });
    }
    let scale = matrix.abs().max();
    let mut asymmetry: f64 = 0.0;
    for i in 0..n {
        for j in 0..i {
            asymmetry = asymmetry.max((matrix[(i, j)] - matrix[(j, i)]).abs());
        }
    }
    if asymmetry > 1e-12 * scale.max(1.0) {
        return Err(OracleError::NotHermitian { asymmetry });
    }

    let eig = matrix.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }

    let norm = values
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for l in 0..n {
        let residual = (matrix * vectors.column(l) - vectors.column(l) * values[l]).norm();
        assert!(
            residual <= 1e-11 * norm * (n as f64).sqrt(),
            "eigensolver residual {residual:.3e} out of tolerance"
        );
    }
    let gram = vectors.transpose() * &vectors;
    let ortho_err = (&gram - DMatrix::<f64>::identity(n, n)).abs().max();
    assert!(
        ortho_err <= 1e-12 * n as f64,
        "eigenvectors not orthonormal ({ortho_err:.3e})"
    );

    Ok((values, vectors))
}

/// Eigendecomposition of a Hermitian matrix, diagonalized once and reused for
/// many evolution times.
pub struct UnitaryPropagator {
    values: DVector<f64>,
    vectors: DMatrix<f64>,
}

impl UnitaryPropagator {
    pub fn new(matrix: &DMatrix<f64>) -> Result<Self, OracleError> {
        let (values, vectors) = eig_hermitian(matrix)?;
        Ok(Self { values, vectors })
    }

    /// `exp(-i H t) v0` via the eigendecomposition.
    pub fn apply(&self, v0: &DVector<Complex64>, t: f64) -> DVector<Complex64> {
        let n = self.values.len();
        assert_eq!(v0.len(), n);
        let mut out = DVector::<Complex64>::zeros(n);
        for l in 0..n {
            let col = self.vectors.column(l);
            let overlap: Complex64 = col
                .iter()
                .zip(v0.iter())
                .map(|(&c, &v)| Complex64::new(c, 0.0).conj() * v)
                .sum();
            let phase = Complex64::from_polar(1.0, -self.values[l] * t);
            let coeff = phase * overlap;
            for i in 0..n {
                out[i] += coeff * Complex64::new(col[i], 0.0);
            }
        }
        out
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.values
    }
}

/// One-shot `exp(-i H t) v0` for a real symmetric `H`.
pub fn propagate_unitary(
    matrix: &DMatrix<f64>,
    v0: &DVector<Complex64>,
    t: f64,
) -> Result<DVector<Complex64>, OracleError> {
    Ok(UnitaryPropagator::new(matrix)?.apply(v0, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn pauli_x_spectrum() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let (vals, _) = eig_hermitian(&m).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14);
        assert!((vals[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn three_site_star_spectrum() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.1, 0.0, 0.1, 1.0, 0.1, 0.0, 0.1, 1.0]);
        let (vals, _) = eig_hermitian(&m).unwrap();
        let r2 = std::f64::consts::SQRT_2;
        assert!((vals[0] - (1.0 - 0.1 * r2)).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        assert!((vals[2] - (1.0 + 0.1 * r2)).abs() < 1e-12);
    }

    #[test]
    fn random_symmetric_matrices_give_orthonormal_vectors() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..5 {
            let n = 20;
            let mut m = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    let v = rng.gen_range(-1.0..1.0);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            // eig_hermitian asserts orthonormality and residuals internally.
            let (vals, vecs) = eig_hermitian(&m).unwrap();
            let gram = vecs.transpose() * &vecs;
            assert!((gram - DMatrix::<f64>::identity(n, n)).abs().max() < 1e-12 * n as f64);
            for l in 1..n {
                assert!(vals[l] >= vals[l - 1]);
            }
        }
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        assert!(matches!(
            eig_hermitian(&m),
            Err(OracleError::NotHermitian { .. })
        ));
    }

    #[test]
    fn propagation_at_zero_time_is_identity() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, -0.3]);
        let v0 = DVector::from_vec(vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]);
        let v = propagate_unitary(&m, &v0, 0.0).unwrap();
        assert!((&v - &v0).norm() < 1e-14);
    }

    #[test]
    fn single_mode_phase_rotation() {
        let omega = 2.37;
        let m = DMatrix::from_row_slice(1, 1, &[omega]);
        let v0 = DVector::from_vec(vec![Complex64::new(1.0, 0.0)]);
        let t = 1.7;
        let v = propagate_unitary(&m, &v0, t).unwrap();
        let expected = Complex64::from_polar(1.0, -omega * t);
        assert!((v[0] - expected).norm() < 1e-14);
    }

    #[test]
    fn propagation_preserves_norm() {
        let mut rng = StdRng::seed_from_u64(9);
        let n = 12;
        let mut m = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = rng.gen_range(-1.0..1.0);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        let prop = UnitaryPropagator::new(&m).unwrap();
        let v0 = DVector::from_fn(n, |i, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * (i as f64 + 1.0)
        });
        let v0 = v0.scale(1.0 / v0.norm());
        for &t in &[0.3, 2.9, 41.0] {
            assert!((prop.apply(&v0, t).norm() - 1.0).abs() < 1e-12);
        }
    }
}
