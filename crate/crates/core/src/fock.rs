//! Truncated product Fock space shared by the density-operator series and the
//! brute-force Lindblad integrator.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

/// Hard cap on the truncated Hilbert-space dimension.
pub const DIMENSION_GUARD: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FockError {
    #[error("truncated Fock dimension {dim} exceeds the guard {DIMENSION_GUARD}")]
    DimensionGuard { dim: usize },
    #[error("truncated Fock space needs at least one mode")]
    NoModes,
}

/// `modes` bosonic modes, each truncated at occupation `n_max`; flat indices
/// enumerate occupation multi-indices with mode 0 most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedFockSpace {
    modes: usize,
    n_max: usize,
    dim: usize,
    strides: Vec<usize>,
}

impl TruncatedFockSpace {
    pub fn new(modes: usize, n_max: usize) -> Result<Self, FockError> {
        if modes == 0 {
            return Err(FockError::NoModes);
        }
        let levels = n_max + 1;
        let mut dim: usize = 1;
        for _ in 0..modes {
            dim = dim
                .checked_mul(levels)
                .filter(|&d| d <= DIMENSION_GUARD)
                .ok_or(FockError::DimensionGuard { dim: usize::MAX })?;
        }
        let mut strides = vec![0usize; modes];
        let mut s = 1;
        for mode in (0..modes).rev() {
            strides[mode] = s;
            s *= levels;
        }
        Ok(Self {
            modes,
            n_max,
            dim,
            strides,
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Occupation of `mode` in the basis state `flat`.
    pub fn occupation(&self, flat: usize, mode: usize) -> usize {
        flat / self.strides[mode] % (self.n_max + 1)
    }

    /// Flat index stride of one quantum in `mode`.
    pub fn stride(&self, mode: usize) -> usize {
        self.strides[mode]
    }

    pub fn index_of(&self, occupations: &[usize]) -> usize {
        debug_assert_eq!(occupations.len(), self.modes);
        occupations
            .iter()
            .zip(&self.strides)
            .map(|(&n, &s)| {
                debug_assert!(n <= self.n_max);
                n * s
            })
            .sum()
    }

    pub fn multi_of(&self, flat: usize) -> Vec<usize> {
        (0..self.modes).map(|m| self.occupation(flat, m)).collect()
    }

    /// Basis state with a single quantum in `mode`.
    pub fn single_excitation(&self, mode: usize) -> usize {
        self.strides[mode]
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DensityMatrixError {
    #[error("density matrix dimension {got} does not match the space dimension {want}")]
    DimensionMismatch { got: usize, want: usize },
}

/// Density operator on a [`TruncatedFockSpace`].
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    space: TruncatedFockSpace,
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(
        space: TruncatedFockSpace,
        matrix: DMatrix<Complex64>,
    ) -> Result<Self, DensityMatrixError> {
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return Err(DensityMatrixError::DimensionMismatch {
                got: matrix.nrows(),
                want: space.dim(),
            });
        }
        Ok(Self { space, matrix })
    }

    /// Pure-state projector |psi><psi|.
    pub fn from_pure(space: TruncatedFockSpace, psi: &DVector<Complex64>) -> Self {
        assert_eq!(psi.len(), space.dim());
        let matrix = psi * psi.adjoint();
        Self { space, matrix }
    }

    pub fn space(&self) -> &TruncatedFockSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn matrix_mut(&mut self) -> &mut DMatrix<Complex64> {
        &mut self.matrix
    }

    pub fn trace(&self) -> f64 {
        (0..self.matrix.nrows())
            .map(|i| self.matrix[(i, i)].re)
            .sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.matrix.nrows() {
            for j in 0..=i {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part; negative values beyond
    /// tolerance mean the state is unphysical.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.matrix + self.matrix.adjoint()).scale(0.5);
        let eig = herm.symmetric_eigen();
        eig.eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Trace distance (1/2)*||rho - sigma||_1.
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let diff = &self.matrix - &other.matrix;
        let herm = (&diff + diff.adjoint()).scale(0.5);
        let eig = herm.symmetric_eigen();
        0.5 * eig.eigenvalues.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// `<psi|rho|psi>` for a pure target state.
    pub fn expectation(&self, psi: &DVector<Complex64>) -> f64 {
        let v = &self.matrix * psi;
        psi.dotc(&v).re
    }

    /// Total population sitting at the truncation level of `mode`; the cutoff
    /// is adequate when this is negligible.
    pub fn top_level_population(&self, mode: usize) -> f64 {
        (0..self.space.dim())
            .filter(|&i| self.space.occupation(i, mode) == self.space.n_max())
            .map(|i| self.matrix[(i, i)].re)
            .sum()
    }
}
