//! Closed-form spectrum of the network Hamiltonian.
//!
//! In the single-excitation basis the eigenpairs split into four families:
//!
//! - one antisymmetric source-drain mode at `omega`,
//! - `kappa - 1` zero-sum modes on the resonant bus sites at `omega`,
//! - `N - kappa - 1` zero-sum modes on the detuned sites at `omega + delta`,
//! - up to three symmetric modes ("cubic trio") whose shifts `x = Omega - omega`
//!   are roots of
//!
//!   `x^3 - delta x^2 - 2 N lambda^2 x + 2 kappa delta lambda^2 = 0`,
//!
//!   solved trigonometrically through `Phi = delta^2 + 6 N lambda^2`,
//!   `eta = delta [delta^2 + 9(N - 3 kappa) lambda^2]` and the angle
//!   `theta = atan2(sqrt(Phi^3 - eta^2), eta) / 3`, then polished by Newton
//!   iteration. The shifted roots are reported as `R_j = 3 x_j` with
//!   `R_0 = delta + 2 sqrt(Phi) cos(theta)` and
//!   `R_pm = delta - sqrt(Phi)(cos(theta) +- sqrt(3) sin(theta))`.
//!
//! When a trio root coincides with `omega` or `omega + delta` the printed
//! component formula divides by zero. If the symmetric subspace still has room
//! (three basis directions), the missing eigenvector is completed through the
//! orthogonal complement; otherwise the root is an artifact of clearing
//! denominators in the characteristic equation and carries no eigenvector, so
//! the trio degenerates to two columns (this happens exactly for `kappa = 0`
//! and `kappa = N`, where the symmetric subspace is two-dimensional).

use nalgebra::{DMatrix, DVector};

use crate::network::NetworkConfig;

/// Collision tolerance on the shifted roots: `|R| < 1e-12 lambda` counts as a
/// collision with `omega` (double-precision noise floor scaled to the
/// problem), likewise `|R - 3 delta|` for `omega + delta`.
pub const ROOT_COLLISION_SCALE: f64 = 1e-12;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Parameters of the cubic trio and of the transfer amplitude
/// `Lambda(t) = A_0 e^{-i R_0 t/3} + A_+ e^{-i R_+ t/3} + A_- e^{-i R_- t/3}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicSpectralParams {
    pub big_phi: f64,
    pub eta: f64,
    pub theta: f64,
    pub r0: f64,
    pub r_plus: f64,
    pub r_minus: f64,
    pub a0: f64,
    pub a_plus: f64,
    pub a_minus: f64,
}

impl CubicSpectralParams {
    pub fn roots(&self) -> [f64; 3] {
        [self.r0, self.r_plus, self.r_minus]
    }

    pub fn amplitudes(&self) -> [f64; 3] {
        [self.a0, self.a_plus, self.a_minus]
    }

    /// Trio eigenvalues `omega + R_j / 3`, ascending.
    pub fn trio_eigenvalues(&self, omega: f64) -> [f64; 3] {
        let mut v = [
            omega + self.r_plus / 3.0,
            omega + self.r_minus / 3.0,
            omega + self.r0 / 3.0,
        ];
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Eigenvalue family labels in the order the spectrum lists them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenFamily {
    Antisymmetric,
    ResonantDegenerate,
    DetunedDegenerate,
    CubicTrio,
}

impl EigenFamily {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Antisymmetric => "antisymmetric",
            Self::ResonantDegenerate => "resonant-degenerate",
            Self::DetunedDegenerate => "detuned-degenerate",
            Self::CubicTrio => "cubic-trio",
        }
    }
}

/// All `N + 2` eigenpairs with family labels; eigenvector `l` is column `l`
/// of [`Spectrum::vectors`].
#[derive(Debug, Clone)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    families: Vec<EigenFamily>,
    vectors: DMatrix<f64>,
    trio_normalizations: Vec<f64>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn families(&self) -> &[EigenFamily] {
        &self.families
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// Normalization constants of the trio columns (their source components).
    pub fn trio_normalizations(&self) -> &[f64] {
        &self.trio_normalizations
    }

    pub fn family_count(&self, family: EigenFamily) -> usize {
        self.families.iter().filter(|&&f| f == family).count()
    }

    pub fn sorted_eigenvalues(&self) -> Vec<f64> {
        let mut v = self.eigenvalues.clone();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Cubic-trio parameters of the transfer dynamics.
pub fn cubic_params(config: &NetworkConfig) -> CubicSpectralParams {
    let lambda = config.lambda();
    let n = config.bus_count() as f64;
    let kappa = config.kappa() as f64;
    let delta = config.effective_delta();

    let big_phi = delta * delta + 6.0 * n * lambda * lambda;
    let eta = delta * (delta * delta + 9.0 * (n - 3.0 * kappa) * lambda * lambda);
    let disc = (big_phi.powi(3) - eta * eta).max(0.0);
    let theta = disc.sqrt().atan2(eta) / 3.0;

    let sqrt_phi = big_phi.sqrt();
    let (sin_t, cos_t) = theta.sin_cos();
    let seed0 = (delta + 2.0 * sqrt_phi * cos_t) / 3.0;
    let seed_plus = (delta - sqrt_phi * (cos_t + SQRT_3 * sin_t)) / 3.0;
    let seed_minus = (delta - sqrt_phi * (cos_t - SQRT_3 * sin_t)) / 3.0;

    let polish = |x: f64| polish_root(x, delta, lambda, n, kappa, sqrt_phi);
    let x0 = polish(seed0);
    let x_plus = polish(seed_plus);
    let x_minus = polish(seed_minus);

    let eps = ROOT_COLLISION_SCALE * lambda;
    let amp = |x: f64| trio_amplitude(x, delta, lambda, config, eps);

    CubicSpectralParams {
        big_phi,
        eta,
        theta,
        r0: 3.0 * x0,
        r_plus: 3.0 * x_plus,
        r_minus: 3.0 * x_minus,
        a0: amp(x0),
        a_plus: amp(x_plus),
        a_minus: amp(x_minus),
    }
}

fn polish_root(mut x: f64, delta: f64, lambda: f64, n: f64, kappa: f64, scale: f64) -> f64 {
    let two_n_l2 = 2.0 * n * lambda * lambda;
    let c0 = 2.0 * kappa * delta * lambda * lambda;
    for _ in 0..8 {
        let f = ((x - delta) * x - two_n_l2) * x + c0;
        let df = (3.0 * x - 2.0 * delta) * x - two_n_l2;
        if df == 0.0 {
            break;
        }
        let step = f / df;
        x -= step;
        if step.abs() <= 1e-16 * (x.abs() + scale) {
            break;
        }
    }
    x
}

fn trio_amplitude(x: f64, delta: f64, lambda: f64, config: &NetworkConfig, eps: f64) -> f64 {
    let r = 3.0 * x;
    if r.abs() < eps {
        return 0.0;
    }
    let n_det = config.detuned_count();
    if n_det > 0 && (r - 3.0 * delta).abs() < eps {
        return 0.0;
    }
    let mut denom = 1.0;
    if config.kappa() > 0 {
        let c = lambda / x;
        denom += 2.0 * config.kappa() as f64 * c * c;
    }
    if n_det > 0 {
        let c = lambda / (x - delta);
        denom += 2.0 * n_det as f64 * c * c;
    }
    1.0 / denom
}

/// All eigenpairs of the network Hamiltonian in closed form.
pub fn analytic_spectrum(config: &NetworkConfig) -> Spectrum {
    let dim = config.dim();
    let kappa = config.kappa();
    let n_det = config.detuned_count();
    let omega = config.omega();
    let omega_tilde = config.omega_tilde();
    let delta = config.effective_delta();
    let lambda = config.lambda();
    let drain = config.drain_index();

    let mut eigenvalues = Vec::with_capacity(dim);
    let mut families = Vec::with_capacity(dim);
    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(dim);

    // Antisymmetric source-drain mode.
    let mut v = DVector::zeros(dim);
    v[0] = std::f64::consts::FRAC_1_SQRT_2;
    v[drain] = -std::f64::consts::FRAC_1_SQRT_2;
    eigenvalues.push(omega);
    families.push(EigenFamily::Antisymmetric);
    columns.push(v);

    // Zero-sum telescoping bases inside each bus block.
    for jp in 1..kappa {
        columns.push(zero_sum_vector(dim, 1, jp));
        eigenvalues.push(omega);
        families.push(EigenFamily::ResonantDegenerate);
    }
    for jp in 1..n_det {
        columns.push(zero_sum_vector(dim, kappa + 1, jp));
        eigenvalues.push(omega_tilde);
        families.push(EigenFamily::DetunedDegenerate);
    }

    // Cubic trio.
    let params = cubic_params(config);
    let eps = ROOT_COLLISION_SCALE * lambda;
    let mut roots = [params.r_plus / 3.0, params.r_minus / 3.0, params.r0 / 3.0];
    roots.sort_by(f64::total_cmp);
    let collided = |x: f64| x.abs() * 3.0 < eps || (n_det > 0 && (x - delta).abs() * 3.0 < eps);

    let mut trio_normalizations = Vec::with_capacity(3);
    let mut formula_columns: Vec<(f64, DVector<f64>, f64)> = Vec::new();
    let mut collided_root: Option<f64> = None;
    for &x in &roots {
        if collided(x) {
            // At most one root can sit on omega or omega+delta: the other two
            // are +-sqrt(2N) lambda away.
            assert!(collided_root.is_none(), "more than one trio root collided");
            collided_root = Some(x);
        } else {
            let (col, norm) = trio_column(config, x, delta);
            formula_columns.push((x, col, norm));
        }
    }

    let subspace_dim = 1 + usize::from(kappa > 0) + usize::from(n_det > 0);
    if subspace_dim == 2 {
        // kappa = 0 or kappa = N: the third cubic root is an artifact of
        // clearing denominators and must have been flagged as a collision.
        assert!(
            collided_root.is_some() && formula_columns.len() == 2,
            "two-dimensional symmetric subspace must shed exactly one root"
        );
    }

    if let (Some(x), 3) = (collided_root, subspace_dim) {
        // Orthogonal completion inside the symmetric subspace spanned by the
        // source+drain, resonant-block and detuned-block directions.
        let coords: Vec<[f64; 3]> = formula_columns
            .iter()
            .map(|(_, col, _)| symmetric_coordinates(config, col))
            .collect();
        let completed = cross3(coords[0], coords[1]);
        let col = from_symmetric_coordinates(config, completed);
        let norm = col[0];
        // Insert keeping ascending trio order.
        let at = formula_columns
            .iter()
            .take_while(|(xr, _, _)| *xr < x)
            .count();
        formula_columns.insert(at, (x, col, norm));
    }

    for (x, col, norm) in formula_columns {
        eigenvalues.push(omega + x);
        families.push(EigenFamily::CubicTrio);
        trio_normalizations.push(norm);
        columns.push(col);
    }

    assert_eq!(columns.len(), dim, "family sizes must add up to N + 2");
    let mut vectors = DMatrix::zeros(dim, dim);
    for (l, col) in columns.into_iter().enumerate() {
        vectors.set_column(l, &col);
    }
    Spectrum {
        eigenvalues,
        families,
        vectors,
        trio_normalizations,
    }
}

/// Zero-sum vector number `jp` of the block starting at `start`: constant on
/// the first `jp` sites, `-jp` on the next, zero elsewhere.
fn zero_sum_vector(dim: usize, start: usize, jp: usize) -> DVector<f64> {
    let norm = 1.0 / ((jp * (jp + 1)) as f64).sqrt();
    let mut v = DVector::zeros(dim);
    for site in start..start + jp {
        v[site] = norm;
    }
    v[start + jp] = -(jp as f64) * norm;
    v
}

/// Component formula for a regular trio root.
fn trio_column(config: &NetworkConfig, x: f64, delta: f64) -> (DVector<f64>, f64) {
    let dim = config.dim();
    let lambda = config.lambda();
    let kappa = config.kappa();
    let n_det = config.detuned_count();

    let c_res = if kappa > 0 { 2.0 * lambda / x } else { 0.0 };
    let c_det = if n_det > 0 {
        2.0 * lambda / (x - delta)
    } else {
        0.0
    };
    let norm = (2.0 + kappa as f64 * c_res * c_res + n_det as f64 * c_det * c_det)
        .sqrt()
        .recip();

    let mut v = DVector::zeros(dim);
    v[0] = norm;
    v[dim - 1] = norm;
    for site in 1..=kappa {
        v[site] = c_res * norm;
    }
    for site in kappa + 1..=config.bus_count() {
        v[site] = c_det * norm;
    }
    (v, norm)
}

/// Coordinates of a symmetric-subspace vector in the orthonormal basis
/// {(e_s+e_d)/sqrt(2), sum_res/sqrt(kappa), sum_det/sqrt(N-kappa)}.
fn symmetric_coordinates(config: &NetworkConfig, col: &DVector<f64>) -> [f64; 3] {
    let kappa = config.kappa();
    let n_det = config.detuned_count();
    let a = (col[0] + col[config.drain_index()]) * std::f64::consts::FRAC_1_SQRT_2;
    let b = if kappa > 0 {
        (1..=kappa).map(|s| col[s]).sum::<f64>() / (kappa as f64).sqrt()
    } else {
        0.0
    };
    let c = if n_det > 0 {
        (kappa + 1..=config.bus_count())
            .map(|s| col[s])
            .sum::<f64>()
            / (n_det as f64).sqrt()
    } else {
        0.0
    };
    [a, b, c]
}

fn from_symmetric_coordinates(config: &NetworkConfig, coords: [f64; 3]) -> DVector<f64> {
    let dim = config.dim();
    let kappa = config.kappa();
    let n_det = config.detuned_count();
    let mut v = DVector::zeros(dim);
    v[0] = coords[0] * std::f64::consts::FRAC_1_SQRT_2;
    v[dim - 1] = coords[0] * std::f64::consts::FRAC_1_SQRT_2;
    if kappa > 0 {
        let c = coords[1] / (kappa as f64).sqrt();
        for site in 1..=kappa {
            v[site] = c;
        }
    }
    if n_det > 0 {
        let c = coords[2] / (n_det as f64).sqrt();
        for site in kappa + 1..=config.bus_count() {
            v[site] = c;
        }
    }
    v
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    let raw = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let norm = (raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2]).sqrt();
    [raw[0] / norm, raw[1] / norm, raw[2] / norm]
}
