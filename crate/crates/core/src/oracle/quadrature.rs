//! Gauss-Legendre quadrature and averages of state functionals over input
//! qubit ensembles.

use crate::dynamics::QubitState;

/// Input-state ensembles for fidelity averages. `AlphaUniform` draws the
/// |0> amplitude alpha uniformly from [0, 1]; `Haar` draws the state from the
/// Bloch-sphere uniform measure, under which alpha^2 is uniform on [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateMeasure {
    AlphaUniform,
    Haar,
}

impl StateMeasure {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "alpha-uniform" => Some(Self::AlphaUniform),
            "haar" => Some(Self::Haar),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::AlphaUniform => "alpha-uniform",
            Self::Haar => "haar",
        }
    }
}

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Newton iteration on P_n from the Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Map [-1, 1] -> [0, 1]; the symmetric partner comes along for free.
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 0.5 * w;
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Quadrature mean of `f` over the given input-state measure. The relative
/// phase is integrated out (uniform on [0, 2 pi)) only when `phase_dependent`
/// is set; fidelity functionals of this crate do not depend on it.
pub fn average_over_states<F>(
    f: F,
    measure: StateMeasure,
    nodes: usize,
    phase_dependent: bool,
) -> f64
where
    F: Fn(&QubitState) -> f64,
{
    assert!(nodes >= 8, "use at least 8 quadrature nodes");
    let (xs, ws) = gauss_legendre_unit(nodes);
    let thetas: Vec<f64> = if phase_dependent {
        let m = 64;
        (0..m)
            .map(|k| 2.0 * std::f64::consts::PI * k as f64 / m as f64)
            .collect()
    } else {
        vec![0.0]
    };

    let mut acc = 0.0;
    for (&x, &w) in xs.iter().zip(&ws) {
        let alpha = match measure {
            StateMeasure::AlphaUniform => x,
            StateMeasure::Haar => x.sqrt(),
        };
        let mut inner = 0.0;
        for &theta in &thetas {
            inner += f(&QubitState::from_polar(alpha, theta));
        }
        acc += w * inner / thetas.len() as f64;
    }
    acc
}
