//! Integer planning of transfer windows and phase-shift gates.
//!
//! Full state transfer needs `omega t` to be an odd multiple of pi while
//! `lambda sqrt(2 kappa) t` is an odd multiple of pi simultaneously, which is
//! solvable exactly when `lambda sqrt(2 kappa) / omega` reduces to a ratio of
//! two odd integers `C1/C2`. Choosing `kappa = 2 m^2` makes the square root
//! rational, and picking `m` to cancel the powers of two in `lambda/omega`
//! makes both sides odd; the earliest window is then
//! `tau = C2 pi / omega = C1 pi / (lambda sqrt(2 kappa))`. If the reduced
//! denominator of `lambda/omega` is odd the parity can never match (an even
//! number would have to equal an odd one) and planning fails. All of this is
//! carried out in exact rational arithmetic; floating point cannot certify an
//! odd/odd reduction.
//!
//! Relaxing the first condition while keeping the exchange turns the device
//! into a phase gate: with `omega / (lambda sqrt(2 kappa)) = ell - phi/pi`
//! for odd `ell`, the drain qubit at `t_ex = pi / (lambda sqrt(2 kappa))`
//! picks up exactly the phase `phi`.

use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::dynamics::QubitState;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error("not a rational number: {0}")]
    RequiresRational(String),
    #[error("omega and lambda must be positive rationals")]
    NonPositive,
    #[error("the kappa multiplier must be a positive odd integer (got {0})")]
    EvenMultiplier(u64),
    #[error(
        "no odd-ratio solution (reduced denominator is odd): \
         lambda sqrt(2 kappa)/omega cannot become a ratio of two odd numbers"
    )]
    NoOddRatioSolution,
    #[error("phi must lie in (-pi, pi] (got {0})")]
    InvalidPhase(f64),
    #[error("gate parameters must be positive")]
    InvalidGateParameters,
    #[error("no integral kappa for any odd ell <= {searched}; closest candidates: {closest:?}")]
    NoGateSolution {
        searched: u64,
        closest: Vec<GateCandidate>,
    },
}

/// Near-miss from the kappa scan, reported when no exact solution exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateCandidate {
    pub ell: u64,
    pub kappa_real: f64,
}

/// Exact solution of the simultaneous-transfer condition.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferPlan {
    /// `kappa = 2 m^2`.
    pub m: BigUint,
    pub kappa: BigUint,
    /// Odd coprime pair with `lambda sqrt(2 kappa) / omega = C1 / C2`.
    pub c1: BigUint,
    pub c2: BigUint,
    /// Minimal integers with `tau = (2j+1) pi / omega = (2j'+1) pi / (lambda sqrt(2 kappa))`.
    pub j: BigUint,
    pub j_prime: BigUint,
    /// Exact `tau / pi` in the units of the inputs.
    pub tau_over_pi: BigRational,
    /// Transfer time in seconds (for rad/s inputs).
    pub tau_trans: f64,
}

impl TransferPlan {
    /// Both clauses of the transfer condition, checked in exact arithmetic.
    pub fn verify(&self, omega: &BigRational, lambda: &BigRational) -> bool {
        let two = BigUint::from(2u32);
        let lhs = &self.c1 * (&two * &self.j + BigUint::one());
        let rhs = &self.c2 * (&two * &self.j_prime + BigUint::one());
        if lhs != rhs {
            return false;
        }
        // lambda * 2m / omega == c1 / c2
        let ratio = lambda / omega * BigRational::from_integer(BigInt::from(&two * &self.m));
        ratio == BigRational::new(BigInt::from(self.c1.clone()), BigInt::from(self.c2.clone()))
    }

    pub fn kappa_usize(&self) -> Option<usize> {
        self.kappa.to_usize()
    }
}

/// Parse a decimal, scientific or `p/q` literal into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational, DesignError> {
    let s = text.trim();
    let fail = || DesignError::RequiresRational(text.to_string());
    if s.is_empty() {
        return Err(fail());
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num.trim().parse().map_err(|_| fail())?;
        let d: BigInt = den.trim().parse().map_err(|_| fail())?;
        if d.is_zero() {
            return Err(fail());
        }
        return Ok(BigRational::new(n, d));
    }
    let (mantissa, exponent) = match s.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i64>().map_err(|_| fail())?),
        None => (s, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(fail());
    }
    let digits = format!("{int_part}{frac_part}");
    if digits == "-" || digits == "+" {
        return Err(fail());
    }
    let numer: BigInt = digits.parse().map_err(|_| fail())?;
    let ten = BigInt::from(10u32);
    let shift = exponent - frac_part.len() as i64;
    Ok(if shift >= 0 {
        BigRational::from_integer(numer * ten.pow(shift as u32))
    } else {
        BigRational::new(numer, ten.pow((-shift) as u32))
    })
}

/// Solve the odd-ratio transfer condition for `kappa = 2 m^2` and the minimal
/// window `(j, j')`. The odd multiplier `u` scales `m`; larger `u` means a
/// bigger bus and a shorter exchange time.
pub fn plan_transfer(
    omega: &BigRational,
    lambda: &BigRational,
    u: u64,
) -> Result<TransferPlan, DesignError> {
    if !omega.is_positive() || !lambda.is_positive() {
        return Err(DesignError::NonPositive);
    }
    if u == 0 || u % 2 == 0 {
        return Err(DesignError::EvenMultiplier(u));
    }

    let ratio = lambda / omega; // p/q in lowest terms, both positive
    let p = ratio.numer().magnitude().clone();
    let q = ratio.denom().magnitude().clone();
    let a = q.trailing_zeros().expect("q > 0");
    if a == 0 {
        // 2 m p stays even while q is odd after reduction: parity obstruction.
        return Err(DesignError::NoOddRatioSolution);
    }

    let m = (BigUint::one() << (a - 1)) * BigUint::from(u);
    let kappa = BigUint::from(2u32) * &m * &m;

    let odd_ratio = BigRational::new(BigInt::from(BigUint::from(2u32) * &m * &p), BigInt::from(q));
    let c1 = odd_ratio.numer().magnitude().clone();
    let c2 = odd_ratio.denom().magnitude().clone();
    debug_assert!(&c1 % 2u32 == BigUint::one() && &c2 % 2u32 == BigUint::one());

    let j = (&c2 - BigUint::one()) / BigUint::from(2u32);
    let j_prime = (&c1 - BigUint::one()) / BigUint::from(2u32);

    let tau_over_pi = BigRational::from_integer(BigInt::from(c2.clone())) / omega;
    let tau_trans = tau_over_pi
        .to_f64()
        .map(|v| v * std::f64::consts::PI)
        .unwrap_or(f64::NAN);

    let plan = TransferPlan {
        m,
        kappa,
        c1,
        c2,
        j,
        j_prime,
        tau_over_pi,
        tau_trans,
    };
    debug_assert!(plan.verify(omega, lambda));
    Ok(plan)
}

/// Which parameter [`design_gate`] solved for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolvedParameter {
    Omega,
    Kappa,
}

/// The two supported fixings: solve omega from (lambda, kappa) or kappa from
/// (omega, lambda).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateFixing {
    LambdaKappa { lambda: f64, kappa: usize },
    OmegaLambda { omega: f64, lambda: f64 },
}

/// Solution of the phase-gate condition `omega/(lambda sqrt(2 kappa)) = ell - phi/pi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatePlan {
    pub phi: f64,
    pub ell: u64,
    pub omega: f64,
    pub lambda: f64,
    pub kappa: usize,
    /// Exchange time `pi / (lambda sqrt(2 kappa))`.
    pub t_ex: f64,
    pub solved: SolvedParameter,
}

impl GatePlan {
    /// Relative residual of the gate condition.
    pub fn residual(&self) -> f64 {
        let lhs = self.omega / (self.lambda * (2.0 * self.kappa as f64).sqrt());
        let rhs = self.ell as f64 - self.phi / std::f64::consts::PI;
        ((lhs - rhs) / rhs).abs()
    }
}

const DEFAULT_ELL_SEARCH_MAX: u64 = 99;
const KAPPA_INTEGER_TOL: f64 = 1e-9;

/// Solve the gate condition for the free parameter.
///
/// Solving for omega picks the smallest odd `ell` with `omega > 0`. Solving
/// for kappa scans odd `ell <= ell_search_max` for an integral
/// `kappa = omega^2 / (2 lambda^2 (ell - phi/pi)^2)` and returns the solution
/// with the smallest bus.
pub fn design_gate(
    phi: f64,
    fixing: GateFixing,
    ell_search_max: Option<u64>,
) -> Result<GatePlan, DesignError> {
    if !phi.is_finite() || phi <= -std::f64::consts::PI || phi > std::f64::consts::PI {
        return Err(DesignError::InvalidPhase(phi));
    }
    let phi_over_pi = phi / std::f64::consts::PI;
    match fixing {
        GateFixing::LambdaKappa { lambda, kappa } => {
            if lambda <= 0.0 || kappa == 0 {
                return Err(DesignError::InvalidGateParameters);
            }
            let mut ell = 1u64;
            while ell as f64 - phi_over_pi <= 0.0 {
                ell += 2;
            }
            let scale = lambda * (2.0 * kappa as f64).sqrt();
            let omega = scale * (ell as f64 - phi_over_pi);
            Ok(GatePlan {
                phi,
                ell,
                omega,
                lambda,
                kappa,
                t_ex: std::f64::consts::PI / scale,
                solved: SolvedParameter::Omega,
            })
        }
        GateFixing::OmegaLambda { omega, lambda } => {
            if omega <= 0.0 || lambda <= 0.0 {
                return Err(DesignError::InvalidGateParameters);
            }
            let searched = ell_search_max.unwrap_or(DEFAULT_ELL_SEARCH_MAX);
            let mut best: Option<GatePlan> = None;
            let mut candidates: Vec<GateCandidate> = Vec::new();
            let mut ell = 1u64;
            while ell <= searched {
                let denom = ell as f64 - phi_over_pi;
                if denom > 0.0 {
                    let kappa_real = (omega / (lambda * denom)).powi(2) / 2.0;
                    if kappa_real < 1.0 - KAPPA_INTEGER_TOL {
                        break; // kappa only shrinks as ell grows
                    }
                    let rounded = kappa_real.round();
                    if (kappa_real - rounded).abs() <= KAPPA_INTEGER_TOL && rounded >= 1.0 {
                        let kappa = rounded as usize;
                        let plan = GatePlan {
                            phi,
                            ell,
                            omega,
                            lambda,
                            kappa,
                            t_ex: std::f64::consts::PI / (lambda * (2.0 * kappa as f64).sqrt()),
                            solved: SolvedParameter::Kappa,
                        };
                        if best.as_ref().is_none_or(|b| kappa < b.kappa) {
                            best = Some(plan);
                        }
                    } else {
                        candidates.push(GateCandidate { ell, kappa_real });
                    }
                }
                ell += 2;
            }
            best.ok_or_else(|| {
                candidates.sort_by(|a, b| {
                    let fa = (a.kappa_real - a.kappa_real.round()).abs();
                    let fb = (b.kappa_real - b.kappa_real.round()).abs();
                    fa.total_cmp(&fb)
                });
                candidates.truncate(3);
                DesignError::NoGateSolution {
                    searched,
                    closest: candidates,
                }
            })
        }
    }
}

/// Ideal drain state after the gate: the phase `phi` lands on |1> because
/// `omega t_ex = ell pi - phi` with odd `ell`, so `-e^{-i omega t_ex} = e^{i phi}`.
pub fn predict_gate_output(plan: &GatePlan, psi: &QubitState) -> QubitState {
    QubitState::new(psi.a0(), psi.a1() * Complex64::from_polar(1.0, plan.phi))
}
