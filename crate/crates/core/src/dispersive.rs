//! Dispersive atom-field interaction that implements the bus detuning.
//!
//! A two-level atom coupled dispersively to a field mode,
//! `H = w0 a'a + nu sz + chi a'a s3` with `chi = g^2 / delta_af` and
//! `delta_af = w0 - nu`, shifts the field frequency to `w0 - chi` while the
//! atom stays in |e> (s3 acts as -1 there and sz as +1). The joint state of
//! `(a|0> + b|1>) (x) |e>` therefore stays a product for all times, which is
//! what lets the atom be discarded after setting the detuning. The dispersive
//! form is trustworthy only while `g^2 n << delta_af^2 + gamma^2`.

use num_complex::Complex64;
use thiserror::Error;

use crate::dynamics::QubitState;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DispersiveError {
    #[error("dispersive regime undefined: atom and field are resonant (delta_af = 0)")]
    ResonantAtom,
    #[error("dispersive parameters must be finite")]
    NonFinite,
}

/// Parameters of one atom-field pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersiveConfig {
    /// Field frequency (rad/s).
    pub omega0: f64,
    /// Atom frequency (rad/s).
    pub nu: f64,
    /// Atom-field coupling (rad/s).
    pub g: f64,
    /// Spontaneous emission rate (1/s), used only by the validity check.
    pub gamma_spont: f64,
    /// Mean photon number assumed by the validity check.
    pub nbar_field: f64,
}

impl DispersiveConfig {
    pub fn delta_af(&self) -> f64 {
        self.omega0 - self.nu
    }

    /// Dispersive shift `chi = g^2 / delta_af`.
    pub fn chi(&self) -> Result<f64, DispersiveError> {
        if ![
            self.omega0,
            self.nu,
            self.g,
            self.gamma_spont,
            self.nbar_field,
        ]
        .iter()
        .all(|v| v.is_finite())
        {
            return Err(DispersiveError::NonFinite);
        }
        let delta = self.delta_af();
        if delta == 0.0 {
            return Err(DispersiveError::ResonantAtom);
        }
        Ok(self.g * self.g / delta)
    }

    /// `g^2 nbar < delta_af^2 + gamma^2`, the stated domain of the dispersive
    /// Hamiltonian.
    pub fn is_valid_regime(&self) -> bool {
        self.g * self.g * self.nbar_field
            < self.delta_af() * self.delta_af() + self.gamma_spont * self.gamma_spont
    }
}

/// Effective field frequency `omega0 - chi`; the detuning delivered to a bus
/// oscillator is `-chi` relative to `omega0`.
pub fn effective_frequency(cfg: &DispersiveConfig) -> Result<f64, DispersiveError> {
    Ok(cfg.omega0 - cfg.chi()?)
}

/// Joint atom-field state on the basis {|e,0>, |e,1>, |g,0>, |g,1>}; the |g>
/// components stay zero for the initial states considered here.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersiveOutcome {
    pub joint: [Complex64; 4],
    /// Purity of the reduced field state; 1 means the atom factorizes.
    pub field_purity: f64,
    /// Deviation of the |1> field amplitude phase from `-(omega0 - chi) t`.
    pub phase_error: f64,
    /// False when the dispersive approximation is outside its stated domain;
    /// the result is then attached a warning rather than refused.
    pub regime_valid: bool,
}

/// Evolve `(a|0> + b|1>) (x) |e>` under the dispersive Hamiltonian using the
/// commuting field/atom decomposition.
pub fn simulate_dispersive(
    cfg: &DispersiveConfig,
    field: &QubitState,
    t: f64,
) -> Result<DispersiveOutcome, DispersiveError> {
    let chi = cfg.chi()?;
    let shifted = cfg.omega0 - chi;
    // |e,n>: field phase n (w0 - chi), atom phase nu (sz eigenvalue +1).
    let atom_phase = Complex64::from_polar(1.0, -cfg.nu * t);
    let e0 = field.a0() * atom_phase;
    let e1 = field.a1() * Complex64::from_polar(1.0, -shifted * t) * atom_phase;
    let joint = [e0, e1, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];

    // Reduced field state rho_f = Tr_atom |psi><psi|.
    let rho00 = e0.norm_sqr() + joint[2].norm_sqr();
    let rho11 = e1.norm_sqr() + joint[3].norm_sqr();
    let rho01 = e0 * e1.conj() + joint[2] * joint[3].conj();
    let field_purity = rho00 * rho00 + rho11 * rho11 + 2.0 * rho01.norm_sqr();

    let phase_error = if field.a1().norm() > 0.0 {
        let expected = field.a1().arg() - shifted * t;
        wrap_angle((e1 * atom_phase.conj()).arg() - expected).abs()
    } else {
        0.0
    };

    Ok(DispersiveOutcome {
        joint,
        field_purity,
        phase_error,
        regime_valid: cfg.is_valid_regime(),
    })
}

fn wrap_angle(x: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    let mut y = x % tau;
    if y > std::f64::consts::PI {
        y -= tau;
    } else if y < -std::f64::consts::PI {
        y += tau;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::UnitaryPropagator;
    use nalgebra::{DMatrix, DVector};

    fn config() -> DispersiveConfig {
        DispersiveConfig {
            omega0: 10.0,
            nu: 3.0,
            g: 0.1,
            gamma_spont: 0.01,
            nbar_field: 0.5,
        }
    }

    #[test]
    fn effective_frequency_examples() {
        let mut cfg = config();
        cfg.g = 0.0;
        assert_eq!(effective_frequency(&cfg).unwrap(), 10.0);

        let cfg = DispersiveConfig {
            omega0: 10.0,
            nu: 0.0,
            g: 0.1,
            gamma_spont: 0.0,
            nbar_field: 0.0,
        };
        assert!((effective_frequency(&cfg).unwrap() - 9.999).abs() < 1e-12);

        // Negative detuning raises the frequency.
        let cfg = DispersiveConfig {
            omega0: 10.0,
            nu: 12.0,
            g: 0.1,
            gamma_spont: 0.0,
            nbar_field: 0.0,
        };
        assert!(effective_frequency(&cfg).unwrap() > 10.0);

        let cfg = DispersiveConfig {
            omega0: 10.0,
            nu: 10.0,
            g: 0.1,
            gamma_spont: 0.0,
            nbar_field: 0.0,
        };
        assert_eq!(
            effective_frequency(&cfg),
            Err(DispersiveError::ResonantAtom)
        );
    }

    #[test]
    fn field_stays_pure() {
        let cfg = config();
        for &(alpha, theta, t) in &[(0.3, 0.0, 0.7), (0.9, 1.2, 13.0), (0.0, 0.4, 50.0)] {
            let field = QubitState::from_polar(alpha, theta);
            let out = simulate_dispersive(&cfg, &field, t).unwrap();
            assert!(
                (out.field_purity - 1.0).abs() < 1e-12,
                "purity {}",
                out.field_purity
            );
        }
    }

    #[test]
    fn phase_matches_four_dimensional_oracle() {
        // Joint evolution on atom (x) {|0>, |1>} with the diagonal dispersive
        // Hamiltonian: basis {|e,0>, |e,1>, |g,0>, |g,1>}, sz = diag(1, -1)
        // on the atom, s3|e> = -|e>, s3|g> = 0.
        let cfg = config();
        let chi = cfg.chi().unwrap();
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![
            cfg.nu,
            cfg.omega0 - chi + cfg.nu,
            -cfg.nu,
            cfg.omega0 - cfg.nu,
        ]));
        let prop = UnitaryPropagator::new(&h).unwrap();
        let field = QubitState::from_polar(0.6, 0.5);
        for &t in &[0.3, 4.0, 47.0] {
            let out = simulate_dispersive(&cfg, &field, t).unwrap();
            let v0 = DVector::from_vec(vec![
                field.a0(),
                field.a1(),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
            ]);
            let v = prop.apply(&v0, t);
            for (got, want) in out.joint.iter().zip(v.iter()) {
                assert!((got - want).norm() < 1e-12, "t = {t}");
            }
            assert!(out.phase_error <= 1e-10);
        }
    }

    #[test]
    fn validity_warning_triggers_exactly_at_the_boundary() {
        let mut cfg = config();
        cfg.nbar_field = (cfg.delta_af().powi(2) + cfg.gamma_spont.powi(2)) / (cfg.g * cfg.g);
        let field = QubitState::from_polar(0.5, 0.0);
        let out = simulate_dispersive(&cfg, &field, 1.0).unwrap();
        assert!(!out.regime_valid);

        cfg.nbar_field *= 1.0 - 1e-12;
        let out = simulate_dispersive(&cfg, &field, 1.0).unwrap();
        assert!(out.regime_valid);
    }
}
