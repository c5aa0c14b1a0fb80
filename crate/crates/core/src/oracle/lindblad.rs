//! Direct Runge-Kutta integration of the thermal master equation
//!
//!   drho/dt = -i[H, rho]
//!             + sum_k gamma(1+nbar) D[a_k](rho) + gamma nbar D[a'_k](rho)
//!
//! on a truncated product Fock space, with D[L](rho) = L rho L' - {L'L, rho}/2.
//! All operators are the truncated-space matrices, so the generator preserves
//! the trace exactly; the quadratic Hamiltonian `H = sum_jk Hjk a'_j a_k` and
//! the dissipators are applied through occupation-index bookkeeping instead of
//! dense operator products.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::OracleError;
use crate::fock::{DensityMatrix, TruncatedFockSpace};

/// Step-size policy for [`lindblad_integrate`]: start from
/// `min(1e-2/omega_max, 1e-2/(gamma(1+nbar)))` (or `initial_step`) and halve
/// until the final states of consecutive refinements are closer than
/// `trace_distance_tol` in trace distance.
#[derive(Debug, Clone)]
pub struct StepControl {
    pub initial_step: Option<f64>,
    pub trace_distance_tol: f64,
    pub max_refinements: u32,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            initial_step: None,
            trace_distance_tol: 1e-8,
            max_refinements: 12,
        }
    }
}

/// Precomputed index maps for one network-on-Fock-space Liouvillian.
pub struct LindbladOps {
    space: TruncatedFockSpace,
    gamma: f64,
    nbar: f64,
    /// Per mode: (I, I + stride, sqrt(n_k(I)+1)) for n_k(I) < n_max.
    lowering: Vec<Vec<(usize, usize, f64)>>,
    /// Per ordered pair j != k with Hjk != 0: (coeff, entries) with entries
    /// (target, source, amp) implementing a'_j a_k.
    hops: Vec<(f64, Vec<(usize, usize, f64)>)>,
    /// Number part of H per basis state.
    diag_h: Vec<f64>,
    /// Summed anticommutator rates per basis state.
    decay_w: Vec<f64>,
}

impl LindbladOps {
    pub fn new(
        space: &TruncatedFockSpace,
        mode_hamiltonian: &DMatrix<f64>,
        gamma: f64,
        nbar: f64,
    ) -> Result<Self, OracleError> {
        let modes = space.modes();
        if mode_hamiltonian.nrows() != modes || mode_hamiltonian.ncols() != modes {
            return Err(OracleError::DimensionMismatch {
                got: mode_hamiltonian.nrows(),
                want: modes,
            });
        }
        let dim = space.dim();
        let n_max = space.n_max();

        let mut lowering = Vec::with_capacity(modes);
        for k in 0..modes {
            let stride = space.stride(k);
            let mut entries = Vec::new();
            for i in 0..dim {
                let n = space.occupation(i, k);
                if n < n_max {
                    entries.push((i, i + stride, ((n + 1) as f64).sqrt()));
                }
            }
            lowering.push(entries);
        }

        let mut hops = Vec::new();
        for j in 0..modes {
            for k in 0..modes {
                if j == k || mode_hamiltonian[(j, k)] == 0.0 {
                    continue;
                }
                // a'_j a_k |src> = amp |src - e_k + e_j>
                let mut entries = Vec::new();
                for src in 0..dim {
                    let nk = space.occupation(src, k);
                    let nj = space.occupation(src, j);
                    if nk >= 1 && nj < n_max {
                        let target = src - space.stride(k) + space.stride(j);
                        entries.push((target, src, ((nk * (nj + 1)) as f64).sqrt()));
                    }
                }
                hops.push((mode_hamiltonian[(j, k)], entries));
            }
        }

        let gd = gamma * (1.0 + nbar);
        let gu = gamma * nbar;
        let mut diag_h = vec![0.0f64; dim];
        let mut decay_w = vec![0.0f64; dim];
        for i in 0..dim {
            for k in 0..modes {
                let n = space.occupation(i, k);
                diag_h[i] += mode_hamiltonian[(k, k)] * n as f64;
                // a a' on the truncated space is diag(n+1) with 0 at the top.
                let aad = if n == n_max { 0.0 } else { (n + 1) as f64 };
                decay_w[i] += gd * n as f64 + gu * aad;
            }
        }

        Ok(Self {
            space: space.clone(),
            gamma,
            nbar,
            lowering,
            hops,
            diag_h,
            decay_w,
        })
    }

    /// Largest coherent frequency scale, used for the default step size.
    fn omega_max(&self, mode_hamiltonian: &DMatrix<f64>) -> f64 {
        let n = mode_hamiltonian.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let row_sum: f64 = (0..n).map(|j| mode_hamiltonian[(i, j)].abs()).sum();
            worst = worst.max(row_sum);
        }
        worst
    }

    /// Evaluate drho/dt into `out`. Both matrices are dim x dim and
    /// column-major; columns are addressed as slices for the inner loops.
    fn rhs(&self, rho: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
        let dim = self.space.dim();
        let gd = self.gamma * (1.0 + self.nbar);
        let gu = self.gamma * self.nbar;
        let rho_s = rho.as_slice();
        let out_s = out.as_mut_slice();

        // Fused diagonal pass: number part of -i[H, rho] plus the
        // anticommutator halves of both dissipators.
        for j in 0..dim {
            let base = j * dim;
            let wj = self.decay_w[j];
            let hj = self.diag_h[j];
            for i in 0..dim {
                let c = Complex64::new(-0.5 * (self.decay_w[i] + wj), -(self.diag_h[i] - hj));
                out_s[base + i] = c * rho_s[base + i];
            }
        }

        // Hopping part of -i(H rho - rho H).
        for (coeff, entries) in &self.hops {
            let c_left = Complex64::new(0.0, -coeff);
            for j in 0..dim {
                let base = j * dim;
                for &(target, source, amp) in entries {
                    out_s[base + target] += c_left * amp * rho_s[base + source];
                }
            }
            let c_right = Complex64::new(0.0, *coeff);
            for &(target, source, amp) in entries {
                // (rho a'_j a_k)[., source] += amp * rho[., target]
                let tb = target * dim;
                let sb = source * dim;
                let c = c_right * amp;
                for i in 0..dim {
                    out_s[sb + i] += c * rho_s[tb + i];
                }
            }
        }

        // Sandwich terms a rho a' (emission) and a' rho a (absorption).
        if gd != 0.0 {
            for entries in &self.lowering {
                for &(jq, jp, wj) in entries {
                    let qb = jq * dim;
                    let pb = jp * dim;
                    for &(iq, ip, wi) in entries {
                        out_s[qb + iq] += gd * wi * wj * rho_s[pb + ip];
                    }
                }
            }
        }
        if gu != 0.0 {
            for entries in &self.lowering {
                for &(jq, jp, wj) in entries {
                    let qb = jq * dim;
                    let pb = jp * dim;
                    for &(iq, ip, wi) in entries {
                        out_s[pb + ip] += gu * wi * wj * rho_s[qb + iq];
                    }
                }
            }
        }
    }

    /// Classical RK4 with `steps` uniform steps over `[0, t]`.
    fn integrate_fixed(
        &self,
        rho0: &DMatrix<Complex64>,
        t: f64,
        steps: usize,
    ) -> Result<DMatrix<Complex64>, OracleError> {
        let dim = self.space.dim();
        let h = t / steps as f64;
        let mut rho = rho0.clone();
        let mut k1 = DMatrix::<Complex64>::zeros(dim, dim);
        let mut k2 = k1.clone();
        let mut k3 = k1.clone();
        let mut k4 = k1.clone();
        let mut stage = k1.clone();

        fn add_scaled(dst: &mut DMatrix<Complex64>, src: &DMatrix<Complex64>, factor: f64) {
            for (d, s) in dst.as_mut_slice().iter_mut().zip(src.as_slice()) {
                *d += factor * s;
            }
        }

        for step in 0..steps {
            self.rhs(&rho, &mut k1);
            stage.copy_from(&rho);
            add_scaled(&mut stage, &k1, 0.5 * h);
            self.rhs(&stage, &mut k2);
            stage.copy_from(&rho);
            add_scaled(&mut stage, &k2, 0.5 * h);
            self.rhs(&stage, &mut k3);
            stage.copy_from(&rho);
            add_scaled(&mut stage, &k3, h);
            self.rhs(&stage, &mut k4);

            add_scaled(&mut rho, &k1, h / 6.0);
            add_scaled(&mut rho, &k2, h / 3.0);
            add_scaled(&mut rho, &k3, h / 3.0);
            add_scaled(&mut rho, &k4, h / 6.0);

            let trace: f64 = (0..dim).map(|i| rho[(i, i)].re).sum();
            if !trace.is_finite() || (trace - 1.0).abs() > 1e-6 {
                return Err(OracleError::NumericalInstability {
                    t: (step + 1) as f64 * h,
                    h,
                    detail: format!("trace drifted to {trace}"),
                });
            }
        }
        Ok(rho)
    }
}

/// Integrate the thermal master equation from `rho0` to time `t` with
/// Richardson step-halving until two consecutive refinements agree.
pub fn lindblad_integrate(
    mode_hamiltonian: &DMatrix<f64>,
    gamma: f64,
    nbar: f64,
    rho0: &DensityMatrix,
    t: f64,
    control: &StepControl,
) -> Result<DensityMatrix, OracleError> {
    assert!(gamma >= 0.0 && nbar >= 0.0 && t >= 0.0);
    let space = rho0.space().clone();
    let ops = LindbladOps::new(&space, mode_hamiltonian, gamma, nbar)?;
    if t == 0.0 {
        return Ok(rho0.clone());
    }

    let h = control.initial_step.unwrap_or_else(|| {
        let coherent = 1e-2 / ops.omega_max(mode_hamiltonian).max(f64::MIN_POSITIVE);
        let dissipative = if gamma > 0.0 {
            1e-2 / (gamma * (1.0 + nbar))
        } else {
            f64::INFINITY
        };
        coherent.min(dissipative).min(t)
    });

    let mut steps = (t / h).ceil().max(1.0) as usize;
    let mut current = ops.integrate_fixed(rho0.matrix(), t, steps)?;
    let mut last_change = f64::INFINITY;
    for _refinement in 0..control.max_refinements {
        steps *= 2;
        let finer = ops.integrate_fixed(rho0.matrix(), t, steps)?;
        let a = DensityMatrix::new(space.clone(), current).expect("dims match");
        let b = DensityMatrix::new(space.clone(), finer.clone()).expect("dims match");
        last_change = a.trace_distance(&b);
        current = finer;
        if last_change < control.trace_distance_tol {
            let result = DensityMatrix::new(space, current).expect("dims match");
            let herm = result.hermiticity_error();
            let min_eig = result.min_eigenvalue();
            if herm > 1e-10 || min_eig < -1e-8 {
                return Err(OracleError::NumericalInstability {
                    t,
                    h: t / steps as f64,
                    detail: format!(
                        "final state invariants violated (hermiticity {herm:.3e}, \
                         min eigenvalue {min_eig:.3e})"
                    ),
                });
            }
            return Ok(result);
        }
    }
    Err(OracleError::NoConvergence {
        refinements: control.max_refinements,
        last_change,
    })
}
