//! Simulation and design toolkit for a coupled-oscillator quantum transistor.
//!
//! The device is a source oscillator and a drain oscillator coupled through a
//! data bus of `N` non-interacting oscillators, `kappa` of which are resonant
//! with the end oscillators while the remaining `N - kappa` are detuned by
//! `delta`. Everything here lives in the vacuum + single-excitation sector:
//!
//! - [`network`]: configuration and the (N+2)x(N+2) single-excitation
//!   Hamiltonian.
//! - [`spectral`]: closed-form eigenvalues/eigenvectors, including the cubic
//!   trio of symmetric modes.
//! - [`dynamics`]: exact and approximate transfer amplitudes, survival
//!   probabilities, closed-system evolution.
//! - [`design`]: exact-rational planning of simultaneous transfer (odd-ratio
//!   condition) and phase-shift gates.
//! - [`dispersive`]: the atom-field mechanism that implements the detuning.
//! - [`open_system`]: thermal Lindblad analytics (gate fidelity, Theta/J
//!   matrices, density-operator series, parameter maps, optimal bus sizing).
//! - [`oracle`]: independent brute-force references (dense eigensolver,
//!   matrix-exponential propagation, Lindblad integration, state-average
//!   quadrature) used to validate every closed form.
//!
//! All frequencies are angular (rad/s). Helpers that accept Hz convert by 2*pi.

pub mod design;
pub mod dispersive;
pub mod dynamics;
pub mod fock;
pub mod network;
pub mod open_system;
pub mod oracle;
pub mod spectral;

pub use dynamics::QubitState;
pub use network::{HermitianMatrix, NetworkConfig};
pub use open_system::ReservoirParams;
pub use spectral::{CubicSpectralParams, Spectrum};
