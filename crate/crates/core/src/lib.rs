//! Collective-spin simulation of a chain of qubit ensembles that distributes
//! macroscopic entanglement between its end nodes.
//!
//! Each ensemble of `N` qubits lives in its symmetric (Dicke) subspace of
//! dimension `N + 1`. Neighbouring ensembles interact through an alternating
//! `n_a n_a` coupling, the intermediate ensembles are measured in the `S_x`
//! eigenbasis, and the remaining two-ensemble state is characterised by its
//! entanglement.
//!
//! * [`dicke`]: log-space combinatorics, coherent amplitudes, x-basis overlaps
//!   and truncation windows.
//! * [`chain`]: exact product-space evolution and the windowed transfer-matrix
//!   construction of the end-to-end amplitudes.
//! * [`entanglement`]: Schmidt entropy, reduced states, logarithmic negativity.
//! * [`dephasing`]: collective `S_z` dephasing via the exact element-wise
//!   propagator, with an RK4 reference integrator.

pub mod chain;
pub mod dephasing;
pub mod dicke;
pub mod entanglement;
mod error;

pub use error::{Error, Result};

/// Interaction times at which the ideal protocol's end-to-end entanglement is
/// robust: pi/3, pi/2, 2pi/3, pi.
pub const MAGIC_TIMES: [f64; 4] = [
    std::f64::consts::FRAC_PI_3,
    std::f64::consts::FRAC_PI_2,
    2.0 * std::f64::consts::FRAC_PI_3,
    std::f64::consts::PI,
];
