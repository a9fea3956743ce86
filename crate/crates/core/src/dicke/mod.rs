//! Symmetric-subspace algebra for a single ensemble of `N` qubits.
//!
//! The Dicke state `|k>` holds `k` excitations in mode `a`, has `S_z`
//! eigenvalue `2k - N` and corresponds to `|J = N/2, m = k - N/2>`. Anything
//! that scales like `sqrt(C(N, k))` is evaluated in log space, so the
//! helpers here stay finite up to `N = 10^6` and beyond.

mod amplitude;
mod overlap;
mod window;

pub use amplitude::{max_log_magnitude, LogAmplitude};
pub(crate) use overlap::equatorial_kernel;
pub use overlap::{
    coherent_x_overlap, x_overlap, x_overlap_matrix, x_overlap_row, x_overlap_row_explicit,
    x_overlap_row_recursive, EXPLICIT_OVERLAP_MAX_N,
};
pub use window::TruncationWindow;

use num_complex::Complex64;
use std::f64::consts::{FRAC_1_SQRT_2, LN_2, PI};

use crate::{Error, Result};

/// Dicke basis of one ensemble: indices `0..=N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DickeBasis {
    atoms: usize,
}

impl DickeBasis {
    pub fn new(atoms: usize) -> Self {
        DickeBasis { atoms }
    }

    pub fn atoms(&self) -> usize {
        self.atoms
    }

    pub fn dimension(&self) -> usize {
        self.atoms + 1
    }

    /// `S_z` eigenvalue `2k - N` of `|k>`.
    pub fn sz_eigenvalue(&self, k: usize) -> i64 {
        2 * k as i64 - self.atoms as i64
    }

    /// Angular-momentum labels `(J, m)` of `|k>`.
    pub fn angular_momentum(&self, k: usize) -> (f64, f64) {
        let j = self.atoms as f64 / 2.0;
        (j, k as f64 - j)
    }
}

/// Natural log of the binomial coefficient `C(n, k)`.
///
/// Small `min(k, n-k)` is summed term by term; otherwise the Stirling series
/// is applied to the whole ratio so that the large `n ln n` pieces cancel
/// analytically instead of numerically. Both branches are accurate to a few
/// ulps relative. The result depends only on `min(k, n - k)`, so
/// `log_binomial(n, k) == log_binomial(n, n - k)` holds bit for bit.
pub fn log_binomial(n: usize, k: usize) -> Result<f64> {
    if k > n {
        return Err(Error::domain(format!("log_binomial: k = {k} exceeds n = {n}")));
    }
    Ok(log_binomial_unchecked(n, k))
}

pub(crate) fn log_binomial_unchecked(n: usize, k: usize) -> f64 {
    const DIRECT_SUM_MAX: usize = 20;
    let j = k.min(n - k);
    if j == 0 {
        return 0.0;
    }
    if j <= DIRECT_SUM_MAX {
        let base = (n - j) as f64;
        return (1..=j).map(|i| ((base + i as f64) / i as f64).ln()).sum();
    }
    let nf = n as f64;
    let jf = j as f64;
    let rest = (n - j) as f64;
    let bulk = jf * (nf / jf).ln() - rest * (-(jf / nf)).ln_1p();
    let prefactor = 0.5 * (nf / (2.0 * PI * jf * rest)).ln();
    bulk + prefactor + stirling_tail(nf) - stirling_tail(jf) - stirling_tail(rest)
}

fn stirling_tail(n: f64) -> f64 {
    let inv = 1.0 / n;
    let inv2 = inv * inv;
    inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

/// Log of the x-polarised Dicke weight `sqrt(C(N, k) / 2^N)`.
pub(crate) fn log_x_polarized_weight(n: usize, k: usize) -> f64 {
    0.5 * (log_binomial_unchecked(n, k) - n as f64 * LN_2)
}

/// Single-qubit amplitudes `(alpha, beta)` of a spin coherent state
/// `(alpha |0> + beta |1>)^{(x) N}`; `alpha` multiplies the mode-`a` count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoherentParams {
    alpha: Complex64,
    beta: Complex64,
}

impl CoherentParams {
    pub fn new(alpha: Complex64, beta: Complex64) -> Result<Self> {
        let norm = alpha.norm_sqr() + beta.norm_sqr();
        if !((norm - 1.0).abs() <= 1e-12) {
            return Err(Error::domain(format!(
                "coherent parameters must satisfy |alpha|^2 + |beta|^2 = 1, got {norm}"
            )));
        }
        Ok(CoherentParams { alpha, beta })
    }

    /// The `+x` polarised state, `alpha = beta = 1/sqrt(2)`.
    pub fn x_polarized() -> Self {
        Self::equatorial(0.0)
    }

    /// Equatorial state `(e^{i chi}/sqrt(2), 1/sqrt(2))`.
    pub fn equatorial(chi: f64) -> Self {
        CoherentParams {
            alpha: Complex64::from_polar(FRAC_1_SQRT_2, chi),
            beta: Complex64::new(FRAC_1_SQRT_2, 0.0),
        }
    }

    pub fn alpha(&self) -> Complex64 {
        self.alpha
    }

    pub fn beta(&self) -> Complex64 {
        self.beta
    }
}

/// Dicke amplitudes `alpha^k beta^(N-k) sqrt(C(N, k))` over `window`, in log form.
pub fn coherent_dicke_log_amplitudes(
    n: usize,
    params: CoherentParams,
    window: &TruncationWindow,
) -> Result<Vec<LogAmplitude>> {
    window.check_atoms(n)?;
    let a = LogAmplitude::from_complex(params.alpha);
    let b = LogAmplitude::from_complex(params.beta);
    Ok(window
        .indices()
        .map(|k| {
            a.powi(k as u64) * b.powi((n - k) as u64)
                * LogAmplitude::from_log_polar(0.5 * log_binomial_unchecked(n, k), 0.0)
        })
        .collect())
}

/// Linear-scale version of [`coherent_dicke_log_amplitudes`]. Every amplitude
/// has modulus at most one, so the conversion cannot overflow; entries far in
/// the binomial tails underflow to zero.
pub fn coherent_dicke_amplitudes(
    n: usize,
    params: CoherentParams,
    window: &TruncationWindow,
) -> Result<Vec<Complex64>> {
    Ok(coherent_dicke_log_amplitudes(n, params, window)?
        .into_iter()
        .map(LogAmplitude::to_complex)
        .collect())
}
