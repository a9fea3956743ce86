//! Overlaps `<q|^(x) |k>` between x-basis and z-basis Dicke states.
//!
//! With `a' = (a + b)/sqrt(2)` and `b' = (a - b)/sqrt(2)` one has
//! `n_a' - n_b' = S_x`, so `|q>^(x)` is the state with `q` quanta in `a'`.
//! This fixes the phase convention: every overlap is real and
//! `S_x |q>^(x) = (2q - N) |q>^(x)`.

use nalgebra::DMatrix;
use std::f64::consts::{FRAC_PI_2, LN_2, PI, TAU};

use super::amplitude::max_log_magnitude;
use super::{log_binomial_unchecked, LogAmplitude};
use crate::{Error, Result};

/// Largest `N` for which the explicit alternating double sum is used.
pub const EXPLICIT_OVERLAP_MAX_N: usize = 60;

fn check_index(name: &str, value: usize, n: usize) -> Result<()> {
    if value > n {
        return Err(Error::domain(format!("{name} = {value} outside 0..={n}")));
    }
    Ok(())
}

/// Row of Pascal's triangle up to `n`, exact in `u64` for `n <= 62`.
fn pascal(n: usize) -> Vec<Vec<u64>> {
    let mut rows: Vec<Vec<u64>> = vec![vec![1]];
    for m in 1..=n {
        let prev = &rows[m - 1];
        let mut row = vec![1u64; m + 1];
        for j in 1..m {
            row[j] = prev[j - 1] + prev[j];
        }
        rows.push(row);
    }
    rows
}

fn explicit_entry(q: usize, k: usize, n: usize, binom: &[Vec<u64>]) -> LogAmplitude {
    let lo = k.saturating_sub(n - q);
    let hi = q.min(k);
    // sum_l C(q,l) C(N-q,m) (-1)^(N-q-m), m = k - l; |sum| <= C(N,k) fits easily
    let sum: i128 = (lo..=hi)
        .map(|l| {
            let m = k - l;
            let term = (binom[q][l] as u128 * binom[n - q][m] as u128) as i128;
            if (n - q - m) % 2 == 0 {
                term
            } else {
                -term
            }
        })
        .sum();
    if sum == 0 {
        return LogAmplitude::Zero;
    }
    let prefactor =
        0.5 * (log_binomial_unchecked(n, q) - log_binomial_unchecked(n, k) - n as f64 * LN_2);
    LogAmplitude::from_log_polar(
        (sum.unsigned_abs() as f64).ln() + prefactor,
        if sum < 0 { PI } else { 0.0 },
    )
}

/// `<q|^(x)|k>` for all `k`, by the explicit double sum over `a'`, `b'`
/// expansions. The integer part is evaluated exactly, so the only rounding is
/// in the final prefactor. Limited to `N <= EXPLICIT_OVERLAP_MAX_N`.
pub fn x_overlap_row_explicit(q: usize, n: usize) -> Result<Vec<LogAmplitude>> {
    check_index("q", q, n)?;
    if n > EXPLICIT_OVERLAP_MAX_N {
        return Err(Error::domain(format!(
            "explicit overlap sum supports N <= {EXPLICIT_OVERLAP_MAX_N}, got {n}"
        )));
    }
    let binom = pascal(n);
    Ok((0..=n).map(|k| explicit_entry(q, k, n, &binom)).collect())
}

/// Value stored as `mantissa * exp(log_scale)`.
#[derive(Clone, Copy)]
struct Scaled {
    mantissa: f64,
    log_scale: f64,
}

impl Scaled {
    fn to_log(self) -> LogAmplitude {
        if self.mantissa == 0.0 {
            LogAmplitude::Zero
        } else {
            LogAmplitude::from_log_polar(
                self.mantissa.abs().ln() + self.log_scale,
                if self.mantissa < 0.0 { PI } else { 0.0 },
            )
        }
    }
}

const RESCALE: f64 = 1e150;

/// Runs the `S_x` eigen-recursion from one edge of the basis inward.
///
/// `step(k)` yields the three coefficients for producing the next entry from
/// the current and previous ones. Entries grow away from the edge (the
/// eigenvector is exponentially small in the classically forbidden tails), so
/// this direction is the stable one.
fn three_term_sweep(len: usize, mut step: impl FnMut(usize, f64, f64) -> f64) -> Vec<Scaled> {
    let mut out = Vec::with_capacity(len);
    let (mut prev, mut cur, mut log_scale) = (0.0f64, 1.0f64, 0.0f64);
    out.push(Scaled { mantissa: cur, log_scale });
    for i in 1..len {
        let next = step(i, cur, prev);
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            prev /= RESCALE;
            cur /= RESCALE;
            log_scale += RESCALE.ln();
        }
        out.push(Scaled { mantissa: cur, log_scale });
    }
    out
}

/// `<q|^(x)|k>` for all `k`, from the tridiagonal eigen-equation
/// `sqrt(k(N-k+1)) c_{k-1} + sqrt((k+1)(N-k)) c_{k+1} = (2q-N) c_k`.
///
/// Two sweeps (up from `k = 0` and down from `k = N`) meet at `N/2`, which
/// always lies in the oscillatory region; the unknown relative scale is fixed
/// by least squares on the two overlapping entries and the absolute scale and
/// sign by the closed form `c_0 = (-1)^(N-q) sqrt(C(N,q)/2^N)`. Cost `O(N)`,
/// no overflow for any `N`.
pub fn x_overlap_row_recursive(q: usize, n: usize) -> Result<Vec<LogAmplitude>> {
    check_index("q", q, n)?;
    if n == 0 {
        return Ok(vec![LogAmplitude::ONE]);
    }
    let lambda = 2.0 * q as f64 - n as f64;
    let nf = n as f64;
    // couples k and k+1
    let coupling = |k: usize| ((k as f64 + 1.0) * (nf - k as f64)).sqrt();
    let mid = n / 2;

    // forward: index i holds c_i, for i = 0..=mid+1
    let forward = three_term_sweep(mid + 2, |i, cur, prev| {
        let k = i - 1;
        let back = if k > 0 { coupling(k - 1) * prev } else { 0.0 };
        (lambda * cur - back) / coupling(k)
    });
    // backward: index i holds c_{N-i}, for i = 0..=N-mid
    let backward = three_term_sweep(n - mid + 1, |i, cur, prev| {
        let k = n - (i - 1);
        let ahead = if k < n { coupling(k) * prev } else { 0.0 };
        (lambda * cur - ahead) / coupling(k - 1)
    });

    let f = [forward[mid].to_log(), forward[mid + 1].to_log()];
    let g = [backward[n - mid].to_log(), backward[n - mid - 1].to_log()];
    let lf = max_log_magnitude(&f).expect("consecutive entries of a nonzero solution cannot both vanish");
    let lg = max_log_magnitude(&g).expect("consecutive entries of a nonzero solution cannot both vanish");
    let (f0, f1) = (f[0].scaled_real(lf), f[1].scaled_real(lf));
    let (g0, g1) = (g[0].scaled_real(lg), g[1].scaled_real(lg));
    let ratio = LogAmplitude::from_real((f0 * g0 + f1 * g1) / (g0 * g0 + g1 * g1))
        * LogAmplitude::from_log_polar(lf - lg, 0.0);

    let left_scale = LogAmplitude::from_log_polar(
        0.5 * (log_binomial_unchecked(n, q) - nf * LN_2),
        if (n - q) % 2 == 1 { PI } else { 0.0 },
    );
    let right_scale = left_scale * ratio;

    let mut row = Vec::with_capacity(n + 1);
    row.extend(forward[..=mid].iter().map(|s| left_scale * s.to_log()));
    row.extend((mid + 1..=n).map(|k| right_scale * backward[n - k].to_log()));
    Ok(row)
}

/// `<q|^(x)|k>` for all `k`: explicit sum up to `EXPLICIT_OVERLAP_MAX_N`,
/// recursion beyond.
pub fn x_overlap_row(q: usize, n: usize) -> Result<Vec<LogAmplitude>> {
    if n <= EXPLICIT_OVERLAP_MAX_N {
        x_overlap_row_explicit(q, n)
    } else {
        x_overlap_row_recursive(q, n)
    }
}

/// Single overlap `<q|^(x)|k>` (real in this convention).
pub fn x_overlap(q: usize, k: usize, n: usize) -> Result<f64> {
    check_index("q", q, n)?;
    check_index("k", k, n)?;
    if n <= EXPLICIT_OVERLAP_MAX_N {
        let binom = pascal(n);
        Ok(explicit_entry(q, k, n, &binom).scaled_real(0.0))
    } else {
        Ok(x_overlap_row_recursive(q, n)?[k].scaled_real(0.0))
    }
}

/// Orthogonal change of basis `U[(q, k)] = <q|^(x)|k>`.
pub fn x_overlap_matrix(n: usize) -> Result<DMatrix<f64>> {
    let mut u = DMatrix::zeros(n + 1, n + 1);
    for q in 0..=n {
        for (k, v) in x_overlap_row(q, n)?.into_iter().enumerate() {
            u[(q, k)] = v.scaled_real(0.0);
        }
    }
    Ok(u)
}

fn ln_abs_cos(x: f64) -> f64 {
    let c = x.cos();
    if c.abs() < 0.7 {
        c.abs().ln()
    } else if c > 0.0 {
        (-2.0 * (x / 2.0).sin().powi(2)).ln_1p()
    } else {
        (-2.0 * (x / 2.0).cos().powi(2)).ln_1p()
    }
}

fn ln_abs_sin(x: f64) -> f64 {
    let (s, c) = x.sin_cos();
    if s.abs() < 0.7 {
        s.abs().ln()
    } else {
        0.5 * (-c * c).ln_1p()
    }
}

/// Real part of the equatorial overlap with its separable phases removed:
/// `sqrt(C(N,q)) cos^q(alpha/2) sin^(N-q)(alpha/2)`, as a log amplitude with
/// phase `0` or `pi`.
pub(crate) fn equatorial_kernel(q: usize, n: usize, alpha: f64) -> LogAmplitude {
    let half = alpha / 2.0;
    let (s, c) = half.sin_cos();
    let p = n - q;
    if (q > 0 && c == 0.0) || (p > 0 && s == 0.0) {
        return LogAmplitude::Zero;
    }
    let mut log_mag = 0.5 * log_binomial_unchecked(n, q);
    if q > 0 {
        log_mag += q as f64 * ln_abs_cos(half);
    }
    if p > 0 {
        log_mag += p as f64 * ln_abs_sin(half);
    }
    let negative = (c < 0.0 && q % 2 == 1) != (s < 0.0 && p % 2 == 1);
    LogAmplitude::from_log_polar(log_mag, if negative { PI } else { 0.0 })
}

/// `<q|^(x) | e^{i alpha}/sqrt(2), 1/sqrt(2)>>`
/// `= i^(N-q) e^{i N alpha/2} sqrt(C(N,q)) cos^q(alpha/2) sin^(N-q)(alpha/2)`.
///
/// A vanishing `cos` or `sin` raised to a positive power yields the exact
/// zero variant.
pub fn coherent_x_overlap(q: usize, n: usize, alpha: f64) -> Result<LogAmplitude> {
    check_index("q", q, n)?;
    let phase = ((n - q) % 4) as f64 * FRAC_PI_2 + (n as f64 * (alpha / 2.0)).rem_euclid(TAU);
    Ok(equatorial_kernel(q, n, alpha) * LogAmplitude::from_log_polar(0.0, phase))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicke::{coherent_dicke_amplitudes, CoherentParams, TruncationWindow};
    use num_complex::Complex64;

    fn orthogonality_defect(u: &DMatrix<f64>) -> f64 {
        let n = u.nrows();
        let g = u.transpose() * u;
        (g - DMatrix::<f64>::identity(n, n)).abs().max()
    }

    #[test]
    fn single_qubit_overlaps() {
        let u = x_overlap_matrix(1).unwrap();
        for v in u.iter() {
            assert!((v * v - 0.5).abs() < 1e-15);
        }
        // |1>^(x) = (|0> + |1>)/sqrt2 (+x), |0>^(x) = (|1> - |0>)/sqrt2
        assert!(u[(1, 0)] > 0.0 && u[(1, 1)] > 0.0);
        assert!(u[(0, 0)] < 0.0 && u[(0, 1)] > 0.0);
        assert!(orthogonality_defect(&u) < 1e-15);
    }

    #[test]
    fn rows_have_unit_norm() {
        for n in [2usize, 9, 33, 60, 61, 150] {
            for q in 0..=n {
                let norm: f64 = x_overlap_row(q, n)
                    .unwrap()
                    .iter()
                    .map(|v| v.scaled_real(0.0).powi(2))
                    .sum();
                assert!((norm - 1.0).abs() < 1e-12, "n={n} q={q} norm={norm}");
            }
        }
    }

    #[test]
    fn orthogonal_up_to_two_hundred() {
        for n in [1usize, 2, 5, 17, 40, 60, 61, 99, 128, 200] {
            let d = orthogonality_defect(&x_overlap_matrix(n).unwrap());
            assert!(d <= 1e-10, "n={n} defect={d}");
        }
    }

    #[test]
    fn recursion_matches_explicit_sum() {
        for n in [1usize, 2, 3, 10, 25, 40, 60] {
            for q in 0..=n {
                let a = x_overlap_row_explicit(q, n).unwrap();
                let b = x_overlap_row_recursive(q, n).unwrap();
                for k in 0..=n {
                    let (x, y) = (a[k].scaled_real(0.0), b[k].scaled_real(0.0));
                    assert!((x - y).abs() < 1e-10, "n={n} q={q} k={k}: {x} vs {y}");
                }
            }
        }
    }

    fn apply_sx(n: usize, c: &[f64]) -> Vec<f64> {
        // S_x = a^dag b + b^dag a in the z Dicke basis
        (0..=n)
            .map(|k| {
                let down = if k > 0 {
                    ((k * (n - k + 1)) as f64).sqrt() * c[k - 1]
                } else {
                    0.0
                };
                let up = if k < n {
                    (((k + 1) * (n - k)) as f64).sqrt() * c[k + 1]
                } else {
                    0.0
                };
                down + up
            })
            .collect()
    }

    #[test]
    fn rows_are_sx_eigenvectors() {
        for n in 1..=30usize {
            let u = x_overlap_matrix(n).unwrap();
            for q in 0..=n {
                let col: Vec<f64> = (0..=n).map(|k| u[(q, k)]).collect();
                let applied = apply_sx(n, &col);
                let lambda = 2.0 * q as f64 - n as f64;
                for k in 0..=n {
                    assert!((applied[k] - lambda * col[k]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn recursion_closed_form_edges_at_large_n() {
        // c_{q,N} = sqrt(C(N,q)/2^N) and c_{N,k} = sqrt(C(N,k)/2^N)
        let n = 1_000_000;
        let row = x_overlap_row_recursive(n / 2 + 7, n).unwrap();
        let want = 0.5 * (log_binomial_unchecked(n, n / 2 + 7) - n as f64 * LN_2);
        let got = row[n].log_magnitude().unwrap();
        assert!((got - want).abs() < 1e-6 * want.abs(), "{got} vs {want}");
        assert_eq!(row[n].phase(), 0.0);

        let top = x_overlap_row_recursive(n, n).unwrap();
        for k in [n / 2 - 1500, n / 2, n / 2 + 1499] {
            let want = 0.5 * (log_binomial_unchecked(n, k) - n as f64 * LN_2);
            assert!((top[k].log_magnitude().unwrap() - want).abs() < 1e-8);
        }
    }

    #[test]
    fn index_errors() {
        assert!(x_overlap(3, 0, 2).is_err());
        assert!(x_overlap(0, 3, 2).is_err());
        assert!(x_overlap_row_explicit(0, 61).is_err());
        assert!(coherent_x_overlap(5, 4, 0.0).is_err());
    }

    #[test]
    fn coherent_overlap_at_poles() {
        for n in [1usize, 4, 9, 100] {
            for q in 0..=n {
                let v = coherent_x_overlap(q, n, 0.0).unwrap();
                if q == n {
                    assert!((v.to_complex() - Complex64::new(1.0, 0.0)).norm() < 1e-14);
                } else {
                    assert!(v.is_zero());
                }
                let w = coherent_x_overlap(q, n, PI).unwrap().to_complex().norm();
                if q == 0 {
                    assert!((w - 1.0).abs() < 1e-14);
                } else {
                    assert!(w < 1e-15);
                }
            }
        }
    }

    #[test]
    fn coherent_overlap_equals_contraction() {
        let (n, alpha) = (20usize, 0.7);
        let amps = coherent_dicke_amplitudes(
            n,
            CoherentParams::equatorial(alpha),
            &TruncationWindow::full(n),
        )
        .unwrap();
        for q in [0usize, 5, 13, 20] {
            let row = x_overlap_row(q, n).unwrap();
            let contracted: Complex64 = row
                .iter()
                .zip(&amps)
                .map(|(c, a)| a * c.scaled_real(0.0))
                .sum();
            let closed = coherent_x_overlap(q, n, alpha).unwrap().to_complex();
            assert!((contracted - closed).norm() < 1e-10, "q={q}");
        }
    }

    #[test]
    fn coherent_overlap_large_n_is_normalised() {
        // sum_q |<q|coh>|^2 = 1 with C(N,q) cos^2q sin^2(N-q) a binomial law
        let n = 50_000;
        let total: f64 = (0..=n)
            .map(|q| coherent_x_overlap(q, n, 1.3).unwrap().to_complex().norm_sqr())
            .sum();
        assert!((total - 1.0).abs() < 1e-10);
    }
}
