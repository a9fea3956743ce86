//! Entanglement of the end-to-end state.
//!
//! Pure outcomes go through the singular values of `A` (never through the
//! `W^2 x W^2` density matrix). Mixed states from the dephasing pipeline use
//! the von Neumann entropy of the reduced state and the logarithmic
//! negativity `log2 || rho^{T_1} ||_1`. Entropies are in bits.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::chain::{BipartiteAmplitudes, KernelSymmetry, RealKernel};
use crate::{Error, Result};

/// Eigenvalues below this are treated as exact zeros in entropy sums.
pub const EIGENVALUE_ZERO_CUTOFF: f64 = 1e-15;
/// Most negative eigenvalue tolerated as numerical noise in a density matrix.
pub const NEGATIVE_EIGENVALUE_TOLERANCE: f64 = 1e-10;
/// Largest `|rho - rho^dag|` entry accepted by [`log_negativity`].
pub const HERMITICITY_TOLERANCE: f64 = 1e-8;

/// Summary of one end-to-end state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntanglementReport {
    /// Von Neumann entropy of the reduced state, bits.
    pub entropy: f64,
    /// `entropy / log2(N + 1)`.
    pub normalized_entropy: f64,
    /// Logarithmic negativity in bits, when computed.
    pub log_negativity: Option<f64>,
    /// Outcome probability `p_q`.
    pub probability: f64,
}

impl EntanglementReport {
    /// Report for a pure state with Schmidt weights `weights` (summing to 1).
    pub fn from_schmidt_weights(weights: &[f64], atoms: usize, probability: f64) -> Self {
        let entropy = shannon_bits(weights);
        EntanglementReport {
            entropy,
            normalized_entropy: entropy / max_entropy(atoms),
            log_negativity: Some(pure_log_negativity(weights)),
            probability,
        }
    }
}

/// `E_max = log2(N + 1)`.
pub fn max_entropy(atoms: usize) -> f64 {
    ((atoms + 1) as f64).log2()
}

/// `-sum p log2 p`, with `0 log 0 = 0`.
pub fn shannon_bits(weights: &[f64]) -> f64 {
    -weights
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

/// `2 log2 sum_i sqrt(lambda_i)`, the log-negativity of a pure state.
pub fn pure_log_negativity(weights: &[f64]) -> f64 {
    2.0 * weights.iter().map(|&p| p.max(0.0).sqrt()).sum::<f64>().log2()
}

fn normalize_weights(mut squares: Vec<f64>) -> Result<Vec<f64>> {
    let total: f64 = squares.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ImpossibleOutcome(0.0));
    }
    squares.iter_mut().for_each(|x| *x /= total);
    squares.sort_by(|a, b| b.total_cmp(a));
    Ok(squares)
}

/// Normalised Schmidt weights `lambda_i = s_i^2 / sum s_j^2`, descending.
pub fn schmidt_weights(amplitudes: &BipartiteAmplitudes) -> Result<Vec<f64>> {
    let a = amplitudes.normalized()?;
    normalize_weights(a.singular_values().iter().map(|s| s * s).collect())
}

/// Entropy, normalised entropy and pure-state negativity of a measured chain.
pub fn schmidt_entropy(amplitudes: &BipartiteAmplitudes) -> Result<EntanglementReport> {
    let p = amplitudes.probability();
    let weights = schmidt_weights(amplitudes).map_err(|_| Error::ImpossibleOutcome(p))?;
    Ok(EntanglementReport::from_schmidt_weights(&weights, amplitudes.atoms, p))
}

/// Eigenvalues of a symmetric matrix that commutes with the index reversal,
/// computed block by block in the even and odd sectors.
fn reflection_block_eigenvalues(b: &DMatrix<f64>) -> Vec<f64> {
    let w = b.nrows();
    let h = w / 2;
    let r = |j: usize| w - 1 - j;
    let odd_center = w % 2 == 1;
    let even_dim = h + usize::from(odd_center);
    let even = DMatrix::from_fn(even_dim, even_dim, |i, j| match (i == h, j == h) {
        (false, false) => b[(i, j)] + b[(i, r(j))],
        (false, true) => std::f64::consts::SQRT_2 * b[(i, h)],
        (true, false) => std::f64::consts::SQRT_2 * b[(h, j)],
        (true, true) => b[(h, h)],
    });
    let odd = DMatrix::from_fn(h, h, |i, j| b[(i, j)] - b[(i, r(j))]);
    let mut eig: Vec<f64> = even.symmetric_eigenvalues().iter().copied().collect();
    if h > 0 {
        eig.extend(odd.symmetric_eigenvalues().iter());
    }
    eig
}

/// Normalised Schmidt weights of a phase-stripped real kernel, using its
/// symmetry to pick the cheapest exact decomposition.
pub fn kernel_schmidt_weights(kernel: &RealKernel) -> Result<Vec<f64>> {
    let b = &kernel.matrix;
    let squares: Vec<f64> = match kernel.symmetry {
        KernelSymmetry::SymmetricReflection => {
            reflection_block_eigenvalues(b).into_iter().map(|e| e * e).collect()
        }
        KernelSymmetry::Symmetric => b.clone().symmetric_eigenvalues().iter().map(|e| e * e).collect(),
        KernelSymmetry::General => b.clone().singular_values().iter().map(|s| s * s).collect(),
    };
    normalize_weights(squares).map_err(|_| Error::ImpossibleOutcome(kernel.probability()))
}

pub fn kernel_report(kernel: &RealKernel) -> Result<EntanglementReport> {
    let weights = kernel_schmidt_weights(kernel)?;
    Ok(EntanglementReport::from_schmidt_weights(
        &weights,
        kernel.atoms,
        kernel.probability(),
    ))
}

/// Reduced state of node M, `rho_M(k, k') = sum_{k_1} A(k_1,k) A*(k_1,k') / p_q`.
pub fn reduced_density(amplitudes: &BipartiteAmplitudes) -> Result<DMatrix<Complex64>> {
    let a = amplitudes.normalized()?;
    Ok(a.transpose() * a.conjugate())
}

/// `-sum lambda log2 lambda` over the eigenvalues of a Hermitian `rho`.
///
/// Eigenvalues in `[-1e-10, 0)` are clamped to zero and the spectrum is
/// renormalised; anything more negative is a validity error.
pub fn von_neumann_from_density(rho: &DMatrix<Complex64>) -> Result<f64> {
    if !rho.is_square() {
        return Err(Error::numerical("density matrix must be square"));
    }
    let eig: DVector<f64> = rho.clone().symmetric_eigenvalues();
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -NEGATIVE_EIGENVALUE_TOLERANCE {
        return Err(Error::numerical(format!(
            "density matrix has eigenvalue {min:e} below -{NEGATIVE_EIGENVALUE_TOLERANCE:e}"
        )));
    }
    let clamped: Vec<f64> = eig.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if !(total > 0.0) {
        return Err(Error::numerical("density matrix has zero trace"));
    }
    Ok(-clamped
        .iter()
        .map(|&x| x / total)
        .filter(|&x| x >= EIGENVALUE_ZERO_CUTOFF)
        .map(|x| x * x.log2())
        .sum::<f64>())
}

/// Density matrix of two subsystems of dimensions `dims = (d_1, d_M)`,
/// row index `i_1 * d_M + i_M`.
#[derive(Clone, Debug)]
pub struct BipartiteDensity {
    pub matrix: DMatrix<Complex64>,
    pub dims: (usize, usize),
}

impl BipartiteDensity {
    pub fn new(matrix: DMatrix<Complex64>, dims: (usize, usize)) -> Result<Self> {
        let d = dims.0 * dims.1;
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::domain(format!(
                "density matrix {}x{} does not match dims {:?}",
                matrix.nrows(),
                matrix.ncols(),
                dims
            )));
        }
        Ok(BipartiteDensity { matrix, dims })
    }

    /// `|psi><psi|` for the normalised pure state with amplitude matrix `psi`.
    pub fn from_pure(psi: &DMatrix<Complex64>) -> Self {
        let dims = (psi.nrows(), psi.ncols());
        // row-major flatten: index i_1 * d_M + i_M
        let v = DVector::from_iterator(psi.len(), psi.transpose().iter().copied());
        BipartiteDensity {
            matrix: &v * v.adjoint(),
            dims,
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Partial transpose on the node-1 index.
    pub fn partial_transpose_first(&self) -> DMatrix<Complex64> {
        let (_, d2) = self.dims;
        DMatrix::from_fn(self.matrix.nrows(), self.matrix.ncols(), |r, c| {
            let (i, j) = (r / d2, r % d2);
            let (ip, jp) = (c / d2, c % d2);
            self.matrix[(ip * d2 + j, i * d2 + jp)]
        })
    }

    /// `Tr_1 rho`, the reduced state of node M.
    pub fn reduced_last(&self) -> DMatrix<Complex64> {
        let (d1, d2) = self.dims;
        DMatrix::from_fn(d2, d2, |j, jp| {
            (0..d1).map(|i| self.matrix[(i * d2 + j, i * d2 + jp)]).sum()
        })
    }
}

/// `log2 || rho^{T_1} ||_1` via the eigenvalues of the Hermitian partial transpose.
pub fn log_negativity(rho: &BipartiteDensity) -> Result<f64> {
    let defect = rho.hermiticity_defect();
    if defect > HERMITICITY_TOLERANCE {
        return Err(Error::numerical(format!(
            "density matrix is not Hermitian (defect {defect:e})"
        )));
    }
    let trace_norm: f64 = rho
        .partial_transpose_first()
        .symmetric_eigenvalues()
        .iter()
        .map(|x| x.abs())
        .sum();
    Ok(trace_norm.log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{closed_form_amplitudes, exact_evolve, project_intermediates, three_node_kernel, ChainConfig};
    use crate::dicke::TruncationWindow;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn wrap(matrix: DMatrix<Complex64>) -> BipartiteAmplitudes {
        let n = matrix.nrows() - 1;
        let w = TruncationWindow::full(n);
        BipartiteAmplitudes::new(n, w, w, matrix, 0.0).unwrap()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(rows, cols, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    #[test]
    fn product_state_has_no_entropy() {
        let u = DMatrix::from_fn(4, 1, |i, _| Complex64::new(i as f64 + 1.0, 0.5));
        let v = DMatrix::from_fn(1, 4, |_, j| Complex64::new(1.0, -(j as f64)));
        let r = schmidt_entropy(&wrap(&u * &v)).unwrap();
        assert!(r.entropy.abs() < 1e-12);
        assert!(r.log_negativity.unwrap().abs() < 1e-12);
    }

    #[test]
    fn maximally_entangled_identity() {
        let n = 6;
        let a = DMatrix::<Complex64>::identity(n + 1, n + 1).unscale(((n + 1) as f64).sqrt());
        let r = schmidt_entropy(&wrap(a)).unwrap();
        assert!((r.entropy - 7f64.log2()).abs() < 1e-12);
        assert!((r.normalized_entropy - 1.0).abs() < 1e-12);
        assert!((r.probability - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_amplitudes_are_an_impossible_outcome() {
        let a = wrap(DMatrix::zeros(3, 3));
        assert!(matches!(schmidt_entropy(&a), Err(Error::ImpossibleOutcome(_))));
        assert!(matches!(reduced_density(&a), Err(Error::ImpossibleOutcome(_))));
    }

    #[test]
    fn svd_entropy_matches_reduced_density_route() {
        let cfg = ChainConfig::new(3, 3).unwrap().with_time(FRAC_PI_2);
        let a = project_intermediates(&exact_evolve(&cfg).unwrap(), &[3], 0.0).unwrap();
        let via_svd = schmidt_entropy(&a).unwrap().entropy;
        let via_rho = von_neumann_from_density(&reduced_density(&a).unwrap()).unwrap();
        assert!((via_svd - via_rho).abs() < 1e-10);
        assert!(via_svd > 0.1);
    }

    #[test]
    fn reduced_density_matches_brute_force_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_matrix(&mut rng, 3, 3);
        let wrapped = wrap(a.clone());
        let rho = reduced_density(&wrapped).unwrap();
        // |Psi> = sum A(k1,k3)|k1>|k3>; sum_{k1} <k1|Psi><Psi|k1>
        let p: f64 = a.iter().map(|z| z.norm_sqr()).sum();
        for k in 0..3 {
            for kp in 0..3 {
                let mut acc = Complex64::new(0.0, 0.0);
                for k1 in 0..3 {
                    let ket = a[(k1, k)];
                    let bra = a[(k1, kp)].conj();
                    acc += ket * bra;
                }
                assert!((rho[(k, kp)] - acc / p).norm() < 1e-12);
            }
        }
        let eig: Vec<f64> = {
            let mut e: Vec<f64> = rho.clone().symmetric_eigenvalues().iter().copied().collect();
            e.sort_by(|a, b| b.total_cmp(a));
            e
        };
        let sw = schmidt_weights(&wrapped).unwrap();
        for (x, y) in eig.iter().zip(&sw) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn rank_one_reduced_state_is_projector() {
        let u = DMatrix::from_fn(3, 1, |i, _| Complex64::new(1.0 + i as f64, 0.0));
        let v = DMatrix::from_fn(1, 3, |_, j| Complex64::new(0.0, 1.0 + j as f64));
        let rho = reduced_density(&wrap(&u * &v)).unwrap();
        assert!((&rho * &rho - &rho).iter().all(|z| z.norm() < 1e-12));
        assert!((rho.trace() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn von_neumann_reference_values() {
        let eye = DMatrix::<Complex64>::identity(5, 5).unscale(5.0);
        assert!((von_neumann_from_density(&eye).unwrap() - 5f64.log2()).abs() < 1e-12);
        let mut pure = DMatrix::<Complex64>::zeros(3, 3);
        pure[(1, 1)] = Complex64::new(1.0, 0.0);
        assert!(von_neumann_from_density(&pure).unwrap().abs() < 1e-15);
        let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::new(0.5, 0.0),
            Complex64::new(0.25, 0.0),
            Complex64::new(0.25, 0.0),
        ]));
        assert!((von_neumann_from_density(&diag).unwrap() - 1.5).abs() < 1e-12);
        let bad = DMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::new(1.1, 0.0),
            Complex64::new(-0.1, 0.0),
        ]));
        assert!(matches!(von_neumann_from_density(&bad), Err(Error::Numerical(_))));
    }

    #[test]
    fn bell_state_negativity_is_one() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = DMatrix::from_row_slice(2, 2, &[
            Complex64::new(s, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(s, 0.0),
        ]);
        let rho = BipartiteDensity::from_pure(&psi);
        assert!((log_negativity(&rho).unwrap() - 1.0).abs() < 1e-12);
        let product = DMatrix::from_row_slice(2, 2, &[
            Complex64::new(0.5, 0.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(0.5, 0.0),
        ]);
        assert!(log_negativity(&BipartiteDensity::from_pure(&product)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn negativity_rejects_non_hermitian() {
        let mut m = DMatrix::<Complex64>::identity(4, 4).unscale(4.0);
        m[(0, 1)] = Complex64::new(0.1, 0.0);
        let rho = BipartiteDensity::new(m, (2, 2)).unwrap();
        assert!(matches!(log_negativity(&rho), Err(Error::Numerical(_))));
        assert!(BipartiteDensity::new(DMatrix::zeros(3, 3), (2, 2)).is_err());
    }

    #[test]
    fn pure_negativity_identity_on_chain_state() {
        let cfg = ChainConfig::new(3, 4).unwrap().with_time(1.1).with_phi(0.2);
        let a = closed_form_amplitudes(&cfg).unwrap();
        let rho = BipartiteDensity::from_pure(&a.normalized().unwrap());
        let report = schmidt_entropy(&a).unwrap();
        let n = log_negativity(&rho).unwrap();
        assert!((n - report.log_negativity.unwrap()).abs() < 1e-8);
        let via_reduced = von_neumann_from_density(&rho.reduced_last()).unwrap();
        assert!((via_reduced - report.entropy).abs() < 1e-10);
    }

    #[test]
    fn kernel_route_matches_svd_route() {
        for (n, c, phi, q) in [(40usize, 3.0, 0.0, 40usize), (41, 3.0, 0.0, 41), (30, 2.0, 0.15, 28), (16, f64::INFINITY, 0.0, 13)] {
            for t in [0.05, 0.8, 2.1] {
                let cfg = ChainConfig::new(3, n)
                    .unwrap()
                    .with_time(t)
                    .with_phi(phi)
                    .with_outcomes(vec![q])
                    .unwrap()
                    .with_window_constant(c)
                    .unwrap();
                let full = schmidt_entropy(&closed_form_amplitudes(&cfg).unwrap()).unwrap();
                let fast = kernel_report(&three_node_kernel(&cfg).unwrap()).unwrap();
                assert!((full.entropy - fast.entropy).abs() < 1e-10, "n={n} t={t}");
                assert!((full.probability - fast.probability).abs() < 1e-12);
                assert!(
                    (full.log_negativity.unwrap() - fast.log_negativity.unwrap()).abs() < 1e-9
                );
            }
        }
    }

    #[test]
    fn entropy_respects_upper_bound() {
        for n in [3usize, 10, 25] {
            for t in [0.2, 0.9, 1.7, 3.0] {
                let cfg = ChainConfig::new(3, n).unwrap().with_time(t);
                let r = kernel_report(&three_node_kernel(&cfg).unwrap()).unwrap();
                assert!(r.entropy >= 0.0 && r.entropy <= max_entropy(n) + 1e-9);
                assert!(r.normalized_entropy <= 1.0 + 1e-9);
                assert!(r.log_negativity.unwrap() >= -1e-9);
            }
        }
    }

    #[test]
    fn mixing_with_noise_does_not_raise_negativity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let psi = random_matrix(&mut rng, 3, 3);
            let psi = psi.unscale(psi.norm());
            let rho = BipartiteDensity::from_pure(&psi);
            let base = log_negativity(&rho).unwrap();
            for eps in [0.1, 0.5] {
                let noise = DMatrix::<Complex64>::identity(9, 9).unscale(9.0);
                let mixed = rho.matrix.scale(1.0 - eps) + noise.scale(eps);
                let n = log_negativity(&BipartiteDensity::new(mixed, (3, 3)).unwrap()).unwrap();
                assert!(n <= base + 1e-12);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn local_phases_leave_entropy_unchanged(seed in any::<u64>(), dim in 2usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, dim, dim);
            let left: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..6.3)).collect();
            let right: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..6.3)).collect();
            let rotated = DMatrix::from_fn(dim, dim, |i, j| {
                a[(i, j)] * Complex64::from_polar(1.0, left[i] + right[j])
            });
            let e0 = schmidt_entropy(&wrap(a)).unwrap().entropy;
            let e1 = schmidt_entropy(&wrap(rotated)).unwrap().entropy;
            prop_assert!((e0 - e1).abs() < 1e-10);
        }

        #[test]
        fn pure_negativity_matches_partial_transpose(seed in any::<u64>(), rows in 2usize..5, cols in 2usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let psi = random_matrix(&mut rng, rows, cols);
            let psi = psi.unscale(psi.norm());
            let rho = BipartiteDensity::from_pure(&psi);
            let sv: Vec<f64> = psi.singular_values().iter().map(|s| s * s).collect();
            prop_assert!((log_negativity(&rho).unwrap() - pure_log_negativity(&sv)).abs() < 1e-8);
        }
    }
}
