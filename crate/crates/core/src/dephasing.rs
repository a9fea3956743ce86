//! Collective `S_z` dephasing during the entangling evolution:
//!
//! `drho/dt = -i[H, rho] - (gamma/2) sum_j [S_j^2 rho - 2 S_j rho S_j + rho S_j^2]`.
//!
//! `H` and every `S_z^j` are diagonal in the product Dicke basis, so each
//! density-matrix element evolves independently:
//! `rho_{k k'}(t) = exp[-i(E_k - E_k')t - (gamma/2) t sum_j (s_j - s'_j)^2] rho_{k k'}(0)`.
//! That propagator is the production path; [`rk4_lindblad`] integrates the
//! master equation generically and exists to cross-check it.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::chain::{chain_energy, next_digits, x_polarized_weights, ChainConfig};
use crate::dicke::{x_overlap_row, TruncationWindow};
use crate::entanglement::{
    log_negativity, max_entropy, von_neumann_from_density, BipartiteDensity, EntanglementReport,
};
use crate::{Error, Result};

/// Largest product basis [`rk4_lindblad`] will materialise a density matrix on.
pub const RK4_BASIS_CAP: usize = 10_000;

/// Work cap (scalar terms) of the direct, unfactorised end-to-end contraction.
pub const DIRECT_CONTRACTION_CAP: u128 = 2_000_000_000;

/// Outcome probabilities below this are rejected as impossible.
pub const MIN_OUTCOME_PROBABILITY: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DephasingParams {
    pub gamma: f64,
    pub time: f64,
}

impl DephasingParams {
    pub fn new(gamma: f64, time: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::domain(format!("dephasing rate must be >= 0, got {gamma}")));
        }
        if !time.is_finite() {
            return Err(Error::domain("evolution time must be finite"));
        }
        Ok(DephasingParams { gamma, time })
    }
}

/// Dicke index of every node of the chain.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProductDickeIndex(pub Vec<usize>);

impl ProductDickeIndex {
    pub fn nodes(&self) -> usize {
        self.0.len()
    }

    /// `S_z` eigenvalue `2 k_j - N` of node `j` (0-based).
    pub fn sz(&self, j: usize, atoms: usize) -> i64 {
        2 * self.0[j] as i64 - atoms as i64
    }
}

/// Multiplier taking `rho_{k k'}(0)` to `rho_{k k'}(t)`.
pub fn lindblad_element_propagator(
    k: &ProductDickeIndex,
    k_prime: &ProductDickeIndex,
    params: DephasingParams,
    atoms: usize,
) -> Result<Complex64> {
    if k.nodes() != k_prime.nodes() {
        return Err(Error::domain("product indices have different node counts"));
    }
    if k.0.iter().chain(&k_prime.0).any(|&x| x > atoms) {
        return Err(Error::domain(format!("Dicke index exceeds N = {atoms}")));
    }
    let de = (chain_energy(&k.0) - chain_energy(&k_prime.0)) as f64;
    let spread: i64 = (0..k.nodes())
        .map(|j| {
            let d = k.sz(j, atoms) - k_prime.sz(j, atoms);
            d * d
        })
        .sum();
    let decay = -0.5 * params.gamma * params.time * spread as f64;
    Ok(Complex64::from_polar(decay.exp(), -de * params.time))
}

/// Product of per-node windows, node 1 most significant.
#[derive(Clone, Debug)]
pub struct ProductBasis {
    pub atoms: usize,
    pub windows: Vec<TruncationWindow>,
    states: Vec<ProductDickeIndex>,
}

impl ProductBasis {
    pub fn new(atoms: usize, windows: Vec<TruncationWindow>) -> Result<Self> {
        for w in &windows {
            w.check_atoms(atoms)?;
        }
        let dim = windows
            .iter()
            .try_fold(1u128, |acc, w| acc.checked_mul(w.len() as u128))
            .unwrap_or(u128::MAX);
        if dim > RK4_BASIS_CAP as u128 {
            return Err(Error::Capacity {
                what: "product density-matrix basis",
                required: dim,
                cap: RK4_BASIS_CAP as u128,
            });
        }
        let mut states = Vec::with_capacity(dim as usize);
        let mut offsets = vec![0usize; windows.len()];
        loop {
            states.push(ProductDickeIndex(
                offsets.iter().zip(&windows).map(|(o, w)| w.k_min() + o).collect(),
            ));
            // mixed radix with per-node widths
            let mut carry = true;
            for (o, w) in offsets.iter_mut().zip(&windows).rev() {
                *o += 1;
                if *o < w.len() {
                    carry = false;
                    break;
                }
                *o = 0;
            }
            if carry {
                break;
            }
        }
        Ok(ProductBasis {
            atoms,
            windows,
            states,
        })
    }

    /// Same window on each of `nodes` ensembles.
    pub fn uniform(atoms: usize, nodes: usize, window: TruncationWindow) -> Result<Self> {
        Self::new(atoms, vec![window; nodes])
    }

    pub fn dimension(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[ProductDickeIndex] {
        &self.states
    }

    /// `|phi_0><phi_0|` restricted to the basis and renormalised.
    pub fn initial_density(&self) -> DMatrix<Complex64> {
        let weights = x_polarized_weights(self.atoms);
        let mut psi: Vec<f64> = self
            .states
            .iter()
            .map(|s| s.0.iter().map(|&k| weights[k]).product())
            .collect();
        let norm = psi.iter().map(|x| x * x).sum::<f64>().sqrt();
        psi.iter_mut().for_each(|x| *x /= norm);
        DMatrix::from_fn(psi.len(), psi.len(), |i, j| Complex64::new(psi[i] * psi[j], 0.0))
    }
}

/// Exact `rho(t)` from `rho(0)` by the element-wise propagator.
pub fn analytic_density(
    rho0: &DMatrix<Complex64>,
    basis: &ProductBasis,
    params: DephasingParams,
) -> Result<DMatrix<Complex64>> {
    let d = basis.dimension();
    if rho0.shape() != (d, d) {
        return Err(Error::domain("density matrix does not match the basis"));
    }
    let mut out = rho0.clone();
    for (i, ki) in basis.states.iter().enumerate() {
        for (j, kj) in basis.states.iter().enumerate() {
            out[(i, j)] *= lindblad_element_propagator(ki, kj, params, basis.atoms)?;
        }
    }
    Ok(out)
}

/// Operator stored as its nonzero entries.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    pub dim: usize,
    pub entries: Vec<(usize, usize, Complex64)>,
}

impl SparseOperator {
    pub fn from_dense(m: &DMatrix<Complex64>) -> Self {
        let entries = (0..m.nrows())
            .flat_map(|r| (0..m.ncols()).map(move |c| (r, c)))
            .filter(|&(r, c)| m[(r, c)] != Complex64::new(0.0, 0.0))
            .map(|(r, c)| (r, c, m[(r, c)]))
            .collect();
        SparseOperator { dim: m.nrows(), entries }
    }

    pub fn identity(dim: usize) -> Self {
        SparseOperator {
            dim,
            entries: (0..dim).map(|i| (i, i, Complex64::new(1.0, 0.0))).collect(),
        }
    }

    pub fn kron(&self, other: &SparseOperator) -> SparseOperator {
        let mut entries = Vec::with_capacity(self.entries.len() * other.entries.len());
        for &(r1, c1, v1) in &self.entries {
            for &(r2, c2, v2) in &other.entries {
                entries.push((r1 * other.dim + r2, c1 * other.dim + c2, v1 * v2));
            }
        }
        SparseOperator {
            dim: self.dim * other.dim,
            entries,
        }
    }

    pub fn scale(mut self, s: f64) -> Self {
        self.entries.iter_mut().for_each(|e| e.2 *= s);
        self
    }

    pub fn add(mut self, other: SparseOperator) -> Self {
        self.entries.extend(other.entries);
        self
    }

    /// `self * rho`.
    fn left_mul(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(rho.nrows(), rho.ncols());
        for &(r, s, v) in &self.entries {
            for c in 0..rho.ncols() {
                out[(r, c)] += v * rho[(s, c)];
            }
        }
        out
    }

    /// `rho * self`.
    fn right_mul(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(rho.nrows(), rho.ncols());
        for &(s, c, v) in &self.entries {
            for r in 0..rho.nrows() {
                out[(r, c)] += rho[(r, s)] * v;
            }
        }
        out
    }
}

/// Master-equation generator: a Hamiltonian and Hermitian dephasing operators
/// sharing one rate.
#[derive(Clone, Debug)]
pub struct LindbladGenerator {
    pub hamiltonian: SparseOperator,
    pub jumps: Vec<SparseOperator>,
    pub gamma: f64,
}

impl LindbladGenerator {
    /// Builds `H` and `S_z^j` from single-node operators by Kronecker products,
    /// independently of [`chain_energy`].
    pub fn for_chain(basis: &ProductBasis, gamma: f64) -> Self {
        let single = |w: &TruncationWindow, f: &dyn Fn(usize) -> f64| SparseOperator {
            dim: w.len(),
            entries: w
                .indices()
                .enumerate()
                .map(|(i, k)| (i, i, Complex64::new(f(k), 0.0)))
                .collect(),
        };
        let n = basis.atoms;
        let embed = |ops: Vec<SparseOperator>| {
            ops.into_iter()
                .reduce(|acc, op| acc.kron(&op))
                .expect("at least one node")
        };
        let nodes = basis.windows.len();
        let identities: Vec<SparseOperator> = basis
            .windows
            .iter()
            .map(|w| SparseOperator::identity(w.len()))
            .collect();
        let number = |j: usize| single(&basis.windows[j], &|k| k as f64);
        let mut hamiltonian = SparseOperator {
            dim: basis.dimension(),
            entries: Vec::new(),
        };
        for j in 0..nodes.saturating_sub(1) {
            let mut ops = identities.clone();
            ops[j] = number(j);
            ops[j + 1] = number(j + 1);
            // bond j (0-based) is bond j+1 in 1-based numbering
            let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
            hamiltonian = hamiltonian.add(embed(ops).scale(sign));
        }
        let jumps = (0..nodes)
            .map(|j| {
                let mut ops = identities.clone();
                ops[j] = single(&basis.windows[j], &|k| 2.0 * k as f64 - n as f64);
                embed(ops)
            })
            .collect();
        LindbladGenerator {
            hamiltonian,
            jumps,
            gamma,
        }
    }

    pub fn rhs(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let i = Complex64::new(0.0, 1.0);
        let commutator = self.hamiltonian.left_mul(rho) - self.hamiltonian.right_mul(rho);
        let mut out = commutator * (-i);
        for l in &self.jumps {
            let l_rho = l.left_mul(rho);
            let ll_rho = l.left_mul(&l_rho);
            let rho_l = l.right_mul(rho);
            let rho_ll = l.right_mul(&rho_l);
            let l_rho_l = l.right_mul(&l_rho);
            out -= (ll_rho - l_rho_l * Complex64::from(2.0) + rho_ll)
                * Complex64::from(0.5 * self.gamma);
        }
        out
    }
}

/// RK4 step used when none is given: `min(1e-3, 0.1 / (gamma N^2 + 1))`.
pub fn default_rk4_step(gamma: f64, atoms: usize) -> f64 {
    let n2 = (atoms * atoms) as f64;
    (1e-3f64).min(0.1 / (gamma * n2 + 1.0))
}

/// Fixed-step classical RK4 integration of the master equation to
/// `params.time`. The step is shrunk so that it divides the interval exactly.
pub fn rk4_lindblad(
    rho0: &DMatrix<Complex64>,
    basis: &ProductBasis,
    params: DephasingParams,
    dt: Option<f64>,
) -> Result<DMatrix<Complex64>> {
    let d = basis.dimension();
    if rho0.shape() != (d, d) {
        return Err(Error::domain("density matrix does not match the basis"));
    }
    let dt = dt.unwrap_or_else(|| default_rk4_step(params.gamma, basis.atoms));
    if !(dt > 0.0) {
        return Err(Error::domain(format!("RK4 step must be positive, got {dt}")));
    }
    let gen = LindbladGenerator::for_chain(basis, params.gamma);
    let steps = (params.time.abs() / dt).ceil().max(1.0) as usize;
    let h = Complex64::from(params.time / steps as f64);
    let half = h * 0.5;
    let mut rho = rho0.clone();
    for _ in 0..steps {
        let k1 = gen.rhs(&rho);
        let k2 = gen.rhs(&(&rho + &k1 * half));
        let k3 = gen.rhs(&(&rho + &k2 * half));
        let k4 = gen.rhs(&(&rho + &k3 * h));
        rho += (k1 + k2 * Complex64::from(2.0) + k3 * Complex64::from(2.0) + k4) * (h / 6.0);
    }
    Ok(rho)
}

/// Normalised end-to-end state after dephased evolution and measurement.
#[derive(Clone, Debug)]
pub struct DephasedOutcome {
    pub density: BipartiteDensity,
    pub probability: f64,
    pub report: EntanglementReport,
}

fn measurement_weights(q: usize, atoms: usize, phi: f64) -> Result<Vec<Complex64>> {
    let weights = x_polarized_weights(atoms);
    Ok(x_overlap_row(q, atoms)?
        .into_iter()
        .enumerate()
        .map(|(k, c)| c.to_complex() * weights[k] * Complex64::from_polar(1.0, k as f64 * phi))
        .collect())
}

fn finish(matrix: DMatrix<Complex64>, dims: (usize, usize), atoms: usize) -> Result<DephasedOutcome> {
    let p = matrix.trace().re;
    if !(p >= MIN_OUTCOME_PROBABILITY) {
        return Err(Error::ImpossibleOutcome(p.max(0.0)));
    }
    let density = BipartiteDensity::new(matrix.unscale(p), dims)?;
    let negativity = log_negativity(&density)?;
    let entropy = von_neumann_from_density(&density.reduced_last())?;
    Ok(DephasedOutcome {
        probability: p,
        report: EntanglementReport {
            entropy,
            normalized_entropy: entropy / max_entropy(atoms),
            log_negativity: Some(negativity),
            probability: p,
        },
        density,
    })
}

/// Dephased evolution followed by phase kick and x-basis measurement of the
/// intermediate nodes.
///
/// End nodes use `config.window`, intermediate nodes the full basis (as in
/// the closed-form pure construction). For `M = 3` the measured node is summed
/// in factorised form,
/// `rho(k1 k3; k1' k3') = a a a a e^{-2 gamma t (dk1^2 + dk3^2)} G(k1 - k3, k1' - k3')`,
/// so only `O(W^4)` memory and `O(W^2 N^2)` work are needed; other `M` fall back
/// to [`dephased_end_to_end_direct`].
pub fn dephased_end_to_end(config: &ChainConfig, params: DephasingParams) -> Result<DephasedOutcome> {
    config.validate()?;
    if config.nodes != 3 {
        return dephased_end_to_end_direct(config, params);
    }
    let n = config.atoms;
    let window = config.window;
    let w = window.len();
    let t = params.time;
    let rate = 2.0 * params.gamma * t;

    let m = measurement_weights(config.outcomes[0], n, config.phi)?;
    let decay_mid = DMatrix::from_fn(n + 1, n + 1, |a, b| {
        let d = a as f64 - b as f64;
        Complex64::new((-rate * d * d).exp(), 0.0)
    });
    // u[(d, k2)] = m(k2) e^{i t k2 d}, d = k1 - k3 offset by w - 1
    let u = DMatrix::from_fn(2 * w - 1, n + 1, |i, k2| {
        let d = i as f64 - (w as f64 - 1.0);
        m[k2] * Complex64::from_polar(1.0, t * k2 as f64 * d)
    });
    let g = &u * decay_mid * u.adjoint();

    let weights = x_polarized_weights(n);
    let a: Vec<f64> = window.indices().map(|k| weights[k]).collect();
    let dim = w * w;
    let rho = DMatrix::from_fn(dim, dim, |r, c| {
        let (i1, i3) = (r / w, r % w);
        let (j1, j3) = (c / w, c % w);
        let d1 = i1 as f64 - j1 as f64;
        let d3 = i3 as f64 - j3 as f64;
        let env = a[i1] * a[i3] * a[j1] * a[j3] * (-rate * (d1 * d1 + d3 * d3)).exp();
        g[(i1 + w - 1 - i3, j1 + w - 1 - j3)] * env
    });
    finish(rho, (w, w), n)
}

/// Direct contraction over every pair of intermediate index tuples, calling
/// [`lindblad_element_propagator`] for each term. Valid for any `M >= 2`
/// within [`DIRECT_CONTRACTION_CAP`].
pub fn dephased_end_to_end_direct(
    config: &ChainConfig,
    params: DephasingParams,
) -> Result<DephasedOutcome> {
    config.validate()?;
    let n = config.atoms;
    let nodes = config.nodes;
    let window = config.window;
    let w = window.len();
    let inner = nodes - 2;
    let tuples = (n as u128 + 1).pow(inner as u32);
    let work = (w as u128).pow(4) * tuples * tuples;
    if work > DIRECT_CONTRACTION_CAP {
        return Err(Error::Capacity {
            what: "direct dephased contraction",
            required: work,
            cap: DIRECT_CONTRACTION_CAP,
        });
    }
    let weights = x_polarized_weights(n);
    let meas = config
        .outcomes
        .iter()
        .map(|&q| {
            Ok(x_overlap_row(q, n)?
                .into_iter()
                .enumerate()
                .map(|(k, c)| c.to_complex() * Complex64::from_polar(1.0, k as f64 * config.phi))
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;

    // (intermediate digits, measurement amplitude times initial amplitude)
    let mut middles = Vec::with_capacity(tuples as usize);
    let mut digits = vec![0usize; inner];
    loop {
        let amp: Complex64 = digits
            .iter()
            .zip(&meas)
            .map(|(&k, row)| row[k] * weights[k])
            .product();
        middles.push((digits.clone(), amp));
        if inner == 0 || !next_digits(&mut digits, n + 1) {
            break;
        }
    }

    let ends: Vec<(usize, usize)> = window
        .indices()
        .flat_map(|k1| window.indices().map(move |km| (k1, km)))
        .collect();
    let full = |k1: usize, mid: &[usize], km: usize| {
        let mut v = Vec::with_capacity(nodes);
        v.push(k1);
        v.extend_from_slice(mid);
        v.push(km);
        ProductDickeIndex(v)
    };
    let mut rho = DMatrix::<Complex64>::zeros(ends.len(), ends.len());
    for (r, &(k1, km)) in ends.iter().enumerate() {
        for (c, &(k1p, kmp)) in ends.iter().enumerate() {
            let outer = weights[k1] * weights[km] * weights[k1p] * weights[kmp];
            let mut acc = Complex64::new(0.0, 0.0);
            for (mid, amp) in &middles {
                let ket = full(k1, mid, km);
                for (mid_p, amp_p) in &middles {
                    let bra = full(k1p, mid_p, kmp);
                    acc += amp * amp_p.conj() * lindblad_element_propagator(&ket, &bra, params, n)?;
                }
            }
            rho[(r, c)] = acc * outer;
        }
    }
    finish(rho, (w, w), n)
}

/// Parameters shared by every cell of a magic-time scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanTemplate {
    pub nodes: usize,
    /// Truncation constant `c` (`inf` for the full basis).
    pub window_constant: f64,
    pub phi: f64,
}

impl ScanTemplate {
    /// Concrete configuration for `N` atoms with every outcome `q_j = N`.
    pub fn config(&self, atoms: usize, time: f64) -> Result<ChainConfig> {
        Ok(ChainConfig::new(self.nodes, atoms)?
            .with_time(time)
            .with_phi(self.phi)
            .with_window_constant(self.window_constant)?)
    }
}

/// One `(N, t, gamma)` cell of a scan; failures are kept per cell.
#[derive(Debug)]
pub struct MagicCell {
    pub atoms: usize,
    pub time: f64,
    pub gamma: f64,
    pub outcome: Result<EntanglementReport>,
}

pub fn magic_cell(template: &ScanTemplate, atoms: usize, time: f64, gamma: f64) -> MagicCell {
    let outcome = DephasingParams::new(gamma, time).and_then(|params| {
        let cfg = template.config(atoms, time)?;
        Ok(dephased_end_to_end(&cfg, params)?.report)
    });
    MagicCell {
        atoms,
        time,
        gamma,
        outcome,
    }
}

/// Logarithmic negativity over `atoms x times x gammas`, in that nesting order.
pub fn magic_time_scan(
    template: &ScanTemplate,
    atoms_list: &[usize],
    gammas: &[f64],
    times: &[f64],
) -> Vec<MagicCell> {
    let mut cells = Vec::with_capacity(atoms_list.len() * gammas.len() * times.len());
    for &n in atoms_list {
        for &t in times {
            for &g in gammas {
                cells.push(magic_cell(template, n, t, g));
            }
        }
    }
    cells
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::closed_form_amplitudes;
    use crate::entanglement::schmidt_entropy;
    use crate::MAGIC_TIMES;
    use std::f64::consts::{FRAC_PI_2, TAU};

    fn max_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn params(g: f64, t: f64) -> DephasingParams {
        DephasingParams::new(g, t).unwrap()
    }

    #[test]
    fn params_reject_negative_rate() {
        assert!(DephasingParams::new(-0.1, 1.0).is_err());
        assert!(DephasingParams::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn propagator_limits() {
        let k = ProductDickeIndex(vec![1, 2, 0]);
        let kp = ProductDickeIndex(vec![2, 2, 1]);
        let free = lindblad_element_propagator(&k, &kp, params(0.0, 0.7), 2).unwrap();
        let de = (chain_energy(&k.0) - chain_energy(&kp.0)) as f64;
        assert!((free - Complex64::from_polar(1.0, -de * 0.7)).norm() < 1e-15);
        let same = lindblad_element_propagator(&k, &k, params(0.3, 5.0), 2).unwrap();
        assert!((same - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(lindblad_element_propagator(&k, &ProductDickeIndex(vec![1, 2]), params(0.0, 1.0), 2).is_err());
    }

    #[test]
    fn analytic_matches_rk4_two_nodes() {
        let basis = ProductBasis::uniform(2, 2, TruncationWindow::full(2)).unwrap();
        let rho0 = basis.initial_density();
        let p = params(0.05, 0.8);
        let exact = analytic_density(&rho0, &basis, p).unwrap();
        let rk4 = rk4_lindblad(&rho0, &basis, p, None).unwrap();
        assert!(max_diff(&exact, &rk4) < 1e-8);
    }

    #[test]
    fn analytic_matches_rk4_three_nodes() {
        let basis = ProductBasis::uniform(3, 3, TruncationWindow::full(3)).unwrap();
        let rho0 = basis.initial_density();
        let p = params(1e-2, FRAC_PI_2);
        let exact = analytic_density(&rho0, &basis, p).unwrap();
        let rk4 = rk4_lindblad(&rho0, &basis, p, None).unwrap();
        assert!(max_diff(&exact, &rk4) < 1e-8);
    }

    #[test]
    fn rk4_unitary_periodicity_and_trace() {
        let basis = ProductBasis::uniform(2, 2, TruncationWindow::full(2)).unwrap();
        let rho0 = basis.initial_density();
        let back = rk4_lindblad(&rho0, &basis, params(0.0, TAU), None).unwrap();
        assert!(max_diff(&back, &rho0) < 1e-7);
        let damped = rk4_lindblad(&rho0, &basis, params(0.2, 1.3), None).unwrap();
        assert!((damped.trace() - Complex64::new(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn basis_cap_is_enforced() {
        let w = TruncationWindow::full(10);
        assert!(matches!(ProductBasis::uniform(10, 4, w), Err(Error::Capacity { .. })));
    }

    #[test]
    fn generator_hamiltonian_is_chain_energy() {
        let basis = ProductBasis::uniform(2, 3, TruncationWindow::full(2)).unwrap();
        let gen = LindbladGenerator::for_chain(&basis, 0.0);
        let mut diag = vec![0.0; basis.dimension()];
        for &(r, c, v) in &gen.hamiltonian.entries {
            assert_eq!(r, c);
            diag[r] += v.re;
        }
        for (s, e) in basis.states().iter().zip(diag) {
            assert_eq!(e, chain_energy(&s.0) as f64);
        }
    }

    #[test]
    fn purity_decays_monotonically() {
        let basis = ProductBasis::uniform(3, 3, TruncationWindow::full(3)).unwrap();
        let rho0 = basis.initial_density();
        let mut last = f64::INFINITY;
        for i in 0..12 {
            let rho = analytic_density(&rho0, &basis, params(0.05, 0.25 * i as f64)).unwrap();
            let purity = (&rho * &rho).trace().re;
            assert!(purity <= last + 1e-12);
            last = purity;
        }
    }

    #[test]
    fn factorised_path_matches_direct_path() {
        for (n, c, gamma, t, phi) in [
            (3usize, f64::INFINITY, 0.05, 0.9, 0.0),
            (8, 2.0, 0.02, FRAC_PI_2, 0.3),
            (5, 3.0, 0.0, 2.2, 0.0),
        ] {
            let cfg = ChainConfig::new(3, n)
                .unwrap()
                .with_time(t)
                .with_phi(phi)
                .with_window_constant(c)
                .unwrap();
            let p = params(gamma, t);
            let fast = dephased_end_to_end(&cfg, p).unwrap();
            let slow = dephased_end_to_end_direct(&cfg, p).unwrap();
            assert!(max_diff(&fast.density.matrix, &slow.density.matrix) < 1e-12);
            assert!((fast.probability - slow.probability).abs() < 1e-12);
        }
    }

    #[test]
    fn decoherence_free_limit_is_pure_closed_form_state() {
        for (nodes, n) in [(3usize, 6usize), (4, 2)] {
            let cfg = ChainConfig::new(nodes, n).unwrap().with_time(1.2).with_phi(0.1);
            let mixed = dephased_end_to_end(&cfg, params(0.0, cfg.time)).unwrap();
            let a = closed_form_amplitudes(&cfg).unwrap();
            let pure = BipartiteDensity::from_pure(&a.normalized().unwrap());
            assert!(max_diff(&mixed.density.matrix, &pure.matrix) < 1e-10);
            let report = schmidt_entropy(&a).unwrap();
            let n_mixed = mixed.report.log_negativity.unwrap();
            assert!((n_mixed - report.log_negativity.unwrap()).abs() < 1e-8);
            assert!((mixed.probability - report.probability).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_time_has_no_negativity() {
        let cfg = ChainConfig::new(3, 10).unwrap().with_window_constant(3.0).unwrap();
        let out = dephased_end_to_end(&cfg, params(0.3, 0.0)).unwrap();
        assert!(out.report.log_negativity.unwrap().abs() < 1e-10);
    }

    #[test]
    fn orthogonal_outcome_is_impossible() {
        // at t = 0 node 2 is in |N>^(x); any other outcome has zero weight up to rounding
        let cfg = ChainConfig::new(3, 4).unwrap().with_outcomes(vec![2]).unwrap();
        match dephased_end_to_end(&cfg, params(0.1, 0.0)) {
            Err(Error::ImpossibleOutcome(_)) => {}
            Ok(out) => assert!(out.probability < 1e-25),
            Err(e) => panic!("unexpected error {e}"),
        }
        let mut cfg = ChainConfig::new(3, 2).unwrap();
        cfg.window = TruncationWindow::new(2, 0.5).unwrap();
        assert!(dephased_end_to_end(&cfg, params(0.0, 0.0)).is_ok());
    }

    #[test]
    fn strong_dephasing_suppresses_negativity() {
        let cfg = ChainConfig::new(3, 30)
            .unwrap()
            .with_time(FRAC_PI_2)
            .with_window_constant(3.0)
            .unwrap();
        let weak = dephased_end_to_end(&cfg, params(1e-4, FRAC_PI_2)).unwrap();
        let strong = dephased_end_to_end(&cfg, params(1e-1, FRAC_PI_2)).unwrap();
        assert!(strong.report.log_negativity.unwrap() < weak.report.log_negativity.unwrap());
    }

    #[test]
    fn dephased_states_are_physical() {
        let cfg = ChainConfig::new(3, 12).unwrap().with_window_constant(3.0).unwrap();
        for g in [0.0, 1e-2, 1e-1] {
            for t in [0.4, FRAC_PI_2, 2.5] {
                let out = dephased_end_to_end(&cfg.clone().with_time(t), params(g, t)).unwrap();
                let rho = &out.density;
                assert!(rho.hermiticity_defect() < 1e-10);
                assert!((rho.trace() - Complex64::new(1.0, 0.0)).norm() < 1e-10);
                assert!(rho.min_eigenvalue() >= -1e-9);
            }
        }
    }

    #[test]
    fn scan_marks_failed_cells() {
        let template = ScanTemplate {
            nodes: 3,
            window_constant: 3.0,
            phi: 0.0,
        };
        let cells = magic_time_scan(&template, &[4, 0], &[0.0, 1e-2], &MAGIC_TIMES);
        assert_eq!(cells.len(), 16);
        assert!(cells[..8].iter().all(|c| c.outcome.is_ok()));
        assert!(cells[8..].iter().all(|c| c.outcome.is_err()));
        assert_eq!((cells[1].atoms, cells[1].time, cells[1].gamma), (4, MAGIC_TIMES[0], 1e-2));
    }
}
