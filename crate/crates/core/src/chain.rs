//! Protocol states for a chain of `M` ensembles.
//!
//! Every node starts x-polarised, neighbours evolve under
//! `H = sum_j (-1)^j n_{a,j} n_{a,j+1}` (nodes numbered from 1), each
//! intermediate node receives the phase kick `e^{i n_a phi}` and is then
//! projected onto `|q_j>^(x)`. What is left is an unnormalised pure state of
//! nodes 1 and `M`, stored as the amplitude matrix `A(k_1, k_M)`.
//!
//! Two independent routes build `A`:
//!
//! * [`exact_evolve`] + [`project_intermediates`]: the full `(N+1)^M`
//!   product space, one phase per basis state.
//! * [`closed_form_amplitudes`]: even nodes are summed analytically into
//!   coherent overlaps, odd nodes are kept as windowed Dicke indices, and the
//!   chain is contracted left to right as `W x W` transfer matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::dicke::{
    coherent_x_overlap, equatorial_kernel, log_x_polarized_weight, max_log_magnitude,
    x_overlap_row, LogAmplitude, TruncationWindow,
};
use crate::{Error, Result};

/// Default cap on the number of amplitudes [`exact_evolve`] may allocate.
pub const DEFAULT_AMPLITUDE_CAP: u128 = 10_000_000;

/// Default `c_t` for the time grid spacing `pi / (c_t N)`.
pub const DEFAULT_TIME_GRID_CONSTANT: f64 = 100.0;

/// Complete description of one protocol run.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainConfig {
    /// Number of ensembles `M`.
    pub nodes: usize,
    /// Qubits per ensemble `N`.
    pub atoms: usize,
    /// Interaction time `t`.
    pub time: f64,
    /// x-basis outcomes `q_2 .. q_{M-1}` of the intermediate nodes.
    pub outcomes: Vec<usize>,
    /// Equatorial offset applied as `e^{i n_a phi}` before each measurement.
    pub phi: f64,
    pub window: TruncationWindow,
    pub time_grid_constant: f64,
}

impl ChainConfig {
    /// Full basis, `t = 0`, `phi = 0` and every outcome `q_j = N`.
    pub fn new(nodes: usize, atoms: usize) -> Result<Self> {
        if nodes < 2 {
            return Err(Error::domain(format!("a chain needs at least 2 nodes, got {nodes}")));
        }
        if atoms == 0 {
            return Err(Error::domain("ensembles need at least one atom"));
        }
        Ok(ChainConfig {
            nodes,
            atoms,
            time: 0.0,
            outcomes: vec![atoms; nodes - 2],
            phi: 0.0,
            window: TruncationWindow::full(atoms),
            time_grid_constant: DEFAULT_TIME_GRID_CONSTANT,
        })
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn with_phi(mut self, phi: f64) -> Self {
        self.phi = phi;
        self
    }

    pub fn with_outcomes(mut self, outcomes: Vec<usize>) -> Result<Self> {
        self.outcomes = outcomes;
        self.validate()?;
        Ok(self)
    }

    /// Window with `K = floor(c sqrt(N)/2)` on every node.
    pub fn with_window_constant(mut self, c: f64) -> Result<Self> {
        self.window = if c.is_infinite() && c > 0.0 {
            TruncationWindow::full(self.atoms)
        } else {
            TruncationWindow::new(self.atoms, c)?
        };
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes < 2 || self.atoms == 0 {
            return Err(Error::domain("chain needs M >= 2 and N >= 1"));
        }
        if self.outcomes.len() != self.nodes - 2 {
            return Err(Error::domain(format!(
                "expected {} intermediate outcomes, got {}",
                self.nodes - 2,
                self.outcomes.len()
            )));
        }
        if let Some(q) = self.outcomes.iter().find(|&&q| q > self.atoms) {
            return Err(Error::domain(format!("outcome q = {q} exceeds N = {}", self.atoms)));
        }
        self.window.check_atoms(self.atoms)?;
        if !self.time.is_finite() || !self.phi.is_finite() {
            return Err(Error::domain("time and phi must be finite"));
        }
        Ok(())
    }
}

/// Eigenvalue of `H` on `|k_1 ... k_M>`: `sum_j (-1)^j k_j k_{j+1}`.
pub fn chain_energy(k: &[usize]) -> i64 {
    k.windows(2)
        .enumerate()
        .map(|(i, pair)| {
            let term = (pair[0] * pair[1]) as i64;
            // node numbering starts at 1, so the first bond carries (-1)^1
            if i % 2 == 0 {
                -term
            } else {
                term
            }
        })
        .sum()
}

/// State vector on the product Dicke space, node 1 most significant.
#[derive(Clone, Debug)]
pub struct FullState {
    pub atoms: usize,
    pub nodes: usize,
    pub amplitudes: Vec<Complex64>,
}

impl FullState {
    pub fn dimension(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn flat_index(&self, k: &[usize]) -> usize {
        k.iter().fold(0, |acc, &kj| acc * (self.atoms + 1) + kj)
    }

    pub fn amplitude(&self, k: &[usize]) -> Complex64 {
        self.amplitudes[self.flat_index(k)]
    }
}

/// Advances a mixed-radix digit vector; returns false after the last state.
pub(crate) fn next_digits(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

pub(crate) fn x_polarized_weights(n: usize) -> Vec<f64> {
    (0..=n)
        .map(|k| log_x_polarized_weight(n, k).exp())
        .collect()
}

/// `U(t)|phi_0>` on the full `(N+1)^M` space with the default size cap.
pub fn exact_evolve(config: &ChainConfig) -> Result<FullState> {
    exact_evolve_with_cap(config, DEFAULT_AMPLITUDE_CAP)
}

/// `U(t)|phi_0>`: every product basis state acquires `exp(-i t E(k))`.
pub fn exact_evolve_with_cap(config: &ChainConfig, cap: u128) -> Result<FullState> {
    config.validate()?;
    let (n, m) = (config.atoms, config.nodes);
    let base = n + 1;
    let required = (base as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if required > cap {
        return Err(Error::Capacity {
            what: "exact product state",
            required,
            cap,
        });
    }
    let weights = x_polarized_weights(n);
    let mut amplitudes = Vec::with_capacity(required as usize);
    let mut digits = vec![0usize; m];
    loop {
        let magnitude: f64 = digits.iter().map(|&k| weights[k]).product();
        let energy = chain_energy(&digits) as f64;
        amplitudes.push(Complex64::from_polar(magnitude, -config.time * energy));
        if !next_digits(&mut digits, base) {
            break;
        }
    }
    Ok(FullState {
        atoms: n,
        nodes: m,
        amplitudes,
    })
}

/// Unnormalised post-measurement state `sum A(k_1, k_M) |k_1>|k_M>` of the
/// end nodes. The true amplitudes are `exp(log_scale) * matrix`.
#[derive(Clone, Debug)]
pub struct BipartiteAmplitudes {
    pub atoms: usize,
    /// Dicke indices of the rows (node 1).
    pub first: TruncationWindow,
    /// Dicke indices of the columns (node M).
    pub last: TruncationWindow,
    matrix: DMatrix<Complex64>,
    log_scale: f64,
}

impl BipartiteAmplitudes {
    pub fn new(
        atoms: usize,
        first: TruncationWindow,
        last: TruncationWindow,
        matrix: DMatrix<Complex64>,
        log_scale: f64,
    ) -> Result<Self> {
        if matrix.nrows() != first.len() || matrix.ncols() != last.len() {
            return Err(Error::domain(format!(
                "amplitude matrix is {}x{} but windows are {}x{}",
                matrix.nrows(),
                matrix.ncols(),
                first.len(),
                last.len()
            )));
        }
        Ok(BipartiteAmplitudes {
            atoms,
            first,
            last,
            matrix,
            log_scale,
        })
    }

    /// Stored matrix; multiply by `exp(log_scale())` for true amplitudes.
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// True amplitude `A(k_1, k_M)` for Dicke indices inside the windows.
    pub fn amplitude(&self, k_first: usize, k_last: usize) -> Complex64 {
        self.matrix[(k_first - self.first.k_min(), k_last - self.last.k_min())]
            * self.log_scale.exp()
    }

    /// `ln p_q`; `None` when every amplitude is zero.
    pub fn log_probability(&self) -> Option<f64> {
        let s: f64 = self.matrix.iter().map(|z| z.norm_sqr()).sum();
        (s > 0.0).then(|| s.ln() + 2.0 * self.log_scale)
    }

    /// Outcome probability `p_q = sum |A|^2`.
    pub fn probability(&self) -> f64 {
        self.log_probability().map_or(0.0, f64::exp)
    }

    /// `A / ||A||_F`, the normalised post-measurement state.
    pub fn normalized(&self) -> Result<DMatrix<Complex64>> {
        let norm = self.matrix.norm();
        if norm == 0.0 {
            return Err(Error::ImpossibleOutcome(0.0));
        }
        Ok(self.matrix.unscale(norm))
    }
}

fn measurement_weights(q: usize, n: usize, phi: f64) -> Result<Vec<Complex64>> {
    Ok(x_overlap_row(q, n)?
        .into_iter()
        .enumerate()
        .map(|(k, c)| c.to_complex() * Complex64::from_polar(1.0, k as f64 * phi))
        .collect())
}

/// Applies `e^{i n_a phi}` and `<q_j|^(x)` on every intermediate node.
pub fn project_intermediates(
    state: &FullState,
    outcomes: &[usize],
    phi: f64,
) -> Result<BipartiteAmplitudes> {
    let (n, m) = (state.atoms, state.nodes);
    if outcomes.len() + 2 != m {
        return Err(Error::domain(format!(
            "expected {} outcomes, got {}",
            m.saturating_sub(2),
            outcomes.len()
        )));
    }
    let weights = outcomes
        .iter()
        .map(|&q| measurement_weights(q, n, phi))
        .collect::<Result<Vec<_>>>()?;
    let base = n + 1;
    let mut a = DMatrix::<Complex64>::zeros(base, base);
    let mut digits = vec![0usize; m];
    for amp in &state.amplitudes {
        let w: Complex64 = digits[1..m - 1]
            .iter()
            .zip(&weights)
            .map(|(&k, row)| row[k])
            .product();
        a[(digits[0], digits[m - 1])] += amp * w;
        next_digits(&mut digits, base);
    }
    let full = TruncationWindow::full(n);
    BipartiteAmplitudes::new(n, full, full, a, 0.0)
}

/// Left-to-right product of diagonal and dense factors with running
/// max-normalisation, so that arbitrarily small factors never underflow.
struct Contraction {
    pending_diag: Vec<Complex64>,
    dense: Option<DMatrix<Complex64>>,
    log_scale: f64,
}

/// Linear values of `values / max|values|`, plus `ln max|values|`.
fn normalize_logs(values: &[LogAmplitude]) -> Result<(Vec<Complex64>, f64)> {
    let shift = max_log_magnitude(values).ok_or(Error::ImpossibleOutcome(0.0))?;
    Ok((values.iter().map(|v| v.scaled(shift)).collect(), shift))
}

impl Contraction {
    fn start(diag: &[LogAmplitude]) -> Result<Self> {
        let (pending_diag, log_scale) = normalize_logs(diag)?;
        Ok(Contraction {
            pending_diag,
            dense: None,
            log_scale,
        })
    }

    fn apply_diag(&mut self, diag: &[LogAmplitude]) -> Result<()> {
        let (d, shift) = normalize_logs(diag)?;
        self.log_scale += shift;
        match &mut self.dense {
            None => self.pending_diag.iter_mut().zip(&d).for_each(|(x, y)| *x *= y),
            Some(m) => {
                for (mut col, y) in m.column_iter_mut().zip(&d) {
                    col *= *y;
                }
            }
        }
        Ok(())
    }

    fn apply_dense(&mut self, factor: DMatrix<Complex64>, factor_scale: f64) -> Result<()> {
        self.log_scale += factor_scale;
        let mut next = match self.dense.take() {
            None => {
                let mut f = factor;
                for (mut row, d) in f.row_iter_mut().zip(&self.pending_diag) {
                    row *= *d;
                }
                f
            }
            Some(m) => m * factor,
        };
        let peak = next.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return Err(Error::ImpossibleOutcome(0.0));
        }
        next.unscale_mut(peak);
        self.log_scale += peak.ln();
        self.dense = Some(next);
        Ok(())
    }
}

fn window_weights(n: usize, window: &TruncationWindow) -> Vec<LogAmplitude> {
    window
        .indices()
        .map(|k| LogAmplitude::from_log_polar(log_x_polarized_weight(n, k), 0.0))
        .collect()
}

/// Coherent overlap of an even intermediate node as a Toeplitz matrix in
/// `(k_{j-1}, k_{j+1})`; returns the max-normalised matrix and its log scale.
fn even_node_factor(
    q: usize,
    config: &ChainConfig,
) -> Result<(DMatrix<Complex64>, f64)> {
    let w = config.window.len();
    let by_difference = (0..2 * w - 1)
        .map(|i| {
            let d = i as f64 - (w as f64 - 1.0);
            coherent_x_overlap(q, config.atoms, d * config.time + config.phi)
        })
        .collect::<Result<Vec<_>>>()?;
    let (vals, shift) = normalize_logs(&by_difference)?;
    Ok((DMatrix::from_fn(w, w, |i, l| vals[i + w - 1 - l]), shift))
}

/// Windowed end-to-end amplitudes by transfer-matrix contraction.
///
/// Odd intermediate nodes contribute `diag(e^{i k phi} sqrt(C(N,k)/2^N) <q|^(x)|k>)`,
/// even ones the coherent-overlap matrix `Omega(k_{j-1} - k_{j+1})`. For even
/// `M` the last node's coherent label `e^{i k_{M-1} t}` is expanded into its
/// windowed Dicke amplitudes only at the end. Cost `O(M W^3)`.
pub fn closed_form_amplitudes(config: &ChainConfig) -> Result<BipartiteAmplitudes> {
    config.validate()?;
    if config.nodes < 3 {
        return Err(Error::domain("closed-form amplitudes need at least 3 nodes"));
    }
    let (n, m) = (config.atoms, config.nodes);
    let window = config.window;
    let weights = window_weights(n, &window);

    let mut chain = Contraction::start(&weights)?;
    // 1-based node j = index + 2
    for (offset, &q) in config.outcomes.iter().enumerate() {
        let node = offset + 2;
        if node % 2 == 0 {
            let (factor, shift) = even_node_factor(q, config)?;
            chain.apply_dense(factor, shift)?;
        } else {
            let row = x_overlap_row(q, n)?;
            let diag: Vec<LogAmplitude> = window
                .indices()
                .zip(&weights)
                .map(|(k, &a)| a * row[k] * LogAmplitude::from_log_polar(0.0, k as f64 * config.phi))
                .collect();
            chain.apply_diag(&diag)?;
        }
    }

    if m % 2 == 1 {
        chain.apply_diag(&weights)?;
    } else {
        let (amps, shift) = normalize_logs(&weights)?;
        let t = config.time;
        let k0 = window.k_min();
        let terminal = DMatrix::from_fn(window.len(), window.len(), |i, l| {
            let phase = ((k0 + i) as f64 * (k0 + l) as f64 * t).rem_euclid(2.0 * PI);
            amps[l] * Complex64::from_polar(1.0, phase)
        });
        chain.apply_dense(terminal, shift)?;
    }

    let matrix = chain.dense.expect("a chain with M >= 3 always has a dense factor");
    BipartiteAmplitudes::new(n, window, window, matrix, chain.log_scale)
}

/// What is known about the structure of a [`RealKernel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelSymmetry {
    General,
    /// `B = B^T`.
    Symmetric,
    /// `B = B^T` and `B` commutes with the reflection `k -> N - k`.
    SymmetricReflection,
}

/// Real matrix with the same singular values and entrywise moduli as the
/// three-node amplitudes.
///
/// For `M = 3`, `A(k_1, k_3) = e^{i theta_0} e^{i N t k_1/2} e^{-i N t k_3/2} B(k_1, k_3)`
/// with `B = a(k_1) a(k_3) sqrt(C(N,q)) cos^q(alpha/2) sin^(N-q)(alpha/2)`,
/// `alpha = (k_1 - k_3) t + phi`. The stripped phases are diagonal unitaries,
/// so `B` carries all the entanglement at a quarter of the complex cost.
/// True values are `exp(log_scale) * matrix`.
#[derive(Clone, Debug)]
pub struct RealKernel {
    pub atoms: usize,
    pub window: TruncationWindow,
    pub matrix: DMatrix<f64>,
    pub log_scale: f64,
    pub symmetry: KernelSymmetry,
}

impl RealKernel {
    pub fn probability(&self) -> f64 {
        let s: f64 = self.matrix.iter().map(|x| x * x).sum();
        if s == 0.0 {
            0.0
        } else {
            (s.ln() + 2.0 * self.log_scale).exp()
        }
    }
}

/// Phase-stripped real kernel of the `M = 3` chain.
pub fn three_node_kernel(config: &ChainConfig) -> Result<RealKernel> {
    config.validate()?;
    if config.nodes != 3 {
        return Err(Error::domain("the real kernel is specific to M = 3"));
    }
    let (n, q) = (config.atoms, config.outcomes[0]);
    let window = config.window;
    let w = window.len();
    let (a, a_shift) = normalize_logs(&window_weights(n, &window))?;
    let by_difference: Vec<LogAmplitude> = (0..2 * w - 1)
        .map(|i| {
            let d = i as f64 - (w as f64 - 1.0);
            equatorial_kernel(q, n, d * config.time + config.phi)
        })
        .collect();
    let (g, g_shift) = normalize_logs(&by_difference)?;
    let matrix = DMatrix::from_fn(w, w, |i, l| a[i].re * a[l].re * g[i + w - 1 - l].re);
    let symmetric = config.phi == 0.0 && (n - q) % 2 == 0;
    let symmetry = match (symmetric, window.is_reflection_symmetric()) {
        (true, true) => KernelSymmetry::SymmetricReflection,
        (true, false) => KernelSymmetry::Symmetric,
        _ => KernelSymmetry::General,
    };
    Ok(RealKernel {
        atoms: n,
        window,
        matrix,
        log_scale: 2.0 * a_shift + g_shift,
        symmetry,
    })
}

/// Uniform grid `0, dt, 2 dt, ...` up to `t_max` with `dt = pi / (c_t N)`.
pub fn time_grid(atoms: usize, c_t: f64, t_max: f64) -> Result<Vec<f64>> {
    if !(c_t >= 1.0) {
        return Err(Error::domain(format!("time-grid constant must be >= 1, got {c_t}")));
    }
    if atoms == 0 || !(t_max >= 0.0) || !t_max.is_finite() {
        return Err(Error::domain("time grid needs N >= 1 and finite t_max >= 0"));
    }
    let denom = c_t * atoms as f64;
    let steps = (t_max * denom / PI + 1e-9).floor() as usize;
    Ok((0..=steps).map(|i| PI * i as f64 / denom).collect())
}
