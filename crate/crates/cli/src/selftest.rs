use std::f64::consts::{PI, TAU};

use ensemble_chain::chain::{
    closed_form_amplitudes, exact_evolve, project_intermediates, ChainConfig,
};
use ensemble_chain::dephasing::{
    analytic_density, dephased_end_to_end, rk4_lindblad, DephasingParams, ProductBasis,
};
use ensemble_chain::dicke::{
    coherent_dicke_amplitudes, x_overlap_row, CoherentParams, TruncationWindow,
};
use ensemble_chain::entanglement::schmidt_entropy;
use ensemble_chain::Result;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Source of the x-basis overlap rows `<q|^(x)|k>`, `k = 0..=N`.
pub type OverlapProvider = dyn Fn(usize, usize) -> Result<Vec<f64>> + Sync;

pub fn library_overlaps(q: usize, n: usize) -> Result<Vec<f64>> {
    Ok(x_overlap_row(q, n)?.iter().map(|c| c.to_complex().re).collect())
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            s += &format!("{tag} {}: {}\n", c.name, c.detail);
        }
        s += &format!("{} of {} checks passed\n", self.checks.len() - self.failures(), self.checks.len());
        s
    }

    fn record(&mut self, name: &'static str, tol: f64, value: Result<f64>) {
        let (passed, detail) = match value {
            Ok(v) => (v <= tol, format!("max deviation {v:.3e} (tolerance {tol:.0e})")),
            Err(e) => (false, format!("error: {e}")),
        };
        self.checks.push(Check { name, passed, detail });
    }
}

fn max_diff(a: &nalgebra::DMatrix<Complex64>, b: &nalgebra::DMatrix<Complex64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn overlap_unitarity(overlap: &OverlapProvider) -> Result<f64> {
    let mut worst = 0.0f64;
    for n in 1..=12 {
        let rows: Vec<Vec<f64>> = (0..=n).map(|q| overlap(q, n)).collect::<Result<_>>()?;
        for (i, a) in rows.iter().enumerate() {
            for (j, b) in rows.iter().enumerate() {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
    }
    Ok(worst)
}

fn closed_form_vs_exact(rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut worst = 0.0f64;
    for n in 1..=3 {
        for m in 3..=4 {
            let t = rng.gen_range(0.0..PI);
            let phi = rng.gen_range(-0.5..0.5);
            let cfg = ChainConfig::new(m, n)?.with_time(t).with_phi(phi);
            let exact = project_intermediates(&exact_evolve(&cfg)?, &cfg.outcomes, phi)?;
            let closed = closed_form_amplitudes(&cfg)?;
            worst = worst.max(max_diff(&exact.normalized()?, &closed.normalized()?));
        }
    }
    Ok(worst)
}

fn completeness() -> Result<f64> {
    let mut worst = 0.0f64;
    for (n, m) in [(2usize, 3usize), (2, 4), (3, 3)] {
        let mut total = 0.0;
        let inner = m - 2;
        for idx in 0..(n + 1).pow(inner as u32) {
            let q: Vec<usize> = (0..inner).map(|j| idx / (n + 1).pow(j as u32) % (n + 1)).collect();
            let cfg = ChainConfig::new(m, n)?.with_time(1.1).with_outcomes(q)?;
            total += closed_form_amplitudes(&cfg)?.probability();
        }
        worst = worst.max((total - 1.0).abs());
    }
    Ok(worst)
}

fn periodicity(rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..4 {
        let t = rng.gen_range(0.0..TAU);
        let e = |t: f64| -> Result<f64> {
            let cfg = ChainConfig::new(3, 3)?.with_time(t);
            let a = project_intermediates(&exact_evolve(&cfg)?, &cfg.outcomes, 0.0)?;
            Ok(schmidt_entropy(&a)?.entropy)
        };
        worst = worst.max((e(t)? - e(t + TAU)?).abs());
    }
    Ok(worst)
}

fn normalization() -> Result<f64> {
    let window = TruncationWindow::full(400);
    let amps = coherent_dicke_amplitudes(400, CoherentParams::x_polarized(), &window)?;
    Ok((amps.iter().map(|a| a.norm_sqr()).sum::<f64>() - 1.0).abs())
}

fn lindblad_vs_rk4() -> Result<f64> {
    let basis = ProductBasis::uniform(2, 2, TruncationWindow::full(2))?;
    let rho0 = basis.initial_density();
    let params = DephasingParams::new(0.05, 0.8)?;
    Ok(max_diff(
        &analytic_density(&rho0, &basis, params)?,
        &rk4_lindblad(&rho0, &basis, params, None)?,
    ))
}

fn unitary_limit() -> Result<f64> {
    let cfg = ChainConfig::new(3, 4)?.with_time(0.9);
    let mixed = dephased_end_to_end(&cfg, DephasingParams::new(0.0, cfg.time)?)?;
    let pure = schmidt_entropy(&closed_form_amplitudes(&cfg)?)?;
    let dn = (mixed.report.log_negativity.unwrap_or(f64::NAN) - pure.log_negativity.unwrap_or(f64::NAN)).abs();
    let de = (mixed.report.entropy - pure.entropy).abs();
    Ok(if dn.is_nan() { f64::INFINITY } else { dn.max(de) })
}

/// Oracle and invariant checks at small sizes with the library overlaps.
pub fn run(seed: u64) -> SelftestReport {
    run_with(seed, &library_overlaps)
}

pub fn run_with(seed: u64, overlap: &OverlapProvider) -> SelftestReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SelftestReport::default();
    report.record("x-basis unitarity", 1e-10, overlap_unitarity(overlap));
    report.record("closed form vs full simulation", 1e-10, closed_form_vs_exact(&mut rng));
    report.record("outcome completeness", 1e-10, completeness());
    report.record("2pi periodicity", 1e-9, periodicity(&mut rng));
    report.record("coherent-state normalization", 1e-12, normalization());
    report.record("analytic dephasing vs RK4", 1e-8, lindblad_vs_rk4());
    report.record("dephasing unitary limit", 1e-8, unitary_limit());
    report
}
