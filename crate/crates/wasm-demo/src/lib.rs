//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export returns a flat `Float64Array`; the page plots it on a canvas.

use ensemble_chain::chain::{closed_form_amplitudes, three_node_kernel, ChainConfig};
use ensemble_chain::dephasing::{dephased_end_to_end, DephasingParams};
use ensemble_chain::dicke::TruncationWindow;
use ensemble_chain::entanglement::{kernel_report, schmidt_entropy};
use ensemble_chain::{Error, Result};
use wasm_bindgen::prelude::*;

/// Largest ensemble the page lets you pick.
pub const MAX_ATOMS: usize = 20_000;
/// Largest ensemble for the dephasing plot.
pub const MAX_DEPHASED_ATOMS: usize = 60;

fn times(points: usize, t_max: f64) -> Result<Vec<f64>> {
    if points < 2 || points > 5000 {
        return Err(Error::Domain(format!("points must be in 2..=5000, got {points}")));
    }
    Ok((0..points).map(|i| t_max * i as f64 / (points - 1) as f64).collect())
}

fn chain(nodes: usize, atoms: usize, c: f64, t: f64, phi: f64) -> Result<ChainConfig> {
    if atoms > MAX_ATOMS {
        return Err(Error::Domain(format!("N is limited to {MAX_ATOMS} in the demo")));
    }
    Ok(ChainConfig::new(nodes, atoms)?
        .with_time(t)
        .with_phi(phi)
        .with_window_constant(c)?)
}

/// Normalised entropy `E/log2(N+1)` on `points` evenly spaced times in `[0, t_max]`.
pub fn entropy_trace_values(
    nodes: usize,
    atoms: usize,
    c: f64,
    phi: f64,
    points: usize,
    t_max: f64,
) -> Result<Vec<f64>> {
    times(points, t_max)?
        .into_iter()
        .map(|t| {
            let cfg = chain(nodes, atoms, c, t, phi)?;
            let report = if nodes == 3 {
                kernel_report(&three_node_kernel(&cfg)?)
            } else {
                schmidt_entropy(&closed_form_amplitudes(&cfg)?)
            };
            // rare impossible outcomes plot as gaps
            Ok(report.map(|r| r.normalized_entropy).unwrap_or(f64::NAN))
        })
        .collect()
}

/// `[k_min, k_max, P(0), ..., P(N)]`: window bounds and x-polarized
/// Dicke populations `C(N,k)/2^N`.
pub fn window_profile_values(atoms: usize, c: f64) -> Result<Vec<f64>> {
    if atoms > MAX_ATOMS {
        return Err(Error::Domain(format!("N is limited to {MAX_ATOMS} in the demo")));
    }
    let window = TruncationWindow::new(atoms, c)?;
    let mut out = vec![window.k_min() as f64, window.k_max() as f64];
    let ln2n = atoms as f64 * std::f64::consts::LN_2;
    for k in 0..=atoms {
        out.push((ensemble_chain::dicke::log_binomial(atoms, k)? - ln2n).exp());
    }
    Ok(out)
}

/// Logarithmic negativity of the dephased three-node chain over `[0, t_max]`.
pub fn dephased_negativity_values(
    atoms: usize,
    c: f64,
    gamma: f64,
    points: usize,
    t_max: f64,
) -> Result<Vec<f64>> {
    if atoms > MAX_DEPHASED_ATOMS {
        return Err(Error::Domain(format!("N is limited to {MAX_DEPHASED_ATOMS} here")));
    }
    times(points, t_max)?
        .into_iter()
        .map(|t| {
            let cfg = chain(3, atoms, c, t, 0.0)?;
            let out = dephased_end_to_end(&cfg, DephasingParams::new(gamma, t)?);
            Ok(out.ok().and_then(|o| o.report.log_negativity).unwrap_or(f64::NAN))
        })
        .collect()
}

fn js(r: Result<Vec<f64>>) -> std::result::Result<Vec<f64>, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn entropy_trace(
    nodes: usize,
    atoms: usize,
    c: f64,
    phi: f64,
    points: usize,
    t_max: f64,
) -> std::result::Result<Vec<f64>, JsValue> {
    js(entropy_trace_values(nodes, atoms, c, phi, points, t_max))
}

#[wasm_bindgen]
pub fn window_profile(atoms: usize, c: f64) -> std::result::Result<Vec<f64>, JsValue> {
    js(window_profile_values(atoms, c))
}

#[wasm_bindgen]
pub fn dephased_negativity(
    atoms: usize,
    c: f64,
    gamma: f64,
    points: usize,
    t_max: f64,
) -> std::result::Result<Vec<f64>, JsValue> {
    js(dephased_negativity_values(atoms, c, gamma, points, t_max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn trace_starts_unentangled_and_stays_bounded() {
        let e = entropy_trace_values(3, 200, 3.0, 0.0, 64, PI).unwrap();
        assert_eq!(e.len(), 64);
        assert!(e[0].abs() < 1e-12);
        assert!(e.iter().all(|&x| (0.0..=1.0 + 1e-9).contains(&x)));
        let four = entropy_trace_values(4, 12, f64::INFINITY, 0.1, 8, 2.0).unwrap();
        assert!(four.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn profile_is_a_distribution() {
        let p = window_profile_values(100, 3.0).unwrap();
        assert_eq!((p[0], p[1]), (35.0, 65.0));
        let total: f64 = p[2..].iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dephasing_lowers_negativity() {
        let clean = dephased_negativity_values(10, 3.0, 0.0, 5, PI).unwrap();
        let noisy = dephased_negativity_values(10, 3.0, 0.1, 5, PI).unwrap();
        assert!(clean[0].abs() < 1e-10);
        assert!(noisy[2] < clean[2]);
    }

    #[test]
    fn limits_are_enforced() {
        assert!(entropy_trace_values(3, MAX_ATOMS + 1, 3.0, 0.0, 4, 1.0).is_err());
        assert!(dephased_negativity_values(MAX_DEPHASED_ATOMS + 1, 3.0, 0.0, 4, 1.0).is_err());
        assert!(entropy_trace_values(3, 10, 3.0, 0.0, 1, 1.0).is_err());
    }
}
