use std::f64::consts::PI;

use ensemble_chain_cli::runner::trace_rows;
use ensemble_chain_cli::{Command, RunConfig};

#[test]
fn dips_are_spaced_on_the_scale_of_one_over_n() {
    let n = 100;
    let cfg = RunConfig {
        atoms: n,
        ..RunConfig::new(Command::Trace)
    };
    let rows = trace_rows(&cfg).unwrap();
    let e: Vec<f64> = rows.iter().map(|r| r.result.as_ref().unwrap().entropy).collect();
    let dips: Vec<f64> = (1..e.len() - 1)
        .filter(|&i| e[i] < e[i - 1] && e[i] < e[i + 1])
        .map(|i| rows[i].t)
        .collect();
    let mut gaps: Vec<f64> = dips.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_by(f64::total_cmp);
    let median = gaps[gaps.len() / 2];
    let unit = PI / n as f64;
    assert!((0.1 * unit..=10.0 * unit).contains(&median), "median {median}, {} dips", dips.len());
}

#[test]
fn entropy_stays_in_bounds() {
    let cfg = RunConfig {
        atoms: 50,
        phi: 0.15,
        ..RunConfig::new(Command::Trace)
    };
    let max = (51f64).log2();
    for r in trace_rows(&cfg).unwrap() {
        let rep = r.result.unwrap();
        assert!(rep.entropy >= -1e-12 && rep.entropy <= max + 1e-9);
        assert!(rep.log_negativity.unwrap() >= -1e-9);
    }
}
