use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use ensemble_chain::chain::{
    closed_form_amplitudes, exact_evolve, project_intermediates, three_node_kernel, time_grid,
    DEFAULT_AMPLITUDE_CAP,
};
use ensemble_chain::dephasing::{dephased_end_to_end, DephasingParams};
use ensemble_chain::entanglement::{kernel_report, schmidt_entropy, EntanglementReport};
use ensemble_chain::{Error, Result, MAGIC_TIMES};
use rayon::prelude::*;

use crate::config::{Command, RunConfig};
use crate::selftest;

pub const TRACE_HEADER: &str = "t,E,E_norm,negativity,p_q,N,M,c,gamma,q_outcomes,phi,error";
pub const PRECISION_HEADER: &str = "t,c,E_window,E_exact,abs_error,N,M,error";
pub const PRECISION_SUMMARY_HEADER: &str = "c,max_abs_error_grid,max_abs_error_magic,grid_points,failed_points";

/// Lossless scientific notation, 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn error_cell(e: &Error) -> String {
    e.to_string().replace([',', '\n', '\r'], ";")
}

/// One row of a trace, gamma sweep or magic-time table.
#[derive(Clone, Debug)]
pub struct TraceRow {
    pub t: f64,
    pub atoms: usize,
    pub nodes: usize,
    pub c: f64,
    pub gamma: f64,
    pub outcomes: Vec<usize>,
    pub phi: f64,
    pub result: std::result::Result<EntanglementReport, String>,
}

impl TraceRow {
    pub fn csv_line(&self) -> String {
        let q: Vec<String> = self.outcomes.iter().map(|x| x.to_string()).collect();
        let (e, e_norm, neg, p, err) = match &self.result {
            Ok(r) => (
                fmt_float(r.entropy),
                fmt_float(r.normalized_entropy),
                r.log_negativity.map(fmt_float).unwrap_or_default(),
                fmt_float(r.probability),
                String::new(),
            ),
            Err(msg) => (String::new(), String::new(), String::new(), String::new(), msg.clone()),
        };
        format!(
            "{},{e},{e_norm},{neg},{p},{},{},{},{},{},{},{err}",
            fmt_float(self.t),
            self.atoms,
            self.nodes,
            fmt_float(self.c),
            fmt_float(self.gamma),
            q.join(";"),
            fmt_float(self.phi),
        )
    }
}

/// Maps `f` over `items` on a pool of `workers` threads, keeping input order.
pub fn parallel_map<T, U, F>(workers: usize, items: &[T], f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Io(io::Error::other(e)))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

/// Pure-state report at one point: full simulation with `--exact`, the real
/// kernel for `M = 3`, the windowed contraction otherwise.
pub fn pure_report(cfg: &RunConfig, atoms: usize, c: f64, t: f64) -> Result<EntanglementReport> {
    let chain = cfg.chain(atoms, c, t)?;
    if cfg.exact {
        let state = exact_evolve(&chain)?;
        schmidt_entropy(&project_intermediates(&state, &chain.outcomes, chain.phi)?)
    } else if chain.nodes == 3 {
        kernel_report(&three_node_kernel(&chain)?)
    } else {
        schmidt_entropy(&closed_form_amplitudes(&chain)?)
    }
}

fn check_exact_capacity(cfg: &RunConfig, atoms: usize) -> Result<()> {
    if !cfg.exact {
        return Ok(());
    }
    let dim = (atoms as u128 + 1)
        .checked_pow(cfg.nodes as u32)
        .unwrap_or(u128::MAX);
    if dim > DEFAULT_AMPLITUDE_CAP {
        return Err(Error::Capacity {
            what: "full state vector (--exact)",
            required: dim,
            cap: DEFAULT_AMPLITUDE_CAP,
        });
    }
    Ok(())
}

fn row(cfg: &RunConfig, atoms: usize, c: f64, gamma: f64, t: f64, result: Result<EntanglementReport>) -> TraceRow {
    TraceRow {
        t,
        atoms,
        nodes: cfg.nodes,
        c,
        gamma,
        outcomes: cfg.outcomes.resolve(cfg.nodes, atoms),
        phi: cfg.phi,
        result: result.map_err(|e| error_cell(&e)),
    }
}

fn grid(cfg: &RunConfig) -> Result<Vec<f64>> {
    time_grid(cfg.atoms, cfg.time_grid_constant, cfg.t_max)
}

pub fn trace_rows(cfg: &RunConfig) -> Result<Vec<TraceRow>> {
    check_exact_capacity(cfg, cfg.atoms)?;
    cfg.chain(cfg.atoms, cfg.window_constant, 0.0)?;
    let times = grid(cfg)?;
    let c = if cfg.exact { f64::INFINITY } else { cfg.window_constant };
    parallel_map(cfg.workers, &times, |&t| {
        row(cfg, cfg.atoms, c, 0.0, t, pure_report(cfg, cfg.atoms, c, t))
    })
}

fn dephased_report(cfg: &RunConfig, atoms: usize, gamma: f64, t: f64) -> Result<EntanglementReport> {
    let params = DephasingParams::new(gamma, t)?;
    let chain = cfg.chain(atoms, cfg.window_constant, t)?;
    Ok(dephased_end_to_end(&chain, params)?.report)
}

pub fn gamma_sweep_rows(cfg: &RunConfig) -> Result<Vec<TraceRow>> {
    cfg.chain(cfg.atoms, cfg.window_constant, 0.0)?;
    let times = grid(cfg)?;
    let cells: Vec<(f64, f64)> = cfg
        .gamma_grid
        .iter()
        .flat_map(|&g| times.iter().map(move |&t| (g, t)))
        .collect();
    parallel_map(cfg.workers, &cells, |&(g, t)| {
        row(cfg, cfg.atoms, cfg.window_constant, g, t, dephased_report(cfg, cfg.atoms, g, t))
    })
}

/// `n_list x magic times x gamma_grid`, in that nesting order.
pub fn magic_rows(cfg: &RunConfig) -> Result<Vec<TraceRow>> {
    let mut cells = Vec::new();
    for &n in &cfg.n_list {
        for &t in &MAGIC_TIMES {
            for &g in &cfg.gamma_grid {
                cells.push((n, t, g));
            }
        }
    }
    parallel_map(cfg.workers, &cells, |&(n, t, g)| {
        row(cfg, n, cfg.window_constant, g, t, dephased_report(cfg, n, g, t))
    })
}

#[derive(Clone, Debug)]
pub struct PrecisionRow {
    pub t: f64,
    pub c: f64,
    pub windowed: Result<f64, String>,
    pub exact: Result<f64, String>,
}

impl PrecisionRow {
    pub fn abs_error(&self) -> Option<f64> {
        match (&self.windowed, &self.exact) {
            (Ok(a), Ok(b)) => Some((a - b).abs()),
            _ => None,
        }
    }

    fn error(&self) -> String {
        match (&self.windowed, &self.exact) {
            (Err(e), _) | (_, Err(e)) => e.clone(),
            _ => String::new(),
        }
    }

    pub fn csv_line(&self, atoms: usize, nodes: usize) -> String {
        let f = |r: &Result<f64, String>| r.as_ref().map(|x| fmt_float(*x)).unwrap_or_default();
        format!(
            "{},{},{},{},{},{atoms},{nodes},{}",
            fmt_float(self.t),
            fmt_float(self.c),
            f(&self.windowed),
            f(&self.exact),
            self.abs_error().map(fmt_float).unwrap_or_default(),
            self.error()
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrecisionSummary {
    pub c: f64,
    pub max_grid_error: f64,
    pub max_magic_error: f64,
    pub grid_points: usize,
    pub failed_points: usize,
}

impl PrecisionSummary {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{}",
            fmt_float(self.c),
            fmt_float(self.max_grid_error),
            fmt_float(self.max_magic_error),
            self.grid_points,
            self.failed_points
        )
    }
}

#[derive(Clone, Debug)]
pub struct PrecisionReport {
    /// Grid rows, `c` outer and `t` inner.
    pub rows: Vec<PrecisionRow>,
    /// Rows at the magic times, same layout.
    pub magic: Vec<PrecisionRow>,
    pub summary: Vec<PrecisionSummary>,
}

/// Windowed entropy for every `c` in `c_list` against the full-basis value,
/// on the time grid and at the magic times.
pub fn precision_report(cfg: &RunConfig) -> Result<PrecisionReport> {
    check_exact_capacity(cfg, cfg.atoms)?;
    cfg.chain(cfg.atoms, f64::INFINITY, 0.0)?;
    let windowed_cfg = RunConfig {
        exact: false,
        ..cfg.clone()
    };
    let eval = |&t: &f64| {
        let exact = pure_report(cfg, cfg.atoms, f64::INFINITY, t)
            .map(|r| r.entropy)
            .map_err(|e| error_cell(&e));
        let windowed: Vec<Result<f64, String>> = cfg
            .c_list
            .iter()
            .map(|&c| {
                pure_report(&windowed_cfg, cfg.atoms, c, t)
                    .map(|r| r.entropy)
                    .map_err(|e| error_cell(&e))
            })
            .collect();
        (t, exact, windowed)
    };
    let layout = |points: Vec<(f64, Result<f64, String>, Vec<Result<f64, String>>)>| {
        let mut rows = Vec::with_capacity(points.len() * cfg.c_list.len());
        for (i, &c) in cfg.c_list.iter().enumerate() {
            for (t, exact, windowed) in &points {
                rows.push(PrecisionRow {
                    t: *t,
                    c,
                    windowed: windowed[i].clone(),
                    exact: exact.clone(),
                });
            }
        }
        rows
    };
    let rows = layout(parallel_map(cfg.workers, &grid(cfg)?, eval)?);
    let magic = layout(parallel_map(cfg.workers, &MAGIC_TIMES, eval)?);
    let max_err = |rows: &[PrecisionRow], c: f64| {
        rows.iter()
            .filter(|r| r.c == c)
            .filter_map(PrecisionRow::abs_error)
            .fold(0.0, f64::max)
    };
    let summary = cfg
        .c_list
        .iter()
        .map(|&c| PrecisionSummary {
            c,
            max_grid_error: max_err(&rows, c),
            max_magic_error: max_err(&magic, c),
            grid_points: rows.iter().filter(|r| r.c == c).count(),
            failed_points: rows
                .iter()
                .chain(&magic)
                .filter(|r| r.c == c && r.abs_error().is_none())
                .count(),
        })
        .collect();
    Ok(PrecisionReport { rows, magic, summary })
}

/// Rendered output of one command.
#[derive(Clone, Debug)]
pub struct Rendered {
    /// Main CSV (or selftest report) text.
    pub body: String,
    /// Extra files written next to the output, by suffix.
    pub extras: Vec<(&'static str, String)>,
    pub rows: usize,
    pub failed_rows: usize,
    /// False when a self-test check failed.
    pub passed: bool,
}

fn render_trace(rows: &[TraceRow]) -> Rendered {
    let mut body = String::with_capacity(rows.len() * 200);
    body.push_str(TRACE_HEADER);
    body.push('\n');
    for r in rows {
        body.push_str(&r.csv_line());
        body.push('\n');
    }
    Rendered {
        body,
        extras: Vec::new(),
        rows: rows.len(),
        failed_rows: rows.iter().filter(|r| r.result.is_err()).count(),
        passed: true,
    }
}

fn render_precision(cfg: &RunConfig, report: &PrecisionReport) -> Rendered {
    let mut body = String::from(PRECISION_HEADER);
    body.push('\n');
    for r in &report.rows {
        body.push_str(&r.csv_line(cfg.atoms, cfg.nodes));
        body.push('\n');
    }
    let mut summary = String::from(PRECISION_SUMMARY_HEADER);
    summary.push('\n');
    for s in &report.summary {
        summary.push_str(&s.csv_line());
        summary.push('\n');
    }
    let mut magic = String::from(PRECISION_HEADER);
    magic.push('\n');
    for r in &report.magic {
        magic.push_str(&r.csv_line(cfg.atoms, cfg.nodes));
        magic.push('\n');
    }
    Rendered {
        body,
        extras: vec![(".summary.csv", summary), (".magic.csv", magic)],
        rows: report.rows.len(),
        failed_rows: report.rows.iter().filter(|r| r.abs_error().is_none()).count(),
        passed: true,
    }
}

/// Computes a command's output without touching the filesystem.
pub fn render(cfg: &RunConfig) -> Result<Rendered> {
    cfg.validate()?;
    Ok(match cfg.command {
        Command::Trace => render_trace(&trace_rows(cfg)?),
        Command::GammaSweep => render_trace(&gamma_sweep_rows(cfg)?),
        Command::Magic => render_trace(&magic_rows(cfg)?),
        Command::Precision => render_precision(cfg, &precision_report(cfg)?),
        Command::Selftest => {
            let report = selftest::run(cfg.seed);
            Rendered {
                body: report.render(),
                extras: Vec::new(),
                rows: report.checks.len(),
                failed_rows: report.failures(),
                passed: report.passed(),
            }
        }
    })
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

/// Runs a command, writing `--out` (or stdout) plus `<out>.meta.txt`.
/// Returns whether every self-test check passed.
pub fn run(cfg: &RunConfig) -> Result<bool> {
    let start = Instant::now();
    // fail on an unwritable path before doing any work
    if let Some(out) = &cfg.output {
        File::create(out)?;
    }
    let rendered = render(cfg)?;
    match &cfg.output {
        Some(out) => {
            write_file(out, &rendered.body)?;
            for (suffix, text) in &rendered.extras {
                write_file(&sidecar(out, suffix), text)?;
            }
            let meta = format!(
                "ensemble-chain {}\n{}rows = {}\nfailed_rows = {}\nwall_time_s = {:.3}\n",
                env!("CARGO_PKG_VERSION"),
                cfg.echo(),
                rendered.rows,
                rendered.failed_rows,
                start.elapsed().as_secs_f64()
            );
            write_file(&sidecar(out, ".meta.txt"), &meta)?;
        }
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(rendered.body.as_bytes())?;
            stdout.flush()?;
            for (suffix, text) in &rendered.extras {
                eprintln!("# {suffix}\n{text}");
            }
        }
    }
    Ok(rendered.passed)
}
