use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ensemble_chain::chain::{ChainConfig, DEFAULT_TIME_GRID_CONSTANT};
use ensemble_chain::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Trace,
    Precision,
    GammaSweep,
    Magic,
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Trace => "trace",
            Command::Precision => "precision",
            Command::GammaSweep => "gamma-sweep",
            Command::Magic => "magic",
            Command::Selftest => "selftest",
        }
    }
}

/// Intermediate-node outcome convention.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcomes {
    /// `q_j = N` on every intermediate node.
    AllN,
    List(Vec<usize>),
}

impl Outcomes {
    pub fn resolve(&self, nodes: usize, atoms: usize) -> Vec<usize> {
        match self {
            Outcomes::AllN => vec![atoms; nodes.saturating_sub(2)],
            Outcomes::List(q) => q.clone(),
        }
    }
}

impl fmt::Display for Outcomes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcomes::AllN => f.write_str("all-N"),
            Outcomes::List(q) => {
                let parts: Vec<String> = q.iter().map(|x| x.to_string()).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub nodes: usize,
    pub atoms: usize,
    /// Window constant `c`; infinite selects the full basis.
    pub window_constant: f64,
    pub time_grid_constant: f64,
    pub t_max: f64,
    pub phi: f64,
    pub outcomes: Outcomes,
    pub gamma_grid: Vec<f64>,
    pub n_list: Vec<usize>,
    pub c_list: Vec<f64>,
    /// Use full state-vector simulation where it fits.
    pub exact: bool,
    pub workers: usize,
    pub output: Option<PathBuf>,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            nodes: 3,
            atoms: 100,
            window_constant: 3.0,
            time_grid_constant: DEFAULT_TIME_GRID_CONSTANT,
            t_max: std::f64::consts::PI,
            phi: 0.0,
            outcomes: Outcomes::AllN,
            gamma_grid: vec![0.0, 1e-4, 1e-3, 1e-2, 1e-1],
            n_list: vec![3, 10, 20, 30],
            c_list: vec![1.0, 1.5, 2.0, 3.0],
            exact: false,
            workers: 1,
            output: None,
            seed: 0,
        }
    }

    /// Chain configuration for `atoms` at time `t` with window constant `c`.
    pub fn chain(&self, atoms: usize, c: f64, t: f64) -> Result<ChainConfig> {
        let mut cfg = ChainConfig::new(self.nodes, atoms)?
            .with_time(t)
            .with_phi(self.phi)
            .with_window_constant(c)?;
        cfg.time_grid_constant = self.time_grid_constant;
        cfg.with_outcomes(self.outcomes.resolve(self.nodes, atoms))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Domain(msg));
        if self.nodes < 2 {
            return bad(format!("--m must be at least 2, got {}", self.nodes));
        }
        if self.atoms == 0 || self.n_list.contains(&0) {
            return bad("atom numbers must be positive".into());
        }
        if !(self.window_constant > 0.0) {
            return bad(format!("--c must be positive, got {}", self.window_constant));
        }
        if self.c_list.iter().any(|&c| !(c > 0.0)) {
            return bad("--c-list entries must be positive".into());
        }
        if !(self.time_grid_constant >= 1.0) || !self.time_grid_constant.is_finite() {
            return bad(format!("--ct must be finite and >= 1, got {}", self.time_grid_constant));
        }
        if !(self.t_max >= 0.0) || !self.t_max.is_finite() {
            return bad(format!("--tmax must be finite and >= 0, got {}", self.t_max));
        }
        if !self.phi.is_finite() {
            return bad("--phi must be finite".into());
        }
        if self.gamma_grid.iter().any(|&g| !(g >= 0.0) || !g.is_finite()) {
            return bad("--gamma-grid entries must be finite and >= 0".into());
        }
        if self.workers == 0 {
            return bad("--workers must be at least 1".into());
        }
        if let Outcomes::List(q) = &self.outcomes {
            if q.len() != self.nodes - 2 {
                return bad(format!("--outcomes needs {} entries for M = {}", self.nodes - 2, self.nodes));
            }
        }
        Ok(())
    }

    /// `key = value` lines describing the run, in flag vocabulary.
    pub fn echo(&self) -> String {
        let floats = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let ints = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        s += &format!("command = {}\n", self.command.name());
        s += &format!("n = {}\nm = {}\nc = {}\n", self.atoms, self.nodes, self.window_constant);
        s += &format!("ct = {}\ntmax = {}\nphi = {}\n", self.time_grid_constant, self.t_max, self.phi);
        s += &format!("outcomes = {}\n", self.outcomes);
        s += &format!("gamma-grid = {}\n", floats(&self.gamma_grid));
        s += &format!("n-list = {}\nc-list = {}\n", ints(&self.n_list), floats(&self.c_list));
        s += &format!("exact = {}\nworkers = {}\nseed = {}\n", self.exact, self.workers, self.seed);
        if let Some(out) = &self.output {
            s += &format!("out = {}\n", out.display());
        }
        s
    }
}

#[derive(Parser, Debug)]
#[command(name = "ensemble-chain", version, about = "Entanglement of chains of atomic ensembles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Subcommand, Debug)]
pub enum CliCommand {
    /// Entropy and negativity along a time grid.
    Trace(Flags),
    /// Truncated-window error against the full basis for each c.
    Precision(Flags),
    /// Dephased negativity traces, one per gamma.
    GammaSweep(Flags),
    /// Dephased negativity at the magic times over N and gamma.
    Magic(Flags),
    /// Built-in oracle and invariant checks.
    Selftest(Flags),
}

#[derive(Args, Debug, Clone, Default)]
pub struct Flags {
    /// Atoms per ensemble.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of ensembles in the chain.
    #[arg(long)]
    pub m: Option<usize>,
    /// Truncation window constant; `inf` for the full basis.
    #[arg(long)]
    pub c: Option<f64>,
    /// Time grid constant, dt = pi / (ct N).
    #[arg(long)]
    pub ct: Option<f64>,
    #[arg(long)]
    pub tmax: Option<f64>,
    /// Equatorial offset before each measurement.
    #[arg(long)]
    pub phi: Option<f64>,
    /// Comma-separated outcomes or `all-N`.
    #[arg(long)]
    pub outcomes: Option<String>,
    #[arg(long = "gamma-grid")]
    pub gamma_grid: Option<String>,
    #[arg(long = "n-list")]
    pub n_list: Option<String>,
    #[arg(long = "c-list")]
    pub c_list: Option<String>,
    /// Full state-vector simulation (small N only).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub exact: Option<bool>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat `key = value` file of defaults; explicit flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_list<T: std::str::FromStr>(flag: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse().map_err(|_| Error::Domain(format!("--{flag}: cannot parse `{x}`"))))
        .collect()
}

impl Flags {
    /// Fills unset fields from `other`.
    pub fn or(self, other: Flags) -> Flags {
        Flags {
            n: self.n.or(other.n),
            m: self.m.or(other.m),
            c: self.c.or(other.c),
            ct: self.ct.or(other.ct),
            tmax: self.tmax.or(other.tmax),
            phi: self.phi.or(other.phi),
            outcomes: self.outcomes.or(other.outcomes),
            gamma_grid: self.gamma_grid.or(other.gamma_grid),
            n_list: self.n_list.or(other.n_list),
            c_list: self.c_list.or(other.c_list),
            exact: self.exact.or(other.exact),
            workers: self.workers.or(other.workers),
            seed: self.seed.or(other.seed),
            out: self.out.or(other.out),
            config: self.config.or(other.config),
        }
    }

    /// Parses a config file. Keys are flag names without the dashes.
    pub fn from_file(path: &Path) -> Result<Flags> {
        let text = std::fs::read_to_string(path)?;
        Self::from_key_values(&text)
    }

    pub fn from_key_values(text: &str) -> Result<Flags> {
        let mut args = vec!["config".to_string()];
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Domain(format!("config line {}: expected key = value", lineno + 1)))?;
            let key = key.trim().trim_start_matches("--").replace('_', "-");
            if key == "config" {
                return Err(Error::Domain("config files cannot include other config files".into()));
            }
            args.push(format!("--{key}={}", value.trim()));
        }
        #[derive(Parser)]
        struct FileFlags {
            #[command(flatten)]
            flags: Flags,
        }
        FileFlags::try_parse_from(args)
            .map(|f| f.flags)
            .map_err(|e| Error::Domain(format!("config file: {}", e.kind())))
    }

    pub fn into_run_config(self, command: Command) -> Result<RunConfig> {
        let flags = match &self.config {
            Some(path) => {
                let path = path.clone();
                self.or(Flags::from_file(&path)?)
            }
            None => self,
        };
        let mut cfg = RunConfig::new(command);
        if command == Command::GammaSweep {
            cfg.atoms = 30;
        }
        if let Some(v) = flags.n {
            cfg.atoms = v;
        }
        if let Some(v) = flags.m {
            cfg.nodes = v;
        }
        if let Some(v) = flags.c {
            cfg.window_constant = v;
        }
        if let Some(v) = flags.ct {
            cfg.time_grid_constant = v;
        }
        if let Some(v) = flags.tmax {
            cfg.t_max = v;
        }
        if let Some(v) = flags.phi {
            cfg.phi = v;
        }
        if let Some(v) = flags.outcomes {
            cfg.outcomes = if v.trim() == "all-N" {
                Outcomes::AllN
            } else {
                Outcomes::List(parse_list("outcomes", &v)?)
            };
        }
        if let Some(v) = flags.gamma_grid {
            cfg.gamma_grid = parse_list("gamma-grid", &v)?;
        }
        if let Some(v) = flags.n_list {
            cfg.n_list = parse_list("n-list", &v)?;
        }
        if let Some(v) = flags.c_list {
            cfg.c_list = parse_list("c-list", &v)?;
        }
        if let Some(v) = flags.exact {
            cfg.exact = v;
        }
        if let Some(v) = flags.workers {
            cfg.workers = v;
        }
        if let Some(v) = flags.seed {
            cfg.seed = v;
        }
        cfg.output = flags.out;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl CliCommand {
    pub fn into_run_config(self) -> Result<RunConfig> {
        let (command, flags) = match self {
            CliCommand::Trace(f) => (Command::Trace, f),
            CliCommand::Precision(f) => (Command::Precision, f),
            CliCommand::GammaSweep(f) => (Command::GammaSweep, f),
            CliCommand::Magic(f) => (Command::Magic, f),
            CliCommand::Selftest(f) => (Command::Selftest, f),
        };
        flags.into_run_config(command)
    }
}
