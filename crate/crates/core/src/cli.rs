//! Command-line front end: `run`, `adaptive`, `histogram`, `logistic` and
//! `analyze`.
//!
//! Settings are resolved in three layers: built-in defaults for the chosen
//! subcommand, then an optional `key = value` config file, then flags.

use std::ffi::OsString;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use crate::analysis::{spectral_report, BoundCheck, SpectralReport};
use crate::error::{Error, Result};
use crate::objectives::{
    logistic_optimum_oracle, make_logistic, make_quadratic, parse_key_values, quadratic_optimum, LogisticParams,
    SharedObjective,
};
use crate::penalty::{PenalizedProblem, StackedVector};
use crate::solver::{
    histogram_experiment, run, AdaptiveConfig, HistogramConfig, Method, RunTrace, Simulator, SolverConfig,
};
use crate::topology::{build_d_regular_cycle, build_lazy_cycle_weights, validate_weights, WeightMatrix};

/// Lower limit on the penalty parameter in adaptive runs.
pub const ADAPTIVE_MIN_ALPHA: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(name = "netnewton", version, about = "Network Newton and DGD experiments on simulated agent networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Fixed-penalty runs of each method on one quadratic instance.
    Run(Flags),
    /// Runs with the penalty divided by `eta` whenever all local gradients drop below `tol`.
    Adaptive(Flags),
    /// Exchanges-to-target over random instances and random degrees.
    Histogram(Flags),
    /// Fixed-penalty runs on a distributed logistic regression instance.
    Logistic(Flags),
    /// Dense checks of every eigenvalue bound along a short NN-K run.
    Analyze(Flags),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Number of agents.
    #[arg(long)]
    pub n: Option<usize>,
    /// Dimension of the decision variable.
    #[arg(long)]
    pub p: Option<usize>,
    /// Condition number exponent of the quadratic generator.
    #[arg(long)]
    pub xi: Option<u32>,
    /// Penalty parameter alpha.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Degree of the regular cycle.
    #[arg(long)]
    pub d: Option<usize>,
    /// Candidate degrees for the histogram, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub degrees: Option<Vec<usize>>,
    /// NN step size.
    #[arg(long)]
    pub eps: Option<f64>,
    /// NN orders, comma separated.
    #[arg(long = "K", value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    /// Methods, comma separated: `dgd`, `nn` (one per order in --K) or `nn-<K>`.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Iteration budget per run.
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,
    /// Relative-error target (stopping rule for histogram, summary column otherwise).
    #[arg(long)]
    pub target: Option<f64>,
    /// Gradient tolerance that triggers a penalty decrease.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Divisor applied to alpha at each decrease.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Initial alpha for adaptive runs.
    #[arg(long)]
    pub alpha0: Option<f64>,
    /// Number of histogram trials.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Samples per agent (logistic).
    #[arg(long)]
    pub q: Option<usize>,
    /// Class mean magnitude (logistic).
    #[arg(long)]
    pub mu: Option<f64>,
    /// Standard deviation of positive samples (logistic).
    #[arg(long = "sigma-plus")]
    pub sigma_plus: Option<f64>,
    /// Standard deviation of negative samples (logistic).
    #[arg(long = "sigma-minus")]
    pub sigma_minus: Option<f64>,
    /// Ridge regularization (logistic).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Perturb one weight so row 0 no longer sums to one (analyze).
    #[arg(long = "break-weights")]
    pub break_weights: bool,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Config file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Adaptive,
    Histogram,
    Logistic,
    Analyze,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Run => "run",
            Command::Adaptive => "adaptive",
            Command::Histogram => "histogram",
            Command::Logistic => "logistic",
            Command::Analyze => "analyze",
        })
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "run" => Ok(Command::Run),
            "adaptive" => Ok(Command::Adaptive),
            "histogram" => Ok(Command::Histogram),
            "logistic" => Ok(Command::Logistic),
            "analyze" => Ok(Command::Analyze),
            other => Err(Error::Parse(format!("unknown command `{other}`"))),
        }
    }
}

/// Fully resolved settings of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub command: Command,
    pub n: usize,
    pub p: usize,
    pub xi: u32,
    pub seed: u64,
    pub d: usize,
    pub degrees: Vec<usize>,
    pub alpha: f64,
    pub eps: f64,
    pub ks: Vec<usize>,
    pub methods: Vec<String>,
    pub max_iters: usize,
    pub target: f64,
    pub tol: f64,
    pub eta: f64,
    pub alpha0: f64,
    pub trials: usize,
    pub q: usize,
    pub mu: f64,
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    pub lambda: f64,
    pub break_weights: bool,
    pub out: PathBuf,
}

impl ExperimentSpec {
    pub fn defaults(command: Command) -> Self {
        let mut spec = Self {
            command,
            n: 100,
            p: 4,
            xi: 2,
            seed: 1,
            d: 4,
            degrees: vec![2, 4, 6, 8, 10],
            alpha: 1e-2,
            eps: 1.0,
            ks: vec![0, 1, 2],
            methods: vec!["dgd".into(), "nn".into()],
            max_iters: 2000,
            target: 1.9e-1,
            tol: 1e-3,
            eta: 10.0,
            alpha0: 1e-2,
            trials: 1000,
            q: 50,
            mu: 3.0,
            sigma_plus: 1.0,
            sigma_minus: 1.0,
            lambda: 1e-4,
            break_weights: false,
            out: PathBuf::from("out"),
        };
        match command {
            Command::Run => {}
            Command::Adaptive => spec.target = 1e-1,
            Command::Histogram => {
                spec.target = 1e-2;
                spec.max_iters = 20_000;
            }
            Command::Logistic => {
                spec.p = 10;
                spec.max_iters = 500;
            }
            Command::Analyze => {
                spec.n = 10;
                spec.ks = vec![2];
                spec.max_iters = 20;
            }
        }
        spec
    }

    /// Overrides fields with `key = value` pairs.
    pub fn apply_config(&mut self, text: &str) -> Result<()> {
        for (key, value) in parse_key_values(text)? {
            self.set(&key, &value)?;
        }
        Ok(())
    }

    /// Parses a complete config text, starting from the defaults of its
    /// `command` entry.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let command = parse_key_values(text)?
            .into_iter()
            .rev()
            .find(|(k, _)| k == "command")
            .ok_or_else(|| Error::Parse("missing key `command`".into()))?
            .1
            .parse()?;
        let mut spec = Self::defaults(command);
        spec.apply_config(text)?;
        Ok(spec)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
        where
            T::Err: fmt::Display,
        {
            value.parse().map_err(|e| Error::Parse(format!("key `{key}`: {e}")))
        }
        fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
        where
            T::Err: fmt::Display,
        {
            value.split(',').map(|v| parse(key, v.trim())).collect()
        }
        match key {
            "command" => {
                let command: Command = value.parse()?;
                if command != self.command {
                    return Err(Error::Parse(format!(
                        "config is for `{command}` but the subcommand is `{}`",
                        self.command
                    )));
                }
            }
            "n" => self.n = parse(key, value)?,
            "p" => self.p = parse(key, value)?,
            "xi" => self.xi = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "d" => self.d = parse(key, value)?,
            "degrees" => self.degrees = list(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "eps" => self.eps = parse(key, value)?,
            "K" => self.ks = list(key, value)?,
            "methods" => self.methods = list(key, value)?,
            "max_iters" => self.max_iters = parse(key, value)?,
            "target" => self.target = parse(key, value)?,
            "tol" => self.tol = parse(key, value)?,
            "eta" => self.eta = parse(key, value)?,
            "alpha0" => self.alpha0 = parse(key, value)?,
            "trials" => self.trials = parse(key, value)?,
            "q" => self.q = parse(key, value)?,
            "mu" => self.mu = parse(key, value)?,
            "sigma_plus" => self.sigma_plus = parse(key, value)?,
            "sigma_minus" => self.sigma_minus = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "break_weights" => self.break_weights = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            other => return Err(Error::Parse(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn apply_flags(&mut self, flags: &Flags) {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = &flags.$field { self.$field = v.clone(); })*
            };
        }
        take!(n, p, xi, seed, d, degrees, alpha, eps, methods, max_iters, target, tol, eta, alpha0, trials, q, mu,
              sigma_plus, sigma_minus, lambda, out);
        if let Some(k) = &flags.k {
            self.ks = k.clone();
        }
        if flags.break_weights {
            self.break_weights = true;
        }
    }

    /// Defaults, then the config file named in `flags`, then `flags`.
    pub fn resolve(command: Command, flags: &Flags) -> Result<Self> {
        let mut spec = Self::defaults(command);
        if let Some(path) = &flags.config {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Parse(format!("cannot read config {}: {e}", path.display())))?;
            spec.apply_config(&text)?;
        }
        spec.apply_flags(flags);
        spec.validate()?;
        Ok(spec)
    }

    /// Expands `nn` over the configured orders.
    pub fn resolved_methods(&self) -> Result<Vec<Method>> {
        let mut out = Vec::new();
        for m in &self.methods {
            let m = m.trim().to_ascii_lowercase();
            if m == "nn" {
                out.extend(self.ks.iter().map(|&k| Method::NetworkNewton { k }));
            } else {
                out.push(m.parse()?);
            }
        }
        let mut unique = Vec::new();
        for m in out {
            if !unique.contains(&m) {
                unique.push(m);
            }
        }
        Ok(unique)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n == 0 || self.p == 0 {
            return bad("n and p must be positive".into());
        }
        if !(self.alpha > 0.0) || !(self.alpha0 > 0.0) {
            return bad("alpha and alpha0 must be positive".into());
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return bad(format!("eps must lie in (0, 1], got {}", self.eps));
        }
        if !(self.target > 0.0) {
            return bad(format!("target must be positive, got {}", self.target));
        }
        if !(self.tol >= 0.0) || !(self.eta > 1.0) {
            return bad("need tol >= 0 and eta > 1".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.ks.is_empty() || self.methods.is_empty() || self.degrees.is_empty() {
            return bad("K, methods and degrees must be nonempty".into());
        }
        self.resolved_methods()?;
        Ok(())
    }

    /// Config text that [`ExperimentSpec::from_config_str`] reads back to an
    /// identical spec.
    pub fn to_config_string(&self) -> String {
        fn join<T: fmt::Display>(v: &[T]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        }
        let mut s = String::new();
        let _ = writeln!(s, "command = {}", self.command);
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "p = {}", self.p);
        let _ = writeln!(s, "xi = {}", self.xi);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "d = {}", self.d);
        let _ = writeln!(s, "degrees = {}", join(&self.degrees));
        let _ = writeln!(s, "alpha = {:?}", self.alpha);
        let _ = writeln!(s, "eps = {:?}", self.eps);
        let _ = writeln!(s, "K = {}", join(&self.ks));
        let _ = writeln!(s, "methods = {}", self.methods.join(","));
        let _ = writeln!(s, "max_iters = {}", self.max_iters);
        let _ = writeln!(s, "target = {:?}", self.target);
        let _ = writeln!(s, "tol = {:?}", self.tol);
        let _ = writeln!(s, "eta = {:?}", self.eta);
        let _ = writeln!(s, "alpha0 = {:?}", self.alpha0);
        let _ = writeln!(s, "trials = {}", self.trials);
        let _ = writeln!(s, "q = {}", self.q);
        let _ = writeln!(s, "mu = {:?}", self.mu);
        let _ = writeln!(s, "sigma_plus = {:?}", self.sigma_plus);
        let _ = writeln!(s, "sigma_minus = {:?}", self.sigma_minus);
        let _ = writeln!(s, "lambda = {:?}", self.lambda);
        let _ = writeln!(s, "break_weights = {}", self.break_weights);
        let _ = writeln!(s, "out = {}", self.out.display());
        s
    }

    fn logistic_params(&self) -> LogisticParams {
        LogisticParams {
            n: self.n,
            p: self.p,
            samples_per_agent: self.q,
            mu: self.mu,
            sigma_plus: self.sigma_plus,
            sigma_minus: self.sigma_minus,
            lambda: self.lambda,
            seed: self.seed,
        }
    }
}

/// What a command produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub report: String,
    /// Set when the command completed but found a numerical failure.
    pub numerical_failure: bool,
    /// Set when the command completed but rejected its input.
    pub config_failure: bool,
}

fn write_file(out: &mut Outcome, dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    out.files.push(path);
    Ok(())
}

fn method_file(prefix: &str, method: Method) -> String {
    format!("{prefix}_{}.csv", method.to_string().to_ascii_lowercase())
}

fn quadratic_problem(spec: &ExperimentSpec, alpha: f64) -> Result<(PenalizedProblem, DVector<f64>)> {
    let topology = build_d_regular_cycle(spec.n, spec.d)?;
    let weights = build_lazy_cycle_weights(&topology)?;
    let instance = make_quadratic(spec.n, spec.p, spec.xi, spec.seed)?;
    let x_star = quadratic_optimum(&instance);
    Ok((PenalizedProblem::new(topology, weights, instance.objectives(), alpha)?, x_star))
}

fn fmt_hit(hit: Option<usize>) -> String {
    hit.map_or("-".to_string(), |t| t.to_string())
}

fn run_methods(
    spec: &ExperimentSpec,
    problem: &PenalizedProblem,
    x_star: &DVector<f64>,
    prefix: &str,
    adaptive: bool,
    out: &mut Outcome,
) -> Result<()> {
    let _ = writeln!(
        out.report,
        "{:<6} {:>10} {:>12} {:>14} {:>12}",
        "method", "t(target)", "comm(target)", "final e_t", "final comm"
    );
    for method in spec.resolved_methods()? {
        let mut config = SolverConfig::new(method, if adaptive { spec.alpha0 } else { spec.alpha });
        config.epsilon = spec.eps;
        config.max_iters = spec.max_iters;
        if adaptive {
            config.adaptive =
                Some(AdaptiveConfig { tol: spec.tol, eta: spec.eta, min_alpha: ADAPTIVE_MIN_ALPHA, recompute_epsilon: false });
        }
        match run(problem, &config, None, Some(x_star)) {
            Ok(trace) => {
                write_file(out, &spec.out, &method_file(prefix, method), &trace.to_csv())?;
                let hit = trace.iterations_to_error(spec.target);
                let last = trace.last();
                let _ = writeln!(
                    out.report,
                    "{:<6} {:>10} {:>12} {:>14.6e} {:>12}",
                    method.to_string(),
                    fmt_hit(hit),
                    fmt_hit(hit.map(|t| t * method.rounds_per_iteration() as usize)),
                    last.relative_error,
                    last.comm
                );
            }
            Err(e) if e.is_numerical() => {
                let _ = writeln!(out.report, "{:<6} failed: {e}", method.to_string());
                out.numerical_failure = true;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

pub fn cmd_run(spec: &ExperimentSpec) -> Result<Outcome> {
    let mut out = Outcome::default();
    let (problem, x_star) = quadratic_problem(spec, spec.alpha)?;
    let _ = writeln!(out.report, "target e_t < {:e}", spec.target);
    run_methods(spec, &problem, &x_star, "trace", false, &mut out)?;
    Ok(out)
}

pub fn cmd_adaptive(spec: &ExperimentSpec) -> Result<Outcome> {
    let mut out = Outcome::default();
    let (problem, x_star) = quadratic_problem(spec, spec.alpha0)?;
    let _ = writeln!(
        out.report,
        "alpha0 = {:e}, tol = {:e}, eta = {}, target e_t < {:e}",
        spec.alpha0, spec.tol, spec.eta, spec.target
    );
    run_methods(spec, &problem, &x_star, "adaptive", true, &mut out)?;
    Ok(out)
}

pub fn cmd_histogram(spec: &ExperimentSpec) -> Result<Outcome> {
    let mut out = Outcome::default();
    let config = HistogramConfig {
        n: spec.n,
        p: spec.p,
        xi: spec.xi,
        alpha: spec.alpha,
        epsilon: spec.eps,
        degrees: spec.degrees.clone(),
        methods: spec.resolved_methods()?,
        target_error: spec.target,
        max_iters: spec.max_iters,
        trials: spec.trials,
        seed: spec.seed,
    };
    let result = histogram_experiment(&config)?;
    write_file(&mut out, &spec.out, "histogram.csv", &result.to_csv())?;
    let mut means = String::from("method,mean_exchanges,completed,censored\n");
    let _ = writeln!(out.report, "{} trials, target e_t < {:e}", spec.trials, spec.target);
    let _ = writeln!(out.report, "{:<6} {:>14} {:>10} {:>9}", "method", "mean exch.", "completed", "censored");
    for s in result.summary() {
        let _ = writeln!(means, "{},{:.16e},{},{}", s.method, s.mean_exchanges, s.completed, s.censored);
        let _ = writeln!(
            out.report,
            "{:<6} {:>14.1} {:>10} {:>9}",
            s.method.to_string(),
            s.mean_exchanges,
            s.completed,
            s.censored
        );
    }
    write_file(&mut out, &spec.out, "histogram_means.csv", &means)?;
    Ok(out)
}

pub fn cmd_logistic(spec: &ExperimentSpec) -> Result<Outcome> {
    let mut out = Outcome::default();
    let instance = make_logistic(&spec.logistic_params())?;
    let x_star = logistic_optimum_oracle(&instance)?;
    let objectives: Vec<SharedObjective> = instance.objectives();
    let topology = build_d_regular_cycle(spec.n, spec.d)?;
    let weights = build_lazy_cycle_weights(&topology)?;
    let problem = PenalizedProblem::new(topology, weights, objectives, spec.alpha)?;
    let mut traces: Vec<RunTrace> = Vec::new();
    for method in spec.resolved_methods()? {
        let mut config = SolverConfig::new(method, spec.alpha);
        config.epsilon = spec.eps;
        config.max_iters = spec.max_iters;
        match run(&problem, &config, None, Some(&x_star)) {
            Ok(trace) => {
                write_file(&mut out, &spec.out, &method_file("logistic", method), &trace.to_csv())?;
                traces.push(trace);
            }
            Err(e) if e.is_numerical() => {
                let _ = writeln!(out.report, "{:<6} failed: {e}", method.to_string());
                out.numerical_failure = true;
            }
            Err(e) => return Err(e),
        }
    }
    let reference = traces.iter().find(|t| t.method == Method::Dgd).map(|t| t.last().objective);
    let _ = writeln!(out.report, "{:<6} {:>16} {:>14}", "method", "final F", "t(F <= DGD)");
    for trace in &traces {
        let _ = writeln!(
            out.report,
            "{:<6} {:>16.6e} {:>14}",
            trace.method.to_string(),
            trace.last().objective,
            fmt_hit(reference.and_then(|f| trace.iterations_to_objective(f)))
        );
    }
    Ok(out)
}

fn suffixed(checks: Vec<BoundCheck>, t: usize) -> impl Iterator<Item = BoundCheck> {
    checks.into_iter().map(move |mut c| {
        c.name = format!("{} @t={t}", c.name);
        c
    })
}

pub fn cmd_analyze(spec: &ExperimentSpec) -> Result<Outcome> {
    let mut out = Outcome::default();
    let topology = build_d_regular_cycle(spec.n, spec.d)?;
    let mut weights = build_lazy_cycle_weights(&topology)?;
    if spec.break_weights {
        let mut entries = weights.entries().clone();
        entries[(0, 0)] += 0.1;
        weights = WeightMatrix::from_dense(entries)?;
    }
    let validation = validate_weights(&weights, &topology);
    if !validation.is_valid() {
        let mut csv = String::from("# weights = invalid\nbound,theoretical,measured,margin,pass\n");
        for v in &validation.violations {
            let _ = writeln!(csv, "\"weights: {v}\",nan,nan,nan,0");
        }
        write_file(&mut out, &spec.out, "report.csv", &csv)?;
        let _ = writeln!(out.report, "weight matrix rejected:\n{}", validation.summary());
        out.config_failure = true;
        return Ok(out);
    }
    let instance = make_quadratic(spec.n, spec.p, spec.xi, spec.seed)?;
    let problem = PenalizedProblem::new(topology, weights, instance.objectives(), spec.alpha)?;
    let y0 = StackedVector::zeros(spec.n, spec.p);
    let samples = [0, spec.max_iters / 2, spec.max_iters];
    for &k in &spec.ks {
        let mut sim = Simulator::new(&problem, None)?;
        let mut report: Option<SpectralReport> = None;
        for t in 0..=spec.max_iters {
            if samples.contains(&t) {
                let at = spectral_report(&problem, &sim.iterate(), &y0, k)?;
                match report.as_mut() {
                    None => {
                        let checks = suffixed(at.checks, t).collect();
                        report = Some(SpectralReport { constants: at.constants, checks });
                    }
                    Some(r) => r.checks.extend(suffixed(at.checks, t)),
                }
            }
            if t < spec.max_iters {
                sim.step_nn(k, spec.eps)?;
            }
        }
        let report = report.expect("t = 0 is always sampled");
        write_file(&mut out, &spec.out, &format!("report_K{k}.csv"), &report.to_csv())?;
        let _ = writeln!(out.report, "K = {k}\n{}", report.summary());
        if !report.all_pass() {
            out.numerical_failure = true;
        }
    }
    Ok(out)
}

/// Runs `spec` and writes the resolved config next to the outputs.
pub fn execute(spec: &ExperimentSpec) -> Result<Outcome> {
    fs::create_dir_all(&spec.out)?;
    let mut outcome = match spec.command {
        Command::Run => cmd_run(spec),
        Command::Adaptive => cmd_adaptive(spec),
        Command::Histogram => cmd_histogram(spec),
        Command::Logistic => cmd_logistic(spec),
        Command::Analyze => cmd_analyze(spec),
    }?;
    write_file(&mut outcome, &spec.out, "spec.cfg", &spec.to_config_string())?;
    Ok(outcome)
}

/// Exit code for an error: 2 for numerical failures, 1 otherwise.
pub fn exit_code(error: &Error) -> i32 {
    if error.is_numerical() {
        2
    } else {
        1
    }
}

/// Full command-line entry point; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let (command, flags) = match &cli.command {
        CliCommand::Run(f) => (Command::Run, f),
        CliCommand::Adaptive(f) => (Command::Adaptive, f),
        CliCommand::Histogram(f) => (Command::Histogram, f),
        CliCommand::Logistic(f) => (Command::Logistic, f),
        CliCommand::Analyze(f) => (Command::Analyze, f),
    };
    let result = ExperimentSpec::resolve(command, flags).and_then(|spec| execute(&spec));
    match result {
        Ok(outcome) => {
            print!("{}", outcome.report);
            if outcome.config_failure {
                1
            } else if outcome.numerical_failure {
                2
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
