//! Round-synchronous simulator running DGD and NN-K as node-local protocols.
//!
//! Each agent only sees its own [`NodeState`], the static [`LocalView`] of
//! its weights and objective, and the messages its neighbors put in its
//! inbox. One call to [`Simulator::exchange`] is one communication round in
//! which every agent sends one p-vector to each neighbor.

use std::fmt;
use std::fmt::Write as _;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::relative_error;
use crate::error::{Error, Result};
use crate::objectives::{make_quadratic, quadratic_optimum, SharedObjective};
use crate::penalty::{PenalizedProblem, StackedVector};
use crate::topology::{build_d_regular_cycle, build_lazy_cycle_weights};

/// Relative error above which a run is declared divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Dgd,
    NetworkNewton { k: usize },
}

impl Method {
    /// Exchange rounds per iteration.
    pub fn rounds_per_iteration(self) -> u64 {
        match self {
            Method::Dgd => 1,
            Method::NetworkNewton { k } => k as u64 + 1,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Dgd => write!(f, "DGD"),
            Method::NetworkNewton { k } => write!(f, "NN-{k}"),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        if lower == "dgd" {
            return Ok(Method::Dgd);
        }
        lower
            .strip_prefix("nn-")
            .or_else(|| lower.strip_prefix("nn"))
            .and_then(|k| k.parse().ok())
            .map(|k| Method::NetworkNewton { k })
            .ok_or_else(|| Error::Parse(format!("unknown method `{s}`")))
    }
}

/// Penalty schedule: divide `α` by `eta` whenever every local gradient norm
/// drops to `tol` or below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveConfig {
    pub tol: f64,
    pub eta: f64,
    pub min_alpha: f64,
    /// Re-derive the theoretical step size after every change of `α`.
    pub recompute_epsilon: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    /// Stop at the first `t` with `e_t` strictly below the value.
    RelativeError(f64),
    /// Stop at the first `t` with `F(y_t)` at or below the value.
    Objective(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub epsilon: f64,
    pub alpha: f64,
    pub adaptive: Option<AdaptiveConfig>,
    pub max_iters: usize,
    pub target: Option<Target>,
    /// Evaluate `F(y_t)` for every record; off for bulk experiments.
    pub record_objective: bool,
    /// Stop once every `‖g_i‖` is at or below this value; the iterate has
    /// then converged and `e_t` can no longer move.
    pub stall_tol: Option<f64>,
}

impl SolverConfig {
    pub fn new(method: Method, alpha: f64) -> Self {
        Self {
            method,
            epsilon: 1.0,
            alpha,
            adaptive: None,
            max_iters: 1000,
            target: None,
            record_objective: true,
            stall_tol: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidParameter(format!("step size must lie in (0, 1], got {}", self.epsilon)));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {}", self.alpha)));
        }
        if let Some(a) = &self.adaptive {
            if !(a.tol >= 0.0) {
                return Err(Error::InvalidParameter(format!("tol must be nonnegative, got {}", a.tol)));
            }
            if !(a.eta > 1.0) {
                return Err(Error::InvalidParameter(format!("eta must exceed 1, got {}", a.eta)));
            }
            if !(a.min_alpha > 0.0) {
                return Err(Error::InvalidParameter("min_alpha must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Static knowledge of one agent: its weights and its objective.
#[derive(Debug, Clone)]
pub struct LocalView {
    pub id: usize,
    pub neighbors: Vec<usize>,
    pub self_weight: f64,
    /// Aligned with `neighbors`.
    pub neighbor_weights: Vec<f64>,
    pub objective: SharedObjective,
}

/// Mutable state of one agent.
#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: usize,
    pub x: DVector<f64>,
    /// Latest vector from each neighbor, aligned with `LocalView::neighbors`.
    pub inbox: Vec<(usize, DVector<f64>)>,
    pub d_current: DVector<f64>,
    pub g_local: DVector<f64>,
    d_factor: Option<Cholesky<f64, Dyn>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Payload {
    Iterate,
    Direction { order: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub round: u64,
    pub from: usize,
    pub to: usize,
    pub payload: Payload,
}

fn local_gradient(view: &LocalView, state: &NodeState, alpha: f64) -> DVector<f64> {
    let mut g = &state.x * (1.0 - view.self_weight);
    for ((_, xj), &w) in state.inbox.iter().zip(&view.neighbor_weights) {
        g.axpy(-w, xj, 1.0);
    }
    g.axpy(alpha, &view.objective.gradient(&state.x), 1.0);
    g
}

/// `Σ_j w_ij x_j − α∇f_i(x_i)`.
fn dgd_update(view: &LocalView, state: &NodeState, alpha: f64) -> DVector<f64> {
    let mut next = &state.x * view.self_weight;
    for ((_, xj), &w) in state.inbox.iter().zip(&view.neighbor_weights) {
        next.axpy(w, xj, 1.0);
    }
    next.axpy(-alpha, &view.objective.gradient(&state.x), 1.0);
    next
}

fn factor_d_block(view: &LocalView, state: &NodeState, alpha: f64) -> Result<Cholesky<f64, Dyn>> {
    let p = state.x.len();
    let d = view.objective.hessian(&state.x) * alpha
        + DMatrix::identity(p, p) * (2.0 * (1.0 - view.self_weight));
    d.cholesky()
        .ok_or_else(|| Error::Factorization(format!("D block of agent {} is not positive definite", view.id)))
}

/// `D_ii⁻¹((1 − w_ii)d_i + Σ_j w_ij d_j − g_i)` with neighbor directions
/// taken from the inbox.
fn nn_refine(view: &LocalView, state: &NodeState) -> DVector<f64> {
    let mut rhs = &state.d_current * (1.0 - view.self_weight) - &state.g_local;
    for ((_, dj), &w) in state.inbox.iter().zip(&view.neighbor_weights) {
        rhs.axpy(w, dj, 1.0);
    }
    state.d_factor.as_ref().expect("D block factored before refinement").solve(&rhs)
}

/// Agents plus the mailbox system.
#[derive(Debug, Clone)]
pub struct Simulator {
    views: Vec<LocalView>,
    states: Vec<NodeState>,
    /// `slot[i][s]` is the position of `i` in the inbox of its `s`-th neighbor.
    slot: Vec<Vec<usize>>,
    alpha: f64,
    rounds: u64,
    iteration: usize,
    audit: Option<Vec<Message>>,
}

impl Simulator {
    pub fn new(problem: &PenalizedProblem, init: Option<&StackedVector>) -> Result<Self> {
        let n = problem.n();
        let p = problem.p();
        let init = match init {
            Some(y) => {
                if y.n() != n || y.p() != p {
                    return Err(Error::Dimension("initial point does not match problem".into()));
                }
                y.clone()
            }
            None => StackedVector::zeros(n, p),
        };
        let topo = problem.topology();
        let w = problem.weights();
        let views: Vec<LocalView> = (0..n)
            .map(|i| LocalView {
                id: i,
                neighbors: topo.neighbors(i).to_vec(),
                self_weight: w.self_weight(i),
                neighbor_weights: topo.neighbors(i).iter().map(|&j| w.get(i, j)).collect(),
                objective: problem.objectives()[i].clone(),
            })
            .collect();
        let slot = (0..n)
            .map(|i| {
                topo.neighbors(i)
                    .iter()
                    .map(|&j| topo.neighbors(j).binary_search(&i).expect("symmetric adjacency"))
                    .collect()
            })
            .collect();
        let states = init
            .into_blocks()
            .into_iter()
            .enumerate()
            .map(|(i, x)| NodeState {
                id: i,
                inbox: views[i].neighbors.iter().map(|&j| (j, DVector::zeros(p))).collect(),
                x,
                d_current: DVector::zeros(p),
                g_local: DVector::zeros(p),
                d_factor: None,
            })
            .collect();
        Ok(Self { views, states, slot, alpha: problem.alpha(), rounds: 0, iteration: 0, audit: None })
    }

    /// Records every delivered message.
    pub fn with_audit(mut self) -> Self {
        self.audit = Some(Vec::new());
        self
    }

    pub fn audit_log(&self) -> Option<&[Message]> {
        self.audit.as_deref()
    }

    pub fn views(&self) -> &[LocalView] {
        &self.views
    }

    pub fn states(&self) -> &[NodeState] {
        &self.states
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn set_alpha(&mut self, alpha: f64) {
        self.alpha = alpha;
    }

    /// Communication rounds so far.
    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    pub fn iterate(&self) -> StackedVector {
        StackedVector::new(self.states.iter().map(|s| s.x.clone()).collect()).expect("consistent blocks")
    }

    pub fn max_gradient_norm(&self) -> f64 {
        self.states.iter().map(|s| s.g_local.norm()).fold(0.0, f64::max)
    }

    /// One round: every agent sends the selected vector to all neighbors.
    pub fn exchange(&mut self, payload: Payload) {
        self.rounds += 1;
        let outgoing: Vec<DVector<f64>> = self
            .states
            .iter()
            .map(|s| match payload {
                Payload::Iterate => s.x.clone(),
                Payload::Direction { .. } => s.d_current.clone(),
            })
            .collect();
        for (i, vector) in outgoing.into_iter().enumerate() {
            for (s, &j) in self.views[i].neighbors.iter().enumerate() {
                let entry = &mut self.states[j].inbox[self.slot[i][s]];
                debug_assert_eq!(entry.0, i);
                entry.1.copy_from(&vector);
                if let Some(log) = self.audit.as_mut() {
                    log.push(Message { round: self.rounds, from: i, to: j, payload });
                }
            }
        }
    }

    fn check_finite(&self) -> Result<()> {
        for s in &self.states {
            if s.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { agent: s.id, iteration: self.iteration });
            }
        }
        Ok(())
    }

    /// Exchange iterates and compute every `g_i` locally.
    pub fn exchange_and_gradient(&mut self) {
        self.exchange(Payload::Iterate);
        self.refresh_gradient();
    }

    /// Recompute `g_i` from the inbox under the current `α`; no messages.
    pub fn refresh_gradient(&mut self) {
        let alpha = self.alpha;
        for (view, state) in self.views.iter().zip(self.states.iter_mut()) {
            state.g_local = local_gradient(view, state, alpha);
        }
    }

    /// DGD update in consensus form; expects fresh iterates in the inboxes.
    pub fn dgd_update(&mut self) -> Result<()> {
        let alpha = self.alpha;
        let next: Vec<DVector<f64>> =
            self.views.iter().zip(&self.states).map(|(v, s)| dgd_update(v, s, alpha)).collect();
        for (state, x) in self.states.iter_mut().zip(next) {
            state.x = x;
        }
        self.iteration += 1;
        self.check_finite()
    }

    /// NN-K direction rounds and update; expects `g_local` to be current.
    pub fn nn_update(&mut self, k: usize, epsilon: f64) -> Result<()> {
        let alpha = self.alpha;
        for (view, state) in self.views.iter().zip(self.states.iter_mut()) {
            let factor = factor_d_block(view, state, alpha)?;
            state.d_current = -factor.solve(&state.g_local);
            state.d_factor = Some(factor);
        }
        for order in 0..k {
            self.exchange(Payload::Direction { order });
            let next: Vec<DVector<f64>> =
                self.views.iter().zip(&self.states).map(|(v, s)| nn_refine(v, s)).collect();
            for (state, d) in self.states.iter_mut().zip(next) {
                state.d_current = d;
            }
        }
        for state in &mut self.states {
            state.x.axpy(epsilon, &state.d_current, 1.0);
        }
        self.iteration += 1;
        self.check_finite()
    }

    /// One DGD iteration (one round).
    pub fn step_dgd(&mut self) -> Result<()> {
        self.exchange_and_gradient();
        self.dgd_update()
    }

    /// One NN-K iteration (`K + 1` rounds).
    pub fn step_nn(&mut self, k: usize, epsilon: f64) -> Result<()> {
        self.exchange_and_gradient();
        self.nn_update(k, epsilon)
    }

    /// Applies one step of `method` after gradients are current.
    fn update(&mut self, method: Method, epsilon: f64) -> Result<()> {
        match method {
            Method::Dgd => self.dgd_update(),
            Method::NetworkNewton { k } => self.nn_update(k, epsilon),
        }
    }

    fn relative_error_to(&self, x_star: &DVector<f64>) -> f64 {
        let denom = x_star.norm_squared();
        self.states.iter().map(|s| (&s.x - x_star).norm_squared()).sum::<f64>() / denom / self.states.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    /// `NaN` when no reference optimum was supplied.
    pub relative_error: f64,
    /// `NaN` when objective recording is off.
    pub objective: f64,
    pub grad_inf: f64,
    pub alpha: f64,
    pub comm: u64,
    /// `α` was reduced at this iteration.
    pub alpha_changed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    TargetReached,
    MaxIters,
    AlphaFloor,
    Stalled,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::TargetReached => "target reached",
            Termination::MaxIters => "max iterations",
            Termination::AlphaFloor => "alpha floor",
            Termination::Stalled => "stalled",
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub method: Method,
    pub records: Vec<TraceRecord>,
    pub final_y: StackedVector,
    pub termination: Termination,
}

impl RunTrace {
    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("trace has at least one record")
    }

    /// First `t` with `e_t < target`.
    pub fn iterations_to_error(&self, target: f64) -> Option<usize> {
        self.records.iter().find(|r| r.relative_error < target).map(|r| r.t)
    }

    /// First `t` with `F(y_t) <= target`.
    pub fn iterations_to_objective(&self, target: f64) -> Option<usize> {
        self.records.iter().find(|r| r.objective <= target).map(|r| r.t)
    }

    pub fn record_at(&self, t: usize) -> Option<&TraceRecord> {
        self.records.iter().find(|r| r.t == t)
    }

    pub fn alpha_changes(&self) -> Vec<usize> {
        self.records.iter().filter(|r| r.alpha_changed).map(|r| r.t).collect()
    }

    pub const CSV_HEADER: &'static str = "t,e_t,F,grad_inf,alpha,comm";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.t, r.relative_error, r.objective, r.grad_inf, r.alpha, r.comm
            );
        }
        out
    }
}

/// Runs `config.method` from `init` (zeros by default). `reference` is the
/// optimum `x*` used for `e_t`.
pub fn run(
    problem: &PenalizedProblem,
    config: &SolverConfig,
    init: Option<&StackedVector>,
    reference: Option<&DVector<f64>>,
) -> Result<RunTrace> {
    config.validate()?;
    if let Some(x) = reference {
        if x.len() != problem.p() {
            return Err(Error::Dimension("reference optimum has wrong dimension".into()));
        }
        if x.norm() == 0.0 {
            return Err(Error::InvalidParameter("reference optimum is zero; relative error undefined".into()));
        }
    }
    if matches!(config.target, Some(Target::RelativeError(_))) && reference.is_none() {
        return Err(Error::InvalidParameter("relative-error target needs a reference optimum".into()));
    }
    let mut problem = problem.with_alpha(config.alpha)?;
    let mut sim = Simulator::new(&problem, init)?;
    let mut epsilon = config.epsilon;
    let mut records = Vec::new();
    let mut termination = Termination::MaxIters;

    for t in 0..=config.max_iters {
        let comm = sim.rounds();
        sim.exchange_and_gradient();
        let mut alpha_changed = false;
        if let Some(adaptive) = &config.adaptive {
            if sim.max_gradient_norm() <= adaptive.tol {
                let next_alpha = sim.alpha() / adaptive.eta;
                if next_alpha < adaptive.min_alpha {
                    termination = Termination::AlphaFloor;
                }
                if termination != Termination::AlphaFloor {
                    sim.set_alpha(next_alpha);
                    sim.refresh_gradient();
                    problem = problem.with_alpha(next_alpha)?;
                    alpha_changed = true;
                    if adaptive.recompute_epsilon {
                        if let Method::NetworkNewton { k } = config.method {
                            epsilon = crate::analysis::theoretical_stepsize(&problem, &sim.iterate(), k)?.epsilon;
                        }
                    }
                }
            }
        }
        let relative_error = reference.map_or(f64::NAN, |x| sim.relative_error_to(x));
        if relative_error > DIVERGENCE_THRESHOLD || relative_error.is_nan() && reference.is_some() {
            return Err(Error::Diverged { iteration: t, error: relative_error });
        }
        let objective = if config.record_objective { problem.penalized_value(&sim.iterate())? } else { f64::NAN };
        records.push(TraceRecord {
            t,
            relative_error,
            objective,
            grad_inf: sim.max_gradient_norm(),
            alpha: sim.alpha(),
            comm,
            alpha_changed,
        });
        if termination == Termination::AlphaFloor {
            break;
        }
        let reached = match config.target {
            Some(Target::RelativeError(e)) => relative_error < e,
            Some(Target::Objective(f)) => objective <= f,
            None => false,
        };
        if reached {
            termination = Termination::TargetReached;
            break;
        }
        if config.stall_tol.is_some_and(|tol| sim.max_gradient_norm() <= tol) {
            termination = Termination::Stalled;
            break;
        }
        if t == config.max_iters {
            break;
        }
        sim.update(config.method, epsilon)?;
    }
    Ok(RunTrace { method: config.method, records, final_y: sim.iterate(), termination })
}

/// [`run`] with the adaptive penalty schedule, which must be configured.
pub fn run_adaptive(
    problem: &PenalizedProblem,
    config: &SolverConfig,
    init: Option<&StackedVector>,
    reference: Option<&DVector<f64>>,
) -> Result<RunTrace> {
    if config.adaptive.is_none() {
        return Err(Error::InvalidParameter("adaptive run needs tol and eta".into()));
    }
    run(problem, config, init, reference)
}

/// `e_t = (1/n) Σ ‖x_i − x*‖² / ‖x*‖²` evaluated on a stacked iterate.
pub fn trace_relative_error(y: &StackedVector, x_star: &DVector<f64>) -> Result<f64> {
    relative_error(y, x_star)
}

/// Gradient level at which a histogram run that has not hit the target is
/// declared censored.
pub const HISTOGRAM_STALL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramConfig {
    pub n: usize,
    pub p: usize,
    pub xi: u32,
    pub alpha: f64,
    pub epsilon: f64,
    /// Candidate degrees, drawn uniformly per trial.
    pub degrees: Vec<usize>,
    pub methods: Vec<Method>,
    pub target_error: f64,
    pub max_iters: usize,
    pub trials: usize,
    pub seed: u64,
}

impl HistogramConfig {
    pub fn standard(trials: usize, seed: u64) -> Self {
        Self {
            n: 100,
            p: 4,
            xi: 2,
            alpha: 1e-2,
            epsilon: 1.0,
            degrees: vec![2, 4, 6, 8, 10],
            methods: vec![
                Method::Dgd,
                Method::NetworkNewton { k: 0 },
                Method::NetworkNewton { k: 1 },
                Method::NetworkNewton { k: 2 },
            ],
            target_error: 1e-2,
            max_iters: 20_000,
            trials,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramRow {
    pub trial: usize,
    pub method: Method,
    pub d: usize,
    /// Exchanges when the target was hit, or spent so far when censored.
    pub exchanges: u64,
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub mean_exchanges: f64,
    pub completed: usize,
    pub censored: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramResult {
    pub rows: Vec<HistogramRow>,
}

impl HistogramResult {
    pub fn methods(&self) -> Vec<Method> {
        let mut out: Vec<Method> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.method) {
                out.push(r.method);
            }
        }
        out
    }

    /// Mean exchanges over uncensored trials.
    pub fn summary(&self) -> Vec<MethodSummary> {
        self.methods()
            .into_iter()
            .map(|method| {
                let done: Vec<u64> = self
                    .rows
                    .iter()
                    .filter(|r| r.method == method && !r.censored)
                    .map(|r| r.exchanges)
                    .collect();
                let censored = self.rows.iter().filter(|r| r.method == method && r.censored).count();
                let mean = if done.is_empty() { f64::NAN } else { done.iter().sum::<u64>() as f64 / done.len() as f64 };
                MethodSummary { method, mean_exchanges: mean, completed: done.len(), censored }
            })
            .collect()
    }

    /// Equal-width bins over uncensored counts: `(lower, upper, count)`.
    pub fn bins(&self, method: Method, bins: usize) -> Vec<(f64, f64, usize)> {
        let values: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.method == method && !r.censored)
            .map(|r| r.exchanges as f64)
            .collect();
        if values.is_empty() || bins == 0 {
            return Vec::new();
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi == lo {
            return vec![(lo, hi, values.len())];
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for v in values {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(b, c)| (lo + b as f64 * width, lo + (b + 1) as f64 * width, c))
            .collect()
    }

    /// Fraction of trials where every NN-K variant used fewer exchanges than DGD.
    pub fn nn_beats_dgd_fraction(&self) -> f64 {
        let trials: Vec<usize> = {
            let mut t: Vec<usize> = self.rows.iter().map(|r| r.trial).collect();
            t.dedup();
            t
        };
        let wins = trials
            .iter()
            .filter(|&&trial| {
                let rows: Vec<&HistogramRow> = self.rows.iter().filter(|r| r.trial == trial).collect();
                let dgd = rows.iter().find(|r| r.method == Method::Dgd);
                match dgd {
                    Some(dgd) => rows
                        .iter()
                        .filter(|r| r.method != Method::Dgd)
                        .all(|r| !r.censored && (dgd.censored || r.exchanges < dgd.exchanges)),
                    None => false,
                }
            })
            .count();
        wins as f64 / trials.len().max(1) as f64
    }

    pub const CSV_HEADER: &'static str = "trial,method,d,exchanges,censored";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{}", r.trial, r.method, r.d, r.exchanges, r.censored as u8);
        }
        out
    }
}

/// Per-trial seed and degree from `(master seed, trial index)`.
pub fn trial_draw(seed: u64, trial: usize, degrees: &[usize]) -> (u64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    let instance_seed = rng.random::<u64>();
    let d = degrees[rng.random_range(0..degrees.len())];
    (instance_seed, d)
}

fn histogram_trial(config: &HistogramConfig, trial: usize) -> Result<Vec<HistogramRow>> {
    let (instance_seed, d) = trial_draw(config.seed, trial, &config.degrees);
    let topology = build_d_regular_cycle(config.n, d)?;
    let weights = build_lazy_cycle_weights(&topology)?;
    let instance = make_quadratic(config.n, config.p, config.xi, instance_seed)?;
    let x_star = quadratic_optimum(&instance);
    let problem = PenalizedProblem::new(topology, weights, instance.objectives(), config.alpha)?;
    config
        .methods
        .iter()
        .map(|&method| {
            let solver = SolverConfig {
                method,
                epsilon: config.epsilon,
                alpha: config.alpha,
                adaptive: None,
                max_iters: config.max_iters,
                target: Some(Target::RelativeError(config.target_error)),
                record_objective: false,
                stall_tol: Some(HISTOGRAM_STALL_TOL),
            };
            let trace = run(&problem, &solver, None, Some(&x_star))?;
            let last = trace.last();
            let censored = trace.termination != Termination::TargetReached;
            Ok(HistogramRow {
                trial,
                method,
                d,
                exchanges: last.t as u64 * method.rounds_per_iteration(),
                censored,
            })
        })
        .collect()
}

/// Runs every method on `trials` fresh instances with random even degree and
/// records the exchanges needed to reach `target_error`.
pub fn histogram_experiment(config: &HistogramConfig) -> Result<HistogramResult> {
    if config.trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    if config.degrees.is_empty() {
        return Err(Error::InvalidParameter("need at least one candidate degree".into()));
    }
    let per_trial: Vec<Vec<HistogramRow>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| histogram_trial(config, trial))
        .collect::<Result<_>>()?;
    Ok(HistogramResult { rows: per_trial.into_iter().flatten().collect() })
}
