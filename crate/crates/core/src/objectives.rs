//! Local objective functions held by the agents and the two experiment
//! families: random diagonal quadratics and synthetic logistic regression.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Maximum of `|s''(z)|` for the logistic sigmoid `s`, attained at
/// `z = ±ln(2 + √3)`.
pub const SIGMOID_SECOND_DERIVATIVE_MAX: f64 = 0.096_225_044_864_937_63;

/// Hessian eigenvalue bounds `m`, `M` and Hessian Lipschitz constant `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curvature {
    pub m: f64,
    pub big_m: f64,
    pub lipschitz: f64,
}

impl Curvature {
    /// Worst case over a collection: smallest `m`, largest `M` and `L`.
    pub fn combine<I: IntoIterator<Item = Curvature>>(items: I) -> Option<Curvature> {
        items.into_iter().reduce(|a, b| Curvature {
            m: a.m.min(b.m),
            big_m: a.big_m.max(b.big_m),
            lipschitz: a.lipschitz.max(b.lipschitz),
        })
    }
}

/// A twice differentiable, strongly convex function held by one agent.
pub trait LocalObjective: fmt::Debug + Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;
    /// Global curvature bounds valid at every point.
    fn curvature(&self) -> Curvature;
    /// Exact curvature when the Hessian is constant.
    fn exact_curvature(&self) -> Option<Curvature> {
        None
    }
}

pub type SharedObjective = Arc<dyn LocalObjective>;

/// `f(x) = ½ xᵀ diag(a) x + bᵀ x`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalQuadratic {
    pub diag: DVector<f64>,
    pub linear: DVector<f64>,
}

impl DiagonalQuadratic {
    pub fn new(diag: DVector<f64>, linear: DVector<f64>) -> Result<Self> {
        if diag.len() != linear.len() {
            return Err(Error::Dimension(format!(
                "diagonal has {} entries, linear term {}",
                diag.len(),
                linear.len()
            )));
        }
        if diag.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::InvalidParameter("quadratic diagonal must be positive".into()));
        }
        Ok(Self { diag, linear })
    }
}

impl LocalObjective for DiagonalQuadratic {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.component_mul(&self.diag).dot(x) + self.linear.dot(x)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        x.component_mul(&self.diag) + &self.linear
    }

    fn hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.diag)
    }

    fn curvature(&self) -> Curvature {
        Curvature { m: self.diag.min(), big_m: self.diag.max(), lipschitz: 0.0 }
    }

    fn exact_curvature(&self) -> Option<Curvature> {
        Some(self.curvature())
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(t))` without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// `f(x) = (reg/2)‖x‖² + Σ_l log(1 + exp(−v_l u_lᵀ x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticLoss {
    /// One sample per row.
    pub features: DMatrix<f64>,
    /// Labels in {−1, +1}.
    pub labels: Vec<f64>,
    pub reg: f64,
}

impl LogisticLoss {
    pub fn new(features: DMatrix<f64>, labels: Vec<f64>, reg: f64) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if !(reg > 0.0) {
            return Err(Error::InvalidParameter(format!("regularizer must be positive, got {reg}")));
        }
        if labels.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::InvalidParameter("labels must be +1 or -1".into()));
        }
        Ok(Self { features, labels, reg })
    }

    pub fn samples(&self) -> usize {
        self.labels.len()
    }

    /// `(1/(6√3)) Σ_l ‖u_l‖³`.
    pub fn lipschitz_bound(&self) -> f64 {
        self.features
            .row_iter()
            .map(|r| r.norm().powi(3))
            .sum::<f64>()
            * SIGMOID_SECOND_DERIVATIVE_MAX
    }
}

impl LocalObjective for LogisticLoss {
    fn dim(&self) -> usize {
        self.features.ncols()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let z = &self.features * x;
        let loss: f64 = z.iter().zip(&self.labels).map(|(&z, &v)| softplus(-v * z)).sum();
        0.5 * self.reg * x.norm_squared() + loss
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let z = &self.features * x;
        let coef = DVector::from_iterator(
            z.len(),
            z.iter().zip(&self.labels).map(|(&z, &v)| -v * sigmoid(-v * z)),
        );
        self.features.tr_mul(&coef) + x * self.reg
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let z = &self.features * x;
        let p = self.dim();
        let mut weighted = self.features.clone();
        for (mut row, &z) in weighted.row_iter_mut().zip(z.iter()) {
            let s = sigmoid(z);
            row *= s * (1.0 - s);
        }
        self.features.tr_mul(&weighted) + DMatrix::identity(p, p) * self.reg
    }

    fn curvature(&self) -> Curvature {
        // The sigmoid derivative peaks at zero, so the Hessian at the origin
        // dominates every other Hessian in the Loewner order.
        let h0 = self.hessian(&DVector::zeros(self.dim()));
        let big_m = SymmetricEigen::new(h0).eigenvalues.max();
        Curvature { m: self.reg, big_m, lipschitz: self.lipschitz_bound() }
    }
}

/// Seeded description of an experiment instance. Replaying the same spec
/// regenerates the same matrices bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub enum InstanceSpec {
    Quadratic { n: usize, p: usize, xi: u32, seed: u64 },
    Logistic(LogisticParams),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticParams {
    pub n: usize,
    pub p: usize,
    pub samples_per_agent: usize,
    pub mu: f64,
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl fmt::Display for InstanceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstanceSpec::Quadratic { n, p, xi, seed } => {
                writeln!(f, "kind = quadratic")?;
                writeln!(f, "n = {n}")?;
                writeln!(f, "p = {p}")?;
                writeln!(f, "xi = {xi}")?;
                writeln!(f, "seed = {seed}")
            }
            InstanceSpec::Logistic(lp) => {
                writeln!(f, "kind = logistic")?;
                writeln!(f, "n = {}", lp.n)?;
                writeln!(f, "p = {}", lp.p)?;
                writeln!(f, "q = {}", lp.samples_per_agent)?;
                writeln!(f, "mu = {:?}", lp.mu)?;
                writeln!(f, "sigma_plus = {:?}", lp.sigma_plus)?;
                writeln!(f, "sigma_minus = {:?}", lp.sigma_minus)?;
                writeln!(f, "lambda = {:?}", lp.lambda)?;
                writeln!(f, "seed = {}", lp.seed)
            }
        }
    }
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", lineno + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn lookup<T: FromStr>(pairs: &[(String, String)], key: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    let (_, v) = pairs
        .iter()
        .rev()
        .find(|(k, _)| k == key)
        .ok_or_else(|| Error::Parse(format!("missing key `{key}`")))?;
    v.parse().map_err(|e| Error::Parse(format!("key `{key}`: {e}")))
}

impl FromStr for InstanceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let pairs = parse_key_values(s)?;
        let kind: String = lookup(&pairs, "kind")?;
        match kind.as_str() {
            "quadratic" => Ok(InstanceSpec::Quadratic {
                n: lookup(&pairs, "n")?,
                p: lookup(&pairs, "p")?,
                xi: lookup(&pairs, "xi")?,
                seed: lookup(&pairs, "seed")?,
            }),
            "logistic" => Ok(InstanceSpec::Logistic(LogisticParams {
                n: lookup(&pairs, "n")?,
                p: lookup(&pairs, "p")?,
                samples_per_agent: lookup(&pairs, "q")?,
                mu: lookup(&pairs, "mu")?,
                sigma_plus: lookup(&pairs, "sigma_plus")?,
                sigma_minus: lookup(&pairs, "sigma_minus")?,
                lambda: lookup(&pairs, "lambda")?,
                seed: lookup(&pairs, "seed")?,
            })),
            other => Err(Error::Parse(format!("unknown instance kind `{other}`"))),
        }
    }
}

/// Per-agent diagonal quadratics with spread-out curvature.
#[derive(Debug, Clone)]
pub struct QuadraticInstance {
    pub xi: u32,
    pub seed: u64,
    pub locals: Vec<DiagonalQuadratic>,
}

impl QuadraticInstance {
    pub fn n(&self) -> usize {
        self.locals.len()
    }

    pub fn p(&self) -> usize {
        self.locals[0].dim()
    }

    pub fn spec(&self) -> InstanceSpec {
        InstanceSpec::Quadratic { n: self.n(), p: self.p(), xi: self.xi, seed: self.seed }
    }

    pub fn objectives(&self) -> Vec<SharedObjective> {
        self.locals.iter().map(|q| Arc::new(q.clone()) as SharedObjective).collect()
    }

    /// Condition number of `Σ_i A_i`.
    pub fn global_condition_number(&self) -> f64 {
        let sum = self.locals.iter().fold(DVector::zeros(self.p()), |acc, q| acc + &q.diag);
        sum.max() / sum.min()
    }
}

/// Draws `n` quadratics `½xᵀA_ix + b_iᵀx`: the first `p/2` diagonal entries
/// of `A_i` come uniformly from `{1, 10⁻¹, …, 10^-xi}`, the last `p/2` from
/// `{1, 10, …, 10^xi}`, and `b_i` is uniform on `[0, 1]^p`.
pub fn make_quadratic(n: usize, p: usize, xi: u32, seed: u64) -> Result<QuadraticInstance> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one agent".into()));
    }
    if p == 0 || p % 2 != 0 {
        return Err(Error::InvalidParameter(format!("dimension must be positive and even, got {p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = p / 2;
    let locals = (0..n)
        .map(|_| {
            let diag = DVector::from_fn(p, |k, _| {
                let exponent = rng.random_range(0..=xi) as i32;
                if k < half {
                    10f64.powi(-exponent)
                } else {
                    10f64.powi(exponent)
                }
            });
            let linear = DVector::from_fn(p, |_, _| rng.random::<f64>());
            DiagonalQuadratic { diag, linear }
        })
        .collect();
    Ok(QuadraticInstance { xi, seed, locals })
}

impl InstanceSpec {
    pub fn n(&self) -> usize {
        match self {
            InstanceSpec::Quadratic { n, .. } => *n,
            InstanceSpec::Logistic(lp) => lp.n,
        }
    }

    pub fn p(&self) -> usize {
        match self {
            InstanceSpec::Quadratic { p, .. } => *p,
            InstanceSpec::Logistic(lp) => lp.p,
        }
    }
}

/// `x* = −(Σ A_i)⁻¹ Σ b_i`.
pub fn quadratic_optimum(instance: &QuadraticInstance) -> DVector<f64> {
    let p = instance.p();
    let (a, b) = instance.locals.iter().fold(
        (DVector::zeros(p), DVector::zeros(p)),
        |(a, b): (DVector<f64>, DVector<f64>), q| (a + &q.diag, b + &q.linear),
    );
    -b.component_div(&a)
}

#[derive(Debug, Clone)]
pub struct LogisticInstance {
    pub params: LogisticParams,
    pub locals: Vec<LogisticLoss>,
}

impl LogisticInstance {
    pub fn objectives(&self) -> Vec<SharedObjective> {
        self.locals.iter().map(|q| Arc::new(q.clone()) as SharedObjective).collect()
    }

    pub fn spec(&self) -> InstanceSpec {
        InstanceSpec::Logistic(self.params)
    }
}

/// Synthetic two-class data spread across `n` agents with `q` samples each.
/// Each sample's label is a fair coin; features are Normal(±μ, σ±²) per
/// component. Agent `i` holds `(λ/2n)‖x‖² + Σ_l log(1 + exp(−v_il u_ilᵀx))`.
pub fn make_logistic(params: &LogisticParams) -> Result<LogisticInstance> {
    let LogisticParams { n, p, samples_per_agent: q, mu, sigma_plus, sigma_minus, lambda, seed } =
        *params;
    if n == 0 || p == 0 {
        return Err(Error::InvalidParameter("need n >= 1 and p >= 1".into()));
    }
    if q == 0 {
        return Err(Error::InvalidParameter("need at least one sample per agent".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let pos = Normal::new(mu, sigma_plus).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let neg = Normal::new(-mu, sigma_minus).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reg = lambda / n as f64;
    let mut locals = Vec::with_capacity(n);
    for _ in 0..n {
        let mut features = DMatrix::zeros(q, p);
        let mut labels = Vec::with_capacity(q);
        for l in 0..q {
            let positive = rng.random_bool(0.5);
            let dist = if positive { &pos } else { &neg };
            for k in 0..p {
                features[(l, k)] = dist.sample(&mut rng);
            }
            labels.push(if positive { 1.0 } else { -1.0 });
        }
        locals.push(LogisticLoss::new(features, labels, reg)?);
    }
    Ok(LogisticInstance { params: *params, locals })
}

/// Damped Newton on `Σ_i f_i` with Armijo backtracking, started from zero.
pub fn centralized_newton(objectives: &[SharedObjective], tol: f64, max_iters: usize) -> Result<DVector<f64>> {
    let p = objectives
        .first()
        .ok_or_else(|| Error::InvalidParameter("no objectives".into()))?
        .dim();
    let value = |x: &DVector<f64>| objectives.iter().map(|f| f.value(x)).sum::<f64>();
    let gradient = |x: &DVector<f64>| {
        objectives.iter().fold(DVector::zeros(p), |acc, f| acc + f.gradient(x))
    };
    let hessian = |x: &DVector<f64>| {
        objectives.iter().fold(DMatrix::zeros(p, p), |acc, f| acc + f.hessian(x))
    };
    let mut x = DVector::zeros(p);
    let mut g = gradient(&x);
    for _ in 0..max_iters {
        if g.norm() < tol {
            return Ok(x);
        }
        let step = hessian(&x)
            .cholesky()
            .ok_or_else(|| Error::Factorization("aggregate Hessian not positive definite".into()))?
            .solve(&(-&g));
        let f0 = value(&x);
        let slope = g.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &x + &step * t;
            if value(&cand) <= f0 + 1e-4 * t * slope {
                x = cand;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // Objective differences are below rounding; a full Newton step
            // still reduces the gradient near the optimum.
            let cand = &x + &step;
            let g_cand = gradient(&cand);
            if g_cand.norm() >= g.norm() {
                return Err(Error::OracleStalled { grad_norm: g.norm(), iterations: max_iters });
            }
            x = cand;
        }
        g = gradient(&x);
    }
    if g.norm() < tol {
        Ok(x)
    } else {
        Err(Error::OracleStalled { grad_norm: g.norm(), iterations: max_iters })
    }
}

/// Centralized minimizer of the logistic objective to `‖∇f‖ < 1e-10`.
pub fn logistic_optimum_oracle(instance: &LogisticInstance) -> Result<DVector<f64>> {
    centralized_newton(&instance.objectives(), 1e-10, 200)
}

/// Sampled curvature: extreme Hessian eigenvalues over `samples` and the
/// largest `‖ΔH‖₂ / ‖Δx‖` over sample pairs. Constant-Hessian objectives
/// report their exact values.
pub fn curvature_metadata(objective: &dyn LocalObjective, samples: &[DVector<f64>]) -> Result<Curvature> {
    if let Some(c) = objective.exact_curvature() {
        return Ok(c);
    }
    if samples.len() < 2 {
        return Err(Error::InvalidParameter("need at least two sample points".into()));
    }
    let hessians: Vec<DMatrix<f64>> = samples.iter().map(|x| objective.hessian(x)).collect();
    let mut m = f64::INFINITY;
    let mut big_m = f64::NEG_INFINITY;
    for h in &hessians {
        let ev = SymmetricEigen::new(h.clone()).eigenvalues;
        m = m.min(ev.min());
        big_m = big_m.max(ev.max());
    }
    let mut lipschitz: f64 = 0.0;
    for a in 0..samples.len() {
        for b in (a + 1)..samples.len() {
            let dx = (&samples[a] - &samples[b]).norm();
            if dx > 0.0 {
                lipschitz = lipschitz.max(spectral_norm_sym(&(&hessians[a] - &hessians[b])) / dx);
            }
        }
    }
    Ok(Curvature { m, big_m, lipschitz })
}

/// Spectral norm of a symmetric matrix.
pub fn spectral_norm_sym(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone()).eigenvalues.amax()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_gradient(f: &dyn LocalObjective, x: &DVector<f64>) -> DVector<f64> {
        let h = 1e-5 * (1.0 + x.norm());
        DVector::from_fn(x.len(), |k, _| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            (f.value(&xp) - f.value(&xm)) / (2.0 * h)
        })
    }

    fn fd_hessian(f: &dyn LocalObjective, x: &DVector<f64>) -> DMatrix<f64> {
        let h = 1e-5 * (1.0 + x.norm());
        let p = x.len();
        let mut out = DMatrix::zeros(p, p);
        for k in 0..p {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let col = (f.gradient(&xp) - f.gradient(&xm)) / (2.0 * h);
            out.set_column(k, &col);
        }
        out
    }

    fn rel(a: f64, b: f64) -> f64 {
        a / b.max(1e-12)
    }

    fn small_logistic(seed: u64) -> LogisticInstance {
        make_logistic(&LogisticParams {
            n: 4,
            p: 3,
            samples_per_agent: 8,
            mu: 1.0,
            sigma_plus: 1.0,
            sigma_minus: 1.0,
            lambda: 0.5,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn xi_zero_gives_identity() {
        let inst = make_quadratic(5, 4, 0, 3).unwrap();
        for q in &inst.locals {
            assert!(q.diag.iter().all(|&a| a == 1.0));
        }
        assert_eq!(inst.global_condition_number(), 1.0);
    }

    #[test]
    fn xi_two_draw_sets() {
        let inst = make_quadratic(200, 4, 2, 11).unwrap();
        let mut local_kappa_max: f64 = 0.0;
        for q in &inst.locals {
            for k in 0..2 {
                assert!([1.0, 0.1, 0.01].contains(&q.diag[k]));
                assert!([1.0, 10.0, 100.0].contains(&q.diag[k + 2]));
            }
            local_kappa_max = local_kappa_max.max(q.diag.max() / q.diag.min());
        }
        assert!((local_kappa_max - 1e4).abs() < 1e-6);
        let c = Curvature::combine(inst.locals.iter().map(|q| q.curvature())).unwrap();
        assert!(c.m >= 1e-2 && c.big_m <= 1e2 && c.lipschitz == 0.0);
    }

    #[test]
    fn odd_dimension_rejected() {
        assert!(make_quadratic(3, 3, 1, 0).is_err());
    }

    #[test]
    fn gradient_at_origin_is_linear_term() {
        let inst = make_quadratic(6, 4, 2, 99).unwrap();
        for q in &inst.locals {
            assert_eq!(q.gradient(&DVector::zeros(4)), q.linear);
            assert!(q.linear.iter().all(|&b| (0.0..1.0).contains(&b)));
        }
    }

    #[test]
    fn quadratic_reproducible_from_seed() {
        let a = make_quadratic(10, 4, 2, 5).unwrap();
        let b = make_quadratic(10, 4, 2, 5).unwrap();
        let c = make_quadratic(10, 4, 2, 6).unwrap();
        assert_eq!(a.locals, b.locals);
        assert_ne!(a.locals, c.locals);
    }

    #[test]
    fn optimum_single_agent_identity() {
        let inst = QuadraticInstance {
            xi: 0,
            seed: 0,
            locals: vec![DiagonalQuadratic::new(DVector::from_element(3, 1.0), DVector::from_element(3, 1.0)).unwrap()],
        };
        assert_eq!(quadratic_optimum(&inst), DVector::from_element(3, -1.0));
    }

    #[test]
    fn optimum_two_agents_averages_linear_terms() {
        let q1 = DiagonalQuadratic::new(DVector::from_element(3, 1.0), DVector::from_vec(vec![2.0, 0.0, 0.0])).unwrap();
        let q2 = DiagonalQuadratic::new(DVector::from_element(3, 1.0), DVector::zeros(3)).unwrap();
        let inst = QuadraticInstance { xi: 0, seed: 0, locals: vec![q1, q2] };
        assert_eq!(quadratic_optimum(&inst), DVector::from_vec(vec![-1.0, 0.0, 0.0]));
    }

    #[test]
    fn optimum_residual_small() {
        for seed in 0..10 {
            let inst = make_quadratic(50, 6, 3, seed).unwrap();
            let x = quadratic_optimum(&inst);
            let r = inst.locals.iter().fold(DVector::zeros(6), |acc, q| acc + q.gradient(&x));
            assert!(r.norm() < 1e-10, "residual {}", r.norm());
        }
    }

    #[test]
    fn newton_oracle_matches_closed_form_on_quadratics() {
        let inst = make_quadratic(20, 4, 2, 8).unwrap();
        let closed = quadratic_optimum(&inst);
        let newton = centralized_newton(&inst.objectives(), 1e-10, 50).unwrap();
        assert!((closed - newton).amax() < 1e-10);
    }

    #[test]
    fn logistic_value_at_zero() {
        let inst = small_logistic(1);
        for f in &inst.locals {
            let v = f.value(&DVector::zeros(3));
            assert!((v - 8.0 * 2f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn logistic_rejects_bad_lambda() {
        let mut params = small_logistic(0).params;
        params.lambda = 0.0;
        assert!(make_logistic(&params).is_err());
    }

    #[test]
    fn separable_setting_is_separable() {
        // mu = 3, sigma = 1: the hyperplane through the origin with normal
        // (1, …, 1) splits the classes with overwhelming probability.
        let inst = make_logistic(&LogisticParams {
            n: 20,
            p: 10,
            samples_per_agent: 50,
            mu: 3.0,
            sigma_plus: 1.0,
            sigma_minus: 1.0,
            lambda: 1e-4,
            seed: 2,
        })
        .unwrap();
        let ones = DVector::from_element(10, 1.0);
        for f in &inst.locals {
            let z = &f.features * &ones;
            for (z, v) in z.iter().zip(&f.labels) {
                assert!(z * v > 0.0);
            }
        }
    }

    #[test]
    fn noisy_setting_is_not_separable_along_mean() {
        let inst = make_logistic(&LogisticParams {
            n: 20,
            p: 10,
            samples_per_agent: 50,
            mu: 0.5,
            sigma_plus: 2.0,
            sigma_minus: 2.0,
            lambda: 1e-4,
            seed: 2,
        })
        .unwrap();
        let ones = DVector::from_element(10, 1.0);
        let wrong = inst
            .locals
            .iter()
            .flat_map(|f| {
                let z = &f.features * &ones;
                z.iter().zip(&f.labels).map(|(z, v)| (z * v <= 0.0) as usize).collect::<Vec<_>>()
            })
            .sum::<usize>();
        assert!(wrong > 0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let inst = small_logistic(4);
        let quad = make_quadratic(3, 4, 2, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let objs: Vec<SharedObjective> = inst.objectives().into_iter().chain(quad.objectives()).collect();
        for f in &objs {
            for _ in 0..10 {
                let x = DVector::from_fn(f.dim(), |_, _| rng.random_range(-2.0..2.0));
                let g = f.gradient(&x);
                let fd = fd_gradient(f.as_ref(), &x);
                assert!(rel((&g - &fd).norm(), g.norm()) < 1e-6);
            }
            for _ in 0..5 {
                let x = DVector::from_fn(f.dim(), |_, _| rng.random_range(-2.0..2.0));
                let h = f.hessian(&x);
                let fd = fd_hessian(f.as_ref(), &x);
                assert!(rel((&h - &fd).norm(), h.norm()) < 1e-4);
            }
        }
    }

    #[test]
    fn logistic_hessian_eigenvalues_in_range() {
        let inst = small_logistic(9);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for f in &inst.locals {
            let upper = f.reg + 0.25 * f.features.row_iter().map(|r| r.norm_squared()).sum::<f64>();
            for _ in 0..10 {
                let x = DVector::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
                let ev = SymmetricEigen::new(f.hessian(&x)).eigenvalues;
                assert!(ev.min() >= f.reg - 1e-12);
                assert!(ev.max() <= upper + 1e-12);
                assert!(ev.max() <= f.curvature().big_m + 1e-12);
            }
        }
    }

    #[test]
    fn quadratic_curvature_is_exact() {
        let q = DiagonalQuadratic::new(DVector::from_vec(vec![0.01, 100.0]), DVector::zeros(2)).unwrap();
        let c = curvature_metadata(&q, &[]).unwrap();
        assert_eq!(c, Curvature { m: 0.01, big_m: 100.0, lipschitz: 0.0 });
        assert_eq!(q.hessian(&DVector::from_vec(vec![1.0, 2.0])), q.hessian(&DVector::zeros(2)));
    }

    #[test]
    fn sigmoid_second_derivative_maximum() {
        // Oracle: dense grid search of |s''(z)| = |s(1-s)(1-2s)|.
        let best = (0..200_001)
            .map(|k| -10.0 + k as f64 * 1e-4)
            .map(|z| {
                let s = sigmoid(z);
                (s * (1.0 - s) * (1.0 - 2.0 * s)).abs()
            })
            .fold(0.0f64, f64::max);
        assert!((best - SIGMOID_SECOND_DERIVATIVE_MAX).abs() < 1e-9);
        assert!((SIGMOID_SECOND_DERIVATIVE_MAX - 1.0 / (6.0 * 3f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn logistic_sampled_lipschitz_below_bound() {
        let inst = small_logistic(12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for f in &inst.locals {
            let samples: Vec<_> = (0..12)
                .map(|_| DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0)))
                .collect();
            let c = curvature_metadata(f, &samples).unwrap();
            assert!(c.m >= f.reg - 1e-12);
            assert!(c.lipschitz <= f.lipschitz_bound() + 1e-9);
            assert!(c.lipschitz > 0.0);
        }
    }

    #[test]
    fn curvature_needs_two_samples() {
        let inst = small_logistic(1);
        assert!(curvature_metadata(&inst.locals[0], &[DVector::zeros(3)]).is_err());
    }

    #[test]
    fn huge_regularizer_drives_optimum_to_zero() {
        let mut params = small_logistic(5).params;
        params.lambda = 1e6;
        let inst = make_logistic(&params).unwrap();
        let x = logistic_optimum_oracle(&inst).unwrap();
        // ‖x*‖ ≤ ‖∇loss(0)‖ / λ.
        let g0 = inst.locals.iter().fold(DVector::zeros(3), |acc, f| acc + f.gradient(&DVector::zeros(3)));
        assert!(x.norm() <= g0.norm() / 1e6 * 1.01);
    }

    #[test]
    fn logistic_oracle_residual() {
        let inst = make_logistic(&LogisticParams {
            n: 10,
            p: 5,
            samples_per_agent: 20,
            mu: 3.0,
            sigma_plus: 1.0,
            sigma_minus: 1.0,
            lambda: 1e-2,
            seed: 21,
        })
        .unwrap();
        let x = logistic_optimum_oracle(&inst).unwrap();
        let g = inst.locals.iter().fold(DVector::zeros(5), |acc, f| acc + f.gradient(&x));
        assert!(g.norm() < 1e-10);
    }

    #[test]
    fn instance_spec_round_trip() {
        let q = make_quadratic(7, 4, 2, 123).unwrap().spec();
        assert_eq!(q.to_string().parse::<InstanceSpec>().unwrap(), q);
        let l = small_logistic(3).spec();
        let text = l.to_string();
        assert_eq!(text.parse::<InstanceSpec>().unwrap(), l);
        assert!("kind = cubic\n".parse::<InstanceSpec>().is_err());
        assert!("kind = quadratic\nn = 3\n".parse::<InstanceSpec>().is_err());
    }
}
