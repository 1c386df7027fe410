//! Rate constants of NN-K and dense numerical checks of the eigenvalue
//! bounds they rest on.
//!
//! Every check assembles the relevant `np × np` matrices, runs a symmetric
//! eigensolve, and records the extreme eigenvalue next to its theoretical
//! bound. A bound passes when the measured value is inside it up to
//! [`SLACK`].

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::objectives::{spectral_norm_sym, Curvature};
use crate::penalty::{sym_power, PenalizedProblem, StackedVector};
use crate::solver::RunTrace;

/// Absolute floating-point headroom granted to every eigenvalue bound.
pub const SLACK: f64 = 1e-9;

/// Entrywise tolerance for the `I − HĤ⁻¹ = (BD⁻¹)^{K+1}` identity.
pub const IDENTITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateConstants {
    /// Bound on the eigenvalues of `D^{−1/2} B D^{−1/2}`.
    pub rho: f64,
    /// Lower eigenvalue bound of the approximate Hessian inverse.
    pub lambda: f64,
    /// Upper eigenvalue bound of the approximate Hessian inverse.
    pub big_lambda: f64,
}

/// `ρ = 2(1−δ)/(2(1−δ)+αm)`, `λ = 1/(2(1−δ)+αM)`,
/// `Λ = (1−ρ^{K+1})/((1−ρ)(2(1−Δ)+αm))`.
pub fn constants(delta: f64, big_delta: f64, m: f64, big_m: f64, alpha: f64, k: usize) -> Result<RateConstants> {
    if !(0.0 <= delta && delta <= big_delta && big_delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= delta <= Delta < 1, got delta = {delta}, Delta = {big_delta}"
        )));
    }
    if !(0.0 < m && m <= big_m && big_m.is_finite()) {
        return Err(Error::InvalidParameter(format!("need 0 < m <= M < inf, got m = {m}, M = {big_m}")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let spread = 2.0 * (1.0 - delta);
    let rho = spread / (spread + alpha * m);
    let lambda = 1.0 / (spread + alpha * big_m);
    let big_lambda = (1.0 - rho.powi(k as i32 + 1)) / ((1.0 - rho) * (2.0 * (1.0 - big_delta) + alpha * m));
    Ok(RateConstants { rho, lambda, big_lambda })
}

/// One bound: `measured` against `theoretical` in the stated direction.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub name: String,
    pub theoretical: f64,
    pub measured: f64,
    /// Distance inside the bound including [`SLACK`]; negative means violated.
    pub margin: f64,
    pub pass: bool,
}

impl BoundCheck {
    pub fn upper(name: impl Into<String>, theoretical: f64, measured: f64) -> Self {
        Self::with_slack(name, theoretical, measured, SLACK, true)
    }

    pub fn lower(name: impl Into<String>, theoretical: f64, measured: f64) -> Self {
        Self::with_slack(name, theoretical, measured, SLACK, false)
    }

    fn with_slack(name: impl Into<String>, theoretical: f64, measured: f64, slack: f64, upper: bool) -> Self {
        let margin = if upper { theoretical + slack - measured } else { measured - (theoretical - slack) };
        Self { name: name.into(), theoretical, measured, margin, pass: margin >= 0.0 }
    }
}

/// Constants plugged into the bounds, and where `m`, `M`, `L` came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportConstants {
    pub delta: f64,
    pub big_delta: f64,
    pub m: f64,
    pub big_m: f64,
    pub lipschitz: f64,
    pub curvature_source: &'static str,
    pub alpha: f64,
    pub k: usize,
    pub rho: f64,
    pub lambda: f64,
    pub big_lambda: f64,
    pub zeta: Option<f64>,
    pub epsilon_theory: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub constants: ReportConstants,
    pub checks: Vec<BoundCheck>,
}

impl SpectralReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&BoundCheck> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn min_margin(&self) -> f64 {
        self.checks.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min)
    }

    /// `# key = value` header lines followed by
    /// `bound,theoretical,measured,margin,pass` rows.
    pub fn to_csv(&self) -> String {
        let c = &self.constants;
        let mut out = String::new();
        let opt = |v: Option<f64>| v.map_or("nan".to_string(), |v| format!("{v:.16e}"));
        let _ = writeln!(out, "# delta = {:.16e}", c.delta);
        let _ = writeln!(out, "# Delta = {:.16e}", c.big_delta);
        let _ = writeln!(out, "# m = {:.16e}", c.m);
        let _ = writeln!(out, "# M = {:.16e}", c.big_m);
        let _ = writeln!(out, "# L = {:.16e}", c.lipschitz);
        let _ = writeln!(out, "# curvature_source = {}", c.curvature_source);
        let _ = writeln!(out, "# alpha = {:.16e}", c.alpha);
        let _ = writeln!(out, "# K = {}", c.k);
        let _ = writeln!(out, "# rho = {:.16e}", c.rho);
        let _ = writeln!(out, "# lambda = {:.16e}", c.lambda);
        let _ = writeln!(out, "# Lambda = {:.16e}", c.big_lambda);
        let _ = writeln!(out, "# zeta = {}", opt(c.zeta));
        let _ = writeln!(out, "# epsilon_theory = {}", opt(c.epsilon_theory));
        out.push_str("bound,theoretical,measured,margin,pass\n");
        for b in &self.checks {
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{}",
                b.name, b.theoretical, b.measured, b.margin, b.pass as u8
            );
        }
        out
    }

    pub fn summary(&self) -> String {
        let c = &self.constants;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "alpha = {:e}  K = {}  delta = {:.4}  Delta = {:.4}  m = {:e}  M = {:e}  L = {:e} ({})",
            c.alpha, c.k, c.delta, c.big_delta, c.m, c.big_m, c.lipschitz, c.curvature_source
        );
        let _ = writeln!(out, "rho = {:.9}  lambda = {:.6e}  Lambda = {:.6e}", c.rho, c.lambda, c.big_lambda);
        if let (Some(z), Some(e)) = (c.zeta, c.epsilon_theory) {
            let _ = writeln!(out, "zeta = {z:.6e}  epsilon = {e:.6e}");
        }
        for b in &self.checks {
            let _ = writeln!(
                out,
                "[{}] {:<28} bound {:>14.6e}  measured {:>14.6e}  margin {:>11.3e}",
                if b.pass { "PASS" } else { "FAIL" },
                b.name,
                b.theoretical,
                b.measured,
                b.margin
            );
        }
        out
    }
}

fn extreme_eigenvalues(a: &DMatrix<f64>) -> (f64, f64) {
    let sym = (a + a.transpose()) * 0.5;
    let ev = SymmetricEigen::new(sym).eigenvalues;
    (ev.min(), ev.max())
}

fn curvature_source(problem: &PenalizedProblem) -> &'static str {
    if problem.objectives().iter().all(|f| f.exact_curvature().is_some()) {
        "exact"
    } else {
        "analytic bound"
    }
}

pub fn problem_constants(problem: &PenalizedProblem, k: usize) -> Result<(Curvature, RateConstants)> {
    let c = problem.curvature();
    let w = problem.weights();
    Ok((c, constants(w.delta(), w.big_delta(), c.m, c.big_m, problem.alpha(), k)?))
}

/// Eigenvalue bounds on `H`, `D` and `B`.
pub fn check_hessian_bounds(problem: &PenalizedProblem, y: &StackedVector) -> Result<Vec<BoundCheck>> {
    let c = problem.curvature();
    let w = problem.weights();
    let alpha = problem.alpha();
    let (delta, big_delta) = (w.delta(), w.big_delta());
    let split = problem.splitting_blocks(y)?;
    let (h_lo, h_hi) = extreme_eigenvalues(&problem.dense_hessian(y)?);
    let (d_lo, d_hi) = extreme_eigenvalues(&split.dense_d());
    let (b_lo, b_hi) = extreme_eigenvalues(&split.dense_b());
    Ok(vec![
        BoundCheck::lower("H lower", alpha * c.m, h_lo),
        BoundCheck::upper("H upper", 2.0 * (1.0 - delta) + alpha * c.big_m, h_hi),
        BoundCheck::lower("D lower", 2.0 * (1.0 - big_delta) + alpha * c.m, d_lo),
        BoundCheck::upper("D upper", 2.0 * (1.0 - delta) + alpha * c.big_m, d_hi),
        BoundCheck::lower("B lower", 0.0, b_lo),
        BoundCheck::upper("B upper", 2.0 * (1.0 - delta), b_hi),
    ])
}

/// Eigenvalues of `D^{−1/2} B D^{−1/2}` lie in `[0, ρ]`.
pub fn check_dbd_bound(problem: &PenalizedProblem, y: &StackedVector) -> Result<Vec<BoundCheck>> {
    let (_, rc) = problem_constants(problem, 0)?;
    let split = problem.splitting_blocks(y)?;
    let d_inv_sqrt = sym_power(&split.dense_d(), -0.5)?;
    let (lo, hi) = extreme_eigenvalues(&(&d_inv_sqrt * split.dense_b() * &d_inv_sqrt));
    Ok(vec![BoundCheck::lower("DBD lower", 0.0, lo), BoundCheck::upper("DBD upper (rho)", rc.rho, hi)])
}

/// Largest eigenvalue of `D^{−1/2} B D^{−1/2}`.
pub fn dbd_max_eigenvalue(problem: &PenalizedProblem, y: &StackedVector) -> Result<f64> {
    let split = problem.splitting_blocks(y)?;
    let d_inv_sqrt = sym_power(&split.dense_d(), -0.5)?;
    Ok(extreme_eigenvalues(&(&d_inv_sqrt * split.dense_b() * &d_inv_sqrt)).1)
}

/// `E = I − Ĥ^{−1/2} H Ĥ^{−1/2}` for an arbitrary approximate inverse.
pub fn error_matrix(h: &DMatrix<f64>, approx_inverse: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let s = sym_power(approx_inverse, 0.5)?;
    let np = h.nrows();
    Ok(DMatrix::identity(np, np) - &s * h * &s)
}

/// Eigenvalues of the error matrix lie in `[0, ρ^{K+1}]`, and
/// `I − HĤ⁻¹ = (BD⁻¹)^{K+1}` holds entrywise.
pub fn check_error_matrix(problem: &PenalizedProblem, y: &StackedVector, k: usize) -> Result<Vec<BoundCheck>> {
    let (_, rc) = problem_constants(problem, k)?;
    let h = problem.dense_hessian(y)?;
    let approx = problem.dense_approx_inverse(y, k)?;
    let (lo, hi) = extreme_eigenvalues(&error_matrix(&h, &approx)?);

    let split = problem.splitting_blocks(y)?;
    let d = split.dense_d();
    let d_inv = d.clone().try_inverse().ok_or_else(|| Error::Factorization("D is singular".into()))?;
    let bd_inv = split.dense_b() * d_inv;
    let np = h.nrows();
    let mut power = DMatrix::identity(np, np);
    for _ in 0..=k {
        power = &power * &bd_inv;
    }
    let lhs = DMatrix::identity(np, np) - &h * &approx;
    let identity_gap = (lhs - power).amax();
    Ok(vec![
        BoundCheck::lower("E lower", 0.0, lo),
        BoundCheck::upper("E upper (rho^(K+1))", rc.rho.powi(k as i32 + 1), hi),
        BoundCheck::with_slack("I-HHhat^-1 = (BD^-1)^(K+1)", 0.0, identity_gap, IDENTITY_TOL, true),
    ])
}

/// Eigenvalues of the truncated-series inverse lie in `[λ, Λ]`.
pub fn check_hhat_inverse_bounds(problem: &PenalizedProblem, y: &StackedVector, k: usize) -> Result<Vec<BoundCheck>> {
    let (_, rc) = problem_constants(problem, k)?;
    let (lo, hi) = extreme_eigenvalues(&problem.dense_approx_inverse(y, k)?);
    Ok(vec![
        BoundCheck::lower("Hhat^-1 lower (lambda)", rc.lambda, lo),
        BoundCheck::upper("Hhat^-1 upper (Lambda)", rc.big_lambda, hi),
    ])
}

/// `‖H(y) − H(ŷ)‖₂ ≤ αL‖y − ŷ‖` over the sampled pairs.
pub fn check_hessian_lipschitz(problem: &PenalizedProblem, pairs: &[(StackedVector, StackedVector)]) -> Result<BoundCheck> {
    let bound = problem.alpha() * problem.curvature().lipschitz;
    let mut worst_ratio: f64 = 0.0;
    let mut margin = f64::INFINITY;
    for (a, b) in pairs {
        let dh = spectral_norm_sym(&(problem.dense_hessian(a)? - problem.dense_hessian(b)?));
        let dy = (a.to_flat() - b.to_flat()).norm();
        margin = margin.min(bound * dy + SLACK - dh);
        if dy > 0.0 {
            worst_ratio = worst_ratio.max(dh / dy);
        }
    }
    Ok(BoundCheck { name: "Hessian Lipschitz (alpha L)".into(), theoretical: bound, measured: worst_ratio, margin, pass: margin >= 0.0 })
}

/// Largest `‖H(y) − H(ŷ)‖₂` over the pairs.
pub fn hessian_difference_norm(problem: &PenalizedProblem, a: &StackedVector, b: &StackedVector) -> Result<f64> {
    Ok(spectral_norm_sym(&(problem.dense_hessian(a)? - problem.dense_hessian(b)?)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepsizeRule {
    pub epsilon: f64,
    pub zeta: f64,
    /// `F(y₀) − F(y*)`.
    pub gap: f64,
    pub f_star: f64,
}

/// Step size `ε = min{1, [3mλ^{5/2}/(LΛ³(F(y₀)−F(y*))^{1/2})]^{1/2}}` and
/// linear rate `ζ = (2−ε)εαmλ − αε³LΛ³(F(y₀)−F(y*))^{1/2}/(6λ^{3/2})`.
/// With `L = 0` or a zero gap the bracket is unbounded and `ε = 1`.
pub fn theoretical_stepsize(problem: &PenalizedProblem, y0: &StackedVector, k: usize) -> Result<StepsizeRule> {
    let y_star = problem.penalized_optimum_oracle()?;
    let f_star = problem.penalized_value(&y_star)?;
    let gap = (problem.penalized_value(y0)? - f_star).max(0.0);
    let (c, rc) = problem_constants(problem, k)?;
    let (epsilon, zeta) = stepsize_from_constants(problem.alpha(), &c, &rc, gap);
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(Error::InvalidParameter(format!("rate constant zeta = {zeta} outside (0, 1)")));
    }
    Ok(StepsizeRule { epsilon, zeta, gap, f_star })
}

/// The step-size rule evaluated on given constants.
pub fn stepsize_from_constants(alpha: f64, c: &Curvature, rc: &RateConstants, gap: f64) -> (f64, f64) {
    let (m, l, lam, big_lam) = (c.m, c.lipschitz, rc.lambda, rc.big_lambda);
    let denom = l * big_lam.powi(3) * gap.sqrt();
    let epsilon = if denom > 0.0 {
        ((3.0 * m * lam.powf(2.5)) / denom).sqrt().min(1.0)
    } else {
        1.0
    };
    let zeta = (2.0 - epsilon) * epsilon * alpha * m * lam
        - alpha * epsilon.powi(3) * l * big_lam.powi(3) * gap.sqrt() / (6.0 * lam.powf(1.5));
    (epsilon, zeta)
}

/// `e = (1/n) Σ ‖x_i − x*‖² / ‖x*‖²`.
pub fn relative_error(y: &StackedVector, x_star: &DVector<f64>) -> Result<f64> {
    if x_star.len() != y.p() {
        return Err(Error::Dimension("optimum and iterate blocks differ in length".into()));
    }
    let denom = x_star.norm_squared();
    if denom == 0.0 {
        return Err(Error::InvalidParameter("x* = 0: relative error undefined".into()));
    }
    Ok(y.blocks().iter().map(|x| (x - x_star).norm_squared()).sum::<f64>() / denom / y.n() as f64)
}

/// Iterations of `trace` where `F(y_{t+1}) − F* > (1 − ζ)(F(y_t) − F*)`,
/// skipping steps whose gap is already below `floor`.
pub fn linear_rate_violations(trace: &RunTrace, f_star: f64, zeta: f64, floor: f64) -> Vec<usize> {
    trace
        .records
        .windows(2)
        .filter(|w| {
            let before = w[0].objective - f_star;
            let after = w[1].objective - f_star;
            before > floor && after > (1.0 - zeta) * before
        })
        .map(|w| w[0].t)
        .collect()
}

/// Every bound at `y` for order `K`, plus the step-size rule at `y0`.
pub fn spectral_report(problem: &PenalizedProblem, y: &StackedVector, y0: &StackedVector, k: usize) -> Result<SpectralReport> {
    let (c, rc) = problem_constants(problem, k)?;
    let rule = theoretical_stepsize(problem, y0, k).ok();
    let w = problem.weights();
    let mut checks = check_hessian_bounds(problem, y)?;
    checks.extend(check_dbd_bound(problem, y)?);
    checks.extend(check_error_matrix(problem, y, k)?);
    checks.extend(check_hhat_inverse_bounds(problem, y, k)?);
    checks.push(check_hessian_lipschitz(problem, &[(y.clone(), y0.clone())])?);
    Ok(SpectralReport {
        constants: ReportConstants {
            delta: w.delta(),
            big_delta: w.big_delta(),
            m: c.m,
            big_m: c.big_m,
            lipschitz: c.lipschitz,
            curvature_source: curvature_source(problem),
            alpha: problem.alpha(),
            k,
            rho: rc.rho,
            lambda: rc.lambda,
            big_lambda: rc.big_lambda,
            zeta: rule.map(|r| r.zeta),
            epsilon_theory: rule.map(|r| r.epsilon),
        },
        checks,
    })
}
