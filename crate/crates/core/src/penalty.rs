//! The penalized consensus objective
//! `F(y) = ½ yᵀ(I − Z)y + α Σ_i f_i(x_i)` with `Z = W ⊗ I_p`.
//!
//! Everything on the solver path works block-wise on neighbor data only. The
//! `dense_*` functions and the oracles assemble the full `np × np` matrices
//! and exist for verification.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::objectives::{Curvature, SharedObjective};
use crate::topology::{NetworkTopology, WeightMatrix};

/// Largest `np` for which dense assemblies are allowed.
pub const DENSE_LIMIT: usize = 5000;

/// Agent iterates `y = [x_1; …; x_n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedVector {
    blocks: Vec<DVector<f64>>,
}

impl StackedVector {
    pub fn new(blocks: Vec<DVector<f64>>) -> Result<Self> {
        let p = blocks.first().map(DVector::len).unwrap_or(0);
        if blocks.is_empty() || p == 0 {
            return Err(Error::Dimension("stacked vector needs non-empty blocks".into()));
        }
        if blocks.iter().any(|b| b.len() != p) {
            return Err(Error::Dimension("blocks have different lengths".into()));
        }
        Ok(Self { blocks })
    }

    pub fn zeros(n: usize, p: usize) -> Self {
        Self { blocks: vec![DVector::zeros(p); n] }
    }

    /// `n` copies of `x`.
    pub fn repeat(x: &DVector<f64>, n: usize) -> Self {
        Self { blocks: vec![x.clone(); n] }
    }

    pub fn from_flat(flat: &DVector<f64>, n: usize) -> Result<Self> {
        if n == 0 || flat.len() % n != 0 {
            return Err(Error::Dimension(format!("cannot split {} entries into {n} blocks", flat.len())));
        }
        let p = flat.len() / n;
        Self::new((0..n).map(|i| flat.rows(i * p, p).into_owned()).collect())
    }

    pub fn n(&self) -> usize {
        self.blocks.len()
    }

    pub fn p(&self) -> usize {
        self.blocks[0].len()
    }

    pub fn block(&self, i: usize) -> &DVector<f64> {
        &self.blocks[i]
    }

    pub fn blocks(&self) -> &[DVector<f64>] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<DVector<f64>> {
        self.blocks
    }

    pub fn to_flat(&self) -> DVector<f64> {
        let p = self.p();
        DVector::from_fn(self.n() * p, |r, _| self.blocks[r / p][r % p])
    }

    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(DVector::norm_squared).sum::<f64>().sqrt()
    }

    /// Largest block norm.
    pub fn max_block_norm(&self) -> f64 {
        self.blocks.iter().map(DVector::norm).fold(0.0, f64::max)
    }

    /// `self + scale * other`.
    pub fn axpy(&self, scale: f64, other: &StackedVector) -> StackedVector {
        StackedVector {
            blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| a + b * scale).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Block-diagonal `D_t` and the constant coupling `B` of the splitting
/// `H_t = D_t − B`.
#[derive(Debug, Clone)]
pub struct SplittingBlocks {
    /// `D_ii = α∇²f_i(x_i) + 2(1 − w_ii)I`.
    pub d_blocks: Vec<DMatrix<f64>>,
    /// `B_ii = (1 − w_ii)I`; off-diagonal blocks are `w_ij I`.
    pub b_diag: Vec<f64>,
    weights: WeightMatrix,
}

impl SplittingBlocks {
    /// Coefficient of the `(i, j)` block of `B` (times the identity).
    pub fn b_coef(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.b_diag[i]
        } else {
            self.weights.get(i, j)
        }
    }

    pub fn dense_d(&self) -> DMatrix<f64> {
        let n = self.d_blocks.len();
        let p = self.d_blocks[0].nrows();
        let mut d = DMatrix::zeros(n * p, n * p);
        for (i, block) in self.d_blocks.iter().enumerate() {
            d.view_mut((i * p, i * p), (p, p)).copy_from(block);
        }
        d
    }

    pub fn dense_b(&self) -> DMatrix<f64> {
        let n = self.d_blocks.len();
        let p = self.d_blocks[0].nrows();
        kron_identity(&DMatrix::from_fn(n, n, |i, j| self.b_coef(i, j)), p)
    }
}

/// `A ⊗ I_p`.
pub fn kron_identity(a: &DMatrix<f64>, p: usize) -> DMatrix<f64> {
    a.kronecker(&DMatrix::identity(p, p))
}

#[derive(Debug, Clone)]
pub struct PenalizedProblem {
    alpha: f64,
    topology: NetworkTopology,
    weights: WeightMatrix,
    objectives: Vec<SharedObjective>,
}

impl PenalizedProblem {
    pub fn new(
        topology: NetworkTopology,
        weights: WeightMatrix,
        objectives: Vec<SharedObjective>,
        alpha: f64,
    ) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be positive and finite, got {alpha}")));
        }
        let n = topology.n();
        if weights.n() != n || objectives.len() != n {
            return Err(Error::Dimension(format!(
                "topology has {n} agents, weights {}, objectives {}",
                weights.n(),
                objectives.len()
            )));
        }
        let p = objectives[0].dim();
        if objectives.iter().any(|f| f.dim() != p) {
            return Err(Error::Dimension("local objectives differ in dimension".into()));
        }
        Ok(Self { alpha, topology, weights, objectives })
    }

    /// Same network and objectives with a different penalty inverse.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.topology.clone(), self.weights.clone(), self.objectives.clone(), alpha)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n(&self) -> usize {
        self.topology.n()
    }

    pub fn p(&self) -> usize {
        self.objectives[0].dim()
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    pub fn objectives(&self) -> &[SharedObjective] {
        &self.objectives
    }

    /// Worst-case curvature bounds over all agents.
    pub fn curvature(&self) -> Curvature {
        Curvature::combine(self.objectives.iter().map(|f| f.curvature())).expect("at least one agent")
    }

    fn check(&self, y: &StackedVector) -> Result<()> {
        if y.n() != self.n() || y.p() != self.p() {
            return Err(Error::Dimension(format!(
                "expected {} blocks of length {}, got {} of length {}",
                self.n(),
                self.p(),
                y.n(),
                y.p()
            )));
        }
        Ok(())
    }

    /// `(I − Z)y` restricted to block `i`: `(1 − w_ii)x_i − Σ_{j∈N_i} w_ij x_j`.
    fn laplacian_block(&self, y: &StackedVector, i: usize) -> DVector<f64> {
        let mut out = y.block(i) * (1.0 - self.weights.self_weight(i));
        for &j in self.topology.neighbors(i) {
            out.axpy(-self.weights.get(i, j), y.block(j), 1.0);
        }
        out
    }

    pub fn penalized_value(&self, y: &StackedVector) -> Result<f64> {
        self.check(y)?;
        let mut coupling = 0.0;
        let mut local = 0.0;
        for i in 0..self.n() {
            coupling += y.block(i).dot(&self.laplacian_block(y, i));
            local += self.objectives[i].value(y.block(i));
        }
        Ok(0.5 * coupling + self.alpha * local)
    }

    /// `g_i = (1 − w_ii)x_i − Σ_{j∈N_i} w_ij x_j + α∇f_i(x_i)`.
    pub fn local_gradient(&self, y: &StackedVector, i: usize) -> Result<DVector<f64>> {
        self.check(y)?;
        if i >= self.n() {
            return Err(Error::InvalidParameter(format!("agent {i} out of range")));
        }
        Ok(self.laplacian_block(y, i) + self.objectives[i].gradient(y.block(i)) * self.alpha)
    }

    pub fn gradient(&self, y: &StackedVector) -> Result<StackedVector> {
        self.check(y)?;
        (0..self.n())
            .map(|i| self.local_gradient(y, i))
            .collect::<Result<Vec<_>>>()
            .map(|blocks| StackedVector { blocks })
    }

    pub fn splitting_blocks(&self, y: &StackedVector) -> Result<SplittingBlocks> {
        self.check(y)?;
        let p = self.p();
        let d_blocks = (0..self.n())
            .map(|i| {
                let w_ii = self.weights.self_weight(i);
                self.objectives[i].hessian(y.block(i)) * self.alpha
                    + DMatrix::identity(p, p) * (2.0 * (1.0 - w_ii))
            })
            .collect();
        let b_diag = (0..self.n()).map(|i| 1.0 - self.weights.self_weight(i)).collect();
        Ok(SplittingBlocks { d_blocks, b_diag, weights: self.weights.clone() })
    }

    /// NN-K direction via the neighbor recursion
    /// `d_i^(k+1) = D_ii⁻¹(Σ_{j∈N_i∪{i}} B_ij d_j^(k) − g_i)`, `d_i^(0) = −D_ii⁻¹g_i`.
    pub fn nn_direction(&self, y: &StackedVector, g: &StackedVector, k: usize) -> Result<StackedVector> {
        self.check(y)?;
        self.check(g)?;
        let split = self.splitting_blocks(y)?;
        let factors = split
            .d_blocks
            .iter()
            .enumerate()
            .map(|(i, d)| {
                d.clone()
                    .cholesky()
                    .ok_or_else(|| Error::Factorization(format!("D block of agent {i} is not positive definite")))
            })
            .collect::<Result<Vec<Cholesky<f64, Dyn>>>>()?;
        let mut dir: Vec<DVector<f64>> =
            factors.iter().zip(g.blocks()).map(|(c, gi)| -c.solve(gi)).collect();
        for _ in 0..k {
            dir = (0..self.n())
                .map(|i| {
                    let mut rhs = &dir[i] * split.b_diag[i] - g.block(i);
                    for &j in self.topology.neighbors(i) {
                        rhs.axpy(self.weights.get(i, j), &dir[j], 1.0);
                    }
                    factors[i].solve(&rhs)
                })
                .collect();
        }
        Ok(StackedVector { blocks: dir })
    }

    fn dense_guard(&self) -> Result<()> {
        let size = self.n() * self.p();
        if size > DENSE_LIMIT {
            return Err(Error::DenseGuard { size, limit: DENSE_LIMIT });
        }
        Ok(())
    }

    /// `Z = W ⊗ I_p`.
    pub fn dense_z(&self) -> Result<DMatrix<f64>> {
        self.dense_guard()?;
        Ok(kron_identity(self.weights.entries(), self.p()))
    }

    /// Block diagonal `G` of local Hessians.
    pub fn dense_g(&self, y: &StackedVector) -> Result<DMatrix<f64>> {
        self.dense_guard()?;
        self.check(y)?;
        let p = self.p();
        let mut g = DMatrix::zeros(self.n() * p, self.n() * p);
        for i in 0..self.n() {
            g.view_mut((i * p, i * p), (p, p)).copy_from(&self.objectives[i].hessian(y.block(i)));
        }
        Ok(g)
    }

    /// `H(y) = I − Z + αG(y)`.
    pub fn dense_hessian(&self, y: &StackedVector) -> Result<DMatrix<f64>> {
        let z = self.dense_z()?;
        let np = z.nrows();
        Ok(DMatrix::identity(np, np) - z + self.dense_g(y)? * self.alpha)
    }

    /// `½ yᵀ(I − Z)y + αΣf_i` with `Z` materialized.
    pub fn dense_value(&self, y: &StackedVector) -> Result<f64> {
        let z = self.dense_z()?;
        let flat = y.to_flat();
        let np = flat.len();
        let quad = flat.dot(&((DMatrix::identity(np, np) - z) * &flat));
        let local: f64 = (0..self.n()).map(|i| self.objectives[i].value(y.block(i))).sum();
        Ok(0.5 * quad + self.alpha * local)
    }

    /// Dense truncated Neumann series
    /// `Ĥ⁻¹ = D^{−1/2} Σ_{k≤K} (D^{−1/2} B D^{−1/2})^k D^{−1/2}`.
    pub fn dense_approx_inverse(&self, y: &StackedVector, k: usize) -> Result<DMatrix<f64>> {
        self.dense_guard()?;
        let split = self.splitting_blocks(y)?;
        let d_inv_sqrt = sym_power(&split.dense_d(), -0.5)?;
        let x = &d_inv_sqrt * split.dense_b() * &d_inv_sqrt;
        let np = x.nrows();
        let mut term = DMatrix::identity(np, np);
        let mut sum = term.clone();
        for _ in 0..k {
            term = &term * &x;
            sum += &term;
        }
        Ok(&d_inv_sqrt * sum * &d_inv_sqrt)
    }

    /// `−Ĥ⁻¹ g` from the dense series.
    pub fn dense_series_direction(&self, y: &StackedVector, g: &StackedVector, k: usize) -> Result<StackedVector> {
        let inv = self.dense_approx_inverse(y, k)?;
        StackedVector::from_flat(&(-(inv * g.to_flat())), self.n())
    }

    /// Exact Newton direction `−H⁻¹g` by dense Cholesky.
    pub fn exact_newton_direction_oracle(&self, y: &StackedVector) -> Result<StackedVector> {
        let h = self.dense_hessian(y)?;
        let g = self.gradient(y)?.to_flat();
        let chol = h
            .cholesky()
            .ok_or_else(|| Error::Factorization("dense Hessian not positive definite".into()))?;
        StackedVector::from_flat(&chol.solve(&(-g)), self.n())
    }

    /// Minimizer of `F` by damped dense Newton to `‖∇F‖ < 1e-10`. Quadratic
    /// objectives converge in a single step.
    pub fn penalized_optimum_oracle(&self) -> Result<StackedVector> {
        self.dense_guard()?;
        const TOL: f64 = 1e-10;
        const MAX_ITERS: usize = 100;
        let mut y = StackedVector::zeros(self.n(), self.p());
        let mut g = self.gradient(&y)?;
        for _ in 0..MAX_ITERS {
            if g.norm() < TOL {
                return Ok(y);
            }
            let dir = self.exact_newton_direction_oracle(&y)?;
            let f0 = self.penalized_value(&y)?;
            let slope = g.to_flat().dot(&dir.to_flat());
            let mut t = 1.0;
            let mut next = None;
            for _ in 0..60 {
                let cand = y.axpy(t, &dir);
                if self.penalized_value(&cand)? <= f0 + 1e-4 * t * slope {
                    next = Some(cand);
                    break;
                }
                t *= 0.5;
            }
            let cand = match next {
                Some(c) => c,
                None => {
                    // Below the resolution of F: accept the full step if it
                    // still reduces the gradient.
                    let full = y.axpy(1.0, &dir);
                    if self.gradient(&full)?.norm() >= g.norm() {
                        return Err(Error::OracleStalled { grad_norm: g.norm(), iterations: MAX_ITERS });
                    }
                    full
                }
            };
            y = cand;
            g = self.gradient(&y)?;
        }
        if g.norm() < TOL {
            Ok(y)
        } else {
            Err(Error::OracleStalled { grad_norm: g.norm(), iterations: MAX_ITERS })
        }
    }
}

/// `A^power` for symmetric positive definite `A`.
pub fn sym_power(a: &DMatrix<f64>, power: f64) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(a.clone());
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Factorization("matrix is not positive definite".into()));
    }
    let scaled = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|l| l.powf(power)));
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&scaled) * eig.eigenvectors.transpose())
}

/// Dense matrix as CSV rows, 17 significant digits.
pub fn dense_to_csv(a: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in a.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::objectives::{make_quadratic, quadratic_optimum, DiagonalQuadratic};
    use crate::topology::{build_d_regular_cycle, build_lazy_cycle_weights};

    fn quad_problem(n: usize, d: usize, p: usize, xi: u32, alpha: f64, seed: u64) -> PenalizedProblem {
        let t = build_d_regular_cycle(n, d).unwrap();
        let w = build_lazy_cycle_weights(&t).unwrap();
        let inst = make_quadratic(n, p, xi, seed).unwrap();
        PenalizedProblem::new(t, w, inst.objectives(), alpha).unwrap()
    }

    fn random_y(n: usize, p: usize, rng: &mut ChaCha8Rng) -> StackedVector {
        StackedVector::new((0..n).map(|_| DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0))).collect())
            .unwrap()
    }

    #[test]
    fn consensus_point_has_no_coupling() {
        let pb = quad_problem(6, 2, 4, 2, 0.3, 1);
        let c = DVector::from_vec(vec![0.5, -1.0, 2.0, 0.25]);
        let y = StackedVector::repeat(&c, 6);
        let expect: f64 = pb.objectives().iter().map(|f| f.value(&c)).sum::<f64>() * 0.3;
        assert!((pb.penalized_value(&y).unwrap() - expect).abs() < 1e-12);
        for i in 0..6 {
            let g = pb.local_gradient(&y, i).unwrap();
            let expect = pb.objectives()[i].gradient(&c) * 0.3;
            assert!((g - expect).amax() < 1e-14);
        }
    }

    #[test]
    fn value_zero_at_origin() {
        let pb = quad_problem(5, 2, 4, 2, 0.1, 2);
        assert_eq!(pb.penalized_value(&StackedVector::zeros(5, 4)).unwrap(), 0.0);
    }

    #[test]
    fn value_matches_dense_kronecker() {
        let pb = quad_problem(5, 2, 4, 2, 0.1, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let y = random_y(5, 4, &mut rng);
            let a = pb.penalized_value(&y).unwrap();
            let b = pb.dense_value(&y).unwrap();
            assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let pb = quad_problem(4, 2, 2, 1, 0.5, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let y = random_y(4, 2, &mut rng);
        let g = pb.gradient(&y).unwrap().to_flat();
        let flat = y.to_flat();
        let h = 1e-5 * (1.0 + flat.norm());
        let fd = DVector::from_fn(flat.len(), |r, _| {
            let mut plus = flat.clone();
            let mut minus = flat.clone();
            plus[r] += h;
            minus[r] -= h;
            let fp = pb.penalized_value(&StackedVector::from_flat(&plus, 4).unwrap()).unwrap();
            let fm = pb.penalized_value(&StackedVector::from_flat(&minus, 4).unwrap()).unwrap();
            (fp - fm) / (2.0 * h)
        });
        assert!((g - &fd).norm() / fd.norm() < 1e-6);
    }

    #[test]
    fn gradient_vanishes_at_penalized_optimum() {
        let pb = quad_problem(8, 4, 4, 2, 0.05, 7);
        let y = pb.penalized_optimum_oracle().unwrap();
        for i in 0..8 {
            assert!(pb.local_gradient(&y, i).unwrap().norm() < 1e-8);
        }
    }

    #[test]
    fn splitting_for_identity_quadratic() {
        let t = build_d_regular_cycle(6, 4).unwrap();
        let w = build_lazy_cycle_weights(&t).unwrap();
        let objs: Vec<SharedObjective> = (0..6)
            .map(|_| Arc::new(DiagonalQuadratic::new(DVector::from_element(2, 1.0), DVector::zeros(2)).unwrap()) as _)
            .collect();
        let pb = PenalizedProblem::new(t, w, objs, 1.0).unwrap();
        let s = pb.splitting_blocks(&StackedVector::zeros(6, 2)).unwrap();
        for d in &s.d_blocks {
            assert!((d - DMatrix::identity(2, 2) * 1.8).amax() < 1e-15);
        }
        assert!((s.b_coef(0, 0) - 0.4).abs() < 1e-15);
        assert!((s.b_coef(0, 1) - 0.1).abs() < 1e-15);
        assert_eq!(s.b_coef(0, 3), 0.0);
    }

    #[test]
    fn hessian_equals_d_minus_b() {
        let pb = quad_problem(7, 4, 2, 2, 0.2, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y = random_y(7, 2, &mut rng);
        let s = pb.splitting_blocks(&y).unwrap();
        let diff = s.dense_d() - s.dense_b() - pb.dense_hessian(&y).unwrap();
        assert!(diff.amax() < 1e-13);
    }

    #[test]
    fn zeroth_order_is_block_preconditioned_gradient() {
        let pb = quad_problem(5, 2, 4, 2, 0.1, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let y = random_y(5, 4, &mut rng);
        let g = pb.gradient(&y).unwrap();
        let d = pb.nn_direction(&y, &g, 0).unwrap();
        let s = pb.splitting_blocks(&y).unwrap();
        for i in 0..5 {
            let expect = -s.d_blocks[i].clone().try_inverse().unwrap() * g.block(i);
            assert!((d.block(i) - expect).amax() < 1e-14);
        }
    }

    #[test]
    fn recursion_matches_dense_series_and_approaches_newton() {
        let pb = quad_problem(4, 2, 2, 2, 0.1, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let y = random_y(4, 2, &mut rng);
        let g = pb.gradient(&y).unwrap();
        let newton = pb.exact_newton_direction_oracle(&y).unwrap();
        let c = pb.curvature();
        let w = pb.weights();
        let rho = 2.0 * (1.0 - w.delta()) / (2.0 * (1.0 - w.delta()) + pb.alpha() * c.m);
        let mut prev_err = f64::INFINITY;
        for k in 0..=3 {
            let local = pb.nn_direction(&y, &g, k).unwrap();
            let dense = pb.dense_series_direction(&y, &g, k).unwrap();
            assert!((local.to_flat() - dense.to_flat()).amax() < 1e-12);
            let err = (local.to_flat() - newton.to_flat()).norm();
            assert!(err < prev_err);
            prev_err = err;
        }
        assert!(rho < 1.0);
    }

    #[test]
    fn newton_lands_on_optimum_for_quadratics() {
        let pb = quad_problem(6, 2, 4, 2, 0.1, 14);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let y = random_y(6, 4, &mut rng);
        let d = pb.exact_newton_direction_oracle(&y).unwrap();
        let y_star = pb.penalized_optimum_oracle().unwrap();
        assert!((y.axpy(1.0, &d).to_flat() - y_star.to_flat()).amax() < 1e-9);
    }

    #[test]
    fn newton_residual_small() {
        let pb = quad_problem(6, 2, 4, 2, 0.1, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let y = random_y(6, 4, &mut rng);
        let d = pb.exact_newton_direction_oracle(&y).unwrap().to_flat();
        let g = pb.gradient(&y).unwrap().to_flat();
        let r = pb.dense_hessian(&y).unwrap() * d + &g;
        assert!(r.norm() < 1e-9 * g.norm());
    }

    #[test]
    fn scalar_hessian_newton_direction() {
        // Single agent with W = (1): H = αA.
        let t = NetworkTopology::from_neighbor_lists(vec![vec![]]).unwrap();
        let w = WeightMatrix::from_dense(DMatrix::identity(1, 1)).unwrap();
        let f = DiagonalQuadratic::new(DVector::from_element(3, 4.0), DVector::from_element(3, 1.0)).unwrap();
        let pb = PenalizedProblem::new(t, w, vec![Arc::new(f)], 0.5).unwrap();
        let y = StackedVector::new(vec![DVector::from_vec(vec![1.0, 2.0, 3.0])]).unwrap();
        let g = pb.gradient(&y).unwrap();
        let d = pb.exact_newton_direction_oracle(&y).unwrap();
        assert!((d.to_flat() + g.to_flat() / 2.0).amax() < 1e-14);
    }

    #[test]
    fn large_alpha_pulls_blocks_to_local_minima() {
        let t = build_d_regular_cycle(5, 2).unwrap();
        let w = build_lazy_cycle_weights(&t).unwrap();
        let inst = make_quadratic(5, 4, 1, 18).unwrap();
        let pb = PenalizedProblem::new(t, w, inst.objectives(), 1e5).unwrap();
        let y = pb.penalized_optimum_oracle().unwrap();
        for (i, q) in inst.locals.iter().enumerate() {
            let local_min = -q.linear.component_div(&q.diag);
            assert!((y.block(i) - &local_min).norm() / local_min.norm() < 1e-3);
        }
    }

    #[test]
    fn penalty_gap_shrinks_with_alpha() {
        let t = build_d_regular_cycle(10, 2).unwrap();
        let w = build_lazy_cycle_weights(&t).unwrap();
        let inst = make_quadratic(10, 4, 2, 19).unwrap();
        let tilde = StackedVector::repeat(&quadratic_optimum(&inst), 10);
        let gap = |a: f64| {
            let pb = PenalizedProblem::new(t.clone(), w.clone(), inst.objectives(), a).unwrap();
            (pb.penalized_optimum_oracle().unwrap().to_flat() - tilde.to_flat()).norm()
        };
        let ratio = gap(5e-3) / gap(1e-2);
        assert!((0.3..=0.7).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn rejects_zero_alpha_and_bad_dimensions() {
        let t = build_d_regular_cycle(5, 2).unwrap();
        let w = build_lazy_cycle_weights(&t).unwrap();
        let inst = make_quadratic(5, 4, 1, 0).unwrap();
        assert!(PenalizedProblem::new(t.clone(), w.clone(), inst.objectives(), 0.0).is_err());
        let pb = PenalizedProblem::new(t, w, inst.objectives(), 0.1).unwrap();
        assert!(pb.penalized_value(&StackedVector::zeros(4, 4)).is_err());
        assert!(pb.local_gradient(&StackedVector::zeros(5, 4), 7).is_err());
    }

    #[test]
    fn dense_guard_trips() {
        let pb = quad_problem(1300, 2, 4, 0, 0.1, 0);
        assert!(matches!(pb.dense_z(), Err(Error::DenseGuard { .. })));
    }

    #[test]
    fn stacked_flat_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let y = random_y(3, 5, &mut rng);
        assert_eq!(StackedVector::from_flat(&y.to_flat(), 3).unwrap(), y);
    }
}
