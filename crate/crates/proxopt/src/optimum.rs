//! High-accuracy reference optimum for the deterministic expected problem.
//!
//! The rate checks compare online iterates against the constrained minimizer
//! of the expected objective, which the problem families do not provide in
//! closed form (except for exact consensus). This module computes it by a
//! per-node least-squares start followed by a multiplier-refined exterior
//! quadratic penalty on the pairwise constraints, solved to a KKT residual
//! of 1e-10. It is intended for small instances (a few dozen variables):
//! every linear solve is dense. The 1e-10 target applies when the
//! trust region X is inactive at the optimum (every instance the rate
//! checks use); an actively binding X limits the refinement to ~1e-7,
//! which the returned residual reports honestly.
//!
//! Multiplier refinement keeps the penalty weight moderate (1e3 to 1e8)
//! instead of escalating toward 1e12, where forming μ·(h − γ) loses six
//! digits to rounding and caps the achievable accuracy near 1e-4. With the
//! shifted penalty the inner minimizer converges to the exact constrained
//! optimum, so the 1e-10 target is reachable in a handful of refinements.
//!
//! Exact consensus (γ = 0, shared value) is special-cased: its inequality
//! form has no strictly feasible point, so penalty iterations degrade into
//! a quartic crawl; the shared-value problem is a plain least squares and
//! is solved as one.

use nalgebra::{DMatrix, DVector};

use crate::engine::ProjectionSet;
use crate::graph::Network;
use crate::problems::{constraint_value_and_grads, ExpectedObjective, PairConstraint};
use crate::{Error, Result};

/// Target KKT residual (stationarity, feasibility, complementarity).
const KKT_TOL: f64 = 1e-10;
/// Target when the trust region X is active at the optimum: first-order
/// inner solves put a μ-amplified floor under the multiplier accuracy.
const KKT_TOL_ACTIVE: f64 = 1e-7;
/// Inner solves run to this gradient / projected-step residual, relaxed
/// by the penalty weight: forming μ·(h − γ) carries rounding of order
/// μ·eps, so demanding less than that spins forever at the float floor.
fn inner_tol(mu: f64) -> f64 {
    (mu * 5e-17).max(1e-12)
}
const INITIAL_PENALTY: f64 = 1e3;
/// μ ceiling for the Newton inner path. Beyond ~1e6 the rounding noise in
/// the shifted multipliers exceeds the 1e-10 target.
const MAX_PENALTY_NEWTON: f64 = 1e6;
/// μ ceiling for the projected-gradient inner path, whose iteration count
/// scales linearly with μ.
const MAX_PENALTY_PG: f64 = 1e5;
const MAX_REFINEMENTS: usize = 60;
const MAX_NEWTON_ITERS: usize = 200;
const MAX_PG_ITERS: usize = 2_000_000;

/// Constrained minimizer of the expected problem, with certificates.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    /// Per-node minimizer.
    pub x: Vec<DVector<f64>>,
    /// One multiplier per canonical edge (the sum of the two directed
    /// dual variables at the saddle point). `None` for exact consensus,
    /// where the inequality multipliers are unbounded.
    pub edge_multipliers: Option<Vec<f64>>,
    /// Final KKT residual actually achieved.
    pub kkt_residual: f64,
}

/// Solves `min Σ_i E f_i(x_i)` subject to `h(x_i, x_j) ≤ γ_ij` on every
/// edge and `x_i ∈ X`, to a KKT residual of 1e-10.
///
/// # Errors
///
/// `InvalidArgument` for shape mismatches, non-uniform node dimensions,
/// a nonzero γ with the consensus family, or the range-localization
/// family (its reference point is the generating source, not a solve).
/// `Numeric` when the refinement stalls before reaching the target
/// residual.
pub fn reference_optimum(
    expected: &[ExpectedObjective],
    net: &Network,
    constraint: &PairConstraint,
    gamma: &[f64],
    projection: &ProjectionSet,
) -> Result<ReferenceSolution> {
    if expected.len() != net.n_nodes() {
        return Err(Error::invalid(format!(
            "{} objectives for a {}-node network",
            expected.len(),
            net.n_nodes()
        )));
    }
    if gamma.len() != net.edges().len() {
        return Err(Error::invalid(format!(
            "{} slack levels for {} edges",
            gamma.len(),
            net.edges().len()
        )));
    }
    let dim = expected
        .first()
        .map_or(0, |e| e.c.ncols());
    if dim == 0 || expected.iter().any(|e| e.c.ncols() != dim) {
        return Err(Error::invalid(
            "reference solve needs a uniform nonzero node dimension",
        ));
    }
    match constraint {
        PairConstraint::LseRange { .. } => Err(Error::invalid(
            "the range-localization family has no deterministic reference solve; \
             compare against the generating source position instead",
        )),
        PairConstraint::Consensus => {
            if gamma.iter().any(|&g| g != 0.0) {
                return Err(Error::invalid("exact consensus requires zero slack"));
            }
            consensus_reference(expected, net, projection, dim)
        }
        PairConstraint::Quadratic => {
            proximity_reference(expected, net, constraint, gamma, projection, dim)
        }
    }
}

/// Exact-consensus path: all nodes share one vector, so the problem
/// collapses to `min_z Σ_i ‖C_i z − m_i‖²` over X.
fn consensus_reference(
    expected: &[ExpectedObjective],
    net: &Network,
    projection: &ProjectionSet,
    dim: usize,
) -> Result<ReferenceSolution> {
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let mut b = DVector::<f64>::zeros(dim);
    for e in expected {
        a += e.c.transpose() * &e.c;
        b += e.c.transpose() * &e.m;
    }
    let grad = |z: &DVector<f64>| 2.0 * (&a * z - &b);
    let value = |z: &DVector<f64>| {
        expected.iter().map(|e| e.excess(z)).sum::<f64>()
    };
    let mut z = a
        .clone()
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::numeric("singular consensus normal equations", None))?;
    if !projection.contains(&z) {
        z = projected_gradient(&value, &grad, projection.project(z), projection)?;
    }
    let residual = pg_residual(&z, &grad(&z), projection);
    if residual > KKT_TOL {
        return Err(Error::numeric("consensus reference solve stalled", None));
    }
    Ok(ReferenceSolution {
        x: vec![z; net.n_nodes()],
        edge_multipliers: None,
        kkt_residual: residual,
    })
}

/// Proximity path: multiplier-refined exterior penalty.
///
/// The refinement is tried Newton-style without the trust region first:
/// when its solution lands inside X (the region is inactive at the
/// optimum, which is how every desk-scale rate instance is configured),
/// it solves the constrained problem too and meets the 1e-10 target.
/// Only when X actually binds does the solve drop to projected-gradient
/// inner iterations; there the multiplier update β ← [β + μ(h−γ)]₊
/// amplifies the inner tolerance by μ, so the honest target is coarser
/// (1e-7) and the achieved residual is reported in the solution.
fn proximity_reference(
    expected: &[ExpectedObjective],
    net: &Network,
    constraint: &PairConstraint,
    gamma: &[f64],
    projection: &ProjectionSet,
    dim: usize,
) -> Result<ReferenceSolution> {
    let free = refine(
        expected,
        net,
        constraint,
        gamma,
        &ProjectionSet::Unconstrained,
        KKT_TOL,
        dim,
    );
    if matches!(projection, ProjectionSet::Unconstrained) {
        return free;
    }
    if let Ok(sol) = free {
        if sol.x.iter().all(|xi| projection.contains(xi)) {
            let beta = sol.edge_multipliers.as_deref().unwrap_or(&[]);
            let residual =
                kkt_residual(expected, net, constraint, gamma, beta, &sol.x, projection)?;
            if residual <= KKT_TOL {
                return Ok(ReferenceSolution {
                    kkt_residual: residual,
                    ..sol
                });
            }
        }
    }
    refine(
        expected,
        net,
        constraint,
        gamma,
        projection,
        KKT_TOL_ACTIVE,
        dim,
    )
}

/// One full refinement loop: inner minimization (Newton when X is
/// unconstrained, projected gradient otherwise), multiplier update,
/// KKT gate at `target`, penalty escalation
///
/// ```text
/// min Σ_i ‖C_i x_i − m_i‖² + (1/2μ) Σ_k ( [β_k + μ(h_k − γ_k)]₊² − β_k² )
/// ```
fn refine(
    expected: &[ExpectedObjective],
    net: &Network,
    constraint: &PairConstraint,
    gamma: &[f64],
    projection: &ProjectionSet,
    target: f64,
    dim: usize,
) -> Result<ReferenceSolution> {
    let n_edges = net.edges().len();
    let newton = matches!(projection, ProjectionSet::Unconstrained);
    let max_mu = if newton {
        MAX_PENALTY_NEWTON
    } else {
        MAX_PENALTY_PG
    };
    let mut x = least_squares_start(expected, projection)?;
    let mut beta = vec![0.0; n_edges];
    let mut mu = INITIAL_PENALTY;
    for _ in 0..MAX_REFINEMENTS {
        x = if newton {
            newton_inner(expected, net, constraint, gamma, &beta, mu, x, dim)?
        } else {
            pg_inner(expected, net, constraint, gamma, &beta, mu, x, projection)?
        };
        let slacks = edge_slacks(net, constraint, gamma, &x)?;
        for (bk, &sk) in beta.iter_mut().zip(&slacks) {
            *bk = (*bk + mu * sk).max(0.0);
        }
        let residual = kkt_residual(expected, net, constraint, gamma, &beta, &x, projection)?;
        if residual <= target {
            return Ok(ReferenceSolution {
                x,
                edge_multipliers: Some(beta),
                kkt_residual: residual,
            });
        }
        mu = (mu * 10.0).min(max_mu);
    }
    Err(Error::numeric("reference optimum refinement stalled", None))
}

/// Per-node least-squares minimizers of the objective alone, projected
/// into X. Only a warm start: the refinement loop owns the accuracy.
fn least_squares_start(
    expected: &[ExpectedObjective],
    projection: &ProjectionSet,
) -> Result<Vec<DVector<f64>>> {
    expected
        .iter()
        .map(|e| {
            let normal = e.c.transpose() * &e.c;
            let rhs = e.c.transpose() * &e.m;
            let free = normal
                .svd(true, true)
                .solve(&rhs, 1e-12)
                .map_err(|msg| Error::numeric(format!("node least squares: {msg}"), None))?;
            Ok(projection.project(free))
        })
        .collect()
}

/// Signed slacks h_k − γ_k on every canonical edge.
fn edge_slacks(
    net: &Network,
    constraint: &PairConstraint,
    gamma: &[f64],
    x: &[DVector<f64>],
) -> Result<Vec<f64>> {
    net.edges()
        .iter()
        .zip(gamma)
        .map(|(&(i, j), &g)| {
            let (h, _, _) = constraint_value_and_grads(constraint, i, j, &x[i], &x[j])?;
            Ok(h - g)
        })
        .collect()
}

/// Shifted-penalty value at a stacked point.
fn penalty_value(
    expected: &[ExpectedObjective],
    net: &Network,
    constraint: &PairConstraint,
    gamma: &[f64],
    beta: &[f64],
    mu: f64,
    x: &[DVector<f64>],
) -> Result<f64> {
    let mut total: f64 = expected.iter().zip(x).map(|(e, xi)| e.excess(xi)).sum();
    for (s, &b) in edge_slacks(net, constraint, gamma, x)?.iter().zip(beta) {
        let shifted = (b + mu * s).max(0.0);
        total += (shifted * shifted - b * b) / (2.0 * mu);
    }
    Ok(total)
}

/// Shifted-penalty gradient, per node. Also returns the active shifted
/// multipliers [β_k + μ s_k]₊ for Hessian assembly.
fn penalty_grad(
    expected: &[ExpectedObjective],
    net: &Network,
    constraint: &PairConstraint,
    gamma: &[f64],
    beta: &[f64],
    mu: f64,
    x: &[DVector<f64>],
) -> Result<(Vec<DVector<f64>>, Vec<f64>)> {
    let mut grads: Vec<DVector<f64>> = expected.iter().zip(x).map(|(e, xi)| e.grad(xi)).collect();
    let mut shifted = vec![0.0; net.edges().len()];
    for (k, (&(i, j), &g)) in net.edges().iter().zip(gamma).enumerate() {
        let (h, gi, gj) = constraint_value_and_grads(constraint, i, j, &x[i], &x[j])?;
        let m = (beta[k] + mu * (h - g)).max(0.0);
        shifted[k] = m;
        if m != 0.0 {
            grads[i] += gi * m;
            grads[j] += gj * m;
        }
    }
    Ok((grads, shifted))
}

/// Semismooth Newton on the shifted penalty, for unconstrained X. The
/// generalized Hessian of the quadratic-proximity penalty is
///
/// ```text
/// blockdiag(2 C_iᵀC_i) + Σ_{k active} μ ∇h_k ∇h_kᵀ + m_k ∇²h_k
/// ```
///
/// assembled densely; a small ridge is added if the factorization fails
/// on a rank-deficient instance.
#[allow(clippy::too_many_arguments)]
fn newton_inner(
    expected: &[ExpectedObjective],
    net: &Network,
    constraint: &PairConstraint,
    gamma: &[f64],
    beta: &[f64],
    mu: f64,
    mut x: Vec<DVector<f64>>,
    dim: usize,
) -> Result<Vec<DVector<f64>>> {
    let n = expected.len() * dim;
    for _ in 0..MAX_NEWTON_ITERS {
        let (grads, shifted) = penalty_grad(expected, net, constraint, gamma, beta, mu, &x)?;
        let gnorm = grads
            .iter()
            .fold(0.0f64, |m, g| m.max(g.amax()));
        if gnorm <= inner_tol(mu) {
            return Ok(x);
        }
        let mut hess = DMatrix::<f64>::zeros(n, n);
        for (i, e) in expected.iter().enumerate() {
            let block = 2.0 * e.c.transpose() * &e.c;
            hess.view_mut((i * dim, i * dim), (dim, dim)).copy_from(&block);
        }
        for (k, &(i, j)) in net.edges().iter().enumerate() {
            if shifted[k] == 0.0 {
                continue;
            }
            let d = &x[i] - &x[j];
            for r in 0..dim {
                for c in 0..dim {
                    let rank_one = mu * d[r] * d[c];
                    let curv = if r == c { shifted[k] } else { 0.0 };
                    let v = rank_one + curv;
                    hess[(i * dim + r, i * dim + c)] += v;
                    hess[(j * dim + r, j * dim + c)] += v;
                    hess[(i * dim + r, j * dim + c)] -= v;
                    hess[(j * dim + r, i * dim + c)] -= v;
                }
            }
        }
        let mut g = DVector::<f64>::zeros(n);
        for (i, gi) in grads.iter().enumerate() {
            g.rows_mut(i * dim, dim).copy_from(gi);
        }
        let step = solve_with_ridge(hess, &g)?;
        let value_at = |pt: &Vec<DVector<f64>>| {
            penalty_value(expected, net, constraint, gamma, beta, mu, pt)
        };
        let base = value_at(&x)?;
        let descent: f64 = g.dot(&step);
        let mut alpha = 1.0;
        loop {
            let trial: Vec<DVector<f64>> = x
                .iter()
                .enumerate()
                .map(|(i, xi)| xi - step.rows(i * dim, dim) * alpha)
                .collect();
            // Strict decrease required: once the predicted decrease
            // underflows against the value's ulp, accepting "equal" steps
            // would spin forever at the rounding floor.
            let v = value_at(&trial)?;
            if v < base && v <= base - 1e-4 * alpha * descent {
                x = trial;
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-12 {
                // No descent left at this scale; the gradient is at the
                // rounding floor for this μ.
                return Ok(x);
            }
        }
    }
    Err(Error::numeric("penalty Newton solve stalled", None))
}

fn solve_with_ridge(hess: DMatrix<f64>, g: &DVector<f64>) -> Result<DVector<f64>> {
    let n = hess.nrows();
    let mut ridge = 0.0;
    loop {
        let mut h = hess.clone();
        for k in 0..n {
            h[(k, k)] += ridge;
        }
        if let Some(step) = h.lu().solve(g) {
            if step.iter().all(|v| v.is_finite()) {
                return Ok(step);
            }
        }
        ridge = if ridge == 0.0 { 1e-10 } else { ridge * 100.0 };
        if ridge > 1e6 {
            return Err(Error::numeric("penalty Hessian solve failed", None));
        }
    }
}

/// Projected-gradient inner solve for bounded X, Armijo line search on
/// the projection arc, run to a projected-step residual of 1e-11.
#[allow(clippy::too_many_arguments)]
fn pg_inner(
    expected: &[ExpectedObjective],
    net: &Network,
    constraint: &PairConstraint,
    gamma: &[f64],
    beta: &[f64],
    mu: f64,
    mut x: Vec<DVector<f64>>,
    projection: &ProjectionSet,
) -> Result<Vec<DVector<f64>>> {
    let mut step = 1.0;
    for _ in 0..MAX_PG_ITERS {
        let (grads, _) = penalty_grad(expected, net, constraint, gamma, beta, mu, &x)?;
        let base = penalty_value(expected, net, constraint, gamma, beta, mu, &x)?;
        let mut residual = 0.0f64;
        let mut advanced = false;
        // Backtrack from a step that grows again after each success, so a
        // single steep region does not pin the whole solve to a tiny step.
        let mut alpha = step;
        while alpha >= 1e-14 {
            let trial: Vec<DVector<f64>> = x
                .iter()
                .zip(&grads)
                .map(|(xi, gi)| projection.project(xi - gi * alpha))
                .collect();
            let decrease: f64 = trial
                .iter()
                .zip(&x)
                .map(|(t, xi)| (t - xi).norm_squared())
                .sum();
            let v = penalty_value(expected, net, constraint, gamma, beta, mu, &trial)?;
            if v < base && v <= base - (0.5 / alpha) * 1e-4 * decrease {
                residual = decrease.sqrt() / alpha;
                x = trial;
                step = (alpha * 2.0).min(1.0);
                advanced = true;
                break;
            }
            alpha *= 0.5;
        }
        if !advanced || residual <= inner_tol(mu) * 10.0 {
            return Ok(x);
        }
    }
    Err(Error::numeric("penalty projected-gradient solve stalled", None))
}

/// Generic projected gradient with Armijo backtracking, used for the
/// small single-vector polish problems.
fn projected_gradient(
    value: &dyn Fn(&DVector<f64>) -> f64,
    grad: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    mut z: DVector<f64>,
    projection: &ProjectionSet,
) -> Result<DVector<f64>> {
    let mut step = 1.0;
    for _ in 0..MAX_PG_ITERS {
        let g = grad(&z);
        if pg_residual(&z, &g, projection) <= 1e-12 {
            return Ok(z);
        }
        let base = value(&z);
        let mut alpha = step;
        let mut advanced = false;
        while alpha >= 1e-14 {
            let trial = projection.project(&z - &g * alpha);
            let decrease = (&trial - &z).norm_squared();
            let v = value(&trial);
            if v < base && v <= base - (0.5 / alpha) * 1e-4 * decrease {
                z = trial;
                step = (alpha * 2.0).min(1.0);
                advanced = true;
                break;
            }
            alpha *= 0.5;
        }
        if !advanced {
            return Ok(z);
        }
    }
    Err(Error::numeric("projected-gradient polish stalled", None))
}

/// Unit-step projected-gradient mapping residual ‖z − P(z − g)‖∞.
fn pg_residual(z: &DVector<f64>, g: &DVector<f64>, projection: &ProjectionSet) -> f64 {
    (z - projection.project(z - g)).amax()
}

/// KKT residual at (x, β): stationarity of the true Lagrangian through
/// the projection, positive-part infeasibility, and complementarity.
fn kkt_residual(
    expected: &[ExpectedObjective],
    net: &Network,
    constraint: &PairConstraint,
    gamma: &[f64],
    beta: &[f64],
    x: &[DVector<f64>],
    projection: &ProjectionSet,
) -> Result<f64> {
    let mut grads: Vec<DVector<f64>> = expected.iter().zip(x).map(|(e, xi)| e.grad(xi)).collect();
    let slacks = edge_slacks(net, constraint, gamma, x)?;
    let mut residual = 0.0f64;
    for (k, &(i, j)) in net.edges().iter().enumerate() {
        let (_, gi, gj) = constraint_value_and_grads(constraint, i, j, &x[i], &x[j])?;
        grads[i] += gi * beta[k];
        grads[j] += gj * beta[k];
        residual = residual.max(slacks[k].max(0.0));
        residual = residual.max((beta[k] * slacks[k]).abs());
    }
    for (xi, gi) in x.iter().zip(&grads) {
        residual = residual.max(pg_residual(xi, gi, projection));
    }
    Ok(residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::RawGraph;

    fn path_net(n: usize) -> Network {
        let raw = RawGraph {
            positions: (0..n).map(|i| [i as f64, 0.0]).collect(),
            edges: (1..n).map(|i| (i - 1, i)).collect(),
        };
        raw.validate().unwrap()
    }

    fn scalar_expected(means: &[f64]) -> Vec<ExpectedObjective> {
        means
            .iter()
            .map(|&m| {
                ExpectedObjective::new(
                    DMatrix::identity(1, 1),
                    DVector::from_element(1, m),
                    1.0,
                )
                .unwrap()
            })
            .collect()
    }

    /// Two scalar nodes, means (0, 2), proximity level γ=0.125: the
    /// constraint |x₁−x₂| ≤ 0.5 is active and the minimizer sits at
    /// (0.75, 1.25) with edge multiplier 3 (from 2·0.75 = β·0.5).
    #[test]
    fn active_proximity_matches_hand_solution() {
        let net = path_net(2);
        let sol = reference_optimum(
            &scalar_expected(&[0.0, 2.0]),
            &net,
            &PairConstraint::Quadratic,
            &[0.125],
            &ProjectionSet::Unconstrained,
        )
        .unwrap();
        assert!((sol.x[0][0] - 0.75).abs() < 1e-9, "x0 = {}", sol.x[0][0]);
        assert!((sol.x[1][0] - 1.25).abs() < 1e-9, "x1 = {}", sol.x[1][0]);
        let beta = sol.edge_multipliers.as_ref().unwrap();
        assert!((beta[0] - 3.0).abs() < 1e-6, "beta = {}", beta[0]);
        assert!(sol.kkt_residual <= KKT_TOL);
    }

    /// With a slack level beyond the free separation the constraint is
    /// inactive: the free minimizers win and the multiplier vanishes.
    #[test]
    fn inactive_proximity_returns_free_minimizers() {
        let net = path_net(2);
        let sol = reference_optimum(
            &scalar_expected(&[0.0, 2.0]),
            &net,
            &PairConstraint::Quadratic,
            &[10.0],
            &ProjectionSet::Unconstrained,
        )
        .unwrap();
        assert!(sol.x[0][0].abs() < 1e-9);
        assert!((sol.x[1][0] - 2.0).abs() < 1e-9);
        assert!(sol.edge_multipliers.unwrap()[0].abs() < 1e-8);
    }

    /// Bounded X that is inactive at the optimum: the Newton solution is
    /// inside the ball, so the full 1e-10 target holds and the answer
    /// matches the unconstrained hand solution.
    #[test]
    fn inactive_ball_keeps_full_accuracy() {
        let net = path_net(2);
        let sol = reference_optimum(
            &scalar_expected(&[0.0, 2.0]),
            &net,
            &PairConstraint::Quadratic,
            &[0.125],
            &ProjectionSet::ball(1e6).unwrap(),
        )
        .unwrap();
        assert!((sol.x[0][0] - 0.75).abs() < 1e-9);
        assert!((sol.x[1][0] - 1.25).abs() < 1e-9);
        assert!(sol.kkt_residual <= KKT_TOL);
    }

    /// Bounded X that binds exercises the projected-gradient inner path.
    /// Hand solution: with X = [−1, 1] and γ = 0.125 the optimum moves to
    /// (0.5, 1.0) (pair and ball both active, edge multiplier 2, ball
    /// multiplier 1). The multiplier update amplifies the first-order
    /// inner tolerance by μ, so the target here is the coarser 1e-7.
    #[test]
    fn bounded_proximity_uses_projected_inner_solve() {
        let net = path_net(2);
        let sol = reference_optimum(
            &scalar_expected(&[0.0, 2.0]),
            &net,
            &PairConstraint::Quadratic,
            &[0.125],
            &ProjectionSet::ball(1.0).unwrap(),
        )
        .unwrap();
        assert!((sol.x[0][0] - 0.5).abs() < 1e-8, "x0 = {}", sol.x[0][0]);
        assert!((sol.x[1][0] - 1.0).abs() < 1e-8, "x1 = {}", sol.x[1][0]);
        let beta = sol.edge_multipliers.as_ref().unwrap();
        assert!((beta[0] - 2.0).abs() < 1e-4, "beta = {}", beta[0]);
        assert!(sol.kkt_residual <= 1e-7);
    }

    /// Consensus with identity observation collapses to the mean of the
    /// node means.
    #[test]
    fn consensus_reference_is_shared_least_squares() {
        let net = path_net(3);
        let sol = reference_optimum(
            &scalar_expected(&[1.0, 2.0, 6.0]),
            &net,
            &PairConstraint::Consensus,
            &[0.0, 0.0],
            &ProjectionSet::Unconstrained,
        )
        .unwrap();
        for xi in &sol.x {
            assert!((xi[0] - 3.0).abs() < 1e-10);
        }
        assert!(sol.edge_multipliers.is_none());
    }

    /// A ball that excludes the free consensus value pins the shared
    /// vector to the boundary.
    #[test]
    fn consensus_reference_respects_projection() {
        let net = path_net(3);
        let sol = reference_optimum(
            &scalar_expected(&[1.0, 2.0, 6.0]),
            &net,
            &PairConstraint::Consensus,
            &[0.0, 0.0],
            &ProjectionSet::ball(2.0).unwrap(),
        )
        .unwrap();
        for xi in &sol.x {
            assert!((xi[0] - 2.0).abs() < 1e-9);
        }
    }

    /// Matrix observations: two nodes observing complementary coordinates
    /// of a 2-vector under exact consensus reconstruct both coordinates.
    #[test]
    fn consensus_merges_partial_observations() {
        let net = path_net(2);
        let c1 = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let c2 = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let expected = vec![
            ExpectedObjective::new(c1, DVector::from_element(1, 4.0), 0.0).unwrap(),
            ExpectedObjective::new(c2, DVector::from_element(1, -2.0), 0.0).unwrap(),
        ];
        let sol = reference_optimum(
            &expected,
            &net,
            &PairConstraint::Consensus,
            &[0.0],
            &ProjectionSet::Unconstrained,
        )
        .unwrap();
        assert!((sol.x[0][0] - 4.0).abs() < 1e-10);
        assert!((sol.x[0][1] + 2.0).abs() < 1e-10);
    }

    #[test]
    fn invalid_requests_are_rejected() {
        let net = path_net(2);
        let expected = scalar_expected(&[0.0, 2.0]);
        let anchors = vec![DVector::zeros(3), DVector::zeros(3)];
        assert!(reference_optimum(
            &expected,
            &net,
            &PairConstraint::LseRange { anchors },
            &[0.0],
            &ProjectionSet::Unconstrained,
        )
        .is_err());
        assert!(reference_optimum(
            &expected,
            &net,
            &PairConstraint::Consensus,
            &[0.5],
            &ProjectionSet::Unconstrained,
        )
        .is_err());
        assert!(reference_optimum(
            &expected,
            &net,
            &PairConstraint::Quadratic,
            &[0.1, 0.2],
            &ProjectionSet::Unconstrained,
        )
        .is_err());
        assert!(reference_optimum(
            &expected[..1],
            &net,
            &PairConstraint::Quadratic,
            &[0.1],
            &ProjectionSet::Unconstrained,
        )
        .is_err());
    }

    /// Three-node path with distinct proximity levels: minimize
    /// x₁² + (x₂−2)² + (x₃−5)² with ½(x₁−x₂)² ≤ 0.02 and
    /// ½(x₂−x₃)² ≤ 0.08. Both constraints bind (free separations 2 and 3
    /// exceed the bounds 0.2 and 0.4), so with x₁ = x₂ − 0.2 and
    /// x₃ = x₂ + 0.4 the objective is minimized at x₂ = (0.2+2+4.6)/3 =
    /// 34/15, giving x = (31/15, 34/15, 8/3). The active-set KKT rows
    ///   2x₁ + β₁(x₁−x₂) = 0 and 2(x₃−5) − β₂(x₂−x₃) = 0
    /// then give β₁ = 62/3 and β₂ = 35/3, both positive as required.
    #[test]
    fn three_node_chain_matches_dense_kkt_solve() {
        let net = path_net(3);
        let sol = reference_optimum(
            &scalar_expected(&[0.0, 2.0, 5.0]),
            &net,
            &PairConstraint::Quadratic,
            &[0.02, 0.08],
            &ProjectionSet::Unconstrained,
        )
        .unwrap();
        assert!((sol.x[0][0] - 31.0 / 15.0).abs() < 1e-8, "x1={}", sol.x[0][0]);
        assert!((sol.x[1][0] - 34.0 / 15.0).abs() < 1e-8, "x2={}", sol.x[1][0]);
        assert!((sol.x[2][0] - 8.0 / 3.0).abs() < 1e-8, "x3={}", sol.x[2][0]);
        let beta = sol.edge_multipliers.unwrap();
        assert!((beta[0] - 62.0 / 3.0).abs() < 1e-5, "b1={}", beta[0]);
        assert!((beta[1] - 35.0 / 3.0).abs() < 1e-5, "b2={}", beta[1]);
    }
}
