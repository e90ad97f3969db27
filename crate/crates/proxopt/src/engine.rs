//! The stochastic primal-descent / dual-ascent iteration.
//!
//! One synchronous round at step size ε_t updates every node and every
//! directed edge multiplier from the round-start snapshot (x_t, λ_t):
//!
//! ```text
//! x_{i,t+1}  = P_X[ x_{i,t} − ε_t( ∇f_i(x_{i,t}; θ_{i,t})
//!                 + Σ_{j∈n_i} (λ_ij,t + λ_ji,t) ∇_{x_i} h_ij(x_{i,t}, x_{j,t}) ) ]
//! λ_ij,t+1   = max(0, (1 − ε_t δ) λ_ij,t + ε_t (h_ij(x_{i,t}, x_{j,t}) − γ_ij))
//! ```
//!
//! These are exact projected gradient steps (descent in x, ascent in λ) on
//! the sampled regularized Lagrangian
//!
//! ```text
//! L̂_t(x, λ) = Σ_i f_i(x_i; θ_{i,t})
//!            + Σ_{(i,j) directed} ( λ_ij (h_ij − γ_ij) − (δ/2) λ_ij² )
//! ```
//!
//! which is convex in x for λ ≥ 0 and strongly concave in λ for δ > 0.
//! [`step_centralized`] assembles the stacked gradient of L̂_t and takes one
//! step; [`primal_step_decentralized`] + [`dual_step`] compute the same
//! round node-by-node and edge-by-edge. The two paths use different
//! summation arrangements, so their agreement (componentwise to 1e-12) is a
//! meaningful check, exercised by the `equivalence` suite.
//!
//! [`check_decrement`] verifies, per round and per realization, the
//! one-step inequality that drives every convergence statement: for any
//! probe (x, λ) with x ∈ X and λ ≥ 0,
//!
//! ```text
//! L̂_t(x_t, λ) − L̂_t(x, λ_t)
//!   ≤ (1/2ε_t)(‖x_t−x‖² − ‖x_{t+1}−x‖² + ‖λ_t−λ‖² − ‖λ_{t+1}−λ‖²)
//!   + (ε_t/2)(‖∇_x L̂_t‖² + ‖∇_λ L̂_t‖²)
//! ```
//!
//! a deterministic consequence of projection non-expansiveness and the
//! convexity/concavity of L̂_t.

use nalgebra::DVector;

use crate::graph::Network;
use crate::problems::{
    constraint_value_and_grads, objective_value_and_grad, NodeObjective, PairConstraint,
};
use crate::{Error, Result};

/// Slack margin for the per-round decrement inequality: it holds with
/// equality-free real arithmetic, so only rounding can push it negative.
pub const DECREMENT_SLACK: f64 = 1e-9;

/// Stacked per-node decision vectors at a given iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalState {
    /// Decision vector of each node, all of one shared dimension.
    pub x: Vec<DVector<f64>>,
    /// 1-based iteration index of this iterate (the initial state is t=1).
    pub t: usize,
}

impl PrimalState {
    #[must_use]
    pub fn new(x: Vec<DVector<f64>>, t: usize) -> Self {
        PrimalState { x, t }
    }

    /// Squared Euclidean distance to another stacked state.
    #[must_use]
    pub fn dist2(&self, other: &[DVector<f64>]) -> f64 {
        stacked_dist2(&self.x, other)
    }
}

pub(crate) fn stacked_dist2(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).norm_squared()).sum()
}

/// Nonnegative multipliers, one per directed edge.
///
/// For canonical edge k = (i, j) with i < j, slot 2k holds λ_ij (the
/// low-to-high direction) and slot 2k+1 holds λ_ji. Nonnegativity is a
/// construction invariant: the only public constructors validate or clamp.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    lambda: Vec<f64>,
}

impl DualState {
    /// All multipliers zero for a network with `n_edges` canonical edges.
    #[must_use]
    pub fn zeros(n_edges: usize) -> Self {
        DualState {
            lambda: vec![0.0; 2 * n_edges],
        }
    }

    /// Builds from explicit directed values laid out as documented.
    ///
    /// # Errors
    ///
    /// `InvalidArgument` for odd length or any negative / non-finite entry.
    pub fn from_directed(values: Vec<f64>) -> Result<Self> {
        if values.len() % 2 != 0 {
            return Err(Error::invalid(
                "directed multipliers come in pairs; odd count given",
            ));
        }
        if let Some(bad) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid(format!(
                "multipliers must be finite and nonnegative (got {bad})"
            )));
        }
        Ok(DualState { lambda: values })
    }

    /// λ in the low-to-high direction of canonical edge `k`.
    #[must_use]
    pub fn forward(&self, k: usize) -> f64 {
        self.lambda[2 * k]
    }

    /// λ in the high-to-low direction of canonical edge `k`.
    #[must_use]
    pub fn backward(&self, k: usize) -> f64 {
        self.lambda[2 * k + 1]
    }

    /// λ_ij + λ_ji for canonical edge `k`, the weight both endpoints apply
    /// to the coupling gradient.
    #[must_use]
    pub fn pair_sum(&self, k: usize) -> f64 {
        self.lambda[2 * k] + self.lambda[2 * k + 1]
    }

    /// All directed multipliers in storage order.
    #[must_use]
    pub fn values(&self) -> &[f64] {
        &self.lambda
    }

    #[must_use]
    pub fn n_edges(&self) -> usize {
        self.lambda.len() / 2
    }

    /// Euclidean norm over all directed multipliers.
    #[must_use]
    pub fn norm(&self) -> f64 {
        self.lambda.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Squared distance to an explicit directed-multiplier vector.
    #[must_use]
    pub fn dist2(&self, other: &[f64]) -> f64 {
        self.lambda
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// Step-size rule ε_t, defined for rounds t ≥ 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    /// ε_t = ε.
    Constant { eps: f64 },
    /// ε_t = 1/√T for a horizon fixed in advance.
    HorizonConstant { horizon: usize },
    /// ε_t = min(ε, ε t₀ / t): constant for t ≤ t₀, then attenuating.
    Hybrid { eps: f64, t0: usize },
}

impl StepSchedule {
    pub fn constant(eps: f64) -> Result<Self> {
        require_positive_step(eps)?;
        Ok(StepSchedule::Constant { eps })
    }

    pub fn horizon_constant(horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("horizon-matched schedule needs T ≥ 1"));
        }
        Ok(StepSchedule::HorizonConstant { horizon })
    }

    pub fn hybrid(eps: f64, t0: usize) -> Result<Self> {
        require_positive_step(eps)?;
        if t0 == 0 {
            return Err(Error::invalid("hybrid schedule needs t₀ ≥ 1"));
        }
        Ok(StepSchedule::Hybrid { eps, t0 })
    }

    /// Step size for round `t` (1-based).
    #[must_use]
    pub fn eps_at(&self, t: usize) -> f64 {
        debug_assert!(t >= 1, "rounds are 1-based");
        match *self {
            StepSchedule::Constant { eps } => eps,
            StepSchedule::HorizonConstant { horizon } => 1.0 / (horizon as f64).sqrt(),
            StepSchedule::Hybrid { eps, t0 } => eps.min(eps * t0 as f64 / t as f64),
        }
    }
}

fn require_positive_step(eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::invalid(format!(
            "step size must be positive and finite (got {eps})"
        )));
    }
    Ok(())
}

/// The convex set X each node's decision is projected onto.
#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionSet {
    /// Euclidean ball of the given radius centered at the origin.
    Ball { radius: f64 },
    /// Componentwise box [lower_k, upper_k].
    Box {
        lower: DVector<f64>,
        upper: DVector<f64>,
    },
    /// No projection (X = R^d).
    Unconstrained,
}

impl ProjectionSet {
    pub fn ball(radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid(format!(
                "ball radius must be positive and finite (got {radius})"
            )));
        }
        Ok(ProjectionSet::Ball { radius })
    }

    pub fn boxed(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
            return Err(Error::invalid("box bounds must satisfy lower ≤ upper"));
        }
        Ok(ProjectionSet::Box { lower, upper })
    }

    /// Whether `v` already lies in the set (the exact predicate the
    /// projection output satisfies).
    #[must_use]
    pub fn contains(&self, v: &DVector<f64>) -> bool {
        match self {
            ProjectionSet::Ball { radius } => v.norm_squared() <= radius * radius,
            ProjectionSet::Box { lower, upper } => v
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .all(|(x, (l, u))| l <= x && x <= u),
            ProjectionSet::Unconstrained => true,
        }
    }

    /// Euclidean projection onto the set. Idempotent as a float map: the
    /// output always satisfies [`contains`](Self::contains), so projecting
    /// twice returns the first output unchanged.
    #[must_use]
    pub fn project(&self, v: DVector<f64>) -> DVector<f64> {
        match self {
            ProjectionSet::Ball { radius } => {
                let n2 = v.norm_squared();
                if n2 <= radius * radius {
                    return v;
                }
                let mut w = if n2.is_finite() {
                    v * (radius / n2.sqrt())
                } else {
                    // ‖v‖² overflowed. Rescale by the largest magnitude
                    // first so the direction survives; non-finite inputs
                    // pass through for the caller's finiteness guard.
                    let m = v.amax();
                    if !m.is_finite() {
                        return v;
                    }
                    let scaled = v / m;
                    let n = scaled.norm();
                    scaled * (radius / n)
                };
                // Rounding can leave ‖w‖ a few ulps above the radius; nudge
                // down until the membership predicate holds.
                while w.norm_squared() > radius * radius {
                    w *= 1.0 - 2.0 * f64::EPSILON;
                }
                w
            }
            ProjectionSet::Box { lower, upper } => {
                DVector::from_iterator(
                    v.len(),
                    v.iter()
                        .zip(lower.iter().zip(upper.iter()))
                        .map(|(x, (l, u))| x.max(*l).min(*u)),
                )
            }
            ProjectionSet::Unconstrained => v,
        }
    }
}

/// A constrained stochastic problem over a network: per-node objectives,
/// one pairwise coupling family, per-edge slacks γ (stored once per
/// canonical edge, so γ_ij = γ_ji by construction), the dual regularizer δ,
/// and the projection set.
#[derive(Debug, Clone)]
pub struct SaddleProblem {
    objectives: Vec<NodeObjective>,
    constraint: PairConstraint,
    gamma: Vec<f64>,
    delta: f64,
    projection: ProjectionSet,
}

impl SaddleProblem {
    pub fn new(
        objectives: Vec<NodeObjective>,
        constraint: PairConstraint,
        gamma: Vec<f64>,
        delta: f64,
        projection: ProjectionSet,
    ) -> Result<Self> {
        if objectives.is_empty() {
            return Err(Error::invalid("a problem needs at least one node objective"));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::invalid(format!(
                "dual regularizer must be finite and nonnegative (got {delta})"
            )));
        }
        if let Some(bad) = gamma.iter().find(|g| !g.is_finite()) {
            return Err(Error::invalid(format!("slack values must be finite (got {bad})")));
        }
        Ok(SaddleProblem {
            objectives,
            constraint,
            gamma,
            delta,
            projection,
        })
    }

    #[must_use]
    pub fn n_nodes(&self) -> usize {
        self.objectives.len()
    }

    #[must_use]
    pub fn objective(&self, i: usize) -> &NodeObjective {
        &self.objectives[i]
    }

    #[must_use]
    pub fn constraint(&self) -> &PairConstraint {
        &self.constraint
    }

    /// Per-canonical-edge slack values.
    #[must_use]
    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    #[must_use]
    pub fn delta(&self) -> f64 {
        self.delta
    }

    #[must_use]
    pub fn projection(&self) -> &ProjectionSet {
        &self.projection
    }

    fn check_shapes(&self, net: &Network, primal: &PrimalState, dual: &DualState) -> Result<()> {
        if self.objectives.len() != net.n_nodes() {
            return Err(Error::invalid(format!(
                "{} node objectives for a {}-node network",
                self.objectives.len(),
                net.n_nodes()
            )));
        }
        if self.gamma.len() != net.n_edges() {
            return Err(Error::invalid(format!(
                "{} slack values for {} edges",
                self.gamma.len(),
                net.n_edges()
            )));
        }
        if primal.x.len() != net.n_nodes() {
            return Err(Error::invalid(format!(
                "primal state has {} nodes, network has {}",
                primal.x.len(),
                net.n_nodes()
            )));
        }
        if dual.n_edges() != net.n_edges() {
            return Err(Error::invalid(format!(
                "dual state covers {} edges, network has {}",
                dual.n_edges(),
                net.n_edges()
            )));
        }
        Ok(())
    }
}

/// Supplies the per-node observations θ_{i,t} for round t. Implementations
/// must be pure in `t` (calling twice returns the same draw), which makes
/// trajectories replayable for after-the-fact checks.
pub trait ObservationSource {
    fn observe(&self, t: usize) -> Vec<DVector<f64>>;
}

/// A pre-drawn observation table, mostly for tests and hand-built checks.
#[derive(Debug, Clone)]
pub struct FixedObservations {
    pub rounds: Vec<Vec<DVector<f64>>>,
}

impl ObservationSource for FixedObservations {
    fn observe(&self, t: usize) -> Vec<DVector<f64>> {
        self.rounds[t - 1].clone()
    }
}

/// One synchronous primal round: every node takes a projected gradient step
/// using the round-start snapshot.
///
/// # Errors
///
/// `Numeric` naming the node when an update turns non-finite;
/// `InvalidArgument` on shape mismatches.
pub fn primal_step_decentralized(
    problem: &SaddleProblem,
    net: &Network,
    primal: &PrimalState,
    dual: &DualState,
    obs: &[DVector<f64>],
    eps: f64,
) -> Result<PrimalState> {
    problem.check_shapes(net, primal, dual)?;
    if obs.len() != net.n_nodes() {
        return Err(Error::invalid(format!(
            "{} observations for {} nodes",
            obs.len(),
            net.n_nodes()
        )));
    }
    let mut x_next = Vec::with_capacity(net.n_nodes());
    for i in 0..net.n_nodes() {
        let (_, mut g) = objective_value_and_grad(problem.objective(i), &primal.x[i], &obs[i])?;
        for &j in net.neighbors(i) {
            let k = net
                .edge_index(i, j)
                .expect("neighbor lists mirror the edge set");
            let w = dual.pair_sum(k);
            if w != 0.0 {
                let (_, gi, _) = constraint_value_and_grads(
                    problem.constraint(),
                    i,
                    j,
                    &primal.x[i],
                    &primal.x[j],
                )?;
                g += gi * w;
            }
        }
        let v = problem.projection.project(&primal.x[i] - g * eps);
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::numeric(format!("primal update at node {i}"), None));
        }
        x_next.push(v);
    }
    Ok(PrimalState::new(x_next, primal.t + 1))
}

/// One synchronous dual round, evaluated at the same round-start primal
/// snapshot the primal step consumed. The update is independent of the
/// observations by construction (the coupling functions are deterministic),
/// so re-running it with different draws is bit-identical.
pub fn dual_step(
    problem: &SaddleProblem,
    net: &Network,
    primal: &PrimalState,
    dual: &DualState,
    eps: f64,
) -> Result<DualState> {
    problem.check_shapes(net, primal, dual)?;
    let decay = 1.0 - eps * problem.delta;
    let mut lambda = Vec::with_capacity(2 * net.n_edges());
    for (k, &(i, j)) in net.edges().iter().enumerate() {
        let (h, _, _) =
            constraint_value_and_grads(problem.constraint(), i, j, &primal.x[i], &primal.x[j])?;
        if !h.is_finite() {
            return Err(Error::numeric(
                format!("coupling value on edge ({i}, {j})"),
                None,
            ));
        }
        let drive = eps * (h - problem.gamma[k]);
        let fwd = (decay * dual.forward(k) + drive).max(0.0);
        let bwd = (decay * dual.backward(k) + drive).max(0.0);
        // h itself is finite here, but the scaled drive or decay can
        // still overflow for extreme step sizes or multipliers.
        if !fwd.is_finite() || !bwd.is_finite() {
            return Err(Error::numeric(
                format!("multiplier update on edge ({i}, {j})"),
                None,
            ));
        }
        lambda.push(fwd);
        lambda.push(bwd);
    }
    Ok(DualState { lambda })
}

/// Stacked gradient of the sampled Lagrangian at (primal, dual):
/// per-node ∇_x blocks and per-directed-edge ∇_λ entries
/// (h_ij − γ_ij − δ λ_ij). Assembled edge-by-edge (scatter), the
/// arrangement the centralized step uses.
pub fn stacked_grads(
    problem: &SaddleProblem,
    net: &Network,
    primal: &PrimalState,
    dual: &DualState,
    obs: &[DVector<f64>],
) -> Result<(Vec<DVector<f64>>, Vec<f64>)> {
    problem.check_shapes(net, primal, dual)?;
    let mut gx: Vec<DVector<f64>> = Vec::with_capacity(net.n_nodes());
    for i in 0..net.n_nodes() {
        let (_, g) = objective_value_and_grad(problem.objective(i), &primal.x[i], &obs[i])?;
        gx.push(g);
    }
    let mut gl = vec![0.0; 2 * net.n_edges()];
    for (k, &(i, j)) in net.edges().iter().enumerate() {
        let (h, gi, gj) =
            constraint_value_and_grads(problem.constraint(), i, j, &primal.x[i], &primal.x[j])?;
        let w = dual.pair_sum(k);
        if w != 0.0 {
            gx[i] += gi * w;
            gx[j] += gj * w;
        }
        let slack = h - problem.gamma[k];
        gl[2 * k] = slack - problem.delta * dual.forward(k);
        gl[2 * k + 1] = slack - problem.delta * dual.backward(k);
    }
    Ok((gx, gl))
}

/// One full round in stacked form: assembles the Lagrangian gradient and
/// takes a projected descent step in x and a clamped ascent step in λ.
/// Agrees with [`primal_step_decentralized`] + [`dual_step`] componentwise
/// to 1e-12 (the two paths arrange sums and the dual decay differently).
pub fn step_centralized(
    problem: &SaddleProblem,
    net: &Network,
    primal: &PrimalState,
    dual: &DualState,
    obs: &[DVector<f64>],
    eps: f64,
) -> Result<(PrimalState, DualState)> {
    let (gx, gl) = stacked_grads(problem, net, primal, dual, obs)?;
    let mut x_next = Vec::with_capacity(net.n_nodes());
    for (i, (xi, gi)) in primal.x.iter().zip(&gx).enumerate() {
        let v = problem.projection.project(xi - gi * eps);
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::numeric(format!("primal update at node {i}"), None));
        }
        x_next.push(v);
    }
    let lambda = dual
        .lambda
        .iter()
        .zip(&gl)
        .map(|(l, g)| (l + eps * g).max(0.0))
        .collect();
    Ok((
        PrimalState::new(x_next, primal.t + 1),
        DualState { lambda },
    ))
}

/// A completed run: states[k] is the iterate pair (x_{k+1}, λ_{k+1}) in
/// 1-based round numbering (states[0] is the initial pair), and eps[k] is
/// the step size the round starting at states[k] used. A horizon-T run has
/// T+1 states and T step sizes.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<(PrimalState, DualState)>,
    pub eps: Vec<f64>,
}

impl Trajectory {
    /// Number of completed rounds T.
    #[must_use]
    pub fn horizon(&self) -> usize {
        self.eps.len()
    }

    /// The iterate pair (x_t, λ_t) for t in 1..=T+1.
    #[must_use]
    pub fn at(&self, t: usize) -> &(PrimalState, DualState) {
        &self.states[t - 1]
    }
}

/// Runs `horizon` synchronous rounds from the given initial pair. The
/// initial primal state is taken as-is (callers choose whether it lies in
/// X; every produced state does).
///
/// # Errors
///
/// Step failures are propagated with the 1-based round index attached.
pub fn run(
    problem: &SaddleProblem,
    net: &Network,
    source: &dyn ObservationSource,
    schedule: &StepSchedule,
    horizon: usize,
    primal0: Vec<DVector<f64>>,
    dual0: DualState,
) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(horizon + 1);
    states.push((PrimalState::new(primal0, 1), dual0));
    let mut eps_hist = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let eps = schedule.eps_at(t);
        let obs = source.observe(t);
        let (p, d) = states.last().expect("at least the initial state");
        let p_next = primal_step_decentralized(problem, net, p, d, &obs, eps)
            .map_err(|e| e.with_iteration(t))?;
        let d_next = dual_step(problem, net, p, d, eps).map_err(|e| e.with_iteration(t))?;
        states.push((p_next, d_next));
        eps_hist.push(eps);
    }
    Ok(Trajectory {
        states,
        eps: eps_hist,
    })
}

/// Componentwise average x̄_T of the first `upto` primal iterates
/// (x_1 through x_T).
///
/// # Errors
///
/// `InvalidArgument` when `upto` is zero or exceeds the stored states.
pub fn time_average(traj: &Trajectory, upto: usize) -> Result<PrimalState> {
    if upto == 0 || upto > traj.states.len() {
        return Err(Error::invalid(format!(
            "average over {upto} iterates, but the trajectory stores {}",
            traj.states.len()
        )));
    }
    let mut mean = traj.states[0].0.x.clone();
    for (p, _) in &traj.states[1..upto] {
        for (m, xi) in mean.iter_mut().zip(&p.x) {
            *m += xi;
        }
    }
    let scale = 1.0 / upto as f64;
    for m in &mut mean {
        *m *= scale;
    }
    Ok(PrimalState::new(mean, upto))
}

/// Value of the sampled regularized Lagrangian L̂_t at (primal, dual) under
/// the observations of round t.
///
/// # Errors
///
/// `Numeric` if the value turns non-finite.
pub fn lagrangian_value(
    problem: &SaddleProblem,
    net: &Network,
    primal: &PrimalState,
    dual: &DualState,
    obs: &[DVector<f64>],
) -> Result<f64> {
    problem.check_shapes(net, primal, dual)?;
    let mut total = 0.0;
    for i in 0..net.n_nodes() {
        let (f, _) = objective_value_and_grad(problem.objective(i), &primal.x[i], &obs[i])?;
        total += f;
    }
    for (k, &(i, j)) in net.edges().iter().enumerate() {
        let (h, _, _) =
            constraint_value_and_grads(problem.constraint(), i, j, &primal.x[i], &primal.x[j])?;
        let slack = h - problem.gamma[k];
        let (lf, lb) = (dual.forward(k), dual.backward(k));
        total += (lf + lb) * slack - 0.5 * problem.delta * (lf * lf + lb * lb);
    }
    if !total.is_finite() {
        return Err(Error::numeric("Lagrangian value", None));
    }
    Ok(total)
}

/// Outcome of [`check_decrement`] over a trajectory.
#[derive(Debug, Clone)]
pub struct DecrementReport {
    /// Inequality outcome per round (true = holds within the slack margin).
    pub per_round: Vec<bool>,
    /// Smallest observed slack (rhs − lhs), negative means a violation.
    pub worst_slack: f64,
}

impl DecrementReport {
    #[must_use]
    pub fn all_hold(&self) -> bool {
        self.per_round.iter().all(|b| *b)
    }
}

/// Replays a trajectory's rounds and evaluates the one-step decrement
/// inequality against a probe pair. The probe primal must lie in X and the
/// probe multipliers (directed layout) must be nonnegative, which is
/// exactly what the underlying projection argument requires.
///
/// # Errors
///
/// `InvalidArgument` for probes outside their admissible sets or shape
/// mismatches.
pub fn check_decrement(
    problem: &SaddleProblem,
    net: &Network,
    traj: &Trajectory,
    source: &dyn ObservationSource,
    probe_x: &[DVector<f64>],
    probe_lambda: &[f64],
) -> Result<DecrementReport> {
    if probe_x.len() != net.n_nodes() {
        return Err(Error::invalid(format!(
            "probe covers {} nodes, network has {}",
            probe_x.len(),
            net.n_nodes()
        )));
    }
    if probe_x.iter().any(|v| !problem.projection.contains(v)) {
        return Err(Error::invalid("probe primal lies outside the projection set"));
    }
    if probe_lambda.len() != 2 * net.n_edges() {
        return Err(Error::invalid(format!(
            "probe has {} directed multipliers, network needs {}",
            probe_lambda.len(),
            2 * net.n_edges()
        )));
    }
    let probe_primal = PrimalState::new(probe_x.to_vec(), 0);
    let probe_dual = DualState::from_directed(probe_lambda.to_vec())?;

    let mut per_round = Vec::with_capacity(traj.horizon());
    let mut worst = f64::INFINITY;
    for t in 1..=traj.horizon() {
        let obs = source.observe(t);
        let (xt, lt) = traj.at(t);
        let (xn, ln) = traj.at(t + 1);
        let eps = traj.eps[t - 1];

        let lhs = lagrangian_value(problem, net, xt, &probe_dual, &obs)?
            - lagrangian_value(problem, net, &probe_primal, lt, &obs)?;
        let (gx, gl) = stacked_grads(problem, net, xt, lt, &obs)?;
        let g2: f64 = gx.iter().map(DVector::norm_squared).sum::<f64>()
            + gl.iter().map(|v| v * v).sum::<f64>();
        let drift = xt.dist2(probe_x) - xn.dist2(probe_x) + lt.dist2(probe_lambda)
            - ln.dist2(probe_lambda);
        let rhs = drift / (2.0 * eps) + 0.5 * eps * g2;

        let slack = rhs - lhs;
        worst = worst.min(slack);
        per_round.push(slack >= -DECREMENT_SLACK);
    }
    Ok(DecrementReport {
        per_round,
        worst_slack: worst,
    })
}

/// Status of the sufficient condition (N+M)L² + δ²ε² ≤ δ linking the dual
/// regularizer to the gradient bound L. The experiments' δ values are taken
/// from configuration, so the condition is reported, not enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegularizerCondition {
    Satisfied,
    Violated,
    /// No gradient bound supplied; nothing to verify.
    Unverifiable,
}

#[must_use]
pub fn dual_regularizer_condition(
    n_nodes: usize,
    n_directed_multipliers: usize,
    gradient_bound: Option<f64>,
    delta: f64,
    eps: f64,
) -> RegularizerCondition {
    match gradient_bound {
        None => RegularizerCondition::Unverifiable,
        Some(l) => {
            let lhs = (n_nodes + n_directed_multipliers) as f64 * l * l
                + delta * delta * eps * eps;
            if lhs <= delta {
                RegularizerCondition::Satisfied
            } else {
                RegularizerCondition::Violated
            }
        }
    }
}
