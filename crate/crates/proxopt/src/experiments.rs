//! Prebuilt experiment scenarios wiring the graph, problem, engine, and
//! baseline layers together: correlated-field estimation on a sensor
//! network and cooperative source localization from noisy range samples.
//!
//! Both scenarios are built from a [`RunConfig`] and a root seed. Every
//! random draw is keyed by `(root, purpose, run, node, round)` through
//! [`crate::seeding::stream`], so observation streams are pure functions
//! of their coordinates: methods that share a run see byte-identical
//! draws, replicas are independent, and replaying a stream for
//! after-the-fact analysis (the batch benchmark, held-out evaluation)
//! costs nothing but CPU.
//!
//! Replicas of an experiment run in parallel; aggregation is an ordered
//! reduction, so results are independent of the worker count.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::baselines::{dogd_step, lmmse_alt_formula, metropolis_weights};
use crate::config::{
    ConstraintKind, GammaRule, MonitorChoice, PlacementKind, RunConfig, ScenarioKind, ScheduleKind,
    TopologyKind,
};
use crate::engine::{
    self, DualState, ObservationSource, PrimalState, ProjectionSet, SaddleProblem, StepSchedule,
    Trajectory,
};
use crate::graph::{self, Network, Placement, Region, TopologyParams};
use crate::metrics::{jensen_check, JensenReport, MetricsSeries};
use crate::problems::{
    constraint_value_and_grads, objective_value_and_grad, ExpectedObjective, NodeObjective,
    PairConstraint,
};
use crate::seeding::{stream, Stream};
use crate::{Error, Result};

/// The estimation methods an experiment can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodId {
    /// Saddle-point iteration with the scenario's pairwise proximity
    /// constraint (quadratic-with-slack for the field, anchored
    /// log-sum-exp for localization).
    SpProximity,
    /// Saddle-point iteration with the exact-agreement constraint.
    SpConsensus,
    /// Distributed online gradient descent: neighbor averaging with
    /// Metropolis weights followed by a local stochastic gradient step.
    Dogd,
    /// Correlation-blind least-mean-squares stream: each node runs the
    /// same stochastic gradient update on its own quadratic loss with the
    /// same step schedule, but without the pairwise coupling term.
    LmsStream,
}

impl MethodId {
    /// Stable kebab-case name, used in CLI flags and output file names.
    #[must_use]
    pub fn name(self) -> &'static str {
        match self {
            MethodId::SpProximity => "sp-proximity",
            MethodId::SpConsensus => "sp-consensus",
            MethodId::Dogd => "dogd",
            MethodId::LmsStream => "lms-stream",
        }
    }

    /// Inverse of [`MethodId::name`].
    ///
    /// # Errors
    ///
    /// `InvalidArgument` for an unknown name.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sp-proximity" => Ok(MethodId::SpProximity),
            "sp-consensus" => Ok(MethodId::SpConsensus),
            "dogd" => Ok(MethodId::Dogd),
            "lms-stream" => Ok(MethodId::LmsStream),
            other => Err(Error::invalid(format!(
                "unknown method {other:?} (expected sp-proximity, sp-consensus, dogd, or lms-stream)"
            ))),
        }
    }

    /// The methods an experiment runs when none are requested explicitly.
    #[must_use]
    pub fn defaults_for(kind: ScenarioKind) -> Vec<MethodId> {
        match kind {
            ScenarioKind::Field => vec![MethodId::SpProximity, MethodId::LmsStream],
            ScenarioKind::Localization => vec![
                MethodId::SpProximity,
                MethodId::SpConsensus,
                MethodId::Dogd,
            ],
        }
    }

    /// Whether the method maintains dual variables.
    #[must_use]
    pub fn is_saddle(self) -> bool {
        matches!(self, MethodId::SpProximity | MethodId::SpConsensus)
    }
}

/// Builds the network a config describes. Grid topologies ignore the
/// seed; random geometric ones draw their placement seed from the
/// `Placement` stream of `root`, and honor `fiedler_match` by regenerating
/// until the algebraic connectivity lands in the requested band.
///
/// # Errors
///
/// `InvalidArgument` for malformed dimensions, `GenerationFailure` when a
/// connected (or connectivity-matched) graph cannot be found.
pub fn network_from_config(cfg: &RunConfig, root: u64) -> Result<Network> {
    let region = Region::new(cfg.width, cfg.height)?;
    let params = match cfg.topology {
        TopologyKind::Grid => TopologyParams::Grid {
            rows: cfg.rows,
            cols: cfg.cols,
            region,
        },
        TopologyKind::RandomGeometric => TopologyParams::RandomGeometric {
            n: cfg.nodes,
            region,
            radius: cfg.radius,
            placement: match cfg.placement {
                PlacementKind::Uniform => Placement::Uniform,
                PlacementKind::Gaussian => Placement::Gaussian,
            },
        },
    };
    let seed = stream(root, Stream::Placement, 0, 0, 0).gen::<u64>();
    match cfg.fiedler_match {
        Some(target) => graph::match_fiedler_value(target, &params, cfg.fiedler_tol, seed),
        None => graph::generate(&params, seed),
    }
}

/// The step-size rule a config describes.
///
/// # Errors
///
/// `InvalidArgument` for non-positive parameters.
pub fn schedule_from_config(cfg: &RunConfig) -> Result<StepSchedule> {
    match cfg.schedule {
        ScheduleKind::Constant => StepSchedule::constant(cfg.eps),
        ScheduleKind::HorizonConstant => StepSchedule::horizon_constant(cfg.horizon),
        ScheduleKind::Hybrid => StepSchedule::hybrid(cfg.eps, cfg.t0),
    }
}

fn resolve_monitor(cfg: &RunConfig, net: &Network) -> Result<usize> {
    match cfg.monitor {
        MonitorChoice::Node(i) => {
            if i >= net.n_nodes() {
                return Err(Error::invalid(format!(
                    "monitor node {i} out of range for {} nodes",
                    net.n_nodes()
                )));
            }
            Ok(i)
        }
        // Deterministic stand-in for "an arbitrary node": the one nearest
        // the region center (ties break toward the lower index).
        MonitorChoice::Auto => {
            let region = Region::new(cfg.width, cfg.height)?;
            Ok(net.nearest_node(region.center()))
        }
    }
}

fn runs_as_u32(runs: usize) -> Result<u32> {
    u32::try_from(runs).map_err(|_| Error::invalid(format!("replica count {runs} out of range")))
}

fn check_round_keyable(horizon: usize) -> Result<()> {
    u32::try_from(horizon)
        .map(|_| ())
        .map_err(|_| Error::invalid(format!("horizon {horizon} out of range for draw keying")))
}

/// The per-node constraint-violation display metric: the quantity the
/// violation columns of the metrics CSV report for the monitored node.
///
/// The reported sum depends on the constraint family:
///
/// * quadratic / log-sum-exp proximity: `Σ_{j ∈ n_i} (h_ij − γ_ij)`,
///   signed (negative means slack to spare; the CSV also carries the
///   clamped value);
/// * consensus: `Σ_{j ∈ n_i} ‖x_i − x_j‖`, the plain disagreement
///   distance, which is the conventional display for agreement methods.
///
/// # Errors
///
/// `InvalidArgument` for a node out of range or mismatched shapes.
pub fn node_violation(
    net: &Network,
    constraint: &PairConstraint,
    gamma: &[f64],
    x: &[DVector<f64>],
    node: usize,
) -> Result<f64> {
    if node >= net.n_nodes() {
        return Err(Error::invalid(format!(
            "node {node} out of range for {} nodes",
            net.n_nodes()
        )));
    }
    if x.len() != net.n_nodes() {
        return Err(Error::invalid(format!(
            "state covers {} nodes, network has {}",
            x.len(),
            net.n_nodes()
        )));
    }
    if gamma.len() != net.n_edges() {
        return Err(Error::invalid(format!(
            "{} slack values for {} edges",
            gamma.len(),
            net.n_edges()
        )));
    }
    let mut total = 0.0;
    for &j in net.neighbors(node) {
        match constraint {
            PairConstraint::Consensus => total += (&x[node] - &x[j]).norm(),
            _ => {
                let k = net
                    .edge_index(node, j)
                    .ok_or_else(|| Error::invalid(format!("no edge between {node} and {j}")))?;
                let (h, _, _) = constraint_value_and_grads(constraint, node, j, &x[node], &x[j])?;
                total += h - gamma[k];
            }
        }
    }
    Ok(total)
}

// ---------------------------------------------------------------------
// Field estimation scenario
// ---------------------------------------------------------------------

/// Correlated-field estimation: each node observes its own scalar field
/// value through identity measurements with additive Gaussian noise, and
/// the pairwise slack couples neighbors whose fields are correlated.
///
/// The correlation kernel is `ρ(i,j) = e^{−‖p_i − p_j‖ / L}` with length
/// scale `L = corr_len · side` (the longer region side), so the coupling
/// strength is scale-free while the network keeps its physical
/// coordinates. The true field is drawn per run as `x ~ N(1, R)` with `R`
/// the correlation matrix; the per-edge slack is `ρ`, `1 − ρ`, or
/// `9(1 − ρ)` depending on the configured rule.
#[derive(Debug, Clone)]
pub struct FieldScenario {
    net: Network,
    problem: SaddleProblem,
    corr: DMatrix<f64>,
    chol_l: DMatrix<f64>,
    sigma2: f64,
    schedule: StepSchedule,
    horizon: usize,
    runs: u32,
    monitor: usize,
}

/// Observation stream for the field scenario: `θ_{i,t} = x_i + σ w` with
/// `w` standard normal, keyed by `(root, run, node, round)`.
#[derive(Debug, Clone)]
pub struct FieldObservations {
    root: u64,
    run: u32,
    sigma: f64,
    x_true: DVector<f64>,
}

impl ObservationSource for FieldObservations {
    fn observe(&self, t: usize) -> Vec<DVector<f64>> {
        (0..self.x_true.len())
            .map(|i| {
                let mut rng = stream(self.root, Stream::Observation, self.run, i as u32, t as u32);
                let w: f64 = rng.sample(StandardNormal);
                DVector::from_element(1, self.x_true[i] + self.sigma * w)
            })
            .collect()
    }
}

/// Result of the all-rounds batch estimate used as the field benchmark.
#[derive(Debug, Clone)]
pub struct FieldBenchmark {
    /// Posterior-mean estimate of the whole field from every observation
    /// of the run.
    pub estimate: DVector<f64>,
    /// Pooled per-node-centered sample noise variance (unbiased, N(T−1)
    /// degrees of freedom).
    pub noise_var: f64,
    /// Per-node observation means across rounds.
    pub mean_obs: DVector<f64>,
}

impl FieldScenario {
    /// Builds the scenario a field config describes. The root seed fixes
    /// the topology when it is randomly generated.
    ///
    /// # Errors
    ///
    /// `InvalidArgument` for a non-field config or one that fails
    /// validation; `Numeric` if the correlation matrix cannot be
    /// factorized.
    pub fn from_config(cfg: &RunConfig, root: u64) -> Result<Self> {
        cfg.validate()?;
        if cfg.kind != ScenarioKind::Field {
            return Err(Error::invalid("the field scenario needs kind = field"));
        }
        check_round_keyable(cfg.horizon)?;
        let runs = runs_as_u32(cfg.runs)?;
        let net = network_from_config(cfg, root)?;
        let n = net.n_nodes();
        let scale = cfg.width.max(cfg.height) * cfg.corr_len;
        let mut corr = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                corr[(i, j)] = if i == j {
                    1.0
                } else {
                    (-net.distance(i, j) / scale).exp()
                };
            }
        }
        let chol = Cholesky::new(corr.clone()).ok_or_else(|| {
            Error::numeric("field correlation matrix is not positive definite", None)
        })?;
        let (constraint, gamma) = match cfg.constraint {
            ConstraintKind::Quadratic => {
                let gamma = net
                    .edges()
                    .iter()
                    .map(|&(i, j)| match cfg.gamma_rule {
                        GammaRule::Corr => corr[(i, j)],
                        GammaRule::OneMinusCorr => 1.0 - corr[(i, j)],
                        GammaRule::ThreeSigma => 9.0 * (1.0 - corr[(i, j)]),
                    })
                    .collect();
                (PairConstraint::Quadratic, gamma)
            }
            ConstraintKind::Consensus => (PairConstraint::Consensus, vec![0.0; net.n_edges()]),
            ConstraintKind::LseRange => {
                return Err(Error::invalid(
                    "constraint = lse-range applies to the localization scenario only",
                ))
            }
        };
        let objectives = vec![NodeObjective::scalar_identity(); n];
        let problem = SaddleProblem::new(
            objectives,
            constraint,
            gamma,
            cfg.delta,
            ProjectionSet::ball(cfg.projection_radius)?,
        )?;
        let schedule = schedule_from_config(cfg)?;
        let monitor = resolve_monitor(cfg, &net)?;
        Ok(FieldScenario {
            net,
            problem,
            corr,
            chol_l: chol.l(),
            sigma2: cfg.sigma2,
            schedule,
            horizon: cfg.horizon,
            runs,
            monitor,
        })
    }

    #[must_use]
    pub fn net(&self) -> &Network {
        &self.net
    }

    #[must_use]
    pub fn problem(&self) -> &SaddleProblem {
        &self.problem
    }

    /// Full pairwise correlation matrix (unit diagonal).
    #[must_use]
    pub fn corr(&self) -> &DMatrix<f64> {
        &self.corr
    }

    #[must_use]
    pub fn schedule(&self) -> StepSchedule {
        self.schedule
    }

    #[must_use]
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[must_use]
    pub fn runs(&self) -> u32 {
        self.runs
    }

    #[must_use]
    pub fn monitor(&self) -> usize {
        self.monitor
    }

    #[must_use]
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// The deterministic initial decision: every node starts at the prior
    /// mean.
    #[must_use]
    pub fn initial_state(&self) -> Vec<DVector<f64>> {
        vec![DVector::from_element(1, 1.0); self.net.n_nodes()]
    }

    /// The true field realization of one run: `x = 1 + L z` with `L` the
    /// Cholesky factor of the correlation matrix and `z` standard normal.
    #[must_use]
    pub fn x_true(&self, root: u64, run: u32) -> DVector<f64> {
        let mut rng = stream(root, Stream::FieldTruth, run, 0, 0);
        let z = DVector::from_iterator(
            self.net.n_nodes(),
            (0..self.net.n_nodes()).map(|_| rng.sample::<f64, _>(StandardNormal)),
        );
        DVector::from_element(self.net.n_nodes(), 1.0) + &self.chol_l * z
    }

    /// The observation stream of one run.
    #[must_use]
    pub fn observations(&self, root: u64, run: u32) -> FieldObservations {
        FieldObservations {
            root,
            run,
            sigma: self.sigma2.sqrt(),
            x_true: self.x_true(root, run),
        }
    }

    /// Closed-form expected objectives for a fixed field realization:
    /// per node, `E f_i(x) = (x − x_i^true)² + σ²`.
    ///
    /// # Errors
    ///
    /// `InvalidArgument` if the realization length disagrees.
    pub fn expected(&self, x_true: &DVector<f64>) -> Result<Vec<ExpectedObjective>> {
        if x_true.len() != self.net.n_nodes() {
            return Err(Error::invalid(format!(
                "field realization covers {} nodes, network has {}",
                x_true.len(),
                self.net.n_nodes()
            )));
        }
        (0..self.net.n_nodes())
            .map(|i| {
                ExpectedObjective::new(
                    DMatrix::identity(1, 1),
                    DVector::from_element(1, x_true[i]),
                    self.sigma2,
                )
            })
            .collect()
    }

    /// Batch posterior-mean benchmark over all `T` rounds of a run:
    /// replays the observation stream, pools the per-node-centered sample
    /// variance as the noise-floor estimate, and solves
    /// `(T R + σ̂² I) y = R Σ_t (θ_t − 1)` for the centered estimate.
    ///
    /// # Errors
    ///
    /// `InvalidArgument` when the horizon is below 2 (the variance pool
    /// needs at least one degree of freedom per node); `Numeric` if the
    /// normal system is singular.
    pub fn batch_benchmark(&self, root: u64, run: u32) -> Result<FieldBenchmark> {
        let n = self.net.n_nodes();
        let t_rounds = self.horizon;
        if t_rounds < 2 {
            return Err(Error::invalid(
                "the batch benchmark needs at least two rounds to estimate the noise floor",
            ));
        }
        let src = self.observations(root, run);
        let mut sum = DVector::<f64>::zeros(n);
        let mut sumsq = DVector::<f64>::zeros(n);
        for t in 1..=t_rounds {
            for (i, obs) in src.observe(t).iter().enumerate() {
                sum[i] += obs[0];
                sumsq[i] += obs[0] * obs[0];
            }
        }
        let tf = t_rounds as f64;
        let mut pooled = 0.0;
        for i in 0..n {
            pooled += sumsq[i] - sum[i] * sum[i] / tf;
        }
        // Rounding can push an exact-zero pool slightly negative.
        let noise_var = (pooled / (n as f64 * (tf - 1.0))).max(0.0);
        let centered = &sum - DVector::from_element(n, tf);
        let mut a = &self.corr * tf;
        for k in 0..n {
            a[(k, k)] += noise_var;
        }
        let rhs = &self.corr * centered;
        let y = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::numeric("batch benchmark normal equations", None))?;
        Ok(FieldBenchmark {
            estimate: DVector::from_element(n, 1.0) + y,
            noise_var,
            mean_obs: sum / tf,
        })
    }

    /// Evaluates the alternative single-slot estimator expression on the
    /// round-averaged observations, for side-by-side inspection; see
    /// [`lmmse_alt_formula`].
    ///
    /// # Errors
    ///
    /// `InvalidArgument` when the pooled noise variance is zero (the
    /// expression divides by it).
    pub fn alt_estimate(&self, bench: &FieldBenchmark) -> Result<DVector<f64>> {
        let n = self.net.n_nodes();
        lmmse_alt_formula(
            &DMatrix::identity(n, n),
            &self.corr,
            bench.noise_var,
            &bench.mean_obs,
        )
    }
}

// ---------------------------------------------------------------------
// Source localization scenario
// ---------------------------------------------------------------------

/// Range-based source localization: every node measures its distance to a
/// common source with noise whose variance grows linearly with that
/// distance, and estimates the lifted vector `y = [z, ‖z‖²]` through the
/// squared-range least-squares objective.
///
/// Anchor positions and the source (the mean of all anchors) live in
/// coordinates normalized by the longer region side, so step sizes are
/// comparable across region scales. Both saddle-point variants and the
/// gradient-averaging baseline share observation streams and initial
/// states draw-for-draw.
#[derive(Debug, Clone)]
pub struct LocalizationScenario {
    net: Network,
    anchors: Vec<[f64; 2]>,
    source: [f64; 2],
    true_y: DVector<f64>,
    dists: Vec<f64>,
    range_c: f64,
    objectives: Vec<NodeObjective>,
    proximity: SaddleProblem,
    consensus: SaddleProblem,
    schedule: StepSchedule,
    dogd_eps: f64,
    horizon: usize,
    runs: u32,
    monitor: usize,
    held_out: usize,
}

/// Observation stream for localization: node `i` sees
/// `b = r̂² − ‖l_i‖²` where `r̂ = d_i + √(c·d_i)·w` is its noisy range
/// sample, keyed by `(root, run, node, round)`.
#[derive(Debug, Clone)]
pub struct RangeObservations {
    root: u64,
    run: u32,
    dists: Vec<f64>,
    noise_sd: Vec<f64>,
    anchor_norm2: Vec<f64>,
}

impl RangeObservations {
    fn draw(&self, i: usize, rng: &mut impl Rng) -> f64 {
        let w: f64 = rng.sample(StandardNormal);
        let r = self.dists[i] + self.noise_sd[i] * w;
        r * r - self.anchor_norm2[i]
    }
}

impl ObservationSource for RangeObservations {
    fn observe(&self, t: usize) -> Vec<DVector<f64>> {
        (0..self.dists.len())
            .map(|i| {
                let mut rng = stream(self.root, Stream::Observation, self.run, i as u32, t as u32);
                DVector::from_element(1, self.draw(i, &mut rng))
            })
            .collect()
    }
}

impl LocalizationScenario {
    /// Builds the scenario a localization config describes.
    ///
    /// # Errors
    ///
    /// `InvalidArgument` for a non-localization config or one that fails
    /// validation.
    pub fn from_config(cfg: &RunConfig, root: u64) -> Result<Self> {
        cfg.validate()?;
        if cfg.kind != ScenarioKind::Localization {
            return Err(Error::invalid(
                "the localization scenario needs kind = localization",
            ));
        }
        check_round_keyable(cfg.horizon)?;
        let runs = runs_as_u32(cfg.runs)?;
        let net = network_from_config(cfg, root)?;
        let n = net.n_nodes();
        let scale = cfg.width.max(cfg.height);
        let anchors: Vec<[f64; 2]> = net
            .positions()
            .iter()
            .map(|p| [p[0] / scale, p[1] / scale])
            .collect();
        let nf = n as f64;
        let source = [
            anchors.iter().map(|a| a[0]).sum::<f64>() / nf,
            anchors.iter().map(|a| a[1]).sum::<f64>() / nf,
        ];
        let true_y = DVector::from_vec(vec![
            source[0],
            source[1],
            source[0] * source[0] + source[1] * source[1],
        ]);
        let dists: Vec<f64> = anchors
            .iter()
            .map(|a| ((a[0] - source[0]).powi(2) + (a[1] - source[1]).powi(2)).sqrt())
            .collect();
        let objectives: Vec<NodeObjective> = anchors
            .iter()
            .map(|&l| NodeObjective::squared_range(l))
            .collect();
        let projection = ProjectionSet::ball(cfg.projection_radius)?;
        let zeros = vec![0.0; net.n_edges()];
        let proximity = SaddleProblem::new(
            objectives.clone(),
            PairConstraint::lse_range(&anchors),
            zeros.clone(),
            cfg.delta,
            projection.clone(),
        )?;
        let consensus = SaddleProblem::new(
            objectives.clone(),
            PairConstraint::Consensus,
            zeros,
            cfg.delta,
            projection,
        )?;
        let schedule = schedule_from_config(cfg)?;
        let monitor = resolve_monitor(cfg, &net)?;
        Ok(LocalizationScenario {
            net,
            anchors,
            source,
            true_y,
            dists,
            range_c: cfg.range_c,
            objectives,
            proximity,
            consensus,
            schedule,
            dogd_eps: cfg.eps,
            horizon: cfg.horizon,
            runs,
            monitor,
            held_out: cfg.held_out,
        })
    }

    #[must_use]
    pub fn net(&self) -> &Network {
        &self.net
    }

    /// Anchor positions in normalized coordinates.
    #[must_use]
    pub fn anchors(&self) -> &[[f64; 2]] {
        &self.anchors
    }

    /// The true source position (normalized): the mean of all anchors.
    #[must_use]
    pub fn source(&self) -> [f64; 2] {
        self.source
    }

    /// The lifted truth `[z, ‖z‖²]` the squared-range objective targets.
    #[must_use]
    pub fn true_y(&self) -> &DVector<f64> {
        &self.true_y
    }

    /// True node-to-source distances (normalized).
    #[must_use]
    pub fn dists(&self) -> &[f64] {
        &self.dists
    }

    #[must_use]
    pub fn objectives(&self) -> &[NodeObjective] {
        &self.objectives
    }

    /// The problem the proximity-constrained saddle method solves.
    #[must_use]
    pub fn proximity_problem(&self) -> &SaddleProblem {
        &self.proximity
    }

    /// The problem the agreement-constrained saddle method solves.
    #[must_use]
    pub fn consensus_problem(&self) -> &SaddleProblem {
        &self.consensus
    }

    #[must_use]
    pub fn schedule(&self) -> StepSchedule {
        self.schedule
    }

    /// The flat step size the gradient-averaging baseline uses.
    #[must_use]
    pub fn dogd_eps(&self) -> f64 {
        self.dogd_eps
    }

    #[must_use]
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[must_use]
    pub fn runs(&self) -> u32 {
        self.runs
    }

    #[must_use]
    pub fn monitor(&self) -> usize {
        self.monitor
    }

    /// Per-node initial decisions, drawn uniformly from the unit cube.
    #[must_use]
    pub fn initial_state(&self, root: u64, run: u32) -> Vec<DVector<f64>> {
        (0..self.net.n_nodes())
            .map(|i| {
                let mut rng = stream(root, Stream::InitialState, run, i as u32, 0);
                DVector::from_iterator(3, (0..3).map(|_| rng.gen::<f64>()))
            })
            .collect()
    }

    /// The observation stream of one run.
    #[must_use]
    pub fn observations(&self, root: u64, run: u32) -> RangeObservations {
        RangeObservations {
            root,
            run,
            dists: self.dists.clone(),
            noise_sd: self
                .dists
                .iter()
                .map(|&d| (self.range_c * d).sqrt())
                .collect(),
            anchor_norm2: self
                .anchors
                .iter()
                .map(|a| a[0] * a[0] + a[1] * a[1])
                .collect(),
        }
    }

    /// First and second moments of one node's held-out observation batch
    /// (fresh draws, fixed per run), the sufficient statistics for
    /// evaluating the node's objective out of sample.
    #[must_use]
    pub fn held_out_stats(&self, root: u64, run: u32, node: usize) -> (f64, f64) {
        let src = self.observations(root, run);
        let mut rng = stream(root, Stream::HeldOut, run, node as u32, 0);
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..self.held_out {
            let b = src.draw(node, &mut rng);
            sum += b;
            sumsq += b * b;
        }
        let kf = self.held_out as f64;
        (sum / kf, sumsq / kf)
    }

    /// Closed-form expected objectives: with range noise variance
    /// `v = c·d`, node `i`'s observation has mean `d² + v − ‖l‖²` and
    /// variance `4d²v + 2v²`, so `E f(y) = (a·y − m)² + Var`.
    ///
    /// # Errors
    ///
    /// Propagated from objective construction (cannot fail for finite
    /// geometry).
    pub fn expected(&self) -> Result<Vec<ExpectedObjective>> {
        (0..self.net.n_nodes())
            .map(|i| {
                let l = self.anchors[i];
                let d = self.dists[i];
                let v = self.range_c * d;
                let c = DMatrix::from_row_slice(1, 3, &[-2.0 * l[0], -2.0 * l[1], 1.0]);
                let m = d * d + v - (l[0] * l[0] + l[1] * l[1]);
                let floor = 4.0 * d * d * v + 2.0 * v * v;
                ExpectedObjective::new(c, DVector::from_element(1, m), floor)
            })
            .collect()
    }
}

/// Runs the correlation-blind least-mean-squares stream: the saddle
/// method's primal update with the multipliers pinned at zero, so the
/// coupling term vanishes and each node filters its own observations
/// independently. Wrapped in a [`Trajectory`] (with zero dual states) so
/// trajectory consumers treat all methods uniformly.
fn lms_trajectory(
    problem: &SaddleProblem,
    net: &Network,
    src: &dyn ObservationSource,
    schedule: &StepSchedule,
    horizon: usize,
    x0: Vec<DVector<f64>>,
) -> Result<Trajectory> {
    let zero_dual = DualState::zeros(net.n_edges());
    let mut states = Vec::with_capacity(horizon + 1);
    states.push((PrimalState::new(x0, 1), zero_dual.clone()));
    let mut eps_hist = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let eps = schedule.eps_at(t);
        let obs = src.observe(t);
        let cur = &states.last().expect("at least the initial state").0;
        let next = engine::primal_step_decentralized(problem, net, cur, &zero_dual, &obs, eps)
            .map_err(|e| e.with_iteration(t))?;
        states.push((next, zero_dual.clone()));
        eps_hist.push(eps);
    }
    Ok(Trajectory {
        states,
        eps: eps_hist,
    })
}

/// Runs the gradient-averaging baseline and wraps it in a [`Trajectory`]
/// (with zero dual states) so trajectory consumers treat all methods
/// uniformly.
fn dogd_trajectory(
    objectives: &[NodeObjective],
    net: &Network,
    src: &dyn ObservationSource,
    eps: f64,
    horizon: usize,
    y0: Vec<DVector<f64>>,
) -> Result<Trajectory> {
    let weights = metropolis_weights(net);
    let n_edges = net.n_edges();
    let mut states = Vec::with_capacity(horizon + 1);
    states.push((PrimalState::new(y0, 1), DualState::zeros(n_edges)));
    let mut eps_hist = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let obs = src.observe(t);
        let cur = &states.last().expect("at least the initial state").0;
        let mut grads = Vec::with_capacity(objectives.len());
        for (i, obj) in objectives.iter().enumerate() {
            let (_, g) =
                objective_value_and_grad(obj, &cur.x[i], &obs[i]).map_err(|e| e.with_iteration(t))?;
            grads.push(g);
        }
        let next = dogd_step(&weights, cur, &grads, eps).map_err(|e| e.with_iteration(t))?;
        states.push((next, DualState::zeros(n_edges)));
        eps_hist.push(eps);
    }
    Ok(Trajectory {
        states,
        eps: eps_hist,
    })
}

// ---------------------------------------------------------------------
// Experiment drivers
// ---------------------------------------------------------------------

/// Everything one method produced across the replicas of an experiment.
#[derive(Debug, Clone)]
pub struct MethodOutput {
    pub method: MethodId,
    /// Pointwise mean of the replica series.
    pub mean: MetricsSeries,
    /// One metric series per replica, in replica order.
    pub replicas: Vec<MetricsSeries>,
    /// Convexity check of each replica's averaged iterate (saddle methods
    /// only; empty otherwise).
    pub jensen: Vec<JensenReport>,
    /// Final primal state of each replica.
    pub final_primal: Vec<Vec<DVector<f64>>>,
    /// Final directed multipliers of each replica (empty for dual-free
    /// methods).
    pub final_dual: Vec<Vec<f64>>,
}

/// Output of a full experiment: one entry per requested method, plus the
/// field scenario's batch-benchmark numbers when applicable.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub methods: Vec<MethodOutput>,
    /// Per-replica excess risk of the batch benchmark at the monitored
    /// node (field scenario only; empty otherwise).
    pub benchmark_excess: Vec<f64>,
    /// Same, for the alternative estimator expression, when requested.
    pub alt_benchmark_excess: Option<Vec<f64>>,
}

struct MethodRun {
    series: MetricsSeries,
    jensen: Option<JensenReport>,
    final_x: Vec<DVector<f64>>,
    final_dual: Vec<f64>,
}

struct RunOutputs {
    per_method: Vec<MethodRun>,
    benchmark_excess: Option<f64>,
    alt_excess: Option<f64>,
}

/// Runs the experiment a config describes: dispatches on the scenario
/// kind, runs every replica (in parallel) for every requested method, and
/// aggregates. The config must carry a seed.
///
/// # Errors
///
/// `InvalidArgument` for a missing seed, an empty or incompatible method
/// list, or a config that fails validation; numeric failures are
/// propagated with their replica's round attached.
pub fn run_experiment(
    cfg: &RunConfig,
    methods: &[MethodId],
    alt_benchmark: bool,
) -> Result<ExperimentOutput> {
    let root = cfg
        .seed
        .ok_or_else(|| Error::invalid("a run needs a root seed (config key seed or --seed)"))?;
    match cfg.kind {
        ScenarioKind::Field => run_field_experiment(cfg, root, methods, alt_benchmark),
        ScenarioKind::Localization => {
            if alt_benchmark {
                return Err(Error::invalid(
                    "the alternative benchmark expression applies to the field scenario only",
                ));
            }
            run_localization_experiment(cfg, root, methods)
        }
    }
}

/// Field-estimation experiment driver. Accepts the saddle method and the
/// correlation-blind least-mean-squares stream.
///
/// # Errors
///
/// See [`run_experiment`].
pub fn run_field_experiment(
    cfg: &RunConfig,
    root: u64,
    methods: &[MethodId],
    alt_benchmark: bool,
) -> Result<ExperimentOutput> {
    check_methods(methods, &[MethodId::SpProximity, MethodId::LmsStream], "field")?;
    let scn = FieldScenario::from_config(cfg, root)?;
    let outputs: Vec<RunOutputs> = (0..scn.runs)
        .into_par_iter()
        .map(|run| field_run(&scn, root, run, methods, alt_benchmark))
        .collect::<Result<_>>()?;
    regroup(methods, outputs)
}

/// Source-localization experiment driver. Accepts both saddle variants
/// and the gradient-averaging baseline.
///
/// # Errors
///
/// See [`run_experiment`].
pub fn run_localization_experiment(
    cfg: &RunConfig,
    root: u64,
    methods: &[MethodId],
) -> Result<ExperimentOutput> {
    check_methods(
        methods,
        &[MethodId::SpProximity, MethodId::SpConsensus, MethodId::Dogd],
        "localization",
    )?;
    let scn = LocalizationScenario::from_config(cfg, root)?;
    let outputs: Vec<RunOutputs> = (0..scn.runs)
        .into_par_iter()
        .map(|run| loc_run(&scn, root, run, methods))
        .collect::<Result<_>>()?;
    regroup(methods, outputs)
}

/// Reconstructs the full iterate/multiplier trajectory of one
/// (method, replica) pair, e.g. for state dumps. Baseline methods carry
/// all-zero multiplier states. Replicas are pure functions of the seed,
/// so the replay is bit-for-bit the run the experiment aggregated.
///
/// # Errors
///
/// `InvalidArgument` for a missing seed or a method outside the
/// scenario's set; numeric failures carry the failing round.
pub fn replay_trajectory(cfg: &RunConfig, method: MethodId, run: u32) -> Result<Trajectory> {
    let root = cfg
        .seed
        .ok_or_else(|| Error::invalid("a replay needs a root seed (config key seed or --seed)"))?;
    match cfg.kind {
        ScenarioKind::Field => {
            check_methods(
                &[method],
                &[MethodId::SpProximity, MethodId::LmsStream],
                "field",
            )?;
            let scn = FieldScenario::from_config(cfg, root)?;
            let src = scn.observations(root, run);
            match method {
                MethodId::SpProximity => engine::run(
                    &scn.problem,
                    &scn.net,
                    &src,
                    &scn.schedule,
                    scn.horizon,
                    scn.initial_state(),
                    DualState::zeros(scn.net.n_edges()),
                ),
                _ => lms_trajectory(
                    &scn.problem,
                    &scn.net,
                    &src,
                    &scn.schedule,
                    scn.horizon,
                    scn.initial_state(),
                ),
            }
        }
        ScenarioKind::Localization => {
            check_methods(
                &[method],
                &[MethodId::SpProximity, MethodId::SpConsensus, MethodId::Dogd],
                "localization",
            )?;
            let scn = LocalizationScenario::from_config(cfg, root)?;
            let src = scn.observations(root, run);
            let y0 = scn.initial_state(root, run);
            match method {
                MethodId::SpProximity => engine::run(
                    &scn.proximity,
                    &scn.net,
                    &src,
                    &scn.schedule,
                    scn.horizon,
                    y0,
                    DualState::zeros(scn.net.n_edges()),
                ),
                MethodId::SpConsensus => engine::run(
                    &scn.consensus,
                    &scn.net,
                    &src,
                    &scn.schedule,
                    scn.horizon,
                    y0,
                    DualState::zeros(scn.net.n_edges()),
                ),
                MethodId::Dogd => dogd_trajectory(
                    &scn.objectives,
                    &scn.net,
                    &src,
                    scn.dogd_eps,
                    scn.horizon,
                    y0,
                ),
                MethodId::LmsStream => unreachable!("rejected above"),
            }
        }
    }
}

fn check_methods(methods: &[MethodId], allowed: &[MethodId], scenario: &str) -> Result<()> {
    if methods.is_empty() {
        return Err(Error::invalid("at least one method must be requested"));
    }
    for m in methods {
        if !allowed.contains(m) {
            return Err(Error::invalid(format!(
                "method {} is not part of the {scenario} scenario",
                m.name()
            )));
        }
    }
    Ok(())
}

fn regroup(methods: &[MethodId], runs: Vec<RunOutputs>) -> Result<ExperimentOutput> {
    type Slot = (
        Vec<MetricsSeries>,
        Vec<JensenReport>,
        Vec<Vec<DVector<f64>>>,
        Vec<Vec<f64>>,
    );
    let mut benchmark_excess = Vec::new();
    let mut alt_excess = Vec::new();
    let mut slots: Vec<Slot> = methods.iter().map(|_| Slot::default()).collect();
    for run in runs {
        if let Some(b) = run.benchmark_excess {
            benchmark_excess.push(b);
        }
        if let Some(a) = run.alt_excess {
            alt_excess.push(a);
        }
        for (slot, mr) in slots.iter_mut().zip(run.per_method) {
            slot.0.push(mr.series);
            if let Some(j) = mr.jensen {
                slot.1.push(j);
            }
            slot.2.push(mr.final_x);
            slot.3.push(mr.final_dual);
        }
    }
    let mut out = Vec::with_capacity(methods.len());
    for (&method, (replicas, jensen, final_primal, final_dual)) in methods.iter().zip(slots) {
        let mean = MetricsSeries::mean_of(&replicas)?;
        out.push(MethodOutput {
            method,
            mean,
            replicas,
            jensen,
            final_primal,
            final_dual,
        });
    }
    Ok(ExperimentOutput {
        methods: out,
        benchmark_excess,
        alt_benchmark_excess: if alt_excess.is_empty() {
            None
        } else {
            Some(alt_excess)
        },
    })
}

fn field_run(
    scn: &FieldScenario,
    root: u64,
    run: u32,
    methods: &[MethodId],
    want_alt: bool,
) -> Result<RunOutputs> {
    let x_true = scn.x_true(root, run);
    let expected = scn.expected(&x_true)?;
    let src = scn.observations(root, run);
    let bench = scn.batch_benchmark(root, run)?;
    let target = &expected[scn.monitor];
    let bench_point = DVector::from_element(1, bench.estimate[scn.monitor]);
    let benchmark_excess = Some(target.excess(&bench_point));
    let alt_excess = if want_alt {
        let alt = scn.alt_estimate(&bench)?;
        Some(target.excess(&DVector::from_element(1, alt[scn.monitor])))
    } else {
        None
    };
    let mut per_method = Vec::with_capacity(methods.len());
    for &method in methods {
        let mr = match method {
            MethodId::SpProximity => {
                let traj = engine::run(
                    &scn.problem,
                    &scn.net,
                    &src,
                    &scn.schedule,
                    scn.horizon,
                    scn.initial_state(),
                    DualState::zeros(scn.net.n_edges()),
                )?;
                let mut series = MetricsSeries::new();
                for t in 1..=scn.horizon {
                    let (p, d) = traj.at(t);
                    let xm = &p.x[scn.monitor];
                    series.push_next(
                        t,
                        traj.eps[t - 1],
                        target.value(xm),
                        target.excess(xm),
                        (xm[0] - bench.estimate[scn.monitor]).abs(),
                        node_violation(
                            &scn.net,
                            scn.problem.constraint(),
                            scn.problem.gamma(),
                            &p.x,
                            scn.monitor,
                        )?,
                        d.norm(),
                    );
                }
                let jensen = jensen_check(&scn.problem, &scn.net, &traj, scn.horizon, &expected)?;
                let (pf, df) = traj.at(scn.horizon + 1);
                MethodRun {
                    series,
                    jensen: Some(jensen),
                    final_x: pf.x.clone(),
                    final_dual: df.values().to_vec(),
                }
            }
            MethodId::LmsStream => {
                let traj = lms_trajectory(
                    &scn.problem,
                    &scn.net,
                    &src,
                    &scn.schedule,
                    scn.horizon,
                    scn.initial_state(),
                )?;
                let mut series = MetricsSeries::new();
                for t in 1..=scn.horizon {
                    let (p, _) = traj.at(t);
                    let xm = &p.x[scn.monitor];
                    series.push_next(
                        t,
                        traj.eps[t - 1],
                        target.value(xm),
                        target.excess(xm),
                        (xm[0] - bench.estimate[scn.monitor]).abs(),
                        node_violation(
                            &scn.net,
                            scn.problem.constraint(),
                            scn.problem.gamma(),
                            &p.x,
                            scn.monitor,
                        )?,
                        0.0,
                    );
                }
                let (pf, _) = traj.at(scn.horizon + 1);
                MethodRun {
                    series,
                    jensen: None,
                    final_x: pf.x.clone(),
                    final_dual: Vec::new(),
                }
            }
            other => {
                return Err(Error::invalid(format!(
                    "method {} is not part of the field scenario",
                    other.name()
                )))
            }
        };
        per_method.push(mr);
    }
    Ok(RunOutputs {
        per_method,
        benchmark_excess,
        alt_excess,
    })
}

fn loc_run(
    scn: &LocalizationScenario,
    root: u64,
    run: u32,
    methods: &[MethodId],
) -> Result<RunOutputs> {
    let src = scn.observations(root, run);
    let y0 = scn.initial_state(root, run);
    let (mean_b, mean_b2) = scn.held_out_stats(root, run, scn.monitor);
    // Sample variance of the held-out batch; rounding guard only.
    let held_floor = (mean_b2 - mean_b * mean_b).max(0.0);
    let expected = scn.expected()?;
    let c_mon = expected[scn.monitor].c.clone();
    let mut per_method = Vec::with_capacity(methods.len());
    for &method in methods {
        let (traj, problem) = match method {
            MethodId::SpProximity => (
                engine::run(
                    &scn.proximity,
                    &scn.net,
                    &src,
                    &scn.schedule,
                    scn.horizon,
                    y0.clone(),
                    DualState::zeros(scn.net.n_edges()),
                )?,
                Some(&scn.proximity),
            ),
            MethodId::SpConsensus => (
                engine::run(
                    &scn.consensus,
                    &scn.net,
                    &src,
                    &scn.schedule,
                    scn.horizon,
                    y0.clone(),
                    DualState::zeros(scn.net.n_edges()),
                )?,
                Some(&scn.consensus),
            ),
            MethodId::Dogd => (
                dogd_trajectory(
                    &scn.objectives,
                    &scn.net,
                    &src,
                    scn.dogd_eps,
                    scn.horizon,
                    y0.clone(),
                )?,
                None,
            ),
            MethodId::LmsStream => {
                return Err(Error::invalid(
                    "method lms-stream is not part of the localization scenario",
                ))
            }
        };
        // Dual-free methods display the agreement metric.
        let display = problem.unwrap_or(&scn.consensus);
        let mut series = MetricsSeries::new();
        for t in 1..=scn.horizon {
            let (p, d) = traj.at(t);
            let ym = &p.x[scn.monitor];
            let ay = (&c_mon * ym)[0];
            let gap = (ay - mean_b) * (ay - mean_b);
            let std_err = ((ym[0] - scn.source[0]).powi(2) + (ym[1] - scn.source[1]).powi(2)).sqrt();
            series.push_next(
                t,
                traj.eps[t - 1],
                gap + held_floor,
                gap,
                std_err,
                node_violation(&scn.net, display.constraint(), display.gamma(), &p.x, scn.monitor)?,
                d.norm(),
            );
        }
        let jensen = match problem {
            Some(pb) => Some(jensen_check(pb, &scn.net, &traj, scn.horizon, &expected)?),
            None => None,
        };
        let (pf, df) = traj.at(scn.horizon + 1);
        per_method.push(MethodRun {
            series,
            jensen,
            final_x: pf.x.clone(),
            final_dual: if method.is_saddle() {
                df.values().to_vec()
            } else {
                Vec::new()
            },
        });
    }
    Ok(RunOutputs {
        per_method,
        benchmark_excess: None,
        alt_excess: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn field_cfg(rows: usize, cols: usize, horizon: usize, runs: usize, seed: u64) -> RunConfig {
        let mut cfg = RunConfig::defaults(ScenarioKind::Field);
        cfg.rows = rows;
        cfg.cols = cols;
        cfg.horizon = horizon;
        cfg.runs = runs;
        cfg.seed = Some(seed);
        cfg
    }

    fn loc_cfg(rows: usize, cols: usize, horizon: usize, runs: usize, seed: u64) -> RunConfig {
        let mut cfg = RunConfig::defaults(ScenarioKind::Localization);
        cfg.rows = rows;
        cfg.cols = cols;
        cfg.horizon = horizon;
        cfg.runs = runs;
        cfg.seed = Some(seed);
        cfg
    }

    #[test]
    fn method_names_round_trip() {
        for m in [
            MethodId::SpProximity,
            MethodId::SpConsensus,
            MethodId::Dogd,
            MethodId::LmsStream,
        ] {
            assert_eq!(MethodId::parse(m.name()).unwrap(), m);
        }
        assert!(MethodId::parse("gradient-descent").is_err());
        assert_eq!(
            MethodId::defaults_for(ScenarioKind::Field),
            vec![MethodId::SpProximity, MethodId::LmsStream]
        );
        assert_eq!(
            MethodId::defaults_for(ScenarioKind::Localization),
            vec![MethodId::SpProximity, MethodId::SpConsensus, MethodId::Dogd]
        );
    }

    #[test]
    fn default_field_network_and_monitor() {
        let cfg = RunConfig::defaults(ScenarioKind::Field);
        let scn = FieldScenario::from_config(&cfg, 1).unwrap();
        assert_eq!(scn.net().n_nodes(), 50);
        assert_eq!(scn.net().n_edges(), 85);
        // 5×10 grid on 200×200: cells are 20×40, so nodes 24 (90,100) and
        // 25 (110,100) are both 10 from the center; ties break low.
        assert_eq!(scn.monitor(), 24);
    }

    #[test]
    fn gamma_rules_complement_each_other() {
        let mut cfg = field_cfg(1, 3, 10, 1, 7);
        cfg.corr_len = 1.0;
        cfg.gamma_rule = GammaRule::Corr;
        let with_corr = FieldScenario::from_config(&cfg, 7).unwrap();
        cfg.gamma_rule = GammaRule::OneMinusCorr;
        let with_complement = FieldScenario::from_config(&cfg, 7).unwrap();
        cfg.gamma_rule = GammaRule::ThreeSigma;
        let with_margin = FieldScenario::from_config(&cfg, 7).unwrap();
        // 1×3 grid on 200×200 with unit correlation length: neighbors are a
        // third of the side apart, e^(-1/3) each.
        let rho = (-1.0f64 / 3.0).exp();
        for ((a, b), c) in with_corr
            .problem()
            .gamma()
            .iter()
            .zip(with_complement.problem().gamma())
            .zip(with_margin.problem().gamma())
        {
            assert_relative_eq!(*a, rho, max_relative = 1e-15);
            assert_relative_eq!(a + b, 1.0, max_relative = 1e-15);
            assert_relative_eq!(*c, 9.0 * b, max_relative = 1e-15);
            assert!(*a > 0.0 && *b > 0.0);
        }
    }

    #[test]
    fn field_truth_is_deterministic_and_run_varying() {
        let cfg = field_cfg(1, 2, 10, 1, 3);
        let scn = FieldScenario::from_config(&cfg, 3).unwrap();
        assert_eq!(scn.x_true(3, 0), scn.x_true(3, 0));
        assert_ne!(scn.x_true(3, 0), scn.x_true(3, 1));
        assert_ne!(scn.x_true(3, 0), scn.x_true(4, 0));
    }

    #[test]
    fn field_observations_center_on_truth() {
        let mut cfg = field_cfg(1, 2, 4000, 1, 11);
        cfg.sigma2 = 4.0;
        let scn = FieldScenario::from_config(&cfg, 11).unwrap();
        let x_true = scn.x_true(11, 0);
        let src = scn.observations(11, 0);
        let t_rounds = 4000;
        let mean: f64 =
            (1..=t_rounds).map(|t| src.observe(t)[0][0]).sum::<f64>() / t_rounds as f64;
        // 4-sigma band for the sample mean: 4·2/√4000 ≈ 0.127.
        assert!((mean - x_true[0]).abs() < 0.13, "mean {mean} vs {}", x_true[0]);
        // Purity: re-reading a round reproduces it bit for bit.
        assert_eq!(src.observe(17), src.observe(17));
    }

    #[test]
    fn batch_benchmark_matches_independent_replay() {
        let mut cfg = field_cfg(1, 2, 3, 1, 5);
        cfg.sigma2 = 2.0;
        let scn = FieldScenario::from_config(&cfg, 5).unwrap();
        let bench = scn.batch_benchmark(5, 0).unwrap();

        // Rebuild everything from the raw streams with local arithmetic.
        let x_true = scn.x_true(5, 0);
        let mut theta = [[0.0f64; 3]; 2];
        for (i, row) in theta.iter_mut().enumerate() {
            for (t, cell) in row.iter_mut().enumerate() {
                let mut rng = stream(5, Stream::Observation, 0, i as u32, (t + 1) as u32);
                let w: f64 = rng.sample(StandardNormal);
                *cell = x_true[i] + 2.0f64.sqrt() * w;
            }
        }
        let mean0: f64 = theta[0].iter().sum::<f64>() / 3.0;
        let mean1: f64 = theta[1].iter().sum::<f64>() / 3.0;
        let mut pooled = 0.0;
        for (row, m) in theta.iter().zip([mean0, mean1]) {
            pooled += row.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
        }
        let s2 = pooled / (2.0 * 2.0);
        assert_relative_eq!(bench.noise_var, s2, max_relative = 1e-12);
        assert_relative_eq!(bench.mean_obs[0], mean0, max_relative = 1e-12);

        let r = scn.corr().clone();
        let mut a = &r * 3.0;
        a[(0, 0)] += s2;
        a[(1, 1)] += s2;
        let rhs = &r * DVector::from_vec(vec![3.0 * (mean0 - 1.0), 3.0 * (mean1 - 1.0)]);
        let y = a.lu().solve(&rhs).unwrap();
        assert_relative_eq!(bench.estimate[0], 1.0 + y[0], max_relative = 1e-12);
        assert_relative_eq!(bench.estimate[1], 1.0 + y[1], max_relative = 1e-12);
    }

    #[test]
    fn noiseless_benchmark_recovers_truth_exactly() {
        let mut cfg = field_cfg(1, 2, 5, 1, 9);
        cfg.sigma2 = 0.0;
        let scn = FieldScenario::from_config(&cfg, 9).unwrap();
        let bench = scn.batch_benchmark(9, 0).unwrap();
        let x_true = scn.x_true(9, 0);
        // Pooling identical samples leaves only rounding residue.
        assert!(bench.noise_var < 1e-12, "noise_var {}", bench.noise_var);
        for i in 0..2 {
            assert_relative_eq!(bench.estimate[i], x_true[i], max_relative = 1e-12);
        }
    }

    #[test]
    fn node_violation_hand_values() {
        let net = graph::make_grid(1, 2, Region::square(1.0).unwrap()).unwrap();
        let x = vec![
            DVector::from_vec(vec![1.0]),
            DVector::from_vec(vec![0.0]),
        ];
        // Quadratic slack: ½(1−0)² − 0.2 = 0.3, signed.
        let v = node_violation(&net, &PairConstraint::Quadratic, &[0.2], &x, 0).unwrap();
        assert_relative_eq!(v, 0.3, max_relative = 1e-15);
        // Agreement display: plain distance.
        let v = node_violation(&net, &PairConstraint::Consensus, &[0.0], &x, 0).unwrap();
        assert_relative_eq!(v, 1.0, max_relative = 1e-15);
        // Anchored log-sum-exp at full symmetry: ½ log 2 per edge.
        let lse = PairConstraint::lse_range(&[[0.0, 0.0], [0.0, 0.0]]);
        let y = vec![DVector::zeros(3), DVector::zeros(3)];
        let v = node_violation(&net, &lse, &[0.0], &y, 1).unwrap();
        assert_relative_eq!(v, 0.5 * 2.0f64.ln(), max_relative = 1e-15);
        // Middle of a path sums both incident edges.
        let p3 = graph::make_grid(1, 3, Region::square(1.0).unwrap()).unwrap();
        let x3 = vec![
            DVector::from_vec(vec![0.0]),
            DVector::from_vec(vec![2.0]),
            DVector::from_vec(vec![5.0]),
        ];
        let v = node_violation(&p3, &PairConstraint::Quadratic, &[0.5, 0.5], &x3, 1).unwrap();
        assert_relative_eq!(v, 2.0 - 0.5 + 4.5 - 0.5, max_relative = 1e-15);
        assert!(node_violation(&p3, &PairConstraint::Quadratic, &[0.5, 0.5], &x3, 3).is_err());
    }

    #[test]
    fn localization_truth_geometry() {
        let cfg = loc_cfg(2, 2, 10, 1, 1);
        let scn = LocalizationScenario::from_config(&cfg, 1).unwrap();
        // 2×2 grid on 1000×1000: anchors at (±0.25, ±0.25) around the
        // center once normalized; the source is their mean.
        assert_eq!(scn.source(), [0.5, 0.5]);
        assert_eq!(scn.true_y().as_slice(), &[0.5, 0.5, 0.5]);
        let d = 0.125f64.sqrt();
        for &di in scn.dists() {
            assert_relative_eq!(di, d, max_relative = 1e-14);
        }
        let expected = scn.expected().unwrap();
        // Node 0 anchors at (0.25, 0.25): row [−0.5, −0.5, 1].
        assert_eq!(expected[0].c.as_slice(), &[-0.5, -0.5, 1.0]);
        let v = 2.0 * d;
        assert_relative_eq!(
            expected[0].m[0],
            0.125 + v - 0.125,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            expected[0].floor,
            4.0 * 0.125 * v + 2.0 * v * v,
            max_relative = 1e-14
        );
        // At the lifted truth: a·y* = d² − ‖l‖² = 0 for this geometry, so
        // the expected residual is exactly the noise bias v.
        let ay = (&expected[0].c * scn.true_y())[0];
        assert!((ay - (d * d - 0.125)).abs() < 1e-15, "a·y* = {ay}");
    }

    #[test]
    fn held_out_stats_deterministic_and_centered() {
        let cfg = loc_cfg(2, 2, 10, 1, 21);
        let scn = LocalizationScenario::from_config(&cfg, 21).unwrap();
        let (m1, m2) = scn.held_out_stats(21, 0, scn.monitor());
        assert_eq!((m1, m2), scn.held_out_stats(21, 0, scn.monitor()));
        let expected = scn.expected().unwrap();
        let target = &expected[scn.monitor()];
        // 4-sigma band on the batch mean of 1000 draws.
        let band = 4.0 * target.floor.sqrt() / (1000.0f64).sqrt();
        assert!(
            (m1 - target.m[0]).abs() < band,
            "held-out mean {m1} vs analytic {} (band {band})",
            target.m[0]
        );
        assert!(m2 - m1 * m1 > 0.0);
    }

    #[test]
    fn field_experiment_shapes_and_determinism() {
        let mut cfg = field_cfg(1, 2, 10, 2, 13);
        cfg.sigma2 = 1.0;
        let methods = [MethodId::SpProximity, MethodId::LmsStream];
        let out = run_experiment(&cfg, &methods, true).unwrap();
        assert_eq!(out.methods.len(), 2);
        assert_eq!(out.benchmark_excess.len(), 2);
        assert_eq!(out.alt_benchmark_excess.as_ref().unwrap().len(), 2);
        for (mo, want) in out.methods.iter().zip(methods) {
            assert_eq!(mo.method, want);
            assert_eq!(mo.mean.len(), 10);
            assert_eq!(mo.replicas.len(), 2);
            assert_eq!(mo.final_primal.len(), 2);
        }
        assert_eq!(out.methods[0].jensen.len(), 2);
        assert!(out.methods[0].jensen.iter().all(JensenReport::holds));
        assert!(out.methods[1].jensen.is_empty());
        assert_eq!(out.methods[0].final_dual[0].len(), 2 * 1);
        assert!(out.methods[1].final_dual[0].is_empty());
        // Same config, same output, bit for bit.
        let again = run_experiment(&cfg, &methods, true).unwrap();
        for (a, b) in out.methods.iter().zip(&again.methods) {
            assert_eq!(
                crate::metrics::render_csv(&a.mean),
                crate::metrics::render_csv(&b.mean)
            );
        }
        assert_eq!(out.benchmark_excess, again.benchmark_excess);
    }

    #[test]
    fn localization_experiment_shapes() {
        let cfg = loc_cfg(2, 2, 5, 1, 17);
        let methods = [MethodId::SpProximity, MethodId::SpConsensus, MethodId::Dogd];
        let out = run_experiment(&cfg, &methods, false).unwrap();
        assert_eq!(out.methods.len(), 3);
        assert!(out.benchmark_excess.is_empty());
        assert!(out.alt_benchmark_excess.is_none());
        for mo in &out.methods {
            assert_eq!(mo.mean.len(), 5);
            for row in mo.mean.rows() {
                assert!(row.f.is_finite() && row.f >= row.f_gap);
                assert!(row.std_err >= 0.0);
            }
        }
        // The averaging baseline never holds multipliers.
        let dogd = &out.methods[2];
        assert!(dogd.mean.rows().iter().all(|r| r.dual_norm == 0.0));
        assert!(dogd.final_dual[0].is_empty());
        assert!(dogd.jensen.is_empty());
        // Flat baseline step vs the hybrid schedule before its knee.
        assert!(dogd.mean.rows().iter().all(|r| r.eps == 10f64.powf(-1.5)));
        // Saddle methods carry multipliers and the convexity check.
        for mo in &out.methods[..2] {
            assert_eq!(mo.jensen.len(), 1);
            assert!(mo.jensen[0].holds());
            assert_eq!(mo.final_dual[0].len(), 2 * 4);
        }
    }

    #[test]
    fn experiment_rejects_bad_requests() {
        let cfg = field_cfg(1, 2, 10, 1, 1);
        assert!(run_experiment(&cfg, &[MethodId::Dogd], false).is_err());
        assert!(run_experiment(&cfg, &[], false).is_err());
        let mut unkeyed = cfg.clone();
        unkeyed.seed = None;
        assert!(run_experiment(&unkeyed, &[MethodId::SpProximity], false).is_err());
        let loc = loc_cfg(2, 2, 5, 1, 1);
        assert!(run_experiment(&loc, &[MethodId::LmsStream], false).is_err());
        assert!(run_experiment(&loc, &[MethodId::SpProximity], true).is_err());
    }

    #[test]
    fn replay_reproduces_the_experiment_run() {
        let cfg = field_cfg(2, 3, 8, 2, 21);
        let out = run_experiment(&cfg, &[MethodId::SpProximity, MethodId::LmsStream], false)
            .unwrap();
        let traj = replay_trajectory(&cfg, MethodId::SpProximity, 1).unwrap();
        let (pf, df) = traj.at(cfg.horizon + 1);
        assert_eq!(pf.x, out.methods[0].final_primal[1]);
        assert_eq!(df.values(), out.methods[0].final_dual[1].as_slice());

        let lms = replay_trajectory(&cfg, MethodId::LmsStream, 1).unwrap();
        let (pf, df) = lms.at(cfg.horizon + 1);
        assert_eq!(pf.x, out.methods[1].final_primal[1]);
        assert!(df.values().iter().all(|&v| v == 0.0));
        assert!(replay_trajectory(&cfg, MethodId::Dogd, 0).is_err());

        let loc = loc_cfg(2, 2, 6, 1, 5);
        let out = run_experiment(&loc, &[MethodId::Dogd], false).unwrap();
        let traj = replay_trajectory(&loc, MethodId::Dogd, 0).unwrap();
        assert_eq!(traj.at(loc.horizon + 1).0.x, out.methods[0].final_primal[0]);
    }
}
