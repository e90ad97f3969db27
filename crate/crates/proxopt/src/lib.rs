//! Decentralized stochastic saddle-point optimization under pairwise
//! proximity constraints.
//!
//! A network of agents minimizes a sum of local stochastic objectives
//!
//! ```text
//! minimize   Σ_i E[ f_i(x_i, θ_i) ]
//! subject to h_ij(x_i, x_j) ≤ γ_ij   for every edge (i,j),   x_i ∈ X
//! ```
//!
//! where each `h_ij` is a convex pairwise proximity function: neighbors are
//! kept close without being forced to agree exactly (consensus is the
//! special case γ ≡ 0). The solver is an Arrow–Hurwicz scheme on a
//! regularized stochastic Lagrangian: every round, each node takes a
//! projected gradient-descent step in its own variable while each edge
//! takes a clipped gradient-ascent step in its multiplier. The stacked and
//! the per-node forms of the update are equivalent, which is what makes the
//! method decentralized; both are implemented and tested against each other.
//!
//! # Modules
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`graph`] | Topology generators, connectivity, Laplacian spectrum |
//! | [`problems`] | Objective / constraint families with gradient oracles |
//! | [`engine`] | The primal-dual iteration, schedules, run loop, decrement checker |
//! | [`baselines`] | DOGD and LMMSE comparison methods |
//! | [`experiments`] | Field-estimation and source-localization scenarios |
//! | [`metrics`] | Convergence diagnostics, rate fitting, CSV export |
//! | [`optimum`] | High-accuracy reference solutions of the expected problem |
//! | [`checks`] | Built-in verification suites over desk-scale instances |
//! | [`config`] | Structured-text run configuration |
//! | [`netfile`] | Plain-text network serialization |
//! | [`seeding`] | Counter-based deterministic random streams |
//!
//! # Determinism
//!
//! Every random draw is keyed by `(root seed, stream purpose, run, node,
//! round)`, so results are bitwise reproducible regardless of thread count,
//! and any observation stream can be replayed after the fact (the decrement
//! checker relies on this).

use std::path::PathBuf;

use thiserror::Error;

pub mod baselines;
pub mod checks;
pub mod config;
pub mod engine;
pub mod experiments;
pub mod graph;
pub mod metrics;
pub mod netfile;
pub mod optimum;
pub mod problems;
pub mod seeding;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on arguments was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A randomized generator exhausted its retry budget.
    #[error("generation failed after {attempts} attempts: {reason}")]
    GenerationFailure { attempts: usize, reason: String },

    /// A non-finite value or a singular system appeared during iteration.
    /// `iteration` is the 1-based round index when the failure happened
    /// inside a run, `None` when it happened in a one-shot computation.
    #[error("numeric failure at {site} (iteration {})", .iteration.map_or_else(|| "-".to_string(), |t| t.to_string()))]
    Numeric {
        site: String,
        iteration: Option<usize>,
    },

    /// File I/O failure, tagged with the offending path.
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Text parsing failure with a 1-based line number.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(site: impl Into<String>, iteration: Option<usize>) -> Self {
        Error::Numeric {
            site: site.into(),
            iteration,
        }
    }

    /// Stamps a 1-based round index onto a numeric error that does not
    /// already carry one; other variants pass through unchanged.
    pub(crate) fn with_iteration(self, t: usize) -> Self {
        match self {
            Error::Numeric {
                site,
                iteration: None,
            } => Error::Numeric {
                site,
                iteration: Some(t),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
