//! Comparison methods: neighbor-averaging online gradient descent and
//! linear minimum mean-square-error estimators.
//!
//! The averaging method (DOGD) replaces multiplier coupling with a
//! doubly-stochastic mixing matrix:
//!
//! ```text
//! x_{i,t+1} = Σ_j W_ij x_{j,t} − ε ∇f_i(x_{i,t}; θ_{i,t})
//! ```
//!
//! The batch LMMSE oracle is the Bayes-optimal linear estimate for the
//! Gaussian linear model θ = H x + w, x ~ N(0, R_x), w ~ N(0, σ² I):
//!
//! ```text
//! x̂ = R_x Hᵀ (H R_x Hᵀ + σ² I)⁻¹ θ = (R_x Hᵀ H + σ² I)⁻¹ R_x Hᵀ θ
//! ```
//!
//! computed through the second (push-through) form so the solve is in the
//! signal dimension rather than the stacked observation dimension.

use nalgebra::{DMatrix, DVector};

use crate::engine::PrimalState;
use crate::graph::Network;
use crate::{Error, Result};

/// Symmetric doubly-stochastic mixing matrix supported on the network's
/// edges and self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusWeights {
    w: DMatrix<f64>,
}

impl ConsensusWeights {
    /// The underlying N×N matrix.
    #[must_use]
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    #[must_use]
    pub fn n_nodes(&self) -> usize {
        self.w.nrows()
    }
}

/// Metropolis mixing weights: `W_ij = 1/(1 + max(deg i, deg j))` on edges,
/// diagonal filled so rows sum to one. Symmetric and doubly stochastic by
/// construction.
///
/// # Example
///
/// ```
/// use proxopt::baselines::metropolis_weights;
/// use proxopt::graph::{make_grid, Region};
///
/// let p2 = make_grid(1, 2, Region::square(1.0).unwrap()).unwrap();
/// let w = metropolis_weights(&p2);
/// assert_eq!(w.matrix()[(0, 1)], 0.5);
/// assert_eq!(w.matrix()[(0, 0)], 0.5);
/// ```
#[must_use]
pub fn metropolis_weights(net: &Network) -> ConsensusWeights {
    let n = net.n_nodes();
    let mut w = DMatrix::<f64>::zeros(n, n);
    for &(i, j) in net.edges() {
        let v = 1.0 / (1.0 + net.degree(i).max(net.degree(j)) as f64);
        w[(i, j)] = v;
        w[(j, i)] = v;
    }
    for i in 0..n {
        let off: f64 = net.neighbors(i).iter().map(|&j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
    ConsensusWeights { w }
}

/// One round of neighbor-weighted averaging followed by a local gradient
/// step, all from the round-start snapshot.
///
/// # Errors
///
/// `InvalidArgument` on shape mismatch; `Numeric` naming the node if the
/// update turns non-finite.
pub fn dogd_step(
    weights: &ConsensusWeights,
    primal: &PrimalState,
    grads: &[DVector<f64>],
    eps: f64,
) -> Result<PrimalState> {
    let n = weights.n_nodes();
    if primal.x.len() != n || grads.len() != n {
        return Err(Error::invalid(format!(
            "weights are {n}x{n} but state has {} nodes and {} gradients",
            primal.x.len(),
            grads.len()
        )));
    }
    let mut x_next = Vec::with_capacity(n);
    for i in 0..n {
        let mut v = DVector::zeros(primal.x[i].len());
        for j in 0..n {
            let wij = weights.w[(i, j)];
            if wij != 0.0 {
                v += &primal.x[j] * wij;
            }
        }
        v -= &grads[i] * eps;
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::numeric(format!("averaging update at node {i}"), None));
        }
        x_next.push(v);
    }
    Ok(PrimalState::new(x_next, primal.t + 1))
}

/// Batch LMMSE estimate for the zero-mean stacked model θ = H x + w.
///
/// # Errors
///
/// `InvalidArgument` on shape mismatch or σ² ≤ 0; `Numeric` when the
/// normal system is singular.
///
/// # Example
///
/// ```
/// use nalgebra::{DMatrix, DVector};
/// use proxopt::baselines::lmmse_oracle;
///
/// // Scalar H = 1, R_x = 1, σ² = 1: posterior mean halves the data.
/// let xhat = lmmse_oracle(
///     &DMatrix::identity(1, 1),
///     &DMatrix::identity(1, 1),
///     1.0,
///     &DVector::from_vec(vec![2.0]),
/// )
/// .unwrap();
/// assert_eq!(xhat[0], 1.0);
/// ```
pub fn lmmse_oracle(
    h: &DMatrix<f64>,
    r_x: &DMatrix<f64>,
    sigma2: f64,
    theta: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = r_x.nrows();
    if r_x.ncols() != n || h.ncols() != n || h.nrows() != theta.len() {
        return Err(Error::invalid(format!(
            "incompatible LMMSE shapes: H {}x{}, R_x {}x{}, theta {}",
            h.nrows(),
            h.ncols(),
            r_x.nrows(),
            r_x.ncols(),
            theta.len()
        )));
    }
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::invalid(format!(
            "noise variance must be positive and finite (got {sigma2})"
        )));
    }
    // (R_x HᵀH + σ² I) x̂ = R_x Hᵀ θ, an n×n solve.
    let mut a = r_x * (h.transpose() * h);
    for k in 0..n {
        a[(k, k)] += sigma2;
    }
    let rhs = r_x * (h.transpose() * theta);
    a.lu()
        .solve(&rhs)
        .ok_or_else(|| Error::numeric("LMMSE normal equations", None))
}

/// The alternative single-slot estimator expression
/// `(H R_x Hᵀ + (1/σ²) I)⁻¹ (1/σ²) θ`, kept for side-by-side inspection
/// behind a CLI flag. It is only shape-consistent when H is square, and it
/// is not the Bayes estimator; see [`lmmse_oracle`] for the benchmark form.
pub fn lmmse_alt_formula(
    h: &DMatrix<f64>,
    r_x: &DMatrix<f64>,
    sigma2: f64,
    theta: &DVector<f64>,
) -> Result<DVector<f64>> {
    if h.nrows() != h.ncols() {
        return Err(Error::invalid(
            "the alternative estimator expression needs a square observation model",
        ));
    }
    if h.ncols() != r_x.nrows() || r_x.ncols() != r_x.nrows() || theta.len() != h.nrows() {
        return Err(Error::invalid("incompatible alternative-estimator shapes"));
    }
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::invalid(format!(
            "noise variance must be positive and finite (got {sigma2})"
        )));
    }
    let mut a = h * r_x * h.transpose();
    for k in 0..a.nrows() {
        a[(k, k)] += 1.0 / sigma2;
    }
    a.lu()
        .solve(&(theta / sigma2))
        .ok_or_else(|| Error::numeric("alternative estimator solve", None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{make_grid, RawGraph, Region};

    fn path2() -> Network {
        make_grid(1, 2, Region::square(1.0).unwrap()).unwrap()
    }

    fn k3() -> Network {
        RawGraph {
            positions: vec![[0.0, 0.0], [1.0, 0.0], [0.5, 1.0]],
            edges: vec![(0, 1), (0, 2), (1, 2)],
        }
        .validate()
        .unwrap()
    }

    #[test]
    fn metropolis_hand_values() {
        let w2 = metropolis_weights(&path2());
        assert_eq!(w2.matrix().as_slice(), &[0.5, 0.5, 0.5, 0.5]);
        // All degrees equal 2 in the triangle, so every entry is 1/3.
        let w3 = metropolis_weights(&k3());
        for v in w3.matrix().iter() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn metropolis_rows_sum_to_one() {
        let net = make_grid(3, 4, Region::square(10.0).unwrap()).unwrap();
        let w = metropolis_weights(&net);
        for i in 0..net.n_nodes() {
            let row: f64 = (0..net.n_nodes()).map(|j| w.matrix()[(i, j)]).sum();
            assert!((row - 1.0).abs() < 1e-12);
            let col: f64 = (0..net.n_nodes()).map(|j| w.matrix()[(j, i)]).sum();
            assert!((col - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dogd_identity_weights_is_gradient_descent() {
        let w = ConsensusWeights {
            w: DMatrix::identity(2, 2),
        };
        let primal = PrimalState::new(
            vec![
                DVector::from_vec(vec![1.0]),
                DVector::from_vec(vec![-2.0]),
            ],
            1,
        );
        let grads = vec![
            DVector::from_vec(vec![0.5]),
            DVector::from_vec(vec![-1.0]),
        ];
        let next = dogd_step(&w, &primal, &grads, 0.1).unwrap();
        assert!((next.x[0][0] - 0.95).abs() < 1e-15);
        assert!((next.x[1][0] - -1.9).abs() < 1e-15);
    }

    #[test]
    fn dogd_pure_averaging_converges_to_mean() {
        let net = make_grid(2, 2, Region::square(1.0).unwrap()).unwrap();
        let w = metropolis_weights(&net);
        let zero = vec![DVector::zeros(1); 4];
        let mut state = PrimalState::new(
            vec![
                DVector::from_vec(vec![4.0]),
                DVector::from_vec(vec![0.0]),
                DVector::from_vec(vec![-2.0]),
                DVector::from_vec(vec![6.0]),
            ],
            1,
        );
        let mean = 2.0;
        for _ in 0..1000 {
            // Mean preservation is exact in real arithmetic for a doubly
            // stochastic W.
            state = dogd_step(&w, &state, &zero, 0.1).unwrap();
        }
        for xi in &state.x {
            assert!((xi[0] - mean).abs() < 1e-6);
        }
    }

    #[test]
    fn lmmse_scalar_hand_value_and_zero_prior() {
        let h = DMatrix::identity(1, 1);
        let r1 = DMatrix::identity(1, 1);
        let theta = DVector::from_vec(vec![2.0]);
        assert_eq!(lmmse_oracle(&h, &r1, 1.0, &theta).unwrap()[0], 1.0);
        let r0 = DMatrix::zeros(1, 1);
        assert_eq!(lmmse_oracle(&h, &r0, 1.0, &theta).unwrap()[0], 0.0);
    }

    #[test]
    fn lmmse_matches_joint_gaussian_conditioning() {
        // p = 2 signal, N = 3 observation rows: compare the push-through
        // solve against the textbook R_x Hᵀ (H R_x Hᵀ + σ² I)⁻¹ θ form.
        let h = DMatrix::from_row_slice(3, 2, &[1.0, 0.2, -0.4, 1.0, 0.7, 0.7]);
        let r_x = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
        let sigma2 = 0.7;
        let theta = DVector::from_vec(vec![0.9, -1.1, 0.4]);
        let got = lmmse_oracle(&h, &r_x, sigma2, &theta).unwrap();
        let mut s = &h * &r_x * h.transpose();
        for k in 0..3 {
            s[(k, k)] += sigma2;
        }
        let expect = &r_x * h.transpose() * s.lu().solve(&theta).unwrap();
        assert!((got - expect).norm() < 1e-10);
    }

    #[test]
    fn lmmse_rejects_bad_inputs() {
        let h = DMatrix::identity(2, 2);
        let r = DMatrix::identity(2, 2);
        let theta = DVector::zeros(2);
        assert!(lmmse_oracle(&h, &r, 0.0, &theta).is_err());
        assert!(lmmse_oracle(&h, &r, 1.0, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn alt_formula_differs_from_bayes_estimate() {
        let h = DMatrix::identity(2, 2);
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.0]);
        let theta = DVector::from_vec(vec![1.0, -2.0]);
        let bayes = lmmse_oracle(&h, &r, 2.0, &theta).unwrap();
        let alt = lmmse_alt_formula(&h, &r, 2.0, &theta).unwrap();
        assert!((bayes - alt).norm() > 1e-3);
        let rect = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert!(lmmse_alt_formula(&rect, &r, 2.0, &DVector::zeros(1)).is_err());
    }
}
