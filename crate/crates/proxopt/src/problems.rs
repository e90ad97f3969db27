//! Objective and constraint families with value and gradient oracles.
//!
//! Two per-node objective families, both stochastic least squares:
//!
//! ```text
//! Quadratic:      f(x; θ) = ‖H x − θ‖²          ∇f = 2 Hᵀ(H x − θ)
//! SquaredRange:   f(y; b) = (a·y − b)²           ∇f = 2 (a·y − b) a
//! ```
//!
//! where the squared-range row `a = [−2 lᵀ, 1]` turns a noisy range
//! measurement `r` taken at anchor position `l` into the linear observation
//! `b = r² − ‖l‖²` of the lifted unknown `y = [x; ‖x‖²]`.
//!
//! Three pairwise coupling (proximity) functions, all convex and symmetric
//! in the sense `h(a, b) = h(b, a)` with the node roles swapped:
//!
//! ```text
//! Quadratic:  h(x_i, x_j) = ½‖x_i − x_j‖²                    slack γ_ij > 0
//! Consensus:  the same h with γ ≡ 0 (agreement enforced through multipliers)
//! LseRange:   h(y_i, y_j) = ½(‖y_i − y_j‖² + log(e^{‖y_i−l̃_i‖²} + e^{‖y_j−l̃_j‖²}))
//! ```
//!
//! The log-sum-exp replaces a pairwise max, giving a convex upper bound on
//! "stay closer to the source than your neighbor"; `l̃` is the anchor
//! position padded with a trailing zero to match the lifted dimension.
//! Exponentials are evaluated in shifted form so values and gradients stay
//! finite for any finite input.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Per-node stochastic objective.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeObjective {
    /// `f(x; θ) = ‖H x − θ‖²` with a fixed q×d observation matrix.
    Quadratic { h: DMatrix<f64> },
    /// `f(y; b) = (a·y − b)²` with the fixed squared-range row `a`.
    SquaredRange { a: DVector<f64> },
}

impl NodeObjective {
    /// Quadratic observation model with matrix `h`.
    #[must_use]
    pub fn quadratic(h: DMatrix<f64>) -> Self {
        NodeObjective::Quadratic { h }
    }

    /// Scalar identity observation model (`q = d = 1`, `H = 1`).
    #[must_use]
    pub fn scalar_identity() -> Self {
        NodeObjective::Quadratic {
            h: DMatrix::identity(1, 1),
        }
    }

    /// Squared-range model anchored at planar position `l`.
    #[must_use]
    pub fn squared_range(l: [f64; 2]) -> Self {
        NodeObjective::SquaredRange {
            a: srls_row(l),
        }
    }

    /// Decision dimension d the objective expects.
    #[must_use]
    pub fn dim(&self) -> usize {
        match self {
            NodeObjective::Quadratic { h } => h.ncols(),
            NodeObjective::SquaredRange { a } => a.len(),
        }
    }

    /// Observation dimension q the objective expects.
    #[must_use]
    pub fn obs_dim(&self) -> usize {
        match self {
            NodeObjective::Quadratic { h } => h.nrows(),
            NodeObjective::SquaredRange { .. } => 1,
        }
    }
}

/// Value `f(x; θ)` and gradient `∇_x f(x; θ)` of a per-node objective.
///
/// # Errors
///
/// `InvalidArgument` when `x` or `theta` does not match the objective's
/// dimensions.
///
/// # Example
///
/// ```
/// use nalgebra::{DMatrix, DVector};
/// use proxopt::problems::{objective_value_and_grad, NodeObjective};
///
/// // Scalar model: f(x; θ) = (x − θ)², here (2 − 1)² = 1 with slope 2.
/// let obj = NodeObjective::quadratic(DMatrix::identity(1, 1));
/// let (v, g) = objective_value_and_grad(
///     &obj,
///     &DVector::from_vec(vec![2.0]),
///     &DVector::from_vec(vec![1.0]),
/// )
/// .unwrap();
/// assert_eq!((v, g[0]), (1.0, 2.0));
/// ```
pub fn objective_value_and_grad(
    obj: &NodeObjective,
    x: &DVector<f64>,
    theta: &DVector<f64>,
) -> Result<(f64, DVector<f64>)> {
    if x.len() != obj.dim() || theta.len() != obj.obs_dim() {
        return Err(Error::invalid(format!(
            "objective expects x in R^{} and theta in R^{} (got {} and {})",
            obj.dim(),
            obj.obs_dim(),
            x.len(),
            theta.len()
        )));
    }
    match obj {
        NodeObjective::Quadratic { h } => {
            let r = h * x - theta;
            Ok((r.norm_squared(), 2.0 * h.transpose() * r))
        }
        NodeObjective::SquaredRange { a } => {
            let r = a.dot(x) - theta[0];
            Ok((r * r, a * (2.0 * r)))
        }
    }
}

fn srls_row(l: [f64; 2]) -> DVector<f64> {
    DVector::from_vec(vec![-2.0 * l[0], -2.0 * l[1], 1.0])
}

/// Builds one squared-range observation row from an anchor position and a
/// range sample: `A = [−2 lᵀ, 1]`, `b = r² − ‖l‖²`. Negative range samples
/// (noise can produce them) are accepted and squared.
///
/// # Example
///
/// ```
/// use proxopt::problems::build_srls_row;
///
/// let (a, b) = build_srls_row([3.0, 4.0], 5.0);
/// assert_eq!(a.as_slice(), &[-6.0, -8.0, 1.0]);
/// assert_eq!(b, 0.0);
/// ```
#[must_use]
pub fn build_srls_row(l: [f64; 2], r: f64) -> (DVector<f64>, f64) {
    (srls_row(l), r * r - (l[0] * l[0] + l[1] * l[1]))
}

/// Pairwise coupling function family shared by every edge of a problem.
#[derive(Debug, Clone, PartialEq)]
pub enum PairConstraint {
    /// `h = ½‖x_i − x_j‖²`, used with a positive slack γ.
    Quadratic,
    /// `h = ½‖x_i − x_j‖²` with γ ≡ 0: agreement across edges is enforced
    /// asymptotically through the multipliers.
    Consensus,
    /// `h = ½(‖y_i−y_j‖² + log(e^{‖y_i−l̃_i‖²} + e^{‖y_j−l̃_j‖²}))` with
    /// γ ≡ 0; `anchors[i]` is node i's lifted anchor l̃_i.
    LseRange { anchors: Vec<DVector<f64>> },
}

impl PairConstraint {
    /// Lifted log-sum-exp variant from planar anchor positions (a trailing
    /// zero is appended to each).
    #[must_use]
    pub fn lse_range(positions: &[[f64; 2]]) -> Self {
        PairConstraint::LseRange {
            anchors: positions
                .iter()
                .map(|l| DVector::from_vec(vec![l[0], l[1], 0.0]))
                .collect(),
        }
    }
}

/// Value `h_ij(x_i, x_j)` and both partial gradients for the edge between
/// nodes `i` and `j`. The node indices only matter for the anchored
/// log-sum-exp variant; the quadratic variants ignore them.
///
/// # Errors
///
/// `InvalidArgument` on dimension mismatch or an anchor index out of range.
///
/// # Example
///
/// ```
/// use nalgebra::DVector;
/// use proxopt::problems::{constraint_value_and_grads, PairConstraint};
///
/// let xi = DVector::from_vec(vec![1.0, 0.0]);
/// let xj = DVector::from_vec(vec![0.0, 0.0]);
/// let (h, gi, gj) = constraint_value_and_grads(&PairConstraint::Quadratic, 0, 1, &xi, &xj).unwrap();
/// assert_eq!(h, 0.5);
/// assert_eq!(gi.as_slice(), &[1.0, 0.0]);
/// assert_eq!(gj.as_slice(), &[-1.0, 0.0]);
/// ```
pub fn constraint_value_and_grads(
    con: &PairConstraint,
    i: usize,
    j: usize,
    xi: &DVector<f64>,
    xj: &DVector<f64>,
) -> Result<(f64, DVector<f64>, DVector<f64>)> {
    if xi.len() != xj.len() {
        return Err(Error::invalid(format!(
            "constraint arguments must share a dimension (got {} and {})",
            xi.len(),
            xj.len()
        )));
    }
    match con {
        PairConstraint::Quadratic | PairConstraint::Consensus => {
            let d = xi - xj;
            let h = 0.5 * d.norm_squared();
            let gj = -&d;
            Ok((h, d, gj))
        }
        PairConstraint::LseRange { anchors } => {
            let (li, lj) = match (anchors.get(i), anchors.get(j)) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(Error::invalid(format!(
                        "edge ({i}, {j}) outside the anchored node range 0..{}",
                        anchors.len()
                    )))
                }
            };
            if li.len() != xi.len() {
                return Err(Error::invalid(format!(
                    "anchors live in R^{} but arguments in R^{}",
                    li.len(),
                    xi.len()
                )));
            }
            let di = xi - li;
            let dj = xj - lj;
            let a = di.norm_squared();
            let b = dj.norm_squared();
            // Shifted log-sum-exp: log(e^a + e^b) = m + log(e^{a−m} + e^{b−m}).
            let m = a.max(b);
            let lse = m + ((a - m).exp() + (b - m).exp()).ln();
            // Softmax weights via the sigmoid, stable for any finite a, b.
            let wi = 1.0 / (1.0 + (b - a).exp());
            let wj = 1.0 - wi;
            let dij = xi - xj;
            let h = 0.5 * (dij.norm_squared() + lse);
            let gi = &dij + di * wi;
            let gj = dj * wj - dij;
            Ok((h, gi, gj))
        }
    }
}

/// Deterministic expected-value view of a stochastic least-squares
/// objective:
///
/// ```text
/// E f(x) = ‖C x − m‖² + floor
/// ```
///
/// with `m = E θ` and `floor` the irreducible observation-noise variance.
/// For the quadratic model `C = H`, `m = H x_true`, `floor = σ²·q`; for the
/// squared-range model `C` is the observation row, `m = E b`, and `floor =
/// Var(b)`. The gradient `2 Cᵀ(C x − m)` is the exact expectation of the
/// stochastic gradient, which is what the unbiasedness checks compare
/// against.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedObjective {
    pub c: DMatrix<f64>,
    pub m: DVector<f64>,
    pub floor: f64,
}

impl ExpectedObjective {
    pub fn new(c: DMatrix<f64>, m: DVector<f64>, floor: f64) -> Result<Self> {
        if c.nrows() != m.len() {
            return Err(Error::invalid(format!(
                "mean vector length {} does not match {} observation rows",
                m.len(),
                c.nrows()
            )));
        }
        if !floor.is_finite() || floor < 0.0 {
            return Err(Error::invalid(format!(
                "noise floor must be finite and nonnegative (got {floor})"
            )));
        }
        Ok(ExpectedObjective { c, m, floor })
    }

    /// Expected value at `x`, including the noise floor.
    #[must_use]
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        (&self.c * x - &self.m).norm_squared() + self.floor
    }

    /// Expected value with the noise floor removed (the excess risk).
    #[must_use]
    pub fn excess(&self, x: &DVector<f64>) -> f64 {
        (&self.c * x - &self.m).norm_squared()
    }

    /// Gradient of the expected value.
    #[must_use]
    pub fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        2.0 * self.c.transpose() * (&self.c * x - &self.m)
    }
}

/// Sum of per-node expected objectives at a stacked point.
pub fn expected_total(expected: &[ExpectedObjective], x: &[DVector<f64>]) -> Result<f64> {
    if expected.len() != x.len() {
        return Err(Error::invalid(format!(
            "{} expected objectives but {} node vectors",
            expected.len(),
            x.len()
        )));
    }
    Ok(expected.iter().zip(x).map(|(e, xi)| e.value(xi)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b])
    }

    fn vec3(a: f64, b: f64, c: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b, c])
    }

    /// Central finite difference of a scalar function of one vector slot.
    fn fd_grad(f: impl Fn(&DVector<f64>) -> f64, at: &DVector<f64>) -> DVector<f64> {
        let h = 1e-6;
        let mut g = DVector::zeros(at.len());
        for k in 0..at.len() {
            let mut up = at.clone();
            let mut dn = at.clone();
            up[k] += h;
            dn[k] -= h;
            g[k] = (f(&up) - f(&dn)) / (2.0 * h);
        }
        g
    }

    #[test]
    fn quadratic_residual_zero_at_theta() {
        let obj = NodeObjective::scalar_identity();
        let x = DVector::from_vec(vec![3.0]);
        let (v, g) = objective_value_and_grad(&obj, &x, &x).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn quadratic_scalar_value_and_slope() {
        let obj = NodeObjective::scalar_identity();
        let (v, g) = objective_value_and_grad(
            &obj,
            &DVector::from_vec(vec![2.0]),
            &DVector::from_vec(vec![1.0]),
        )
        .unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(g[0], 2.0);
    }

    #[test]
    fn quadratic_matches_finite_differences() {
        let h = DMatrix::from_row_slice(2, 3, &[1.0, -0.5, 2.0, 0.0, 1.5, -1.0]);
        let obj = NodeObjective::quadratic(h.clone());
        let x = vec3(0.3, -1.2, 0.7);
        let theta = vec2(0.5, -0.25);
        let (_, g) = objective_value_and_grad(&obj, &x, &theta).unwrap();
        let fd = fd_grad(
            |p| objective_value_and_grad(&obj, p, &theta).unwrap().0,
            &x,
        );
        assert!((g - fd).norm() < 1e-6);
    }

    #[test]
    fn srls_row_hand_values() {
        let (a, b) = build_srls_row([3.0, 4.0], 5.0);
        assert_eq!(a.as_slice(), &[-6.0, -8.0, 1.0]);
        assert_eq!(b, 0.0);
        let (a, b) = build_srls_row([0.0, 0.0], 1.0);
        assert_eq!(a.as_slice(), &[0.0, 0.0, 1.0]);
        assert_eq!(b, 1.0);
        let (a, b) = build_srls_row([1.0, 1.0], 0.0);
        assert_eq!(a.as_slice(), &[-2.0, -2.0, 1.0]);
        assert_eq!(b, -2.0);
    }

    #[test]
    fn squared_range_gradient() {
        let obj = NodeObjective::squared_range([3.0, 4.0]);
        let y = vec3(0.5, -0.5, 2.0);
        let b = DVector::from_vec(vec![1.5]);
        let (v, g) = objective_value_and_grad(&obj, &y, &b).unwrap();
        // a·y = −3 + 4 + 2 = 3; residual 1.5; value 2.25.
        assert!((v - 2.25).abs() < 1e-15);
        let fd = fd_grad(|p| objective_value_and_grad(&obj, p, &b).unwrap().0, &y);
        assert!((g - fd).norm() < 1e-6);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let obj = NodeObjective::scalar_identity();
        let err = objective_value_and_grad(&obj, &vec2(1.0, 2.0), &DVector::from_vec(vec![0.0]));
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn quadratic_constraint_hand_values() {
        let (h, gi, gj) =
            constraint_value_and_grads(&PairConstraint::Quadratic, 0, 1, &vec2(1.0, 0.0), &vec2(0.0, 0.0))
                .unwrap();
        assert_eq!(h, 0.5);
        assert_eq!(gi.as_slice(), &[1.0, 0.0]);
        assert_eq!(gj.as_slice(), &[-1.0, 0.0]);
        let x = vec2(0.7, -0.3);
        let (h0, gi0, gj0) =
            constraint_value_and_grads(&PairConstraint::Quadratic, 0, 1, &x, &x).unwrap();
        assert_eq!(h0, 0.0);
        assert_eq!(gi0.norm(), 0.0);
        assert_eq!(gj0.norm(), 0.0);
    }

    #[test]
    fn lse_fully_symmetric_point() {
        // All vectors and anchors at the origin: h = ½ log 2, gradients 0.
        let con = PairConstraint::lse_range(&[[0.0, 0.0], [0.0, 0.0]]);
        let y = vec3(0.0, 0.0, 0.0);
        let (h, gi, gj) = constraint_value_and_grads(&con, 0, 1, &y, &y).unwrap();
        assert!((h - 0.5 * 2.0_f64.ln()).abs() < 1e-15);
        assert!((h - 0.34657359027997264).abs() < 1e-15);
        assert_eq!(gi.norm(), 0.0);
        assert_eq!(gj.norm(), 0.0);
    }

    #[test]
    fn lse_matches_finite_differences() {
        let con = PairConstraint::lse_range(&[[0.2, 0.8], [0.6, 0.1]]);
        let yi = vec3(0.3, 0.4, 0.2);
        let yj = vec3(0.7, 0.1, -0.3);
        let (_, gi, gj) = constraint_value_and_grads(&con, 0, 1, &yi, &yj).unwrap();
        let fdi = fd_grad(
            |p| constraint_value_and_grads(&con, 0, 1, p, &yj).unwrap().0,
            &yi,
        );
        let fdj = fd_grad(
            |p| constraint_value_and_grads(&con, 0, 1, &yi, p).unwrap().0,
            &yj,
        );
        assert!((gi - fdi).norm() < 1e-6);
        assert!((gj - fdj).norm() < 1e-6);
    }

    #[test]
    fn constraint_symmetry_under_role_swap() {
        let con = PairConstraint::lse_range(&[[0.2, 0.8], [0.6, 0.1]]);
        let yi = vec3(0.3, 0.4, 0.2);
        let yj = vec3(0.7, 0.1, -0.3);
        let (hij, gi, gj) = constraint_value_and_grads(&con, 0, 1, &yi, &yj).unwrap();
        let (hji, gj2, gi2) = constraint_value_and_grads(&con, 1, 0, &yj, &yi).unwrap();
        assert_eq!(hij, hji);
        assert_eq!(gi, gi2);
        assert_eq!(gj, gj2);
    }

    #[test]
    fn lse_is_stable_for_huge_exponents() {
        // Anchor far away: ‖y − l̃‖² ≈ 2·10⁶, naive e^a overflows.
        let con = PairConstraint::lse_range(&[[1000.0, 1000.0], [0.0, 0.0]]);
        let yi = vec3(0.0, 0.0, 0.0);
        let yj = vec3(1.0, 1.0, 0.0);
        let (h, gi, gj) = constraint_value_and_grads(&con, 0, 1, &yi, &yj).unwrap();
        assert!(h.is_finite());
        assert!(gi.iter().all(|v| v.is_finite()));
        assert!(gj.iter().all(|v| v.is_finite()));
        // The i-side exponent dominates, so its softmax weight is 1.
        assert!((h - 0.5 * (2.0 + 2_000_000.0)).abs() / h < 1e-12);
    }

    #[test]
    fn lse_upper_bounds_the_pairwise_max() {
        let con = PairConstraint::lse_range(&[[0.4, 0.3], [0.9, 0.2]]);
        let anchors = [vec3(0.4, 0.3, 0.0), vec3(0.9, 0.2, 0.0)];
        let points = [
            (vec3(0.1, 0.2, 0.3), vec3(0.5, 0.5, 0.5)),
            (vec3(1.0, 0.0, 0.0), vec3(0.0, 1.0, 0.0)),
            (vec3(-0.3, 0.8, 0.1), vec3(0.2, -0.6, 0.4)),
        ];
        for (yi, yj) in points {
            let (h, _, _) = constraint_value_and_grads(&con, 0, 1, &yi, &yj).unwrap();
            let a = (&yi - &anchors[0]).norm_squared();
            let b = (&yj - &anchors[1]).norm_squared();
            let nonconvex = 0.5 * ((&yi - &yj).norm_squared() + a.max(b));
            assert!(h >= nonconvex);
        }
    }

    #[test]
    fn lse_sampled_convexity_in_first_argument() {
        let con = PairConstraint::lse_range(&[[0.2, 0.8], [0.6, 0.1]]);
        let yj = vec3(0.7, 0.1, -0.3);
        let pairs = [
            (vec3(0.0, 0.0, 0.0), vec3(1.0, 1.0, 1.0)),
            (vec3(-0.5, 0.3, 0.9), vec3(0.8, -0.2, 0.1)),
        ];
        for (a, b) in pairs {
            for k in 0..=10 {
                let t = k as f64 / 10.0;
                let mid = &a * t + &b * (1.0 - t);
                let h_mid = constraint_value_and_grads(&con, 0, 1, &mid, &yj).unwrap().0;
                let h_a = constraint_value_and_grads(&con, 0, 1, &a, &yj).unwrap().0;
                let h_b = constraint_value_and_grads(&con, 0, 1, &b, &yj).unwrap().0;
                assert!(h_mid <= t * h_a + (1.0 - t) * h_b + 1e-9);
            }
        }
    }

    #[test]
    fn expected_objective_value_floor_and_grad() {
        let e = ExpectedObjective::new(
            DMatrix::identity(1, 1),
            DVector::from_vec(vec![2.0]),
            10.0,
        )
        .unwrap();
        let x = DVector::from_vec(vec![3.0]);
        assert_eq!(e.value(&x), 11.0);
        assert_eq!(e.excess(&x), 1.0);
        assert_eq!(e.grad(&x)[0], 2.0);
        assert!(ExpectedObjective::new(DMatrix::identity(1, 1), DVector::zeros(1), -1.0).is_err());
    }
}
