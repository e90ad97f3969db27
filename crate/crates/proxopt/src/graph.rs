//! Communication network construction and spectral queries.
//!
//! A [`Network`] is a symmetric, connected, self-loop-free graph with a
//! planar position for every node. Construction goes through [`RawGraph`],
//! which carries no connectivity guarantee; generators validate before
//! handing out a `Network`, so every `Network` in the program satisfies its
//! invariants by construction.
//!
//! Spectral queries operate on the combinatorial Laplacian `L = D − A`. The
//! second-smallest eigenvalue (the Fiedler value, or algebraic connectivity)
//! is used to match random topologies to a reference topology.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::seeding::{stream, Stream};
use crate::{Error, Result};

/// Resample budget for randomized generators (connectivity retries and
/// Fiedler matching attempts).
pub const RETRY_BUDGET: usize = 1000;

/// Axis-aligned deployment region with its origin at (0, 0), in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub width: f64,
    pub height: f64,
}

impl Region {
    pub fn new(width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0 && height > 0.0) || !width.is_finite() || !height.is_finite() {
            return Err(Error::invalid(format!(
                "region dimensions must be positive and finite (got {width} x {height})"
            )));
        }
        Ok(Region { width, height })
    }

    /// Square region of the given side length.
    pub fn square(side: f64) -> Result<Self> {
        Region::new(side, side)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0.0..=self.width).contains(&p[0]) && (0.0..=self.height).contains(&p[1])
    }

    pub fn center(&self) -> [f64; 2] {
        [self.width / 2.0, self.height / 2.0]
    }
}

/// Node placement law for random geometric topologies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// Independent uniform positions over the region.
    Uniform,
    /// Gaussian around the region center, standard deviation = dimension/4
    /// per axis, truncated to the region by resampling.
    Gaussian,
}

/// An edge list plus positions with no structural guarantees; the
/// pre-validation form used by parsers and generators.
#[derive(Debug, Clone, PartialEq)]
pub struct RawGraph {
    pub positions: Vec<[f64; 2]>,
    /// Unordered edges stored canonically as (low, high).
    pub edges: Vec<(usize, usize)>,
}

impl RawGraph {
    pub fn n_nodes(&self) -> usize {
        self.positions.len()
    }

    /// Sorted neighbor lists (ascending), indexable by node.
    pub fn neighborhoods(&self) -> Vec<Vec<usize>> {
        let mut nbrs = vec![Vec::new(); self.positions.len()];
        for &(i, j) in &self.edges {
            nbrs[i].push(j);
            nbrs[j].push(i);
        }
        for list in &mut nbrs {
            list.sort_unstable();
        }
        nbrs
    }

    /// Breadth-first reachability from node 0 covers every node.
    pub fn is_connected(&self) -> bool {
        let n = self.positions.len();
        if n == 0 {
            return false;
        }
        let nbrs = self.neighborhoods();
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for &j in &nbrs[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count == n
    }

    /// Validates invariants (index bounds, no self-loops, no duplicate
    /// edges, connectivity) and produces a [`Network`].
    pub fn validate(mut self) -> Result<Network> {
        let n = self.positions.len();
        if n == 0 {
            return Err(Error::invalid("network must have at least one node"));
        }
        for &mut (ref mut i, ref mut j) in &mut self.edges {
            if *i == *j {
                return Err(Error::invalid(format!("self-loop at node {i}")));
            }
            if *i > *j {
                std::mem::swap(i, j);
            }
            if *j >= n {
                return Err(Error::invalid(format!(
                    "edge ({i}, {j}) references a node outside 0..{n}"
                )));
            }
        }
        self.edges.sort_unstable();
        if self.edges.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("duplicate edge"));
        }
        if !self.is_connected() {
            return Err(Error::invalid("network is not connected"));
        }
        let neighborhoods = self.neighborhoods();
        Ok(Network {
            positions: self.positions,
            edges: self.edges,
            neighborhoods,
        })
    }
}

/// A validated symmetric connected network with node positions.
///
/// Edges are stored once per unordered pair, canonically `(low, high)` in
/// lexicographic order; neighbor lists are sorted ascending. Both orderings
/// are part of the determinism contract: every summation in the engine
/// follows them.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    positions: Vec<[f64; 2]>,
    edges: Vec<(usize, usize)>,
    neighborhoods: Vec<Vec<usize>>,
}

impl Network {
    pub fn n_nodes(&self) -> usize {
        self.positions.len()
    }

    /// Canonical unordered edges, sorted lexicographically.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn position(&self, i: usize) -> [f64; 2] {
        self.positions[i]
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    /// Neighbors of `i`, ascending.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighborhoods[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighborhoods[i].len()
    }

    /// Index of the canonical edge {i, j}, if present.
    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        let key = (i.min(j), i.max(j));
        self.edges.binary_search(&key).ok()
    }

    /// Euclidean distance between the positions of `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        dist(self.positions[i], self.positions[j])
    }

    /// Combinatorial Laplacian L = D − A as a dense matrix.
    pub fn laplacian(&self) -> DMatrix<f64> {
        laplacian_of(self.positions.len(), &self.edges)
    }

    /// The node whose position is nearest `point` (ties broken by lower
    /// index).
    pub fn nearest_node(&self, point: [f64; 2]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &p) in self.positions.iter().enumerate() {
            let d = dist(p, point);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

fn laplacian_of(n: usize, edges: &[(usize, usize)]) -> DMatrix<f64> {
    let mut l = DMatrix::<f64>::zeros(n, n);
    for &(i, j) in edges {
        l[(i, i)] += 1.0;
        l[(j, j)] += 1.0;
        l[(i, j)] -= 1.0;
        l[(j, i)] -= 1.0;
    }
    l
}

fn fiedler_of(n: usize, edges: &[(usize, usize)]) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let eig = laplacian_of(n, edges).symmetric_eigen();
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).expect("Laplacian eigenvalues are real"));
    // The Laplacian is positive semidefinite; tiny negative eigenvalues are
    // rounding artifacts.
    vals[1].max(0.0)
}

/// Second-smallest Laplacian eigenvalue (algebraic connectivity) of a
/// validated network. Always ≥ 0; strictly positive because a `Network` is
/// connected.
///
/// # Example
///
/// ```
/// use proxopt::graph::{make_grid, fiedler_value, Region};
///
/// // Path on two nodes: Laplacian spectrum {0, 2}.
/// let p2 = make_grid(1, 2, Region::square(1.0).unwrap()).unwrap();
/// assert!((fiedler_value(&p2) - 2.0).abs() < 1e-9);
/// ```
pub fn fiedler_value(net: &Network) -> f64 {
    fiedler_of(net.n_nodes(), &net.edges)
}

/// Fiedler value of an unvalidated graph; 0 exactly when the graph is
/// disconnected (up to eigensolver tolerance).
pub fn fiedler_value_raw(raw: &RawGraph) -> f64 {
    fiedler_of(raw.n_nodes(), &raw.edges)
}

/// Builds a `rows × cols` lattice filling `region`: nodes at cell centers,
/// 4-neighbor edges. Node `r*cols + c` sits at
/// `((c+0.5)·width/cols, (r+0.5)·height/rows)`.
///
/// # Errors
///
/// `InvalidArgument` when `rows` or `cols` is zero.
///
/// # Example
///
/// ```
/// use proxopt::graph::{make_grid, Region};
///
/// let net = make_grid(8, 8, Region::square(1000.0).unwrap()).unwrap();
/// assert_eq!(net.n_nodes(), 64);
/// assert_eq!(net.n_edges(), 112);
/// ```
pub fn make_grid(rows: usize, cols: usize, region: Region) -> Result<Network> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid(format!(
            "grid dimensions must be positive (got {rows} x {cols})"
        )));
    }
    let dx = region.width / cols as f64;
    let dy = region.height / rows as f64;
    let mut positions = Vec::with_capacity(rows * cols);
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            positions.push([(c as f64 + 0.5) * dx, (r as f64 + 0.5) * dy]);
            if c + 1 < cols {
                edges.push((i, i + 1));
            }
            if r + 1 < rows {
                edges.push((i, i + cols));
            }
        }
    }
    RawGraph { positions, edges }.validate()
}

/// Samples node positions by `placement`, connects pairs within `radius`,
/// and resamples (up to [`RETRY_BUDGET`] attempts) until the graph is
/// connected. Deterministic in `(n, region, radius, placement, seed)`.
///
/// # Errors
///
/// `InvalidArgument` for `n < 2` or non-positive radius;
/// `GenerationFailure` when the retry budget is exhausted.
pub fn make_random_geometric(
    n: usize,
    region: Region,
    radius: f64,
    placement: Placement,
    seed: u64,
) -> Result<Network> {
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 nodes (got {n})")));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::invalid(format!(
            "connection radius must be positive and finite (got {radius})"
        )));
    }
    for attempt in 0..RETRY_BUDGET {
        let raw = sample_geometric(n, region, radius, placement, seed, attempt as u32);
        if raw.is_connected() {
            return raw.validate();
        }
    }
    Err(Error::GenerationFailure {
        attempts: RETRY_BUDGET,
        reason: format!(
            "no connected geometric graph on {n} nodes with radius {radius} in \
             {} x {} region; increase the radius or shrink the region",
            region.width, region.height
        ),
    })
}

fn sample_geometric(
    n: usize,
    region: Region,
    radius: f64,
    placement: Placement,
    seed: u64,
    attempt: u32,
) -> RawGraph {
    let mut rng = stream(seed, Stream::Placement, 0, 0, attempt);
    let positions: Vec<[f64; 2]> = match placement {
        Placement::Uniform => (0..n)
            .map(|_| {
                [
                    rng.gen::<f64>() * region.width,
                    rng.gen::<f64>() * region.height,
                ]
            })
            .collect(),
        Placement::Gaussian => {
            let center = region.center();
            let nx = Normal::new(center[0], region.width / 4.0).expect("finite parameters");
            let ny = Normal::new(center[1], region.height / 4.0).expect("finite parameters");
            (0..n)
                .map(|_| loop {
                    let p = [nx.sample(&mut rng), ny.sample(&mut rng)];
                    if region.contains(p) {
                        break p;
                    }
                })
                .collect()
        }
    };
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if dist(positions[i], positions[j]) <= radius {
                edges.push((i, j));
            }
        }
    }
    RawGraph { positions, edges }
}

/// Parameters for a topology generator, so that generators can be passed
/// around as values (Fiedler matching, config files).
#[derive(Debug, Clone, PartialEq)]
pub enum TopologyParams {
    Grid {
        rows: usize,
        cols: usize,
        region: Region,
    },
    RandomGeometric {
        n: usize,
        region: Region,
        radius: f64,
        placement: Placement,
    },
}

/// Runs the generator described by `params`. Grid generation ignores the
/// seed (it is deterministic already).
pub fn generate(params: &TopologyParams, seed: u64) -> Result<Network> {
    match *params {
        TopologyParams::Grid { rows, cols, region } => make_grid(rows, cols, region),
        TopologyParams::RandomGeometric {
            n,
            region,
            radius,
            placement,
        } => make_random_geometric(n, region, radius, placement, seed),
    }
}

/// Generates candidates from `params` (candidate k uses seed `seed + k`)
/// until one has a Fiedler value within `rel_tol` (relative) of the
/// target's; returns the first acceptable candidate.
///
/// # Errors
///
/// `InvalidArgument` for non-positive tolerance; `GenerationFailure` when
/// [`RETRY_BUDGET`] candidates all miss the tolerance band.
pub fn match_fiedler(
    target: &Network,
    params: &TopologyParams,
    rel_tol: f64,
    seed: u64,
) -> Result<Network> {
    match_fiedler_value(fiedler_value(target), params, rel_tol, seed)
}

/// Like [`match_fiedler`] but against an explicit Fiedler value, for
/// callers that carry the target as a number (config files) rather than a
/// network.
///
/// # Errors
///
/// Same conditions as [`match_fiedler`], plus `InvalidArgument` for a
/// non-positive target.
pub fn match_fiedler_value(
    want: f64,
    params: &TopologyParams,
    rel_tol: f64,
    seed: u64,
) -> Result<Network> {
    if !(rel_tol > 0.0) {
        return Err(Error::invalid(format!(
            "relative tolerance must be positive (got {rel_tol})"
        )));
    }
    if !(want > 0.0) || !want.is_finite() {
        return Err(Error::invalid(format!(
            "the target Fiedler value must be positive (got {want})"
        )));
    }
    for k in 0..RETRY_BUDGET {
        let candidate = match generate(params, seed.wrapping_add(k as u64)) {
            Ok(net) => net,
            // A candidate that fails to connect just consumes one attempt.
            Err(Error::GenerationFailure { .. }) => continue,
            Err(e) => return Err(e),
        };
        if (fiedler_value(&candidate) - want).abs() <= rel_tol * want {
            return Ok(candidate);
        }
    }
    Err(Error::GenerationFailure {
        attempts: RETRY_BUDGET,
        reason: format!(
            "no generated network reached Fiedler value {want:.6} within {:.1}%",
            rel_tol * 100.0
        ),
    })
}
