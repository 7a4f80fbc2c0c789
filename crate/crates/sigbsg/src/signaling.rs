//! Signaling commitments in both representations: the mixed strategy plus
//! per-type correlation tensor, and the equivalent per-type distribution
//! over posterior beliefs. Also the expected-utility functionals driving
//! everything downstream: what a follower gains by reporting some type,
//! which report is optimal, and what the leader earns under the induced
//! reporting profile.

use thiserror::Error;

use crate::game::{Belief, Game, GameError};
use crate::geometry::{enumerate_vertices, BeliefAtlas, GeometryError, Polytope};

/// Row-marginal / mass tolerances on commitments and distributions.
pub const MASS_TOL: f64 = 1e-9;
/// Posteriors closer than this merge into one support point.
pub const MERGE_TOL: f64 = 1e-9;
/// Signals sent with at most this probability are dropped.
pub const NULL_SIGNAL_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SignalingError {
    #[error("commitment invariant violated: {0}")]
    InvalidCommitment(String),
    #[error("distribution invariant violated: {0}")]
    InvalidDistribution(String),
    #[error("distribution is inconsistent: residual {0}")]
    Inconsistent(f64),
    #[error("belief {0:?} lies outside the target region")]
    OutsideRegion(Vec<f64>),
    #[error("no convex decomposition over the given vertices")]
    DecompositionFailed,
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A signaling commitment: announced mixed strategy `x` plus one
/// correlation matrix per type. Entry (i, j) of a type's matrix is the
/// joint probability of playing action i and sending signal j to a follower
/// who reported that type; rows must sum to `x`.
///
/// Matrices may have any number of signal columns (optimal direct schemes
/// use one per follower action, but converted distributions may need more).
#[derive(Debug, Clone)]
pub struct Commitment {
    x: Vec<f64>,
    tensors: Vec<Vec<Vec<f64>>>,
}

impl Commitment {
    pub fn new(x: Vec<f64>, tensors: Vec<Vec<Vec<f64>>>) -> Result<Self, SignalingError> {
        let m = x.len();
        if m == 0 || tensors.is_empty() {
            return Err(SignalingError::InvalidCommitment("empty commitment".into()));
        }
        let sum: f64 = x.iter().sum();
        if (sum - 1.0).abs() > MASS_TOL {
            return Err(SignalingError::InvalidCommitment(format!(
                "mixed strategy mass {sum} not 1"
            )));
        }
        if x.iter().any(|&v| v < -MASS_TOL || !v.is_finite()) {
            return Err(SignalingError::InvalidCommitment("negative mixed strategy".into()));
        }
        for (theta, tensor) in tensors.iter().enumerate() {
            if tensor.len() != m {
                return Err(SignalingError::InvalidCommitment(format!(
                    "type {theta} tensor has {} rows, expected {m}",
                    tensor.len()
                )));
            }
            let width = tensor[0].len();
            if width == 0 {
                return Err(SignalingError::InvalidCommitment("no signals".into()));
            }
            for (i, row) in tensor.iter().enumerate() {
                if row.len() != width {
                    return Err(SignalingError::InvalidCommitment(format!(
                        "type {theta} tensor is ragged at row {i}"
                    )));
                }
                if row.iter().any(|&v| v < -MASS_TOL || !v.is_finite()) {
                    return Err(SignalingError::InvalidCommitment(format!(
                        "type {theta} tensor has a negative entry"
                    )));
                }
                let row_sum: f64 = row.iter().sum();
                if (row_sum - x[i]).abs() > MASS_TOL {
                    return Err(SignalingError::InvalidCommitment(format!(
                        "type {theta} row {i} sums to {row_sum}, expected x[{i}] = {}",
                        x[i]
                    )));
                }
            }
        }
        Ok(Commitment { x, tensors })
    }

    /// A commitment that reveals nothing: every type gets the single signal
    /// 0 regardless of the realized action.
    pub fn uninformative(x: Vec<f64>, num_types: usize) -> Result<Self, SignalingError> {
        let tensors = (0..num_types)
            .map(|_| x.iter().map(|&xi| vec![xi]).collect())
            .collect();
        Commitment::new(x, tensors)
    }

    pub fn mixed_strategy(&self) -> &[f64] {
        &self.x
    }

    pub fn num_types(&self) -> usize {
        self.tensors.len()
    }

    pub fn tensor(&self, theta: usize) -> &[Vec<f64>] {
        &self.tensors[theta]
    }

    pub fn num_signals(&self, theta: usize) -> usize {
        self.tensors[theta][0].len()
    }

    /// Probability that signal `j` is sent to a follower reporting `theta`.
    pub fn signal_probability(&self, theta: usize, j: usize) -> f64 {
        self.tensors[theta].iter().map(|row| row[j]).sum()
    }

    pub fn to_json(&self, game: &Game) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (theta, tensor) in self.tensors.iter().enumerate() {
            map.insert(
                game.type_names()[theta].clone(),
                serde_json::json!(tensor),
            );
        }
        serde_json::json!({ "x": self.x, "C": map })
    }
}

/// Per-type finitely supported distribution over posterior beliefs.
#[derive(Debug, Clone)]
pub struct BeliefDistribution {
    support: Vec<Vec<(Belief, f64)>>,
}

impl BeliefDistribution {
    pub fn new(support: Vec<Vec<(Belief, f64)>>) -> Result<Self, SignalingError> {
        if support.is_empty() {
            return Err(SignalingError::InvalidDistribution("no types".into()));
        }
        for (theta, points) in support.iter().enumerate() {
            if points.is_empty() {
                return Err(SignalingError::InvalidDistribution(format!(
                    "type {theta} has empty support"
                )));
            }
            let mut mass = 0.0;
            for (_, w) in points {
                if *w < -MASS_TOL || !w.is_finite() {
                    return Err(SignalingError::InvalidDistribution(format!(
                        "type {theta} has negative weight {w}"
                    )));
                }
                mass += w;
            }
            if (mass - 1.0).abs() > MASS_TOL {
                return Err(SignalingError::InvalidDistribution(format!(
                    "type {theta} mass {mass} not 1"
                )));
            }
        }
        Ok(BeliefDistribution { support })
    }

    pub fn num_types(&self) -> usize {
        self.support.len()
    }

    pub fn support(&self, theta: usize) -> &[(Belief, f64)] {
        &self.support[theta]
    }

    /// The expected posterior of one type (equals the announced mixed
    /// strategy for consistent distributions).
    pub fn mean(&self, theta: usize) -> Vec<f64> {
        let dim = self.support[theta][0].0.dim();
        let mut mean = vec![0.0; dim];
        for (b, w) in &self.support[theta] {
            for (i, &coord) in b.coords().iter().enumerate() {
                mean[i] += w * coord;
            }
        }
        mean
    }

    /// Largest coordinate mismatch between any two types' means.
    pub fn consistency_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let means: Vec<Vec<f64>> = (0..self.num_types()).map(|t| self.mean(t)).collect();
        for a in 0..means.len() {
            for b in (a + 1)..means.len() {
                for i in 0..means[a].len() {
                    worst = worst.max((means[a][i] - means[b][i]).abs());
                }
            }
        }
        worst
    }

    pub fn to_json(&self, game: &Game) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (theta, points) in self.support.iter().enumerate() {
            let entries: Vec<serde_json::Value> = points
                .iter()
                .map(|(b, w)| serde_json::json!({"belief": b.coords(), "weight": w}))
                .collect();
            map.insert(game.type_names()[theta].clone(), serde_json::json!(entries));
        }
        serde_json::Value::Object(map)
    }
}

/// Bayes-updates a commitment into its per-type posterior distribution.
/// Signals with negligible probability are dropped; posteriors equal at
/// 1e-9 merge with summed weights.
pub fn commitment_to_beliefs(game: &Game, sigma: &Commitment) -> BeliefDistribution {
    let m = game.m();
    let mut support = Vec::with_capacity(sigma.num_types());
    for theta in 0..sigma.num_types() {
        let mut points: Vec<(Belief, f64)> = Vec::new();
        for j in 0..sigma.num_signals(theta) {
            let nu = sigma.signal_probability(theta, j);
            if nu <= NULL_SIGNAL_TOL {
                continue;
            }
            let coords: Vec<f64> = (0..m).map(|i| sigma.tensor(theta)[i][j] / nu).collect();
            let belief = Belief::new(coords).expect("posterior of a valid commitment");
            match points.iter_mut().find(|(b, _)| b.linf_distance(&belief) <= MERGE_TOL) {
                Some((_, w)) => *w += nu,
                None => points.push((belief, nu)),
            }
        }
        support.push(points);
    }
    BeliefDistribution::new(support).expect("posterior masses sum to the signal masses")
}

/// Rebuilds a commitment from a consistent distribution: one signal per
/// support point, with the mixed strategy read off the expected posterior.
pub fn beliefs_to_commitment(
    game: &Game,
    pi: &BeliefDistribution,
) -> Result<Commitment, SignalingError> {
    let residual = pi.consistency_residual();
    if residual > MASS_TOL {
        return Err(SignalingError::Inconsistent(residual));
    }
    let m = game.m();
    let x = pi.mean(0);
    let mut tensors = Vec::with_capacity(pi.num_types());
    for theta in 0..pi.num_types() {
        let points = pi.support(theta);
        let mut tensor = vec![vec![0.0; points.len()]; m];
        for (s, (b, w)) in points.iter().enumerate() {
            for i in 0..m {
                tensor[i][s] = w * b.coords()[i];
            }
        }
        // Snap rows to the shared marginal to absorb residual rounding.
        for i in 0..m {
            let row_sum: f64 = tensor[i].iter().sum();
            if (row_sum - x[i]).abs() > 0.0 && row_sum > 0.0 {
                let scale = x[i] / row_sum;
                if (scale - 1.0).abs() < 1e-6 {
                    for v in tensor[i].iter_mut() {
                        *v *= scale;
                    }
                }
            }
        }
        tensors.push(tensor);
    }
    Commitment::new(x, tensors)
}

/// Expected payoff of a follower of `true_type` who reported `reported` and
/// best-responds to each induced posterior.
pub fn report_value(
    game: &Game,
    pi: &BeliefDistribution,
    reported: usize,
    true_type: usize,
) -> f64 {
    pi.support(reported)
        .iter()
        .map(|(b, w)| w * game.follower_value(true_type, b))
        .sum()
}

/// The report maximizing the follower's expected payoff; ties resolve to
/// the lowest type index.
pub fn optimal_report(game: &Game, pi: &BeliefDistribution, true_type: usize) -> usize {
    let values: Vec<f64> = (0..pi.num_types())
        .map(|reported| report_value(game, pi, reported, true_type))
        .collect();
    let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .position(|&v| v >= best - MASS_TOL)
        .expect("at least one report")
}

/// The leader's expected payoff when `true_type` reported `reported`.
pub fn leader_report_value(
    game: &Game,
    pi: &BeliefDistribution,
    reported: usize,
    true_type: usize,
) -> f64 {
    pi.support(reported)
        .iter()
        .map(|(b, w)| w * game.leader_belief_value(true_type, b))
        .sum()
}

/// Prior-weighted leader payoff with every type reporting optimally.
pub fn leader_objective(game: &Game, pi: &BeliefDistribution) -> f64 {
    (0..game.k())
        .map(|theta| {
            let report = optimal_report(game, pi, theta);
            game.prior()[theta] * leader_report_value(game, pi, report, theta)
        })
        .sum()
}

/// Diagnostic variant of the objective with reports forced truthful.
pub fn truthful_leader_objective(game: &Game, pi: &BeliefDistribution) -> f64 {
    (0..game.k())
        .map(|theta| game.prior()[theta] * leader_report_value(game, pi, theta, theta))
        .sum()
}

/// Expresses `b` as a convex combination of the given vertices.
///
/// Deterministic minimal support: vertex subsets are tried in order of
/// (size, lexicographic index), and the first exact solution wins, so a
/// belief equal to a vertex gets unit mass on that vertex.
pub fn convex_decompose(
    b: &Belief,
    region: &Polytope,
    vertices: &[Vec<f64>],
) -> Result<Vec<f64>, SignalingError> {
    if !region.closure().membership(b.coords()) {
        return Err(SignalingError::OutsideRegion(b.coords().to_vec()));
    }
    let dim = b.dim();
    let max_size = (dim + 1).min(vertices.len());
    for size in 1..=max_size {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            if let Some(weights) = try_subset(b, vertices, &idx) {
                let mut full = vec![0.0; vertices.len()];
                for (pos, &vi) in idx.iter().enumerate() {
                    full[vi] = weights[pos];
                }
                return Ok(full);
            }
            let n = vertices.len();
            let mut i = size;
            loop {
                if i == 0 {
                    idx.clear();
                    break;
                }
                i -= 1;
                if idx[i] != i + n - size {
                    idx[i] += 1;
                    for j in i + 1..size {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
            }
            if idx.is_empty() {
                break;
            }
        }
    }
    Err(SignalingError::DecompositionFailed)
}

/// Solves the barycentric system for one vertex subset; accepts only exact
/// nonnegative solutions.
fn try_subset(b: &Belief, vertices: &[Vec<f64>], idx: &[usize]) -> Option<Vec<f64>> {
    let dim = b.dim();
    let k = idx.len();
    // Rows: one per coordinate plus the unit-mass row.
    let mut a = Vec::with_capacity(dim + 1);
    let mut rhs = Vec::with_capacity(dim + 1);
    for coord in 0..dim {
        a.push(idx.iter().map(|&vi| vertices[vi][coord]).collect::<Vec<f64>>());
        rhs.push(b.coords()[coord]);
    }
    a.push(vec![1.0; k]);
    rhs.push(1.0);

    let weights = solve_least_like(a, rhs, k)?;
    if weights.iter().any(|&w| w < -MASS_TOL) {
        return None;
    }
    // Verify the reconstruction.
    for coord in 0..dim {
        let rebuilt: f64 = idx
            .iter()
            .zip(&weights)
            .map(|(&vi, &w)| w * vertices[vi][coord])
            .sum();
        if (rebuilt - b.coords()[coord]).abs() > MASS_TOL {
            return None;
        }
    }
    let mass: f64 = weights.iter().sum();
    if (mass - 1.0).abs() > MASS_TOL {
        return None;
    }
    Some(weights.iter().map(|&w| w.max(0.0)).collect())
}

/// Unique solution of an overdetermined consistent system, if any.
fn solve_least_like(mut a: Vec<Vec<f64>>, mut b: Vec<f64>, cols: usize) -> Option<Vec<f64>> {
    let rows = a.len();
    let mut rank = 0;
    for col in 0..cols {
        let mut best = rank;
        let mut best_abs = 0.0;
        for r in rank..rows {
            if a[r][col].abs() > best_abs {
                best_abs = a[r][col].abs();
                best = r;
            }
        }
        if best_abs <= 1e-11 {
            continue;
        }
        a.swap(rank, best);
        b.swap(rank, best);
        let inv = 1.0 / a[rank][col];
        for cc in 0..cols {
            a[rank][cc] *= inv;
        }
        b[rank] *= inv;
        a[rank][col] = 1.0;
        for r in 0..rows {
            if r != rank && a[r][col] != 0.0 {
                let f = a[r][col];
                for cc in 0..cols {
                    a[r][cc] -= f * a[rank][cc];
                }
                a[r][col] = 0.0;
                b[r] -= f * b[rank];
            }
        }
        rank += 1;
    }
    if rank < cols {
        return None;
    }
    for r in rank..rows {
        if b[r].abs() > 1e-9 {
            return None;
        }
    }
    let mut x = vec![0.0; cols];
    for r in 0..rank {
        let col = a[r].iter().position(|v| (v - 1.0).abs() < 1e-9)?;
        x[col] = b[r];
    }
    Some(x)
}

/// Pushes every support point onto the atlas by convex decomposition inside
/// its own best-response region.
///
/// Consistency and all follower report values are preserved exactly, so the
/// optimal reporting profile is unchanged. The leader's report values can
/// only increase: region vertices sit on indifference boundaries, where the
/// leader-favourable tie break applies.
pub fn reduce_to_atlas(
    game: &Game,
    pi: &BeliefDistribution,
    atlas: &BeliefAtlas,
) -> Result<BeliefDistribution, SignalingError> {
    let mut region_cache: Vec<(Vec<usize>, Polytope, Vec<Vec<f64>>)> = Vec::new();
    let mut support = Vec::with_capacity(pi.num_types());
    for theta in 0..pi.num_types() {
        let mut weights_on_atlas = vec![0.0; atlas.len()];
        for (b, w) in pi.support(theta) {
            // Atlas points stay put.
            if let Some(idx) = atlas.position(b.coords()) {
                weights_on_atlas[idx] += w;
                continue;
            }
            let tuple: Vec<usize> =
                (0..game.k()).map(|t| game.best_response(t, b)).collect();
            if !region_cache.iter().any(|(t, _, _)| *t == tuple) {
                let region = joint_region_for(game, &tuple);
                let vertices = enumerate_vertices(&region)?;
                region_cache.push((tuple.clone(), region, vertices));
            }
            let (_, region, vertices) = region_cache
                .iter()
                .find(|(t, _, _)| *t == tuple)
                .expect("cached above");
            let omega = convex_decompose(b, region, vertices)?;
            for (vi, &weight) in omega.iter().enumerate() {
                if weight <= 0.0 {
                    continue;
                }
                let idx = atlas
                    .position(&vertices[vi])
                    .ok_or_else(|| SignalingError::OutsideRegion(vertices[vi].clone()))?;
                weights_on_atlas[idx] += w * weight;
            }
        }
        let points: Vec<(Belief, f64)> = weights_on_atlas
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > NULL_SIGNAL_TOL)
            .map(|(idx, &w)| (atlas.point(idx).clone(), w))
            .collect();
        support.push(points);
    }
    BeliefDistribution::new(support)
}

fn joint_region_for(game: &Game, tuple: &[usize]) -> Polytope {
    crate::geometry::joint_region(game, tuple)
}

/// The worked market-entry scheme: announced mixed strategy (0, 1/2, 1/2),
/// an informative signal pair for the first type and an uninformative
/// signal for the second.
pub fn market_entry_commitment() -> Commitment {
    let x = vec![0.0, 0.5, 0.5];
    let theta1 = vec![
        vec![0.0, 0.0],
        vec![0.5, 0.0],
        vec![0.25, 0.25],
    ];
    let theta2 = vec![vec![0.0], vec![0.5], vec![0.5]];
    Commitment::new(x, vec![theta1, theta2]).expect("worked example is valid")
}
