//! Belief-space geometry: H-representation polytopes with per-row strict
//! flags, best-response regions and their intersections, exhaustive vertex
//! enumeration, the belief atlas (the union of all joint-region vertices),
//! the consistency polytope over belief distributions, and the reporting
//! partition pieces induced by the follower's optimal misreport.
//!
//! Vertex enumeration solves every candidate active set directly. Equality
//! row pairs are detected and pinned first so only genuine inequality
//! subsets are enumerated; a configurable cap refuses instances whose subset
//! count would blow up.

use thiserror::Error;

use crate::game::{Belief, Game};
use crate::lp::{self, Lp, LpError, Relation};
use crate::signaling::BeliefDistribution;

/// Constraint satisfaction tolerance: weak rows allow a 1e-9 deficit and
/// strict rows demand a 1e-9 surplus.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
/// Two points within this l-infinity distance are the same vertex.
pub const DEDUP_TOL: f64 = 1e-7;
/// Default cap on the number of active-set subsets enumerated per polytope.
pub const DEFAULT_ENUMERATION_CAP: u128 = 2_000_000;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("vertex enumeration needs {subsets} active-set candidates, over the cap {cap}; instance too large")]
    EnumerationCap { subsets: u128, cap: u128 },
    #[error("polytope is empty")]
    EmptyPolytope,
    #[error("support point {0:?} is not an atlas point")]
    SupportPointNotInAtlas(Vec<f64>),
    #[error("linear program failed: {0}")]
    Lp(#[from] LpError),
}

/// A polytope {x : A x >= c}, with individual rows optionally strict.
#[derive(Debug, Clone)]
pub struct Polytope {
    a: Vec<Vec<f64>>,
    c: Vec<f64>,
    strict: Vec<bool>,
    dim: usize,
}

impl Polytope {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1);
        Polytope { a: Vec::new(), c: Vec::new(), strict: Vec::new(), dim }
    }

    /// The probability simplex of the given dimension: nonnegativity rows
    /// plus the unit-sum equality encoded as an opposing pair.
    pub fn simplex(dim: usize) -> Self {
        let mut p = Polytope::new(dim);
        for i in 0..dim {
            let mut row = vec![0.0; dim];
            row[i] = 1.0;
            p.push_row(row, 0.0, false);
        }
        p.push_row(vec![1.0; dim], 1.0, false);
        p.push_row(vec![-1.0; dim], -1.0, false);
        p
    }

    pub fn push_row(&mut self, coeffs: Vec<f64>, rhs: f64, strict: bool) {
        assert_eq!(coeffs.len(), self.dim);
        self.a.push(coeffs);
        self.c.push(rhs);
        self.strict.push(strict);
    }

    /// Appends every row of `other` (dimensions must match).
    pub fn extend(&mut self, other: &Polytope) {
        assert_eq!(self.dim, other.dim);
        for r in 0..other.num_rows() {
            self.push_row(other.a[r].clone(), other.c[r], other.strict[r]);
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_rows(&self) -> usize {
        self.a.len()
    }

    pub fn row(&self, r: usize) -> (&[f64], f64, bool) {
        (&self.a[r], self.c[r], self.strict[r])
    }

    pub fn has_strict_rows(&self) -> bool {
        self.strict.iter().any(|&s| s)
    }

    /// The same polytope with every strict flag cleared.
    pub fn closure(&self) -> Polytope {
        Polytope {
            a: self.a.clone(),
            c: self.c.clone(),
            strict: vec![false; self.strict.len()],
            dim: self.dim,
        }
    }

    /// Membership at tolerance 1e-9; strict rows require a positive margin.
    pub fn membership(&self, x: &[f64]) -> bool {
        debug_assert_eq!(x.len(), self.dim);
        for r in 0..self.num_rows() {
            let lhs: f64 = self.a[r].iter().zip(x).map(|(a, v)| a * v).sum();
            let bound = if self.strict[r] {
                self.c[r] + MEMBERSHIP_TOL
            } else {
                self.c[r] - MEMBERSHIP_TOL
            };
            if lhs < bound {
                return false;
            }
        }
        true
    }

    /// Number of rows active (|a.x - c| <= tol) at `x`.
    pub fn active_rows(&self, x: &[f64], tol: f64) -> usize {
        (0..self.num_rows())
            .filter(|&r| {
                let lhs: f64 = self.a[r].iter().zip(x).map(|(a, v)| a * v).sum();
                (lhs - self.c[r]).abs() <= tol
            })
            .count()
    }
}

/// Splits rows into representatives of equality pairs (row i paired with a
/// negated copy) and the remaining genuine inequalities. Returns
/// (equality row indices, inequality row indices).
fn split_equality_pairs(p: &Polytope) -> (Vec<usize>, Vec<usize>) {
    let r = p.num_rows();
    let mut paired = vec![false; r];
    let mut equalities = Vec::new();
    for i in 0..r {
        if paired[i] {
            continue;
        }
        for j in (i + 1)..r {
            if paired[j] {
                continue;
            }
            let negated = p.a[i]
                .iter()
                .zip(&p.a[j])
                .all(|(x, y)| (x + y).abs() <= 1e-12)
                && (p.c[i] + p.c[j]).abs() <= 1e-12;
            if negated {
                paired[i] = true;
                paired[j] = true;
                equalities.push(i);
                break;
            }
        }
    }
    let inequalities = (0..r).filter(|&i| !paired[i]).collect();
    (equalities, inequalities)
}

/// Reduced row echelon form of [a | b]; returns pivot column count.
fn row_reduce(a: &mut Vec<Vec<f64>>, b: &mut Vec<f64>) -> usize {
    let rows = a.len();
    if rows == 0 {
        return 0;
    }
    let cols = a[0].len();
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
            if r != rank && a[r][col].abs() > 0.0 {
                let f = a[r][col];
                for cc in 0..cols {
                    a[r][cc] -= f * a[rank][cc];
                }
                a[r][col] = 0.0;
                b[r] -= f * b[rank];
            }
        }
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

/// Solves a stacked linear system if it has a unique solution.
fn unique_solution(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    if a.is_empty() {
        return None;
    }
    let cols = a[0].len();
    let rank = row_reduce(&mut a, &mut b);
    if rank < cols {
        return None;
    }
    // Inconsistent rows mean no solution.
    for r in rank..a.len() {
        if b[r].abs() > 1e-9 {
            return None;
        }
    }
    // After RREF with full column rank, row i has its pivot in some column;
    // read the solution off the pivot positions.
    let mut x = vec![0.0; cols];
    for r in 0..rank {
        let col = a[r].iter().position(|v| (v - 1.0).abs() < 1e-9)?;
        x[col] = b[r];
    }
    Some(x)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for i in 0..k {
        result = result.saturating_mul((n - i) as u128) / (i as u128 + 1);
        if result > u128::MAX / 2 {
            return u128::MAX;
        }
    }
    result
}

/// All extreme points of the closure of `p`, deduplicated at 1e-7 and sorted
/// lexicographically by coordinates.
pub fn enumerate_vertices(p: &Polytope) -> Result<Vec<Vec<f64>>, GeometryError> {
    enumerate_vertices_capped(p, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_vertices_capped(
    p: &Polytope,
    cap: u128,
) -> Result<Vec<Vec<f64>>, GeometryError> {
    let closed = p.closure();
    let d = closed.dim();
    let (eq_rows, ineq_rows) = split_equality_pairs(&closed);

    let eq_a: Vec<Vec<f64>> = eq_rows.iter().map(|&r| closed.a[r].clone()).collect();
    let eq_b: Vec<f64> = eq_rows.iter().map(|&r| closed.c[r]).collect();
    let eq_rank = {
        let mut a = eq_a.clone();
        let mut b = eq_b.clone();
        row_reduce(&mut a, &mut b)
    };
    let f = d - eq_rank.min(d);

    let subsets = binomial(ineq_rows.len(), f);
    if subsets > cap {
        return Err(GeometryError::EnumerationCap { subsets, cap });
    }

    let mut raw: Vec<Vec<f64>> = Vec::new();
    if f == 0 {
        if let Some(x) = unique_solution(eq_a.clone(), eq_b.clone()) {
            if closed.membership(&x) {
                raw.push(x);
            }
        }
    } else if ineq_rows.len() >= f {
        // Iterate f-subsets of the inequality rows in index order.
        let n = ineq_rows.len();
        let mut idx: Vec<usize> = (0..f).collect();
        loop {
            let mut a = eq_a.clone();
            let mut b = eq_b.clone();
            for &pos in &idx {
                let r = ineq_rows[pos];
                a.push(closed.a[r].clone());
                b.push(closed.c[r]);
            }
            if let Some(x) = unique_solution(a, b) {
                if closed.membership(&x) {
                    raw.push(x);
                }
            }
            // Next combination.
            let mut i = f;
            loop {
                if i == 0 {
                    idx.clear();
                    break;
                }
                i -= 1;
                if idx[i] != i + n - f {
                    idx[i] += 1;
                    for j in i + 1..f {
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

    let mut vertices: Vec<Vec<f64>> = Vec::new();
    'outer: for v in raw {
        for existing in &vertices {
            let dist = existing
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if dist <= DEDUP_TOL {
                continue 'outer;
            }
        }
        vertices.push(v);
    }
    vertices.sort_by(|a, b| {
        for (x, y) in a.iter().zip(b) {
            match x.total_cmp(y) {
                std::cmp::Ordering::Equal => continue,
                other => return other,
            }
        }
        std::cmp::Ordering::Equal
    });
    Ok(vertices)
}

/// Region of beliefs where `action` is a best response for type `theta`:
/// the simplex cut by the N-1 weak dominance rows.
pub fn best_response_region(game: &Game, theta: usize, action: usize) -> Polytope {
    let m = game.m();
    let mut p = Polytope::simplex(m);
    for other in 0..game.n() {
        if other == action {
            continue;
        }
        let row: Vec<f64> = (0..m)
            .map(|i| game.follower_payoff(theta, i, action) - game.follower_payoff(theta, i, other))
            .collect();
        p.push_row(row, 0.0, false);
    }
    p
}

/// Intersection of per-type best-response regions for an action tuple.
pub fn joint_region(game: &Game, actions: &[usize]) -> Polytope {
    assert_eq!(actions.len(), game.k());
    let m = game.m();
    let mut p = Polytope::simplex(m);
    for (theta, &action) in actions.iter().enumerate() {
        for other in 0..game.n() {
            if other == action {
                continue;
            }
            let row: Vec<f64> = (0..m)
                .map(|i| {
                    game.follower_payoff(theta, i, action) - game.follower_payoff(theta, i, other)
                })
                .collect();
            p.push_row(row, 0.0, false);
        }
    }
    p
}

/// The belief atlas: all joint-region vertices, deduplicated and ordered,
/// with the action tuples whose regions produced each point.
#[derive(Debug, Clone)]
pub struct BeliefAtlas {
    points: Vec<Belief>,
    origins: Vec<Vec<Vec<usize>>>,
}

impl BeliefAtlas {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Belief] {
        &self.points
    }

    pub fn point(&self, idx: usize) -> &Belief {
        &self.points[idx]
    }

    /// Action tuples whose region vertices produced the point.
    pub fn origins(&self, idx: usize) -> &[Vec<usize>] {
        &self.origins[idx]
    }

    /// Index of the atlas point within 1e-7 of `coords`, if any.
    pub fn position(&self, coords: &[f64]) -> Option<usize> {
        self.points.iter().position(|p| {
            p.coords()
                .iter()
                .zip(coords)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                <= DEDUP_TOL
        })
    }

    /// JSON export: ordered coordinate arrays plus origin tuples.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "points": self
                .points
                .iter()
                .map(|p| p.coords().to_vec())
                .collect::<Vec<_>>(),
            "origins": self.origins,
        })
    }
}

fn snap_to_simplex(mut coords: Vec<f64>) -> Vec<f64> {
    for v in coords.iter_mut() {
        if v.abs() <= MEMBERSHIP_TOL {
            *v = 0.0;
        }
        if (*v - 1.0).abs() <= MEMBERSHIP_TOL {
            *v = 1.0;
        }
    }
    let sum: f64 = coords.iter().sum();
    if sum > 0.0 {
        for v in coords.iter_mut() {
            *v /= sum;
        }
    }
    coords
}

/// Enumerates every action tuple's joint region and unions the vertices.
pub fn build_belief_atlas(game: &Game) -> Result<BeliefAtlas, GeometryError> {
    let n = game.n();
    let k = game.k();
    let mut tuples = vec![vec![0usize; k]];
    for pos in 0..k {
        let mut next = Vec::new();
        for t in &tuples {
            for j in 0..n {
                let mut t2 = t.clone();
                t2[pos] = j;
                next.push(t2);
            }
        }
        tuples = next;
    }
    tuples.sort();
    tuples.dedup();

    let mut entries: Vec<(Vec<f64>, Vec<Vec<usize>>)> = Vec::new();
    for tuple in tuples {
        let region = joint_region(game, &tuple);
        for v in enumerate_vertices(&region)? {
            let coords = snap_to_simplex(v);
            match entries.iter_mut().find(|(p, _)| {
                p.iter()
                    .zip(&coords)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
                    <= DEDUP_TOL
            }) {
                Some((_, origins)) => {
                    if !origins.contains(&tuple) {
                        origins.push(tuple.clone());
                    }
                }
                None => entries.push((coords, vec![tuple.clone()])),
            }
        }
    }
    entries.sort_by(|(a, _), (b, _)| {
        for (x, y) in a.iter().zip(b) {
            match x.total_cmp(y) {
                std::cmp::Ordering::Equal => continue,
                other => return other,
            }
        }
        std::cmp::Ordering::Equal
    });

    let mut points = Vec::with_capacity(entries.len());
    let mut origins = Vec::with_capacity(entries.len());
    for (coords, origin) in entries {
        let belief = Belief::new(coords)
            .expect("joint-region vertices lie on the simplex after snapping");
        points.push(belief);
        origins.push(origin);
    }
    Ok(BeliefAtlas { points, origins })
}

/// Largest coordinate mismatch between the per-type expected posteriors.
/// Distributions in the consistency polytope have residual <= 1e-9.
pub fn consistency_residual(
    pi: &BeliefDistribution,
    atlas: &BeliefAtlas,
) -> Result<f64, GeometryError> {
    for theta in 0..pi.num_types() {
        for (b, _) in pi.support(theta) {
            if atlas.position(b.coords()).is_none() {
                return Err(GeometryError::SupportPointNotInAtlas(b.coords().to_vec()));
            }
        }
    }
    Ok(pi.consistency_residual())
}

/// The follower's reporting profile: entry k is the type reported by true
/// type k (0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionMap {
    gamma: Vec<usize>,
}

impl PartitionMap {
    pub fn new(gamma: Vec<usize>, num_types: usize) -> Self {
        assert!(gamma.iter().all(|&g| g < num_types));
        assert_eq!(gamma.len(), num_types);
        PartitionMap { gamma }
    }

    pub fn report_of(&self, true_type: usize) -> usize {
        self.gamma[true_type]
    }

    pub fn gamma(&self) -> &[usize] {
        &self.gamma
    }

    /// All K^K reporting profiles in lexicographic order. Misreporting maps
    /// need not be onto, so non-surjective profiles are included.
    pub fn all(num_types: usize) -> Vec<PartitionMap> {
        let mut maps = vec![vec![]];
        for _ in 0..num_types {
            let mut next = Vec::new();
            for m in &maps {
                for l in 0..num_types {
                    let mut m2: Vec<usize> = m.clone();
                    m2.push(l);
                    next.push(m2);
                }
            }
            maps = next;
        }
        maps.into_iter().map(|gamma| PartitionMap { gamma }).collect()
    }
}

/// H-representation of one reporting-partition piece over the stacked
/// distribution vector (one simplex block per type, atlas-point order).
///
/// Rows: per-type simplex, pairwise-consecutive consistency equalities in
/// both weak directions, and for each true type the comparison rows that
/// make its mapped report optimal. A comparison against report q is strict
/// exactly when q has a smaller index than the chosen report, and weak
/// otherwise — the lowest-index-argmax rule used by `optimal_report`, so
/// the pieces over all K^K profiles partition the consistency polytope
/// with no gaps and no overlaps.
pub fn partition_polytope(game: &Game, atlas: &BeliefAtlas, gamma: &PartitionMap) -> Polytope {
    let k = game.k();
    let s = atlas.len();
    let dim = k * s;
    let mut p = Polytope::new(dim);

    // Per-type simplex rows.
    for theta in 0..k {
        for b in 0..s {
            let mut row = vec![0.0; dim];
            row[theta * s + b] = 1.0;
            p.push_row(row, 0.0, false);
        }
        let mut sum_row = vec![0.0; dim];
        for b in 0..s {
            sum_row[theta * s + b] = 1.0;
        }
        p.push_row(sum_row.clone(), 1.0, false);
        let neg: Vec<f64> = sum_row.iter().map(|v| -v).collect();
        p.push_row(neg, -1.0, false);
    }

    // Consistency between consecutive types, both weak directions.
    for theta in 0..k.saturating_sub(1) {
        for i in 0..game.m() {
            let mut row = vec![0.0; dim];
            for b in 0..s {
                let coord = atlas.point(b).coords()[i];
                row[theta * s + b] = coord;
                row[(theta + 1) * s + b] = -coord;
            }
            p.push_row(row.clone(), 0.0, false);
            let neg: Vec<f64> = row.iter().map(|v| -v).collect();
            p.push_row(neg, 0.0, false);
        }
    }

    // Follower values of each type at each atlas point.
    let fval: Vec<Vec<f64>> = (0..k)
        .map(|theta| {
            (0..s)
                .map(|b| game.follower_value(theta, atlas.point(b)))
                .collect()
        })
        .collect();

    for true_type in 0..k {
        let l = gamma.report_of(true_type);
        for q in 0..k {
            if q == l {
                continue;
            }
            let strict = q < l;
            let mut row = vec![0.0; dim];
            for b in 0..s {
                row[l * s + b] += fval[true_type][b];
                row[q * s + b] -= fval[true_type][b];
            }
            p.push_row(row, 0.0, strict);
        }
    }
    p
}

/// Coordinates the polytope already bounds below by zero through a plain
/// nonnegativity row; such variables need no free-variable split in LPs.
fn nonnegative_coordinates(p: &Polytope) -> Vec<bool> {
    let mut nonneg = vec![false; p.dim()];
    for r in 0..p.num_rows() {
        if p.c[r] != 0.0 {
            continue;
        }
        let mut unit = None;
        for (i, &coeff) in p.a[r].iter().enumerate() {
            if coeff != 0.0 {
                if coeff == 1.0 && unit.is_none() {
                    unit = Some(i);
                } else {
                    unit = None;
                    break;
                }
            }
        }
        if let Some(i) = unit {
            nonneg[i] = true;
        }
    }
    nonneg
}

/// A point maximizing the minimum margin over the strict rows (over all
/// inequality rows when none are strict). Returns `None` when no point
/// clears the strict rows by more than 1e-9.
pub fn strict_feasible_point(p: &Polytope) -> Result<Option<Vec<f64>>, GeometryError> {
    let d = p.dim();
    let (_, ineq_rows) = split_equality_pairs(p);
    let nonneg = nonnegative_coordinates(p);
    let mask: Vec<usize> = if p.has_strict_rows() {
        (0..p.num_rows()).filter(|&r| p.strict[r]).collect()
    } else {
        ineq_rows.clone()
    };

    if mask.is_empty() {
        // Pure affine system; any feasible point qualifies.
        let mut lp = Lp::maximize(vec![0.0; d]);
        for v in 0..d {
            if !nonneg[v] {
                lp.set_free(v);
            }
        }
        for r in 0..p.num_rows() {
            lp.constrain(p.a[r].clone(), Relation::Ge, p.c[r]);
        }
        return match lp::solve(&lp) {
            Ok(sol) => Ok(Some(sol.x)),
            Err(LpError::Infeasible) => Err(GeometryError::EmptyPolytope),
            Err(e) => Err(e.into()),
        };
    }

    // Variables: x then the margin s (free).
    let mut objective = vec![0.0; d + 1];
    objective[d] = 1.0;
    let mut lp = Lp::maximize(objective);
    for v in 0..d {
        if !nonneg[v] {
            lp.set_free(v);
        }
    }
    lp.set_free(d);
    for r in 0..p.num_rows() {
        let mut coeffs = p.a[r].clone();
        coeffs.push(if mask.contains(&r) { -1.0 } else { 0.0 });
        lp.constrain(coeffs, Relation::Ge, p.c[r]);
    }
    // Margin cap keeps the program bounded even for degenerate inputs.
    let mut cap_row = vec![0.0; d + 1];
    cap_row[d] = 1.0;
    lp.constrain(cap_row, Relation::Le, 1e6);

    match lp::solve(&lp) {
        Ok(sol) => {
            let s = sol.x[d];
            if s < -MEMBERSHIP_TOL {
                // Even the weak system cannot grant the masked rows any
                // slack, so the closure itself is empty.
                Err(GeometryError::EmptyPolytope)
            } else if s <= MEMBERSHIP_TOL {
                Ok(None)
            } else {
                Ok(Some(sol.x[..d].to_vec()))
            }
        }
        Err(LpError::Infeasible) => Err(GeometryError::EmptyPolytope),
        Err(e) => Err(e.into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::game::Belief;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    fn has_vertex(vertices: &[Vec<f64>], coords: &[f64]) -> bool {
        vertices.iter().any(|v| {
            v.iter()
                .zip(coords)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                < 1e-7
        })
    }

    #[test]
    fn simplex_vertices_are_unit_vectors() {
        let p = Polytope::simplex(3);
        let vertices = enumerate_vertices(&p).unwrap();
        assert_eq!(vertices.len(), 3);
        assert!(has_vertex(&vertices, &[1.0, 0.0, 0.0]));
        assert!(has_vertex(&vertices, &[0.0, 1.0, 0.0]));
        assert!(has_vertex(&vertices, &[0.0, 0.0, 1.0]));
    }

    #[test]
    fn leave_region_of_type_one_matches_hand_derivation() {
        // Region where type 1 leaves: 2 b0 - b1 + 2 b2 <= 0 inside the simplex.
        let game = fixtures::market_entry();
        let region = best_response_region(&game, 0, 0);
        let inside = [0.0, 0.8, 0.2];
        let outside = [0.0, 0.2, 0.8];
        assert!(region.membership(&inside));
        assert!(!region.membership(&outside));

        let vertices = enumerate_vertices(&region).unwrap();
        assert!(has_vertex(&vertices, &[0.0, 1.0, 0.0]));
        assert!(has_vertex(&vertices, &[1.0 / 3.0, 2.0 / 3.0, 0.0]));
        assert!(has_vertex(&vertices, &[0.0, 2.0 / 3.0, 1.0 / 3.0]));
        assert_eq!(vertices.len(), 3);
    }

    #[test]
    fn dominant_action_region_is_full_simplex() {
        let doc = r#"{
            "leader_actions": ["a", "b"],
            "follower_actions": ["x", "y"],
            "leader_payoff": [[0, 0], [0, 0]],
            "types": [{"name": "t", "prior": 1.0, "follower_payoff": [[5, 1], [4, 2]]}]
        }"#;
        let game = crate::game::load_game(doc).unwrap();
        let region = best_response_region(&game, 0, 0);
        let vertices = enumerate_vertices(&region).unwrap();
        assert_eq!(vertices.len(), 2);
        assert!(has_vertex(&vertices, &[1.0, 0.0]));
        assert!(has_vertex(&vertices, &[0.0, 1.0]));
        // The dominated action's region is empty.
        let dominated = best_response_region(&game, 0, 1);
        assert!(enumerate_vertices(&dominated).unwrap().is_empty());
    }

    #[test]
    fn joint_region_of_double_leave_is_empty() {
        // No belief drives both types out of the market. A dense grid over
        // the simplex certifies the emptiness independently of the vertex
        // enumeration.
        let game = fixtures::market_entry();
        let region = joint_region(&game, &[0, 0]);
        assert!(enumerate_vertices(&region).unwrap().is_empty());
        let steps = 60;
        for a in 0..=steps {
            for b in 0..=(steps - a) {
                let point = [
                    a as f64 / steps as f64,
                    b as f64 / steps as f64,
                    (steps - a - b) as f64 / steps as f64,
                ];
                assert!(!region.membership(&point), "grid point {point:?} inside");
            }
        }
    }

    #[test]
    fn contradictory_actions_for_identical_types_give_empty_region() {
        // Two copies of the same payoffs cannot best-respond differently
        // when one of the actions is strictly better somewhere only.
        let doc = r#"{
            "leader_actions": ["a", "b"],
            "follower_actions": ["x", "y"],
            "leader_payoff": [[0, 0], [0, 0]],
            "types": [
                {"name": "t", "prior": 0.5, "follower_payoff": [[2, 1], [2, 1]]},
                {"name": "u", "prior": 0.5, "follower_payoff": [[2, 1], [2, 1]]}
            ]
        }"#;
        let game = crate::game::load_game(doc).unwrap();
        // Action 0 strictly dominates, so requiring action 1 for the clone
        // empties the intersection.
        let region = joint_region(&game, &[0, 1]);
        assert!(enumerate_vertices(&region).unwrap().is_empty());
    }

    #[test]
    fn joint_region_single_type_equals_best_response_region() {
        let doc = r#"{
            "leader_actions": ["a", "b"],
            "follower_actions": ["x", "y"],
            "leader_payoff": [[1, 0], [0, 1]],
            "types": [{"name": "t", "prior": 1.0, "follower_payoff": [[0, 3], [0, -1]]}]
        }"#;
        let game = crate::game::load_game(doc).unwrap();
        let single = best_response_region(&game, 0, 1);
        let joint = joint_region(&game, &[1]);
        assert_eq!(
            enumerate_vertices(&single).unwrap(),
            enumerate_vertices(&joint).unwrap()
        );
    }

    #[test]
    fn atlas_contains_expected_points() {
        let game = fixtures::market_entry();
        let atlas = build_belief_atlas(&game).unwrap();
        for coords in [
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 2.0 / 3.0, 1.0 / 3.0],
            [0.0, 0.5, 0.5],
        ] {
            assert!(atlas.position(&coords).is_some(), "missing {coords:?}");
        }
        assert_eq!(atlas.len(), 7);
    }

    #[test]
    fn atlas_points_lie_in_their_claimed_regions() {
        let game = fixtures::market_entry();
        let atlas = build_belief_atlas(&game).unwrap();
        for idx in 0..atlas.len() {
            let b = atlas.point(idx);
            for tuple in atlas.origins(idx) {
                for (theta, &j) in tuple.iter().enumerate() {
                    let claimed = game.follower_action_value(theta, b, j);
                    let best = game.follower_value(theta, b);
                    assert!(
                        (claimed - best).abs() <= 1e-9,
                        "point {:?} not optimal for tuple {:?}",
                        b.coords(),
                        tuple
                    );
                }
            }
        }
    }

    #[test]
    fn one_dimensional_threshold_atlas() {
        // M=2, single type with an interior indifference at t = 0.25:
        // payoffs make entering worth 3 b0 - 1 b1.
        let doc = r#"{
            "leader_actions": ["a", "b"],
            "follower_actions": ["x", "y"],
            "leader_payoff": [[0, 0], [0, 0]],
            "types": [{"name": "t", "prior": 1.0, "follower_payoff": [[0, 3], [0, -1]]}]
        }"#;
        let game = crate::game::load_game(doc).unwrap();
        let atlas = build_belief_atlas(&game).unwrap();
        assert_eq!(atlas.len(), 3);
        assert!(atlas.position(&[1.0, 0.0]).is_some());
        assert!(atlas.position(&[0.0, 1.0]).is_some());
        assert!(atlas.position(&[0.25, 0.75]).is_some());
    }

    #[test]
    fn constant_payoffs_leave_only_unit_vectors() {
        let doc = r#"{
            "leader_actions": ["a", "b", "c"],
            "follower_actions": ["x", "y"],
            "leader_payoff": [[0, 0], [0, 0], [0, 0]],
            "types": [{"name": "t", "prior": 1.0, "follower_payoff": [[1, 1], [1, 1], [1, 1]]}]
        }"#;
        let game = crate::game::load_game(doc).unwrap();
        let atlas = build_belief_atlas(&game).unwrap();
        assert_eq!(atlas.len(), 3);
    }

    #[test]
    fn vertices_have_enough_active_rows() {
        let game = fixtures::market_entry();
        for tuple in [[0usize, 1], [1, 0], [1, 1]] {
            let region = joint_region(&game, &tuple);
            let closed = region.closure();
            for v in enumerate_vertices(&region).unwrap() {
                assert!(closed.membership(&v));
                assert!(closed.active_rows(&v, 1e-8) >= region.dim());
            }
        }
    }

    #[test]
    fn atlas_points_are_distinct_simplex_members() {
        let game = fixtures::market_entry();
        let atlas = build_belief_atlas(&game).unwrap();
        for (i, p) in atlas.points().iter().enumerate() {
            let sum: f64 = p.coords().iter().sum();
            assert!((sum - 1.0).abs() <= 1e-9);
            assert!(p.coords().iter().all(|&c| c >= 0.0));
            for q in atlas.points().iter().skip(i + 1) {
                assert!(p.linf_distance(q) > DEDUP_TOL);
            }
        }
    }

    #[test]
    fn single_type_consistency_residual_is_zero() {
        let doc = r#"{
            "leader_actions": ["a", "b"],
            "follower_actions": ["x", "y"],
            "leader_payoff": [[1, 0], [0, 1]],
            "types": [{"name": "t", "prior": 1.0, "follower_payoff": [[0, 3], [0, -1]]}]
        }"#;
        let game = crate::game::load_game(doc).unwrap();
        let atlas = build_belief_atlas(&game).unwrap();
        let pi = BeliefDistribution::new(vec![vec![
            (atlas.point(0).clone(), 0.25),
            (atlas.point(1).clone(), 0.75),
        ]])
        .unwrap();
        assert_eq!(consistency_residual(&pi, &atlas).unwrap(), 0.0);
    }

    #[test]
    fn consistency_residual_detects_imbalance() {
        let game = fixtures::market_entry();
        let atlas = build_belief_atlas(&game).unwrap();
        let b1 = atlas.point(atlas.position(&[0.0, 1.0, 0.0]).unwrap()).clone();
        let b2 = atlas.point(atlas.position(&[0.0, 0.0, 1.0]).unwrap()).clone();
        let same = BeliefDistribution::new(vec![
            vec![(b1.clone(), 1.0)],
            vec![(b1.clone(), 1.0)],
        ])
        .unwrap();
        assert!(close(consistency_residual(&same, &atlas).unwrap(), 0.0));

        let skew = BeliefDistribution::new(vec![
            vec![(b1.clone(), 1.0)],
            vec![(b2.clone(), 1.0)],
        ])
        .unwrap();
        assert!(consistency_residual(&skew, &atlas).unwrap() > 0.9);

        let off_atlas = BeliefDistribution::new(vec![
            vec![(Belief::new(vec![0.1, 0.6, 0.3]).unwrap(), 1.0)],
            vec![(b2, 1.0)],
        ])
        .unwrap();
        assert!(matches!(
            consistency_residual(&off_atlas, &atlas),
            Err(GeometryError::SupportPointNotInAtlas(_))
        ));
    }

    #[test]
    fn single_type_partition_is_simplex_over_atlas() {
        let doc = r#"{
            "leader_actions": ["a", "b"],
            "follower_actions": ["x", "y"],
            "leader_payoff": [[1, 0], [0, 1]],
            "types": [{"name": "t", "prior": 1.0, "follower_payoff": [[0, 3], [0, -1]]}]
        }"#;
        let game = crate::game::load_game(doc).unwrap();
        let atlas = build_belief_atlas(&game).unwrap();
        let gamma = PartitionMap::new(vec![0], 1);
        let piece = partition_polytope(&game, &atlas, &gamma);
        assert!(!piece.has_strict_rows());
        let vertices = enumerate_vertices(&piece).unwrap();
        // Unit masses on each atlas point.
        assert_eq!(vertices.len(), atlas.len());
    }

    #[test]
    fn partition_strictness_follows_lowest_index_rule() {
        let game = fixtures::market_entry();
        let atlas = build_belief_atlas(&game).unwrap();
        // Reporting the lowest index never needs a strict row, so the
        // both-report-first piece is entirely weak.
        let gamma = PartitionMap::new(vec![0, 0], 2);
        let piece = partition_polytope(&game, &atlas, &gamma);
        assert!(!piece.has_strict_rows());
        // The identity profile needs one strict row: the second type's
        // truthful report must strictly beat the lower-indexed misreport.
        let identity = PartitionMap::new(vec![0, 1], 2);
        let truthful_piece = partition_polytope(&game, &atlas, &identity);
        let strict_count = (0..truthful_piece.num_rows())
            .filter(|&r| truthful_piece.row(r).2)
            .count();
        assert_eq!(strict_count, 1);
    }

    #[test]
    fn partition_pieces_cover_and_are_disjoint() {
        // Every consistent distribution lies in exactly one piece, with
        // strict flags honoured — including at report-value ties.
        let game = fixtures::market_entry();
        let atlas = build_belief_atlas(&game).unwrap();
        let pieces: Vec<(PartitionMap, Polytope)> = PartitionMap::all(game.k())
            .into_iter()
            .map(|g| {
                let p = partition_polytope(&game, &atlas, &g);
                (g, p)
            })
            .collect();
        let s = atlas.len();
        let mut rng = crate::rng::StreamRng::new(4, crate::rng::Stream::Nature);
        let mut stacked_points: Vec<Vec<f64>> = Vec::new();
        // Tie stress: identical per-type weights make every report value
        // coincide, landing exactly on piece boundaries.
        for _ in 0..100 {
            let mut shared: Vec<f64> = (0..s).map(|_| rng.next_f64() + 0.01).collect();
            let total: f64 = shared.iter().sum();
            shared.iter_mut().for_each(|w| *w /= total);
            let mut stacked = vec![0.0; 2 * s];
            for theta in 0..2 {
                for b in 0..s {
                    stacked[theta * s + b] = shared[b];
                }
            }
            stacked_points.push(stacked);
        }
        // Generic consistent points: random commitments reduced onto the
        // atlas keep consistency while separating the types.
        for seed in 0..100u64 {
            let mut x: Vec<f64> = (0..3).map(|_| rng.next_f64() + 0.05).collect();
            let xt: f64 = x.iter().sum();
            x.iter_mut().for_each(|v| *v /= xt);
            let mut tensors = Vec::new();
            for _ in 0..2 {
                let mut tensor = vec![vec![0.0; 2]; 3];
                for (i, row) in tensor.iter_mut().enumerate() {
                    let a = rng.next_f64();
                    row[0] = x[i] * a;
                    row[1] = x[i] * (1.0 - a);
                }
                tensors.push(tensor);
            }
            let _ = seed;
            let sigma = crate::signaling::Commitment::new(x, tensors).unwrap();
            let pi = crate::signaling::commitment_to_beliefs(&game, &sigma);
            let reduced = crate::signaling::reduce_to_atlas(&game, &pi, &atlas).unwrap();
            let mut stacked = vec![0.0; 2 * s];
            for theta in 0..2 {
                for (b, w) in reduced.support(theta) {
                    stacked[theta * s + atlas.position(b.coords()).unwrap()] = *w;
                }
            }
            stacked_points.push(stacked);
        }
        for stacked in &stacked_points {
            let matches = pieces
                .iter()
                .filter(|(_, p)| p.membership(stacked))
                .count();
            assert_eq!(matches, 1, "point in {matches} pieces");
        }
    }

    #[test]
    fn strict_feasible_point_centers_simplex() {
        let p = Polytope::simplex(2);
        let point = strict_feasible_point(&p).unwrap().unwrap();
        assert!(close(point[0], 0.5) && close(point[1], 0.5));
    }

    #[test]
    fn strict_feasible_point_pushes_into_strict_halfspace() {
        let mut p = Polytope::simplex(2);
        p.push_row(vec![1.0, -1.0], 0.0, true);
        let point = strict_feasible_point(&p).unwrap().unwrap();
        assert!(point[0] - point[1] > 0.5);
    }

    #[test]
    fn infeasible_strictness_returns_none() {
        let mut p = Polytope::simplex(2);
        // x0 > 1 cannot hold strictly inside the simplex.
        p.push_row(vec![1.0, 0.0], 1.0, true);
        assert!(strict_feasible_point(&p).unwrap().is_none());
    }

    #[test]
    fn empty_polytope_errors() {
        let mut p = Polytope::simplex(2);
        p.push_row(vec![1.0, 1.0], 2.0, false);
        assert!(matches!(
            strict_feasible_point(&p),
            Err(GeometryError::EmptyPolytope)
        ));
    }

    #[test]
    fn enumeration_cap_guards_blowup() {
        let mut p = Polytope::new(8);
        for r in 0..40 {
            let mut row = vec![0.0; 8];
            for (c, value) in row.iter_mut().enumerate() {
                *value = ((r * 13 + c * 7) % 5) as f64 - 2.0;
            }
            p.push_row(row, -10.0, false);
        }
        assert!(matches!(
            enumerate_vertices_capped(&p, 1000),
            Err(GeometryError::EnumerationCap { .. })
        ));
    }

    #[test]
    fn partition_membership_is_convex_in_the_closure() {
        let game = fixtures::market_entry();
        let atlas = build_belief_atlas(&game).unwrap();
        let gamma = PartitionMap::new(vec![0, 0], 2);
        let piece = partition_polytope(&game, &atlas, &gamma).closure();
        let vertices = enumerate_vertices(&piece).unwrap();
        assert!(vertices.len() >= 2);
        for a in 0..vertices.len().min(6) {
            for b in (a + 1)..vertices.len().min(6) {
                let mid: Vec<f64> = vertices[a]
                    .iter()
                    .zip(&vertices[b])
                    .map(|(x, y)| 0.5 * (x + y))
                    .collect();
                assert!(piece.membership(&mid));
            }
        }
    }
}
