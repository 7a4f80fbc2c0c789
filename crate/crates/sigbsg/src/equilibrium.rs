//! Equilibrium solvers.
//!
//! - `solve_bse`: baseline Bayesian Stackelberg equilibrium by the multiple
//!   LP method (one LP per follower response tuple).
//! - `solve_sig_lp`: optimal incentive-compatible signaling commitment; the
//!   follower is induced to report truthfully and obey recommendations.
//! - `solve_eps_equilibrium`: epsilon-optimal signaling commitment under
//!   misreporting, searched over partition-piece vertices of the consistency
//!   polytope (perturbed into open pieces where tie-break rows are strict).
//! - `brute_force_oracle`: exhaustive grid search over deterministic
//!   signaling schemes, used as an independent lower-bound oracle.

use thiserror::Error;

use crate::game::{Game, GameError};
use crate::geometry::{
    build_belief_atlas, enumerate_vertices_capped, partition_polytope, strict_feasible_point,
    BeliefAtlas, GeometryError, PartitionMap,
};
use crate::lp::{self, Lp, LpError, Relation};
use crate::signaling::{
    commitment_to_beliefs, leader_objective, leader_report_value, optimal_report,
    BeliefDistribution, Commitment, SignalingError,
};

#[derive(Debug, Error)]
pub enum EquilibriumError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Signaling(#[from] SignalingError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("no feasible response tuple (game data is inconsistent)")]
    NoFeasibleTuple,
    #[error("candidate set is empty; every partition piece degenerated")]
    NoCandidates,
    #[error("grid search needs {evaluations} evaluations, over the cap {cap}")]
    CombinatorialCap { evaluations: u128, cap: u128 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    Bse,
    IcLp,
    Eps,
}

impl SolveMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveMode::Bse => "bse",
            SolveMode::IcLp => "iclp",
            SolveMode::Eps => "eps",
        }
    }
}

/// Either commitment representation, depending on the solver.
#[derive(Debug, Clone)]
pub enum SolvedCommitment {
    Tensor(Commitment),
    Beliefs(BeliefDistribution),
}

/// Per-type reporting and response profile backing a solve's value.
#[derive(Debug, Clone)]
pub struct Certificate {
    /// Report chosen by each true type.
    pub reports: Vec<usize>,
    /// Follower action at each support point / signal of the reported
    /// scheme, per true type.
    pub responses: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub mode: SolveMode,
    pub value: f64,
    pub epsilon: f64,
    pub commitment: SolvedCommitment,
    pub certificate: Certificate,
    pub diagnostics: serde_json::Value,
}

impl SolveResult {
    pub fn to_json(&self, game: &Game) -> serde_json::Value {
        let commitment = match &self.commitment {
            SolvedCommitment::Tensor(c) => c.to_json(game),
            SolvedCommitment::Beliefs(pi) => pi.to_json(game),
        };
        serde_json::json!({
            "mode": self.mode.as_str(),
            "value": self.value,
            "epsilon": self.epsilon,
            "commitment": commitment,
            "certificate": {
                "reports": self.certificate.reports,
                "responses": self.certificate.responses,
            },
            "diagnostics": self.diagnostics,
        })
    }
}

fn response_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut tuples = vec![vec![]];
    for _ in 0..k {
        let mut next = Vec::new();
        for t in &tuples {
            for j in 0..n {
                let mut t2: Vec<usize> = t.clone();
                t2.push(j);
                next.push(t2);
            }
        }
        tuples = next;
    }
    tuples
}

/// Baseline equilibrium: for each follower response tuple, maximize the
/// leader's expected payoff over mixed strategies keeping that tuple a best
/// response (weak rows embed the leader-favourable tie break), then take
/// the best feasible tuple.
pub fn solve_bse(game: &Game) -> Result<SolveResult, EquilibriumError> {
    let m = game.m();
    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    let mut infeasible = 0usize;
    for tuple in response_tuples(game.n(), game.k()) {
        let mut objective = vec![0.0; m];
        for (theta, &j) in tuple.iter().enumerate() {
            for i in 0..m {
                objective[i] += game.prior()[theta] * game.leader_payoff(i, j);
            }
        }
        let mut lp = Lp::maximize(objective);
        lp.constrain(vec![1.0; m], Relation::Eq, 1.0);
        for (theta, &j) in tuple.iter().enumerate() {
            for other in 0..game.n() {
                if other == j {
                    continue;
                }
                let row: Vec<f64> = (0..m)
                    .map(|i| {
                        game.follower_payoff(theta, i, j) - game.follower_payoff(theta, i, other)
                    })
                    .collect();
                lp.constrain(row, Relation::Ge, 0.0);
            }
        }
        match lp::solve(&lp) {
            Ok(sol) => {
                let better = match &best {
                    None => true,
                    Some((v, _, _)) => sol.value > *v + 1e-12,
                };
                if better {
                    best = Some((sol.value, tuple, sol.x));
                }
            }
            Err(LpError::Infeasible) => infeasible += 1,
            Err(e) => return Err(e.into()),
        }
    }
    let (value, tuple, mut x) = best.ok_or(EquilibriumError::NoFeasibleTuple)?;
    // Clean tiny negative noise before building the commitment.
    for v in x.iter_mut() {
        if *v < 0.0 && *v > -1e-9 {
            *v = 0.0;
        }
    }
    let total: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= total);
    let commitment = Commitment::uninformative(x, game.k())?;
    let certificate = Certificate {
        reports: (0..game.k()).collect(),
        responses: tuple.iter().map(|&j| vec![j]).collect(),
    };
    Ok(SolveResult {
        mode: SolveMode::Bse,
        value,
        epsilon: 0.0,
        commitment: SolvedCommitment::Tensor(commitment),
        certificate,
        diagnostics: serde_json::json!({
            "response_tuple": tuple,
            "infeasible_tuples": infeasible,
        }),
    })
}

/// Optimal incentive-compatible signaling commitment under the prior `mu`:
/// maximizes the truthful-reporting objective subject to obedience rows and
/// misreport-dominance rows (the inner maxima linearized through auxiliary
/// upper-bound variables).
pub fn solve_sig_lp(game: &Game, mu: &[f64]) -> Result<SolveResult, EquilibriumError> {
    assert_eq!(mu.len(), game.k());
    let (m, n, k) = (game.m(), game.n(), game.k());
    let c_vars = k * m * n;
    let pair_count = k * (k - 1);
    let total_vars = c_vars + m + pair_count * n;
    let c_idx = |theta: usize, i: usize, j: usize| theta * m * n + i * n + j;
    let x_idx = |i: usize| c_vars + i;
    let z_idx = |pair: usize, j: usize| c_vars + m + pair * n + j;

    // The misreport bounds are at least -max|F| (signal masses sum to one),
    // so shifting them into nonnegative variables avoids free columns.
    let f_bound = (0..k)
        .flat_map(|t| (0..m).flat_map(move |i| (0..n).map(move |j| (t, i, j))))
        .map(|(t, i, j)| game.follower_payoff(t, i, j).abs())
        .fold(0.0f64, f64::max);
    let z_shift = f_bound + 1.0;

    let mut pairs = Vec::new();
    for theta in 0..k {
        for reported in 0..k {
            if reported != theta {
                pairs.push((theta, reported));
            }
        }
    }

    let mut objective = vec![0.0; total_vars];
    for theta in 0..k {
        for i in 0..m {
            for j in 0..n {
                objective[c_idx(theta, i, j)] = mu[theta] * game.leader_payoff(i, j);
            }
        }
    }
    let mut lp = Lp::maximize(objective);

    // Mixed strategy mass.
    let mut row = vec![0.0; total_vars];
    for i in 0..m {
        row[x_idx(i)] = 1.0;
    }
    lp.constrain(row, Relation::Eq, 1.0);

    // Row marginals tie each type's tensor to the mixed strategy.
    for theta in 0..k {
        for i in 0..m {
            let mut row = vec![0.0; total_vars];
            for j in 0..n {
                row[c_idx(theta, i, j)] = 1.0;
            }
            row[x_idx(i)] = -1.0;
            lp.constrain(row, Relation::Eq, 0.0);
        }
    }

    // Obedience: each recommended action beats every deviation.
    for theta in 0..k {
        for j in 0..n {
            for other in 0..n {
                if other == j {
                    continue;
                }
                let mut row = vec![0.0; total_vars];
                for i in 0..m {
                    row[c_idx(theta, i, j)] =
                        game.follower_payoff(theta, i, j) - game.follower_payoff(theta, i, other);
                }
                lp.constrain(row, Relation::Ge, 0.0);
            }
        }
    }

    // Misreport value bounds: the (shifted) z variables dominate every
    // response to each signal of the reported scheme.
    for (pair, &(theta, reported)) in pairs.iter().enumerate() {
        for j in 0..n {
            for response in 0..n {
                let mut row = vec![0.0; total_vars];
                row[z_idx(pair, j)] = 1.0;
                for i in 0..m {
                    row[c_idx(reported, i, j)] -= game.follower_payoff(theta, i, response);
                }
                lp.constrain(row, Relation::Ge, z_shift);
            }
        }
        // Truthful value dominates the misreport bound.
        let mut row = vec![0.0; total_vars];
        for i in 0..m {
            for j in 0..n {
                row[c_idx(theta, i, j)] = game.follower_payoff(theta, i, j);
            }
        }
        for j in 0..n {
            row[z_idx(pair, j)] -= 1.0;
        }
        lp.constrain(row, Relation::Ge, -(n as f64) * z_shift);
    }

    let sol = lp::solve(&lp)?;
    let mut x: Vec<f64> = (0..m).map(|i| sol.x[x_idx(i)].max(0.0)).collect();
    let xsum: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= xsum);
    let mut tensors = Vec::with_capacity(k);
    for theta in 0..k {
        let mut tensor = vec![vec![0.0; n]; m];
        for i in 0..m {
            let mut row: Vec<f64> = (0..n).map(|j| sol.x[c_idx(theta, i, j)].max(0.0)).collect();
            let rs: f64 = row.iter().sum();
            if rs > 0.0 {
                let scale = x[i] / rs;
                if (scale - 1.0).abs() < 1e-6 {
                    row.iter_mut().for_each(|v| *v *= scale);
                } else if x[i] == 0.0 {
                    row.iter_mut().for_each(|v| *v = 0.0);
                }
            } else {
                // Zero row mass: spread x_i on the first signal.
                row[0] = x[i];
            }
            tensor[i] = row;
        }
        tensors.push(tensor);
    }
    let commitment = Commitment::new(x, tensors)?;
    let pi = commitment_to_beliefs(game, &commitment);
    let responses = (0..k)
        .map(|theta| {
            pi.support(theta)
                .iter()
                .map(|(b, _)| game.best_response(theta, b))
                .collect()
        })
        .collect();
    Ok(SolveResult {
        mode: SolveMode::IcLp,
        value: sol.value,
        epsilon: 0.0,
        commitment: SolvedCommitment::Tensor(commitment),
        certificate: Certificate { reports: (0..k).collect(), responses },
        diagnostics: serde_json::json!({
            "prior": mu,
            "lp_variables": total_vars,
        }),
    })
}

/// One member of the epsilon-equilibrium candidate set.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub pi: BeliefDistribution,
    pub gamma: PartitionMap,
    /// Stacked coordinates over (type, atlas point).
    pub raw: Vec<f64>,
    pub perturbed: bool,
}

#[derive(Debug, Clone, Default)]
pub struct CandidateDiagnostics {
    pub pieces_total: usize,
    pub pieces_empty: usize,
    pub pieces_without_strict_interior: usize,
    pub pieces_lp_fallback: usize,
    pub candidates_dropped: usize,
}

/// Finite candidate set covering every nonempty partition piece: vertices
/// of the piece closure, moved distance min(delta, reach) toward a strictly
/// feasible point when tie-break rows exclude them.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub members: Vec<Candidate>,
    pub delta: f64,
    /// Max over piece closures of the linear objective restriction; an
    /// upper bound on the achievable objective over contributing pieces.
    pub sup_estimate: f64,
    pub diagnostics: CandidateDiagnostics,
}

/// Subset budget for exhaustive per-piece vertex enumeration. Pieces above
/// it use the per-piece LP instead, which still returns a closure vertex
/// and the exact piece maximum; only the non-optimal vertices are lost.
const CANDIDATE_ENUMERATION_CAP: u128 = 50_000;

fn piece_objective(game: &Game, atlas: &BeliefAtlas, gamma: &PartitionMap) -> Vec<f64> {
    let s = atlas.len();
    let mut coeffs = vec![0.0; game.k() * s];
    for true_type in 0..game.k() {
        let l = gamma.report_of(true_type);
        for b in 0..s {
            coeffs[l * s + b] +=
                game.prior()[true_type] * game.leader_belief_value(true_type, atlas.point(b));
        }
    }
    coeffs
}

fn stacked_to_distribution(
    atlas: &BeliefAtlas,
    k: usize,
    raw: &[f64],
) -> Result<BeliefDistribution, SignalingError> {
    let s = atlas.len();
    let mut support = Vec::with_capacity(k);
    for theta in 0..k {
        let block = &raw[theta * s..(theta + 1) * s];
        let mass: f64 = block.iter().map(|w| w.max(0.0)).sum();
        let mut points = Vec::new();
        for (b, &w) in block.iter().enumerate() {
            let w = w.max(0.0) / mass;
            if w > 1e-12 {
                points.push((atlas.point(b).clone(), w));
            }
        }
        support.push(points);
    }
    BeliefDistribution::new(support)
}

/// Builds the candidate set for an epsilon-equilibrium search.
///
/// delta = epsilon / max over types of the Euclidean norm of the leader's
/// belief-value vector over the atlas, so a delta-step changes the piecewise
/// linear objective by at most epsilon.
pub fn build_candidate_set(
    game: &Game,
    atlas: &BeliefAtlas,
    epsilon: f64,
) -> Result<CandidateSet, EquilibriumError> {
    assert!(epsilon > 0.0);
    let k = game.k();
    let s = atlas.len();
    let mut norm_sq_max: f64 = 0.0;
    for theta in 0..k {
        let norm_sq: f64 = (0..s)
            .map(|b| game.leader_belief_value(theta, atlas.point(b)).powi(2))
            .sum();
        norm_sq_max = norm_sq_max.max(norm_sq);
    }
    let delta = if norm_sq_max.sqrt() > 1e-15 {
        epsilon / norm_sq_max.sqrt()
    } else {
        f64::INFINITY
    };

    let mut members = Vec::new();
    let mut diagnostics = CandidateDiagnostics::default();
    let mut sup_estimate = f64::NEG_INFINITY;

    for gamma in PartitionMap::all(k) {
        diagnostics.pieces_total += 1;
        let piece = partition_polytope(game, atlas, &gamma);
        let objective = piece_objective(game, atlas, &gamma);

        // Prefer exhaustive closure vertices; fall back to the per-piece LP
        // optimum (itself a closure vertex) when enumeration would blow up.
        let vertices = match enumerate_vertices_capped(&piece, CANDIDATE_ENUMERATION_CAP) {
            Ok(v) => v,
            Err(GeometryError::EnumerationCap { .. }) => {
                diagnostics.pieces_lp_fallback += 1;
                let closed = piece.closure();
                let mut lp = Lp::maximize(objective.clone());
                for r in 0..closed.num_rows() {
                    let (coeffs, rhs, _) = closed.row(r);
                    lp.constrain(coeffs.to_vec(), Relation::Ge, rhs);
                }
                match lp::solve(&lp) {
                    Ok(sol) => vec![sol.x],
                    Err(LpError::Infeasible) => Vec::new(),
                    Err(e) => return Err(e.into()),
                }
            }
            Err(e) => return Err(e.into()),
        };
        if vertices.is_empty() {
            diagnostics.pieces_empty += 1;
            continue;
        }

        let piece_value = |point: &[f64]| -> f64 {
            objective.iter().zip(point).map(|(c, v)| c * v).sum()
        };
        let mut center: Option<Option<Vec<f64>>> = None;
        let mut piece_contributed = false;
        let mut piece_sup = f64::NEG_INFINITY;
        for v in &vertices {
            piece_sup = piece_sup.max(piece_value(v));
            let candidate_raw = if piece.membership(v) {
                Some((v.clone(), false))
            } else {
                if center.is_none() {
                    center = Some(match strict_feasible_point(&piece) {
                        Ok(c) => c,
                        Err(GeometryError::EmptyPolytope) => None,
                        Err(e) => return Err(e.into()),
                    });
                }
                match center.as_ref().unwrap() {
                    None => None,
                    Some(c) => {
                        let dist: f64 = c
                            .iter()
                            .zip(v)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt();
                        if dist <= 1e-12 {
                            None
                        } else {
                            let step = delta.min(dist);
                            let point: Vec<f64> = v
                                .iter()
                                .zip(c)
                                .map(|(a, b)| a + step * (b - a) / dist)
                                .collect();
                            if piece.membership(&point) {
                                Some((point, true))
                            } else {
                                None
                            }
                        }
                    }
                }
            };
            match candidate_raw {
                Some((raw, perturbed)) => {
                    let pi = stacked_to_distribution(atlas, k, &raw)?;
                    members.push(Candidate { pi, gamma: gamma.clone(), raw, perturbed });
                    piece_contributed = true;
                }
                None => diagnostics.candidates_dropped += 1,
            }
        }
        if piece_contributed {
            sup_estimate = sup_estimate.max(piece_sup);
        } else {
            diagnostics.pieces_without_strict_interior += 1;
        }
    }

    Ok(CandidateSet { members, delta, sup_estimate, diagnostics })
}

/// Epsilon-optimal signaling commitment under misreporting: the candidate
/// maximizing the leader's objective. The result's value is within epsilon
/// of the supremum over every contributing partition piece.
pub fn solve_eps_equilibrium(game: &Game, epsilon: f64) -> Result<SolveResult, EquilibriumError> {
    let atlas = build_belief_atlas(game)?;
    let candidates = build_candidate_set(game, &atlas, epsilon)?;
    if candidates.members.is_empty() {
        return Err(EquilibriumError::NoCandidates);
    }
    let mut best_idx = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (idx, candidate) in candidates.members.iter().enumerate() {
        let value = leader_objective(game, &candidate.pi);
        if value > best_value + 1e-12 {
            best_value = value;
            best_idx = idx;
        }
    }
    let chosen = &candidates.members[best_idx];
    let reports: Vec<usize> = (0..game.k())
        .map(|theta| optimal_report(game, &chosen.pi, theta))
        .collect();
    let responses: Vec<Vec<usize>> = (0..game.k())
        .map(|theta| {
            chosen.pi
                .support(reports[theta])
                .iter()
                .map(|(b, _)| game.best_response(theta, b))
                .collect()
        })
        .collect();
    let d = &candidates.diagnostics;
    Ok(SolveResult {
        mode: SolveMode::Eps,
        value: best_value,
        epsilon,
        commitment: SolvedCommitment::Beliefs(chosen.pi.clone()),
        certificate: Certificate { reports, responses },
        diagnostics: serde_json::json!({
            "atlas_points": atlas.len(),
            "candidates": candidates.members.len(),
            "delta": candidates.delta,
            "sup_estimate": candidates.sup_estimate,
            "pieces_total": d.pieces_total,
            "pieces_empty": d.pieces_empty,
            "pieces_without_strict_interior": d.pieces_without_strict_interior,
            "pieces_lp_fallback": d.pieces_lp_fallback,
            "candidates_dropped": d.candidates_dropped,
            "chosen_gamma": chosen.gamma.gamma(),
            "chosen_perturbed": chosen.perturbed,
        }),
    })
}

const ORACLE_EVALUATION_CAP: u128 = 20_000_000;

fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            let mut v = vec![first];
            v.append(&mut rest);
            out.push(v);
        }
    }
    out
}

/// Exhaustive lower bound: mixed strategies on the 1/denominator grid
/// combined with every deterministic per-type signal assignment, each
/// evaluated under optimal misreporting. Monotone in grid refinement.
pub fn brute_force_oracle(game: &Game, denominator: usize) -> Result<f64, EquilibriumError> {
    assert!(denominator >= 1);
    let (m, n, k) = (game.m(), game.n(), game.k());
    let grid = compositions(denominator, m);
    let maps_per_type = (n as u128).pow(m as u32);
    let combos = maps_per_type.pow(k as u32);
    let evaluations = grid.len() as u128 * combos;
    if evaluations > ORACLE_EVALUATION_CAP {
        return Err(EquilibriumError::CombinatorialCap {
            evaluations,
            cap: ORACLE_EVALUATION_CAP,
        });
    }

    // Deterministic signal maps: action i of the leader gets signal map[i].
    let mut maps: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..m {
        let mut next = Vec::new();
        for prefix in &maps {
            for sig in 0..n {
                let mut p = prefix.clone();
                p.push(sig);
                next.push(p);
            }
        }
        maps = next;
    }

    let mut best = f64::NEG_INFINITY;
    for counts in &grid {
        let x: Vec<f64> = counts.iter().map(|&c| c as f64 / denominator as f64).collect();
        let mut assignment = vec![0usize; k];
        loop {
            let tensors: Vec<Vec<Vec<f64>>> = (0..k)
                .map(|theta| {
                    let map = &maps[assignment[theta]];
                    (0..m)
                        .map(|i| {
                            let mut row = vec![0.0; n];
                            row[map[i]] = x[i];
                            row
                        })
                        .collect()
                })
                .collect();
            let sigma = Commitment::new(x.clone(), tensors)?;
            let pi = commitment_to_beliefs(game, &sigma);
            best = best.max(leader_objective(game, &pi));

            // Advance the per-type assignment counter.
            let mut pos = 0;
            loop {
                if pos == k {
                    break;
                }
                assignment[pos] += 1;
                if assignment[pos] < maps.len() {
                    break;
                }
                assignment[pos] = 0;
                pos += 1;
            }
            if pos == k {
                break;
            }
        }
    }
    Ok(best)
}

/// Re-evaluates a solve result's commitment through the signaling layer.
/// For `bse` and `eps` this is the misreport-aware objective; for `iclp`
/// the truthful objective the LP optimized.
pub fn certificate_value(game: &Game, result: &SolveResult) -> f64 {
    match (&result.commitment, result.mode) {
        (SolvedCommitment::Tensor(sigma), SolveMode::IcLp) => {
            let pi = commitment_to_beliefs(game, sigma);
            crate::signaling::truthful_leader_objective(game, &pi)
        }
        (SolvedCommitment::Tensor(sigma), _) => {
            let pi = commitment_to_beliefs(game, sigma);
            leader_objective(game, &pi)
        }
        (SolvedCommitment::Beliefs(pi), _) => leader_objective(game, pi),
    }
}

/// Certificate consistency: the stored reports and responses reproduce the
/// stored value when replayed against the commitment.
pub fn verify_certificate(game: &Game, result: &SolveResult) -> f64 {
    let replayed = match (&result.commitment, result.mode) {
        (SolvedCommitment::Tensor(sigma), SolveMode::Bse) => {
            let pi = commitment_to_beliefs(game, sigma);
            (0..game.k())
                .map(|theta| {
                    game.prior()[theta]
                        * leader_report_value(game, &pi, result.certificate.reports[theta], theta)
                })
                .sum()
        }
        _ => certificate_value(game, result),
    };
    (replayed - result.value).abs()
}
