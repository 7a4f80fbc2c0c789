//! Repeated-play simulators with gap and regret accounting.
//!
//! Two learners are provided. The follow-the-leader learner re-solves the
//! incentive-compatible commitment LP against the empirical type
//! distribution, so the follower reports truthfully and obeys every round
//! (both asserted against the LP residuals). The Hedge learner plays
//! multiplicative weights over the finite arm set of partition-piece
//! vertices, with full-information counterfactual rewards available because
//! the true type is observed after each round.
//!
//! Simulations are deterministic: all randomness flows through the seeded
//! stream generator, with nature, leader sampling and arm sampling on
//! separate streams.

use thiserror::Error;

use crate::equilibrium::{
    build_candidate_set, solve_eps_equilibrium, solve_sig_lp, EquilibriumError, SolvedCommitment,
};
use crate::game::{Game, GameError};
use crate::geometry::build_belief_atlas;
use crate::rng::{Stream, StreamRng};
use crate::signaling::{
    leader_report_value, optimal_report, BeliefDistribution, Commitment,
};

/// Tolerance on the incentive and obedience residuals asserted per round.
pub const IC_RESIDUAL_TOL: f64 = 1e-7;
/// Epsilon used to pin down the reference optimum and the arm set.
pub const OPT_EPSILON: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum LearningError {
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("incentive residual {residual} at round {round} exceeds tolerance (LP tolerance bug)")]
    IcViolation { round: usize, residual: f64 },
    #[error("obedience residual {residual} at round {round} exceeds tolerance (LP tolerance bug)")]
    ObedienceViolation { round: usize, residual: f64 },
    #[error("arm set is empty")]
    EmptyArmSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    FtlIc,
    Hedge,
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub horizon: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    /// Hedge learning rate; defaults to sqrt(8 ln A / T).
    pub eta: Option<f64>,
    /// Rounds between LP re-solves for the follow-the-leader learner.
    pub resolve_period: usize,
}

impl SimulationConfig {
    pub fn ftl_ic(horizon: usize, seed: u64) -> Self {
        SimulationConfig { horizon, seed, algorithm: Algorithm::FtlIc, eta: None, resolve_period: 1 }
    }

    pub fn hedge(horizon: usize, seed: u64) -> Self {
        SimulationConfig { horizon, seed, algorithm: Algorithm::Hedge, eta: None, resolve_period: 1 }
    }

    fn validate(&self, expect: Algorithm) -> Result<(), LearningError> {
        if self.horizon == 0 {
            return Err(LearningError::InvalidConfig("horizon must be at least 1".into()));
        }
        if self.resolve_period == 0 {
            return Err(LearningError::InvalidConfig("resolve period must be at least 1".into()));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0) {
                return Err(LearningError::InvalidConfig("eta must be positive".into()));
            }
        }
        if self.algorithm != expect {
            return Err(LearningError::InvalidConfig("algorithm does not match simulator".into()));
        }
        Ok(())
    }
}

/// One simulated round.
#[derive(Debug, Clone)]
pub struct Round {
    pub t: usize,
    pub true_type: usize,
    pub reported_type: usize,
    pub leader_action: usize,
    pub signal: usize,
    pub follower_action: usize,
    pub payoff: f64,
}

/// Full record of a simulation, with running sums per round.
#[derive(Debug, Clone)]
pub struct SimulationTrace {
    pub num_types: usize,
    pub opt_value: f64,
    pub rounds: Vec<Round>,
    pub cum_payoff: Vec<f64>,
    /// Cumulative expected per-round value of the played commitments.
    pub cum_expected: Vec<f64>,
    pub cum_gap: Vec<f64>,
    pub cum_regret: Vec<f64>,
}

impl SimulationTrace {
    fn new(num_types: usize, opt_value: f64) -> Self {
        SimulationTrace {
            num_types,
            opt_value,
            rounds: Vec::new(),
            cum_payoff: Vec::new(),
            cum_expected: Vec::new(),
            cum_gap: Vec::new(),
            cum_regret: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn total_payoff(&self) -> f64 {
        self.cum_payoff.last().copied().unwrap_or(0.0)
    }

    pub fn final_gap(&self) -> f64 {
        self.cum_gap.last().copied().unwrap_or(0.0)
    }

    pub fn final_regret(&self) -> f64 {
        self.cum_regret.last().copied().unwrap_or(0.0)
    }

    /// CSV export, one row per round.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "t,true_type,reported_type,leader_action,signal,follower_action,payoff,cum_payoff,cum_gap,cum_regret\n",
        );
        for (idx, round) in self.rounds.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                round.t,
                round.true_type,
                round.reported_type,
                round.leader_action,
                round.signal,
                round.follower_action,
                round.payoff,
                self.cum_payoff[idx],
                self.cum_gap[idx],
                self.cum_regret[idx],
            ));
        }
        out
    }
}

/// Empirical distribution of the true types over the first `t` rounds;
/// uniform when `t` is zero (the cold-start prior).
pub fn empirical_distribution(trace: &SimulationTrace, t: usize) -> Vec<f64> {
    let k = trace.num_types;
    if t == 0 {
        return vec![1.0 / k as f64; k];
    }
    let mut counts = vec![0usize; k];
    for round in trace.rounds.iter().take(t) {
        counts[round.true_type] += 1;
    }
    counts.iter().map(|&c| c as f64 / t as f64).collect()
}

fn empirical_from_counts(counts: &[usize], t: usize) -> Vec<f64> {
    if t == 0 {
        return vec![1.0 / counts.len() as f64; counts.len()];
    }
    counts.iter().map(|&c| c as f64 / t as f64).collect()
}

/// Incentive residual of a commitment: how much some misreport beats the
/// truth (nonpositive when incentive-compatible).
fn ic_residual(game: &Game, sigma: &Commitment) -> f64 {
    let (m, n, k) = (game.m(), game.n(), game.k());
    let mut worst: f64 = f64::NEG_INFINITY;
    for theta in 0..k {
        let truthful: f64 = (0..m)
            .map(|i| {
                (0..n)
                    .map(|j| sigma.tensor(theta)[i][j] * game.follower_payoff(theta, i, j))
                    .sum::<f64>()
            })
            .sum();
        for reported in 0..k {
            if reported == theta {
                continue;
            }
            let mut lie = 0.0;
            for j in 0..n {
                let mut best = f64::NEG_INFINITY;
                for response in 0..n {
                    let value: f64 = (0..m)
                        .map(|i| {
                            sigma.tensor(reported)[i][j] * game.follower_payoff(theta, i, response)
                        })
                        .sum();
                    best = best.max(value);
                }
                lie += best;
            }
            worst = worst.max(lie - truthful);
        }
    }
    worst
}

/// Obedience residual: how much deviating from some recommendation gains.
fn obedience_residual(game: &Game, sigma: &Commitment) -> f64 {
    let (m, n, k) = (game.m(), game.n(), game.k());
    let mut worst: f64 = f64::NEG_INFINITY;
    for theta in 0..k {
        for j in 0..n {
            let recommended: f64 = (0..m)
                .map(|i| sigma.tensor(theta)[i][j] * game.follower_payoff(theta, i, j))
                .sum();
            for other in 0..n {
                if other == j {
                    continue;
                }
                let deviating: f64 = (0..m)
                    .map(|i| sigma.tensor(theta)[i][j] * game.follower_payoff(theta, i, other))
                    .sum();
                worst = worst.max(deviating - recommended);
            }
        }
    }
    worst
}

// Truthful-and-obedient expected leader value per type; assumes a direct
// scheme (one signal per follower action), which the sig LP guarantees.
fn expected_values_per_type(game: &Game, sigma: &Commitment) -> Vec<f64> {
    (0..game.k())
        .map(|theta| {
            debug_assert_eq!(sigma.num_signals(theta), game.n());
            (0..game.m())
                .map(|i| {
                    (0..game.n())
                        .map(|j| sigma.tensor(theta)[i][j] * game.leader_payoff(i, j))
                        .sum::<f64>()
                })
                .sum()
        })
        .collect()
}

/// Follow-the-leader over incentive-compatible commitments: each round the
/// commitment is the sig-LP optimum against the empirical prior so far
/// (re-solved every `resolve_period` rounds). Nature draws types from
/// `mu_star`; the follower reports truthfully and obeys, which is asserted
/// against the residuals every re-solve.
pub fn simulate_ftl_ic(
    game: &Game,
    mu_star: &[f64],
    config: &SimulationConfig,
) -> Result<SimulationTrace, LearningError> {
    config.validate(Algorithm::FtlIc)?;
    let k = game.k();
    let shifted = game.with_prior(mu_star)?;
    let opt = solve_eps_equilibrium(&shifted, OPT_EPSILON)?.value;

    let mut nature = StreamRng::new(config.seed, Stream::Nature);
    let mut leader = StreamRng::new(config.seed, Stream::Leader);

    let mut trace = SimulationTrace::new(k, opt);
    let mut counts = vec![0usize; k];
    let mut sigma: Option<Commitment> = None;
    let mut per_type_value = vec![0.0; k];
    let mut cum_payoff = 0.0;
    let mut cum_expected = 0.0;

    for t in 1..=config.horizon {
        if (t - 1) % config.resolve_period == 0 || sigma.is_none() {
            let mu_t = empirical_from_counts(&counts, t - 1);
            let result = solve_sig_lp(game, &mu_t)?;
            let SolvedCommitment::Tensor(commitment) = result.commitment else {
                unreachable!("sig LP returns tensors")
            };
            let ic = ic_residual(game, &commitment);
            if ic > IC_RESIDUAL_TOL {
                return Err(LearningError::IcViolation { round: t, residual: ic });
            }
            let obedience = obedience_residual(game, &commitment);
            if obedience > IC_RESIDUAL_TOL {
                return Err(LearningError::ObedienceViolation { round: t, residual: obedience });
            }
            per_type_value = expected_values_per_type(game, &commitment);
            sigma = Some(commitment);
        }
        let commitment = sigma.as_ref().expect("resolved above");

        let true_type = nature.sample_dist(mu_star);
        // Truthful reporting is optimal under the IC rows; sample the joint
        // (action, signal) cell of the reported tensor.
        let reported = true_type;
        let tensor = commitment.tensor(reported);
        let signals = commitment.num_signals(reported);
        let flat: Vec<f64> = tensor.iter().flat_map(|row| row.iter().copied()).collect();
        let cell = leader.sample_weighted(&flat);
        let leader_action = cell / signals;
        let signal = cell % signals;
        // Obedient follower: the recommendation is the response.
        let follower_action = signal;
        let payoff = game.leader_payoff(leader_action, follower_action);

        counts[true_type] += 1;
        cum_payoff += payoff;
        cum_expected += per_type_value[true_type];

        // Best-in-hindsight IC commitment over the realized sequence.
        let mu_now = empirical_from_counts(&counts, t);
        let hindsight = solve_sig_lp(game, &mu_now)?.value * t as f64;

        trace.rounds.push(Round {
            t,
            true_type,
            reported_type: reported,
            leader_action,
            signal,
            follower_action,
            payoff,
        });
        trace.cum_payoff.push(cum_payoff);
        trace.cum_expected.push(cum_expected);
        trace.cum_gap.push(opt * t as f64 - cum_payoff);
        trace.cum_regret.push(hindsight - cum_expected);
    }
    Ok(trace)
}

/// The finite arm set for online learning: all partition-piece vertices of
/// the consistency polytope (perturbed into open pieces), deduplicated.
pub fn build_arm_set(game: &Game) -> Result<Vec<BeliefDistribution>, LearningError> {
    let atlas = build_belief_atlas(game).map_err(EquilibriumError::from)?;
    let candidates = build_candidate_set(game, &atlas, OPT_EPSILON)?;
    let mut arms: Vec<(Vec<f64>, BeliefDistribution)> = Vec::new();
    for candidate in candidates.members {
        let duplicate = arms.iter().any(|(raw, _)| {
            raw.iter()
                .zip(&candidate.raw)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                <= 1e-9
        });
        if !duplicate {
            arms.push((candidate.raw, candidate.pi));
        }
    }
    if arms.is_empty() {
        return Err(LearningError::EmptyArmSet);
    }
    Ok(arms.into_iter().map(|(_, pi)| pi).collect())
}

struct HedgeTables {
    /// Expected leader value per (arm, true type) under optimal reporting.
    reward: Vec<Vec<f64>>,
    /// Optimal report per (arm, true type).
    report: Vec<Vec<usize>>,
    /// Best response per (arm, true type, support index of the report).
    response: Vec<Vec<Vec<usize>>>,
}

fn hedge_tables(game: &Game, arms: &[BeliefDistribution]) -> HedgeTables {
    let k = game.k();
    let mut reward = Vec::with_capacity(arms.len());
    let mut report = Vec::with_capacity(arms.len());
    let mut response = Vec::with_capacity(arms.len());
    for arm in arms {
        let mut r = Vec::with_capacity(k);
        let mut rep = Vec::with_capacity(k);
        let mut resp = Vec::with_capacity(k);
        for theta in 0..k {
            let chosen = optimal_report(game, arm, theta);
            rep.push(chosen);
            r.push(leader_report_value(game, arm, chosen, theta));
            resp.push(
                arm.support(chosen)
                    .iter()
                    .map(|(b, _)| game.best_response(theta, b))
                    .collect(),
            );
        }
        reward.push(r);
        report.push(rep);
        response.push(resp);
    }
    HedgeTables { reward, report, response }
}

/// Hedge over the arm set with types drawn i.i.d. from `mu_star`.
pub fn simulate_hedge(
    game: &Game,
    mu_star: &[f64],
    config: &SimulationConfig,
) -> Result<SimulationTrace, LearningError> {
    config.validate(Algorithm::Hedge)?;
    let mut nature = StreamRng::new(config.seed, Stream::Nature);
    let types: Vec<usize> = (0..config.horizon).map(|_| nature.sample_dist(mu_star)).collect();
    simulate_hedge_core(game, &types, config, Some(mu_star))
}

/// Hedge against an explicit type sequence (adversarial schedules bypass
/// the prior entirely).
pub fn simulate_hedge_with_types(
    game: &Game,
    types: &[usize],
    config: &SimulationConfig,
) -> Result<SimulationTrace, LearningError> {
    config.validate(Algorithm::Hedge)?;
    if types.len() != config.horizon {
        return Err(LearningError::InvalidConfig(
            "type sequence length must equal the horizon".into(),
        ));
    }
    simulate_hedge_core(game, types, config, None)
}

fn simulate_hedge_core(
    game: &Game,
    types: &[usize],
    config: &SimulationConfig,
    mu_star: Option<&[f64]>,
) -> Result<SimulationTrace, LearningError> {
    let arms = build_arm_set(game)?;
    let tables = hedge_tables(game, &arms);
    let num_arms = arms.len();
    let horizon = types.len();

    // Reference optimum: best arm under the prior (the epsilon-equilibrium
    // value), or under the empirical sequence distribution when the caller
    // supplied an explicit schedule.
    let k = game.k();
    let weights_mu: Vec<f64> = match mu_star {
        Some(mu) => mu.to_vec(),
        None => {
            let mut counts = vec![0usize; k];
            for &theta in types {
                counts[theta] += 1;
            }
            empirical_from_counts(&counts, horizon)
        }
    };
    let opt = (0..num_arms)
        .map(|a| (0..k).map(|theta| weights_mu[theta] * tables.reward[a][theta]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);

    let mut lmin = f64::INFINITY;
    let mut lmax = f64::NEG_INFINITY;
    for i in 0..game.m() {
        for j in 0..game.n() {
            lmin = lmin.min(game.leader_payoff(i, j));
            lmax = lmax.max(game.leader_payoff(i, j));
        }
    }
    let span = (lmax - lmin).max(1e-12);
    let eta = config
        .eta
        .unwrap_or_else(|| (8.0 * (num_arms.max(2) as f64).ln() / horizon as f64).sqrt());

    let mut leader = StreamRng::new(config.seed, Stream::Leader);
    let mut hedge = StreamRng::new(config.seed, Stream::Hedge);

    let mut log_weights = vec![0.0; num_arms];
    let mut arm_cum: Vec<f64> = vec![0.0; num_arms];
    let mut trace = SimulationTrace::new(k, opt);
    let mut cum_payoff = 0.0;
    let mut cum_expected = 0.0;

    for (idx, &true_type) in types.iter().enumerate() {
        let t = idx + 1;
        // Normalized sampling distribution from log weights.
        let max_lw = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = log_weights.iter().map(|lw| (lw - max_lw).exp()).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let arm = hedge.sample_dist(&probs);
        let reported = tables.report[arm][true_type];
        let support = arms[arm].support(reported);
        let support_weights: Vec<f64> = support.iter().map(|(_, w)| *w).collect();
        let signal = leader.sample_weighted(&support_weights);
        let belief = &support[signal].0;
        let leader_action = leader.sample_weighted(belief.coords());
        let follower_action = tables.response[arm][true_type][signal];
        let payoff = game.leader_payoff(leader_action, follower_action);

        cum_payoff += payoff;
        cum_expected += tables.reward[arm][true_type];

        // Full-information update: the true type is observed afterwards, so
        // every arm's counterfactual reward is available.
        let mut best_fixed = f64::NEG_INFINITY;
        for a in 0..num_arms {
            let r = tables.reward[a][true_type];
            arm_cum[a] += r;
            best_fixed = best_fixed.max(arm_cum[a]);
            log_weights[a] += eta * (r - lmin) / span;
        }

        trace.rounds.push(Round {
            t,
            true_type,
            reported_type: reported,
            leader_action,
            signal,
            follower_action,
            payoff,
        });
        trace.cum_payoff.push(cum_payoff);
        trace.cum_expected.push(cum_expected);
        trace.cum_gap.push(opt * t as f64 - cum_payoff);
        trace.cum_regret.push(best_fixed - cum_expected);
    }
    Ok(trace)
}

/// Summary metrics for a finished trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub rounds: usize,
    pub total_payoff: f64,
    pub average_payoff: f64,
    pub gap: f64,
    pub regret: f64,
}

/// Final gap against the supplied optimum and the recorded best-fixed-arm
/// regret. An empty trace has zero gap and regret.
pub fn compute_metrics(trace: &SimulationTrace, opt_value: f64) -> Metrics {
    let rounds = trace.len();
    let total_payoff = trace.total_payoff();
    Metrics {
        rounds,
        total_payoff,
        average_payoff: if rounds == 0 { 0.0 } else { total_payoff / rounds as f64 },
        gap: opt_value * rounds as f64 - total_payoff,
        regret: trace.final_regret(),
    }
}
