//! Game data model: payoff tensors, the type prior, posterior beliefs over
//! the leader's realized action, and the follower's best response under a
//! belief.
//!
//! The leader's payoff matrix is shared by all follower types; each type
//! carries its own payoff matrix. Follower ties are broken in favour of the
//! leader first (the strong Stackelberg convention) and by lowest action
//! index after that, so every evaluation is deterministic.

use serde::Deserialize;
use thiserror::Error;

/// Absolute tolerance for payoff/value comparisons.
pub const VALUE_TOL: f64 = 1e-9;
/// Priors must sum to one within this tolerance before normalization.
pub const PRIOR_SUM_TOL: f64 = 1e-6;

const BELIEF_SUM_TOL: f64 = 1e-9;
const BELIEF_NEG_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("game spec is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{0}")]
    Schema(String),
    #[error("ragged matrix in {context}: row {row} has {got} entries, expected {expected}")]
    Ragged { context: String, row: usize, got: usize, expected: usize },
    #[error("type {0:?} has negative prior {1}")]
    NegativePrior(String, f64),
    #[error("priors sum to {0}, outside [1-1e-6, 1+1e-6]")]
    PriorSum(f64),
    #[error("non-finite payoff in {0}")]
    NonFinite(String),
    #[error("invalid belief: {0}")]
    Belief(String),
}

/// A point of the belief simplex over the leader's pure strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief(Vec<f64>);

impl Belief {
    /// Entries as low as -1e-12 are clamped to zero; the total mass must be
    /// one within 1e-9.
    pub fn new(mut coords: Vec<f64>) -> Result<Self, GameError> {
        for v in coords.iter_mut() {
            if *v < 0.0 {
                if *v < -BELIEF_NEG_TOL {
                    return Err(GameError::Belief(format!("negative coordinate {v}")));
                }
                *v = 0.0;
            }
            if !v.is_finite() {
                return Err(GameError::Belief("non-finite coordinate".into()));
            }
        }
        let sum: f64 = coords.iter().sum();
        if (sum - 1.0).abs() > BELIEF_SUM_TOL {
            return Err(GameError::Belief(format!("mass {sum} not 1")));
        }
        Ok(Belief(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Largest coordinate-wise distance to another belief.
    pub fn linf_distance(&self, other: &Belief) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct Game {
    leader_actions: Vec<String>,
    follower_actions: Vec<String>,
    type_names: Vec<String>,
    leader_payoff: Vec<Vec<f64>>,
    follower_payoffs: Vec<Vec<Vec<f64>>>,
    prior: Vec<f64>,
}

impl Game {
    pub fn new(
        leader_actions: Vec<String>,
        follower_actions: Vec<String>,
        leader_payoff: Vec<Vec<f64>>,
        type_names: Vec<String>,
        follower_payoffs: Vec<Vec<Vec<f64>>>,
        prior: Vec<f64>,
    ) -> Result<Self, GameError> {
        let m = leader_actions.len();
        let n = follower_actions.len();
        let k = type_names.len();
        if m == 0 || n == 0 || k == 0 {
            return Err(GameError::Schema("M, N and K must all be at least 1".into()));
        }
        check_matrix("leader_payoff", &leader_payoff, m, n)?;
        if follower_payoffs.len() != k || prior.len() != k {
            return Err(GameError::Schema("types, payoffs and priors must align".into()));
        }
        for (t, mat) in follower_payoffs.iter().enumerate() {
            check_matrix(&format!("follower_payoff of {:?}", type_names[t]), mat, m, n)?;
        }
        for (t, &p) in prior.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(GameError::NegativePrior(type_names[t].clone(), p));
            }
        }
        let sum: f64 = prior.iter().sum();
        if (sum - 1.0).abs() > PRIOR_SUM_TOL {
            return Err(GameError::PriorSum(sum));
        }
        let prior: Vec<f64> = prior.iter().map(|p| p / sum).collect();
        Ok(Game {
            leader_actions,
            follower_actions,
            type_names,
            leader_payoff,
            follower_payoffs,
            prior,
        })
    }

    /// Number of leader pure strategies.
    pub fn m(&self) -> usize {
        self.leader_actions.len()
    }

    /// Number of follower pure strategies.
    pub fn n(&self) -> usize {
        self.follower_actions.len()
    }

    /// Number of follower types.
    pub fn k(&self) -> usize {
        self.type_names.len()
    }

    pub fn leader_action_names(&self) -> &[String] {
        &self.leader_actions
    }

    pub fn follower_action_names(&self) -> &[String] {
        &self.follower_actions
    }

    pub fn type_names(&self) -> &[String] {
        &self.type_names
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    /// Returns a copy of the game with a different (validated) prior.
    pub fn with_prior(&self, prior: &[f64]) -> Result<Game, GameError> {
        let mut g = self.clone();
        if prior.len() != self.k() {
            return Err(GameError::Schema("prior length differs from K".into()));
        }
        for (t, &p) in prior.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(GameError::NegativePrior(self.type_names[t].clone(), p));
            }
        }
        let sum: f64 = prior.iter().sum();
        if (sum - 1.0).abs() > PRIOR_SUM_TOL {
            return Err(GameError::PriorSum(sum));
        }
        g.prior = prior.iter().map(|p| p / sum).collect();
        Ok(g)
    }

    pub fn leader_payoff(&self, i: usize, j: usize) -> f64 {
        self.leader_payoff[i][j]
    }

    pub fn follower_payoff(&self, theta: usize, i: usize, j: usize) -> f64 {
        self.follower_payoffs[theta][i][j]
    }

    /// Expected follower payoff of action `j` under belief `b`.
    pub fn follower_action_value(&self, theta: usize, b: &Belief, j: usize) -> f64 {
        b.coords()
            .iter()
            .enumerate()
            .map(|(i, &bi)| bi * self.follower_payoffs[theta][i][j])
            .sum()
    }

    /// Expected leader payoff of follower action `j` under belief `b`.
    pub fn leader_action_value(&self, b: &Belief, j: usize) -> f64 {
        b.coords()
            .iter()
            .enumerate()
            .map(|(i, &bi)| bi * self.leader_payoff[i][j])
            .sum()
    }

    /// The follower's best response to belief `b`: the action maximizing his
    /// expected payoff, ties broken toward the leader's value and then the
    /// lowest action index.
    pub fn best_response(&self, theta: usize, b: &Belief) -> usize {
        let values: Vec<f64> = (0..self.n())
            .map(|j| self.follower_action_value(theta, b, j))
            .collect();
        let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut choice = None;
        let mut choice_leader = f64::NEG_INFINITY;
        for j in 0..self.n() {
            if values[j] >= best - VALUE_TOL {
                let lv = self.leader_action_value(b, j);
                if lv > choice_leader + VALUE_TOL {
                    choice = Some(j);
                    choice_leader = lv;
                }
            }
        }
        choice.expect("game has at least one follower action")
    }

    /// The follower's expected payoff when best responding to `b`.
    pub fn follower_value(&self, theta: usize, b: &Belief) -> f64 {
        self.follower_action_value(theta, b, self.best_response(theta, b))
    }

    /// The leader's expected payoff when the follower best responds to `b`.
    pub fn leader_belief_value(&self, theta: usize, b: &Belief) -> f64 {
        self.leader_action_value(b, self.best_response(theta, b))
    }
}

fn check_matrix(context: &str, mat: &[Vec<f64>], m: usize, n: usize) -> Result<(), GameError> {
    if mat.len() != m {
        return Err(GameError::Ragged {
            context: context.into(),
            row: mat.len(),
            got: mat.len(),
            expected: m,
        });
    }
    for (r, row) in mat.iter().enumerate() {
        if row.len() != n {
            return Err(GameError::Ragged {
                context: context.into(),
                row: r,
                got: row.len(),
                expected: n,
            });
        }
        for &v in row {
            if !v.is_finite() {
                return Err(GameError::NonFinite(context.into()));
            }
        }
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GameSpec {
    leader_actions: Vec<String>,
    follower_actions: Vec<String>,
    leader_payoff: Vec<Vec<f64>>,
    types: Vec<TypeSpec>,
}

// `deny_unknown_fields` rejects per-type leader payoffs by construction.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TypeSpec {
    name: String,
    prior: f64,
    follower_payoff: Vec<Vec<f64>>,
}

/// Parses and validates a game-spec JSON document.
///
/// Array ordering is authoritative; names are labels only. Priors are
/// normalized only when they already sum to one within 1e-6.
pub fn load_game(document: &str) -> Result<Game, GameError> {
    let spec: GameSpec = serde_json::from_str(document)?;
    let type_names = spec.types.iter().map(|t| t.name.clone()).collect();
    let prior = spec.types.iter().map(|t| t.prior).collect();
    let payoffs = spec.types.into_iter().map(|t| t.follower_payoff).collect();
    Game::new(
        spec.leader_actions,
        spec.follower_actions,
        spec.leader_payoff,
        type_names,
        payoffs,
        prior,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn b(coords: &[f64]) -> Belief {
        Belief::new(coords.to_vec()).unwrap()
    }

    #[test]
    fn loads_market_entry_fixture() {
        let game = fixtures::market_entry();
        assert_eq!(game.m(), 3);
        assert_eq!(game.n(), 2);
        assert_eq!(game.k(), 2);
        assert!((game.prior()[0] - 0.55).abs() < 1e-12);
        assert!((game.prior()[1] - 0.45).abs() < 1e-12);
    }

    #[test]
    fn loads_trivial_single_type_game() {
        let doc = r#"{
            "leader_actions": ["a"],
            "follower_actions": ["x"],
            "leader_payoff": [[1.0]],
            "types": [{"name": "t", "prior": 1.0, "follower_payoff": [[0.0]]}]
        }"#;
        let game = load_game(doc).unwrap();
        assert_eq!((game.m(), game.n(), game.k()), (1, 1, 1));
    }

    #[test]
    fn rejects_bad_prior_sum() {
        let doc = r#"{
            "leader_actions": ["a"],
            "follower_actions": ["x"],
            "leader_payoff": [[1.0]],
            "types": [{"name": "t", "prior": 0.9, "follower_payoff": [[0.0]]}]
        }"#;
        assert!(matches!(load_game(doc), Err(GameError::PriorSum(_))));
    }

    #[test]
    fn rejects_ragged_matrix() {
        let doc = r#"{
            "leader_actions": ["a", "b"],
            "follower_actions": ["x", "y"],
            "leader_payoff": [[1.0, 0.0], [1.0]],
            "types": [{"name": "t", "prior": 1.0, "follower_payoff": [[0.0, 1.0], [0.0, 1.0]]}]
        }"#;
        assert!(matches!(load_game(doc), Err(GameError::Ragged { .. })));
    }

    #[test]
    fn rejects_negative_prior() {
        let doc = r#"{
            "leader_actions": ["a"],
            "follower_actions": ["x"],
            "leader_payoff": [[1.0]],
            "types": [
                {"name": "t", "prior": 1.5, "follower_payoff": [[0.0]]},
                {"name": "u", "prior": -0.5, "follower_payoff": [[0.0]]}
            ]
        }"#;
        assert!(matches!(load_game(doc), Err(GameError::NegativePrior(..))));
    }

    #[test]
    fn rejects_per_type_leader_payoff() {
        let doc = r#"{
            "leader_actions": ["a"],
            "follower_actions": ["x"],
            "leader_payoff": [[1.0]],
            "types": [{"name": "t", "prior": 1.0,
                       "follower_payoff": [[0.0]], "leader_payoff": [[1.0]]}]
        }"#;
        assert!(load_game(doc).is_err());
    }

    #[test]
    fn normalizes_close_prior() {
        let doc = r#"{
            "leader_actions": ["a"],
            "follower_actions": ["x"],
            "leader_payoff": [[1.0]],
            "types": [
                {"name": "t", "prior": 0.5000001, "follower_payoff": [[0.0]]},
                {"name": "u", "prior": 0.4999996, "follower_payoff": [[0.0]]}
            ]
        }"#;
        let game = load_game(doc).unwrap();
        let sum: f64 = game.prior().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn belief_clamps_tiny_negatives() {
        let belief = Belief::new(vec![-1e-13, 0.5, 0.5 + 1e-13]).unwrap();
        assert_eq!(belief.coords()[0], 0.0);
        assert!(Belief::new(vec![-1e-6, 0.5, 0.5]).is_err());
        assert!(Belief::new(vec![0.3, 0.3]).is_err());
    }

    #[test]
    fn tie_break_favours_leader_in_market_entry() {
        // At (0, 2/3, 1/3) the first type is indifferent; leaving pays the
        // leader more, so the tie resolves to action 0.
        let game = fixtures::market_entry();
        let belief = b(&[0.0, 2.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(game.best_response(0, &belief), 0);
        assert!((game.follower_value(0, &belief) - 0.0).abs() < 1e-12);
        assert!((game.leader_belief_value(0, &belief) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sure_product_two_belief_makes_type_one_enter() {
        let game = fixtures::market_entry();
        let belief = b(&[0.0, 0.0, 1.0]);
        assert_eq!(game.best_response(0, &belief), 1);
        assert!((game.leader_belief_value(0, &belief) - 0.0).abs() < 1e-12);
    }

    #[test]
    fn type_two_values_match_hand_computation() {
        let game = fixtures::market_entry();
        let belief = b(&[0.0, 2.0 / 3.0, 1.0 / 3.0]);
        // Entering pays 2/3 * 1 + 1/3 * (-1) = 1/3.
        assert!((game.follower_value(1, &belief) - 1.0 / 3.0).abs() < 1e-12);
        let half = b(&[0.0, 0.5, 0.5]);
        assert!((game.leader_belief_value(1, &half) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_action_game_always_plays_it() {
        let doc = r#"{
            "leader_actions": ["a", "b"],
            "follower_actions": ["only"],
            "leader_payoff": [[2.0], [3.0]],
            "types": [{"name": "t", "prior": 1.0, "follower_payoff": [[5.0], [7.0]]}]
        }"#;
        let game = load_game(doc).unwrap();
        let belief = b(&[0.25, 0.75]);
        assert_eq!(game.best_response(0, &belief), 0);
        let expect = 0.25 * 5.0 + 0.75 * 7.0;
        assert!((game.follower_value(0, &belief) - expect).abs() < 1e-12);
    }

    #[test]
    fn best_response_invariant_under_affine_rescaling() {
        let game = fixtures::market_entry();
        let mut rescaled: Vec<Vec<Vec<f64>>> = Vec::new();
        for t in 0..game.k() {
            let mut mat = vec![vec![0.0; game.n()]; game.m()];
            for i in 0..game.m() {
                for j in 0..game.n() {
                    mat[i][j] = 3.5 * game.follower_payoff(t, i, j) + 2.0;
                }
            }
            rescaled.push(mat);
        }
        let scaled = Game::new(
            game.leader_action_names().to_vec(),
            game.follower_action_names().to_vec(),
            (0..game.m())
                .map(|i| (0..game.n()).map(|j| game.leader_payoff(i, j)).collect())
                .collect(),
            game.type_names().to_vec(),
            rescaled,
            game.prior().to_vec(),
        )
        .unwrap();
        let mut rng = crate::rng::StreamRng::new(5, crate::rng::Stream::Nature);
        for _ in 0..200 {
            let mut coords: Vec<f64> = (0..3).map(|_| rng.next_f64()).collect();
            let total: f64 = coords.iter().sum();
            coords.iter_mut().for_each(|c| *c /= total);
            let belief = Belief::new(coords).unwrap();
            for t in 0..2 {
                assert_eq!(game.best_response(t, &belief), scaled.best_response(t, &belief));
            }
        }
    }

    #[test]
    fn best_response_dominates_every_action() {
        let game = fixtures::market_entry();
        let mut rng = crate::rng::StreamRng::new(9, crate::rng::Stream::Nature);
        for _ in 0..200 {
            let mut coords: Vec<f64> = (0..3).map(|_| rng.next_f64()).collect();
            let total: f64 = coords.iter().sum();
            coords.iter_mut().for_each(|c| *c /= total);
            let belief = Belief::new(coords).unwrap();
            for t in 0..2 {
                let value = game.follower_value(t, &belief);
                for j in 0..game.n() {
                    assert!(value >= game.follower_action_value(t, &belief, j) - VALUE_TOL);
                }
            }
        }
    }

    #[test]
    fn values_are_linear_where_best_response_is_constant() {
        let game = fixtures::market_entry();
        let mut rng = crate::rng::StreamRng::new(13, crate::rng::Stream::Nature);
        let mut checked = 0;
        while checked < 100 {
            let mut sample = || {
                let mut coords: Vec<f64> = (0..3).map(|_| rng.next_f64()).collect();
                let total: f64 = coords.iter().sum();
                coords.iter_mut().for_each(|c| *c /= total);
                Belief::new(coords).unwrap()
            };
            let (b1, b2) = (sample(), sample());
            for t in 0..2 {
                if game.best_response(t, &b1) != game.best_response(t, &b2) {
                    continue;
                }
                let mid_coords: Vec<f64> = b1
                    .coords()
                    .iter()
                    .zip(b2.coords())
                    .map(|(a, c)| 0.5 * (a + c))
                    .collect();
                let mid = Belief::new(mid_coords).unwrap();
                if game.best_response(t, &mid) != game.best_response(t, &b1) {
                    continue;
                }
                let f_mid = game.follower_value(t, &mid);
                let f_lin = 0.5 * (game.follower_value(t, &b1) + game.follower_value(t, &b2));
                assert!((f_mid - f_lin).abs() < VALUE_TOL);
                let l_mid = game.leader_belief_value(t, &mid);
                let l_lin =
                    0.5 * (game.leader_belief_value(t, &b1) + game.leader_belief_value(t, &b2));
                assert!((l_mid - l_lin).abs() < VALUE_TOL);
                checked += 1;
            }
        }
    }
}
