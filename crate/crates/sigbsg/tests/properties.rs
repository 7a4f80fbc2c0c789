//! Property tests over randomized games, beliefs and commitments.

use proptest::prelude::*;

use sigbsg::{
    beliefs_to_commitment, commitment_to_beliefs, leader_objective, Belief, Commitment, Game,
};

fn simplex(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-3..1.0f64, dim).prop_map(|raw| {
        let total: f64 = raw.iter().sum();
        raw.iter().map(|v| v / total).collect()
    })
}

fn payoff_matrix(m: usize, n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-2.0..2.0f64, n), m)
}

fn arb_game() -> impl Strategy<Value = Game> {
    (2usize..=3, 2usize..=3, 1usize..=3).prop_flat_map(|(m, n, k)| {
        (
            payoff_matrix(m, n),
            prop::collection::vec(payoff_matrix(m, n), k),
            simplex(k),
        )
            .prop_map(move |(leader, followers, prior)| {
                Game::new(
                    (0..m).map(|i| format!("L{i}")).collect(),
                    (0..n).map(|j| format!("F{j}")).collect(),
                    leader,
                    (0..k).map(|t| format!("T{t}")).collect(),
                    followers,
                    prior,
                )
                .unwrap()
            })
    })
}

fn arb_commitment(game: &Game) -> impl Strategy<Value = Commitment> {
    let (m, n, k) = (game.m(), game.n(), game.k());
    (
        simplex(m),
        prop::collection::vec(prop::collection::vec(simplex(n), m), k),
    )
        .prop_map(move |(x, kernels)| {
            let tensors = kernels
                .into_iter()
                .map(|kernel| {
                    kernel
                        .into_iter()
                        .enumerate()
                        .map(|(i, row)| row.into_iter().map(|p| p * x[i]).collect())
                        .collect()
                })
                .collect();
            Commitment::new(x, tensors).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The chosen response never loses to any fixed action.
    #[test]
    fn best_response_dominates((game, raw) in arb_game().prop_flat_map(|g| {
        let m = g.m();
        (Just(g), simplex(m))
    })) {
        let belief = Belief::new(raw).unwrap();
        for theta in 0..game.k() {
            let value = game.follower_value(theta, &belief);
            for j in 0..game.n() {
                prop_assert!(value >= game.follower_action_value(theta, &belief, j) - 1e-9);
            }
        }
    }

    /// Bayes updates are consistent: every type's expected posterior is the
    /// announced mixed strategy.
    #[test]
    fn posteriors_average_to_the_mixed_strategy(
        (game, sigma) in arb_game().prop_flat_map(|g| {
            let s = arb_commitment(&g);
            (Just(g), s)
        })
    ) {
        let pi = commitment_to_beliefs(&game, &sigma);
        prop_assert!(pi.consistency_residual() <= 1e-9);
        for theta in 0..game.k() {
            let mean = pi.mean(theta);
            for (a, b) in mean.iter().zip(sigma.mixed_strategy()) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }
    }

    /// Round-tripping through the belief representation preserves the mixed
    /// strategy exactly and the leader's objective to solver tolerance.
    #[test]
    fn commitment_round_trip_preserves_value(
        (game, sigma) in arb_game().prop_flat_map(|g| {
            let s = arb_commitment(&g);
            (Just(g), s)
        })
    ) {
        let pi = commitment_to_beliefs(&game, &sigma);
        let back = beliefs_to_commitment(&game, &pi).unwrap();
        for (a, b) in sigma.mixed_strategy().iter().zip(back.mixed_strategy()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        let pi2 = commitment_to_beliefs(&game, &back);
        prop_assert!((leader_objective(&game, &pi) - leader_objective(&game, &pi2)).abs() <= 1e-9);
    }
}
