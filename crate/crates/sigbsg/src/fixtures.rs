//! Bundled example game: a leading firm deciding which product line to
//! defend against a start-up that privately knows which product it will
//! compete on.

use crate::game::{load_game, Game};

/// Game-spec JSON for the market-entry example used across the guide, the
/// CLI `example` subcommand and the test suites.
pub const MARKET_ENTRY_JSON: &str = r#"{
  "leader_actions": ["maintain", "product1", "product2"],
  "follower_actions": ["leave", "enter"],
  "leader_payoff": [[1, 0], [1, 0], [1, 0]],
  "types": [
    {"name": "theta1", "prior": 0.55, "follower_payoff": [[0, 2], [0, -1], [0, 2]]},
    {"name": "theta2", "prior": 0.45, "follower_payoff": [[0, 1], [0, 1], [0, -1]]}
  ]
}"#;

/// The market-entry game: three leader actions, leave/enter for the
/// follower, two follower types with priors 0.55 and 0.45.
pub fn market_entry() -> Game {
    load_game(MARKET_ENTRY_JSON).expect("bundled fixture is valid")
}
