//! Solvers and online-learning simulators for signaling Bayesian
//! Stackelberg games: a leader commits to a mixed strategy plus a signaling
//! device, a privately-typed follower reports a type (possibly untruthfully),
//! receives a signal about the leader's realized action, and best-responds
//! to the induced posterior belief.
//!
//! The crate covers, in layers:
//!
//! - [`game`]: payoff model, beliefs and best responses;
//! - [`signaling`]: commitments, posterior-belief distributions and the
//!   expected-utility functionals over them;
//! - [`geometry`]: best-response regions, vertex enumeration, the belief
//!   atlas and reporting partitions;
//! - [`equilibrium`]: baseline Stackelberg LPs, the incentive-compatible
//!   commitment LP, and the epsilon-equilibrium vertex search;
//! - [`learning`]: repeated-play simulators (follow-the-leader over
//!   incentive-compatible commitments, and Hedge over a finite arm set)
//!   with gap/regret accounting.
//!
//! The mdBook guide under `book/` walks through the same layers with
//! runnable examples; its code blocks are compiled as doc-tests.

pub mod equilibrium;
pub mod fixtures;
pub mod game;
pub mod geometry;
pub mod learning;
pub mod lp;
pub mod rng;
pub mod signaling;

pub use game::{load_game, Belief, Game, GameError};
pub use geometry::{
    best_response_region, build_belief_atlas, consistency_residual, enumerate_vertices,
    joint_region, partition_polytope, strict_feasible_point, BeliefAtlas, GeometryError,
    PartitionMap, Polytope,
};
pub use signaling::{
    beliefs_to_commitment, commitment_to_beliefs, convex_decompose, leader_objective,
    leader_report_value, optimal_report, reduce_to_atlas, report_value,
    truthful_leader_objective, BeliefDistribution, Commitment, SignalingError,
};
pub use equilibrium::{
    brute_force_oracle, build_candidate_set, solve_bse, solve_eps_equilibrium, solve_sig_lp,
    CandidateSet, EquilibriumError, SolveResult,
};
pub use learning::{
    build_arm_set, compute_metrics, empirical_distribution, simulate_ftl_ic, simulate_hedge,
    simulate_hedge_with_types, Algorithm, LearningError, Metrics, SimulationConfig,
    SimulationTrace,
};
