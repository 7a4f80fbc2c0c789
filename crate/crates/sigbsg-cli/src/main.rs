//! Command line front end: load a game, run the solvers or the repeated-play
//! simulators, and emit JSON/CSV artifacts. Identical invocations produce
//! byte-identical artifacts; no timestamps enter any payload.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sigbsg::equilibrium::{build_candidate_set, verify_certificate};
use sigbsg::geometry::{partition_polytope, strict_feasible_point, PartitionMap};
use sigbsg::learning::{compute_metrics, Algorithm, SimulationConfig};
use sigbsg::signaling::market_entry_commitment;
use sigbsg::*;

const SCHEMA_HELP: &str = "\
Schemas:
  game spec (JSON):   {\"leader_actions\": [str], \"follower_actions\": [str],
                       \"leader_payoff\": MxN numbers,
                       \"types\": [{\"name\": str, \"prior\": f,
                                   \"follower_payoff\": MxN numbers}]}
                      Ordering is authoritative; priors must sum to 1 within 1e-6.
  solve result (JSON): {\"mode\", \"value\", \"epsilon\", \"commitment\",
                        \"certificate\", \"diagnostics\"}
  trace (CSV):        t,true_type,reported_type,leader_action,signal,
                      follower_action,payoff,cum_payoff,cum_gap,cum_regret
  summary (JSON):     {\"algorithm\", \"rounds\", \"opt_value\", \"per_seed\", \"aggregate\"}

Exit codes: 0 success, 1 validation error, 2 solver failure.
Errors print {\"error\": {\"kind\", \"message\"}} on stderr.";

#[derive(Parser)]
#[command(
    name = "sigbsg",
    about = "Signaling Stackelberg game solvers and simulators",
    long_about = None,
    after_help = SCHEMA_HELP,
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// Baseline equilibrium without signaling (multiple LPs).
    Bse,
    /// Optimal incentive-compatible signaling commitment (one LP).
    Iclp,
    /// Epsilon-optimal signaling commitment under misreporting.
    Eps,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    /// Follow-the-leader over incentive-compatible commitments.
    FtlIc,
    /// Multiplicative weights over the finite arm set.
    Hedge,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a game and write the result as JSON.
    Solve {
        /// Path to a game-spec JSON document.
        #[arg(long)]
        game: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Optimality slack for eps mode.
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        /// Output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate repeated play and write trace CSV plus a summary JSON.
    Simulate {
        #[arg(long)]
        game: PathBuf,
        #[arg(long, value_enum)]
        algo: Algo,
        #[arg(long)]
        rounds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Hedge learning rate (defaults to sqrt(8 ln A / T)).
        #[arg(long)]
        eta: Option<f64>,
        /// Rounds between LP re-solves for ftl-ic.
        #[arg(long, default_value_t = 1)]
        resolve_period: usize,
        /// Trace CSV output path (omitted: no trace file).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Summary JSON output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump the belief atlas and reporting-partition diagnostics.
    Inspect {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the bundled market-entry example end to end.
    Example,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        // Bad flags and malformed values are validation errors (exit 1).
        Err(e) => {
            let payload = serde_json::json!({
                "error": {"kind": "validation", "message": e.to_string()}
            });
            eprintln!("{payload}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let payload = serde_json::json!({
                "error": {"kind": err.kind, "message": err.message}
            });
            eprintln!("{payload}");
            ExitCode::from(err.code)
        }
    }
}

struct CliError {
    code: u8,
    kind: &'static str,
    message: String,
}

impl CliError {
    fn validation(message: impl Into<String>) -> Self {
        CliError { code: 1, kind: "validation", message: message.into() }
    }

    fn solver(message: impl Into<String>) -> Self {
        CliError { code: 2, kind: "solver", message: message.into() }
    }
}

fn load(path: &Path) -> Result<Game, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    load_game(&text).map_err(|e| CliError::validation(e.to_string()))
}

/// Writes atomically: temp file in the target directory, then rename.
fn write_artifact(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
    let tmp = dir.join(format!(".{name}.tmp"));
    let write = |p: &Path| -> std::io::Result<()> {
        let mut f = fs::File::create(p)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()
    };
    write(&tmp)
        .and_then(|_| fs::rename(&tmp, path))
        .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))
}

fn emit(out: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_artifact(path, contents),
        None => {
            println!("{contents}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { game, mode, eps, out } => {
            let game = load(&game)?;
            let result = match mode {
                Mode::Bse => solve_bse(&game),
                Mode::Iclp => solve_sig_lp(&game, game.prior()),
                Mode::Eps => {
                    if !(eps > 0.0) {
                        return Err(CliError::validation("--eps must be positive"));
                    }
                    solve_eps_equilibrium(&game, eps)
                }
            }
            .map_err(|e| CliError::solver(e.to_string()))?;
            let drift = verify_certificate(&game, &result);
            if drift > 1e-7 {
                return Err(CliError::solver(format!(
                    "certificate re-evaluation drifted by {drift}"
                )));
            }
            let json = serde_json::to_string_pretty(&result.to_json(&game)).unwrap();
            emit(out.as_deref(), &json)
        }
        Command::Simulate { game, algo, rounds, seed, eta, resolve_period, trace, out } => {
            let game = load(&game)?;
            let config = SimulationConfig {
                horizon: rounds,
                seed,
                algorithm: match algo {
                    Algo::FtlIc => Algorithm::FtlIc,
                    Algo::Hedge => Algorithm::Hedge,
                },
                eta,
                resolve_period,
            };
            let result = match algo {
                Algo::FtlIc => simulate_ftl_ic(&game, game.prior(), &config),
                Algo::Hedge => simulate_hedge(&game, game.prior(), &config),
            }
            .map_err(|e| CliError::solver(e.to_string()))?;
            if let Some(trace_path) = trace.as_deref() {
                write_artifact(trace_path, &result.to_csv())?;
            }
            let metrics = compute_metrics(&result, result.opt_value);
            let seed_metrics = serde_json::json!({
                "rounds": metrics.rounds,
                "total_payoff": metrics.total_payoff,
                "average_payoff": metrics.average_payoff,
                "gap": metrics.gap,
                "regret": metrics.regret,
            });
            let summary = serde_json::json!({
                "algorithm": match algo { Algo::FtlIc => "ftl-ic", Algo::Hedge => "hedge" },
                "rounds": rounds,
                "opt_value": result.opt_value,
                "per_seed": { seed.to_string(): seed_metrics },
                "aggregate": seed_metrics,
            });
            emit(out.as_deref(), &serde_json::to_string_pretty(&summary).unwrap())
        }
        Command::Inspect { game, out } => {
            let game = load(&game)?;
            let atlas = build_belief_atlas(&game).map_err(|e| CliError::solver(e.to_string()))?;
            let candidates = build_candidate_set(&game, &atlas, 1e-6)
                .map_err(|e| CliError::solver(e.to_string()))?;
            let mut pieces = Vec::new();
            for gamma in PartitionMap::all(game.k()) {
                let piece = partition_polytope(&game, &atlas, &gamma);
                let strict_interior = match strict_feasible_point(&piece) {
                    Ok(point) => point.is_some(),
                    Err(_) => false,
                };
                let members = candidates
                    .members
                    .iter()
                    .filter(|c| c.gamma == gamma)
                    .count();
                pieces.push(serde_json::json!({
                    "gamma": gamma.gamma(),
                    "strict_rows": (0..piece.num_rows()).filter(|&r| piece.row(r).2).count(),
                    "strict_interior": strict_interior,
                    "candidates": members,
                }));
            }
            let d = &candidates.diagnostics;
            let payload = serde_json::json!({
                "atlas": atlas.to_json(),
                "pieces": pieces,
                "candidates_total": candidates.members.len(),
                "delta": candidates.delta,
                "sup_estimate": candidates.sup_estimate,
                "pieces_empty": d.pieces_empty,
                "pieces_lp_fallback": d.pieces_lp_fallback,
            });
            emit(out.as_deref(), &serde_json::to_string_pretty(&payload).unwrap())
        }
        Command::Example => {
            let game = fixtures::market_entry();
            let bse = solve_bse(&game).map_err(|e| CliError::solver(e.to_string()))?;
            let sigma = market_entry_commitment();
            let pi = commitment_to_beliefs(&game, &sigma);
            let truthful = truthful_leader_objective(&game, &pi);
            let misreported = leader_objective(&game, &pi);
            let report_of_second = optimal_report(&game, &pi, 1);
            let ic = solve_sig_lp(&game, game.prior())
                .map_err(|e| CliError::solver(e.to_string()))?;
            let eps = solve_eps_equilibrium(&game, 1e-4)
                .map_err(|e| CliError::solver(e.to_string()))?;
            println!("market-entry example (two follower types, priors 0.55 / 0.45)");
            println!();
            println!("  baseline equilibrium value (no signaling)          {:.4}", bse.value);
            println!("  worked signaling scheme, truthful reporting        {truthful:.4}");
            println!("  worked signaling scheme, optimal misreporting      {misreported:.4}");
            println!(
                "    ({} misreports as {})",
                game.type_names()[1],
                game.type_names()[report_of_second]
            );
            println!("  optimal incentive-compatible commitment            {:.4}", ic.value);
            println!("  eps-optimal commitment under misreporting (1e-4)   {:.4}", eps.value);
            Ok(())
        }
    }
}
