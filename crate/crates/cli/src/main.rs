mod commands;
mod parse;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Quantum and classical game models for two-vehicle driving decisions.
#[derive(Debug, Parser)]
#[command(name = "qgame", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pure Nash equilibria and the interior mixed equilibrium of a 2x2 game.
    Equilibria(EquilibriaArgs),
    /// Outcome distribution and expected payoffs for one configuration.
    Solve(SolveArgs),
    /// Payoff surface over (gamma, theta) or the gate-vs-gate table.
    Sweep(SweepArgs),
    /// Monte Carlo comparison of policies on a driving scenario.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct EquilibriaArgs {
    /// Built-in game (`merging`, `roundabout`) or a game file.
    #[arg(long, default_value = "merging")]
    game: String,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// qg-u1, qg-u1-1, qg-u1-2, qg-g4, cg-epd or cg-ms.
    #[arg(long)]
    model: String,
    #[arg(long, default_value = "merging")]
    game: String,
    /// `equal`, `s00`..`s11`, or eight comma-separated re/im components.
    #[arg(long)]
    initial: Option<String>,
    #[arg(long, value_parser = parse::angle, allow_hyphen_values = true)]
    gamma: Option<f64>,
    #[arg(long, value_parser = parse::angle, allow_hyphen_values = true)]
    theta_a: Option<f64>,
    #[arg(long, value_parser = parse::angle, allow_hyphen_values = true)]
    theta_b: Option<f64>,
    #[arg(long, value_parser = parse::angle, allow_hyphen_values = true)]
    phi_a: Option<f64>,
    #[arg(long, value_parser = parse::angle, allow_hyphen_values = true)]
    phi_b: Option<f64>,
    /// Gate for the ego vehicle: H, X, Y, Z or I.
    #[arg(long)]
    gate_a: Option<String>,
    /// Gate for the interacting vehicle.
    #[arg(long)]
    gate_b: Option<String>,
    /// Also write the result as JSON to this file.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepModel {
    #[value(name = "qg-u1")]
    QgU1,
    #[value(name = "qg-g4")]
    QgG4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ThetaMode {
    /// theta_a = theta_b.
    EqualThetas,
    /// theta_b fixed at 0.
    ThetaBZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, value_enum, default_value = "qg-u1")]
    model: SweepModel,
    #[arg(long, default_value = "merging")]
    game: String,
    #[arg(long)]
    initial: Option<String>,
    #[arg(long, value_enum, default_value = "theta-b-zero")]
    mode: ThetaMode,
    #[arg(long, default_value_t = 101)]
    gamma_steps: usize,
    #[arg(long, default_value_t = 101)]
    theta_steps: usize,
    /// Phase shared by both rotations.
    #[arg(long, value_parser = parse::angle, default_value = "0", allow_hyphen_values = true)]
    phi: f64,
    /// Entanglement level for the gate table.
    #[arg(long, value_parser = parse::angle, default_value = "pi/2")]
    gamma: f64,
    /// Output file; defaults to a name under $QGAME_OUTPUT_DIR or the
    /// working directory.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Experiment file with `policy.*`, `scenario.*`, `episodes` and
    /// `master_seed` keys. Flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `merging` or `roundabout`.
    #[arg(long)]
    scenario: Option<String>,
    /// Comma-separated policy names, e.g. `cg-epd,cg-ms,qg-g4`.
    #[arg(long)]
    policies: Option<String>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Opponent gate assumed by QG-G4: a gate name or `uniform`.
    #[arg(long)]
    assumed_gate: Option<String>,
    /// `joint` or `marginal`.
    #[arg(long)]
    sampling: Option<String>,
    /// Circuit input for the quantum policies.
    #[arg(long)]
    initial: Option<String>,
    /// Also write the trace of episode 0 of the first policy.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Equilibria(a) => commands::equilibria(&a),
        Command::Solve(a) => commands::solve(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Simulate(a) => commands::simulate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
