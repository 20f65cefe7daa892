use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use qgame_core::classical_game::{
    cg_epd_distribution, cg_ms_distribution, has_diagonal_dilemma, mixed_strategy,
    pure_nash_equilibria, TwoPlayerGame,
};
use qgame_core::clinalg::StateVector4;
use qgame_core::experiments::{
    replay_episode, run_monte_carlo, write_report, MetricsSummary, MonteCarloConfig, PolicyName,
    PolicySpec, ReportFormat,
};
use qgame_core::kv::KeyValues;
use qgame_core::outcome::{JointOutcome, OutcomeDistribution, Player};
use qgame_core::quantum_game::{
    expected_payoff, extremum, parse_initial_state, preset, solve as solve_circuit, sweep_g4,
    sweep_u1, write_gate_table_csv, write_sweep_csv, EntanglementLevel, ExtremumKind, Preset,
    QuantumGameConfig, QuantumGate, Strategy, StrategyU, SweepGrid, SweepMode,
};
use qgame_core::scenario_sim::{write_trace_csv, ScenarioConfig, ScenarioKind};
use qgame_core::Error;
use serde_json::json;

use crate::parse;
use crate::{EquilibriaArgs, Format, SimulateArgs, SolveArgs, SweepArgs, SweepModel, ThetaMode};

pub const OUTPUT_DIR_ENV: &str = "QGAME_OUTPUT_DIR";

/// Deviation above which an explicit initial state triggers a warning.
const NORMALIZATION_WARN: f64 = 1e-6;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_usage() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

type CmdResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn write_file(path: &Path, bytes: &[u8]) -> CmdResult {
    fs::write(path, bytes).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

/// `explicit`, or `default_name` under `$QGAME_OUTPUT_DIR` (created on
/// demand) or the working directory.
fn output_path(explicit: &Option<PathBuf>, default_name: &str) -> Result<PathBuf, Failure> {
    if let Some(p) = explicit {
        return Ok(p.clone());
    }
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => {
            let dir = PathBuf::from(dir);
            fs::create_dir_all(&dir)
                .map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
            Ok(dir.join(default_name))
        }
        _ => Ok(PathBuf::from(default_name)),
    }
}

/// Console number: rounded to 12 decimals, trailing zeros dropped.
fn show(x: f64) -> String {
    let s = format!("{x:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn initial_state(text: Option<&str>, default: StateVector4) -> Result<StateVector4, Failure> {
    let Some(t) = text else { return Ok(default) };
    let (psi, dev) = parse_initial_state(t)?;
    if dev > NORMALIZATION_WARN {
        eprintln!("warning: initial state rescaled to unit norm (|norm^2 - 1| = {dev:.3e})");
    }
    Ok(psi)
}

fn print_distribution(d: &OutcomeDistribution) {
    for j in JointOutcome::ALL {
        println!("P({j})     {}", show(d.prob(j)));
    }
}

pub fn equilibria(a: &EquilibriaArgs) -> CmdResult {
    let game = TwoPlayerGame::resolve(&a.game)?;
    let ne = pure_nash_equilibria(&game);
    let labels: Vec<&str> = ne.iter().map(|j| j.label()).collect();
    println!("game      {}", a.game);
    println!("pure NE   {{{}}}", labels.join(", "));
    if has_diagonal_dilemma(&game) {
        println!("dilemma   both equilibria lie on the anti-diagonal; neither is selected by payoff dominance");
    }
    match mixed_strategy(&game) {
        Ok(ms) => println!("mixed     p = {}, q = {}", show(ms.p), show(ms.q)),
        Err(Error::NoInteriorEquilibrium { p, q }) => {
            println!(
                "mixed     none in the interior (p = {}, q = {})",
                show(p),
                show(q)
            )
        }
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

fn gate_flag(text: &Option<String>) -> Result<Option<QuantumGate>, Failure> {
    text.as_deref()
        .map(|g| g.parse::<QuantumGate>())
        .transpose()
        .map_err(Failure::from)
}

/// Strategy for one player: an explicit gate, explicit angles, or the
/// model's default.
fn player_strategy(
    who: &str,
    gate: Option<QuantumGate>,
    theta: Option<f64>,
    phi: Option<f64>,
    default: Strategy,
) -> Result<Strategy, Failure> {
    match (gate, theta.is_some() || phi.is_some()) {
        (Some(_), true) => Err(usage(format!(
            "--gate-{who} cannot be combined with --theta-{who}/--phi-{who}"
        ))),
        (Some(g), false) => Ok(Strategy::Gate(g)),
        (None, true) => {
            let (t0, p0) = match default {
                Strategy::Unitary(u) => (u.theta(), u.phi()),
                Strategy::Gate(_) => (0.0, 0.0),
            };
            Ok(Strategy::Unitary(StrategyU::new(
                theta.unwrap_or(t0),
                phi.unwrap_or(p0),
            )?))
        }
        (None, false) => Ok(default),
    }
}

pub fn solve(a: &SolveArgs) -> CmdResult {
    let game = TwoPlayerGame::resolve(&a.game)?;
    let model = a.model.to_ascii_lowercase().replace('_', "-");

    let classical = match model.as_str() {
        "cg-epd" => Some(cg_epd_distribution()),
        "cg-ms" => Some(cg_ms_distribution(&mixed_strategy(&game)?)),
        _ => None,
    };
    if let Some(dist) = classical {
        let quantum_flags = a.initial.is_some()
            || a.gamma.is_some()
            || a.theta_a.is_some()
            || a.theta_b.is_some()
            || a.phi_a.is_some()
            || a.phi_b.is_some()
            || a.gate_a.is_some()
            || a.gate_b.is_some();
        if quantum_flags {
            return Err(usage(format!("{model} takes no circuit parameters")));
        }
        return report_solution(a, &model, None, &dist, &game);
    }

    let zero = Strategy::Unitary(StrategyU::new(0.0, 0.0)?);
    let equal = StateVector4::equal_superposition();
    let (gamma0, a0, b0, psi0) = match model.as_str() {
        "qg-u1" => (0.0, zero, zero, equal),
        "qg-u1-1" | "qg-u1-2" | "qg-g4" => {
            let p: Preset = model.parse()?;
            let t = preset(p);
            let b = t.strategy_b.unwrap_or(Strategy::Gate(QuantumGate::PauliZ));
            let psi = if p == Preset::QgG4 {
                StateVector4::basis(2)
            } else {
                equal
            };
            (t.gamma.gamma(), t.strategy_a, b, psi)
        }
        _ => {
            return Err(Error::UnknownName {
                kind: "model",
                name: a.model.clone(),
            }
            .into())
        }
    };
    let gamma = EntanglementLevel::new(a.gamma.unwrap_or(gamma0))?;
    let sa = player_strategy("a", gate_flag(&a.gate_a)?, a.theta_a, a.phi_a, a0)?;
    let sb = player_strategy("b", gate_flag(&a.gate_b)?, a.theta_b, a.phi_b, b0)?;
    let psi = initial_state(a.initial.as_deref(), psi0)?;
    let cfg = QuantumGameConfig::new(game.clone(), psi, gamma, sa, sb)?;
    let sol = solve_circuit(&cfg);
    report_solution(a, &model, Some(&cfg), &sol.distribution, &game)
}

fn describe(s: &Strategy) -> String {
    match s {
        Strategy::Gate(g) => format!("gate {g}"),
        Strategy::Unitary(u) => format!("U(theta = {}, phi = {})", show(u.theta()), show(u.phi())),
    }
}

fn report_solution(
    a: &SolveArgs,
    model: &str,
    cfg: Option<&QuantumGameConfig>,
    dist: &OutcomeDistribution,
    game: &TwoPlayerGame,
) -> CmdResult {
    let eu_a = expected_payoff(dist, game, Player::A);
    let eu_b = expected_payoff(dist, game, Player::B);
    println!("model      {model}");
    println!("game       {}", a.game);
    if let Some(c) = cfg {
        println!("gamma      {}", show(c.gamma.gamma()));
        println!("EV         {}", describe(&c.strategy(Player::A)));
        println!("IV         {}", describe(&c.strategy(Player::B)));
    }
    print_distribution(dist);
    println!("E(u_EV)    {}", show(eu_a));
    println!("E(u_IV)    {}", show(eu_b));

    if let Some(path) = &a.json {
        let mut doc = json!({
            "model": model,
            "game": a.game,
            "distribution": dist.probabilities(),
            "eu_ev": eu_a,
            "eu_iv": eu_b,
        });
        if let Some(c) = cfg {
            doc["gamma"] = json!(c.gamma.gamma());
            doc["strategy_ev"] = json!(c.strategy(Player::A));
            doc["strategy_iv"] = json!(c.strategy(Player::B));
        }
        let text = serde_json::to_string_pretty(&doc).expect("JSON value serializes") + "\n";
        write_file(path, text.as_bytes())?;
    }
    Ok(())
}

pub fn sweep(a: &SweepArgs) -> CmdResult {
    let game = TwoPlayerGame::resolve(&a.game)?;
    let ext = match a.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let mut buf = Vec::new();
    let path = match a.model {
        SweepModel::QgU1 => {
            let psi = initial_state(a.initial.as_deref(), StateVector4::equal_superposition())?;
            let mut grid = SweepGrid::new(a.gamma_steps, a.theta_steps)?;
            grid.phi = a.phi;
            let (mode, tag) = match a.mode {
                ThetaMode::EqualThetas => (SweepMode::EqualThetas, "equal-thetas"),
                ThetaMode::ThetaBZero => (SweepMode::ThetaBZero, "theta-b-zero"),
            };
            let rows = sweep_u1(&game, &psi, grid, mode)?;
            for (label, kind) in [("argmax", ExtremumKind::Max), ("argmin", ExtremumKind::Min)] {
                let e = extremum(&rows, kind).expect("grid has at least four points");
                println!(
                    "{label}  gamma = {}, theta_a = {}, theta_b = {}, E(u_EV) = {} ({} tied grid points)",
                    show(e.row.gamma),
                    show(e.row.theta_a),
                    show(e.row.theta_b),
                    show(e.row.eu_a),
                    e.ties
                );
            }
            match a.format {
                Format::Csv => write_sweep_csv(&mut buf, &rows).expect("writing to memory"),
                Format::Json => {
                    serde_json::to_writer_pretty(&mut buf, &rows).expect("writing to memory")
                }
            }
            output_path(&a.output, &format!("sweep_qg-u1_{tag}.{ext}"))?
        }
        SweepModel::QgG4 => {
            let psi = initial_state(a.initial.as_deref(), StateVector4::basis(2))?;
            let table = sweep_g4(&game, &psi, EntanglementLevel::new(a.gamma)?);
            println!(
                "E(u_EV) at gamma = {}, rows = EV gate, columns = IV gate",
                show(table.gamma)
            );
            let head: Vec<String> = QuantumGate::ALL
                .iter()
                .map(|g| format!("{:>8}", g.to_string()))
                .collect();
            println!("   {}", head.join(""));
            for g in QuantumGate::ALL {
                let cells: Vec<String> = table
                    .row_a(g)
                    .iter()
                    .map(|x| format!("{:>8}", show(*x)))
                    .collect();
                println!("{:>2} {}", g.to_string(), cells.join(""));
            }
            match a.format {
                Format::Csv => write_gate_table_csv(&mut buf, &table).expect("writing to memory"),
                Format::Json => {
                    serde_json::to_writer_pretty(&mut buf, &table).expect("writing to memory")
                }
            }
            output_path(&a.output, &format!("gates_qg-g4.{ext}"))?
        }
    };
    if a.format == Format::Json {
        buf.push(b'\n');
    }
    write_file(&path, &buf)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn default_policies(kind: ScenarioKind) -> Vec<PolicyName> {
    let baseline = match kind {
        ScenarioKind::Merging => PolicyName::Mobil,
        ScenarioKind::Roundabout => PolicyName::Idm,
    };
    vec![
        PolicyName::CgEpd,
        PolicyName::CgMs,
        PolicyName::QgU1_1,
        PolicyName::QgU1_2,
        PolicyName::QgG4,
        baseline,
    ]
}

pub fn simulate(a: &SimulateArgs) -> CmdResult {
    let from_file = match &a.config {
        Some(path) => Some(MonteCarloConfig::from_key_values(&KeyValues::read(path)?)?),
        None => None,
    };
    let kind = match (&a.scenario, &from_file) {
        (Some(s), _) => s.parse::<ScenarioKind>()?,
        (None, Some(c)) => c.scenario.kind,
        (None, None) => ScenarioKind::Merging,
    };
    let mut base = match &from_file {
        Some(c) if c.scenario.kind == kind => c.clone(),
        Some(c) => MonteCarloConfig::new(
            ScenarioConfig::preset(kind),
            c.policy,
            c.episodes,
            c.master_seed,
        ),
        None => MonteCarloConfig::new(
            ScenarioConfig::preset(kind),
            PolicySpec::new(PolicyName::CgEpd),
            1000,
            0,
        ),
    };
    if let Some(n) = a.episodes {
        base.episodes = n;
    }
    if let Some(s) = a.seed {
        base.master_seed = s;
    }
    if let Some(g) = &a.assumed_gate {
        base.policy.assumed_gate = g.parse()?;
    }
    if let Some(s) = &a.sampling {
        base.policy.sampling = s.parse()?;
    }
    if let Some(t) = &a.initial {
        base.policy.initial = Some(initial_state(Some(t), StateVector4::equal_superposition())?);
    }

    let names: Vec<PolicyName> = match (&a.policies, &from_file) {
        (Some(list), _) => parse::list(list)
            .iter()
            .map(|n| n.parse::<PolicyName>())
            .collect::<Result<_, _>>()?,
        (None, Some(c)) => vec![c.policy.name],
        (None, None) => default_policies(kind),
    };
    if names.is_empty() {
        return Err(usage("--policies lists no policy"));
    }
    let configs: Vec<MonteCarloConfig> = names
        .iter()
        .map(|&name| MonteCarloConfig {
            policy: PolicySpec {
                name,
                ..base.policy
            },
            ..base.clone()
        })
        .collect();
    for c in &configs {
        c.validate()?;
    }

    let rows: Vec<MetricsSummary> = configs
        .iter()
        .map(run_monte_carlo)
        .collect::<Result<_, _>>()?;

    println!(
        "scenario {kind}, {} episodes, seed {}",
        base.episodes, base.master_seed
    );
    println!(
        "{:<9} {:>8} {:>8} {:>10} {:>9}",
        "method", "CR", "SR", "HD (m)", "CR ±95%"
    );
    for r in &rows {
        println!(
            "{:<9} {:>7.2}% {:>7.2}% {:>10.2} {:>8.2}%",
            r.method,
            100.0 * r.cr,
            100.0 * r.sr,
            r.mean_headway,
            100.0 * r.wilson_ci_halfwidth
        );
    }

    let format = match a.format {
        Format::Csv => ReportFormat::Csv,
        Format::Json => ReportFormat::Json,
    };
    let path = output_path(&a.output, &format!("report_{kind}.{}", format.extension()))?;
    let mut buf = Vec::new();
    write_report(&mut buf, &rows, format).expect("writing to memory");
    write_file(&path, &buf)?;
    println!("wrote {}", path.display());

    if let Some(trace_path) = &a.trace {
        let episode = replay_episode(&configs[0], 0)?;
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &episode.trace).expect("writing to memory");
        write_file(trace_path, &buf)?;
        println!(
            "wrote {} ({}, episode 0, {})",
            trace_path.display(),
            configs[0].policy.name,
            episode.outcome
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn console_numbers() {
        assert_eq!(show(0.6923076923076923), "0.692307692308");
        assert_eq!(show(10.0), "10");
        assert_eq!(show(9.999999999999998), "10");
        assert_eq!(show(-1e-17), "0");
        assert_eq!(show(0.5), "0.5");
    }

    #[test]
    fn core_errors_map_to_exit_codes() {
        let usage: Failure = Error::InvalidConfig("x".into()).into();
        assert_eq!(usage.exit_code(), 2);
        let io: Failure = Error::Io {
            path: "p".into(),
            source: std::io::Error::other("disk"),
        }
        .into();
        assert_eq!(io.exit_code(), 1);
    }
}
