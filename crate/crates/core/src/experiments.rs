//! Monte Carlo evaluation of decision policies on the driving scenarios.
//!
//! Episode `i` of a run draws from a ChaCha8 stream keyed by
//! `(master_seed, i)`, in a fixed order: EV position, EV speed, IV position,
//! IV speed, the joint-decision draw, then the IV draw. Every policy in a
//! comparison therefore sees the same initial conditions and the same IV
//! coin, and results do not depend on how episodes are scheduled across
//! threads.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical_game::{
    cg_epd_distribution, cg_ms_distribution, mixed_strategy, TwoPlayerGame,
};
use crate::clinalg::StateVector4;
use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::outcome::{JointOutcome, OutcomeDistribution, Player};
use crate::quantum_game::{
    num, parse_initial_state, preset, solve, EntanglementLevel, Preset, QuantumGameConfig,
    QuantumGate, Strategy,
};
use crate::scenario_sim::{
    run_episode, sample_initial, Baseline, Driver, EpisodeResult, ScenarioConfig, ScenarioKind,
};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959964;

pub const REPORT_HEADER: &str = "scenario,method,episodes,cr,sr,mean_headway_m,cr_ci95";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyName {
    #[serde(rename = "QG_U1_1")]
    QgU1_1,
    #[serde(rename = "QG_U1_2")]
    QgU1_2,
    #[serde(rename = "QG_G4")]
    QgG4,
    #[serde(rename = "CG_EPD")]
    CgEpd,
    #[serde(rename = "CG_MS")]
    CgMs,
    #[serde(rename = "IDM")]
    Idm,
    #[serde(rename = "MOBIL")]
    Mobil,
}

impl PolicyName {
    pub const ALL: [PolicyName; 7] = [
        PolicyName::QgU1_1,
        PolicyName::QgU1_2,
        PolicyName::QgG4,
        PolicyName::CgEpd,
        PolicyName::CgMs,
        PolicyName::Idm,
        PolicyName::Mobil,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PolicyName::QgU1_1 => "QG_U1_1",
            PolicyName::QgU1_2 => "QG_U1_2",
            PolicyName::QgG4 => "QG_G4",
            PolicyName::CgEpd => "CG_EPD",
            PolicyName::CgMs => "CG_MS",
            PolicyName::Idm => "IDM",
            PolicyName::Mobil => "MOBIL",
        }
    }

    pub fn baseline(self) -> Option<Baseline> {
        match self {
            PolicyName::Idm => Some(Baseline::Idm),
            PolicyName::Mobil => Some(Baseline::Mobil),
            _ => None,
        }
    }
}

impl fmt::Display for PolicyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PolicyName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        PolicyName::ALL
            .into_iter()
            .find(|p| p.label() == norm)
            .ok_or_else(|| Error::UnknownName {
                kind: "policy",
                name: s.to_string(),
            })
    }
}

/// What the EV assumes the IV's gate to be when evaluating QG-G4.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateModel {
    Fixed(QuantumGate),
    /// Equal-weight mixture over the five gates.
    Uniform,
}

impl Default for GateModel {
    fn default() -> Self {
        GateModel::Fixed(QuantumGate::PauliZ)
    }
}

impl FromStr for GateModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("uniform") {
            Ok(GateModel::Uniform)
        } else {
            s.trim().parse().map(GateModel::Fixed)
        }
    }
}

impl fmt::Display for GateModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateModel::Fixed(g) => write!(f, "{g}"),
            GateModel::Uniform => f.write_str("uniform"),
        }
    }
}

/// How a joint outcome distribution turns into the episode's two actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMode {
    /// One draw from the joint distribution.
    #[default]
    Joint,
    /// EV action from its marginal, IV action from an independent fair coin.
    Marginal,
}

impl FromStr for SamplingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "joint" => Ok(SamplingMode::Joint),
            "marginal" => Ok(SamplingMode::Marginal),
            _ => Err(Error::UnknownName {
                kind: "sampling mode",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicySpec {
    pub name: PolicyName,
    /// Circuit input for quantum policies; preset default when `None`
    /// (equal superposition for QG-U1, `e_s10` for QG-G4).
    pub initial: Option<StateVector4>,
    pub assumed_gate: GateModel,
    /// EV gate for QG-G4.
    pub ev_gate: QuantumGate,
    pub sampling: SamplingMode,
}

impl PolicySpec {
    pub fn new(name: PolicyName) -> Self {
        Self {
            name,
            initial: None,
            assumed_gate: GateModel::default(),
            ev_gate: QuantumGate::Identity,
            sampling: SamplingMode::default(),
        }
    }

    pub fn check_scenario(&self, kind: ScenarioKind) -> Result<()> {
        match self.name.baseline() {
            Some(b) if b.scenario() != kind => Err(Error::InvalidPolicy {
                policy: self.name.to_string(),
                scenario: kind.to_string(),
            }),
            _ => Ok(()),
        }
    }

    /// Joint outcome distribution for game-based policies, `None` for the
    /// rule-based baselines.
    pub fn distribution(&self, game: &TwoPlayerGame) -> Result<Option<OutcomeDistribution>> {
        let quantum = |p: Preset,
                       initial: StateVector4,
                       b: Option<Strategy>|
         -> Result<OutcomeDistribution> {
            let cfg = preset(p).into_config(game.clone(), initial, b)?;
            Ok(solve(&cfg).distribution)
        };
        let equal = StateVector4::equal_superposition();
        let dist = match self.name {
            PolicyName::QgU1_1 => quantum(Preset::QgU1_1, self.initial.unwrap_or(equal), None)?,
            PolicyName::QgU1_2 => quantum(Preset::QgU1_2, self.initial.unwrap_or(equal), None)?,
            PolicyName::QgG4 => {
                let initial = self.initial.unwrap_or(StateVector4::basis(2));
                let with = |g: QuantumGate| -> Result<OutcomeDistribution> {
                    let cfg = QuantumGameConfig::new(
                        game.clone(),
                        initial,
                        EntanglementLevel::MAX,
                        Strategy::Gate(self.ev_gate),
                        Strategy::Gate(g),
                    )?;
                    Ok(solve(&cfg).distribution)
                };
                match self.assumed_gate {
                    GateModel::Fixed(g) => with(g)?,
                    GateModel::Uniform => {
                        let dists = QuantumGate::ALL
                            .iter()
                            .map(|&g| with(g))
                            .collect::<Result<Vec<_>>>()?;
                        OutcomeDistribution::mixture(&dists)?
                    }
                }
            }
            PolicyName::CgEpd => cg_epd_distribution(),
            PolicyName::CgMs => cg_ms_distribution(&mixed_strategy(game)?),
            PolicyName::Idm | PolicyName::Mobil => return Ok(None),
        };
        Ok(Some(dist))
    }
}

/// Maps two uniform draws onto a joint outcome. `u_iv` is used only in
/// marginal mode.
pub fn decide_joint(
    dist: &OutcomeDistribution,
    mode: SamplingMode,
    u_joint: f64,
    u_iv: f64,
) -> JointOutcome {
    match mode {
        SamplingMode::Joint => dist.sample(u_joint),
        SamplingMode::Marginal => {
            let ev = usize::from(u_joint >= dist.marginal_zero(Player::A));
            let iv = usize::from(u_iv >= 0.5);
            JointOutcome::from_actions(ev, iv)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloConfig {
    pub scenario: ScenarioConfig,
    pub game: TwoPlayerGame,
    pub policy: PolicySpec,
    pub episodes: usize,
    pub master_seed: u64,
}

impl MonteCarloConfig {
    /// Uses the built-in payoff table matching the scenario kind.
    pub fn new(
        scenario: ScenarioConfig,
        policy: PolicySpec,
        episodes: usize,
        master_seed: u64,
    ) -> Self {
        let game = match scenario.kind {
            ScenarioKind::Merging => TwoPlayerGame::merging(),
            ScenarioKind::Roundabout => TwoPlayerGame::roundabout(),
        };
        Self {
            scenario,
            game,
            policy,
            episodes,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes < 1 {
            return Err(Error::InvalidConfig("episodes must be at least 1".into()));
        }
        self.scenario.validate()?;
        self.policy.check_scenario(self.scenario.kind)
    }

    /// Reads an experiment file. Required keys: `policy.name`,
    /// `scenario.kind`, `episodes`, `master_seed`. Optional: `game`,
    /// `policy.assumed_gate`, `policy.initial`, `policy.gate_a`,
    /// `policy.sampling`, and any `scenario.*` override.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        const POLICY_KEYS: [&str; 5] = [
            "policy.name",
            "policy.assumed_gate",
            "policy.initial",
            "policy.gate_a",
            "policy.sampling",
        ];
        for key in kv.keys() {
            let known = POLICY_KEYS.contains(&key)
                || key.starts_with("scenario.")
                || matches!(key, "episodes" | "master_seed" | "game");
            if !known {
                return Err(kv.error_at(key, format!("unknown key `{key}`")));
            }
        }
        let field = |key: &str, e: Error| kv.error_at(key, e.to_string());

        let kind: ScenarioKind = kv
            .require("scenario.kind")?
            .parse()
            .map_err(|e| field("scenario.kind", e))?;
        let mut scenario = ScenarioConfig::preset(kind);
        scenario.apply_overrides(kv, "scenario.")?;

        let mut policy = PolicySpec::new(
            kv.require("policy.name")?
                .parse()
                .map_err(|e| field("policy.name", e))?,
        );
        if let Some(v) = kv.get("policy.assumed_gate") {
            policy.assumed_gate = v.parse().map_err(|e| field("policy.assumed_gate", e))?;
        }
        if let Some(v) = kv.get("policy.gate_a") {
            policy.ev_gate = v.parse().map_err(|e| field("policy.gate_a", e))?;
        }
        if let Some(v) = kv.get("policy.sampling") {
            policy.sampling = v.parse().map_err(|e| field("policy.sampling", e))?;
        }
        if let Some(v) = kv.get("policy.initial") {
            policy.initial = Some(
                parse_initial_state(v)
                    .map_err(|e| field("policy.initial", e))?
                    .0,
            );
        }

        kv.require("episodes")?;
        kv.require("master_seed")?;
        let episodes = kv.parse_value::<usize>("episodes")?.unwrap_or_default();
        let master_seed = kv.parse_value::<u64>("master_seed")?.unwrap_or_default();
        let mut cfg = Self::new(scenario, policy, episodes, master_seed);
        if let Some(g) = kv.get("game") {
            cfg.game = TwoPlayerGame::resolve(g).map_err(|e| field("game", e))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_key_values(&KeyValues::read(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub scenario: ScenarioKind,
    pub method: String,
    pub cr: f64,
    pub sr: f64,
    /// Step-weighted over all non-colliding post-decision steps.
    pub mean_headway: f64,
    pub episodes: usize,
    pub wilson_ci_halfwidth: f64,
    /// Episodes per joint outcome, `s00..s11`.
    pub outcome_counts: [usize; 4],
}

impl MetricsSummary {
    pub fn outcome_frequency(&self, j: JointOutcome) -> f64 {
        self.outcome_counts[j.index()] as f64 / self.episodes as f64
    }
}

/// Half-width of the Wilson score interval for `successes / n`.
pub fn wilson_halfwidth(successes: usize, n: usize, z: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()
}

/// Generator for episode `index` of a run seeded with `master_seed`.
pub fn episode_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

fn run_one(
    cfg: &MonteCarloConfig,
    dist: Option<&OutcomeDistribution>,
    index: u64,
) -> Result<EpisodeResult> {
    let mut rng = episode_rng(cfg.master_seed, index);
    let initial = sample_initial(&cfg.scenario, &mut rng);
    let u_joint: f64 = rng.gen();
    let u_iv: f64 = rng.gen();
    match (dist, cfg.policy.name.baseline()) {
        (Some(d), _) => {
            let mode = cfg.policy.sampling;
            let mut decide = |step: usize| {
                if step == 0 {
                    decide_joint(d, mode, u_joint, u_iv)
                } else {
                    let (a, b) = (rng.gen(), rng.gen());
                    decide_joint(d, mode, a, b)
                }
            };
            run_episode(&cfg.scenario, initial, Driver::Game(&mut decide))
        }
        (None, Some(controller)) => {
            let iv_action = usize::from(u_iv >= 0.5);
            run_episode(
                &cfg.scenario,
                initial,
                Driver::Baseline {
                    controller,
                    iv_action,
                },
            )
        }
        (None, None) => unreachable!("game policies always produce a distribution"),
    }
}

/// Re-runs episode `index` of a Monte Carlo configuration, trace included.
pub fn replay_episode(cfg: &MonteCarloConfig, index: u64) -> Result<EpisodeResult> {
    cfg.validate()?;
    let dist = cfg.policy.distribution(&cfg.game)?;
    run_one(cfg, dist.as_ref(), index)
}

pub fn run_monte_carlo(cfg: &MonteCarloConfig) -> Result<MetricsSummary> {
    cfg.validate()?;
    let dist = cfg.policy.distribution(&cfg.game)?;
    let tallies = (0..cfg.episodes as u64)
        .into_par_iter()
        .map(|i| {
            let r = run_one(cfg, dist.as_ref(), i)?;
            Ok((
                r.collided,
                r.success,
                r.headway_sum,
                r.headway_samples,
                r.outcome,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut collisions = 0;
    let mut successes = 0;
    let mut headway_sum = 0.0;
    let mut headway_samples = 0;
    let mut outcome_counts = [0usize; 4];
    for &(collided, success, sum, samples, outcome) in &tallies {
        collisions += usize::from(collided);
        successes += usize::from(success);
        headway_sum += sum;
        headway_samples += samples;
        outcome_counts[outcome.index()] += 1;
    }
    let n = cfg.episodes;
    Ok(MetricsSummary {
        scenario: cfg.scenario.kind,
        method: cfg.policy.name.to_string(),
        cr: collisions as f64 / n as f64,
        sr: successes as f64 / n as f64,
        mean_headway: if headway_samples == 0 {
            0.0
        } else {
            headway_sum / headway_samples as f64
        },
        episodes: n,
        wilson_ci_halfwidth: wilson_halfwidth(collisions, n, Z_95),
        outcome_counts,
    })
}

/// One summary per policy over the same episode seeds.
pub fn run_comparison(
    scenario: &ScenarioConfig,
    policies: &[PolicySpec],
    episodes: usize,
    master_seed: u64,
) -> Result<Vec<MetricsSummary>> {
    if policies.is_empty() {
        return Err(Error::InvalidConfig(
            "at least one policy is required".into(),
        ));
    }
    policies
        .iter()
        .map(|p| run_monte_carlo(&MonteCarloConfig::new(*scenario, *p, episodes, master_seed)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::UnknownName {
                kind: "format",
                name: s.to_string(),
            }),
        }
    }
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

pub fn write_report<W: Write>(
    out: &mut W,
    rows: &[MetricsSummary],
    format: ReportFormat,
) -> std::io::Result<()> {
    match format {
        ReportFormat::Csv => {
            writeln!(out, "{REPORT_HEADER}")?;
            for r in rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.scenario,
                    r.method,
                    r.episodes,
                    num(r.cr),
                    num(r.sr),
                    num(r.mean_headway),
                    num(r.wilson_ci_halfwidth)
                )?;
            }
            Ok(())
        }
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut *out, rows)?;
            writeln!(out)
        }
    }
}

pub fn emit_report(rows: &[MetricsSummary], format: ReportFormat, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_report(&mut buf, rows, format).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn parse_json_report(text: &str) -> Result<Vec<MetricsSummary>> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        origin: "report".into(),
        line: e.line(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario_sim::run_fixed;

    fn policy(name: PolicyName) -> PolicySpec {
        PolicySpec::new(name)
    }

    #[test]
    fn policy_names_parse() {
        assert_eq!("qg-u1-1".parse::<PolicyName>().unwrap(), PolicyName::QgU1_1);
        assert_eq!("CG_MS".parse::<PolicyName>().unwrap(), PolicyName::CgMs);
        assert!("QG_U2".parse::<PolicyName>().is_err());
        assert_eq!("uniform".parse::<GateModel>().unwrap(), GateModel::Uniform);
        assert_eq!(
            "Z".parse::<GateModel>().unwrap(),
            GateModel::Fixed(QuantumGate::PauliZ)
        );
    }

    #[test]
    fn policy_distributions() {
        let g = TwoPlayerGame::merging();
        let d = |n| policy(n).distribution(&g).unwrap().unwrap();
        assert!((d(PolicyName::QgU1_1).marginal_zero(Player::A) - 1.0).abs() < 1e-12);
        assert!((d(PolicyName::QgU1_1).p00() - 0.5).abs() < 1e-12);
        assert!((d(PolicyName::QgU1_2).p00() - 0.25).abs() < 1e-12);
        assert!((d(PolicyName::CgMs).marginal_zero(Player::A) - 9.0 / 13.0).abs() < 1e-12);
        assert!((d(PolicyName::QgG4).p01() - 1.0).abs() < 1e-9);
        let mut uniform = policy(PolicyName::QgG4);
        uniform.assumed_gate = GateModel::Uniform;
        assert!((uniform.distribution(&g).unwrap().unwrap().p00() - 0.2).abs() < 1e-9);
        assert!(policy(PolicyName::Mobil)
            .distribution(&g)
            .unwrap()
            .is_none());
    }

    #[test]
    fn marginal_sampling_draws_iv_from_coin() {
        let d = OutcomeDistribution::certain(JointOutcome::S01);
        assert_eq!(
            decide_joint(&d, SamplingMode::Joint, 0.9, 0.1),
            JointOutcome::S01
        );
        assert_eq!(
            decide_joint(&d, SamplingMode::Marginal, 0.9, 0.1),
            JointOutcome::S00
        );
        assert_eq!(
            decide_joint(&d, SamplingMode::Marginal, 0.9, 0.7),
            JointOutcome::S01
        );
    }

    #[test]
    fn wilson_reference_values() {
        // 50/100 with z = 1.96: half-width 0.096170; 0/10 stays non-degenerate.
        assert!((wilson_halfwidth(50, 100, 1.96) - 0.096170).abs() < 1e-6);
        assert!(wilson_halfwidth(0, 10, Z_95) > 0.1);
    }

    #[test]
    fn single_episode_matches_direct_run() {
        let cfg =
            MonteCarloConfig::new(ScenarioConfig::merging(), policy(PolicyName::CgEpd), 1, 42);
        let summary = run_monte_carlo(&cfg).unwrap();

        let mut rng = episode_rng(42, 0);
        let initial = sample_initial(&cfg.scenario, &mut rng);
        let u: f64 = rng.gen();
        let joint = cg_epd_distribution().sample(u);
        let direct = run_fixed(&cfg.scenario, initial, joint).unwrap();
        assert_eq!(summary.cr, f64::from(u8::from(direct.collided)));
        assert_eq!(summary.sr, f64::from(u8::from(direct.success)));
        assert_eq!(summary.mean_headway, direct.mean_headway);
        assert_eq!(summary.outcome_counts[joint.index()], 1);
    }

    #[test]
    fn baselines_rejected_on_wrong_scenario() {
        let cfg = MonteCarloConfig::new(ScenarioConfig::merging(), policy(PolicyName::Idm), 10, 1);
        assert!(matches!(
            run_monte_carlo(&cfg),
            Err(Error::InvalidPolicy { .. })
        ));
        let cfg = MonteCarloConfig::new(ScenarioConfig::merging(), policy(PolicyName::CgEpd), 0, 1);
        assert!(matches!(
            run_monte_carlo(&cfg),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn empty_report_is_header_only() {
        let mut buf = Vec::new();
        write_report(&mut buf, &[], ReportFormat::Csv).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            format!("{REPORT_HEADER}\n")
        );
    }

    #[test]
    fn config_file() {
        let text =
            "policy.name = QG_G4\npolicy.assumed_gate = uniform\nscenario.kind = roundabout\n\
                    scenario.horizon = 80\nepisodes = 25\nmaster_seed = 7\n";
        let cfg =
            MonteCarloConfig::from_key_values(&KeyValues::parse("exp", text).unwrap()).unwrap();
        assert_eq!(cfg.policy.assumed_gate, GateModel::Uniform);
        assert_eq!(cfg.scenario.kind, ScenarioKind::Roundabout);
        assert_eq!(cfg.scenario.horizon, 80);
        assert_eq!(cfg.game, TwoPlayerGame::roundabout());
        assert_eq!((cfg.episodes, cfg.master_seed), (25, 7));

        let missing = KeyValues::parse(
            "exp",
            "policy.name = CG_MS\nscenario.kind = merging\nepisodes = 3",
        )
        .unwrap();
        assert!(MonteCarloConfig::from_key_values(&missing).is_err());
        let typo = KeyValues::parse("exp", "policy.nmae = CG_MS").unwrap();
        assert!(MonteCarloConfig::from_key_values(&typo).is_err());
    }
}
