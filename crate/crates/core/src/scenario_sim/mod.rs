//! Two-vehicle longitudinal scenarios: highway on-ramp merging and a
//! single-entry roundabout.
//!
//! Both vehicles share one longitudinal coordinate so that the conflict point
//! (merge point or roundabout entry) sits at the same `s` for each, and
//! headway is simply `|iv.s - ev.s|`. The ego vehicle (EV) starts on the ramp
//! or approach lane; the interacting vehicle (IV) starts on the main lane or
//! inside the roundabout.

pub mod idm;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::outcome::JointOutcome;
use crate::quantum_game::num;

pub use idm::{gap, idm_accel, mobil_decide, IdmParams, LaneDecision, MobilParams, Neighbors};

pub const TRACE_HEADER: &str = "t,ev_lane,ev_s,ev_v,iv_lane,iv_s,iv_v,headway";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Merging,
    Roundabout,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Merging => "merging",
            ScenarioKind::Roundabout => "roundabout",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "merging" | "merge" => Ok(ScenarioKind::Merging),
            "roundabout" => Ok(ScenarioKind::Roundabout),
            _ => Err(Error::UnknownName {
                kind: "scenario",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lane {
    Ramp,
    Main,
    Approach,
    Inside,
}

impl Lane {
    pub fn name(self) -> &'static str {
        match self {
            Lane::Ramp => "ramp",
            Lane::Main => "main",
            Lane::Approach => "approach",
            Lane::Inside => "inside",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub s: f64,
    pub v: f64,
    /// Acceleration applied over the step that produced this state.
    pub accel: f64,
    pub lane: Lane,
    pub length: f64,
}

impl VehicleState {
    pub fn new(s: f64, v: f64, lane: Lane, length: f64) -> Self {
        Self {
            s,
            v,
            accel: 0.0,
            lane,
            length,
        }
    }

    /// Constant-acceleration update over `dt`. When braking would reverse
    /// the vehicle it stops at the zero-speed point instead.
    pub fn advance(&self, accel: f64, dt: f64) -> Self {
        let v_end = self.v + accel * dt;
        let (s, v) = if v_end >= 0.0 {
            (self.s + self.v * dt + 0.5 * accel * dt * dt, v_end)
        } else {
            let t_stop = -self.v / accel;
            (self.s + 0.5 * self.v * t_stop, 0.0)
        };
        Self {
            s,
            v,
            accel,
            ..*self
        }
    }
}

/// Advances both vehicles by one step. Lane changes are applied separately
/// by the episode loop when the EV crosses the conflict point.
pub fn step(
    states: (VehicleState, VehicleState),
    accels: (f64, f64),
    dt: f64,
) -> (VehicleState, VehicleState) {
    (
        states.0.advance(accels.0, dt),
        states.1.advance(accels.1, dt),
    )
}

pub fn detect_collision(ev: &VehicleState, iv: &VehicleState) -> bool {
    ev.lane == iv.lane && (ev.s - iv.s).abs() < 0.5 * (ev.length + iv.length)
}

/// Closed interval `[lo, hi]`; `lo == hi` is allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::NonFinite("interval bound"));
        }
        if lo > hi {
            return Err(Error::InvalidConfig(format!("empty interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Maps `u ∈ [0, 1)` onto the interval; a zero-width interval returns its
    /// midpoint.
    pub fn at(&self, u: f64) -> f64 {
        if self.width() == 0.0 {
            self.midpoint()
        } else {
            self.lo + u * self.width()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialRange {
    pub position: Interval,
    pub speed: Interval,
}

/// `conflict_point` is the merge point (merging) or the entry line
/// (roundabout). `conflict_zone_length` is the usable ramp length past the
/// merge point, or the distance upstream of the entry in which circulating
/// traffic has priority.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub conflict_point: f64,
    pub conflict_zone_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionMode {
    /// One joint decision at `t = 0`.
    SingleShot,
    /// A fresh decision every `every` steps until the EV completes its
    /// maneuver.
    Replan { every: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub dt: f64,
    pub horizon: usize,
    pub ev_init: InitialRange,
    pub iv_init: InitialRange,
    pub geometry: Geometry,
    /// Magnitude of commanded Accelerate/Decelerate (m/s²).
    pub a_nom: f64,
    pub vehicle_length: f64,
    pub speed_limit: f64,
    /// Lead (m) the IV must have past the EV (merging) or past the entry
    /// (roundabout) before a yielding EV proceeds.
    pub merge_gap: f64,
    /// IDM baseline gap acceptance: smallest IV time-to-entry (s) the EV
    /// will enter in front of.
    pub critical_gap: f64,
    pub decision_mode: DecisionMode,
    pub idm: IdmParams,
    pub mobil: MobilParams,
}

impl ScenarioConfig {
    pub fn merging() -> Self {
        let speed_limit = 35.0;
        Self {
            kind: ScenarioKind::Merging,
            dt: 0.1,
            horizon: 150,
            ev_init: InitialRange {
                position: Interval {
                    lo: 105.0,
                    hi: 115.0,
                },
                speed: Interval { lo: 18.0, hi: 22.0 },
            },
            iv_init: InitialRange {
                position: Interval { lo: 80.0, hi: 88.0 },
                speed: Interval { lo: 18.0, hi: 22.0 },
            },
            geometry: Geometry {
                conflict_point: 120.0,
                conflict_zone_length: 150.0,
            },
            a_nom: 2.0,
            vehicle_length: 5.0,
            speed_limit,
            merge_gap: 10.0,
            critical_gap: 5.0,
            decision_mode: DecisionMode::SingleShot,
            idm: IdmParams::regular(speed_limit),
            mobil: MobilParams::default(),
        }
    }

    pub fn roundabout() -> Self {
        let speed_limit = 15.0;
        Self {
            kind: ScenarioKind::Roundabout,
            dt: 0.1,
            horizon: 150,
            ev_init: InitialRange {
                position: Interval {
                    lo: 105.0,
                    hi: 109.0,
                },
                speed: Interval { lo: 4.0, hi: 8.0 },
            },
            iv_init: InitialRange {
                position: Interval {
                    lo: 90.0,
                    hi: 100.0,
                },
                speed: Interval { lo: 6.0, hi: 10.0 },
            },
            geometry: Geometry {
                conflict_point: 140.0,
                conflict_zone_length: 8.0,
            },
            a_nom: 2.0,
            vehicle_length: 5.0,
            speed_limit,
            merge_gap: 10.0,
            critical_gap: 5.0,
            decision_mode: DecisionMode::SingleShot,
            idm: IdmParams::regular(speed_limit),
            mobil: MobilParams::default(),
        }
    }

    pub fn preset(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::Merging => Self::merging(),
            ScenarioKind::Roundabout => Self::roundabout(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {x}"
                )))
            }
        };
        positive("dt", self.dt)?;
        positive("a_nom", self.a_nom)?;
        positive("vehicle_length", self.vehicle_length)?;
        positive("speed_limit", self.speed_limit)?;
        positive("conflict_zone_length", self.geometry.conflict_zone_length)?;
        positive("critical_gap", self.critical_gap)?;
        if self.horizon < 1 {
            return Err(Error::InvalidConfig(
                "horizon must be at least 1 step".into(),
            ));
        }
        if !(self.merge_gap.is_finite() && self.merge_gap >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "merge_gap must be non-negative, got {}",
                self.merge_gap
            )));
        }
        if !self.geometry.conflict_point.is_finite() {
            return Err(Error::NonFinite("conflict_point"));
        }
        for (what, r) in [("ev", &self.ev_init), ("iv", &self.iv_init)] {
            for iv in [r.position, r.speed] {
                Interval::new(iv.lo, iv.hi)
                    .map_err(|e| Error::InvalidConfig(format!("{what} range: {e}")))?;
            }
            if r.speed.lo < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "{what} speed range must be non-negative"
                )));
            }
        }
        if let DecisionMode::Replan { every: 0 } = self.decision_mode {
            return Err(Error::InvalidConfig(
                "replan interval must be at least 1 step".into(),
            ));
        }
        if !self.idm.is_valid() {
            return Err(Error::InvalidConfig(
                "IDM parameters must be positive".into(),
            ));
        }
        if !self.mobil.is_valid() {
            return Err(Error::InvalidConfig("invalid MOBIL parameters".into()));
        }
        Ok(())
    }

    /// Applies `{prefix}{field}` overrides from a key-value file. Ranges are
    /// given as two numbers, e.g. `scenario.ev_speed = 18, 22`.
    pub fn apply_overrides(&mut self, kv: &KeyValues, prefix: &str) -> Result<()> {
        let keys: Vec<String> = kv
            .keys()
            .filter(|k| k.starts_with(prefix))
            .map(str::to_string)
            .collect();
        for key in keys {
            let field = &key[prefix.len()..];
            let real = || -> Result<f64> { Ok(kv.parse_value::<f64>(&key)?.unwrap_or_default()) };
            let range = || -> Result<Interval> {
                let xs = kv.reals(&key)?;
                if xs.len() != 2 {
                    return Err(kv.error_at(&key, format!("`{key}` needs exactly two numbers")));
                }
                Interval::new(xs[0], xs[1]).map_err(|e| kv.error_at(&key, e.to_string()))
            };
            match field {
                "kind" => {}
                "dt" => self.dt = real()?,
                "horizon" => self.horizon = kv.parse_value::<usize>(&key)?.unwrap_or_default(),
                "ev_position" => self.ev_init.position = range()?,
                "ev_speed" => self.ev_init.speed = range()?,
                "iv_position" => self.iv_init.position = range()?,
                "iv_speed" => self.iv_init.speed = range()?,
                "conflict_point" | "merge_point" | "entry_point" => {
                    self.geometry.conflict_point = real()?
                }
                "conflict_zone_length" => self.geometry.conflict_zone_length = real()?,
                "a_nom" => self.a_nom = real()?,
                "vehicle_length" => self.vehicle_length = real()?,
                "speed_limit" => {
                    self.speed_limit = real()?;
                    self.idm.desired_speed = self.speed_limit;
                }
                "merge_gap" => self.merge_gap = real()?,
                "critical_gap" => self.critical_gap = real()?,
                "replan_every" => {
                    let every = kv.parse_value::<usize>(&key)?.unwrap_or_default();
                    self.decision_mode = if every == 0 {
                        DecisionMode::SingleShot
                    } else {
                        DecisionMode::Replan { every }
                    };
                }
                "idm_time_headway" => self.idm.time_headway = real()?,
                "idm_min_gap" => self.idm.min_gap = real()?,
                "idm_max_accel" => self.idm.max_accel = real()?,
                "idm_comfort_decel" => self.idm.comfort_decel = real()?,
                "mobil_politeness" => self.mobil.politeness = real()?,
                "mobil_threshold" => self.mobil.threshold = real()?,
                "mobil_safe_decel" => self.mobil.safe_decel = real()?,
                _ => return Err(kv.error_at(&key, format!("unknown scenario key `{key}`"))),
            }
        }
        self.validate()
    }

    fn ev_lanes(&self) -> (Lane, Lane) {
        match self.kind {
            ScenarioKind::Merging => (Lane::Ramp, Lane::Main),
            ScenarioKind::Roundabout => (Lane::Approach, Lane::Inside),
        }
    }

    /// End of the acceleration lane (merging only).
    pub fn ramp_end(&self) -> f64 {
        self.geometry.conflict_point + self.geometry.conflict_zone_length
    }
}

/// Draws EV position, EV speed, IV position, IV speed, in that order.
pub fn sample_initial<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> (VehicleState, VehicleState) {
    let (start_lane, _) = cfg.ev_lanes();
    let iv_lane = match cfg.kind {
        ScenarioKind::Merging => Lane::Main,
        ScenarioKind::Roundabout => Lane::Inside,
    };
    let ev_s = cfg.ev_init.position.at(rng.gen());
    let ev_v = cfg.ev_init.speed.at(rng.gen());
    let iv_s = cfg.iv_init.position.at(rng.gen());
    let iv_v = cfg.iv_init.speed.at(rng.gen());
    (
        VehicleState::new(ev_s, ev_v, start_lane, cfg.vehicle_length),
        VehicleState::new(iv_s, iv_v, iv_lane, cfg.vehicle_length),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvCommand {
    /// Change to the main lane at the merge point and hold speed.
    Merge,
    /// Stay on the ramp and decelerate until the IV has passed.
    NotMerge,
    /// Accelerate into the roundabout.
    Enter,
    /// Decelerate and give way to the circulating IV.
    Yield,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IvCommand {
    Accelerate,
    Decelerate,
    Idle,
}

impl IvCommand {
    pub fn accel(self, a_nom: f64) -> f64 {
        match self {
            IvCommand::Accelerate => a_nom,
            IvCommand::Decelerate => -a_nom,
            IvCommand::Idle => 0.0,
        }
    }
}

pub fn action_semantics(kind: ScenarioKind, joint: JointOutcome) -> (EvCommand, IvCommand) {
    let go = joint.action_a() == 0;
    let first = joint.action_b() == 0;
    match kind {
        ScenarioKind::Merging => (
            if go {
                EvCommand::Merge
            } else {
                EvCommand::NotMerge
            },
            if first {
                IvCommand::Accelerate
            } else {
                IvCommand::Decelerate
            },
        ),
        ScenarioKind::Roundabout => (
            if go {
                EvCommand::Enter
            } else {
                EvCommand::Yield
            },
            if first {
                IvCommand::Accelerate
            } else {
                IvCommand::Idle
            },
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Baseline {
    /// IDM car following with gap acceptance at the roundabout entry.
    Idm,
    /// IDM on the ramp with MOBIL deciding the merge.
    Mobil,
}

impl Baseline {
    pub fn scenario(self) -> ScenarioKind {
        match self {
            Baseline::Idm => ScenarioKind::Roundabout,
            Baseline::Mobil => ScenarioKind::Merging,
        }
    }
}

/// Who picks the EV's behavior.
pub enum Driver<'a> {
    /// Joint game decisions. Called with the step index at `t = 0` and, in
    /// replan mode, every `every` steps until the EV's maneuver completes.
    Game(&'a mut dyn FnMut(usize) -> JointOutcome),
    /// A rule-based EV against an open-loop IV action (0 = Accelerate).
    Baseline {
        controller: Baseline,
        iv_action: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub t: f64,
    pub ev: VehicleState,
    pub iv: VehicleState,
}

impl TraceEntry {
    pub fn headway(&self) -> f64 {
        (self.iv.s - self.ev.s).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpisodeStatus {
    Collision,
    Success,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub outcome: JointOutcome,
    pub collided: bool,
    pub success: bool,
    pub violation: bool,
    pub mean_headway: f64,
    /// Sum and count of the per-step headways behind `mean_headway`.
    pub headway_sum: f64,
    pub headway_samples: usize,
    pub steps_run: usize,
    pub trace: Vec<TraceEntry>,
}

impl EpisodeResult {
    pub fn status(&self) -> EpisodeStatus {
        if self.collided {
            EpisodeStatus::Collision
        } else if self.success {
            EpisodeStatus::Success
        } else {
            EpisodeStatus::Timeout
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub collided: bool,
    pub success: bool,
    pub violation: bool,
    pub mean_headway: f64,
    pub headway_sum: f64,
    pub headway_samples: usize,
}

/// Classifies a trace whose first entry is the initial state.
///
/// A roundabout violation is an EV crossing the entry line while the IV is
/// within the priority zone upstream of it. Mean headway averages `|Δs|`
/// over every entry after the first that is not in collision; it is 0 when
/// there are none.
pub fn classify_outcome(trace: &[TraceEntry], cfg: &ScenarioConfig) -> Classification {
    let collided = trace.iter().any(|e| detect_collision(&e.ev, &e.iv));
    let (_, done_lane) = cfg.ev_lanes();
    let entered = trace.iter().find(|e| e.ev.lane == done_lane);
    let violation = match (cfg.kind, entered) {
        (ScenarioKind::Roundabout, Some(e)) => {
            let entry = cfg.geometry.conflict_point;
            e.iv.s < entry && e.iv.s >= entry - cfg.geometry.conflict_zone_length
        }
        _ => false,
    };
    let success = entered.is_some() && !collided && !violation;

    let (sum, n) = trace
        .iter()
        .skip(1)
        .filter(|e| !detect_collision(&e.ev, &e.iv))
        .fold((0.0, 0usize), |(s, n), e| (s + e.headway(), n + 1));
    let mean_headway = if n == 0 { 0.0 } else { sum / n as f64 };
    Classification {
        collided,
        success,
        violation,
        mean_headway,
        headway_sum: sum,
        headway_samples: n,
    }
}

/// EV progress through its maneuver.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Before,
    /// Completed; `committed` is true if the EV went without yielding.
    After {
        committed: bool,
    },
}

struct Episode<'c> {
    cfg: &'c ScenarioConfig,
    ev: VehicleState,
    iv: VehicleState,
    phase: Phase,
}

impl Episode<'_> {
    fn iv_ahead(&self) -> Option<&VehicleState> {
        (self.iv.s > self.ev.s).then_some(&self.iv)
    }

    /// IV far enough ahead for a yielding EV to proceed.
    fn iv_clear(&self) -> bool {
        match self.cfg.kind {
            ScenarioKind::Merging => self.iv.s - self.ev.s >= self.cfg.merge_gap,
            ScenarioKind::Roundabout => {
                self.iv.s >= self.cfg.geometry.conflict_point + self.cfg.merge_gap
            }
        }
    }

    fn obstacle(&self, at: f64) -> VehicleState {
        VehicleState::new(at, 0.0, self.ev.lane, 0.0)
    }

    fn follow(&self) -> f64 {
        idm_accel(&self.ev, self.iv_ahead(), &self.cfg.idm)
    }

    fn capped(&self, accel: f64) -> f64 {
        if accel > 0.0 && self.ev.v >= self.cfg.speed_limit {
            0.0
        } else {
            accel
        }
    }

    /// Commanded acceleration, capped by IDM against a leader once the EV
    /// shares its lane.
    fn hold(&self, accel: f64) -> f64 {
        let a = self.capped(accel);
        match self.iv_ahead() {
            Some(lead) => a.min(idm_accel(&self.ev, Some(lead), &self.cfg.idm)),
            None => a,
        }
    }

    fn game_accel(&self, cmd: EvCommand) -> f64 {
        let cfg = self.cfg;
        match (self.phase, cmd) {
            (Phase::After { committed: true }, EvCommand::Merge) => self.hold(0.0),
            (Phase::After { committed: true }, EvCommand::Enter) => self.hold(cfg.a_nom),
            (Phase::After { .. }, _) => self.follow(),
            (Phase::Before, EvCommand::Merge) => 0.0,
            (Phase::Before, EvCommand::Enter) => self.capped(cfg.a_nom),
            (Phase::Before, EvCommand::NotMerge) => {
                if self.iv_clear() {
                    let wall = idm_accel(&self.ev, Some(&self.obstacle(cfg.ramp_end())), &cfg.idm);
                    self.follow().min(wall)
                } else {
                    -cfg.a_nom
                }
            }
            (Phase::Before, EvCommand::Yield) => {
                if self.iv_clear() {
                    self.follow()
                } else {
                    -cfg.a_nom
                }
            }
        }
    }

    fn idm_gap_accepted(&self) -> bool {
        let entry = self.cfg.geometry.conflict_point;
        if self.iv.s >= entry {
            return true;
        }
        self.iv.v == 0.0 || (entry - self.iv.s) / self.iv.v >= self.cfg.critical_gap
    }

    fn baseline_accel(&self, b: Baseline) -> f64 {
        let cfg = self.cfg;
        match (self.phase, b) {
            (Phase::After { .. }, _) => self.follow(),
            (Phase::Before, Baseline::Idm) => {
                if self.idm_gap_accepted() {
                    self.follow()
                } else {
                    idm_accel(
                        &self.ev,
                        Some(&self.obstacle(cfg.geometry.conflict_point)),
                        &cfg.idm,
                    )
                }
            }
            (Phase::Before, Baseline::Mobil) => {
                idm_accel(&self.ev, Some(&self.obstacle(cfg.ramp_end())), &cfg.idm)
            }
        }
    }

    fn mobil_allows(&self) -> bool {
        let wall = self.obstacle(self.cfg.ramp_end());
        let (leader, follower) = if self.iv.s > self.ev.s {
            (Some(&self.iv), None)
        } else {
            (None, Some(&self.iv))
        };
        let n = Neighbors {
            current_leader: Some(&wall),
            current_follower: None,
            target_leader: leader,
            target_follower: follower,
        };
        mobil_decide(&self.ev, &n, &self.cfg.mobil, &self.cfg.idm) == LaneDecision::Change
    }
}

/// Runs one episode from `initial` until collision or the horizon.
pub fn run_episode(
    cfg: &ScenarioConfig,
    initial: (VehicleState, VehicleState),
    driver: Driver<'_>,
) -> Result<EpisodeResult> {
    cfg.validate()?;
    if let Driver::Baseline {
        controller,
        iv_action,
    } = &driver
    {
        if controller.scenario() != cfg.kind {
            return Err(Error::InvalidPolicy {
                policy: format!("{controller:?}").to_uppercase(),
                scenario: cfg.kind.to_string(),
            });
        }
        if *iv_action > 1 {
            return Err(Error::InvalidConfig(format!(
                "IV action must be 0 or 1, got {iv_action}"
            )));
        }
    }

    let (_, done_lane) = cfg.ev_lanes();
    let mut ep = Episode {
        cfg,
        ev: initial.0,
        iv: initial.1,
        phase: Phase::Before,
    };
    let mut driver = driver;
    let mut joint = match &mut driver {
        Driver::Game(decide) => decide(0),
        Driver::Baseline { iv_action, .. } => JointOutcome::from_actions(1, *iv_action),
    };
    let mut trace = Vec::with_capacity(cfg.horizon + 1);
    trace.push(TraceEntry {
        t: 0.0,
        ev: ep.ev,
        iv: ep.iv,
    });
    let mut steps_run = 0;

    for n in 0..cfg.horizon {
        if let (Driver::Game(decide), DecisionMode::Replan { every }, Phase::Before) =
            (&mut driver, cfg.decision_mode, ep.phase)
        {
            if n > 0 && n % every == 0 {
                joint = decide(n);
            }
        }
        let (ev_cmd, iv_cmd) = action_semantics(cfg.kind, joint);

        let mut a_iv = iv_cmd.accel(cfg.a_nom);
        if a_iv > 0.0 && ep.iv.v >= cfg.speed_limit {
            a_iv = 0.0;
        }
        let a_ev = match &driver {
            Driver::Game(_) => ep.game_accel(ev_cmd),
            Driver::Baseline { controller, .. } => ep.baseline_accel(*controller),
        };
        (ep.ev, ep.iv) = step((ep.ev, ep.iv), (a_ev, a_iv), cfg.dt);
        steps_run = n + 1;

        if ep.phase == Phase::Before && ep.ev.s >= cfg.geometry.conflict_point {
            let allowed = match (&driver, cfg.kind) {
                (_, ScenarioKind::Roundabout) => true,
                (Driver::Game(_), _) => ev_cmd == EvCommand::Merge || ep.iv_clear(),
                (Driver::Baseline { .. }, _) => ep.mobil_allows(),
            };
            if allowed {
                let committed = match cfg.kind {
                    ScenarioKind::Merging => ep.ev.s > ep.iv.s,
                    ScenarioKind::Roundabout => ep.iv.s < cfg.geometry.conflict_point,
                };
                ep.ev.lane = done_lane;
                ep.phase = Phase::After { committed };
            }
        }
        if ep.phase == Phase::Before
            && cfg.kind == ScenarioKind::Merging
            && ep.ev.s > cfg.ramp_end()
        {
            ep.ev.s = cfg.ramp_end();
            ep.ev.v = 0.0;
        }

        trace.push(TraceEntry {
            t: (n + 1) as f64 * cfg.dt,
            ev: ep.ev,
            iv: ep.iv,
        });
        if detect_collision(&ep.ev, &ep.iv) {
            break;
        }
    }

    if let Driver::Baseline { iv_action, .. } = driver {
        let went = matches!(ep.phase, Phase::After { committed: true });
        joint = JointOutcome::from_actions(if went { 0 } else { 1 }, iv_action);
    }
    let c = classify_outcome(&trace, cfg);
    Ok(EpisodeResult {
        outcome: joint,
        collided: c.collided,
        success: c.success,
        violation: c.violation,
        mean_headway: c.mean_headway,
        headway_sum: c.headway_sum,
        headway_samples: c.headway_samples,
        steps_run,
        trace,
    })
}

/// Convenience wrapper for a fixed joint decision.
pub fn run_fixed(
    cfg: &ScenarioConfig,
    initial: (VehicleState, VehicleState),
    joint: JointOutcome,
) -> Result<EpisodeResult> {
    run_episode(cfg, initial, Driver::Game(&mut |_| joint))
}

pub fn write_trace_csv<W: Write>(out: &mut W, trace: &[TraceEntry]) -> std::io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for e in trace {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            num(e.t),
            e.ev.lane.name(),
            num(e.ev.s),
            num(e.ev.v),
            e.iv.lane.name(),
            num(e.iv.s),
            num(e.iv.v),
            num(e.headway())
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn at(s: f64, v: f64, lane: Lane) -> VehicleState {
        VehicleState::new(s, v, lane, 5.0)
    }

    #[test]
    fn kinematics() {
        let v = at(0.0, 20.0, Lane::Main).advance(2.0, 0.1);
        assert!((v.v - 20.2).abs() < 1e-12);
        assert!((v.s - 2.01).abs() < 1e-12);
        let still = at(3.0, 0.0, Lane::Main).advance(-2.0, 0.1);
        assert_eq!((still.s, still.v), (3.0, 0.0));
        let coast = at(1.0, 10.0, Lane::Main).advance(0.0, 0.1);
        assert!((coast.s - 2.0).abs() < 1e-12);
    }

    #[test]
    fn braking_to_a_stop_does_not_reverse() {
        let v = at(0.0, 0.1, Lane::Ramp).advance(-2.0, 0.1);
        assert_eq!(v.v, 0.0);
        assert!((v.s - 0.0025).abs() < 1e-15);
    }

    #[test]
    fn collision_threshold() {
        assert!(!detect_collision(
            &at(0.0, 0.0, Lane::Ramp),
            &at(0.0, 0.0, Lane::Main)
        ));
        assert!(detect_collision(
            &at(7.0, 0.0, Lane::Main),
            &at(7.0, 0.0, Lane::Main)
        ));
        assert!(!detect_collision(
            &at(0.0, 0.0, Lane::Main),
            &at(5.1, 0.0, Lane::Main)
        ));
        assert!(detect_collision(
            &at(0.0, 0.0, Lane::Main),
            &at(4.9, 0.0, Lane::Main)
        ));
    }

    #[test]
    fn semantics_table() {
        use JointOutcome::*;
        assert_eq!(
            action_semantics(ScenarioKind::Merging, S01),
            (EvCommand::Merge, IvCommand::Decelerate)
        );
        assert_eq!(
            action_semantics(ScenarioKind::Merging, S00),
            (EvCommand::Merge, IvCommand::Accelerate)
        );
        assert_eq!(
            action_semantics(ScenarioKind::Merging, S10),
            (EvCommand::NotMerge, IvCommand::Accelerate)
        );
        assert_eq!(
            action_semantics(ScenarioKind::Roundabout, S11),
            (EvCommand::Yield, IvCommand::Idle)
        );
        assert_eq!(
            action_semantics(ScenarioKind::Roundabout, S00),
            (EvCommand::Enter, IvCommand::Accelerate)
        );
    }

    #[test]
    fn zero_width_ranges_sample_midpoints() {
        let mut cfg = ScenarioConfig::merging();
        cfg.ev_init.position = Interval::new(110.0, 110.0).unwrap();
        cfg.ev_init.speed = Interval::new(20.0, 20.0).unwrap();
        cfg.iv_init.position = Interval::new(84.0, 84.0).unwrap();
        cfg.iv_init.speed = Interval::new(19.0, 19.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (ev, iv) = sample_initial(&cfg, &mut rng);
        assert_eq!((ev.s, ev.v, ev.lane), (110.0, 20.0, Lane::Ramp));
        assert_eq!((iv.s, iv.v, iv.lane), (84.0, 19.0, Lane::Main));
    }

    #[test]
    fn samples_stay_in_range() {
        let cfg = ScenarioConfig::merging();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let (ev, iv) = sample_initial(&cfg, &mut rng);
            assert!((105.0..=115.0).contains(&ev.s) && (18.0..=22.0).contains(&ev.v));
            assert!((80.0..=88.0).contains(&iv.s) && (18.0..=22.0).contains(&iv.v));
        }
    }

    #[test]
    fn constant_gap_headway() {
        let cfg = ScenarioConfig::merging();
        let trace: Vec<_> = (0..20)
            .map(|n| {
                let s = n as f64 * 2.0;
                TraceEntry {
                    t: n as f64 * 0.1,
                    ev: at(s, 20.0, Lane::Main),
                    iv: at(s + 12.0, 20.0, Lane::Main),
                }
            })
            .collect();
        let c = classify_outcome(&trace, &cfg);
        assert!(c.success && !c.collided);
        assert!((c.mean_headway - 12.0).abs() < 1e-12);
        assert_eq!(c.headway_samples, 19);
    }

    #[test]
    fn colliding_trace_is_not_success() {
        let cfg = ScenarioConfig::merging();
        let trace = vec![
            TraceEntry {
                t: 0.0,
                ev: at(0.0, 0.0, Lane::Ramp),
                iv: at(10.0, 0.0, Lane::Main),
            },
            TraceEntry {
                t: 0.1,
                ev: at(8.0, 0.0, Lane::Main),
                iv: at(10.0, 0.0, Lane::Main),
            },
        ];
        let c = classify_outcome(&trace, &cfg);
        assert!(c.collided && !c.success);
    }

    #[test]
    fn entering_in_front_of_priority_traffic_is_a_violation() {
        let cfg = ScenarioConfig::roundabout();
        let entry = cfg.geometry.conflict_point;
        let trace = vec![
            TraceEntry {
                t: 0.0,
                ev: at(entry - 1.0, 5.0, Lane::Approach),
                iv: at(entry - 20.0, 5.0, Lane::Inside),
            },
            TraceEntry {
                t: 0.1,
                ev: at(entry + 0.5, 5.0, Lane::Inside),
                iv: at(entry - 6.0, 5.0, Lane::Inside),
            },
        ];
        let c = classify_outcome(&trace, &cfg);
        assert!(c.violation && !c.collided && !c.success);
    }

    #[test]
    fn merging_outcomes_at_range_corners() {
        let cfg = ScenarioConfig::merging();
        let r = cfg.ev_init;
        let q = cfg.iv_init;
        for ev_s in [r.position.lo, r.position.hi] {
            for ev_v in [r.speed.lo, r.speed.hi] {
                for iv_s in [q.position.lo, q.position.hi] {
                    for iv_v in [q.speed.lo, q.speed.hi] {
                        let init = (at(ev_s, ev_v, Lane::Ramp), at(iv_s, iv_v, Lane::Main));
                        let res = |j| run_fixed(&cfg, init, j).unwrap();
                        assert_eq!(
                            res(JointOutcome::S00).status(),
                            EpisodeStatus::Collision,
                            "{init:?}"
                        );
                        assert_eq!(
                            res(JointOutcome::S01).status(),
                            EpisodeStatus::Success,
                            "{init:?}"
                        );
                        assert_eq!(
                            res(JointOutcome::S10).status(),
                            EpisodeStatus::Success,
                            "{init:?}"
                        );
                        assert!(!res(JointOutcome::S11).collided, "{init:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn baselines_are_tied_to_their_scenario() {
        let cfg = ScenarioConfig::merging();
        let init = (at(110.0, 20.0, Lane::Ramp), at(84.0, 20.0, Lane::Main));
        let bad = run_episode(
            &cfg,
            init,
            Driver::Baseline {
                controller: Baseline::Idm,
                iv_action: 0,
            },
        );
        assert!(matches!(bad, Err(Error::InvalidPolicy { .. })));
        let ok = run_episode(
            &cfg,
            init,
            Driver::Baseline {
                controller: Baseline::Mobil,
                iv_action: 0,
            },
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn replan_mode_calls_back() {
        let mut cfg = ScenarioConfig::merging();
        cfg.decision_mode = DecisionMode::Replan { every: 5 };
        let init = (at(100.0, 20.0, Lane::Ramp), at(84.0, 20.0, Lane::Main));
        let mut calls = Vec::new();
        let mut decide = |n| {
            calls.push(n);
            JointOutcome::S11
        };
        run_episode(&cfg, init, Driver::Game(&mut decide)).unwrap();
        assert_eq!(&calls[..3], &[0, 5, 10]);
    }

    #[test]
    fn trace_csv_shape() {
        let cfg = ScenarioConfig::merging();
        let init = (at(110.0, 20.0, Lane::Ramp), at(84.0, 20.0, Lane::Main));
        let res = run_fixed(&cfg, init, JointOutcome::S01).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &res.trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(TRACE_HEADER));
        assert_eq!(lines.next(), Some("0,ramp,110,20,main,84,20,26"));
        assert_eq!(text.lines().count(), res.trace.len() + 1);
    }

    #[test]
    fn overrides() {
        let kv = KeyValues::parse(
            "t",
            "scenario.dt = 0.05\nscenario.ev_speed = 10, 12\nscenario.replan_every = 3",
        )
        .unwrap();
        let mut cfg = ScenarioConfig::merging();
        cfg.apply_overrides(&kv, "scenario.").unwrap();
        assert_eq!(cfg.dt, 0.05);
        assert_eq!(cfg.ev_init.speed, Interval { lo: 10.0, hi: 12.0 });
        assert_eq!(cfg.decision_mode, DecisionMode::Replan { every: 3 });
        let bad = KeyValues::parse("t", "scenario.wat = 1").unwrap();
        assert!(ScenarioConfig::merging()
            .apply_overrides(&bad, "scenario.")
            .is_err());
        let empty = KeyValues::parse("t", "scenario.ev_speed = 12, 10").unwrap();
        assert!(ScenarioConfig::merging()
            .apply_overrides(&empty, "scenario.")
            .is_err());
    }

    fn any_joint() -> impl Strategy<Value = JointOutcome> {
        (0usize..4).prop_map(JointOutcome::from_index)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn episodes_are_deterministic(seed in any::<u64>(), j in any_joint(), round in any::<bool>()) {
            let cfg = if round { ScenarioConfig::roundabout() } else { ScenarioConfig::merging() };
            let init = sample_initial(&cfg, &mut ChaCha8Rng::seed_from_u64(seed));
            let again = sample_initial(&cfg, &mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(init, again);
            prop_assert_eq!(run_fixed(&cfg, init, j).unwrap(), run_fixed(&cfg, again, j).unwrap());
        }

        #[test]
        fn exactly_one_status(seed in any::<u64>(), j in any_joint(), round in any::<bool>()) {
            let cfg = if round { ScenarioConfig::roundabout() } else { ScenarioConfig::merging() };
            let init = sample_initial(&cfg, &mut ChaCha8Rng::seed_from_u64(seed));
            let r = run_fixed(&cfg, init, j).unwrap();
            let timeout = !r.collided && !r.success;
            prop_assert_eq!(u8::from(r.collided) + u8::from(r.success) + u8::from(timeout), 1);
            prop_assert!(r.trace.iter().all(|e| e.ev.v >= 0.0 && e.iv.v >= 0.0));
        }

        #[test]
        fn iv_deceleration_never_adds_collisions(seed in any::<u64>(), ev in 0usize..2) {
            let cfg = ScenarioConfig::merging();
            let init = sample_initial(&cfg, &mut ChaCha8Rng::seed_from_u64(seed));
            let accel = run_fixed(&cfg, init, JointOutcome::from_actions(ev, 0)).unwrap();
            let decel = run_fixed(&cfg, init, JointOutcome::from_actions(ev, 1)).unwrap();
            prop_assert!(!decel.collided || accel.collided);
        }

        #[test]
        fn zero_acceleration_translation(s in -100.0..100.0f64, v in 0.0..40.0f64, steps in 1usize..500) {
            let mut x = at(s, v, Lane::Main);
            for _ in 0..steps {
                x = x.advance(0.0, 0.1);
            }
            prop_assert!((x.s - (s + v * steps as f64 * 0.1)).abs() < 1e-9);
        }
    }
}
