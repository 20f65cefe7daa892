//! Intelligent Driver Model car following and the MOBIL lane-change rule.
//!
//! <https://en.wikipedia.org/wiki/Intelligent_driver_model>

use serde::{Deserialize, Serialize};

use super::VehicleState;

/// Smallest bumper-to-bumper gap fed into the interaction term.
const MIN_GAP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdmParams {
    /// Desired speed (m/s).
    pub desired_speed: f64,
    /// Desired time headway (s).
    pub time_headway: f64,
    /// Jam distance (m).
    pub min_gap: f64,
    /// Maximum acceleration (m/s²).
    pub max_accel: f64,
    /// Comfortable deceleration (m/s², positive).
    pub comfort_decel: f64,
    pub exponent: f64,
}

impl IdmParams {
    /// Regular driver profile with the given desired speed.
    pub fn regular(desired_speed: f64) -> Self {
        Self {
            desired_speed,
            time_headway: 1.5,
            min_gap: 2.0,
            max_accel: 1.5,
            comfort_decel: 2.0,
            exponent: 4.0,
        }
    }

    pub fn is_valid(&self) -> bool {
        [
            self.desired_speed,
            self.time_headway,
            self.min_gap,
            self.max_accel,
            self.comfort_decel,
            self.exponent,
        ]
        .iter()
        .all(|x| x.is_finite() && *x > 0.0)
    }
}

/// Bumper-to-bumper distance from `ego` to a vehicle ahead of it.
pub fn gap(ego: &VehicleState, leader: &VehicleState) -> f64 {
    leader.s - ego.s - 0.5 * (leader.length + ego.length)
}

pub fn idm_accel(ego: &VehicleState, leader: Option<&VehicleState>, p: &IdmParams) -> f64 {
    let free = p.max_accel * (1.0 - (ego.v / p.desired_speed).powf(p.exponent));
    match leader {
        None => free,
        Some(lead) => {
            let closing = ego.v - lead.v;
            let desired = p.min_gap
                + (ego.v * p.time_headway
                    + ego.v * closing / (2.0 * (p.max_accel * p.comfort_decel).sqrt()))
                .max(0.0);
            let s = gap(ego, lead).max(MIN_GAP);
            free - p.max_accel * (desired / s).powi(2)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilParams {
    pub politeness: f64,
    /// Minimum net gain (m/s²) required to change lanes.
    pub threshold: f64,
    /// Largest deceleration (m/s², positive) the new follower may be forced into.
    pub safe_decel: f64,
}

impl Default for MobilParams {
    fn default() -> Self {
        Self {
            politeness: 0.3,
            threshold: 0.1,
            safe_decel: 4.0,
        }
    }
}

impl MobilParams {
    pub fn is_valid(&self) -> bool {
        self.politeness.is_finite()
            && self.politeness >= 0.0
            && self.threshold.is_finite()
            && self.safe_decel.is_finite()
            && self.safe_decel > 0.0
    }
}

/// Surrounding vehicles for a lane-change evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neighbors<'a> {
    pub current_leader: Option<&'a VehicleState>,
    pub current_follower: Option<&'a VehicleState>,
    pub target_leader: Option<&'a VehicleState>,
    pub target_follower: Option<&'a VehicleState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaneDecision {
    Change,
    Stay,
}

pub fn mobil_decide(
    ego: &VehicleState,
    n: &Neighbors<'_>,
    mobil: &MobilParams,
    idm: &IdmParams,
) -> LaneDecision {
    let new_follower_after = n.target_follower.map(|f| idm_accel(f, Some(ego), idm));
    if let Some(a) = new_follower_after {
        if a < -mobil.safe_decel {
            return LaneDecision::Stay;
        }
    }
    let ego_before = idm_accel(ego, n.current_leader, idm);
    let ego_after = idm_accel(ego, n.target_leader, idm);
    if ego_after < -mobil.safe_decel {
        return LaneDecision::Stay;
    }

    let new_follower_gain = match (n.target_follower, new_follower_after) {
        (Some(f), Some(after)) => after - idm_accel(f, n.target_leader, idm),
        _ => 0.0,
    };
    let old_follower_gain = n
        .current_follower
        .map(|f| idm_accel(f, n.current_leader, idm) - idm_accel(f, Some(ego), idm))
        .unwrap_or(0.0);

    let incentive =
        ego_after - ego_before + mobil.politeness * (new_follower_gain + old_follower_gain);
    if incentive > mobil.threshold {
        LaneDecision::Change
    } else {
        LaneDecision::Stay
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario_sim::Lane;

    fn car(s: f64, v: f64) -> VehicleState {
        VehicleState::new(s, v, Lane::Main, 5.0)
    }

    #[test]
    fn free_road_limits() {
        let p = IdmParams::regular(30.0);
        assert!(idm_accel(&car(0.0, 30.0), None, &p).abs() < 1e-12);
        assert!((idm_accel(&car(0.0, 0.0), None, &p) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn jam_gap_at_desired_speed_brakes_hard() {
        let p = IdmParams::regular(30.0);
        let ego = car(0.0, 30.0);
        let lead = car(p.min_gap + 5.0, 30.0);
        // s* = 2 + 30 * 1.5 = 47, gap = 2: 1.5 * (0 - (47/2)^2) = -828.375
        let a = idm_accel(&ego, Some(&lead), &p);
        assert!((a + 828.375).abs() < 1e-9, "{a}");
    }

    #[test]
    fn mobil_changes_for_empty_fast_lane() {
        let (idm, mobil) = (IdmParams::regular(30.0), MobilParams::default());
        let ego = car(0.0, 25.0);
        let slow = car(20.0, 10.0);
        let n = Neighbors {
            current_leader: Some(&slow),
            ..Default::default()
        };
        assert_eq!(mobil_decide(&ego, &n, &mobil, &idm), LaneDecision::Change);
    }

    #[test]
    fn mobil_safety_veto() {
        let (idm, mobil) = (IdmParams::regular(30.0), MobilParams::default());
        let ego = car(0.0, 20.0);
        let slow = car(20.0, 5.0);
        let tailgater = car(-8.0, 30.0);
        let n = Neighbors {
            current_leader: Some(&slow),
            target_follower: Some(&tailgater),
            ..Default::default()
        };
        assert!(idm_accel(&tailgater, Some(&ego), &idm) < -mobil.safe_decel);
        assert_eq!(mobil_decide(&ego, &n, &mobil, &idm), LaneDecision::Stay);
    }

    #[test]
    fn mobil_symmetric_traffic_stays() {
        let (idm, mobil) = (IdmParams::regular(30.0), MobilParams::default());
        let ego = car(0.0, 20.0);
        let lead_here = car(40.0, 20.0);
        let lead_there = car(40.0, 20.0);
        let n = Neighbors {
            current_leader: Some(&lead_here),
            target_leader: Some(&lead_there),
            ..Default::default()
        };
        assert_eq!(mobil_decide(&ego, &n, &mobil, &idm), LaneDecision::Stay);
    }
}
