//! Normal-form 2x2 games: pure Nash equilibria, the interior mixed
//! equilibrium, and the two classical baseline distributions.
//!
//! Payoffs are indexed `u[j][k]` with `j` the row player's (A, ego vehicle)
//! action and `k` the column player's (B, interacting vehicle) action, the
//! same order as the joint state amplitudes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::outcome::{JointOutcome, OutcomeDistribution, Player};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPlayerGame {
    pub payoff_a: [[f64; 2]; 2],
    pub payoff_b: [[f64; 2]; 2],
    pub action_labels_a: [String; 2],
    pub action_labels_b: [String; 2],
}

impl TwoPlayerGame {
    pub fn new(
        payoff_a: [[f64; 2]; 2],
        payoff_b: [[f64; 2]; 2],
        action_labels_a: [String; 2],
        action_labels_b: [String; 2],
    ) -> Result<Self> {
        if payoff_a
            .iter()
            .chain(payoff_b.iter())
            .flatten()
            .any(|x| !x.is_finite())
        {
            return Err(Error::NonFinite("payoff"));
        }
        Ok(Self {
            payoff_a,
            payoff_b,
            action_labels_a,
            action_labels_b,
        })
    }

    /// Merging game: EV {Merge, NotMerge} vs IV {Accelerate, Decelerate}.
    pub fn merging() -> Self {
        Self {
            payoff_a: [[0.0, 10.0], [4.0, 1.0]],
            payoff_b: [[0.0, 4.0], [10.0, 1.0]],
            action_labels_a: ["Merge".into(), "NotMerge".into()],
            action_labels_b: ["Accelerate".into(), "Decelerate".into()],
        }
    }

    /// Roundabout game: EV {Accelerate, Decelerate} vs IV {Accelerate, Idle}.
    pub fn roundabout() -> Self {
        Self {
            payoff_a: [[0.0, 10.0], [4.0, 4.0]],
            payoff_b: [[0.0, 4.0], [10.0, 4.0]],
            action_labels_a: ["Accelerate".into(), "Decelerate".into()],
            action_labels_b: ["Accelerate".into(), "Idle".into()],
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "merging" => Ok(Self::merging()),
            "roundabout" => Ok(Self::roundabout()),
            _ => Err(Error::UnknownName {
                kind: "game",
                name: name.to_string(),
            }),
        }
    }

    /// Built-in preset name, or else a path to a game definition file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        match Self::preset(name_or_path) {
            Ok(g) => Ok(g),
            Err(unknown) => {
                let path = Path::new(name_or_path);
                if path.exists() {
                    Self::from_file(path)
                } else {
                    Err(unknown)
                }
            }
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_key_values(&KeyValues::read(path)?)
    }

    pub fn parse(origin: &str, text: &str) -> Result<Self> {
        Self::from_key_values(&KeyValues::parse(origin, text)?)
    }

    fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let grid = |key: &str| -> Result<[[f64; 2]; 2]> {
            let v = kv.reals(key)?;
            if v.len() != 4 {
                return Err(kv.error_at(key, format!("`{key}` needs 4 reals, got {}", v.len())));
            }
            Ok([[v[0], v[1]], [v[2], v[3]]])
        };
        let label = |key: &str| -> Result<String> { Ok(kv.require(key)?.to_string()) };
        Self::new(
            grid("ua")?,
            grid("ub")?,
            [label("label_a0")?, label("label_a1")?],
            [label("label_b0")?, label("label_b1")?],
        )
    }

    /// Game definition text accepted by [`TwoPlayerGame::parse`].
    pub fn to_file_string(&self) -> String {
        let row = |m: &[[f64; 2]; 2]| format!("{} {} {} {}", m[0][0], m[0][1], m[1][0], m[1][1]);
        format!(
            "label_a0 = {}\nlabel_a1 = {}\nlabel_b0 = {}\nlabel_b1 = {}\nua = {}\nub = {}\n",
            self.action_labels_a[0],
            self.action_labels_a[1],
            self.action_labels_b[0],
            self.action_labels_b[1],
            row(&self.payoff_a),
            row(&self.payoff_b),
        )
    }

    pub fn payoffs(&self, player: Player) -> &[[f64; 2]; 2] {
        match player {
            Player::A => &self.payoff_a,
            Player::B => &self.payoff_b,
        }
    }

    pub fn payoff(&self, player: Player, outcome: JointOutcome) -> f64 {
        self.payoffs(player)[outcome.action_a()][outcome.action_b()]
    }

    /// Payoffs in outcome order `(s00, s01, s10, s11)`.
    pub fn payoff_vector(&self, player: Player) -> [f64; 4] {
        let m = self.payoffs(player);
        [m[0][0], m[0][1], m[1][0], m[1][1]]
    }

    /// `scale * u + offset` applied to both players.
    pub fn affine(&self, scale: f64, offset: f64) -> Self {
        let f = |m: [[f64; 2]; 2]| m.map(|r| r.map(|x| scale * x + offset));
        Self {
            payoff_a: f(self.payoff_a),
            payoff_b: f(self.payoff_b),
            ..self.clone()
        }
    }
}

/// Profiles where neither player gains by deviating alone. Ties count as
/// equilibria. Returned in outcome order.
pub fn pure_nash_equilibria(game: &TwoPlayerGame) -> Vec<JointOutcome> {
    let ua = &game.payoff_a;
    let ub = &game.payoff_b;
    JointOutcome::ALL
        .into_iter()
        .filter(|o| {
            let (j, k) = (o.action_a(), o.action_b());
            ua[j][k] >= ua[1 - j][k] && ub[j][k] >= ub[j][1 - k]
        })
        .collect()
}

/// Both pure equilibria on the anti-diagonal `{s01, s10}`: the game has no
/// equilibrium-selection answer by itself.
pub fn has_diagonal_dilemma(game: &TwoPlayerGame) -> bool {
    pure_nash_equilibria(game) == [JointOutcome::S01, JointOutcome::S10]
}

/// Interior mixed equilibrium: `p` is the probability that B (IV) plays its
/// action 0, `q` the probability that A (EV) plays its action 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedStrategyPair {
    pub p: f64,
    pub q: f64,
}

impl MixedStrategyPair {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        crate::error::check_range("p", p, 0.0, 1.0)?;
        crate::error::check_range("q", q, 0.0, 1.0)?;
        Ok(Self { p, q })
    }
}

/// Each player's mix makes the other indifferent between its two actions.
pub fn mixed_strategy(game: &TwoPlayerGame) -> Result<MixedStrategyPair> {
    let a = &game.payoff_a;
    let b = &game.payoff_b;
    let den_a = a[0][0] - a[0][1] - a[1][0] + a[1][1];
    let den_b = b[0][0] - b[0][1] - b[1][0] + b[1][1];
    if den_a == 0.0 {
        return Err(Error::DegenerateGame { player: 'A' });
    }
    if den_b == 0.0 {
        return Err(Error::DegenerateGame { player: 'B' });
    }
    let p = (a[1][1] - a[0][1]) / den_a;
    let q = (b[1][1] - b[1][0]) / den_b;
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
        return Err(Error::NoInteriorEquilibrium { p, q });
    }
    Ok(MixedStrategyPair { p, q })
}

/// Uniform distribution over the four joint outcomes.
pub fn cg_epd_distribution() -> OutcomeDistribution {
    OutcomeDistribution::uniform()
}

/// Independent play: A picks action 0 with `q`, B picks action 0 with `p`.
pub fn cg_ms_distribution(ms: &MixedStrategyPair) -> OutcomeDistribution {
    let (p, q) = (ms.p, ms.q);
    OutcomeDistribution::new([q * p, q * (1.0 - p), (1.0 - q) * p, (1.0 - q) * (1.0 - p)])
        .expect("product of two valid marginals is a distribution")
}
