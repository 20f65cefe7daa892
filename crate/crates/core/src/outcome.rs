//! Joint action states `s_jk` and probability distributions over them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DIST_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Player {
    A,
    B,
}

/// Joint outcome `s_jk`: player A (ego vehicle) took action `j`, player B
/// (interacting vehicle) took action `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum JointOutcome {
    S00,
    S01,
    S10,
    S11,
}

impl JointOutcome {
    pub const ALL: [JointOutcome; 4] = [
        JointOutcome::S00,
        JointOutcome::S01,
        JointOutcome::S10,
        JointOutcome::S11,
    ];

    pub fn from_actions(a: usize, b: usize) -> Self {
        assert!(a < 2 && b < 2, "actions must be 0 or 1");
        Self::from_index(2 * a + b)
    }

    pub fn from_index(index: usize) -> Self {
        Self::ALL[index]
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn action_a(self) -> usize {
        self.index() >> 1
    }

    pub fn action_b(self) -> usize {
        self.index() & 1
    }

    pub fn label(self) -> &'static str {
        ["s00", "s01", "s10", "s11"][self.index()]
    }
}

impl fmt::Display for JointOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for JointOutcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s00" => Ok(Self::S00),
            "s01" => Ok(Self::S01),
            "s10" => Ok(Self::S10),
            "s11" => Ok(Self::S11),
            _ => Err(Error::UnknownName {
                kind: "joint outcome",
                name: s.to_string(),
            }),
        }
    }
}

/// Probabilities `(p00, p01, p10, p11)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    p: [f64; 4],
}

impl OutcomeDistribution {
    pub fn new(p: [f64; 4]) -> Result<Self> {
        for &x in &p {
            if !x.is_finite() {
                return Err(Error::NonFinite("outcome probability"));
            }
            if !(-DIST_TOL..=1.0 + DIST_TOL).contains(&x) {
                return Err(Error::OutOfRange {
                    name: "outcome probability",
                    value: x,
                    min: 0.0,
                    max: 1.0,
                });
            }
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > DIST_TOL {
            return Err(Error::NotNormalized {
                what: "outcome distribution",
                deviation: (total - 1.0).abs(),
            });
        }
        Ok(Self { p })
    }

    pub fn uniform() -> Self {
        Self { p: [0.25; 4] }
    }

    pub fn certain(outcome: JointOutcome) -> Self {
        let mut p = [0.0; 4];
        p[outcome.index()] = 1.0;
        Self { p }
    }

    /// Equal-weight mixture of several distributions.
    pub fn mixture(parts: &[OutcomeDistribution]) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidConfig("mixture of zero distributions".into()));
        }
        let w = 1.0 / parts.len() as f64;
        let mut p = [0.0; 4];
        for d in parts {
            for (acc, x) in p.iter_mut().zip(d.p) {
                *acc += w * x;
            }
        }
        Self::new(p)
    }

    pub fn probabilities(&self) -> [f64; 4] {
        self.p
    }

    pub fn prob(&self, outcome: JointOutcome) -> f64 {
        self.p[outcome.index()]
    }

    pub fn p00(&self) -> f64 {
        self.p[0]
    }
    pub fn p01(&self) -> f64 {
        self.p[1]
    }
    pub fn p10(&self) -> f64 {
        self.p[2]
    }
    pub fn p11(&self) -> f64 {
        self.p[3]
    }

    /// Probability that `player` takes its action 0.
    pub fn marginal_zero(&self, player: Player) -> f64 {
        match player {
            Player::A => self.p[0] + self.p[1],
            Player::B => self.p[0] + self.p[2],
        }
    }

    /// Inverse-CDF draw for a uniform variate `u` in `[0, 1)`.
    pub fn sample(&self, u: f64) -> JointOutcome {
        let mut acc = 0.0;
        let mut last = JointOutcome::S11;
        for outcome in JointOutcome::ALL {
            let p = self.p[outcome.index()];
            if p <= 0.0 {
                continue;
            }
            last = outcome;
            acc += p;
            if u < acc {
                return outcome;
            }
        }
        last
    }
}
