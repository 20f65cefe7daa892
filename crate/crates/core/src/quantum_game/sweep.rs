//! Parameter sweeps over the circuit and their CSV forms.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{solve, EntanglementLevel, QuantumGameConfig, QuantumGate, Strategy, StrategyU};
use crate::classical_game::TwoPlayerGame;
use crate::clinalg::StateVector4;
use crate::error::{Error, Result};
use crate::outcome::OutcomeDistribution;

/// Rows whose ego payoff differs by less than this count as tied.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepMode {
    /// `theta_A = theta_B = theta`.
    EqualThetas,
    /// `theta_A = theta`, `theta_B = 0`.
    ThetaBZero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepGrid {
    pub gamma_steps: usize,
    pub theta_steps: usize,
    /// Phase applied to both players' rotations.
    pub phi: f64,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            gamma_steps: 101,
            theta_steps: 101,
            phi: 0.0,
        }
    }
}

impl SweepGrid {
    pub fn new(gamma_steps: usize, theta_steps: usize) -> Result<Self> {
        if gamma_steps < 2 || theta_steps < 2 {
            return Err(Error::InvalidConfig(format!(
                "sweep grid needs at least 2 steps per axis, got {gamma_steps}x{theta_steps}"
            )));
        }
        Ok(Self {
            gamma_steps,
            theta_steps,
            phi: 0.0,
        })
    }
}

/// Evenly spaced points on `[lo, hi]` with both endpoints exact.
fn linspace(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    if i + 1 == n {
        hi
    } else {
        lo + (hi - lo) * i as f64 / (n - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub theta_a: f64,
    pub theta_b: f64,
    pub distribution: OutcomeDistribution,
    pub eu_a: f64,
    pub eu_b: f64,
}

/// One row per `(gamma, theta)` point, gamma-major.
pub fn sweep_u1(
    game: &TwoPlayerGame,
    initial: &StateVector4,
    grid: SweepGrid,
    mode: SweepMode,
) -> Result<Vec<SweepRow>> {
    let SweepGrid {
        gamma_steps,
        theta_steps,
        phi,
    } = grid;
    SweepGrid::new(gamma_steps, theta_steps)?;
    StrategyU::new(0.0, phi)?;
    (0..gamma_steps * theta_steps)
        .into_par_iter()
        .map(|idx| {
            let gamma = linspace(0.0, FRAC_PI_2, gamma_steps, idx / theta_steps);
            let theta = linspace(0.0, PI, theta_steps, idx % theta_steps);
            let theta_b = match mode {
                SweepMode::EqualThetas => theta,
                SweepMode::ThetaBZero => 0.0,
            };
            let cfg = QuantumGameConfig::new(
                game.clone(),
                *initial,
                EntanglementLevel::new(gamma)?,
                Strategy::Unitary(StrategyU::new(theta, phi)?),
                Strategy::Unitary(StrategyU::new(theta_b, phi)?),
            )?;
            let sol = solve(&cfg);
            Ok(SweepRow {
                gamma,
                theta_a: theta,
                theta_b,
                distribution: sol.distribution,
                eu_a: sol.eu_a,
                eu_b: sol.eu_b,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremumKind {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub row: SweepRow,
    /// Grid points whose ego payoff ties the extremum, the reported row
    /// included.
    pub ties: usize,
}

/// Extremum of the ego payoff. Among tied rows the one with the largest
/// `gamma`, then the smallest `theta_a`, is reported.
pub fn extremum(rows: &[SweepRow], kind: ExtremumKind) -> Option<Extremum> {
    let target = rows.iter().map(|r| r.eu_a).reduce(match kind {
        ExtremumKind::Max => f64::max,
        ExtremumKind::Min => f64::min,
    })?;
    let tied: Vec<&SweepRow> = rows
        .iter()
        .filter(|r| (r.eu_a - target).abs() <= TIE_TOL)
        .collect();
    let best = tied
        .iter()
        .copied()
        .reduce(|best, r| {
            let better =
                r.gamma > best.gamma || (r.gamma == best.gamma && r.theta_a < best.theta_a);
            if better {
                r
            } else {
                best
            }
        })
        .expect("the extremum row is always among the ties");
    Some(Extremum {
        row: *best,
        ties: tied.len(),
    })
}

/// Gate-vs-gate payoff table at a fixed entanglement level, rows indexed by
/// A's gate and columns by B's, both in [`QuantumGate::ALL`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateTable {
    pub gamma: f64,
    pub eu_a: [[f64; 5]; 5],
    pub eu_b: [[f64; 5]; 5],
    pub distributions: Vec<Vec<OutcomeDistribution>>,
}

impl GateTable {
    pub fn eu_a_at(&self, a: QuantumGate, b: QuantumGate) -> f64 {
        self.eu_a[a.index()][b.index()]
    }

    pub fn row_a(&self, a: QuantumGate) -> [f64; 5] {
        self.eu_a[a.index()]
    }

    pub fn distribution(&self, a: QuantumGate, b: QuantumGate) -> OutcomeDistribution {
        self.distributions[a.index()][b.index()]
    }
}

pub fn sweep_g4(
    game: &TwoPlayerGame,
    initial: &StateVector4,
    gamma: EntanglementLevel,
) -> GateTable {
    let mut eu_a = [[0.0; 5]; 5];
    let mut eu_b = [[0.0; 5]; 5];
    let mut distributions = Vec::with_capacity(5);
    for ga in QuantumGate::ALL {
        let mut row = Vec::with_capacity(5);
        for gb in QuantumGate::ALL {
            let cfg = QuantumGameConfig::new(
                game.clone(),
                *initial,
                gamma,
                Strategy::Gate(ga),
                Strategy::Gate(gb),
            )
            .expect("two gates are the same strategy kind");
            let sol = solve(&cfg);
            eu_a[ga.index()][gb.index()] = sol.eu_a;
            eu_b[ga.index()][gb.index()] = sol.eu_b;
            row.push(sol.distribution);
        }
        distributions.push(row);
    }
    GateTable {
        gamma: gamma.gamma(),
        eu_a,
        eu_b,
        distributions,
    }
}

/// Shortest decimal form that round-trips the `f64`; `-0` prints as `0`.
pub(crate) fn num(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x}")
    }
}

pub fn write_sweep_csv<W: Write>(mut out: W, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(out, "gamma,theta_a,theta_b,p00,p01,p10,p11,eu_a,eu_b")?;
    for r in rows {
        let p = r.distribution.probabilities();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            num(r.gamma),
            num(r.theta_a),
            num(r.theta_b),
            num(p[0]),
            num(p[1]),
            num(p[2]),
            num(p[3]),
            num(r.eu_a),
            num(r.eu_b)
        )?;
    }
    Ok(())
}

pub fn write_gate_table_csv<W: Write>(mut out: W, table: &GateTable) -> io::Result<()> {
    writeln!(out, "gamma,gate_a,gate_b,p00,p01,p10,p11,eu_a,eu_b")?;
    for ga in QuantumGate::ALL {
        for gb in QuantumGate::ALL {
            let p = table.distribution(ga, gb).probabilities();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                num(table.gamma),
                ga,
                gb,
                num(p[0]),
                num(p[1]),
                num(p[2]),
                num(p[3]),
                num(table.eu_a[ga.index()][gb.index()]),
                num(table.eu_b[ga.index()][gb.index()])
            )?;
        }
    }
    Ok(())
}
