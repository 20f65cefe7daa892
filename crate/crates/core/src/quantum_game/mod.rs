//! Two-player quantum game circuits.
//!
//! Both models run the same four-stage circuit on a joint state `psi0`:
//!
//! ```text
//! psi_f = J(gamma)^dagger * (U_A kron U_B) * J(gamma) * psi0
//! ```
//!
//! where `J(gamma) = exp(-i gamma/2 X kron X)` entangles the players. The
//! one-parameter model (QG-U1) lets each player pick a rotation `U(theta)`;
//! the gate model (QG-G4) restricts each player to one of five fixed gates.

mod sweep;
pub(crate) use sweep::num;

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::classical_game::TwoPlayerGame;
use crate::clinalg::{
    kron, ComplexScalar, Operator, Operator2, Operator4, StateVector4, I, ONE, ZERO,
};
use crate::error::{check_range, Error, Result};
use crate::outcome::{JointOutcome, OutcomeDistribution, Player};

pub use sweep::{
    extremum, sweep_g4, sweep_u1, write_gate_table_csv, write_sweep_csv, Extremum, ExtremumKind,
    GateTable, SweepGrid, SweepMode, SweepRow,
};

/// Tolerance used when validating single-qubit inputs.
pub const QUBIT_TOL: f64 = 1e-6;

/// Single-player state `alpha |0> + beta |1>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Qubit {
    pub alpha: ComplexScalar,
    pub beta: ComplexScalar,
}

impl Qubit {
    pub fn new(alpha: ComplexScalar, beta: ComplexScalar) -> Self {
        Self { alpha, beta }
    }

    pub fn zero() -> Self {
        Self::new(ONE, ZERO)
    }

    pub fn one() -> Self {
        Self::new(ZERO, ONE)
    }

    /// `(|0> + |1>) / sqrt(2)`
    pub fn plus() -> Self {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        Self::new(h, h)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.alpha.norm_sqr() + self.beta.norm_sqr()
    }
}

/// `psi0 = a kron b`.
pub fn qubit_product(a: &Qubit, b: &Qubit) -> Result<StateVector4> {
    for q in [a, b] {
        let dev = (q.norm_sqr() - 1.0).abs();
        if !dev.is_finite() {
            return Err(Error::NonFinite("qubit amplitudes"));
        }
        if dev > QUBIT_TOL {
            return Err(Error::NotNormalized {
                what: "qubit",
                deviation: dev,
            });
        }
    }
    Ok(StateVector4([
        a.alpha * b.alpha,
        a.alpha * b.beta,
        a.beta * b.alpha,
        a.beta * b.beta,
    ]))
}

/// Entanglement factor `gamma` in `[0, pi/2]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct EntanglementLevel(f64);

impl EntanglementLevel {
    pub const NONE: Self = Self(0.0);
    pub const MAX: Self = Self(FRAC_PI_2);

    pub fn new(gamma: f64) -> Result<Self> {
        check_range("gamma", gamma, 0.0, FRAC_PI_2)?;
        Ok(Self(gamma))
    }

    pub fn gamma(self) -> f64 {
        self.0
    }
}

/// Two-parameter strategy rotation; `phi = 0` gives the one-parameter model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyU {
    theta: f64,
    phi: f64,
}

impl StrategyU {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        check_range("theta", theta, 0.0, PI)?;
        check_range("phi", phi, 0.0, FRAC_PI_2)?;
        Ok(Self { theta, phi })
    }

    pub fn with_theta(theta: f64) -> Result<Self> {
        Self::new(theta, 0.0)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QuantumGate {
    Hadamard,
    PauliX,
    PauliY,
    PauliZ,
    Identity,
}

impl QuantumGate {
    /// Table order used by gate sweeps: `H, X, Y, Z, I`.
    pub const ALL: [QuantumGate; 5] = [
        QuantumGate::Hadamard,
        QuantumGate::PauliX,
        QuantumGate::PauliY,
        QuantumGate::PauliZ,
        QuantumGate::Identity,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            QuantumGate::Hadamard => "H",
            QuantumGate::PauliX => "X",
            QuantumGate::PauliY => "Y",
            QuantumGate::PauliZ => "Z",
            QuantumGate::Identity => "I",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for QuantumGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for QuantumGate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "h" | "hadamard" => Ok(QuantumGate::Hadamard),
            "x" | "paulix" | "sigma_x" => Ok(QuantumGate::PauliX),
            "y" | "pauliy" | "sigma_y" => Ok(QuantumGate::PauliY),
            "z" | "pauliz" | "sigma_z" => Ok(QuantumGate::PauliZ),
            "i" | "identity" | "i2" => Ok(QuantumGate::Identity),
            _ => Err(Error::UnknownName {
                kind: "gate",
                name: s.to_string(),
            }),
        }
    }
}

/// Parses an initial joint state: `equal`, a basis label `s00`..`s11`, or
/// eight comma-separated reals `re00,im00,re01,im01,re10,im10,re11,im11`.
/// Explicit amplitudes are normalized; the returned deviation is
/// `|norm^2 - 1|` of the input (0 for named states).
pub fn parse_initial_state(text: &str) -> Result<(StateVector4, f64)> {
    let t = text.trim();
    if t.eq_ignore_ascii_case("equal") {
        return Ok((StateVector4::equal_superposition(), 0.0));
    }
    if let Ok(j) = t.parse::<JointOutcome>() {
        return Ok((StateVector4::basis(j.index()), 0.0));
    }
    let parts: Vec<f64> = t
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|p| !p.is_empty())
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::UnknownName {
            kind: "initial state",
            name: text.to_string(),
        })?;
    if parts.len() != 8 {
        return Err(Error::InvalidConfig(format!(
            "initial state needs 8 components (re/im per amplitude), got {}",
            parts.len()
        )));
    }
    let amps = [0, 1, 2, 3].map(|i| ComplexScalar::new(parts[2 * i], parts[2 * i + 1]));
    StateVector4::normalized(amps)
}

/// A player's quantum move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Strategy {
    Unitary(StrategyU),
    Gate(QuantumGate),
}

impl Strategy {
    pub fn matrix(&self) -> Operator2 {
        match self {
            Strategy::Unitary(s) => strategy_unitary(s),
            Strategy::Gate(g) => gate_matrix(*g),
        }
    }

    fn same_kind(&self, other: &Strategy) -> bool {
        matches!(
            (self, other),
            (Strategy::Unitary(_), Strategy::Unitary(_)) | (Strategy::Gate(_), Strategy::Gate(_))
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumGameConfig {
    pub game: TwoPlayerGame,
    pub initial: StateVector4,
    pub gamma: EntanglementLevel,
    strategy_a: Strategy,
    strategy_b: Strategy,
}

impl QuantumGameConfig {
    pub fn new(
        game: TwoPlayerGame,
        initial: StateVector4,
        gamma: EntanglementLevel,
        strategy_a: Strategy,
        strategy_b: Strategy,
    ) -> Result<Self> {
        if !strategy_a.same_kind(&strategy_b) {
            return Err(Error::MixedStrategyKinds);
        }
        Ok(Self {
            game,
            initial,
            gamma,
            strategy_a,
            strategy_b,
        })
    }

    pub fn strategy(&self, player: Player) -> Strategy {
        match player {
            Player::A => self.strategy_a,
            Player::B => self.strategy_b,
        }
    }
}

/// `J(gamma)`: `cos(gamma/2)` on the diagonal, `-i sin(gamma/2)` on the
/// anti-diagonal.
pub fn entangler(gamma: EntanglementLevel) -> Operator4 {
    let half = gamma.gamma() / 2.0;
    let c = Complex64::new(half.cos(), 0.0);
    let s = -I * half.sin();
    let mut m = [[ZERO; 4]; 4];
    for i in 0..4 {
        m[i][i] = c;
        m[i][3 - i] = s;
    }
    Operator(m)
}

pub fn strategy_unitary(s: &StrategyU) -> Operator2 {
    let (sin, cos) = (s.theta / 2.0).sin_cos();
    let phase = Complex64::from_polar(1.0, s.phi);
    Operator([
        [phase * cos, Complex64::new(sin, 0.0)],
        [Complex64::new(-sin, 0.0), phase.conj() * cos],
    ])
}

pub fn gate_matrix(g: QuantumGate) -> Operator2 {
    match g {
        QuantumGate::Hadamard => Operator::from_real([
            [FRAC_1_SQRT_2, FRAC_1_SQRT_2],
            [FRAC_1_SQRT_2, -FRAC_1_SQRT_2],
        ]),
        QuantumGate::PauliX => Operator::from_real([[0.0, 1.0], [1.0, 0.0]]),
        QuantumGate::PauliY => Operator([[ZERO, -I], [I, ZERO]]),
        QuantumGate::PauliZ => Operator::from_real([[1.0, 0.0], [0.0, -1.0]]),
        QuantumGate::Identity => Operator2::identity(),
    }
}

/// Runs the circuit stage by stage: entangle, play, disentangle.
pub fn final_state(cfg: &QuantumGameConfig) -> StateVector4 {
    let j = entangler(cfg.gamma);
    let play = kron(&cfg.strategy_a.matrix(), &cfg.strategy_b.matrix());
    let entangled = j.apply(&cfg.initial);
    let played = play.apply(&entangled);
    j.dagger().apply(&played)
}

pub fn outcome_probabilities(psi: &StateVector4) -> OutcomeDistribution {
    let p = psi.probabilities();
    let total: f64 = p.iter().sum();
    // Unit-norm input; dividing by the sum only removes rounding drift.
    OutcomeDistribution::new(p.map(|x| x / total))
        .expect("probabilities of a normalized state form a distribution")
}

/// `E(u) = sum_s p(s) u(s)` for one player.
pub fn expected_payoff(dist: &OutcomeDistribution, game: &TwoPlayerGame, player: Player) -> f64 {
    dist.probabilities()
        .iter()
        .zip(game.payoff_vector(player))
        .map(|(p, u)| p * u)
        .sum()
}

/// Distribution and both expected payoffs for a fully specified config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub distribution: OutcomeDistribution,
    pub eu_a: f64,
    pub eu_b: f64,
}

pub fn solve(cfg: &QuantumGameConfig) -> Solution {
    let distribution = outcome_probabilities(&final_state(cfg));
    Solution {
        distribution,
        eu_a: expected_payoff(&distribution, &cfg.game, Player::A),
        eu_b: expected_payoff(&distribution, &cfg.game, Player::B),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    /// Maximizes the ego payoff on the `theta_IV = 0` surface.
    QgU1_1,
    /// Minimizes the ego payoff on the same surface.
    QgU1_2,
    /// Ego plays the identity gate at maximal entanglement.
    QgG4,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "qg-u1-1" => Ok(Preset::QgU1_1),
            "qg-u1-2" => Ok(Preset::QgU1_2),
            "qg-g4" => Ok(Preset::QgG4),
            _ => Err(Error::UnknownName {
                kind: "preset",
                name: s.to_string(),
            }),
        }
    }
}

/// Preset parameters; `strategy_b` is `None` where the opponent's move is
/// left to the caller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetTemplate {
    pub gamma: EntanglementLevel,
    pub strategy_a: Strategy,
    pub strategy_b: Option<Strategy>,
}

impl PresetTemplate {
    pub fn into_config(
        self,
        game: TwoPlayerGame,
        initial: StateVector4,
        strategy_b: Option<Strategy>,
    ) -> Result<QuantumGameConfig> {
        let b = strategy_b.or(self.strategy_b).ok_or_else(|| {
            Error::InvalidConfig("opponent strategy required for this preset".into())
        })?;
        QuantumGameConfig::new(game, initial, self.gamma, self.strategy_a, b)
    }
}

pub fn preset(name: Preset) -> PresetTemplate {
    let u = |theta| Strategy::Unitary(StrategyU::with_theta(theta).expect("preset angle in range"));
    match name {
        Preset::QgU1_1 => PresetTemplate {
            gamma: EntanglementLevel::NONE,
            strategy_a: u(FRAC_PI_2),
            strategy_b: Some(u(0.0)),
        },
        Preset::QgU1_2 => PresetTemplate {
            gamma: EntanglementLevel::MAX,
            strategy_a: u(0.0),
            strategy_b: Some(u(0.0)),
        },
        Preset::QgG4 => PresetTemplate {
            gamma: EntanglementLevel::MAX,
            strategy_a: Strategy::Gate(QuantumGate::Identity),
            strategy_b: None,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clinalg::ALGEBRA_TOL;
    use crate::outcome::JointOutcome;

    fn close(a: ComplexScalar, b: ComplexScalar) -> bool {
        (a - b).norm() < 1e-12
    }

    fn gates(
        a: QuantumGate,
        b: QuantumGate,
        gamma: EntanglementLevel,
        psi0: StateVector4,
    ) -> QuantumGameConfig {
        QuantumGameConfig::new(
            TwoPlayerGame::merging(),
            psi0,
            gamma,
            Strategy::Gate(a),
            Strategy::Gate(b),
        )
        .unwrap()
    }

    #[test]
    fn product_states() {
        assert_eq!(
            qubit_product(&Qubit::zero(), &Qubit::zero()).unwrap(),
            StateVector4::basis(0)
        );
        assert_eq!(
            qubit_product(&Qubit::one(), &Qubit::zero()).unwrap(),
            StateVector4::basis(2)
        );
        let plus = qubit_product(&Qubit::plus(), &Qubit::plus()).unwrap();
        for p in plus.probabilities() {
            assert!((p - 0.25).abs() < 1e-15);
        }
        let bad = Qubit::new(ONE, ONE);
        assert!(matches!(
            qubit_product(&bad, &Qubit::zero()),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn entangler_endpoints() {
        assert_eq!(entangler(EntanglementLevel::NONE), Operator4::identity());
        let j = entangler(EntanglementLevel::MAX);
        let h = FRAC_1_SQRT_2;
        for i in 0..4 {
            assert!(close(j.get(i, i), Complex64::new(h, 0.0)));
            assert!(close(j.get(i, 3 - i), Complex64::new(0.0, -h)));
        }
        assert!(EntanglementLevel::new(-0.1).is_err());
        assert!(EntanglementLevel::new(1.6).is_err());
    }

    #[test]
    fn entangler_dagger_has_positive_imaginary_antidiagonal() {
        for k in 0..=20 {
            let g = EntanglementLevel::new(FRAC_PI_2 * k as f64 / 20.0).unwrap();
            let jd = entangler(g).dagger();
            let (s, c) = (g.gamma() / 2.0).sin_cos();
            for i in 0..4 {
                assert!(close(jd.get(i, i), Complex64::new(c, 0.0)));
                assert!(close(jd.get(i, 3 - i), Complex64::new(0.0, s)));
            }
            assert!((jd * entangler(g)).max_abs_diff(&Operator4::identity()) < ALGEBRA_TOL);
        }
    }

    #[test]
    fn entangler_on_s10() {
        let out = entangler(EntanglementLevel::MAX).apply(&StateVector4::basis(2));
        let h = FRAC_1_SQRT_2;
        assert!(close(out.amplitude(2), Complex64::new(h, 0.0)));
        assert!(close(out.amplitude(1), Complex64::new(0.0, -h)));
        assert!(out.amplitude(0).norm() < 1e-15 && out.amplitude(3).norm() < 1e-15);
    }

    #[test]
    fn strategy_unitary_values() {
        assert_eq!(
            strategy_unitary(&StrategyU::new(0.0, 0.0).unwrap()),
            Operator2::identity()
        );
        let flip = strategy_unitary(&StrategyU::new(PI, 0.0).unwrap());
        assert!(flip.max_abs_diff(&Operator::from_real([[0.0, 1.0], [-1.0, 0.0]])) < 1e-15);
        let half = strategy_unitary(&StrategyU::new(FRAC_PI_2, 0.0).unwrap());
        let h = FRAC_1_SQRT_2;
        assert!(half.max_abs_diff(&Operator::from_real([[h, h], [-h, h]])) < 1e-15);
        assert!(StrategyU::new(3.2, 0.0).is_err());
        assert!(StrategyU::new(1.0, 1.6).is_err());
        let phased = strategy_unitary(&StrategyU::new(1.0, 0.7).unwrap());
        assert!(phased.is_unitary(ALGEBRA_TOL));
    }

    #[test]
    fn gate_matrices_are_literal() {
        assert_eq!(gate_matrix(QuantumGate::Identity), Operator2::identity());
        let y = gate_matrix(QuantumGate::PauliY);
        assert_eq!(y.get(0, 1), Complex64::new(0.0, -1.0));
        assert_eq!(y.get(1, 0), Complex64::new(0.0, 1.0));
        let h = gate_matrix(QuantumGate::Hadamard);
        assert!((h.get(1, 1).re + FRAC_1_SQRT_2).abs() < 1e-16);
        for g in QuantumGate::ALL {
            assert!(gate_matrix(g).is_unitary(ALGEBRA_TOL), "{g}");
            assert_eq!(g.short_name().parse::<QuantumGate>().unwrap(), g);
        }
    }

    #[test]
    fn identity_circuit_is_classical_limit() {
        let psi0 = StateVector4::normalized([
            Complex64::new(0.3, 0.1),
            Complex64::new(-0.2, 0.5),
            Complex64::new(0.7, 0.0),
            Complex64::new(0.0, -0.4),
        ])
        .unwrap()
        .0;
        let cfg = gates(
            QuantumGate::Identity,
            QuantumGate::Identity,
            EntanglementLevel::NONE,
            psi0,
        );
        let out = final_state(&cfg);
        for i in 0..4 {
            assert!(close(out.amplitude(i), psi0.amplitude(i)));
        }
    }

    #[test]
    fn identity_vs_pauli_z_reaches_s01() {
        let cfg = gates(
            QuantumGate::Identity,
            QuantumGate::PauliZ,
            EntanglementLevel::MAX,
            StateVector4::basis(2),
        );
        let psi = final_state(&cfg);
        assert!(close(psi.amplitude(1), I));
        let sol = solve(&cfg);
        assert!((sol.distribution.prob(JointOutcome::S01) - 1.0).abs() < 1e-12);
        assert!((sol.eu_a - 10.0).abs() < 1e-12);
    }

    #[test]
    fn half_turn_on_equal_superposition() {
        let cfg = preset(Preset::QgU1_1)
            .into_config(
                TwoPlayerGame::merging(),
                StateVector4::equal_superposition(),
                None,
            )
            .unwrap();
        let p = solve(&cfg).distribution.probabilities();
        let want = [0.5, 0.5, 0.0, 0.0];
        for i in 0..4 {
            assert!((p[i] - want[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn outcome_probabilities_ignore_phase() {
        let d = outcome_probabilities(&StateVector4::basis(1).with_global_phase(I));
        assert_eq!(d.probabilities(), [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(
            outcome_probabilities(&StateVector4::basis(0)).probabilities(),
            [1.0, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn expected_payoff_examples() {
        let g = TwoPlayerGame::merging();
        assert!(
            (expected_payoff(&OutcomeDistribution::uniform(), &g, Player::A) - 3.75).abs() < 1e-12
        );
        assert_eq!(
            expected_payoff(
                &OutcomeDistribution::certain(JointOutcome::S01),
                &g,
                Player::A
            ),
            10.0
        );
        assert_eq!(
            expected_payoff(
                &OutcomeDistribution::certain(JointOutcome::S00),
                &g,
                Player::A
            ),
            0.0
        );
    }

    #[test]
    fn presets() {
        let u1 = preset(Preset::QgU1_1);
        assert_eq!(u1.gamma.gamma(), 0.0);
        assert_eq!(
            u1.strategy_a,
            Strategy::Unitary(StrategyU::with_theta(FRAC_PI_2).unwrap())
        );
        assert_eq!(
            u1.strategy_b,
            Some(Strategy::Unitary(StrategyU::with_theta(0.0).unwrap()))
        );
        let u2 = preset(Preset::QgU1_2);
        assert_eq!(u2.gamma.gamma(), FRAC_PI_2);
        assert_eq!(
            u2.strategy_a,
            Strategy::Unitary(StrategyU::with_theta(0.0).unwrap())
        );
        let g4 = preset(Preset::QgG4);
        assert_eq!(g4.gamma.gamma(), FRAC_PI_2);
        assert_eq!(g4.strategy_a, Strategy::Gate(QuantumGate::Identity));
        assert!(g4.strategy_b.is_none());
        let err = g4.into_config(TwoPlayerGame::merging(), StateVector4::basis(2), None);
        assert!(err.is_err());
        assert_eq!("QG_U1_2".parse::<Preset>().unwrap(), Preset::QgU1_2);
    }

    #[test]
    fn mixed_kinds_rejected() {
        let r = QuantumGameConfig::new(
            TwoPlayerGame::merging(),
            StateVector4::basis(0),
            EntanglementLevel::NONE,
            Strategy::Gate(QuantumGate::Identity),
            Strategy::Unitary(StrategyU::with_theta(0.0).unwrap()),
        );
        assert!(matches!(r, Err(Error::MixedStrategyKinds)));
    }

    #[test]
    fn initial_state_forms() {
        assert_eq!(
            parse_initial_state("equal").unwrap().0,
            StateVector4::equal_superposition()
        );
        assert_eq!(
            parse_initial_state("S10").unwrap().0,
            StateVector4::basis(2)
        );
        let (psi, dev) = parse_initial_state("1,0, 0,0, 0,0, 0,1").unwrap();
        assert!((dev - 1.0).abs() < 1e-15);
        assert!((psi.amplitude(3).im - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(parse_initial_state("1,0,0").is_err());
        assert!(parse_initial_state("0,0,0,0,0,0,0,0").is_err());
        assert!(parse_initial_state("bogus").is_err());
    }
}
