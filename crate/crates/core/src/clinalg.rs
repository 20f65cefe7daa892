//! Fixed-size complex linear algebra for two-qubit circuits.
//!
//! Everything here is a small `Copy` value: 2x2 and 4x4 operators, and the
//! four-amplitude joint state. Amplitudes are ordered `(s00, s01, s10, s11)`
//! with player A on the high bit, so index `2*j + k` is "A plays `j`, B plays
//! `k`".

use std::ops::Mul;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexScalar = Complex64;

/// Tolerance for exact algebraic identities (unitarity, involutions).
pub const ALGEBRA_TOL: f64 = 1e-12;
/// Tolerance for norms of states produced by chained circuit products.
pub const NORM_TOL: f64 = 1e-9;

pub const I: ComplexScalar = Complex64::new(0.0, 1.0);
pub const ONE: ComplexScalar = Complex64::new(1.0, 0.0);
pub const ZERO: ComplexScalar = Complex64::new(0.0, 0.0);

/// Dense `N x N` complex matrix stored row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Operator<const N: usize>(pub [[ComplexScalar; N]; N]);

pub type Operator2 = Operator<2>;
pub type Operator4 = Operator<4>;

impl<const N: usize> Operator<N> {
    pub fn identity() -> Self {
        let mut m = [[ZERO; N]; N];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = ONE;
        }
        Self(m)
    }

    pub fn zeros() -> Self {
        Self([[ZERO; N]; N])
    }

    pub fn from_real(entries: [[f64; N]; N]) -> Self {
        Self(entries.map(|row| row.map(|x| Complex64::new(x, 0.0))))
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> ComplexScalar {
        self.0[row][col]
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        let mut out = [[ZERO; N]; N];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.0[j][i].conj();
            }
        }
        Self(out)
    }

    pub fn scale(&self, factor: ComplexScalar) -> Self {
        Self(self.0.map(|row| row.map(|x| x * factor)))
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..N {
            for j in 0..N {
                worst = worst.max((self.0[i][j] - other.0[i][j]).norm());
            }
        }
        worst
    }

    /// `true` iff every entry of `M†M - I` has modulus at most `tol`.
    pub fn is_unitary(&self, tol: f64) -> bool {
        let gram = self.dagger() * *self;
        gram.max_abs_diff(&Self::identity()) <= tol
    }

    pub fn is_finite(&self) -> bool {
        self.0
            .iter()
            .flatten()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl<const N: usize> Mul for Operator<N> {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        let mut out = [[ZERO; N]; N];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                let mut acc = ZERO;
                for k in 0..N {
                    acc += self.0[i][k] * rhs.0[k][j];
                }
                *cell = acc;
            }
        }
        Self(out)
    }
}

/// Kronecker product: `result[2i+k][2j+l] = a[i][j] * b[k][l]`.
pub fn kron(a: &Operator2, b: &Operator2) -> Operator4 {
    let mut out = [[ZERO; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[2 * i + k][2 * j + l] = a.0[i][j] * b.0[k][l];
                }
            }
        }
    }
    Operator(out)
}

pub fn dagger(m: &Operator4) -> Operator4 {
    m.dagger()
}

pub fn apply(m: &Operator4, v: &StateVector4) -> StateVector4 {
    m.apply(v)
}

pub fn is_unitary<const N: usize>(m: &Operator<N>, tol: f64) -> bool {
    m.is_unitary(tol)
}

impl Operator4 {
    pub fn apply(&self, v: &StateVector4) -> StateVector4 {
        let mut out = [ZERO; 4];
        for (i, slot) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in 0..4 {
                acc += self.0[i][k] * v.0[k];
            }
            *slot = acc;
        }
        StateVector4(out)
    }
}

/// Joint two-player state over `(s00, s01, s10, s11)`.
///
/// Values built through [`StateVector4::new`] or [`StateVector4::normalized`]
/// are unit-norm; [`Operator4::apply`] preserves that only for unitary
/// operators, so the norm can be rechecked with [`StateVector4::norm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector4(pub(crate) [ComplexScalar; 4]);

impl StateVector4 {
    /// Rejects non-finite amplitudes and vectors whose squared norm is more
    /// than [`NORM_TOL`] away from one.
    pub fn new(amplitudes: [ComplexScalar; 4]) -> Result<Self> {
        let v = Self(amplitudes);
        if !v.is_finite() {
            return Err(Error::NonFinite("state amplitudes"));
        }
        let dev = (v.norm_sqr() - 1.0).abs();
        if dev > NORM_TOL {
            return Err(Error::NotNormalized {
                what: "joint state",
                deviation: dev,
            });
        }
        Ok(v)
    }

    /// Scales `amplitudes` to unit norm. Also returns the deviation of the
    /// input's squared norm from one.
    pub fn normalized(amplitudes: [ComplexScalar; 4]) -> Result<(Self, f64)> {
        let raw = Self(amplitudes);
        if !raw.is_finite() {
            return Err(Error::NonFinite("state amplitudes"));
        }
        let n2 = raw.norm_sqr();
        if n2 == 0.0 {
            return Err(Error::ZeroState);
        }
        let scale = 1.0 / n2.sqrt();
        Ok((Self(amplitudes.map(|z| z * scale)), (n2 - 1.0).abs()))
    }

    /// Computational basis state `e_sjk` for `index = 2*j + k`.
    pub fn basis(index: usize) -> Self {
        assert!(index < 4, "basis index {index} out of range");
        let mut amps = [ZERO; 4];
        amps[index] = ONE;
        Self(amps)
    }

    /// All four amplitudes equal to `1/2` (real, positive).
    pub fn equal_superposition() -> Self {
        Self([Complex64::new(0.5, 0.0); 4])
    }

    pub fn amplitudes(&self) -> [ComplexScalar; 4] {
        self.0
    }

    pub fn amplitude(&self, index: usize) -> ComplexScalar {
        self.0[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Multiplies every amplitude by `phase`; unit modulus keeps the state
    /// normalized.
    pub fn with_global_phase(&self, phase: ComplexScalar) -> Self {
        Self(self.0.map(|z| z * phase))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `|amplitude|^2` per outcome.
    pub fn probabilities(&self) -> [f64; 4] {
        self.0.map(|z| z.norm_sqr())
    }
}
