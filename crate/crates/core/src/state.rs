use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, kron_vec2, Vec2, Vec4, Vector, ZERO};

/// Tolerance on `Σ|c|² = 1` accepted by [`QubitPairState::new`].
pub const NORM_TOL: f64 = 1e-9;

/// Unit vector in the two-qubit Hilbert space, amplitudes on `{↑↑, ↑↓, ↓↑, ↓↓}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[Complex64; 4]", into = "[Complex64; 4]")]
pub struct QubitPairState(Vec4);

impl QubitPairState {
    pub const UU: usize = 0;
    pub const UD: usize = 1;
    pub const DU: usize = 2;
    pub const DD: usize = 3;

    /// Wraps amplitudes that are already normalized (within [`NORM_TOL`]).
    pub fn new(amps: [Complex64; 4]) -> Result<Self> {
        let v = Vector(amps);
        if !v.is_finite() {
            return Err(Error::NonFinite("state amplitudes"));
        }
        let norm = v.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(QubitPairState(v))
    }

    /// Normalizes arbitrary non-zero amplitudes.
    pub fn normalized(amps: [Complex64; 4]) -> Result<Self> {
        Self::from_vec(Vector(amps))
    }

    pub fn from_vec(v: Vec4) -> Result<Self> {
        if !v.is_finite() {
            return Err(Error::NonFinite("state amplitudes"));
        }
        let norm = v.norm();
        if norm == 0.0 {
            return Err(Error::NotNormalized { norm });
        }
        Ok(QubitPairState(v.scale_re(1.0 / norm)))
    }

    pub fn basis(index: usize) -> Self {
        QubitPairState(Vec4::basis(index))
    }

    /// `(|↑↑⟩ + e^{-iφ}|↓↓⟩)/√2`.
    pub fn bell_phi(phase: f64) -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let tail = Complex64::from_polar(h, -phase);
        QubitPairState(Vector([c(h, 0.0), ZERO, ZERO, tail]))
    }

    /// `(|↑↓⟩ ± |↓↑⟩)/√2`.
    pub fn bell_psi(antisymmetric: bool) -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = if antisymmetric { -h } else { h };
        QubitPairState(Vector([ZERO, c(h, 0.0), c(s, 0.0), ZERO]))
    }

    pub fn product(a: &Vec2, b: &Vec2) -> Result<Self> {
        Self::from_vec(kron_vec2(a, b))
    }

    pub fn amplitudes(&self) -> [Complex64; 4] {
        self.0 .0
    }

    pub fn as_vec(&self) -> &Vec4 {
        &self.0
    }

    pub fn amp(&self, index: usize) -> Complex64 {
        self.0 .0[index]
    }
}

impl TryFrom<[Complex64; 4]> for QubitPairState {
    type Error = Error;
    fn try_from(amps: [Complex64; 4]) -> Result<Self> {
        Self::new(amps)
    }
}

impl From<QubitPairState> for [Complex64; 4] {
    fn from(s: QubitPairState) -> Self {
        s.amplitudes()
    }
}

impl fmt::Display for QubitPairState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels = ["↑↑", "↑↓", "↓↑", "↓↓"];
        let mut first = true;
        for (a, l) in self.0 .0.iter().zip(labels) {
            if a.norm() == 0.0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            write!(f, "({:.6}{:+.6}i)|{l}⟩", a.re, a.im)?;
            first = false;
        }
        Ok(())
    }
}
