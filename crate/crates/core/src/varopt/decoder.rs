//! Single-qubit decoder tiers applied after the phase encoding.
//!
//! Every tier is a product of per-qubit `R_z(alpha) R_x(beta)` blocks
//! (`R_x` acts first). Tiers differ only in how the `(alpha, beta)` pairs are
//! shared across qubits:
//!
//! | tier | angles | layout |
//! |------|--------|--------|
//! | T1 | 0 | fixed `(0, pi/2)` on every qubit (Ramsey) |
//! | T2 | 2 | one shared pair |
//! | T3 | 4 | pair for qubit 0, pair shared by qubits 1..N-1 |
//! | T4 | 2N | one pair per qubit |

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{rotation_matrix, Axis, StateVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DecoderTier {
    T1,
    T2,
    T3,
    T4,
}

impl DecoderTier {
    pub const ALL: [DecoderTier; 4] = [DecoderTier::T1, DecoderTier::T2, DecoderTier::T3, DecoderTier::T4];

    pub fn n_angles(self, n_qubits: usize) -> usize {
        match self {
            DecoderTier::T1 => 0,
            DecoderTier::T2 => 2,
            DecoderTier::T3 => 4,
            DecoderTier::T4 => 2 * n_qubits,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DecoderTier::T1 => "T1",
            DecoderTier::T2 => "T2",
            DecoderTier::T3 => "T3",
            DecoderTier::T4 => "T4",
        }
    }
}

impl fmt::Display for DecoderTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DecoderTier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "T1" => Ok(DecoderTier::T1),
            "T2" => Ok(DecoderTier::T2),
            "T3" => Ok(DecoderTier::T3),
            "T4" => Ok(DecoderTier::T4),
            other => Err(Error::InvalidConfig(format!("unknown decoder tier {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoderSpec {
    pub tier: DecoderTier,
    pub angles: Vec<f64>,
}

impl DecoderSpec {
    pub fn new(tier: DecoderTier, n_qubits: usize, angles: Vec<f64>) -> Result<Self> {
        let spec = Self { tier, angles };
        spec.validate(n_qubits)?;
        Ok(spec)
    }

    /// Fixed Ramsey readout.
    pub fn t1() -> Self {
        Self {
            tier: DecoderTier::T1,
            angles: Vec::new(),
        }
    }

    /// The tier's parameters set so that it reproduces T1 exactly.
    pub fn ramsey(tier: DecoderTier, n_qubits: usize) -> Self {
        let angles = (0..tier.n_angles(n_qubits) / 2)
            .flat_map(|_| [0.0, FRAC_PI_2])
            .collect();
        Self { tier, angles }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        let expected = self.tier.n_angles(n_qubits);
        if self.angles.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: self.angles.len(),
            });
        }
        Ok(())
    }

    /// `(alpha, beta)` for every qubit after resolving the tier's sharing.
    pub fn per_qubit_angles(&self, n_qubits: usize) -> Result<Vec<(f64, f64)>> {
        self.validate(n_qubits)?;
        let a = &self.angles;
        Ok((0..n_qubits)
            .map(|q| match self.tier {
                DecoderTier::T1 => (0.0, FRAC_PI_2),
                DecoderTier::T2 => (a[0], a[1]),
                DecoderTier::T3 if q == 0 => (a[0], a[1]),
                DecoderTier::T3 => (a[2], a[3]),
                DecoderTier::T4 => (a[2 * q], a[2 * q + 1]),
            })
            .collect())
    }

    /// Per-qubit 2x2 matrices `R_z(alpha) R_x(beta)`.
    pub fn per_qubit_matrices(&self, n_qubits: usize) -> Result<Vec<[[Complex64; 2]; 2]>> {
        Ok(self
            .per_qubit_angles(n_qubits)?
            .into_iter()
            .map(|(alpha, beta)| matmul2(&rotation_matrix(Axis::Z, alpha), &rotation_matrix(Axis::X, beta)))
            .collect())
    }
}

pub(crate) fn matmul2(a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn apply_decoder(psi: &mut StateVector, spec: &DecoderSpec) -> Result<()> {
    let n = psi.n_qubits();
    for (q, u) in spec.per_qubit_matrices(n)?.iter().enumerate() {
        psi.apply_single_qubit(q, u)?;
    }
    Ok(())
}
