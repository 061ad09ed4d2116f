//! Classical and quantum Fisher information for the pair `(B0, g)`.
//!
//! Outcome probabilities come from encoding the probe with per-spin `R_z`
//! phases, applying a single-qubit decoder and measuring in the
//! computational basis. Derivatives with respect to each phase use the
//! two-point parameter-shift rule and are combined into `(B0, g)` derivatives
//! through the sensing matrix, so one classical FIM costs `2N + 1`
//! probability evaluations.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chain::{phases_at, ChainConfig, GeneratorTable, ParameterPoint};
use crate::error::{Error, Result};
use crate::qsim::StateVector;
use crate::varopt::decoder::DecoderSpec;

/// Probabilities below this are treated as zero-outcome candidates.
pub const P_FLOOR: f64 = 1e-12;
/// Below this derivative magnitude a zero-probability outcome is dropped.
pub const DERIVATIVE_FLOOR: f64 = 1e-9;
/// Regularizer in `log det(F + lambda I)`.
pub const DEFAULT_LAMBDA: f64 = 1e-6;

/// Symmetric 2x2 matrix over `(B0, g)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FisherMatrix {
    pub bb: f64,
    pub gg: f64,
    pub bg: f64,
}

impl FisherMatrix {
    pub fn new(bb: f64, gg: f64, bg: f64) -> Self {
        Self { bb, gg, bg }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn det(&self) -> f64 {
        self.bb * self.gg - self.bg * self.bg
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        match (a, b) {
            (0, 0) => self.bb,
            (1, 1) => self.gg,
            _ => self.bg,
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.bb * s, self.gg * s, self.bg * s)
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.bb >= -tol && self.gg >= -tol && self.det() >= -tol
    }

    /// Precision on `g` with `B0` as a nuisance parameter: `gg - bg^2 / bb`.
    pub fn schur_complement_g(&self) -> f64 {
        self.gg - self.bg * self.bg / self.bb
    }

    pub fn max_abs_diff(&self, other: &FisherMatrix) -> f64 {
        (self.bb - other.bb)
            .abs()
            .max((self.gg - other.gg).abs())
            .max((self.bg - other.bg).abs())
    }
}

/// Outcome distribution over the `2^N` computational basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityDistribution(Vec<f64>);

impl ProbabilityDistribution {
    pub const SUM_TOL: f64 = 1e-10;

    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() || !p.len().is_power_of_two() {
            return Err(Error::NotPowerOfTwo(p.len()));
        }
        if let Some(x) = p.iter().find(|x| !(x.is_finite() && **x >= -Self::SUM_TOL)) {
            return Err(Error::InvalidDistribution(format!("entry {x} is not a probability")));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > Self::SUM_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {s}")));
        }
        Ok(Self(p))
    }

    /// Equal weight on the listed basis indices.
    pub fn uniform_over(dim: usize, support: &[usize]) -> Result<Self> {
        let mut p = vec![0.0; dim];
        for &k in support {
            if k >= dim {
                return Err(Error::IndexOutOfRange { index: k, limit: dim });
            }
            p[k] += 1.0 / support.len() as f64;
        }
        Self::new(p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Cached encoder/decoder data for repeated Fisher evaluations at one
/// operating point.
#[derive(Clone, Debug)]
pub struct FimEvaluator {
    n: usize,
    base_phases: Vec<f64>,
    /// `d phi_i / d x_a`
    jacobian: Vec<[f64; 2]>,
    decoder: Vec<[[Complex64; 2]; 2]>,
}

impl FimEvaluator {
    pub fn new(cfg: &ChainConfig, pt: ParameterPoint, decoder: &DecoderSpec) -> Result<Self> {
        cfg.validate()?;
        let m = cfg.sensing_matrix();
        Ok(Self {
            n: cfg.n_spins,
            base_phases: phases_at(cfg, pt),
            jacobian: m
                .rows()
                .iter()
                .map(|r| [cfg.gamma_e_t * r[0], cfg.gamma_e_t * r[1]])
                .collect(),
            decoder: decoder.per_qubit_matrices(cfg.n_spins)?,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    fn check(&self, probe: &StateVector) -> Result<()> {
        if probe.n_qubits() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: probe.n_qubits(),
            });
        }
        Ok(())
    }

    fn probabilities_with(&self, probe: &StateVector, phases: &[f64]) -> Vec<f64> {
        let mut psi = probe.clone();
        psi.apply_diagonal_phases(phases).expect("phase count checked");
        for (q, u) in self.decoder.iter().enumerate() {
            psi.apply_single_qubit(q, u).expect("qubit index checked");
        }
        psi.probabilities()
    }

    /// Outcome probabilities with phase `i` shifted by `delta`.
    pub fn shifted_probabilities(&self, probe: &StateVector, qubit: usize, delta: f64) -> Result<Vec<f64>> {
        self.check(probe)?;
        if qubit >= self.n {
            return Err(Error::IndexOutOfRange {
                index: qubit,
                limit: self.n,
            });
        }
        let mut phases = self.base_phases.clone();
        phases[qubit] += delta;
        Ok(self.probabilities_with(probe, &phases))
    }

    pub fn probabilities(&self, probe: &StateVector) -> Result<Vec<f64>> {
        self.check(probe)?;
        Ok(self.probabilities_with(probe, &self.base_phases))
    }

    /// `d p_k / d phi_i` from the `+-pi/2` shifted pair.
    pub fn phase_derivative(&self, probe: &StateVector, qubit: usize) -> Result<Vec<f64>> {
        let plus = self.shifted_probabilities(probe, qubit, FRAC_PI_2)?;
        let minus = self.shifted_probabilities(probe, qubit, -FRAC_PI_2)?;
        Ok(plus.iter().zip(&minus).map(|(a, b)| 0.5 * (a - b)).collect())
    }

    /// `d p_k / d x_a` for `a = B0, g`.
    pub fn parameter_derivatives(&self, probe: &StateVector) -> Result<[Vec<f64>; 2]> {
        let dim = probe.dim();
        let mut d = [vec![0.0; dim], vec![0.0; dim]];
        for i in 0..self.n {
            let dphi = self.phase_derivative(probe, i)?;
            for (k, v) in dphi.iter().enumerate() {
                d[0][k] += self.jacobian[i][0] * v;
                d[1][k] += self.jacobian[i][1] * v;
            }
        }
        Ok(d)
    }

    pub fn classical_fim(&self, probe: &StateVector) -> Result<FisherMatrix> {
        let p = self.probabilities(probe)?;
        let d = self.parameter_derivatives(probe)?;
        Ok(assemble_fim(&p, &d))
    }
}

/// `F_ab = sum_k (d_a p_k)(d_b p_k) / p_k` with the small-probability rule:
/// outcomes with `p_k < 1e-12` are dropped when both derivatives are below
/// `1e-9` and evaluated at `p_k = 1e-12` otherwise.
pub fn assemble_fim(p: &[f64], d: &[Vec<f64>; 2]) -> FisherMatrix {
    let mut f = FisherMatrix::zero();
    for (k, &pk) in p.iter().enumerate() {
        let (da, db) = (d[0][k], d[1][k]);
        let pk = if pk < P_FLOOR {
            if da.abs() < DERIVATIVE_FLOOR && db.abs() < DERIVATIVE_FLOOR {
                continue;
            }
            P_FLOOR
        } else {
            pk
        };
        f.bb += da * da / pk;
        f.gg += db * db / pk;
        f.bg += da * db / pk;
    }
    f
}

pub fn outcome_probabilities(
    probe: &StateVector,
    cfg: &ChainConfig,
    pt: ParameterPoint,
    decoder: &DecoderSpec,
) -> Result<ProbabilityDistribution> {
    let p = FimEvaluator::new(cfg, pt, decoder)?.probabilities(probe)?;
    ProbabilityDistribution::new(p)
}

/// `d p_k / d phi_qubit` for every outcome `k`.
pub fn parameter_shift_gradient(
    probe: &StateVector,
    cfg: &ChainConfig,
    pt: ParameterPoint,
    decoder: &DecoderSpec,
    qubit: usize,
) -> Result<Vec<f64>> {
    FimEvaluator::new(cfg, pt, decoder)?.phase_derivative(probe, qubit)
}

pub fn classical_fim(
    probe: &StateVector,
    cfg: &ChainConfig,
    pt: ParameterPoint,
    decoder: &DecoderSpec,
) -> Result<FisherMatrix> {
    FimEvaluator::new(cfg, pt, decoder)?.classical_fim(probe)
}

/// `Q_ab = 4 [sum p lam_a lam_b - (sum p lam_a)(sum p lam_b)]`, scaled by `gamma_e_t^2`.
fn covariance_fim(p: &[f64], table: &GeneratorTable, gamma_e_t: f64) -> FisherMatrix {
    let (mut mb, mut mg, mut sbb, mut sgg, mut sbg) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&pk, &b), &g) in p.iter().zip(&table.lam_b).zip(&table.lam_g) {
        mb += pk * b;
        mg += pk * g;
        sbb += pk * b * b;
        sgg += pk * g * g;
        sbg += pk * b * g;
    }
    let s = 4.0 * gamma_e_t * gamma_e_t;
    FisherMatrix::new(s * (sbb - mb * mb), s * (sgg - mg * mg), s * (sbg - mb * mg))
}

/// Pure-state QFIM `4 Cov(G_a, G_b)`.
pub fn qfim_pure(probe: &StateVector, cfg: &ChainConfig) -> Result<FisherMatrix> {
    if probe.n_qubits() != cfg.n_spins {
        return Err(Error::DimensionMismatch {
            expected: cfg.n_spins,
            actual: probe.n_qubits(),
        });
    }
    let table = cfg.generator_table();
    // Expectations taken directly on the amplitudes: <G> = sum |c_k|^2 lam_k.
    let amps = probe.amplitudes();
    let weights: Vec<f64> = amps.iter().map(|c| (c.conj() * c).re).collect();
    Ok(covariance_fim(&weights, &table, cfg.gamma_e_t))
}

/// QFIM of any probe whose basis probabilities are `p`.
pub fn qfim_simplex(p: &ProbabilityDistribution, cfg: &ChainConfig) -> Result<FisherMatrix> {
    if p.len() != cfg.dim() {
        return Err(Error::DimensionMismatch {
            expected: cfg.dim(),
            actual: p.len(),
        });
    }
    Ok(qfim_from_table(p.as_slice(), &cfg.generator_table(), cfg.gamma_e_t))
}

/// Unchecked variant for hot loops that already hold the generator table.
pub fn qfim_from_table(p: &[f64], table: &GeneratorTable, gamma_e_t: f64) -> FisherMatrix {
    covariance_fim(p, table, gamma_e_t)
}

/// `log det(F + lambda I)`.
pub fn log_det_objective(f: &FisherMatrix, lambda: f64) -> Result<f64> {
    let arg = (f.bb + lambda) * (f.gg + lambda) - f.bg * f.bg;
    if !(arg.is_finite() && arg > 0.0) {
        return Err(Error::InvalidFisherMatrix(arg));
    }
    Ok(arg.ln())
}
