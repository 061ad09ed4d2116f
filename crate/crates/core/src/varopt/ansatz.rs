//! Layered dipolar encoder.
//!
//! One layer maps `psi` to
//! `R_y(pi/2) exp(-i t3 H) R_y(-pi/2) R_x(theta2 pi) exp(-i t1 H) psi`
//! with every rotation applied to all qubits. The initial state is
//! `R_y(pi/2)|0...0> = |+>^N`.
//!
//! Evolution times are given in units of `1 / V_01`, the nearest-neighbour
//! coupling, so that O(1) coordinates produce O(1) entangling phases for any
//! choice of `mu0` and spacing.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::chain::{dipolar_hamiltonian, ChainConfig, DipolarHamiltonian};
use crate::error::{Error, Result};
use crate::qsim::{evolve_trotter, Axis, SpectralPropagator, StateVector, TrotterConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub t1: f64,
    pub theta2: f64,
    pub t3: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzParams {
    pub layers: Vec<Layer>,
}

impl AnsatzParams {
    pub fn zeros(n_layers: usize) -> Result<Self> {
        Self::new(vec![Layer::default(); n_layers])
    }

    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let p = Self { layers };
        p.validate()?;
        Ok(p)
    }

    /// Parses `[t1, theta2, t3, t1, ...]`.
    pub fn from_flat(x: &[f64]) -> Result<Self> {
        if !x.len().is_multiple_of(3) {
            return Err(Error::DimensionMismatch {
                expected: 3 * (x.len() / 3 + 1),
                actual: x.len(),
            });
        }
        Self::new(
            x.chunks_exact(3)
                .map(|c| Layer {
                    t1: c[0],
                    theta2: c[1],
                    t3: c[2],
                })
                .collect(),
        )
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| [l.t1, l.theta2, l.t3]).collect()
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidConfig("ansatz needs at least one layer".into()));
        }
        if self.to_flat().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("ansatz parameters must be finite".into()));
        }
        Ok(())
    }
}

/// How `exp(-i t H)` is applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evolution {
    /// First-order product formula over the pair terms.
    Trotter { steps: usize },
    /// Spectral decomposition of the dense Hamiltonian.
    Exact,
}

impl Default for Evolution {
    fn default() -> Self {
        Evolution::Trotter {
            steps: TrotterConfig::default().steps,
        }
    }
}

impl Evolution {
    pub fn describe(&self) -> String {
        match self {
            Evolution::Trotter { steps } => format!("trotter(m={steps})"),
            Evolution::Exact => "exact".into(),
        }
    }
}

/// Precomputed Hamiltonian data for repeated probe preparation.
#[derive(Clone, Debug)]
pub struct ProbeCircuit {
    n: usize,
    time_unit: f64,
    hamiltonian: DipolarHamiltonian,
    evolution: Evolution,
    spectral: Option<SpectralPropagator>,
}

impl ProbeCircuit {
    pub fn new(cfg: &ChainConfig, evolution: Evolution) -> Result<Self> {
        let hamiltonian = dipolar_hamiltonian(cfg)?;
        let spectral = match evolution {
            Evolution::Exact => Some(SpectralPropagator::new(&hamiltonian.dense)),
            Evolution::Trotter { steps } => {
                TrotterConfig::new(steps)?;
                None
            }
        };
        Ok(Self {
            n: cfg.n_spins,
            time_unit: 1.0 / cfg.nearest_neighbour_coupling(),
            hamiltonian,
            evolution,
            spectral,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    /// Physical time per unit of ansatz time.
    pub fn time_unit(&self) -> f64 {
        self.time_unit
    }

    pub fn evolution(&self) -> Evolution {
        self.evolution
    }

    /// `psi <- exp(-i tau T H) psi` with `T` the time unit.
    pub fn evolve(&self, psi: &mut StateVector, tau: f64) -> Result<()> {
        let t = tau * self.time_unit;
        match (&self.spectral, self.evolution) {
            (Some(sp), _) => sp.evolve(psi, t),
            (None, Evolution::Trotter { steps }) => {
                evolve_trotter(psi, &self.hamiltonian.terms, t, TrotterConfig::new(steps)?)
            }
            (None, Evolution::Exact) => unreachable!("spectral data built for exact evolution"),
        }
    }

    pub fn apply_layer(&self, psi: &mut StateVector, layer: &Layer) -> Result<()> {
        self.evolve(psi, layer.t1)?;
        psi.apply_global_rotation(Axis::X, layer.theta2 * PI);
        psi.apply_global_rotation(Axis::Y, -FRAC_PI_2);
        self.evolve(psi, layer.t3)?;
        psi.apply_global_rotation(Axis::Y, FRAC_PI_2);
        Ok(())
    }

    pub fn prepare(&self, params: &AnsatzParams) -> Result<StateVector> {
        params.validate()?;
        let mut psi = StateVector::zero(self.n);
        psi.apply_global_rotation(Axis::Y, FRAC_PI_2);
        for layer in &params.layers {
            self.apply_layer(&mut psi, layer)?;
        }
        Ok(psi)
    }
}

/// Encoder output `|psi(theta)>` under Trotterized evolution.
pub fn prepare_probe(cfg: &ChainConfig, params: &AnsatzParams, trotter: TrotterConfig) -> Result<StateVector> {
    ProbeCircuit::new(cfg, Evolution::Trotter { steps: trotter.steps })?.prepare(params)
}
