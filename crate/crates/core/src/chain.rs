//! Chain geometry, field model and the dipolar entangling Hamiltonian.
//!
//! Spin `i` sits at `x_i = i d`. The field `B(x) = B0 + g x` imprints the
//! phase `phi_i = gamma_e_t (B0 + g i d)` on spin `i`. Both encoding
//! generators are diagonal in the computational basis, so their eigenvalues
//! are tabulated once per configuration in a [`GeneratorTable`].

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{qubit_bit, HermitianOperator, PairTerm};

/// Dipolar prefactor in simulation units.
pub const DEFAULT_MU0: f64 = 6.7e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub n_spins: usize,
    pub spacing: f64,
    pub gamma_e_t: f64,
    pub j_long: f64,
    pub j_sym: f64,
    pub mu0: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            n_spins: 4,
            spacing: 1.0,
            gamma_e_t: 1.0,
            j_long: 3.0,
            j_sym: -1.0,
            mu0: DEFAULT_MU0,
        }
    }
}

impl ChainConfig {
    pub fn new(n_spins: usize) -> Result<Self> {
        let cfg = Self {
            n_spins,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_spacing(mut self, spacing: f64) -> Result<Self> {
        self.spacing = spacing;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_spins < 2 {
            return Err(Error::InvalidConfig(format!(
                "chain needs at least 2 spins, got {}",
                self.n_spins
            )));
        }
        if self.n_spins > 12 {
            return Err(Error::InvalidConfig(format!(
                "dense simulation is limited to 12 spins, got {}",
                self.n_spins
            )));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "spacing must be positive, got {}",
                self.spacing
            )));
        }
        if !self.gamma_e_t.is_finite() || !self.mu0.is_finite() {
            return Err(Error::InvalidConfig("non-finite chain constant".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1usize << self.n_spins
    }

    pub fn position(&self, i: usize) -> f64 {
        i as f64 * self.spacing
    }

    /// `V_ij = mu0 / (4 pi |i - j|^3 d^3)`; the chain is perpendicular to the
    /// bias field, so the angular factor is 1.
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        let r = (i as f64 - j as f64).abs() * self.spacing;
        self.mu0 / (4.0 * std::f64::consts::PI * r.powi(3))
    }

    /// Nearest-neighbour coupling `V_{i,i+1}`.
    pub fn nearest_neighbour_coupling(&self) -> f64 {
        self.coupling(0, 1)
    }

    pub fn sensing_matrix(&self) -> SensingMatrix {
        SensingMatrix {
            rows: (0..self.n_spins).map(|i| [1.0, self.position(i)]).collect(),
        }
    }

    pub fn generator_table(&self) -> GeneratorTable {
        GeneratorTable::new(self)
    }
}

/// Unknowns `(B0, g)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterPoint {
    pub b0: f64,
    pub g: f64,
}

impl Default for ParameterPoint {
    fn default() -> Self {
        Self {
            b0: 0.0,
            g: std::f64::consts::PI / 100.0,
        }
    }
}

impl ParameterPoint {
    pub fn new(b0: f64, g: f64) -> Self {
        Self { b0, g }
    }
}

/// `phi = M x`: column 0 is all ones, column 1 holds the positions `i d`.
#[derive(Clone, Debug, PartialEq)]
pub struct SensingMatrix {
    rows: Vec<[f64; 2]>,
}

impl SensingMatrix {
    pub fn rows(&self) -> &[[f64; 2]] {
        &self.rows
    }

    pub fn get(&self, i: usize, a: usize) -> f64 {
        self.rows[i][a]
    }

    pub fn apply(&self, pt: ParameterPoint) -> Vec<f64> {
        self.rows.iter().map(|r| r[0] * pt.b0 + r[1] * pt.g).collect()
    }

    /// Numerical rank of the `N x 2` matrix.
    pub fn rank(&self) -> usize {
        let m = DMatrix::from_fn(self.rows.len(), 2, |i, j| self.rows[i][j]);
        m.rank(1e-12)
    }
}

/// Per-spin phases at the given parameter point.
pub fn phases_at(cfg: &ChainConfig, pt: ParameterPoint) -> Vec<f64> {
    (0..cfg.n_spins)
        .map(|i| cfg.gamma_e_t * (pt.b0 + pt.g * cfg.position(i)))
        .collect()
}

/// Eigenvalues of `G_B0 = 1/2 sum_i Z_i` and `G_g = 1/2 sum_i (i d) Z_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorTable {
    pub lam_b: Vec<f64>,
    pub lam_g: Vec<f64>,
}

impl GeneratorTable {
    pub fn new(cfg: &ChainConfig) -> Self {
        let n = cfg.n_spins;
        let mut lam_b = Vec::with_capacity(cfg.dim());
        let mut lam_g = Vec::with_capacity(cfg.dim());
        for k in 0..cfg.dim() {
            let (mut b, mut g) = (0.0, 0.0);
            for i in 0..n {
                let s = 1.0 - 2.0 * qubit_bit(n, k, i) as f64;
                b += 0.5 * s;
                g += 0.5 * cfg.position(i) * s;
            }
            lam_b.push(b);
            lam_g.push(g);
        }
        Self { lam_b, lam_g }
    }

    pub fn len(&self) -> usize {
        self.lam_b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lam_b.is_empty()
    }

    /// Eigenvalue of generator `a` (0 = B0, 1 = g) on basis state `k`.
    pub fn get(&self, a: usize, k: usize) -> f64 {
        match a {
            0 => self.lam_b[k],
            _ => self.lam_g[k],
        }
    }

    pub fn operator_b(&self) -> HermitianOperator {
        HermitianOperator::diagonal(&self.lam_b).expect("generator table has power-of-two length")
    }

    pub fn operator_g(&self) -> HermitianOperator {
        HermitianOperator::diagonal(&self.lam_g).expect("generator table has power-of-two length")
    }
}

/// `H_int` as a dense matrix plus its pairwise summands ordered by `(i, j)`.
#[derive(Clone, Debug)]
pub struct DipolarHamiltonian {
    pub dense: HermitianOperator,
    pub terms: Vec<PairTerm>,
}

/// Local block of `J_l S^z S^z + J_s S.S` with `S = sigma / 2`, basis `|00>,|01>,|10>,|11>`.
pub fn pair_interaction(j_long: f64, j_sym: f64) -> Matrix4<Complex64> {
    let zz = 0.25 * (j_long + j_sym);
    let flip = 0.5 * j_sym;
    let mut m = Matrix4::<Complex64>::zeros();
    m[(0, 0)] = Complex64::new(zz, 0.0);
    m[(1, 1)] = Complex64::new(-zz, 0.0);
    m[(2, 2)] = Complex64::new(-zz, 0.0);
    m[(3, 3)] = Complex64::new(zz, 0.0);
    m[(1, 2)] = Complex64::new(flip, 0.0);
    m[(2, 1)] = Complex64::new(flip, 0.0);
    m
}

pub fn dipolar_hamiltonian(cfg: &ChainConfig) -> Result<DipolarHamiltonian> {
    cfg.validate()?;
    let n = cfg.n_spins;
    let block = pair_interaction(cfg.j_long, cfg.j_sym);
    let mut terms = Vec::with_capacity(n * (n - 1) / 2);
    let mut dense = DMatrix::<Complex64>::zeros(cfg.dim(), cfg.dim());
    for i in 0..n {
        for j in i + 1..n {
            let v = cfg.coupling(i, j);
            let term = PairTerm::new((i, j), block.map(|z| z * v))?;
            dense += term.to_operator(n)?.matrix();
            terms.push(term);
        }
    }
    Ok(DipolarHamiltonian {
        dense: HermitianOperator::new(dense)?,
        terms,
    })
}
