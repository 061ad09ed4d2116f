use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use dipolar_sense::bounds::SimplexOptions;
use dipolar_sense::chain::{ChainConfig, ParameterPoint, DEFAULT_MU0};
use dipolar_sense::varopt::{CellSettings, DecoderTier, Evolution, GridSpec, OptimizerSettings, STANDARD_SEEDS};

/// The documented default configuration, shipped as `config/default.toml`.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../../../config/default.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output: PathBuf,
    /// Seeds the simplex benchmark restarts.
    pub master_seed: u64,
    pub chain: ChainSection,
    pub grid: GridSection,
    pub optimizer: OptimizerSettings,
    pub evolution: Evolution,
    pub point: ParameterPoint,
    pub simplex: SimplexSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSection {
    pub n_spins: Vec<usize>,
    pub spacing: f64,
    pub gamma_e_t: f64,
    pub j_long: f64,
    pub j_sym: f64,
    pub mu0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub layers: Vec<usize>,
    pub tiers: Vec<DecoderTier>,
    pub seeds: Vec<u64>,
    /// Appended to `seeds` for every cell.
    pub extra_seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimplexSection {
    pub restarts: usize,
    pub de_population: usize,
    pub de_generations: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            output: PathBuf::from("results"),
            master_seed: 0,
            chain: ChainSection::default(),
            grid: GridSection::default(),
            optimizer: OptimizerSettings::default(),
            evolution: Evolution::default(),
            point: ParameterPoint::default(),
            simplex: SimplexSection::default(),
        }
    }
}

impl Default for ChainSection {
    fn default() -> Self {
        let c = ChainConfig::default();
        Self {
            n_spins: (2..=6).collect(),
            spacing: c.spacing,
            gamma_e_t: c.gamma_e_t,
            j_long: c.j_long,
            j_sym: c.j_sym,
            mu0: DEFAULT_MU0,
        }
    }
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            layers: vec![1, 2, 3],
            tiers: DecoderTier::ALL.to_vec(),
            seeds: STANDARD_SEEDS.to_vec(),
            extra_seeds: Vec::new(),
        }
    }
}

impl Default for SimplexSection {
    fn default() -> Self {
        let s = SimplexOptions::default();
        Self {
            restarts: s.restarts,
            de_population: s.de_population,
            de_generations: s.de_generations,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.chain.n_spins.is_empty() || self.grid.layers.is_empty() || self.grid.tiers.is_empty() {
            bail!("chain.n_spins, grid.layers and grid.tiers must be nonempty");
        }
        if self.seeds().is_empty() {
            bail!("no seeds configured");
        }
        let mut seen = BTreeSet::new();
        if let Some(s) = self.seeds().iter().find(|s| !seen.insert(**s)) {
            bail!("seed {s} listed twice");
        }
        for &n in &self.chain.n_spins {
            self.chain_config(n)?;
        }
        if self.simplex.restarts == 0 {
            bail!("simplex.restarts must be positive");
        }
        self.grid_spec().validate()?;
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.grid.seeds.iter().chain(&self.grid.extra_seeds).copied().collect()
    }

    pub fn chain_config(&self, n_spins: usize) -> Result<ChainConfig> {
        let c = ChainConfig {
            n_spins,
            spacing: self.chain.spacing,
            gamma_e_t: self.chain.gamma_e_t,
            j_long: self.chain.j_long,
            j_sym: self.chain.j_sym,
            mu0: self.chain.mu0,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            layers: self.grid.layers.clone(),
            n_spins: self.chain.n_spins.clone(),
            tiers: self.grid.tiers.clone(),
            seeds: self.seeds(),
        }
    }

    pub fn cell_settings(&self) -> Result<CellSettings> {
        Ok(CellSettings {
            chain: self.chain_config(self.chain.n_spins[0])?,
            point: self.point,
            optimizer: self.optimizer,
            evolution: self.evolution,
        })
    }

    pub fn simplex_options(&self) -> SimplexOptions {
        SimplexOptions {
            restarts: self.simplex.restarts,
            seed: self.master_seed,
            de_population: self.simplex.de_population,
            de_generations: self.simplex.de_generations,
            ..SimplexOptions::default()
        }
    }
}
