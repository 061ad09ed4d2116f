use std::str::FromStr;

use anyhow::{anyhow, bail, Result};

use dipolar_sense::varopt::{DecoderTier, GridSpec};

/// `--only` selection such as `L3,N5,T1` or `L2,L3,N6,S204`. Tokens with the
/// same prefix are alternatives; different prefixes must all match. A missing
/// prefix leaves that axis unrestricted.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CellFilter {
    pub layers: Vec<usize>,
    pub n_spins: Vec<usize>,
    pub tiers: Vec<DecoderTier>,
    pub seeds: Vec<u64>,
}

impl FromStr for CellFilter {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut f = CellFilter::default();
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let bad = || anyhow!("bad filter token `{tok}`");
            let head = tok.chars().next().ok_or_else(bad)?;
            let rest = &tok[head.len_utf8()..];
            match head.to_ascii_uppercase() {
                'L' => f.layers.push(rest.parse().map_err(|_| bad())?),
                'N' => f.n_spins.push(rest.parse().map_err(|_| bad())?),
                'S' => f.seeds.push(rest.parse().map_err(|_| bad())?),
                'T' => f.tiers.push(tok.to_ascii_uppercase().parse().map_err(|_| bad())?),
                _ => bail!("bad filter token `{tok}` (expected L<k>, N<k>, T<k> or S<seed>)"),
            }
        }
        Ok(f)
    }
}

fn keep<T: PartialEq + Copy>(axis: &[T], wanted: &[T]) -> Vec<T> {
    axis.iter()
        .copied()
        .filter(|v| wanted.is_empty() || wanted.contains(v))
        .collect()
}

impl CellFilter {
    /// Restricts every axis of `spec`; fails when the selection is empty.
    pub fn restrict(&self, spec: &GridSpec) -> Result<GridSpec> {
        let out = GridSpec {
            layers: keep(&spec.layers, &self.layers),
            n_spins: keep(&spec.n_spins, &self.n_spins),
            tiers: keep(&spec.tiers, &self.tiers),
            seeds: keep(&spec.seeds, &self.seeds),
        };
        if out.layers.is_empty() || out.n_spins.is_empty() || out.tiers.is_empty() || out.seeds.is_empty() {
            bail!("--only selects no cells of the configured grid");
        }
        Ok(out)
    }
}
