//! Precision benchmarks for the `(B0, g)` problem.
//!
//! Closed forms cover the separable limit and the GHZ probe. The best-found
//! quantum benchmark `det(Q*)` is computed numerically on the probability
//! simplex, see [`simplex`].

pub mod de;
pub mod lbfgs;
pub mod simplex;

use serde::{Deserialize, Serialize};

use crate::chain::ChainConfig;
use crate::error::{Error, Result};
use crate::fisher::FisherMatrix;

pub use simplex::{optimize_simplex_benchmark, SimplexOptions, SimplexSolution};

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 spins, got {n}")));
    }
    Ok(())
}

/// Separable-probe QFIM: `(N, d^2 N(N-1)(2N-1)/6, d N(N-1)/2)`.
pub fn sql_fim(n: usize, d: f64) -> Result<FisherMatrix> {
    check_n(n)?;
    let nf = n as f64;
    Ok(FisherMatrix::new(
        nf,
        d * d * nf * (nf - 1.0) * (2.0 * nf - 1.0) / 6.0,
        d * nf * (nf - 1.0) / 2.0,
    ))
}

/// `det(Q_SQL) = N^2 (N^2 - 1) / 12` at unit spacing, in exact integer arithmetic.
pub fn sql_det_exact(n: u64) -> u64 {
    let bb = n;
    let gg = n * (n - 1) * (2 * n - 1) / 6;
    let bg = n * (n - 1) / 2;
    bb * gg - bg * bg
}

/// GHZ QFIM: `(N^2, [d N(N-1)/2]^2, d N^2 (N-1)/2)`, rank one.
pub fn ghz_fim(n: usize, d: f64) -> Result<FisherMatrix> {
    check_n(n)?;
    let nf = n as f64;
    let s = d * nf * (nf - 1.0) / 2.0;
    Ok(FisherMatrix::new(nf * nf, s * s, nf * s))
}

/// Schur complement `Q_gg - Q_Bg^2 / Q_BB` of the unit-spacing SQL matrix.
pub fn sql_marginal_gradient_bound(n: usize) -> Result<f64> {
    Ok(sql_fim(n, 1.0)?.schur_complement_g())
}

/// `N (N^2 - 1) / 12`.
pub fn sql_marginal_closed_form(n: usize) -> f64 {
    let nf = n as f64;
    nf * (nf * nf - 1.0) / 12.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub n_spins: usize,
    pub det_sql: f64,
    pub log_det_sql: f64,
    pub det_qstar: f64,
    pub log_det_qstar: f64,
    pub restarts: usize,
    pub converged_restarts: usize,
    pub top5_spread: f64,
    /// Values at `N >= 4` are best-found, not certified maxima.
    pub lower_bound: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundsTable {
    pub rows: Vec<BoundsRow>,
}

impl BoundsTable {
    pub fn row(&self, n: usize) -> Option<&BoundsRow> {
        self.rows.iter().find(|r| r.n_spins == n)
    }

    pub fn compute(template: &ChainConfig, ns: &[usize], opts: &SimplexOptions) -> Result<Self> {
        let mut rows = Vec::with_capacity(ns.len());
        for &n in ns {
            let cfg = ChainConfig {
                n_spins: n,
                ..*template
            };
            cfg.validate()?;
            let sql = sql_fim(n, cfg.spacing)?.scaled(cfg.gamma_e_t * cfg.gamma_e_t).det();
            let sol = optimize_simplex_benchmark(&cfg, opts)?;
            rows.push(BoundsRow {
                n_spins: n,
                det_sql: sql,
                log_det_sql: sql.ln(),
                det_qstar: sol.det_q,
                log_det_qstar: sol.det_q.ln(),
                restarts: sol.restarts,
                converged_restarts: sol.converged_restarts,
                top5_spread: sol.top5_spread,
                lower_bound: n >= 4,
            });
        }
        Ok(Self { rows })
    }
}
