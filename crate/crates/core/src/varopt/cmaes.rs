//! (mu/mu_w, lambda)-CMA-ES following Hansen's reference formulation:
//! weighted recombination of the best half, cumulative step-size adaptation
//! and rank-one plus rank-mu covariance updates.
//!
//! Candidates of one generation are sampled sequentially from a seeded
//! stream and evaluated through [`crate::par`], so a run is bit-identical for
//! a fixed seed regardless of thread count.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::par;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmaesOptions {
    pub sigma0: f64,
    pub max_generations: usize,
    pub max_evaluations: usize,
    /// Overrides the default `4 + floor(3 ln n)`.
    pub population: Option<usize>,
    pub seed: u64,
    pub tol_fun: f64,
    pub tol_x: f64,
}

impl Default for CmaesOptions {
    fn default() -> Self {
        Self {
            sigma0: 0.3,
            max_generations: 300,
            max_evaluations: 20_000,
            population: None,
            seed: 0,
            tol_fun: 1e-12,
            tol_x: 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    MaxGenerations,
    MaxEvaluations,
    TolFun,
    TolX,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CmaesResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    pub generations: usize,
    /// Best-so-far value after every generation (non-increasing).
    pub trajectory: Vec<f64>,
    pub stop: StopReason,
    pub final_sigma: f64,
}

pub fn default_population(dim: usize) -> usize {
    4 + (3.0 * (dim as f64).ln()).floor() as usize
}

fn rank_value(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Minimizes `f` starting from mean `x0`.
///
/// # Panics
///
/// Panics if `x0` is empty.
pub fn cma_es_minimize<F>(f: F, x0: &[f64], opts: &CmaesOptions) -> CmaesResult
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    let n = x0.len();
    assert!(n >= 1, "CMA-ES needs at least one dimension");
    let nf = n as f64;

    let lambda = opts.population.unwrap_or_else(|| default_population(n)).max(2);
    let mu = lambda / 2;
    let raw: Vec<f64> = (0..mu)
        .map(|i| (mu as f64 + 0.5).ln() - ((i + 1) as f64).ln())
        .collect();
    let wsum: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / wsum).collect();
    let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

    let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
    let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
    let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
    let c_1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
    let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
    let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

    let mut mean = DVector::from_column_slice(x0);
    let mut sigma = opts.sigma0;
    let mut cov = DMatrix::<f64>::identity(n, n);
    let mut basis = DMatrix::<f64>::identity(n, n);
    let mut scales = DVector::<f64>::from_element(n, 1.0);
    let mut p_sigma = DVector::<f64>::zeros(n);
    let mut p_c = DVector::<f64>::zeros(n);

    let mut rng = rng::stream(opts.seed, 0);
    let mut best_x = x0.to_vec();
    let mut best_f = f64::INFINITY;
    let mut trajectory = Vec::new();
    let mut evaluations = 0;
    let mut generation = 0;
    let hist_len = 10 + (30.0 * nf / lambda as f64).ceil() as usize;
    let mut gen_best_history: Vec<f64> = Vec::new();

    let stop = loop {
        if generation >= opts.max_generations {
            break StopReason::MaxGenerations;
        }
        if evaluations + lambda > opts.max_evaluations {
            break StopReason::MaxEvaluations;
        }

        let zs: Vec<DVector<f64>> = (0..lambda)
            .map(|_| DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng)))
            .collect();
        let ys: Vec<DVector<f64>> = zs.iter().map(|z| &basis * z.component_mul(&scales)).collect();
        let xs: Vec<Vec<f64>> = ys
            .iter()
            .map(|y| (&mean + y * sigma).iter().copied().collect())
            .collect();
        let values: Vec<f64> = par::map(&xs, |x| rank_value(f(x)));
        evaluations += lambda;
        generation += 1;

        let mut order: Vec<usize> = (0..lambda).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        if values[order[0]] < best_f {
            best_f = values[order[0]];
            best_x = xs[order[0]].clone();
        }
        trajectory.push(best_f);
        gen_best_history.push(values[order[0]]);

        // recombination
        let mut y_w = DVector::<f64>::zeros(n);
        for (w, &i) in weights.iter().zip(&order) {
            y_w += &ys[i] * *w;
        }
        mean += &y_w * sigma;

        // C^{-1/2} y_w = B D^{-1} B^T y_w
        let inv_sqrt_y = &basis * (basis.transpose() * &y_w).component_div(&scales);
        p_sigma = &p_sigma * (1.0 - c_sigma) + inv_sqrt_y * (c_sigma * (2.0 - c_sigma) * mu_eff).sqrt();
        let ps_norm = p_sigma.norm();
        let h_sigma =
            ps_norm / (1.0 - (1.0 - c_sigma).powi(2 * generation as i32)).sqrt() / chi_n < 1.4 + 2.0 / (nf + 1.0);
        let h = if h_sigma { 1.0 } else { 0.0 };
        p_c = &p_c * (1.0 - c_c) + &y_w * (h * (c_c * (2.0 - c_c) * mu_eff).sqrt());

        let mut rank_mu = DMatrix::<f64>::zeros(n, n);
        for (w, &i) in weights.iter().zip(&order) {
            rank_mu += &ys[i] * ys[i].transpose() * *w;
        }
        let delta_h = (1.0 - h) * c_c * (2.0 - c_c);
        cov = &cov * (1.0 - c_1 - c_mu + c_1 * delta_h) + &p_c * p_c.transpose() * c_1 + rank_mu * c_mu;
        cov = (&cov + cov.transpose()) * 0.5;

        sigma *= ((c_sigma / d_sigma) * (ps_norm / chi_n - 1.0)).exp();

        let eig = cov.clone().symmetric_eigen();
        basis = eig.eigenvectors;
        scales = eig.eigenvalues.map(|v| v.max(1e-300).sqrt());

        if gen_best_history.len() >= hist_len {
            let recent = &gen_best_history[gen_best_history.len() - hist_len..];
            let hi = recent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = recent.iter().copied().fold(f64::INFINITY, f64::min);
            let cur_hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let cur_lo = values[order[0]];
            if (hi - lo) < opts.tol_fun && (cur_hi - cur_lo) < opts.tol_fun {
                break StopReason::TolFun;
            }
        }
        let spread = (0..n)
            .map(|i| cov[(i, i)].sqrt().max(p_c[i].abs()))
            .fold(0.0f64, f64::max);
        if sigma * spread < opts.tol_x {
            break StopReason::TolX;
        }
    };

    CmaesResult {
        x: best_x,
        f: best_f,
        evaluations,
        generations: generation,
        trajectory,
        stop,
        final_sigma: sigma,
    }
}
