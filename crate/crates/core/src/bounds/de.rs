//! Differential evolution (`rand/1/bin`) inside an axis-aligned box.

use rand::Rng as _;

use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeOptions {
    pub population: usize,
    pub generations: usize,
    pub mutation: f64,
    pub crossover: f64,
}

impl Default for DeOptions {
    fn default() -> Self {
        Self {
            population: 32,
            generations: 200,
            mutation: 0.5,
            crossover: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
}

/// Minimizes `f` over `[lower, upper]`. `seed_point`, when given, joins the
/// initial population, so the result is never worse than it.
pub fn minimize<F>(
    f: F,
    lower: &[f64],
    upper: &[f64],
    seed_point: Option<&[f64]>,
    opts: &DeOptions,
    rng: &mut Rng,
) -> DeResult
where
    F: Fn(&[f64]) -> f64,
{
    let dim = lower.len();
    let np = opts.population.max(4);
    let mut pop: Vec<Vec<f64>> = (0..np)
        .map(|_| (0..dim).map(|j| rng.random_range(lower[j]..=upper[j])).collect())
        .collect();
    if let Some(s) = seed_point {
        pop[0] = s.to_vec();
    }
    let score = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut fit: Vec<f64> = pop.iter().map(|x| score(x)).collect();
    let mut evaluations = np;
    let mut trial = vec![0.0; dim];

    for _ in 0..opts.generations {
        for i in 0..np {
            let mut pick = || loop {
                let r = rng.random_range(0..np);
                if r != i {
                    break r;
                }
            };
            let (a, mut b, mut c) = (pick(), pick(), pick());
            while b == a {
                b = pick();
            }
            while c == a || c == b {
                c = pick();
            }
            let forced = rng.random_range(0..dim);
            for j in 0..dim {
                trial[j] = if j == forced || rng.random::<f64>() < opts.crossover {
                    (pop[a][j] + opts.mutation * (pop[b][j] - pop[c][j])).clamp(lower[j], upper[j])
                } else {
                    pop[i][j]
                };
            }
            let ft = score(&trial);
            evaluations += 1;
            if ft <= fit[i] {
                pop[i].copy_from_slice(&trial);
                fit[i] = ft;
            }
        }
    }
    let best = (0..np).min_by(|&a, &b| fit[a].total_cmp(&fit[b])).unwrap_or(0);
    DeResult {
        x: pop.swap_remove(best),
        f: fit[best],
        evaluations,
    }
}
