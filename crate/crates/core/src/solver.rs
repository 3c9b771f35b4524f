//! JADE: adaptive differential evolution with `current-to-pbest/1` mutation,
//! an optional external archive and online adaptation of the mutation factor
//! and crossover rate distributions.
//!
//! All random draws for a generation happen on the calling thread before the
//! trial vectors are evaluated, so parallel evaluation cannot change results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub pop_size: usize,
    /// Maximum number of objective evaluations.
    pub budget: usize,
    /// Fraction of the population eligible as `pbest`.
    pub p_greedy: f64,
    /// Adaptation rate of `mu_f` and `mu_cr`.
    pub c_adapt: f64,
    pub bounds: Vec<(f64, f64)>,
    pub rng_seed: u64,
    pub use_archive: bool,
    pub parallel: bool,
}

impl SolverParams {
    pub fn new(pop_size: usize, budget: usize, bounds: Vec<(f64, f64)>, rng_seed: u64) -> Self {
        Self {
            pop_size,
            budget,
            p_greedy: 0.05,
            c_adapt: 0.1,
            bounds,
            rng_seed,
            use_archive: true,
            parallel: true,
        }
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.pop_size < 4 {
            return Err(Error::config(format!("pop_size must be at least 4, got {}", self.pop_size)));
        }
        if !(self.p_greedy > 0.0 && self.p_greedy <= 1.0) {
            return Err(Error::config("p_greedy must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.c_adapt) {
            return Err(Error::config("c_adapt must lie in [0, 1]"));
        }
        if let Some((i, (lo, hi))) = self.bounds.iter().enumerate().find(|(_, (lo, hi))| !(lo <= hi)) {
            return Err(Error::config(format!("bound {i} has lo {lo} > hi {hi}")));
        }
        if self.budget < self.pop_size {
            return Err(Error::BudgetTooSmall {
                budget: self.budget,
                pop_size: self.pop_size,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub vector: Vec<f64>,
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Population {
    pub members: Vec<Member>,
}

impl Population {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Lowest fitness; earliest member wins ties.
    pub fn best(&self) -> Option<&Member> {
        self.members
            .iter()
            .reduce(|best, m| if m.fitness < best.fitness { m } else { best })
    }

    /// Members ordered by ascending fitness (stable).
    pub fn sorted(&self) -> Vec<Member> {
        let mut members = self.members.clone();
        members.sort_by(|a, b| a.fitness.total_cmp(&b.fitness));
        members
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub best: Vec<f64>,
    pub best_fitness: f64,
    pub population: Population,
    pub evaluations: usize,
    pub generations: usize,
    /// Best-so-far fitness after initialization and after each generation.
    pub history: Vec<f64>,
    pub mu_f: f64,
    pub mu_cr: f64,
}

fn evaluate<F>(objective: &F, vectors: &[Vec<f64>], parallel: bool) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let eval = |v: &Vec<f64>| {
        let f = objective(v);
        if f.is_nan() {
            f64::INFINITY
        } else {
            f
        }
    };
    if parallel {
        vectors.par_iter().map(eval).collect()
    } else {
        vectors.iter().map(eval).collect()
    }
}

fn clip(v: &mut [f64], bounds: &[(f64, f64)]) {
    for (x, &(lo, hi)) in v.iter_mut().zip(bounds) {
        *x = x.clamp(lo, hi);
    }
}

fn lehmer_mean(values: &[f64]) -> f64 {
    let sum: f64 = values.iter().sum();
    let sum_sq: f64 = values.iter().map(|v| v * v).sum();
    sum_sq / sum
}

/// Minimize `objective` within `params.bounds`.
///
/// `seeds` (at most `pop_size`, each inside the bounds) form the start of the
/// initial population; the rest is drawn uniformly. The run stops before any
/// generation that would push the evaluation count past the budget.
pub fn optimize<F>(objective: F, params: &SolverParams, seeds: &[Vec<f64>]) -> Result<SolveOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    params.validate()?;
    let np = params.pop_size;
    let dim = params.dimension();
    if seeds.len() > np {
        return Err(Error::config(format!(
            "{} seeds exceed the population size {np}",
            seeds.len()
        )));
    }
    for seed in seeds {
        if seed.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: seed.len(),
            });
        }
        if seed
            .iter()
            .zip(&params.bounds)
            .any(|(x, &(lo, hi))| !(*x >= lo && *x <= hi))
        {
            return Err(Error::validation("seed vector lies outside the bounds"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut vectors: Vec<Vec<f64>> = seeds.to_vec();
    while vectors.len() < np {
        vectors.push(
            params
                .bounds
                .iter()
                .map(|&(lo, hi)| if lo < hi { rng.random_range(lo..=hi) } else { lo })
                .collect(),
        );
    }
    let mut fitness = evaluate(&objective, &vectors, params.parallel);
    let mut evaluations = np;

    let best_of = |fitness: &[f64]| fitness.iter().copied().fold(f64::INFINITY, f64::min);
    let mut history = vec![best_of(&fitness)];
    let mut archive: Vec<Vec<f64>> = Vec::new();
    let mut mu_f = 0.5;
    let mut mu_cr = 0.5;
    let top = ((params.p_greedy * np as f64).round() as usize).clamp(1, np);
    let mut generations = 0;

    while evaluations + np <= params.budget {
        let mut order: Vec<usize> = (0..np).collect();
        order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]));

        let cr_dist: Normal<f64> = Normal::new(mu_cr, 0.1).expect("finite mean, positive sd");
        let f_dist: Cauchy<f64> = Cauchy::new(mu_f, 0.1).expect("finite location, positive scale");
        let mut trials = Vec::with_capacity(np);
        let mut trial_params = Vec::with_capacity(np);
        for i in 0..np {
            let cr: f64 = cr_dist.sample(&mut rng).clamp(0.0, 1.0);
            let f = loop {
                let f: f64 = f_dist.sample(&mut rng);
                if f > 0.0 {
                    break f.min(1.0);
                }
            };
            let pbest = order[rng.random_range(0..top)];
            let r1 = loop {
                let r = rng.random_range(0..np);
                if r != i {
                    break r;
                }
            };
            let pool = np + archive.len();
            let r2 = loop {
                let r = rng.random_range(0..pool);
                if r != i && r != r1 {
                    break r;
                }
            };
            let x_r2 = if r2 < np { &vectors[r2] } else { &archive[r2 - np] };
            let x_i = &vectors[i];
            let mut mutant: Vec<f64> = (0..dim)
                .map(|d| x_i[d] + f * (vectors[pbest][d] - x_i[d]) + f * (vectors[r1][d] - x_r2[d]))
                .collect();
            clip(&mut mutant, &params.bounds);
            let j_rand = rng.random_range(0..dim.max(1));
            let trial: Vec<f64> = (0..dim)
                .map(|d| {
                    if d == j_rand || rng.random::<f64>() < cr {
                        mutant[d]
                    } else {
                        x_i[d]
                    }
                })
                .collect();
            trials.push(trial);
            trial_params.push((f, cr));
        }

        let trial_fitness = evaluate(&objective, &trials, params.parallel);
        evaluations += np;

        let mut good_f = Vec::new();
        let mut good_cr = Vec::new();
        for (i, trial) in trials.into_iter().enumerate() {
            if trial_fitness[i] <= fitness[i] {
                if trial_fitness[i] < fitness[i] {
                    good_f.push(trial_params[i].0);
                    good_cr.push(trial_params[i].1);
                }
                let old = std::mem::replace(&mut vectors[i], trial);
                if params.use_archive {
                    archive.push(old);
                }
                fitness[i] = trial_fitness[i];
            }
        }
        while archive.len() > np {
            let idx = rng.random_range(0..archive.len());
            archive.swap_remove(idx);
        }
        if !good_f.is_empty() {
            let mean_cr = good_cr.iter().sum::<f64>() / good_cr.len() as f64;
            mu_cr = (1.0 - params.c_adapt) * mu_cr + params.c_adapt * mean_cr;
            mu_f = (1.0 - params.c_adapt) * mu_f + params.c_adapt * lehmer_mean(&good_f);
        }
        generations += 1;
        history.push(best_of(&fitness));
    }

    let population = Population {
        members: vectors
            .into_iter()
            .zip(fitness)
            .map(|(vector, fitness)| Member { vector, fitness })
            .collect(),
    };
    let best = population.best().expect("population is non-empty").clone();
    Ok(SolveOutcome {
        best: best.vector,
        best_fitness: best.fitness,
        population,
        evaluations,
        generations,
        history,
        mu_f,
        mu_cr,
    })
}

/// Convex bowl `sum x_i^2`, optimum 0 at the origin.
pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Rosenbrock valley, optimum 0 at `(1, ..., 1)`.
pub fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum()
}
