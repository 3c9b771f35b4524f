//! Resolution cascade: the coarse exploratory solve that yields terminal
//! targets, and the low-to-high two-stage solve warm-started from the elite pool.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::ForecastSlice;
use crate::plant::{
    simulate, simulate_cost, CostWeights, PlantParams, PlantState, TerminalTargets, Trajectory, CHANNELS,
};
use crate::solver::{optimize, Population, SolveOutcome, SolverParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolutionConfig {
    /// step length, hours
    pub dt: f64,
    /// number of steps
    pub horizon: usize,
    pub pop_size: usize,
    pub budget_default: usize,
    pub budget_init: usize,
}

impl ResolutionConfig {
    pub fn exploratory() -> Self {
        Self {
            dt: 2.0,
            horizon: 24,
            pop_size: 48,
            budget_default: 4000,
            budget_init: 4000,
        }
    }

    pub fn low() -> Self {
        Self {
            dt: 1.0,
            horizon: 24,
            pop_size: 96,
            budget_default: 5000,
            budget_init: 5000,
        }
    }

    pub fn high() -> Self {
        Self {
            dt: 0.5,
            horizon: 48,
            pop_size: 96,
            budget_default: 5000,
            budget_init: 20000,
        }
    }

    /// Duration covered by the horizon, hours.
    pub fn span(&self) -> f64 {
        self.dt * self.horizon as f64
    }

    pub fn dimension(&self) -> usize {
        CHANNELS * self.horizon
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.dt > 0.0) || self.horizon == 0 {
            return Err(Error::config(format!("{name}: dt and horizon must be positive")));
        }
        if self.budget_init < self.budget_default {
            return Err(Error::config(format!("{name}: budget_init must be >= budget_default")));
        }
        if self.budget_default < self.pop_size {
            return Err(Error::BudgetTooSmall {
                budget: self.budget_default,
                pop_size: self.pop_size,
            });
        }
        Ok(())
    }
}

/// Settings shared by every solver call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub p_greedy: f64,
    pub c_adapt: f64,
    pub use_archive: bool,
    pub parallel: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            p_greedy: 0.05,
            c_adapt: 0.1,
            use_archive: true,
            parallel: true,
        }
    }
}

impl SolverSettings {
    fn params(&self, pop_size: usize, budget: usize, bounds: Vec<(f64, f64)>, seed: u64) -> SolverParams {
        SolverParams {
            pop_size,
            budget,
            p_greedy: self.p_greedy,
            c_adapt: self.c_adapt,
            bounds,
            rng_seed: seed,
            use_archive: self.use_archive,
            parallel: self.parallel,
        }
    }
}

/// Everything a stage solve needs besides its forecast slice.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub params: &'a PlantParams,
    pub weights: &'a CostWeights,
    pub solver: &'a SolverSettings,
}

impl Problem<'_> {
    /// Solve `min J(U)` over `slice` from `x0`. `targets = None` drops the terminal cost.
    pub fn solve(
        &self,
        x0: &PlantState,
        slice: &ForecastSlice,
        targets: Option<&TerminalTargets>,
        pop_size: usize,
        budget: usize,
        seeds: &[Vec<f64>],
        rng_seed: u64,
    ) -> Result<SolveOutcome> {
        let bounds = self.params.decision_bounds(slice.len());
        let solver = self.solver.params(pop_size, budget, bounds, rng_seed);
        optimize(
            |u: &[f64]| {
                simulate_cost(x0, u, slice, self.params, self.weights, targets)
                    .expect("decision vector dimension is fixed by the bounds")
            },
            &solver,
            seeds,
        )
    }
}

/// Cumulative archive of final high-resolution populations.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ElitePool {
    entries: Vec<Vec<f64>>,
}

impl ElitePool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn extend_from(&mut self, population: &Population) {
        self.entries
            .extend(population.members.iter().map(|m| m.vector.clone()));
    }

    /// Uniform sample of `n` distinct entries (fewer if the pool is smaller).
    pub fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let n = n.min(self.entries.len());
        sample(rng, self.entries.len(), n)
            .into_iter()
            .map(|i| self.entries[i].clone())
            .collect()
    }
}

/// Up-sample a decision vector from `h_low` to `h_high` steps over the same span.
///
/// Each channel is linearly interpolated between low-resolution step-start
/// values and held after the last node; results are clipped to the channel
/// bounds of `params`.
pub fn interpolate_controls(
    u_low: &[f64],
    h_low: usize,
    h_high: usize,
    params: &PlantParams,
) -> Result<Vec<f64>> {
    if u_low.len() != CHANNELS * h_low || h_low == 0 {
        return Err(Error::DimensionMismatch {
            expected: CHANNELS * h_low,
            found: u_low.len(),
        });
    }
    if h_high < h_low {
        return Err(Error::config(format!(
            "cannot interpolate {h_low} steps down to {h_high}"
        )));
    }
    let bounds = [(0.0, params.u_nom), (-1.0, 1.0)];
    let ratio = h_low as f64 / h_high as f64;
    let mut out = Vec::with_capacity(CHANNELS * h_high);
    for j in 0..h_high {
        let t = j as f64 * ratio;
        let i0 = t.floor() as usize;
        let frac = t - i0 as f64;
        for (c, &(lo, hi)) in bounds.iter().enumerate() {
            let at = |i: usize| u_low[CHANNELS * i + c];
            let v = if i0 + 1 >= h_low {
                at(h_low - 1)
            } else if frac == 0.0 {
                at(i0)
            } else {
                at(i0) + frac * (at(i0 + 1) - at(i0))
            };
            out.push(v.clamp(lo, hi));
        }
    }
    Ok(out)
}

/// Initial high-resolution set: `min(|pool|, s_h / 2)` random elites followed by
/// the best interpolated low-resolution solutions (already sorted by cost).
pub fn blend_initial_population(
    pool: &ElitePool,
    interpolated_sorted: &[Vec<f64>],
    s_h: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let n_elites = pool.len().min(s_h / 2);
    let mut blended = pool.sample(n_elites, rng);
    let n_seed = s_h - blended.len();
    blended.extend(interpolated_sorted.iter().take(n_seed).cloned());
    blended
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploratoryResult {
    pub u_best: Vec<f64>,
    pub best_cost: f64,
    pub trajectory: Trajectory,
    pub targets: TerminalTargets,
    /// Index into `trajectory.states` the targets were read from.
    pub target_index: usize,
    pub evaluations: usize,
}

/// Trajectory index of the state reached after `target_horizon` hours at step `dt`.
pub fn target_state_index(target_horizon: f64, dt: f64) -> usize {
    (target_horizon / dt).round() as usize
}

/// Long-horizon solve without terminal cost; targets are the storage levels
/// the optimal trajectory reaches `target_horizon` hours ahead.
pub fn solve_exploratory(
    problem: &Problem<'_>,
    x_k: &PlantState,
    slice: &ForecastSlice,
    res: &ResolutionConfig,
    budget: usize,
    target_horizon: f64,
    rng_seed: u64,
) -> Result<ExploratoryResult> {
    if slice.len() != res.horizon {
        return Err(Error::DimensionMismatch {
            expected: res.horizon,
            found: slice.len(),
        });
    }
    let outcome = problem.solve(x_k, slice, None, res.pop_size, budget, &[], rng_seed)?;
    let trajectory = simulate(x_k, &outcome.best, slice, problem.params, problem.weights, None)?;
    let target_index = target_state_index(target_horizon, slice.dt).min(slice.len());
    let targets = TerminalTargets::from_state(&trajectory.states[target_index]);
    Ok(ExploratoryResult {
        u_best: outcome.best,
        best_cost: outcome.best_fitness,
        trajectory,
        targets,
        target_index,
        evaluations: outcome.evaluations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeResult {
    pub u_high: Vec<f64>,
    pub high_cost: f64,
    pub high_population: Population,
    pub low_cost: f64,
    pub low_evaluations: usize,
    pub high_evaluations: usize,
    pub elites_used: usize,
}

/// Budgets and seeds for one cascade call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeRun {
    pub low_budget: usize,
    pub high_budget: usize,
    pub low_seed: u64,
    pub high_seed: u64,
}

/// Low-resolution solve toward `targets`, then a high-resolution solve seeded
/// by elites and the interpolated low-resolution population.
#[allow(clippy::too_many_arguments)]
pub fn find_optimal_control(
    problem: &Problem<'_>,
    x_k: &PlantState,
    targets: &TerminalTargets,
    pool: &ElitePool,
    low_slice: &ForecastSlice,
    high_slice: &ForecastSlice,
    low: &ResolutionConfig,
    high: &ResolutionConfig,
    run: CascadeRun,
    rng: &mut ChaCha8Rng,
) -> Result<CascadeResult> {
    let low_out = problem.solve(x_k, low_slice, Some(targets), low.pop_size, run.low_budget, &[], run.low_seed)?;
    let interpolated = low_out
        .population
        .sorted()
        .into_iter()
        .map(|m| interpolate_controls(&m.vector, low_slice.len(), high_slice.len(), problem.params))
        .collect::<Result<Vec<_>>>()?;
    let seeds = blend_initial_population(pool, &interpolated, high.pop_size, rng);
    let elites_used = pool.len().min(high.pop_size / 2);
    let high_out = problem.solve(
        x_k,
        high_slice,
        Some(targets),
        high.pop_size,
        run.high_budget,
        &seeds,
        run.high_seed,
    )?;
    Ok(CascadeResult {
        u_high: high_out.best,
        high_cost: high_out.best_fitness,
        high_population: high_out.population,
        low_cost: low_out.best_fitness,
        low_evaluations: low_out.evaluations,
        high_evaluations: high_out.evaluations,
        elites_used,
    })
}
