//! Receding-horizon main loop.
//!
//! Each 24 h cycle checks the day-ahead prices for a regime change, picks
//! terminal targets (exploratory solve, surrogate or fixed), runs the
//! low/high cascade and applies the whole high-resolution plan.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytics::{ExplorationEvent, RunSummary};
use crate::baseline::{plan_day, RuleParams};
use crate::cascade::{
    find_optimal_control, solve_exploratory, CascadeRun, ElitePool, Problem, ResolutionConfig, SolverSettings,
};
use crate::error::{Error, Result};
use crate::forecast::{ForecastSlice, Forecasts};
use crate::plant::{flatten_controls, simulate, ControlStep, CostWeights, PlantParams, PlantState, TerminalTargets, CHANNELS};
use crate::surrogate::{decide_targets, DecisionPath, ModelKind, SurrogateState, TriggerCause, Triggers, UncertaintyConfig};

/// Hours between controller cycles.
pub const CYCLE_HOURS: f64 = 24.0;
/// Lookahead the forecasts must provide past the end of the run, hours.
pub const LOOKAHEAD_HOURS: f64 = 48.0;
/// Threshold on the max-norm price difference that signals a new regime.
pub const RESET_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "HR")]
    Hr,
    #[serde(rename = "HR_ws")]
    HrWs,
    #[serde(rename = "MR")]
    Mr,
    #[serde(rename = "MR_ws")]
    MrWs,
    #[serde(rename = "ML_RF1")]
    MlRf1,
    #[serde(rename = "ML_RF2")]
    MlRf2,
    #[serde(rename = "ML_GB")]
    MlGb,
    #[serde(rename = "RULE")]
    Rule,
}

impl Strategy {
    pub const ALL: [Strategy; 8] = [
        Strategy::Hr,
        Strategy::HrWs,
        Strategy::Mr,
        Strategy::MrWs,
        Strategy::MlRf1,
        Strategy::MlRf2,
        Strategy::MlGb,
        Strategy::Rule,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Hr => "HR",
            Strategy::HrWs => "HR_ws",
            Strategy::Mr => "MR",
            Strategy::MrWs => "MR_ws",
            Strategy::MlRf1 => "ML_RF1",
            Strategy::MlRf2 => "ML_RF2",
            Strategy::MlGb => "ML_GB",
            Strategy::Rule => "RULE",
        }
    }

    /// Whether final high-resolution populations feed the elite pool.
    pub fn warm_starts(self) -> bool {
        matches!(self, Strategy::HrWs | Strategy::MrWs | Strategy::MlRf1 | Strategy::MlRf2 | Strategy::MlGb)
    }

    pub fn is_ml(self) -> bool {
        matches!(self, Strategy::MlRf1 | Strategy::MlRf2 | Strategy::MlGb)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolutions {
    pub exploratory: ResolutionConfig,
    pub low: ResolutionConfig,
    pub high: ResolutionConfig,
}

impl Default for Resolutions {
    fn default() -> Self {
        Self {
            exploratory: ResolutionConfig::exploratory(),
            low: ResolutionConfig::low(),
            high: ResolutionConfig::high(),
        }
    }
}

impl Resolutions {
    /// Same grids with every default budget replaced and the boosted
    /// high-resolution budget scaled by the same factor as the default.
    pub fn with_budgets(exploratory: usize, low: usize, high: usize) -> Self {
        let mut r = Self::default();
        let scale = high as f64 / r.high.budget_default as f64;
        r.exploratory.budget_default = exploratory;
        r.exploratory.budget_init = exploratory;
        r.low.budget_default = low;
        r.low.budget_init = low;
        r.high.budget_init = (r.high.budget_init as f64 * scale).round() as usize;
        r.high.budget_default = high;
        r
    }

    pub fn validate(&self) -> Result<()> {
        self.exploratory.validate("exploratory")?;
        self.low.validate("low")?;
        self.high.validate("high")?;
        if (self.low.span() - CYCLE_HOURS).abs() > 1e-9 || (self.high.span() - CYCLE_HOURS).abs() > 1e-9 {
            return Err(Error::config("low and high resolutions must span one 24 h cycle"));
        }
        if self.exploratory.span() < CYCLE_HOURS || self.exploratory.span() > LOOKAHEAD_HOURS {
            return Err(Error::config("exploratory span must lie between 24 h and 48 h"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Simulated hours; a multiple of 24.
    pub t_end: f64,
    pub strategy: Strategy,
    pub rng_seed: u64,
    pub plant: PlantParams,
    pub weights: CostWeights,
    pub solver: SolverSettings,
    pub resolutions: Resolutions,
    /// Trigger and threshold settings for the ML strategies; model kind and
    /// kappa are set by the strategy.
    pub uncertainty: UncertaintyConfig,
    pub rule: RuleParams,
    /// Ablation mode: MR and MR_ws skip the exploratory stage and use `fixed_targets`.
    pub skip_exploratory: bool,
    /// Targets for strategies without an exploratory stage; defaults to an empty battery and tank.
    pub fixed_targets: Option<TerminalTargets>,
    pub x0: PlantState,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            t_end: 24.0,
            strategy: Strategy::MrWs,
            rng_seed: 0,
            plant: PlantParams::default(),
            weights: CostWeights::default(),
            solver: SolverSettings::default(),
            resolutions: Resolutions::default(),
            uncertainty: UncertaintyConfig::default(),
            rule: RuleParams::default(),
            skip_exploratory: false,
            fixed_targets: None,
            x0: PlantState {
                soc: 0.5,
                t_median: 70.0,
                q_prod: 0.0,
            },
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let cycles = self.t_end / CYCLE_HOURS;
        if !(self.t_end > 0.0) || (cycles - cycles.round()).abs() > 1e-9 {
            return Err(Error::config(format!("t_end must be a positive multiple of 24 h, got {}", self.t_end)));
        }
        self.plant.validate()?;
        self.resolutions.validate()?;
        self.effective_uncertainty().validate()?;
        self.rule.validate()?;
        if !(0.0..=1.0).contains(&self.x0.soc) || !(self.plant.t_min..=self.plant.t_max).contains(&self.x0.t_median) {
            return Err(Error::config("initial state outside the physical range"));
        }
        Ok(())
    }

    pub fn cycles(&self) -> usize {
        (self.t_end / CYCLE_HOURS).round() as usize
    }

    pub fn targets_without_exploration(&self) -> TerminalTargets {
        self.fixed_targets
            .unwrap_or_else(|| TerminalTargets::greedy_discharge(&self.plant))
    }

    /// The uncertainty settings with the model kind and kappa implied by the strategy.
    pub fn effective_uncertainty(&self) -> UncertaintyConfig {
        let mut u = self.uncertainty.clone();
        match self.strategy {
            Strategy::MlRf1 => {
                u.model_kind = ModelKind::Rf;
                u.kappa = 1.0;
            }
            Strategy::MlRf2 => {
                u.model_kind = ModelKind::Rf;
                u.kappa = 2.0;
            }
            Strategy::MlGb => u.model_kind = ModelKind::Gb,
            _ => {}
        }
        u
    }

    fn uses_exploratory(&self) -> bool {
        match self.strategy {
            Strategy::Mr | Strategy::MrWs => !self.skip_exploratory,
            s => s.is_ml(),
        }
    }

    /// Per-stage budgets for a normal or boosted cycle.
    pub fn budgets(&self, boosted: bool) -> StageCounts {
        let pick = |r: &ResolutionConfig| if boosted { r.budget_init } else { r.budget_default };
        let r = &self.resolutions;
        StageCounts {
            exploratory: if self.uses_exploratory() { pick(&r.exploratory) } else { 0 },
            low: pick(&r.low),
            high: pick(&r.high),
        }
    }
}

/// Per-stage numbers (budgets or objective evaluations).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub exploratory: usize,
    pub low: usize,
    pub high: usize,
}

impl StageCounts {
    pub fn total(&self) -> usize {
        self.exploratory + self.low + self.high
    }

    fn add(&mut self, other: &StageCounts) {
        self.exploratory += other.exploratory;
        self.low += other.low;
        self.high += other.high;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: usize,
    pub t_hours: f64,
    pub reset: bool,
    pub boosted: bool,
    pub t_reset: f64,
    pub budgets: StageCounts,
    pub evaluations: StageCounts,
    pub path: Option<DecisionPath>,
    pub triggers: Option<Triggers>,
    pub trigger: Option<TriggerCause>,
    pub targets: Option<TerminalTargets>,
    pub planned_cost: Option<f64>,
    pub energy_cost: f64,
    pub shortfall_penalty: f64,
    pub pool_before: usize,
    pub pool_after: usize,
    pub elites_used: usize,
    pub dataset_size: usize,
}

impl CycleRecord {
    pub fn cost(&self) -> f64 {
        self.energy_cost + self.shortfall_penalty
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    /// End of the step.
    pub t_hours: f64,
    pub soc: f64,
    pub t_median_c: f64,
    pub q_prod_mw: f64,
    pub p_grid_kw: f64,
    pub price: f64,
    pub cost_usd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub config: RunConfig,
    pub cycles: Vec<CycleRecord>,
    pub events: Vec<ExplorationEvent>,
    pub controls: Vec<ControlStep>,
    pub trajectory: Vec<TrajectoryRow>,
    pub total_cost: f64,
    pub energy_cost: f64,
    pub shortfall_penalty: f64,
    pub evaluations: StageCounts,
    pub final_state: PlantState,
}

impl RunLog {
    pub fn resets(&self) -> impl Iterator<Item = &CycleRecord> {
        self.cycles.iter().filter(|c| c.reset && c.t_hours > 0.0)
    }

    pub fn summary(&self) -> RunSummary {
        let ledger = evaluation_accounting(self);
        RunSummary {
            strategy: self.config.strategy.name().to_string(),
            seed: self.config.rng_seed,
            total_cost: self.total_cost,
            exploratory_evaluations: ledger.stages.exploratory,
            uncertainty_evaluations: ledger.exploratory_by_cause.uncertainty,
            events: self.events.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse {
            context: "run log".into(),
            message: e.to_string(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            context: "run log".into(),
            message: e.to_string(),
        })
    }

    pub fn trajectory_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let wrap = |e: csv::Error| Error::Parse {
            context: "trajectory csv".into(),
            message: e.to_string(),
        };
        for row in &self.trajectory {
            w.serialize(row).map_err(wrap)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Parse {
            context: "trajectory csv".into(),
            message: e.to_string(),
        })?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// `true` iff the max-norm difference of the two price vectors exceeds the tolerance.
pub fn detect_reset(p_now: &[f64], p_last: &[f64]) -> Result<bool> {
    if p_now.len() != p_last.len() {
        return Err(Error::DimensionMismatch {
            expected: p_last.len(),
            found: p_now.len(),
        });
    }
    Ok(p_now
        .iter()
        .zip(p_last)
        .any(|(a, b)| (a - b).abs() > RESET_TOLERANCE))
}

/// Mutable state carried between cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub x: PlantState,
    pub pool: ElitePool,
    pub surrogate: SurrogateState,
    pub p_last: Option<Vec<f64>>,
    pub t_reset: f64,
    pub boosted: bool,
}

struct CyclePlan {
    u_high: Vec<f64>,
    planned_cost: Option<f64>,
    evaluations: StageCounts,
    path: Option<DecisionPath>,
    triggers: Option<Triggers>,
    targets: Option<TerminalTargets>,
    elites_used: usize,
    event: Option<ExplorationEvent>,
}

struct CycleSeeds {
    exploratory: u64,
    low: u64,
    high: u64,
    blend: u64,
}

pub fn run(cfg: &RunConfig, forecasts: &Forecasts) -> Result<RunLog> {
    cfg.validate()?;
    let needed = cfg.t_end + LOOKAHEAD_HOURS;
    if forecasts.available_hours() + 1e-9 < needed {
        return Err(Error::OutOfRange {
            start: 0.0,
            end: needed,
            available: forecasts.available_hours(),
        });
    }
    let unc = cfg.effective_uncertainty();
    let problem = Problem {
        params: &cfg.plant,
        weights: &cfg.weights,
        solver: &cfg.solver,
    };
    let high = cfg.resolutions.high;
    let mut master = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut state = ControllerState {
        x: cfg.x0,
        pool: ElitePool::new(),
        surrogate: SurrogateState::new(cfg.rng_seed ^ 0xA5A5_5A5A_0F0F_F0F0),
        p_last: None,
        t_reset: 0.0,
        boosted: false,
    };
    let mut cycles = Vec::with_capacity(cfg.cycles());
    let mut events = Vec::new();
    let mut controls = Vec::with_capacity(cfg.cycles() * high.horizon);
    let mut trajectory = Vec::with_capacity(cfg.cycles() * high.horizon);
    let mut evaluations = StageCounts::default();
    let (mut energy_total, mut shortfall_total) = (0.0, 0.0);

    for cycle in 0..cfg.cycles() {
        let t_k = cycle as f64 * CYCLE_HOURS;
        let seeds = CycleSeeds {
            exploratory: master.random(),
            low: master.random(),
            high: master.random(),
            blend: master.random(),
        };

        let p_now = forecasts.slice(t_k, high.dt, high.horizon)?.prices;
        let reset = match &state.p_last {
            None => true,
            Some(p_last) => detect_reset(&p_now, p_last)?,
        };
        if reset {
            state.pool.clear();
            state.surrogate.reset();
            state.t_reset = t_k;
        }
        state.boosted = reset;
        state.p_last = Some(p_now);
        let budgets = cfg.budgets(state.boosted);
        let pool_before = state.pool.len();

        let high_slice = forecasts.slice(t_k, high.dt, high.horizon)?;
        let plan = plan_cycle(cfg, &unc, &problem, forecasts, &mut state, t_k, &high_slice, budgets, &seeds)?;

        let traj = simulate(&state.x, &plan.u_high, &high_slice, &cfg.plant, &cfg.weights, None)?;
        let (mut energy, mut shortfall) = (0.0, 0.0);
        for (i, out) in traj.outputs.iter().enumerate() {
            energy += out.energy_cost;
            shortfall += out.shortfall;
            let x = &traj.states[i + 1];
            trajectory.push(TrajectoryRow {
                t_hours: t_k + (i + 1) as f64 * high.dt,
                soc: x.soc,
                t_median_c: x.t_median,
                q_prod_mw: x.q_prod,
                p_grid_kw: out.p_grid,
                price: high_slice.prices[i],
                cost_usd: out.stage_cost(),
            });
        }
        controls.extend(plan.u_high.chunks(CHANNELS).map(|c| ControlStep {
            u_pum: c[0],
            u_bat: c[1],
        }));
        state.x = *traj.states.last().expect("trajectory has states");
        energy_total += energy;
        shortfall_total += shortfall;
        evaluations.add(&plan.evaluations);
        if let Some(e) = plan.event {
            events.push(e);
        }

        cycles.push(CycleRecord {
            cycle,
            t_hours: t_k,
            reset,
            boosted: state.boosted,
            t_reset: state.t_reset,
            budgets,
            evaluations: plan.evaluations,
            path: plan.path,
            triggers: plan.triggers,
            trigger: plan.triggers.and_then(|t| t.cause()),
            targets: plan.targets,
            planned_cost: plan.planned_cost,
            energy_cost: energy,
            shortfall_penalty: shortfall,
            pool_before,
            pool_after: state.pool.len(),
            elites_used: plan.elites_used,
            dataset_size: state.surrogate.dataset_len(),
        });
    }

    Ok(RunLog {
        config: cfg.clone(),
        cycles,
        events,
        controls,
        trajectory,
        total_cost: energy_total + shortfall_total,
        energy_cost: energy_total,
        shortfall_penalty: shortfall_total,
        evaluations,
        final_state: state.x,
    })
}

#[allow(clippy::too_many_arguments)]
fn plan_cycle(
    cfg: &RunConfig,
    unc: &UncertaintyConfig,
    problem: &Problem<'_>,
    forecasts: &Forecasts,
    state: &mut ControllerState,
    t_k: f64,
    high_slice: &ForecastSlice,
    budgets: StageCounts,
    seeds: &CycleSeeds,
) -> Result<CyclePlan> {
    let res = &cfg.resolutions;
    let x_k = state.x;
    let mut blend_rng = ChaCha8Rng::seed_from_u64(seeds.blend);

    match cfg.strategy {
        Strategy::Rule => {
            let day = plan_day(&forecasts.day_prices(t_k), &forecasts.load, &cfg.rule, &cfg.plant)?;
            Ok(CyclePlan {
                u_high: flatten_controls(&day.steps),
                planned_cost: None,
                evaluations: StageCounts::default(),
                path: None,
                triggers: None,
                targets: None,
                elites_used: 0,
                event: None,
            })
        }
        Strategy::Hr | Strategy::HrWs => {
            let targets = cfg.targets_without_exploration();
            let seeds_init = if cfg.strategy == Strategy::HrWs {
                state.pool.sample(res.high.pop_size / 2, &mut blend_rng)
            } else {
                Vec::new()
            };
            let elites_used = seeds_init.len();
            let out = problem.solve(
                &x_k,
                high_slice,
                Some(&targets),
                res.high.pop_size,
                budgets.total(),
                &seeds_init,
                seeds.high,
            )?;
            if cfg.strategy.warm_starts() {
                state.pool.extend_from(&out.population);
            }
            Ok(CyclePlan {
                u_high: out.best,
                planned_cost: Some(out.best_fitness),
                evaluations: StageCounts {
                    high: out.evaluations,
                    ..StageCounts::default()
                },
                path: None,
                triggers: None,
                targets: Some(targets),
                elites_used,
                event: None,
            })
        }
        Strategy::Mr | Strategy::MrWs | Strategy::MlRf1 | Strategy::MlRf2 | Strategy::MlGb => {
            let explore = |budget: usize| -> Result<(TerminalTargets, usize)> {
                let e = &res.exploratory;
                let slice = forecasts.slice(t_k, e.dt, e.horizon)?;
                let r = solve_exploratory(problem, &x_k, &slice, e, budget, CYCLE_HOURS, seeds.exploratory)?;
                Ok((r.targets, r.evaluations))
            };
            let (targets, exploratory_evals, path, triggers, event) = if cfg.strategy.is_ml() {
                let phi = forecasts.slice(t_k, 2.0, 24)?.irradiance;
                let d = decide_targets(&mut state.surrogate, &phi, t_k, state.t_reset, unc, || {
                    explore(budgets.exploratory)
                })?;
                (d.targets.clamped(&cfg.plant), d.evaluations, Some(d.path), Some(d.triggers), d.event)
            } else if cfg.skip_exploratory {
                (cfg.targets_without_exploration(), 0, None, None, None)
            } else {
                let (t, n) = explore(budgets.exploratory)?;
                (t, n, Some(DecisionPath::Compute), None, None)
            };

            let empty = ElitePool::new();
            let pool = if cfg.strategy.warm_starts() { &state.pool } else { &empty };
            let low_slice = forecasts.slice(t_k, res.low.dt, res.low.horizon)?;
            let out = find_optimal_control(
                problem,
                &x_k,
                &targets,
                pool,
                &low_slice,
                high_slice,
                &res.low,
                &res.high,
                CascadeRun {
                    low_budget: budgets.low,
                    high_budget: budgets.high,
                    low_seed: seeds.low,
                    high_seed: seeds.high,
                },
                &mut blend_rng,
            )?;
            if cfg.strategy.warm_starts() {
                state.pool.extend_from(&out.high_population);
            }
            Ok(CyclePlan {
                u_high: out.u_high,
                planned_cost: Some(out.high_cost),
                evaluations: StageCounts {
                    exploratory: exploratory_evals,
                    low: out.low_evaluations,
                    high: out.high_evaluations,
                },
                path,
                triggers,
                targets: Some(targets),
                elites_used: out.elites_used,
                event,
            })
        }
    }
}

/// Exploratory evaluations split by what caused the solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CauseCounts {
    /// Strategies that run the exploratory stage every cycle.
    pub unconditional: usize,
    pub warmup: usize,
    pub periodic: usize,
    pub no_model: usize,
    pub uncertainty: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationLedger {
    pub stages: StageCounts,
    pub exploratory_by_cause: CauseCounts,
    /// Sum of configured per-cycle budgets, boosted cycles included.
    pub configured: StageCounts,
    pub exploratory_solves: usize,
}

pub fn evaluation_accounting(log: &RunLog) -> EvaluationLedger {
    let mut stages = StageCounts::default();
    let mut configured = StageCounts::default();
    let mut by_cause = CauseCounts::default();
    let mut solves = 0;
    for c in &log.cycles {
        stages.add(&c.evaluations);
        configured.add(&c.budgets);
        let n = c.evaluations.exploratory;
        if c.path == Some(DecisionPath::Compute) {
            solves += 1;
        }
        match c.trigger {
            Some(TriggerCause::Warmup) => by_cause.warmup += n,
            Some(TriggerCause::Periodic) => by_cause.periodic += n,
            Some(TriggerCause::NoModel) => by_cause.no_model += n,
            Some(TriggerCause::Uncertainty) => by_cause.uncertainty += n,
            None => by_cause.unconditional += n,
        }
    }
    EvaluationLedger {
        stages,
        exploratory_by_cause: by_cause,
        configured,
        exploratory_solves: solves,
    }
}
