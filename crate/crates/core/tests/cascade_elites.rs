//! Paired experiment: on a repeated day, seeding the high-resolution solve with
//! the previous day's final population should not make the plan worse.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mrlop_core::cascade::{find_optimal_control, CascadeRun, ElitePool, Problem, ResolutionConfig, SolverSettings};
use mrlop_core::forecast::{synth_weather, Forecasts, LoadSchedule, SeasonalPrices};
use mrlop_core::plant::{CostWeights, PlantParams, PlantState, TerminalTargets};

const PAIRS: u64 = 30;
const REQUIRED: f64 = 0.8;
const BUDGET: usize = 800;

#[test]
fn elite_seeding_helps_on_identical_days() {
    let f = Forecasts::new(
        SeasonalPrices::synthetic(),
        synth_weather(3, 800.0, None).unwrap(),
        LoadSchedule::default(),
    )
    .unwrap();
    let params = PlantParams::default();
    let weights = CostWeights::default();
    let solver = SolverSettings::default();
    let problem = Problem {
        params: &params,
        weights: &weights,
        solver: &solver,
    };
    let low = ResolutionConfig::low();
    let high = ResolutionConfig::high();
    let low_slice = f.slice(0.0, low.dt, low.horizon).unwrap();
    let high_slice = f.slice(0.0, high.dt, high.horizon).unwrap();
    let x0 = PlantState {
        soc: 0.5,
        t_median: 70.0,
        q_prod: 0.0,
    };
    let targets = TerminalTargets::greedy_discharge(&params);

    let mut wins = 0;
    for seed in 0..PAIRS {
        let run = |offset: u64| CascadeRun {
            low_budget: BUDGET,
            high_budget: BUDGET,
            low_seed: seed * 10 + offset,
            high_seed: seed * 10 + offset + 1,
        };
        let solve = |pool: &ElitePool, r: CascadeRun| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            find_optimal_control(&problem, &x0, &targets, pool, &low_slice, &high_slice, &low, &high, r, &mut rng)
                .unwrap()
        };
        let day1 = solve(&ElitePool::new(), run(0));
        let mut pool = ElitePool::new();
        pool.extend_from(&day1.high_population);
        let with = solve(&pool, run(5));
        let without = solve(&ElitePool::new(), run(5));
        assert_eq!(with.elites_used, high.pop_size / 2);
        assert_eq!(without.elites_used, 0);
        if with.high_cost <= without.high_cost {
            wins += 1;
        }
    }
    let rate = wins as f64 / PAIRS as f64;
    assert!(rate >= REQUIRED, "elite seeding won {wins}/{PAIRS}");
}
