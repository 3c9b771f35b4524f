//! `report`, `bench` and `synth-data`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};

use mrlop_core::analytics::build_report;
use mrlop_core::controller::RunLog;
use mrlop_core::forecast::{synth_weather, write_prices_csv, write_weather_csv, SeasonalPrices, WeatherJitter};
use mrlop_core::solver::{optimize, rosenbrock, sphere, SolverParams};

use crate::Failure;

fn collect_logs(dir: &Path, found: &mut Vec<PathBuf>) -> anyhow::Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .with_context(|| format!("cannot read {}", dir.display()))?
        .collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let path = e.path();
        if path.is_dir() {
            collect_logs(&path, found)?;
        } else if path.file_name().is_some_and(|n| n == "run_log.json") {
            found.push(path);
        }
    }
    Ok(())
}

pub fn cmd_report(dir: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let mut paths = Vec::new();
    collect_logs(dir, &mut paths).map_err(Failure::Input)?;
    if paths.is_empty() {
        return Err(Failure::Input(anyhow::anyhow!("no run_log.json files under {}", dir.display())));
    }
    let summaries = paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            Ok(RunLog::from_json(&text).with_context(|| format!("invalid run log {}", p.display()))?.summary())
        })
        .collect::<anyhow::Result<Vec<_>>>()
        .map_err(Failure::Input)?;
    let write = || -> anyhow::Result<()> {
        let report = build_report(&summaries)?;
        let out = out.unwrap_or_else(|| dir.to_path_buf());
        fs::create_dir_all(&out)?;
        fs::write(out.join("report.json"), serde_json::to_string_pretty(&report)?)?;
        let costs = report.cost_table()?;
        fs::write(out.join("costs.csv"), &costs)?;
        fs::write(out.join("evaluations.csv"), report.evaluation_table()?)?;
        fs::write(out.join("metrics.csv"), report.metrics_table()?)?;
        print!("{costs}");
        Ok(())
    };
    write().map_err(Failure::Input)
}

pub fn cmd_bench(suite: &str, seeds: &[u64], dimension: usize) -> Result<(), Failure> {
    let objective: fn(&[f64]) -> f64 = match suite {
        "sphere" => sphere,
        "rosenbrock" => rosenbrock,
        other => return Err(Failure::Input(anyhow::anyhow!("unknown suite {other:?} (sphere, rosenbrock)"))),
    };
    let bound = if suite == "sphere" { 5.0 } else { 2.048 };
    let mut solved = 0;
    for &seed in seeds {
        let params = SolverParams::new(48, 5000, vec![(-bound, bound); dimension], seed);
        let out = optimize(objective, &params, &[]).map_err(|e| Failure::Input(e.into()))?;
        let monotone = out.history.windows(2).all(|w| w[1] <= w[0]);
        if out.best_fitness < 1e-3 {
            solved += 1;
        }
        println!(
            "{suite} seed {seed}: best {:.3e}, {} evaluations, {} generations, monotone {monotone}",
            out.best_fitness, out.evaluations, out.generations
        );
    }
    println!("{solved}/{} runs below 1e-3", seeds.len());
    Ok(())
}

pub fn cmd_synth_data(out: &Path, days: usize, peak_ghi: f64, jitter_seed: Option<u64>) -> Result<(), Failure> {
    let run = || -> anyhow::Result<()> {
        if days == 0 {
            bail!("days must be at least 1");
        }
        fs::create_dir_all(out)?;
        let jitter = jitter_seed.map(|seed| WeatherJitter { seed, min_scale: 0.2 });
        write_prices_csv(out.join("prices.csv"), &SeasonalPrices::synthetic())?;
        write_weather_csv(out.join("weather.csv"), &synth_weather(days, peak_ghi, jitter)?)?;
        println!("wrote {} and {}", out.join("prices.csv").display(), out.join("weather.csv").display());
        Ok(())
    };
    run().map_err(Failure::Input)
}
