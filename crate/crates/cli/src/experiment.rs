//! Experiment specification files and the `run` command.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use mrlop_core::controller::{run, Resolutions, RunConfig, Strategy};
use mrlop_core::forecast::{
    load_csv, synth_weather, CsvKind, Forecasts, LoadSchedule, LoadedSeries, SeasonLookahead, SeasonalPrices,
    WeatherJitter,
};

use crate::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticWeather {
    pub peak_ghi: f64,
    /// Day-to-day amplitude jitter; omitted means identical clear-sky days.
    #[serde(default)]
    pub jitter: Option<WeatherJitter>,
}

impl Default for SyntheticWeather {
    fn default() -> Self {
        Self {
            peak_ghi: 850.0,
            jitter: None,
        }
    }
}

/// Where prices and weather come from. Paths are relative to the spec file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSources {
    /// `season,hour,usd_per_kwh`; synthetic seasonal profiles when absent.
    pub prices_csv: Option<PathBuf>,
    /// `hour,ghi_w_m2`; synthetic irradiance when absent.
    pub weather_csv: Option<PathBuf>,
    pub synthetic_weather: SyntheticWeather,
    pub load: LoadSchedule,
    pub lookahead: SeasonLookahead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
    pub horizon_days: usize,
    #[serde(default)]
    pub data: DataSources,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Shortcut for `[exploratory, low, high]` default budgets; overrides `run.resolutions`.
    #[serde(default)]
    pub budgets: Option<[usize; 3]>,
    /// Every other controller setting; strategy, seed and horizon are filled per run.
    #[serde(default)]
    pub run: RunConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut spec: ExperimentSpec =
            serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut spec.data.prices_csv, &mut spec.data.weather_csv].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.strategies.is_empty() {
            bail!("config lists no strategies");
        }
        if self.seeds.is_empty() {
            bail!("config lists no seeds");
        }
        if self.horizon_days == 0 {
            bail!("horizon_days must be at least 1");
        }
        for cfg in self.run_configs().iter().take(self.strategies.len()) {
            cfg.validate()?;
        }
        Ok(())
    }

    /// One effective configuration per (strategy, seed), strategy-major.
    pub fn run_configs(&self) -> Vec<RunConfig> {
        let mut base = self.run.clone();
        base.t_end = 24.0 * self.horizon_days as f64;
        if let Some([e, l, h]) = self.budgets {
            base.resolutions = Resolutions::with_budgets(e, l, h);
        }
        self.strategies
            .iter()
            .flat_map(|&strategy| {
                let base = &base;
                self.seeds.iter().map(move |&rng_seed| RunConfig {
                    strategy,
                    rng_seed,
                    ..base.clone()
                })
            })
            .collect()
    }

    pub fn forecasts(&self) -> anyhow::Result<Forecasts> {
        let d = &self.data;
        let prices = match &d.prices_csv {
            None => SeasonalPrices::synthetic(),
            Some(path) => match load_csv(path, CsvKind::Prices)? {
                LoadedSeries::Prices(profiles) => SeasonalPrices::new(profiles)?,
                LoadedSeries::Weather(_) => unreachable!("price schema requested"),
            },
        };
        let weather = match &d.weather_csv {
            None => synth_weather(
                self.horizon_days + 2,
                d.synthetic_weather.peak_ghi,
                d.synthetic_weather.jitter,
            )?,
            Some(path) => match load_csv(path, CsvKind::Weather)? {
                LoadedSeries::Weather(w) => w,
                LoadedSeries::Prices(_) => unreachable!("weather schema requested"),
            },
        };
        Ok(Forecasts::new(prices, weather, d.load)?.with_lookahead(d.lookahead))
    }
}

/// Parse `0,1,2`, `0..10` or a mix of both.
pub fn parse_seeds(text: &str) -> anyhow::Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let (a, b): (u64, u64) = (a.parse()?, b.parse()?);
            if a >= b {
                bail!("empty seed range {part}");
            }
            seeds.extend(a..b);
        } else {
            seeds.push(part.parse().with_context(|| format!("invalid seed {part:?}"))?);
        }
    }
    if seeds.is_empty() {
        bail!("no seeds given");
    }
    Ok(seeds)
}

pub fn run_dir(out: &Path, cfg: &RunConfig) -> PathBuf {
    out.join(cfg.strategy.name()).join(format!("seed_{}", cfg.rng_seed))
}

fn write_run(out: &Path, cfg: &RunConfig, forecasts: &Forecasts) -> anyhow::Result<f64> {
    let log = run(cfg, forecasts)?;
    let dir = run_dir(out, cfg);
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(cfg)?)?;
    fs::write(dir.join("run_log.json"), log.to_json()?)?;
    fs::write(dir.join("trajectory.csv"), log.trajectory_csv()?)?;
    Ok(log.total_cost)
}

pub fn cmd_run(
    config: &Path,
    out: Option<PathBuf>,
    seeds: Option<Vec<u64>>,
    dry_run: bool,
) -> Result<(), Failure> {
    let mut spec = ExperimentSpec::load(config).map_err(Failure::Input)?;
    if let Some(out) = out {
        spec.output_dir = out;
    }
    if let Some(seeds) = seeds {
        spec.seeds = seeds;
    }
    spec.validate().map_err(Failure::Input)?;
    let echo = serde_json::to_string_pretty(&spec).map_err(|e| Failure::Input(e.into()))?;
    if dry_run {
        println!("{echo}");
        return Ok(());
    }
    let forecasts = spec.forecasts().map_err(Failure::Input)?;
    fs::create_dir_all(&spec.output_dir)
        .and_then(|_| fs::write(spec.output_dir.join("effective_config.json"), &echo))
        .map_err(|e| Failure::Input(anyhow::Error::new(e).context("cannot write output directory")))?;

    let configs = spec.run_configs();
    let results: Vec<(RunConfig, anyhow::Result<f64>)> = configs
        .into_par_iter()
        .map(|cfg| {
            let r = write_run(&spec.output_dir, &cfg, &forecasts);
            (cfg, r)
        })
        .collect();
    let mut failed = 0;
    for (cfg, r) in &results {
        match r {
            Ok(cost) => println!("{} seed {}: total cost {cost:.2}", cfg.strategy, cfg.rng_seed),
            Err(e) => {
                failed += 1;
                eprintln!("{} seed {} failed: {e:#}", cfg.strategy, cfg.rng_seed);
            }
        }
    }
    if failed > 0 {
        return Err(Failure::Runs(failed, results.len()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists_and_ranges() {
        assert_eq!(parse_seeds("0,1,2").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("3..6").unwrap(), vec![3, 4, 5]);
        assert_eq!(parse_seeds("0..2, 9").unwrap(), vec![0, 1, 9]);
        assert!(parse_seeds("").is_err());
        assert!(parse_seeds("5..5").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn minimal_spec_fills_defaults() {
        let spec: ExperimentSpec =
            serde_json::from_str(r#"{"strategies": ["MR_ws", "HR"], "seeds": [1, 2], "horizon_days": 7}"#).unwrap();
        spec.validate().unwrap();
        let runs = spec.run_configs();
        assert_eq!(runs.len(), 4);
        assert_eq!(runs[0].strategy, Strategy::MrWs);
        assert_eq!(runs[3].rng_seed, 2);
        assert!(runs.iter().all(|r| r.t_end == 168.0));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let r: Result<ExperimentSpec, _> =
            serde_json::from_str(r#"{"strategies": ["MR"], "seeds": [1], "horizon_days": 1, "sedes": 3}"#);
        assert!(r.is_err());
    }

    #[test]
    fn budget_shortcut() {
        let spec: ExperimentSpec = serde_json::from_str(
            r#"{"strategies": ["MR"], "seeds": [1], "horizon_days": 1, "budgets": [500, 800, 800]}"#,
        )
        .unwrap();
        let r = &spec.run_configs()[0].resolutions;
        assert_eq!((r.exploratory.budget_default, r.low.budget_default, r.high.budget_default), (500, 800, 800));
        assert_eq!(r.high.budget_init, 3200);
    }
}
