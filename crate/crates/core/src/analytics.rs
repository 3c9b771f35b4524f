//! Exploration metrics, cross-seed cost statistics and tabular reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::surrogate::TriggerCause;

/// Surrogate output against the value the exploratory solve then found, for one target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetEvent {
    pub y_hat: f64,
    pub u: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorationEvent {
    pub t_hours: f64,
    pub trigger_cause: TriggerCause,
    pub soc: TargetEvent,
    pub t_median: TargetEvent,
    pub features: Vec<f64>,
}

/// Normalisation range for battery SoC intervals.
pub const R_SOC: f64 = 1.0;
/// Normalisation range for tank temperature intervals, K.
pub const R_TEMP: f64 = 20.0;

fn nonempty<T>(events: &[T]) -> Result<usize> {
    match events.len() {
        0 => Err(Error::EmptyEventSet),
        n => Ok(n),
    }
}

/// Percentage of events whose realised target exceeded `theta`.
pub fn precision(events: &[TargetEvent], theta: f64) -> Result<f64> {
    let n = nonempty(events)?;
    let tp = events.iter().filter(|e| e.y > theta).count();
    Ok(100.0 * tp as f64 / n as f64)
}

/// Percentage of events whose realised target lies at or below the upper bound.
pub fn picp(events: &[TargetEvent]) -> Result<f64> {
    let n = nonempty(events)?;
    let covered = events.iter().filter(|e| e.y <= e.u).count();
    Ok(100.0 * covered as f64 / n as f64)
}

/// Mean interval half-width `u − ŷ` as a percentage of `r_target`.
pub fn nmiw(events: &[TargetEvent], r_target: f64) -> Result<f64> {
    if !(r_target > 0.0) {
        return Err(Error::validation("normalisation range must be positive"));
    }
    let n = nonempty(events)?;
    let width: f64 = events.iter().map(|e| (e.u - e.y_hat) / r_target).sum();
    Ok(100.0 * width / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetMetrics {
    pub precision: f64,
    pub picp: f64,
    pub nmiw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_unc: usize,
    pub soc: TargetMetrics,
    pub t_median: TargetMetrics,
    /// A violation or miss on either target counts for the system; width is the mean of both.
    pub system: TargetMetrics,
}

pub fn target_metrics(events: &[TargetEvent], theta: f64, r_target: f64) -> Result<TargetMetrics> {
    Ok(TargetMetrics {
        precision: precision(events, theta)?,
        picp: picp(events)?,
        nmiw: nmiw(events, r_target)?,
    })
}

pub fn metrics_report(events: &[ExplorationEvent]) -> Result<MetricsReport> {
    let n = nonempty(events)?;
    let soc: Vec<TargetEvent> = events.iter().map(|e| e.soc).collect();
    let tm: Vec<TargetEvent> = events.iter().map(|e| e.t_median).collect();
    let soc_m = target_metrics(&soc, events[0].soc.theta, R_SOC)?;
    let tm_m = target_metrics(&tm, events[0].t_median.theta, R_TEMP)?;
    let tp = events
        .iter()
        .filter(|e| e.soc.y > e.soc.theta || e.t_median.y > e.t_median.theta)
        .count();
    let covered = events
        .iter()
        .filter(|e| e.soc.y <= e.soc.u && e.t_median.y <= e.t_median.u)
        .count();
    Ok(MetricsReport {
        n_unc: n,
        soc: soc_m,
        t_median: tm_m,
        system: TargetMetrics {
            precision: 100.0 * tp as f64 / n as f64,
            picp: 100.0 * covered as f64 / n as f64,
            nmiw: 0.5 * (soc_m.nmiw + tm_m.nmiw),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    /// Sample standard deviation; absent for a single run.
    pub std: Option<f64>,
    pub std_pct: Option<f64>,
}

pub fn cost_stats(costs: &[f64]) -> Result<RunStats> {
    if costs.is_empty() {
        return Err(Error::validation("cost statistics need at least one run"));
    }
    let n = costs.len();
    let mut sorted = costs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = costs.iter().sum::<f64>() / n as f64;
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let std = (n > 1).then(|| (costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
    Ok(RunStats {
        n,
        mean,
        median,
        min: sorted[0],
        max: sorted[n - 1],
        std,
        std_pct: std.map(|s| 100.0 * s / mean),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSumTest {
    /// Mann–Whitney U of the first sample.
    pub u: f64,
    pub z: f64,
    /// One-sided p-value for the first sample being stochastically smaller.
    pub p_less: f64,
}

/// Wilcoxon rank-sum test with midranks, tie-corrected variance and continuity correction.
pub fn rank_sum_less(a: &[f64], b: &[f64]) -> Result<RankSumTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::validation("rank-sum test needs two non-empty samples"));
    }
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let mut pooled: Vec<(f64, bool)> = a.iter().map(|&v| (v, true)).chain(b.iter().map(|&v| (v, false))).collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    let n = pooled.len();
    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        rank_sum_a += midrank * pooled[i..=j].iter().filter(|p| p.1).count() as f64;
        i = j + 1;
    }
    let u = rank_sum_a - n1 * (n1 + 1.0) / 2.0;
    let mu = n1 * n2 / 2.0;
    let nt = n1 + n2;
    let var = n1 * n2 / 12.0 * ((nt + 1.0) - tie_term / (nt * (nt - 1.0)));
    if !(var > 0.0) {
        return Ok(RankSumTest { u, z: 0.0, p_less: 1.0 });
    }
    let z = (u - mu + 0.5) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(RankSumTest {
        u,
        z,
        p_less: normal.cdf(z),
    })
}

/// Per-run figures a report aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub strategy: String,
    pub seed: u64,
    pub total_cost: f64,
    pub exploratory_evaluations: usize,
    /// Exploratory evaluations on cycles triggered by uncertainty alone.
    pub uncertainty_evaluations: usize,
    pub events: Vec<ExplorationEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub strategy: String,
    pub costs: RunStats,
    pub mean_exploratory_evaluations: f64,
    pub mean_uncertainty_evaluations: f64,
    pub metrics: Option<MetricsReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub strategies: Vec<StrategyReport>,
}

pub fn build_report(runs: &[RunSummary]) -> Result<Report> {
    if runs.is_empty() {
        return Err(Error::validation("no runs to report"));
    }
    let mut groups: BTreeMap<&str, Vec<&RunSummary>> = BTreeMap::new();
    for r in runs {
        groups.entry(r.strategy.as_str()).or_default().push(r);
    }
    let strategies = groups
        .into_iter()
        .map(|(name, rs)| {
            let costs: Vec<f64> = rs.iter().map(|r| r.total_cost).collect();
            let n = rs.len() as f64;
            let events: Vec<ExplorationEvent> = rs.iter().flat_map(|r| r.events.iter().cloned()).collect();
            Ok(StrategyReport {
                strategy: name.to_string(),
                costs: cost_stats(&costs)?,
                mean_exploratory_evaluations: rs.iter().map(|r| r.exploratory_evaluations as f64).sum::<f64>() / n,
                mean_uncertainty_evaluations: rs.iter().map(|r| r.uncertainty_evaluations as f64).sum::<f64>() / n,
                metrics: if events.is_empty() { None } else { Some(metrics_report(&events)?) },
            })
        })
        .collect::<Result<_>>()?;
    Ok(Report { strategies })
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let wrap = |e: csv::Error| Error::Parse {
        context: "report csv".into(),
        message: e.to_string(),
    };
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse {
        context: "report csv".into(),
        message: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.4}"))
}

impl Report {
    /// Cost statistics: one row per strategy.
    pub fn cost_table(&self) -> Result<String> {
        let rows = self
            .strategies
            .iter()
            .map(|s| {
                let c = &s.costs;
                vec![
                    s.strategy.clone(),
                    c.n.to_string(),
                    format!("{:.4}", c.mean),
                    format!("{:.4}", c.median),
                    format!("{:.4}", c.min),
                    format!("{:.4}", c.max),
                    opt(c.std),
                    opt(c.std_pct),
                ]
            })
            .collect();
        csv_string(&["strategy", "runs", "mean", "median", "min", "max", "std", "std_pct"], rows)
    }

    /// Exploratory evaluation counts: total and uncertainty-triggered only.
    pub fn evaluation_table(&self) -> Result<String> {
        let rows = self
            .strategies
            .iter()
            .map(|s| {
                vec![
                    s.strategy.clone(),
                    format!("{:.1}", s.mean_exploratory_evaluations),
                    format!("{:.1}", s.mean_uncertainty_evaluations),
                ]
            })
            .collect();
        csv_string(&["strategy", "total", "high_ucb_only"], rows)
    }

    /// Exploration metrics: one row per (strategy, target) for strategies with events.
    pub fn metrics_table(&self) -> Result<String> {
        let mut rows = Vec::new();
        for s in &self.strategies {
            let Some(m) = &s.metrics else { continue };
            for (target, tm) in [("soc", m.soc), ("t_median", m.t_median), ("system", m.system)] {
                rows.push(vec![
                    s.strategy.clone(),
                    target.to_string(),
                    m.n_unc.to_string(),
                    format!("{:.4}", tm.precision),
                    format!("{:.4}", tm.picp),
                    format!("{:.4}", tm.nmiw),
                ]);
            }
        }
        csv_string(&["strategy", "target", "n_unc", "precision_pct", "picp_pct", "nmiw_pct"], rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ev(y_hat: f64, u: f64, y: f64, theta: f64) -> TargetEvent {
        TargetEvent { y_hat, u, y, theta }
    }

    #[test]
    fn precision_examples() {
        let e: Vec<_> = [0.0, 0.5, 0.005].iter().map(|&y| ev(0.0, 0.0, y, 0.01)).collect();
        assert_relative_eq!(precision(&e, 0.01).unwrap(), 100.0 / 3.0, max_relative = 1e-12);
        assert_eq!(precision(&e[..1], 0.01).unwrap(), 0.0);
        assert_eq!(precision(&e[1..2], 0.01).unwrap(), 100.0);
        assert!(matches!(precision(&[], 0.01), Err(Error::EmptyEventSet)));
    }

    #[test]
    fn picp_examples() {
        let e = [ev(0.0, 0.6, 0.5, 0.0), ev(0.0, 0.6, 0.7, 0.0)];
        assert_eq!(picp(&e).unwrap(), 50.0);
        assert_eq!(picp(&[ev(0.0, 0.3, 0.3, 0.0)]).unwrap(), 100.0);
        assert_eq!(picp(&[ev(0.0, 0.3, 0.4, 0.0)]).unwrap(), 0.0);
    }

    #[test]
    fn nmiw_examples() {
        assert_relative_eq!(nmiw(&[ev(0.1, 0.15, 0.0, 0.0)], 1.0).unwrap(), 5.0, max_relative = 1e-9);
        assert_eq!(nmiw(&[ev(0.2, 0.2, 0.0, 0.0)], 1.0).unwrap(), 0.0);
        let t = [ev(70.0, 75.0, 0.0, 71.0), ev(70.0, 79.0, 0.0, 71.0)];
        assert_relative_eq!(nmiw(&t, 20.0).unwrap(), 35.0, max_relative = 1e-12);
        assert!(nmiw(&t, 0.0).is_err());
    }

    #[test]
    fn cost_stats_examples() {
        let one = cost_stats(&[42.0]).unwrap();
        assert_eq!(one.std, None);
        assert_eq!(one.std_pct, None);
        let flat = cost_stats(&[10.0, 10.0, 10.0]).unwrap();
        assert_eq!((flat.mean, flat.std), (10.0, Some(0.0)));
        let s = cost_stats(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.median, 2.5);
        // Oracle: sqrt(((1.5² + 0.5²)·2) / 3) = sqrt(5/3).
        assert_relative_eq!(s.std.unwrap(), (5.0f64 / 3.0).sqrt(), max_relative = 1e-12);
        assert!((s.std.unwrap() - 1.291).abs() < 1e-3);
    }

    #[test]
    fn rank_sum_separated_samples() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [6.0, 7.0, 8.0, 9.0, 10.0];
        let t = rank_sum_less(&a, &b).unwrap();
        assert_eq!(t.u, 0.0);
        assert!(t.p_less < 0.01);
        assert!(rank_sum_less(&b, &a).unwrap().p_less > 0.99);
        let same = rank_sum_less(&[3.0, 3.0], &[3.0, 3.0]).unwrap();
        assert_eq!(same.p_less, 1.0);
    }

    #[test]
    fn rank_sum_matches_hand_computation() {
        // a = {1, 3}, b = {2, 4, 5}: ranks of a are 1 and 3, U = 4 − 3 = 1.
        // μ = 3, σ² = 2·3·6/12 = 3, z = (1 − 3 + 0.5)/√3.
        let t = rank_sum_less(&[1.0, 3.0], &[2.0, 4.0, 5.0]).unwrap();
        assert_eq!(t.u, 1.0);
        assert_relative_eq!(t.z, -1.5 / 3f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn report_tables() {
        let runs: Vec<RunSummary> = [1.0, 2.0, 3.0, 4.0]
            .iter()
            .enumerate()
            .map(|(i, &c)| RunSummary {
                strategy: "MR_ws".into(),
                seed: i as u64,
                total_cost: c,
                exploratory_evaluations: 4000,
                uncertainty_evaluations: 0,
                events: vec![],
            })
            .collect();
        let report = build_report(&runs).unwrap();
        let table = report.cost_table().unwrap();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1], "MR_ws,4,2.5000,2.5000,1.0000,4.0000,1.2910,51.6398");
        assert_eq!(report.metrics_table().unwrap().lines().count(), 1);
    }

    fn arb_event() -> impl Strategy<Value = ExplorationEvent> {
        (0.0f64..1.0, 0.0f64..0.2, 0.0f64..1.0, 65.0f64..80.0, 0.0f64..8.0, 68.0f64..82.0).prop_map(
            |(soc_hat, soc_w, soc_y, t_hat, t_w, t_y)| ExplorationEvent {
                t_hours: 0.0,
                trigger_cause: TriggerCause::Uncertainty,
                soc: ev(soc_hat, soc_hat + soc_w, soc_y, 0.01),
                t_median: ev(t_hat, t_hat + t_w, t_y, 71.0),
                features: vec![],
            },
        )
    }

    proptest! {
        #[test]
        fn metrics_invariant_under_reordering(mut events in prop::collection::vec(arb_event(), 1..30)) {
            let before = metrics_report(&events).unwrap();
            events.reverse();
            let after = metrics_report(&events).unwrap();
            prop_assert_eq!(before.soc.precision, after.soc.precision);
            prop_assert_eq!(before.system.picp, after.system.picp);
            prop_assert!((before.t_median.nmiw - after.t_median.nmiw).abs() < 1e-9);
        }

        #[test]
        fn precision_complements_false_positive_rate(events in prop::collection::vec(arb_event(), 1..30)) {
            let soc: Vec<TargetEvent> = events.iter().map(|e| e.soc).collect();
            let fp = soc.iter().filter(|e| e.y <= e.theta).count() as f64;
            let p = precision(&soc, 0.01).unwrap();
            prop_assert!((p + 100.0 * fp / soc.len() as f64 - 100.0).abs() < 1e-9);
        }

        #[test]
        fn stats_order(costs in prop::collection::vec(0.0f64..1e4, 1..20)) {
            let s = cost_stats(&costs).unwrap();
            prop_assert!(s.min <= s.median && s.median <= s.max);
        }
    }
}
