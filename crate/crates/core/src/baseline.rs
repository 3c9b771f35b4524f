//! Rule-based supervisory controller: a fixed daily plan from the hourly price curve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::LoadSchedule;
use crate::plant::{ControlStep, PlantParams};

/// Half-hour steps per planned day.
pub const STEPS_PER_DAY: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleParams {
    /// USD/kWh
    pub c_gas: f64,
    pub eta_boiler: f64,
    pub cop: f64,
    pub n_price_hours: usize,
}

impl Default for RuleParams {
    fn default() -> Self {
        Self {
            c_gas: 0.039,
            eta_boiler: 0.9,
            cop: 3.0,
            n_price_hours: 4,
        }
    }
}

impl RuleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_gas >= 0.0 && self.eta_boiler > 0.0 && self.cop > 0.0) {
            return Err(Error::config("rule parameters must be positive"));
        }
        if self.n_price_hours == 0 || self.n_price_hours > 24 {
            return Err(Error::config("n_price_hours must lie in 1..=24"));
        }
        Ok(())
    }
}

/// Electricity price (USD/kWh) below which the heat pump beats the gas boiler.
pub fn price_threshold(p: &RuleParams) -> f64 {
    p.c_gas * p.cop / p.eta_boiler
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayPlan {
    pub steps: Vec<ControlStep>,
    pub battery_charge_hours: Vec<usize>,
    pub battery_discharge_hours: Vec<usize>,
    pub tank_charge_hours: Vec<usize>,
}

/// Hours ordered by price, ties to the earlier hour.
fn by_price(prices: &[f64; 24], hours: impl Iterator<Item = usize>, descending: bool) -> Vec<usize> {
    let mut h: Vec<usize> = hours.collect();
    h.sort_by(|&a, &b| {
        let ord = prices[a].total_cmp(&prices[b]);
        (if descending { ord.reverse() } else { ord }).then(a.cmp(&b))
    });
    h
}

pub fn plan_day(
    prices: &[f64; 24],
    schedule: &LoadSchedule,
    rule: &RuleParams,
    plant: &PlantParams,
) -> Result<DayPlan> {
    rule.validate()?;
    schedule.validate()?;
    let active = |h: usize| schedule.is_active(h as f64);
    let n = rule.n_price_hours;

    let mut battery_charge_hours = by_price(prices, 0..24, false);
    battery_charge_hours.truncate(n);
    let mut battery_discharge_hours =
        by_price(prices, (0..24).filter(|&h| active(h) && !battery_charge_hours.contains(&h)), true);
    battery_discharge_hours.truncate(n);

    // Off-hour tank charging, cheapest first, until an initially empty tank is projected full.
    let threshold = price_threshold(rule);
    let per_hour = plant.heat_pump_output(plant.u_nom);
    let mut tank_charge_hours = Vec::new();
    let mut projected = 0.0;
    for h in by_price(prices, (0..24).filter(|&h| !active(h) && prices[h] < threshold), false) {
        if projected >= plant.tank_capacity {
            break;
        }
        tank_charge_hours.push(h);
        projected += per_hour;
    }

    let steps = (0..STEPS_PER_DAY)
        .map(|i| {
            let h = i / 2;
            let u_pum = if active(h) || tank_charge_hours.contains(&h) {
                plant.u_nom
            } else {
                0.0
            };
            let u_bat = if battery_charge_hours.contains(&h) {
                1.0
            } else if battery_discharge_hours.contains(&h) {
                -1.0
            } else {
                0.0
            };
            ControlStep { u_pum, u_bat }
        })
        .collect();
    battery_charge_hours.sort_unstable();
    battery_discharge_hours.sort_unstable();
    tank_charge_hours.sort_unstable();
    Ok(DayPlan {
        steps,
        battery_charge_hours,
        battery_discharge_hours,
        tank_charge_hours,
    })
}
