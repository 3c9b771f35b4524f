//! Multi-resolution receding-horizon control of a heat-pump, thermal-tank and
//! battery plant.
//!
//! A daily control cycle determines terminal storage targets (from a long,
//! coarse exploratory solve or from an online-trained surrogate), then solves a
//! low-resolution and a high-resolution problem with an adaptive differential
//! evolution solver, warm-started from an archive of earlier solutions.
//!
//! Module map:
//!
//! * [`forecast`]: price, irradiance and load series with resolution-aware slicing.
//! * [`plant`]: discrete-time plant model, control projections and costs.
//! * [`solver`]: JADE adaptive differential evolution.
//! * [`cascade`]: exploratory solve and the two-stage low/high cascade.
//! * [`surrogate`]: random forest and gradient boosting target predictors.
//! * [`controller`]: the receding-horizon main loop and strategy dispatch.
//! * [`baseline`]: rule-based supervisory controller.
//! * [`analytics`]: exploration metrics, cost statistics and reports.

pub mod analytics;
pub mod baseline;
pub mod cascade;
pub mod controller;
pub mod error;
pub mod forecast;
pub mod plant;
pub mod solver;
pub mod surrogate;

pub use error::{Error, Result};
