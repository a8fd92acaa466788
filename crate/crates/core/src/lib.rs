//! Battery dispatch co-optimization and storage profitability for prosumers.
//!
//! The crate solves the monthly dispatch problem of a behind-the-meter battery
//! under time-of-use prices, zero feed-in remuneration and a peak power
//! contract (PPC), counts equivalent full cycles on the resulting SoC
//! trajectory and scores the battery by profit per cycle per kWh and expected
//! payback.
//!
//! Module map:
//! - [`timeseries`]: scenario ingestion, tariffs, PPC levels, baseline metrics.
//! - [`battery`]: electrical and cost model of a storage candidate.
//! - [`lp`]: dense bounded-variable simplex with a dual certificate.
//! - [`optimizer`]: the dispatch LP, its exact stagewise solver, PPC selection
//!   and a grid dynamic-programming oracle.
//! - [`cycles`]: rainflow counting of equivalent 100% DoD cycles.
//! - [`profitability`]: gains, per-cycle economics, payback, friction tuning.
//! - [`report`] and [`fixtures`]: output formats and synthetic prosumer months.

pub mod battery;
pub mod config;
pub mod cycles;
pub mod error;
pub mod fixtures;
pub mod lp;
pub mod optimizer;
pub mod profitability;
pub mod report;
pub mod timeseries;

pub use battery::{BatteryCost, BatterySpec};
pub use cycles::{CycleCount, DamageModel};
pub use error::{Error, Result};
pub use optimizer::{DispatchOptions, DispatchProblem, DispatchSolution, PpcSelection};
pub use profitability::{EvalOptions, PaybackConvention, ProfitabilityReport};
pub use timeseries::{PpcSchedule, ScenarioSeries, TariffSchedule};
