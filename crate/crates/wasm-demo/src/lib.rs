//! Browser bindings for the dispatch and profitability library.
//!
//! Every function returns a JSON string so the page can stay plain JS.

use prosumer_storage::fixtures::{scenario, Archetype, DAYS, DEFAULT_SEED, STEPS};
use prosumer_storage::optimizer::solve_dispatch;
use prosumer_storage::profitability::{assess, cycle_economics, evaluate};
use prosumer_storage::{
    BatterySpec, DispatchProblem, EvalOptions, PaybackConvention, PpcSchedule, ScenarioSeries, TariffSchedule,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const STEPS_PER_DAY: usize = STEPS / DAYS;

fn err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn json(v: &impl Serialize) -> Result<String, JsValue> {
    serde_json::to_string(v).map_err(err)
}

fn inputs(fixture: &str, battery: &str) -> Result<(ScenarioSeries, BatterySpec), JsValue> {
    let archetype: Archetype = fixture.parse().map_err(err)?;
    let s = scenario(archetype, DEFAULT_SEED, &TariffSchedule::default()).map_err(err)?;
    let b = BatterySpec::default_catalog()
        .into_iter()
        .find(|b| b.name == battery)
        .ok_or_else(|| err(format!("unknown battery {battery}")))?;
    Ok((s, b))
}

/// Names of the fixtures and of the battery catalog.
#[wasm_bindgen]
pub fn catalog() -> Result<String, JsValue> {
    #[derive(Serialize)]
    struct Out {
        fixtures: Vec<(&'static str, &'static str)>,
        batteries: Vec<String>,
    }
    json(&Out {
        fixtures: Archetype::ALL.iter().map(|a| (a.name(), a.description())).collect(),
        batteries: BatterySpec::default_catalog().into_iter().map(|b| b.name).collect(),
    })
}

#[derive(Serialize)]
struct DayTrace {
    day: usize,
    step_hours: f64,
    load: Vec<f64>,
    pv: Vec<f64>,
    grid: Vec<f64>,
    soc: Vec<f64>,
    price: Vec<f64>,
    report: prosumer_storage::ProfitabilityReport,
}

/// Optimal month dispatch for a fixture, returning one day of it plus the
/// month's report.
#[wasm_bindgen]
pub fn simulate_day(fixture: &str, battery: &str, day: usize) -> Result<String, JsValue> {
    let (s, b) = inputs(fixture, battery)?;
    let (report, sel) = assess(&s, &b, &PpcSchedule::default(), &EvalOptions::default()).map_err(err)?;
    let day = day.min(DAYS - 1);
    let r = day * STEPS_PER_DAY..(day + 1) * STEPS_PER_DAY;
    let grid = sel.dispatch.grid_load(&s);
    json(&DayTrace {
        day,
        step_hours: s.step_hours(),
        load: s.load()[r.clone()].to_vec(),
        pv: s.pv()[r.clone()].to_vec(),
        grid: grid[r.clone()].to_vec(),
        soc: sel.dispatch.b[r.clone()].to_vec(),
        price: s.price()[r].to_vec(),
        report,
    })
}

#[derive(Serialize)]
struct CurvePoint {
    eta: f64,
    cycles: f64,
    g_t: f64,
    p_cyc: f64,
    energy_cost: f64,
}

/// Cycles and gains as the friction coefficient falls from 1 to `eta_min`.
#[wasm_bindgen]
pub fn friction_curve(fixture: &str, battery: &str, eta_min: f64, points: usize) -> Result<String, JsValue> {
    let (s, b) = inputs(fixture, battery)?;
    let opts = EvalOptions::default();
    let (_, sel) = assess(&s, &b, &PpcSchedule::default(), &opts).map_err(err)?;
    let points = points.clamp(2, 200);
    let eta_min = eta_min.clamp(0.05, 1.0);
    let mut out = Vec::with_capacity(points);
    for k in 0..points {
        let eta = 1.0 - (1.0 - eta_min) * k as f64 / (points - 1) as f64;
        let prob =
            DispatchProblem::new(&s, &b, &opts.dispatch).with_peak_cap(sel.dispatch.p_max_set).with_friction(eta);
        let d = solve_dispatch(&prob, &opts.dispatch).map_err(err)?;
        let r = evaluate(&s, &b, &sel, &d, &opts).map_err(err)?;
        out.push(CurvePoint { eta, cycles: r.n_cyc_100, g_t: r.g_t, p_cyc: r.p_cyc, energy_cost: r.energy_cost });
    }
    json(&out)
}

/// Per-cycle profit and payback from a monthly gain and cycle count.
#[wasm_bindgen]
pub fn profitability(g_t: f64, cycles: f64, b_rated: f64, ramp_c: f64, twelve_months: bool) -> Result<String, JsValue> {
    let b = BatterySpec::standard(b_rated, ramp_c).map_err(err)?;
    let convention = if twelve_months { PaybackConvention::TwelveMonths } else { PaybackConvention::CalendarExact };
    let e = cycle_economics(g_t, cycles, b_rated, &b.cost(), b.calendar_life_years, 30.0 * 24.0, convention);
    json(&serde_json::json!({
        "g_cyc": e.g_cyc,
        "c_cyc": b.cost().c_cyc,
        "p_cyc": e.p_cyc,
        "expb_years": e.expb_years,
        "profitable": e.profitable,
        "b_cost": b.cost().b_cost,
    }))
}
