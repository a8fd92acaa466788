//! Battery profitability: gains, profit per cycle per kWh, expected payback,
//! and friction tuning against a cycle budget.

use serde::{Deserialize, Serialize};

use crate::battery::{BatteryCost, BatterySpec};
use crate::cycles::{break_even_cycles, count_cycles, DamageModel, Horizon};
use crate::error::{Error, Result};
use crate::optimizer::{select_ppc, solve_dispatch, DispatchOptions, DispatchProblem, DispatchSolution, PpcSelection};
use crate::timeseries::{grid_metrics, PpcSchedule, ScenarioSeries};

const HOURS_PER_YEAR: f64 = 365.25 * 24.0;

/// How the gain over the evaluated window is annualized for the payback period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PaybackConvention {
    /// `B_cost · N_total / (G_T · N_year)` with a 365.25-day year.
    CalendarExact,
    /// Treat the window as one month: `B_cost / (12 · G_T)`.
    TwelveMonths,
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub damage: DamageModel,
    pub payback: PaybackConvention,
    pub dispatch: DispatchOptions,
    /// PPC level held before the battery; `None` = smallest level covering the baseline peak.
    pub baseline_level: Option<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            damage: DamageModel::linear(),
            payback: PaybackConvention::CalendarExact,
            dispatch: DispatchOptions::default(),
            baseline_level: None,
        }
    }
}

/// Per-cycle economics derived from the scalar results of one dispatch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleEconomics {
    pub g_cyc: f64,
    pub p_cyc: f64,
    pub expb_years: f64,
    pub profitable: bool,
}

/// Steps 3 to 6 of the profitability procedure.
///
/// With zero cycles, `g_cyc` is `+∞` when the gain is positive and 0 otherwise.
pub fn cycle_economics(
    g_t: f64,
    n_cyc_100: f64,
    b_rated: f64,
    cost: &BatteryCost,
    calendar_life_years: f64,
    horizon_hours: f64,
    convention: PaybackConvention,
) -> CycleEconomics {
    let capacity_cycles = n_cyc_100 * b_rated;
    let g_cyc = if capacity_cycles > 0.0 {
        g_t / capacity_cycles
    } else if g_t > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let p_cyc = g_cyc - cost.c_cyc;
    let expb_years = if g_t <= 0.0 {
        f64::INFINITY
    } else {
        match convention {
            PaybackConvention::CalendarExact => cost.b_cost * horizon_hours / (g_t * HOURS_PER_YEAR),
            PaybackConvention::TwelveMonths => cost.b_cost / (12.0 * g_t),
        }
    };
    CycleEconomics {
        g_cyc,
        p_cyc,
        expb_years,
        profitable: g_t > 0.0 && p_cyc > 0.0 && expb_years < calendar_life_years,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfitabilityReport {
    pub battery: String,
    pub b_rated: f64,
    pub ramp_c: f64,
    /// Arbitrage and self-sufficiency gain, €.
    pub g_arb: f64,
    /// Peak-shaving gain, €.
    pub g_pd: f64,
    pub g_t: f64,
    pub n_cyc_100: f64,
    pub g_cyc: f64,
    pub c_cyc: f64,
    pub p_cyc: f64,
    pub expb_years: f64,
    pub ss: f64,
    pub waste_kwh: f64,
    pub energy_cost: f64,
    pub baseline_energy_cost: f64,
    pub ppc_kva: f64,
    pub baseline_ppc_kva: f64,
    pub profitable: bool,
    pub eta_fric_used: f64,
}

/// Scores `dispatch` (solved under `selection`'s PPC level) for `battery`.
pub fn evaluate(
    scenario: &ScenarioSeries,
    battery: &BatterySpec,
    selection: &PpcSelection,
    dispatch: &DispatchSolution,
    opts: &EvalOptions,
) -> Result<ProfitabilityReport> {
    let baseline = scenario.baseline_metrics()?;
    let after = grid_metrics(scenario.load(), &dispatch.grid_load(scenario), scenario.price())?;
    let g_arb = baseline.energy_cost - after.energy_cost;
    let g_t = g_arb + selection.g_pd;
    let cycles = count_cycles(&dispatch.soc_with_initial(battery.b_0), battery.b_rated, &opts.damage);
    let cost = battery.cost();
    let econ = cycle_economics(
        g_t,
        cycles.n_cyc_100,
        battery.b_rated,
        &cost,
        battery.calendar_life_years,
        scenario.horizon_hours(),
        opts.payback,
    );
    Ok(ProfitabilityReport {
        battery: battery.name.clone(),
        b_rated: battery.b_rated,
        ramp_c: battery.ramp_c(),
        g_arb,
        g_pd: selection.g_pd,
        g_t,
        n_cyc_100: cycles.n_cyc_100,
        g_cyc: econ.g_cyc,
        c_cyc: cost.c_cyc,
        p_cyc: econ.p_cyc,
        expb_years: econ.expb_years,
        ss: after.self_sufficiency,
        waste_kwh: after.waste_kwh,
        energy_cost: after.energy_cost,
        baseline_energy_cost: baseline.energy_cost,
        ppc_kva: selection.limit_kva,
        baseline_ppc_kva: selection.baseline_limit_kva,
        profitable: econ.profitable,
        eta_fric_used: dispatch.eta_fric,
    })
}

/// PPC selection and evaluation of the unmodified problem (η_fric = 1).
pub fn assess(
    scenario: &ScenarioSeries,
    battery: &BatterySpec,
    ppc: &PpcSchedule,
    opts: &EvalOptions,
) -> Result<(ProfitabilityReport, PpcSelection)> {
    let selection = select_ppc(scenario, battery, ppc, opts.baseline_level, 1.0, &opts.dispatch)?;
    let report = evaluate(scenario, battery, &selection, &selection.dispatch, opts)?;
    Ok((report, selection))
}

/// Default monthly cycle budget for `battery` over the scenario window.
///
/// Uses the twelve-months convention when `convention` does, calendar days otherwise.
pub fn default_cycle_target(scenario: &ScenarioSeries, battery: &BatterySpec, convention: PaybackConvention) -> f64 {
    let horizon = match convention {
        PaybackConvention::TwelveMonths => Horizon::Months(1.0),
        PaybackConvention::CalendarExact => Horizon::Days(scenario.days()),
    };
    break_even_cycles(battery.cycle_life_100dod, battery.calendar_life_years, horizon)
}

/// Acceptable distance of tuned cycles from the target.
pub const CYCLE_TOLERANCE: f64 = 0.5;
/// Bisection stops once the η bracket is narrower than this.
pub const ETA_INTERVAL_TOL: f64 = 1e-4;
/// Smallest friction coefficient the tuner will try.
pub const ETA_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneOutcome {
    pub eta_fric: f64,
    pub target_cycles: f64,
    pub report: ProfitabilityReport,
    pub untuned: ProfitabilityReport,
    pub dispatch: DispatchSolution,
    /// False when the battery was already within budget and η stayed at 1.
    pub tuned: bool,
    /// Weight on the higher-cycling dispatch when the result blends the two
    /// optimal dispatches on either side of a break-even η.
    pub blend: Option<f64>,
    pub evaluations: usize,
    pub warning: Option<String>,
}

#[derive(Clone)]
struct Probe {
    eta: f64,
    report: ProfitabilityReport,
    dispatch: DispatchSolution,
}

impl Probe {
    fn cycles(&self) -> f64 {
        self.report.n_cyc_100
    }
}

/// Lowers η_fric until the cycle count meets `target_cycles`.
///
/// Bisection assumes cycles are non-decreasing in η. If a probe contradicts
/// that, the search switches to golden-section minimization of
/// `|cycles − target|` on the widest bracketing interval seen so far.
///
/// Under a tariff whose price spreads repeat every day, every arbitrage cycle
/// has the same break-even η, so cycles jump across the target instead of
/// passing through it. Near that η both bracketing dispatches are optimal and
/// so is any convex combination; the tuner then picks the combination that
/// meets the target.
pub fn tune_friction(
    scenario: &ScenarioSeries,
    battery: &BatterySpec,
    ppc: &PpcSchedule,
    target_cycles: f64,
    opts: &EvalOptions,
) -> Result<TuneOutcome> {
    if !(target_cycles > 0.0) {
        return Err(Error::InvalidScenario(format!("cycle target {target_cycles} must be positive")));
    }
    let (untuned, selection) = assess(scenario, battery, ppc, opts)?;
    if untuned.n_cyc_100 <= target_cycles {
        return Ok(TuneOutcome {
            eta_fric: 1.0,
            target_cycles,
            report: untuned.clone(),
            untuned,
            dispatch: selection.dispatch,
            tuned: false,
            blend: None,
            evaluations: 0,
            warning: None,
        });
    }

    let base = DispatchProblem::new(scenario, battery, &opts.dispatch).with_peak_cap(selection.dispatch.p_max_set);
    let mut evaluations = 0usize;
    let mut probe = |eta: f64| -> Result<Probe> {
        evaluations += 1;
        let dispatch = solve_dispatch(&base.with_friction(eta), &opts.dispatch)?;
        let report = evaluate(scenario, battery, &selection, &dispatch, opts)?;
        Ok(Probe { eta, report, dispatch })
    };
    let within = |c: f64| (c - target_cycles).abs() <= CYCLE_TOLERANCE;
    let miss = |p: &Probe| (p.cycles() - target_cycles).abs();

    let top = Probe { eta: 1.0, report: untuned.clone(), dispatch: selection.dispatch.clone() };
    let floor = probe(ETA_FLOOR)?;
    let mut warning = None;
    let mut probes = vec![top, floor];
    let mut found = None;

    if probes[1].cycles() > target_cycles + CYCLE_TOLERANCE {
        warning = Some(format!(
            "{:.2} cycles remain at eta_fric = {ETA_FLOOR}; target {target_cycles:.2} unreachable",
            probes[1].cycles()
        ));
        found = Some(probes[1].clone());
    } else if within(probes[1].cycles()) {
        found = Some(probes[1].clone());
    }

    if found.is_none() {
        let (mut lo, mut hi) = (ETA_FLOOR, 1.0);
        let (mut c_lo, mut c_hi) = (probes[1].cycles(), probes[0].cycles());
        let mut monotone = true;
        while hi - lo > ETA_INTERVAL_TOL {
            let mid = 0.5 * (lo + hi);
            let p = probe(mid)?;
            let c = p.cycles();
            if within(c) {
                found = Some(p);
                break;
            }
            let contradicts = c > c_hi + 1e-9 || c < c_lo - 1e-9;
            probes.push(p);
            if contradicts {
                monotone = false;
                break;
            }
            if c > target_cycles {
                hi = mid;
                c_hi = c;
            } else {
                lo = mid;
                c_lo = c;
            }
        }

        if found.is_none() && !monotone {
            log::warn!("{}: cycles not monotone in eta_fric, switching to golden-section search", battery.name);
            if let Some((mut a, mut b)) = widest_bracket(&probes, target_cycles) {
                let phi = 0.5 * (5f64.sqrt() - 1.0);
                let mut p1 = probe(b - phi * (b - a))?;
                let mut p2 = probe(a + phi * (b - a))?;
                while b - a > ETA_INTERVAL_TOL && !within(p1.cycles()) && !within(p2.cycles()) {
                    if miss(&p1) <= miss(&p2) {
                        b = p2.eta;
                        let np = probe(b - phi * (b - a))?;
                        probes.push(std::mem::replace(&mut p2, std::mem::replace(&mut p1, np)));
                    } else {
                        a = p1.eta;
                        let np = probe(a + phi * (b - a))?;
                        probes.push(std::mem::replace(&mut p1, std::mem::replace(&mut p2, np)));
                    }
                }
                probes.push(p1);
                probes.push(p2);
            }
            found = probes.iter().filter(|p| within(p.cycles())).min_by(|a, b| miss(a).total_cmp(&miss(b))).cloned();
        }
    }

    let mut blend = None;
    let result = match found {
        Some(p) => p,
        None => {
            let (lo, hi) = narrowest_bracket(&probes, target_cycles).expect("floor and top bracket the target");
            let (lo, hi) = (&probes[lo], &probes[hi]);
            let eta = 0.5 * (lo.eta + hi.eta);
            let prob = base.with_friction(eta);
            let mix = |lambda: f64| -> Result<Probe> {
                let dispatch = DispatchSolution::blend(&prob, &hi.dispatch, &lo.dispatch, lambda);
                let report = evaluate(scenario, battery, &selection, &dispatch, opts)?;
                Ok(Probe { eta, report, dispatch })
            };
            let (mut a, mut b) = (0.0, 1.0);
            let mut best = mix(0.0)?;
            for _ in 0..60 {
                let lambda = 0.5 * (a + b);
                let p = mix(lambda)?;
                let c = p.cycles();
                if c > target_cycles {
                    b = lambda;
                } else {
                    a = lambda;
                }
                let done = within(c);
                if done || miss(&p) < miss(&best) {
                    best = p;
                    blend = Some(lambda);
                }
                if done {
                    break;
                }
            }
            log::info!(
                "{}: cycles jump between eta_fric {:.5} and {:.5}; blended dispatch gives {:.2}",
                battery.name,
                lo.eta,
                hi.eta,
                best.cycles()
            );
            if !within(best.cycles()) {
                warning = Some(format!("closest blend gives {:.2} cycles", best.cycles()));
            }
            best
        }
    };
    if let Some(w) = &warning {
        log::warn!("{}: {w}", battery.name);
    }
    Ok(TuneOutcome {
        eta_fric: result.eta,
        target_cycles,
        report: result.report,
        untuned,
        dispatch: result.dispatch,
        tuned: true,
        blend,
        evaluations,
        warning,
    })
}

fn sorted_brackets(probes: &[Probe], target: f64) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..probes.len()).collect();
    order.sort_by(|&a, &b| probes[a].eta.total_cmp(&probes[b].eta));
    order
        .windows(2)
        .filter(|w| {
            let (a, b) = (probes[w[0]].cycles() - target, probes[w[1]].cycles() - target);
            (a <= 0.0 && b > 0.0) || (a > 0.0 && b <= 0.0)
        })
        .map(|w| if probes[w[0]].cycles() <= target { (w[0], w[1]) } else { (w[1], w[0]) })
        .collect()
}

fn widest_bracket(probes: &[Probe], target: f64) -> Option<(f64, f64)> {
    sorted_brackets(probes, target)
        .into_iter()
        .map(|(a, b)| (probes[a].eta.min(probes[b].eta), probes[a].eta.max(probes[b].eta)))
        .max_by(|a, b| (a.1 - a.0).total_cmp(&(b.1 - b.0)))
}

/// `(below, above)` indices of the tightest η interval across the target.
fn narrowest_bracket(probes: &[Probe], target: f64) -> Option<(usize, usize)> {
    sorted_brackets(probes, target).into_iter().min_by(|a, b| {
        let w = |(x, y): (usize, usize)| (probes[x].eta - probes[y].eta).abs();
        w(*a).total_cmp(&w(*b))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Priority {
    /// Shortest expected payback first.
    Payback,
    /// Highest profit per cycle per kWh first.
    PerCycle,
}

/// Profitable candidates first, then by `priority`; ties go to the smaller
/// capacity and then to the slower ramp.
pub fn rank_candidates(reports: &[ProfitabilityReport], priority: Priority) -> Vec<&ProfitabilityReport> {
    let mut out: Vec<&ProfitabilityReport> = reports.iter().collect();
    out.sort_by(|a, b| {
        let primary = match priority {
            Priority::Payback => a.expb_years.total_cmp(&b.expb_years),
            Priority::PerCycle => b.p_cyc.total_cmp(&a.p_cyc),
        };
        b.profitable
            .cmp(&a.profitable)
            .then(primary)
            .then(a.b_rated.total_cmp(&b.b_rated))
            .then(a.ramp_c.total_cmp(&b.ramp_c))
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quarter_c_cost() -> BatteryCost {
        BatterySpec::standard(1.0, 0.25).unwrap().cost()
    }

    #[test]
    fn closure_on_reported_scalars() {
        let cost = quarter_c_cost();
        let c1 = cycle_economics(10.13, 37.01, 1.0, &cost, 7.0, 720.0, PaybackConvention::TwelveMonths);
        assert!((c1.p_cyc - 0.1675).abs() < 5e-4);
        assert!((c1.expb_years - 3.50).abs() < 0.01);
        assert!(c1.profitable);
        let c3 = cycle_economics(35.62, 36.91, 1.0, &cost, 7.0, 720.0, PaybackConvention::TwelveMonths);
        assert!((c3.p_cyc - 0.859).abs() < 1e-3);
        assert!((c3.expb_years - 0.99).abs() < 0.01);
    }

    #[test]
    fn payback_times_annual_gain_is_cost() {
        let cost = quarter_c_cost();
        let hours = 30.0 * 24.0;
        let e = cycle_economics(12.0, 40.0, 1.0, &cost, 7.0, hours, PaybackConvention::CalendarExact);
        let annual = 12.0 * HOURS_PER_YEAR / hours;
        assert!((e.expb_years * annual - cost.b_cost).abs() < 1e-9);
    }

    #[test]
    fn no_gain_means_never_pays_back() {
        let e = cycle_economics(0.0, 0.0, 1.0, &quarter_c_cost(), 7.0, 720.0, PaybackConvention::CalendarExact);
        assert_eq!(e.expb_years, f64::INFINITY);
        assert!(!e.profitable);
        assert_eq!(e.g_cyc, 0.0);
    }

    #[test]
    fn p_cyc_falls_with_cycle_cost() {
        let mut cost = quarter_c_cost();
        let a = cycle_economics(10.0, 30.0, 1.0, &cost, 7.0, 720.0, PaybackConvention::CalendarExact);
        cost.c_cyc += 0.05;
        let b = cycle_economics(10.0, 30.0, 1.0, &cost, 7.0, 720.0, PaybackConvention::CalendarExact);
        assert!(b.p_cyc <= a.p_cyc);
    }

    fn report(name: &str, b: f64, c: f64, expb: f64, p_cyc: f64, profitable: bool) -> ProfitabilityReport {
        ProfitabilityReport {
            battery: name.into(),
            b_rated: b,
            ramp_c: c,
            g_arb: 0.0,
            g_pd: 0.0,
            g_t: 1.0,
            n_cyc_100: 1.0,
            g_cyc: 0.0,
            c_cyc: 0.0,
            p_cyc,
            expb_years: expb,
            ss: 0.0,
            waste_kwh: 0.0,
            energy_cost: 0.0,
            baseline_energy_cost: 0.0,
            ppc_kva: 0.0,
            baseline_ppc_kva: 0.0,
            profitable,
            eta_fric_used: 1.0,
        }
    }

    #[test]
    fn ranking_rules() {
        let rs = vec![
            report("2kwh-1c", 2.0, 1.0, 6.06, 0.0355, true),
            report("1kwh-0.25c", 1.0, 0.25, 3.50, 0.1675, true),
            report("5kwh-1c", 5.0, 1.0, 11.82, -0.0295, false),
            report("1kwh-1c", 1.0, 1.0, 4.23, 0.0867, true),
        ];
        let by_pb = rank_candidates(&rs, Priority::Payback);
        assert_eq!(by_pb[0].battery, "1kwh-0.25c");
        assert_eq!(by_pb.last().unwrap().battery, "5kwh-1c");
        let by_cyc = rank_candidates(&rs, Priority::PerCycle);
        assert_eq!(by_cyc[0].battery, "1kwh-0.25c");

        let tie = vec![report("b", 2.0, 1.0, 5.0, 0.1, true), report("a", 1.0, 1.0, 5.0, 0.1, true)];
        assert_eq!(rank_candidates(&tie, Priority::Payback)[0].battery, "a");

        let none = vec![report("x", 1.0, 1.0, 9.0, -0.1, false), report("y", 1.0, 2.0, 8.0, -0.2, false)];
        let r = rank_candidates(&none, Priority::Payback);
        assert!(r.iter().all(|r| !r.profitable));
        assert_eq!(r[0].battery, "y");
    }
}
