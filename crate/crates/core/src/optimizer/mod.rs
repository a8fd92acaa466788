//! Co-optimization of arbitrage, self-consumption and peak shaving.
//!
//! Per step `i` the LP has variables `x⁺_i, x⁻_i` (stored energy in/out, kWh)
//! and `θ_i` (billed energy, kWh), and reads
//!
//! ```text
//! min  Σ p_i θ_i + ε Σ (x⁺_i + x⁻_i)
//! s.t. 0 ≤ x⁺_i ≤ δ_max h,  0 ≤ x⁻_i ≤ −δ_min h             ramp
//!      b_min ≤ b_0 + Σ_{k≤i} (x⁺_k − x⁻_k) ≤ b_max           capacity
//!      θ_i ≥ 0                                                 self-sufficiency
//!      θ_i ≥ z_i + x⁺_i/(η_ch η_f) − η_dis η_f x⁻_i           arbitrage (friction η_f)
//!      z_i + x⁺_i/η_ch − η_dis x⁻_i ≤ P_set h                 peak shaving
//! ```
//!
//! Zero feed-in is implicit: negative net energy is never credited.

mod oracle;
mod pwl;
mod stagewise;
mod validate;

pub use oracle::{dp_oracle, OracleResult};
pub use validate::{validate_dispatch, ConstraintKind, DispatchViolation};

use serde::Serialize;

use crate::battery::BatterySpec;
use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, LpStatus, SolveOptions};
use crate::timeseries::{PpcSchedule, ScenarioSeries};

/// Horizons up to this many steps go to the dense simplex under [`Backend::Auto`].
pub const DENSE_AUTO_MAX_STEPS: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Backend {
    /// Dense simplex for short horizons, stagewise otherwise.
    Auto,
    DenseSimplex,
    Stagewise,
}

#[derive(Debug, Clone, Copy)]
pub struct DispatchOptions {
    /// Throughput penalty, €/kWh moved in or out of the battery.
    pub epsilon: f64,
    /// Require `b_N ≥ b_0`.
    pub terminal_soc_floor: bool,
    pub backend: Backend,
    pub lp: SolveOptions,
}

impl Default for DispatchOptions {
    fn default() -> Self {
        Self { epsilon: 1e-6, terminal_soc_floor: false, backend: Backend::Auto, lp: SolveOptions::default() }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DispatchProblem<'a> {
    pub scenario: &'a ScenarioSeries,
    pub battery: &'a BatterySpec,
    /// Peak power threshold, kW; `f64::INFINITY` leaves the peak uncapped.
    pub p_max_set: f64,
    /// Friction coefficient in `(0, 1]`; 1 is the unmodified problem.
    pub eta_fric: f64,
    pub epsilon: f64,
    pub terminal_soc_floor: bool,
}

impl<'a> DispatchProblem<'a> {
    pub fn new(scenario: &'a ScenarioSeries, battery: &'a BatterySpec, opts: &DispatchOptions) -> Self {
        Self {
            scenario,
            battery,
            p_max_set: f64::INFINITY,
            eta_fric: 1.0,
            epsilon: opts.epsilon,
            terminal_soc_floor: opts.terminal_soc_floor,
        }
    }

    pub fn with_peak_cap(mut self, p_max_set: f64) -> Self {
        self.p_max_set = p_max_set;
        self
    }

    pub fn with_friction(mut self, eta_fric: f64) -> Self {
        self.eta_fric = eta_fric;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.battery.validate()?;
        if !(self.p_max_set >= 0.0) {
            return Err(Error::InvalidScenario(format!("peak threshold {} kW must be >= 0", self.p_max_set)));
        }
        if !(self.eta_fric > 0.0 && self.eta_fric <= 1.0) {
            return Err(Error::InvalidScenario(format!("friction coefficient {} outside (0, 1]", self.eta_fric)));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::InvalidScenario(format!("tie-break epsilon {} must be >= 0", self.epsilon)));
        }
        Ok(())
    }

    /// Meter-side energy of a split dispatch at true efficiencies.
    pub fn storage_output(&self, x_plus: f64, x_minus: f64) -> f64 {
        x_plus / self.battery.eta_ch - self.battery.eta_dis * x_minus
    }

    /// Storage output as seen by the friction-modified billing constraint.
    pub fn friction_output(&self, x_plus: f64, x_minus: f64) -> f64 {
        x_plus / (self.battery.eta_ch * self.eta_fric) - self.battery.eta_dis * self.eta_fric * x_minus
    }
}

/// Per-step interval of the stored-energy change after ramp and peak limits.
pub(crate) struct StepLimits {
    pub z: Vec<f64>,
    pub x_lo: Vec<f64>,
    pub x_hi: Vec<f64>,
}

impl StepLimits {
    fn new(prob: &DispatchProblem<'_>) -> Result<Self> {
        let bat = prob.battery;
        let h = prob.scenario.step_hours();
        let z = prob.scenario.net_load().0;
        let (lo, hi) = bat.x_bounds(h);
        let mut x_hi = Vec::with_capacity(z.len());
        for (i, &zi) in z.iter().enumerate() {
            let room = prob.p_max_set * h - zi;
            // Largest x with z + s(x) ≤ P h; s is increasing in x.
            let cap = if room.is_infinite() {
                hi
            } else if room >= 0.0 {
                hi.min(room * bat.eta_ch)
            } else {
                hi.min(room / bat.eta_dis)
            };
            if cap < lo - 1e-12 {
                return Err(Error::Infeasible {
                    step: i,
                    reason: format!(
                        "net load {:.4} kW exceeds the peak threshold {:.4} kW by more than the discharge limit",
                        zi / h,
                        prob.p_max_set
                    ),
                });
            }
            x_hi.push(cap.max(lo));
        }
        Ok(Self { x_lo: vec![lo; z.len()], x_hi, z })
    }
}

/// Optimal dispatch. `theta` is the billed energy of the (possibly
/// friction-modified) problem; `energy_cost` is always the true meter bill.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispatchSolution {
    pub x_plus: Vec<f64>,
    pub x_minus: Vec<f64>,
    /// Meter-side storage energy, kWh.
    pub s: Vec<f64>,
    /// SoC after each step, kWh.
    pub b: Vec<f64>,
    pub theta: Vec<f64>,
    /// Σ p_i max(0, z_i + s_i), €.
    pub energy_cost: f64,
    /// Optimal value of the solved objective (tie-break and friction included).
    pub objective: f64,
    pub p_max_set: f64,
    pub eta_fric: f64,
    pub backend: Backend,
}

impl DispatchSolution {
    pub fn x(&self) -> Vec<f64> {
        self.x_plus.iter().zip(&self.x_minus).map(|(p, m)| p - m).collect()
    }

    /// Load seen by the grid, `L_i = z_i + s_i`.
    pub fn grid_load(&self, scenario: &ScenarioSeries) -> Vec<f64> {
        scenario.net_load().0.iter().zip(&self.s).map(|(z, s)| z + s).collect()
    }

    /// SoC trajectory including the initial value.
    pub fn soc_with_initial(&self, b_0: f64) -> Vec<f64> {
        std::iter::once(b_0).chain(self.b.iter().copied()).collect()
    }

    /// `λ·a + (1 − λ)·b` on the split variables, billed under `prob`.
    ///
    /// Feasible whenever `a` and `b` are, the feasible set being convex.
    pub fn blend(prob: &DispatchProblem<'_>, a: &Self, b: &Self, lambda: f64) -> Self {
        let mix = |u: &[f64], v: &[f64]| -> Vec<f64> {
            u.iter().zip(v).map(|(p, q)| lambda * p + (1.0 - lambda) * q).collect()
        };
        let x_plus = mix(&a.x_plus, &b.x_plus);
        let x_minus = mix(&a.x_minus, &b.x_minus);
        let soc = mix(&a.b, &b.b);
        let mut out = Self::from_split(prob, x_plus, x_minus, Some(soc), None, 0.0, a.backend);
        let price = prob.scenario.price();
        out.objective = (0..out.theta.len())
            .map(|i| price[i] * out.theta[i] + prob.epsilon * (out.x_plus[i] + out.x_minus[i]))
            .sum();
        out
    }

    /// `theta` defaults to `max(0, z + s_fric)`; a solver-provided θ is kept
    /// wherever the price is positive (elsewhere it is not determined).
    fn from_split(
        prob: &DispatchProblem<'_>,
        x_plus: Vec<f64>,
        x_minus: Vec<f64>,
        b: Option<Vec<f64>>,
        theta: Option<Vec<f64>>,
        objective: f64,
        backend: Backend,
    ) -> Self {
        let z = prob.scenario.net_load().0;
        let price = prob.scenario.price();
        let s: Vec<f64> = x_plus.iter().zip(&x_minus).map(|(&p, &m)| prob.storage_output(p, m)).collect();
        let theta = (0..z.len())
            .map(|i| match &theta {
                Some(t) if price[i] > 0.0 => t[i],
                _ => (z[i] + prob.friction_output(x_plus[i], x_minus[i])).max(0.0),
            })
            .collect();
        let energy_cost = z.iter().zip(&s).zip(price).map(|((zi, si), p)| p * (zi + si).max(0.0)).sum();
        let b = b.unwrap_or_else(|| {
            let mut soc = prob.battery.b_0;
            x_plus
                .iter()
                .zip(&x_minus)
                .map(|(p, m)| {
                    soc += p - m;
                    soc
                })
                .collect()
        });
        Self {
            x_plus,
            x_minus,
            s,
            b,
            theta,
            energy_cost,
            objective,
            p_max_set: prob.p_max_set,
            eta_fric: prob.eta_fric,
            backend,
        }
    }
}

/// Dense LP of the dispatch problem. Variable layout: `x⁺` in `0..n`,
/// `x⁻` in `n..2n`, `θ` in `2n..3n`.
pub fn build_lp(prob: &DispatchProblem<'_>) -> Result<LinearProgram> {
    prob.validate()?;
    let bat = prob.battery;
    let n = prob.scenario.len();
    let h = prob.scenario.step_hours();
    let z = prob.scenario.net_load().0;
    let price = prob.scenario.price();
    let (xp, xm, th) = (|i: usize| i, |i: usize| n + i, |i: usize| 2 * n + i);
    let mut lp = LinearProgram::new(3 * n);
    for i in 0..n {
        lp.set_bounds(xp(i), 0.0, bat.delta_max() * h);
        lp.set_bounds(xm(i), 0.0, -bat.delta_min() * h);
        lp.set_cost(xp(i), prob.epsilon);
        lp.set_cost(xm(i), prob.epsilon);
        lp.set_cost(th(i), price[i]);
    }
    let ch_fric = 1.0 / (bat.eta_ch * prob.eta_fric);
    let dis_fric = bat.eta_dis * prob.eta_fric;
    for i in 0..n {
        lp.add_row([(xp(i), ch_fric), (xm(i), -dis_fric), (th(i), -1.0)], -z[i]);
    }
    if prob.p_max_set.is_finite() {
        for i in 0..n {
            lp.add_row([(xp(i), 1.0 / bat.eta_ch), (xm(i), -bat.eta_dis)], prob.p_max_set * h - z[i]);
        }
    }
    for i in 0..n {
        let up = (0..=i).flat_map(|k| [(xp(k), 1.0), (xm(k), -1.0)]);
        lp.add_row(up, bat.b_max - bat.b_0);
        let down = (0..=i).flat_map(|k| [(xp(k), -1.0), (xm(k), 1.0)]);
        lp.add_row(down, bat.b_0 - bat.b_min);
    }
    if prob.terminal_soc_floor {
        lp.add_row((0..n).flat_map(|k| [(xp(k), -1.0), (xm(k), 1.0)]), 0.0);
    }
    Ok(lp)
}

pub fn solve_dispatch(prob: &DispatchProblem<'_>, opts: &DispatchOptions) -> Result<DispatchSolution> {
    prob.validate()?;
    let limits = StepLimits::new(prob)?;
    let n = prob.scenario.len();
    let backend = match opts.backend {
        Backend::Auto if n <= DENSE_AUTO_MAX_STEPS => Backend::DenseSimplex,
        Backend::Auto => Backend::Stagewise,
        b => b,
    };
    match backend {
        Backend::DenseSimplex => {
            let lp = build_lp(prob)?;
            let sol = lp::solve(&lp, &opts.lp)?;
            match sol.status {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => {
                    // The peak rows passed StepLimits, so the SoC window is what binds.
                    let step = stagewise::solve(prob, &limits).err().and_then(|e| match e {
                        Error::Infeasible { step, .. } => Some(step),
                        _ => None,
                    });
                    return Err(Error::Infeasible {
                        step: step.unwrap_or(0),
                        reason: "dispatch LP is infeasible".into(),
                    });
                }
                other => return Err(Error::Solver(format!("dense simplex ended with {other:?}"))),
            }
            let x_plus = sol.values[..n].to_vec();
            let x_minus = sol.values[n..2 * n].to_vec();
            let theta = sol.values[2 * n..].to_vec();
            Ok(DispatchSolution::from_split(prob, x_plus, x_minus, None, Some(theta), sol.objective, backend))
        }
        Backend::Stagewise | Backend::Auto => {
            let sw = stagewise::solve(prob, &limits)?;
            let x_plus = sw.x.iter().map(|x| x.max(0.0)).collect();
            let x_minus = sw.x.iter().map(|x| (-x).max(0.0)).collect();
            Ok(DispatchSolution::from_split(prob, x_plus, x_minus, Some(sw.b), None, sw.objective, Backend::Stagewise))
        }
    }
}

/// Outcome of choosing a peak power contract for a battery.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PpcSelection {
    pub baseline_level: usize,
    pub level: usize,
    pub baseline_limit_kva: f64,
    pub limit_kva: f64,
    /// Candidate threshold `max_i z_i/h + δ_min`, kW.
    pub threshold_kw: f64,
    /// Peak-shaving gain over the window, €.
    pub g_pd: f64,
    pub days: f64,
    /// Dispatch under the chosen level.
    pub dispatch: DispatchSolution,
}

/// Picks the smallest PPC level at or above `max z/h + δ_min` for which the
/// dispatch stays feasible and solves the dispatch under it.
///
/// When `baseline_level` is `None` the prosumer is assumed to hold the smallest
/// level covering the baseline peak.
pub fn select_ppc(
    scenario: &ScenarioSeries,
    battery: &BatterySpec,
    ppc: &PpcSchedule,
    baseline_level: Option<usize>,
    eta_fric: f64,
    opts: &DispatchOptions,
) -> Result<PpcSelection> {
    ppc.validate()?;
    let h = scenario.step_hours();
    let peak = scenario.net_load().peak_kw(h);
    let old = match baseline_level {
        Some(l) if l < ppc.levels.len() => l,
        Some(l) => return Err(Error::InvalidPpc(format!("baseline level index {l} out of range"))),
        None => ppc.smallest_covering(peak).ok_or(Error::PeakAboveContracts { peak_kw: peak })?,
    };
    let threshold = peak + battery.delta_min();
    let first = ppc.smallest_covering(threshold).unwrap_or(ppc.levels.len());
    let days = scenario.days();
    let base = DispatchProblem::new(scenario, battery, opts).with_friction(eta_fric);

    for level in first..=old {
        let limit = ppc.levels[level].limit_kva;
        match solve_dispatch(&base.with_peak_cap(limit), opts) {
            Ok(dispatch) => {
                let g_pd = ((ppc.levels[old].cost_per_day - ppc.levels[level].cost_per_day) * days).max(0.0);
                return Ok(PpcSelection {
                    baseline_level: old,
                    level,
                    baseline_limit_kva: ppc.levels[old].limit_kva,
                    limit_kva: limit,
                    threshold_kw: threshold,
                    g_pd,
                    days,
                    dispatch,
                });
            }
            Err(Error::Infeasible { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    log::warn!(
        "no feasible PPC level up to {} kVA; keeping it and leaving the peak uncapped",
        ppc.levels[old].limit_kva
    );
    let dispatch = solve_dispatch(&base, opts)?;
    Ok(PpcSelection {
        baseline_level: old,
        level: old,
        baseline_limit_kva: ppc.levels[old].limit_kva,
        limit_kva: ppc.levels[old].limit_kva,
        threshold_kw: threshold,
        g_pd: 0.0,
        days,
        dispatch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDateTime;

    fn t0() -> NaiveDateTime {
        NaiveDateTime::parse_from_str("2019-06-01T00:00:00", "%Y-%m-%dT%H:%M:%S").unwrap()
    }

    fn series(load: &[f64], pv: &[f64], price: &[f64], h: f64) -> ScenarioSeries {
        ScenarioSeries::new(t0(), h, load.to_vec(), pv.to_vec(), price.to_vec()).unwrap()
    }

    fn both_backends(prob: &DispatchProblem<'_>) -> (DispatchSolution, DispatchSolution) {
        let dense = DispatchOptions { backend: Backend::DenseSimplex, ..Default::default() };
        let stage = DispatchOptions { backend: Backend::Stagewise, ..Default::default() };
        (solve_dispatch(prob, &dense).unwrap(), solve_dispatch(prob, &stage).unwrap())
    }

    #[test]
    fn idle_when_price_flat_single_step() {
        let s = series(&[0.5], &[0.0], &[0.2], 1.0);
        let bat = BatterySpec::standard(1.0, 1.0).unwrap();
        let opts = DispatchOptions { terminal_soc_floor: true, ..Default::default() };
        let prob = DispatchProblem::new(&s, &bat, &opts);
        let (d, w) = both_backends(&prob);
        for sol in [&d, &w] {
            assert!((sol.theta[0] - 0.5).abs() < 1e-12);
            assert!(sol.x()[0].abs() < 1e-12);
        }
        // Without the terminal floor the stored energy is worth spending.
        let free = DispatchProblem::new(&s, &bat, &DispatchOptions::default());
        let (d, w) = both_backends(&free);
        assert!((d.objective - w.objective).abs() < 1e-9);
        assert!(d.energy_cost < 0.1 - 1e-6);
        assert!(validate_dispatch(&free, &d, 1e-9).is_empty());
    }

    #[test]
    fn flat_price_no_soc_headroom_stays_idle() {
        // Battery at b_min cannot discharge; flat price gives no reason to charge.
        let s = series(&[0.5, 0.5, 0.5], &[0.0; 3], &[0.2; 3], 1.0);
        let mut bat = BatterySpec::standard(1.0, 1.0).unwrap();
        bat.b_0 = bat.b_min;
        let prob = DispatchProblem::new(&s, &bat, &DispatchOptions::default());
        let (d, w) = both_backends(&prob);
        for sol in [&d, &w] {
            assert!(sol.x().iter().all(|x| x.abs() < 1e-12), "{:?}", sol.x());
            assert!((sol.theta[0] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_capacity_battery_is_baseline() {
        let s = series(&[0.5, 0.1, 0.9], &[0.2, 0.6, 0.0], &[0.1, 0.1, 0.3], 1.0);
        let mut bat = BatterySpec::standard(1.0, 1.0).unwrap();
        bat.b_min = 0.5;
        bat.b_max = 0.5;
        let prob = DispatchProblem::new(&s, &bat, &DispatchOptions::default());
        let (d, w) = both_backends(&prob);
        let base = s.baseline_metrics().unwrap().energy_cost;
        for sol in [&d, &w] {
            assert!(sol.s.iter().all(|x| x.abs() < 1e-12));
            assert!((sol.energy_cost - base).abs() < 1e-12);
        }
    }

    #[test]
    fn friction_one_gives_true_coefficients() {
        let s = series(&[0.5, 0.2], &[0.0, 0.3], &[0.1, 0.2], 1.0);
        let bat = BatterySpec::standard(1.0, 1.0).unwrap();
        let prob = DispatchProblem::new(&s, &bat, &DispatchOptions::default());
        let lp = build_lp(&prob).unwrap();
        let row = &lp.rows()[0];
        assert_eq!(row.coeffs, vec![(0, 1.0 / bat.eta_ch), (2, -bat.eta_dis), (4, -1.0)]);
    }

    #[test]
    fn backends_agree_on_three_step_arbitrage() {
        let s = series(&[0.3, 0.2, 0.8], &[0.0, 0.7, 0.0], &[0.1, 0.1, 0.3], 1.0);
        let bat = BatterySpec::standard(1.0, 1.0).unwrap();
        for eta in [1.0, 0.8] {
            let prob = DispatchProblem::new(&s, &bat, &DispatchOptions::default()).with_friction(eta);
            let (d, w) = both_backends(&prob);
            assert!((d.objective - w.objective).abs() < 1e-9, "eta {eta}: {} vs {}", d.objective, w.objective);
            assert!(validate_dispatch(&prob, &w, 1e-9).is_empty());
        }
    }

    #[test]
    fn unreachable_peak_cap_reports_step() {
        let s = series(&[0.2, 3.0, 0.2], &[0.0; 3], &[0.1; 3], 1.0);
        let bat = BatterySpec::standard(1.0, 1.0).unwrap();
        let prob = DispatchProblem::new(&s, &bat, &DispatchOptions::default()).with_peak_cap(1.0);
        let err = solve_dispatch(&prob, &DispatchOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Infeasible { step: 1, .. }), "{err}");
    }

    #[test]
    fn no_discharge_keeps_ppc_level() {
        let load: Vec<f64> = (0..24).map(|i| if i == 18 { 6.5 } else { 0.5 }).collect();
        let s = series(&load, &[0.0; 24], &[0.2; 24], 1.0);
        let mut bat = BatterySpec::standard(1.0, 1.0).unwrap();
        bat.discharge_rate_c = 0.0;
        let sel = select_ppc(&s, &bat, &PpcSchedule::default(), None, 1.0, &DispatchOptions::default()).unwrap();
        assert_eq!(sel.level, sel.baseline_level);
        assert_eq!(sel.g_pd, 0.0);
    }
}
