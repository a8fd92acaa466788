//! Backward dynamic programming over a uniform SoC grid.
//!
//! Used to cross-check the LP solvers on small instances. The optimum of the
//! discretized problem is exact; restricting SoC to the grid can only raise the
//! cost, by at most `error_bound`.

use super::DispatchProblem;
use crate::error::{Error, Result};

const MAX_STEPS: usize = 200;
const MAX_GRID_POINTS: usize = 2001;
const MAX_WORK: f64 = 2e8;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Objective of the best grid dispatch (same objective as the LP).
    pub cost: f64,
    /// Stored-energy change per step, kWh.
    pub x: Vec<f64>,
    /// `grid_step · Σ_i L_i`, with `L_i` the largest slope of step `i`'s cost in `x`.
    pub error_bound: f64,
}

pub fn dp_oracle(prob: &DispatchProblem<'_>, soc_grid_step: f64) -> Result<OracleResult> {
    prob.validate()?;
    let bat = prob.battery;
    let n = prob.scenario.len();
    let h = prob.scenario.step_hours();
    if !(soc_grid_step > 0.0) {
        return Err(Error::OracleRefused("grid step must be positive".into()));
    }
    if n > MAX_STEPS {
        return Err(Error::OracleRefused(format!("{n} steps exceeds the oracle limit of {MAX_STEPS}")));
    }
    let span = (bat.b_max - bat.b_min) / soc_grid_step;
    if span + 1.0 > MAX_GRID_POINTS as f64 {
        return Err(Error::OracleRefused(format!("{} grid points exceeds {MAX_GRID_POINTS}", span.floor() + 1.0)));
    }
    let k_max = (span + 1e-9).floor() as usize;
    let g = k_max + 1;
    if (n as f64) * (g as f64).powi(2) > MAX_WORK {
        return Err(Error::OracleRefused("grid too fine for this horizon".into()));
    }
    let k0f = (bat.b_0 - bat.b_min) / soc_grid_step;
    if (k0f - k0f.round()).abs() > 1e-7 {
        return Err(Error::OracleRefused("initial SoC is not on the grid".into()));
    }
    let k0 = k0f.round() as usize;

    let z: Vec<f64> = prob.scenario.load().iter().zip(prob.scenario.pv()).map(|(d, r)| d - r).collect();
    let price = prob.scenario.price();
    let x_max = bat.charge_rate_c * bat.b_rated * h;
    let x_min = -bat.discharge_rate_c * bat.b_rated * h;
    let (ech, edis, ef) = (bat.eta_ch, bat.eta_dis, prob.eta_fric);
    let step_cost = |i: usize, x: f64| -> f64 {
        if x > x_max + 1e-12 || x < x_min - 1e-12 {
            return f64::INFINITY;
        }
        let (s_true, s_fric) = if x >= 0.0 { (x / ech, x / (ech * ef)) } else { (edis * x, edis * ef * x) };
        if prob.p_max_set.is_finite() && z[i] + s_true > prob.p_max_set * h + 1e-12 {
            return f64::INFINITY;
        }
        price[i] * (z[i] + s_fric).max(0.0) + prob.epsilon * x.abs()
    };

    let level = |k: usize| bat.b_min + k as f64 * soc_grid_step;
    let mut value: Vec<f64> = (0..g)
        .map(|k| if prob.terminal_soc_floor && level(k) < bat.b_0 - 1e-12 { f64::INFINITY } else { 0.0 })
        .collect();
    let mut choice = vec![vec![0usize; g]; n];
    for i in (0..n).rev() {
        let mut next = vec![f64::INFINITY; g];
        for (k, slot) in next.iter_mut().enumerate() {
            for (k2, v) in value.iter().enumerate() {
                if !v.is_finite() {
                    continue;
                }
                let c = step_cost(i, (k2 as f64 - k as f64) * soc_grid_step) + v;
                if c < *slot {
                    *slot = c;
                    choice[i][k] = k2;
                }
            }
        }
        value = next;
    }
    let cost = value[k0];
    if !cost.is_finite() {
        return Err(Error::Infeasible { step: 0, reason: "no grid dispatch is feasible".into() });
    }
    let mut x = Vec::with_capacity(n);
    let mut k = k0;
    for row in &choice {
        let k2 = row[k];
        x.push((k2 as f64 - k as f64) * soc_grid_step);
        k = k2;
    }
    let error_bound =
        soc_grid_step * (0..n).map(|i| price[i] * (1.0 / (ech * ef)).max(edis * ef) + prob.epsilon).sum::<f64>();
    Ok(OracleResult { cost, x, error_bound })
}
