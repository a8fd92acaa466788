//! Constraint checks on a dispatch, computed from the problem data only.

use serde::Serialize;

use super::{DispatchProblem, DispatchSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConstraintKind {
    /// Split variables negative or above the ramp limit.
    Ramp,
    /// SoC outside `[b_min, b_max]` or inconsistent with `b_0 + Σ x`.
    Capacity,
    /// `θ < 0`.
    BilledNonNegative,
    /// `θ < z + s_fric`.
    BilledCoversNet,
    /// `(z + s)/h > P_set`.
    Peak,
    /// `θ ≠ max(0, z + s_fric)` at a step with positive price.
    BilledIdentity,
    /// Terminal SoC below `b_0` with the floor enabled.
    Terminal,
    /// Reported energy cost differs from the recomputed meter bill.
    EnergyCost,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispatchViolation {
    pub step: usize,
    pub kind: ConstraintKind,
    pub excess: f64,
}

/// Every constraint of the dispatch problem violated by more than `tol` (kWh;
/// kW for the peak row, € for the bill).
pub fn validate_dispatch(prob: &DispatchProblem<'_>, sol: &DispatchSolution, tol: f64) -> Vec<DispatchViolation> {
    let bat = prob.battery;
    let h = prob.scenario.step_hours();
    let n = prob.scenario.len();
    let price = prob.scenario.price();
    let z: Vec<f64> = prob.scenario.load().iter().zip(prob.scenario.pv()).map(|(d, r)| d - r).collect();
    let mut out = Vec::new();
    let mut flag = |step, kind, excess: f64| {
        if excess > tol || excess.is_nan() {
            out.push(DispatchViolation { step, kind, excess });
        }
    };
    let lens = [sol.x_plus.len(), sol.x_minus.len(), sol.s.len(), sol.b.len(), sol.theta.len()];
    if lens.iter().any(|&l| l != n) {
        flag(0, ConstraintKind::Capacity, f64::INFINITY);
        return out;
    }

    let ch_max = bat.charge_rate_c * bat.b_rated * h;
    let dis_max = bat.discharge_rate_c * bat.b_rated * h;
    let mut soc = bat.b_0;
    let mut bill = 0.0;
    for i in 0..n {
        let (xp, xm) = (sol.x_plus[i], sol.x_minus[i]);
        flag(i, ConstraintKind::Ramp, (-xp).max(xp - ch_max));
        flag(i, ConstraintKind::Ramp, (-xm).max(xm - dis_max));

        soc += xp - xm;
        flag(i, ConstraintKind::Capacity, (soc - sol.b[i]).abs());
        flag(i, ConstraintKind::Capacity, (bat.b_min - soc).max(soc - bat.b_max));

        let s_true = xp / bat.eta_ch - bat.eta_dis * xm;
        flag(i, ConstraintKind::Capacity, (s_true - sol.s[i]).abs());
        let s_fric = xp / (bat.eta_ch * prob.eta_fric) - bat.eta_dis * prob.eta_fric * xm;
        let theta = sol.theta[i];
        flag(i, ConstraintKind::BilledNonNegative, -theta);
        flag(i, ConstraintKind::BilledCoversNet, z[i] + s_fric - theta);
        if prob.p_max_set.is_finite() {
            flag(i, ConstraintKind::Peak, (z[i] + s_true) / h - prob.p_max_set);
        }
        if price[i] > 0.0 {
            flag(i, ConstraintKind::BilledIdentity, (theta - (z[i] + s_fric).max(0.0)).abs());
        }
        bill += price[i] * (z[i] + s_true).max(0.0);
    }
    if prob.terminal_soc_floor {
        flag(n - 1, ConstraintKind::Terminal, bat.b_0 - soc);
    }
    flag(n - 1, ConstraintKind::EnergyCost, (bill - sol.energy_cost).abs());
    out
}
