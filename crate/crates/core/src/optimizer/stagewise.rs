//! Exact solver for the dispatch LP exploiting its stagewise structure.
//!
//! Eliminating θ and splitting `x = x⁺ − x⁻` (never both positive at an optimum
//! once throughput is penalized), step `i` contributes the convex
//! piecewise-linear cost
//!
//! `g_i(x) = p_i·max(0, z_i + s_fric(x)) + ε|x|`
//!
//! on the ramp/peak interval of `x`. The cost-to-go
//! `V_{i−1}(b) = min_x g_i(x) + V_i(b + x)` is then an infimal convolution of convex PWL functions
//! restricted to the SoC window, computed exactly by merging slopes.

use super::pwl::ConvexPwl;
use super::{DispatchProblem, StepLimits};
use crate::error::{Error, Result};

pub(crate) struct StagewiseSolution {
    pub x: Vec<f64>,
    pub b: Vec<f64>,
    pub objective: f64,
}

/// Stage cost of step `i` as a function of the stored-energy change.
pub(crate) fn stage_cost(prob: &DispatchProblem<'_>, limits: &StepLimits, i: usize) -> ConvexPwl {
    let bat = prob.battery;
    let z = limits.z[i];
    let p = prob.scenario.price()[i];
    let eps = prob.epsilon;
    let dis_slope = bat.eta_dis * prob.eta_fric;
    let ch_slope = 1.0 / (bat.eta_ch * prob.eta_fric);
    let (lo, hi) = (limits.x_lo[i], limits.x_hi[i]);

    // Friction-billed net energy is zero here.
    let root = if z > 0.0 { -z / dis_slope } else { -z / ch_slope };
    let billed = |x: f64| z + if x >= 0.0 { ch_slope * x } else { dis_slope * x };
    let cost = |x: f64| p * billed(x).max(0.0) + eps * x.abs();
    let slope_at = |x: f64| {
        let active = billed(x) > 0.0;
        if x >= 0.0 {
            (if active { p * ch_slope } else { 0.0 }) + eps
        } else {
            (if active { p * dis_slope } else { 0.0 }) - eps
        }
    };

    let mut pts = vec![lo, hi];
    for c in [0.0, root] {
        if c > lo && c < hi {
            pts.push(c);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut f = ConvexPwl { start: lo, value: cost(lo), segs: Vec::new() };
    for w in pts.windows(2) {
        f.push(w[1] - w[0], slope_at(0.5 * (w[0] + w[1])));
    }
    f
}

pub(crate) fn solve(prob: &DispatchProblem<'_>, limits: &StepLimits) -> Result<StagewiseSolution> {
    let bat = prob.battery;
    let n = prob.scenario.len();
    let (b_min, b_max) = (bat.b_min, bat.b_max);
    let terminal_lo = if prob.terminal_soc_floor { bat.b_0 } else { b_min };

    let stages: Vec<ConvexPwl> = (0..n).map(|i| stage_cost(prob, limits, i)).collect();

    // values[i] is the cost-to-go as a function of the SoC after i steps.
    let mut values = Vec::with_capacity(n + 1);
    values.push(ConvexPwl::constant(terminal_lo, b_max, 0.0));
    for i in (0..n).rev() {
        let next = values.last().expect("non-empty");
        let v = next.inf_convolve(&stages[i].mirrored()).restrict(b_min, b_max).ok_or_else(|| Error::Infeasible {
            step: i,
            reason: "no SoC at this step admits a feasible continuation".into(),
        })?;
        values.push(v);
    }
    values.reverse();

    let objective = values[0].eval(bat.b_0).ok_or_else(|| Error::Infeasible {
        step: 0,
        reason: format!(
            "initial SoC {} kWh outside the feasible window [{}, {}]",
            bat.b_0,
            values[0].start,
            values[0].end()
        ),
    })?;

    let mut x = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut soc = bat.b_0;
    for i in 0..n {
        let v = &values[i + 1];
        let g = &stages[i];
        let lo = (soc + g.start).max(v.start);
        let hi = (soc + g.end()).min(v.end());
        let hi = hi.max(lo);
        let total = |y: f64| -> f64 {
            let y = y.clamp(lo, hi);
            v.eval(y).unwrap_or(f64::INFINITY) + g.eval(y - soc).unwrap_or(f64::INFINITY)
        };
        let mut best_y = soc.clamp(lo, hi);
        let mut best = total(best_y);
        let candidates = [lo, hi]
            .into_iter()
            .chain(v.breakpoints())
            .chain(g.breakpoints().map(|u| soc + u))
            .filter(|y| *y >= lo && *y <= hi);
        for y in candidates {
            let c = total(y);
            let tie = 1e-12 * (1.0 + best.abs());
            if c < best - tie || (c <= best + tie && (y - soc).abs() < (best_y - soc).abs()) {
                best = c;
                best_y = y;
            }
        }
        if !best.is_finite() {
            return Err(Error::Infeasible { step: i, reason: "forward pass left the feasible region".into() });
        }
        let y = best_y.clamp(b_min, b_max);
        x.push(y - soc);
        b.push(y);
        soc = y;
    }
    Ok(StagewiseSolution { x, b, objective })
}
