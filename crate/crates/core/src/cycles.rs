//! Equivalent 100%-DoD cycles from an SoC trajectory.
//!
//! Ranges are extracted with four-point rainflow counting on the SoC
//! normalized by rated capacity. Closed cycles weigh 1, the unclosed residue
//! is counted as half cycles of weight 0.5, and each contributes
//! `weight · damage(DoD)` with `damage(d) = d^kp`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DamageModel {
    /// `kp ≥ 1`; 1 makes the count a pure throughput measure.
    pub exponent: f64,
}

impl DamageModel {
    pub fn linear() -> Self {
        Self { exponent: 1.0 }
    }

    pub fn damage(&self, depth: f64) -> f64 {
        depth.powf(self.exponent)
    }
}

impl Default for DamageModel {
    fn default() -> Self {
        Self::linear()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HalfCycle {
    /// Depth of discharge as a fraction of rated capacity.
    pub depth: f64,
    /// 1.0 for a closed cycle, 0.5 for a residual half cycle.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleCount {
    pub cycles: Vec<HalfCycle>,
    pub n_cyc_100: f64,
}

/// Interior local extrema plus both end points; plateaus collapse to one point.
fn turning_points(series: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut pts: Vec<f64> = Vec::new();
    for v in series {
        match pts.len() {
            0 => pts.push(v),
            _ if v == *pts.last().expect("non-empty") => {}
            1 => pts.push(v),
            _ => {
                let (a, b) = (pts[pts.len() - 2], pts[pts.len() - 1]);
                if (b - a) * (v - b) > 0.0 {
                    // Still moving the same way: extend the current leg.
                    *pts.last_mut().expect("non-empty") = v;
                } else {
                    pts.push(v);
                }
            }
        }
    }
    pts
}

/// Rainflow cycles of `soc` (kWh) relative to `b_rated`.
///
/// A constant trajectory has no cycles.
pub fn count_cycles(soc: &[f64], b_rated: f64, model: &DamageModel) -> CycleCount {
    if b_rated <= 0.0 {
        return CycleCount { cycles: Vec::new(), n_cyc_100: 0.0 };
    }
    let points = turning_points(soc.iter().map(|b| b / b_rated));
    let mut cycles = Vec::new();
    let mut stack: Vec<f64> = Vec::with_capacity(points.len());
    for p in points {
        stack.push(p);
        while stack.len() >= 4 {
            let k = stack.len();
            let (s1, s2, s3, s4) = (stack[k - 4], stack[k - 3], stack[k - 2], stack[k - 1]);
            let inner = (s3 - s2).abs();
            if inner <= (s2 - s1).abs() && inner <= (s4 - s3).abs() {
                cycles.push(HalfCycle { depth: inner, weight: 1.0 });
                stack.drain(k - 3..k - 1);
            } else {
                break;
            }
        }
    }
    for w in stack.windows(2) {
        cycles.push(HalfCycle { depth: (w[1] - w[0]).abs(), weight: 0.5 });
    }
    cycles.retain(|c| c.depth > 0.0);
    let n_cyc_100 = cycles.iter().map(|c| c.weight * model.damage(c.depth.min(1.0))).sum();
    CycleCount { cycles, n_cyc_100 }
}

/// Horizon over which a cycle budget is spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Horizon {
    /// Calendar days against a 365.25-day year.
    Days(f64),
    /// Months of one twelfth of a year each.
    Months(f64),
}

/// Cycles per horizon that exhaust cycle life exactly at end of calendar life.
pub fn break_even_cycles(cycle_life: f64, calendar_life_years: f64, horizon: Horizon) -> f64 {
    match horizon {
        Horizon::Days(d) => cycle_life * d / (calendar_life_years * 365.25),
        Horizon::Months(m) => cycle_life * m / (12.0 * calendar_life_years),
    }
}

/// Writes `depth,weight,damage` rows for audit.
pub fn write_cycles_csv<W: std::io::Write>(count: &CycleCount, model: &DamageModel, w: W) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["depth", "weight", "damage"])?;
    for c in &count.cycles {
        wtr.write_record([
            format!("{:.9}", c.depth),
            format!("{}", c.weight),
            format!("{:.9}", c.weight * model.damage(c.depth.min(1.0))),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
