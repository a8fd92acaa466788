//! Battery electrical model and capacity + ramping cost.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack when checking a per-step energy against ramp bounds.
const RAMP_TOL: f64 = 1e-12;

/// One storage candidate.
///
/// Ramp limits come from the `xC-yC` rating: `charge_rate_c = x` means a full
/// charge of `b_rated` takes `1/x` hours, so `δ_max = x·b_rated` kW and
/// `δ_min = -y·b_rated` kW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatterySpec {
    pub name: String,
    /// kWh.
    pub b_rated: f64,
    pub b_min: f64,
    pub b_max: f64,
    pub b_0: f64,
    pub eta_ch: f64,
    pub eta_dis: f64,
    pub charge_rate_c: f64,
    pub discharge_rate_c: f64,
    /// Cycles to end of life at 100% DoD.
    pub cycle_life_100dod: f64,
    pub calendar_life_years: f64,
    /// Cell/pack cost, €/kWh of rated capacity.
    pub cost_per_kwh: f64,
    /// Inverter cost, €/kWh of rated capacity.
    pub inverter_cost_per_kwh: f64,
}

/// Table of default per-kWh costs by symmetric C-rate: (C-rate, battery €/kWh, inverter €/kWh).
const RAMP_COSTS: [(f64, f64, f64); 3] = [(0.25, 400.0, 25.0), (1.0, 600.0, 100.0), (2.0, 700.0, 200.0)];

pub const DEFAULT_CYCLE_LIFE: f64 = 4000.0;
pub const DEFAULT_CALENDAR_YEARS: f64 = 7.0;
pub const DEFAULT_EFFICIENCY: f64 = 0.95;

impl BatterySpec {
    /// Default candidate with symmetric rate `c_rate` (0.25, 1 or 2) and the
    /// standard SoC window (10% / 50% / 100% of rated).
    pub fn standard(b_rated: f64, c_rate: f64) -> Result<Self> {
        let &(_, cost, inverter) =
            RAMP_COSTS.iter().find(|(c, _, _)| (c - c_rate).abs() < 1e-12).ok_or_else(|| Error::InvalidBattery {
                name: format!("{b_rated}kwh-{c_rate}c"),
                message: "no default cost for this ramp class; give costs explicitly".into(),
            })?;
        let spec = Self {
            name: standard_name(b_rated, c_rate),
            b_rated,
            b_min: 0.1 * b_rated,
            b_max: b_rated,
            b_0: 0.5 * b_rated,
            eta_ch: DEFAULT_EFFICIENCY,
            eta_dis: DEFAULT_EFFICIENCY,
            charge_rate_c: c_rate,
            discharge_rate_c: c_rate,
            cycle_life_100dod: DEFAULT_CYCLE_LIFE,
            calendar_life_years: DEFAULT_CALENDAR_YEARS,
            cost_per_kwh: cost,
            inverter_cost_per_kwh: inverter,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The nine candidates {1, 2, 5} kWh × {0.25C, 1C, 2C}.
    pub fn default_catalog() -> Vec<Self> {
        [1.0, 2.0, 5.0]
            .iter()
            .flat_map(|&b| RAMP_COSTS.iter().map(move |&(c, _, _)| Self::standard(b, c).expect("table entry")))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Err(Error::InvalidBattery { name: self.name.clone(), message });
        let values = [
            self.b_rated,
            self.b_min,
            self.b_max,
            self.b_0,
            self.eta_ch,
            self.eta_dis,
            self.charge_rate_c,
            self.discharge_rate_c,
            self.cycle_life_100dod,
            self.calendar_life_years,
            self.cost_per_kwh,
            self.inverter_cost_per_kwh,
        ];
        if values.iter().any(|v| !v.is_finite()) {
            return fail("all parameters must be finite".into());
        }
        if !(0.0 <= self.b_min && self.b_min <= self.b_0 && self.b_0 <= self.b_max && self.b_max <= self.b_rated) {
            return fail(format!(
                "need 0 <= b_min <= b_0 <= b_max <= b_rated, got {} / {} / {} / {}",
                self.b_min, self.b_0, self.b_max, self.b_rated
            ));
        }
        if !(self.eta_ch > 0.0 && self.eta_ch <= 1.0 && self.eta_dis > 0.0 && self.eta_dis <= 1.0) {
            return fail("efficiencies must lie in (0, 1]".into());
        }
        if self.charge_rate_c < 0.0 || self.discharge_rate_c < 0.0 {
            return fail("C-rates must be non-negative".into());
        }
        if self.cycle_life_100dod <= 0.0 || self.calendar_life_years <= 0.0 {
            return fail("cycle and calendar life must be positive".into());
        }
        if self.cost_per_kwh < 0.0 || self.inverter_cost_per_kwh < 0.0 {
            return fail("costs must be non-negative".into());
        }
        Ok(())
    }

    /// Maximum charging power, kW.
    pub fn delta_max(&self) -> f64 {
        self.charge_rate_c * self.b_rated
    }

    /// Maximum discharging power as a non-positive number, kW.
    pub fn delta_min(&self) -> f64 {
        -self.discharge_rate_c * self.b_rated
    }

    /// Per-step bounds on the stored-energy change `x = h·δ`.
    pub fn x_bounds(&self, h: f64) -> (f64, f64) {
        (self.delta_min() * h, self.delta_max() * h)
    }

    /// Meter-side energy `s` for a stored-energy change `x` (charging draws
    /// `x/η_ch`, discharging delivers `η_dis·|x|`).
    pub fn grid_side_energy(&self, x: f64, h: f64) -> Result<f64> {
        let (lo, hi) = self.x_bounds(h);
        if x < lo - RAMP_TOL || x > hi + RAMP_TOL || !x.is_finite() {
            return Err(Error::RampViolation { x, lo, hi });
        }
        Ok(storage_output(x, self.eta_ch, self.eta_dis))
    }

    /// Range of `s` implied by the ramp limits.
    pub fn s_bounds(&self, h: f64) -> (f64, f64) {
        (self.delta_min() * h * self.eta_dis, self.delta_max() * h / self.eta_ch)
    }

    pub fn cost(&self) -> BatteryCost {
        let total_per_kwh = self.cost_per_kwh + self.inverter_cost_per_kwh;
        BatteryCost {
            total_per_kwh,
            c_cyc: total_per_kwh / self.cycle_life_100dod,
            b_cost: total_per_kwh * self.b_rated,
        }
    }

    /// Alternative linear cost curve `300 + 0.25·max(x, y)·100` €/kWh.
    ///
    /// Kept for comparison only; it does not reproduce the tabulated
    /// 425/700/900 €/kWh defaults used by [`BatterySpec::cost`].
    pub fn linear_ramp_cost_per_kwh(&self) -> f64 {
        300.0 + 0.25 * self.charge_rate_c.max(self.discharge_rate_c) * 100.0
    }

    /// Usable energy window, kWh.
    pub fn usable_kwh(&self) -> f64 {
        self.b_max - self.b_min
    }

    /// Sort key for "slower ramp" comparisons.
    pub fn ramp_c(&self) -> f64 {
        self.charge_rate_c.max(self.discharge_rate_c)
    }
}

/// `[x]⁺/η_ch − η_dis·[x]⁻`.
pub fn storage_output(x: f64, eta_ch: f64, eta_dis: f64) -> f64 {
    if x >= 0.0 {
        x / eta_ch
    } else {
        eta_dis * x
    }
}

pub fn standard_name(b_rated: f64, c_rate: f64) -> String {
    format!("{b_rated}kwh-{c_rate}c")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BatteryCost {
    /// Battery + inverter, €/kWh.
    pub total_per_kwh: f64,
    /// € per 100%-DoD cycle per kWh.
    pub c_cyc: f64,
    /// Purchase cost of the candidate, €.
    pub b_cost: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_kwh(c: f64) -> BatterySpec {
        BatterySpec::standard(1.0, c).unwrap()
    }

    #[test]
    fn grid_side_energy_cases() {
        let b = one_kwh(1.0);
        let h = 1.0;
        assert_eq!(b.grid_side_energy(0.0, h).unwrap(), 0.0);
        assert!((b.grid_side_energy(0.95, h).unwrap() - 1.0).abs() < 1e-12);
        assert!((b.grid_side_energy(-1.0, h).unwrap() + 0.95).abs() < 1e-12);
        assert!(matches!(b.grid_side_energy(1.5, h), Err(Error::RampViolation { .. })));

        let mut lossless = b.clone();
        lossless.eta_ch = 1.0;
        lossless.eta_dis = 1.0;
        for x in [-0.7, -0.1, 0.0, 0.3, 1.0] {
            assert_eq!(lossless.grid_side_energy(x, h).unwrap(), x);
        }
    }

    #[test]
    fn s_bounds_five_minute_one_c() {
        let (lo, hi) = one_kwh(1.0).s_bounds(1.0 / 12.0);
        // -1 kW · (1/12) h · 0.95 and 1 kW · (1/12) h / 0.95
        assert!((lo - (-0.95 / 12.0)).abs() < 1e-12);
        assert!((hi - (1.0 / 12.0 / 0.95)).abs() < 1e-12);
        assert!((lo + 0.0792).abs() < 5e-5 && (hi - 0.0877).abs() < 5e-5);
    }

    #[test]
    fn s_bounds_quarter_c_on_two_kwh() {
        let b = BatterySpec::standard(2.0, 0.25).unwrap();
        let (_, hi) = b.s_bounds(1.0 / 12.0);
        assert!((hi - 0.5 / 12.0 / 0.95).abs() < 1e-12);
        let mut lossless = b;
        lossless.eta_ch = 1.0;
        lossless.eta_dis = 1.0;
        assert_eq!(lossless.s_bounds(0.5), (-0.25, 0.25));
    }

    #[test]
    fn table_costs_per_cycle() {
        let c = one_kwh(0.25).cost();
        assert_eq!(c.total_per_kwh, 425.0);
        assert!((c.c_cyc - 0.1062).abs() < 1e-4);
        assert!((one_kwh(1.0).cost().c_cyc - 0.1750).abs() < 1e-4);
        assert!((one_kwh(2.0).cost().c_cyc - 0.2250).abs() < 1e-4);
        assert_eq!(BatterySpec::standard(5.0, 2.0).unwrap().cost().b_cost, 4500.0);
    }

    #[test]
    fn doubling_cycle_life_halves_c_cyc() {
        let mut b = one_kwh(1.0);
        let before = b.cost().c_cyc;
        b.cycle_life_100dod *= 2.0;
        assert!((b.cost().c_cyc - before / 2.0).abs() < 1e-15);
    }

    #[test]
    fn linear_cost_curve_disagrees_with_table() {
        for c in [0.25, 1.0, 2.0] {
            let b = one_kwh(c);
            assert!((b.linear_ramp_cost_per_kwh() - b.cost().total_per_kwh).abs() > 1.0);
        }
    }

    #[test]
    fn catalog_and_validation() {
        let cat = BatterySpec::default_catalog();
        assert_eq!(cat.len(), 9);
        assert_eq!(cat[0].name, "1kwh-0.25c");
        assert_eq!(cat[8].name, "5kwh-2c");
        assert!(BatterySpec::standard(1.0, 3.0).is_err());
        let mut bad = one_kwh(1.0);
        bad.b_0 = 0.05;
        assert!(bad.validate().is_err());
        bad.b_0 = 0.5;
        bad.eta_ch = 0.0;
        assert!(bad.validate().is_err());
    }
}
