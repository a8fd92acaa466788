//! Prosumer measurement series, tariffs and peak power contracts.

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use chrono::{NaiveDateTime, NaiveTime, Timelike};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const SECONDS_PER_DAY: u32 = 86_400;

/// Aligned per-step load, PV and buy price of one prosumer.
///
/// Energies are kWh per step; prices are €/kWh. The horizon is
/// `step_hours * len()` hours.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSeries {
    start_time: NaiveDateTime,
    step_hours: f64,
    load: Vec<f64>,
    pv: Vec<f64>,
    price: Vec<f64>,
}

impl ScenarioSeries {
    pub fn new(
        start_time: NaiveDateTime,
        step_hours: f64,
        load: Vec<f64>,
        pv: Vec<f64>,
        price: Vec<f64>,
    ) -> Result<Self> {
        if !(step_hours.is_finite() && step_hours > 0.0) {
            return Err(Error::InvalidScenario(format!("step length must be positive, got {step_hours} h")));
        }
        let n = load.len();
        if n == 0 {
            return Err(Error::InvalidScenario("series is empty".into()));
        }
        if pv.len() != n || price.len() != n {
            return Err(Error::InvalidScenario(format!(
                "length mismatch: load {n}, pv {}, price {}",
                pv.len(),
                price.len()
            )));
        }
        for (name, series) in [("load", &load), ("pv", &pv), ("price", &price)] {
            if let Some(i) = series.iter().position(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidScenario(format!("{name}[{i}] = {} is negative or not finite", series[i])));
            }
        }
        Ok(Self { start_time, step_hours, load, pv, price })
    }

    /// Builds a series whose price column is materialized from `tariff`.
    pub fn with_tariff(
        start_time: NaiveDateTime,
        step_hours: f64,
        load: Vec<f64>,
        pv: Vec<f64>,
        tariff: &TariffSchedule,
    ) -> Result<Self> {
        let step = chrono::Duration::milliseconds((step_hours * 3.6e6).round() as i64);
        let price = (0..load.len()).map(|i| tariff.price_at((start_time + step * i as i32).time())).collect();
        Self::new(start_time, step_hours, load, pv, price)
    }

    pub fn len(&self) -> usize {
        self.load.len()
    }

    pub fn is_empty(&self) -> bool {
        self.load.is_empty()
    }

    pub fn start_time(&self) -> NaiveDateTime {
        self.start_time
    }

    pub fn step_hours(&self) -> f64 {
        self.step_hours
    }

    pub fn horizon_hours(&self) -> f64 {
        self.step_hours * self.len() as f64
    }

    /// Length of the window in days; used as the PPC billing day count.
    pub fn days(&self) -> f64 {
        self.horizon_hours() / 24.0
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn pv(&self) -> &[f64] {
        &self.pv
    }

    pub fn price(&self) -> &[f64] {
        &self.price
    }

    pub fn timestamp(&self, i: usize) -> NaiveDateTime {
        self.start_time + chrono::Duration::milliseconds((self.step_hours * 3.6e6 * i as f64).round() as i64)
    }

    pub fn net_load(&self) -> NetLoad {
        NetLoad(self.load.iter().zip(&self.pv).map(|(d, r)| d - r).collect())
    }

    /// Self-sufficiency, wasted PV and energy bill without a battery.
    pub fn baseline_metrics(&self) -> Result<GridMetrics> {
        grid_metrics(&self.load, &self.net_load().0, &self.price)
    }

    /// Restricts the series to steps `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        let start = self.timestamp(range.start);
        Self::new(
            start,
            self.step_hours,
            self.load[range.clone()].to_vec(),
            self.pv[range.clone()].to_vec(),
            self.price[range].to_vec(),
        )
    }
}

/// Net energy without storage, `z_i = d_i - r_i` in kWh.
#[derive(Debug, Clone, PartialEq)]
pub struct NetLoad(pub Vec<f64>);

impl NetLoad {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Largest average power over one step, in kW.
    pub fn peak_kw(&self, step_hours: f64) -> f64 {
        self.0.iter().fold(f64::NEG_INFINITY, |m, z| m.max(z / step_hours))
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Energy balance seen at the meter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridMetrics {
    /// Share of consumption not imported from the grid.
    pub self_sufficiency: f64,
    /// Surplus pushed to the grid without remuneration, kWh.
    pub waste_kwh: f64,
    pub grid_import_kwh: f64,
    /// Σ price·import, €.
    pub energy_cost: f64,
}

/// Metrics for a meter-side energy series `grid` (z without storage, z + s with).
pub fn grid_metrics(load: &[f64], grid: &[f64], price: &[f64]) -> Result<GridMetrics> {
    let consumed: f64 = load.iter().sum();
    if consumed <= 0.0 {
        return Err(Error::DegenerateScenario);
    }
    let mut waste = 0.0;
    let mut import = 0.0;
    let mut cost = 0.0;
    for (l, p) in grid.iter().zip(price) {
        if *l > 0.0 {
            import += l;
            cost += p * l;
        } else {
            waste -= l;
        }
    }
    Ok(GridMetrics {
        self_sufficiency: (consumed - import) / consumed,
        waste_kwh: waste,
        grid_import_kwh: import,
        energy_cost: cost,
    })
}

/// Seconds since midnight, serialized as `HH:MM` (`24:00` allowed as an end).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeOfDay(u32);

impl TimeOfDay {
    pub fn hm(hour: u32, minute: u32) -> Self {
        Self(hour * 3600 + minute * 60)
    }

    pub fn seconds(self) -> u32 {
        self.0
    }
}

impl FromStr for TimeOfDay {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidTariff(format!("time of day `{s}` is not HH:MM"));
        let (h, m) = s.trim().split_once(':').ok_or_else(bad)?;
        let h: u32 = h.parse().map_err(|_| bad())?;
        let m: u32 = m.parse().map_err(|_| bad())?;
        if m >= 60 || h > 24 || (h == 24 && m != 0) {
            return Err(bad());
        }
        Ok(Self::hm(h, m))
    }
}

impl fmt::Display for TimeOfDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.0 / 3600, (self.0 % 3600) / 60)
    }
}

impl Serialize for TimeOfDay {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TimeOfDay {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TariffPeriod {
    pub start: TimeOfDay,
    pub end: TimeOfDay,
    /// €/kWh.
    pub price: f64,
}

impl TariffPeriod {
    /// Half-open `[start, end)`; a period with `start > end` wraps midnight.
    fn contains(&self, t: u32) -> bool {
        let (a, b) = (self.start.0 % SECONDS_PER_DAY, self.end.0);
        if a < b {
            a <= t && t < b
        } else {
            t >= a || t < b % SECONDS_PER_DAY
        }
    }
}

/// Time-of-use buy price: listed periods, with `fallback_price` elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TariffSchedule {
    #[serde(default)]
    pub periods: Vec<TariffPeriod>,
    pub fallback_price: f64,
}

impl TariffSchedule {
    pub fn flat(price: f64) -> Self {
        Self { periods: Vec::new(), fallback_price: price }
    }

    /// Default two-period tariff: 0.20 €/kWh from 08:00 to 22:00, 0.10 €/kWh otherwise.
    pub fn default_two_period() -> Self {
        Self {
            periods: vec![TariffPeriod { start: TimeOfDay::hm(8, 0), end: TimeOfDay::hm(22, 0), price: 0.20 }],
            fallback_price: 0.10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prices = self.periods.iter().map(|p| p.price).chain([self.fallback_price]);
        for p in prices {
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::InvalidTariff(format!("price {p} must be finite and non-negative")));
            }
        }
        for p in &self.periods {
            if p.start.0 % SECONDS_PER_DAY == p.end.0 % SECONDS_PER_DAY {
                return Err(Error::InvalidTariff(format!("period {}-{} is empty or ambiguous", p.start, p.end)));
            }
        }
        // Period boundaries are whole minutes, so a per-minute sweep is exact.
        for minute in 0..1440u32 {
            let t = minute * 60;
            let hits: Vec<_> = self.periods.iter().filter(|p| p.contains(t)).collect();
            if hits.len() > 1 {
                return Err(Error::InvalidTariff(format!(
                    "periods {}-{} and {}-{} overlap",
                    hits[0].start, hits[0].end, hits[1].start, hits[1].end
                )));
            }
        }
        Ok(())
    }

    pub fn price_at(&self, t: NaiveTime) -> f64 {
        let secs = t.num_seconds_from_midnight();
        self.periods.iter().find(|p| p.contains(secs)).map_or(self.fallback_price, |p| p.price)
    }
}

impl Default for TariffSchedule {
    fn default() -> Self {
        Self::default_two_period()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpcLevel {
    /// Contracted limit, kVA (compared against kW at unity power factor).
    pub limit_kva: f64,
    /// €/day.
    pub cost_per_day: f64,
}

/// Ordered peak power contract levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpcSchedule {
    pub levels: Vec<PpcLevel>,
}

const MADEIRA_PPC: [(f64, f64); 8] = [
    (3.45, 0.1643),
    (4.6, 0.2132),
    (5.75, 0.2590),
    (6.9, 0.3080),
    (10.35, 0.4532),
    (13.8, 0.5981),
    (17.25, 0.7436),
    (20.7, 0.8892),
];

impl PpcSchedule {
    pub fn new(levels: Vec<PpcLevel>) -> Result<Self> {
        let s = Self { levels };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::InvalidPpc("no levels".into()));
        }
        for l in &self.levels {
            if !(l.limit_kva.is_finite() && l.limit_kva > 0.0 && l.cost_per_day.is_finite() && l.cost_per_day >= 0.0) {
                return Err(Error::InvalidPpc(format!("bad level {l:?}")));
            }
        }
        for w in self.levels.windows(2) {
            if !(w[1].limit_kva > w[0].limit_kva && w[1].cost_per_day > w[0].cost_per_day) {
                return Err(Error::InvalidPpc(format!(
                    "levels must strictly increase in limit and cost: {:?} then {:?}",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }

    /// Index of the smallest level whose limit is at least `power_kw`.
    pub fn smallest_covering(&self, power_kw: f64) -> Option<usize> {
        self.levels.iter().position(|l| l.limit_kva >= power_kw)
    }
}

impl Default for PpcSchedule {
    /// The eight low-voltage contract levels (3.45 to 20.7 kVA).
    fn default() -> Self {
        Self {
            levels: MADEIRA_PPC.iter().map(|&(limit_kva, cost_per_day)| PpcLevel { limit_kva, cost_per_day }).collect(),
        }
    }
}

const CSV_HEADER: [&str; 3] = ["timestamp", "load_w", "pv_w"];

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(t) = chrono::DateTime::parse_from_rfc3339(s) {
        return Some(t.naive_local());
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

/// Reads `timestamp,load_w,pv_w` rows of instantaneous power (W) sampled every
/// `step_hours`, converts them to per-step energy and prices them by `tariff`.
///
/// Row numbers in errors are 1-based data rows (the header is row 0).
pub fn load_scenario<R: Read>(source: R, step_hours: f64, tariff: &TariffSchedule) -> Result<ScenarioSeries> {
    tariff.validate()?;
    if !(step_hours.is_finite() && step_hours > 0.0) {
        return Err(Error::InvalidScenario(format!("step length must be positive, got {step_hours} h")));
    }
    let expected_secs = (step_hours * 3600.0).round() as i64;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(Error::Parse {
            row: 0,
            message: format!("expected header `{}`, found `{}`", CSV_HEADER.join(","), header.join(",")),
        });
    }

    let mut start = None;
    let mut prev: Option<NaiveDateTime> = None;
    let (mut load, mut pv) = (Vec::new(), Vec::new());
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| Error::Parse { row, message: e.to_string() })?;
        let raw_ts = &record[0];
        let ts = parse_timestamp(raw_ts)
            .ok_or_else(|| Error::Parse { row, message: format!("unparseable timestamp `{raw_ts}`") })?;
        let power = |col: usize, column: &'static str| -> Result<f64> {
            let v: f64 = record[col].parse().map_err(|_| Error::Parse {
                row,
                message: format!("`{}` is not a number in column `{column}`", &record[col]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { row, message: format!("non-finite value in column `{column}`") });
            }
            if v < 0.0 {
                return Err(Error::NegativeMeasurement { row, column, value: v });
            }
            Ok(v)
        };
        let load_w = power(1, "load_w")?;
        let pv_w = power(2, "pv_w")?;

        if let Some(p) = prev {
            let delta = (ts - p).num_seconds();
            let timestamp = raw_ts.to_owned();
            if delta == 0 {
                return Err(Error::DuplicateTimestamp { row, timestamp });
            } else if delta < 0 {
                return Err(Error::OutOfOrder { row, timestamp });
            } else if delta != expected_secs {
                if delta % expected_secs == 0 {
                    return Err(Error::Gap { row, missing: delta / expected_secs - 1, timestamp });
                }
                return Err(Error::NonUniformSpacing { row, expected_secs, found_secs: delta });
            }
        } else {
            start = Some(ts);
        }
        prev = Some(ts);
        load.push(load_w * step_hours / 1000.0);
        pv.push(pv_w * step_hours / 1000.0);
    }
    let start = start.ok_or_else(|| Error::InvalidScenario("no data rows".into()))?;
    ScenarioSeries::with_tariff(start, step_hours, load, pv, tariff)
}

pub fn load_scenario_path(path: &Path, step_hours: f64, tariff: &TariffSchedule) -> Result<ScenarioSeries> {
    let file = std::fs::File::open(path)?;
    load_scenario(std::io::BufReader::new(file), step_hours, tariff)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t0() -> NaiveDateTime {
        NaiveDateTime::parse_from_str("2019-06-01T00:00:00", "%Y-%m-%dT%H:%M:%S").unwrap()
    }

    fn csv_rows(rows: &[(&str, f64, f64)]) -> String {
        let mut s = String::from("timestamp,load_w,pv_w\n");
        for (t, l, p) in rows {
            s.push_str(&format!("{t},{l},{p}\n"));
        }
        s
    }

    #[test]
    fn constant_power_for_one_hour() {
        let rows: Vec<String> = (0..12).map(|i| format!("2019-06-01T00:{:02}:00", i * 5)).collect();
        let rows: Vec<_> = rows.iter().map(|t| (t.as_str(), 300.0, 0.0)).collect();
        let s = load_scenario(csv_rows(&rows).as_bytes(), 1.0 / 12.0, &TariffSchedule::flat(0.16)).unwrap();
        assert_eq!(s.len(), 12);
        assert!((s.load().iter().sum::<f64>() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_pv() {
        let rows = [("2019-06-01T00:00:00", 300.0, 0.0), ("2019-06-01T00:05:00", 300.0, -5.0)];
        let err = load_scenario(csv_rows(&rows).as_bytes(), 1.0 / 12.0, &TariffSchedule::flat(0.16)).unwrap_err();
        assert!(matches!(err, Error::NegativeMeasurement { row: 2, column: "pv_w", .. }));
        assert!(err.to_string().contains("negative measurement"));
    }

    #[test]
    fn rejects_duplicates_gaps_and_bad_spacing() {
        let h = 1.0 / 12.0;
        let tariff = TariffSchedule::flat(0.1);
        let dup = [("2019-06-01T00:00:00", 1.0, 0.0), ("2019-06-01T00:00:00", 1.0, 0.0)];
        assert!(matches!(
            load_scenario(csv_rows(&dup).as_bytes(), h, &tariff),
            Err(Error::DuplicateTimestamp { row: 2, .. })
        ));
        let gap =
            [("2019-06-01T00:00:00", 1.0, 0.0), ("2019-06-01T00:05:00", 1.0, 0.0), ("2019-06-01T00:20:00", 1.0, 0.0)];
        assert!(matches!(
            load_scenario(csv_rows(&gap).as_bytes(), h, &tariff),
            Err(Error::Gap { row: 3, missing: 2, .. })
        ));
        let odd = [("2019-06-01T00:00:00", 1.0, 0.0), ("2019-06-01T00:07:00", 1.0, 0.0)];
        assert!(matches!(
            load_scenario(csv_rows(&odd).as_bytes(), h, &tariff),
            Err(Error::NonUniformSpacing { row: 2, .. })
        ));
        let back = [("2019-06-01T00:05:00", 1.0, 0.0), ("2019-06-01T00:00:00", 1.0, 0.0)];
        assert!(matches!(load_scenario(csv_rows(&back).as_bytes(), h, &tariff), Err(Error::OutOfOrder { row: 2, .. })));
    }

    #[test]
    fn june_at_five_minutes_has_8640_steps() {
        let tariff = TariffSchedule::flat(0.16);
        let mut s = String::from("timestamp,load_w,pv_w\n");
        let mut t = t0();
        for _ in 0..30 * 288 {
            s.push_str(&format!("{},100,50\n", t.format("%Y-%m-%dT%H:%M:%S")));
            t += chrono::Duration::minutes(5);
        }
        let series = load_scenario(s.as_bytes(), 5.0 / 60.0, &tariff).unwrap();
        assert_eq!(series.len(), 8640);
        assert!((series.days() - 30.0).abs() < 1e-12);
    }

    #[test]
    fn net_load_is_elementwise_difference() {
        let s = ScenarioSeries::new(t0(), 1.0, vec![1.0, 2.0], vec![0.5, 3.0], vec![0.1, 0.1]).unwrap();
        assert_eq!(s.net_load().0, vec![0.5, -1.0]);
        let s = ScenarioSeries::new(t0(), 1.0, vec![1.0, 2.0], vec![0.0, 0.0], vec![0.1, 0.1]).unwrap();
        assert_eq!(s.net_load().0, s.load());
    }

    #[test]
    fn baseline_perfect_match_and_no_pv() {
        let d = vec![1.0, 2.0, 0.5];
        let s = ScenarioSeries::new(t0(), 1.0, d.clone(), d.clone(), vec![0.1, 0.2, 0.3]).unwrap();
        let m = s.baseline_metrics().unwrap();
        assert_eq!((m.self_sufficiency, m.waste_kwh), (1.0, 0.0));

        let s = ScenarioSeries::new(t0(), 1.0, d.clone(), vec![0.0; 3], vec![0.1, 0.2, 0.3]).unwrap();
        let m = s.baseline_metrics().unwrap();
        assert_eq!(m.self_sufficiency, 0.0);
        assert_eq!(m.waste_kwh, 0.0);
        assert!((m.energy_cost - (0.1 + 0.4 + 0.15)).abs() < 1e-12);
    }

    #[test]
    fn zero_consumption_is_degenerate() {
        let s = ScenarioSeries::new(t0(), 1.0, vec![0.0], vec![1.0], vec![0.1]).unwrap();
        assert!(matches!(s.baseline_metrics(), Err(Error::DegenerateScenario)));
    }

    #[test]
    fn tariff_lookup_and_validation() {
        let t = TariffSchedule::default_two_period();
        t.validate().unwrap();
        let at = |h, m| t.price_at(NaiveTime::from_hms_opt(h, m, 0).unwrap());
        assert_eq!(at(7, 55), 0.10);
        assert_eq!(at(8, 0), 0.20);
        assert_eq!(at(21, 55), 0.20);
        assert_eq!(at(22, 0), 0.10);

        let wrap = TariffSchedule {
            periods: vec![TariffPeriod { start: TimeOfDay::hm(22, 0), end: TimeOfDay::hm(8, 0), price: 0.05 }],
            fallback_price: 0.3,
        };
        wrap.validate().unwrap();
        assert_eq!(wrap.price_at(NaiveTime::from_hms_opt(23, 0, 0).unwrap()), 0.05);
        assert_eq!(wrap.price_at(NaiveTime::from_hms_opt(3, 0, 0).unwrap()), 0.05);
        assert_eq!(wrap.price_at(NaiveTime::from_hms_opt(12, 0, 0).unwrap()), 0.3);

        let overlap = TariffSchedule {
            periods: vec![
                TariffPeriod { start: TimeOfDay::hm(8, 0), end: TimeOfDay::hm(12, 0), price: 0.2 },
                TariffPeriod { start: TimeOfDay::hm(11, 30), end: TimeOfDay::hm(14, 0), price: 0.3 },
            ],
            fallback_price: 0.1,
        };
        assert!(overlap.validate().is_err());
        assert!("25:00".parse::<TimeOfDay>().is_err());
        assert_eq!("24:00".parse::<TimeOfDay>().unwrap().seconds(), 86_400);
    }

    #[test]
    fn default_ppc_table() {
        let p = PpcSchedule::default();
        p.validate().unwrap();
        assert_eq!(p.levels.len(), 8);
        assert_eq!(p.smallest_covering(6.5), Some(3));
        assert_eq!(p.smallest_covering(6.9), Some(3));
        assert_eq!(p.smallest_covering(25.0), None);
        assert!(PpcSchedule::new(vec![
            PpcLevel { limit_kva: 4.0, cost_per_day: 0.2 },
            PpcLevel { limit_kva: 3.0, cost_per_day: 0.3 },
        ])
        .is_err());
    }
}
