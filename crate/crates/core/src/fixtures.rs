//! Synthetic prosumer months at 5-minute resolution.
//!
//! Four archetypes, all June 2019 (30 days, 8640 steps):
//!
//! - `c1`: PV a little above load around midday, some surplus wasted.
//! - `c2`: load follows PV closely, almost no surplus.
//! - `c3`: large household, PV comparable to load, high average net load.
//! - `c4`: PV about equal to monthly load, heavy midday surplus.
//!
//! Monthly totals are scaled exactly to the targets in [`Archetype::targets`].
//! Output depends only on the seed.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::timeseries::{load_scenario, ScenarioSeries, TariffSchedule};

pub const DEFAULT_SEED: u64 = 20190601;
pub const STEP_MINUTES: u32 = 5;
pub const DAYS: usize = 30;
const STEPS_PER_DAY: usize = 24 * 60 / STEP_MINUTES as usize;
pub const STEPS: usize = DAYS * STEPS_PER_DAY;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Archetype {
    C1,
    C2,
    C3,
    C4,
}

/// Monthly aggregates a fixture is scaled to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Targets {
    pub pv_kwh: f64,
    pub load_kwh: f64,
}

struct Profile {
    /// Household draw by period, W: night, morning, daytime, evening.
    base_w: [f64; 4],
    /// Fraction of PV output mirrored by flexible load.
    tracking: f64,
    appliance_w: f64,
    appliances_per_day: u32,
    /// Evening spike on one day of the month, W above base.
    monthly_spike_w: f64,
    salt: u64,
}

impl Archetype {
    pub const ALL: [Archetype; 4] = [Archetype::C1, Archetype::C2, Archetype::C3, Archetype::C4];

    pub fn name(self) -> &'static str {
        match self {
            Archetype::C1 => "c1",
            Archetype::C2 => "c2",
            Archetype::C3 => "c3",
            Archetype::C4 => "c4",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Archetype::C1 => "PV slightly exceeds load midday",
            Archetype::C2 => "load tracks PV",
            Archetype::C3 => "high average net load",
            Archetype::C4 => "PV much larger than load",
        }
    }

    pub fn targets(self) -> Targets {
        let (pv_kwh, load_kwh) = match self {
            Archetype::C1 => (180.0, 459.0),
            Archetype::C2 => (120.0, 360.0),
            Archetype::C3 => (610.0, 1969.0),
            Archetype::C4 => (305.0, 306.0),
        };
        Targets { pv_kwh, load_kwh }
    }

    fn profile(self) -> Profile {
        match self {
            Archetype::C1 => Profile {
                base_w: [330.0, 700.0, 420.0, 1250.0],
                tracking: 0.0,
                appliance_w: 2200.0,
                appliances_per_day: 3,
                monthly_spike_w: 3600.0,
                salt: 0x0c01,
            },
            Archetype::C2 => Profile {
                base_w: [300.0, 600.0, 350.0, 950.0],
                tracking: 0.97,
                appliance_w: 1800.0,
                appliances_per_day: 2,
                monthly_spike_w: 3000.0,
                salt: 0x0c02,
            },
            Archetype::C3 => Profile {
                base_w: [1700.0, 2600.0, 2300.0, 4300.0],
                tracking: 0.0,
                appliance_w: 3500.0,
                appliances_per_day: 4,
                monthly_spike_w: 6000.0,
                salt: 0x0c03,
            },
            Archetype::C4 => Profile {
                base_w: [260.0, 520.0, 230.0, 850.0],
                tracking: 0.0,
                appliance_w: 1500.0,
                appliances_per_day: 2,
                monthly_spike_w: 2000.0,
                salt: 0x0c04,
            },
        }
    }
}

impl fmt::Display for Archetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Archetype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Archetype::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidScenario(format!("unknown fixture '{s}' (expected c1..c4)")))
    }
}

/// Generated measurements in W, one value per 5-minute step.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureData {
    pub archetype: Archetype,
    pub start: NaiveDateTime,
    pub load_w: Vec<f64>,
    pub pv_w: Vec<f64>,
}

pub fn start_time() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2019, 6, 1).expect("valid date").and_hms_opt(0, 0, 0).expect("valid time")
}

fn hour_of(step: usize) -> f64 {
    (step % STEPS_PER_DAY) as f64 * STEP_MINUTES as f64 / 60.0
}

/// Clear-sky shape on [0, 1] for Madeira local summer time.
fn clear_sky(hour: f64) -> f64 {
    const SUNRISE: f64 = 7.1;
    const SUNSET: f64 = 21.0;
    if hour <= SUNRISE || hour >= SUNSET {
        return 0.0;
    }
    (std::f64::consts::PI * (hour - SUNRISE) / (SUNSET - SUNRISE)).sin().powf(1.4)
}

fn base_period(hour: f64) -> usize {
    match hour {
        h if h < 6.5 => 0,
        h if h < 9.0 => 1,
        h if h < 18.5 => 2,
        h if h < 23.0 => 3,
        _ => 0,
    }
}

fn round_w(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

pub fn generate(archetype: Archetype, seed: u64) -> FixtureData {
    let prof = archetype.profile();
    let targets = archetype.targets();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ prof.salt.rotate_left(32));

    // PV: clear-sky shape × daily clearness × slowly varying cloud cover.
    let mut pv = vec![0.0; STEPS];
    let mut cloud = 1.0f64;
    for day in 0..DAYS {
        let clearness: f64 = rng.gen_range(0.55..1.0);
        for k in 0..STEPS_PER_DAY {
            let i = day * STEPS_PER_DAY + k;
            cloud = (0.92 * cloud + 0.08 * rng.gen_range(0.3..1.15)).clamp(0.2, 1.0);
            pv[i] = clear_sky(hour_of(i)) * clearness * (0.5 + 0.5 * cloud);
        }
    }
    let pv_step_kwh = STEP_MINUTES as f64 / 60.0 / 1000.0;
    let pv_raw: f64 = pv.iter().sum::<f64>() * pv_step_kwh;
    let pv_scale = targets.pv_kwh / pv_raw;
    pv.iter_mut().for_each(|p| *p *= pv_scale);

    // Load: period base with daily and per-step noise, appliance bursts and
    // one monthly evening spike.
    let mut base = vec![0.0; STEPS];
    for day in 0..DAYS {
        let level: f64 = rng.gen_range(0.85..1.15);
        for k in 0..STEPS_PER_DAY {
            let i = day * STEPS_PER_DAY + k;
            base[i] = prof.base_w[base_period(hour_of(i))] * level * rng.gen_range(0.9..1.1);
        }
    }
    // Integer draws go through u32 so the stream is the same where usize is 32 bits.
    let mut bursts = vec![0.0; STEPS];
    for day in 0..DAYS {
        for _ in 0..rng.gen_range(0..=2 * prof.appliances_per_day) {
            let start = day * STEPS_PER_DAY + rng.gen_range(6 * 12..23 * 12u32) as usize;
            let len = rng.gen_range(1..=4u32) as usize;
            let power = prof.appliance_w * rng.gen_range(0.4..1.0);
            for b in bursts.iter_mut().skip(start).take(len) {
                *b += power;
            }
        }
    }
    let spike_day = rng.gen_range(0..DAYS as u32) as usize;
    let spike_start = spike_day * STEPS_PER_DAY + rng.gen_range(19 * 12..21 * 12u32) as usize;
    for b in bursts.iter_mut().skip(spike_start).take(2) {
        *b += prof.monthly_spike_w;
    }

    let tracked: Vec<f64> = pv.iter().map(|p| prof.tracking * p * rng.gen_range(0.97..1.05)).collect();
    let tracked_kwh: f64 = tracked.iter().sum::<f64>() * pv_step_kwh;
    // Bursts keep their power; the base absorbs the remaining energy target.
    let burst_kwh: f64 = bursts.iter().sum::<f64>() * pv_step_kwh;
    let base_kwh: f64 = base.iter().sum::<f64>() * pv_step_kwh;
    let base_scale = ((targets.load_kwh - tracked_kwh - burst_kwh) / base_kwh).max(0.1);

    let load_w: Vec<f64> = (0..STEPS).map(|i| round_w(base[i] * base_scale + bursts[i] + tracked[i])).collect();
    let pv_w: Vec<f64> = pv.into_iter().map(round_w).collect();
    FixtureData { archetype, start: start_time(), load_w, pv_w }
}

impl FixtureData {
    pub fn timestamp(&self, i: usize) -> NaiveDateTime {
        self.start + Duration::minutes(i as i64 * STEP_MINUTES as i64)
    }

    /// `timestamp,load_w,pv_w` CSV, the same format [`load_scenario`] reads.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["timestamp", "load_w", "pv_w"])?;
        for i in 0..self.load_w.len() {
            wtr.write_record([
                self.timestamp(i).format("%Y-%m-%dT%H:%M:%S").to_string(),
                format!("{:.1}", self.load_w[i]),
                format!("{:.1}", self.pv_w[i]),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_csv(&mut out).expect("writing to memory cannot fail");
        out
    }

    /// Scenario as it would be read back from the CSV file.
    pub fn to_scenario(&self, tariff: &TariffSchedule) -> Result<ScenarioSeries> {
        load_scenario(self.to_csv_bytes().as_slice(), STEP_MINUTES as f64 / 60.0, tariff)
    }
}

pub fn scenario(archetype: Archetype, seed: u64, tariff: &TariffSchedule) -> Result<ScenarioSeries> {
    generate(archetype, seed).to_scenario(tariff)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all() -> Vec<ScenarioSeries> {
        Archetype::ALL.iter().map(|&a| scenario(a, DEFAULT_SEED, &TariffSchedule::default()).unwrap()).collect()
    }

    #[test]
    fn month_shape_and_totals() {
        for (a, s) in Archetype::ALL.iter().zip(all()) {
            assert_eq!(s.len(), 8640);
            let t = a.targets();
            let pv: f64 = s.pv().iter().sum();
            let load: f64 = s.load().iter().sum();
            assert!((pv - t.pv_kwh).abs() < 0.5, "{a}: pv {pv}");
            assert!((load - t.load_kwh).abs() < 0.5, "{a}: load {load}");
        }
    }

    #[test]
    fn waste_ordering() {
        let m: Vec<_> = all().iter().map(|s| s.baseline_metrics().unwrap()).collect();
        assert!(m[1].waste_kwh < 5.0, "c2 waste {}", m[1].waste_kwh);
        assert!(m[3].waste_kwh > 10.0 * m[1].waste_kwh.max(1.0));
        assert!(m[0].waste_kwh > m[1].waste_kwh);
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = generate(Archetype::C3, 7).to_csv_bytes();
        let b = generate(Archetype::C3, 7).to_csv_bytes();
        assert_eq!(a, b);
        assert_ne!(a, generate(Archetype::C3, 8).to_csv_bytes());
    }

    #[test]
    fn names_round_trip() {
        for a in Archetype::ALL {
            assert_eq!(a.name().parse::<Archetype>().unwrap(), a);
        }
        assert!("c5".parse::<Archetype>().is_err());
    }
}
