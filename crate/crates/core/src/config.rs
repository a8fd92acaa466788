//! TOML inputs: tariff, PPC table and battery catalog.
//!
//! ```toml
//! # tariff.toml
//! fallback_price = 0.10
//! [[periods]]
//! start = "08:00"
//! end = "22:00"
//! price = 0.20
//!
//! # ppc.toml
//! [[levels]]
//! limit_kva = 3.45
//! cost_per_day = 0.1643
//!
//! # catalog.toml
//! [[battery]]
//! b_rated = 1.0
//! c_rate = 0.25
//! ```
//!
//! Catalog entries need `b_rated` and either `c_rate` or both
//! `charge_rate_c` and `discharge_rate_c`. Anything else defaults to the
//! standard candidate of that size and ramp; costs must be given when the ramp
//! has no default cost.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::battery::{standard_name, BatterySpec};
use crate::error::{Error, Result};
use crate::timeseries::{PpcSchedule, TariffSchedule};

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn parse_tariff(text: &str) -> Result<TariffSchedule> {
    let t: TariffSchedule = toml::from_str(text)?;
    t.validate()?;
    Ok(t)
}

pub fn parse_ppc(text: &str) -> Result<PpcSchedule> {
    let p: PpcSchedule = toml::from_str(text)?;
    p.validate()?;
    Ok(p)
}

pub fn load_tariff(path: &Path) -> Result<TariffSchedule> {
    parse_tariff(&read(path)?)
}

pub fn load_ppc(path: &Path) -> Result<PpcSchedule> {
    parse_ppc(&read(path)?)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub b_rated: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charge_rate_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discharge_rate_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_ch: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_dis: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycle_life_100dod: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calendar_life_years: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_per_kwh: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inverter_cost_per_kwh: Option<f64>,
}

impl BatteryEntry {
    pub fn into_spec(self) -> Result<BatterySpec> {
        let label = self.name.clone().unwrap_or_else(|| format!("{}kwh", self.b_rated));
        let missing = |what: &str| Error::InvalidBattery { name: label.clone(), message: format!("missing {what}") };
        let charge = self.charge_rate_c.or(self.c_rate).ok_or_else(|| missing("c_rate or charge_rate_c"))?;
        let discharge = self.discharge_rate_c.or(self.c_rate).ok_or_else(|| missing("c_rate or discharge_rate_c"))?;
        let ramp = charge.max(discharge);
        let mut spec = match BatterySpec::standard(self.b_rated, ramp) {
            Ok(s) => s,
            Err(_) => {
                let cost = self.cost_per_kwh.ok_or_else(|| missing("cost_per_kwh (no default for this ramp)"))?;
                let inverter = self.inverter_cost_per_kwh.ok_or_else(|| missing("inverter_cost_per_kwh"))?;
                let mut s = BatterySpec::standard(self.b_rated, 1.0)?;
                s.cost_per_kwh = cost;
                s.inverter_cost_per_kwh = inverter;
                s
            }
        };
        spec.name = self.name.unwrap_or_else(|| {
            if charge == discharge {
                standard_name(self.b_rated, charge)
            } else {
                format!("{}kwh-{charge}c-{discharge}c", self.b_rated)
            }
        });
        spec.charge_rate_c = charge;
        spec.discharge_rate_c = discharge;
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { spec.$f = v; } )* };
        }
        set!(
            b_min,
            b_max,
            b_0,
            eta_ch,
            eta_dis,
            cycle_life_100dod,
            calendar_life_years,
            cost_per_kwh,
            inverter_cost_per_kwh
        );
        spec.validate()?;
        Ok(spec)
    }

    fn from_spec(spec: &BatterySpec) -> Self {
        Self {
            name: Some(spec.name.clone()),
            b_rated: spec.b_rated,
            charge_rate_c: Some(spec.charge_rate_c),
            discharge_rate_c: Some(spec.discharge_rate_c),
            b_min: Some(spec.b_min),
            b_max: Some(spec.b_max),
            b_0: Some(spec.b_0),
            eta_ch: Some(spec.eta_ch),
            eta_dis: Some(spec.eta_dis),
            cycle_life_100dod: Some(spec.cycle_life_100dod),
            calendar_life_years: Some(spec.calendar_life_years),
            cost_per_kwh: Some(spec.cost_per_kwh),
            inverter_cost_per_kwh: Some(spec.inverter_cost_per_kwh),
            c_rate: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    #[serde(default)]
    battery: Vec<BatteryEntry>,
}

/// Parses a catalog; names must be unique and the catalog non-empty.
pub fn parse_catalog(text: &str) -> Result<Vec<BatterySpec>> {
    let file: CatalogFile = toml::from_str(text)?;
    if file.battery.is_empty() {
        return Err(Error::InvalidBattery {
            name: String::new(),
            message: "catalog has no [[battery]] entries".into(),
        });
    }
    let specs = file.battery.into_iter().map(BatteryEntry::into_spec).collect::<Result<Vec<_>>>()?;
    for (i, s) in specs.iter().enumerate() {
        if specs[..i].iter().any(|t| t.name == s.name) {
            return Err(Error::InvalidBattery { name: s.name.clone(), message: "duplicate name in catalog".into() });
        }
    }
    Ok(specs)
}

pub fn load_catalog(path: &Path) -> Result<Vec<BatterySpec>> {
    parse_catalog(&read(path)?)
}

pub fn tariff_to_toml(t: &TariffSchedule) -> String {
    toml::to_string(t).expect("tariff serializes")
}

pub fn ppc_to_toml(p: &PpcSchedule) -> String {
    toml::to_string(p).expect("ppc table serializes")
}

pub fn catalog_to_toml(specs: &[BatterySpec]) -> String {
    let file = CatalogFile { battery: specs.iter().map(BatteryEntry::from_spec).collect() };
    toml::to_string(&file).expect("catalog serializes")
}
