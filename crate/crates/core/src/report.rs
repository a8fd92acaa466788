//! CSV and plain-text outputs.
//!
//! Every file starts with `# key: value` comment lines so the conventions a
//! result was produced under travel with it.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::Result;
use crate::optimizer::DispatchSolution;
use crate::profitability::ProfitabilityReport;
use crate::timeseries::{GridMetrics, ScenarioSeries};

pub type Header = [(String, String)];

fn write_header<W: Write>(w: &mut W, header: &Header) -> Result<()> {
    for (k, v) in header {
        writeln!(w, "# {k}: {v}")?;
    }
    Ok(())
}

fn num(v: f64, decimals: usize) -> String {
    if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        // Avoid "-0.000" for values that round to zero.
        let s = format!("{v:.decimals$}");
        if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
            s.trim_start_matches('-').to_string()
        } else {
            s
        }
    }
}

/// `timestamp,z_kwh,x_kwh,s_kwh,b_kwh,theta_kwh,price`, one row per step.
pub fn write_dispatch_csv<W: Write>(
    mut w: W,
    header: &Header,
    scenario: &ScenarioSeries,
    dispatch: &DispatchSolution,
) -> Result<()> {
    write_header(&mut w, header)?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["timestamp", "z_kwh", "x_kwh", "s_kwh", "b_kwh", "theta_kwh", "price"])?;
    let z = scenario.net_load().0;
    let x = dispatch.x();
    for i in 0..scenario.len() {
        wtr.write_record([
            scenario.timestamp(i).format("%Y-%m-%dT%H:%M:%S").to_string(),
            num(z[i], 6),
            num(x[i], 6),
            num(dispatch.s[i], 6),
            num(dispatch.b[i], 6),
            num(dispatch.theta[i], 6),
            num(scenario.price()[i], 4),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// One scenario's sweep: baseline plus one entry per catalog battery.
#[derive(Debug, Clone)]
pub struct SweepTable {
    pub scenario: String,
    pub baseline: GridMetrics,
    /// Battery name and its report, or the reason it could not be evaluated.
    pub rows: Vec<(String, std::result::Result<ProfitabilityReport, String>)>,
}

const CSV_COLUMNS: [&str; 18] = [
    "scenario",
    "battery",
    "b_rated_kwh",
    "ramp_c",
    "g_pd_eur",
    "g_t_eur",
    "p_cyc",
    "cycles",
    "expb_years",
    "ss_pct",
    "waste_kwh",
    "g_arb_eur",
    "g_cyc",
    "c_cyc",
    "ppc_kva",
    "eta_fric",
    "profitable",
    "error",
];

pub fn write_sweep_csv<W: Write>(mut w: W, header: &Header, tables: &[SweepTable]) -> Result<()> {
    write_header(&mut w, header)?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(CSV_COLUMNS)?;
    for t in tables {
        let mut base = vec![String::new(); CSV_COLUMNS.len()];
        base[0] = t.scenario.clone();
        base[1] = "Load + PV".into();
        base[9] = num(100.0 * t.baseline.self_sufficiency, 2);
        base[10] = num(t.baseline.waste_kwh, 2);
        wtr.write_record(&base)?;
        for (name, row) in &t.rows {
            let rec = match row {
                Ok(r) => vec![
                    t.scenario.clone(),
                    r.battery.clone(),
                    num(r.b_rated, 2),
                    num(r.ramp_c, 2),
                    num(r.g_pd, 2),
                    num(r.g_t, 2),
                    num(r.p_cyc, 4),
                    num(r.n_cyc_100, 2),
                    num(r.expb_years, 2),
                    num(100.0 * r.ss, 2),
                    num(r.waste_kwh, 2),
                    num(r.g_arb, 2),
                    num(r.g_cyc, 4),
                    num(r.c_cyc, 4),
                    num(r.ppc_kva, 2),
                    num(r.eta_fric_used, 4),
                    r.profitable.to_string(),
                    String::new(),
                ],
                Err(e) => {
                    let mut rec = vec![String::new(); CSV_COLUMNS.len()];
                    rec[0] = t.scenario.clone();
                    rec[1] = name.clone();
                    rec[17] = e.clone();
                    rec
                }
            };
            wtr.write_record(&rec)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Aligned table in the column order G_PD, G_T, P_cyc, Cycles, ExPB, SS, Waste.
/// Profitable rows are marked with `*`.
pub fn format_sweep_table(t: &SweepTable) -> String {
    let head = ["Case", "G_PD", "G_T", "P_cyc", "Cycles", "ExPB", "SS", "Waste"];
    let units = ["", "EUR", "EUR", "", "", "(years)", "(%)", "(kWh)"];
    let dash = "-".to_string();
    let mut rows: Vec<Vec<String>> = vec![
        head.iter().map(|s| s.to_string()).collect(),
        units.iter().map(|s| s.to_string()).collect(),
        vec![
            "Load + PV".into(),
            dash.clone(),
            dash.clone(),
            dash.clone(),
            dash.clone(),
            dash.clone(),
            num(100.0 * t.baseline.self_sufficiency, 2),
            num(t.baseline.waste_kwh, 2),
        ],
    ];
    for (name, row) in &t.rows {
        rows.push(match row {
            Ok(r) => vec![
                format!("{}{}", if r.profitable { "* " } else { "  " }, r.battery),
                num(r.g_pd, 2),
                num(r.g_t, 2),
                num(r.p_cyc, 4),
                num(r.n_cyc_100, 2),
                num(r.expb_years, 2),
                num(100.0 * r.ss, 2),
                num(r.waste_kwh, 2),
            ],
            Err(e) => {
                let mut v = vec![format!("  {name}"), format!("error: {e}")];
                v.resize(head.len(), String::new());
                v
            }
        });
    }
    let widths: Vec<usize> = (0..head.len())
        .map(|c| rows.iter().filter(|r| !r[1].starts_with("error")).map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = format!("{}\n", t.scenario);
    for r in &rows {
        if r[1].starts_with("error") {
            let _ = writeln!(out, "{:<w$}  {}", r[0], r[1], w = widths[0]);
            continue;
        }
        let cells: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[0]) } else { format!("{s:>w$}", w = widths[c]) })
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}

pub fn write_sweep_text<W: Write>(mut w: W, header: &Header, tables: &[SweepTable]) -> Result<()> {
    write_header(&mut w, header)?;
    for t in tables {
        writeln!(w)?;
        w.write_all(format_sweep_table(t).as_bytes())?;
    }
    Ok(())
}
