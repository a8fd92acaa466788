//! Whole-month checks on the synthetic prosumer fixtures.

use prosumer_storage::fixtures::{scenario, Archetype, DEFAULT_SEED};
use prosumer_storage::optimizer::validate_dispatch;
use prosumer_storage::profitability::{assess, default_cycle_target, tune_friction};
use prosumer_storage::{BatterySpec, DispatchProblem, EvalOptions, PpcSchedule, ProfitabilityReport, TariffSchedule};

fn sweep(archetype: Archetype, tariff: &TariffSchedule) -> Vec<(BatterySpec, ProfitabilityReport)> {
    let s = scenario(archetype, DEFAULT_SEED, tariff).unwrap();
    let opts = EvalOptions::default();
    let ppc = PpcSchedule::default();
    BatterySpec::default_catalog()
        .into_iter()
        .map(|b| {
            let (r, _) = assess(&s, &b, &ppc, &opts).unwrap();
            (b, r)
        })
        .collect()
}

fn at(rows: &[(BatterySpec, ProfitabilityReport)], b: f64, c: f64) -> &ProfitabilityReport {
    &rows.iter().find(|(s, _)| s.b_rated == b && s.ramp_c() == c).unwrap().1
}

#[test]
fn every_fixture_dispatch_is_certified() {
    let tariff = TariffSchedule::default();
    let opts = EvalOptions::default();
    let ppc = PpcSchedule::default();
    for a in Archetype::ALL {
        let s = scenario(a, DEFAULT_SEED, &tariff).unwrap();
        for b in BatterySpec::default_catalog() {
            let (_, sel) = assess(&s, &b, &ppc, &opts).unwrap();
            let prob = DispatchProblem::new(&s, &b, &opts.dispatch).with_peak_cap(sel.dispatch.p_max_set);
            let v = validate_dispatch(&prob, &sel.dispatch, 1e-7);
            assert!(v.is_empty(), "{a} {}: {:?}", b.name, &v[..v.len().min(3)]);
        }
    }
}

#[test]
fn gain_is_monotone_and_waste_shrinks() {
    let tariff = TariffSchedule::default();
    for a in Archetype::ALL {
        let rows = sweep(a, &tariff);
        for c in [0.25, 1.0, 2.0] {
            for (lo, hi) in [(1.0, 2.0), (2.0, 5.0)] {
                let (r0, r1) = (at(&rows, lo, c), at(&rows, hi, c));
                assert!(r1.g_t >= r0.g_t - 1e-9, "{a} {c}C: G_T {lo} -> {hi}");
                assert!(r1.waste_kwh <= r0.waste_kwh + 1e-6, "{a} {c}C: waste {lo} -> {hi}");
            }
        }
        for b in [1.0, 2.0, 5.0] {
            for (lo, hi) in [(0.25, 1.0), (1.0, 2.0)] {
                assert!(at(&rows, b, hi).g_t >= at(&rows, b, lo).g_t - 1e-9, "{a} {b} kWh: G_T {lo}C -> {hi}C");
            }
        }
    }
}

#[test]
fn self_sufficiency_grows_with_capacity_under_a_flat_price() {
    // With a spread, grid-charged arbitrage can add import; a flat price
    // leaves storage nothing to do except absorb surplus.
    let tariff = TariffSchedule::flat(0.16);
    for a in Archetype::ALL {
        let rows = sweep(a, &tariff);
        for c in [0.25, 1.0, 2.0] {
            let ss: Vec<f64> = [1.0, 2.0, 5.0].iter().map(|&b| at(&rows, b, c).ss).collect();
            assert!(ss[0] <= ss[1] + 1e-9 && ss[1] <= ss[2] + 1e-9, "{a} {c}C: {ss:?}");
        }
    }
}

#[test]
fn under_budget_candidate_keeps_its_dispatch() {
    let tariff = TariffSchedule::default();
    let s = scenario(Archetype::C4, DEFAULT_SEED, &tariff).unwrap();
    let b = BatterySpec::standard(5.0, 0.25).unwrap();
    let opts = EvalOptions::default();
    let ppc = PpcSchedule::default();
    let target = default_cycle_target(&s, &b, opts.payback);
    let (_, sel) = assess(&s, &b, &ppc, &opts).unwrap();
    let out = tune_friction(&s, &b, &ppc, target, &opts).unwrap();
    assert!(!out.tuned);
    assert_eq!(out.eta_fric, 1.0);
    assert_eq!(out.dispatch, sel.dispatch);
}
