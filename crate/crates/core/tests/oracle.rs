//! Dispatch solvers against the grid dynamic-programming oracle.

use chrono::NaiveDateTime;
use prosumer_storage::optimizer::{dp_oracle, solve_dispatch, validate_dispatch, Backend};
use prosumer_storage::{BatterySpec, DispatchOptions, DispatchProblem, ScenarioSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRID: f64 = 0.01;

fn random_instance(rng: &mut ChaCha8Rng) -> (ScenarioSeries, BatterySpec, f64, bool) {
    let n = rng.gen_range(1..=24);
    let load: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
    let pv: Vec<f64> =
        (0..n).map(|i| if (i % 24) > 7 && (i % 24) < 19 { rng.gen_range(0.0..2.5) } else { 0.0 }).collect();
    let price: Vec<f64> = (0..n).map(|_| [0.0, 0.1, 0.16, 0.2, 0.3][rng.gen_range(0..5)]).collect();
    let t0 = NaiveDateTime::parse_from_str("2019-06-01T00:00:00", "%Y-%m-%dT%H:%M:%S").unwrap();
    let s = ScenarioSeries::new(t0, 1.0, load, pv, price).unwrap();
    let b = [1.0, 2.0][rng.gen_range(0..2)];
    let c = [0.25, 1.0, 2.0][rng.gen_range(0..3)];
    let bat = BatterySpec::standard(b, c).unwrap();
    let eta = [1.0, 1.0, 0.9, 0.8][rng.gen_range(0..4)];
    (s, bat, eta, rng.gen_bool(0.3))
}

#[test]
fn lp_and_stagewise_match_grid_dp() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let t = std::time::Instant::now();
    for k in 0..30 {
        let (s, bat, eta, floor) = random_instance(&mut rng);
        let base = DispatchOptions { terminal_soc_floor: floor, ..Default::default() };
        let prob = DispatchProblem::new(&s, &bat, &base).with_friction(eta);
        let dp = dp_oracle(&prob, GRID).unwrap();
        for backend in [Backend::DenseSimplex, Backend::Stagewise] {
            let opts = DispatchOptions { backend, ..base };
            let sol = solve_dispatch(&prob, &opts).unwrap();
            let gap = dp.cost - sol.objective;
            assert!(gap >= -1e-9, "instance {k} {backend:?}: LP {} above DP {}", sol.objective, dp.cost);
            assert!(gap <= 5.0 * dp.error_bound, "instance {k} {backend:?}: gap {gap} > 5 x {}", dp.error_bound);
            assert!(validate_dispatch(&prob, &sol, 1e-7).is_empty(), "instance {k} {backend:?}");
        }
    }
    assert!(t.elapsed().as_secs() < 30);
}

#[test]
fn single_step_closed_form() {
    // One hour, price 0.2, 1 kWh at b_0 = 0.5: discharging the 0.4 kWh above
    // b_min covers 0.38 kWh of load.
    let t0 = NaiveDateTime::parse_from_str("2019-06-01T00:00:00", "%Y-%m-%dT%H:%M:%S").unwrap();
    let s = ScenarioSeries::new(t0, 1.0, vec![0.5], vec![0.0], vec![0.2]).unwrap();
    let bat = BatterySpec::standard(1.0, 1.0).unwrap();
    let opts = DispatchOptions::default();
    let prob = DispatchProblem::new(&s, &bat, &opts);
    let expected = 0.2 * (0.5 - 0.95 * 0.4) + 1e-6 * 0.4;
    let sol = solve_dispatch(&prob, &opts).unwrap();
    assert!((sol.objective - expected).abs() < 1e-12);
    let dp = dp_oracle(&prob, GRID).unwrap();
    assert!((dp.cost - expected).abs() < 1e-12);
}

#[test]
fn lossless_two_price_arbitrage() {
    let t0 = NaiveDateTime::parse_from_str("2019-06-01T00:00:00", "%Y-%m-%dT%H:%M:%S").unwrap();
    let s = ScenarioSeries::new(t0, 1.0, vec![1.0, 1.0], vec![0.0, 0.0], vec![0.1, 0.3]).unwrap();
    let mut bat = BatterySpec::standard(1.0, 1.0).unwrap();
    bat.eta_ch = 1.0;
    bat.eta_dis = 1.0;
    bat.b_0 = bat.b_min;
    let opts = DispatchOptions { epsilon: 0.0, ..Default::default() };
    let prob = DispatchProblem::new(&s, &bat, &opts);
    // Buy 0.9 kWh extra at 0.1, serve 0.9 of the second hour from storage.
    let expected = 0.1 * 1.9 + 0.3 * 0.1;
    let sol = solve_dispatch(&prob, &opts).unwrap();
    assert!((sol.energy_cost - expected).abs() < 1e-9, "{}", sol.energy_cost);
    assert!((dp_oracle(&prob, GRID).unwrap().cost - expected).abs() < 1e-9);
}

#[test]
fn oracle_refuses_large_problems() {
    let t0 = NaiveDateTime::parse_from_str("2019-06-01T00:00:00", "%Y-%m-%dT%H:%M:%S").unwrap();
    let s = ScenarioSeries::new(t0, 1.0, vec![0.5; 300], vec![0.0; 300], vec![0.1; 300]).unwrap();
    let bat = BatterySpec::standard(1.0, 1.0).unwrap();
    let opts = DispatchOptions::default();
    assert!(dp_oracle(&DispatchProblem::new(&s, &bat, &opts), GRID).is_err());
    let short = s.slice(0..10).unwrap();
    assert!(dp_oracle(&DispatchProblem::new(&short, &bat, &opts), 1e-5).is_err());
}
