use prosumer_storage_wasm::{catalog, friction_curve, profitability, simulate_day};

fn parse(s: Result<String, wasm_bindgen::JsValue>) -> serde_json::Value {
    let Ok(text) = s else { panic!("binding failed") };
    serde_json::from_str(&text).unwrap()
}

#[test]
fn catalog_lists_fixtures_and_batteries() {
    let v = parse(catalog());
    assert_eq!(v["fixtures"].as_array().unwrap().len(), 4);
    assert_eq!(v["batteries"].as_array().unwrap().len(), 9);
}

#[test]
fn day_trace_has_one_day_of_steps() {
    let v = parse(simulate_day("c2", "1kwh-1c", 3));
    assert_eq!(v["soc"].as_array().unwrap().len(), 288);
    assert!(v["report"]["g_t"].as_f64().unwrap() > 0.0);
}

#[test]
fn friction_curve_starts_untuned() {
    let v = parse(friction_curve("c1", "1kwh-1c", 0.7, 4));
    let pts = v.as_array().unwrap();
    assert_eq!(pts.len(), 4);
    assert_eq!(pts[0]["eta"].as_f64().unwrap(), 1.0);
    assert!(pts[3]["cycles"].as_f64().unwrap() <= pts[0]["cycles"].as_f64().unwrap());
}

#[test]
fn calculator_matches_reported_row() {
    let v = parse(profitability(10.13, 37.01, 1.0, 0.25, true));
    assert!((v["p_cyc"].as_f64().unwrap() - 0.1675).abs() < 5e-4);
    assert!((v["expb_years"].as_f64().unwrap() - 3.50).abs() < 0.01);
}
