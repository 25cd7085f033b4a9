use bdlp_demo::{averaging_scan_json, envelope_curves_json, simulate_json};
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn envelopes_for_mixed_regime() {
    let v = parse(envelope_curves_json(0.75, 0.5, 1.0, 0.5, 5.0).unwrap());
    assert_eq!(v["joint_regime"], "joint_supercritical");
    assert_eq!(v["averaged_regime"], "averaged_subcritical");
    let avg: Vec<f64> = v["averaged"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(avg.len(), 101);
    assert!(avg.windows(2).all(|w| w[1] < w[0]));
    let joint: Vec<f64> = v["joint"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(joint.windows(2).all(|w| w[1] > w[0]));
    assert!(envelope_curves_json(0.75, 0.5, 1.0, 1.5, 5.0).is_err());
}

#[test]
fn small_simulation_is_seeded() {
    let a = simulate_json(1.0, 0.5, 1.0, 0.3, 10.0, 8, 1.0, 3).unwrap();
    let b = simulate_json(1.0, 0.5, 1.0, 0.3, 10.0, 8, 1.0, 3).unwrap();
    assert_eq!(a, b);
    let v = parse(a);
    assert_eq!(v["t"].as_array().unwrap().len(), 41);
    assert!(v["plus"].as_array().unwrap().iter().all(|x| (0.0..10.0).contains(&x.as_f64().unwrap())));
    assert!(simulate_json(-1.0, 0.5, 1.0, 0.3, 10.0, 8, 1.0, 3).is_err());
}

#[test]
fn scan_errors_shrink() {
    let v = parse(averaging_scan_json(0.5, 2.0).unwrap());
    let e: Vec<f64> = v["sup_error"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(e.windows(2).all(|w| w[1] < w[0]), "{e:?}");
}

#[test]
fn bad_inputs_are_rejected() {
    assert!(envelope_curves_json(-1.0, 0.5, 1.0, 0.5, 5.0).is_err());
    assert!(envelope_curves_json(1.0, 0.5, 1.0, 1.5, 5.0).is_err());
    assert!(simulate_json(1.0, 0.5, 1.0, -0.3, 10.0, 20, 2.0, 7).is_err());
}
