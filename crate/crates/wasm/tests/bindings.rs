use mmloc_wasm::{estimate_json, field_json, paths_json};
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn paths_for_corner_ue() {
    let v = parse(paths_json("corner-1fe", 8.0, 35.0).unwrap());
    let paths = v["paths"].as_array().unwrap();
    assert_eq!(paths.len(), 3);
    assert_eq!(paths.iter().filter(|p| p["los"].as_bool().unwrap()).count(), 1);
    assert!(v["sufficient"].as_bool().unwrap());
    let s = &paths[2]["scatterer"];
    assert!((s["x"].as_f64().unwrap() - 15.777777777777779).abs() < 1e-9);
    assert_eq!(s["y"].as_f64().unwrap(), 0.0);
}

#[test]
fn field_has_nulls_only_where_excluded() {
    let v = parse(field_json("canyon-1fe", "73GHz", "REM", 2.0).unwrap());
    let values = v["values"].as_array().unwrap();
    assert_eq!(values.len(), v["points"].as_array().unwrap().len());
    let finite = values.iter().filter(|x| x.is_f64()).count();
    assert!(finite > values.len() / 2);
    assert!(values.iter().filter_map(Value::as_f64).all(|x| x > 0.0));
}

#[test]
fn estimate_is_seeded() {
    let a = estimate_json("corner-1fe", "28GHz", "NoREM", 8.0, 35.0, 11, 10).unwrap();
    let b = estimate_json("corner-1fe", "28GHz", "NoREM", 8.0, 35.0, 11, 10).unwrap();
    assert_eq!(a, b);
    let v = parse(a);
    assert!(v["error"].as_f64().unwrap() < 10.0);
}

#[test]
fn bad_inputs_are_errors() {
    assert!(paths_json("nowhere", 1.0, 1.0).is_err());
    assert!(field_json("corner-1fe", "60GHz", "REM", 1.0).is_err());
    assert!(field_json("corner-1fe", "28GHz", "both", 1.0).is_err());
    assert!(field_json("corner-1fe", "28GHz", "REM", 0.0).is_err());
    assert!(estimate_json("corner-1fe", "28GHz", "REM", 0.0, 0.0, 1, 10).is_err());
}
