use ggmfdr_wasm::{discover_json, null_histogram_json, threshold_curve_json};
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn discover_band() {
    let v = parse(discover_json("band", 30, 100, 0.1, "lasso", 1).unwrap());
    assert_eq!(v["p"], 30);
    assert_eq!(v["true_edges"].as_array().unwrap().len(), 29 + 28);
    let selected = v["selected"].as_array().unwrap();
    assert!(!selected.is_empty());
    let hits = selected.iter().filter(|e| e[3].as_bool().unwrap()).count();
    let fdp = v["fdp"].as_f64().unwrap();
    assert!((fdp - (selected.len() - hits) as f64 / selected.len() as f64).abs() < 1e-12);
}

#[test]
fn discover_rejects_bad_input() {
    assert!(discover_json("band", 500, 100, 0.1, "lasso", 1).is_err());
    assert!(discover_json("ring", 20, 100, 0.1, "lasso", 1).is_err());
    assert!(discover_json("band", 20, 100, 0.1, "ridge", 1).is_err());
    assert!(discover_json("band", 20, 100, 1.5, "lasso", 1).is_err());
}

#[test]
fn histogram_integrates_to_covered_mass() {
    let v = parse(null_histogram_json("band", 20, 100, 2, 3, 40).unwrap());
    let width = v["bin_width"].as_f64().unwrap();
    let mass: f64 = v["density"].as_array().unwrap().iter().map(|d| d.as_f64().unwrap() * width).sum();
    assert!(mass > 0.95 && mass <= 1.0 + 1e-12, "{mass}");
    assert_eq!(v["normal"].as_array().unwrap().len(), 40);
    assert_eq!(v["count"], 2 * (190 - 19 - 18));
}

#[test]
fn curve_is_consistent_with_threshold() {
    let alpha = 0.1;
    let v = parse(threshold_curve_json("hub", 30, 100, alpha, 5, 200).unwrap());
    let t: Vec<f64> = v["t"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let rej: Vec<u64> = v["rejections"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
    assert_eq!(t[0], 0.0);
    assert_eq!(rej[0], 435);
    assert!(rej.windows(2).all(|w| w[1] <= w[0]));
    let t_hat = v["t_hat"].as_f64().unwrap();
    let fdp: Vec<f64> = v["fdp_estimate"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    // t̂ is the smallest threshold meeting the bound
    assert_eq!(v["fallback_used"], false);
    for (k, &tk) in t.iter().enumerate() {
        if tk < t_hat {
            assert!(fdp[k] > alpha, "t = {tk}");
        }
    }
}
