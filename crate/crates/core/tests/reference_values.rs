use cdknlab::distortion::{sigma_kn, tau_kn};
use cdknlab::ExtendedReal;

fn parse(s: &str) -> Option<f64> {
    if s == "inf" {
        None
    } else {
        Some(s.parse().unwrap())
    }
}

fn check(label: &str, got: ExtendedReal, want: Option<f64>, worst: &mut f64) {
    match (got, want) {
        (ExtendedReal::PositiveInfinity, None) => {}
        (ExtendedReal::Finite(g), Some(w)) => {
            let rel = (g - w).abs() / w.abs().max(f64::MIN_POSITIVE);
            *worst = worst.max(rel);
            assert!(rel <= 1e-13, "{label}: got {g:e}, want {w:e}, rel {rel:e}");
        }
        _ => panic!("{label}: got {got:?}, want {want:?}"),
    }
}

#[test]
fn sigma_tau_match_fifty_digit_reference() {
    let raw = include_str!("fixtures/sigma_tau_mp.json");
    let doc: serde_json::Value = serde_json::from_str(raw).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3000);
    let mut worst = 0.0f64;
    for row in rows {
        let f: Vec<&str> = row.as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
        let (k, n, t, theta) = (parse(f[0]).unwrap(), parse(f[1]).unwrap(), parse(f[2]).unwrap(), parse(f[3]).unwrap());
        let label = format!("K={k} N={n} t={t} theta={theta}");
        check(&format!("sigma {label}"), sigma_kn(k, n, t, theta).unwrap(), parse(f[4]), &mut worst);
        check(&format!("tau {label}"), tau_kn(k, n, t, theta).unwrap(), parse(f[5]), &mut worst);
    }
    assert!(worst <= 1e-13);
}
