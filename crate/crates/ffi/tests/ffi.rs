use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use cdknlab_ffi::*;

const COS: &str = r#"{"kind":"cos_n","params":{"K":-2,"N":-2},"domain":[-1.5707963267948966,1.5707963267948966],"grid_n":128,"base_point":0,"regularity_k":1}"#;
const POWER: &str = r#"{"kind":"power_n","params":{"N":-2},"domain":[0,9],"grid_n":256,"base_point":1,"regularity_k":0}"#;

fn space(json: &str) -> *mut CdkSpace {
    let c = CString::new(json).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { cdk_space_from_json(c.as_ptr(), &mut s) }, CdkStatus::Ok);
    s
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 512];
    unsafe {
        cdk_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn space_round_trip() {
    let s = space(COS);
    let mut n = 0;
    unsafe {
        assert_eq!(cdk_space_cell_count(s, &mut n), CdkStatus::Ok);
        assert_eq!(n, 128);
        let mut c = vec![0.0; n];
        assert_eq!(cdk_space_centers(s, c.as_mut_ptr(), n), CdkStatus::Ok);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(cdk_space_centers(s, c.as_mut_ptr(), 3), CdkStatus::BufferTooSmall);
        let mut m = CdkExtReal { value: 0.0, is_infinite: false };
        assert_eq!(cdk_space_total_mass(s, &mut m), CdkStatus::Ok);
        assert!(m.is_infinite);
        cdk_space_free(s);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let bad = CString::new("{\"kind\":\"cos_n\"").unwrap();
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(cdk_space_from_json(bad.as_ptr(), &mut s), CdkStatus::Parse);
        assert!(s.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(cdk_space_from_json(ptr::null(), &mut s), CdkStatus::NullPointer);
        let mut v = CdkExtReal { value: 0.0, is_infinite: false };
        assert_eq!(cdk_sigma(1.0, 2.0, 1.0, &mut v), CdkStatus::DomainError);
        assert_eq!(cdk_space_total_mass(ptr::null(), &mut v), CdkStatus::NullPointer);
        let p = space(POWER);
        assert_eq!(cdk_ikrw_fm(p, p, CdkCostKind::W2, &mut v), CdkStatus::InfiniteMass);
        cdk_space_free(p);
    }
}

#[test]
fn coefficients_match_the_library() {
    let mut v = CdkExtReal { value: 0.0, is_infinite: false };
    unsafe {
        assert_eq!(cdk_sigma(0.0, 0.25, 3.0, &mut v), CdkStatus::Ok);
        assert_eq!(v.value, 0.25);
        assert_eq!(cdk_sigma(1.0, 0.5, 4.0, &mut v), CdkStatus::Ok);
        assert!(v.is_infinite);
        assert_eq!(cdk_tau(0.0, -3.0, 0.7, 2.0, &mut v), CdkStatus::Ok);
        assert!((v.value - 0.7).abs() < 1e-12);
    }
}

#[test]
fn entropy_transport_and_cd() {
    let s = space(COS);
    unsafe {
        let mut cut = ptr::null_mut();
        assert_eq!(cdk_space_k_cut(s, 1, &mut cut), CdkStatus::Ok);
        let mut n = 0;
        cdk_space_cell_count(s, &mut n);
        let mut mu = vec![0.0; n];
        for m in mu.iter_mut().take(80).skip(40) {
            *m = 1.0 / 40.0;
        }
        let mut nu = vec![0.0; n];
        for m in nu.iter_mut().take(100).skip(70) {
            *m = 1.0 / 30.0;
        }
        let mut h = CdkExtReal { value: 0.0, is_infinite: false };
        assert_eq!(cdk_renyi_entropy(s, mu.as_ptr(), n, -2.0, &mut h), CdkStatus::Ok);
        assert!(!h.is_infinite && h.value > 0.0);
        assert_eq!(cdk_renyi_entropy(s, mu.as_ptr(), 3, -2.0, &mut h), CdkStatus::Mismatch);
        let mut w = 0.0;
        assert_eq!(cdk_wc_distance(s, mu.as_ptr(), nu.as_ptr(), n, CdkCostKind::W2, &mut w), CdkStatus::Ok);
        assert!(w > 0.0);
        let mut sum = CdkCdSummary {
            min_margin: 0.0,
            worst_t: 0.0,
            worst_nprime: 0.0,
            n_ok: 0,
            n_violated: 0,
            n_vacuous: 0,
            n_skipped: 0,
            passes: false,
        };
        assert_eq!(cdk_verify_cd(s, mu.as_ptr(), nu.as_ptr(), n, -2.0, -1.0, 11, 5, 5e-2, &mut sum), CdkStatus::Ok);
        assert!(sum.passes, "{sum:?}");
        assert_eq!(sum.n_ok + sum.n_violated + sum.n_vacuous + sum.n_skipped, 55);
        let mut d = CdkExtReal { value: 1.0, is_infinite: true };
        assert_eq!(cdk_ikrw_fm(cut, cut, CdkCostKind::Tanh, &mut d), CdkStatus::Ok);
        assert_eq!(d, CdkExtReal { value: 0.0, is_infinite: false });
        let mut g = 1.0;
        assert_eq!(cdk_extrinsic_gap(s, s, 1, CdkCostKind::W2, &mut g), CdkStatus::Ok);
        assert_eq!(g, 0.0);
        cdk_space_free(cut);
        cdk_space_free(s);
    }
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(cdk_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_and_links_from_c() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("libcdknlab_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let out = tempfile_path("cdk_smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let run = Command::new(&out).output().unwrap();
    assert!(run.status.success(), "smoke exited with {:?}", run.status.code());
    assert!(String::from_utf8_lossy(&run.stdout).ends_with("ok\n"));
    let _ = std::fs::remove_file(out);
}

fn tempfile_path(stem: &str) -> PathBuf {
    std::env::temp_dir().join(format!("{stem}_{}", std::process::id()))
}
