use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use bjj_ffi::*;

fn params(n: usize, u: f64) -> BjjParams {
    BjjParams {
        n,
        epsilon: 0.0,
        j: 1.0,
        u,
    }
}

fn last_error() -> String {
    let p = bjj_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn characteristics_match_core() {
    let p = params(50, 0.25);
    let mut out = std::mem::MaybeUninit::<BjjCharacteristics>::uninit();
    let s = unsafe { bjj_characteristics(&p, out.as_mut_ptr()) };
    assert_eq!(s, BjjStatus::Ok);
    let c = unsafe { out.assume_init() };
    assert!((c.xi - 1.9168).abs() < 1e-4);
    assert!((c.omega_j - 3.6742).abs() < 1e-4);
    assert_eq!(c.regime, BjjRegime::Josephson);
    assert!(bjj_last_error().is_null());
}

#[test]
fn null_and_invalid_inputs_report_codes() {
    let mut g = 0.0;
    assert_eq!(unsafe { bjj_ground_g1(ptr::null(), &mut g) }, BjjStatus::NullPointer);
    assert!(last_error().contains("params"));

    let p = params(10, -1.0);
    assert_eq!(unsafe { bjj_ground_g1(&p, &mut g) }, BjjStatus::InvalidArgument);
    assert!(last_error().contains('U'), "{}", last_error());

    let p = params(10, 0.1);
    assert_eq!(unsafe { bjj_ground_g1(&p, ptr::null_mut()) }, BjjStatus::NullPointer);
}

#[test]
fn ground_and_thermal_coherence() {
    let p = params(50, 0.25);
    let (mut g0, mut gt) = (0.0, 0.0);
    assert_eq!(unsafe { bjj_ground_g1(&p, &mut g0) }, BjjStatus::Ok);
    assert_eq!(unsafe { bjj_thermal_g1(&p, 1.0, &mut gt) }, BjjStatus::Ok);
    assert!(g0 > 0.95 && g0 < 1.0, "{g0}");
    assert!(gt < g0, "{gt} {g0}");
}

#[test]
fn evolution_handle_round_trip() {
    let p = params(20, 0.1);
    let noise = BjjNoise {
        gamma3: 0.05,
        ..Default::default()
    };
    let mut h: *mut BjjEvolution = ptr::null_mut();
    assert_eq!(unsafe { bjj_evolve(&p, &noise, 2.0, 10, 1e-9, &mut h) }, BjjStatus::Ok);
    let len = unsafe { bjj_evolution_len(h) };
    assert_eq!(len, 11);
    let mut t = vec![0.0; len];
    let mut g1 = vec![0.0; len];
    let mut gamma = vec![0.0; len];
    unsafe {
        assert_eq!(bjj_evolution_column(h, BjjColumn::Time, t.as_mut_ptr(), len), BjjStatus::Ok);
        assert_eq!(bjj_evolution_column(h, BjjColumn::G1, g1.as_mut_ptr(), len), BjjStatus::Ok);
        assert_eq!(bjj_evolution_column(h, BjjColumn::Gamma, gamma.as_mut_ptr(), len), BjjStatus::Ok);
        assert_eq!(
            bjj_evolution_column(h, BjjColumn::G1, g1.as_mut_ptr(), len - 1),
            BjjStatus::InvalidArgument
        );
    }
    assert_eq!(t[0], 0.0);
    assert!((t[len - 1] - 2.0).abs() < 1e-12);
    assert!(g1[len - 1] < g1[0]);
    assert!(gamma[len / 2] > 0.0);
    unsafe { bjj_evolution_free(h) };
    unsafe { bjj_evolution_free(ptr::null_mut()) };
    assert_eq!(unsafe { bjj_evolution_len(ptr::null()) }, 0);
}

#[test]
fn evolve_rejects_bad_grid() {
    let p = params(4, 0.1);
    let noise = BjjNoise::default();
    let mut h: *mut BjjEvolution = ptr::null_mut();
    assert_eq!(unsafe { bjj_evolve(&p, &noise, -1.0, 10, 1e-9, &mut h) }, BjjStatus::InvalidArgument);
    assert!(h.is_null());
}

#[test]
fn ensemble_is_seeded() {
    let p = params(50, 0.25);
    let noise = BjjNoise {
        gamma3: 0.02,
        ..Default::default()
    };
    let run = |seed| {
        let mut h: *mut BjjEnsemble = ptr::null_mut();
        assert_eq!(unsafe { bjj_semiclassical(&p, &noise, 1.0, 4, 500, seed, &mut h) }, BjjStatus::Ok);
        let len = unsafe { bjj_ensemble_len(h) };
        let mut direct = vec![0.0; len];
        let mut gauss = vec![0.0; len];
        let s = unsafe { bjj_ensemble_coherence(h, ptr::null_mut(), direct.as_mut_ptr(), gauss.as_mut_ptr(), len) };
        assert_eq!(s, BjjStatus::Ok);
        unsafe { bjj_ensemble_free(h) };
        (direct, gauss)
    };
    let a = run(3);
    assert_eq!(a, run(3));
    assert_ne!(a.0, run(4).0);
    assert_eq!(a.0.len(), 5);
}

#[test]
fn fock_regime_ensemble_is_invalid() {
    let p = params(4, 10.0);
    let mut h: *mut BjjEnsemble = ptr::null_mut();
    let s = unsafe { bjj_semiclassical(&p, &BjjNoise::default(), 1.0, 2, 10, 0, &mut h) };
    assert_eq!(s, BjjStatus::InvalidArgument);
    assert!(last_error().contains("Fock"));
}

#[test]
fn trap_analysis_defaults_to_rubidium() {
    let spec = BjjTrapSpec {
        d: 5e-6,
        v0: 470.0,
        omega_x: 2.0 * std::f64::consts::PI * 200.0,
        omega_perp: 2.0 * std::f64::consts::PI * 500.0,
        n: 200,
        mass: 0.0,
        a_s: 0.0,
    };
    let mut out = BjjTrapResult::default();
    assert_eq!(unsafe { bjj_trap_analyze(&spec, 1024, &mut out) }, BjjStatus::Ok);
    assert!(out.mu_parallel > 380.0 && out.mu_parallel < 470.0, "{}", out.mu_parallel);
    assert!(out.j > 0.0 && out.u > 0.0);

    let bad = BjjTrapSpec { d: -1.0, ..spec };
    assert_eq!(unsafe { bjj_trap_analyze(&bad, 1024, &mut out) }, BjjStatus::InvalidArgument);
}

#[test]
fn lifetime_fit_recovers_coefficient() {
    let z: Vec<f64> = [3.0, 5.0, 8.0, 13.0, 21.0].iter().map(|u| u * 1e-6).collect();
    let c = 65e-12;
    let tau: Vec<f64> = z.iter().map(|z| z * z / c).collect();
    let sigma: Vec<f64> = tau.iter().map(|t| 0.05 * t).collect();
    let mut out = BjjLifetimeFit::default();
    let s = unsafe { bjj_lifetime_fit(z.as_ptr(), tau.as_ptr(), sigma.as_ptr(), z.len(), &mut out) };
    assert_eq!(s, BjjStatus::Ok);
    assert!((out.c_total / c - 1.0).abs() < 1e-9);
    assert!((out.slope_free - 2.0).abs() < 1e-9);

    let s = unsafe { bjj_lifetime_fit(z.as_ptr(), tau.as_ptr(), sigma.as_ptr(), 2, &mut out) };
    assert_eq!(s, BjjStatus::InvalidArgument);
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/bjj.h");
    assert!(header.exists());
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("use.c");
    std::fs::write(
        &src,
        r#"#include "bjj.h"
int use(void) {
    BjjParams p = {50, 0.0, 1.0, 0.25};
    BjjNoise n = {0};
    BjjEvolution *h = NULL;
    double g;
    if (bjj_ground_g1(&p, &g) != BJJ_STATUS_OK) return 1;
    if (bjj_evolve(&p, &n, 1.0, 4, 1e-9, &h) != BJJ_STATUS_OK) return (int)bjj_last_error()[0];
    double buf[5];
    bjj_evolution_column(h, BJJ_COLUMN_G1, buf, bjj_evolution_len(h));
    bjj_evolution_free(h);
    return 0;
}
"#,
    )
    .unwrap();
    for (compiler, extra) in [("cc", &["-std=c99"][..]), ("c++", &["-x", "c++", "-std=c++11"][..])] {
        let out = Command::new(compiler)
            .args(extra)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-I"])
            .arg(dir.join("include"))
            .arg(&src)
            .output()
            .expect("C compiler available");
        assert!(out.status.success(), "{compiler}: {}", String::from_utf8_lossy(&out.stderr));
    }
}
