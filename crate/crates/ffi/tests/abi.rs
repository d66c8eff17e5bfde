use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use qthermo_ffi::*;

fn diag(d: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut m = vec![0.0; 2 * n * n];
    for (i, v) in d.iter().enumerate() {
        m[2 * (i * n + i)] = *v;
    }
    m
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(qt_last_error()) }.to_str().unwrap().to_owned()
}

#[test]
fn model_state_and_entropy() {
    unsafe {
        let h = diag(&[0.0, 1.0, 2.0]);
        let mut model = ptr::null_mut();
        assert_eq!(qt_model_new(3, h.as_ptr(), 0, ptr::null(), &mut model), QtStatus::Ok);
        assert_eq!(qt_model_dim(model), 3);

        let rho = diag(&[0.5, 0.3, 0.2]);
        let mut s = ptr::null_mut();
        assert_eq!(qt_state_new(3, rho.as_ptr(), &mut s), QtStatus::Ok);
        let mut ent = 0.0;
        assert_eq!(qt_entropy(s, 1.0, &mut ent), QtStatus::Ok);
        let expected: f64 = [0.5_f64, 0.3, 0.2].iter().map(|p| -p * p.ln()).sum();
        assert!((ent - expected).abs() < 1e-14);
        let mut e = 0.0;
        assert_eq!(qt_expectation(s, h.as_ptr(), &mut e), QtStatus::Ok);
        assert!((e - 0.7).abs() < 1e-14);

        let mut back = vec![0.0; 18];
        assert_eq!(qt_state_matrix(s, back.as_mut_ptr(), back.len()), QtStatus::Ok);
        assert_eq!(back, rho);
        assert_eq!(qt_state_matrix(s, back.as_mut_ptr(), 4), QtStatus::InvalidInput);

        qt_state_free(s);
        qt_model_free(model);
    }
}

#[test]
fn invalid_inputs_report_codes_and_messages() {
    unsafe {
        let not_state = diag(&[0.7, 0.7]);
        let mut s = ptr::null_mut();
        assert_eq!(qt_state_new(2, not_state.as_ptr(), &mut s), QtStatus::InvalidInput);
        assert!(s.is_null());
        assert!(last_error().contains("trace"), "{}", last_error());

        let mut h = diag(&[0.0, 1.0]);
        h[2] = 1.0;
        let mut model = ptr::null_mut();
        assert_eq!(qt_model_new(2, h.as_ptr(), 0, ptr::null(), &mut model), QtStatus::InvalidInput);
        assert!(last_error().contains("Hermitian"));

        assert_eq!(qt_model_new(2, ptr::null(), 0, ptr::null(), &mut model), QtStatus::NullPointer);
        assert_eq!(qt_entropy(ptr::null(), 1.0, &mut 0.0), QtStatus::NullPointer);

        let ok = diag(&[0.0, 1.0]);
        assert_eq!(qt_model_new(2, ok.as_ptr(), 0, ptr::null(), &mut model), QtStatus::Ok);
        assert!(last_error().is_empty());
        let mut g = ptr::null_mut();
        assert_eq!(qt_solve_gibbs(model, 5.0, ptr::null(), 0, &mut g, ptr::null_mut()), QtStatus::Solver);
        qt_model_free(model);
    }
}

#[test]
fn gibbs_solution_is_stationary() {
    unsafe {
        let h = diag(&[0.0, 1.0, 2.0]);
        let mut model = ptr::null_mut();
        qt_model_new(3, h.as_ptr(), 0, ptr::null(), &mut model);
        let mut g = ptr::null_mut();
        let mut beta = 0.0;
        assert_eq!(qt_solve_gibbs(model, 0.9, ptr::null(), 0, &mut g, &mut beta), QtStatus::Ok);
        let mut direct = ptr::null_mut();
        assert_eq!(qt_state_gibbs(model, beta, ptr::null(), 0, &mut direct), QtStatus::Ok);
        let mut dist = 1.0;
        qt_trace_distance(g, direct, &mut dist);
        assert!(dist < 1e-12);

        let mut sea = ptr::null_mut();
        assert_eq!(qt_dynamics_new(QtDynamicsKind::SeaSingle, ptr::null(), 0, &mut sea), QtStatus::Ok);
        let mut m = vec![1.0; 18];
        assert_eq!(qt_motion(model, sea, g, m.as_mut_ptr(), m.len()), QtStatus::Ok);
        assert!(m.iter().all(|v| v.abs() < 1e-10));

        qt_dynamics_free(sea);
        qt_state_free(direct);
        qt_state_free(g);
        qt_model_free(model);
    }
}

#[test]
fn propagation_keeps_energy_and_exports_csv() {
    unsafe {
        let h = diag(&[0.0, 1.0, 2.0]);
        let mut model = ptr::null_mut();
        qt_model_new(3, h.as_ptr(), 0, ptr::null(), &mut model);
        let rho = diag(&[0.3, 0.5, 0.2]);
        let mut s = ptr::null_mut();
        qt_state_new(3, rho.as_ptr(), &mut s);
        let tau = [2.0];
        let mut sea = ptr::null_mut();
        qt_dynamics_new(QtDynamicsKind::SeaSingle, tau.as_ptr(), 1, &mut sea);
        let mut traj = ptr::null_mut();
        assert_eq!(qt_propagate(model, sea, s, 10.0, 20, 0.0, 0.0, false, &mut traj), QtStatus::Ok);
        assert_eq!(qt_trajectory_len(traj), 21);
        let mut t = 0.0;
        let mut end = ptr::null_mut();
        assert_eq!(qt_trajectory_sample(traj, 20, &mut t, &mut end), QtStatus::Ok);
        assert!((t - 10.0).abs() < 1e-12);
        let mut e = 0.0;
        qt_expectation(end, h.as_ptr(), &mut e);
        assert!((e - 0.9).abs() < 1e-8);
        let (mut s0, mut s1) = (0.0, 0.0);
        qt_entropy(s, 1.0, &mut s0);
        qt_entropy(end, 1.0, &mut s1);
        assert!(s1 > s0);
        assert_eq!(qt_trajectory_sample(traj, 21, &mut t, ptr::null_mut()), QtStatus::InvalidInput);

        let mut csv = ptr::null_mut();
        assert_eq!(qt_trajectory_csv(traj, &mut csv), QtStatus::Ok);
        let text = CStr::from_ptr(csv).to_str().unwrap().to_owned();
        qt_string_free(csv);
        assert_eq!(text.lines().count(), 22);

        assert_eq!(qt_propagate(model, sea, s, -1.0, 20, 0.0, 0.0, false, &mut traj), QtStatus::InvalidConfig);

        qt_state_free(end);
        qt_trajectory_free(traj);
        qt_dynamics_free(sea);
        qt_state_free(s);
        qt_model_free(model);
    }
}

#[test]
fn composite_model_from_parts() {
    unsafe {
        let ha = diag(&[0.0, 1.0]);
        let hb = diag(&[0.0, 1.5]);
        let mut model = ptr::null_mut();
        assert_eq!(qt_model_noninteracting(2, ha.as_ptr(), 2, hb.as_ptr(), &mut model), QtStatus::Ok);
        assert_eq!(qt_model_dim(model), 4);
        let mut spec = ptr::null_mut();
        let tau = [1.0, 0.5];
        assert_eq!(qt_dynamics_new(QtDynamicsKind::SeaComposite, tau.as_ptr(), 2, &mut spec), QtStatus::Ok);
        let rho = diag(&[0.4, 0.3, 0.2, 0.1]);
        let mut s = ptr::null_mut();
        qt_state_new(4, rho.as_ptr(), &mut s);
        let mut m = vec![0.0; 32];
        assert_eq!(qt_motion(model, spec, s, m.as_mut_ptr(), m.len()), QtStatus::Ok);
        qt_state_free(s);
        qt_dynamics_free(spec);
        qt_model_free(model);
    }
}

#[test]
fn scenario_json_round_trip() {
    let doc = CString::new(
        r#"{"id": "ffi", "system": {"H": [[1, 0], [0, -1]]},
            "initial_state": [[0.6, 0.1], [0.1, 0.4]],
            "dynamics": {"kind": "sea_single"},
            "integration": {"t_final": 5, "samples": 20},
            "checks": [1, 2, 5]}"#,
    )
    .unwrap();
    unsafe {
        let mut report = ptr::null_mut();
        let mut passed = false;
        assert_eq!(qt_run_scenario_json(doc.as_ptr(), ptr::null(), &mut report, &mut passed), QtStatus::Ok);
        assert!(passed);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(report).to_str().unwrap()).unwrap();
        assert!(v.is_object());
        qt_string_free(report);

        let bad = CString::new(r#"{"id": "x", "system": {}}"#).unwrap();
        let status = qt_run_scenario_json(bad.as_ptr(), ptr::null(), &mut report, ptr::null_mut());
        assert_eq!(status, QtStatus::Scenario);
        assert!(report.is_null());
        let profile = CString::new("bogus").unwrap();
        let status = qt_run_scenario_json(doc.as_ptr(), profile.as_ptr(), &mut report, ptr::null_mut());
        assert_eq!(status, QtStatus::InvalidConfig);
    }
}

fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn generated_header_is_current() {
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/qthermo.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in [
        "qt_model_new",
        "qt_state_new",
        "qt_entropy",
        "qt_expectation",
        "qt_solve_gibbs",
        "qt_motion",
        "qt_propagate",
        "qt_run_scenario_json",
        "qt_string_free",
        "QT_STATUS_OK",
        "typedef struct QtModel QtModel;",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
}

#[test]
fn c_program_links_against_static_library() {
    let dir = artifact_dir();
    let lib = dir.join("libqthermo_ffi.a");
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // Test builds only produce the rlib; build the static archive for the
    // same profile.
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let mut build = Command::new(cargo);
    build.args(["build", "--lib", "-p", "qthermo-ffi"]).current_dir(&manifest);
    if dir.file_name().is_some_and(|n| n == "release") {
        build.arg("--release");
    }
    assert!(build.status().unwrap().success());
    assert!(lib.exists(), "{} not built", lib.display());
    let work = tempfile::tempdir().unwrap();
    let exe = work.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
}
