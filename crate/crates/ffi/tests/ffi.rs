use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use reface::synth::{generate_synthetic, SyntheticSpec};
use reface_ffi::*;

fn last_error() -> String {
    let p = reface_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(reface_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn fuse_matches_weighted_sum() {
    let r = [0.9, 0.2, 0.0];
    let f = [0.1, 0.8, 0.5];
    let mut out = [0.0; 3];
    let s = unsafe { reface_fuse(r.as_ptr(), f.as_ptr(), 3, 0.75, out.as_mut_ptr()) };
    assert_eq!(s, RefaceStatus::Ok);
    for i in 0..3 {
        assert!((out[i] - (0.75 * r[i] + 0.25 * f[i])).abs() < 1e-12);
    }
    let s = unsafe { reface_fuse(r.as_ptr(), f.as_ptr(), 3, 1.5, out.as_mut_ptr()) };
    assert_eq!(s, RefaceStatus::InvalidArgument);
    assert!(last_error().contains("alpha"));
}

#[test]
fn null_pointers_are_reported() {
    let mut out = 0.0;
    let s = unsafe { reface_cosine_similarity(ptr::null(), ptr::null(), 2, &mut out) };
    assert_eq!(s, RefaceStatus::NullPointer);
    let u = [1.0, 0.0];
    let s = unsafe { reface_cosine_similarity(u.as_ptr(), u.as_ptr(), 2, &mut out) };
    assert_eq!(s, RefaceStatus::Ok);
    assert_eq!(out, 1.0);
    assert!(reface_last_error_message().is_null());
}

#[test]
fn face_inside_is_edge_inclusive() {
    let bbox = [0.0, 0.0, 10.0, 10.0];
    let (le, re, nose) = ([0.0, 0.0], [10.0, 10.0], [5.0, 5.0]);
    let mut inside = false;
    let s = unsafe {
        reface_face_inside(
            bbox.as_ptr(),
            le.as_ptr(),
            re.as_ptr(),
            nose.as_ptr(),
            &mut inside,
        )
    };
    assert_eq!(s, RefaceStatus::Ok);
    assert!(inside);
    let outside = [10.5, 5.0];
    let s = unsafe {
        reface_face_inside(
            bbox.as_ptr(),
            le.as_ptr(),
            outside.as_ptr(),
            nose.as_ptr(),
            &mut inside,
        )
    };
    assert_eq!(s, RefaceStatus::Ok);
    assert!(!inside);
}

#[test]
fn gallery_handle_scores_and_predicts() {
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(
            reface_gallery_new(RefaceModality::Reid, &mut g),
            RefaceStatus::Ok
        );
        let a = CString::new("A").unwrap();
        let b = CString::new("B").unwrap();
        let add = |label: &CString, id: &str, v: [f64; 2]| {
            let id = CString::new(id).unwrap();
            reface_gallery_add(g, label.as_ptr(), id.as_ptr(), v.as_ptr(), 2)
        };
        assert_eq!(add(&a, "a1", [1.0, 0.0]), RefaceStatus::Ok);
        assert_eq!(add(&a, "a2", [0.6, 0.8]), RefaceStatus::Ok);
        assert_eq!(add(&b, "b1", [0.0, 2.0]), RefaceStatus::Ok);
        assert_eq!(add(&b, "b2", [0.0, 0.0]), RefaceStatus::InvalidArgument);
        let three = [1.0, 0.0, 0.0];
        let id = CString::new("x").unwrap();
        assert_eq!(
            reface_gallery_add(g, a.as_ptr(), id.as_ptr(), three.as_ptr(), 3),
            RefaceStatus::InvalidArgument
        );

        let mut n = 0usize;
        assert_eq!(reface_gallery_len(g, &mut n), RefaceStatus::Ok);
        assert_eq!(n, 3);

        let q = [0.0, 1.0];
        let mut conf = 0.0;
        assert_eq!(
            reface_gallery_identity_confidence(g, a.as_ptr(), q.as_ptr(), 2, &mut conf),
            RefaceStatus::Ok
        );
        assert!((conf - 0.8).abs() < 1e-12);
        let missing = CString::new("Z").unwrap();
        assert_eq!(
            reface_gallery_identity_confidence(g, missing.as_ptr(), q.as_ptr(), 2, &mut conf),
            RefaceStatus::Ok
        );
        assert_eq!(conf, 0.0);

        let track = [0.0, 1.0, 0.6, 0.8];
        let mut label = ptr::null_mut();
        let mut score = 0.0;
        assert_eq!(
            reface_gallery_predict_track(g, track.as_ptr(), 2, 2, &mut label, &mut score),
            RefaceStatus::Ok
        );
        assert_eq!(CStr::from_ptr(label).to_str().unwrap(), "A");
        assert!((score - 0.9).abs() < 1e-12);
        reface_string_free(label);
        reface_gallery_free(g);
    }
}

#[test]
fn engine_annotates_and_evaluates_synthetic_data() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec {
        n_identities: 4,
        ..Default::default()
    };
    let ds = generate_synthetic(&spec, dir.path()).unwrap();
    let config = CString::new(ds.config_path.to_str().unwrap()).unwrap();
    let preds_path = dir.path().join("pred.jsonl");
    let preds = CString::new(preds_path.to_str().unwrap()).unwrap();
    unsafe {
        let mut engine = ptr::null_mut();
        assert_eq!(
            reface_engine_from_config(config.as_ptr(), &mut engine),
            RefaceStatus::Ok
        );
        assert_eq!(
            reface_engine_set_alpha(engine, 2.0),
            RefaceStatus::InvalidArgument
        );
        assert_eq!(
            reface_engine_annotate(engine, preds.as_ptr()),
            RefaceStatus::Ok
        );
        let mut json = ptr::null_mut();
        assert_eq!(
            reface_engine_evaluate(engine, preds.as_ptr(), &mut json),
            RefaceStatus::Ok
        );
        let report: serde_json::Value =
            serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(report["top1"], 1.0);
        reface_string_free(json);
        reface_engine_free(engine);
    }
}

#[test]
fn engine_reports_missing_config() {
    let path = CString::new("/nonexistent/reface.toml").unwrap();
    let mut engine = ptr::null_mut();
    let s = unsafe { reface_engine_from_config(path.as_ptr(), &mut engine) };
    assert_eq!(s, RefaceStatus::Io);
    assert!(engine.is_null());
    assert!(last_error().contains("reface.toml"));
}

#[test]
fn header_declares_every_entry_point_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/reface.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "reface_last_error_message",
        "reface_version",
        "reface_string_free",
        "reface_engine_from_config",
        "reface_engine_free",
        "reface_engine_set_alpha",
        "reface_engine_annotate",
        "reface_engine_evaluate",
        "reface_cosine_similarity",
        "reface_fuse",
        "reface_face_inside",
        "reface_gallery_new",
        "reface_gallery_free",
        "reface_gallery_add",
        "reface_gallery_len",
        "reface_gallery_identity_confidence",
        "reface_gallery_predict_track",
        "REFACE_STATUS_NULL_POINTER",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .status()
    else {
        eprintln!("no C compiler; skipping header compile check");
        return;
    };
    assert!(status.success());
}
