use std::ffi::{CStr, CString};
use std::ptr;

use tdl_ffi::*;

fn last_error() -> String {
    let p = tdl_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn identity_metric_distance_and_entries() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(tdl_metric_identity(2, &mut m), TdlStatus::Ok);
        assert_eq!(tdl_metric_dim(m), 2);
        let (x, y) = ([3.0, 4.0], [0.0, 0.0]);
        let mut d = 0.0;
        assert_eq!(tdl_metric_distance(m, x.as_ptr(), y.as_ptr(), 2, &mut d), TdlStatus::Ok);
        assert_eq!(d, 25.0);
        let mut e = [9.0; 4];
        assert_eq!(tdl_metric_entries(m, e.as_mut_ptr(), 4), TdlStatus::Ok);
        assert_eq!(e, [1.0, 0.0, 0.0, 1.0]);
        assert_eq!(tdl_metric_entries(m, e.as_mut_ptr(), 3), TdlStatus::InvalidInput);
        assert!(last_error().contains("need 4"));
        tdl_metric_free(m);
    }
}

#[test]
fn from_entries_rejects_indefinite_and_nan() {
    unsafe {
        let mut m = ptr::null_mut();
        let bad = [1.0, 0.0, 0.0, -1.0];
        assert_eq!(tdl_metric_from_entries(bad.as_ptr(), 2, &mut m), TdlStatus::Numerical);
        assert!(m.is_null());
        let nan = [f64::NAN, 0.0, 0.0, 1.0];
        assert_ne!(tdl_metric_from_entries(nan.as_ptr(), 2, &mut m), TdlStatus::Ok);
        let good = [2.0, 1.0, 1.0, 2.0];
        assert_eq!(tdl_metric_from_entries(good.as_ptr(), 2, &mut m), TdlStatus::Ok);
        let (x, y) = ([1.0, 0.0], [0.0, 0.0]);
        let mut d = 0.0;
        tdl_metric_distance(m, x.as_ptr(), y.as_ptr(), 2, &mut d);
        assert_eq!(d, 2.0);
        tdl_metric_free(m);
    }
}

#[test]
fn null_pointers_are_reported_not_dereferenced() {
    unsafe {
        assert_eq!(tdl_metric_identity(2, ptr::null_mut()), TdlStatus::NullPointer);
        let mut d = 0.0;
        let x = [0.0];
        assert_eq!(
            tdl_metric_distance(ptr::null(), x.as_ptr(), x.as_ptr(), 1, &mut d),
            TdlStatus::NullPointer
        );
        assert_eq!(tdl_metric_dim(ptr::null()), 0);
        assert_eq!(tdl_dataset_len(ptr::null()), 0);
        tdl_metric_free(ptr::null_mut());
        tdl_dataset_free(ptr::null_mut());
        let mut m = ptr::null_mut();
        assert_eq!(tdl_metric_load(ptr::null(), &mut m), TdlStatus::NullPointer);
        assert!(last_error().contains("path"));
    }
}

#[test]
fn success_clears_last_error() {
    unsafe {
        assert_eq!(tdl_metric_identity(0, &mut ptr::null_mut()), TdlStatus::InvalidInput);
        assert!(!tdl_last_error_message().is_null());
        let mut m = ptr::null_mut();
        assert_eq!(tdl_metric_identity(1, &mut m), TdlStatus::Ok);
        assert!(tdl_last_error_message().is_null());
        tdl_metric_free(m);
    }
}

#[test]
fn rank_gallery_breaks_ties_by_index() {
    unsafe {
        let mut m = ptr::null_mut();
        tdl_metric_identity(1, &mut m);
        let probe = [0.0];
        let gallery = [3.0, -1.0, 2.0, 1.0];
        let mut order = [0usize; 4];
        assert_eq!(
            tdl_rank_gallery(m, probe.as_ptr(), gallery.as_ptr(), 4, 1, order.as_mut_ptr()),
            TdlStatus::Ok
        );
        assert_eq!(order, [1, 3, 2, 0]);
        tdl_metric_free(m);
    }
}

#[test]
fn save_load_round_trip_and_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.tdlm").to_str().unwrap()).unwrap();
    unsafe {
        let mut m = ptr::null_mut();
        let e = [2.0, 0.5, 0.5, 1.0];
        tdl_metric_from_entries(e.as_ptr(), 2, &mut m);
        assert_eq!(tdl_metric_save(m, path.as_ptr()), TdlStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(tdl_metric_load(path.as_ptr(), &mut back), TdlStatus::Ok);
        let mut out = [0.0; 4];
        tdl_metric_entries(back, out.as_mut_ptr(), 4);
        assert_eq!(out, e);
        tdl_metric_free(m);
        tdl_metric_free(back);

        let missing = CString::new(dir.path().join("none.tdlm").to_str().unwrap()).unwrap();
        assert_eq!(tdl_metric_load(missing.as_ptr(), &mut back), TdlStatus::Io);
        assert!(last_error().contains("none.tdlm"));
        std::fs::write(dir.path().join("junk.tdlm"), b"TDLMxx").unwrap();
        let junk = CString::new(dir.path().join("junk.tdlm").to_str().unwrap()).unwrap();
        assert_eq!(tdl_metric_load(junk.as_ptr(), &mut back), TdlStatus::Format);
    }
}

#[test]
fn psd_projection_clamps_negative_eigenvalues() {
    let input = [2.0, 0.0, 0.0, -1.0];
    let mut out = [0.0; 4];
    unsafe {
        assert_eq!(tdl_psd_project(input.as_ptr(), 2, out.as_mut_ptr()), TdlStatus::Ok);
    }
    for (o, e) in out.iter().zip([2.0, 0.0, 0.0, 0.0]) {
        assert!((o - e).abs() < 1e-12);
    }
    let mut inplace = [1.0, 2.0, 2.0, 1.0];
    let p = inplace.as_mut_ptr();
    unsafe {
        assert_eq!(tdl_psd_project(p, 2, p), TdlStatus::Ok);
    }
    for (o, e) in inplace.iter().zip([1.5, 1.5, 1.5, 1.5]) {
        assert!((o - e).abs() < 1e-12);
    }
}

#[test]
fn dataset_train_shrinks_positive_distances() {
    let pid = |s: &str| CString::new(s).unwrap();
    let rows: [([f64; 2], &str, &str); 6] = [
        ([0.0, 0.0], "a", "c1"),
        ([0.2, 0.0], "a", "c2"),
        ([5.0, 0.0], "b", "c1"),
        ([5.2, 0.1], "b", "c2"),
        ([0.0, 5.0], "c", "c1"),
        ([0.1, 5.2], "c", "c2"),
    ];
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(tdl_dataset_new(&mut ds), TdlStatus::Ok);
        for (x, p, c) in &rows {
            let (p, c) = (pid(p), pid(c));
            assert_eq!(tdl_dataset_push(ds, x.as_ptr(), 2, p.as_ptr(), c.as_ptr()), TdlStatus::Ok);
        }
        assert_eq!(tdl_dataset_len(ds), 6);
        let three = [0.0; 3];
        let (p, c) = (pid("d"), pid("c1"));
        assert_eq!(tdl_dataset_push(ds, three.as_ptr(), 3, p.as_ptr(), c.as_ptr()), TdlStatus::InvalidInput);

        let cfg = TdlTrainConfig { max_iters: 50, ..tdl_train_config_default() };
        assert_eq!(cfg.alpha, 0.1);
        assert_eq!(cfg.rho, 1.0);
        let mut m = ptr::null_mut();
        let mut summary = TdlTrainSummary::default();
        assert_eq!(tdl_train(ds, &cfg, &mut m, &mut summary), TdlStatus::Ok);
        assert!(summary.final_loss < summary.initial_loss);
        assert!(summary.iters_run <= 50);
        let mut d = 0.0;
        tdl_metric_distance(m, rows[0].0.as_ptr(), rows[1].0.as_ptr(), 2, &mut d);
        assert!(d < 0.04);
        tdl_metric_free(m);

        let bad = TdlTrainConfig { alpha: 2.0, ..cfg };
        assert_eq!(tdl_train(ds, &bad, &mut m, ptr::null_mut()), TdlStatus::Config);
        tdl_dataset_free(ds);

        let mut single = ptr::null_mut();
        tdl_dataset_new(&mut single);
        let (p, c) = (pid("a"), pid("c1"));
        tdl_dataset_push(single, rows[0].0.as_ptr(), 2, p.as_ptr(), c.as_ptr());
        tdl_dataset_push(single, rows[1].0.as_ptr(), 2, p.as_ptr(), c.as_ptr());
        assert_eq!(tdl_train(single, &cfg, &mut m, ptr::null_mut()), TdlStatus::Protocol);
        tdl_dataset_free(single);
    }
}

#[test]
fn status_names_and_version() {
    let name = unsafe { CStr::from_ptr(tdl_status_name(TdlStatus::Io)) };
    assert_eq!(name.to_str().unwrap(), "I/O error");
    let v = unsafe { CStr::from_ptr(tdl_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
