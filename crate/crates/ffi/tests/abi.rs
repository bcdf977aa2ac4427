use std::ffi::{CStr, CString};
use std::ptr;

use shade_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(shade_last_error()) }.to_string_lossy().into_owned()
}

fn mlp(inputs: usize, hidden: &[usize], classes: usize) -> *mut ShadeNetwork {
    let mut net = ptr::null_mut();
    let st = unsafe { shade_network_new_mlp(inputs, hidden.as_ptr(), hidden.len(), classes, 7, &mut net) };
    assert_eq!(st, ShadeStatus::Ok, "{}", last_error());
    assert!(!net.is_null());
    net
}

#[test]
fn network_lifecycle_and_predict() {
    let net = mlp(3, &[5, 4], 2);
    unsafe {
        assert_eq!(shade_network_input_len(net), 3);
        assert_eq!(shade_network_classes(net), 2);
        assert_eq!(shade_network_observed_layers(net), 2);
        let x = [0.1, -0.2, 0.3, 1.0, 0.0, -1.0];
        let mut logits = [f64::NAN; 4];
        assert_eq!(shade_network_predict(net, x.as_ptr(), 2, logits.as_mut_ptr(), 4), ShadeStatus::Ok);
        assert!(logits.iter().all(|v| v.is_finite()));
        let mut again = [0.0; 4];
        shade_network_predict(net, x.as_ptr(), 2, again.as_mut_ptr(), 4);
        assert_eq!(logits, again);

        assert_eq!(shade_network_predict(net, x.as_ptr(), 2, logits.as_mut_ptr(), 3), ShadeStatus::InvalidArgument);
        assert!(last_error().contains("4 needed"));
        shade_network_free(net);
    }
}

#[test]
fn null_pointers_are_reported() {
    unsafe {
        assert_eq!(shade_network_new_mlp(3, [2].as_ptr(), 1, 2, 0, ptr::null_mut()), ShadeStatus::NullPointer);
        assert!(last_error().contains("out"));
        let mut out = 0.0;
        assert_eq!(
            shade_regularizer_loss(ptr::null(), ptr::null(), ptr::null(), 0, &mut out),
            ShadeStatus::NullPointer
        );
        assert_eq!(shade_network_classes(ptr::null()), 0);
        shade_network_free(ptr::null_mut());
        shade_regularizer_free(ptr::null_mut());
        assert_eq!(shade_verify(ptr::null()), ShadeStatus::NullPointer);
    }
}

#[test]
fn invalid_network_maps_to_status() {
    let mut net = ptr::null_mut();
    let st = unsafe { shade_network_new_mlp(0, ptr::null(), 0, 2, 0, &mut net) };
    assert_ne!(st, ShadeStatus::Ok);
    assert!(net.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn regularizer_tracks_and_penalizes() {
    let net = mlp(2, &[3], 2);
    let mut reg = ptr::null_mut();
    unsafe {
        assert_eq!(shade_regularizer_new(net, 0.8, 1.0, &mut reg), ShadeStatus::Ok);
        let mut stats = [0.0; 4];
        assert_eq!(shade_regularizer_unit(reg, 0, 0, stats.as_mut_ptr()), ShadeStatus::Ok);
        assert_eq!(stats, [-1.0, 1.0, 0.5, 0.5]);
        assert_eq!(shade_regularizer_unit(reg, 0, 3, stats.as_mut_ptr()), ShadeStatus::InvalidArgument);

        let x = [0.5, -0.5, 1.0, 2.0, -1.0, 0.0];
        let mut before = 0.0;
        assert_eq!(shade_regularizer_loss(reg, net, x.as_ptr(), 3, &mut before), ShadeStatus::Ok);
        for _ in 0..50 {
            assert_eq!(shade_regularizer_update(reg, net, x.as_ptr(), 3), ShadeStatus::Ok);
        }
        let mut after = 0.0;
        shade_regularizer_loss(reg, net, x.as_ptr(), 3, &mut after);
        assert!(before >= 0.0 && after >= 0.0);
        assert!(after < before, "{after} vs {before}");
        shade_regularizer_unit(reg, 0, 0, stats.as_mut_ptr());
        assert!(((stats[2] + stats[3]) - 1.0).abs() < 1e-9);
        shade_regularizer_free(reg);
        shade_network_free(net);
    }
}

#[test]
fn unit_loss_values() {
    // y <= 0: all mass on the inactive mode.
    assert_eq!(shade_unit_loss(-1.0, -1.0, 1.0), 0.0);
    assert_eq!(shade_unit_loss(-3.0, -1.0, 1.0), 4.0);
    let y: f64 = 0.7;
    let p1 = 1.0 - (-y).exp();
    let expect = (1.0 - p1) * (y + 1.0).powi(2) + p1 * (y - 1.0).powi(2);
    assert!((shade_unit_loss(y, -1.0, 1.0) - expect).abs() < 1e-14);
    let h = 1e-6;
    let fd = (shade_unit_loss(y + h, -1.0, 1.0) - shade_unit_loss(y - h, -1.0, 1.0)) / (2.0 * h);
    assert!((shade_unit_loss_derivative(y, -1.0, 1.0) - fd).abs() < 1e-7);
}

#[test]
fn verify_scopes() {
    let ok = CString::new("bounds").unwrap();
    assert_eq!(unsafe { shade_verify(ok.as_ptr()) }, ShadeStatus::Ok);
    let bad = CString::new("everything").unwrap();
    assert_eq!(unsafe { shade_verify(bad.as_ptr()) }, ShadeStatus::InvalidArgument);
    assert!(last_error().contains("everything"));
}

#[test]
fn checkpoint_errors() {
    let missing = CString::new("/nonexistent/checkpoint.json").unwrap();
    let mut net = ptr::null_mut();
    let st = unsafe { shade_checkpoint_load(missing.as_ptr(), &mut net, ptr::null_mut()) };
    assert_eq!(st, ShadeStatus::Io);
    assert!(net.is_null());

    let dir = std::env::temp_dir().join(format!("shade-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.json");
    std::fs::write(&path, "{not json").unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { shade_checkpoint_load(c.as_ptr(), &mut net, ptr::null_mut()) }, ShadeStatus::Json);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn version_is_cargo_version() {
    let v = unsafe { CStr::from_ptr(shade_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_entry_point() {
    let header = include_str!("../include/shade.h");
    for name in [
        "shade_last_error",
        "shade_version",
        "shade_unit_loss",
        "shade_unit_loss_derivative",
        "shade_network_new_mlp",
        "shade_checkpoint_load",
        "shade_network_free",
        "shade_network_input_len",
        "shade_network_classes",
        "shade_network_observed_layers",
        "shade_network_predict",
        "shade_regularizer_new",
        "shade_regularizer_free",
        "shade_regularizer_update",
        "shade_regularizer_loss",
        "shade_regularizer_unit",
        "shade_verify",
    ] {
        assert!(header.contains(&format!("{name}(")), "missing {name}");
    }
    assert!(header.contains("typedef struct ShadeNetwork ShadeNetwork;"));
    assert!(header.contains("SHADE_STATUS_PANIC = 10"));
}
