use std::ffi::{c_char, CStr};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use echo_lab_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    let n = unsafe { echo_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let s = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned();
    assert_eq!(n, s.len());
    s
}

fn small() -> EchoKrConfig {
    EchoKrConfig { n: 256, packets: 5, steps: 6, ..echo_kr_config_default() }
}

fn run(cfg: &EchoKrConfig) -> (EchoStatus, *mut EchoKrRun) {
    let mut out = ptr::null_mut();
    let status = unsafe { echo_kr_run(cfg, &mut out) };
    (status, out)
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(echo_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn run_exposes_curves_and_amplitudes() {
    let (status, r) = run(&small());
    assert_eq!(status, EchoStatus::Ok);
    unsafe {
        assert_eq!(echo_kr_len(r), 7);
        assert_eq!(echo_kr_packets(r), 5);
        let mut alleg = [0.0; 7];
        let mut avg = [0.0; 7];
        assert_eq!(echo_kr_allegiance(r, alleg.as_mut_ptr(), 7), EchoStatus::Ok);
        assert_eq!(echo_kr_avg_fidelity(r, avg.as_mut_ptr(), 7), EchoStatus::Ok);
        assert!((alleg[0] - 1.0).abs() < 1e-12 && (avg[0] - 1.0).abs() < 1e-12);
        assert!(alleg.iter().zip(&avg).all(|(a, b)| *a <= b + 1e-14));

        let (mut re, mut im) = (0.0, 0.0);
        assert_eq!(echo_kr_amplitude(r, 4, 6, &mut re, &mut im), EchoStatus::Ok);
        assert!(re * re + im * im <= 1.0 + 1e-12);
        assert_eq!(echo_kr_amplitude(r, 5, 0, &mut re, &mut im), EchoStatus::OutOfRange);
        assert_eq!(echo_kr_amplitude(r, 0, 7, &mut re, &mut im), EchoStatus::OutOfRange);
        assert!(last_error().contains("time index 7"));
        assert_eq!(echo_kr_amplitude(r, 0, 0, ptr::null_mut(), &mut im), EchoStatus::NullPointer);

        let mut short = [0.0; 6];
        assert_eq!(echo_kr_allegiance(r, short.as_mut_ptr(), 6), EchoStatus::BufferTooSmall);
        assert!(last_error().contains("need 7"));
        assert_eq!(echo_kr_allegiance(r, ptr::null_mut(), 7), EchoStatus::NullPointer);
        echo_kr_run_free(r);
    }
}

#[test]
fn zero_perturbation_echo_is_one() {
    let (status, r) = run(&EchoKrConfig { eps_over_hbar: 0.0, ..small() });
    assert_eq!(status, EchoStatus::Ok);
    let mut alleg = [0.0; 7];
    unsafe {
        echo_kr_allegiance(r, alleg.as_mut_ptr(), 7);
        echo_kr_run_free(r);
    }
    assert!(alleg.iter().all(|v| (v - 1.0).abs() < 1e-12));
}

#[test]
fn bad_inputs_map_to_status_codes() {
    let (status, r) = run(&EchoKrConfig { n: 0, ..small() });
    assert_eq!(status, EchoStatus::InvalidArgument);
    assert!(r.is_null());
    assert!(!last_error().is_empty());
    assert_eq!(run(&EchoKrConfig { packets: 0, ..small() }).0, EchoStatus::InvalidArgument);
    assert_eq!(run(&EchoKrConfig { p_min: 0.3, p_max: 0.1, ..small() }).0, EchoStatus::InvalidArgument);

    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(echo_kr_run(ptr::null(), &mut out), EchoStatus::NullPointer);
        assert!(last_error().contains("config"));
        assert_eq!(echo_kr_run(&small(), ptr::null_mut()), EchoStatus::NullPointer);
        assert_eq!(echo_kr_len(ptr::null()), 0);
        assert_eq!(echo_kr_packets(ptr::null()), 0);
        echo_kr_run_free(ptr::null_mut());
        // A null buffer still reports the message length.
        assert!(echo_last_error_message(ptr::null_mut(), 0) > 0);
    }
}

#[test]
fn error_message_truncates() {
    let _ = run(&EchoKrConfig { n: 0, ..small() });
    let full = last_error();
    let mut buf = [0 as c_char; 5];
    let n = unsafe { echo_last_error_message(buf.as_mut_ptr(), 5) };
    assert_eq!(n, full.len());
    assert_eq!(unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap(), &full[..4]);
}

#[test]
fn lyapunov_of_standard_map() {
    let mut l = 0.0;
    assert_eq!(unsafe { echo_lyapunov(10.0, 1000, 100_000, 3, &mut l) }, EchoStatus::Ok);
    assert!((l - 1.61).abs() < 0.05, "{l}");
    assert_eq!(unsafe { echo_lyapunov(10.0, 10, 100, 3, ptr::null_mut()) }, EchoStatus::NullPointer);
}

#[test]
fn exponential_fit() {
    let t: Vec<f64> = (0..=10).map(f64::from).collect();
    let y: Vec<f64> = t.iter().map(|t| 3.0 * (-0.8 * t).exp()).collect();
    let (mut rate, mut err) = (0.0, -1.0);
    let s = unsafe { echo_fit_exp_rate(t.as_ptr(), y.as_ptr(), t.len(), 0.0, 10.0, f64::NAN, &mut rate, &mut err) };
    assert_eq!(s, EchoStatus::Ok);
    assert!((rate - 0.8).abs() < 1e-10);
    assert!(err.abs() < 1e-8);
    let s = unsafe { echo_fit_exp_rate(t.as_ptr(), y.as_ptr(), t.len(), 0.0, 10.0, 1e-2, &mut rate, ptr::null_mut()) };
    assert_eq!(s, EchoStatus::Ok);
    assert!((rate - 0.8).abs() < 1e-10);
    let s = unsafe { echo_fit_exp_rate(t.as_ptr(), y.as_ptr(), t.len(), 20.0, 30.0, f64::NAN, &mut rate, ptr::null_mut()) };
    assert_eq!(s, EchoStatus::FitFailed);
}

/// `target/<profile>` of the running test binary.
fn profile_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_header_and_staticlib() {
    let lib = profile_dir().join("libecho_lab_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if !lib.exists() || Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include "echo_lab.h"
#include <stdio.h>
int main(void) {
    EchoKrConfig cfg = echo_kr_config_default();
    cfg.n = 128; cfg.packets = 3; cfg.steps = 4;
    EchoKrRun *run = NULL;
    if (echo_kr_run(&cfg, &run) != ECHO_STATUS_OK) return 1;
    double f[5];
    if (echo_kr_allegiance(run, f, 5) != ECHO_STATUS_OK) return 2;
    if (echo_kr_allegiance(run, f, 4) != ECHO_STATUS_BUFFER_TOO_SMALL) return 3;
    echo_kr_run_free(run);
    cfg.n = 0;
    if (echo_kr_run(&cfg, &run) != ECHO_STATUS_INVALID_ARGUMENT) return 4;
    char msg[128];
    echo_last_error_message(msg, sizeof msg);
    printf("%s %.6f\n", echo_version(), f[0]);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("smoke");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.trim(), format!("{} 1.000000", env!("CARGO_PKG_VERSION")));
}
