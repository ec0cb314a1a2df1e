use std::path::Path;
use std::process::Command;

use echo_lab::harness::config::{ExperimentConfig, ExperimentKind};
use echo_lab::harness::csv::Table;
use echo_lab::harness::run::{plot_csv, run_experiment};
use echo_lab::Error;

const BIN: &str = env!("CARGO_BIN_EXE_echo-lab");

fn small_echo(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::parse("kind = kr_echo\nN = 512\npackets = 8\nsteps = 12\nplateau_from = 8\n").unwrap();
    cfg.set("output_dir", dir.to_str().unwrap()).unwrap();
    cfg
}

#[test]
fn config_parsing() {
    let cfg = ExperimentConfig::parse("# comment\nkind = kr_echo\n\nK = 7.5   # trailing\n").unwrap();
    assert_eq!(cfg.kind, ExperimentKind::KrEcho);
    assert_eq!(cfg.f64("K").unwrap(), 7.5);
    assert_eq!(cfg.usize("N").unwrap(), 8192);
    assert!(matches!(ExperimentConfig::parse("kind = kr_echo\nbogus = 1\n"), Err(Error::Config(_))));
    assert!(ExperimentConfig::parse("K = 1\n").is_err());
    assert!(ExperimentConfig::parse("kind = nope\n").is_err());
    assert!(ExperimentConfig::parse("kind = kr_echo\nK 1\n").is_err());
    let mut cfg = cfg;
    assert!(cfg.set("kind", "glauber_roundtrip").is_err());
    cfg.set("N", "1e3").unwrap();
    assert_eq!(cfg.usize("N").unwrap(), 1000);
    cfg.set("N", "2.5").unwrap();
    assert!(cfg.usize("N").is_err());
}

#[test]
fn every_kind_has_a_config() {
    for kind in ["kr_echo", "kr_classical", "osc_classical", "osc_allegiance", "osc_semiclassical", "glauber_roundtrip"] {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{kind}.conf"));
        let cfg = ExperimentConfig::load(&path, &[]).unwrap();
        assert_eq!(cfg.kind.name(), kind);
    }
}

#[test]
fn overrides_apply_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.conf");
    std::fs::write(&path, "kind = kr_echo\nK = 3\n").unwrap();
    let cfg = ExperimentConfig::load(&path, &["K=4".into(), "K = 5".into()]).unwrap();
    assert_eq!(cfg.f64("K").unwrap(), 5.0);
    assert!(ExperimentConfig::load(&path, &["nonsense".into()]).is_err());
    assert!(ExperimentConfig::load(&path, &["typo=1".into()]).is_err());
}

#[test]
fn manifest_reproduces_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(ExperimentKind::GlauberRoundtrip);
    cfg.set("output_dir", dir.path().to_str().unwrap()).unwrap();
    cfg.set("plot", "false").unwrap();
    run_experiment(&cfg).unwrap();
    let manifest = std::fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.starts_with(&format!("# echo-lab {}", env!("CARGO_PKG_VERSION"))));
    assert_eq!(ExperimentConfig::parse(&manifest).unwrap(), cfg);
}

#[test]
fn csv_round_trip_is_exact() {
    let cols = vec![vec![0.0, 1.0, 2.0], vec![0.1, 1.0 / 3.0, f64::NAN], vec![-1e-300, 6.02e23, std::f64::consts::PI]];
    let t = Table::from_columns(&["t", "a", "b"], cols.clone()).unwrap();
    let text = t.to_csv();
    assert!(text.starts_with("t,a,b\n"));
    let back = Table::parse(&text).unwrap();
    assert_eq!(back.header, t.header);
    for (x, y) in back.columns.iter().flatten().zip(cols.iter().flatten()) {
        assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()));
    }
    assert!(Table::from_columns(&["t", "a"], vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    assert!(Table::parse("t,a\n1,2,3\n").is_err());
}

#[test]
fn echo_run_is_bit_reproducible_across_thread_counts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut one = small_echo(a.path());
    one.set("threads", "1").unwrap();
    let mut four = small_echo(b.path());
    four.set("threads", "4").unwrap();
    let ra = run_experiment(&one).unwrap();
    let rb = run_experiment(&four).unwrap();
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(read(a.path(), "curves.csv"), read(b.path(), "curves.csv"));
    assert_eq!(read(a.path(), "echo_amplitudes.csv"), read(b.path(), "echo_amplitudes.csv"));
    assert_eq!(ra.values, rb.values);
    assert!(a.path().join("plot.svg").exists() && a.path().join("report.txt").exists());
    assert!(ra.flags.iter().all(|f| (1..=12).contains(&f.criterion)));
}

#[test]
fn rerun_from_manifest_is_bit_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&small_echo(a.path())).unwrap();
    let set = format!("output_dir={}", b.path().display());
    let again = ExperimentConfig::load(&a.path().join("manifest.txt"), &[set]).unwrap();
    run_experiment(&again).unwrap();
    let read = |d: &Path| std::fs::read(d.join("curves.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn glauber_run_is_reproducible_and_passes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let run = |d: &Path| {
        let mut cfg = ExperimentConfig::new(ExperimentKind::GlauberRoundtrip);
        cfg.set("output_dir", d.to_str().unwrap()).unwrap();
        run_experiment(&cfg).unwrap()
    };
    let ra = run(a.path());
    run(b.path());
    assert_eq!(std::fs::read(a.path().join("curves.csv")).unwrap(), std::fs::read(b.path().join("curves.csv")).unwrap());
    assert!(ra.all_passed(), "{}", ra.to_text());
    assert!(ra.to_text().contains("acceptance.11."));
}

#[test]
fn plotting_leaves_csv_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("decay.csv");
    let t: Vec<f64> = (0..=20).map(f64::from).collect();
    let y: Vec<f64> = t.iter().map(|t| (-0.7 * t).exp()).collect();
    std::fs::write(&path, Table::from_columns(&["t", "y"], vec![t, y]).unwrap().to_csv()).unwrap();
    let before = std::fs::read(&path).unwrap();
    let svg = plot_csv(&path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), before);
    let text = std::fs::read_to_string(svg).unwrap();
    assert!(text.starts_with("<svg") || text.starts_with("<?xml"));
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(BIN).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn cli_run_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let conf = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/glauber_roundtrip.conf");
    let out_dir = dir.path().join("g");
    let set = format!("output_dir={}", out_dir.display());
    let (code, stdout, _) = cli(&["run", conf.to_str().unwrap(), "--set", &set]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("= pass"));
    assert!(out_dir.join("report.txt").exists());

    let echo = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/kr_echo.conf");
    let set = format!("output_dir={}", dir.path().join("e").display());
    let (code, stdout, _) = cli(&[
        "run",
        echo.to_str().unwrap(),
        "--set",
        &set,
        "--set",
        "N=512",
        "--set",
        "packets=4",
        "--set",
        "steps=10",
        "--set",
        "eps_over_hbar=0.01",
        "--set",
        "plateau_from=5",
    ]);
    assert_eq!(code, 1, "{stdout}");
    assert!(stdout.contains("= fail"));

    let (code, _, stderr) = cli(&["run", conf.to_str().unwrap(), "--set", "no_such_key=1"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("unknown key"));
}

#[test]
fn cli_fit_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    let t: Vec<f64> = (0..=10).map(f64::from).collect();
    let y: Vec<f64> = t.iter().map(|t| 2.0 * (-1.1 * t).exp()).collect();
    std::fs::write(&path, Table::from_columns(&["t", "F"], vec![t, y]).unwrap().to_csv()).unwrap();
    let (code, stdout, _) = cli(&["fit", path.to_str().unwrap(), "--col", "F", "--window", "0:10"]);
    assert_eq!(code, 0);
    let rate: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("fit.F.rate = "))
        .expect("rate line")
        .trim()
        .parse()
        .unwrap();
    assert!((rate - 1.1).abs() < 1e-9);
    let (code, _, _) = cli(&["fit", path.to_str().unwrap(), "--col", "G", "--window", "0:10"]);
    assert_eq!(code, 2);
    let (code, stdout, _) = cli(&["plot", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(Path::new(stdout.trim()).exists());
}
