use lpproj_cli::commands::{cmd_moments, cmd_orlicz, cmd_permavg, cmd_ratio, cmd_steiner};
use lpproj_cli::config::{RunConfig, ThetaMode};
use lpproj_cli::plot::{render, PlotKind};
use lpproj_cli::table::Table;
use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_lpproj");

fn small() -> RunConfig {
    RunConfig { p: vec![2.0], n: vec![4], samples: 100_000, directions: 1, cases: 2, ..RunConfig::default() }
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

fn header_line(t: &Table) -> String {
    t.to_csv().split("\r\n").next().unwrap().to_string() + "\n"
}

fn column(t: &Table, name: &str) -> usize {
    t.header.iter().position(|h| *h == name).unwrap()
}

fn num(t: &Table, row: usize, name: &str) -> f64 {
    t.rows[row][column(t, name)].render().parse().unwrap()
}

#[test]
fn headers_match_golden_files() {
    let cfg = small();
    assert_eq!(header_line(&cmd_moments(&cfg).unwrap()), golden("moments.csv"));
    assert_eq!(header_line(&cmd_ratio(&cfg).unwrap()), golden("ratio.csv"));
    assert_eq!(header_line(&cmd_orlicz(&cfg).unwrap()), golden("orlicz.csv"));
    assert_eq!(header_line(&cmd_steiner(&cfg).unwrap()), golden("steiner.csv"));
    assert_eq!(header_line(&cmd_permavg(&cfg).unwrap()), golden("permavg.csv"));
}

#[test]
fn moments_rows() {
    let cfg = RunConfig { p: vec![2.0, 3.0], n: vec![8], samples: 200_000, ..small() };
    let t = cmd_moments(&cfg).unwrap();
    let row = (0..t.rows.len())
        .find(|&r| t.rows[r][0].render() == "g" && num(&t, r, "p") == 2.0 && num(&t, r, "alpha") == 2.0)
        .unwrap();
    assert!((num(&t, row, "oracle") - 0.5).abs() < 1e-14);
    for r in 0..t.rows.len() {
        assert!(num(&t, r, "z").abs() <= 4.0, "row {r}");
    }
}

#[test]
fn ratio_disk_row() {
    let cfg = RunConfig { p: vec![2.0], n: vec![3], theta: ThetaMode::Axis, samples: 400_000, ..small() };
    let t = cmd_ratio(&cfg).unwrap();
    let (r, se) = (num(&t, 0, "ratio"), num(&t, 0, "ratio_se"));
    assert!((r - 2.0 / 3.0).abs() <= 4.0 * se, "{r} ± {se}");
    assert_eq!(t.rows[0][column(&t, "theta_mode")].render(), "axis");
}

#[test]
fn steiner_axis_row_is_null_difference() {
    let cfg = RunConfig { p: vec![1.5, 4.0], n: vec![3], theta: ThetaMode::Axis, samples: 200_000, ..small() };
    let t = cmd_steiner(&cfg).unwrap();
    for r in 0..t.rows.len() {
        let (d, x, y) = (num(&t, r, "var_diff"), num(&t, r, "var_x_se"), num(&t, r, "var_y_se"));
        assert!(d.abs() <= 4.0 * x.hypot(y), "row {r}: {d}");
    }
}

#[test]
fn permavg_ones_rows() {
    let cfg = RunConfig { n: vec![3, 4, 5], ..small() };
    let t = cmd_permavg(&cfg).unwrap();
    for r in (0..t.rows.len()).filter(|&r| t.rows[r][column(&t, "case")].render() == "ones") {
        let n = num(&t, r, "n");
        assert!((num(&t, r, "brute") - n.sqrt()).abs() < 1e-12);
    }
    assert!(cmd_permavg(&RunConfig { n: vec![8, 9], ..small() }).is_err());
}

#[test]
fn orlicz_ratios_in_window_and_p1_skipped() {
    let cfg = RunConfig { p: vec![1.0, 2.0, 4.0, 16.0, 64.0], n: vec![8, 64], samples: 30_000, directions: 2, ..small() };
    let t = cmd_orlicz(&cfg).unwrap();
    assert_eq!(t.rows.len(), 4 * 2 * 2);
    for r in 0..t.rows.len() {
        assert_ne!(num(&t, r, "p"), 1.0);
        let ratio = num(&t, r, "ratio");
        assert!((0.1..=10.0).contains(&ratio), "{ratio}");
        assert!((num(&t, r, "modular_at_norm") - 1.0).abs() < 1e-6);
    }
}

fn run(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().unwrap()
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        let o = run(&["ratio", "--p", "1.5,8", "--n", "6", "--directions", "2", "--samples", "100000", "--threads", threads, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(std::fs::read_to_string(&a).unwrap().contains("\r\n"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    let cfg = RunConfig { p: vec![3.0], n: vec![5], samples: 30_000, directions: 1, ..RunConfig::default() };
    std::fs::write(&cfg_path, cfg.to_json()).unwrap();
    let o = run(&["moments", "--config", cfg_path.to_str().unwrap(), "--p", "2", "--format", "json"]);
    assert!(o.status.success());
    let rows: Vec<serde_json::Value> = serde_json::from_slice(&o.stdout).unwrap();
    assert!(rows.iter().all(|r| r["p"] == 2.0));
    assert!(rows.iter().filter(|r| r["quantity"] == "S").all(|r| r["n"] == 5));
    assert!(rows.iter().all(|r| r["N"] == 30000));
}

#[test]
fn config_round_trip() {
    let mut cfg = RunConfig { p: vec![1.5, 7.25], n: vec![3, 9], theta: ThetaMode::Diag, seed: u64::MAX, ..RunConfig::default() };
    cfg.windows.ratio_max = 12.5;
    cfg.out = Some("x/y.csv".into());
    assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
}

#[test]
fn bad_config_is_rejected() {
    assert!(RunConfig::from_json(r#"{"samples": 10}"#).unwrap().validate().is_err());
    assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
    let o = run(&["ratio", "--p", "0.5"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("p must be"));
}

#[test]
fn theta_file_mode() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("dirs.txt");
    std::fs::write(&f, "# two directions\n1 2 2\n0,0,1\n1 1\n").unwrap();
    let cfg = RunConfig { n: vec![3], theta: ThetaMode::File, theta_file: Some(f), ..small() };
    let t = cmd_ratio(&cfg).unwrap();
    assert_eq!(t.rows.len(), 2);
    assert!(cmd_ratio(&RunConfig { n: vec![4], ..cfg }).is_err());
}

fn write_ratio_csv(path: &Path) {
    let cfg = RunConfig { p: vec![2.0, 4.0, 16.0], n: vec![4, 8], directions: 2, ..small() };
    std::fs::write(path, cmd_ratio(&cfg).unwrap().to_csv()).unwrap();
}

#[test]
fn plot_ratio_has_one_polyline_per_n_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    write_ratio_csv(&csv);
    let a = render(&csv, PlotKind::Ratio).unwrap();
    assert_eq!(a.matches("<polyline").count(), 2);
    assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
    assert_eq!(a, render(&csv, PlotKind::Ratio).unwrap());
    let terms = render(&csv, PlotKind::Terms).unwrap();
    assert_eq!(terms.matches("<rect x=").count() - 4, 6 * 4);

    let svg = dir.path().join("r.svg");
    let o = run(&["plot", csv.to_str().unwrap(), "--kind", "ratio", "--out", svg.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(&svg).unwrap(), a);
}

#[test]
fn plot_errors_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, golden("ratio.csv")).unwrap();
    let svg = dir.path().join("out.svg");
    let o = run(&["plot", empty.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(!svg.exists());

    let csv = dir.path().join("r.csv");
    write_ratio_csv(&csv);
    let err = render(&csv, PlotKind::Epsi).unwrap_err().to_string();
    assert!(err.contains("e_psi"), "{err}");
}

#[test]
fn fault_injection_fails_validation_and_report_lists_every_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let o = run(&["validate", "--suite", "quick", "--fault", "moment-g", "--out", report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let ids: Vec<&str> = v["criteria"].as_array().unwrap().iter().map(|c| c["id"].as_str().unwrap()).collect();
    assert_eq!(ids, (1..=15).map(|k| format!("C{k}")).collect::<Vec<_>>());
    assert_eq!(v["criteria"][0]["status"], "fail");
    assert_eq!(v["passed"], false);
}
