use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ofdma-ee"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

type Row = BTreeMap<String, String>;

fn read_rows(path: &Path) -> Vec<Row> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            headers
                .iter()
                .zip(rec.unwrap().iter())
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect()
        })
        .collect()
}

fn num(row: &Row, key: &str) -> f64 {
    row[key].parse().unwrap()
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

#[test]
fn single_cell_reference_point() {
    let tmp = TempDir::new().unwrap();
    let o = run(
        &[
            "single-cell",
            "--scenario",
            scenario("single_cell.toml").to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_rows(&tmp.path().join("single_cell_a3.5_R500_psp0_nk10.csv"));
    let header: Vec<&str> = rows[0].keys().map(String::as_str).collect();
    assert_eq!(header.len(), 14);
    let at6 = rows
        .iter()
        .find(|r| (num(r, "SE_bps_per_Hz") - 6.0).abs() < 1e-9)
        .unwrap();
    let ee = num(at6, "EE_bps_per_W");
    assert!((ee / 18.957e6 - 1.0).abs() < 0.01, "EE at SE=6 is {ee}");
    assert_eq!(at6["lambdaB_per_km2"], "");
    assert_eq!(at6["feasible"], "true");
}

#[test]
fn csv_header_is_fixed() {
    let tmp = TempDir::new().unwrap();
    let o = run(&["single-cell", "--set", "sweep.SE_bps_per_Hz=[2]"], tmp.path());
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(tmp.path().join("single_cell_a3.5_R500_psp0_nk10.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "scenario_id,mode,a,R_C_m,lambdaB_per_km2,f_r,N_t,N_K,W_Hz,SE_bps_per_Hz,EE_bps_per_W,EE_proc_bps_per_W,total_power_W,feasible"
    );
}

#[test]
fn json_format_matches_csv() {
    let csv_dir = TempDir::new().unwrap();
    let json_dir = TempDir::new().unwrap();
    let args = ["single-cell", "--set", "sweep.SE_bps_per_Hz=[1, 4, 9]"];
    assert_eq!(code(&run(&args, csv_dir.path())), 0);
    let mut json_args = args.to_vec();
    json_args.extend(["--format", "json"]);
    assert_eq!(code(&run(&json_args, json_dir.path())), 0);
    let rows = read_rows(&csv_dir.path().join("single_cell_a3.5_R500_psp0_nk10.csv"));
    let text = fs::read_to_string(json_dir.path().join("single_cell_a3.5_R500_psp0_nk10.json")).unwrap();
    let json: Vec<serde_json::Value> = serde_json::from_str(&text).unwrap();
    assert_eq!(json.len(), rows.len());
    for (j, r) in json.iter().zip(&rows) {
        assert_eq!(j["EE_bps_per_W"].as_f64().unwrap(), num(r, "EE_bps_per_W"));
        assert!(j["lambdaB_per_km2"].is_null());
    }
}

#[test]
fn empty_sweep_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let o = run(&["single-cell", "--set", "sweep.SE_bps_per_Hz=[]"], tmp.path());
    assert_eq!(code(&o), 1);
    let o = run(&["single-cell", "--set", "cell.no_such_key=1"], tmp.path());
    assert_eq!(code(&o), 1);
    let o = run(&["single-cell", "--scenario", "/nonexistent/file.toml"], tmp.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn infeasible_everywhere_exits_2() {
    let tmp = TempDir::new().unwrap();
    let o = run(&["single-cell", "--set", "cell.P_tot_W=1e-9"], tmp.path());
    assert_eq!(code(&o), 2);
    let rows = read_rows(&tmp.path().join("single_cell_a3.5_R500_psp0_nk10.csv"));
    assert!(!rows.is_empty() && rows.iter().all(|r| r["feasible"] == "false"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let path = scenario("single_cell.toml");
    let args = ["single-cell", "--scenario", path.to_str().unwrap()];
    assert_eq!(code(&run(&args, a.path())), 0);
    assert_eq!(code(&run(&args, b.path())), 0);
    assert_eq!(dir_bytes(a.path()), dir_bytes(b.path()));
}

#[test]
fn bound_table() {
    let tmp = TempDir::new().unwrap();
    let o = run(
        &["bound", "--scenario", scenario("bound.toml").to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(code(&o), 0);
    let rows = read_rows(&tmp.path().join("bound.csv"));
    let get = |a: f64, r: f64| {
        rows.iter()
            .find(|row| num(row, "a") == a && num(row, "R_C_m") == r)
            .map(|row| num(row, "EE_star_bps_per_W"))
            .unwrap()
    };
    assert!((get(3.5, 500.0) / 206.1e6 - 1.0).abs() < 0.02);
    assert!((get(4.5, 500.0) / 58e3 - 1.0).abs() < 0.03);
    for a in [3.0, 3.5, 4.0, 4.5] {
        let mut by_r: Vec<(f64, f64)> = rows
            .iter()
            .filter(|row| num(row, "a") == a)
            .map(|row| (num(row, "R_C_m"), num(row, "EE_star_bps_per_W")))
            .collect();
        by_r.sort_by(|x, y| x.0.total_cmp(&y.0));
        assert!(by_r.windows(2).all(|w| w[1].1 < w[0].1));
    }
}

fn multi_cell_ee(file: &str, sweep_key: &str, values: &str) -> Vec<(f64, f64)> {
    let tmp = TempDir::new().unwrap();
    let o = run(
        &[
            "multi-cell",
            "--scenario",
            scenario(file).to_str().unwrap(),
            "--set",
            "sweep.SE_bps_per_Hz=[2]",
            "--set",
            &format!("sweep.{sweep_key}={values}"),
        ],
        tmp.path(),
    );
    assert_ne!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("manifest.json")).unwrap()).unwrap();
    manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .filter_map(|f| f.as_str().filter(|f| f.ends_with(".csv")))
        .map(|f| {
            let row = &read_rows(&tmp.path().join(f))[0];
            (num(row, sweep_key), num(row, "EE_bps_per_W"))
        })
        .collect()
}

#[test]
fn multi_cell_orderings() {
    let base = multi_cell_ee("multi_cell_baseline.toml", "N_K", "[10]");
    assert!((base[0].1 / 147.6e3 - 1.0).abs() < 0.15, "baseline {}", base[0].1);

    let reuse = multi_cell_ee("multi_cell_reuse.toml", "f_r", "[1, 3, 7]");
    assert_eq!(reuse.iter().map(|p| p.0).collect::<Vec<_>>(), [1.0, 3.0, 7.0]);
    assert!(reuse.windows(2).all(|w| w[1].1 < w[0].1));
    assert_eq!(reuse[0].1, base[0].1);

    let beam = multi_cell_ee("multi_cell_beamforming.toml", "N_t", "[1, 2, 4, 8]");
    assert!(beam.windows(2).all(|w| w[1].1 > w[0].1));
    assert_eq!(beam[0].1, base[0].1);
}

#[test]
fn validation_passes_and_detects_a_wrong_model() {
    let path = scenario("validate.toml");
    let args = ["validate", "--scenario", path.to_str().unwrap(), "--seed", "7"];
    let a = TempDir::new().unwrap();
    let o = run(&args, a.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("validation.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);

    let b = TempDir::new().unwrap();
    assert_eq!(code(&run(&args, b.path())), 0);
    assert_eq!(dir_bytes(a.path()), dir_bytes(b.path()));

    let c = TempDir::new().unwrap();
    let mut wrong = args.to_vec();
    wrong.extend(["--set", "montecarlo.analytic_density_scale=2"]);
    assert_eq!(code(&run(&wrong, c.path())), 3);

    let mut few = args.to_vec();
    few.extend(["--samples", "999"]);
    assert_eq!(code(&run(&few, c.path())), 1);
}

#[test]
fn resolved_scenario_reproduces_the_run() {
    let first = TempDir::new().unwrap();
    let o = run(
        &[
            "single-cell",
            "--set",
            "cell.R_C_m=731.123456789012",
            "--set",
            "cell.P_SP_W_per_MHz=0.37",
            "--set",
            "radio.snr_gap_dB=1.5",
            "--set",
            "sweep.SE_bps_per_Hz=[0.7, 3.3]",
        ],
        first.path(),
    );
    assert_eq!(code(&o), 0);
    let resolved = first.path().join("scenario.toml");
    let second = TempDir::new().unwrap();
    let o = run(
        &["single-cell", "--scenario", resolved.to_str().unwrap()],
        second.path(),
    );
    assert_eq!(code(&o), 0);
    assert_eq!(dir_bytes(first.path()), dir_bytes(second.path()));

    let text = fs::read_to_string(&resolved).unwrap();
    let table: toml::Table = text.parse().unwrap();
    let r = table["cell"]["R_C_m"].as_float().unwrap();
    assert!((r / 731.123456789012 - 1.0).abs() < 1e-12);
    let rows = read_rows(&first.path().join("single_cell_a3.5_R731.123456789012_psp0.37_nk10.csv"));
    for row in &rows {
        let w = num(row, "W_Hz");
        let se = num(row, "SE_bps_per_Hz");
        let served = 10.0 * std::f64::consts::PI * r * r;
        assert!((w * se / served - 1.0).abs() < 1e-12);
        let proc = num(row, "total_power_W") + 0.37e-6 * w;
        assert!((served / proc / num(row, "EE_proc_bps_per_W") - 1.0).abs() < 1e-12);
    }
}
