use std::path::Path;
use std::process::{Command, Output};

use gridcell::cli::{RunConfig, DEFAULT_CONFIG, DEFAULT_PROFILES};
use gridcell::policy::optimal_rho_schedule;
use gridcell::scenario::parse_profiles_csv;

fn gridcell(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridcell")).args(args).arg("--out").arg(out).output().unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let header = reader.headers().unwrap().iter().map(String::from).collect();
    let rows = reader.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let idx = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[idx].parse().unwrap()).collect()
}

#[test]
fn analyze_thresholds_match_schedule() {
    let dir = tempfile::tempdir().unwrap();
    assert!(gridcell(&["analyze"], dir.path()).status.success());
    let (h, rows) = read_csv(&dir.path().join("thresholds.csv"));
    assert_eq!(rows.len(), 24);
    let rc = RunConfig::from_toml(DEFAULT_CONFIG, &[]).unwrap();
    let expected = optimal_rho_schedule(&rc.network, &parse_profiles_csv(DEFAULT_PROFILES).unwrap(), rc.lambda_m_all).unwrap();
    assert_eq!(column(&h, &rows, "rho_min"), expected);

    let (h, rows) = read_csv(&dir.path().join("coverage.csv"));
    assert_eq!(rows.len(), 100);
    let closed = column(&h, &rows, "p_suc_closed");
    let quad = column(&h, &rows, "p_suc_quadrature");
    assert!(closed.iter().zip(&quad).all(|(a, b)| (a - b).abs() <= 1e-6));
}

#[test]
fn schedule_peaks_at_cheapest_horizon() {
    let dir = tempfile::tempdir().unwrap();
    assert!(gridcell(&["schedule"], dir.path()).status.success());
    let (h, rows) = read_csv(&dir.path().join("schedule.csv"));
    let g = column(&h, &rows, "G");
    let price = column(&h, &rows, "price");
    let argmax = |v: &[f64]| (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
    let argmin = (0..price.len()).min_by(|&a, &b| price[a].total_cmp(&price[b])).unwrap();
    assert_eq!(argmax(&g), argmin);
    let storage = column(&h, &rows, "B");
    assert!(storage.iter().all(|&b| (0.0..=0.2).contains(&b)));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("schedule.json")).unwrap()).unwrap();
    let total: f64 = price.iter().zip(&g).map(|(a, g)| a * g).sum();
    assert!((summary["total_cost"].as_f64().unwrap() - total).abs() < 1e-15);
}

#[test]
fn oracle_costs_grow_with_horizons() {
    let dir = tempfile::tempdir().unwrap();
    assert!(gridcell(&["oracle"], dir.path()).status.success());
    let (h, rows) = read_csv(&dir.path().join("oracle.csv"));
    assert_eq!(rows.len(), 5);
    for name in ["optimal", "suboptimal"] {
        let c = column(&h, &rows, name);
        assert!(c.windows(2).all(|w| w[1] >= w[0]));
    }
    let gap = column(&h, &rows, "absolute_gap");
    let floor = column(&h, &rows, "grid_step_cost");
    assert!(gap[0].abs() <= floor[0] && gap[1].abs() <= floor[1]);
}

#[test]
fn zero_error_reproduces_error_free_cost() {
    let dir = tempfile::tempdir().unwrap();
    let out = gridcell(&["errors", "--set", "eta=0", "--set", "error_realizations=20"], dir.path());
    assert!(out.status.success());
    let (h, rows) = read_csv(&dir.path().join("errors.csv"));
    assert_eq!(rows.len(), 24);
    assert_eq!(column(&h, &rows, "error_free_cost"), column(&h, &rows, "mean_cost"));
}

#[test]
fn compare_writes_one_row_per_density() {
    let dir = tempfile::tempdir().unwrap();
    assert!(gridcell(&["compare", "--set", "mc_realizations=40"], dir.path()).status.success());
    let (h, rows) = read_csv(&dir.path().join("compare.csv"));
    assert_eq!(rows.len(), 4);
    let cost = column(&h, &rows, "proposed_cost");
    let lo = column(&h, &rows, "proposed_ci_low");
    let hi = column(&h, &rows, "proposed_ci_high");
    assert!((0..4).all(|i| lo[i] <= cost[i] && cost[i] <= hi[i]));
}

#[test]
fn run_record_lists_manifest_and_config() {
    let dir = tempfile::tempdir().unwrap();
    assert!(gridcell(&["schedule", "--seed", "9", "--set", "rule=myopic"], dir.path()).status.success());
    let run: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(run["manifest"]["command"], "schedule");
    assert_eq!(run["manifest"]["seed"], 9);
    assert_eq!(run["config"]["rule"], "myopic");
}

#[test]
fn malformed_config_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "lambda_b = [\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = gridcell(&["schedule", "--config", cfg.to_str().unwrap()], &out_dir);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists());

    std::fs::write(&cfg, DEFAULT_CONFIG.replace("mu = 0.213", "mu = 0.213\nmue = 1.0")).unwrap();
    let out = gridcell(&["schedule", "--config", cfg.to_str().unwrap()], &out_dir);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mue"));
}

#[test]
fn malformed_profile_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let prof = dir.path().join("p.csv");
    std::fs::write(&prof, "t,theta,lambda_e,price\n1,0.1,x,1\n").unwrap();
    let out = gridcell(&["schedule", "--profiles", prof.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    let missing = gridcell(&["schedule", "--profiles", "/nonexistent/p.csv"], &dir.path().join("out"));
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn infeasible_load_exits_3_with_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let out = gridcell(&["schedule", "--set", "lambda_m_all=0.05"], &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizon 1"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn budget_overflow_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = gridcell(&["oracle", "--set", "dp_budget=100"], &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(4));
    let out = gridcell(&["compare", "--set", "compare_budget=10"], &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn json_profiles_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let rows = parse_profiles_csv(DEFAULT_PROFILES).unwrap();
    let json = dir.path().join("p.json");
    std::fs::write(&json, serde_json::to_string(&rows).unwrap()).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(gridcell(&["schedule", "--profiles", json.to_str().unwrap()], &a).status.success());
    assert!(gridcell(&["schedule"], &b).status.success());
    assert_eq!(std::fs::read(a.join("schedule.csv")).unwrap(), std::fs::read(b.join("schedule.csv")).unwrap());
}
