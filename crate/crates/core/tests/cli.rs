use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_viscoflow");

fn minimal() -> String {
    fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/minimal.toml")).unwrap()
}

fn write_config(dir: &TempDir, text: &str) -> PathBuf {
    let path = dir.path().join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = match fs::read_dir(dir) {
        Ok(entries) => entries.map(|e| e.unwrap().file_name().into_string().unwrap()).collect(),
        Err(_) => Vec::new(),
    };
    names.sort();
    names
}

#[test]
fn run_writes_three_artifacts() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &minimal());
    let out = dir.path().join("out");
    let o = run(&["run"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(listing(&out), ["plot.script", "report.json", "trajectory.csv"]);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert!(report.get("conditions").is_some());
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(csv.lines().count() > 100);
    assert!(String::from_utf8_lossy(&o.stdout).contains("wrote"));
}

#[test]
fn quiet_run_prints_nothing() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &minimal());
    let o = run(&["run", "--quiet"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
}

#[test]
fn start_outside_domain_is_rejected_without_output() {
    let dir = TempDir::new().unwrap();
    let text = minimal().replace("x0 = [1.0, 0.0]", "x0 = [3.0, 0.0]").replace(
        "kind = \"whole_space\"\ndim = 2",
        "kind = \"ball\"\ncenter = [0.0, 0.0]\nradius = 1.0",
    );
    let cfg = write_config(&dir, &text);
    let out = dir.path().join("out");
    let o = run(&["run"], &cfg, &out);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("x0"), "{err}");
    assert!(listing(&out).is_empty());
}

#[test]
fn conditions_only_run_writes_only_the_report() {
    let dir = TempDir::new().unwrap();
    let text = minimal().replace(
        r#"analyses = ["vp", "boundedness", "gronwall", "conditions"]"#,
        r#"analyses = ["conditions"]"#,
    );
    let cfg = write_config(&dir, &text);
    let out = dir.path().join("out");
    let o = run(&["run"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(listing(&out), ["report.json"]);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert!(report["conditions"].is_object());
}

#[test]
fn malformed_config_exits_with_one() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "x0 = [1.0,");
    let o = run(&["run"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    let cfg = write_config(&dir, &minimal().replace("nu = 1.0", "nu = -1.0"));
    assert_eq!(run(&["run"], &cfg, &dir.path().join("out")).status.code(), Some(1));

    let missing = dir.path().join("absent.toml");
    assert_eq!(run(&["run"], &missing, &dir.path().join("out")).status.code(), Some(1));
}

#[test]
fn failing_verdict_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let text = minimal()
        .replace(
            r#"analyses = ["vp", "boundedness", "gronwall", "conditions"]"#,
            r#"analyses = [{ rate = 1.0 }]"#,
        )
        .replace(
            "kind = \"negation\"\ndim = 2",
            "kind = \"rotation\"\ndim = 2\nangle = 1.5707963267948966\nplane = [0, 1]",
        )
        .replace("value = [0.0, 0.0]", "value = [1.0, 0.0]")
        .replace("k = 2.0\nnu = 1.0", "k = 1.0\nnu = 0.5")
        .replace("t_end = 1000.0", "t_end = 10000.0");
    let cfg = write_config(&dir, &text);
    let out = dir.path().join("out");
    let o = run(&["run"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("fail"));
    assert_eq!(listing(&out).len(), 3);
}

#[test]
fn compare_with_zero_steps_writes_empty_tables() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &minimal());
    let out = dir.path().join("out");
    let o = run(&["compare", "--steps", "0"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        listing(&out),
        ["compare.json", "continuous.csv", "discrete.csv", "gap.csv"]
    );
    assert_eq!(fs::read_to_string(out.join("gap.csv")).unwrap().lines().count(), 1);
}

#[test]
fn compare_writes_one_row_per_iterate() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &minimal());
    let out = dir.path().join("out");
    let o = run(&["compare", "--steps", "25"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0));
    let gap = fs::read_to_string(out.join("gap.csv")).unwrap();
    assert_eq!(gap.lines().next(), Some("n,t,gap"));
    assert_eq!(gap.lines().count(), 26);
}

#[test]
fn sweep_records_invalid_points_as_row_errors() {
    let dir = TempDir::new().unwrap();
    let text = format!("{}\n[sweep]\nnu = [1.0, -0.5]\n", minimal());
    let cfg = write_config(&dir, &text);
    let out = dir.path().join("out");
    let o = run(&["sweep"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].ends_with(','), "{}", rows[1]);
    assert!(!rows[2].ends_with(','), "{}", rows[2]);
}

#[test]
fn single_point_sweep_agrees_with_run() {
    let dir = TempDir::new().unwrap();
    let text = minimal().replace(
        r#"analyses = ["vp", "boundedness", "gronwall", "conditions"]"#,
        r#"analyses = ["vp", "boundedness"]"#,
    );
    let cfg = write_config(&dir, &format!("{text}\n[sweep]\nk = [2.0]\n"));
    let sweep_out = dir.path().join("sweep");
    let run_out = dir.path().join("run");
    assert_eq!(run(&["sweep"], &cfg, &sweep_out).status.code(), Some(0));
    assert_eq!(run(&["run"], &cfg, &run_out).status.code(), Some(0));

    let csv = fs::read_to_string(sweep_out.join("sweep.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    let final_distance: f64 = col("final_distance").parse().unwrap();

    let traj = fs::read_to_string(run_out.join("trajectory.csv")).unwrap();
    let theader: Vec<&str> = traj.lines().next().unwrap().split(',').collect();
    let last: Vec<&str> = traj.lines().last().unwrap().split(',').collect();
    let d = theader.iter().position(|h| *h == "dist_qstar").unwrap();
    let run_distance: f64 = last[d].parse().unwrap();
    assert!(
        (final_distance - run_distance).abs() <= 1e-12 * (1.0 + run_distance.abs()),
        "{final_distance} vs {run_distance}"
    );
    assert_eq!(col("boundedness_verdict"), "pass");
}

#[test]
fn check_prints_the_condition_report() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &minimal());
    let out = dir.path().join("out");
    let o = run(&["check"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.is_object());
    assert!(listing(&out).is_empty());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &minimal());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&["run", "--seed", "3"], &cfg, &a).status.code(), Some(0));
    assert_eq!(run(&["run", "--seed", "3"], &cfg, &b).status.code(), Some(0));
    for name in listing(&a) {
        assert_eq!(
            fs::read(a.join(&name)).unwrap(),
            fs::read(b.join(&name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn t_end_override_shortens_the_run() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &minimal());
    let out = dir.path().join("out");
    assert_eq!(run(&["run", "--t-end", "50"], &cfg, &out).status.code(), Some(0));
    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let t: f64 = traj.lines().last().unwrap().split(',').next().unwrap().parse().unwrap();
    assert_eq!(t, 50.0);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        &minimal().replace("t_end = 1000.0", "t_end = 1000.0\nprojekt = true"),
    );
    let o = run(&["run"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("projekt"));
}

#[test]
fn perturbed_run_keeps_analyses_on_the_unforced_flow() {
    let dir = TempDir::new().unwrap();
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/perturbed.toml");
    let text = fs::read_to_string(path).unwrap().replace(
        r#"analyses = ["vp", "boundedness", "stability", { rate = 1.0 }]"#,
        r#"analyses = ["vp", "boundedness", "gronwall", "stability"]"#,
    );
    let cfg = write_config(&dir, &text);
    let out = dir.path().join("out");
    let o = run(&["run"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(
        listing(&out),
        [
            "plot.script",
            "report.json",
            "trajectory.csv",
            "trajectory_perturbed.csv"
        ]
    );
    let plain = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let forced = fs::read_to_string(out.join("trajectory_perturbed.csv")).unwrap();
    assert_ne!(plain, forced);
}

#[test]
fn stability_without_perturbation_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let text = minimal().replace(r#""gronwall", "conditions"]"#, r#""gronwall", "stability"]"#);
    let cfg = write_config(&dir, &text);
    let out = dir.path().join("out");
    let o = run(&["run"], &cfg, &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("perturbation"));
    assert!(listing(&out).is_empty());
}
