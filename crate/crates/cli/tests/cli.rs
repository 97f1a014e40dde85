use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn pim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pim"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Header and numeric rows of a CSV, skipping `#` metadata lines.
fn read_table(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| if v.is_empty() { f64::NAN } else { v.parse().unwrap() }).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn report_value(path: &Path, key: &str) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .find_map(|l| l.split_once(" = ").filter(|(k, _)| *k == key).map(|(_, v)| v.to_string()))
        .unwrap_or_else(|| panic!("no {key} in report"))
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

#[test]
fn generate_interval_writes_every_node() {
    let dir = TempDir::new().unwrap();
    let out = pim(dir.path(), &["generate", "--shape", "interval", "--n", "101", "--out", "c.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (header, rows) = read_table(&path(&dir, "c.csv"));
    assert_eq!(header, ["x1", "volume_weight", "boundary_flag", "area_weight"]);
    assert_eq!(rows.len(), 101);
    let vol: f64 = rows.iter().map(|r| r[1]).sum();
    assert!((vol - 1.0).abs() < 1e-12);
    assert_eq!(rows.iter().filter(|r| r[2] == 1.0).count(), 2);
}

#[test]
fn generate_disk_volume_matches_area() {
    let dir = TempDir::new().unwrap();
    let out = pim(dir.path(), &["generate", "--shape", "disk", "--n", "2000", "--out", "d.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (header, rows) = read_table(&path(&dir, "d.csv"));
    let v = column(&header, "volume_weight");
    let vol: f64 = rows.iter().map(|r| r[v]).sum();
    assert!((vol - std::f64::consts::PI).abs() < 1e-2 * std::f64::consts::PI, "{vol}");
    let area = column(&header, "area_weight");
    let perimeter: f64 = rows.iter().filter(|r| !r[area].is_nan()).map(|r| r[area]).sum();
    assert!((perimeter - 2.0 * std::f64::consts::PI).abs() < 1e-2 * 2.0 * std::f64::consts::PI);
}

#[test]
fn missing_out_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = pim(dir.path(), &["generate", "--shape", "disk", "--n", "20"]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("--out"), "{err}");
    assert!(err.contains("Usage: pim generate"), "{err}");
}

#[test]
fn unknown_flag_is_rejected_by_the_parser() {
    let dir = TempDir::new().unwrap();
    let out = pim(dir.path(), &["generate", "--shaep", "disk"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn constant_boundary_data_solves_to_the_constant() {
    let dir = TempDir::new().unwrap();
    let gen = pim(dir.path(), &["generate", "--shape", "disk", "--n", "400", "--out", "c.csv"]);
    assert_eq!(code(&gen), 0, "{}", stderr(&gen));
    let (header, rows) = read_table(&path(&dir, "c.csv"));
    let flag = column(&header, "boundary_flag");
    let boundary = rows.iter().filter(|r| r[flag] == 1.0).count();
    let f = format!("f\n{}", "0\n".repeat(rows.len()));
    let b = format!("b\n{}", "1\n".repeat(boundary));
    std::fs::write(path(&dir, "f.csv"), f).unwrap();
    std::fs::write(path(&dir, "b.csv"), b).unwrap();
    for method in ["dense-lu", "iterative"] {
        let out = pim(
            dir.path(),
            &[
                "solve", "--cloud", "c.csv", "--source", "f.csv", "--boundary", "b.csv", "--t", "0.01", "--beta",
                "0.1", "--method", method, "--out", "u.csv",
            ],
        );
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let (header, rows) = read_table(&path(&dir, "u.csv"));
        assert_eq!(header, ["x1", "x2", "u"]);
        let worst = rows.iter().map(|r| (r[2] - 1.0).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-9, "{method}: {worst}");
        assert_eq!(report_value(&path(&dir, "u.report.txt"), "solver.method"), method);
    }
}

#[test]
fn disk_case_report_carries_errors() {
    let dir = TempDir::new().unwrap();
    let out = pim(
        dir.path(),
        &["solve", "--case", "disk", "--n", "2000", "--out", "u.csv", "--report", "r.txt"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = path(&dir, "r.txt");
    let err: f64 = report_value(&report, "max_nodal_error").parse().unwrap();
    // Default coupling on this cloud gives 1.2353e-1.
    assert!(err < 0.13, "{err}");
    let residual: f64 = report_value(&report, "residual").parse().unwrap();
    assert!(residual <= 1e-10);
    for key in ["l2_error", "h1_error", "boundary_l2_error", "t", "beta", "h"] {
        report_value(&report, key);
    }
}

#[test]
fn interpolant_evaluation_off_the_cloud() {
    let dir = TempDir::new().unwrap();
    std::fs::write(path(&dir, "p.csv"), "x1\n0.25\n0.5\n0.755\n").unwrap();
    let out = pim(
        dir.path(),
        &[
            "solve", "--case", "interval", "--n", "401", "--out", "u.csv", "--eval", "p.csv", "--eval-out",
            "e.csv",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (header, rows) = read_table(&path(&dir, "e.csv"));
    assert_eq!(header, ["x1", "value", "g1"]);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[1].is_finite() && r[2].is_finite()));
}

#[test]
fn corrupt_cloud_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    std::fs::write(path(&dir, "bad.csv"), "# intrinsic_dim=1\nx1,volume_weight,boundary_flag,area_weight\n0.0,abc,1,1\n")
        .unwrap();
    std::fs::write(path(&dir, "f.csv"), "f\n0\n").unwrap();
    std::fs::write(path(&dir, "b.csv"), "b\n0\n").unwrap();
    let out = pim(
        dir.path(),
        &["solve", "--cloud", "bad.csv", "--source", "f.csv", "--boundary", "b.csv", "--t", "0.01", "--beta", "0.1", "--out", "u.csv"],
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
    assert!(!path(&dir, "u.csv").exists());
}

#[test]
fn sweep_writes_one_row_per_level() {
    let dir = TempDir::new().unwrap();
    let out = pim(dir.path(), &["sweep", "--case", "interval", "--levels", "101,201,401,801", "--out", "s.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (header, rows) = read_table(&path(&dir, "s.csv"));
    assert_eq!(rows.len(), 4);
    let h1 = column(&header, "h1_error");
    assert!(rows.windows(2).all(|w| w[1][h1] < w[0][h1]));

    let out = pim(dir.path(), &["sweep", "--case", "interval", "--levels", "201", "--out", "one.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (_, one) = read_table(&path(&dir, "one.csv"));
    assert_eq!(one.len(), 1);
    assert_eq!(one[0][1..9], rows[1][1..9]);
}

#[test]
fn sweep_is_independent_of_thread_count() {
    let dir = TempDir::new().unwrap();
    let run = |threads: &str, name: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_pim"))
            .current_dir(dir.path())
            .env("PIM_THREADS", threads)
            .args(["sweep", "--case", "disk", "--levels", "300,600", "--out", name])
            .output()
            .unwrap();
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let (header, rows) = read_table(&path(&dir, name));
        let wall = column(&header, "wall_time_s");
        rows.into_iter()
            .map(|mut r| {
                r.remove(wall);
                r
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(run("1", "a.csv"), run("4", "b.csv"));
}

#[test]
fn steep_bandwidth_exponent_is_rejected() {
    let dir = TempDir::new().unwrap();
    let out = pim(dir.path(), &["sweep", "--case", "interval", "--gamma-t", "0.7", "--levels", "101", "--out", "s.csv"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("gamma"), "{}", stderr(&out));
}

#[test]
fn explicit_and_coupled_parameters_conflict() {
    let dir = TempDir::new().unwrap();
    let out = pim(
        dir.path(),
        &["solve", "--case", "interval", "--n", "101", "--t", "0.01", "--beta", "0.1", "--c-t", "0.02", "--out", "u.csv"],
    );
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn same_seed_same_files() {
    let dir = TempDir::new().unwrap();
    let args = |seed: &'static str, name: &'static str| {
        ["generate", "--shape", "disk", "--n", "500", "--jitter", "0.3", "--seed", seed, "--out", name]
    };
    for (seed, name) in [("5", "a.csv"), ("5", "b.csv"), ("6", "c.csv")] {
        assert_eq!(code(&pim(dir.path(), &args(seed, name))), 0);
    }
    let read = |n| std::fs::read(path(&dir, n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(read("a.csv"), read("c.csv"));
}

#[test]
fn flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    std::fs::write(
        path(&dir, "run.cfg"),
        "# interval run\nmanifold.shape = interval\nmanifold.n = 51\nout = from_file.csv\n",
    )
    .unwrap();
    let out = pim(dir.path(), &["generate", "--config", "run.cfg", "--n", "61"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(read_table(&path(&dir, "from_file.csv")).1.len(), 61);

    let out = pim(dir.path(), &["generate", "--config", "run.cfg", "--set", "manifold.n=71", "--out", "flag.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(read_table(&path(&dir, "flag.csv")).1.len(), 71);
}

#[test]
fn bad_config_line_is_reported() {
    let dir = TempDir::new().unwrap();
    std::fs::write(path(&dir, "run.cfg"), "manifold.shape = interval\nmanifold.size = 3\n").unwrap();
    let out = pim(dir.path(), &["generate", "--config", "run.cfg", "--out", "c.csv"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn oracle_check_passes() {
    let dir = TempDir::new().unwrap();
    let out = pim(dir.path(), &["oracle-check"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(!table.contains("FAIL"), "{table}");
    assert_eq!(table.matches("PASS").count(), 10, "{table}");
}
