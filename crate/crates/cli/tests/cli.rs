use std::process::{Command, Output};

fn optmech(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optmech")).args(args).output().expect("binary runs")
}

fn optmech_threads(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optmech"))
        .args(args)
        .env("OPTMECH_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn solve_unit_square_json() {
    let o = optmech(&["solve", "0", "0", "1", "1", "--json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["kind"], "A");
    let bundle = v["menu"].as_array().unwrap().last().unwrap()["t"].as_f64().unwrap();
    assert!((bundle - 0.861929).abs() < 1e-6);
}

#[test]
fn solve_bundling_table() {
    let o = optmech(&["solve", "2", "2", "1", "1"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("kind     C"));
    assert!(s.contains("4.230139"));
}

#[test]
fn solve_rejects_negative_corner() {
    assert_eq!(optmech(&["solve", "-1", "0", "1", "1"]).status.code(), Some(2));
    assert_eq!(optmech(&["solve", "0", "0", "0", "1"]).status.code(), Some(2));
    assert_eq!(optmech(&["solve", "x", "0", "1", "1"]).status.code(), Some(2));
}

#[test]
fn phase_grid_too_small() {
    assert_eq!(optmech(&["phase", "1", "1", "--grid", "5"]).status.code(), Some(2));
}

#[test]
fn phase_csv_is_thread_independent() {
    let args = ["phase", "1", "1", "--grid", "40", "--max-ratio", "5"];
    let one = optmech_threads(&args, "1");
    let four = optmech_threads(&args, "4");
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);
    let s = stdout(&one);
    let mut lines = s.lines();
    assert_eq!(lines.next(), Some("c1_ratio,c2_ratio,kind"));
    assert_eq!(lines.count(), 1600);
    assert!(s.starts_with("c1_ratio,c2_ratio,kind\n0,0,A\n"));
}

#[test]
fn phase_svg_to_file() {
    let path = std::env::temp_dir().join(format!("optmech-phase-{}.svg", std::process::id()));
    let o = optmech(&["phase", "1", "1", "--grid", "20", "--out", "svg", "-o", path.to_str().unwrap()]);
    assert!(o.status.success());
    let svg = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<rect").count(), 20 * 20 + 8);
}

#[test]
fn phase_unwritable_output() {
    let o = optmech(&["phase", "1", "1", "--grid", "10", "-o", "/nonexistent-dir/map.csv"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn verify_passes_on_unit_square() {
    let o = optmech(&["verify", "0", "0", "1", "1", "--coarse", "10"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).trim_end().ends_with("PASS"));
}

#[test]
fn verify_no_exclusion_instance() {
    let o = optmech(&["verify", "0.5", "8", "1", "1", "--coarse", "10", "--json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["mechanism"]["kind"], "E");
    assert_eq!(v["report"]["pass"], true);
}

#[test]
fn verify_flags_injected_price_error() {
    let o = optmech(&["verify", "0", "0", "1", "1", "--coarse", "8", "--rounds", "1", "--perturb", "0.01"]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn verify_random_is_seeded() {
    let args = ["verify", "--random", "2", "--seed", "9", "--coarse", "8", "--rounds", "2", "--json"];
    let a = optmech(&args);
    let b = optmech(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).lines().count(), 2);
}

#[test]
fn linear_examples() {
    let o = optmech(&["linear", "0.1"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("a1       0.231984"));
    let z = optmech(&["linear", "0", "--json"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&z).trim()).unwrap();
    assert!((v["params"]["p_a1"].as_f64().unwrap() - 0.6f64.sqrt()).abs() < 1e-12);
    assert_eq!(optmech(&["linear", "0.3"]).status.code(), Some(2));
    assert_eq!(optmech(&["linear", "-0.1"]).status.code(), Some(2));
}
