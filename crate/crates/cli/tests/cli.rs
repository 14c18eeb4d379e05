use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use cmchoice::util::{angle_degrees, norm2};
use cmchoice::EstimateResult;

fn cmchoice(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmchoice")).args(args).output().expect("run cmchoice")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Work {
    dir: tempfile::TempDir,
}

impl Work {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn simulate(&self, name: &str, extra: &[&str]) -> PathBuf {
        let path = self.path(name);
        let mut args = vec!["simulate", "--output", p(&path)];
        args.extend_from_slice(extra);
        let out = cmchoice(&args);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        path
    }
}

#[test]
fn simulate_writes_n_times_t_rows_deterministically() {
    let w = Work::new();
    let a = w.simulate("a.csv", &[]);
    let b = w.simulate("b.csv", &[]);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 1 + 1000 * 2);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let c = w.simulate("c.csv", &["--seed", "2"]);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn usage_errors_exit_one() {
    let w = Work::new();
    let out = w.path("x.csv");
    assert_eq!(code(&cmchoice(&["simulate", "--n", "0", "--output", p(&out)])), 1);
    assert_eq!(code(&cmchoice(&["simulate", "--output", p(&out), "--bogus"])), 1);
    assert_eq!(code(&cmchoice(&["estimate"])), 1);
    assert_eq!(code(&cmchoice(&["nonsense"])), 1);
    assert_eq!(code(&cmchoice(&["--help"])), 0);
}

#[test]
fn estimate_returns_unit_direction_near_truth() {
    let w = Work::new();
    let panel = w.simulate("p.csv", &["--n", "1000", "--seed", "12"]);
    let result = w.path("r.txt");
    let out = cmchoice(&["estimate", "--input", p(&panel), "--output", p(&result)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r: EstimateResult = std::fs::read_to_string(&result).unwrap().parse().unwrap();
    assert!((norm2(&r.beta_hat) - 1.0).abs() < 1e-12);
    let angle = angle_degrees(&r.beta_hat, &[1.0, 0.5, 0.0]);
    assert!(angle < 15.0, "angle {angle}");
}

#[test]
fn estimate_to_stdout_with_fixed_k_and_terms() {
    let w = Work::new();
    let panel = w.simulate("p.csv", &["--n", "200"]);
    let terms = w.path("terms.csv");
    let out = cmchoice(&["estimate", "--input", p(&panel), "--k", "15", "--terms", p(&terms)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let doc = String::from_utf8(out.stdout).unwrap();
    assert!(doc.contains("beta_hat = ") && doc.contains("face_sign = "));
    assert_eq!(std::fs::read_to_string(&terms).unwrap().lines().count(), 201);
}

#[test]
fn controls_flag_requires_z_column() {
    let w = Work::new();
    let plain = w.simulate("p.csv", &["--n", "100"]);
    let out = cmchoice(&["estimate", "--input", p(&plain), "--controls"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("z column"));
    let with_z = w.simulate("z.csv", &["--n", "300", "--controls"]);
    let out = cmchoice(&["estimate", "--input", p(&with_z), "--controls"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn invalid_data_exits_two_with_report() {
    let w = Work::new();
    let bad = w.path("bad.csv");
    std::fs::write(&bad, "id,period,choice,x_1_1\na,1,0,0.5\na,2,4,0.1\nb,1,1,0.3\nb,2,0,0.2\n").unwrap();
    let out = cmchoice(&["estimate", "--input", p(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("id a period 2"), "{}", stderr(&out));
    let ragged = w.path("ragged.csv");
    std::fs::write(&ragged, "id,period,choice,x_1_1\na,1,0,0.5\n a,2,1,0.1\nb,1,1,0.3\n").unwrap();
    let out = cmchoice(&["estimate", "--input", p(&ragged)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("row"), "{}", stderr(&out));
    assert_eq!(code(&cmchoice(&["estimate", "--input", p(&w.path("missing.csv"))])), 2);
}

#[test]
fn montecarlo_smoke_table() {
    let w = Work::new();
    let csv = w.path("mc.csv");
    let out = cmchoice(&["montecarlo", "--n", "80,120", "--reps", "2", "--max-iter", "300", "--output", p(&csv)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("BIAS") && text.contains("SD") && text.contains("rMSE"));
    let table = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("n,repetitions,failed,bias_1,sd_1,rmse_1"));
    assert_eq!(code(&cmchoice(&["montecarlo", "--reps", "1"])), 1);
}

#[test]
fn idset_emits_grids_containing_truth() {
    let w = Work::new();
    let dir = w.path("ids");
    let out = cmchoice(&["idset", "--s-points", "2", "--pairs-budget", "3000", "--grid-steps", "40", "--output", p(&dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.join("idset_s2.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 40 * 40);
    assert!(csv.starts_with("beta_2,beta_3,member"));
    let pbm = std::fs::read_to_string(dir.join("idset_s2.pbm")).unwrap();
    assert!(pbm.starts_with("P1\n40 40\n"));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().nth(1).unwrap().trim_end().ends_with("true"), "{stdout}");
}

#[test]
fn idset_bounded_design_is_not_a_point() {
    let w = Work::new();
    let dir = w.path("b");
    let out = cmchoice(&["idset", "--design", "bounded", "--pairs-budget", "5000", "--grid-steps", "100", "--output", p(&dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8(out.stdout).unwrap().contains("singleton = false"));
    assert!(dir.join("idset_bounded.pbm").exists());
}

#[test]
fn aggregate_round_trip_and_bad_shares() {
    let w = Work::new();
    let shares = w.path("s.csv");
    let out = cmchoice(&["simulate", "--aggregate", "--n", "2000", "--output", p(&shares)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = cmchoice(&["aggregate", "--input", p(&shares)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r: EstimateResult = String::from_utf8(out.stdout).unwrap().parse().unwrap();
    assert!(angle_degrees(&r.beta_hat, &[1.0, 0.5, 0.0]) < 5.0);

    let bad = w.path("bad.csv");
    std::fs::write(&bad, "market,period,choice,share,x_1\nm1,1,1,0.7,1\nm1,1,2,0.5,2\nm1,2,1,0.2,1\nm1,2,2,0.2,2\n").unwrap();
    let out = cmchoice(&["aggregate", "--input", p(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("market m1 period 1"), "{}", stderr(&out));
    assert_eq!(code(&cmchoice(&["aggregate", "--input", p(&shares), "--interaction", "1"])), 1);
}

#[test]
fn check_quick_passes_and_fault_is_caught() {
    let start = Instant::now();
    let out = cmchoice(&["check", "--quick"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(start.elapsed().as_secs() < 10);
    let out = cmchoice(&["check", "--quick", "--inject-fault", "hinge-sign"]);
    assert_ne!(code(&out), 0);
    assert!(String::from_utf8(out.stdout).unwrap().contains("FAIL"));
}

#[test]
fn config_file_values_yield_to_flags() {
    let w = Work::new();
    let cfg = w.path("run.conf");
    let out_path = w.path("from_conf.csv");
    std::fs::write(&cfg, format!("# simulation defaults\nn = 25\nseed = 4\noutput = {}\n", p(&out_path))).unwrap();
    let out = cmchoice(&["simulate", "--config", p(&cfg), "--n", "30"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(std::fs::read_to_string(&out_path).unwrap().lines().count(), 1 + 60);
    let flagged = w.simulate("flags.csv", &["--n", "30", "--seed", "4"]);
    assert_eq!(std::fs::read(&out_path).unwrap(), std::fs::read(&flagged).unwrap());

    std::fs::write(&cfg, "unknown_key = 1\n").unwrap();
    assert_eq!(code(&cmchoice(&["check", "--config", p(&cfg)])), 1);
}
