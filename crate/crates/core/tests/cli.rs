use std::path::PathBuf;
use std::process::{Command, Output};
use std::time::Instant;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hessred"));
    c.env_remove("HESSRED_SEED");
    c
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hessred-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(c: &mut Command) -> Output {
    c.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn report_value(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("missing {key} in {report}"))
        .parse()
        .unwrap()
}

#[test]
fn gen_is_deterministic_and_honours_seed_variable() {
    let a = run(bin().args(["gen", "--kind", "unitary", "--n", "8", "--k", "2", "--seed", "4"]));
    let b = run(bin().args(["gen", "--kind", "unitary", "--n", "8", "--k", "2", "--seed", "4"]));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("DPR1 kind=unitary n=8 k=2 seed=4 pad=0\n"));
    let d_lines: Vec<&str> = text.lines().skip(2).take(8).collect();
    for l in d_lines {
        let v: Vec<f64> = l.split(' ').map(|x| x.parse().unwrap()).collect();
        assert!((v[0].hypot(v[1]) - 1.0).abs() < 1e-15);
    }
    let env = run(bin().env("HESSRED_SEED", "4").args(["gen", "--kind", "unitary", "--n", "8", "--k", "2"]));
    assert_eq!(env.stdout, a.stdout);
}

#[test]
fn reduce_real_rank_one_reports_small_errors() {
    let f = scratch("real4.txt");
    assert!(run(bin().args(["gen", "--kind", "real", "--n", "4", "--k", "1", "--out"]).arg(&f)).status.success());
    let o = run(bin().args(["reduce", "--accumulate-q", "--dense-oracle", "--input"]).arg(&f));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = stdout(&o);
    let nu = 4.0 * f64::EPSILON;
    assert!(report_value(&r, "backward_error") <= 100.0 * nu);
    assert!(report_value(&r, "unitarity_error") <= 100.0 * nu);
    assert!(report_value(&r, "trace_diff") <= 1e3 * nu);
    assert!(report_value(&r, "frobenius_diff") <= 1e3 * nu);
    assert!(r.contains("seed=1\n"));
}

#[test]
fn reduce_writes_condensed_outputs() {
    let f = scratch("unit12.txt");
    let (h, j) = (scratch("unit12.h"), scratch("unit12.j"));
    let g = run(bin().args(["gen", "--kind", "unitary", "--n", "12", "--k", "2", "--pad", "--out"]).arg(&f));
    assert!(g.status.success());
    let o = run(bin()
        .args(["reduce", "--accumulate-q", "--input"])
        .arg(&f)
        .arg("--out-h")
        .arg(&h)
        .arg("--out-journal")
        .arg(&j));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(report_value(&stdout(&o), "backward_error") <= 100.0 * 12.0 * f64::EPSILON);
    assert!(std::fs::read_to_string(&h).unwrap().starts_with("HGV n=12 k=2"));
    assert!(std::fs::read_to_string(&j).unwrap().starts_with("JOURNAL entries="));
}

#[test]
fn unitary_order_off_the_block_grid_needs_pad() {
    let plain = run(bin().args(["gen", "--kind", "unitary", "--n", "10", "--k", "2"]));
    assert_eq!(plain.status.code(), Some(2));
    let f = scratch("unit10.txt");
    let padded = run(bin().args(["gen", "--kind", "unitary", "--n", "10", "--k", "2", "--pad", "--out"]).arg(&f));
    assert!(padded.status.success());
    let o = run(bin().args(["reduce", "--accumulate-q", "--input"]).arg(&f));
    let r = stdout(&o);
    assert!(o.status.success());
    assert_eq!(report_value(&r, "n"), 12.0);
    assert_eq!(report_value(&r, "pad"), 2.0);
}

#[test]
fn usage_errors_exit_with_code_two() {
    let o = run(bin().args(["reduce", "--input", "/nonexistent/problem.txt"]));
    assert_eq!(o.status.code(), Some(2));
    let o = run(bin().args(["gen", "--kind", "real", "--n", "3", "--k", "4"]));
    assert_eq!(o.status.code(), Some(2));
    let o = run(bin().env("HESSRED_SEED", "x").args(["gen", "--kind", "real", "--n", "3", "--k", "1"]));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_passes_and_negative_control_fails() {
    let ok = run(bin().args(["verify", "--suite", "unitary", "--sizes", "8,16,32,64", "--seeds", "2"]));
    assert!(ok.status.success(), "{}", stdout(&ok));
    assert!(stdout(&ok).contains(" 0 failed"));
    let bad = run(bin().args(["verify", "--suite", "real", "--sizes", "8", "--seeds", "1", "--corrupt"]));
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).lines().any(|l| l.starts_with("FAIL hessenberg_shape at (7, 0)") && l.contains("seed=1")));
}

#[test]
fn companion_file_round_trip_reduces() {
    let poly = scratch("poly.txt");
    let prob = scratch("poly_problem.txt");
    // z^4 - 2z + 1, scalar
    std::fs::write(&poly, "POLY 1 4\n1 0\n-2 0\n0 0\n0 0\n1 0\n").unwrap();
    let c = run(bin().args(["companion", "--input"]).arg(&poly).arg("--out").arg(&prob));
    assert!(c.status.success(), "{}", String::from_utf8_lossy(&c.stderr));
    let o = run(bin().args(["reduce", "--accumulate-q", "--input"]).arg(&prob));
    assert!(o.status.success());
    assert!(report_value(&stdout(&o), "backward_error") <= 100.0 * 4.0 * f64::EPSILON);
    std::fs::write(&poly, "POLY 1 2\n1 0\n0 0\n2 0\n").unwrap();
    let non_monic = run(bin().args(["companion", "--input"]).arg(&poly));
    assert!(!non_monic.status.success());
}

#[test]
fn tiny_bench_completes_quickly() {
    let out = scratch("tiny.dat");
    let t = Instant::now();
    let o = run(bin()
        .args(["bench", "--mode", "sweep-n", "--ns", "16,32,64", "--k", "2", "--reps", "1", "--out"])
        .arg(&out));
    assert!(o.status.success());
    assert!(t.elapsed().as_secs_f64() < 10.0);
    let dat = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = dat.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 3);
    assert!(dat.contains("# slope fast_real"));
    let k = run(bin().args(["bench", "--mode", "sweep-k", "--kind", "unitary", "--n", "32", "--ks", "1,2,4", "--reps", "1"]));
    assert!(k.status.success());
    assert!(stdout(&k).contains("# k fast_unitary dense_oracle"));
}
