use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pvburst"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn selfsimilar_check_passes() {
    let o = run(&["selfsimilar", "--xi", "1", "--check"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("a 6.563439231212e-3"), "{out}");
    assert!(out.contains("check passed"));
    let o = run(&["selfsimilar", "--xi", "-2.5", "--check"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

fn burst_file(name: &str) -> PathBuf {
    let out = scratch(name);
    let o = run(&["burst", scenario("burst_free.toml").to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("all certificates pass"));
    out
}

#[test]
fn burst_then_verify() {
    let out = burst_file("verify.pvtraj");
    let o = run(&["verify", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("jump -2.9237773616e-2"));
}

// Nudging one stored position after the burst leaves a file that parses but
// is no longer a weak solution.
#[test]
fn corrupted_trajectory_is_rejected() {
    let out = burst_file("corrupt.pvtraj");
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let data = lines.iter().position(|l| l == "data").unwrap();
    let target = lines
        .iter()
        .enumerate()
        .skip(data + 1)
        .filter(|(_, l)| l.starts_with("1 0 "))
        .map(|(k, _)| k)
        .nth(300)
        .unwrap();
    let mut f: Vec<String> = lines[target].split_whitespace().map(String::from).collect();
    let re: f64 = f[3].parse().unwrap();
    f[3] = format!("{:.16e}", re + 1e-3);
    lines[target] = f.join(" ");
    let bad = scratch("corrupt_edited.pvtraj");
    std::fs::write(&bad, lines.join("\n") + "\n").unwrap();
    let o = run(&["verify", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("weak residual"), "{}", stderr(&o));
}

#[test]
fn truncated_file_is_a_read_error() {
    let out = burst_file("trunc.pvtraj");
    let text = std::fs::read_to_string(&out).unwrap();
    let bad = scratch("trunc_edited.pvtraj");
    std::fs::write(&bad, &text[..text.len() / 2]).unwrap();
    let o = run(&["verify", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("read"), "{}", stderr(&o));
}

#[test]
fn export_formats() {
    let out = burst_file("export.pvtraj");
    let o = run(&["export", out.to_str().unwrap(), "--format", "table"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = stdout(&o);
    let rows = table.lines().filter(|l| !l.starts_with('#')).count();
    assert!(rows > 100, "{rows}");
    let o = run(&["export", out.to_str().unwrap(), "--format", "plotdata"]);
    assert!(o.status.success());
    assert!(!stdout(&o).is_empty());
    let o = run(&["export", out.to_str().unwrap(), "--format", "json"]);
    assert!(!o.status.success());
}

#[test]
fn unknown_scenario_key_is_rejected() {
    let path = scratch("typo.toml");
    std::fs::write(&path, "version = 1\n[burst]\nxi = 1.0\nxii = 2.0\n").unwrap();
    let o = run(&["burst", path.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("xii"), "{}", stderr(&o));
}

#[test]
fn collapse_merges_at_the_burst_point() {
    let out = scratch("collapse.pvtraj");
    let o = run(&["collapse", scenario("collapse.toml").to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("merge at t ="));
}

#[test]
fn simulate_is_deterministic() {
    let a = scratch("sim_a.pvtraj");
    let b = scratch("sim_b.pvtraj");
    for p in [&a, &b] {
        let o = run(&["simulate", scenario("simulate.toml").to_str().unwrap(), "-o", p.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn markov_ensemble_is_deterministic() {
    let a = scratch("markov_a.tsv");
    let b = scratch("markov_b.tsv");
    for p in [&a, &b] {
        let o = run(&["markov", scenario("markov.toml").to_str().unwrap(), "--samples", "6", "-o", p.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("samples 6 completed 6"));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}
