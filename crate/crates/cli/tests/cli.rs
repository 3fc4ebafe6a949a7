use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_srampuf"))
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("binary runs")
}

struct ServerProcess {
    child: Child,
    endpoint: String,
}

impl ServerProcess {
    fn start(cwd: &Path, config: &str, seed: &str, chips: &str) -> Self {
        let mut child = bin()
            .args(["serve", "--config", config, "--seed", seed, "--chips", chips, "--endpoint", "127.0.0.1:0"])
            .current_dir(cwd)
            .stdout(Stdio::piped())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let endpoint = line.trim().strip_prefix("listening on ").expect("server announces its address").to_string();
        ServerProcess { child, endpoint }
    }
}

impl Drop for ServerProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

#[test]
fn gen_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["gen", "--out", "a.cfg"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["gen", "--config", "a.cfg", "--out", "b.cfg"], dir.path());
    assert!(out.status.success());
    let a = std::fs::read_to_string(dir.path().join("a.cfg")).unwrap();
    assert_eq!(a, std::fs::read_to_string(dir.path().join("b.cfg")).unwrap());
    assert_eq!(a.matches("\ndesign ").count(), 11);
    assert!(a.contains("sigma_noise = "));
}

#[test]
fn unknown_orientation_is_reported_with_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.cfg"),
        "sigma_noise = 0.1\n\ndesign X\n  depth = 64\n  width = 8\n  mux = 4\n  orient = R45\n  pattern = 0(4)1(4)\n",
    )
    .unwrap();
    let out = run(&["gen", "--config", "bad.cfg", "--out", "x.cfg"], dir.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 7"), "{err}");
}

#[test]
fn serve_collect_analyze_report() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(run(&["gen", "--out", "fp.cfg"], p).status.success());
    let server = ServerProcess::start(p, "fp.cfg", "11", "4");

    let out = run(
        &["collect", "--config", "fp.cfg", "--endpoint", &server.endpoint, "--chips", "4", "--cycles", "3", "--out", "dumps"],
        p,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("wrote 132 dump files"));

    let out = run(&["analyze", "dumps", "--seed", "11", "--out", "report.json"], p);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.starts_with("| SRAM-PUF"));
    assert_eq!(table.lines().filter(|l| l.starts_with("| P")).count(), 11);
    assert!(p.join("report_plots/P3_acf.dat").exists());
    assert!(p.join("report_plots/P1_a_profile.dat").exists());

    let out = run(&["report", "report.json"], p);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), table);
    let out = run(&["report", "report.json", "--json"], p);
    assert_eq!(out.stdout, std::fs::read(p.join("report.json")).unwrap());

    // a single cycle cannot give a reliability figure
    let out = run(
        &["collect", "--config", "fp.cfg", "--endpoint", &server.endpoint, "--chips", "2", "--cycles", "1", "--out", "short"],
        p,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["analyze", "short", "--out", "short.json"], p);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient data"));

    let out = run(&["analyze", "dumps", "--baseline", "Q9", "--out", "q.json"], p);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("baseline design Q9"));
}

#[test]
fn malformed_report_fails() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("r.json"), "{ not json").unwrap();
    let out = run(&["report", "r.json"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("report parse error"));
    let out = run(&["report", "missing.json"], dir.path());
    assert!(!out.status.success());
}
