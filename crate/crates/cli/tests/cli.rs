use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const RING: &str = "nodes 4\nedge 0 1\nedge 1 2\nedge 2 3\nedge 3 0\n";

fn srwa(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srwa")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn workspace(body: &str) -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("ring4.edges"), RING).unwrap();
    let cfg = dir.path().join("exp.toml");
    let text = format!(
        "[topology]\npath = \"ring4.edges\"\nwavelengths = 2\n\n[traffic]\narrival_rate = 2.0\nmean_holding = 2.0\n\n{body}"
    );
    fs::write(&cfg, text).unwrap();
    (dir, cfg)
}

fn run(dir: &TempDir, cmd: &str, cfg: &Path, extra: &[&str]) -> (Output, PathBuf) {
    let out = dir.path().join(format!("out-{cmd}"));
    let mut args = vec![cmd, cfg.to_str().unwrap(), "-o", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    (srwa(&args, dir.path()), out)
}

fn assert_files(out: &Path, names: &[&str]) {
    for n in ["config.toml", "VERSION"].iter().chain(names) {
        assert!(out.join(n).is_file(), "missing {n} in {}", out.display());
    }
}

#[test]
fn missing_config_is_an_error() {
    let dir = TempDir::new().unwrap();
    let o = srwa(&["solve", "absent.toml", "-o", "out"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("absent.toml"));
}

#[test]
fn invalid_config_is_an_error() {
    let (dir, cfg) = workspace("[instance]\nscenaros = 3\n");
    let (o, _) = run(&dir, "solve", &cfg, &[]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("scenaros"));
}

#[test]
fn solve_writes_result_and_refuses_reuse() {
    let (dir, cfg) = workspace("[instance]\ndemand = { \"0,2\" = 1, \"1,3\" = 1 }\nscenarios = 3\nseed = 4\n");
    let (o, out) = run(&dir, "solve", &cfg, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_files(&out, &["result.json", "scenarios.json"]);
    let result: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(result["status"], "optimal");
    assert!(result["objective"].as_f64().unwrap() >= 2.0 - 1e-9);
    let scenarios: Vec<serde_json::Value> = serde_json::from_str(&fs::read_to_string(out.join("scenarios.json")).unwrap()).unwrap();
    assert_eq!(scenarios.len(), 3);

    let (again, _) = run(&dir, "solve", &cfg, &[]);
    assert_eq!(code(&again), 1);
    let (forced, _) = run(&dir, "solve", &cfg, &["--force"]);
    assert_eq!(code(&forced), 0);
    let mut rerun: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    let mut first = result;
    for v in [&mut first, &mut rerun] {
        v["stats"]["time_s"] = serde_json::Value::Null;
    }
    assert_eq!(first, rerun);
}

#[test]
fn overrides_are_recorded_in_the_resolved_config() {
    let (dir, cfg) = workspace("[instance]\nscenarios = 2\n");
    let (o, out) = run(&dir, "solve", &cfg, &["--set", "benders.method=extensive", "--set", "instance.seed=9"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let resolved = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(resolved.contains("method = \"extensive\""), "{resolved}");
    assert!(resolved.contains("seed = 9"), "{resolved}");
    let (bad, _) = run(&dir, "evss", &cfg, &["--set", "benders.methd=extensive"]);
    assert_eq!(code(&bad), 1);
}

#[test]
fn node_limit_exits_with_limit_code() {
    let body = "[instance]\nrelaxation = \"ip-ip\"\ndemand = { \"0,2\" = 2, \"1,3\" = 2, \"0,1\" = 1 }\nscenarios = 4\n\n[benders]\nmethod = \"extensive\"\n\n[solver]\nnode_limit = 1\n";
    let (dir, cfg) = workspace(body);
    let (o, out) = run(&dir, "solve", &cfg, &[]);
    let c = code(&o);
    // A root node that is already integral finishes within the limit.
    assert!(c == 0 || c == 2, "exit {c}: {}", String::from_utf8_lossy(&o.stderr));
    assert_files(&out, &["result.json"]);
}

#[test]
fn simulate_writes_traces_and_comparison() {
    let (dir, cfg) = workspace("[simulation]\nhorizon = 4\nrepetitions = 3\nscenario_count = 2\n");
    let (o, out) = run(&dir, "simulate", &cfg, &["--threads", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_files(&out, &["traces.csv", "comparison.csv", "summary.json"]);
    let mut traces = csv::Reader::from_path(out.join("traces.csv")).unwrap();
    assert_eq!(traces.records().count(), 2 * 3 * 4);
    let mut cmp = csv::Reader::from_path(out.join("comparison.csv")).unwrap();
    assert_eq!(cmp.records().count(), 4);

    let single = run(&dir, "simulate", &cfg, &["--set", "simulation.policies=[\"maxrwa\"]", "--force"]);
    assert_eq!(code(&single.0), 0);
}

#[test]
fn parallel_and_serial_simulations_agree() {
    let (dir, cfg) = workspace("[simulation]\nhorizon = 3\nrepetitions = 4\nscenario_count = 2\n");
    let (a, out_a) = run(&dir, "simulate", &cfg, &["--threads", "1"]);
    assert_eq!(code(&a), 0);
    let out_b = dir.path().join("out-parallel");
    let b = srwa(&["simulate", cfg.to_str().unwrap(), "-o", out_b.to_str().unwrap(), "--threads", "3"], dir.path());
    assert_eq!(code(&b), 0);
    assert_eq!(fs::read(out_a.join("traces.csv")).unwrap(), fs::read(out_b.join("traces.csv")).unwrap());
}

#[test]
fn saa_and_evss_write_tables() {
    let body = "[instance]\ndemand = { \"0,2\" = 1, \"1,3\" = 1 }\nscenarios = 4\n\n[saa]\nlevels = [2, 4]\nrepetitions = 2\nevaluation_size = 20\n";
    let (dir, cfg) = workspace(body);
    let (o, out) = run(&dir, "saa", &cfg, &[]);
    assert!(code(&o) == 0 || code(&o) == 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert_files(&out, &["saa.csv", "saa.json"]);
    assert_eq!(csv::Reader::from_path(out.join("saa.csv")).unwrap().records().count(), 2);

    let (o, out) = run(&dir, "evss", &cfg, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_files(&out, &["evss.csv", "evss.json"]);
    let evss: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("evss.json")).unwrap()).unwrap();
    assert!(evss["evss"].as_f64().unwrap() >= -1e-6);
}

#[test]
fn validate_topology_accepts_names_and_files() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("ring4.edges"), RING).unwrap();
    let o = srwa(&["validate-topology"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("brazil"));
    assert_eq!(code(&srwa(&["validate-topology", "nsf", "ring4.edges"], dir.path())), 0);
    assert_eq!(code(&srwa(&["validate-topology", "arpanet"], dir.path())), 1);
}
