use std::path::{Path, PathBuf};

use tempfile::TempDir;
use tosca::formats::load_features;
use tosca::report::read_json;
use tosca::run_cli;
use tosca_core::data::make_splits;
use tosca_core::engine::run_scenario;
use tosca_core::{Method, ScenarioConfig, ScenarioReport};

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let f = Fixture { dir: tempfile::tempdir().unwrap() };
        let code = run_cli([
            "synth", "--out", &f.s("train.ftr"), "--test", &f.s("test.ftr"), "--dim", "8", "--classes", "6",
            "--n-train", "20", "--n-test", "6", "--seed", "3",
        ]);
        assert_eq!(code, 0);
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }

    fn run(&self, extra: &[&str]) -> i32 {
        self.run_inc("2", extra)
    }

    fn run_inc(&self, inc: &str, extra: &[&str]) -> i32 {
        let mut args: Vec<String> = ["run", "--data", &self.s("train.ftr"), "--inc", inc, "--r", "4", "--epochs", "3"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        args.extend(extra.iter().map(|s| s.to_string()));
        run_cli(args)
    }
}

fn without_time(mut r: ScenarioReport) -> ScenarioReport {
    r.wall_time_s = 0.0;
    r
}

fn json_without_time(path: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v["wall_time_s"] = serde_json::Value::Null;
    v
}

#[test]
fn synth_writes_both_splits() {
    let f = Fixture::new();
    let train = load_features(f.path("train.ftr")).unwrap();
    let test = load_features(f.path("test.ftr")).unwrap();
    assert_eq!((train.len(), test.len(), train.dim()), (120, 36, 8));
}

#[test]
fn run_matches_direct_library_call() {
    let f = Fixture::new();
    let out = f.s("r.json");
    assert_eq!(f.run(&["--test", &f.s("test.ftr"), "--method", "tosca", "--seed", "1", "--out", &out]), 0);
    let from_cli = read_json(&out).unwrap();

    let train = load_features(f.path("train.ftr")).unwrap();
    let test = load_features(f.path("test.ftr")).unwrap();
    let splits = make_splits(&train.classes(), 0, 2, 1).unwrap();
    let mut cfg = ScenarioConfig::default();
    cfg.train.rank = 4;
    cfg.train.optim.epochs = 3;
    let direct = run_scenario(&train, &test, &splits, Method::Tosca, &cfg, 1).unwrap().report;
    assert_eq!(without_time(from_cli.clone()), direct);
    assert!(from_cli.wall_time_s > 0.0);
    assert_eq!(from_cli.stages.len(), 3);
}

#[test]
fn runs_are_reproducible() {
    let f = Fixture::new();
    for tag in ["a", "b"] {
        let code = f.run(&[
            "--test",
            &f.s("test.ftr"),
            "--out",
            &f.s(&format!("{tag}.json")),
            "--bank",
            &f.s(&format!("{tag}.bank")),
        ]);
        assert_eq!(code, 0);
    }
    assert_eq!(json_without_time(&f.path("a.json")), json_without_time(&f.path("b.json")));
    assert_eq!(std::fs::read(f.path("a.bank")).unwrap(), std::fs::read(f.path("b.bank")).unwrap());
}

#[test]
fn holdout_is_used_without_test_file() {
    let f = Fixture::new();
    assert_eq!(f.run(&["--method", "simplecil", "--out", &f.s("h.json")]), 0);
    let r = read_json(f.path("h.json")).unwrap();
    assert_eq!(r.stages.len(), 3);
    assert_eq!(f.run(&["--method", "simplecil", "--out", &f.s("h2.json")]), 0);
    assert_eq!(without_time(r), without_time(read_json(f.path("h2.json")).unwrap()));
}

#[test]
fn every_method_runs_with_all_outputs() {
    let f = Fixture::new();
    for m in ["tosca", "tosca_r", "finetune", "joint", "simplecil"] {
        let code = f.run(&[
            "--test",
            &f.s("test.ftr"),
            "--method",
            m,
            "--out",
            &f.s(&format!("{m}.json")),
            "--csv",
            &f.s(&format!("{m}.csv")),
            "--plot",
            &f.s(&format!("{m}.svg")),
        ]);
        assert_eq!(code, 0, "{m}");
        assert_eq!(read_json(f.path(&format!("{m}.json"))).unwrap().method.name(), m);
        assert_eq!(std::fs::read_to_string(f.path(&format!("{m}.csv"))).unwrap().lines().count(), 4);
        assert!(std::fs::read_to_string(f.path(&format!("{m}.svg"))).unwrap().starts_with("<svg"));
    }
    let reports = ["tosca", "finetune", "joint"].map(|m| f.s(&format!("{m}.json")));
    let code = run_cli([
        "report", &reports[0], &reports[1], &reports[2], "--out", &f.s("all.csv"), "--plot", &f.s("all.svg"),
    ]);
    assert_eq!(code, 0);
    let svg = std::fs::read_to_string(f.path("all.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 3);
    assert_eq!(std::fs::read_to_string(f.path("all.csv")).unwrap().lines().count(), 10);
}

#[test]
fn flag_values_reach_the_config() {
    let f = Fixture::new();
    let code = f.run(&[
        "--test", &f.s("test.ftr"), "--method", "tosca_r", "--lambda", "0", "--batch", "7", "--lr", "0.01",
        "--l1-mode", "proximal", "--gate-residual", "false", "--gate-act", "sigmoid", "--momentum", "0",
        "--init", "2", "--out", &f.s("c.json"),
    ]);
    assert_eq!(code, 0);
    let r = read_json(f.path("c.json")).unwrap();
    let t = &r.config.train;
    assert_eq!(t.rank, 4);
    assert_eq!(t.optim.lambda_l1, 0.0);
    assert_eq!(t.optim.batch_size, 7);
    assert_eq!(t.optim.lr_max, 0.01);
    assert_eq!(t.optim.momentum, 0.0);
    assert_eq!(t.optim.l1_mode, tosca_core::L1Mode::Proximal);
    assert!(!t.luca.gate_residual);
    assert!(t.luca.reversed);
    assert_eq!(r.splits.stages[0].len(), 2);
}

#[test]
fn usage_errors_exit_2() {
    let f = Fixture::new();
    assert_eq!(f.run(&["--foo"]), 2);
    assert_eq!(run_cli(["run", "--data", "x.ftr"]), 2);
    assert_eq!(f.run(&["--method", "nope"]), 2);
    assert_eq!(f.run(&["--l1-mode", "l2"]), 2);
    assert_eq!(f.run(&["--r", "-3"]), 2);
    assert_eq!(run_cli(["frobnicate"]), 2);
    assert_eq!(run_cli(Vec::<String>::new()), 2);
    assert_eq!(run_cli(["--help"]), 0);
}

#[test]
fn runtime_failures_exit_1() {
    let f = Fixture::new();
    assert_eq!(run_cli(["run", "--data", &f.s("missing.ftr"), "--inc", "2"]), 1);
    std::fs::write(f.path("junk.ftr"), b"definitely not features").unwrap();
    assert_eq!(run_cli(["run", "--data", &f.s("junk.ftr"), "--inc", "2"]), 1);
    // 6 classes do not split into stages of 4.
    assert_eq!(f.run_inc("4", &[]), 1);
    assert_eq!(f.run(&["--method", "joint", "--bank", &f.s("j.bank")]), 1);
    assert_eq!(f.run(&["--batch", "0"]), 1);
    assert_eq!(f.run(&["--lr=-1"]), 1);

    assert_eq!(f.run(&["--out", &f.s("two.json")]), 0);
    assert_eq!(f.run_inc("3", &["--out", &f.s("three.json")]), 0);
    assert_eq!(run_cli(["report", &f.s("two.json"), &f.s("three.json"), "--plot", &f.s("p.svg")]), 1);
    assert_eq!(run_cli(["report", &f.s("absent.json")]), 1);
}

#[test]
fn gradcheck_command_passes() {
    assert_eq!(run_cli(["gradcheck", "--count", "12", "--max-dim", "6", "--max-rank", "3"]), 0);
    assert_eq!(run_cli(["gradcheck", "--count", "0"]), 1);
}

#[test]
fn sweep_writes_grid_in_order() {
    let f = Fixture::new();
    let out = f.s("sweep.csv");
    let code = run_cli([
        "sweep", "--data", &f.s("train.ftr"), "--test", &f.s("test.ftr"), "--inc", "3", "--epochs", "2",
        "--lambdas", "0,0.05", "--ranks", "2,4", "--out", &out,
    ]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], "lambda,r,A_B,A_bar,sparsity_ratio,orthogonality");
    let keys: Vec<(&str, &str)> = lines[1..]
        .iter()
        .map(|l| {
            let mut it = l.split(',');
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect();
    assert_eq!(keys, [("0.0", "2"), ("0.0", "4"), ("0.05", "2"), ("0.05", "4")]);
}
