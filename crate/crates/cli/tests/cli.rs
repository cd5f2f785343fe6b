use std::path::{Path, PathBuf};
use std::process::Command;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn upacrl(args: &[&str], env: &[(&str, &Path)]) -> (i32, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_upacrl"));
    cmd.args(args).env_remove("UPACRL_OUT");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    let text = String::from_utf8_lossy(&out.stdout).to_string() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap_or(-1), text)
}

fn run(args: &[&str]) -> (i32, String) {
    upacrl(args, &[])
}

fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let mut bytes = std::fs::read(&path).unwrap();
                if path.file_name().unwrap() == "summary.json" {
                    let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                    v.as_object_mut().unwrap().remove("runtime_secs");
                    bytes = serde_json::to_vec(&v).unwrap();
                }
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), bytes));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn run_hard_config_with_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = configs().join("bandit_hard.toml");
    let (code, text) = run(&["run", "--config", cfg.to_str().unwrap(), "--seed", "7", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("final regret") && text.contains("N_eps(0.25)") && text.contains("max level"), "{text}");
    assert!(out.join("results.csv").exists() && out.join("summary.json").exists());
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 7);
    assert_eq!(summary["schema"], 1);
}

#[test]
fn unknown_algorithm_lists_valid_ids() {
    let (code, text) = run(&["run", "--set", "track=\"bandit\"", "--set", "algorithm=\"ucb\""]);
    assert_eq!(code, 2, "{text}");
    assert!(text.contains("upac-oful") && text.contains("oful"), "{text}");
}

#[test]
fn config_errors_exit_two_and_name_the_key() {
    for (set, key) in [
        ("delta=1.5", "delta"),
        ("frobnicate=1", "frobnicate"),
        ("episodes=10", "episodes"),
        ("eps_grid=[0.1, 0.5]", "eps_grid"),
    ] {
        let (code, text) = run(&["run", "--set", "track=\"bandit\"", "--set", "algorithm=\"oful\"", "--set", set]);
        assert_eq!(code, 2, "{set}: {text}");
        assert!(text.contains(key), "{set}: {text}");
    }
}

#[test]
fn sweep_writes_cells_and_manifest_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("mdp_tabular.toml");
    let sweep = |root: &Path, jobs: &str| {
        run(&[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--set",
            "episodes=20",
            "--seeds",
            "0..3",
            "--jobs",
            jobs,
            "--out",
            root.to_str().unwrap(),
        ])
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let (code, text) = sweep(&a, "3");
    assert_eq!(code, 0, "{text}");
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    let cells = manifest["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 6);
    assert!(cells.iter().all(|c| c["status"] == "ok"));
    let dirs = std::fs::read_dir(&a).unwrap().filter(|e| e.as_ref().unwrap().path().is_dir()).count();
    assert_eq!(dirs, 6);

    let (code, text) = sweep(&b, "1");
    assert_eq!(code, 0, "{text}");
    assert_eq!(tree(&a), tree(&b));
}

#[test]
fn empty_seed_range_exits_two() {
    let cfg = configs().join("mdp_tabular.toml");
    let (code, text) = run(&["sweep", "--config", cfg.to_str().unwrap(), "--seeds", "5..5"]);
    assert_eq!(code, 2, "{text}");
}

fn tabular_file(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let mut v = serde_json::json!({
        "kind": "tabular_mdp",
        "num_states": 2,
        "num_actions": 2,
        "horizon": 2,
        "transitions": [
            [[[0.5, 0.5], [1.0, 0.0]], [[0.0, 1.0], [0.25, 0.75]]],
            [[[0.5, 0.5], [1.0, 0.0]], [[0.0, 1.0], [0.25, 0.75]]]
        ],
        "rewards": [[[0.0, 1.0], [0.5, 0.2]], [[1.0, 0.0], [0.3, 0.9]]]
    });
    edit(&mut v);
    let path = dir.join("instance.json");
    std::fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    path
}

#[test]
fn certify_tabular_instances() {
    let dir = tempfile::tempdir().unwrap();
    let good = tabular_file(dir.path(), |_| {});
    let (code, text) = run(&["certify", "--instance", good.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("PASS") && !text.contains("FAIL"), "{text}");

    let heavy = tabular_file(dir.path(), |v| v["transitions"][1][0][1] = serde_json::json!([1.0, 0.1]));
    let (code, text) = run(&["certify", "--instance", heavy.to_str().unwrap()]);
    assert_eq!(code, 4, "{text}");
    assert!(text.contains("FAIL") && text.contains("stage 2 state 0 action 1"), "{text}");

    let rich = tabular_file(dir.path(), |v| v["rewards"][0][1][0] = serde_json::json!(1.2));
    let (code, text) = run(&["certify", "--instance", rich.to_str().unwrap()]);
    assert_eq!(code, 4, "{text}");
    assert!(text.contains("reward"), "{text}");
}

#[test]
fn certify_generated_instances_from_config() {
    for name in ["bandit_sphere.toml", "mdp_tabular.toml", "bandit_hard.toml"] {
        let cfg = configs().join(name);
        let (code, text) = run(&["certify", "--config", cfg.to_str().unwrap()]);
        assert_eq!(code, 0, "{name}: {text}");
    }
}

#[test]
fn audit_passes_fresh_runs_and_rejects_missing_dirs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lsvi");
    let (code, text) = run(&[
        "run",
        "--set",
        "track=\"mdp\"",
        "--set",
        "algorithm=\"lsvi-ucb\"",
        "--set",
        "episodes=50",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{text}");
    let (code, text) = run(&["audit", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("PASS regret-consistency"), "{text}");

    let (code, text) = run(&["audit", dir.path().join("nope").to_str().unwrap()]);
    assert_eq!(code, 5, "{text}");
}

#[test]
fn default_output_root_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = upacrl(
        &["run", "--set", "track=\"bandit\"", "--set", "algorithm=\"oful\"", "--set", "rounds=10", "--seed", "3"],
        &[("UPACRL_OUT", dir.path())],
    );
    assert_eq!(code, 0, "{text}");
    let made: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(made.len(), 1, "{made:?}");
    assert!(dir.path().join(&made[0]).join("results.csv").exists());
}
