use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pbradmm::PartitionProblem;
use tempfile::TempDir;

const BASE: &str = r#"
schema = "pbradmm-config/1"
[graph]
n = 6
radius = 0.5
seed = 1
[instance]
seed = 2
[params]
alpha = 0.75
rho = 3.0
"#;

fn pbradmm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pbradmm")).args(args).output().unwrap()
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, format!("{BASE}{extra}")).unwrap();
    path.to_str().unwrap().to_string()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

/// Relative-error column of a single-run CSV.
fn errors(csv: &str) -> Vec<f64> {
    csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect()
}

#[test]
fn generate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = pbradmm(&["generate", "--config", &config, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["instance.json", "graph.txt"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
    }
    let p = PartitionProblem::from_json(&fs::read_to_string(a.join("instance.json")).unwrap()).unwrap();
    assert_eq!(p.node_count(), 6);
    assert!(p.graph().is_connected());
}

#[test]
fn single_node_instance() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "").replace("config.toml", "one.toml");
    fs::write(&config, BASE.replace("n = 6", "n = 1")).unwrap();
    let out = dir.path().join("o");
    assert_eq!(code(&pbradmm(&["generate", "--config", &config, "--out", out.to_str().unwrap()])), 0);
    let p = PartitionProblem::from_json(&fs::read_to_string(out.join("instance.json")).unwrap()).unwrap();
    assert_eq!(p.node_count(), 1);
    assert_eq!(p.graph().edge_count(), 0);
}

#[test]
fn fig1_preset_gives_a_connected_ten_node_instance() {
    let dir = TempDir::new().unwrap();
    let o = pbradmm(&["generate", "--preset", "fig1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let p = PartitionProblem::from_json(&fs::read_to_string(dir.path().join("instance.json")).unwrap()).unwrap();
    assert_eq!(p.node_count(), 10);
    assert!(p.graph().is_connected());
}

#[test]
fn presets_are_listed_and_printed() {
    let o = pbradmm(&["presets"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "fig1\nfig2\nfig3\nfig4\n");
    let o = pbradmm(&["presets", "fig2"]);
    assert!(String::from_utf8(o.stdout).unwrap().contains("[sweep]"));
    assert_eq!(code(&pbradmm(&["presets", "nope"])), 2);
}

#[test]
fn lossless_run_converges() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "[run]\nk_max = 2000\nseed = 3\n");
    let o = pbradmm(&["run", "--config", &config, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let run = fs::read_to_string(dir.path().join("run.csv")).unwrap();
    assert!(run.starts_with("k,rel_error,diverged\n"));
    let e = errors(&run);
    assert_eq!(e.len(), 2000);
    assert!(*e.last().unwrap() < 1e-6);
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("k,mean_rel_error,min,max\n"));
}

#[test]
fn one_round_gives_one_row() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "[loss]\np = 0.3\n[run]\nk_max = 1\nruns = 4\nseed = 3\n");
    assert_eq!(code(&pbradmm(&["run", "--config", &config, "--out", dir.path().to_str().unwrap()])), 0);
    for name in ["run.csv", "trace.csv"] {
        assert_eq!(fs::read_to_string(dir.path().join(name)).unwrap().lines().count(), 2, "{name}");
    }
}

#[test]
fn total_loss_gives_a_flat_trace() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "[loss]\np = 1.0\n[run]\nk_max = 30\nseed = 3\n");
    assert_eq!(code(&pbradmm(&["run", "--config", &config, "--out", dir.path().to_str().unwrap()])), 0);
    let e = errors(&fs::read_to_string(dir.path().join("run.csv")).unwrap());
    assert_eq!(e.len(), 30);
    assert!(e.iter().all(|&v| v == e[0]));
}

#[test]
fn per_edge_loss_table_is_accepted_and_checked() {
    let dir = TempDir::new().unwrap();
    let gen = dir.path().join("g");
    let config = write_config(dir.path(), "[run]\nk_max = 5\nseed = 3\n");
    assert_eq!(code(&pbradmm(&["generate", "--config", &config, "--out", gen.to_str().unwrap()])), 0);
    let p = PartitionProblem::from_json(&fs::read_to_string(gen.join("instance.json")).unwrap()).unwrap();
    let (i, j) = p.graph().edges().next().unwrap();
    let table = format!("[loss]\np = 0.1\ntable = [{{ from = {i}, to = {j}, p = 0.9 }}]\n[run]\nk_max = 5\nseed = 3\n");
    let config = write_config(dir.path(), &table);
    assert_eq!(code(&pbradmm(&["run", "--config", &config, "--out", dir.path().to_str().unwrap()])), 0);

    let bad = "[loss]\ntable = [{ from = 0, to = 0, p = 0.5 }]\n[run]\nk_max = 5\nseed = 3\n";
    let config = write_config(dir.path(), bad);
    assert_eq!(code(&pbradmm(&["run", "--config", &config, "--out", dir.path().to_str().unwrap()])), 2);
}

#[test]
fn runs_are_reproducible_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "[loss]\np = 0.3\n[run]\nk_max = 200\nruns = 6\nseed = 3\n[series]\nparam = \"p\"\nvalues = [0.0, 0.3]\n",
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&pbradmm(&["run", "--config", &config, "--out", a.to_str().unwrap()])), 0);
    assert_eq!(code(&pbradmm(&["--jobs", "1", "run", "--config", &config, "--out", b.to_str().unwrap()])), 0);
    for name in ["trace_p_0.csv", "trace_p_0.3.csv", "run_p_0.csv", "run_p_0.3.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn seed_override_changes_the_instance() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&pbradmm(&["generate", "--config", &config, "--out", a.to_str().unwrap()])), 0);
    let o = pbradmm(&["generate", "--config", &config, "--out", b.to_str().unwrap(), "--seed-override", "77"]);
    assert_eq!(code(&o), 0);
    assert_ne!(fs::read(a.join("instance.json")).unwrap(), fs::read(b.join("instance.json")).unwrap());
}

#[test]
fn divergence_exits_with_code_3() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "[run]\nk_max = 3000\nseed = 3\n").replace("config.toml", "div.toml");
    fs::write(&config, format!("{}[run]\nk_max = 3000\nseed = 3\n", BASE.replace("alpha = 0.75", "alpha = 3.0")))
        .unwrap();
    let o = pbradmm(&["run", "--config", &config, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let run = fs::read_to_string(dir.path().join("run.csv")).unwrap();
    assert!(run.trim_end().ends_with(",1"));
}

#[test]
fn check_passes_and_handles_zero_rounds() {
    let dir = TempDir::new().unwrap();
    let gen = dir.path().join("g");
    let config = write_config(dir.path(), "[run]\nseed = 3\n");
    assert_eq!(code(&pbradmm(&["generate", "--config", &config, "--out", gen.to_str().unwrap()])), 0);
    let instance = gen.join("instance.json");
    let o = pbradmm(&[
        "check",
        "--config",
        &config,
        "--instance",
        instance.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    for (extra, expected) in [("[check]\nk_max = 0\nseed = 4\n", 0), ("[check]\nk_max = 20\nseed = 4\n", 0)] {
        let c = write_config(dir.path(), extra);
        let o = pbradmm(&[
            "check",
            "--config",
            &c,
            "--instance",
            instance.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code(&o), expected);
    }
    let report = fs::read_to_string(dir.path().join("check.csv")).unwrap();
    assert!(report.lines().nth(1).unwrap().ends_with(",true"));

    let c = write_config(dir.path(), "[check]\nk_max = 0\nseed = 4\n");
    let o = pbradmm(&[
        "check",
        "--config",
        &c,
        "--instance",
        instance.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(String::from_utf8(o.stdout).unwrap().contains("deviation over 0 rounds: 0e0"));

    let classic = write_config(dir.path(), "[check]\nseed = 4\n").replace("config.toml", "half.toml");
    fs::write(&classic, format!("{}[check]\nseed = 4\n", BASE.replace("alpha = 0.75", "alpha = 0.5"))).unwrap();
    assert_eq!(code(&pbradmm(&["check", "--config", &classic, "--out", dir.path().to_str().unwrap()])), 0);
}

#[test]
fn impossible_check_tolerance_exits_with_code_4() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "[check]\nk_max = 50\nseed = 4\ntol = 0.0\n");
    assert_eq!(code(&pbradmm(&["check", "--config", &config, "--out", dir.path().to_str().unwrap()])), 4);
    let config = write_config(dir.path(), "[check]\nk_max = 50\nseed = 4\ntol = -1.0\n");
    assert_eq!(code(&pbradmm(&["check", "--config", &config, "--out", dir.path().to_str().unwrap()])), 2);
}

#[test]
fn sweep_writes_cells_and_boundaries() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "[run]\nk_max = 5000\nruns = 2\nseed = 3\n[sweep]\nrho = [1.0, 3.0]\nalpha = [0.25, 0.5, 0.75, 3.0]\np = [0.0, 0.2]\n",
    );
    let o = pbradmm(&["sweep", "--config", &config, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cells = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = cells.lines();
    assert_eq!(lines.next().unwrap(), "rho,alpha,p,outcome,converged_at_median");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 16);
    for r in &rows {
        let alpha: f64 = r[1].parse().unwrap();
        let expected = if alpha < 1.0 { "converged" } else { "diverged" };
        assert_eq!(r[3], expected, "{r:?}");
    }
    let boundary = fs::read_to_string(dir.path().join("boundary.csv")).unwrap();
    assert_eq!(boundary.lines().next().unwrap(), "rho,p,alpha_boundary");
    assert!(boundary.lines().skip(1).all(|l| l.ends_with(",0.75")), "{boundary}");
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = TempDir::new().unwrap();
    let empty = write_config(dir.path(), "[run]\nseed = 3\n[sweep]\nrho = []\nalpha = [0.5]\np = [0.0]\n");
    assert_eq!(code(&pbradmm(&["sweep", "--config", &empty, "--out", dir.path().to_str().unwrap()])), 2);

    let no_seed = dir.path().join("noseed.toml");
    fs::write(&no_seed, BASE.replace("seed = 1\n", "")).unwrap();
    assert_eq!(
        code(&pbradmm(&["generate", "--config", no_seed.to_str().unwrap(), "--out", dir.path().to_str().unwrap()])),
        2
    );

    let no_run = write_config(dir.path(), "");
    assert_eq!(code(&pbradmm(&["run", "--config", &no_run, "--out", dir.path().to_str().unwrap()])), 2);

    let schema = dir.path().join("schema.toml");
    fs::write(&schema, BASE.replace("pbradmm-config/1", "pbradmm-config/2")).unwrap();
    assert_eq!(code(&pbradmm(&["generate", "--config", schema.to_str().unwrap()])), 2);

    let require = dir.path().join("require.toml");
    fs::write(&require, BASE.replace("radius = 0.5", "radius = 0.01\nconnectivity = \"require\"")).unwrap();
    assert_eq!(
        code(&pbradmm(&["generate", "--config", require.to_str().unwrap(), "--out", dir.path().to_str().unwrap()])),
        2
    );

    assert_eq!(code(&pbradmm(&["generate", "--preset", "fig0"])), 2);
}

#[test]
fn missing_files_exit_with_code_1() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.toml");
    assert_eq!(code(&pbradmm(&["generate", "--config", missing.to_str().unwrap()])), 1);
    let config = write_config(dir.path(), "[run]\nseed = 3\n");
    let o = pbradmm(&[
        "run",
        "--config",
        &config,
        "--instance",
        missing.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
}
