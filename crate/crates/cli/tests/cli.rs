use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ipla(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ipla"))
        .args(args)
        .env("IPLA_OUTPUT_ROOT", root)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &[&str] = &["--n-steps", "2000", "--burn-in", "200", "--replicas", "4"];

fn run_small(root: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run"];
    args.extend_from_slice(extra);
    args.extend_from_slice(SMALL);
    ipla(root, &args)
}

#[test]
fn ula_tail_start_reports_nan_rows_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_small(
        dir.path(),
        &[
            "--experiment",
            "example1",
            "--sampler",
            "ula",
            "--scenario",
            "tail",
            "--d",
            "10",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(dir.path().join("runs/example1/summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some("method,scenario,moment_order,estimate,re,cv"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    for (row, m) in rows.iter().zip(["2", "4", "6"]) {
        assert_eq!(*row, format!("ula,tail,{m},NaN,NaN,NaN"));
    }
    let chain = fs::read_to_string(dir.path().join("runs/example1/chains/chain_000.csv")).unwrap();
    assert!(chain.starts_with("step,x1,norm_sq,prox_iters,diverged\n0,7,490,0,0\n"));
    assert!(chain.trim_end().ends_with(",1"));
}

#[test]
fn missing_required_key_exits_2_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "experiment = \"custom\"\nsampler = \"ipla\"\npotential = \"quartic\"\nd = 4\nn_steps = 10\nburn_in = 1\n",
    )
    .unwrap();
    let o = ipla(dir.path(), &["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`tau`"), "{}", stderr(&o));

    let o = ipla(dir.path(), &["run", "--sampler", "ipla"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`experiment`"));
}

#[test]
fn malformed_config_reports_line_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "experiment = \"example1\"\n\ntau = = 0.1\n").unwrap();
    let o = ipla(dir.path(), &["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn io_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = ipla(
        dir.path(),
        &["run", "--config", dir.path().join("absent.toml").to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(3));

    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = run_small(&blocker, &["--experiment", "example1"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn same_seed_gives_byte_identical_summary() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let flags = ["--experiment", "example1", "--base-seed", "11"];
    assert!(run_small(a.path(), &flags).status.success());
    let mut more_workers = flags.to_vec();
    more_workers.extend(["--workers", "3"]);
    assert!(run_small(b.path(), &more_workers).status.success());
    let read = |p: &Path| fs::read(p.join("runs/example1/summary.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));

    let c = tempfile::tempdir().unwrap();
    let mut other_seed = flags.to_vec();
    other_seed[3] = "12";
    assert!(run_small(c.path(), &other_seed).status.success());
    assert_ne!(read(a.path()), read(c.path()));
}

#[test]
fn echoed_config_reproduces_the_run() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let o = run_small(
        a.path(),
        &[
            "--experiment",
            "example2",
            "--base-seed",
            "5",
            "--reference-steps",
            "20000",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = a.path().join("runs/example2");
    let echoed = out.join("config.toml");
    let o = ipla(b.path(), &["run", "--config", echoed.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let again = b.path().join("runs/example2");
    for f in ["config.toml", "summary.csv", "chains/chain_003.csv"] {
        assert_eq!(fs::read(out.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn theory_experiment_prints_k_tau_and_budgets() {
    let dir = tempfile::tempdir().unwrap();
    let o = ipla(
        dir.path(),
        &[
            "run",
            "--experiment",
            "theory",
            "--q-v",
            "3",
            "--d",
            "125",
            "--tau",
            "0.01",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    for key in ["k_tau", "moment_constant", "kl_budget_tau", "w2_budget_n"] {
        assert!(text.contains(key), "{key} missing from\n{text}");
    }
    let csv = fs::read_to_string(dir.path().join("runs/theory/theory.csv")).unwrap();
    assert!(csv.starts_with("quantity,order,eps,value,note\ndelta,,,0.0001,\n"));

    let o = ipla(dir.path(), &["theory", "--csv", "--d", "125", "--tau", "0.01"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), csv);
}

#[test]
fn small_deconvolution_writes_images() {
    let dir = tempfile::tempdir().unwrap();
    let o = ipla(
        dir.path(),
        &[
            "run",
            "--experiment",
            "example3",
            "--imaging.side",
            "16",
            "--imaging.depth",
            "3",
            "--n-steps",
            "60",
            "--burn-in",
            "10",
            "--imaging.map-iterations",
            "200",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let images = dir.path().join("runs/example3/images");
    for name in ["truth", "observed", "map", "mean", "quantile_0.05", "quantile_0.95"] {
        let pgm = fs::read(images.join(format!("{name}.pgm"))).unwrap();
        assert!(pgm.starts_with(b"P5\n16 16\n255\n"), "{name}");
        assert_eq!(pgm.len(), b"P5\n16 16\n255\n".len() + 256);
        let raw = fs::read(images.join(format!("{name}.raw"))).unwrap();
        assert_eq!(&raw[..8], b"IPLARAW1");
        assert_eq!(raw.len(), 16 + 8 * 256);
    }
    let metrics = fs::read_to_string(dir.path().join("runs/example3/metrics.csv")).unwrap();
    assert!(metrics.starts_with("metric,value\nrmse_observed,"));
}

#[test]
fn deconvolution_rejects_explicit_samplers() {
    let dir = tempfile::tempdir().unwrap();
    let o = ipla(dir.path(), &["run", "--experiment", "example3", "--sampler", "ula"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`sampler`"));
}

#[test]
fn prox_bench_writes_levels() {
    let dir = tempfile::tempdir().unwrap();
    let o = ipla(
        dir.path(),
        &[
            "prox-bench",
            "--d",
            "20",
            "--prox-bench.halvings",
            "3",
            "--prox-bench.points",
            "2",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("runs/prox_bench/prox_bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(stdout(&o).contains("R^2"));
}
