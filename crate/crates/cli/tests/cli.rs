use std::path::Path;
use std::process::{Command, Output};

use bass_core::metrics::load_report_json;
use bass_core::topology::load_scenario;

fn bass_sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bass-sim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn generated(dir: &Path, extra: &[&str]) -> String {
    let out = path(dir, "scenario.json");
    let mut args = vec!["generate", "--out", &out];
    args.extend_from_slice(extra);
    let res = bass_sim(&args);
    assert!(res.status.success(), "{}", stderr(&res));
    out
}

#[test]
fn generate_defaults_to_60_8_10() {
    let dir = tempfile::tempdir().unwrap();
    let file = generated(dir.path(), &[]);
    let sc = load_scenario(Path::new(&file)).unwrap();
    assert_eq!(
        (sc.clients.len(), sc.agg_servers.len(), sc.origins.len()),
        (60, 8, 10)
    );
}

#[test]
fn generate_same_seed_same_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let fa = generated(a.path(), &["--seed", "1"]);
    let fb = generated(b.path(), &["--seed", "1"]);
    assert_eq!(std::fs::read(fa).unwrap(), std::fs::read(fb).unwrap());
}

#[test]
fn generate_model_flags_apply() {
    let dir = tempfile::tempdir().unwrap();
    let file = generated(
        dir.path(),
        &[
            "--clients",
            "3",
            "--server-capacity",
            "500",
            "--noise-sigma",
            "0",
            "--wifi-links",
            "4",
        ],
    );
    let sc = load_scenario(Path::new(&file)).unwrap();
    assert_eq!(sc.net_params.noise_sigma, 0.0);
    assert!(sc
        .agg_servers
        .iter()
        .all(|s| s.total_capacity_mbps == 500.0));
    assert!(sc.clients.iter().all(|c| c.links.len() == 5));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "x.json");
    let res = bass_sim(&["generate", "--clients", "0", "--out", &out]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!dir.path().join("x.json").exists());

    assert_eq!(
        bass_sim(&["generate", "--out", &out, "--bogus"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(bass_sim(&[]).status.code(), Some(2));

    let res = bass_sim(&[
        "compare",
        "--scenario",
        &out,
        "--policies",
        "bass_greedy,fastest",
    ]);
    assert_eq!(res.status.code(), Some(2));
    let err = stderr(&res);
    for name in ["bass_exact", "bass_greedy", "random"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn missing_scenario_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let res = bass_sim(&[
        "run",
        "--scenario",
        "/definitely/not/here.json",
        "--out",
        &path(dir.path(), "o"),
    ]);
    assert_eq!(res.status.code(), Some(1));
    assert!(stderr(&res).contains("/definitely/not/here.json"));
}

#[test]
fn exact_policy_over_cap_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let sc = generated(dir.path(), &["--clients", "20"]);
    let res = bass_sim(&[
        "run",
        "--scenario",
        &sc,
        "--policy",
        "bass_exact",
        "--out",
        &path(dir.path(), "o"),
    ]);
    assert_eq!(res.status.code(), Some(1));
    assert!(stderr(&res).contains("greedy"));
}

#[test]
fn run_writes_records_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let sc = generated(dir.path(), &[]);
    let out = path(dir.path(), "out");
    let res = bass_sim(&["run", "--scenario", &sc, "--epochs", "5", "--out", &out]);
    assert!(res.status.success(), "{}", stderr(&res));
    let text = stdout(&res);
    for key in [
        "mean gamma:",
        "fraction gamma = 1:",
        "mean gain multiplier:",
    ] {
        assert!(text.contains(key), "{text}");
    }
    let csv = std::fs::read_to_string(dir.path().join("out/records.csv")).unwrap();
    assert!(csv.lines().count() > 60);
    let report = load_report_json(&dir.path().join("out/report.json")).unwrap();
    assert_eq!(report.policies[0].epochs, 5);
    assert_eq!(report.rows.len(), csv.lines().count() - 1);
}

#[test]
fn zero_epochs_gives_empty_records_and_zero_summary() {
    let dir = tempfile::tempdir().unwrap();
    let sc = generated(dir.path(), &["--clients", "5"]);
    let out = path(dir.path(), "out");
    let res = bass_sim(&["run", "--scenario", &sc, "--epochs", "0", "--out", &out]);
    assert!(res.status.success(), "{}", stderr(&res));
    assert!(stdout(&res).contains("mean gamma: 0.0000"));
    let csv = std::fs::read_to_string(dir.path().join("out/records.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn compare_greedy_at_least_random() {
    let dir = tempfile::tempdir().unwrap();
    let sc = generated(dir.path(), &[]);
    let out = path(dir.path(), "cmp");
    let res = bass_sim(&[
        "compare",
        "--scenario",
        &sc,
        "--epochs",
        "10",
        "--out",
        &out,
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    assert!(stdout(&res).contains("delta_gamma"));
    let report = load_report_json(&dir.path().join("cmp/report.json")).unwrap();
    let [bass, random] = &report.policies[..] else {
        panic!("expected two summaries")
    };
    assert!(bass.mean_gamma >= random.mean_gamma);
    for p in ["bass_greedy", "random"] {
        let cdf =
            std::fs::read_to_string(dir.path().join(format!("cmp/gamma_cdf_{p}.csv"))).unwrap();
        assert!(cdf.starts_with("value,fraction\n"));
        assert!(cdf.trim_end().ends_with(",1"));
    }
}

#[test]
fn compare_single_policy_has_no_delta() {
    let dir = tempfile::tempdir().unwrap();
    let sc = generated(dir.path(), &["--clients", "10"]);
    let res = bass_sim(&[
        "compare",
        "--scenario",
        &sc,
        "--epochs",
        "2",
        "--policies",
        "random",
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    let text = stdout(&res);
    assert!(!text.contains("delta"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn report_reemits_saved_run() {
    let dir = tempfile::tempdir().unwrap();
    let sc = generated(dir.path(), &["--clients", "10"]);
    let out = path(dir.path(), "out");
    assert!(
        bass_sim(&["run", "--scenario", &sc, "--epochs", "3", "--out", &out])
            .status
            .success()
    );
    let again = path(dir.path(), "again.csv");
    let res = bass_sim(&[
        "report",
        "--input",
        &path(dir.path(), "out/report.json"),
        "--format",
        "csv",
        "--out",
        &again,
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    assert_eq!(
        std::fs::read(&again).unwrap(),
        std::fs::read(dir.path().join("out/records.csv")).unwrap()
    );
}

#[test]
fn log_level_from_env() {
    let dir = tempfile::tempdir().unwrap();
    let sc = generated(dir.path(), &["--clients", "4"]);
    let res = Command::new(env!("CARGO_BIN_EXE_bass-sim"))
        .args([
            "run",
            "--scenario",
            &sc,
            "--epochs",
            "1",
            "--out",
            &path(dir.path(), "o"),
        ])
        .env("BASS_SIM_LOG", "debug")
        .output()
        .unwrap();
    assert!(res.status.success());
    assert!(stderr(&res).contains("epoch 0"), "{}", stderr(&res));
}
