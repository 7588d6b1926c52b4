use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::Value;

fn coliseum(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coliseum"))
        .args(args)
        .arg("--set")
        .arg(format!("output.dir=\"{}\"", dir.display()))
        .env_remove("COLISEUM_OUTPUT_DIR")
        .env_remove("COLISEUM_THREADS")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

const SMALL: [&str; 4] = ["--set", "grid.size=48", "--set", "sampling.samples=100"];

#[test]
fn render_emits_four_reproducible_files() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let args = [&["render"][..], &SMALL].concat();
    let out = coliseum(&a, &args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut names: Vec<String> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "julia_cloud.csv",
            "julia_mask.pgm",
            "render_meta.json",
            "t_field.pgm"
        ]
    );
    let meta = json(&a.join("render_meta.json"));
    assert_eq!(meta["seed"], 1);
    assert!(meta["undecided"]["max"].is_number());
    let hash = meta["config_hash"].as_str().unwrap().to_string();
    let pgm = std::fs::read(a.join("t_field.pgm")).unwrap();
    assert!(String::from_utf8_lossy(&pgm[..100]).contains(&hash));
    assert!(std::fs::read_to_string(a.join("julia_cloud.csv"))
        .unwrap()
        .starts_with(&format!("# config_hash {hash}\nre,im\n")));

    assert!(coliseum(&b, &args).status.success());
    for f in ["t_field.pgm", "julia_mask.pgm", "julia_cloud.csv"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn config_file_and_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[system]\npolys = [\"0,0,1\"]\n").unwrap();
    let out = coliseum(tmp.path(), &["render", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("weights"));

    let out = coliseum(tmp.path(), &["verify", "--set", "verify.checks=[\"nope\"]"]);
    assert_eq!(out.status.code(), Some(2));

    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = coliseum(
        &blocker.join("sub"),
        &["staircase", "--set", "staircase.points=5"],
    );
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn staircase_sweep_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let out = coliseum(
        tmp.path(),
        &[
            "staircase",
            "--set",
            "staircase.system=\"lebesgue\"",
            "--set",
            "staircase.points=5",
        ],
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(tmp.path().join("staircase.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(
        rows,
        ["0,0,0", "0.25,0.25,0", "0.5,0.5,0", "0.75,0.75,0", "1,1,0"]
    );
}

#[test]
fn one_dimensional_suite_is_fast() {
    let tmp = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let out = coliseum(
        tmp.path(),
        &["verify", "--set", "verify.checks=[\"staircase\"]"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(started.elapsed().as_secs_f64() < 10.0);
    let report = json(&tmp.path().join("verify_report.json"));
    assert_eq!(report["passed"], true);
    assert_eq!(report["checks"][0]["name"], "staircase");
}

#[test]
fn shuffled_annuli_fail_verification() {
    let tmp = tempfile::tempdir().unwrap();
    let base = [
        "verify",
        "--set",
        "verify.checks=[\"order_audit\"]",
        "--set",
        "verify.grid=256",
        "--set",
        "verify.samples=300",
    ];
    let ok = coliseum(tmp.path(), &base);
    assert!(
        ok.status.success(),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
    let shuffled = [
        &base[..],
        &["--set", "verify.gap_prefixes=[\"2\", \"1\", \"\", \"22\"]"],
    ]
    .concat();
    let out = coliseum(tmp.path(), &shuffled);
    assert_eq!(out.status.code(), Some(3));
    let report = json(&tmp.path().join("verify_report.json"));
    assert_eq!(
        report["checks"][0]["detail"]["audit_error_kind"],
        "OrderViolation"
    );
}

#[test]
fn analyze_reference_report() {
    let tmp = tempfile::tempdir().unwrap();
    // below ~90 pixels the |z| = 4 circle is clipped by the window
    let args = [
        "analyze",
        "--set",
        "analysis.holder_points=4",
        "--set",
        "analysis.kernel_points=20",
        "--set",
        "grid.size=96",
        "--set",
        "sampling.samples=100",
    ];
    let out = coliseum(tmp.path(), &args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = json(&tmp.path().join("analysis.json"));
    assert_eq!(report["u_exponent"]["value"], 0.5);
    assert_eq!(report["dim_lower_bound"], 1.5);
    let kinds: Vec<&str> = report["invert_t"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["kind"].as_str().unwrap())
        .collect();
    assert_eq!(kinds, ["gap_pair", "gap_pair", "component"]);
    assert_eq!(report["invert_t"][2]["word"], "(12)");
    assert_eq!(report["kernel_probe"]["fraction"], 1.0);
    assert!(report["holder"]["lambda_sampling"].is_string());
}

#[test]
fn three_generator_config_classifies() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("three.toml");
    std::fs::write(
        &cfg,
        "[system]\npolys = [\"0,0,-2,0,1\", \"0,0,0,0,0.015625\", \"0,0,0,0,0.05\"]\nweights = [0.3333333333333333, 0.3333333333333333, 0.3333333333333334]\n\
         [trap]\ndisks = [[0.0, 0.0, 0.4], [-1.0, 0.0, 0.15]]\n\
         [grid]\nhalf_width = 4.3\nsize = 256\n[analysis]\nproxy_points = 200000\n",
    )
    .unwrap();
    let out = coliseum(
        tmp.path(),
        &["classify3", "--config", cfg.to_str().unwrap()],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = json(&tmp.path().join("trichotomy.json"));
    assert_eq!(report["verdict"]["case"], "case2");
    let two = coliseum(tmp.path(), &["classify3"]);
    assert_eq!(two.status.code(), Some(2));
}

#[test]
fn environment_output_dir_yields_to_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let (env_dir, flag_dir) = (tmp.path().join("env"), tmp.path().join("flag"));
    let run = |extra: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_coliseum"))
            .args(["staircase", "--set", "staircase.points=3"])
            .args(extra)
            .env("COLISEUM_OUTPUT_DIR", &env_dir)
            .env("COLISEUM_THREADS", "2")
            .output()
            .unwrap()
    };
    assert!(run(&[]).status.success());
    assert!(env_dir.join("staircase.csv").exists());
    let flag = format!("output.dir=\"{}\"", flag_dir.display());
    assert!(run(&["--set", &flag]).status.success());
    assert!(flag_dir.join("staircase.csv").exists());
}
