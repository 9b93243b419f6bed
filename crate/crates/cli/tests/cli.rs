use std::path::PathBuf;
use std::process::{Command, Output};

use optconn::adapted_frame::FrameLabel;
use optconn::connection::christoffel;
use optconn::fields::Point;
use optconn::scenarios::Scenario;

fn optconn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optconn"))
        .args(args)
        .env_remove("OPTCONN_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn config(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with("elapsed_ms"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn default_run_passes() {
    let out = optconn(&[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("result PASS 9/9"));
}

#[test]
fn shipped_configs_pass() {
    for name in [
        "d0.toml",
        "sigma-exp-t.toml",
        "warped.toml",
        "conformal.toml",
        "rich.toml",
        "custom.toml",
        "flat4-fd.toml",
    ] {
        let out = optconn(&["--config", &config(name)]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{name}: {}{}",
            stdout(&out),
            stderr(&out)
        );
    }
}

#[test]
fn fault_fails_torsion() {
    let out = optconn(&["--fault", "E1,E2,q", "--check", "torsion"]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(
        text.contains("check torsion FAIL residual=1.000e0"),
        "{text}"
    );
    assert!(text.contains("worst=E1,E2,q"));
}

#[test]
fn table_dump_matches_library() {
    let out = optconn(&["--point", "0.3,-0.2,0.1,0.5", "--table", "theorem"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let rows: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("christoffel "))
        .collect();
    assert_eq!(rows.len(), 64);
    assert!(rows.contains(&"christoffel theorem 0 E1 E2 q -0.5"));
    assert!(rows.contains(&"christoffel theorem 0 E1 p E2 0.25"));

    let sc = Scenario::d0();
    let p = Point::new(vec![0.3, -0.2, 0.1, 0.5]).unwrap();
    let t = christoffel(&sc.params, &sc.base, &p).unwrap();
    for row in rows {
        let f: Vec<&str> = row.split(' ').collect();
        let label = |s: &str| s.parse::<FrameLabel>().unwrap();
        let value: f64 = f[6].parse().unwrap();
        assert_eq!(
            value,
            t.entry(label(f[3]), label(f[4]), label(f[5])),
            "{row}"
        );
    }
}

#[test]
fn reports_are_deterministic() {
    let args = [
        "--config",
        &config("rich.toml"),
        "--table",
        "oracle",
        "--seed",
        "11",
    ];
    let a = optconn(&args);
    let b = optconn(&args);
    assert_eq!(body(&stdout(&a)), body(&stdout(&b)));
    let c = optconn(&[
        "--config",
        &config("rich.toml"),
        "--table",
        "oracle",
        "--seed",
        "12",
    ]);
    assert_ne!(body(&stdout(&a)), body(&stdout(&c)));
}

#[test]
fn json_report_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = optconn(&[
        "--count",
        "3",
        "--curvature",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).is_empty());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["points"].as_array().unwrap().len(), 3);
    assert_eq!(v["checks"].as_array().unwrap().len(), 9);
    assert_eq!(v["curvature"].as_array().unwrap().len(), 3);
    assert_eq!(v["scenario"]["params"]["sigma"], "1");
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let odd = dir.path().join("odd.toml");
    std::fs::write(
        &odd,
        "[base]\nfamily = \"flat\"\ndim = 3\n[params]\nsigma = \"1\"\nalpha = \"1\"\nbeta = \"0\"\ngamma = [\"0\", \"0\", \"0\"]\n",
    )
    .unwrap();
    let out = optconn(&["--config", odd.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("dim must be even"),
        "{}",
        stderr(&out)
    );

    let bad = dir.path().join("bad.toml");
    std::fs::write(
        &bad,
        "[base]\nfamily = \"flat\"\ndim = 2\n[params]\nsigma = \"1\"\nalpha = \"x1 +\"\nbeta = \"0\"\ngamma = [\"0\", \"0\"]\n",
    )
    .unwrap();
    let out = optconn(&["--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("[params] alpha"), "{}", stderr(&out));

    let out = optconn(&["--check", "torsion,bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bogus"));
}

#[test]
fn runtime_errors_name_the_point() {
    let out = optconn(&["--config", &config("sigma-exp-t.toml"), "--table", "sigma1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("at sample point 0"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn tolerance_override_can_fail_a_run() {
    let out = optconn(&[
        "--config",
        &config("rich.toml"),
        "--tolerance",
        "metricity=0",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("check metricity FAIL"));
}

#[test]
fn fd_mode_from_the_command_line() {
    let out = optconn(&[
        "--config",
        &config("warped.toml"),
        "--mode",
        "fd",
        "--fd-step",
        "1e-4",
        "--count",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("mode fd step=0.0001"));
}

#[test]
fn log_level_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_optconn"))
        .args(["--count", "2", "--seed", "5"])
        .env("OPTCONN_LOG", "info")
        .output()
        .unwrap();
    assert!(stderr(&out).contains("seed 5"), "{}", stderr(&out));
}
