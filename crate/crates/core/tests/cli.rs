use std::path::Path;
use std::process::{Command, Output};

fn gfd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gfd"))
        .args(args)
        .env_remove("GFD_JOBS")
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SIM: [&str; 11] = [
    "simulate",
    "--model",
    "bivnorm-rho",
    "--theta0",
    "0.5",
    "--n",
    "5,10",
    "--methods",
    "FS,F1",
    "--reps",
    "60",
];

#[test]
fn simulate_echoes_config_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.csv");
    let out = gfd(&[&SIM[..], &["--out", path(&first)]].concat());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&first).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# gfd simulate");
    assert!(lines[1].starts_with("# config {") && lines[1].contains("\"seed\":0"));
    assert_eq!(lines[2], gfd::simharness::CSV_HEADER);
    // 2 n × 2 methods × (5 one-sided + 2 × (coverage, length) + MAD)
    assert_eq!(lines.len(), 3 + 2 * 2 * 10);

    let second = dir.path().join("b.csv");
    let out = gfd(&["simulate", "--config", path(&first), "--out", path(&second)]);
    assert!(out.status.success());
    assert_eq!(
        std::fs::read(&first).unwrap(),
        std::fs::read(&second).unwrap()
    );
}

#[test]
fn job_count_does_not_change_output() {
    let one = gfd(&[&SIM[..], &["--jobs", "1"]].concat());
    let many = gfd(&[&SIM[..], &["--jobs", "5"]].concat());
    assert!(one.status.success() && many.status.success());
    assert_eq!(one.stdout, many.stdout);
    let env = Command::new(env!("CARGO_BIN_EXE_gfd"))
        .args(SIM)
        .env("GFD_JOBS", "3")
        .output()
        .unwrap();
    assert_eq!(one.stdout, env.stdout);
    let bad = Command::new(env!("CARGO_BIN_EXE_gfd"))
        .args(SIM)
        .env("GFD_JOBS", "lots")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn json_config_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"model":"scaled-normal","q":1.0,"theta0":[1.0],"n":[10],"methods":["BJ"],"reps":40,"seed":3}"#)
        .unwrap();
    let out = gfd(&["simulate", "--config", path(&cfg)]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().contains("\"seed\":3"));
    assert_eq!(
        text.lines()
            .filter(|l| l.starts_with("scaled-normal,BJ,"))
            .count(),
        10
    );
}

#[test]
fn usage_errors_exit_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("never.csv");
    for args in [
        vec![
            "simulate",
            "--model",
            "nosuch",
            "--theta0",
            "1",
            "--n",
            "5",
            "--methods",
            "FS",
        ],
        vec![
            "simulate",
            "--model",
            "bivnorm-rho",
            "--theta0",
            "1.5",
            "--n",
            "5",
            "--methods",
            "FS",
        ],
        vec![
            "simulate",
            "--model",
            "bivnorm-rho",
            "--theta0",
            "0.5",
            "--n",
            "5",
            "--methods",
            "FS",
            "--bogus",
        ],
        vec!["contour", "--mu-range", "3:1:10", "--q-range", "0.1:3:10"],
        vec!["contour", "--mu-range", "0:1:10", "--q-range", "0.1:3:10"],
        vec![
            "delta",
            "--model",
            "gamma-shape",
            "--dge",
            "matched",
            "--theta0",
            "2",
        ],
        vec![
            "delta",
            "--model",
            "bivnorm-rho",
            "--dge",
            "matched",
            "--theta0",
            "0.3",
            "--alpha",
            "1.2",
        ],
    ] {
        let out = gfd(&[&args[..], &["--out", path(&target)]].concat());
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!target.exists(), "{args:?}");
    }
}

#[test]
fn delta_prints_json() {
    let out = gfd(&[
        "delta",
        "--model",
        "scaled-normal",
        "--q",
        "1",
        "--dge",
        "F1",
        "--theta0",
        "1",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["model"], "scaled-normal");
    assert_eq!(v["dge"], "matched");
    assert_eq!(v["order"], "first");
    assert!((v["delta2"].as_f64().unwrap() + 2.0 / 27.0).abs() < 1e-10);
    let fd = gfd(&[
        "delta",
        "--model",
        "scaled-normal",
        "--q",
        "1",
        "--dge",
        "F1",
        "--theta0",
        "1",
        "--route",
        "fd",
    ]);
    let w: serde_json::Value = serde_json::from_slice(&fd.stdout).unwrap();
    assert!((w["delta2"].as_f64().unwrap() - v["delta2"].as_f64().unwrap()).abs() < 1e-6);
}

#[test]
fn contour_grid_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let out = gfd(&[
        "contour",
        "--mu-range",
        "0.5:3:6",
        "--q-range",
        "1:3:5",
        "--out",
        path(&a),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&a).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "mu,q,delta2");
    assert_eq!(rows.len(), 1 + 6 * 5);
    for r in &rows[1..] {
        let f: Vec<f64> = r.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(f[2], gfd::matching::scaled_normal_delta2_closed(f[0], f[1]));
        if f[1] == 2.0 {
            assert_eq!(f[2], 0.0);
        }
    }
}

#[test]
fn every_output_round_trips_from_its_header() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 4] = [
        &["contour", "--mu-range", "0.5:3:6", "--q-range", "1:3:5"],
        &["exactness", "--reps", "100", "--n", "2,3", "--seed", "4"],
        &[
            "density-dump",
            "--model",
            "scaled-normal",
            "--q",
            "1.5",
            "--dge",
            "F1",
            "--theta0",
            "2",
            "--n",
            "12",
            "--points",
            "40",
        ],
        &[
            "density-dump",
            "--model",
            "bivnorm-rho",
            "--dge",
            "FS",
            "--data",
            "0.3:0.1,1.2:0.8,-0.5:-0.9",
        ],
    ];
    for (i, args) in runs.iter().enumerate() {
        let a = dir.path().join(format!("{i}a.csv"));
        let b = dir.path().join(format!("{i}b.csv"));
        let out = gfd(&[args, &["--out", path(&a)][..]].concat());
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let out = gfd(&[args[0], "--config", path(&a), "--out", path(&b)]);
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert_eq!(
            std::fs::read(&a).unwrap(),
            std::fs::read(&b).unwrap(),
            "{args:?}"
        );
    }
}

#[test]
fn exactness_reports_summary() {
    let out = gfd(&["exactness", "--reps", "100", "--n", "2,3", "--seed", "4"]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(out.status.success(), "{err}");
    assert!(err.contains("PASS: 40 cells checked"), "{err}");
}

#[test]
fn density_dump_from_data_and_simulation() {
    let out = gfd(&[
        "density-dump",
        "--model",
        "bivnorm-rho",
        "--dge",
        "F1",
        "--data",
        "0.3:0.1,1.2:0.8,-0.5:-0.9",
        "--points",
        "16",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "theta,pdf,cdf");
    assert_eq!(rows.len(), 17);
    let out = gfd(&[
        "density-dump",
        "--model",
        "gamma-shape",
        "--dge",
        "invcdf:recip",
        "--theta0",
        "2",
        "--n",
        "5",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let last = text.lines().last().unwrap();
    let cdf: f64 = last.split(',').nth(2).unwrap().parse().unwrap();
    assert!((cdf - 1.0).abs() < 1e-10);
    let out = gfd(&[
        "density-dump",
        "--model",
        "gamma-shape",
        "--dge",
        "invcdf:recip",
        "--data",
        "1,-2",
    ]);
    assert_eq!(out.status.code(), Some(2));
}
