use std::process::Command;

use rbf_pum::experiment::{parse_csv, CSV_HEADER};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rbf-pum"))
}

#[test]
fn experiment_writes_csv_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let cov = dir.path().join("cover.txt");
    let glue = dir.path().join("glue.txt");
    let out = bin()
        .args(["--problem", "star2d", "--n", "300", "--n", "400", "--trials", "2", "--eval-n", "500"])
        .arg("--out")
        .arg(&csv)
        .arg("--dump-cover")
        .arg(&cov)
        .arg("--dump-glue")
        .arg(&glue)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with(CSV_HEADER));
    let rows = parse_csv(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.problem == "star2d" && r.kernel == "imq" && r.eps == 13.0));
    let summary = String::from_utf8_lossy(&out.stderr);
    assert!(summary.contains("rate field_inf: not available"), "{summary}");

    let cover_lines = std::fs::read_to_string(&cov).unwrap();
    assert!(cover_lines.lines().count() > 1);
    assert!(cover_lines.lines().all(|l| l.split_whitespace().count() == 5));
    let glue_lines = std::fs::read_to_string(&glue).unwrap();
    assert!(glue_lines.lines().all(|l| l.split_whitespace().count() == 8));
}

#[test]
fn custom_data_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    // rotational field (-y, x) on the unit square: div-free with potential r^2/2
    let mut nodes = String::new();
    let mut values = String::new();
    for i in 0..30 {
        for j in 0..30 {
            let (x, y) = (i as f64 / 29.0, j as f64 / 29.0);
            nodes += &format!("{x} {y}\n");
            values += &format!("{} {}\n", -y, x);
        }
    }
    let np = dir.path().join("nodes.txt");
    let vp = dir.path().join("values.txt");
    let ep = dir.path().join("eval.txt");
    let op = dir.path().join("fit.txt");
    std::fs::write(&np, nodes).unwrap();
    std::fs::write(&vp, values).unwrap();
    std::fs::write(&ep, "0.5 0.5\n0.25 0.75\n5 5\n").unwrap();
    let out = bin()
        .args(["--problem", "custom", "--surface", "plane", "--kernel", "imq", "--eps", "5", "--q", "8"])
        .arg("--nodes-file")
        .arg(&np)
        .arg("--values-file")
        .arg(&vp)
        .arg("--eval-points")
        .arg(&ep)
        .arg("--out")
        .arg(&op)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipping 1 evaluation points"));
    let rows: Vec<Vec<f64>> = std::fs::read_to_string(&op)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert_eq!(r.len(), 5);
        let (x, y) = (r[0], r[1]);
        assert!((r[3] + y).abs() < 2e-3 && (r[4] - x).abs() < 2e-3, "{r:?}");
    }
    // potential differences match r^2 / 2
    let dp = rows[0][2] - rows[1][2];
    assert!((dp - (0.25 - 0.3125)).abs() < 1e-3, "{dp}");
}

#[test]
fn failures_name_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<(Vec<String>, &str)> = vec![
        (vec!["--problem".into(), "torus".into()], "configuration"),
        (vec!["--problem".into(), "sphere".into(), "--q=-1".into()], "configuration"),
        (vec!["--problem".into(), "custom".into()], "--nodes-file"),
        (
            vec![
                "--problem".into(),
                "custom".into(),
                "--nodes-file".into(),
                dir.path().join("missing.txt").display().to_string(),
                "--values-file".into(),
                "x".into(),
            ],
            "reading nodes",
        ),
        (
            vec![
                "--problem".into(),
                "star2d".into(),
                "--n".into(),
                "200".into(),
                "--trials".into(),
                "1".into(),
                "--out".into(),
                dir.path().join("no/such/dir.csv").display().to_string(),
            ],
            "output",
        ),
    ];
    for (args, stage) in cases {
        let out = bin().args(&args).output().unwrap();
        assert!(!out.status.success(), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(stage), "{args:?}: {err}");
    }
}
