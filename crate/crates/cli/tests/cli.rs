use std::path::PathBuf;
use std::process::{Command, Output};

use proptest::prelude::*;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn pio(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pio"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn model(name: &str) -> String {
    data(name).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn spectrum_golden_and_contents() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rep.json");
    let o = pio(&[
        "spectrum",
        "--model",
        &model("fixture_a.json"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(
        text,
        std::fs::read_to_string(data("golden/fixture_a_spectrum.json")).unwrap()
    );

    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let pts: Vec<f64> = v["essential"]["points"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["value"].as_f64().unwrap())
        .collect();
    assert_eq!(pts, vec![0.0, 2.0, 3.0]);
    assert!(v["essential"]["intervals"].as_array().unwrap().is_empty());
    let d = v["discrete"].as_array().unwrap();
    assert_eq!(d.len(), 1);
    assert!((d[0][0].as_f64().unwrap() - 5.0).abs() < 1e-8);
    assert_eq!(d[0][1], 1);
}

#[test]
fn output_is_byte_identical_across_runs() {
    let args = ["spectrum", "--model", &model("fixture_b.json")];
    let a = pio(&args);
    let b = pio(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn delta_trace_golden() {
    let o = pio(&[
        "delta-trace",
        "--model",
        &model("fixture_a.json"),
        "--lmin",
        "3.5",
        "--lmax",
        "6",
        "--samples",
        "6",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(
        text,
        std::fs::read_to_string(data("golden/fixture_a_trace.csv")).unwrap()
    );
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,re_delta,im_delta,path"));
    let row: Vec<f64> = lines
        .nth(1)
        .unwrap()
        .split(',')
        .map(|c| c.parse().unwrap())
        .collect();
    assert_eq!(row[0], 4.0);
    assert!((row[1] - 8.0).abs() < 1e-10);
    assert_eq!(row[3], 1.0);
}

#[test]
fn delta_trace_marks_channel_spectrum() {
    let o = pio(&[
        "delta-trace",
        "--model",
        &model("fixture_a.json"),
        "--lmin",
        "1",
        "--lmax",
        "3",
        "--samples",
        "3",
        "--path",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let rows: Vec<String> = stdout(&o).lines().skip(1).map(String::from).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].contains("NaN") && rows[2].contains("NaN"));
    assert!(rows[0].ends_with(",2"));
}

#[test]
fn discrete_golden() {
    let o = pio(&["discrete", "--model", &model("fixture_c.json")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o),
        std::fs::read_to_string(data("golden/fixture_c_discrete.json")).unwrap()
    );
}

#[test]
fn solve_refusals_and_success() {
    let o = pio(&[
        "solve",
        "--model",
        &model("fixture_a.json"),
        "--tau",
        "0.2",
        "--rhs",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("NonUniqueSolution"));
    let o = pio(&[
        "solve",
        "--model",
        &model("fixture_a.json"),
        "--tau",
        "0.5",
        "--rhs",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("OutsideTheory"));
    let o = pio(&[
        "solve",
        "--model",
        &model("fixture_a.json"),
        "--tau",
        "0",
        "--rhs",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(3));

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.csv");
    let o = pio(&[
        "solve",
        "--model",
        &model("fixture_a.json"),
        "--tau",
        "0.1",
        "--rhs",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(summary["residual"].as_f64().unwrap() <= 1e-8);
    assert_eq!(summary["class"], "Regular");
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,y,re_f,im_f"));
    for l in lines {
        let re: f64 = l.split(',').nth(2).unwrap().parse().unwrap();
        assert!((re - 2.0).abs() < 1e-12);
    }

    let o = pio(&[
        "solve",
        "--model",
        &model("fixture_b.json"),
        "--tau",
        "-0.4",
        "--rhs",
        "x*y + sin(x)",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_str(&stderr(&o)).unwrap();
    assert!(summary["residual"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn solve_rejects_bad_rhs() {
    for rhs in ["x +", "z", "1/(x-x)"] {
        let o = pio(&[
            "solve",
            "--model",
            &model("fixture_a.json"),
            "--tau",
            "0.1",
            "--rhs",
            rhs,
        ]);
        assert_eq!(o.status.code(), Some(1), "{rhs}: {}", stderr(&o));
    }
}

#[test]
fn validation_exit_codes() {
    let o = pio(&["validate", "--model", &model("fixture_a.json")]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["passed"] == true));

    let o = pio(&["validate", "--model", &model("bad_ortho.json")]);
    assert_eq!(o.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let ortho = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "channel1.orthonormality")
        .unwrap();
    assert_eq!(ortho["passed"], false);
    assert!((ortho["deviation"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let o = pio(&["validate", "--model", &model("singular_weight.json")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("division by zero"));

    let o = pio(&["spectrum", "--model", &model("bad_ortho.json")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("orthonormality"));
}

#[test]
fn usage_errors() {
    assert_eq!(pio(&["bogus"]).status.code(), Some(1));
    assert_eq!(pio(&[]).status.code(), Some(1));
    assert_eq!(pio(&["spectrum"]).status.code(), Some(1));
    assert_eq!(
        pio(&["spectrum", "--model", "/nonexistent/model.json"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        pio(&[
            "discrete",
            "--model",
            &model("fixture_a.json"),
            "--path",
            "3"
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(
        pio(&[
            "discrete",
            "--model",
            &model("fixture_a.json"),
            "--scan-points",
            "1"
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(pio(&["--help"]).status.code(), Some(0));
    assert_eq!(pio(&["--version"]).status.code(), Some(0));
}

#[test]
fn oracle_check_report() {
    let o = pio(&[
        "oracle-check",
        "--model",
        &model("fixture_a.json"),
        "--nx",
        "10",
        "--ny",
        "10",
        "--tol-disc",
        "1e-9",
        "--tol-ess",
        "1e-9",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["nystrom"]["Nx"], 10);
    assert_eq!(v["nystrom"]["Ny"], 10);
    assert!(v["mismatches"].as_array().unwrap().is_empty());
    assert!((v["eigs_head"][0].as_f64().unwrap() - 5.0).abs() < 1e-10);
}

#[test]
fn eigenfunction_output() {
    let o = pio(&[
        "eigenfunction",
        "--model",
        &model("fixture_a.json"),
        "--lambda",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y,re_f1,im_f1"));
    let vals: Vec<f64> = lines
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(vals.len(), 32 * 32);
    assert!(vals.iter().all(|v| (v.abs() - 1.0).abs() < 1e-12));

    let o = pio(&[
        "eigenfunction",
        "--model",
        &model("fixture_a.json"),
        "--lambda",
        "4",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("NotAnEigenvalue"));
    let o = pio(&[
        "eigenfunction",
        "--model",
        &model("fixture_a.json"),
        "--lambda",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("SpectrumHit"));
}

fn base_model() -> String {
    std::fs::read_to_string(data("legendre.json")).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Corrupted model files never crash the tool.
    #[test]
    fn fuzzed_model_files(pos in 0usize..400, len in 0usize..12, junk in "[ -~]{0,12}", cmd in 0usize..3) {
        let mut text = base_model().into_bytes();
        let pos = pos.min(text.len());
        let end = (pos + len).min(text.len());
        text.splice(pos..end, junk.bytes());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        std::fs::write(&path, &text).unwrap();
        let p = path.to_str().unwrap();
        let args: Vec<&str> = match cmd {
            0 => vec!["validate", "--model", p],
            1 => vec!["discrete", "--model", p, "--scan-points", "32"],
            _ => vec!["solve", "--model", p, "--tau", "0.05", "--rhs", "x - y"],
        };
        let o = pio(&args);
        let code = o.status.code();
        prop_assert!(matches!(code, Some(0..=3)), "exit {:?}: {}", code, stderr(&o));
        if code != Some(0) {
            prop_assert!(!o.stderr.is_empty());
        }
    }
}
