//! End-to-end runs of the command-line interface.

use std::path::{Path, PathBuf};
use std::process::Command;

use jointmct::cli::run;
use jointmct::report::{Report, CSV_HEADER};
use proptest::prelude::*;
use tempfile::TempDir;

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("jointmct").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

/// Three doses in two strata, six observations per cell, overlapping samples.
fn dataset_csv() -> String {
    let mut s = String::from("y,dose,sex\n");
    for (b, sex) in ["m", "f"].iter().enumerate() {
        for dose in 0..3 {
            for i in 0..6 {
                let y = 10.0 + dose as f64 * (0.6 + 0.3 * b as f64) + ((i * 7 + dose * 3 + b) % 5) as f64 * 0.9 - 1.8;
                s.push_str(&format!("{y},{dose},{sex}\n"));
            }
        }
    }
    s
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const DATA_ARGS: [&str; 6] = ["--response", "y", "--primary", "dose", "--secondary", "sex"];

fn test_args<'a>(data: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["test", "--data", data];
    v.extend(DATA_ARGS);
    v.extend(["--alternative", "greater", "--precision", "1e-3", "--seed", "5"]);
    v.extend(extra);
    v
}

#[test]
fn help_and_usage_errors() {
    let (code, out, _) = cli(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("Usage"));
    let (code, _, err) = cli(&[]);
    assert_eq!(code, 2);
    assert!(!err.is_empty());
    assert_eq!(cli(&["frobnicate"]).0, 2);
    assert_eq!(cli(&["quantile", "--k", "0"]).0, 2);
}

#[test]
fn quantile_of_one_comparison_is_the_normal_quantile() {
    let (code, out, err) = cli(&["quantile", "--k", "1", "--alpha", "0.05", "--one-sided"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out.lines().next(), Some("1.6449"));
    let (code, out, _) = cli(&["quantile", "--k", "2", "--rho", "0.5", "--two-sided", "--format", "json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v["value"].as_f64().unwrap() - 2.212).abs() < 0.005);
}

#[test]
fn data_errors_exit_one_and_name_the_problem() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", &dataset_csv());
    let mut args = test_args(s(&data), &[]);
    args[4] = "resp";
    let (code, _, err) = cli(&args);
    assert_eq!(code, 1);
    assert!(err.contains("`resp`"), "{err}");

    let bad = write(&dir, "bad.csv", "y,dose,sex\n1,0,m\nx,1,m\n");
    let (code, _, err) = cli(&test_args(s(&bad), &[]));
    assert_eq!(code, 1);
    assert!(err.contains("line 3"), "{err}");

    let missing = dir.path().join("nope.csv");
    assert_eq!(cli(&test_args(s(&missing), &[])).0, 1);
}

#[test]
fn inconsistent_options_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", &dataset_csv());
    assert_eq!(cli(&test_args(s(&data), &["--family", "williams"])).0, 2);
    assert_eq!(cli(&test_args(s(&data), &["--family", "tukey", "--control", "1"])).0, 2);
    assert_eq!(cli(&test_args(s(&data), &["--include", "everything"])).0, 2);
    assert_eq!(cli(&test_args(s(&data), &["--alpha", "1.5"])).0, 2);
    let mut np = test_args(s(&data), &["--include", "additive"]);
    np[0] = "nonpar";
    assert_eq!(cli(&np).0, 2);
}

/// Numeric columns of the text table: the last seven fields of each data line.
fn text_numbers(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| l.chars().next().is_some_and(|c| c.is_ascii_digit()))
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            f[f.len() - 7..].iter().map(|x| x.to_string()).collect()
        })
        .collect()
}

fn four(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[test]
fn text_csv_and_json_carry_the_same_numbers() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", &dataset_csv());
    let include = ["--include", "per-stratum,pooled,global,separate,additive", "--covariance", "hc3"];
    let run_as = |fmt: &str| {
        let mut extra = include.to_vec();
        extra.extend(["--format", fmt]);
        let (code, out, err) = cli(&test_args(s(&data), &extra));
        assert_eq!(code, 0, "{err}");
        out
    };
    let report: Report = serde_json::from_str(&run_as("json")).unwrap();
    assert_eq!(report.sections.len(), 5);
    let rows: Vec<_> = report.sections.iter().flat_map(|s| s.rows.iter().map(move |r| (s, r))).collect();

    let csv_text = run_as("csv");
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), CSV_HEADER);
    let records: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), rows.len());
    for (rec, (sec, row)) in records.iter().zip(&rows) {
        assert_eq!(&rec[0], sec.title);
        assert_eq!(&rec[2], row.label);
        assert_eq!(&rec[3], row.tag);
        let nums: Vec<f64> = (4..12).map(|i| rec[i].parse().unwrap()).collect();
        let want = [row.estimate, row.se, row.statistic, row.p_raw, row.p_adj, row.p_adj_error, row.lower, row.upper];
        assert_eq!(nums, want, "{}", row.label);
    }

    let text = text_numbers(&run_as("text"));
    assert_eq!(text.len(), rows.len());
    for (t, (_, row)) in text.iter().zip(&rows) {
        let want: Vec<String> = [row.estimate, row.se, row.statistic, row.p_raw, row.p_adj, row.lower, row.upper]
            .iter()
            .map(|&v| four(v))
            .collect();
        assert_eq!(t, &want, "{}", row.label);
    }
}

#[test]
fn exported_contrasts_reproduce_the_joint_test() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", &dataset_csv());
    let k = dir.path().join("k.csv");
    let plot = dir.path().join("ci.csv");
    let (code, first, err) = cli(&test_args(
        s(&data),
        &["--format", "json", "--export-contrasts", s(&k), "--emit-ci-plot", s(&plot)],
    ));
    assert_eq!(code, 0, "{err}");
    let (code, second, err) = cli(&test_args(s(&data), &["--format", "json", "--contrasts", s(&k)]));
    assert_eq!(code, 0, "{err}");
    let a: Report = serde_json::from_str(&first).unwrap();
    let b: Report = serde_json::from_str(&second).unwrap();
    assert_eq!(a.sections[0].rows, b.sections[0].rows);
    let plot = std::fs::read_to_string(plot).unwrap();
    assert!(plot.starts_with("section,label,estimate,lower,upper"));
    assert_eq!(plot.lines().count(), 1 + a.sections[0].rows.len());
}

#[test]
fn nonpar_glm_and_pretest_run() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", &dataset_csv());
    let mut np = test_args(s(&data), &["--no-intervals"]);
    np[0] = "nonpar";
    let (code, out, err) = cli(&np);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("probit"));

    let (code, out, err) = cli(&["pretest", "--data", s(&data), "--response", "y", "--primary", "dose", "--secondary", "sex"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("Interaction F test"));

    let counts = write(
        &dir,
        "b.csv",
        "a_level,b_level,successes,trials\nc,s1,8,20\nt,s1,3,20\nc,s2,9,25\nt,s2,0,22\n",
    );
    let (code, out, err) = cli(&[
        "glm", "--data", s(&counts), "--alternative", "less", "--precision", "1e-3", "--format", "json",
    ]);
    assert_eq!(code, 0, "{err}");
    let r: Report = serde_json::from_str(&out).unwrap();
    assert_eq!(r.sections[0].df, None);
    assert!(!r.notes.is_empty(), "add-two notice expected");
    let (code, _, err) = cli(&["glm", "--data", s(&counts), "--alternative", "less", "--add-two", "off"]);
    assert_eq!(code, 1);
    assert!(err.contains("add"), "{err}");
}

#[test]
fn simulate_reads_a_scenario_file() {
    let dir = TempDir::new().unwrap();
    let sc = write(&dir, "s.toml", "k = 2\nj = 2\nn = 6\nreplications = 200\nseed = 4\n");
    let (code, out, err) = cli(&["simulate", "--scenario", s(&sc), "--format", "json"]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["replications"], 200);
    let (code, again, _) = cli(&["simulate", "--scenario", s(&sc), "--format", "json", "--threads", "2"]);
    assert_eq!(code, 0);
    assert_eq!(out, again);
    let bad = write(&dir, "bad.toml", "k = 2\nj = 2\nn = [1, 2]\nreplications = 5\nseed = 4\n");
    assert_eq!(cli(&["simulate", "--scenario", s(&bad)]).0, 1);
}

#[test]
fn binary_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_jointmct");
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", "y,dose\n1,a\n");
    let status = |args: &[&str]| Command::new(exe).args(args).output().unwrap();
    let ok = status(&["quantile", "--k", "1", "--one-sided"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).starts_with("1.6449"));
    assert_eq!(status(&["test"]).status.code(), Some(2));
    let bad = status(&["test", "--data", s(&data), "--response", "z", "--alternative", "greater"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("`z`"));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    /// Arbitrary file contents never panic and never look like a usage error.
    #[test]
    fn malformed_files_exit_with_a_data_error(body in "[0-9a-z,.\\-\n\" ]{0,200}") {
        let dir = TempDir::new().unwrap();
        let data = write(&dir, "d.csv", &format!("y,dose,sex\n{body}"));
        let (code, _, err) = cli(&test_args(s(&data), &["--no-intervals"]));
        prop_assert!(code == 0 || code == 1, "exit {} ({})", code, err);
        prop_assert_eq!(code == 1, !err.is_empty());
    }

    /// Dropping or corrupting one value is reported with its line.
    #[test]
    fn corrupted_value_reports_its_line(row in 0usize..36, junk in "[a-z]{1,4}") {
        let dir = TempDir::new().unwrap();
        let mut lines: Vec<String> = dataset_csv().lines().map(String::from).collect();
        let parts: Vec<String> = lines[row + 1].split(',').map(String::from).collect();
        lines[row + 1] = format!("{junk},{},{}", parts[1], parts[2]);
        let data = write(&dir, "d.csv", &(lines.join("\n") + "\n"));
        let (code, _, err) = cli(&test_args(s(&data), &[]));
        prop_assert_eq!(code, 1);
        let line = format!("line {}", row + 2);
        prop_assert!(err.contains(&line), "{}", err);
    }
}
