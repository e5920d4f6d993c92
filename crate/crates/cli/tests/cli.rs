use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SPEC: &str = r#"{"n": 12, "t": 400, "seed": 5, "market_beta": 0.008,
    "sectors": [{"members": [2, 5, 9], "loading": 0.01}],
    "pairs": [{"a": 3, "b": 11, "correlation": 0.9}]}"#;

fn eigenmarket(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eigenmarket"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth_panel() -> TempDir {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("spec.json"), SPEC).unwrap();
    let o = eigenmarket(tmp.path(), &["synth", "--spec", "spec.json", "--out", "panel.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    tmp
}

fn header(path: PathBuf) -> String {
    let text = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    text.lines().next().unwrap_or("").to_string()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn report_lists_eight_groups() {
    let tmp = synth_panel();
    let o = eigenmarket(tmp.path(), &["report", "--input", "panel.csv", "--meta", "panel.meta.csv", "--out", "rep"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = manifest(&tmp.path().join("rep"));
    assert_eq!(m["status"], "ok");
    let groups = m["artifacts"].as_array().unwrap();
    assert_eq!(groups.len(), 8);
    for g in groups {
        assert_eq!(g["complete"], true, "{g}");
        for f in g["files"].as_array().unwrap() {
            assert!(tmp.path().join("rep").join(f.as_str().unwrap()).exists(), "{f}");
        }
    }
}

#[test]
fn manifest_groups_do_not_depend_on_data() {
    let tmp = synth_panel();
    fs::write(tmp.path().join("other.json"), SPEC.replace("\"seed\": 5", "\"seed\": 6")).unwrap();
    let o = eigenmarket(tmp.path(), &["synth", "--spec", "other.json", "--out", "other.csv"]);
    assert!(o.status.success());
    for (input, out) in [("panel.csv", "a"), ("other.csv", "b")] {
        let o = eigenmarket(tmp.path(), &["report", "--input", input, "--out", out]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let (a, b) = (manifest(&tmp.path().join("a")), manifest(&tmp.path().join("b")));
    assert_eq!(a["artifacts"], b["artifacts"]);
}

#[test]
fn missing_metadata_exits_2_without_manifest() {
    let tmp = synth_panel();
    let o = eigenmarket(tmp.path(), &["report", "--input", "panel.csv", "--meta", "nowhere.csv", "--out", "rep"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nowhere.csv"), "{}", stderr(&o));
    assert!(!tmp.path().join("rep").join("manifest.json").exists());
}

#[test]
fn constant_instrument_exits_3_with_module_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = String::from("date,1,2,3,4\n");
    let start = chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    for t in 0..60 {
        let d = start + chrono::Days::new(t);
        let x = t as f64;
        csv.push_str(&format!(
            "{d},{},{},250,{}\n",
            100.0 + (x * 0.7).sin(),
            80.0 + (x * 1.3).cos(),
            50.0 + (x * 0.4).sin() * 2.0
        ));
    }
    fs::write(tmp.path().join("flat.csv"), csv).unwrap();
    let o = eigenmarket(tmp.path(), &["report", "--input", "flat.csv", "--out", "rep"]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("instrument 3") && err.contains("standardize"), "{err}");
    let m = manifest(&tmp.path().join("rep"));
    assert_eq!(m["status"], "error");
    assert_eq!(m["error"]["module"], "corrcore");
    assert!(m["error"]["message"].as_str().unwrap().contains("instrument 3"));
    // stages before the failure keep their output
    assert!(tmp.path().join("rep").join("stats.csv").exists());
}

#[test]
fn subcommand_headers() {
    let tmp = synth_panel();
    let run = |args: &[&str]| {
        let mut full = args.to_vec();
        full.extend(["--input", "panel.csv", "--meta", "panel.meta.csv", "--out", "o"]);
        let o = eigenmarket(tmp.path(), &full);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    };
    let out = |name: &str| tmp.path().join("o").join(name);
    run(&["ingest"]);
    assert!(header(out("panel.csv")).starts_with("date,1,2,3"));
    run(&["stats"]);
    assert_eq!(
        header(out("stats.csv")),
        "label,name,exchange,country,listing_date,max,min,mean_e4,sd,skewness,kurtosis"
    );
    run(&["corr"]);
    assert_eq!(header(out("coefficients.csv")), "bin_left,bin_right,density");
    let corr = fs::read_to_string(out("correlation.csv")).unwrap();
    assert_eq!(corr.lines().count(), 13);
    assert!(corr.lines().all(|l| l.split(',').count() == 13));
    run(&["spectrum"]);
    assert_eq!(header(out("eigenvalues.csv")), "rank,lambda,class");
    run(&["ipr"]);
    assert_eq!(header(out("ipr.csv")), "rank,lambda,ipr");
    run(&["portfolios", "--ranks", "1,3"]);
    assert_eq!(header(out("portfolio_1.csv")), "date,G_1");
    assert_eq!(header(out("portfolio_3.csv")), "date,G_3");
    run(&["index"]);
    assert_eq!(header(out("index.csv")), "date,afpi,mean_price");
    run(&["remove-market"]);
    assert_eq!(header(out("regression.csv")), "label,alpha,beta,excluded");
    assert_eq!(header(out("residual_eigenvalues.csv")), "rank,lambda,class");
    run(&["sectors", "--ranks", "2-4"]);
    assert_eq!(header(out("sectors.csv")), "eigenvector,sign,label,name,exchange,country,component");
    run(&["pairs", "--count", "3"]);
    assert_eq!(header(out("pairs.csv")), "eigenvector_rank,label_a,label_b,sign_a,sign_b,c_ij");
}

#[test]
fn synth_output_reads_back_through_ingest() {
    let tmp = synth_panel();
    let text = fs::read_to_string(tmp.path().join("panel.csv")).unwrap();
    assert!(text.starts_with('#'), "generator comment expected");
    let o = eigenmarket(tmp.path(), &["ingest", "--input", "panel.csv", "--full-precision", "--out", "o"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let data = |s: &str| s.lines().filter(|l| !l.starts_with('#')).map(str::to_string).collect::<Vec<_>>();
    let original = data(&text);
    let cleaned = data(&fs::read_to_string(tmp.path().join("o/panel.csv")).unwrap());
    assert_eq!(original.len(), 402);
    assert_eq!(original.len(), cleaned.len());
    for (a, b) in original.iter().zip(&cleaned).skip(1) {
        let parse = |l: &str| l.split(',').skip(1).map(|x| x.parse::<f64>().unwrap()).collect::<Vec<_>>();
        assert_eq!(parse(a), parse(b));
    }
}

#[test]
fn seed_override_changes_the_panel() {
    let tmp = synth_panel();
    let o = eigenmarket(tmp.path(), &["synth", "--spec", "spec.json", "--seed", "6", "--out", "b.csv"]);
    assert!(o.status.success());
    let a = fs::read_to_string(tmp.path().join("panel.csv")).unwrap();
    let b = fs::read_to_string(tmp.path().join("b.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn full_precision_eigenvalues_parse_exactly() {
    let tmp = synth_panel();
    for (flag, out) in [(None, "short"), (Some("--full-precision"), "full")] {
        let mut args = vec!["spectrum", "--input", "panel.csv", "--out", out];
        args.extend(flag);
        assert!(eigenmarket(tmp.path(), &args).status.success());
    }
    let lambdas = |out: &str| -> Vec<String> {
        fs::read_to_string(tmp.path().join(out).join("eigenvalues.csv"))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().to_string())
            .collect()
    };
    let (short, full) = (lambdas("short"), lambdas("full"));
    let sum: f64 = full.iter().map(|x| x.parse::<f64>().unwrap()).sum();
    assert!((sum - 12.0).abs() < 1e-9, "trace {sum}");
    for (s, f) in short.iter().zip(&full) {
        let (s, f): (f64, f64) = (s.parse().unwrap(), f.parse().unwrap());
        assert!(s.to_string().trim_start_matches('-').replace('.', "").trim_start_matches('0').len() <= 6);
        assert!((s - f).abs() <= 5e-6 * f.abs());
    }
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(eigenmarket(tmp.path(), &["stats"]).status.code(), Some(2));
    assert_eq!(eigenmarket(tmp.path(), &["sectors", "--ranks", "0,1"]).status.code(), Some(2));
    assert_eq!(eigenmarket(tmp.path(), &["bogus"]).status.code(), Some(2));
    let tmp = synth_panel();
    let o = eigenmarket(tmp.path(), &["corr", "--input", "panel.csv", "--bins", "0", "--out", "o"]);
    assert_eq!(o.status.code(), Some(2));
}
