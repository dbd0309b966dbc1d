use std::collections::BTreeMap;
use std::path::Path;

use alqnn::runner::*;

fn rows(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().clone();
    r.records().map(|rec| headers.iter().zip(rec.unwrap().iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect()).collect()
}

fn config(out: &Path, pairs: &[(&str, &str)]) -> RunConfig {
    let overrides: Vec<(String, String)> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    let mut cfg = RunConfig::load(None, &overrides).unwrap();
    cfg.out = out.to_path_buf();
    cfg
}

#[test]
fn stats_reproduces_first_table_and_is_repeatable() {
    let a = tempfile::tempdir().unwrap();
    let files = cmd_stats(&config(a.path(), &[])).unwrap();
    for f in ["table1.csv", "table2.csv", "table3.csv", "logistic_models.csv", "lrt.csv", "determination.csv"] {
        assert!(files.iter().any(|x| x == f), "{f} missing");
    }
    let t1 = rows(&a.path().join("table1.csv"));
    let nocoil = t1.iter().find(|r| r["variable"] == "NoCoil").unwrap();
    let num = |k: &str| nocoil[k].parse::<f64>().unwrap();
    assert!((num("rr") - 3.16).abs() < 0.01);
    assert!((num("ci_low") - 0.99).abs() < 0.01 && (num("ci_high") - 10.05).abs() < 0.01);
    assert!((num("p_value") - 0.032).abs() < 0.005);
    let b = tempfile::tempdir().unwrap();
    cmd_stats(&config(b.path(), &[])).unwrap();
    assert_eq!(std::fs::read(a.path().join(MANIFEST)).unwrap(), std::fs::read(b.path().join(MANIFEST)).unwrap());
    assert!(verify_manifest(a.path()).unwrap().is_empty());
}

#[test]
fn single_class_csv_is_a_clean_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("none.csv");
    std::fs::write(&data, "LEAK,NOCOIL,ACSP,DM,SMOKING\n0,1,0,0,1\n-1,0,1,1,0\n").unwrap();
    let cfg = config(&dir.path().join("out"), &[("data", data.to_str().unwrap())]);
    let err = cmd_stats(&cfg).unwrap_err();
    assert_eq!(err.to_string(), "single-class outcome");
}

#[test]
fn minimal_training_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &[("runs", "1"), ("budget", "1"), ("optimizers", "cobyla")]);
    cmd_train_qnn(&cfg).unwrap();
    let folds = rows(&dir.path().join("qnn_folds.csv"));
    assert_eq!(folds.len(), 5);
    assert!(folds.iter().all(|r| r["status"] == "ok" && r["iterations"].parse::<usize>().unwrap() <= 1));
    let metrics = rows(&dir.path().join("qnn_metrics.csv"));
    assert_eq!(metrics.len(), 1);
    assert!(metrics[0]["sensitivity"].parse::<f64>().unwrap() >= 0.83);
    let summary = rows(&dir.path().join("qnn_summary.csv"));
    assert_eq!((summary[0]["n_runs"].as_str(), summary[0]["n_completed"].as_str()), ("1", "1"));
    assert!(summary[0].contains_key("auc_mean") && summary[0].contains_key("auc_std"));
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join(MANIFEST)).unwrap()).unwrap();
    assert!(manifest.get("timings").is_none());
    assert_eq!(manifest["files"].as_array().unwrap().len(), 5);
}

#[test]
fn training_outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let pairs = [("runs", "2"), ("budget", "3"), ("optimizers", "spsa,cmaes")];
    cmd_train_qnn(&config(a.path(), &pairs)).unwrap();
    cmd_train_qnn(&config(b.path(), &pairs)).unwrap();
    for f in ["qnn_metrics.csv", "convergence.csv", "params.csv", MANIFEST] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn comparison_rows_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &[("budget", "3"), ("repeats", "5"), ("ansatz", "ra,esu2"), ("timings", "true")]);
    cmd_compare(&cfg).unwrap();
    let table = rows(&dir.path().join("comparison_table.csv"));
    let names: Vec<&str> = table.iter().map(|r| r["model"].as_str()).collect();
    for m in ["LR", "AdaBoost", "LDA", "GNB", "MLP", "KNN", "QNN-RA-BFGS", "QNN-ESU2-BFGS"] {
        assert!(names.contains(&m), "{m} missing from {names:?}");
    }
    for r in &table {
        assert_eq!(r["count_r2"], r["accuracy"]);
        assert!(r["sensitivity"].parse::<f64>().unwrap() >= 0.83);
    }
    assert!(dir.path().join("roc_points/QNN-RA-BFGS_fold5.csv").exists());
    assert!(dir.path().join("roc_points/LR_pooled.csv").exists());
    let imp = rows(&dir.path().join("importance.csv"));
    for method in ["permutation", "gradient"] {
        let total: f64 = imp.iter().filter(|r| r["method"] == method).map(|r| r["normalized"].parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-8);
    }
    let summary = rows(&dir.path().join("model_summary.csv"));
    assert_eq!(summary.len(), 6 * 5);
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join(MANIFEST)).unwrap()).unwrap();
    assert!(manifest["timings"]["qnn"].as_f64().is_some());
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    std::fs::write(&path, "# desk run\nruns = 4\nnoise = 0.01\nfeatures = DM, Smoking\n").unwrap();
    let cfg = RunConfig::load(Some(&path), &[("runs".into(), "2".into())]).unwrap();
    assert_eq!((cfg.runs, cfg.noise, cfg.features.len()), (2, 0.01, 2));
    std::fs::write(&path, "runs = abc\n").unwrap();
    let err = RunConfig::load(Some(&path), &[]).unwrap_err().to_string();
    assert!(err.contains("run.cfg") && err.contains("runs"), "{err}");
}

#[test]
fn gen_data_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &[("data_seed", "3")]);
    cmd_gen_data(&cfg).unwrap();
    let csv_path = dir.path().join("cohort.csv");
    let loaded = alqnn::cohort::load_csv(&csv_path).unwrap();
    assert_eq!(loaded, alqnn::cohort::generate_synthetic(&alqnn::cohort::CohortSpec::default(), 3).unwrap());
}
