//! Configuration and the end-to-end commands behind the CLI.
//!
//! Every command writes into one output directory and finishes with
//! `manifest.json`, which lists each emitted file with its SHA-256.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::baselines::{self, ClassifierSpec, Family, ModelSummaryRow};
use crate::circuits::{AnsatzFamily, AnsatzSpec, FeatureMapSpec};
use crate::cohort::{self, Factor, Measure, PatientRecord};
use crate::importance::{gradient_importance, permutation_importance, write_importance_csv};
use crate::metrics::{self, fmt_f64, EvalReport, ThresholdRule};
use crate::optim::{Method, OptimizerConfig};
use crate::qsim::{split_seed, NoiseModel};
use crate::stats::{self, Continuity, Criterion, FactorRow, LogisticModel};
use crate::vqc::{self, EvalMode, TrainRecord, VqcModel};
use crate::{Error, ProbabilityModel, Result};

pub const WORKERS_ENV: &str = "ALQNN_WORKERS";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic,
    Csv(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    Exact,
    Shots,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: DataSource,
    /// Seed of the synthetic cohort.
    pub data_seed: u64,
    /// Root seed for parameter initialization, optimizers, shots and permutations.
    pub seed: u64,
    pub features: Vec<String>,
    pub ansatz: Vec<AnsatzFamily>,
    pub ansatz_reps: usize,
    pub feature_map_reps: usize,
    pub optimizers: Vec<Method>,
    pub budget: usize,
    pub noise: f64,
    pub mode: ModeKind,
    pub shots: u64,
    pub runs: usize,
    pub baselines: Vec<Family>,
    pub sensitivity: f64,
    pub beta: f64,
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub fold_seed: u64,
    pub repeats: usize,
    pub epsilon: f64,
    pub out: PathBuf,
    pub timings: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DataSource::Synthetic,
            data_seed: 0,
            seed: 0,
            features: cohort::DEFAULT_MODEL_FEATURES.iter().map(|s| s.to_string()).collect(),
            ansatz: vec![AnsatzFamily::EfficientSU2],
            ansatz_reps: 3,
            feature_map_reps: 1,
            optimizers: vec![Method::from_name("bfgs").expect("known")],
            budget: 75,
            noise: 0.05,
            mode: ModeKind::Exact,
            shots: vqc::DEFAULT_SHOTS,
            runs: 10,
            baselines: vec![Family::LogReg, Family::AdaBoost, Family::Lda, Family::Gnb, Family::Knn, Family::Mlp],
            sensitivity: 0.83,
            beta: 2.0,
            outer_folds: 5,
            inner_folds: 3,
            fold_seed: 42,
            repeats: crate::importance::DEFAULT_REPEATS,
            epsilon: crate::importance::DEFAULT_EPSILON,
            out: PathBuf::from("out"),
            timings: false,
        }
    }
}

/// Every recognised key, in the order they are echoed.
pub const CONFIG_KEYS: [&str; 23] = [
    "data",
    "data_seed",
    "seed",
    "features",
    "ansatz",
    "ansatz_reps",
    "feature_map_reps",
    "optimizers",
    "budget",
    "noise",
    "mode",
    "shots",
    "runs",
    "baselines",
    "sensitivity",
    "beta",
    "outer_folds",
    "inner_folds",
    "fold_seed",
    "repeats",
    "epsilon",
    "out",
    "timings",
];

fn split_list(value: &str) -> Vec<&str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_ansatz(name: &str) -> Result<AnsatzFamily> {
    match name.to_ascii_lowercase().as_str() {
        "ra" | "realamplitudes" => Ok(AnsatzFamily::RealAmplitudes),
        "esu2" | "efficientsu2" => Ok(AnsatzFamily::EfficientSU2),
        other => Err(Error::Config(format!("unknown ansatz {other:?}"))),
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        match key.as_str() {
            "data" => {
                self.data = if value.eq_ignore_ascii_case("synthetic") { DataSource::Synthetic } else { DataSource::Csv(value.into()) }
            }
            "data_seed" => self.data_seed = parse_num(&key, value)?,
            "seed" => self.seed = parse_num(&key, value)?,
            "features" => self.features = split_list(value).into_iter().map(String::from).collect(),
            "ansatz" => self.ansatz = split_list(value).into_iter().map(parse_ansatz).collect::<Result<_>>()?,
            "ansatz_reps" => self.ansatz_reps = parse_num(&key, value)?,
            "feature_map_reps" => self.feature_map_reps = parse_num(&key, value)?,
            "optimizers" | "optimizer" => {
                self.optimizers = split_list(value).into_iter().map(Method::from_name).collect::<Result<_>>()?
            }
            "budget" => self.budget = parse_num(&key, value)?,
            "noise" => self.noise = parse_num(&key, value)?,
            "mode" => {
                self.mode = match value.to_ascii_lowercase().as_str() {
                    "exact" => ModeKind::Exact,
                    "shots" => ModeKind::Shots,
                    other => return Err(Error::Config(format!("mode: unknown value {other:?}"))),
                }
            }
            "shots" => self.shots = parse_num(&key, value)?,
            "runs" => self.runs = parse_num(&key, value)?,
            "baselines" => self.baselines = split_list(value).into_iter().map(Family::from_name).collect::<Result<_>>()?,
            "sensitivity" => self.sensitivity = parse_num(&key, value)?,
            "beta" => self.beta = parse_num(&key, value)?,
            "outer_folds" => self.outer_folds = parse_num(&key, value)?,
            "inner_folds" => self.inner_folds = parse_num(&key, value)?,
            "fold_seed" => self.fold_seed = parse_num(&key, value)?,
            "repeats" => self.repeats = parse_num(&key, value)?,
            "epsilon" => self.epsilon = parse_num(&key, value)?,
            "out" => self.out = value.into(),
            "timings" => self.timings = parse_num(&key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Defaults, then the file (if any), then `overrides` in order.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(p) = path {
            let text = fs::read_to_string(p).map_err(|e| Error::from(e).context(p.display().to_string()))?;
            for (k, v) in parse_config_text(&text)? {
                cfg.set(&k, &v).map_err(|e| e.context(p.display().to_string()))?;
            }
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.runs < 1 {
            return bad("runs must be at least 1");
        }
        if self.features.is_empty() {
            return bad("features must not be empty");
        }
        if let Some(f) = self.features.iter().find(|f| cohort::resolve_factor(f).is_none() && cohort::resolve_measure(f).is_none()) {
            return bad(&format!("feature {f:?} is not in the cohort schema"));
        }
        if !(0.0..=1.0).contains(&self.sensitivity) {
            return bad("sensitivity must lie in [0, 1]");
        }
        if self.outer_folds < 2 || self.inner_folds < 2 {
            return bad("fold counts must be at least 2");
        }
        if self.ansatz.is_empty() || self.optimizers.is_empty() {
            return bad("at least one ansatz and one optimizer are required");
        }
        NoiseModel::new(self.noise)?;
        Ok(())
    }

    /// Resolved settings as `key -> value`; `out` is omitted so that
    /// identical runs into different directories hash identically.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let join = |v: Vec<&str>| v.join(",");
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put(
            "data",
            match &self.data {
                DataSource::Synthetic => "synthetic".into(),
                DataSource::Csv(p) => p.display().to_string(),
            },
        );
        put("data_seed", self.data_seed.to_string());
        put("seed", self.seed.to_string());
        put("features", self.features.join(","));
        put("ansatz", join(self.ansatz.iter().map(|a| a.short_name()).collect()));
        put("ansatz_reps", self.ansatz_reps.to_string());
        put("feature_map_reps", self.feature_map_reps.to_string());
        put("optimizers", join(self.optimizers.iter().map(|m| m.name()).collect()));
        put("budget", self.budget.to_string());
        put("noise", self.noise.to_string());
        put("mode", if self.mode == ModeKind::Exact { "exact".into() } else { "shots".into() });
        put("shots", self.shots.to_string());
        put("runs", self.runs.to_string());
        put("baselines", join(self.baselines.iter().map(|f| f.name()).collect()));
        put("sensitivity", self.sensitivity.to_string());
        put("beta", self.beta.to_string());
        put("outer_folds", self.outer_folds.to_string());
        put("inner_folds", self.inner_folds.to_string());
        put("fold_seed", self.fold_seed.to_string());
        put("repeats", self.repeats.to_string());
        put("epsilon", self.epsilon.to_string());
        put("timings", self.timings.to_string());
        m
    }

    pub fn threshold_rule(&self) -> ThresholdRule {
        ThresholdRule::SensitivityFloorFBeta { sensitivity: self.sensitivity, beta: self.beta }
    }

    fn eval_mode(&self, run: usize) -> EvalMode {
        match self.mode {
            ModeKind::Exact => EvalMode::Exact,
            ModeKind::Shots => EvalMode::Shots { shots: self.shots, seed: split_seed(self.seed, run as u64) },
        }
    }
}

/// Worker count from the environment, if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

pub fn load_records(cfg: &RunConfig) -> Result<Vec<PatientRecord>> {
    let records = match &cfg.data {
        DataSource::Synthetic => cohort::generate_synthetic(&cohort::CohortSpec::default(), cfg.data_seed)?,
        DataSource::Csv(p) => cohort::load_csv(p)?,
    };
    let pos = records.iter().filter(|r| r.leak == 1).count();
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if pos == 0 || pos == records.len() {
        return Err(Error::SingleClass);
    }
    Ok(records)
}

#[derive(Debug, Clone, Serialize)]
struct FileEntry {
    path: String,
    bytes: u64,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config: BTreeMap<String, String>,
    files: Vec<FileEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timings: Option<BTreeMap<String, f64>>,
}

/// Single writer for one output directory.
pub struct Output {
    root: PathBuf,
    files: BTreeMap<String, (u64, String)>,
    timings: BTreeMap<String, f64>,
}

impl Output {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::from(e).context(root.display().to_string()))?;
        Ok(Self { root: root.to_path_buf(), files: BTreeMap::new(), timings: BTreeMap::new() })
    }

    /// Renders into memory, then writes `rel` and records its hash.
    pub fn write(&mut self, rel: &str, render: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        render(&mut buf).map_err(|e| e.context(rel.to_string()))?;
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, &buf).map_err(|e| Error::from(e).context(path.display().to_string()))?;
        self.files.insert(rel.to_string(), (buf.len() as u64, hex::encode(Sha256::digest(&buf))));
        Ok(())
    }

    pub fn time(&mut self, phase: &str, started: Instant) {
        self.timings.insert(phase.to_string(), started.elapsed().as_secs_f64());
    }

    pub fn files(&self) -> Vec<String> {
        self.files.keys().cloned().collect()
    }

    pub fn finish(self, command: &str, cfg: &RunConfig) -> Result<PathBuf> {
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config: cfg.echo(),
            files: self.files.into_iter().map(|(path, (bytes, sha256))| FileEntry { path, bytes, sha256 }).collect(),
            timings: cfg.timings.then_some(self.timings),
        };
        let path = self.root.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }
}

/// Re-hashes every file listed in a manifest; returns the paths that do not match.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let mut bad = Vec::new();
    for f in value["files"].as_array().into_iter().flatten() {
        let rel = f["path"].as_str().unwrap_or_default();
        let ok = fs::read(dir.join(rel)).map(|b| hex::encode(Sha256::digest(&b)) == f["sha256"].as_str().unwrap_or_default());
        if !matches!(ok, Ok(true)) {
            bad.push(rel.to_string());
        }
    }
    Ok(bad)
}

fn csv_writer(buf: &mut Vec<u8>) -> csv::Writer<&mut Vec<u8>> {
    csv::Writer::from_writer(buf)
}

// ---------------------------------------------------------------- gen-data

pub fn cmd_gen_data(cfg: &RunConfig) -> Result<Vec<String>> {
    let records = cohort::generate_synthetic(&cohort::CohortSpec::default(), cfg.data_seed)?;
    let mut out = Output::create(&cfg.out)?;
    out.write("cohort.csv", |b| cohort::write_csv(&records, b))?;
    let files = out.files();
    out.finish("gen-data", cfg)?;
    Ok(files)
}

// ------------------------------------------------------------------- stats

/// Factors of the first table (treatment and intra-operative); the rest go to the second.
pub const TREATMENT_FACTORS: [Factor; 4] = [Factor::NoCoil, Factor::Icg, Factor::Acsp, Factor::Perfb];

fn factor_rows(records: &[PatientRecord], factors: impl IntoIterator<Item = Factor>) -> Vec<FactorRow> {
    factors
        .into_iter()
        .filter(|&f| records.iter().any(|r| r.factor(f).is_some()))
        .map(|f| {
            let (one, zero) = f.levels();
            FactorRow {
                variable: f.name().to_string(),
                category: if f.exposed_level() == 1 { one } else { zero }.to_string(),
                table: cohort::factor_table(records, f),
            }
        })
        .collect()
}

/// Fitted logistic models of the multivariable analysis.
#[derive(Debug, Clone)]
pub struct LogisticSuite {
    pub full: LogisticModel,
    pub aic: LogisticModel,
    pub bic: LogisticModel,
    pub null: LogisticModel,
}

/// S1 uses every factor and measure observed in all records; S2 and S3 are
/// its backward reductions under AIC and BIC.
pub fn fit_logistic_suite(records: &[PatientRecord]) -> Result<LogisticSuite> {
    let mut names: Vec<String> = Vec::new();
    for f in Factor::ALL {
        if records.iter().all(|r| r.factor(f).is_some()) {
            names.push(f.name().to_string());
        }
    }
    for m in Measure::ALL {
        if records.iter().all(|r| r.measure(m).is_some()) {
            names.push(m.name().to_string());
        }
    }
    if names.is_empty() {
        return Err(Error::Config("no covariate is observed in every record".into()));
    }
    let (x, y) = cohort::design_matrix(records, &names)?;
    let full = stats::logistic_fit(&x, &y, &names).map_err(|e| e.context("model S1"))?;
    let aic = stats::stepwise_reduce(&x, &y, &names, Criterion::Aic).map_err(|e| e.context("model S2"))?.model;
    let bic = stats::stepwise_reduce(&x, &y, &names, Criterion::Bic).map_err(|e| e.context("model S3"))?.model;
    let null = stats::null_model(&y)?;
    Ok(LogisticSuite { full, aic, bic, null })
}

pub fn cmd_stats(cfg: &RunConfig) -> Result<Vec<String>> {
    let records = load_records(cfg)?;
    let mut out = Output::create(&cfg.out)?;
    let t1 = factor_rows(&records, TREATMENT_FACTORS);
    let t2 = factor_rows(&records, Factor::ALL.into_iter().filter(|f| !TREATMENT_FACTORS.contains(f)));
    out.write("table1.csv", |b| stats::write_factor_table(&t1, Continuity::Auto, b))?;
    out.write("table2.csv", |b| stats::write_factor_table(&t2, Continuity::Auto, b))?;

    let mut continuous = Vec::new();
    for m in Measure::ALL {
        let group = |leak: u8| -> Vec<f64> { records.iter().filter(|r| r.leak == leak).filter_map(|r| r.measure(m)).collect() };
        let (ev, ne) = (group(1), group(0));
        if ev.is_empty() || ne.is_empty() {
            continue;
        }
        let row = stats::compare_continuous(&ev, &ne).map_err(|e| e.context(format!("variable {}", m.name())))?;
        continuous.push((m.name().to_string(), row));
    }
    out.write("table3.csv", |b| stats::write_continuous_table(&continuous, b))?;

    let suite = fit_logistic_suite(&records)?;
    let models = [("S1", &suite.full), ("S2", &suite.aic), ("S3", &suite.bic)];
    out.write("logistic_models.csv", |b| {
        let mut w = csv_writer(b);
        w.write_record(["model", "covariate", "coefficient", "se", "z", "p_value", "odds_ratio", "or_ci_low", "or_ci_high"])?;
        for (label, m) in models {
            let ors = stats::odds_ratios(m, &vec![1.0; m.names.len()])?;
            for i in 0..m.n_params() {
                let name = if i == 0 { "(Intercept)" } else { m.names[i - 1].as_str() };
                let (or, lo, hi) = if i == 0 {
                    (m.beta[0].exp(), f64::NAN, f64::NAN)
                } else {
                    (ors[i - 1].or, ors[i - 1].ci_low, ors[i - 1].ci_high)
                };
                let mut rec = vec![label.to_string(), name.to_string()];
                rec.extend([m.beta[i], m.se(i), m.z(i), stats::wald_test(m, i), or].map(fmt_f64));
                rec.extend([lo, hi].map(|v| if v.is_nan() { String::new() } else { fmt_f64(v) }));
                w.write_record(rec)?;
            }
        }
        w.flush()?;
        Ok(())
    })?;

    let pairs = [("S2", &suite.aic, "null", &suite.null), ("S3", &suite.bic, "null", &suite.null), ("S1", &suite.full, "S2", &suite.aic), ("S1", &suite.full, "S3", &suite.bic)];
    out.write("lrt.csv", |b| {
        let mut w = csv_writer(b);
        w.write_record(["full", "reduced", "loglik_full", "loglik_reduced", "deviance", "df", "p_value"])?;
        for (fl, f, rl, r) in pairs {
            let lr = stats::likelihood_ratio_test(f, r).map_err(|e| e.context(format!("{fl} vs {rl}")))?;
            w.write_record([fl.to_string(), rl.to_string(), fmt_f64(f.loglik), fmt_f64(r.loglik), fmt_f64(lr.deviance), lr.df.to_string(), fmt_f64(lr.p_value)])?;
        }
        w.flush()?;
        Ok(())
    })?;

    out.write("determination.csv", |b| {
        let mut w = csv_writer(b);
        w.write_record(["model", "n_covariates", "loglik", "aic", "bic", "mcfadden", "cox_snell", "nagelkerke"])?;
        for (label, m) in models {
            let d = stats::determination_coefficients(m.loglik, suite.null.loglik, m.n);
            let mut rec = vec![label.to_string(), m.names.len().to_string()];
            rec.extend([m.loglik, m.aic(), m.bic(), d.mcfadden, d.cox_snell, d.nagelkerke].map(fmt_f64));
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    })?;
    let files = out.files();
    out.finish("stats", cfg)?;
    Ok(files)
}

// ------------------------------------------------------- shared fold setup

/// Features standardized with the statistics of one outer training split,
/// applied to every record so fold indices stay global.
pub struct PreparedFold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub inner: Vec<cohort::Fold>,
    pub x: Vec<Vec<f64>>,
}

pub struct Prepared {
    pub y: Vec<u8>,
    pub folds: Vec<PreparedFold>,
}

pub fn prepare(cfg: &RunConfig, records: &[PatientRecord]) -> Result<Prepared> {
    let (x, y) = cohort::design_matrix(records, &cfg.features)?;
    let plan = cohort::make_stratified_folds(&y, cfg.outer_folds, cfg.inner_folds, cfg.fold_seed)?;
    let folds = plan
        .outer
        .into_iter()
        .map(|f| {
            let train: Vec<Vec<f64>> = f.train.iter().map(|&i| x[i].clone()).collect();
            let (_, all, _) = cohort::standardize(&train, &x)?;
            Ok(PreparedFold { train: f.train, test: f.test, inner: f.inner, x: all })
        })
        .collect::<Result<_>>()?;
    Ok(Prepared { y, folds })
}

fn take<T: Clone>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i].clone()).collect()
}

// ---------------------------------------------------------------- QNN runs

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variant {
    pub ansatz: AnsatzFamily,
    pub method: Method,
}

impl Variant {
    pub fn label(&self) -> String {
        format!("QNN-{}-{}", self.ansatz.short_name(), self.method.name())
    }
}

pub fn variants(cfg: &RunConfig) -> Vec<Variant> {
    cfg.ansatz.iter().flat_map(|&ansatz| cfg.optimizers.iter().map(move |&method| Variant { ansatz, method })).collect()
}

#[derive(Debug, Clone)]
pub struct FoldRun {
    pub variant: Variant,
    pub run: usize,
    pub fold: usize,
    pub outcome: std::result::Result<FoldOutcome, String>,
}

#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub record: TrainRecord,
    pub test_probs: Vec<f64>,
    pub test_loss: f64,
}

impl FoldRun {
    pub fn run_id(&self) -> String {
        format!("{}-{}-r{}-f{}", self.variant.ansatz.short_name(), self.variant.method.name(), self.run, self.fold + 1)
    }
}

pub fn qnn_model(cfg: &RunConfig, variant: Variant, run: usize) -> Result<VqcModel> {
    let k = cfg.features.len();
    let ansatz = match variant.ansatz {
        AnsatzFamily::RealAmplitudes => AnsatzSpec::real_amplitudes(k, cfg.ansatz_reps),
        AnsatzFamily::EfficientSU2 => AnsatzSpec::efficient_su2(k, cfg.ansatz_reps),
    };
    VqcModel::new(FeatureMapSpec::new(k, cfg.feature_map_reps), ansatz, NoiseModel::new(cfg.noise)?, cfg.eval_mode(run))
}

/// Training seed shared by every variant for a given (run, fold), so that
/// methods are compared from the same initial parameters.
pub fn train_seed(cfg: &RunConfig, run: usize, fold: usize) -> u64 {
    split_seed(cfg.seed, (run * cfg.outer_folds + fold) as u64)
}

fn run_one(cfg: &RunConfig, prep: &Prepared, variant: Variant, run: usize, fold: usize) -> Result<FoldOutcome> {
    let f = &prep.folds[fold];
    let model = qnn_model(cfg, variant, run)?;
    let (xt, yt) = (take(&f.x, &f.train), take(&prep.y, &f.train));
    let (xv, yv) = (take(&f.x, &f.test), take(&prep.y, &f.test));
    let opt = OptimizerConfig { method: variant.method, budget: cfg.budget };
    let record = vqc::train(&model, &xt, &yt, &opt, train_seed(cfg, run, fold))?;
    let fitted = model.with_theta(record.best_theta.clone())?;
    let test_probs = fitted.predict_proba_batch(&xv)?;
    let test_loss = fitted.loss(&xv, &yv)?;
    Ok(FoldOutcome { record, test_probs, test_loss })
}

/// All (variant, run, fold) trainings, in that nesting order. Failures are kept.
pub fn run_qnn_grid(cfg: &RunConfig, prep: &Prepared, runs: usize) -> Vec<FoldRun> {
    let mut jobs = Vec::new();
    for v in variants(cfg) {
        for run in 0..runs {
            for fold in 0..prep.folds.len() {
                jobs.push((v, run, fold));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(variant, run, fold)| FoldRun {
            variant,
            run,
            fold,
            outcome: run_one(cfg, prep, variant, run, fold).map_err(|e| e.to_string()),
        })
        .collect()
}

/// Test-fold predictions concatenated in fold order, with matching labels.
fn pool(prep: &Prepared, per_fold: &[&[f64]]) -> (Vec<f64>, Vec<u8>) {
    let mut p = Vec::new();
    let mut y = Vec::new();
    for (f, probs) in prep.folds.iter().zip(per_fold) {
        p.extend_from_slice(probs);
        y.extend(f.test.iter().map(|&i| prep.y[i]));
    }
    (p, y)
}

/// Threshold from `rule` on the pooled predictions; if the floor cannot be
/// met the report uses 0.5 and is flagged.
pub fn evaluate_with_rule(probs: &[f64], y: &[u8], rule: ThresholdRule) -> Result<(EvalReport, bool)> {
    match metrics::select_threshold(probs, y, rule) {
        Ok(t) => Ok((metrics::evaluate(probs, y, t)?, false)),
        Err(Error::UnattainableSensitivity(_)) => Ok((metrics::evaluate(probs, y, 0.5)?, true)),
        Err(e) => Err(e),
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 { (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (mean, std)
}

/// Per-run aggregate over the outer folds.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub variant: Variant,
    pub run: usize,
    /// `None` when any fold failed; the message of the first failure otherwise.
    pub error: Option<String>,
    pub initial_loss: f64,
    pub train_loss: f64,
    pub test_loss: f64,
    pub report: Option<EvalReport>,
    pub flagged: bool,
}

pub fn summarize_runs(cfg: &RunConfig, prep: &Prepared, results: &[FoldRun]) -> Result<Vec<RunSummary>> {
    let n_folds = prep.folds.len();
    let mut out = Vec::new();
    for chunk in results.chunks(n_folds) {
        let (variant, run) = (chunk[0].variant, chunk[0].run);
        if let Some(err) = chunk.iter().find_map(|r| r.outcome.as_ref().err()) {
            out.push(RunSummary {
                variant,
                run,
                error: Some(err.clone()),
                initial_loss: f64::NAN,
                train_loss: f64::NAN,
                test_loss: f64::NAN,
                report: None,
                flagged: false,
            });
            continue;
        }
        let oks: Vec<&FoldOutcome> = chunk.iter().map(|r| r.outcome.as_ref().expect("checked")).collect();
        let per_fold: Vec<&[f64]> = oks.iter().map(|o| o.test_probs.as_slice()).collect();
        let (p, y) = pool(prep, &per_fold);
        let (report, flagged) = evaluate_with_rule(&p, &y, cfg.threshold_rule())?;
        let avg = |f: &dyn Fn(&FoldOutcome) -> f64| oks.iter().map(|o| f(o)).sum::<f64>() / n_folds as f64;
        out.push(RunSummary {
            variant,
            run,
            error: None,
            initial_loss: avg(&|o| o.record.initial_loss),
            train_loss: avg(&|o| o.record.best_loss),
            test_loss: avg(&|o| o.test_loss),
            report: Some(report),
            flagged,
        });
    }
    Ok(out)
}

const LOSS_COLUMNS: [&str; 3] = ["initial_loss", "train_loss", "test_loss"];

pub fn cmd_train_qnn(cfg: &RunConfig) -> Result<Vec<String>> {
    let records = load_records(cfg)?;
    let prep = prepare(cfg, &records)?;
    let mut out = Output::create(&cfg.out)?;
    let started = Instant::now();
    let results = run_qnn_grid(cfg, &prep, cfg.runs);
    out.time("train", started);
    let ok: Vec<(String, &TrainRecord)> =
        results.iter().filter_map(|r| r.outcome.as_ref().ok().map(|o| (r.run_id(), &o.record))).collect();
    out.write("convergence.csv", |b| vqc::write_convergence_csv(&ok, b))?;
    out.write("params.csv", |b| {
        let mut w = csv_writer(b);
        w.write_record(["run_id", "index", "initial", "best"])?;
        for (id, r) in &ok {
            for (i, (a, z)) in r.initial_theta.iter().zip(&r.best_theta).enumerate() {
                w.write_record([id.clone(), i.to_string(), fmt_f64(*a), fmt_f64(*z)])?;
            }
        }
        w.flush()?;
        Ok(())
    })?;
    out.write("qnn_folds.csv", |b| {
        let mut w = csv_writer(b);
        w.write_record(["run_id", "status", "evaluations", "termination", "initial_loss", "train_loss", "test_loss", "iterations"])?;
        for r in &results {
            match &r.outcome {
                Ok(o) => w.write_record([
                    r.run_id(),
                    "ok".into(),
                    o.record.evaluations.to_string(),
                    format!("{:?}", o.record.termination),
                    fmt_f64(o.record.initial_loss),
                    fmt_f64(o.record.best_loss),
                    fmt_f64(o.test_loss),
                    (o.record.loss_trace.len() - 1).to_string(),
                ])?,
                Err(e) => w.write_record([r.run_id(), format!("error: {e}"), String::new(), String::new(), String::new(), String::new(), String::new(), String::new()])?,
            }
        }
        w.flush()?;
        Ok(())
    })?;

    let runs = summarize_runs(cfg, &prep, &results)?;
    out.write("qnn_metrics.csv", |b| {
        let mut w = csv_writer(b);
        let mut header = vec!["ansatz", "optimizer", "run", "status", "flagged"];
        header.extend(LOSS_COLUMNS);
        header.extend(EvalReport::CSV_HEADER);
        w.write_record(header)?;
        for r in &runs {
            let mut rec = vec![r.variant.ansatz.short_name().to_string(), r.variant.method.name().to_string(), r.run.to_string()];
            match (&r.error, &r.report) {
                (None, Some(rep)) => {
                    rec.extend(["ok".to_string(), r.flagged.to_string()]);
                    rec.extend([r.initial_loss, r.train_loss, r.test_loss].map(fmt_f64));
                    rec.extend(rep.csv_fields());
                }
                (err, _) => {
                    rec.extend([format!("error: {}", err.as_deref().unwrap_or("unknown")), String::new()]);
                    rec.extend(std::iter::repeat_n(String::new(), 3 + EvalReport::CSV_HEADER.len()));
                }
            }
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    })?;
    out.write("qnn_summary.csv", |b| {
        let mut w = csv_writer(b);
        let mut header = vec!["ansatz".to_string(), "optimizer".to_string(), "n_runs".to_string(), "n_completed".to_string()];
        for c in LOSS_COLUMNS.iter().chain(&EvalReport::CSV_HEADER) {
            header.push(format!("{c}_mean"));
            header.push(format!("{c}_std"));
        }
        w.write_record(header)?;
        for v in variants(cfg) {
            let done: Vec<&RunSummary> = runs.iter().filter(|r| r.variant == v && r.report.is_some()).collect();
            let all = runs.iter().filter(|r| r.variant == v).count();
            let mut rec = vec![v.ansatz.short_name().to_string(), v.method.name().to_string(), all.to_string(), done.len().to_string()];
            let mut column = |values: Vec<f64>| {
                let finite: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
                let (m, s) = mean_std(&finite);
                rec.push(fmt_f64(m));
                rec.push(fmt_f64(s));
            };
            column(done.iter().map(|r| r.initial_loss).collect());
            column(done.iter().map(|r| r.train_loss).collect());
            column(done.iter().map(|r| r.test_loss).collect());
            for j in 0..EvalReport::CSV_HEADER.len() {
                column(done.iter().map(|r| r.report.expect("completed").values()[j]).collect());
            }
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    })?;
    let files = out.files();
    out.finish("train-qnn", cfg)?;
    Ok(files)
}

// ----------------------------------------------------------------- compare

/// One model's out-of-fold predictions, already oriented (flipped if needed).
#[derive(Debug, Clone)]
pub struct ModelPredictions {
    pub name: String,
    pub per_fold: Vec<Vec<f64>>,
    pub flipped: bool,
}

pub const COMPARISON_HEADER: [&str; 17] = [
    "model",
    "flipped",
    "flagged",
    "auc",
    "efron_r2",
    "mz_r2",
    "count_r2",
    "brier",
    "log_loss",
    "f1",
    "threshold",
    "sensitivity",
    "specificity",
    "ppv",
    "npv",
    "accuracy",
    "average_precision",
];

fn baseline_grid(family: Family, seed: u64) -> Vec<ClassifierSpec> {
    match family {
        Family::Mlp => vec![ClassifierSpec::default_mlp(seed)],
        f => f.grid(),
    }
}

fn orient(prep: &Prepared, name: String, per_fold: Vec<Vec<f64>>) -> Result<ModelPredictions> {
    let refs: Vec<&[f64]> = per_fold.iter().map(Vec::as_slice).collect();
    let (p, y) = pool(prep, &refs);
    let (_, flipped) = baselines::flip_if_auc_below_half(&p, &y)?;
    let per_fold = if flipped { per_fold.into_iter().map(|f| f.into_iter().map(|v| 1.0 - v).collect()).collect() } else { per_fold };
    Ok(ModelPredictions { name, per_fold, flipped })
}

pub fn cmd_compare(cfg: &RunConfig) -> Result<Vec<String>> {
    let records = load_records(cfg)?;
    let prep = prepare(cfg, &records)?;
    let mut out = Output::create(&cfg.out)?;
    let n_folds = prep.folds.len();

    let started = Instant::now();
    let jobs: Vec<(Family, usize)> = cfg.baselines.iter().flat_map(|&f| (0..n_folds).map(move |k| (f, k))).collect();
    let fitted: Vec<(Family, usize, ClassifierSpec, Vec<f64>)> = jobs
        .into_par_iter()
        .map(|(family, k)| {
            let f = &prep.folds[k];
            let grid = baseline_grid(family, cfg.seed);
            let search = baselines::grid_search(&grid, &f.x, &prep.y, &f.inner)?;
            let model = baselines::fit(&search.best, &take(&f.x, &f.train), &take(&prep.y, &f.train))?;
            let probs = model.predict_proba_batch(&take(&f.x, &f.test))?;
            Ok((family, k, search.best, probs))
        })
        .collect::<Result<_>>()?;
    out.time("baselines", started);

    let mut summary = Vec::new();
    let mut models = Vec::new();
    for family in &cfg.baselines {
        let mine: Vec<&(Family, usize, ClassifierSpec, Vec<f64>)> = fitted.iter().filter(|r| r.0 == *family).collect();
        for (_, k, spec, probs) in &mine {
            let y = take(&prep.y, &prep.folds[*k].test);
            summary.push(ModelSummaryRow { family: *family, spec: *spec, fold: k + 1, auc: metrics::auc(probs, &y)? });
        }
        models.push(orient(&prep, family.name().to_string(), mine.iter().map(|r| r.3.clone()).collect())?);
    }

    let started = Instant::now();
    let qnn = run_qnn_grid(cfg, &prep, 1);
    out.time("qnn", started);
    let mut qnn_models = Vec::new();
    for chunk in qnn.chunks(n_folds) {
        let name = chunk[0].variant.label();
        if let Some(err) = chunk.iter().find_map(|r| r.outcome.as_ref().err()) {
            return Err(Error::Config(format!("{name} failed: {err}")));
        }
        let per_fold: Vec<Vec<f64>> = chunk.iter().map(|r| r.outcome.as_ref().expect("checked").test_probs.clone()).collect();
        qnn_models.push((chunk, models.len()));
        models.push(orient(&prep, name, per_fold)?);
    }

    let rule = cfg.threshold_rule();
    let mut rows = Vec::new();
    for m in &models {
        let refs: Vec<&[f64]> = m.per_fold.iter().map(Vec::as_slice).collect();
        let (p, y) = pool(&prep, &refs);
        let (rep, flagged) = evaluate_with_rule(&p, &y, rule)?;
        rows.push((m, rep, flagged));
        let (curve, _) = metrics::roc_and_auc(&p, &y)?;
        out.write(&format!("roc_points/{}_pooled.csv", m.name), |b| curve.write_csv(b))?;
        for (k, probs) in m.per_fold.iter().enumerate() {
            let yk = take(&prep.y, &prep.folds[k].test);
            let (curve, _) = metrics::roc_and_auc(probs, &yk)?;
            out.write(&format!("roc_points/{}_fold{}.csv", m.name, k + 1), |b| curve.write_csv(b))?;
        }
    }
    out.write("comparison_table.csv", |b| {
        let mut w = csv_writer(b);
        w.write_record(COMPARISON_HEADER)?;
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        for (m, r, flagged) in &rows {
            let mut rec = vec![m.name.clone(), m.flipped.to_string(), flagged.to_string()];
            rec.extend([r.auc, r.efron_r2, r.mz_r2, r.count_r2, r.brier, r.log_loss].map(fmt_f64));
            rec.push(opt(r.f1));
            rec.push(fmt_f64(r.threshold));
            rec.extend([r.sensitivity, r.specificity, r.ppv, r.npv].map(opt));
            rec.push(fmt_f64(r.accuracy));
            rec.push(fmt_f64(r.average_precision));
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    })?;
    out.write("model_summary.csv", |b| baselines::write_model_summary(&summary, b))?;

    // Importance for the QNN variant with the best pooled AUC, using its
    // last outer fold (model trained on that fold, scored on its test split).
    let started = Instant::now();
    let best = qnn_models
        .iter()
        .map(|(chunk, idx)| (chunk, rows[*idx].1.auc))
        .fold(None::<(&&[FoldRun], f64)>, |acc, (c, a)| if acc.is_none_or(|(_, b)| a > b) { Some((c, a)) } else { acc });
    if let Some((chunk, _)) = best {
        let last = chunk.last().expect("non-empty");
        let outcome = last.outcome.as_ref().expect("checked");
        let f = &prep.folds[last.fold];
        let model = qnn_model(cfg, last.variant, 0)?.with_theta(outcome.record.best_theta.clone())?;
        let (xv, yv) = (take(&f.x, &f.test), take(&prep.y, &f.test));
        let perm = permutation_importance(&model, &xv, &yv, &cfg.features, cfg.repeats, cfg.seed)?;
        let grad = gradient_importance(&model, &xv, &cfg.features, cfg.epsilon)?;
        out.write("importance.csv", |b| write_importance_csv(&[perm, grad], b))?;
    }
    out.time("importance", started);

    let files = out.files();
    out.finish("compare", cfg)?;
    Ok(files)
}

/// Dispatch by subcommand name.
pub fn run_command(command: &str, cfg: &RunConfig) -> Result<Vec<String>> {
    match command {
        "stats" => cmd_stats(cfg),
        "train-qnn" => cmd_train_qnn(cfg),
        "compare" => cmd_compare(cfg),
        "gen-data" => cmd_gen_data(cfg),
        other => Err(Error::Config(format!("unknown command {other:?}"))),
    }
}
