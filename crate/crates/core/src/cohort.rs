//! Patient records, CSV I/O, the synthetic cohort generator and fold plans.
//!
//! Binary factors are coded `1 = Yes`. Two codings need stating: `PERFB = 1`
//! means bad perfusion and `SEX = 1` means female.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::qsim::split_seed;
use crate::stats::ContingencyTable2x2;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Factor {
    NoCoil,
    Icg,
    Acsp,
    Perfb,
    Dm,
    Smoking,
    Ht,
    Ichs,
    Koag,
    Cort,
    Sex,
    AsaGt2,
}

impl Factor {
    pub const ALL: [Factor; 12] = [
        Factor::NoCoil,
        Factor::Icg,
        Factor::Acsp,
        Factor::Perfb,
        Factor::Dm,
        Factor::Smoking,
        Factor::Ht,
        Factor::Ichs,
        Factor::Koag,
        Factor::Cort,
        Factor::Sex,
        Factor::AsaGt2,
    ];

    pub fn column(self) -> &'static str {
        match self {
            Factor::NoCoil => "NOCOIL",
            Factor::Icg => "ICG",
            Factor::Acsp => "ACSP",
            Factor::Perfb => "PERFB",
            Factor::Dm => "DM",
            Factor::Smoking => "SMOKING",
            Factor::Ht => "HT",
            Factor::Ichs => "ICHS",
            Factor::Koag => "KOAG",
            Factor::Cort => "CORT",
            Factor::Sex => "SEX",
            Factor::AsaGt2 => "ASA_GT2",
        }
    }

    /// Display name used in tables and configuration.
    pub fn name(self) -> &'static str {
        match self {
            Factor::NoCoil => "NoCoil",
            Factor::Icg => "ICG",
            Factor::Acsp => "ACSP",
            Factor::Perfb => "PERFB",
            Factor::Dm => "DM",
            Factor::Smoking => "Smoking",
            Factor::Ht => "HT",
            Factor::Ichs => "ICHS",
            Factor::Koag => "COAG",
            Factor::Cort => "CORT",
            Factor::Sex => "Sex",
            Factor::AsaGt2 => "ASA",
        }
    }

    /// Labels for level 1 and level 0.
    pub fn levels(self) -> (&'static str, &'static str) {
        match self {
            Factor::Perfb => ("Bad", "Good"),
            Factor::Sex => ("Female", "Male"),
            Factor::AsaGt2 => (">2", "2"),
            _ => ("Yes", "No"),
        }
    }

    /// The level treated as exposed in the relative-risk tables: the one
    /// with the higher observed leak rate.
    pub fn exposed_level(self) -> u8 {
        match self {
            Factor::NoCoil | Factor::Icg | Factor::Acsp | Factor::Koag | Factor::Ichs => 0,
            _ => 1,
        }
    }

    fn index(self) -> usize {
        Factor::ALL.iter().position(|&f| f == self).expect("listed")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Measure {
    Crp,
    Bmi,
    Age,
    Hb,
    Ln,
}

impl Measure {
    pub const ALL: [Measure; 5] = [Measure::Crp, Measure::Bmi, Measure::Age, Measure::Hb, Measure::Ln];

    pub fn column(self) -> &'static str {
        match self {
            Measure::Crp => "CRP",
            Measure::Bmi => "BMI",
            Measure::Age => "AGE",
            Measure::Hb => "HB",
            Measure::Ln => "LN",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Measure::Crp => "CRP",
            Measure::Bmi => "BMI",
            Measure::Age => "Age",
            Measure::Hb => "HB",
            Measure::Ln => "LN",
        }
    }

    fn index(self) -> usize {
        Measure::ALL.iter().position(|&m| m == self).expect("listed")
    }

    /// Decimal places kept by the generator.
    fn decimals(self) -> i32 {
        match self {
            Measure::Crp | Measure::Bmi => 1,
            _ => 0,
        }
    }
}

pub const LABEL_COLUMN: &str = "LEAK";

/// `LEAK`, the twelve factors, then the five measures.
pub fn schema_columns() -> Vec<&'static str> {
    std::iter::once(LABEL_COLUMN)
        .chain(Factor::ALL.iter().map(|f| f.column()))
        .chain(Measure::ALL.iter().map(|m| m.column()))
        .collect()
}

/// The four covariates used by the quantum and classical models.
pub const DEFAULT_MODEL_FEATURES: [&str; 4] = ["NoCoil", "ACSP", "DM", "Smoking"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub leak: u8,
    pub factors: [Option<u8>; 12],
    pub measures: [Option<f64>; 5],
    /// Columns outside the schema, kept verbatim.
    pub extras: BTreeMap<String, String>,
}

impl PatientRecord {
    pub fn new(leak: u8) -> Self {
        Self { leak, factors: [None; 12], measures: [None; 5], extras: BTreeMap::new() }
    }

    pub fn factor(&self, f: Factor) -> Option<u8> {
        self.factors[f.index()]
    }

    pub fn set_factor(&mut self, f: Factor, v: u8) {
        self.factors[f.index()] = Some(v);
    }

    pub fn measure(&self, m: Measure) -> Option<f64> {
        self.measures[m.index()]
    }

    pub fn set_measure(&mut self, m: Measure, v: f64) {
        self.measures[m.index()] = Some(v);
    }

    /// Looks a feature up by display or column name, case-insensitively.
    pub fn feature(&self, name: &str) -> Option<f64> {
        if let Some(f) = resolve_factor(name) {
            return self.factor(f).map(f64::from);
        }
        if let Some(m) = resolve_measure(name) {
            return self.measure(m);
        }
        self.extras.get(name).and_then(|v| v.parse().ok())
    }
}

pub fn resolve_factor(name: &str) -> Option<Factor> {
    Factor::ALL.into_iter().find(|f| f.column().eq_ignore_ascii_case(name) || f.name().eq_ignore_ascii_case(name))
}

pub fn resolve_measure(name: &str) -> Option<Measure> {
    Measure::ALL.into_iter().find(|m| m.column().eq_ignore_ascii_case(name) || m.name().eq_ignore_ascii_case(name))
}

/// Feature matrix and labels; any missing feature is an error.
pub fn design_matrix(records: &[PatientRecord], features: &[String]) -> Result<(Vec<Vec<f64>>, Vec<u8>)> {
    let mut x = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let row = features
            .iter()
            .map(|f| r.feature(f).ok_or_else(|| Error::MissingFeature { record: i, feature: f.clone() }))
            .collect::<Result<Vec<f64>>>()?;
        x.push(row);
    }
    Ok((x, records.iter().map(|r| r.leak).collect()))
}

/// Event / non-event table of one factor with its exposed level first.
pub fn factor_table(records: &[PatientRecord], f: Factor) -> ContingencyTable2x2 {
    let exposed = f.exposed_level();
    let mut t = ContingencyTable2x2::new(0, 0, 0, 0);
    for r in records {
        let Some(v) = r.factor(f) else { continue };
        match (v == exposed, r.leak == 1) {
            (true, true) => t.a += 1,
            (true, false) => t.b += 1,
            (false, true) => t.c += 1,
            (false, false) => t.d += 1,
        }
    }
    t
}

/// Median and quartiles of one continuous variable within an outcome group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl MeasureSpec {
    pub const fn new(median: f64, q1: f64, q3: f64) -> Self {
        Self { median, q1, q3 }
    }
}

/// A target odds ratio between two factors inside one outcome group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairTarget {
    pub leak: u8,
    pub first: Factor,
    pub second: Factor,
    pub odds_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub n_leak: usize,
    pub n_no_leak: usize,
    /// Level-1 counts as `(among leak, among no leak)`.
    pub factor_counts: BTreeMap<Factor, (usize, usize)>,
    /// `(leak group, no-leak group)` distributions.
    pub measures: BTreeMap<Measure, (MeasureSpec, MeasureSpec)>,
    /// Optional within-group dependence between factors.
    pub pair_targets: Vec<PairTarget>,
}

impl Default for CohortSpec {
    /// The reference 200-patient cohort structure.
    fn default() -> Self {
        let factor_counts = BTreeMap::from([
            (Factor::NoCoil, (3, 52)),
            (Factor::Icg, (9, 91)),
            (Factor::Acsp, (5, 60)),
            (Factor::Perfb, (3, 12)),
            (Factor::Dm, (9, 27)),
            (Factor::Smoking, (9, 25)),
            (Factor::Ht, (19, 95)),
            (Factor::Ichs, (3, 18)),
            (Factor::Koag, (1, 8)),
            (Factor::Cort, (2, 5)),
            (Factor::Sex, (10, 60)),
            (Factor::AsaGt2, (13, 59)),
        ]);
        let measures = BTreeMap::from([
            (Measure::Crp, (MeasureSpec::new(108.0, 78.0, 131.0), MeasureSpec::new(62.0, 34.0, 94.0))),
            (Measure::Bmi, (MeasureSpec::new(28.0, 24.0, 31.0), MeasureSpec::new(26.0, 24.0, 29.0))),
            (Measure::Age, (MeasureSpec::new(65.0, 60.0, 67.0), MeasureSpec::new(65.0, 58.0, 71.0))),
            (Measure::Hb, (MeasureSpec::new(115.0, 103.0, 121.0), MeasureSpec::new(116.0, 107.0, 123.0))),
            (Measure::Ln, (MeasureSpec::new(13.0, 6.0, 16.0), MeasureSpec::new(13.0, 8.0, 17.0))),
        ]);
        Self { n_leak: 28, n_no_leak: 172, factor_counts, measures, pair_targets: Vec::new() }
    }
}

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_leak == 0 || self.n_no_leak == 0 {
            return Err(Error::Config("both outcome groups must be non-empty".into()));
        }
        for (f, &(l, n)) in &self.factor_counts {
            if l > self.n_leak || n > self.n_no_leak {
                return Err(Error::Config(format!("{} counts ({l}, {n}) exceed group sizes", f.name())));
            }
        }
        for (m, (a, b)) in &self.measures {
            for s in [a, b] {
                if !(s.q1 <= s.median && s.median <= s.q3) || (*m == Measure::Crp && s.q1 <= 0.0) {
                    return Err(Error::Config(format!("bad quartiles for {}", m.name())));
                }
            }
        }
        for t in &self.pair_targets {
            if t.first == t.second || !(t.odds_ratio > 0.0) || t.leak > 1 {
                return Err(Error::Config(format!("bad pair target {t:?}")));
            }
        }
        Ok(())
    }
}

/// Normal-quantile spread of the interquartile range.
const IQR_Z: f64 = 1.349;

fn draw_measure(rng: &mut ChaCha8Rng, m: Measure, s: &MeasureSpec) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    let raw = if m == Measure::Crp {
        let sigma = (s.q3.ln() - s.q1.ln()) / IQR_Z;
        (s.median.ln() + sigma * z).exp()
    } else {
        s.median + (s.q3 - s.q1) / IQR_Z * z
    };
    let scale = 10f64.powi(m.decimals());
    ((raw * scale).round() / scale).max(0.0)
}

/// Builds a cohort whose per-group factor counts match `spec` exactly.
/// Factors are drawn independently given the outcome unless pair targets
/// ask otherwise.
pub fn generate_synthetic(spec: &CohortSpec, seed: u64) -> Result<Vec<PatientRecord>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(spec.n_leak + spec.n_no_leak);
    for (leak, size) in [(1u8, spec.n_leak), (0u8, spec.n_no_leak)] {
        let mut group: Vec<PatientRecord> = (0..size).map(|_| PatientRecord::new(leak)).collect();
        for (&f, &(in_leak, in_none)) in &spec.factor_counts {
            let k = if leak == 1 { in_leak } else { in_none };
            for r in group.iter_mut() {
                r.set_factor(f, 0);
            }
            for i in index::sample(&mut rng, size, k) {
                group[i].set_factor(f, 1);
            }
        }
        for t in spec.pair_targets.iter().filter(|t| t.leak == leak) {
            impose_pair(&mut group, t, &mut rng);
        }
        for r in group.iter_mut() {
            for (&m, (in_leak, in_none)) in &spec.measures {
                let s = if leak == 1 { in_leak } else { in_none };
                r.set_measure(m, draw_measure(&mut rng, m, s));
            }
        }
        records.extend(group);
    }
    Ok(records)
}

/// 2x2 joint counts with the given margins whose odds ratio is closest to
/// `odds_ratio`, via iterative proportional fitting of `[[or, 1], [1, 1]]`.
pub fn fit_joint_counts(n: usize, k_first: usize, k_second: usize, odds_ratio: f64) -> usize {
    let (nf, r1, c1) = (n as f64, k_first as f64, k_second as f64);
    let (r0, c0) = (nf - r1, nf - c1);
    let mut cell = [[odds_ratio, 1.0], [1.0, 1.0]];
    for _ in 0..500 {
        for (row, target) in cell.iter_mut().zip([r1, r0]) {
            let s = row[0] + row[1];
            if s > 0.0 {
                row[0] *= target / s;
                row[1] *= target / s;
            }
        }
        for (col, target) in [c1, c0].into_iter().enumerate() {
            let s = cell[0][col] + cell[1][col];
            if s > 0.0 {
                cell[0][col] *= target / s;
                cell[1][col] *= target / s;
            }
        }
    }
    let lo = (k_first + k_second).saturating_sub(n);
    let hi = k_first.min(k_second);
    (cell[0][0].round() as usize).clamp(lo, hi)
}

fn impose_pair(group: &mut [PatientRecord], t: &PairTarget, rng: &mut ChaCha8Rng) {
    let n = group.len();
    let yes_first: Vec<usize> = (0..n).filter(|&i| group[i].factor(t.first) == Some(1)).collect();
    let no_first: Vec<usize> = (0..n).filter(|&i| group[i].factor(t.first) != Some(1)).collect();
    let k_second = group.iter().filter(|r| r.factor(t.second) == Some(1)).count();
    let both = fit_joint_counts(n, yes_first.len(), k_second, t.odds_ratio);
    for r in group.iter_mut() {
        r.set_factor(t.second, 0);
    }
    for i in index::sample(rng, yes_first.len(), both) {
        group[yes_first[i]].set_factor(t.second, 1);
    }
    for i in index::sample(rng, no_first.len(), k_second - both) {
        group[no_first[i]].set_factor(t.second, 1);
    }
}

fn parse_error(path: &Path, line: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, column: column.to_string(), message: message.into() }
}

/// Reads a cohort CSV. Only `LEAK` is required; the label may be `0/1` or
/// `-1/1`. Schema columns may be empty (missing); other columns are kept as
/// extras.
pub fn load_csv(path: &Path) -> Result<Vec<PatientRecord>> {
    let file = File::open(path).map_err(|e| Error::from(e).context(path.display().to_string()))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers()?.clone();
    let position = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let label = position(LABEL_COLUMN)
        .ok_or_else(|| Error::MissingColumn { path: path.to_path_buf(), column: LABEL_COLUMN.into() })?;
    let factor_cols: Vec<(Factor, usize)> =
        Factor::ALL.iter().filter_map(|&f| position(f.column()).map(|i| (f, i))).collect();
    let measure_cols: Vec<(Measure, usize)> =
        Measure::ALL.iter().filter_map(|&m| position(m.column()).map(|i| (m, i))).collect();
    let schema = schema_columns();
    let extra_cols: Vec<(String, usize)> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| !schema.iter().any(|s| s.eq_ignore_ascii_case(h)))
        .map(|(i, h)| (h.to_string(), i))
        .collect();

    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(path, line, "", e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| row.get(i).unwrap_or("");
        let leak = match field(label) {
            "1" => 1,
            "0" | "-1" => 0,
            other => return Err(parse_error(path, line, LABEL_COLUMN, format!("label {other:?} is not 0/1 or -1/1"))),
        };
        let mut rec = PatientRecord::new(leak);
        for &(f, i) in &factor_cols {
            match field(i) {
                "" => {}
                "0" => rec.set_factor(f, 0),
                "1" => rec.set_factor(f, 1),
                other => return Err(parse_error(path, line, f.column(), format!("{other:?} is not binary"))),
            }
        }
        for &(m, i) in &measure_cols {
            let text = field(i);
            if text.is_empty() {
                continue;
            }
            let v: f64 = text
                .parse()
                .map_err(|_| parse_error(path, line, m.column(), format!("{text:?} is not a number")))?;
            if !v.is_finite() || (m == Measure::Crp && v < 0.0) {
                return Err(parse_error(path, line, m.column(), format!("{text:?} is out of range")));
            }
            rec.set_measure(m, v);
        }
        for (name, i) in &extra_cols {
            rec.extras.insert(name.clone(), field(*i).to_string());
        }
        out.push(rec);
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(out)
}

/// Writes the full schema plus every extra column seen; missing values are
/// empty fields. Floats use the shortest round-trip representation.
pub fn write_csv<W: Write>(records: &[PatientRecord], out: W) -> Result<()> {
    let mut extras: Vec<&String> = records.iter().flat_map(|r| r.extras.keys()).collect();
    extras.sort();
    extras.dedup();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = schema_columns().into_iter().map(String::from).collect();
    header.extend(extras.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.leak.to_string()];
        row.extend(r.factors.iter().map(|v| v.map_or(String::new(), |v| v.to_string())));
        row.extend(r.measures.iter().map(|v| v.map_or(String::new(), |v| v.to_string())));
        row.extend(extras.iter().map(|k| r.extras.get(*k).cloned().unwrap_or_default()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-feature affine scaling fitted on a training matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation, floored at `STD_FLOOR`.
    pub std: Vec<f64>,
    /// Features whose training standard deviation was below the floor; they map to 0.
    pub constant: Vec<bool>,
}

pub const STD_FLOOR: f64 = 1e-12;

impl Standardizer {
    pub fn fit(train: &[Vec<f64>]) -> Result<Self> {
        let first = train.first().ok_or(Error::EmptyDataset)?;
        let k = first.len();
        let n = train.len() as f64;
        let mut mean = vec![0.0; k];
        for row in train {
            if row.len() != k {
                return Err(Error::DimensionMismatch { expected: k, actual: row.len() });
            }
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; k];
        for row in train {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let raw: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
        let constant: Vec<bool> = raw.iter().map(|&s| s < STD_FLOOR).collect();
        Ok(Self { mean, std: raw.iter().map(|s| s.max(STD_FLOOR)).collect(), constant })
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| if self.constant[j] { 0.0 } else { (v - self.mean[j]) / self.std[j] })
            .collect()
    }

    pub fn transform(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| self.transform_row(r)).collect()
    }
}

/// Fits on `train` and scales both matrices.
pub fn standardize(train: &[Vec<f64>], apply: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, Standardizer)> {
    let s = Standardizer::fit(train)?;
    Ok((s.transform(train), s.transform(apply), s))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OuterFold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Inner folds, as indices into the cohort (subsets of `train`).
    pub inner: Vec<Fold>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub seed: u64,
    pub outer: Vec<OuterFold>,
}

/// Contiguous chunks of `order`; the first `len % k` chunks get one extra element.
fn chunk_folds(order: &[usize], k: usize) -> Vec<Fold> {
    let n = order.len();
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = n / k + usize::from(f < n % k);
        let test = order[start..start + size].to_vec();
        let train = order[..start].iter().chain(&order[start + size..]).copied().collect();
        folds.push(Fold { train, test });
        start += size;
    }
    folds
}

/// Round-robin assignment after shuffling within each class, so every fold
/// gets a near-equal share of each label.
fn stratified_order(indices: &[usize], labels: &[u8], rng: &mut ChaCha8Rng, k: usize) -> Vec<usize> {
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut slot = 0;
    for class in [1u8, 0u8] {
        let mut members: Vec<usize> = indices.iter().copied().filter(|&i| labels[i] == class).collect();
        members.shuffle(rng);
        for i in members {
            buckets[slot % k].push(i);
            slot += 1;
        }
    }
    // Bucket sizes may differ by one; order them so chunking keeps them intact.
    buckets.sort_by_key(|b| std::cmp::Reverse(b.len()));
    buckets.concat()
}

fn build_plan(n: usize, outer: usize, inner: usize, seed: u64, labels: Option<&[u8]>) -> Result<FoldPlan> {
    if outer < 2 || n < outer {
        return Err(Error::Config(format!("cannot split {n} records into {outer} outer folds")));
    }
    if inner < 2 {
        return Err(Error::Config("need at least 2 inner folds".into()));
    }
    let all: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = match labels {
        Some(y) => stratified_order(&all, y, &mut rng, outer),
        None => {
            let mut o = all;
            o.shuffle(&mut rng);
            o
        }
    };
    let mut folds = Vec::with_capacity(outer);
    for (f, fold) in chunk_folds(&order, outer).into_iter().enumerate() {
        let mut inner_rng = ChaCha8Rng::seed_from_u64(split_seed(seed, f as u64 + 1));
        let inner_order = match labels {
            Some(y) => stratified_order(&fold.train, y, &mut inner_rng, inner),
            None => {
                let mut o = fold.train.clone();
                o.shuffle(&mut inner_rng);
                o
            }
        };
        if inner_order.len() < inner {
            return Err(Error::Config("outer training set smaller than the inner fold count".into()));
        }
        folds.push(OuterFold { train: fold.train, test: fold.test, inner: chunk_folds(&inner_order, inner) });
    }
    Ok(FoldPlan { seed, outer: folds })
}

/// Seeded, unstratified outer folds with inner folds on each outer-train set.
pub fn make_folds(n: usize, outer: usize, inner: usize, seed: u64) -> Result<FoldPlan> {
    build_plan(n, outer, inner, seed, None)
}

/// As [`make_folds`] but balancing labels across folds.
pub fn make_stratified_folds(labels: &[u8], outer: usize, inner: usize, seed: u64) -> Result<FoldPlan> {
    build_plan(labels.len(), outer, inner, seed, Some(labels))
}
