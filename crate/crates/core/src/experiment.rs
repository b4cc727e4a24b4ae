//! Benchmark runner: split, standardize, train every imputer, mask the test
//! split by whole features, impute, and score by downstream accuracy and
//! RMSE; then rank the methods per missingness level and test the ranks.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifiers::{ClassifierKind, DEFAULT_SEARCH_BUDGET, Hyperparams, accuracy, select_best};
use crate::dataio::{
    DEFAULT_SYNTHETIC_DIM, DEFAULT_SYNTHETIC_ROWS, Dataset, LabelColumn, Scaler, gen_ringnorm, gen_twonorm, load_csv,
    split_70_30,
};
use crate::imputer::ImputerSpec;
use crate::masking::{MaskScheme, sample_mask, zero_missing};
use crate::seed::{SeedCoord, SeedTree};
use crate::stats::{
    BonferroniDunn, Direction, FriedmanResult, RankTable, bonferroni_dunn, friedman_chi2, rmse_missing,
};
use crate::{Error, Result};

const STREAM_DATA: u8 = 0;
const STREAM_SPLIT: u8 = 1;
const STREAM_CLASSIFIER: u8 = 2;
const STREAM_TRAIN: u8 = 3;
const STREAM_MASK: u8 = 4;
const STREAM_IMPUTE: u8 = 5;

fn default_rows() -> usize {
    DEFAULT_SYNTHETIC_ROWS
}

fn default_dim() -> usize {
    DEFAULT_SYNTHETIC_DIM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSpec {
    Twonorm {
        #[serde(default = "default_rows")]
        n: usize,
        #[serde(default = "default_dim")]
        d: usize,
        #[serde(default)]
        name: Option<String>,
    },
    Ringnorm {
        #[serde(default = "default_rows")]
        n: usize,
        #[serde(default = "default_dim")]
        d: usize,
        #[serde(default)]
        name: Option<String>,
    },
    Csv {
        path: PathBuf,
        #[serde(default)]
        label: LabelColumn,
        #[serde(default)]
        name: Option<String>,
    },
}

impl DatasetSpec {
    pub fn load(&self, seed: u64) -> Result<Dataset> {
        let (mut ds, name) = match self {
            DatasetSpec::Twonorm { n, d, name } => (gen_twonorm(*n, *d, seed)?, name),
            DatasetSpec::Ringnorm { n, d, name } => (gen_ringnorm(*n, *d, seed)?, name),
            DatasetSpec::Csv { path, label, name } => (load_csv(path, label)?, name),
        };
        if let Some(name) = name {
            ds.name = name.clone();
        }
        Ok(ds)
    }
}

fn default_levels() -> Vec<f64> {
    vec![0.1, 0.2, 0.3, 0.4, 0.5]
}

fn default_repeats() -> usize {
    10
}

fn default_output() -> PathBuf {
    PathBuf::from("report")
}

fn default_classifiers() -> Vec<ClassifierKind> {
    ClassifierKind::ALL.to_vec()
}

fn default_budget() -> usize {
    DEFAULT_SEARCH_BUDGET
}

fn default_alpha() -> f64 {
    0.10
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_true")]
    pub stratified: bool,
    #[serde(default = "default_classifiers")]
    pub classifiers: Vec<ClassifierKind>,
    #[serde(default = "default_budget")]
    pub search_budget: usize,
    /// Post-hoc control method; defaults to WGAIN when configured, else the
    /// first imputer.
    #[serde(default)]
    pub control: Option<String>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub datasets: Vec<DatasetSpec>,
    pub imputers: Vec<ImputerSpec>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Serde(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
            return Err(Error::invalid(format!("missingness levels must lie in (0, 1), got {l}")));
        }
        if self.levels.is_empty() || self.levels.len() >= 1 << 12 {
            return Err(Error::invalid("need between 1 and 4095 missingness levels"));
        }
        if self.repeats == 0 || self.repeats >= 1 << 20 {
            return Err(Error::invalid("repeats must lie in [1, 2^20)"));
        }
        if self.datasets.is_empty() || self.datasets.len() > u16::MAX as usize {
            return Err(Error::invalid("need at least one dataset"));
        }
        if self.imputers.is_empty() || self.imputers.len() >= 1 << 12 {
            return Err(Error::invalid("need at least one imputer"));
        }
        if self.classifiers.is_empty() || self.search_budget == 0 {
            return Err(Error::invalid("need at least one classifier kind and a positive search budget"));
        }
        let names = self.method_names();
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::invalid(format!("imputer {n} is configured twice")));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if let Some(c) = &self.control {
            if !names.iter().any(|n| n == c) {
                return Err(Error::invalid(format!("control {c:?} is not a configured imputer")));
            }
        }
        Ok(())
    }

    pub fn method_names(&self) -> Vec<String> {
        self.imputers.iter().map(|i| i.name().to_string()).collect()
    }

    pub fn control_name(&self) -> String {
        let names = self.method_names();
        self.control
            .clone()
            .or_else(|| names.iter().find(|n| *n == "WGAIN").cloned())
            .unwrap_or_else(|| names[0].clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    Rmse,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Rmse => "rmse",
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            Metric::Accuracy => Direction::HigherBetter,
            Metric::Rmse => Direction::LowerBetter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub n_train: usize,
    pub n_test: usize,
    pub n_features: usize,
    pub classifier: Option<Hyperparams>,
    pub clean_accuracy: Option<f64>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

/// Mean over repeats for one (dataset, imputer, level), or the first error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub dataset: String,
    pub imputer: String,
    pub level: f64,
    pub accuracy: Option<f64>,
    pub rmse: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub level: f64,
    pub metric: Metric,
    /// Datasets with every cell present at this level.
    pub table: Option<RankTable>,
    pub mean_ranks: Vec<f64>,
    pub friedman: Option<FriedmanResult>,
    pub posthoc: Option<BonferroniDunn>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub methods: Vec<String>,
    pub levels: Vec<f64>,
    pub control: String,
    pub alpha: f64,
    pub datasets: Vec<DatasetSummary>,
    pub cells: Vec<CellResult>,
    pub stats: Vec<LevelStats>,
}

impl Report {
    pub fn cell(&self, dataset: &str, imputer: &str, level: f64) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.dataset == dataset && c.imputer == imputer && c.level == level)
    }
}

fn coord(stream: u8, dataset: usize, imputer: usize, level: usize, repeat: usize) -> SeedCoord {
    SeedCoord {
        stream,
        dataset: dataset as u16,
        imputer: imputer as u16,
        level: level as u16,
        repeat: repeat as u32,
    }
}

struct Prepared {
    summary: DatasetSummary,
    cells: Vec<CellResult>,
}

fn failed_cells(name: &str, methods: &[String], levels: &[f64], msg: &str) -> Vec<CellResult> {
    methods
        .iter()
        .flat_map(|m| {
            levels.iter().map(move |&level| CellResult {
                dataset: name.to_string(),
                imputer: m.clone(),
                level,
                accuracy: None,
                rmse: None,
                error: Some(msg.to_string()),
            })
        })
        .collect()
}

fn run_dataset(cfg: &ExperimentConfig, tree: &SeedTree, di: usize) -> Prepared {
    let methods = cfg.method_names();
    let spec = &cfg.datasets[di];
    let fallback_name = match spec {
        DatasetSpec::Twonorm { name, .. } => name.clone().unwrap_or_else(|| "twonorm".into()),
        DatasetSpec::Ringnorm { name, .. } => name.clone().unwrap_or_else(|| "ringnorm".into()),
        DatasetSpec::Csv { name, path, .. } => name.clone().unwrap_or_else(|| path.display().to_string()),
    };
    let fail = |name: &str, e: Error| Prepared {
        summary: DatasetSummary {
            name: name.to_string(),
            n_train: 0,
            n_test: 0,
            n_features: 0,
            classifier: None,
            clean_accuracy: None,
            warnings: Vec::new(),
            error: Some(e.to_string()),
        },
        cells: failed_cells(name, &methods, &cfg.levels, &format!("dataset failed: {e}")),
    };
    let ds = match spec.load(tree.derive(coord(STREAM_DATA, di, 0, 0, 0))) {
        Ok(ds) => ds,
        Err(e) => return fail(&fallback_name, e),
    };
    match evaluate_dataset(cfg, tree, di, &ds) {
        Ok(p) => p,
        Err(e) => fail(&ds.name, e),
    }
}

fn evaluate_dataset(cfg: &ExperimentConfig, tree: &SeedTree, di: usize, ds: &Dataset) -> Result<Prepared> {
    let methods = cfg.method_names();
    let split = split_70_30(ds, tree.derive(coord(STREAM_SPLIT, di, 0, 0, 0)), cfg.stratified)?;
    let scaler = Scaler::fit(&split.train.features)?;
    let train_x = scaler.transform(&split.train.features)?;
    let test_x = scaler.transform(&split.test.features)?;
    let selection = select_best(
        (&train_x, &split.train.labels),
        (&test_x, &split.test.labels),
        &cfg.classifiers,
        cfg.search_budget,
        tree.derive(coord(STREAM_CLASSIFIER, di, 0, 0, 0)),
    )?;
    let mut warnings = split.warnings.clone();
    warnings.extend(scaler.warnings.iter().cloned());

    // imputers train independently; results are gathered in config order
    let models: Vec<Result<crate::ImputerModel>> = std::thread::scope(|s| {
        let handles: Vec<_> = cfg
            .imputers
            .iter()
            .enumerate()
            .map(|(ii, spec)| {
                let train_x = &train_x;
                let seed = tree.derive(coord(STREAM_TRAIN, di, ii, 0, 0));
                s.spawn(move || spec.train(train_x, seed))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::invalid("imputer training panicked"))))
            .collect()
    });

    let (n_test, d) = test_x.shape();
    let mut cells = Vec::with_capacity(methods.len() * cfg.levels.len());
    for (ii, model) in models.iter().enumerate() {
        for (li, &level) in cfg.levels.iter().enumerate() {
            let outcome = match model {
                Err(e) => Err(Error::invalid(format!("training failed: {e}"))),
                Ok(model) => (|| {
                    let (mut acc_sum, mut rmse_sum) = (0.0, 0.0);
                    for r in 0..cfg.repeats {
                        // shared by every imputer for this (dataset, level, repeat)
                        let mask_seed = tree.derive(coord(STREAM_MASK, di, 0, li, r));
                        let m = sample_mask(MaskScheme::FeatureSubset(level), n_test, d, mask_seed)?;
                        let x_obs = zero_missing(&test_x, &m)?;
                        let imputed = model.impute(&x_obs, &m, tree.derive(coord(STREAM_IMPUTE, di, ii, li, r)))?;
                        acc_sum += accuracy(&selection.classifier.predict(&imputed)?, &split.test.labels)?;
                        let raw = scaler.inverse_transform(&imputed)?;
                        rmse_sum += rmse_missing(&split.test.features, &raw, &m)?;
                    }
                    let n = cfg.repeats as f64;
                    Ok((acc_sum / n, rmse_sum / n))
                })(),
            };
            cells.push(match outcome {
                Ok((acc, rmse)) => CellResult {
                    dataset: ds.name.clone(),
                    imputer: methods[ii].clone(),
                    level,
                    accuracy: Some(acc),
                    rmse: Some(rmse),
                    error: None,
                },
                Err(e) => CellResult {
                    dataset: ds.name.clone(),
                    imputer: methods[ii].clone(),
                    level,
                    accuracy: None,
                    rmse: None,
                    error: Some(e.to_string()),
                },
            });
        }
    }
    Ok(Prepared {
        summary: DatasetSummary {
            name: ds.name.clone(),
            n_train: split.train.n_rows(),
            n_test,
            n_features: d,
            classifier: Some(selection.hyperparams),
            clean_accuracy: Some(selection.accuracy),
            warnings,
            error: None,
        },
        cells,
    })
}

fn level_stats(
    report_cells: &[CellResult],
    datasets: &[String],
    methods: &[String],
    level: f64,
    metric: Metric,
    control: &str,
    alpha: f64,
) -> LevelStats {
    let mut notes = Vec::new();
    let mut rows = Vec::new();
    let mut kept = Vec::new();
    for ds in datasets {
        let row: Option<Vec<f64>> = methods
            .iter()
            .map(|m| {
                report_cells
                    .iter()
                    .find(|c| &c.dataset == ds && &c.imputer == m && c.level == level)
                    .and_then(|c| match metric {
                        Metric::Accuracy => c.accuracy,
                        Metric::Rmse => c.rmse,
                    })
            })
            .collect();
        match row {
            Some(r) => {
                rows.push(r);
                kept.push(ds.clone());
            }
            None => notes.push(format!("dataset {ds} left out: a cell failed")),
        }
    }
    let mut out = LevelStats {
        level,
        metric,
        table: None,
        mean_ranks: Vec::new(),
        friedman: None,
        posthoc: None,
        notes,
    };
    if rows.is_empty() {
        out.notes.push("no complete datasets".into());
        return out;
    }
    let table = match RankTable::from_scores(methods.to_vec(), kept, &rows, metric.direction()) {
        Ok(t) => t,
        Err(e) => {
            out.notes.push(e.to_string());
            return out;
        }
    };
    out.mean_ranks = table.mean_ranks();
    match friedman_chi2(&table, false) {
        Ok(f) => out.friedman = Some(f),
        Err(e) => out.notes.push(format!("Friedman test skipped: {e}")),
    }
    match bonferroni_dunn(methods, &out.mean_ranks, table.n_datasets(), control, alpha) {
        Ok(b) if methods.len() >= 2 => out.posthoc = Some(b),
        Ok(_) => {}
        Err(e) => out.notes.push(format!("post-hoc test skipped: {e}")),
    }
    out.table = Some(table);
    out
}

/// Runs the whole grid. Failures are recorded in the report and never abort
/// the run; only an invalid configuration is an error.
pub fn run(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let tree = SeedTree::new(config.seed);
    let methods = config.method_names();
    let control = config.control_name();
    let mut datasets = Vec::new();
    let mut cells = Vec::new();
    for di in 0..config.datasets.len() {
        let p = run_dataset(config, &tree, di);
        datasets.push(p.summary);
        cells.extend(p.cells);
    }
    let names: Vec<String> = datasets.iter().map(|d| d.name.clone()).collect();
    let mut stats = Vec::new();
    for metric in [Metric::Accuracy, Metric::Rmse] {
        for &level in &config.levels {
            stats.push(level_stats(&cells, &names, &methods, level, metric, &control, config.alpha));
        }
    }
    Ok(Report {
        methods,
        levels: config.levels.clone(),
        control,
        alpha: config.alpha,
        datasets,
        cells,
        stats,
    })
}

fn level_tag(level: f64) -> String {
    format!("{:02}", (level * 100.0).round() as i64)
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "failed".into(), fmt)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Report files keyed by file name, in emission order.
pub fn render_report(report: &Report) -> Vec<(String, String)> {
    let mut files = Vec::new();
    let header = |first: &str| {
        std::iter::once(first.to_string())
            .chain(report.methods.iter().map(|m| csv_field(m)))
            .collect::<Vec<_>>()
            .join(",")
    };

    let mut s = String::from("dataset,n_train,n_test,n_features,classifier,clean_accuracy,status\n");
    for d in &report.datasets {
        let clf = d
            .classifier
            .as_ref()
            .map_or_else(String::new, |h| serde_json::to_string(h).unwrap_or_default());
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            csv_field(&d.name),
            d.n_train,
            d.n_test,
            d.n_features,
            csv_field(&clf),
            opt(d.clean_accuracy),
            csv_field(d.error.as_deref().unwrap_or("ok"))
        );
    }
    files.push(("datasets.csv".to_string(), s));

    let mut s = String::from("dataset,imputer,level,accuracy,rmse,status\n");
    for c in &report.cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            csv_field(&c.dataset),
            csv_field(&c.imputer),
            fmt(c.level),
            opt(c.accuracy),
            opt(c.rmse),
            csv_field(c.error.as_deref().unwrap_or("ok"))
        );
    }
    files.push(("cells.csv".to_string(), s));

    for metric in [Metric::Accuracy, Metric::Rmse] {
        let mut means = header("level");
        means.push('\n');
        let mut friedman = String::from("level,datasets,methods,chi2,p_chi2,f_stat,p_f\n");
        let mut posthoc = String::from("level,method,mean_rank,z,p_raw,significant\n");
        for st in report.stats.iter().filter(|s| s.metric == metric) {
            let tag = level_tag(st.level);
            let mut scores = header("dataset");
            scores.push('\n');
            for d in &report.datasets {
                let row: Vec<String> = report
                    .methods
                    .iter()
                    .map(|m| {
                        report.cell(&d.name, m, st.level).map_or_else(
                            || "failed".into(),
                            |c| {
                                opt(match metric {
                                    Metric::Accuracy => c.accuracy,
                                    Metric::Rmse => c.rmse,
                                })
                            },
                        )
                    })
                    .collect();
                let _ = writeln!(scores, "{},{}", csv_field(&d.name), row.join(","));
            }
            files.push((format!("{}_level{tag}.csv", metric.name()), scores));

            if let Some(t) = &st.table {
                let mut ranks = header("dataset");
                ranks.push('\n');
                for (name, row) in t.datasets.iter().zip(&t.ranks) {
                    let row: Vec<String> = row.iter().map(|r| format!("{r}")).collect();
                    let _ = writeln!(ranks, "{},{}", csv_field(name), row.join(","));
                }
                files.push((format!("{}_ranks_level{tag}.csv", metric.name()), ranks));
                let row: Vec<String> = st.mean_ranks.iter().map(|&r| fmt(r)).collect();
                let _ = writeln!(means, "{},{}", fmt(st.level), row.join(","));
            }
            if let Some(f) = &st.friedman {
                let _ = writeln!(
                    friedman,
                    "{},{},{},{},{},{},{}",
                    fmt(st.level),
                    f.n_datasets,
                    f.n_methods,
                    fmt(f.chi2),
                    fmt(f.p_chi2),
                    fmt(f.f_stat),
                    fmt(f.p_f)
                );
            }
            if let Some(b) = &st.posthoc {
                for c in &b.comparisons {
                    let _ = writeln!(
                        posthoc,
                        "{},{},{},{},{},{}",
                        fmt(st.level),
                        csv_field(&c.method),
                        fmt(c.mean_rank),
                        fmt(c.z),
                        fmt(c.p_raw),
                        c.significant
                    );
                }
            }
        }
        files.push((format!("{}_mean_ranks.csv", metric.name()), means));
        files.push((format!("{}_friedman.csv", metric.name()), friedman));
        files.push((format!("{}_posthoc.csv", metric.name()), posthoc));
    }
    files.push(("summary.txt".to_string(), render_summary(report)));
    files
}

fn render_summary(report: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "methods: {}", report.methods.join(", "));
    let _ = writeln!(s, "control: {}  alpha: {}", report.control, report.alpha);
    for d in &report.datasets {
        match (&d.error, d.clean_accuracy) {
            (Some(e), _) => {
                let _ = writeln!(s, "dataset {}: FAILED: {e}", d.name);
            }
            (None, acc) => {
                let _ = writeln!(
                    s,
                    "dataset {}: {} train / {} test rows, {} features, clean accuracy {}",
                    d.name,
                    d.n_train,
                    d.n_test,
                    d.n_features,
                    opt(acc)
                );
            }
        }
        for w in &d.warnings {
            let _ = writeln!(s, "  warning: {w}");
        }
    }
    let failed = report.cells.iter().filter(|c| c.error.is_some()).count();
    let _ = writeln!(s, "cells: {} ({failed} failed)", report.cells.len());
    for st in &report.stats {
        let _ = writeln!(s, "\n[{} at {}% missing]", st.metric.name(), level_tag(st.level));
        if !st.mean_ranks.is_empty() {
            let ranks: Vec<String> = report
                .methods
                .iter()
                .zip(&st.mean_ranks)
                .map(|(m, r)| format!("{m} {r:.3}"))
                .collect();
            let _ = writeln!(s, "mean ranks: {}", ranks.join(", "));
        }
        if let Some(f) = &st.friedman {
            let _ = writeln!(
                s,
                "Friedman chi2 = {:.4} (p = {:.4}), Iman-Davenport F = {:.4} (p = {:.4})",
                f.chi2, f.p_chi2, f.f_stat, f.p_f
            );
        }
        if let Some(b) = &st.posthoc {
            let sig: Vec<&str> = b
                .comparisons
                .iter()
                .filter(|c| c.significant)
                .map(|c| c.method.as_str())
                .collect();
            let _ = writeln!(
                s,
                "Bonferroni-Dunn vs {} (CD = {:.4}): significant: {}",
                b.control,
                b.critical_difference,
                if sig.is_empty() { "none".to_string() } else { sig.join(", ") }
            );
        }
        for n in &st.notes {
            let _ = writeln!(s, "note: {n}");
        }
    }
    s
}

/// Writes every report file into `dir`, creating it if needed.
pub fn write_report(report: &Report, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for (name, body) in render_report(report) {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// A datasets × methods score table read from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    pub scores: Vec<Vec<f64>>,
}

/// Parses a header row `<label>,<method>...` followed by one row per dataset.
/// `source` names the input in error messages.
pub fn parse_score_table(text: &str, source: &str) -> Result<ScoreTable> {
    let err = |line: u64, column: usize, message: String| Error::Csv {
        path: source.to_string(),
        line,
        column,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| err(1, 0, e.to_string()))?.clone();
    let methods: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut datasets = Vec::new();
    let mut scores = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| err(e.position().map_or(0, |p| p.line()), 0, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        datasets.push(record.get(0).unwrap_or_default().to_string());
        let row = record
            .iter()
            .enumerate()
            .skip(1)
            .map(|(c, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(line, c + 1, format!("expected a number, got {cell:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        scores.push(row);
    }
    if methods.len() < 2 || datasets.len() < 2 {
        return Err(err(
            1,
            0,
            format!(
                "need at least 2 methods and 2 datasets, got {} and {}",
                methods.len(),
                datasets.len()
            ),
        ));
    }
    Ok(ScoreTable {
        methods,
        datasets,
        scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub table: RankTable,
    pub mean_ranks: Vec<f64>,
    pub friedman: FriedmanResult,
    pub posthoc: Option<BonferroniDunn>,
}

impl StatsReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dataset,{}", self.table.methods.join(","));
        for (name, row) in self.table.datasets.iter().zip(&self.table.ranks) {
            let row: Vec<String> = row.iter().map(|r| format!("{r}")).collect();
            let _ = writeln!(s, "{name},{}", row.join(","));
        }
        let means: Vec<String> = self.mean_ranks.iter().map(|r| format!("{r:.4}")).collect();
        let _ = writeln!(s, "mean rank,{}", means.join(","));
        let f = &self.friedman;
        let _ = writeln!(
            s,
            "\nFriedman chi2 = {:.4}, p = {:.4} (N = {}, k = {})\nIman-Davenport F = {:.4}, p = {:.4}",
            f.chi2, f.p_chi2, f.n_datasets, f.n_methods, f.f_stat, f.p_f
        );
        if let Some(b) = &self.posthoc {
            let _ = writeln!(
                s,
                "\nBonferroni-Dunn vs {} at alpha = {} (critical z = {:.4}, CD = {:.4})",
                b.control, b.alpha, b.critical_z, b.critical_difference
            );
            let _ = writeln!(s, "method,mean_rank,z,p_raw,significant");
            for c in &b.comparisons {
                let _ = writeln!(s, "{},{:.4},{:.4},{:.6},{}", c.method, c.mean_rank, c.z, c.p_raw, c.significant);
            }
        }
        s
    }
}

/// Ranks a parsed score table and runs the Friedman, Iman-Davenport and
/// optional Bonferroni-Dunn tests.
pub fn stats_from_table(
    table: &ScoreTable,
    direction: Direction,
    control: Option<&str>,
    alpha: f64,
) -> Result<StatsReport> {
    let ranks = RankTable::from_scores(table.methods.clone(), table.datasets.clone(), &table.scores, direction)?;
    let mean_ranks = ranks.mean_ranks();
    let friedman = friedman_chi2(&ranks, false)?;
    let posthoc = control
        .map(|c| bonferroni_dunn(&ranks.methods, &mean_ranks, ranks.n_datasets(), c, alpha))
        .transpose()?;
    Ok(StatsReport {
        table: ranks,
        mean_ranks,
        friedman,
        posthoc,
    })
}

/// [`stats_from_table`] on a CSV file.
pub fn stats_from_tables(
    path: impl AsRef<Path>,
    direction: Direction,
    control: Option<&str>,
    alpha: f64,
) -> Result<StatsReport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    stats_from_table(&parse_score_table(&text, &path.display().to_string())?, direction, control, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(imputers: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(&format!(
            r#"
seed = 3
levels = [0.2, 0.4]
repeats = 2
search_budget = 2
classifiers = ["naive_bayes"]

[[datasets]]
source = "twonorm"
n = 120
d = 5

[[datasets]]
source = "ringnorm"
n = 120
d = 5

{imputers}
"#
        ))
        .unwrap()
    }

    #[test]
    fn config_defaults() {
        let cfg = tiny_config("[[imputers]]\nkind = \"mean\"\n");
        assert_eq!(cfg.alpha, 0.10);
        assert_eq!(cfg.control_name(), "Mean");
        let full: ExperimentConfig =
            toml::from_str("[[datasets]]\nsource = \"twonorm\"\n[[imputers]]\nkind = \"mean\"\n").unwrap();
        assert_eq!(full.levels, vec![0.1, 0.2, 0.3, 0.4, 0.5]);
        assert_eq!(full.repeats, 10);
        assert_eq!(full.datasets[0], DatasetSpec::Twonorm { n: 7400, d: 20, name: None });
    }

    #[test]
    fn invalid_configs_rejected() {
        let base = "[[datasets]]\nsource = \"twonorm\"\n[[imputers]]\nkind = \"mean\"\n";
        assert!(ExperimentConfig::from_toml(&format!("levels = [1.5]\n{base}")).is_err());
        assert!(ExperimentConfig::from_toml(&format!("repeats = 0\n{base}")).is_err());
        assert!(ExperimentConfig::from_toml(&format!("control = \"WGAIN\"\n{base}")).is_err());
        assert!(ExperimentConfig::from_toml(&format!("{base}[[imputers]]\nkind = \"mean\"\n")).is_err());
    }

    #[test]
    fn single_method_ranks_are_one() {
        let report = run(&tiny_config("[[imputers]]\nkind = \"mean\"\n")).unwrap();
        assert_eq!(report.cells.len(), 2 * 2);
        for st in &report.stats {
            assert_eq!(st.mean_ranks, vec![1.0]);
            assert!(st.friedman.is_none());
        }
    }

    #[test]
    fn failures_are_recorded() {
        let mut cfg = tiny_config("[[imputers]]\nkind = \"mean\"\n");
        cfg.datasets.push(DatasetSpec::Csv {
            path: "/nonexistent/file.csv".into(),
            label: LabelColumn::default(),
            name: None,
        });
        let report = run(&cfg).unwrap();
        assert_eq!(report.cells.len(), 3 * 2);
        assert_eq!(report.cells.iter().filter(|c| c.error.is_some()).count(), 2);
        assert!(report.stats[0].notes.iter().any(|n| n.contains("left out")));
    }

    #[test]
    fn report_is_deterministic() {
        let cfg = tiny_config("[[imputers]]\nkind = \"mean\"\n\n[[imputers]]\nkind = \"knn\"\nk = 5\n");
        let a = render_report(&run(&cfg).unwrap());
        let b = render_report(&run(&cfg).unwrap());
        assert_eq!(a, b);
        assert!(a.iter().any(|(n, _)| n == "accuracy_level20.csv"));
        assert!(a.iter().any(|(n, _)| n == "rmse_ranks_level40.csv"));
    }

    #[test]
    fn score_table_errors_carry_coordinates() {
        let e = parse_score_table("d,a,b\nx,1,2\ny,3,oops\n", "t.csv").unwrap_err();
        match e {
            Error::Csv { line, column, .. } => assert_eq!((line, column), (3, 3)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_score_table("d,a\nx,1\ny,2\n", "t.csv").is_err());
    }

    #[test]
    fn stats_from_small_table() {
        let t = parse_score_table("d,a,b,c\nx,0.9,0.8,0.7\ny,0.95,0.85,0.9\nz,0.7,0.6,0.5\n", "t").unwrap();
        let r = stats_from_table(&t, Direction::HigherBetter, Some("a"), 0.1).unwrap();
        assert_eq!(r.mean_ranks, vec![1.0, 7.0 / 3.0, 8.0 / 3.0]);
        assert!(r.render().contains("Iman-Davenport"));
    }
}
