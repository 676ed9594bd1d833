//! Experiment grids: config files, replicate runs, result records and
//! summary tables.
//!
//! A run expands `methods × p_miss × train_size × replicates`. Every
//! replicate derives its seed from `(root seed, replicate index)` only, so
//! all methods at a grid point see the same data split. Records are
//! appended one JSON object per line as each replicate finishes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::baselines::{rebalance, BaselineKind};
use crate::dataio::{
    compute_priors, generate_synthetic, inject_imbalance, load_dataset, split, standardize, subsample, Dataset,
    SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::metrics::{summarize_values, MetricsReport, Summary};
use crate::rng::{seeded, substream};
use crate::trainer::{evaluate, train, train_classifier, ClassifierObjective, EpochLosses, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ibgan,
    NaiveGan,
    Plain,
    ClassWeights,
    Upsample,
    Downsample,
    Smote,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Ibgan,
        Method::NaiveGan,
        Method::Plain,
        Method::ClassWeights,
        Method::Upsample,
        Method::Downsample,
        Method::Smote,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ibgan => "ibgan",
            Method::NaiveGan => "naive_gan",
            Method::Plain => "plain",
            Method::ClassWeights => "class_weights",
            Method::Upsample => "upsample",
            Method::Downsample => "downsample",
            Method::Smote => "smote",
        }
    }

    fn baseline(self) -> Option<BaselineKind> {
        match self {
            Method::Ibgan | Method::NaiveGan => None,
            Method::Plain => Some(BaselineKind::Plain),
            Method::ClassWeights => Some(BaselineKind::ClassWeights),
            Method::Upsample => Some(BaselineKind::Upsample),
            Method::Downsample => Some(BaselineKind::Downsample),
            Method::Smote => Some(BaselineKind::Smote),
        }
    }
}

fn default_test_fraction() -> f64 {
    0.3
}

/// Where samples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    /// Long-format CSV; relative paths resolve against the config file.
    File {
        path: PathBuf,
        /// Separate test file; otherwise a stratified split of `path`.
        #[serde(default)]
        test_path: Option<PathBuf>,
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
        /// Drop this fraction of half the classes from the training split.
        #[serde(default)]
        imbalance_drop: Option<f64>,
    },
    /// Fresh AR(1) data per replicate; `spec` sizes give the training set.
    Synthetic {
        spec: SyntheticSpec,
        test_sizes: Vec<usize>,
        #[serde(default)]
        imbalance_drop: Option<f64>,
    },
}

impl DataConfig {
    fn imbalance_drop(&self) -> Option<f64> {
        match self {
            DataConfig::File { imbalance_drop, .. } | DataConfig::Synthetic { imbalance_drop, .. } => *imbalance_drop,
        }
    }
}

fn default_replicates() -> usize {
    5
}

fn default_methods() -> Vec<Method> {
    vec![Method::Ibgan]
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    /// Result records (JSON lines).
    pub output: PathBuf,
    /// Per-epoch loss records; defaults to `<output stem>.losses.jsonl`.
    #[serde(default)]
    pub losses_output: Option<PathBuf>,
    /// Store wall-clock durations; off gives byte-reproducible records.
    #[serde(default = "yes")]
    pub record_timing: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Masking rates for `ibgan`; defaults to `train.p_miss`.
    #[serde(default)]
    pub p_miss: Vec<f64>,
    /// Training-set sizes (stratified subsamples); defaults to all.
    #[serde(default)]
    pub train_size: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: RunSettings,
    pub data: DataConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses a config file and resolves relative paths against its directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.experiment.output);
        if let Some(p) = &mut self.experiment.losses_output {
            fix(p);
        }
        if let DataConfig::File { path, test_path, .. } = &mut self.data {
            fix(path);
            if let Some(p) = test_path {
                fix(p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if e.methods.is_empty() || e.replicates == 0 {
            return Err(Error::Config("need at least one method and one replicate".into()));
        }
        // per-run seeds are set by the runner
        self.train.validate()?;
        for &p in &self.sweep.p_miss {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("sweep p_miss {p} outside [0, 1]")));
            }
        }
        if self.sweep.train_size.contains(&0) {
            return Err(Error::Config("train sizes must be positive".into()));
        }
        if let Some(d) = self.data.imbalance_drop() {
            if !(0.0..1.0).contains(&d) {
                return Err(Error::Config(format!("imbalance_drop {d} outside [0, 1)")));
            }
        }
        match &self.data {
            DataConfig::File { test_fraction, .. } if !(*test_fraction > 0.0 && *test_fraction < 1.0) => {
                Err(Error::Config(format!("test_fraction {test_fraction} outside (0, 1)")))
            }
            DataConfig::Synthetic { spec, test_sizes, .. } if test_sizes.len() != spec.classes.len() => {
                Err(Error::Config("test_sizes needs one entry per synthetic class".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn losses_path(&self) -> PathBuf {
        self.experiment.losses_output.clone().unwrap_or_else(|| {
            let out = &self.experiment.output;
            let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
            out.with_file_name(format!("{stem}.losses.jsonl"))
        })
    }

    fn p_miss_levels(&self, method: Method) -> Vec<Option<f64>> {
        match method {
            Method::Ibgan if self.sweep.p_miss.is_empty() => vec![Some(self.train.p_miss)],
            Method::Ibgan => self.sweep.p_miss.iter().copied().map(Some).collect(),
            Method::NaiveGan => vec![Some(1.0)],
            _ => vec![None],
        }
    }
}

/// One replicate's outcome. Metric fields are absent when the run failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub method: Method,
    pub p_miss: Option<f64>,
    pub alpha: Option<f64>,
    pub train_size: usize,
    pub replicate: usize,
    pub seed: u64,
    pub balanced_accuracy: Option<f64>,
    pub macro_f1: Option<f64>,
    pub pr_auc: Option<f64>,
    pub duration_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// One epoch of a replicate's loss history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub method: Method,
    pub p_miss: Option<f64>,
    pub train_size: usize,
    pub replicate: usize,
    #[serde(flatten)]
    pub losses: EpochLosses,
}

/// Seed of replicate `i` under `root`.
pub fn replicate_seed(root: u64, replicate: usize) -> u64 {
    substream(root, replicate as u64).next_u64()
}

/// Train/test pair for one replicate, standardized with train statistics.
struct Prepared {
    train: Dataset,
    test: Dataset,
    warnings: Vec<String>,
}

fn load_base(cfg: &ExperimentConfig, seed: u64) -> Result<(Dataset, Dataset)> {
    let mut rng = substream(seed, 1);
    match &cfg.data {
        DataConfig::File {
            path,
            test_path: Some(tp),
            ..
        } => Ok((load_dataset(path)?, load_dataset(tp)?)),
        DataConfig::File {
            path, test_fraction, ..
        } => split(&load_dataset(path)?, *test_fraction, &mut rng),
        DataConfig::Synthetic { spec, test_sizes, .. } => {
            let train = generate_synthetic(spec, &mut rng)?;
            let test = generate_synthetic(&spec.clone().with_sizes(test_sizes)?, &mut rng)?;
            Ok((train, test))
        }
    }
}

fn prepare(cfg: &ExperimentConfig, seed: u64, train_size: Option<usize>) -> Result<Prepared> {
    let (train, test) = load_base(cfg, seed)?;
    if train.class_names != test.class_names {
        return Err(Error::invalid("train and test label sets differ"));
    }
    let train = match train_size {
        Some(n) => subsample(&train, n, &mut substream(seed, 2))?,
        None => train,
    };
    let (train, stats) = standardize(&train)?;
    let test = stats.apply(&test)?;
    let mut warnings = Vec::new();
    let train = match cfg.data.imbalance_drop() {
        Some(drop) => {
            let imb = inject_imbalance(&train, drop, &mut substream(seed, 3))?;
            warnings.extend(imb.warnings);
            imb.dataset
        }
        None => train,
    };
    Ok(Prepared { train, test, warnings })
}

struct Outcome {
    report: MetricsReport,
    history: Vec<EpochLosses>,
    warnings: Vec<String>,
}

fn run_method(data: &Prepared, method: Method, p_miss: Option<f64>, cfg: &TrainConfig) -> Result<Outcome> {
    let mut cfg = cfg.clone();
    if let Some(p) = p_miss {
        cfg.p_miss = p;
    }
    match method.baseline() {
        None => {
            let state = train(&data.train, &cfg)?;
            Ok(Outcome {
                report: evaluate(&state.classifier, &data.test)?,
                history: state.history,
                warnings: Vec::new(),
            })
        }
        Some(kind) => {
            let resampled = rebalance(kind, &data.train, &mut substream(cfg.seed, 4))?;
            let objective = match kind {
                BaselineKind::ClassWeights => ClassifierObjective::ClassWeighted(compute_priors(&data.train)?),
                _ => ClassifierObjective::CrossEntropy,
            };
            let run = train_classifier(&resampled.dataset, &cfg, &objective)?;
            Ok(Outcome {
                report: evaluate(&run.classifier, &data.test)?,
                history: Vec::new(),
                warnings: resampled.warnings,
            })
        }
    }
}

fn write_line<T: Serialize>(out: &mut File, path: &Path, value: &T) -> Result<()> {
    let mut line = serde_json::to_string(value).map_err(|e| Error::invalid(e.to_string()))?;
    line.push('\n');
    out.write_all(line.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map_err(|e| Error::io(path, e))
}

/// Runs the whole grid, appending each record as soon as it is complete.
/// Replicate failures become records carrying `error`; the grid continues.
pub fn run_experiment(cfg: &ExperimentConfig, mut progress: impl FnMut(&RunRecord)) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let out_path = &cfg.experiment.output;
    let loss_path = cfg.losses_path();
    let mut out = create(out_path)?;
    let mut losses = create(&loss_path)?;

    let sizes: Vec<Option<usize>> = if cfg.sweep.train_size.is_empty() {
        vec![None]
    } else {
        cfg.sweep.train_size.iter().copied().map(Some).collect()
    };
    let mut records = Vec::new();
    for &size in &sizes {
        for replicate in 0..cfg.experiment.replicates {
            let seed = replicate_seed(cfg.experiment.seed, replicate);
            let prepared = prepare(cfg, seed, size);
            for &method in &cfg.experiment.methods {
                for p_miss in cfg.p_miss_levels(method) {
                    let start = Instant::now();
                    let train_cfg = TrainConfig {
                        seed,
                        ..cfg.train.clone()
                    };
                    let result = match &prepared {
                        Ok(data) => run_method(data, method, p_miss, &train_cfg)
                            .map(|o| (o, data))
                            .map_err(|e| e.to_string()),
                        Err(e) => Err(e.to_string()),
                    };
                    let duration_s = if cfg.experiment.record_timing {
                        start.elapsed().as_secs_f64()
                    } else {
                        0.0
                    };
                    let gan = method.baseline().is_none();
                    let mut record = RunRecord {
                        method,
                        p_miss,
                        alpha: gan.then_some(cfg.train.alpha),
                        train_size: size.unwrap_or(0),
                        replicate,
                        seed,
                        balanced_accuracy: None,
                        macro_f1: None,
                        pr_auc: None,
                        duration_s,
                        error: None,
                        warnings: Vec::new(),
                    };
                    match result {
                        Ok((o, data)) => {
                            record.train_size = data.train.len();
                            record.balanced_accuracy = Some(o.report.balanced_accuracy);
                            record.macro_f1 = Some(o.report.macro_f1);
                            record.pr_auc = Some(o.report.pr_auc);
                            record.warnings = data.warnings.iter().cloned().chain(o.warnings).collect();
                            for h in o.history {
                                let lr = LossRecord {
                                    method,
                                    p_miss,
                                    train_size: record.train_size,
                                    replicate,
                                    losses: h,
                                };
                                write_line(&mut losses, &loss_path, &lr)?;
                            }
                        }
                        Err(e) => record.error = Some(e),
                    }
                    write_line(&mut out, out_path, &record)?;
                    progress(&record);
                    records.push(record);
                }
            }
        }
    }
    Ok(records)
}

/// Parses result records, one JSON object per non-blank line.
pub fn parse_records(text: &str) -> Result<Vec<RunRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    for line in BufReader::new(f).lines() {
        text.push_str(&line.map_err(|e| Error::io(path, e))?);
        text.push('\n');
    }
    parse_records(&text)
}

/// One summary row: a method at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: Method,
    /// Axes that vary for this method, joined by `+`; `-` if none.
    pub sweep_key: String,
    pub sweep_value: String,
    pub balanced_accuracy: Summary,
    pub macro_f1: Summary,
    pub pr_auc: Summary,
    /// Replicates that failed and are excluded from the statistics.
    pub failures: usize,
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

/// Groups successful records by method and sweep point, ordered by method
/// then sweep value.
pub fn summarize(records: &[RunRecord]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::invalid("no records to summarize"));
    }
    type Key = (Method, Option<u64>, usize);
    let mut groups: BTreeMap<Key, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        // total order on p_miss via its bits; all values are nonnegative
        groups
            .entry((r.method, r.p_miss.map(f64::to_bits), r.train_size))
            .or_default()
            .push(r);
    }
    let mut varies: BTreeMap<Method, (bool, bool)> = BTreeMap::new();
    for m in Method::ALL {
        let of_m: Vec<&Key> = groups.keys().filter(|k| k.0 == m).collect();
        if let Some(first) = of_m.first() {
            varies.insert(
                m,
                (of_m.iter().any(|k| k.1 != first.1), of_m.iter().any(|k| k.2 != first.2)),
            );
        }
    }
    let mut rows = Vec::new();
    for ((method, p_bits, size), rs) in groups {
        let (vp, vs) = varies[&method];
        let mut keys = Vec::new();
        let mut vals = Vec::new();
        if vp {
            keys.push("p_miss");
            vals.push(p_bits.map_or("-".into(), |b| fmt_num(f64::from_bits(b))));
        }
        if vs {
            keys.push("train_size");
            vals.push(size.to_string());
        }
        let ok: Vec<&&RunRecord> = rs.iter().filter(|r| r.error.is_none()).collect();
        let col = |f: fn(&RunRecord) -> Option<f64>| {
            summarize_values(&ok.iter().filter_map(|r| f(r)).collect::<Vec<_>>()).unwrap_or(Summary {
                mean: f64::NAN,
                stddev: None,
                n: 0,
            })
        };
        rows.push(SummaryRow {
            method,
            sweep_key: if keys.is_empty() { "-".into() } else { keys.join("+") },
            sweep_value: if vals.is_empty() { "-".into() } else { vals.join("+") },
            balanced_accuracy: col(|r| r.balanced_accuracy),
            macro_f1: col(|r| r.macro_f1),
            pr_auc: col(|r| r.pr_auc),
            failures: rs.len() - ok.len(),
        });
    }
    Ok(rows)
}

/// `mean ± stddev` with three decimals; the spread is omitted for one value.
pub fn format_cell(s: &Summary) -> String {
    match s.stddev {
        _ if s.n == 0 => "n/a".into(),
        Some(sd) => format!("{:.3} ± {:.3}", s.mean, sd),
        None => format!("{:.3}", s.mean),
    }
}

const METRICS: [&str; 3] = ["balanced_accuracy", "macro_f1", "pr_auc"];

fn metric_summaries(r: &SummaryRow) -> [&Summary; 3] {
    [&r.balanced_accuracy, &r.macro_f1, &r.pr_auc]
}

/// `method,sweep_key,sweep_value,metric,mean,stddev,n`; empty stddev for a
/// single replicate.
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from("method,sweep_key,sweep_value,metric,mean,stddev,n\n");
    for r in rows {
        for (metric, m) in METRICS.iter().zip(metric_summaries(r)) {
            let sd = m.stddev.map(fmt_num).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.method.name(),
                r.sweep_key,
                r.sweep_value,
                metric,
                fmt_num(m.mean),
                sd,
                m.n
            );
        }
    }
    s
}

/// Aligned plain-text comparison table.
pub fn summary_table(rows: &[SummaryRow]) -> String {
    let header = ["method", "sweep", "balanced_accuracy", "macro_f1", "pr_auc", "n"];
    let mut cells: Vec<Vec<String>> = vec![header.iter().map(|h| h.to_string()).collect()];
    for r in rows {
        let sweep = if r.sweep_key == "-" {
            "-".to_string()
        } else {
            format!("{}={}", r.sweep_key, r.sweep_value)
        };
        let mut row = vec![r.method.name().to_string(), sweep];
        row.extend(metric_summaries(r).iter().map(|m| format_cell(m)));
        row.push(if r.failures > 0 {
            format!("{} ({} failed)", r.balanced_accuracy.n, r.failures)
        } else {
            r.balanced_accuracy.n.to_string()
        });
        cells.push(row);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| cells.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &cells {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(v, &w)| format!("{v}{}", " ".repeat(w - v.chars().count())))
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

/// Convenience: a seeded synthetic dataset through the standard pipeline,
/// used by callers that need data without a config file.
pub fn synthetic_pair(spec: &SyntheticSpec, test_sizes: &[usize], seed: u64) -> Result<(Dataset, Dataset)> {
    let mut rng = seeded(seed);
    let train = generate_synthetic(spec, &mut rng)?;
    let test = generate_synthetic(&spec.clone().with_sizes(test_sizes)?, &mut rng)?;
    let (train, stats) = standardize(&train)?;
    Ok((train, stats.apply(&test)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[experiment]
output = "out/results.jsonl"

[data]
source = "file"
path = "train.csv"
"#;

    #[test]
    fn minimal_config_defaults() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.experiment.replicates, 5);
        assert_eq!(cfg.experiment.methods, vec![Method::Ibgan]);
        assert_eq!(cfg.train.epochs, 20);
        assert_eq!(cfg.train.p_miss, 0.1);
        assert_eq!(cfg.losses_path(), PathBuf::from("out/results.losses.jsonl"));
        assert_eq!(cfg.p_miss_levels(Method::NaiveGan), vec![Some(1.0)]);
        assert_eq!(cfg.p_miss_levels(Method::Smote), vec![None]);
    }

    #[test]
    fn unknown_keys_rejected() {
        for extra in [
            "\n[train]\nlearning_rate = 0.1\n",
            "\n[sweep]\nfoo = [1]\n",
            "\n[bogus]\n",
        ] {
            let text = format!("{MINIMAL}{extra}");
            assert!(
                matches!(ExperimentConfig::from_toml_str(&text), Err(Error::Config(_))),
                "{extra}"
            );
        }
        let bad_data = MINIMAL.replace("path = \"train.csv\"", "path = \"train.csv\"\ncolour = 1");
        assert!(ExperimentConfig::from_toml_str(&bad_data).is_err());
    }

    #[test]
    fn relative_paths_resolve_against_config() {
        let mut cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        cfg.resolve_paths(Path::new("/base"));
        assert_eq!(cfg.experiment.output, PathBuf::from("/base/out/results.jsonl"));
        match cfg.data {
            DataConfig::File { path, .. } => assert_eq!(path, PathBuf::from("/base/train.csv")),
            _ => unreachable!(),
        }
    }

    fn rec(method: Method, ba: f64, p: Option<f64>) -> RunRecord {
        RunRecord {
            method,
            p_miss: p,
            alpha: None,
            train_size: 100,
            replicate: 0,
            seed: 1,
            balanced_accuracy: Some(ba),
            macro_f1: Some(ba),
            pr_auc: Some(ba),
            duration_s: 0.0,
            error: None,
            warnings: vec![],
        }
    }

    #[test]
    fn summary_rows_and_format() {
        let rs = vec![
            rec(Method::Plain, 0.8, None),
            rec(Method::Ibgan, 0.8, Some(0.1)),
            rec(Method::Plain, 0.9, None),
            rec(Method::Ibgan, 0.9, Some(0.1)),
        ];
        let rows = summarize(&rs).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].method, Method::Ibgan);
        assert_eq!(rows[1].method, Method::Plain);
        assert_eq!(format_cell(&rows[1].balanced_accuracy), "0.850 ± 0.071");
        assert_eq!(rows[0].sweep_key, "-");
        let csv = summary_csv(&rows);
        assert_eq!(csv.lines().count(), 1 + 6);
        assert!(csv.starts_with("method,sweep_key,sweep_value,metric,mean,stddev,n\n"));
        assert!(summary_table(&rows).contains("0.850 ± 0.071"));
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn sweep_axes_detected() {
        let rs = vec![rec(Method::Ibgan, 0.7, Some(0.1)), rec(Method::Ibgan, 0.8, Some(0.3))];
        let rows = summarize(&rs).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].sweep_key, "p_miss");
        assert_eq!(rows[0].sweep_value, "0.1");
        assert_eq!(rows[1].sweep_value, "0.3");
    }

    #[test]
    fn failed_records_excluded() {
        let mut bad = rec(Method::Plain, 0.0, None);
        bad.balanced_accuracy = None;
        bad.error = Some("boom".into());
        let rows = summarize(&[rec(Method::Plain, 0.6, None), bad]).unwrap();
        assert_eq!(rows[0].failures, 1);
        assert_eq!(rows[0].balanced_accuracy.n, 1);
    }

    #[test]
    fn records_round_trip() {
        let r = rec(Method::Smote, 0.5, None);
        let line = serde_json::to_string(&r).unwrap();
        assert_eq!(
            parse_records(&format!("{line}\n\n{line}\n")).unwrap(),
            vec![r.clone(), r]
        );
        assert!(matches!(parse_records("{}\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn replicate_seeds_are_pure() {
        assert_eq!(replicate_seed(3, 2), replicate_seed(3, 2));
        assert_ne!(replicate_seed(3, 2), replicate_seed(3, 1));
    }
}
