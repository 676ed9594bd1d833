//! Datasets of labelled multivariate series.

mod long_csv;
mod synthetic;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndcore::Array;
use crate::rng::Rng;

pub use long_csv::{load_dataset, parse_long_csv, save_dataset, write_long_csv};
pub use synthetic::{generate_synthetic, ClassProcess, SyntheticSpec};

/// One labelled series: `series` is `channels × length`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub series: Array,
    pub metadata: Vec<f64>,
    pub label: usize,
}

impl Sample {
    /// Series (channel-major) followed by metadata.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.series.len() + self.metadata.len());
        v.extend_from_slice(self.series.data());
        v.extend_from_slice(&self.metadata);
        v
    }

    pub fn from_flat(flat: &[f64], channels: usize, length: usize, label: usize) -> Result<Self> {
        let n = channels * length;
        if flat.len() < n {
            return Err(Error::shape(
                "from_flat",
                format!("{} values for {channels}×{length}", flat.len()),
            ));
        }
        Ok(Sample {
            series: Array::new(vec![channels, length], flat[..n].to_vec())?,
            metadata: flat[n..].to_vec(),
            label,
        })
    }
}

/// Per-dimension `(mean, sd)` pairs used to standardize a split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub series: Vec<(f64, f64)>,
    pub metadata: Vec<(f64, f64)>,
}

impl ChannelStats {
    /// Standardizes `ds` with these statistics.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        if self.series.len() != ds.channels || self.metadata.len() != ds.meta_dim {
            return Err(Error::shape(
                "standardize",
                format!(
                    "stats for {}+{} dims, dataset has {}+{}",
                    self.series.len(),
                    self.metadata.len(),
                    ds.channels,
                    ds.meta_dim
                ),
            ));
        }
        let mut out = ds.clone();
        for s in &mut out.samples {
            for (row, &(mean, sd)) in s.series.data_mut().chunks_mut(ds.length).zip(&self.series) {
                for v in row {
                    *v = (*v - mean) / sd;
                }
            }
            for (v, &(mean, sd)) in s.metadata.iter_mut().zip(&self.metadata) {
                *v = (*v - mean) / sd;
            }
        }
        out.channel_stats = Some(self.clone());
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub class_names: Vec<String>,
    pub channels: usize,
    pub length: usize,
    pub meta_dim: usize,
    /// Statistics this dataset was standardized with, if any.
    pub channel_stats: Option<ChannelStats>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, class_names: Vec<String>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::invalid("dataset has no samples"))?;
        let (channels, length) = match first.series.shape() {
            [k, m] => (*k, *m),
            s => return Err(Error::shape("dataset", format!("series shape {s:?}"))),
        };
        let meta_dim = first.metadata.len();
        for (i, s) in samples.iter().enumerate() {
            if s.series.shape() != [channels, length] || s.metadata.len() != meta_dim {
                return Err(Error::shape(
                    "dataset",
                    format!("sample {i} differs in channels, length or metadata width"),
                ));
            }
            if s.label >= class_names.len() {
                return Err(Error::invalid(format!(
                    "sample {i} label {} >= {} classes",
                    s.label,
                    class_names.len()
                )));
            }
            if !s.series.is_finite() || s.metadata.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what: "value".into(),
                    location: format!("sample {i}"),
                });
            }
        }
        Ok(Dataset {
            samples,
            class_names,
            channels,
            length,
            meta_dim,
            channel_stats: None,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn flat_dim(&self) -> usize {
        self.channels * self.length + self.meta_dim
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count()];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    /// Sample indices grouped by label.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.class_count()];
        for (i, s) in self.samples.iter().enumerate() {
            out[s.label].push(i);
        }
        out
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Same header with a different sample list.
    pub fn with_samples(&self, samples: Vec<Sample>) -> Dataset {
        Dataset {
            samples,
            class_names: self.class_names.clone(),
            channels: self.channels,
            length: self.length,
            meta_dim: self.meta_dim,
            channel_stats: self.channel_stats.clone(),
        }
    }

    fn pick(&self, idx: impl IntoIterator<Item = usize>) -> Dataset {
        self.with_samples(idx.into_iter().map(|i| self.samples[i].clone()).collect())
    }

    pub fn require_all_classes(&self) -> Result<()> {
        match self.class_counts().iter().position(|&c| c == 0) {
            Some(y) => Err(Error::EmptyClass(y)),
            None => Ok(()),
        }
    }
}

/// Label prior `w_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassPriors {
    w: Vec<f64>,
}

impl ClassPriors {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() || w.iter().any(|&v| !(v > 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("invalid class priors {w:?}")));
        }
        Ok(ClassPriors { w })
    }

    pub fn uniform(classes: usize) -> Self {
        ClassPriors {
            w: vec![1.0 / classes as f64; classes],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn classes(&self) -> usize {
        self.w.len()
    }
}

/// `w_y = count(y) / N`.
pub fn compute_priors(ds: &Dataset) -> Result<ClassPriors> {
    if ds.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    ds.require_all_classes()?;
    let n = ds.len() as f64;
    Ok(ClassPriors {
        w: ds.class_counts().iter().map(|&c| c as f64 / n).collect(),
    })
}

/// Outcome of [`inject_imbalance`].
#[derive(Debug, Clone)]
pub struct Imbalanced {
    pub dataset: Dataset,
    /// Classes chosen for reduction, ascending.
    pub reduced: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Drops `round(drop_fraction·n_y)` samples from each of `floor(|Y|/2)`
/// randomly chosen classes. Kept samples retain their order.
pub fn inject_imbalance(ds: &Dataset, drop_fraction: f64, rng: &mut Rng) -> Result<Imbalanced> {
    if !(drop_fraction > 0.0 && drop_fraction < 1.0) {
        return Err(Error::invalid(format!("drop fraction {drop_fraction} outside (0, 1)")));
    }
    let classes = ds.class_count();
    let mut reduced = index::sample(rng, classes, classes / 2).into_vec();
    reduced.sort_unstable();

    let by_class = ds.indices_by_class();
    let mut drop = vec![false; ds.len()];
    let mut warnings = Vec::new();
    for &y in &reduced {
        let members = &by_class[y];
        let n = members.len();
        let mut n_drop = (drop_fraction * n as f64).round() as usize;
        if n > 0 && n_drop >= n {
            warnings.push(format!(
                "class {} ({}) would be emptied; keeping 1 of {n}",
                y, ds.class_names[y]
            ));
            n_drop = n - 1;
        }
        for j in index::sample(rng, n, n_drop) {
            drop[members[j]] = true;
        }
    }
    Ok(Imbalanced {
        dataset: ds.pick((0..ds.len()).filter(|&i| !drop[i])),
        reduced,
        warnings,
    })
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    (mean, if sd > 0.0 { sd } else { 1.0 })
}

/// Population statistics per channel (over all samples and time points)
/// and per metadata dimension.
pub fn channel_stats(ds: &Dataset) -> ChannelStats {
    let m = ds.length;
    let series = (0..ds.channels)
        .map(|c| {
            mean_sd(
                ds.samples
                    .iter()
                    .flat_map(move |s| s.series.data()[c * m..(c + 1) * m].iter().copied()),
            )
        })
        .collect();
    let metadata = (0..ds.meta_dim)
        .map(|d| mean_sd(ds.samples.iter().map(move |s| s.metadata[d])))
        .collect();
    ChannelStats { series, metadata }
}

/// Zero-mean, unit-sd channels; constant channels get sd 1.
pub fn standardize(ds: &Dataset) -> Result<(Dataset, ChannelStats)> {
    let stats = channel_stats(ds);
    Ok((stats.apply(ds)?, stats))
}

/// Stratified split; every class lands in both halves.
pub fn split(ds: &Dataset, test_fraction: f64, rng: &mut Rng) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    let mut is_test = vec![false; ds.len()];
    for (y, members) in ds.indices_by_class().iter().enumerate() {
        let n = members.len();
        let n_test = (test_fraction * n as f64).round() as usize;
        if n_test == 0 || n_test >= n {
            return Err(Error::invalid(format!(
                "class {y} with {n} samples cannot be split at fraction {test_fraction}"
            )));
        }
        for j in index::sample(rng, n, n_test) {
            is_test[members[j]] = true;
        }
    }
    Ok((
        ds.pick((0..ds.len()).filter(|&i| !is_test[i])),
        ds.pick((0..ds.len()).filter(|&i| is_test[i])),
    ))
}

/// Stratified subsample of about `size` samples, at least one per class.
pub fn subsample(ds: &Dataset, size: usize, rng: &mut Rng) -> Result<Dataset> {
    if size == 0 {
        return Err(Error::invalid("subsample size must be positive"));
    }
    if size >= ds.len() {
        return Ok(ds.clone());
    }
    let frac = size as f64 / ds.len() as f64;
    let mut keep = vec![false; ds.len()];
    for members in ds.indices_by_class() {
        let n = members.len();
        let k = ((frac * n as f64).round() as usize).clamp(n.min(1), n);
        for j in index::sample(rng, n, k) {
            keep[members[j]] = true;
        }
    }
    Ok(ds.pick((0..ds.len()).filter(|&i| keep[i])))
}
