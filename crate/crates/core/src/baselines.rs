//! Classical rebalancing baselines: class-weighted loss, up/down-sampling
//! and SMOTE. The naive conditional GAN is the trainer run at `p_miss = 1`.

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataio::{ClassPriors, Dataset, Sample};
use crate::error::{Error, Result};
use crate::ndcore::{Tape, Var};
use crate::rng::Rng;
use crate::trainer::weighted_nll;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Plain,
    ClassWeights,
    Upsample,
    Downsample,
    Smote,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 5] = [
        BaselineKind::Plain,
        BaselineKind::ClassWeights,
        BaselineKind::Upsample,
        BaselineKind::Downsample,
        BaselineKind::Smote,
    ];
}

/// Per-class weights `1/w_y`, scaled so the prior-weighted mean is one.
pub fn class_weights(priors: &ClassPriors) -> Vec<f64> {
    let k = priors.classes() as f64;
    priors.as_slice().iter().map(|w| (1.0 / k) / w).collect()
}

/// Inverse-prior weighted cross-entropy over probability rows.
pub fn class_weighted_loss(tape: &mut Tape, probs: Var, labels: &[usize], priors: &ClassPriors) -> Result<Var> {
    let w = class_weights(priors);
    let per_sample: Vec<f64> = labels
        .iter()
        .map(|&y| {
            w.get(y)
                .copied()
                .ok_or_else(|| Error::invalid(format!("label {y} has no prior")))
        })
        .collect::<Result<_>>()?;
    weighted_nll(tape, probs, labels, &per_sample)
}

/// A rebalanced dataset plus any non-fatal warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    pub dataset: Dataset,
    pub warnings: Vec<String>,
}

fn nonempty_classes(ds: &Dataset) -> Result<Vec<Vec<usize>>> {
    ds.require_all_classes()?;
    Ok(ds.indices_by_class())
}

/// Keeps every original and tops each class up to the largest class count
/// by drawing with replacement.
pub fn upsample(ds: &Dataset, rng: &mut Rng) -> Result<Dataset> {
    let by_class = nonempty_classes(ds)?;
    let target = by_class.iter().map(Vec::len).max().unwrap_or(0);
    let mut samples = ds.samples.clone();
    for members in &by_class {
        for _ in members.len()..target {
            samples.push(ds.samples[members[rng.random_range(0..members.len())]].clone());
        }
    }
    Ok(ds.with_samples(samples))
}

/// Subsamples each class without replacement to the smallest class count.
pub fn downsample(ds: &Dataset, rng: &mut Rng) -> Result<Dataset> {
    let by_class = nonempty_classes(ds)?;
    let target = by_class.iter().map(Vec::len).min().unwrap_or(0);
    let mut keep = vec![false; ds.len()];
    for members in &by_class {
        for j in index::sample(rng, members.len(), target) {
            keep[members[j]] = true;
        }
    }
    let samples = (0..ds.len())
        .filter(|&i| keep[i])
        .map(|i| ds.samples[i].clone())
        .collect();
    Ok(ds.with_samples(samples))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `x + u·(x_n − x)`.
pub fn interpolate(x: &[f64], neighbor: &[f64], u: f64) -> Vec<f64> {
    x.iter().zip(neighbor).map(|(a, b)| a + u * (b - a)).collect()
}

/// SMOTE on flattened vectors. `target` gives the desired count per class
/// (default: the largest class count); classes already at or above their
/// target are left alone. A singleton class is topped up by duplication.
pub fn smote(ds: &Dataset, k_neighbors: usize, target: Option<&[usize]>, rng: &mut Rng) -> Result<Resampled> {
    if k_neighbors == 0 {
        return Err(Error::invalid("k_neighbors must be at least 1"));
    }
    let by_class = nonempty_classes(ds)?;
    let targets: Vec<usize> = match target {
        Some(t) if t.len() == by_class.len() => t.to_vec(),
        Some(t) => {
            return Err(Error::invalid(format!(
                "{} targets for {} classes",
                t.len(),
                by_class.len()
            )));
        }
        None => vec![by_class.iter().map(Vec::len).max().unwrap_or(0); by_class.len()],
    };
    let flats: Vec<Vec<f64>> = ds.samples.iter().map(Sample::flat).collect();
    let mut samples = ds.samples.clone();
    let mut warnings = Vec::new();
    for (y, members) in by_class.iter().enumerate() {
        let need = targets[y].saturating_sub(members.len());
        if need == 0 {
            continue;
        }
        if members.len() == 1 {
            warnings.push(format!(
                "class '{}' has a single sample; duplicated instead of interpolated",
                ds.class_names[y]
            ));
            samples.extend(std::iter::repeat_n(ds.samples[members[0]].clone(), need));
            continue;
        }
        // k nearest same-class neighbors of every member, exact pairwise
        let k = k_neighbors.min(members.len() - 1);
        let neighbors: Vec<Vec<usize>> = members
            .iter()
            .map(|&i| {
                let mut others: Vec<(f64, usize)> = members
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| (sq_dist(&flats[i], &flats[j]), j))
                    .collect();
                others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                others.into_iter().take(k).map(|(_, j)| j).collect()
            })
            .collect();
        for _ in 0..need {
            let a = rng.random_range(0..members.len());
            let n = neighbors[a][rng.random_range(0..k)];
            let u: f64 = rng.random();
            let s = interpolate(&flats[members[a]], &flats[n], u);
            samples.push(Sample::from_flat(&s, ds.channels, ds.length, y)?);
        }
    }
    Ok(Resampled {
        dataset: ds.with_samples(samples),
        warnings,
    })
}

/// Applies a data-level baseline; loss-level and plain kinds pass through.
pub fn rebalance(kind: BaselineKind, ds: &Dataset, rng: &mut Rng) -> Result<Resampled> {
    let dataset = match kind {
        BaselineKind::Plain | BaselineKind::ClassWeights => ds.clone(),
        BaselineKind::Upsample => upsample(ds, rng)?,
        BaselineKind::Downsample => downsample(ds, rng)?,
        BaselineKind::Smote => return smote(ds, 5, None, rng),
    };
    Ok(Resampled {
        dataset,
        warnings: Vec::new(),
    })
}
