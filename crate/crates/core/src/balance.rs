//! Weighted resampling and MCAR masking.
//!
//! Each training step draws two pools from the training set: a real pool
//! sampled uniformly (so class frequencies follow the priors) and a mask
//! pool sampled class-first with inverse-prior weights. Mask-pool samples
//! are then partially replaced by noise and handed to the generator for
//! imputation.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataio::{ClassPriors, Dataset};
use crate::error::{Error, Result};
use crate::ndcore::Array;
use crate::rng::Rng;

/// How the mask pool picks classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskPoolRule {
    /// `q_y ∝ 1/w_y`.
    #[default]
    InversePrior,
    /// `q_y = 2/|Y| − w_y`, clipped at 0 and renormalized. Makes the union
    /// of both pools exactly uniform whenever no clipping happens.
    ExactBalance,
}

/// Class probabilities used for the mask pool.
pub fn mask_pool_probabilities(priors: &ClassPriors, rule: MaskPoolRule) -> Vec<f64> {
    let w = priors.as_slice();
    let raw: Vec<f64> = match rule {
        MaskPoolRule::InversePrior => w.iter().map(|v| 1.0 / v).collect(),
        MaskPoolRule::ExactBalance => {
            let k = w.len() as f64;
            w.iter().map(|v| (2.0 / k - v).max(0.0)).collect()
        }
    };
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Indices into the training set for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchPair {
    pub real: Vec<usize>,
    pub real_labels: Vec<usize>,
    pub mask_pool: Vec<usize>,
    /// True labels of the mask-pool samples.
    pub mask_labels: Vec<usize>,
}

fn categorical(probs: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Draws both pools of size `n_mb`, with replacement.
pub fn weighted_resample(
    ds: &Dataset,
    priors: &ClassPriors,
    n_mb: usize,
    rule: MaskPoolRule,
    rng: &mut Rng,
) -> Result<BatchPair> {
    if n_mb == 0 {
        return Err(Error::invalid("mini-batch size must be positive"));
    }
    if priors.classes() != ds.class_count() {
        return Err(Error::invalid("priors and dataset disagree on class count"));
    }
    let by_class = ds.indices_by_class();
    if let Some(y) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::EmptyClass(y));
    }
    let real: Vec<usize> = (0..n_mb).map(|_| rng.random_range(0..ds.len())).collect();
    let q = mask_pool_probabilities(priors, rule);
    let mask_pool: Vec<usize> = (0..n_mb)
        .map(|_| {
            let members = &by_class[categorical(&q, rng)];
            members[rng.random_range(0..members.len())]
        })
        .collect();
    Ok(BatchPair {
        real_labels: real.iter().map(|&i| ds.samples[i].label).collect(),
        mask_labels: mask_pool.iter().map(|&i| ds.samples[i].label).collect(),
        real,
        mask_pool,
    })
}

/// Binary indicator; 1 marks a component replaced by noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub indicator: Array,
}

impl Mask {
    pub fn ones_fraction(&self) -> f64 {
        self.indicator.sum() / self.indicator.len() as f64
    }
}

/// I.i.d. Bernoulli(`p_miss`) indicators, independent of any data.
pub fn draw_mask(shape: &[usize], p_miss: f64, rng: &mut Rng) -> Result<Mask> {
    if !(0.0..=1.0).contains(&p_miss) {
        return Err(Error::invalid(format!("p_miss {p_miss} outside [0, 1]")));
    }
    let mut a = Array::zeros(shape);
    for v in a.data_mut() {
        if rng.random::<f64>() < p_miss {
            *v = 1.0;
        }
    }
    Ok(Mask { indicator: a })
}

/// Standard normal white noise.
pub fn noise(shape: &[usize], rng: &mut Rng) -> Array {
    let mut a = Array::zeros(shape);
    for v in a.data_mut() {
        *v = StandardNormal.sample(rng);
    }
    a
}

/// `x ⊙ (1 − I) + z ⊙ I`.
pub fn apply_mask(x: &Array, mask: &Mask, z: &Array) -> Result<Array> {
    let i = &mask.indicator;
    if x.shape() != i.shape() || x.shape() != z.shape() {
        return Err(Error::shape(
            "apply_mask",
            format!("x {:?}, I {:?}, z {:?}", x.shape(), i.shape(), z.shape()),
        ));
    }
    let data = x
        .data()
        .iter()
        .zip(i.data())
        .zip(z.data())
        .map(|((&xv, &iv), &zv)| xv * (1.0 - iv) + zv * iv)
        .collect();
    Array::new(x.shape().to_vec(), data)
}

/// Stacks flattened samples into an `n × flat_dim` array.
pub fn gather_flat(ds: &Dataset, idx: &[usize]) -> Array {
    let d = ds.flat_dim();
    let mut data = Vec::with_capacity(idx.len() * d);
    for &i in idx {
        let s = &ds.samples[i];
        data.extend_from_slice(s.series.data());
        data.extend_from_slice(&s.metadata);
    }
    Array::new(vec![idx.len(), d], data).expect("nonempty batch")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{Dataset, Sample};
    use crate::rng::seeded;

    fn ds(counts: &[usize]) -> Dataset {
        let mut samples = Vec::new();
        for (y, &n) in counts.iter().enumerate() {
            for i in 0..n {
                samples.push(Sample {
                    series: Array::new(vec![1, 3], vec![i as f64, y as f64, 1.0]).unwrap(),
                    metadata: vec![],
                    label: y,
                });
            }
        }
        Dataset::new(samples, (0..counts.len()).map(|y| y.to_string()).collect()).unwrap()
    }

    #[test]
    fn inverse_prior_probabilities() {
        let q = mask_pool_probabilities(&ClassPriors::new(vec![0.9, 0.1]).unwrap(), MaskPoolRule::InversePrior);
        assert!((q[0] - 0.1).abs() < 1e-15 && (q[1] - 0.9).abs() < 1e-15);
        let q = mask_pool_probabilities(&ClassPriors::uniform(3), MaskPoolRule::InversePrior);
        assert!(q.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn exact_balance_makes_union_uniform() {
        let w = ClassPriors::new(vec![0.5, 0.3, 0.2]).unwrap();
        let q = mask_pool_probabilities(&w, MaskPoolRule::ExactBalance);
        for (wy, qy) in w.as_slice().iter().zip(&q) {
            assert!(((wy + qy) / 2.0 - 1.0 / 3.0).abs() < 1e-15);
        }
        // inverse-prior is ordered inversely to w but not exactly uniform
        let q = mask_pool_probabilities(&w, MaskPoolRule::InversePrior);
        assert!(q[0] < q[1] && q[1] < q[2]);
        assert!(((w.as_slice()[0] + q[0]) / 2.0 - 1.0 / 3.0).abs() > 1e-3);
    }

    #[test]
    fn pools_carry_true_labels() {
        let d = ds(&[9, 1]);
        let w = ClassPriors::new(vec![0.9, 0.1]).unwrap();
        let b = weighted_resample(&d, &w, 50, MaskPoolRule::InversePrior, &mut seeded(0)).unwrap();
        assert_eq!(b.real.len(), 50);
        for (&i, &y) in b.mask_pool.iter().zip(&b.mask_labels) {
            assert_eq!(d.samples[i].label, y);
        }
        assert!(weighted_resample(&d, &w, 0, MaskPoolRule::InversePrior, &mut seeded(0)).is_err());
    }

    #[test]
    fn mask_extremes() {
        let m = draw_mask(&[4, 5], 0.0, &mut seeded(0)).unwrap();
        assert_eq!(m.indicator.sum(), 0.0);
        let m = draw_mask(&[4, 5], 1.0, &mut seeded(0)).unwrap();
        assert_eq!(m.indicator.sum(), 20.0);
        assert!(draw_mask(&[2], 1.5, &mut seeded(0)).is_err());
    }

    #[test]
    fn apply_mask_examples() {
        let x = Array::from_vec(vec![1.0, 2.0]);
        let z = Array::from_vec(vec![9.0, 9.0]);
        let m = Mask {
            indicator: Array::from_vec(vec![0.0, 1.0]),
        };
        assert_eq!(apply_mask(&x, &m, &z).unwrap().data(), &[1.0, 9.0]);
        let none = Mask {
            indicator: Array::zeros(&[2]),
        };
        assert_eq!(apply_mask(&x, &none, &z).unwrap(), x);
        let all = Mask {
            indicator: Array::full(&[2], 1.0),
        };
        assert_eq!(apply_mask(&x, &all, &z).unwrap(), z);
        assert!(apply_mask(&Array::zeros(&[3]), &none, &z).is_err());
    }

    #[test]
    fn noise_moments() {
        let n = 100_000;
        let z = noise(&[n], &mut seeded(21));
        let mean = z.sum() / n as f64;
        let var = z.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 3.0 / (n as f64).sqrt(), "{mean}");
        assert!((var - 1.0).abs() < 0.02, "{var}");
        assert_eq!(noise(&[5], &mut seeded(1)), noise(&[5], &mut seeded(1)));
    }
}
