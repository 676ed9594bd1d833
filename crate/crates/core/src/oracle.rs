//! Exact optimal classifiers on finite joint distributions.
//!
//! Everything here works on explicit tables: a label prior `w` and a
//! row-stochastic conditional `p[y][x]`. Classifier tables are indexed
//! the same way (`c[y][x]`), so each column is a distribution over labels.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::Rng;

const STOCHASTIC_TOL: f64 = 1e-12;

/// Finite label set with priors and per-class conditionals over `points`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJoint {
    w: Vec<f64>,
    p: Vec<Vec<f64>>,
}

impl DiscreteJoint {
    pub fn new(w: Vec<f64>, p: Vec<Vec<f64>>) -> Result<Self> {
        if w.is_empty() || p.len() != w.len() {
            return Err(Error::invalid("need one conditional row per class"));
        }
        let points = p[0].len();
        if points == 0 || p.iter().any(|r| r.len() != points) {
            return Err(Error::invalid("conditional rows must share a nonempty point set"));
        }
        if w.iter().any(|&v| !(v > 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::invalid(format!("priors must be positive and sum to 1: {w:?}")));
        }
        for (y, row) in p.iter().enumerate() {
            if row.iter().any(|&v| !(v >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::invalid(format!("conditional row {y} is not a distribution")));
            }
        }
        Ok(DiscreteJoint { w, p })
    }

    /// Random joint: Dirichlet(1) priors and conditionals.
    pub fn random(classes: usize, points: usize, rng: &mut Rng) -> Self {
        let w = random_simplex(classes, rng);
        let p = (0..classes).map(|_| random_simplex(points, rng)).collect();
        DiscreteJoint { w, p }
    }

    pub fn classes(&self) -> usize {
        self.w.len()
    }

    pub fn points(&self) -> usize {
        self.p[0].len()
    }

    pub fn priors(&self) -> &[f64] {
        &self.w
    }

    pub fn conditionals(&self) -> &[Vec<f64>] {
        &self.p
    }

    pub fn with_priors(&self, w: Vec<f64>) -> Result<Self> {
        DiscreteJoint::new(w, self.p.clone())
    }

    /// Multiplies every conditional entry by `factor` without renormalizing.
    pub fn scaled_conditionals(&self, factor: f64) -> Vec<Vec<f64>> {
        self.p.iter().map(|r| r.iter().map(|v| v * factor).collect()).collect()
    }
}

pub fn random_simplex(n: usize, rng: &mut Rng) -> Vec<f64> {
    // exponential spacings give a uniform draw on the simplex
    let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-9).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Classifier table `c[y][x]`; columns with zero total mass are flagged
/// and hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierTable {
    pub values: Vec<Vec<f64>>,
    pub undefined: Vec<bool>,
}

impl ClassifierTable {
    /// Normalizes per-point scores `s[y][x]` into column distributions.
    pub fn from_scores(scores: Vec<Vec<f64>>) -> Self {
        let classes = scores.len();
        let points = scores[0].len();
        let mut values = scores;
        let mut undefined = vec![false; points];
        for x in 0..points {
            let total: f64 = (0..classes).map(|y| values[y][x]).sum();
            if total > 0.0 {
                for row in values.iter_mut() {
                    row[x] /= total;
                }
            } else {
                undefined[x] = true;
                for row in values.iter_mut() {
                    row[x] = f64::NAN;
                }
            }
        }
        ClassifierTable { values, undefined }
    }

    pub fn column(&self, x: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[x]).collect()
    }

    pub fn argmax(&self, x: usize) -> Option<usize> {
        if self.undefined[x] {
            return None;
        }
        let col = self.column(x);
        Some(
            col.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
                .0,
        )
    }

    /// Largest componentwise difference over columns defined in both.
    pub fn max_abs_diff(&self, other: &ClassifierTable) -> f64 {
        let mut worst = 0.0f64;
        for x in 0..self.undefined.len() {
            if self.undefined[x] || other.undefined[x] {
                continue;
            }
            for (a, b) in self.values.iter().zip(&other.values) {
                worst = worst.max((a[x] - b[x]).abs());
            }
        }
        worst
    }

    /// Largest deviation of a defined column sum from 1.
    pub fn stochastic_error(&self) -> f64 {
        (0..self.undefined.len())
            .filter(|&x| !self.undefined[x])
            .map(|x| (self.column(x).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// `c*_y(x) ∝ w_y p_y(x)`.
pub fn bayes_classifier(j: &DiscreteJoint) -> ClassifierTable {
    bayes_from_parts(&j.w, &j.p)
}

fn bayes_from_parts(w: &[f64], p: &[Vec<f64>]) -> ClassifierTable {
    ClassifierTable::from_scores(
        w.iter()
            .zip(p)
            .map(|(&wy, row)| row.iter().map(|v| wy * v).collect())
            .collect(),
    )
}

/// `c̄*_y(x) ∝ p_y(x)`, the posterior under uniform priors.
pub fn balanced_classifier(j: &DiscreteJoint) -> ClassifierTable {
    balanced_from_parts(&j.p)
}

fn balanced_from_parts(p: &[Vec<f64>]) -> ClassifierTable {
    ClassifierTable::from_scores(p.to_vec())
}

/// Result of solving for the augmentation prior.
#[derive(Debug, Clone, PartialEq)]
pub enum AugmentationPrior {
    Feasible(Vec<f64>),
    /// `alpha` reaches `(1/|Y|)/max w`; `class` is the prior's argmax,
    /// whose augmentation weight would be `value ≤ 0`.
    Infeasible {
        class: usize,
        value: f64,
        bound: f64,
    },
}

/// Prior `w′_y = (1/|Y| − α w_y)/(1 − α)` that makes the α-mixture of real
/// and augmented labels uniform.
pub fn augmentation_prior(w: &[f64], alpha: f64) -> Result<AugmentationPrior> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha {alpha} outside (0, 1)")));
    }
    if w.is_empty() {
        return Err(Error::invalid("empty prior"));
    }
    let k = w.len() as f64;
    let (arg, max) = w
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
    let bound = (1.0 / k) / max;
    let prior: Vec<f64> = w.iter().map(|&wy| (1.0 / k - alpha * wy) / (1.0 - alpha)).collect();
    if alpha >= bound {
        return Ok(AugmentationPrior::Infeasible {
            class: arg,
            value: prior[arg],
            bound,
        });
    }
    Ok(AugmentationPrior::Feasible(prior))
}

/// `c̃*_y(x) ∝ α w_y p_y(x) + (1−α) w′_y p′_y(x)`.
pub fn augmented_optimal_classifier(
    real: &DiscreteJoint,
    augmented: &DiscreteJoint,
    alpha: f64,
) -> Result<ClassifierTable> {
    if real.classes() != augmented.classes() || real.points() != augmented.points() {
        return Err(Error::invalid("joints must share classes and points"));
    }
    let scores = (0..real.classes())
        .map(|y| {
            (0..real.points())
                .map(|x| alpha * real.w[y] * real.p[y][x] + (1.0 - alpha) * augmented.w[y] * augmented.p[y][x])
                .collect()
        })
        .collect();
    Ok(ClassifierTable::from_scores(scores))
}

/// Residuals of `p′·d*/(1−d*) − p` with `d* = p/(p+p′)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorResidual {
    /// `None` where `p′ = 0` (d* = 1) or `p + p′ = 0`.
    pub residual: Vec<Vec<Option<f64>>>,
}

impl DiscriminatorResidual {
    pub fn max_abs(&self) -> f64 {
        self.residual
            .iter()
            .flatten()
            .flatten()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }

    pub fn flagged(&self) -> usize {
        self.residual.iter().flatten().filter(|v| v.is_none()).count()
    }
}

pub fn optimal_discriminator(p: f64, p_aug: f64) -> Option<f64> {
    let total = p + p_aug;
    (total > 0.0).then(|| p / total)
}

/// Checks that weighting augmented mass by the optimal discriminator's odds
/// recovers the real mass.
pub fn optimal_discriminator_identity(p: &[Vec<f64>], p_aug: &[Vec<f64>]) -> Result<DiscriminatorResidual> {
    if p.len() != p_aug.len() || p.iter().zip(p_aug).any(|(a, b)| a.len() != b.len()) {
        return Err(Error::invalid("conditional tables differ in shape"));
    }
    let residual = p
        .iter()
        .zip(p_aug)
        .map(|(row, row_aug)| {
            row.iter()
                .zip(row_aug)
                .map(|(&py, &pa)| {
                    if pa == 0.0 {
                        return None;
                    }
                    let d = optimal_discriminator(py, pa)?;
                    // 1 − d* in closed form; subtracting from 1 cancels when p′ ≪ p
                    let not_d = pa / (py + pa);
                    Some(pa * d / not_d - py)
                })
                .collect()
        })
        .collect();
    Ok(DiscriminatorResidual { residual })
}

/// Scoring rule for [`empirical_bayes_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Mean `log c_Y(X)` over draws; maximized by the Bayes classifier.
    PriorWeighted,
    /// Draws reweighted by `1/(|Y| w_Y)`; maximized by the balanced classifier.
    ClassBalanced,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesCheck {
    pub candidate_score: f64,
    pub best_competitor_score: f64,
    /// Fraction of competitor tables the candidate scores at least as well as.
    pub agreement_rate: f64,
}

/// Draws `(X, Y)` from `j` and scores `candidate` against 100 randomly
/// perturbed copies of itself.
pub fn empirical_bayes_check(
    j: &DiscreteJoint,
    candidate: &ClassifierTable,
    objective: Objective,
    n_draws: usize,
    rng: &mut Rng,
) -> Result<BayesCheck> {
    if n_draws == 0 {
        return Err(Error::invalid("n_draws must be at least 1"));
    }
    let draws = sample_joint(j, n_draws, rng);
    let competitors: Vec<ClassifierTable> = (0..100).map(|_| perturb(candidate, 0.5, rng)).collect();
    let candidate_score = score_table(j, candidate, objective, &draws);
    let scores: Vec<f64> = competitors
        .iter()
        .map(|c| score_table(j, c, objective, &draws))
        .collect();
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let wins = scores.iter().filter(|&&s| candidate_score >= s).count();
    Ok(BayesCheck {
        candidate_score,
        best_competitor_score: best,
        agreement_rate: wins as f64 / scores.len() as f64,
    })
}

/// Samples `(x, y)` pairs from the joint.
pub fn sample_joint(j: &DiscreteJoint, n: usize, rng: &mut Rng) -> Vec<(usize, usize)> {
    (0..n)
        .map(|_| {
            let y = sample_index(&j.w, rng);
            (sample_index(&j.p[y], rng), y)
        })
        .collect()
}

fn sample_index(probs: &[f64], rng: &mut Rng) -> usize {
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

/// Mean objective of `table` over `draws`; undefined columns are skipped.
pub fn score_table(j: &DiscreteJoint, table: &ClassifierTable, objective: Objective, draws: &[(usize, usize)]) -> f64 {
    let k = j.classes() as f64;
    let mut total = 0.0;
    let mut n = 0usize;
    for &(x, y) in draws {
        if table.undefined[x] {
            continue;
        }
        let weight = match objective {
            Objective::PriorWeighted => 1.0,
            Objective::ClassBalanced => 1.0 / (k * j.w[y]),
        };
        total += weight * table.values[y][x].max(1e-300).ln();
        n += 1;
    }
    total / n.max(1) as f64
}

/// Multiplies each entry by `exp(scale·N(0,1))` and renormalizes columns.
pub fn perturb(table: &ClassifierTable, scale: f64, rng: &mut Rng) -> ClassifierTable {
    let scores = table
        .values
        .iter()
        .map(|row| {
            row.iter()
                .map(|&v| {
                    let z: f64 = StandardNormal.sample(rng);
                    if v.is_nan() {
                        0.0
                    } else {
                        v * (scale * z).exp()
                    }
                })
                .collect()
        })
        .collect();
    let mut out = ClassifierTable::from_scores(scores);
    out.undefined = table.undefined.clone();
    out
}

/// One named property of a seeded sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    pub name: &'static str,
    /// Worst observed value (residual, or count of violations).
    pub worst: f64,
    pub tolerance: f64,
}

impl PropertyCheck {
    pub fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }
}

/// Worst `|c̃* − c̄*|` over `draws` random joints (2–4 classes, up to 20
/// points) at feasible `α`, with `p′ = p` and the solved augmentation prior.
pub fn theory_recovery_residual(draws: usize, rng: &mut Rng) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let classes = rng.random_range(2..=4);
        let points = rng.random_range(1..=20);
        let real = DiscreteJoint::random(classes, points, rng);
        let max_w = real.priors().iter().copied().fold(0.0, f64::max);
        let bound = (1.0 / classes as f64) / max_w;
        let alpha = bound * rng.random_range(0.01..0.99);
        let AugmentationPrior::Feasible(w_aug) = augmentation_prior(real.priors(), alpha)? else {
            return Err(Error::invalid(format!(
                "alpha {alpha} below bound {bound} reported infeasible"
            )));
        };
        let aug = real.with_priors(w_aug)?;
        let mixed = augmented_optimal_classifier(&real, &aug, alpha)?;
        worst = worst.max(mixed.max_abs_diff(&balanced_classifier(&real)));
    }
    Ok(worst)
}

/// Number of `(prior, α)` pairs on a 50-point grid where feasibility
/// disagrees with `α < (1/|Y|)/max w`.
pub fn feasibility_mismatches(priors: usize, rng: &mut Rng) -> Result<usize> {
    let mut bad = 0;
    for _ in 0..priors {
        let classes = rng.random_range(2..=4);
        let w = random_simplex(classes, rng);
        let bound = (1.0 / classes as f64) / w.iter().copied().fold(0.0, f64::max);
        for i in 1..=50 {
            let alpha = i as f64 / 51.0;
            let infeasible = matches!(augmentation_prior(&w, alpha)?, AugmentationPrior::Infeasible { .. });
            if infeasible != (alpha >= bound) {
                bad += 1;
            }
        }
    }
    Ok(bad)
}

/// Worst optimal-discriminator identity residual over random table pairs.
pub fn discriminator_identity_residual(tables: usize, rng: &mut Rng) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..tables {
        let classes = rng.random_range(2..=4);
        let points = rng.random_range(1..=20);
        let p = DiscreteJoint::random(classes, points, rng);
        let q = DiscreteJoint::random(classes, points, rng);
        worst = worst.max(optimal_discriminator_identity(p.conditionals(), q.conditionals())?.max_abs());
    }
    Ok(worst)
}

/// The oracle's seeded property sweeps with their tolerances.
pub fn property_sweep(rng: &mut Rng) -> Result<Vec<PropertyCheck>> {
    Ok(vec![
        PropertyCheck {
            name: "augmented optimum equals balanced classifier",
            worst: theory_recovery_residual(200, rng)?,
            tolerance: 1e-12,
        },
        PropertyCheck {
            name: "augmentation feasibility boundary",
            worst: feasibility_mismatches(50, rng)? as f64,
            tolerance: 0.0,
        },
        PropertyCheck {
            name: "optimal discriminator odds recover real mass",
            worst: discriminator_identity_residual(100, rng)?,
            tolerance: 1e-12,
        },
    ])
}
