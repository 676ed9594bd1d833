//! Joint training of generator, discriminator and classifier.
//!
//! Every mini-batch step runs three Adam updates in the order D → C → G:
//!
//! 1. draw a real pool and an inverse-prior mask pool, mask the latter at
//!    rate `p_miss`, and impute it with the current generator;
//! 2. step the discriminator on element-wise real/imputed targets;
//! 3. step the classifier on real samples plus imputed samples weighted by
//!    the discriminator odds `w_D = d/(1−d)` (held constant);
//! 4. step the generator on the non-saturating adversarial loss plus the
//!    weighted classification loss of its samples under their true labels.
//!
//! `p_miss = 1` turns the generator into a conditional GAN fed pure noise.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::balance::{self, apply_mask, draw_mask, gather_flat, weighted_resample, MaskPoolRule};
use crate::baselines::class_weighted_loss;
use crate::dataio::{compute_priors, ClassPriors, Dataset};
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::ndcore::{grad_check, AdamConfig, AdamState, Array, Tape, Var};
use crate::nets::{
    build_classifier, build_discriminator, build_generator, one_hot, sample_scores, ClassifierNet, DiscriminatorNet,
    GeneratorNet, NetSpec,
};
use crate::rng::{seeded, Rng};

/// Clamp applied to discriminator scores before logs.
pub const SCORE_CLAMP: f64 = 1e-7;
/// Clamp applied to class probabilities before logs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub p_miss: f64,
    pub alpha: f64,
    pub n_mb: usize,
    pub epochs: usize,
    /// Classifier optimizer.
    pub adam: AdamConfig,
    /// The discriminator runs on a faster time scale than the generator;
    /// with equal rates it lags and the generator drifts to the output bounds.
    pub generator_adam: AdamConfig,
    pub discriminator_adam: AdamConfig,
    /// Upper bound on `w_D`.
    pub weight_cap: f64,
    pub weighting: WeightScore,
    pub mask_pool: MaskPoolRule,
    /// Feed `x_mask` to the classifier directly instead of generator output.
    pub bypass_generator: bool,
    pub nets: NetSpec,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            p_miss: 0.1,
            alpha: 0.5,
            n_mb: 64,
            epochs: 20,
            adam: AdamConfig::default(),
            generator_adam: AdamConfig {
                lr: 1e-4,
                beta1: 0.5,
                ..AdamConfig::default()
            },
            discriminator_adam: AdamConfig {
                lr: 3e-3,
                beta1: 0.5,
                ..AdamConfig::default()
            },
            weight_cap: 20.0,
            weighting: WeightScore::default(),
            mask_pool: MaskPoolRule::InversePrior,
            bypass_generator: false,
            nets: NetSpec::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_miss) {
            return Err(Error::Config(format!("p_miss {} outside [0, 1]", self.p_miss)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.n_mb == 0 {
            return Err(Error::Config("n_mb must be positive".into()));
        }
        if !(self.weight_cap > 0.0) {
            return Err(Error::Config("weight_cap must be positive".into()));
        }
        for a in [&self.adam, &self.generator_adam, &self.discriminator_adam] {
            if !(a.lr > 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.epsilon > 0.0) {
                return Err(Error::Config(format!("invalid optimizer settings {a:?}")));
            }
        }
        Ok(())
    }
}

/// How per-component discriminator scores become the sample weight `w_D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScore {
    /// Mean score over the imputed components, with the odds divided by the
    /// prior odds `(1 − p/2)/(p/2)` of a component being real. A perfect
    /// imputation then gets weight 1; a sample without imputed components
    /// is real data and also gets 1.
    #[default]
    MaskedOdds,
    /// Mean over all components, odds used as-is.
    ComponentMean,
}

/// Mean losses over one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLosses {
    pub epoch: usize,
    pub loss_d: f64,
    pub loss_g_adv: f64,
    /// `α`-weighted real cross-entropy term of the classifier loss.
    pub loss_c_real: f64,
    /// `(1−α)`-weighted, `w_D`-weighted synthetic term.
    pub loss_c_fake: f64,
    /// Mean `w_D` given to imputed samples.
    pub mean_weight: f64,
}

// ---------------------------------------------------------------- losses

/// Element-wise discriminator loss. Real components target 1; imputed-batch
/// components target `1 − I`. Averaged over all components of both batches.
pub fn discriminator_loss(tape: &mut Tape, d_real: Var, d_fake: Var, indicator: &Array) -> Result<Var> {
    let (lo, hi) = (SCORE_CLAMP, 1.0 - SCORE_CLAMP);
    let n = (tape.value(d_real).len() + tape.value(d_fake).len()) as f64;
    let log_real = tape.log_clamped(d_real, lo, hi)?;
    let real = tape.sum(log_real)?;
    let log_fake = tape.log_clamped(d_fake, lo, hi)?;
    let one_minus = tape.scale_shift(d_fake, -1.0, 1.0)?;
    let log_one_minus = tape.log_clamped(one_minus, lo, hi)?;
    let fake_terms = tape.select(indicator, log_fake, log_one_minus)?;
    let fake = tape.sum(fake_terms)?;
    let total = tape.add(real, fake)?;
    tape.scale_shift(total, -1.0 / n, 0.0)
}

/// `−mean over masked components of log d_fake`; `None` without masked
/// components.
pub fn generator_adversarial_loss(tape: &mut Tape, d_fake: Var, indicator: &Array) -> Result<Option<Var>> {
    let masked = indicator.sum();
    if masked == 0.0 {
        return Ok(None);
    }
    let logs = tape.log_clamped(d_fake, SCORE_CLAMP, 1.0 - SCORE_CLAMP)?;
    let ind = tape.constant(indicator.clone());
    let picked = tape.mul(ind, logs)?;
    let s = tape.sum(picked)?;
    Ok(Some(tape.scale_shift(s, -1.0 / masked, 0.0)?))
}

/// Value-level `(loss_D, loss_G_adv)` for given score maps.
pub fn gan_loss(d_real: &Array, d_fake: &Array, indicator: &Array) -> Result<(f64, f64)> {
    let mut tape = Tape::new();
    let r = tape.constant(d_real.clone());
    let f = tape.constant(d_fake.clone());
    let ld = discriminator_loss(&mut tape, r, f, indicator)?;
    let lg = generator_adversarial_loss(&mut tape, f, indicator)?;
    Ok((tape.value(ld).item(), lg.map_or(0.0, |v| tape.value(v).item())))
}

/// `w_D = min(d/(1−d), cap)` on a clamped sample score.
pub fn discriminator_weights(d_sample: f64, cap: f64) -> f64 {
    let d = d_sample.clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP);
    (d / (1.0 - d)).min(cap)
}

/// `w_D` for every row of an imputed batch given per-component scores.
pub fn batch_weights(scores: &Array, indicator: &Array, p_miss: f64, mode: WeightScore, cap: f64) -> Vec<f64> {
    match mode {
        WeightScore::ComponentMean => sample_scores(scores)
            .into_iter()
            .map(|d| discriminator_weights(d, cap))
            .collect(),
        WeightScore::MaskedOdds => {
            let prior_odds = (1.0 - p_miss / 2.0) / (p_miss / 2.0);
            scores
                .rows()
                .zip(indicator.rows())
                .map(|(d, ind)| {
                    let masked = ind.iter().filter(|&&v| v != 0.0).count();
                    if masked == 0 {
                        return 1.0;
                    }
                    let mean = d
                        .iter()
                        .zip(ind)
                        .filter(|(_, &v)| v != 0.0)
                        .map(|(s, _)| s)
                        .sum::<f64>()
                        / masked as f64;
                    (discriminator_weights(mean, f64::INFINITY) / prior_odds).min(cap)
                })
                .collect()
        }
    }
}

/// `−mean_i w_i · log c_{y_i}(x_i)` as a tape expression.
pub fn weighted_nll(tape: &mut Tape, probs: Var, labels: &[usize], weights: &[f64]) -> Result<Var> {
    let picked = tape.gather(probs, labels)?;
    let logs = tape.log_clamped(picked, PROB_FLOOR, 1.0)?;
    let w = tape.constant(Array::from_vec(weights.to_vec()));
    let weighted = tape.mul(w, logs)?;
    let m = tape.mean(weighted)?;
    tape.scale_shift(m, -1.0, 0.0)
}

/// Terms of the α-mixed classifier loss; `total` is their sum.
pub struct ClassifierLossTerms {
    pub total: Var,
    pub real: Var,
    pub fake: Var,
}

/// `−[α·mean_real log c_Y(x) + (1−α)·mean_fake w_D log c_{Y′}(x′)]`.
pub fn classifier_loss_terms(
    tape: &mut Tape,
    c_real: Var,
    labels: &[usize],
    c_fake: Var,
    fake_labels: &[usize],
    w_d: &[f64],
    alpha: f64,
) -> Result<ClassifierLossTerms> {
    let ones = vec![1.0; labels.len()];
    let real_ce = weighted_nll(tape, c_real, labels, &ones)?;
    let real = tape.scale_shift(real_ce, alpha, 0.0)?;
    let fake_ce = weighted_nll(tape, c_fake, fake_labels, w_d)?;
    let fake = tape.scale_shift(fake_ce, 1.0 - alpha, 0.0)?;
    let total = tape.add(real, fake)?;
    Ok(ClassifierLossTerms { total, real, fake })
}

/// Value-level α-mixed classifier loss.
pub fn classifier_loss_alpha(
    c_real: &Array,
    labels: &[usize],
    c_fake: &Array,
    fake_labels: &[usize],
    w_d: &[f64],
    alpha: f64,
) -> Result<f64> {
    if w_d.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::invalid("discriminator weights must be nonnegative"));
    }
    let mut tape = Tape::new();
    let r = tape.constant(c_real.clone());
    let f = tape.constant(c_fake.clone());
    let terms = classifier_loss_terms(&mut tape, r, labels, f, fake_labels, w_d, alpha)?;
    Ok(tape.value(terms.total).item())
}

// ---------------------------------------------------------------- state

/// The three networks with their optimizers and loss history.
#[derive(Debug, Clone)]
pub struct TripletState {
    pub generator: GeneratorNet,
    pub discriminator: DiscriminatorNet,
    pub classifier: ClassifierNet,
    pub adam_g: AdamState,
    pub adam_d: AdamState,
    pub adam_c: AdamState,
    pub epoch: usize,
    pub history: Vec<EpochLosses>,
    rng: Rng,
}

impl TripletState {
    /// Fresh networks initialized from `cfg.seed`.
    pub fn new(ds: &Dataset, cfg: &TrainConfig) -> Result<Self> {
        let mut rng = seeded(cfg.seed);
        let flat = ds.flat_dim();
        let classes = ds.class_count();
        let classifier = build_classifier(&cfg.nets, ds.channels, ds.length, ds.meta_dim, classes, &mut rng)?;
        let generator = build_generator(&cfg.nets, flat, classes, &mut rng)?;
        let discriminator = build_discriminator(&cfg.nets, flat, classes, &mut rng)?;
        Ok(TripletState {
            adam_g: AdamState::new(&generator.mlp.params, cfg.generator_adam),
            adam_d: AdamState::new(&discriminator.mlp.params, cfg.discriminator_adam),
            adam_c: AdamState::new(&classifier.params, cfg.adam),
            generator,
            discriminator,
            classifier,
            epoch: 0,
            history: Vec::new(),
            rng,
        })
    }
}

fn finite(v: f64, what: &str, epoch: usize, step: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            what: what.into(),
            location: format!("epoch {epoch}, step {step}"),
        })
    }
}

fn locate(err: Error, epoch: usize, step: usize) -> Error {
    match err {
        Error::NonFinite { what, location } => Error::NonFinite {
            what,
            location: format!("{location} (epoch {epoch}, step {step})"),
        },
        other => other,
    }
}

/// Inputs shared by the three updates of one step.
struct StepBatch {
    x_real: Array,
    real_labels: Vec<usize>,
    x_mask: Array,
    indicator: Array,
    mask_labels: Vec<usize>,
}

fn draw_step(ds: &Dataset, priors: &ClassPriors, cfg: &TrainConfig, rng: &mut Rng) -> Result<StepBatch> {
    let batch = weighted_resample(ds, priors, cfg.n_mb, cfg.mask_pool, rng)?;
    let x_real = gather_flat(ds, &batch.real);
    let x_pool = gather_flat(ds, &batch.mask_pool);
    let mask = draw_mask(x_pool.shape(), cfg.p_miss, rng)?;
    let z = balance::noise(x_pool.shape(), rng);
    let x_mask = apply_mask(&x_pool, &mask, &z)?;
    Ok(StepBatch {
        x_real,
        real_labels: batch.real_labels,
        x_mask,
        indicator: mask.indicator,
        mask_labels: batch.mask_labels,
    })
}

fn synthesize_values(state: &TripletState, b: &StepBatch, cfg: &TrainConfig) -> Result<Array> {
    if cfg.bypass_generator {
        return Ok(b.x_mask.clone());
    }
    let mut tape = Tape::new();
    let gv = state.generator.bind(&mut tape, false);
    let xm = tape.constant(b.x_mask.clone());
    let oh = tape.constant(one_hot(&b.mask_labels, state.generator.classes));
    let out = state.generator.synthesize(&mut tape, &gv, xm, &b.indicator, oh)?;
    Ok(tape.value(out).clone())
}

/// Losses from one step, before averaging.
#[derive(Debug, Clone, Copy, Default)]
struct StepLosses {
    d: f64,
    g_adv: f64,
    c_real: f64,
    c_fake: f64,
    weight: f64,
}

fn train_step(state: &mut TripletState, ds: &Dataset, priors: &ClassPriors, cfg: &TrainConfig) -> Result<StepLosses> {
    let b = draw_step(ds, priors, cfg, &mut state.rng)?;
    let classes = ds.class_count();
    let oh_real = one_hot(&b.real_labels, classes);
    let oh_fake = one_hot(&b.mask_labels, classes);
    let x_fake = synthesize_values(state, &b, cfg)?;
    let mut out = StepLosses::default();

    // discriminator
    {
        let mut tape = Tape::new();
        let dv = state.discriminator.bind(&mut tape, true);
        let xr = tape.constant(b.x_real.clone());
        let xf = tape.constant(x_fake.clone());
        let ohr = tape.constant(oh_real.clone());
        let ohf = tape.constant(oh_fake.clone());
        let d_real = state.discriminator.forward(&mut tape, &dv, xr, ohr)?;
        let d_fake = state.discriminator.forward(&mut tape, &dv, xf, ohf)?;
        let loss = discriminator_loss(&mut tape, d_real, d_fake, &b.indicator)?;
        out.d = tape.value(loss).item();
        let grads = tape.backward(loss)?.wrt(&dv);
        state.adam_d.update(&mut state.discriminator.mlp.params, &grads)?;
    }

    // discriminator odds from the updated D, treated as constants
    let w_d = batch_weights(
        &state.discriminator.scores(&x_fake, &b.mask_labels)?,
        &b.indicator,
        cfg.p_miss,
        cfg.weighting,
        cfg.weight_cap,
    );

    out.weight = w_d.iter().sum::<f64>() / w_d.len() as f64;

    // classifier
    {
        let mut tape = Tape::new();
        let cv = state.classifier.bind(&mut tape, true);
        let xr = tape.constant(b.x_real.clone());
        let xf = tape.constant(x_fake.clone());
        let c_real = state.classifier.forward(&mut tape, &cv, xr)?;
        let c_fake = state.classifier.forward(&mut tape, &cv, xf)?;
        let terms = classifier_loss_terms(
            &mut tape,
            c_real,
            &b.real_labels,
            c_fake,
            &b.mask_labels,
            &w_d,
            cfg.alpha,
        )?;
        out.c_real = tape.value(terms.real).item();
        out.c_fake = tape.value(terms.fake).item();
        let grads = tape.backward(terms.total)?.wrt(&cv);
        state.adam_c.update(&mut state.classifier.params, &grads)?;
    }

    // generator
    if !cfg.bypass_generator {
        let mut tape = Tape::new();
        let gv = state.generator.bind(&mut tape, true);
        let dv = state.discriminator.bind(&mut tape, false);
        let cv = state.classifier.bind(&mut tape, false);
        let loss = generator_loss(state, &mut tape, &gv, &dv, &cv, &b, &oh_fake, &w_d, cfg.alpha)?;
        out.g_adv = loss.1;
        let grads = tape.backward(loss.0)?.wrt(&gv);
        state.adam_g.update(&mut state.generator.mlp.params, &grads)?;
    }
    Ok(out)
}

/// Generator objective; returns the loss node and the adversarial value.
#[allow(clippy::too_many_arguments)]
fn generator_loss(
    state: &TripletState,
    tape: &mut Tape,
    gv: &[Var],
    dv: &[Var],
    cv: &[Var],
    b: &StepBatch,
    oh_fake: &Array,
    w_d: &[f64],
    alpha: f64,
) -> Result<(Var, f64)> {
    let xm = tape.constant(b.x_mask.clone());
    let ohf = tape.constant(oh_fake.clone());
    let x_syn = state.generator.synthesize(tape, gv, xm, &b.indicator, ohf)?;
    let d_fake = state.discriminator.forward(tape, dv, x_syn, ohf)?;
    let adv = generator_adversarial_loss(tape, d_fake, &b.indicator)?;
    let c_fake = state.classifier.forward(tape, cv, x_syn)?;
    let ce = weighted_nll(tape, c_fake, &b.mask_labels, w_d)?;
    let cls = tape.scale_shift(ce, 1.0 - alpha, 0.0)?;
    match adv {
        Some(a) => {
            let v = tape.value(a).item();
            Ok((tape.add(a, cls)?, v))
        }
        None => Ok((cls, 0.0)),
    }
}

/// One pass of `ceil(N/n_mb)` steps; appends the epoch's mean losses.
pub fn train_epoch(state: &mut TripletState, ds: &Dataset, priors: &ClassPriors, cfg: &TrainConfig) -> Result<()> {
    let steps = ds.len().div_ceil(cfg.n_mb);
    let epoch = state.epoch + 1;
    let mut sum = StepLosses::default();
    for step in 1..=steps {
        let l = train_step(state, ds, priors, cfg).map_err(|e| locate(e, epoch, step))?;
        sum.d += finite(l.d, "discriminator loss", epoch, step)?;
        sum.g_adv += finite(l.g_adv, "generator loss", epoch, step)?;
        sum.c_real += finite(l.c_real, "classifier loss", epoch, step)?;
        sum.c_fake += finite(l.c_fake, "classifier loss", epoch, step)?;
        sum.weight += l.weight;
    }
    let n = steps as f64;
    state.history.push(EpochLosses {
        epoch,
        loss_d: sum.d / n,
        loss_g_adv: sum.g_adv / n,
        loss_c_real: sum.c_real / n,
        loss_c_fake: sum.c_fake / n,
        mean_weight: sum.weight / n,
    });
    state.epoch = epoch;
    Ok(())
}

/// Full triplet training on a standardized training set.
pub fn train(ds: &Dataset, cfg: &TrainConfig) -> Result<TripletState> {
    cfg.validate()?;
    let priors = compute_priors(ds)?;
    let mut state = TripletState::new(ds, cfg)?;
    for _ in 0..cfg.epochs {
        train_epoch(&mut state, ds, &priors, cfg)?;
    }
    Ok(state)
}

// ---------------------------------------------------------------- classifier-only

/// Loss used when training the classifier alone.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierObjective {
    CrossEntropy,
    ClassWeighted(ClassPriors),
}

/// A classifier trained without the generator/discriminator pair.
#[derive(Debug, Clone)]
pub struct ClassifierRun {
    pub classifier: ClassifierNet,
    /// Mean loss per epoch.
    pub history: Vec<f64>,
}

/// Shuffled mini-batch training of the classifier alone, `ceil(N/n_mb)`
/// Adam steps per epoch.
pub fn train_classifier(ds: &Dataset, cfg: &TrainConfig, objective: &ClassifierObjective) -> Result<ClassifierRun> {
    cfg.validate()?;
    let mut rng = seeded(cfg.seed);
    let mut classifier = build_classifier(
        &cfg.nets,
        ds.channels,
        ds.length,
        ds.meta_dim,
        ds.class_count(),
        &mut rng,
    )?;
    let mut adam = AdamState::new(&classifier.params, cfg.adam);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut steps = 0;
        for (s, chunk) in order.chunks(cfg.n_mb).enumerate() {
            let x = gather_flat(ds, chunk);
            let labels: Vec<usize> = chunk.iter().map(|&i| ds.samples[i].label).collect();
            let mut tape = Tape::new();
            let cv = classifier.bind(&mut tape, true);
            let xv = tape.constant(x);
            let probs = classifier.forward(&mut tape, &cv, xv)?;
            let loss = match objective {
                ClassifierObjective::CrossEntropy => weighted_nll(&mut tape, probs, &labels, &vec![1.0; labels.len()])?,
                ClassifierObjective::ClassWeighted(p) => class_weighted_loss(&mut tape, probs, &labels, p)?,
            };
            total += finite(tape.value(loss).item(), "classifier loss", epoch, s + 1)?;
            let grads = tape.backward(loss)?.wrt(&cv);
            adam.update(&mut classifier.params, &grads)
                .map_err(|e| locate(e, epoch, s + 1))?;
            steps += 1;
        }
        history.push(total / steps as f64);
    }
    Ok(ClassifierRun { classifier, history })
}

// ---------------------------------------------------------------- evaluation

/// Class probabilities for every sample of `ds`, evaluated in chunks.
pub fn predict(classifier: &ClassifierNet, ds: &Dataset) -> Result<Vec<Vec<f64>>> {
    let idx: Vec<usize> = (0..ds.len()).collect();
    let mut out = Vec::with_capacity(ds.len());
    for chunk in idx.chunks(256) {
        let p = classifier.predict_proba(&gather_flat(ds, chunk))?;
        out.extend(p.rows().map(<[f64]>::to_vec));
    }
    Ok(out)
}

/// Argmax predictions scored with macro metrics.
pub fn evaluate(classifier: &ClassifierNet, ds: &Dataset) -> Result<MetricsReport> {
    if ds.is_empty() {
        return Err(Error::invalid("empty test set"));
    }
    let probs = predict(classifier, ds)?;
    MetricsReport::from_probabilities(&probs, &ds.labels(), ds.class_count())
}

// ---------------------------------------------------------------- gradient check

/// Worst relative gradient error of each network's own loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripletGradCheck {
    pub discriminator: f64,
    pub classifier: f64,
    pub generator: f64,
}

impl TripletGradCheck {
    pub fn max(&self) -> f64 {
        self.discriminator.max(self.classifier).max(self.generator)
    }
}

/// Checks the three composed losses against central differences on a tiny
/// instance (`k = 2`, `m = 8`, two classes, `n_mb = 4`) whose parameters
/// and data are drawn from `seed`.
pub fn triplet_gradcheck(seed: u64, eps: f64) -> Result<TripletGradCheck> {
    let (k, m, classes, n_mb) = (2, 8, 2, 4);
    let cfg = TrainConfig {
        p_miss: 0.5,
        n_mb,
        nets: NetSpec::tiny(),
        seed,
        ..TrainConfig::default()
    };
    let mut rng = seeded(seed ^ 0x9e37_79b9_7f4a_7c15);
    let flat = k * m;
    let mut state = {
        let spec = crate::dataio::SyntheticSpec::two_class_ar(k, m, [3, 3]);
        let ds = crate::dataio::generate_synthetic(&spec, &mut rng)?;
        TripletState::new(&ds, &cfg)?
    };
    let x_real = balance::noise(&[n_mb, flat], &mut rng);
    let x_pool = balance::noise(&[n_mb, flat], &mut rng);
    let mut indicator = draw_mask(&[n_mb, flat], cfg.p_miss, &mut rng)?.indicator;
    // keep at least one masked component so the adversarial term exists
    indicator.data_mut()[0] = 1.0;
    let z = balance::noise(&[n_mb, flat], &mut rng);
    let x_mask = apply_mask(
        &x_pool,
        &crate::balance::Mask {
            indicator: indicator.clone(),
        },
        &z,
    )?;
    let real_labels = vec![0, 1, 1, 0];
    let mask_labels = vec![1, 0, 1, 1];
    let b = StepBatch {
        x_real,
        real_labels,
        x_mask,
        indicator,
        mask_labels,
    };
    let oh_real = one_hot(&b.real_labels, classes);
    let oh_fake = one_hot(&b.mask_labels, classes);
    let x_fake = synthesize_values(&state, &b, &cfg)?;
    let w_d = batch_weights(
        &state.discriminator.scores(&x_fake, &b.mask_labels)?,
        &b.indicator,
        cfg.p_miss,
        cfg.weighting,
        cfg.weight_cap,
    );

    let disc = state.discriminator.clone();
    let d_err = grad_check(&disc.mlp.params, eps, |tape, dv| {
        let xr = tape.constant(b.x_real.clone());
        let xf = tape.constant(x_fake.clone());
        let ohr = tape.constant(oh_real.clone());
        let ohf = tape.constant(oh_fake.clone());
        let d_real = disc.forward(tape, dv, xr, ohr)?;
        let d_fake = disc.forward(tape, dv, xf, ohf)?;
        discriminator_loss(tape, d_real, d_fake, &b.indicator)
    })?;

    let clf = state.classifier.clone();
    let c_err = grad_check(&clf.params, eps, |tape, cv| {
        let xr = tape.constant(b.x_real.clone());
        let xf = tape.constant(x_fake.clone());
        let c_real = clf.forward(tape, cv, xr)?;
        let c_fake = clf.forward(tape, cv, xf)?;
        Ok(classifier_loss_terms(tape, c_real, &b.real_labels, c_fake, &b.mask_labels, &w_d, cfg.alpha)?.total)
    })?;

    let g_params = state.generator.mlp.params.clone();
    let g_err = {
        let st = &mut state;
        let frozen = st.clone();
        grad_check(&g_params, eps, |tape, gv| {
            let dv = frozen.discriminator.bind(tape, false);
            let cv = frozen.classifier.bind(tape, false);
            Ok(generator_loss(&frozen, tape, gv, &dv, &cv, &b, &oh_fake, &w_d, cfg.alpha)?.0)
        })?
    };

    Ok(TripletGradCheck {
        discriminator: d_err,
        classifier: c_err,
        generator: g_err,
    })
}
