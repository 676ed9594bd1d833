//! Generator, discriminator and classifier.
//!
//! All three keep their parameters as a flat list of [`Array`]s and build
//! their forward pass on a caller-supplied [`Tape`]. Binding parameters
//! with `trainable = false` records them as constants, which is how the
//! trainer freezes two nets while stepping the third.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndcore::{Activation, Array, Tape, Var};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpSpec {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for MlpSpec {
    fn default() -> Self {
        MlpSpec {
            hidden: vec![256, 256],
            activation: Activation::LeakyRelu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvSpec {
    pub channels: usize,
    /// Filter length; `None` means `min(k, m)` (the number of input series).
    #[serde(default)]
    pub kernel: Option<usize>,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub padding: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CnnSpec {
    pub conv: Vec<ConvSpec>,
    pub dense_hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for CnnSpec {
    fn default() -> Self {
        CnnSpec {
            conv: vec![
                ConvSpec {
                    channels: 32,
                    kernel: None,
                    stride: 1,
                    padding: 0,
                },
                ConvSpec {
                    channels: 32,
                    kernel: Some(3),
                    stride: 1,
                    padding: 0,
                },
            ],
            dense_hidden: vec![64],
            activation: Activation::LeakyRelu,
        }
    }
}

/// Architecture of the whole triplet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetSpec {
    pub generator: MlpSpec,
    pub discriminator: MlpSpec,
    pub classifier: CnnSpec,
    /// Generator outputs are `scale·tanh(·)`.
    pub generator_scale: f64,
    /// Std-dev of Gaussian initial weights; `None` uses Glorot-uniform.
    pub init_scale: Option<f64>,
}

impl Default for NetSpec {
    fn default() -> Self {
        NetSpec {
            generator: MlpSpec::default(),
            discriminator: MlpSpec::default(),
            classifier: CnnSpec::default(),
            generator_scale: 3.0,
            init_scale: None,
        }
    }
}

impl NetSpec {
    /// Narrow layers for gradient checks and fast tests.
    pub fn tiny() -> Self {
        let mlp = MlpSpec {
            hidden: vec![6, 5],
            activation: Activation::LeakyRelu,
        };
        NetSpec {
            generator: mlp.clone(),
            discriminator: mlp,
            classifier: CnnSpec {
                conv: vec![
                    ConvSpec {
                        channels: 3,
                        kernel: None,
                        stride: 1,
                        padding: 0,
                    },
                    ConvSpec {
                        channels: 3,
                        kernel: Some(3),
                        stride: 1,
                        padding: 0,
                    },
                ],
                dense_hidden: vec![4],
                activation: Activation::LeakyRelu,
            },
            generator_scale: 3.0,
            init_scale: None,
        }
    }
}

fn init_weights(shape: &[usize], fan_in: usize, fan_out: usize, scale: Option<f64>, rng: &mut Rng) -> Array {
    let mut a = Array::zeros(shape);
    match scale {
        Some(sd) => {
            let normal = Normal::new(0.0, sd).expect("finite init scale");
            for v in a.data_mut() {
                *v = normal.sample(rng);
            }
        }
        None => {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in a.data_mut() {
                *v = rng.random_range(-limit..limit);
            }
        }
    }
    a
}

fn bind(tape: &mut Tape, params: &[Array], trainable: bool) -> Vec<Var> {
    params
        .iter()
        .map(|p| {
            if trainable {
                tape.param(p.clone())
            } else {
                tape.constant(p.clone())
            }
        })
        .collect()
}

/// Rows of one-hot label encodings.
pub fn one_hot(labels: &[usize], classes: usize) -> Array {
    let mut a = Array::zeros(&[labels.len().max(1), classes]);
    for (i, &y) in labels.iter().enumerate() {
        a.data_mut()[i * classes + y] = 1.0;
    }
    a
}

/// Dense stack; the last layer has no activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    activation: Activation,
    pub params: Vec<Array>,
}

impl Mlp {
    pub fn new(input: usize, spec: &MlpSpec, output: usize, init: Option<f64>, rng: &mut Rng) -> Result<Self> {
        let mut widths = vec![input];
        widths.extend(&spec.hidden);
        widths.push(output);
        if widths.contains(&0) {
            return Err(Error::invalid(format!("zero-width dense layer in {widths:?}")));
        }
        let mut params = Vec::new();
        for pair in widths.windows(2) {
            params.push(init_weights(&[pair[0], pair[1]], pair[0], pair[1], init, rng));
            params.push(Array::zeros(&[pair[1]]));
        }
        Ok(Mlp {
            widths,
            activation: spec.activation,
            params,
        })
    }

    pub fn forward(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Result<Var> {
        let layers = self.widths.len() - 1;
        let mut h = x;
        for l in 0..layers {
            h = tape.affine(h, vars[2 * l], vars[2 * l + 1])?;
            if l + 1 < layers {
                h = tape.activation(h, self.activation)?;
            }
        }
        Ok(h)
    }
}

/// Conditional imputer: `(x_mask, I, onehot(y′)) ↦ x̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorNet {
    pub mlp: Mlp,
    pub flat_dim: usize,
    pub classes: usize,
    pub scale: f64,
}

impl GeneratorNet {
    /// Imputation `x̂ = scale·tanh(mlp([x_mask, I, onehot]))`.
    pub fn impute(&self, tape: &mut Tape, vars: &[Var], x_mask: Var, mask: Var, onehot: Var) -> Result<Var> {
        let input = tape.concat_cols(&[x_mask, mask, onehot])?;
        let h = self.mlp.forward(tape, vars, input)?;
        let t = tape.activation(h, Activation::Tanh)?;
        tape.scale_shift(t, self.scale, 0.0)
    }

    /// Synthetic sample `x′`: observed components of `x_mask` untouched,
    /// masked components taken from the imputation.
    pub fn synthesize(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        x_mask: Var,
        indicator: &Array,
        onehot: Var,
    ) -> Result<Var> {
        let mask = tape.constant(indicator.clone());
        let x_hat = self.impute(tape, vars, x_mask, mask, onehot)?;
        tape.select(indicator, x_mask, x_hat)
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        bind(tape, &self.mlp.params, trainable)
    }
}

/// Per-component probability that a value is real.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorNet {
    pub mlp: Mlp,
    pub flat_dim: usize,
    pub classes: usize,
}

impl DiscriminatorNet {
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], x: Var, onehot: Var) -> Result<Var> {
        let input = tape.concat_cols(&[x, onehot])?;
        let h = self.mlp.forward(tape, vars, input)?;
        tape.activation(h, Activation::Sigmoid)
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        bind(tape, &self.mlp.params, trainable)
    }

    /// Component scores for a batch, off-tape.
    pub fn scores(&self, x: &Array, labels: &[usize]) -> Result<Array> {
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape, false);
        let xv = tape.constant(x.clone());
        let oh = tape.constant(one_hot(labels, self.classes));
        let out = self.forward(&mut tape, &vars, xv, oh)?;
        Ok(tape.value(out).clone())
    }
}

/// Sample-level score `d(x)`: the mean component score of each row.
pub fn sample_scores(component_scores: &Array) -> Vec<f64> {
    component_scores
        .rows()
        .map(|r| r.iter().sum::<f64>() / r.len() as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ConvLayer {
    stride: usize,
    padding: usize,
}

/// Conv-1D stack → time average → (metadata) → dense → softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierNet {
    convs: Vec<ConvLayer>,
    // layout only; live weights are the tail of `params`
    dense: Mlp,
    activation: Activation,
    pub channels: usize,
    pub length: usize,
    pub meta_dim: usize,
    pub classes: usize,
    pub params: Vec<Array>,
}

impl ClassifierNet {
    pub fn flat_dim(&self) -> usize {
        self.channels * self.length + self.meta_dim
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        bind(tape, &self.params, trainable)
    }

    /// Class probabilities for flattened inputs `x[n × flat_dim]`.
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Result<Var> {
        let n = tape.value(x).shape()[0];
        let series_len = self.channels * self.length;
        let series = if self.meta_dim == 0 {
            x
        } else {
            tape.slice_cols(x, 0, series_len)?
        };
        let mut h = tape.reshape(series, vec![n, self.channels, self.length])?;
        for (l, c) in self.convs.iter().enumerate() {
            h = tape.conv1d(h, vars[2 * l], vars[2 * l + 1], c.stride, c.padding)?;
            h = tape.activation(h, self.activation)?;
        }
        let mut feat = tape.mean_time(h)?;
        if self.meta_dim > 0 {
            let meta = tape.slice_cols(x, series_len, series_len + self.meta_dim)?;
            feat = tape.concat_cols(&[feat, meta])?;
        }
        let logits = self.dense.forward(tape, &vars[2 * self.convs.len()..], feat)?;
        tape.activation(logits, Activation::SoftmaxRows)
    }

    /// Probabilities for a batch, off-tape.
    pub fn predict_proba(&self, x: &Array) -> Result<Array> {
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape, false);
        let xv = tape.constant(x.clone());
        let out = self.forward(&mut tape, &vars, xv)?;
        Ok(tape.value(out).clone())
    }
}

pub fn build_classifier(
    spec: &NetSpec,
    channels: usize,
    length: usize,
    meta_dim: usize,
    classes: usize,
    rng: &mut Rng,
) -> Result<ClassifierNet> {
    if channels == 0 || length == 0 || classes == 0 {
        return Err(Error::invalid("classifier needs channels, length and classes"));
    }
    let cnn = &spec.classifier;
    let mut convs = Vec::new();
    let mut params = Vec::new();
    let (mut c_in, mut len) = (channels, length);
    for (l, c) in cnn.conv.iter().enumerate() {
        let kernel = c.kernel.unwrap_or(channels.min(length));
        let padded = len + 2 * c.padding;
        if c.channels == 0 || kernel == 0 || c.stride == 0 || kernel > padded {
            return Err(Error::invalid(format!(
                "conv layer {l}: {} channels, kernel {kernel}, stride {} on length {len} (+{} padding)",
                c.channels, c.stride, c.padding
            )));
        }
        params.push(init_weights(
            &[c.channels, c_in, kernel],
            c_in * kernel,
            c.channels * kernel,
            spec.init_scale,
            rng,
        ));
        params.push(Array::zeros(&[c.channels]));
        convs.push(ConvLayer {
            stride: c.stride,
            padding: c.padding,
        });
        len = (padded - kernel) / c.stride + 1;
        c_in = c.channels;
    }
    let dense_spec = MlpSpec {
        hidden: cnn.dense_hidden.clone(),
        activation: cnn.activation,
    };
    let dense = Mlp::new(c_in + meta_dim, &dense_spec, classes, spec.init_scale, rng)?;
    params.extend(dense.params.iter().cloned());
    Ok(ClassifierNet {
        convs,
        dense,
        activation: cnn.activation,
        channels,
        length,
        meta_dim,
        classes,
        params,
    })
}

pub fn build_generator(spec: &NetSpec, flat_dim: usize, classes: usize, rng: &mut Rng) -> Result<GeneratorNet> {
    if !(spec.generator_scale > 0.0) {
        return Err(Error::invalid("generator scale must be positive"));
    }
    Ok(GeneratorNet {
        mlp: Mlp::new(2 * flat_dim + classes, &spec.generator, flat_dim, spec.init_scale, rng)?,
        flat_dim,
        classes,
        scale: spec.generator_scale,
    })
}

pub fn build_discriminator(spec: &NetSpec, flat_dim: usize, classes: usize, rng: &mut Rng) -> Result<DiscriminatorNet> {
    Ok(DiscriminatorNet {
        mlp: Mlp::new(flat_dim + classes, &spec.discriminator, flat_dim, spec.init_scale, rng)?,
        flat_dim,
        classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balance::{draw_mask, noise};
    use crate::rng::seeded;

    #[test]
    fn classifier_rows_are_distributions() {
        let mut rng = seeded(0);
        let c = build_classifier(&NetSpec::default(), 3, 50, 0, 4, &mut rng).unwrap();
        let x = noise(&[5, 150], &mut rng);
        let p = c.predict_proba(&x).unwrap();
        assert_eq!(p.shape(), &[5, 4]);
        for row in p.rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(p, c.predict_proba(&x).unwrap());
    }

    #[test]
    fn small_init_classifier_is_near_uniform() {
        let mut rng = seeded(1);
        let spec = NetSpec {
            init_scale: Some(0.01),
            ..NetSpec::default()
        };
        let c = build_classifier(&spec, 3, 50, 0, 4, &mut rng).unwrap();
        let p = c.predict_proba(&noise(&[20, 150], &mut rng)).unwrap();
        assert!(p.data().iter().all(|v| (v - 0.25).abs() < 0.2));
    }

    #[test]
    fn classifier_uses_metadata() {
        let mut rng = seeded(2);
        let c = build_classifier(&NetSpec::tiny(), 2, 8, 3, 2, &mut rng).unwrap();
        let x = noise(&[4, 19], &mut rng);
        let mut y = x.clone();
        y.data_mut()[17] += 5.0;
        assert_ne!(c.predict_proba(&x).unwrap(), c.predict_proba(&y).unwrap());
    }

    #[test]
    fn classifier_rejects_impossible_convs() {
        let mut spec = NetSpec::default();
        spec.classifier.conv[1].kernel = Some(100);
        assert!(build_classifier(&spec, 3, 10, 0, 2, &mut seeded(0)).is_err());
    }

    fn run_generator(indicator: &Array) -> (Array, Array) {
        let mut rng = seeded(4);
        let g = build_generator(&NetSpec::tiny(), 6, 2, &mut rng).unwrap();
        let x_mask = noise(&[3, 6], &mut rng);
        let mut tape = Tape::new();
        let vars = g.bind(&mut tape, true);
        let xm = tape.constant(x_mask.clone());
        let oh = tape.constant(one_hot(&[0, 1, 1], 2));
        let out = g.synthesize(&mut tape, &vars, xm, indicator, oh).unwrap();
        (x_mask, tape.value(out).clone())
    }

    #[test]
    fn generator_passes_observed_values_through() {
        let (x_mask, out) = run_generator(&Array::zeros(&[3, 6]));
        assert_eq!(
            out.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            x_mask.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        let m = draw_mask(&[3, 6], 0.5, &mut seeded(8)).unwrap();
        let (x_mask, out) = run_generator(&m.indicator);
        for ((o, x), i) in out.data().iter().zip(x_mask.data()).zip(m.indicator.data()) {
            if *i == 0.0 {
                assert_eq!(o.to_bits(), x.to_bits());
            } else {
                assert!(o.abs() <= 3.0);
            }
        }
    }

    #[test]
    fn fully_masked_output_is_generated_and_bounded() {
        let (x_mask, out) = run_generator(&Array::full(&[3, 6], 1.0));
        assert!(out.data().iter().zip(x_mask.data()).all(|(o, x)| o != x));
        assert!(out.data().iter().all(|v| v.abs() <= 3.0));
    }

    #[test]
    fn discriminator_scores_are_probabilities() {
        let mut rng = seeded(5);
        let d = build_discriminator(&NetSpec::default(), 10, 3, &mut rng).unwrap();
        let x = noise(&[7, 10], &mut rng);
        let s = d.scores(&x, &[0, 1, 2, 0, 1, 2, 0]).unwrap();
        assert!(s.data().iter().all(|&v| v > 0.0 && v < 1.0));
        assert!(sample_scores(&s).iter().all(|&v| v > 0.0 && v < 1.0));
        assert_eq!(s, d.scores(&x, &[0, 1, 2, 0, 1, 2, 0]).unwrap());
    }
}
