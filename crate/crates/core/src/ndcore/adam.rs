use serde::{Deserialize, Serialize};

use super::array::Array;
use crate::error::{Error, Result};

/// Optimizer hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam moments for one parameter set.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<Array>,
    v: Vec<Array>,
    t: u64,
}

impl AdamState {
    pub fn new(params: &[Array], config: AdamConfig) -> Self {
        let zeros = || params.iter().map(|p| Array::zeros(p.shape())).collect();
        AdamState {
            config,
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One update of `params` in place. A non-finite gradient aborts
    /// before anything is modified.
    pub fn update(&mut self, params: &mut [Array], grads: &[Array]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(Error::shape(
                "adam_update",
                format!(
                    "{} params, {} grads, {} accumulators",
                    params.len(),
                    grads.len(),
                    self.m.len()
                ),
            ));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.m[i].shape() {
                return Err(Error::shape(
                    "adam_update",
                    format!("param {i}: {:?} vs grad {:?}", p.shape(), g.shape()),
                ));
            }
            if !g.is_finite() {
                return Err(Error::NonFinite {
                    what: "gradient".into(),
                    location: format!("parameter tensor {i} at optimizer step {}", self.t + 1),
                });
            }
        }

        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let it = p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
            for ((pi, &gi), (mi, vi)) in it {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *pi -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_and_counts_step() {
        let mut params = vec![Array::from_vec(vec![1.0, -2.0])];
        let mut st = AdamState::new(&params, AdamConfig::default());
        st.update(&mut params, &[Array::zeros(&[2])]).unwrap();
        assert_eq!(params[0].data(), &[1.0, -2.0]);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut params = vec![Array::from_vec(vec![0.0, 0.0, 0.0])];
        let mut st = AdamState::new(&params, AdamConfig::default());
        st.update(&mut params, &[Array::from_vec(vec![3.0, -0.01, 250.0])])
            .unwrap();
        for (p, sign) in params[0].data().iter().zip([-1.0, 1.0, -1.0]) {
            // |g|/(|g|+eps) differs from 1 by at most eps/|g|
            assert!((p - sign * 1e-3).abs() < 1e-9, "{p}");
        }
    }

    #[test]
    fn two_steps_reduce_quadratic() {
        // loss = (x-3)^2, grad = 2(x-3)
        let loss = |x: f64| (x - 3.0).powi(2);
        let mut params = vec![Array::from_vec(vec![0.0])];
        let mut st = AdamState::new(
            &params,
            AdamConfig {
                lr: 0.1,
                ..Default::default()
            },
        );
        let mut last = loss(0.0);
        for _ in 0..2 {
            let x = params[0].data()[0];
            st.update(&mut params, &[Array::from_vec(vec![2.0 * (x - 3.0)])])
                .unwrap();
            let now = loss(params[0].data()[0]);
            assert!(now < last);
            last = now;
        }
    }

    #[test]
    fn non_finite_gradient_aborts_untouched() {
        let mut params = vec![Array::from_vec(vec![1.0])];
        let mut st = AdamState::new(&params, AdamConfig::default());
        let err = st.update(&mut params, &[Array::from_vec(vec![f64::NAN])]);
        assert!(matches!(err, Err(Error::NonFinite { .. })));
        assert_eq!(params[0].data(), &[1.0]);
        assert_eq!(st.step_count(), 0);
    }
}
