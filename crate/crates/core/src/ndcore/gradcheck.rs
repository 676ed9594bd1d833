use rand_distr::{Distribution, StandardNormal};

use super::array::Array;
use super::tape::{Activation, Tape, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Compares reverse-mode gradients of `loss` against central differences.
///
/// `loss` rebuilds the computation on a fresh tape from the parameter
/// handles it is given. Returns the maximum over every parameter entry of
/// `|analytic − numeric| / max(1, |analytic|)`.
pub fn grad_check<F>(params: &[Array], eps: f64, loss: F) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if !(eps > 0.0 && eps <= 1e-2) {
        return Err(Error::invalid(format!("epsilon {eps} outside (0, 1e-2]")));
    }
    let analytic = {
        let mut tape = Tape::new();
        let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
        let l = loss(&mut tape, &vars)?;
        tape.backward(l)?.wrt(&vars)
    };

    let eval = |ps: &[Array]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.constant(p.clone())).collect();
        let l = loss(&mut tape, &vars)?;
        Ok(tape.value(l).item())
    };

    let mut work = params.to_vec();
    let mut worst = 0.0f64;
    for (pi, grad) in analytic.iter().enumerate() {
        for j in 0..grad.len() {
            let orig = work[pi].data()[j];
            work[pi].data_mut()[j] = orig + eps;
            let up = eval(&work)?;
            work[pi].data_mut()[j] = orig - eps;
            let down = eval(&work)?;
            work[pi].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = grad.data()[j];
            worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
        }
    }
    Ok(worst)
}

/// Worst gradient error of each primitive layer kind on random inputs.
pub fn layer_checks(rng: &mut Rng, eps: f64) -> Result<Vec<(&'static str, f64)>> {
    let mut normal = |shape: &[usize]| {
        let mut a = Array::zeros(shape);
        for v in a.data_mut() {
            *v = StandardNormal.sample(&mut *rng);
        }
        a
    };
    let x = normal(&[3, 4]);
    let dense = [normal(&[4, 5]), normal(&[5])];
    let xc = normal(&[2, 3, 9]);
    let conv = [normal(&[4, 3, 3]), normal(&[4])];
    let mut out = Vec::new();
    for (name, act) in [
        ("dense + relu", Activation::Relu),
        ("dense + leaky relu", Activation::LeakyRelu),
        ("dense + sigmoid", Activation::Sigmoid),
        ("dense + tanh", Activation::Tanh),
        ("dense + softmax", Activation::SoftmaxRows),
    ] {
        let err = grad_check(&dense, eps, |t, v| {
            let xv = t.constant(x.clone());
            let h = t.affine(xv, v[0], v[1])?;
            let a = t.activation(h, act)?;
            // weight outputs unevenly so softmax rows do not sum to a constant
            let sq = t.mul(a, a)?;
            t.sum(sq)
        })?;
        out.push((name, err));
    }
    for (name, stride, padding) in [("conv + sigmoid", 1, 0), ("conv strided + padded", 2, 1)] {
        let err = grad_check(&conv, eps, |t, v| {
            let xv = t.constant(xc.clone());
            let h = t.conv1d(xv, v[0], v[1], stride, padding)?;
            let a = t.activation(h, Activation::Sigmoid)?;
            let m = t.mean_time(a)?;
            let sq = t.mul(m, m)?;
            t.sum(sq)
        })?;
        out.push((name, err));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_layer_kind_passes() {
        for (name, err) in layer_checks(&mut crate::rng::seeded(3), 1e-6).unwrap() {
            assert!(err < 1e-5, "{name}: {err}");
        }
    }

    #[test]
    fn quadratic_is_exact() {
        let p = vec![Array::from_vec(vec![0.3, -1.2, 2.5])];
        let err = grad_check(&p, 1e-5, |t, v| {
            let sq = t.mul(v[0], v[0])?;
            t.sum(sq)
        })
        .unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn rejects_bad_epsilon() {
        let p = vec![Array::from_vec(vec![1.0])];
        assert!(grad_check(&p, 0.0, |t, v| t.sum(v[0])).is_err());
        assert!(grad_check(&p, 0.1, |t, v| t.sum(v[0])).is_err());
    }
}
