use serde::{Deserialize, Serialize};

use super::params::{Gradients, Params};
use super::NnError;

/// Clips `grads` to global norm `clip`, then applies `p -= lr * g`. Returns
/// the pre-clipping norm.
pub fn sgd_step(params: &mut Params, grads: &Gradients, lr: f64, clip: f64) -> Result<f64, NnError> {
    for id in params.ids() {
        if grads.get(id).iter().any(|g| !g.is_finite()) {
            return Err(NnError::NonFinite {
                param: params.name(id).to_string(),
            });
        }
    }
    let norm = grads.norm();
    let scale = if clip > 0.0 && norm > clip { clip / norm } else { 1.0 };
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let g = grads.get(id);
        for (p, g) in params.get_mut(id).data.iter_mut().zip(g) {
            *p -= lr * scale * g;
        }
    }
    Ok(norm)
}

/// Constant rate for `decay_after` epochs, then multiplied by `decay` each epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDecay {
    pub lr: f64,
    pub decay: f64,
    pub decay_after: usize,
}

impl StepDecay {
    pub fn rate(&self, epoch: usize) -> f64 {
        let k = epoch.saturating_sub(self.decay_after);
        self.lr * self.decay.powi(k as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::Tensor;

    fn scalar(v: f64) -> Params {
        let mut p = Params::new();
        p.add("p", Tensor { rows: 1, cols: 1, data: vec![v] });
        p
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = scalar(0.3);
        let g = Gradients::zeros_like(&p);
        sgd_step(&mut p, &g, 1.0, 5.0).unwrap();
        assert_eq!(p, scalar(0.3));
    }

    #[test]
    fn quadratic_step() {
        // loss p^2 at p = 1 has gradient 2
        let mut p = scalar(1.0);
        let mut g = Gradients::zeros_like(&p);
        g.bufs[0][0] = 2.0;
        sgd_step(&mut p, &g, 0.1, 5.0).unwrap();
        assert!((p.get(crate::nn::ParamId(0)).data[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn clipping_halves_norm_ten() {
        let mut p = Params::new();
        p.add("v", Tensor::zeros(2, 1));
        let mut g = Gradients::zeros_like(&p);
        g.bufs[0] = vec![6.0, 8.0];
        let norm = sgd_step(&mut p, &g, 1.0, 5.0).unwrap();
        assert_eq!(norm, 10.0);
        assert_eq!(p.get(crate::nn::ParamId(0)).data, vec![-3.0, -4.0]);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut p = scalar(0.0);
        p.add("w2", Tensor::zeros(1, 2));
        let mut g = Gradients::zeros_like(&p);
        g.bufs[1][1] = f64::NAN;
        let err = sgd_step(&mut p, &g, 0.1, 5.0).unwrap_err();
        assert!(err.to_string().contains("w2"));
    }

    #[test]
    fn step_decay_schedule() {
        let s = StepDecay { lr: 1.0, decay: 0.5, decay_after: 2 };
        let rates: Vec<f64> = (0..5).map(|e| s.rate(e)).collect();
        assert_eq!(rates, vec![1.0, 1.0, 1.0, 0.5, 0.25]);
    }
}
