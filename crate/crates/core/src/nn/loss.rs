use std::f64::consts::LN_2;

/// Natural-log softmax normalizer, max-shifted.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Softmax over the positions where `mask` is true; masked positions get 0.
pub fn masked_softmax(logits: &[f64], mask: Option<&[bool]>) -> Vec<f64> {
    let on = |k: usize| mask.is_none_or(|m| m[k]);
    let m = logits
        .iter()
        .enumerate()
        .filter(|(k, _)| on(*k))
        .map(|(_, x)| *x)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits
        .iter()
        .enumerate()
        .map(|(k, x)| if on(k) { (x - m).exp() } else { 0.0 })
        .collect();
    let z: f64 = out.iter().sum();
    for p in &mut out {
        *p /= z;
    }
    out
}

/// Base-2 log probabilities; masked positions are -inf.
pub fn log2_softmax(logits: &[f64], mask: Option<&[bool]>) -> Vec<f64> {
    let on = |k: usize| mask.is_none_or(|m| m[k]);
    let kept: Vec<f64> = logits
        .iter()
        .enumerate()
        .filter(|(k, _)| on(*k))
        .map(|(_, x)| *x)
        .collect();
    let lse = log_sum_exp(&kept);
    logits
        .iter()
        .enumerate()
        .map(|(k, x)| if on(k) { (x - lse) / LN_2 } else { f64::NEG_INFINITY })
        .collect()
}

/// Loss `-log2 softmax(logits)[target]` and its gradient with respect to the
/// logits, `(softmax - onehot) / ln 2`.
pub fn softmax_xent(logits: &[f64], target: usize) -> (f64, Vec<f64>) {
    assert!(target < logits.len(), "target {target} out of range {}", logits.len());
    let loss = (log_sum_exp(logits) - logits[target]) / LN_2;
    let mut grad = masked_softmax(logits, None);
    grad[target] -= 1.0;
    for g in &mut grad {
        *g /= LN_2;
    }
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn uniform_logits() {
        let (loss, _) = softmax_xent(&vec![0.3; 1000], 17);
        assert_relative_eq!(loss, 1000f64.log2(), epsilon = 1e-12);
        assert_relative_eq!(loss, 9.9658, epsilon = 1e-4);
    }

    #[test]
    fn dominant_target_has_vanishing_loss() {
        let (loss, grad) = softmax_xent(&[800.0, 0.0, -3.0], 0);
        assert!(loss.abs() < 1e-300);
        assert!(grad.iter().all(|g| g.abs() < 1e-300));
    }

    #[test]
    fn direct_formula_matches_log_sum_exp_path() {
        let logits = [1.0f64, 0.0, 0.0];
        let direct = -(1f64.exp() / (1f64.exp() + 2.0)).log2();
        let (loss, _) = softmax_xent(&logits, 0);
        assert!((loss - direct).abs() < 1e-12);
    }

    #[test]
    fn masking_renormalizes() {
        let lp = log2_softmax(&[0.0, 5.0, 0.0], Some(&[true, false, true]));
        assert_eq!(lp[1], f64::NEG_INFINITY);
        assert_relative_eq!(lp[0], -1.0, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(xs in prop::collection::vec(-50.0f64..50.0, 1..40)) {
            let s: f64 = masked_softmax(&xs, None).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
            let (_, grad) = softmax_xent(&xs, 0);
            prop_assert!(grad.iter().sum::<f64>().abs() < 1e-9);
        }
    }
}
