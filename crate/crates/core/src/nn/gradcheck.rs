use rand::rngs::SmallRng;
use rand::seq::index::sample;
use rand::SeedableRng;

use super::params::{Gradients, Params};

/// Magnitudes below this are compared absolutely rather than relatively, so
/// that coordinates with near-zero gradient do not amplify rounding noise.
pub const RELATIVE_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Worst relative error per parameter tensor, in parameter order.
    pub per_param: Vec<(String, f64)>,
}

impl GradCheckReport {
    pub fn max_error(&self) -> f64 {
        self.per_param.iter().map(|(_, e)| *e).fold(0.0, f64::max)
    }

    pub fn error_of(&self, name: &str) -> Option<f64> {
        self.per_param.iter().find(|(n, _)| n == name).map(|(_, e)| *e)
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares `analytic` to central differences `(L(p+eps) - L(p-eps)) / 2eps`
/// on up to `samples` coordinates of every tensor (all of them when the
/// tensor is smaller).
pub fn grad_check<F>(params: &Params, analytic: &Gradients, mut loss: F, eps: f64, samples: usize, seed: u64) -> GradCheckReport
where
    F: FnMut(&Params) -> f64,
{
    assert!(eps > 0.0);
    let mut rng = SmallRng::seed_from_u64(seed);
    let mut probe = params.clone();
    let mut per_param = Vec::with_capacity(params.len());
    for id in params.ids() {
        let n = params.get(id).data.len();
        let coords: Vec<usize> = if n <= samples {
            (0..n).collect()
        } else {
            let mut v = sample(&mut rng, n, samples).into_vec();
            v.sort_unstable();
            v
        };
        let mut worst: f64 = 0.0;
        for k in coords {
            let orig = params.get(id).data[k];
            probe.get_mut(id).data[k] = orig + eps;
            let up = loss(&probe);
            probe.get_mut(id).data[k] = orig - eps;
            let down = loss(&probe);
            probe.get_mut(id).data[k] = orig;
            let numeric = (up - down) / (2.0 * eps);
            worst = worst.max(relative_error(analytic.get(id)[k], numeric));
        }
        per_param.push((params.name(id).to_string(), worst));
    }
    GradCheckReport { per_param }
}
