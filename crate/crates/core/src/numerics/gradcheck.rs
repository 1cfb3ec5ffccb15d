use rand::seq::index;

use crate::error::Result;
use crate::rng::seeded;

use super::Parameterized;

/// Outcome of comparing analytic gradients with central differences.
#[derive(Debug, Clone)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub coords_checked: usize,
    /// Block name and flat index of the coordinate with the largest relative error.
    pub worst: Option<(String, usize)>,
}

/// Gradient magnitudes below this are compared in absolute terms.
const REL_FLOOR: f64 = 1e-6;

/// Checks analytic gradients of `objective` against central differences.
///
/// `objective(model, true)` must return the loss and accumulate gradients into
/// the model's store; `objective(model, false)` returns the loss only. At most
/// `max_coords` trainable coordinates are probed (all of them when fewer
/// exist), drawn without replacement with the given seed.
pub fn finite_difference_check<M, F>(
    model: &mut M,
    h: f64,
    max_coords: usize,
    seed: u64,
    mut objective: F,
) -> Result<GradCheck>
where
    M: Parameterized,
    F: FnMut(&mut M, bool) -> Result<f64>,
{
    model.params_mut().zero_grad();
    objective(model, true)?;

    let mut coords = Vec::new();
    for (b, block) in model.params().blocks().iter().enumerate() {
        if block.trainable {
            coords.extend((0..block.len()).map(|i| (b, i)));
        }
    }
    let picked: Vec<usize> = if coords.len() <= max_coords {
        (0..coords.len()).collect()
    } else {
        let mut rng = seeded(seed);
        let mut v = index::sample(&mut rng, coords.len(), max_coords).into_vec();
        v.sort_unstable();
        v
    };

    let analytic: Vec<f64> = picked
        .iter()
        .map(|&k| {
            let (b, i) = coords[k];
            model.params().blocks()[b].grad[i]
        })
        .collect();

    let mut report = GradCheck { max_rel_error: 0.0, max_abs_error: 0.0, coords_checked: picked.len(), worst: None };
    for (&k, &a) in picked.iter().zip(&analytic) {
        let (b, i) = coords[k];
        let orig = model.params().blocks()[b].value[i];
        model.params_mut().blocks_mut()[b].value[i] = orig + h;
        let fp = objective(model, false)?;
        model.params_mut().blocks_mut()[b].value[i] = orig - h;
        let fm = objective(model, false)?;
        model.params_mut().blocks_mut()[b].value[i] = orig;

        let numeric = (fp - fm) / (2.0 * h);
        let abs = (a - numeric).abs();
        let rel = abs / a.abs().max(numeric.abs()).max(REL_FLOOR);
        report.max_abs_error = report.max_abs_error.max(abs);
        if report.worst.is_none() || rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst = Some((model.params().blocks()[b].name.clone(), i));
        }
    }
    model.params_mut().zero_grad();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Dense, ParamStore, Tensor2};
    use crate::numerics::layers::Init;
    use rand::Rng;

    #[test]
    fn linear_model_is_exact() {
        let mut store = ParamStore::new();
        let mut rng = seeded(1);
        let layer = Dense::new(&mut store, "fc", 4, 2, Init::KaimingUniform, &mut rng);
        let x = Tensor2::from_fn(10, 4, |_, _| rng.random_range(-1.0..1.0));
        let t = Tensor2::from_fn(10, 2, |_, _| rng.random_range(-1.0..1.0));
        let n = 20.0;
        let report = finite_difference_check(&mut store, 1e-5, 1000, 0, |s: &mut ParamStore, grad| {
            let y = layer.forward(s, &x)?;
            let d = Tensor2::from_fn(10, 2, |i, j| y.get(i, j) - t.get(i, j));
            let loss = d.data().iter().map(|v| v * v).sum::<f64>() / n;
            if grad {
                layer.backward(s, &x, &d.scale(2.0 / n), false)?;
            }
            Ok(loss)
        })
        .unwrap();
        assert_eq!(report.coords_checked, 10);
        assert!(report.max_rel_error < 1e-8, "{report:?}");
    }
}
