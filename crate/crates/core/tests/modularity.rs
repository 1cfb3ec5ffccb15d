//! Composition, truncation and level independence.

use pin_core::model::{PinConfig, PinModel, WeightProfile};
use pin_core::numerics::{Parameterized, Tensor2};
use pin_core::rng::seeded;
use rand::Rng;

fn probes(n: usize, d: usize, seed: u64) -> Tensor2 {
    let mut rng = seeded(seed);
    Tensor2::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0))
}

fn model(levels: usize) -> PinModel {
    let mut cfg = PinConfig::new(2, 3);
    cfg.levels = levels;
    cfg.arch.hidden = 24;
    cfg.num_features = 40;
    cfg.base_c = vec![0.3, 0.5, 0.7];
    cfg.seed = 11;
    PinModel::new(&cfg).unwrap()
}

fn bits(t: &Tensor2) -> Vec<u64> {
    t.data().iter().map(|v| v.to_bits()).collect()
}

#[test]
fn composites_follow_the_recurrence_bitwise() {
    let m = model(4);
    let x = probes(1000, 2, 1);
    let out = m.forward(&x).unwrap();
    let w = m.level_weights();
    let c = m.base_c();
    for l in 0..4 {
        let expect = Tensor2::from_fn(1000, 3, |i, j| {
            let mut s = c[j] + w[0] * out.residuals[0].get(i, j);
            for k in 1..=l {
                s += w[k] * out.residuals[k].get(i, j);
            }
            s
        });
        assert_eq!(bits(&out.composites[l]), bits(&expect), "level {}", l + 1);
    }
}

#[test]
fn harmonic_and_equal_weights() {
    assert_eq!(WeightProfile::Harmonic.weights(3).unwrap(), vec![1.0 / 3.0, 0.25, 0.2]);
    assert_eq!(WeightProfile::Equal.weights(4).unwrap(), vec![0.25; 4]);
}

#[test]
fn truncation_matches_partial_evaluation() {
    let m = model(4);
    let x = probes(1000, 2, 2);
    for cutoff in 1..=4 {
        let t = m.truncate(cutoff).unwrap();
        assert_eq!(t.num_levels(), cutoff);
        assert_eq!(bits(&t.predict(&x).unwrap()), bits(&m.forward_partial(&x, cutoff).unwrap()));
    }
    assert_eq!(bits(&m.truncate(4).unwrap().predict(&x).unwrap()), bits(&m.predict(&x).unwrap()));
}

#[test]
fn truncated_parameter_count() {
    let m = model(3);
    let head: usize = m.head().num_params() + 3;
    let level = |l: usize| m.level_mlp(l).num_params();
    assert_eq!(m.truncate(1).unwrap().num_params(), level(1) + head);
    assert_eq!(m.num_params(), level(1) + level(2) + level(3) + head);
}

#[test]
fn nan_in_higher_levels_does_not_leak() {
    let mut m = model(3);
    let x = probes(200, 2, 3);
    let before = m.forward_partial(&x, 1).unwrap();
    for b in m.params_mut().blocks_mut() {
        if b.name.starts_with("level2") || b.name.starts_with("level3") {
            b.value.iter_mut().for_each(|v| *v = f64::NAN);
        }
    }
    assert_eq!(bits(&m.forward_partial(&x, 1).unwrap()), bits(&before));
    assert!(m.predict(&x).unwrap().data().iter().all(|v| v.is_nan()));
}

#[test]
fn shared_head_is_applied_to_every_level() {
    let m = model(3);
    let x = probes(50, 2, 4);
    let out = m.forward(&x).unwrap();
    for l in 0..3 {
        let r = m.head().forward(m.params(), &out.features[l]).unwrap();
        assert_eq!(bits(&r), bits(&out.residuals[l]));
    }
}

#[test]
fn batched_prediction_matches_single_forward() {
    let m = model(3);
    let x = probes(5000, 2, 5);
    let outs = m.predict_levels(&x).unwrap();
    let direct = m.forward(&x).unwrap();
    for l in 0..3 {
        assert_eq!(bits(&outs.composites[l]), bits(&direct.composites[l]));
        assert_eq!(bits(&outs.residuals[l]), bits(&direct.residuals[l]));
    }
}

#[test]
fn invalid_cutoffs() {
    let m = model(2);
    let x = probes(3, 2, 6);
    assert!(m.truncate(0).is_err());
    assert!(m.truncate(3).is_err());
    assert!(m.forward_partial(&x, 0).is_err());
    assert!(m.forward(&probes(3, 3, 6)).is_err());
}
