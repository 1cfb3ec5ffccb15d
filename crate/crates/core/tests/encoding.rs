//! Statistical and ordering properties of sampled frequency banks.

use pin_core::encoding::FrequencyBank;
use std::f64::consts::PI;

/// erf with absolute error below 1.2e-7 (Numerical Recipes `erfc` Chebyshev fit).
fn erf(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let poly = -z * z - 1.26551223
        + t * (1.00002368
            + t * (0.37409196
                + t * (0.09678418
                    + t * (-0.18628806
                        + t * (0.27886807 + t * (-1.13520398 + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277))))))));
    let r = 1.0 - t * poly.exp();
    if x >= 0.0 { r } else { -r }
}

/// CDF of `σ·χ_D`, the norm of a D-dimensional N(0, σ²I) vector.
fn chi_cdf(r: f64, dim: usize, sigma: f64) -> f64 {
    let u = r / sigma;
    match dim {
        1 => erf(u / 2f64.sqrt()),
        2 => 1.0 - (-u * u / 2.0).exp(),
        3 => erf(u / 2f64.sqrt()) - (2.0 / PI).sqrt() * u * (-u * u / 2.0).exp(),
        _ => unreachable!(),
    }
}

fn ks_statistic(mut samples: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn erf_reference_values() {
    assert!((erf(0.5) - 0.5204998778130465).abs() < 2e-7);
    assert!((erf(-1.5) + 0.9661051464753108).abs() < 2e-7);
}

#[test]
fn frequency_norms_follow_scaled_chi() {
    for dim in 1..=3 {
        for sigma in [1.0, 15.0] {
            let norms: Vec<f64> = (0..100)
                .flat_map(|seed| {
                    let bank = FrequencyBank::sample(dim, 64, 4, sigma, seed).unwrap();
                    (0..64).map(move |i| bank.frequency_norm(i))
                })
                .collect();
            let n = norms.len() as f64;
            let d = ks_statistic(norms, |r| chi_cdf(r, dim, sigma));
            // Critical value at α = 0.001.
            assert!(d < 1.95 / n.sqrt(), "dim {dim} σ {sigma}: KS {d}");
        }
    }
}

#[test]
fn phases_are_uniform() {
    let phases: Vec<f64> = (0..100)
        .flat_map(|seed| FrequencyBank::sample(2, 64, 2, 5.0, seed).unwrap().phases().to_vec())
        .collect();
    assert!(phases.iter().all(|p| (0.0..2.0 * PI).contains(p)));
    let n = phases.len() as f64;
    let d = ks_statistic(phases, |p| p / (2.0 * PI));
    assert!(d < 1.95 / n.sqrt());
}

#[test]
fn adjacent_levels_are_strictly_ordered() {
    for seed in 0..100u64 {
        let dim = 1 + (seed % 3) as usize;
        let sigma = [1.0, 15.0, 30.0][(seed / 3 % 3) as usize];
        let levels = 2 + (seed % 4) as usize;
        let bank = FrequencyBank::sample(dim, 64 + seed as usize, levels, sigma, seed).unwrap();
        for l in 1..levels {
            let lo = bank.level_range(l).unwrap();
            let hi = bank.level_range(l + 1).unwrap();
            let max_lo = lo.map(|i| bank.frequency_norm(i)).fold(f64::NEG_INFINITY, f64::max);
            let min_hi = hi.map(|i| bank.frequency_norm(i)).fold(f64::INFINITY, f64::min);
            assert!(min_hi > max_lo, "seed {seed} level {l}");
        }
    }
}
