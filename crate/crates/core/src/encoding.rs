//! Fourier-feature frequency banks and per-level encodings.
//!
//! A bank holds `N_f` random frequencies `ω_i ~ N(0, σ²)^D` and phases
//! `b_i ~ U[0, 2π)`, sorted by `‖ω_i‖` and split into `L` contiguous subsets.
//! Level `l` sees the features `cos(ω_i·x + b_i)` for `i` in subset `l`, so
//! each level is restricted to a band of frequencies strictly above the band
//! of the level before it.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{PinError, Result};
use crate::numerics::Tensor2;
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyBank {
    input_dim: usize,
    sigma: f64,
    seed: u64,
    /// `num_features × input_dim`, row-major.
    frequencies: Vec<f64>,
    phases: Vec<f64>,
    level_offsets: Vec<usize>,
}

fn check_dims(input_dim: usize, num_features: usize, num_levels: usize) -> Result<()> {
    if !(1..=3).contains(&input_dim) {
        return Err(PinError::param(format!("input_dim must be 1, 2 or 3, got {input_dim}")));
    }
    if num_levels == 0 {
        return Err(PinError::param("num_levels must be at least 1"));
    }
    if num_features < num_levels {
        return Err(PinError::Partition { features: num_features, levels: num_levels });
    }
    Ok(())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Equal-size subsets, remainder given to the highest levels, then boundaries
/// nudged so that norms are strictly increasing across every boundary.
fn partition(norms: &[f64], num_levels: usize) -> Result<Vec<usize>> {
    let n = norms.len();
    let base = n / num_levels;
    let extra = n % num_levels;
    let mut offsets = Vec::with_capacity(num_levels + 1);
    offsets.push(0);
    for l in 0..num_levels {
        let size = base + usize::from(l >= num_levels - extra);
        offsets.push(offsets[l] + size);
    }
    let fail = || PinError::Partition { features: n, levels: num_levels };
    for l in 1..num_levels {
        let lo = offsets[l - 1];
        let hi = offsets[l + 1];
        let mut k = offsets[l];
        if norms[k - 1] < norms[k] {
            continue;
        }
        // Move the boundary down past the tied run, else up past it.
        let mut down = k;
        while down > lo + 1 && norms[down - 1] >= norms[down] {
            down -= 1;
        }
        if norms[down - 1] < norms[down] {
            k = down;
        } else {
            let mut up = k;
            while up < hi - 1 && norms[up - 1] >= norms[up] {
                up += 1;
            }
            if norms[up - 1] >= norms[up] {
                return Err(fail());
            }
            k = up;
        }
        offsets[l] = k;
    }
    Ok(offsets)
}

impl FrequencyBank {
    /// Samples a bank with a ChaCha8 stream seeded by `seed`.
    ///
    /// Draw order per feature: `input_dim` Gaussian components, then one phase.
    pub fn sample(input_dim: usize, num_features: usize, num_levels: usize, sigma: f64, seed: u64) -> Result<Self> {
        check_dims(input_dim, num_features, num_levels)?;
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(PinError::param(format!("sigma must be positive, got {sigma}")));
        }
        let normal = Normal::new(0.0, sigma).map_err(|e| PinError::param(e.to_string()))?;
        let mut rng = seeded(seed);
        let mut raw: Vec<(Vec<f64>, f64)> = (0..num_features)
            .map(|_| {
                let w: Vec<f64> = (0..input_dim).map(|_| normal.sample(&mut rng)).collect();
                let b = rng.random_range(0.0..TAU);
                (w, b)
            })
            .collect();
        raw.sort_by(|a, b| norm(&a.0).total_cmp(&norm(&b.0)));
        let norms: Vec<f64> = raw.iter().map(|(w, _)| norm(w)).collect();
        let level_offsets = partition(&norms, num_levels)?;
        let mut frequencies = Vec::with_capacity(num_features * input_dim);
        let mut phases = Vec::with_capacity(num_features);
        for (w, b) in raw {
            frequencies.extend(w);
            phases.push(b);
        }
        Ok(FrequencyBank { input_dim, sigma, seed, frequencies, phases, level_offsets })
    }

    /// Builds a bank from explicit parts, validating every invariant.
    pub fn from_parts(
        input_dim: usize,
        sigma: f64,
        seed: u64,
        frequencies: Vec<f64>,
        phases: Vec<f64>,
        level_offsets: Vec<usize>,
    ) -> Result<Self> {
        let n = phases.len();
        let levels = level_offsets.len().saturating_sub(1);
        check_dims(input_dim, n, levels)?;
        if frequencies.len() != n * input_dim {
            return Err(PinError::shape("frequency buffer does not match feature count"));
        }
        if level_offsets[0] != 0 || *level_offsets.last().unwrap() != n {
            return Err(PinError::param("level offsets must start at 0 and end at num_features"));
        }
        if level_offsets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PinError::param("every level subset must be non-empty"));
        }
        let bank = FrequencyBank { input_dim, sigma, seed, frequencies, phases, level_offsets };
        let norms: Vec<f64> = (0..n).map(|i| norm(bank.frequency(i))).collect();
        if norms.windows(2).any(|w| w[0] > w[1]) {
            return Err(PinError::param("frequencies must be sorted by norm"));
        }
        for l in 1..levels {
            let k = bank.level_offsets[l];
            if norms[k - 1] >= norms[k] {
                return Err(PinError::param(format!("levels {l} and {} overlap in frequency", l + 1)));
            }
        }
        Ok(bank)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_features(&self) -> usize {
        self.phases.len()
    }

    pub fn num_levels(&self) -> usize {
        self.level_offsets.len() - 1
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn frequency(&self, i: usize) -> &[f64] {
        &self.frequencies[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn level_offsets(&self) -> &[usize] {
        &self.level_offsets
    }

    pub fn frequency_norm(&self, i: usize) -> f64 {
        norm(self.frequency(i))
    }

    fn check_level(&self, level: usize) -> Result<()> {
        if level == 0 || level > self.num_levels() {
            return Err(PinError::param(format!(
                "level {level} outside 1..={}",
                self.num_levels()
            )));
        }
        Ok(())
    }

    /// Feature indices belonging to `level` (1-based).
    pub fn level_range(&self, level: usize) -> Result<std::ops::Range<usize>> {
        self.check_level(level)?;
        Ok(self.level_offsets[level - 1]..self.level_offsets[level])
    }

    pub fn level_size(&self, level: usize) -> Result<usize> {
        Ok(self.level_range(level)?.len())
    }

    /// The bank restricted to its first `levels` subsets.
    pub fn truncated(&self, levels: usize) -> Result<FrequencyBank> {
        self.check_level(levels)?;
        let end = self.level_offsets[levels];
        Ok(FrequencyBank {
            input_dim: self.input_dim,
            sigma: self.sigma,
            seed: self.seed,
            frequencies: self.frequencies[..end * self.input_dim].to_vec(),
            phases: self.phases[..end].to_vec(),
            level_offsets: self.level_offsets[..=levels].to_vec(),
        })
    }

    fn encode_range(&self, range: std::ops::Range<usize>, x: &[f64], out: &mut Vec<f64>) {
        for i in range {
            let w = self.frequency(i);
            let dot: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
            out.push((dot + self.phases[i]).cos());
        }
    }

    /// `[cos(ω_i·x + b_i)]` for every feature of `level`, in stored order.
    pub fn encode_level(&self, level: usize, x: &[f64]) -> Result<Vec<f64>> {
        let range = self.level_range(level)?;
        self.check_point(x)?;
        let mut out = Vec::with_capacity(range.len());
        self.encode_range(range, x, &mut out);
        Ok(out)
    }

    /// Encoding with the unpartitioned bank.
    pub fn encode_all(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let mut out = Vec::with_capacity(self.num_features());
        self.encode_range(0..self.num_features(), x, &mut out);
        Ok(out)
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(PinError::shape(format!(
                "coordinate has {} components, bank expects {}",
                x.len(),
                self.input_dim
            )));
        }
        Ok(())
    }

    /// Input to level MLP `level` for a single coordinate: `x ++ f_1(x)` for
    /// the first level, `prev ++ f_l(x)` afterwards.
    pub fn level_input(&self, level: usize, x: &[f64], prev_features: Option<&[f64]>) -> Result<Vec<f64>> {
        self.check_level(level)?;
        let mut out = match (level, prev_features) {
            (1, None) => x.to_vec(),
            (1, Some(_)) => return Err(PinError::shape("the first level takes no previous features")),
            (_, Some(p)) => p.to_vec(),
            (_, None) => return Err(PinError::shape(format!("level {level} requires previous features"))),
        };
        out.extend(self.encode_level(level, x)?);
        Ok(out)
    }

    /// Batched [`FrequencyBank::encode_level`]: one row per coordinate row.
    pub fn encode_level_batch(&self, level: usize, x: &Tensor2) -> Result<Tensor2> {
        let range = self.level_range(level)?;
        self.encode_batch_range(range, x)
    }

    pub fn encode_all_batch(&self, x: &Tensor2) -> Result<Tensor2> {
        self.encode_batch_range(0..self.num_features(), x)
    }

    fn encode_batch_range(&self, range: std::ops::Range<usize>, x: &Tensor2) -> Result<Tensor2> {
        if x.cols() != self.input_dim {
            return Err(PinError::shape(format!(
                "coordinates have {} columns, bank expects {}",
                x.cols(),
                self.input_dim
            )));
        }
        let width = range.len();
        let mut data = Vec::with_capacity(x.rows() * width);
        for r in 0..x.rows() {
            self.encode_range(range.clone(), x.row(r), &mut data);
        }
        Tensor2::from_vec(x.rows(), width, data)
    }

    /// `d cos(ω·x + b)/dx = −sin(ω·x + b)·ω`, contracted with `upstream`
    /// (one column per feature of `level`), giving a gradient per coordinate.
    pub fn encode_level_vjp(&self, level: usize, x: &Tensor2, upstream: &Tensor2) -> Result<Tensor2> {
        let range = self.level_range(level)?;
        upstream.ensure_shape(x.rows(), range.len(), "encoding upstream")?;
        let mut out = Tensor2::zeros(x.rows(), self.input_dim);
        for r in 0..x.rows() {
            let xr = x.row(r);
            let up = upstream.row(r);
            let mut acc = vec![0.0; self.input_dim];
            for (j, i) in range.clone().enumerate() {
                let w = self.frequency(i);
                let dot: f64 = w.iter().zip(xr).map(|(a, b)| a * b).sum();
                let s = -(dot + self.phases[i]).sin() * up[j];
                for (a, wd) in acc.iter_mut().zip(w) {
                    *a += s * wd;
                }
            }
            out.row_mut(r).copy_from_slice(&acc);
        }
        Ok(out)
    }

    /// Frequencies expressed in cycles per unit of the `[0, 1]` domain.
    ///
    /// Coordinates live in `[-1, 1]`, so `cos(ω x)` completes `ω/π` cycles
    /// across the signal.
    pub fn frequency_cycles(&self, i: usize) -> Vec<f64> {
        self.frequency(i).iter().map(|w| w / std::f64::consts::PI).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn equal_split_small() {
        let bank = FrequencyBank::sample(1, 4, 2, 1.0, 7).unwrap();
        assert_eq!(bank.level_offsets(), &[0, 2, 4]);
        for i in 1..4 {
            assert!(bank.frequency_norm(i - 1) <= bank.frequency_norm(i));
        }
    }

    #[test]
    fn remainder_goes_to_highest_levels() {
        let bank = FrequencyBank::sample(2, 256, 3, 15.0, 1).unwrap();
        let sizes: Vec<usize> = (1..=3).map(|l| bank.level_size(l).unwrap()).collect();
        assert_eq!(sizes, vec![85, 85, 86]);
        let bank = FrequencyBank::sample(1, 11, 4, 1.0, 1).unwrap();
        let sizes: Vec<usize> = (1..=4).map(|l| bank.level_size(l).unwrap()).collect();
        assert_eq!(sizes, vec![2, 3, 3, 3]);
    }

    #[test]
    fn invalid_arguments() {
        assert!(matches!(FrequencyBank::sample(4, 8, 2, 1.0, 0), Err(PinError::Parameter(_))));
        assert!(matches!(FrequencyBank::sample(2, 8, 0, 1.0, 0), Err(PinError::Parameter(_))));
        assert!(matches!(FrequencyBank::sample(2, 8, 2, 0.0, 0), Err(PinError::Parameter(_))));
        assert!(matches!(FrequencyBank::sample(2, 2, 3, 1.0, 0), Err(PinError::Partition { .. })));
    }

    #[test]
    fn tied_boundary_is_nudged() {
        let norms = [1.0, 2.0, 2.0, 2.0, 3.0, 4.0];
        let offs = partition(&norms, 2).unwrap();
        assert_eq!(offs, vec![0, 1, 6]);
        let norms = [2.0, 2.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(partition(&norms, 2).unwrap(), vec![0, 3, 6]);
        let norms = [1.0, 1.0, 1.0, 1.0];
        assert!(partition(&norms, 2).is_err());
    }

    #[test]
    fn zero_input_gives_cos_phase() {
        let bank = FrequencyBank::sample(2, 12, 3, 5.0, 3).unwrap();
        let f = bank.encode_level(2, &[0.0, 0.0]).unwrap();
        let r = bank.level_range(2).unwrap();
        for (v, i) in f.iter().zip(r) {
            assert_eq!(*v, bank.phases()[i].cos());
        }
    }

    #[test]
    fn analytic_single_frequency() {
        let bank = FrequencyBank::from_parts(2, 1.0, 0, vec![PI, 0.0], vec![0.0], vec![0, 1]).unwrap();
        let f = bank.encode_level(1, &[1.0, 0.7]).unwrap();
        assert!((f[0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn matches_scalar_reimplementation() {
        let bank = FrequencyBank::sample(3, 40, 3, 4.0, 9).unwrap();
        let mut rng = seeded(100);
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            for level in 1..=3 {
                let got = bank.encode_level(level, &x).unwrap();
                let r = bank.level_range(level).unwrap();
                for (g, i) in got.iter().zip(r) {
                    let w = &bank.frequencies()[3 * i..3 * i + 3];
                    let arg = w[0] * x[0] + w[1] * x[1] + w[2] * x[2] + bank.phases()[i];
                    assert!((g - arg.cos()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn level_input_widths() {
        let bank = FrequencyBank::sample(1, 8, 2, 2.0, 0).unwrap();
        let a = bank.level_input(1, &[0.0], None).unwrap();
        assert_eq!(a.len(), 5);
        assert_eq!(a[0], 0.0);
        for (v, i) in a[1..].iter().zip(0..4) {
            assert_eq!(*v, bank.phases()[i].cos());
        }
        let bank = FrequencyBank::sample(2, 256, 3, 15.0, 0).unwrap();
        let prev = vec![0.5; 256];
        assert_eq!(bank.level_input(2, &[0.1, 0.2], Some(&prev)).unwrap().len(), 341);
        assert!(matches!(bank.level_input(2, &[0.1, 0.2], None), Err(PinError::Shape(_))));
        assert!(matches!(bank.level_input(1, &[0.1, 0.2], Some(&prev)), Err(PinError::Shape(_))));
        assert!(matches!(bank.encode_level(4, &[0.1, 0.2]), Err(PinError::Parameter(_))));
    }

    #[test]
    fn truncated_bank_keeps_prefix() {
        let bank = FrequencyBank::sample(2, 30, 3, 3.0, 5).unwrap();
        let t = bank.truncated(2).unwrap();
        assert_eq!(t.num_levels(), 2);
        assert_eq!(t.num_features(), bank.level_offsets()[2]);
        assert_eq!(t.encode_level(2, &[0.3, -0.2]).unwrap(), bank.encode_level(2, &[0.3, -0.2]).unwrap());
    }

    #[test]
    fn encoding_vjp_matches_finite_differences() {
        let bank = FrequencyBank::sample(2, 10, 2, 3.0, 2).unwrap();
        let x = Tensor2::from_rows(&[[0.3, -0.4], [-0.7, 0.1]]).unwrap();
        let up = Tensor2::from_fn(2, bank.level_size(2).unwrap(), |i, j| 0.1 * (i + j) as f64 - 0.2);
        let g = bank.encode_level_vjp(2, &x, &up).unwrap();
        let h = 1e-6;
        for r in 0..2 {
            for d in 0..2 {
                let f = |delta: f64| {
                    let mut p = x.row(r).to_vec();
                    p[d] += delta;
                    let e = bank.encode_level(2, &p).unwrap();
                    e.iter().zip(up.row(r)).map(|(a, b)| a * b).sum::<f64>()
                };
                let num = (f(h) - f(-h)) / (2.0 * h);
                assert!((num - g.get(r, d)).abs() < 1e-8);
            }
        }
    }

    proptest! {
        #[test]
        fn bank_invariants(dim in 1usize..=3, levels in 1usize..=5, extra in 0usize..40, sigma in 0.1f64..40.0, seed in any::<u64>()) {
            let n = levels + extra;
            let bank = FrequencyBank::sample(dim, n, levels, sigma, seed).unwrap();
            let offs = bank.level_offsets();
            prop_assert_eq!(offs[0], 0);
            prop_assert_eq!(offs[levels], n);
            for l in 1..levels {
                prop_assert!(bank.frequency_norm(offs[l] - 1) < bank.frequency_norm(offs[l]));
            }
            for w in offs.windows(2) {
                prop_assert!(w[0] < w[1]);
            }
            prop_assert!(bank.phases().iter().all(|&b| (0.0..TAU).contains(&b)));
            prop_assert_eq!(&FrequencyBank::sample(dim, n, levels, sigma, seed).unwrap(), &bank);
        }

        #[test]
        fn union_of_levels_is_full_encoding(seed in any::<u64>(), x0 in -1.0f64..1.0, x1 in -1.0f64..1.0) {
            let bank = FrequencyBank::sample(2, 23, 4, 10.0, seed).unwrap();
            let x = [x0, x1];
            let mut joined = Vec::new();
            for l in 1..=4 {
                joined.extend(bank.encode_level(l, &x).unwrap());
            }
            prop_assert!(joined.iter().all(|v| (-1.0..=1.0).contains(v)));
            prop_assert_eq!(joined, bank.encode_all(&x).unwrap());
        }
    }
}
