use crate::error::{PinError, Result};

use super::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl ParamStore {
    /// One bias-corrected Adam update over every trainable block.
    ///
    /// Gradients are zeroed afterwards and the step counter advances. If any
    /// gradient is non-finite nothing is updated.
    pub fn adam_step(&mut self, cfg: &AdamConfig) -> Result<()> {
        if let Some(name) = self.first_non_finite_grad() {
            return Err(PinError::NonFiniteGradient { block: name.to_string() });
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for b in self.blocks_mut() {
            if b.trainable {
                for i in 0..b.value.len() {
                    let g = b.grad[i];
                    b.m[i] = cfg.beta1 * b.m[i] + (1.0 - cfg.beta1) * g;
                    b.v[i] = cfg.beta2 * b.v[i] + (1.0 - cfg.beta2) * g * g;
                    let m_hat = b.m[i] / bc1;
                    let v_hat = b.v[i] / bc2;
                    b.value[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
                }
            }
            b.grad.iter_mut().for_each(|g| *g = 0.0);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = ParamStore::new();
        let id = s.add("w", 1, 3, vec![1.0, -2.0, 3.0]);
        s.adam_step(&AdamConfig::default()).unwrap();
        assert_eq!(s.value(id), &[1.0, -2.0, 3.0]);
        assert_eq!(s.step(), 1);
    }

    #[test]
    fn quadratic_converges() {
        // f(θ) = θ², ∇f = 2θ.
        let mut s = ParamStore::new();
        let id = s.add("theta", 1, 1, vec![1.0]);
        let cfg = AdamConfig { lr: 1e-2, ..Default::default() };
        for _ in 0..1000 {
            let th = s.value(id)[0];
            s.grad_mut(id)[0] = 2.0 * th;
            s.adam_step(&cfg).unwrap();
        }
        assert!(s.value(id)[0].abs() < 1e-3, "θ = {}", s.value(id)[0]);
    }

    #[test]
    fn first_step_matches_hand_computation() {
        // With bias correction the first step is lr·g/(|g| + eps).
        let mut s = ParamStore::new();
        let id = s.add("w", 1, 1, vec![0.5]);
        s.grad_mut(id)[0] = 4.0;
        s.adam_step(&AdamConfig::default()).unwrap();
        let expect = 0.5 - 1e-3 * 4.0 / (4.0 + 1e-8);
        assert!((s.value(id)[0] - expect).abs() < 1e-15);
        assert_eq!(s.block(id).grad[0], 0.0);
    }

    #[test]
    fn non_finite_gradient_names_block() {
        let mut s = ParamStore::new();
        s.add("ok", 1, 1, vec![0.0]);
        let bad = s.add("level2.layer0.weight", 1, 1, vec![0.0]);
        s.grad_mut(bad)[0] = f64::NAN;
        match s.adam_step(&AdamConfig::default()) {
            Err(PinError::NonFiniteGradient { block }) => assert_eq!(block, "level2.layer0.weight"),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(s.step(), 0);
    }

    #[test]
    fn frozen_blocks_are_skipped() {
        let mut s = ParamStore::new();
        let id = s.add("c", 1, 1, vec![0.3]);
        s.set_trainable(id, false);
        s.grad_mut(id)[0] = 1.0;
        s.adam_step(&AdamConfig::default()).unwrap();
        assert_eq!(s.value(id)[0], 0.3);
    }
}
