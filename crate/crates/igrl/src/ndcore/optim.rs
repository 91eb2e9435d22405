//! RMSprop with weight decay, no momentum.

use crate::ndcore::Tensor2;

#[derive(Debug, Clone, Copy)]
pub struct RmspropConfig {
    pub lr: f64,
    pub alpha: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for RmspropConfig {
    fn default() -> Self {
        RmspropConfig {
            lr: 5e-4,
            alpha: 0.9,
            eps: 1e-8,
            weight_decay: 1e-6,
        }
    }
}

/// Per-parameter squared-gradient accumulators.
#[derive(Debug, Clone)]
pub struct Rmsprop {
    pub cfg: RmspropConfig,
    sq_avg: Vec<Tensor2>,
}

impl Rmsprop {
    pub fn new(cfg: RmspropConfig, params: &[&Tensor2]) -> Self {
        Rmsprop {
            cfg,
            sq_avg: params
                .iter()
                .map(|p| Tensor2::zeros(p.rows(), p.cols()))
                .collect(),
        }
    }

    /// One update: `g += wd*w; s = alpha*s + (1-alpha)*g^2;
    /// w -= lr * g / (sqrt(s) + eps)`.
    pub fn step(&mut self, params: &mut [&mut Tensor2], grads: &[Tensor2]) {
        assert_eq!(params.len(), self.sq_avg.len());
        assert_eq!(grads.len(), self.sq_avg.len());
        let RmspropConfig {
            lr,
            alpha,
            eps,
            weight_decay,
        } = self.cfg;
        for ((w, g), s) in params.iter_mut().zip(grads).zip(&mut self.sq_avg) {
            assert_eq!(w.shape(), g.shape(), "param/grad shape mismatch");
            let wd = w.data_mut();
            let sd = s.data_mut();
            for ((wv, sv), gv) in wd.iter_mut().zip(sd.iter_mut()).zip(g.data()) {
                let ge = gv + weight_decay * *wv;
                *sv = alpha * *sv + (1.0 - alpha) * ge * ge;
                *wv -= lr * ge / (sv.sqrt() + eps);
            }
        }
    }

    pub fn accumulators(&self) -> &[Tensor2] {
        &self.sq_avg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(v: f64) -> Tensor2 {
        Tensor2::from_vec(1, 1, vec![v])
    }

    #[test]
    fn hand_evaluated_single_step() {
        let cfg = RmspropConfig {
            lr: 0.1,
            alpha: 0.9,
            eps: 1e-8,
            weight_decay: 0.0,
        };
        let mut w = one(1.0);
        let mut opt = Rmsprop::new(cfg, &[&w]);
        opt.step(&mut [&mut w], &[one(1.0)]);
        assert!((opt.accumulators()[0].get(0, 0) - 0.1).abs() < 1e-15);
        assert!((w.get(0, 0) - 0.683_772).abs() < 1e-5);
    }

    #[test]
    fn zero_gradient_leaves_weight_unchanged() {
        let cfg = RmspropConfig {
            weight_decay: 0.0,
            ..RmspropConfig::default()
        };
        let mut w = one(2.5);
        let mut opt = Rmsprop::new(cfg, &[&w]);
        opt.step(&mut [&mut w], &[one(0.0)]);
        assert_eq!(w.get(0, 0), 2.5);
    }

    #[test]
    fn identical_steps_are_bit_identical() {
        let cfg = RmspropConfig::default();
        let grads = [Tensor2::from_vec(1, 3, vec![0.3, -0.7, 0.01])];
        let mut w1 = Tensor2::from_vec(1, 3, vec![1.0, 2.0, 3.0]);
        let mut w2 = w1.clone();
        let mut o1 = Rmsprop::new(cfg, &[&w1]);
        let mut o2 = Rmsprop::new(cfg, &[&w2]);
        for _ in 0..5 {
            o1.step(&mut [&mut w1], &grads);
            o2.step(&mut [&mut w2], &grads);
        }
        assert_eq!(w1.data(), w2.data());
    }

    #[test]
    fn accumulators_stay_nonnegative() {
        let cfg = RmspropConfig::default();
        let mut w = Tensor2::from_vec(1, 2, vec![0.5, -0.5]);
        let mut opt = Rmsprop::new(cfg, &[&w]);
        for s in 0..50 {
            let g = Tensor2::from_vec(1, 2, vec![(s as f64).sin() * 3.0, -(s as f64).cos()]);
            opt.step(&mut [&mut w], &[g]);
            for &v in opt.accumulators()[0].data() {
                assert!(v >= 0.0);
            }
        }
    }
}
