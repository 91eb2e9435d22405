//! Layer primitives: dense affine layers and the frozen random Fourier
//! feature map that fronts the encoder.

use rand::Rng;

use crate::ndcore::tape::{Tape, VarId};
use crate::ndcore::Tensor2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    fn apply_on(self, tape: &mut Tape, x: VarId) -> VarId {
        match self {
            Activation::Tanh => tape.tanh(x),
            Activation::Relu => tape.relu(x),
            Activation::Identity => x,
        }
    }

    fn apply(self, x: &Tensor2) -> Tensor2 {
        match self {
            Activation::Tanh => x.map(f64::tanh),
            Activation::Relu => x.map(|v| if v > 0.0 { v } else { 0.0 }),
            Activation::Identity => x.clone(),
        }
    }
}

/// Affine layer `act(X W^T + b)` with Glorot-uniform weights.
#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: Tensor2,
    pub bias: Tensor2,
    pub activation: Activation,
}

impl Dense {
    pub fn new(d_in: usize, d_out: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (d_in + d_out) as f64).sqrt();
        let weight = Tensor2::from_fn(d_out, d_in, |_, _| rng.random_range(-limit..limit));
        Dense {
            weight,
            bias: Tensor2::zeros(1, d_out),
            activation,
        }
    }

    pub fn forward(&self, x: &Tensor2) -> Tensor2 {
        let pre = x.matmul_tb(&self.weight).add_row_broadcast(&self.bias);
        self.activation.apply(&pre)
    }
}

/// Handles to one dense layer's parameters on a tape.
#[derive(Debug, Clone, Copy)]
pub struct DenseVars {
    pub weight: VarId,
    pub bias: VarId,
    activation: Activation,
}

impl DenseVars {
    pub fn forward(&self, tape: &mut Tape, x: VarId) -> VarId {
        let prod = tape.matmul_tb(x, self.weight);
        let pre = tape.add_row_broadcast(prod, self.bias);
        self.activation.apply_on(tape, pre)
    }
}

/// Stack of dense layers; the final layer is always affine with no activation.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// `dims = [d_in, h1, ..., d_out]`; hidden layers use `hidden`, the last
    /// layer is linear.
    pub fn new(dims: &[usize], hidden: Activation, rng: &mut impl Rng) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least input and output dims");
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(idx, w)| {
                let act = if idx + 2 == dims.len() {
                    Activation::Identity
                } else {
                    hidden
                };
                Dense::new(w[0], w[1], act, rng)
            })
            .collect();
        Mlp { layers }
    }

    pub fn forward(&self, x: &Tensor2) -> Tensor2 {
        self.layers.iter().fold(x.clone(), |h, l| l.forward(&h))
    }

    pub fn bind(&self, tape: &mut Tape) -> MlpVars {
        MlpVars {
            layers: self
                .layers
                .iter()
                .map(|l| DenseVars {
                    weight: tape.param(l.weight.clone()),
                    bias: tape.param(l.bias.clone()),
                    activation: l.activation,
                })
                .collect(),
        }
    }

    /// Weight/bias references in binding order.
    pub fn param_refs(&self) -> Vec<&Tensor2> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor2> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct MlpVars {
    layers: Vec<DenseVars>,
}

impl MlpVars {
    pub fn forward(&self, tape: &mut Tape, x: VarId) -> VarId {
        self.layers.iter().fold(x, |h, l| l.forward(tape, h))
    }

    pub fn param_ids(&self) -> Vec<VarId> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight, l.bias])
            .collect()
    }
}

/// Random Fourier feature map `sqrt(2/d) * cos(X W^T + phase)`.
///
/// `W ~ N(0, sigma^-2)`, `phase ~ U[0, 2pi)`; both are frozen at
/// construction and never trained.
#[derive(Debug, Clone)]
pub struct RffLayer {
    pub weight: Tensor2,
    pub phase: Tensor2,
    pub sigma: f64,
}

impl RffLayer {
    pub fn new(d_in: usize, d_rff: usize, sigma: f64, rng: &mut impl Rng) -> Self {
        assert!(sigma > 0.0, "rff bandwidth must be positive");
        let normal = rand_distr::Normal::new(0.0, 1.0 / sigma).unwrap();
        let weight = Tensor2::from_fn(d_rff, d_in, |_, _| rng.sample(normal));
        let phase = Tensor2::from_fn(1, d_rff, |_, _| {
            rng.random_range(0.0..std::f64::consts::TAU)
        });
        RffLayer {
            weight,
            phase,
            sigma,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn scale(&self) -> f64 {
        (2.0 / self.output_dim() as f64).sqrt()
    }

    pub fn forward(&self, x: &Tensor2) -> Tensor2 {
        let pre = x.matmul_tb(&self.weight).add_row_broadcast(&self.phase);
        pre.map(f64::cos).scale(self.scale())
    }

    /// Forward on a tape; weight and phase enter as constants so gradients
    /// flow only through `x`.
    pub fn forward_on(&self, tape: &mut Tape, x: VarId) -> VarId {
        let w = tape.constant(self.weight.clone());
        let p = tape.constant(self.phase.clone());
        let prod = tape.matmul_tb(x, w);
        let pre = tape.add_row_broadcast(prod, p);
        let c = tape.cos(pre);
        tape.scale(c, self.scale())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rff_zero_weight_gives_constant_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut layer = RffLayer::new(3, 8, 20.0, &mut rng);
        layer.weight = Tensor2::zeros(8, 3);
        layer.phase = Tensor2::zeros(1, 8);
        let x = Tensor2::from_fn(4, 3, |i, j| (i + j) as f64);
        let out = layer.forward(&x);
        let expect = (2.0f64 / 8.0).sqrt();
        for &v in out.data() {
            assert!((v - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn rff_outputs_bounded_and_deterministic() {
        let x = Tensor2::from_fn(16, 5, |i, j| ((i * j) as f64).sin() * 3.0);
        let layer1 = RffLayer::new(5, 32, 20.0, &mut ChaCha8Rng::seed_from_u64(7));
        let layer2 = RffLayer::new(5, 32, 20.0, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(layer1.weight, layer2.weight);
        assert_eq!(layer1.phase, layer2.phase);
        let bound = layer1.scale();
        for &v in layer1.forward(&x).data() {
            assert!(v.abs() <= bound + 1e-15);
        }
    }

    #[test]
    fn identity_single_layer_is_identity_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut mlp = Mlp::new(&[3, 3], Activation::Tanh, &mut rng);
        mlp.layers[0].weight = Tensor2::eye(3);
        mlp.layers[0].bias = Tensor2::zeros(1, 3);
        let x = Tensor2::from_fn(5, 3, |i, j| (i * 3 + j) as f64 * 0.1);
        assert_eq!(mlp.forward(&x), x);
    }

    #[test]
    fn zero_input_through_odd_activation_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mlp = Mlp::new(&[4, 6, 3], Activation::Tanh, &mut rng);
        // biases are zero-initialized, tanh is odd, so zero maps to zero
        let out = mlp.forward(&Tensor2::zeros(2, 4));
        assert!(out.frob_norm() < 1e-15);
    }

    #[test]
    fn batch_forward_matches_per_sample_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mlp = Mlp::new(&[4, 5, 2], Activation::Tanh, &mut rng);
        let x = Tensor2::from_fn(3, 4, |i, j| (i as f64 - j as f64) * 0.3);
        let batch = mlp.forward(&x);
        for i in 0..3 {
            let single = mlp.forward(&Tensor2::row_from(x.row(i)));
            for j in 0..2 {
                assert!((batch.get(i, j) - single.get(0, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tape_forward_matches_plain_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mlp = Mlp::new(&[4, 6, 3], Activation::Tanh, &mut rng);
        let rff = RffLayer::new(3, 10, 5.0, &mut ChaCha8Rng::seed_from_u64(5));
        let x = Tensor2::from_fn(7, 4, |i, j| ((i + 2 * j) as f64).cos());

        let plain = rff.forward(&mlp.forward(&x));

        let mut tape = Tape::new();
        let xid = tape.constant(x);
        let vars = mlp.bind(&mut tape);
        let h = vars.forward(&mut tape, xid);
        let out = rff.forward_on(&mut tape, h);
        let diff = tape.value(out).sub(&plain);
        assert!(diff.frob_norm() < 1e-14);
    }
}
