//! Fully connected networks with explicit forward caches and reverse-mode
//! gradients.
//!
//! A layer computes `y = act(x · W + b)` with `W` stored as `in_dim × out_dim`.
//! Batches are matrices with one record per row.

use rand::Rng;
use rand::distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    /// ELU with unit scale.
    Elu,
    Sigmoid,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
            Activation::Sigmoid => sigmoid(z),
            Activation::Linear => z,
        }
    }

    /// Derivative with respect to the pre-activation `z`.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Elu => {
                if z > 0.0 {
                    1.0
                } else {
                    z.exp()
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Linear => 1.0,
        }
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.cols() {
            return Err(Error::shape("DenseLayer::new", weights.cols(), bias.len()));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    /// Glorot-uniform weights and zero bias.
    pub fn glorot<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
        let weights = Matrix::from_fn(in_dim, out_dim, |_, _| dist.sample(rng));
        Self {
            weights,
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.weights.rows()
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.weights.cols()
    }

    /// L2 norm of the concatenated weight and bias vector.
    pub fn param_norm(&self) -> f64 {
        let w: f64 = self.weights.as_slice().iter().map(|v| v * v).sum();
        let b: f64 = self.bias.iter().map(|v| v * v).sum();
        (w + b).sqrt()
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.as_mut_slice().iter_mut().chain(self.bias.iter_mut())
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.as_slice().iter().chain(self.bias.iter())
    }

    fn pre_activation(&self, x: &Matrix) -> Result<Matrix> {
        let mut z = x.matmul(&self.weights)?;
        for r in 0..z.rows() {
            for (v, b) in z.row_mut(r).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        Ok(z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

/// Inputs and pre-activations of every layer from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Matrix>,
    pre_activations: Vec<Matrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl LayerGrads {
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.weights.as_slice().iter().chain(self.bias.iter())
    }
}

/// Parameter gradients for an [`Mlp`], one entry per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<LayerGrads>,
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrads {
                    weights: Matrix::zeros(l.in_dim(), l.out_dim()),
                    bias: vec![0.0; l.out_dim()],
                })
                .collect(),
        }
    }

    /// Accumulates `other` into `self`.
    pub fn add_assign(&mut self, other: &MlpGrads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.as_mut_slice().iter_mut().zip(b.weights.as_slice()) {
                *x += y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
    }
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("an MLP needs at least one layer"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::shape(
                    "Mlp::new",
                    format!("layer {} in_dim = {}", i + 1, pair[0].out_dim()),
                    pair[1].in_dim(),
                ));
            }
        }
        Ok(Self { layers })
    }

    /// Glorot-initialized network with the given layer widths and activations.
    /// `dims` has one more entry than `activations`.
    pub fn glorot<R: Rng + ?Sized>(dims: &[usize], activations: &[Activation], rng: &mut R) -> Self {
        assert_eq!(dims.len(), activations.len() + 1);
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| DenseLayer::glorot(w[0], w[1], act, rng))
            .collect();
        Self { layers }
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.in_dim() * l.out_dim() + l.out_dim()).sum()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut a = x.clone();
        for layer in &self.layers {
            let act = layer.activation;
            a = layer.pre_activation(&a)?.map(|z| act.apply(z));
        }
        Ok(a)
    }

    pub fn forward_cached(&self, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut a = x.clone();
        for layer in &self.layers {
            let z = layer.pre_activation(&a)?;
            let act = layer.activation;
            let next = z.map(|v| act.apply(v));
            inputs.push(a);
            pre_activations.push(z);
            a = next;
        }
        Ok((
            a,
            ForwardCache {
                inputs,
                pre_activations,
            },
        ))
    }

    /// Reverse accumulation from `out_grad = ∂L/∂output` to parameter and
    /// input gradients.
    pub fn backward(&self, cache: &ForwardCache, out_grad: &Matrix) -> Result<(MlpGrads, Matrix)> {
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::shape(
                "Mlp::backward",
                format!("cache for {} layers", self.layers.len()),
                cache.inputs.len(),
            ));
        }
        let last = &cache.pre_activations[self.layers.len() - 1];
        if out_grad.shape() != last.shape() {
            return Err(Error::shape(
                "Mlp::backward",
                format!("{:?}", last.shape()),
                format!("{:?}", out_grad.shape()),
            ));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = out_grad.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let act = layer.activation;
            let dz = delta.zip_map(&cache.pre_activations[i], |g, z| g * act.derivative(z))?;
            let dw = cache.inputs[i].t_matmul(&dz)?;
            let db = dz.column_sums();
            delta = dz.matmul_t(&layer.weights)?;
            grads.push(LayerGrads {
                weights: dw,
                bias: db,
            });
        }
        grads.reverse();
        Ok((MlpGrads { layers: grads }, delta))
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.in_dim() {
            return Err(Error::shape("Mlp::forward", self.in_dim(), x.cols()));
        }
        Ok(())
    }
}

/// How critic parameters are constrained after each update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipMode {
    /// Rescale each layer so its parameter L2 norm is at most the bound.
    #[default]
    LayerNorm,
    /// Clamp every parameter into `[-bound, bound]`.
    Value,
}

/// Per-layer L2 norm clipping. A layer whose norm exceeds `w_max` is scaled
/// so that its recomputed norm is `≤ w_max`, which makes the operation
/// idempotent.
pub fn clip_l2(net: &mut Mlp, w_max: f64) -> Result<()> {
    if !(w_max > 0.0) {
        return Err(Error::invalid(format!("w_max must be positive, got {w_max}")));
    }
    for layer in net.layers_mut() {
        let norm = layer.param_norm();
        if norm <= w_max {
            continue;
        }
        if !norm.is_finite() {
            return Err(Error::invalid("cannot clip a layer with non-finite parameters"));
        }
        let original: Vec<f64> = layer.params().copied().collect();
        let mut factor = w_max / norm;
        loop {
            for (p, &o) in layer.params_mut().zip(&original) {
                *p = o * factor;
            }
            if layer.param_norm() <= w_max {
                break;
            }
            factor = factor.next_down();
        }
    }
    Ok(())
}

pub fn clip_values(net: &mut Mlp, bound: f64) -> Result<()> {
    if !(bound > 0.0) {
        return Err(Error::invalid(format!("clip bound must be positive, got {bound}")));
    }
    for layer in net.layers_mut() {
        for p in layer.params_mut() {
            *p = p.clamp(-bound, bound);
        }
    }
    Ok(())
}

pub fn clip(net: &mut Mlp, mode: ClipMode, bound: f64) -> Result<()> {
    match mode {
        ClipMode::LayerNorm => clip_l2(net, bound),
        ClipMode::Value => clip_values(net, bound),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single(weights: &[[f64; 2]; 2], bias: [f64; 2], act: Activation) -> Mlp {
        let w = Matrix::from_rows(weights).unwrap();
        Mlp::new(vec![DenseLayer::new(w, bias.to_vec(), act).unwrap()]).unwrap()
    }

    #[test]
    fn identity_linear_layer() {
        let net = single(&[[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0], Activation::Linear);
        let x = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        assert_eq!(net.forward(&x).unwrap().as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn relu_zeroes_negatives() {
        let net = single(&[[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0], Activation::Relu);
        let x = Matrix::from_rows(&[[-1.0, 3.0]]).unwrap();
        assert_eq!(net.forward(&x).unwrap().as_slice(), &[0.0, 3.0]);
    }

    #[test]
    fn hand_matrix_product() {
        // x·W with W = [[1,0],[1,1]]: (1·1 + 1·1, 1·0 + 1·1) + b
        let net = single(&[[1.0, 0.0], [1.0, 1.0]], [0.5, 0.0], Activation::Linear);
        let x = Matrix::from_rows(&[[1.0, 1.0]]).unwrap();
        assert_eq!(net.forward(&x).unwrap().as_slice(), &[2.5, 1.0]);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let net = single(&[[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0], Activation::Linear);
        assert!(net.forward(&Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn zero_out_grad_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::glorot(&[3, 4, 2], &[Activation::Elu, Activation::Linear], &mut rng);
        let x = Matrix::from_fn(5, 3, |r, c| (r as f64 - c as f64) * 0.3);
        let (_, cache) = net.forward_cached(&x).unwrap();
        let (g, dx) = net.backward(&cache, &Matrix::zeros(5, 2)).unwrap();
        assert!(g.layers.iter().all(|l| l.iter().all(|&v| v == 0.0)));
        assert!(dx.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_sum_loss_weight_grad_is_xt_ones() {
        let net = single(&[[0.3, -0.2], [0.7, 1.1]], [0.1, 0.2], Activation::Linear);
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, -1.0]]).unwrap();
        let (_, cache) = net.forward_cached(&x).unwrap();
        let (g, _) = net.backward(&cache, &Matrix::filled(2, 2, 1.0)).unwrap();
        let expected = x.t_matmul(&Matrix::filled(2, 2, 1.0)).unwrap();
        assert_eq!(g.layers[0].weights, expected);
        assert_eq!(g.layers[0].bias, vec![2.0, 2.0]);
    }

    #[test]
    fn backward_rejects_mismatched_grad() {
        let net = single(&[[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0], Activation::Linear);
        let (_, cache) = net.forward_cached(&Matrix::zeros(2, 2)).unwrap();
        assert!(net.backward(&cache, &Matrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn clip_halves_norm_two_layer() {
        let w = Matrix::from_rows(&[[2.0_f64.sqrt()], [2.0_f64.sqrt()]]).unwrap();
        let mut net = Mlp::new(vec![DenseLayer::new(w, vec![0.0], Activation::Linear).unwrap()]).unwrap();
        assert!((net.layers()[0].param_norm() - 2.0).abs() < 1e-15);
        clip_l2(&mut net, 1.0).unwrap();
        assert!((net.layers()[0].param_norm() - 1.0).abs() < 1e-15);
        assert!((net.layers()[0].weights.get(0, 0) - 2.0_f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn clip_leaves_small_layer() {
        let w = Matrix::from_rows(&[[0.3], [0.4]]).unwrap();
        let mut net = Mlp::new(vec![DenseLayer::new(w, vec![0.0], Activation::Linear).unwrap()]).unwrap();
        let before = net.clone();
        clip_l2(&mut net, 1.0).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn clip_three_four_to_unit() {
        let w = Matrix::from_rows(&[[3.0, 4.0]]).unwrap();
        let mut net = Mlp::new(vec![DenseLayer::new(w, vec![0.0, 0.0], Activation::Linear).unwrap()]).unwrap();
        clip_l2(&mut net, 1.0).unwrap();
        let w = net.layers()[0].weights.as_slice();
        assert!((w[0] - 0.6).abs() < 1e-15 && (w[1] - 0.8).abs() < 1e-15);
        assert!(net.layers()[0].param_norm() <= 1.0);
    }

    #[test]
    fn clip_rejects_non_positive_bound() {
        let mut net = single(&[[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0], Activation::Linear);
        assert!(clip_l2(&mut net, 0.0).is_err());
        assert!(clip_l2(&mut net, -1.0).is_err());
    }

    #[test]
    fn value_clipping_clamps_entries() {
        let mut net = single(&[[3.0, -0.5], [0.0, -2.0]], [0.1, 5.0], Activation::Linear);
        clip(&mut net, ClipMode::Value, 1.0).unwrap();
        assert_eq!(net.layers()[0].weights.as_slice(), &[1.0, -0.5, 0.0, -1.0]);
        assert_eq!(net.layers()[0].bias, vec![0.1, 1.0]);
    }
}
