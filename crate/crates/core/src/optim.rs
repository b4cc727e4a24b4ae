//! RMSProp and Adam over [`Mlp`] parameters.
//!
//! Both optimizers keep one flat accumulator vector per layer, laid out as the
//! layer's weights followed by its bias.

use serde::{Deserialize, Serialize};

use crate::nn::{Mlp, MlpGrads};
use crate::{Error, Result};

pub const DEFAULT_LEARNING_RATE: f64 = 1e-4;

/// One RMSProp update on flat slices:
/// `s ← ρ·s + (1−ρ)·g²`, `w ← w − α·g/(√s + ε)`.
pub fn rmsprop_update(params: &mut [f64], grads: &[f64], s: &mut [f64], alpha: f64, rho: f64, eps: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != s.len() {
        return Err(Error::shape("rmsprop_update", params.len(), format!("{}/{}", grads.len(), s.len())));
    }
    for ((w, &g), s) in params.iter_mut().zip(grads).zip(s.iter_mut()) {
        *s = rho * *s + (1.0 - rho) * g * g;
        if g != 0.0 {
            *w -= alpha * g / (s.sqrt() + eps);
        }
    }
    Ok(())
}

/// One bias-corrected Adam update on flat slices. `t` is the 1-based step.
#[allow(clippy::too_many_arguments)]
pub fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    alpha: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != m.len() || params.len() != v.len() {
        return Err(Error::shape("adam_update", params.len(), grads.len()));
    }
    let c1 = 1.0 - beta1.powf(t as f64);
    let c2 = 1.0 - beta2.powf(t as f64);
    for (((w, &g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        if m_hat != 0.0 {
            *w -= alpha * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

pub trait Optimizer {
    fn step(&mut self, net: &mut Mlp, grads: &MlpGrads) -> Result<()>;
}

fn zeros_per_layer(net: &Mlp) -> Vec<Vec<f64>> {
    net.layers()
        .iter()
        .map(|l| vec![0.0; l.in_dim() * l.out_dim() + l.out_dim()])
        .collect()
}

fn check_layers(net: &Mlp, grads: &MlpGrads, state_len: usize) -> Result<()> {
    if grads.layers.len() != net.layers().len() || state_len != net.layers().len() {
        return Err(Error::shape("optimizer step", net.layers().len(), grads.layers.len()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsProp {
    pub alpha: f64,
    pub rho: f64,
    pub eps: f64,
    /// Squared-gradient running average per layer.
    pub cache: Vec<Vec<f64>>,
}

impl RmsProp {
    pub fn new(net: &Mlp, alpha: f64, rho: f64, eps: f64) -> Self {
        Self {
            alpha,
            rho,
            eps,
            cache: zeros_per_layer(net),
        }
    }

    pub fn with_defaults(net: &Mlp, alpha: f64) -> Self {
        Self::new(net, alpha, 0.9, 1e-8)
    }
}

impl Optimizer for RmsProp {
    fn step(&mut self, net: &mut Mlp, grads: &MlpGrads) -> Result<()> {
        check_layers(net, grads, self.cache.len())?;
        for ((layer, g), s) in net.layers_mut().iter_mut().zip(&grads.layers).zip(&mut self.cache) {
            let mut params: Vec<f64> = layer.params().copied().collect();
            let flat: Vec<f64> = g.iter().copied().collect();
            rmsprop_update(&mut params, &flat, s, self.alpha, self.rho, self.eps)?;
            for (p, v) in layer.params_mut().zip(params) {
                *p = v;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl Adam {
    pub fn new(net: &Mlp, alpha: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            alpha,
            beta1,
            beta2,
            eps,
            m: zeros_per_layer(net),
            v: zeros_per_layer(net),
            t: 0,
        }
    }

    pub fn with_defaults(net: &Mlp, alpha: f64) -> Self {
        Self::new(net, alpha, 0.9, 0.999, 1e-8)
    }
}

impl Optimizer for Adam {
    fn step(&mut self, net: &mut Mlp, grads: &MlpGrads) -> Result<()> {
        check_layers(net, grads, self.m.len())?;
        self.t += 1;
        for (((layer, g), m), v) in net
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            let mut params: Vec<f64> = layer.params().copied().collect();
            let flat: Vec<f64> = g.iter().copied().collect();
            adam_update(&mut params, &flat, m, v, self.t, self.alpha, self.beta1, self.beta2, self.eps)?;
            for (p, v) in layer.params_mut().zip(params) {
                *p = v;
            }
        }
        Ok(())
    }
}
