use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

use super::{Gradients, SeasonModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Moments {
    fn zeros(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// First and second moment accumulators mirroring the model's tensors.
///
/// Embedding moments are kept per row and created on first use; a row's
/// moments and parameters only change on steps whose batch touched it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    step: u64,
    dense: Vec<Moments>,
    embedding: HashMap<usize, Moments>,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// Bias-corrected Adam update of one tensor at step `t >= 1`.
pub fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    cfg: &AdamConfig,
) {
    let c1 = 1.0 - cfg.beta1.powi(t as i32);
    let c2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// Applies one Adam step to every model tensor and increments the counter.
pub fn adam_step(
    model: &mut SeasonModel,
    grads: &Gradients,
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    if grads.hidden.len() != model.hidden.len() {
        return Err(Error::Shape(
            "gradient layer count differs from model".into(),
        ));
    }
    if state.dense.is_empty() {
        for layer in model.hidden.iter().chain(std::iter::once(&model.output)) {
            state.dense.push(Moments::zeros(layer.weights.len()));
            state.dense.push(Moments::zeros(layer.bias.len()));
        }
    }
    state.step += 1;
    let t = state.step;
    model.touch();

    let layers = model
        .hidden
        .iter_mut()
        .chain(std::iter::once(&mut model.output));
    let layer_grads = grads.hidden.iter().chain(std::iter::once(&grads.output));
    for (i, (layer, g)) in layers.zip(layer_grads).enumerate() {
        if g.weights.len() != layer.weights.len() || g.bias.len() != layer.bias.len() {
            return Err(Error::Shape(format!("gradient shape differs at layer {i}")));
        }
        let w = &mut state.dense[2 * i];
        adam_update(&mut layer.weights, &g.weights, &mut w.m, &mut w.v, t, cfg);
        let b = &mut state.dense[2 * i + 1];
        adam_update(&mut layer.bias, &g.bias, &mut b.m, &mut b.v, t, cfg);
    }
    let d = model.dim();
    for (&id, g) in &grads.embedding {
        if id >= model.embeddings.vocab().len() || g.len() != d {
            return Err(Error::Shape(format!(
                "embedding gradient for row {id} out of shape"
            )));
        }
        let mom = state
            .embedding
            .entry(id)
            .or_insert_with(|| Moments::zeros(d));
        adam_update(
            model.embeddings.row_mut(id),
            g,
            &mut mom.m,
            &mut mom.v,
            t,
            cfg,
        );
    }
    Ok(())
}
