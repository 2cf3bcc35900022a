use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{normalize_query, Error, Month, Result};

use super::Embeddings;

pub const MONTHS: usize = 12;
pub const DEFAULT_DROPOUT: f64 = 0.2;

/// Forward-pass mode. Training applies inverted dropout after every hidden
/// activation; inference applies neither dropout nor rescaling.
pub enum Pass<'a> {
    Train(&'a mut ChaCha8Rng),
    Infer,
}

/// Fully connected layer; `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    inputs: usize,
    outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        Self {
            inputs,
            outputs,
            weights,
            bias: vec![0.0; outputs],
        }
    }

    pub fn from_parts(
        inputs: usize,
        outputs: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if weights.len() != inputs * outputs || bias.len() != outputs {
            return Err(Error::Shape(format!(
                "dense {inputs}->{outputs} given {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        Ok(Self {
            inputs,
            outputs,
            weights,
            bias,
        })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| b + dot(row, x))
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Feed-forward seasonality regressor.
///
/// Input is the mean-pooled query embedding concatenated with a one-hot
/// month; hidden layers are affine + relu; the output is a single linear
/// unit.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonModel {
    pub embeddings: Embeddings,
    pub hidden: Vec<Dense>,
    pub output: Dense,
    pub dropout_rate: f64,
    generation: u64,
}

impl SeasonModel {
    pub fn new(
        embeddings: Embeddings,
        hidden_widths: &[usize],
        dropout_rate: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut width = embeddings.dim() + MONTHS;
        let mut hidden = Vec::with_capacity(hidden_widths.len());
        for &w in hidden_widths {
            if w == 0 {
                return Err(Error::InvalidConfig(
                    "hidden layer width must be positive".into(),
                ));
            }
            hidden.push(Dense::glorot(width, w, &mut rng));
            width = w;
        }
        let output = Dense::glorot(width, 1, &mut rng);
        Self::from_parts(embeddings, hidden, output, dropout_rate)
    }

    /// Model with every weight and bias zero.
    pub fn zeros(
        embeddings: Embeddings,
        hidden_widths: &[usize],
        dropout_rate: f64,
    ) -> Result<Self> {
        let mut width = embeddings.dim() + MONTHS;
        let mut hidden = Vec::new();
        for &w in hidden_widths {
            hidden.push(Dense::zeros(width, w));
            width = w;
        }
        Self::from_parts(embeddings, hidden, Dense::zeros(width, 1), dropout_rate)
    }

    pub fn from_parts(
        embeddings: Embeddings,
        hidden: Vec<Dense>,
        output: Dense,
        dropout_rate: f64,
    ) -> Result<Self> {
        let model = Self {
            embeddings,
            hidden,
            output,
            dropout_rate,
            generation: 0,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        let mut width = self.embeddings.dim() + MONTHS;
        for (i, layer) in self
            .hidden
            .iter()
            .chain(std::iter::once(&self.output))
            .enumerate()
        {
            if layer.inputs != width {
                return Err(Error::Shape(format!(
                    "layer {i} expects {} inputs but receives {width}",
                    layer.inputs
                )));
            }
            width = layer.outputs;
        }
        if self.output.outputs != 1 {
            return Err(Error::Shape("output layer must have one unit".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.embeddings.dim()
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.hidden.iter().map(Dense::outputs).collect()
    }

    /// Counter bumped on every parameter mutation; caches remember it.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub(crate) fn touch(&mut self) {
        self.generation += 1;
    }

    /// All parameter tensors in persistence order: embedding table, then
    /// weights and bias of every hidden layer, then of the output layer.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![self.embeddings.data()];
        for layer in self.hidden.iter().chain(std::iter::once(&self.output)) {
            out.push(&layer.weights);
            out.push(&layer.bias);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.touch();
        let mut out: Vec<&mut [f64]> = vec![self.embeddings.data_mut()];
        for layer in self
            .hidden
            .iter_mut()
            .chain(std::iter::once(&mut self.output))
        {
            out.push(&mut layer.weights);
            out.push(&mut layer.bias);
        }
        out
    }

    /// Rounds every parameter to the nearest `f32`, the persisted precision.
    pub fn round_to_f32(&mut self) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x = *x as f32 as f64);
        }
    }

    /// Runs the network on a pooled query vector.
    pub fn forward(
        &self,
        query_vec: &[f64],
        month: Month,
        pass: Pass<'_>,
    ) -> Result<(f64, ForwardCache)> {
        self.forward_inner(Vec::new(), query_vec, month, pass)
    }

    /// Embeds `token_ids` by mean pooling, then runs the network. The cache
    /// keeps the ids so that backward reaches the embedding rows.
    pub fn forward_ids(
        &self,
        token_ids: &[usize],
        month: Month,
        pass: Pass<'_>,
    ) -> Result<(f64, ForwardCache)> {
        if token_ids.is_empty() {
            return Err(Error::Shape("query has no tokens".into()));
        }
        let vec = self.embeddings.mean_of(token_ids);
        self.forward_inner(token_ids.to_vec(), &vec, month, pass)
    }

    fn forward_inner(
        &self,
        token_ids: Vec<usize>,
        query_vec: &[f64],
        month: Month,
        mut pass: Pass<'_>,
    ) -> Result<(f64, ForwardCache)> {
        if query_vec.len() != self.dim() {
            return Err(Error::Shape(format!(
                "query vector has {} values, model dim is {}",
                query_vec.len(),
                self.dim()
            )));
        }
        let mut input = Vec::with_capacity(self.dim() + MONTHS);
        input.extend_from_slice(query_vec);
        input.extend((0..MONTHS).map(|i| if i == month.index() { 1.0 } else { 0.0 }));

        let keep = 1.0 - self.dropout_rate;
        let mut pre = Vec::with_capacity(self.hidden.len());
        let mut act = Vec::with_capacity(self.hidden.len());
        let mut masks = Vec::new();
        for layer in &self.hidden {
            let x = act.last().unwrap_or(&input);
            let z = layer.affine(x);
            let mut a: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
            if let Pass::Train(rng) = &mut pass {
                let mask: Vec<f64> = (0..a.len())
                    .map(|_| {
                        if self.dropout_rate == 0.0 || rng.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    })
                    .collect();
                a.iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
                masks.push(mask);
            }
            pre.push(z);
            act.push(a);
        }
        let output = self.output.affine(act.last().unwrap_or(&input))[0];
        Ok((
            output,
            ForwardCache {
                generation: self.generation,
                token_ids,
                input,
                pre,
                act,
                masks,
                output,
            },
        ))
    }

    /// Gradients of the batch-mean squared error with respect to every
    /// parameter. Each item pairs a forward cache with its target.
    pub fn backward(&self, batch: &[(&ForwardCache, f64)]) -> Result<Gradients> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let mut grads = Gradients::zeros_like(self);
        let scale = 2.0 / batch.len() as f64;
        let d = self.dim();
        for (cache, target) in batch {
            if cache.generation != self.generation || cache.input.len() != d + MONTHS {
                return Err(Error::StaleCache);
            }
            let g_out = scale * (cache.output - target);
            let last = cache.act.last().unwrap_or(&cache.input);
            let out_grad = &mut grads.output;
            for (gw, x) in out_grad.weights.iter_mut().zip(last) {
                *gw += g_out * x;
            }
            out_grad.bias[0] += g_out;
            let mut upstream: Vec<f64> = self.output.weights.iter().map(|w| g_out * w).collect();

            for l in (0..self.hidden.len()).rev() {
                let layer = &self.hidden[l];
                let mut dz = upstream;
                if let Some(mask) = cache.masks.get(l) {
                    dz.iter_mut().zip(mask).for_each(|(g, m)| *g *= m);
                }
                dz.iter_mut().zip(&cache.pre[l]).for_each(|(g, z)| {
                    if *z <= 0.0 {
                        *g = 0.0
                    }
                });
                let x = if l == 0 {
                    &cache.input
                } else {
                    &cache.act[l - 1]
                };
                let lg = &mut grads.hidden[l];
                let mut dx = vec![0.0; layer.inputs];
                for (o, g) in dz.iter().enumerate() {
                    if *g == 0.0 {
                        continue;
                    }
                    lg.bias[o] += g;
                    let row = o * layer.inputs..(o + 1) * layer.inputs;
                    for ((gw, xi), (w, dxi)) in lg.weights[row.clone()]
                        .iter_mut()
                        .zip(x)
                        .zip(layer.weights[row].iter().zip(dx.iter_mut()))
                    {
                        *gw += g * xi;
                        *dxi += g * w;
                    }
                }
                upstream = dx;
            }

            if !cache.token_ids.is_empty() {
                let n = cache.token_ids.len() as f64;
                for &id in &cache.token_ids {
                    let row = grads.embedding.entry(id).or_insert_with(|| vec![0.0; d]);
                    for (r, g) in row.iter_mut().zip(&upstream[..d]) {
                        *r += g / n;
                    }
                }
            }
        }
        Ok(grads)
    }

    /// Clamped seasonality score for a raw query.
    pub fn predict(&self, query: &str, month: Month) -> f64 {
        self.predict_all(query)[month.index()]
    }

    /// Clamped scores for all twelve months, January first.
    ///
    /// The first layer is evaluated once for the query part and the month
    /// column is added per month.
    pub fn predict_all(&self, query: &str) -> [f64; MONTHS] {
        let q = self.embeddings.embed_query(&normalize_query(query));
        let mut out = [0.0; MONTHS];
        let Some(first) = self.hidden.first() else {
            for (m, o) in out.iter_mut().enumerate() {
                let w = &self.output.weights;
                *o =
                    (self.output.bias[0] + dot(&w[..q.len()], &q) + w[q.len() + m]).clamp(0.0, 1.0);
            }
            return out;
        };
        let d = q.len();
        let base: Vec<f64> = first
            .weights
            .chunks_exact(first.inputs)
            .zip(&first.bias)
            .map(|(row, b)| b + dot(&row[..d], &q))
            .collect();
        for (m, o) in out.iter_mut().enumerate() {
            let mut a: Vec<f64> = base
                .iter()
                .zip(first.weights.chunks_exact(first.inputs))
                .map(|(z, row)| (z + row[d + m]).max(0.0))
                .collect();
            for layer in &self.hidden[1..] {
                a = layer.affine(&a).into_iter().map(|v| v.max(0.0)).collect();
            }
            *o = self.output.affine(&a)[0].clamp(0.0, 1.0);
        }
        out
    }
}

/// Intermediate values of one forward pass, consumed by backward.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    generation: u64,
    token_ids: Vec<usize>,
    input: Vec<f64>,
    pre: Vec<Vec<f64>>,
    act: Vec<Vec<f64>>,
    masks: Vec<Vec<f64>>,
    pub output: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Parameter gradients. Embedding gradients are stored only for rows the
/// batch touched; every other row's gradient is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embedding: BTreeMap<usize, Vec<f64>>,
    pub hidden: Vec<DenseGrad>,
    pub output: DenseGrad,
}

impl Gradients {
    pub fn zeros_like(model: &SeasonModel) -> Self {
        let zero = |l: &Dense| DenseGrad {
            weights: vec![0.0; l.weights.len()],
            bias: vec![0.0; l.bias.len()],
        };
        Self {
            embedding: BTreeMap::new(),
            hidden: model.hidden.iter().map(zero).collect(),
            output: zero(&model.output),
        }
    }

    /// Dense tensors in the order of [`SeasonModel::tensors`].
    pub fn to_dense(&self, model: &SeasonModel) -> Vec<Vec<f64>> {
        let d = model.dim();
        let mut emb = vec![0.0; model.embeddings.data().len()];
        for (id, row) in &self.embedding {
            emb[id * d..(id + 1) * d].copy_from_slice(row);
        }
        let mut out = vec![emb];
        for g in self.hidden.iter().chain(std::iter::once(&self.output)) {
            out.push(g.weights.clone());
            out.push(g.bias.clone());
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.embedding
            .values()
            .flatten()
            .chain(
                self.hidden
                    .iter()
                    .flat_map(|g| g.weights.iter().chain(&g.bias)),
            )
            .chain(self.output.weights.iter().chain(&self.output.bias))
            .fold(0.0, |m: f64, x| m.max(x.abs()))
    }
}

/// Mean of squared differences.
pub fn mse_loss(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: targets.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / predictions.len() as f64)
}
