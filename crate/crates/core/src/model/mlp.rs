//! Fully connected rectifier network with a sigmoid output unit.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{accuracy, bce_with_logit, sigmoid, Classifier, Differentiable, LinearModel, MODEL_FORMAT_VERSION};
use crate::dataset::FeatureTable;
use crate::error::{check_dim, Error, Result};
use crate::rng::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative; the rectifier's subgradient at exactly 0 is taken as 0.
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
            Activation::Sigmoid => super::sigmoid_prime(z),
        }
    }
}

/// Affine map followed by an elementwise activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    /// Row-major, `n_out x n_in`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn new(n_in: usize, n_out: usize, weights: Vec<f64>, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if weights.len() != n_in * n_out || bias.len() != n_out || n_in == 0 || n_out == 0 {
            return Err(Error::Argument(format!(
                "layer {n_in}->{n_out} given {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        Ok(Self {
            n_in,
            n_out,
            weights,
            bias,
            activation,
        })
    }

    pub fn row(&self, out: usize) -> &[f64] {
        &self.weights[out * self.n_in..(out + 1) * self.n_in]
    }

    pub fn affine(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            (0..self.n_out).map(|o| self.row(o).iter().zip(input).map(|(w, v)| w * v).sum::<f64>() + self.bias[o]),
        );
    }

    /// `W^T g`.
    pub fn backward(&self, grad_out: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n_in];
        for (o, &go) in grad_out.iter().enumerate() {
            if go == 0.0 {
                continue;
            }
            for (gi, w) in g.iter_mut().zip(self.row(o)) {
                *gi += go * w;
            }
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 100,
            learning_rate: 0.05,
            hidden: vec![17, 5],
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Argument("epochs and batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Argument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Argument("hidden layers must have at least one unit".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainingMeta {
    pub config: Option<TrainConfig>,
    /// Mean training loss of each epoch, accumulated during the epoch.
    pub epoch_losses: Vec<f64>,
    pub train_accuracy: Option<f64>,
    pub validation_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub format_version: u32,
    layers: Vec<Dense>,
    pub meta: TrainingMeta,
}

/// Pre-activations and activations of every layer for one input.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    /// `pre[l]` is the affine output of layer `l`.
    pub pre: Vec<Vec<f64>>,
    /// `post[l]` is `activation(pre[l])`; the last entry is `p_bad`.
    pub post: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn logit(&self) -> f64 {
        self.pre.last().expect("network has layers")[0]
    }
}

impl MlpModel {
    /// Hidden layers may be rectifier or identity; the output layer must be a
    /// single sigmoid unit.
    pub fn new(layers: Vec<Dense>) -> Result<Self> {
        let last = layers
            .last()
            .ok_or_else(|| Error::Argument("network needs at least one layer".into()))?;
        if last.n_out != 1 || last.activation != Activation::Sigmoid {
            return Err(Error::Argument("output layer must be one sigmoid unit".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].n_out != pair[1].n_in {
                return Err(Error::Argument(format!(
                    "layer sizes do not chain: {} -> {}",
                    pair[0].n_out, pair[1].n_in
                )));
            }
        }
        if layers[..layers.len() - 1]
            .iter()
            .any(|l| l.activation == Activation::Sigmoid)
        {
            return Err(Error::Argument("hidden layers must be relu or identity".into()));
        }
        Ok(Self {
            format_version: MODEL_FORMAT_VERSION,
            layers,
            meta: TrainingMeta::default(),
        })
    }

    /// Zero-hidden-layer network computing the same logit as `model`.
    pub fn from_linear(model: &LinearModel) -> Self {
        let d = model.weights.len();
        let out = Dense::new(d, 1, model.weights.clone(), vec![model.bias], Activation::Sigmoid).expect("shapes agree");
        Self::new(vec![out]).expect("valid single layer")
    }

    /// Glorot-uniform weights and zero biases.
    pub fn init(n_in: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        let mut rng = rng_from(seed);
        let mut sizes = vec![n_in];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for (l, pair) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights = (0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)).collect();
            let activation = if l + 2 == sizes.len() {
                Activation::Sigmoid
            } else {
                Activation::Relu
            };
            layers.push(Dense::new(fan_in, fan_out, weights, vec![0.0; fan_out], activation)?);
        }
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].n_in];
        s.extend(self.layers.iter().map(|l| l.n_out));
        s
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardTrace> {
        check_dim(self.n_features(), x.len())?;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = post.last().map(Vec::as_slice).unwrap_or(x);
            let mut z = Vec::with_capacity(layer.n_out);
            layer.affine(input, &mut z);
            let a = z.iter().map(|&v| layer.activation.apply(v)).collect();
            pre.push(z);
            post.push(a);
        }
        Ok(ForwardTrace {
            input: x.to_vec(),
            pre,
            post,
        })
    }

    /// Gradient of the logit with respect to every layer's parameters,
    /// accumulated into `grads` scaled by `scale`.
    fn accumulate_param_grads(&self, trace: &ForwardTrace, scale: f64, grads: &mut [Dense]) {
        let mut g_pre = vec![scale];
        for l in (0..self.layers.len()).rev() {
            let input = if l == 0 { &trace.input } else { &trace.post[l - 1] };
            let gl = &mut grads[l];
            for (o, &g) in g_pre.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                gl.bias[o] += g;
                let row = &mut gl.weights[o * gl.n_in..(o + 1) * gl.n_in];
                for (w, v) in row.iter_mut().zip(input) {
                    *w += g * v;
                }
            }
            if l == 0 {
                break;
            }
            let g_post = self.layers[l].backward(&g_pre);
            let prev = &self.layers[l - 1];
            g_pre = g_post
                .iter()
                .zip(&trace.pre[l - 1])
                .map(|(g, &z)| g * prev.activation.derivative(z))
                .collect();
        }
    }
}

impl Classifier for MlpModel {
    fn n_features(&self) -> usize {
        self.layers[0].n_in
    }

    fn logit(&self, x: &[f64]) -> Result<f64> {
        Ok(self.forward(x)?.logit())
    }
}

impl Differentiable for MlpModel {
    fn logit_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let trace = self.forward(x)?;
        let last = self.layers.len() - 1;
        let mut g = self.layers[last].backward(&[1.0]);
        for l in (0..last).rev() {
            let layer = &self.layers[l];
            for (gi, &z) in g.iter_mut().zip(&trace.pre[l]) {
                *gi *= layer.activation.derivative(z);
            }
            g = layer.backward(&g);
        }
        Ok((trace.logit(), g))
    }

    /// Walks the straight path region by region. Inside a region every
    /// rectifier keeps its state, so pre-activations are affine in `t` and
    /// the next state change is found in closed form.
    fn path_breakpoints(&self, x: &[f64], reference: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n_features(), x.len())?;
        check_dim(x.len(), reference.len())?;
        let dir: Vec<f64> = x.iter().zip(reference).map(|(a, b)| a - b).collect();
        let hidden = &self.layers[..self.layers.len() - 1];
        let mut out = Vec::new();
        let mut t = 0.0;
        let mut point = vec![0.0; x.len()];
        while out.len() < MAX_BREAKPOINTS {
            let probe = t + BREAKPOINT_PROBE;
            if probe >= 1.0 {
                break;
            }
            for ((p, r), d) in point.iter_mut().zip(reference).zip(&dir) {
                *p = r + probe * d;
            }
            let mut next = 1.0_f64;
            let mut value = point.clone();
            let mut slope = dir.clone();
            let (mut z, mut dz) = (Vec::new(), Vec::new());
            for layer in hidden {
                layer.affine(&value, &mut z);
                dz.clear();
                dz.extend((0..layer.n_out).map(|o| layer.row(o).iter().zip(&slope).map(|(w, s)| w * s).sum::<f64>()));
                if layer.activation == Activation::Relu {
                    for (&zi, &di) in z.iter().zip(&dz) {
                        if di != 0.0 {
                            let cross = probe - zi / di;
                            if cross > probe && cross < next {
                                next = cross;
                            }
                        }
                    }
                }
                value = z.iter().map(|&v| layer.activation.apply(v)).collect();
                slope = z
                    .iter()
                    .zip(&dz)
                    .map(|(&v, &d)| d * layer.activation.derivative(v))
                    .collect();
            }
            if next >= 1.0 {
                break;
            }
            out.push(next);
            t = next;
        }
        Ok(out)
    }
}

/// Offset past a breakpoint at which the next region's activation pattern
/// is read.
const BREAKPOINT_PROBE: f64 = 1e-10;
const MAX_BREAKPOINTS: usize = 100_000;

/// Mini-batch SGD on binary cross-entropy. Each epoch visits the rows in a
/// seeded shuffle, so `(train, config)` fully determines the weights.
pub fn train_mlp(train: &FeatureTable, config: &TrainConfig, validation: &FeatureTable) -> Result<MlpModel> {
    config.validate()?;
    if train.n_rows() == 0 {
        return Err(Error::Argument("training table is empty".into()));
    }
    if train.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("training table contains non-finite values".into()));
    }
    check_dim(train.n_features(), validation.n_features())?;
    let mut model = MlpModel::init(train.n_features(), &config.hidden, config.seed)?;
    let mut rng = rng_from(config.seed ^ 0xA5A5_5A5A_0F0F_F0F0);
    let mut order: Vec<usize> = (0..train.n_rows()).collect();
    let mut grads: Vec<Dense> = model.layers.iter().map(zeroed).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            grads.iter_mut().for_each(|g| {
                g.weights.iter_mut().for_each(|w| *w = 0.0);
                g.bias.iter_mut().for_each(|b| *b = 0.0);
            });
            let mut batch_loss = 0.0;
            for &i in idx {
                let trace = model.forward(train.row(i))?;
                let z = trace.logit();
                let y = train.target()[i] as f64;
                batch_loss += bce_with_logit(z, y);
                model.accumulate_param_grads(&trace, sigmoid(z) - y, &mut grads);
            }
            if !batch_loss.is_finite() {
                return Err(Error::Training { epoch, batch });
            }
            epoch_loss += batch_loss;
            let lr = config.learning_rate / idx.len() as f64;
            for (layer, g) in model.layers.iter_mut().zip(&grads) {
                for (w, gw) in layer.weights.iter_mut().zip(&g.weights) {
                    *w -= lr * gw;
                }
                for (b, gb) in layer.bias.iter_mut().zip(&g.bias) {
                    *b -= lr * gb;
                }
            }
            if model.layers.iter().any(|l| l.weights.iter().any(|w| !w.is_finite())) {
                return Err(Error::Training { epoch, batch });
            }
        }
        let mean = epoch_loss / train.n_rows() as f64;
        log::debug!("epoch {epoch}: loss {mean:.5}");
        epoch_losses.push(mean);
    }

    model.meta = TrainingMeta {
        config: Some(config.clone()),
        epoch_losses,
        train_accuracy: Some(accuracy(&model, train)?),
        validation_accuracy: if validation.n_rows() > 0 {
            Some(accuracy(&model, validation)?)
        } else {
            None
        },
    };
    Ok(model)
}

fn zeroed(layer: &Dense) -> Dense {
    Dense {
        weights: vec![0.0; layer.weights.len()],
        bias: vec![0.0; layer.bias.len()],
        ..layer.clone()
    }
}
