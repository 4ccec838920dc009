//! Dense feed-forward networks with exact reverse-mode gradients.
//!
//! Batches are row-major: one sample per row. Weight matrices are stored
//! `[out x in]`, so a layer computes `x W^T + b`.

mod adam;

pub use adam::{adam_step, AdamConfig, AdamState};

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        if self == Activation::Relu {
            z.mapv_inplace(|v| v.max(0.0));
        }
    }
}

/// Transform applied to the last layer's affine output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OutputTransform {
    Identity,
    /// `mid + half_range * tanh(z)` per dimension, mapping onto `[low, high]`.
    Bounded { low: Vec<f64>, high: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Array2::zeros((output, input)),
            bias: Array1::zeros(output),
        }
    }

    pub fn input_width(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_width(&self) -> usize {
        self.weight.nrows()
    }

    fn same_shape(&self, other: &Dense) -> bool {
        self.weight.dim() == other.weight.dim() && self.bias.len() == other.bias.len()
    }
}

/// Layer weights of a network, also used for gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub layers: Vec<Dense>,
}

impl Params {
    pub fn zeros_like(other: &Params) -> Self {
        Self {
            layers: other
                .layers
                .iter()
                .map(|l| Dense::zeros(l.input_width(), l.output_width()))
                .collect(),
        }
    }

    pub fn same_shape(&self, other: &Params) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| a.same_shape(b))
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }

    pub fn len(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All entries, layer by layer, weights before biases.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn max_abs_diff(&self, other: &Params) -> f64 {
        self.iter()
            .zip(other.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn scale(&mut self, k: f64) {
        for v in self.iter_mut() {
            *v *= k;
        }
    }
}

/// Dense network: affine layers, a hidden activation between them, and an output transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    params: Params,
    hidden: Activation,
    output: OutputTransform,
}

/// Intermediate values of a forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `activations[i]` is the input of layer `i`; the last entry is the network output.
    activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    /// Network input, hidden activations, then output.
    pub fn activations(&self) -> &[Array2<f64>] {
        &self.activations
    }

    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("cache holds at least the input")
    }
}

impl Network {
    pub fn new(layers: Vec<Dense>, hidden: Activation, output: OutputTransform) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::shape("network needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.output_width() {
                return Err(Error::shape(format!(
                    "layer {i}: bias length {} but {} outputs",
                    l.bias.len(),
                    l.output_width()
                )));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_width() != pair[1].input_width() {
                return Err(Error::shape(format!(
                    "layer {i} outputs {} values but layer {} expects {}",
                    pair[0].output_width(),
                    i + 1,
                    pair[1].input_width()
                )));
            }
        }
        let out = layers.last().map(Dense::output_width).unwrap_or(0);
        if let OutputTransform::Bounded { low, high } = &output {
            if low.len() != out || high.len() != out {
                return Err(Error::shape(format!(
                    "output bounds have {} / {} entries for {out} outputs",
                    low.len(),
                    high.len()
                )));
            }
            if low.iter().zip(high).any(|(l, h)| l.partial_cmp(h) != Some(std::cmp::Ordering::Less)) {
                return Err(Error::domain("output bounds need low < high"));
            }
        }
        let params = Params { layers };
        if !params.is_finite() {
            return Err(Error::NonFinite("network parameters".into()));
        }
        Ok(Self { params, hidden, output })
    }

    /// Random network with layer widths `sizes` (input first), weights and biases
    /// uniform in `±1/sqrt(fan_in)`.
    pub fn init<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        output: OutputTransform,
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::shape(format!("invalid layer sizes {sizes:?}")));
        }
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let weight = Array2::from_shape_simple_fn((fan_out, fan_in), || {
                    rng.random_range(-bound..bound)
                });
                let bias = Array1::from_shape_simple_fn(fan_out, || rng.random_range(-bound..bound));
                Dense { weight, bias }
            })
            .collect();
        Self::new(layers, hidden, output)
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    /// Mutable access to the weights. Layer shapes must not be changed.
    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    pub fn layers(&self) -> &[Dense] {
        &self.params.layers
    }

    pub fn output_transform(&self) -> &OutputTransform {
        &self.output
    }

    pub fn input_width(&self) -> usize {
        self.params.layers[0].input_width()
    }

    pub fn output_width(&self) -> usize {
        self.params.layers.last().map(Dense::output_width).unwrap_or(0)
    }

    fn check_input(&self, input: &ArrayView2<f64>) -> Result<()> {
        if input.ncols() != self.input_width() {
            return Err(Error::shape(format!(
                "input width {} but network expects {}",
                input.ncols(),
                self.input_width()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&input)?;
        let mut x = affine(&self.params.layers[0], input);
        for layer in &self.params.layers[1..] {
            self.hidden.apply(&mut x);
            x = affine(layer, x.view());
        }
        self.apply_output(&mut x);
        Ok(x)
    }

    /// Forward pass for a single sample.
    pub fn forward_one(&self, input: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::shape(e.to_string()))?;
        Ok(self.forward(view)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_cached(&self, input: ArrayView2<f64>) -> Result<ForwardCache> {
        self.check_input(&input)?;
        let last = self.params.layers.len() - 1;
        let mut activations = Vec::with_capacity(last + 2);
        activations.push(input.to_owned());
        for (i, layer) in self.params.layers.iter().enumerate() {
            let mut z = affine(layer, activations[i].view());
            if i < last {
                self.hidden.apply(&mut z);
            } else {
                self.apply_output(&mut z);
            }
            activations.push(z);
        }
        Ok(ForwardCache { activations })
    }

    fn apply_output(&self, z: &mut Array2<f64>) {
        if let OutputTransform::Bounded { low, high } = &self.output {
            for mut row in z.rows_mut() {
                for (j, v) in row.iter_mut().enumerate() {
                    let mid = 0.5 * (low[j] + high[j]);
                    let half = 0.5 * (high[j] - low[j]);
                    *v = (mid + half * v.tanh()).clamp(low[j], high[j]);
                }
            }
        }
    }

    /// Backpropagate `d_output` (gradient w.r.t. the network output) through a cached pass.
    ///
    /// Returns parameter gradients and the gradient w.r.t. the network input.
    pub fn backward(&self, cache: &ForwardCache, d_output: ArrayView2<f64>) -> Result<(Params, Array2<f64>)> {
        let out = cache.output();
        if d_output.dim() != out.dim() {
            return Err(Error::shape(format!(
                "output gradient {:?} but output {:?}",
                d_output.dim(),
                out.dim()
            )));
        }
        let mut delta = d_output.to_owned();
        if let OutputTransform::Bounded { low, high } = &self.output {
            // a = mid + half * tanh(z)  =>  da/dz = half * (1 - tanh^2) = (half^2 - (a - mid)^2) / half
            Zip::from(delta.rows_mut()).and(out.rows()).for_each(|mut d, a| {
                for j in 0..d.len() {
                    let mid = 0.5 * (low[j] + high[j]);
                    let half = 0.5 * (high[j] - low[j]);
                    let t = (a[j] - mid) / half;
                    d[j] *= half * (1.0 - t * t);
                }
            });
        }
        let layers = &self.params.layers;
        let mut grads: Vec<Dense> = Vec::with_capacity(layers.len());
        for i in (0..layers.len()).rev() {
            let input = &cache.activations[i];
            let weight = delta.t().dot(input);
            let bias = delta.sum_axis(Axis(0));
            let d_input = delta.dot(&layers[i].weight);
            grads.push(Dense { weight, bias });
            delta = d_input;
            if i > 0 && self.hidden == Activation::Relu {
                Zip::from(&mut delta).and(input).for_each(|d, &h| {
                    if h <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
        }
        grads.reverse();
        Ok((Params { layers: grads }, delta))
    }
}

fn affine(layer: &Dense, x: ArrayView2<f64>) -> Array2<f64> {
    let mut z = x.dot(&layer.weight.t());
    z += &layer.bias;
    z
}

/// Gradient of the mean squared error `mean((net(x) - target)^2)` over all batch entries.
pub fn grad_mse(net: &Network, inputs: ArrayView2<f64>, targets: ArrayView2<f64>) -> Result<(Params, f64)> {
    if inputs.nrows() != targets.nrows() || targets.ncols() != net.output_width() {
        return Err(Error::shape(format!(
            "inputs {:?}, targets {:?}, network output width {}",
            inputs.dim(),
            targets.dim(),
            net.output_width()
        )));
    }
    let cache = net.forward_cached(inputs)?;
    let residual = cache.output() - &targets;
    let count = residual.len().max(1) as f64;
    let loss = residual.iter().map(|r| r * r).sum::<f64>() / count;
    let d_out = residual.mapv(|r| 2.0 * r / count);
    let (grads, _) = net.backward(&cache, d_out.view())?;
    Ok((grads, loss))
}

/// Deterministic policy gradient: gradient of `mean_s Q(s, actor(s))` with respect to
/// the actor's parameters only. The critic takes `[state, action]` concatenated.
///
/// Returns the gradient (an ascent direction) and the objective value.
pub fn grad_dpg(actor: &Network, critic: &Network, states: ArrayView2<f64>) -> Result<(Params, f64)> {
    let obs = states.ncols();
    if critic.input_width() != obs + actor.output_width() || critic.output_width() != 1 {
        return Err(Error::shape(format!(
            "critic input {} / output {} incompatible with state width {obs} and action width {}",
            critic.input_width(),
            critic.output_width(),
            actor.output_width()
        )));
    }
    let actor_cache = actor.forward_cached(states)?;
    let joint = concat_columns(states, actor_cache.output().view());
    let critic_cache = critic.forward_cached(joint.view())?;
    let batch = states.nrows().max(1) as f64;
    let objective = critic_cache.output().sum() / batch;
    let d_q = Array2::from_elem((states.nrows(), 1), 1.0 / batch);
    let (_, d_joint) = critic.backward(&critic_cache, d_q.view())?;
    let d_action = d_joint.slice(ndarray::s![.., obs..]).to_owned();
    let (grads, _) = actor.backward(&actor_cache, d_action.view())?;
    Ok((grads, objective))
}

/// Polyak averaging `target <- tau * source + (1 - tau) * target`.
pub fn soft_update(target: &mut Network, source: &Network, tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::domain(format!("tau must lie in [0, 1], got {tau}")));
    }
    if !target.params.same_shape(&source.params) {
        return Err(Error::shape("soft update between differently shaped networks"));
    }
    for (t, s) in target.params.layers.iter_mut().zip(&source.params.layers) {
        Zip::from(&mut t.weight).and(&s.weight).for_each(|t, &s| *t = tau * s + (1.0 - tau) * *t);
        Zip::from(&mut t.bias).and(&s.bias).for_each(|t, &s| *t = tau * s + (1.0 - tau) * *t);
    }
    Ok(())
}

/// `[a | b]` column-wise.
pub fn concat_columns(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    ndarray::concatenate(Axis(1), &[a, b]).expect("row counts agree")
}
