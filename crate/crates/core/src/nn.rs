//! Feed-forward multilayer perceptron with hand-written backpropagation.
//!
//! Weights are stored per layer as row-major matrices with one row per
//! destination unit, so `W[j][k]` connects source unit `k` to unit `j`.
//! Batched work goes through `matrixmultiply::dgemm`; the single-sample
//! entry points are the batched ones with a batch of one, which keeps the
//! two paths bitwise consistent.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation's output `h`.
    #[inline]
    fn derivative_at_output(self, h: f64) -> f64 {
        match self {
            Activation::Relu => {
                if h > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - h * h,
            Activation::Linear => 1.0,
        }
    }
}

/// Layer widths (input first, output last) and one activation per non-input layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    sizes: Vec<usize>,
    activations: Vec<Activation>,
}

impl LayerSpec {
    pub fn new(sizes: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::Config(format!(
                "a network needs at least an input and an output layer, got {} sizes",
                sizes.len()
            )));
        }
        if let Some(pos) = sizes.iter().position(|&w| w == 0) {
            return Err(Error::Config(format!("layer {pos} has width 0")));
        }
        if activations.len() != sizes.len() - 1 {
            return Err(Error::Config(format!(
                "{} layer sizes need {} activations, got {}",
                sizes.len(),
                sizes.len() - 1,
                activations.len()
            )));
        }
        Ok(Self { sizes, activations })
    }

    /// Two hidden layers (relu then tanh) feeding a linear output layer.
    pub fn two_hidden(input: usize, hidden1: usize, hidden2: usize, output: usize) -> Result<Self> {
        Self::new(
            vec![input, hidden1, hidden2, output],
            vec![Activation::Relu, Activation::Tanh, Activation::Linear],
        )
    }

    /// `[8, 128, 256, 4]` with relu, tanh, linear.
    pub fn lander_default() -> Self {
        Self::two_hidden(8, 128, 256, 4).expect("static spec is valid")
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn input_width(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_width(&self) -> usize {
        self.sizes[self.sizes.len() - 1]
    }

    pub fn num_layers(&self) -> usize {
        self.activations.len()
    }
}

/// Weight matrix and bias vector of one layer. Also used for gradients and
/// optimizer moments, which share the parameter shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            biases: vec![0.0; rows],
        }
    }

    pub(crate) fn from_parts(
        rows: usize,
        cols: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
    ) -> Result<Self> {
        if weights.len() != rows * cols {
            return Err(Error::shape("layer weights", rows * cols, weights.len()));
        }
        if biases.len() != rows {
            return Err(Error::shape("layer biases", rows, biases.len()));
        }
        Ok(Self {
            rows,
            cols,
            weights,
            biases,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major, `rows * cols` entries.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.cols + col]
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    pub fn weight_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.weights.chunks(self.cols)
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.biases.iter())
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.biases.iter_mut())
    }

    fn same_shape(&self, other: &Dense) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }
}

/// A set of per-layer blocks shaped like some network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(params: &MlpParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| Dense::zeros(l.rows, l.cols))
                .collect(),
        }
    }

    pub(crate) fn from_layers(layers: Vec<Dense>) -> Self {
        Self { layers }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    /// Every entry in layer order, weights before biases within a layer.
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(Dense::values)
    }

    pub(crate) fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(Dense::values_mut)
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub(crate) fn matches(&self, params: &MlpParams) -> bool {
        self.layers.len() == params.layers.len()
            && self
                .layers
                .iter()
                .zip(&params.layers)
                .all(|(g, p)| g.same_shape(p))
    }
}

/// One training sample for the masked squared-error objective
/// `(target - output[action])^2`.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub input: &'a [f64],
    pub target: f64,
    pub action: usize,
}

/// Network parameters: one [`Dense`] block per non-input layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    spec: LayerSpec,
    layers: Vec<Dense>,
}

impl MlpParams {
    /// Glorot-uniform weights, zero biases. Deterministic in `seed`.
    pub fn init(spec: &LayerSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = spec
            .sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let mut layer = Dense::zeros(fan_out, fan_in);
                for v in &mut layer.weights {
                    *v = rng.random_range(-bound..=bound);
                }
                layer
            })
            .collect();
        Self {
            spec: spec.clone(),
            layers,
        }
    }

    /// All-zero weights and biases.
    pub fn zeros(spec: &LayerSpec) -> Self {
        let layers = spec
            .sizes
            .windows(2)
            .map(|w| Dense::zeros(w[1], w[0]))
            .collect();
        Self {
            spec: spec.clone(),
            layers,
        }
    }

    pub(crate) fn from_layers(spec: LayerSpec, layers: Vec<Dense>) -> Result<Self> {
        if layers.len() != spec.num_layers() {
            return Err(Error::shape("layer count", spec.num_layers(), layers.len()));
        }
        for (layer, w) in layers.iter().zip(spec.sizes.windows(2)) {
            if layer.cols != w[0] {
                return Err(Error::shape("layer input width", w[0], layer.cols));
            }
            if layer.rows != w[1] {
                return Err(Error::shape("layer output width", w[1], layer.rows));
            }
        }
        let params = Self { spec, layers };
        if !params.is_finite() {
            return Err(Error::Numeric("non-finite parameter".into()));
        }
        Ok(params)
    }

    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(Dense::values)
    }

    pub(crate) fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(Dense::values_mut)
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    /// Overwrite `self` with `src` without reallocating.
    pub fn copy_from(&mut self, src: &MlpParams) -> Result<()> {
        if self.spec != src.spec {
            return Err(Error::Config(
                "cannot copy between different layer specs".into(),
            ));
        }
        for (dst, s) in self.layers.iter_mut().zip(&src.layers) {
            dst.weights.copy_from_slice(&s.weights);
            dst.biases.copy_from_slice(&s.biases);
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.forward_batch(input, 1)
    }

    /// Forward pass over `batch` inputs stored back to back in `inputs`.
    /// Returns `batch * output_width` values, one row per input.
    pub fn forward_batch(&self, inputs: &[f64], batch: usize) -> Result<Vec<f64>> {
        let mut acts = self.forward_cached(inputs, batch)?;
        Ok(acts.pop().expect("at least one layer"))
    }

    /// Runs the network and keeps every layer's post-activation output;
    /// index 0 is a copy of the input.
    fn forward_cached(&self, inputs: &[f64], batch: usize) -> Result<Vec<Vec<f64>>> {
        let in_width = self.spec.input_width();
        if batch == 0 {
            return Err(Error::Argument(
                "batch must contain at least one input".into(),
            ));
        }
        if inputs.len() != batch * in_width {
            return Err(Error::shape(
                "forward input",
                batch * in_width,
                inputs.len(),
            ));
        }
        if let Some(v) = inputs.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite input {v}")));
        }

        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(inputs.to_vec());
        for (li, (layer, act)) in self.layers.iter().zip(&self.spec.activations).enumerate() {
            let prev = &acts[li];
            let mut out = vec![0.0; batch * layer.rows];
            // out (batch x rows) = prev (batch x cols) * W^T (cols x rows)
            unsafe {
                matrixmultiply::dgemm(
                    batch,
                    layer.cols,
                    layer.rows,
                    1.0,
                    prev.as_ptr(),
                    layer.cols as isize,
                    1,
                    layer.weights.as_ptr(),
                    1,
                    layer.cols as isize,
                    0.0,
                    out.as_mut_ptr(),
                    layer.rows as isize,
                    1,
                );
            }
            for row in out.chunks_mut(layer.rows) {
                for (z, b) in row.iter_mut().zip(&layer.biases) {
                    *z += b;
                    if !z.is_finite() {
                        return Err(Error::Numeric(format!(
                            "non-finite pre-activation in layer {}",
                            li + 1
                        )));
                    }
                    *z = act.apply(*z);
                }
            }
            acts.push(out);
        }
        Ok(acts)
    }

    /// Exact gradient of `(target - output[action])^2` for one input.
    pub fn backward(&self, input: &[f64], target: f64, action: usize) -> Result<Gradients> {
        self.masked_mse(input, &[target], &[action]).map(|(_, g)| g)
    }

    /// Mean of the per-sample [`backward`](Self::backward) gradients.
    pub fn batch_gradient(&self, samples: &[Sample<'_>]) -> Result<Gradients> {
        if samples.is_empty() {
            return Err(Error::Argument("batch must be non-empty".into()));
        }
        let width = self.spec.input_width();
        let mut inputs = Vec::with_capacity(samples.len() * width);
        for s in samples {
            if s.input.len() != width {
                return Err(Error::shape("sample input", width, s.input.len()));
            }
            inputs.extend_from_slice(s.input);
        }
        let targets: Vec<f64> = samples.iter().map(|s| s.target).collect();
        let actions: Vec<usize> = samples.iter().map(|s| s.action).collect();
        self.masked_mse(&inputs, &targets, &actions).map(|(_, g)| g)
    }

    /// Mean masked squared error over a batch and its gradient.
    ///
    /// `inputs` holds `targets.len()` rows back to back. Only the output
    /// unit selected by each sample's action carries error, so output-layer
    /// rows of unselected units receive exactly zero gradient.
    pub fn masked_mse(
        &self,
        inputs: &[f64],
        targets: &[f64],
        actions: &[usize],
    ) -> Result<(f64, Gradients)> {
        let batch = targets.len();
        if batch == 0 {
            return Err(Error::Argument("batch must be non-empty".into()));
        }
        if actions.len() != batch {
            return Err(Error::shape("batch actions", batch, actions.len()));
        }
        let out_width = self.spec.output_width();
        if let Some(&a) = actions.iter().find(|&&a| a >= out_width) {
            return Err(Error::Argument(format!(
                "action index {a} out of range for {out_width} outputs"
            )));
        }
        if let Some(t) = targets.iter().find(|t| !t.is_finite()) {
            return Err(Error::Numeric(format!("non-finite target {t}")));
        }

        let acts = self.forward_cached(inputs, batch)?;
        let output = &acts[acts.len() - 1];
        let scale = 1.0 / batch as f64;

        let mut loss = 0.0;
        let mut delta = vec![0.0; batch * out_width];
        for (i, (&y, &a)) in targets.iter().zip(actions).enumerate() {
            let residual = output[i * out_width + a] - y;
            loss += residual * residual;
            delta[i * out_width + a] = scale * 2.0 * residual;
        }
        loss *= scale;

        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let act = self.spec.activations[li];
            let (rows, cols) = (layer.rows, layer.cols);
            for (d, &h) in delta.iter_mut().zip(&acts[li + 1]) {
                *d *= act.derivative_at_output(h);
            }

            let prev = &acts[li];
            let mut g = Dense::zeros(rows, cols);
            // dW (rows x cols) = delta^T (rows x batch) * prev (batch x cols)
            unsafe {
                matrixmultiply::dgemm(
                    rows,
                    batch,
                    cols,
                    1.0,
                    delta.as_ptr(),
                    1,
                    rows as isize,
                    prev.as_ptr(),
                    cols as isize,
                    1,
                    0.0,
                    g.weights.as_mut_ptr(),
                    cols as isize,
                    1,
                );
            }
            for row in delta.chunks(rows) {
                for (b, d) in g.biases.iter_mut().zip(row) {
                    *b += d;
                }
            }
            grads.push(g);

            if li > 0 {
                let mut next = vec![0.0; batch * cols];
                // delta_prev (batch x cols) = delta (batch x rows) * W (rows x cols)
                unsafe {
                    matrixmultiply::dgemm(
                        batch,
                        rows,
                        cols,
                        1.0,
                        delta.as_ptr(),
                        rows as isize,
                        1,
                        layer.weights.as_ptr(),
                        cols as isize,
                        1,
                        0.0,
                        next.as_mut_ptr(),
                        cols as isize,
                        1,
                    );
                }
                delta = next;
            }
        }
        grads.reverse();
        Ok((loss, Gradients::from_layers(grads)))
    }
}

/// Bitwise-equal, independent copy of `src`.
pub fn copy_params(src: &MlpParams) -> MlpParams {
    src.clone()
}

/// Index of the largest value, ties resolved toward the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
