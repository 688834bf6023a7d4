//! Fully-connected regression network with a flat parameter vector.
//!
//! Parameters are laid out layer by layer: the `out x in` weight matrix in
//! row-major order followed by the `out` biases. Hidden layers use ReLU, the
//! output layer is linear.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::seeding;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// `[input, hidden..., output]`.
    pub layers: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Layer {
    offset: usize,
    fan_in: usize,
    fan_out: usize,
}

impl Layer {
    fn weights<'a>(&self, theta: &'a [f64]) -> &'a [f64] {
        &theta[self.offset..self.offset + self.fan_in * self.fan_out]
    }

    fn bias<'a>(&self, theta: &'a [f64]) -> &'a [f64] {
        let start = self.offset + self.fan_in * self.fan_out;
        &theta[start..start + self.fan_out]
    }

    fn len(&self) -> usize {
        (self.fan_in + 1) * self.fan_out
    }
}

impl MlpSpec {
    pub fn new(input: usize, hidden: &[usize], output: usize) -> Result<Self> {
        let mut layers = vec![input];
        layers.extend_from_slice(hidden);
        layers.push(output);
        let spec = Self { layers };
        spec.validate()?;
        Ok(spec)
    }

    /// `3P` inputs, two 1024-wide hidden layers, `2N` outputs.
    pub fn default_for(cfg: &SystemConfig) -> Self {
        Self {
            layers: vec![3 * cfg.pilots, 1024, 1024, 2 * cfg.n_antennas],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.len() < 2 || self.layers.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "network needs >= 2 non-empty layers, got {:?}",
                self.layers
            )));
        }
        Ok(())
    }

    pub fn input_len(&self) -> usize {
        self.layers[0]
    }

    pub fn output_len(&self) -> usize {
        *self.layers.last().expect("validated spec")
    }

    /// Z = sum over layers of `(fan_in + 1) * fan_out`.
    pub fn param_count(&self) -> usize {
        self.layer_table().iter().map(Layer::len).sum()
    }

    fn layer_table(&self) -> Vec<Layer> {
        let mut offset = 0;
        self.layers
            .windows(2)
            .map(|w| {
                let layer = Layer {
                    offset,
                    fan_in: w[0],
                    fan_out: w[1],
                };
                offset += layer.len();
                layer
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub spec: MlpSpec,
    pub theta: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(spec: MlpSpec) -> Self {
        let theta = vec![0.0; spec.param_count()];
        Self { spec, theta }
    }

    /// He-uniform weights, zero biases.
    pub fn init(spec: MlpSpec, seed: u64) -> Self {
        let mut rng = seeding::rng(seed);
        let mut theta = vec![0.0; spec.param_count()];
        for layer in spec.layer_table() {
            let bound = (6.0 / layer.fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            let n = layer.fan_in * layer.fan_out;
            for w in &mut theta[layer.offset..layer.offset + n] {
                *w = dist.sample(&mut rng);
            }
        }
        Self { spec, theta }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        check_theta(&self.spec, &self.theta)?;
        if self.theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite model parameter".into()));
        }
        Ok(())
    }
}

fn check_theta(spec: &MlpSpec, theta: &[f64]) -> Result<()> {
    if theta.len() != spec.param_count() {
        return Err(Error::DimensionMismatch {
            what: "parameter vector",
            expected: spec.param_count(),
            got: theta.len(),
        });
    }
    Ok(())
}

/// Forward pass for a single input vector.
pub fn model_forward(spec: &MlpSpec, theta: &[f64], input: &[f64]) -> Result<Vec<f64>> {
    if input.len() != spec.input_len() {
        return Err(Error::DimensionMismatch {
            what: "network input",
            expected: spec.input_len(),
            got: input.len(),
        });
    }
    let x = DMatrix::from_row_slice(1, input.len(), input);
    Ok(forward_batch(spec, theta, &x)?.as_slice().to_vec())
}

/// Forward pass for a batch, one sample per row.
pub fn forward_batch(spec: &MlpSpec, theta: &[f64], inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_theta(spec, theta)?;
    check_inputs(spec, inputs)?;
    let layers = spec.layer_table();
    let mut a = inputs.clone();
    for (i, layer) in layers.iter().enumerate() {
        let mut z = affine(layer, theta, &a);
        if i + 1 < layers.len() {
            z.apply(|v| *v = v.max(0.0));
        }
        a = z;
    }
    Ok(a)
}

fn check_inputs(spec: &MlpSpec, inputs: &DMatrix<f64>) -> Result<()> {
    if inputs.ncols() != spec.input_len() {
        return Err(Error::DimensionMismatch {
            what: "network input",
            expected: spec.input_len(),
            got: inputs.ncols(),
        });
    }
    Ok(())
}

/// `A W^T + 1 b^T`. The row-major `out x in` weights are exactly the
/// column-major storage of `W^T`.
fn affine(layer: &Layer, theta: &[f64], a: &DMatrix<f64>) -> DMatrix<f64> {
    let wt = DMatrix::from_column_slice(layer.fan_in, layer.fan_out, layer.weights(theta));
    let mut z = a * wt;
    let b = layer.bias(theta);
    for (j, mut col) in z.column_iter_mut().enumerate() {
        col.add_scalar_mut(b[j]);
    }
    z
}

/// Mean squared error `(1/D) sum_i ||f(x_i) - y_i||^2` and its gradient.
///
/// With `dropout > 0` every hidden unit is zeroed with that probability
/// (inverted scaling), drawing masks from `rng`.
pub fn loss_and_gradient<R: Rng>(
    spec: &MlpSpec,
    theta: &[f64],
    inputs: &DMatrix<f64>,
    labels: &DMatrix<f64>,
    dropout: f64,
    rng: &mut R,
) -> Result<(f64, Vec<f64>)> {
    check_theta(spec, theta)?;
    check_inputs(spec, inputs)?;
    if labels.shape() != (inputs.nrows(), spec.output_len()) {
        return Err(Error::DimensionMismatch {
            what: "label matrix",
            expected: spec.output_len(),
            got: labels.ncols(),
        });
    }
    let d = inputs.nrows();
    if d == 0 {
        return Err(Error::Empty("training batch"));
    }
    if !(0.0..1.0).contains(&dropout) {
        return Err(Error::InvalidConfig(format!("dropout {dropout} outside [0, 1)")));
    }
    let layers = spec.layer_table();
    let keep = 1.0 - dropout;

    // Forward, keeping each layer's input and the hidden activation masks.
    let mut activations = vec![inputs.clone()];
    let mut masks: Vec<DMatrix<f64>> = Vec::with_capacity(layers.len() - 1);
    for (i, layer) in layers.iter().enumerate() {
        let mut z = affine(layer, theta, &activations[i]);
        if i + 1 < layers.len() {
            let mask = DMatrix::from_fn(z.nrows(), z.ncols(), |r, c| {
                let alive = z[(r, c)] > 0.0 && (dropout == 0.0 || rng.random::<f64>() < keep);
                if alive {
                    1.0 / keep
                } else {
                    0.0
                }
            });
            z.component_mul_assign(&mask);
            masks.push(mask);
        }
        activations.push(z);
    }

    let diff = activations.last().expect("output layer") - labels;
    let loss = diff.norm_squared() / d as f64;

    let mut grad = vec![0.0; theta.len()];
    let mut delta = diff * (2.0 / d as f64);
    for (i, layer) in layers.iter().enumerate().rev() {
        let a_prev = &activations[i];
        // (A^T delta) is in x out column-major, i.e. dW in row-major order.
        let dw = a_prev.transpose() * &delta;
        let n = layer.fan_in * layer.fan_out;
        grad[layer.offset..layer.offset + n].copy_from_slice(dw.as_slice());
        for (j, col) in delta.column_iter().enumerate() {
            grad[layer.offset + n + j] = col.sum();
        }
        if i > 0 {
            let wt = DMatrix::from_column_slice(layer.fan_in, layer.fan_out, layer.weights(theta));
            let mut back = &delta * wt.transpose();
            back.component_mul_assign(&masks[i - 1]);
            delta = back;
        }
    }
    Ok((loss, grad))
}
