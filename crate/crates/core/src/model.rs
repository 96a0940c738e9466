//! Dense network embedding and the t-SNE supervision term.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::complex::PointCloud;
use crate::error::{Error, Result};

/// Half-width of the uniform initialization interval.
pub const INIT_SCALE: f64 = 0.1;

/// Hidden-layer activation; the output layer is always linear.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Clone, Debug)]
struct ForwardCache {
    n: usize,
    /// Input to each layer, plus the final output.
    activations: Vec<Vec<f64>>,
}

/// Fully connected network mapping `layer_sizes[0]` to `layer_sizes.last()`.
///
/// Parameters are flattened layer by layer, weights (row-major, output by
/// input) then biases.
#[derive(Clone, Debug)]
pub struct DenseNetwork {
    layer_sizes: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
    cache: Option<ForwardCache>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    layer_sizes: Vec<usize>,
    #[serde(default)]
    activation: Activation,
    parameters: Vec<f64>,
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl DenseNetwork {
    /// Widths `d_in -> 32 -> 32 -> 32 -> d_out`.
    pub fn default_sizes(d_in: usize, d_out: usize) -> Vec<usize> {
        vec![d_in, 32, 32, 32, d_out]
    }

    /// Network with every parameter drawn uniformly from
    /// `[-INIT_SCALE, INIT_SCALE]` by a ChaCha8 generator seeded with `seed`.
    pub fn new(layer_sizes: Vec<usize>, seed: u64) -> Result<Self> {
        Self::check_sizes(&layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = (0..param_count(&layer_sizes))
            .map(|_| rng.random_range(-INIT_SCALE..=INIT_SCALE))
            .collect();
        Ok(Self {
            layer_sizes,
            activation: Activation::Tanh,
            params,
            cache: None,
        })
    }

    pub fn from_parameters(layer_sizes: Vec<usize>, activation: Activation, params: Vec<f64>) -> Result<Self> {
        Self::check_sizes(&layer_sizes)?;
        let expected = param_count(&layer_sizes);
        if params.len() != expected {
            return Err(Error::invalid(format!(
                "expected {expected} parameters for layers {layer_sizes:?}, got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("parameters must be finite"));
        }
        Ok(Self {
            layer_sizes,
            activation,
            params,
            cache: None,
        })
    }

    fn check_sizes(sizes: &[usize]) -> Result<()> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::invalid(format!(
                "layer sizes {sizes:?} need at least two positive widths"
            )));
        }
        Ok(())
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self.cache = None;
        self
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn num_parameters(&self) -> usize {
        self.params.len()
    }

    /// Replaces the parameters and drops any cached forward pass.
    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        self.params.copy_from_slice(params);
        self.cache = None;
        Ok(())
    }

    fn run(&self, x: &PointCloud) -> Result<Vec<Vec<f64>>> {
        if x.dim() != self.input_dim() {
            return Err(Error::invalid(format!(
                "network expects {}-dimensional input, got {}",
                self.input_dim(),
                x.dim()
            )));
        }
        let n = x.len();
        let layers = self.layer_sizes.len() - 1;
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(x.as_flat().to_vec());
        let mut offset = 0;
        for l in 0..layers {
            let (din, dout) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let w = &self.params[offset..offset + din * dout];
            let b = &self.params[offset + din * dout..offset + din * dout + dout];
            offset += din * dout + dout;
            let input = &acts[l];
            let hidden = l + 1 < layers;
            let mut out = vec![0.0; n * dout];
            for i in 0..n {
                let row = &input[i * din..(i + 1) * din];
                for o in 0..dout {
                    let z = b[o] + w[o * din..(o + 1) * din].iter().zip(row).map(|(a, c)| a * c).sum::<f64>();
                    out[i * dout + o] = if hidden { self.activation.apply(z) } else { z };
                }
            }
            acts.push(out);
        }
        Ok(acts)
    }

    fn to_cloud(&self, flat: Vec<f64>) -> Result<PointCloud> {
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                component: "embedding",
                iteration: 0,
            });
        }
        PointCloud::from_flat(self.output_dim(), flat)
    }

    /// Forward pass that keeps the activations for [`DenseNetwork::backward`].
    pub fn forward(&mut self, x: &PointCloud) -> Result<PointCloud> {
        let acts = self.run(x)?;
        let out = acts.last().unwrap().clone();
        self.cache = Some(ForwardCache {
            n: x.len(),
            activations: acts,
        });
        self.to_cloud(out)
    }

    /// Forward pass without caching.
    pub fn predict(&self, x: &PointCloud) -> Result<PointCloud> {
        let mut acts = self.run(x)?;
        self.to_cloud(acts.pop().unwrap())
    }

    /// Gradient with respect to the flat parameters, given the gradient with
    /// respect to the flat output of the last forward pass.
    pub fn backward(&self, upstream: &[f64]) -> Result<Vec<f64>> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("backward called before forward".into()))?;
        let n = cache.n;
        let layers = self.layer_sizes.len() - 1;
        if upstream.len() != n * self.output_dim() {
            return Err(Error::invalid(format!(
                "upstream gradient has {} entries, expected {}",
                upstream.len(),
                n * self.output_dim()
            )));
        }
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for l in 0..layers {
            offsets.push(off);
            off += self.layer_sizes[l] * self.layer_sizes[l + 1] + self.layer_sizes[l + 1];
        }
        let mut grad = vec![0.0; self.params.len()];
        // delta: gradient w.r.t. the pre-activation of layer l's output
        let mut delta = upstream.to_vec();
        for l in (0..layers).rev() {
            let (din, dout) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let input = &cache.activations[l];
            let off = offsets[l];
            for i in 0..n {
                let row = &input[i * din..(i + 1) * din];
                for o in 0..dout {
                    let d = delta[i * dout + o];
                    if d == 0.0 {
                        continue;
                    }
                    let gw = &mut grad[off + o * din..off + (o + 1) * din];
                    for (g, a) in gw.iter_mut().zip(row) {
                        *g += d * a;
                    }
                    grad[off + din * dout + o] += d;
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[off..off + din * dout];
            let mut next = vec![0.0; n * din];
            for i in 0..n {
                for o in 0..dout {
                    let d = delta[i * dout + o];
                    if d == 0.0 {
                        continue;
                    }
                    for c in 0..din {
                        next[i * din + c] += d * w[o * din + c];
                    }
                }
                for c in 0..din {
                    next[i * din + c] *= self.activation.derivative_from_output(input[i * din + c]);
                }
            }
            delta = next;
        }
        Ok(grad)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&Checkpoint {
            layer_sizes: self.layer_sizes.clone(),
            activation: self.activation,
            parameters: self.params.clone(),
        })?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(s)?;
        Self::from_parameters(c.layer_sizes, c.activation, c.parameters)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// Symmetric `n x n` probability matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Affinities {
    n: usize,
    values: Vec<f64>,
}

impl Affinities {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Per-point bandwidth found by calibration and the perplexity it reaches.
#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub target: f64,
    pub sigmas: Vec<f64>,
    pub perplexities: Vec<f64>,
}

pub const PERPLEXITY_TOLERANCE: f64 = 1e-5;
pub const PERPLEXITY_MAX_STEPS: usize = 50;
pub const SIGMA_FLOOR: f64 = 1e-12;

fn squared_distances(x: &PointCloud) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = x.point(i).iter().zip(x.point(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            d[i * n + j] = s;
            d[j * n + i] = s;
        }
    }
    d
}

/// Conditional row `p_{j|i}` for bandwidth `sigma` over squared distances
/// `d2` (entry `i` ignored). Returns the row and its perplexity `exp(H)`.
fn conditional_row(d2: &[f64], i: usize, beta: f64) -> (Vec<f64>, f64) {
    let min = d2
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min);
    let mut row: Vec<f64> = d2
        .iter()
        .enumerate()
        .map(|(j, &v)| if j == i { 0.0 } else { (-(v - min) * beta).exp() })
        .collect();
    let z: f64 = row.iter().sum();
    let mut h = 0.0;
    for p in row.iter_mut() {
        *p /= z;
        if *p > 0.0 {
            h -= *p * p.ln();
        }
    }
    (row, h.exp())
}

/// Perplexity of point `i`'s conditional distribution at bandwidth `sigma`.
pub fn conditional_perplexity(x: &PointCloud, i: usize, sigma: f64) -> f64 {
    let n = x.len();
    let d2: Vec<f64> = (0..n)
        .map(|j| x.point(i).iter().zip(x.point(j)).map(|(a, b)| (a - b) * (a - b)).sum())
        .collect();
    conditional_row(&d2, i, 1.0 / (2.0 * sigma * sigma)).1
}

/// High-dimensional joint affinities `P_ij = (p_{j|i} + p_{i|j}) / 2N`, with
/// each row's bandwidth found by bisection on the log precision.
pub fn compute_p(x: &PointCloud, perplexity: f64) -> Result<(Affinities, Calibration)> {
    let n = x.len();
    if n < 3 {
        return Err(Error::invalid("high-dimensional affinities need at least three points"));
    }
    if !(perplexity > 1.0 && perplexity < n as f64) {
        return Err(Error::invalid(format!(
            "perplexity must lie in (1, {n}), got {perplexity}"
        )));
    }
    let d2 = squared_distances(x);
    let mut cond = vec![0.0; n * n];
    let mut sigmas = Vec::with_capacity(n);
    let mut perps = Vec::with_capacity(n);
    for i in 0..n {
        let row = &d2[i * n..(i + 1) * n];
        let mut shifted: Vec<f64> = row
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &v)| v)
            .collect();
        let min = shifted.iter().copied().fold(f64::INFINITY, f64::min);
        shifted.iter_mut().for_each(|v| *v -= min);
        let max = shifted.iter().copied().fold(0.0, f64::max);
        let gap = shifted.iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
        let (mut lo, mut hi) = if max > 0.0 {
            ((1e-4 / max).ln(), (50.0 / gap).ln())
        } else {
            (0.0, 0.0)
        };
        let mut log_beta = 0.5 * (lo + hi);
        let (mut p_row, mut perp) = conditional_row(row, i, log_beta.exp());
        for _ in 0..PERPLEXITY_MAX_STEPS {
            if (perp - perplexity).abs() <= PERPLEXITY_TOLERANCE || hi <= lo {
                break;
            }
            // perplexity falls as the precision grows
            if perp > perplexity {
                lo = log_beta;
            } else {
                hi = log_beta;
            }
            log_beta = 0.5 * (lo + hi);
            (p_row, perp) = conditional_row(row, i, log_beta.exp());
        }
        cond[i * n..(i + 1) * n].copy_from_slice(&p_row);
        sigmas.push((0.5 / log_beta.exp()).sqrt().max(SIGMA_FLOOR));
        perps.push(perp);
    }
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            values[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64);
        }
    }
    Ok((
        Affinities { n, values },
        Calibration {
            target: perplexity,
            sigmas,
            perplexities: perps,
        },
    ))
}

/// Student-t joint affinities of an embedding.
pub fn compute_q(y: &PointCloud) -> Result<Affinities> {
    let n = y.len();
    if n < 2 {
        return Err(Error::invalid("affinities need at least two points"));
    }
    let kernel = student_kernel(y);
    let z: f64 = kernel.iter().sum();
    Ok(Affinities {
        n,
        values: kernel.into_iter().map(|k| k / z).collect(),
    })
}

fn student_kernel(y: &PointCloud) -> Vec<f64> {
    let n = y.len();
    let d2 = squared_distances(y);
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                k[i * n + j] = 1.0 / (1.0 + d2[i * n + j]);
            }
        }
    }
    k
}

/// `KL(P || Q)` and its gradient with respect to the flat embedding.
pub fn supervision_loss_and_grad(p: &Affinities, y: &PointCloud) -> Result<(f64, Vec<f64>)> {
    let n = y.len();
    if p.len() != n {
        return Err(Error::invalid(format!(
            "affinities are {}x{} but the embedding has {n} points",
            p.len(),
            p.len()
        )));
    }
    let q = compute_q(y)?;
    let kernel = student_kernel(y);
    let mut loss = 0.0;
    for (&pij, &qij) in p.values().iter().zip(q.values()) {
        if pij > 0.0 {
            loss += pij * (pij / qij).ln();
        }
    }
    let d = y.dim();
    let mut grad = vec![0.0; n * d];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let c = 4.0 * (p.get(i, j) - q.get(i, j)) * kernel[i * n + j];
            for k in 0..d {
                grad[i * d + k] += c * (y.point(i)[k] - y.point(j)[k]);
            }
        }
    }
    Ok((loss, grad))
}
