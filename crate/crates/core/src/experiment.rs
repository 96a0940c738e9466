//! Synthetic data and the end-to-end embedding pipeline.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::complex::{build_rips, PointCloud};
use crate::error::{Error, Result};
use crate::loss::{GroundTruthDiagram, LossWeights};
use crate::model::{compute_p, DenseNetwork};
use crate::optimizer::{run, OptimizerConfig, Problem, RunOutcome, StepRule};
use crate::persistence::compute_persistence_dim0;

/// Two concentric circles in the `z = 0` plane of R^3, the one of radius
/// `r1` listed first.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CirclesConfig {
    pub n_per_circle: usize,
    pub r1: f64,
    pub r2: f64,
    /// Standard deviation of the Gaussian jitter added to every coordinate.
    pub noise: f64,
}

impl Default for CirclesConfig {
    fn default() -> Self {
        Self {
            n_per_circle: 100,
            r1: 1.0,
            r2: 2.0,
            noise: 0.05,
        }
    }
}

/// Points are evenly spaced in angle.
pub fn generate_nested_circles(cfg: &CirclesConfig, seed: u64) -> Result<PointCloud> {
    if cfg.n_per_circle < 3 {
        return Err(Error::invalid("need at least three points per circle"));
    }
    let positive = |r: f64| r > 0.0 && r.is_finite();
    if !(positive(cfg.r1) && positive(cfg.r2)) || cfg.r1 == cfg.r2 {
        return Err(Error::invalid(format!(
            "radii must be distinct and positive, got {} and {}",
            cfg.r1, cfg.r2
        )));
    }
    if !(cfg.noise >= 0.0 && cfg.noise.is_finite()) {
        return Err(Error::invalid(format!("noise must be finite and non-negative, got {}", cfg.noise)));
    }
    let normal = Normal::new(0.0, cfg.noise)
        .map_err(|e| Error::invalid(format!("noise {}: {e}", cfg.noise)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(2 * cfg.n_per_circle);
    for r in [cfg.r1, cfg.r2] {
        for i in 0..cfg.n_per_circle {
            let a = i as f64 * std::f64::consts::TAU / cfg.n_per_circle as f64;
            let base = [r * a.cos(), r * a.sin(), 0.0];
            rows.push(base.iter().map(|c| c + normal.sample(&mut rng)).collect());
        }
    }
    PointCloud::new(rows)
}

/// Largest finite dimension-0 persistence of the Rips filtration of `cloud`.
pub fn top_persistence(cloud: &PointCloud) -> Result<f64> {
    let d = compute_persistence_dim0(&build_rips(cloud, 1, f64::INFINITY)?)?;
    Ok(d.points
        .iter()
        .filter(|p| !p.is_essential())
        .map(|p| p.persistence())
        .fold(0.0, f64::max))
}

/// Everything needed to reproduce one embedding run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedConfig {
    pub seed: u64,
    pub data: CirclesConfig,
    pub perplexity: f64,
    pub hidden: Vec<usize>,
    pub out_dim: usize,
    pub lambda_topo: f64,
    pub lambda_reg: f64,
    pub k: u32,
    /// Number of ground-truth points taken from the data's diagram.
    pub truth_points: usize,
    /// Homology dimension the topological terms act on.
    pub hom_dim: usize,
    pub step: StepRule,
    pub epsilon: f64,
    pub max_iters: usize,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            data: CirclesConfig::default(),
            perplexity: 30.0,
            hidden: vec![32, 32, 32],
            out_dim: 2,
            lambda_topo: 0.0,
            lambda_reg: 0.0,
            k: 2,
            truth_points: 2,
            hom_dim: 0,
            step: StepRule::Fixed(DEFAULT_ETA),
            epsilon: DEFAULT_EPSILON,
            max_iters: 10_000,
        }
    }
}

/// Step size of the default pipeline. Larger steps break monotone descent
/// once the embedding leaves its collapsed initial state.
pub const DEFAULT_ETA: f64 = 0.01;

/// Stopping tolerance of the default pipeline. The first steps from the
/// near-collapsed initialization decrease the loss by about `1e-8`, so a
/// larger tolerance stops the run before it starts.
pub const DEFAULT_EPSILON: f64 = 1e-9;

impl EmbedConfig {
    pub fn layer_sizes(&self, d_in: usize) -> Vec<usize> {
        let mut s = vec![d_in];
        s.extend(&self.hidden);
        s.push(self.out_dim);
        s
    }

    pub fn optimizer(&self) -> Result<OptimizerConfig> {
        Ok(OptimizerConfig {
            step: self.step,
            weights: LossWeights::new(self.lambda_topo, self.lambda_reg, self.k)?,
            epsilon: self.epsilon,
            max_iters: self.max_iters,
        })
    }

    pub fn with_lambdas(&self, lambda_topo: f64, lambda_reg: f64) -> Self {
        Self {
            lambda_topo,
            lambda_reg,
            ..self.clone()
        }
    }
}

/// Result of [`run_embedding`].
#[derive(Clone, Debug)]
pub struct EmbedOutcome {
    pub x: PointCloud,
    pub truth: GroundTruthDiagram,
    pub network: DenseNetwork,
    pub run: RunOutcome,
    /// Effective perplexity after clamping to the data size.
    pub perplexity: f64,
}

impl EmbedOutcome {
    /// Top dimension-0 persistence of the embedding over that of the data.
    pub fn persistence_ratio(&self) -> Result<f64> {
        Ok(top_persistence(&self.run.y)? / top_persistence(&self.x)?)
    }
}

/// Perplexity cannot usefully exceed a third of the data size.
pub fn effective_perplexity(requested: f64, n: usize) -> f64 {
    requested.min(n as f64 / 3.0)
}

/// Embeds `x` (or freshly generated circles) with the configured loss.
/// Ground truth is taken from the data's Rips diagram unless given.
pub fn run_embedding(
    cfg: &EmbedConfig,
    x: Option<PointCloud>,
    truth: Option<GroundTruthDiagram>,
) -> Result<EmbedOutcome> {
    let x = match x {
        Some(x) => x,
        None => generate_nested_circles(&cfg.data, cfg.seed)?,
    };
    let perplexity = effective_perplexity(cfg.perplexity, x.len());
    let (p, _) = compute_p(&x, perplexity)?;
    let truth = match truth {
        Some(t) => t,
        None => GroundTruthDiagram::from_cloud(&x, cfg.hom_dim, cfg.truth_points, f64::INFINITY)?,
    };
    let mut network = DenseNetwork::new(cfg.layer_sizes(x.dim()), cfg.seed)?;
    let problem = Problem {
        x,
        p,
        truth,
        max_radius: f64::INFINITY,
    };
    let run = run(&mut network, &problem, &cfg.optimizer()?)?;
    Ok(EmbedOutcome {
        x: problem.x,
        truth: problem.truth,
        network,
        run,
        perplexity,
    })
}

/// The `(lambda_topo, lambda_reg)` grid of the sweep.
pub const SWEEP_GRID: [(f64, f64); 4] = [(0.0, 0.0), (0.0005, 0.005), (0.0005, 0.01), (0.005, 0.01)];

/// Runs one embedding per grid cell from the same seed, data and ground
/// truth, one thread per cell.
pub fn run_sweep(
    base: &EmbedConfig,
    grid: &[(f64, f64)],
    x: Option<PointCloud>,
    truth: Option<GroundTruthDiagram>,
) -> Result<Vec<(f64, f64, Result<EmbedOutcome>)>> {
    let x = match x {
        Some(x) => x,
        None => generate_nested_circles(&base.data, base.seed)?,
    };
    let results = std::thread::scope(|s| {
        let handles: Vec<_> = grid
            .iter()
            .map(|&(lt, lr)| {
                let cfg = base.with_lambdas(lt, lr);
                let (x, truth) = (x.clone(), truth.clone());
                s.spawn(move || run_embedding(&cfg, Some(x), truth))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::State("sweep worker panicked".into()))))
            .collect::<Vec<_>>()
    });
    Ok(grid.iter().zip(results).map(|(&(lt, lr), r)| (lt, lr, r)).collect())
}
