//! The regularized topology-aware loss
//!
//! ```text
//! G(W) = L_supv + lambda_topo * L_topo + lambda_reg * L_reg
//! ```
//!
//! where `L_topo` is the squared restoration cost of the best injection of
//! the ground-truth points into the predicted diagram and `L_reg` is the
//! k-th total persistence of the predicted diagram.
//!
//! The loss is evaluated through a [`Configuration`]: a snapshot of the
//! critical simplices of every predicted point together with the matching.
//! Evaluating a configuration at new inputs keeps the simplices and the
//! matching fixed and only re-reads their filtration values, which is what
//! makes the loss a smooth function of the parameters between updates.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::complex::{build_rips, Attribution, FilterInput, Filtration, PointCloud};
use crate::error::{Error, Result};
use crate::metrics::{restoration_match, squared_cost, squared_diagonal_cost, Matching, Target};
use crate::persistence::{compute_persistence, compute_persistence_dim0, PersistenceDiagram};

/// Target diagram without its diagonal: `B` finite points of one dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthDiagram {
    dim: usize,
    points: Vec<(f64, f64)>,
}

impl GroundTruthDiagram {
    pub fn new(dim: usize, points: Vec<(f64, f64)>) -> Result<Self> {
        for (i, &(b, d)) in points.iter().enumerate() {
            if !b.is_finite() || !d.is_finite() {
                return Err(Error::invalid(format!("ground-truth point {i} is not finite")));
            }
            if d <= b {
                return Err(Error::invalid(format!(
                    "ground-truth point {i} = ({b}, {d}) is not above the diagonal"
                )));
            }
        }
        Ok(Self { dim, points })
    }

    /// The `b` most persistent finite points of `diagram` in dimension `dim`.
    pub fn top_of(diagram: &PersistenceDiagram, dim: usize, b: usize) -> Result<Self> {
        let d = diagram.of_dim(dim);
        let mut proper: Vec<(f64, f64)> = d
            .proper_indices()
            .into_iter()
            .map(|i| (d.points[i].birth, d.points[i].death.unwrap()))
            .collect();
        if b > proper.len() {
            return Err(Error::invalid(format!(
                "asked for {b} ground-truth points but the diagram has only {} finite points in dimension {dim}",
                proper.len()
            )));
        }
        // stable: equal persistence keeps diagram order
        proper.sort_by(|x, y| (y.1 - y.0).total_cmp(&(x.1 - x.0)));
        proper.truncate(b);
        Self::new(dim, proper)
    }

    /// The `b` most persistent points of the Rips diagram of `cloud`.
    pub fn from_cloud(cloud: &PointCloud, dim: usize, b: usize, max_radius: f64) -> Result<Self> {
        let f = build_rips(cloud, dim + 1, max_radius)?;
        Self::top_of(&diagram_in_dim(&f, dim)?, dim, b)
    }

    /// Every finite off-diagonal point of a diagram JSON document in dimension `dim`.
    pub fn read_json<R: Read>(r: R, dim: usize) -> Result<Self> {
        let d = PersistenceDiagram::read_json(r)?.of_dim(dim);
        let n = d.proper_indices().len();
        Self::top_of(&d, dim, n)
    }

    pub fn to_diagram(&self) -> PersistenceDiagram {
        PersistenceDiagram::from_pairs(self.dim, &self.points)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Cardinality `B`.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn diagram_in_dim(f: &Filtration, dim: usize) -> Result<PersistenceDiagram> {
    if dim == 0 {
        compute_persistence_dim0(f)
    } else {
        Ok(compute_persistence(f, dim)?.of_dim(dim))
    }
}

/// Loss weights and total-persistence order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_topo: f64,
    pub lambda_reg: f64,
    pub k: u32,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_topo: 0.0,
            lambda_reg: 0.0,
            k: 2,
        }
    }
}

impl LossWeights {
    pub fn new(lambda_topo: f64, lambda_reg: f64, k: u32) -> Result<Self> {
        let w = Self {
            lambda_topo,
            lambda_reg,
            k,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_topo >= 0.0 && self.lambda_topo.is_finite())
            || !(self.lambda_reg >= 0.0 && self.lambda_reg.is_finite())
        {
            return Err(Error::invalid("loss weights must be finite and non-negative"));
        }
        if self.k == 0 {
            return Err(Error::invalid("total-persistence order k must be at least 1"));
        }
        Ok(())
    }
}

/// The three loss components and their weighted sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_supv: f64,
    pub l_topo: f64,
    pub l_reg: f64,
    pub g: f64,
    pub lambda_topo: f64,
    pub lambda_reg: f64,
    pub k: u32,
}

impl LossBreakdown {
    pub fn assemble(l_supv: f64, l_topo: f64, l_reg: f64, w: &LossWeights) -> Self {
        Self {
            l_supv,
            l_topo,
            l_reg,
            g: l_supv + w.lambda_topo * l_topo + w.lambda_reg * l_reg,
            lambda_topo: w.lambda_topo,
            lambda_reg: w.lambda_reg,
            k: w.k,
        }
    }

    /// Name of the first non-finite component, if any.
    pub fn non_finite_component(&self) -> Option<&'static str> {
        [
            ("L_supv", self.l_supv),
            ("L_topo", self.l_topo),
            ("L_reg", self.l_reg),
            ("G", self.g),
        ]
        .into_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(name, _)| name)
    }
}

/// Critical inputs of one predicted point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalPair {
    pub birth: Attribution,
    pub death: Attribution,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum InputShape {
    Vertices(usize),
    Cloud { len: usize, dim: usize },
}

impl InputShape {
    fn of(input: FilterInput<'_>) -> Self {
        match input {
            FilterInput::VertexValues(v) => InputShape::Vertices(v.len()),
            FilterInput::Cloud(c) => InputShape::Cloud {
                len: c.len(),
                dim: c.dim(),
            },
        }
    }
}

/// Frozen combinatorial state at iteration `t`: the predicted diagram in the
/// ground truth's dimension, the critical inputs of each of its points, and
/// the optimal restoration matching `gamma_t`.
#[derive(Clone, Debug)]
pub struct Configuration {
    pub t: usize,
    pub diagram: PersistenceDiagram,
    pub matching: Matching,
    critical: Vec<Option<CriticalPair>>,
    snapshot_input: Vec<f64>,
    shape: InputShape,
}

impl Configuration {
    /// Computes the diagram of `filtration` and the restoration matching
    /// against `truth`. `input` must be what `filtration` was built from.
    pub fn snapshot(
        t: usize,
        filtration: &Filtration,
        input: FilterInput<'_>,
        truth: &GroundTruthDiagram,
    ) -> Result<Self> {
        let diagram = diagram_in_dim(filtration, truth.dim())?;
        let critical = diagram
            .points
            .iter()
            .map(|p| {
                p.death_simplex.map(|ds| CriticalPair {
                    birth: filtration.attribution(p.birth_simplex),
                    death: filtration.attribution(ds),
                })
            })
            .collect();
        let matching = restoration_match(truth.points(), &diagram);
        Ok(Self {
            t,
            diagram,
            matching,
            critical,
            snapshot_input: input.as_flat().to_vec(),
            shape: InputShape::of(input),
        })
    }

    /// Critical pair of diagram point `i` (`None` for essential points).
    pub fn critical_pair(&self, i: usize) -> Option<CriticalPair> {
        self.critical.get(i).copied().flatten()
    }

    /// Whether `input` is bit-identical to the input the snapshot was taken at.
    pub fn is_fresh_for(&self, input: FilterInput<'_>) -> bool {
        let flat = input.as_flat();
        flat.len() == self.snapshot_input.len()
            && flat
                .iter()
                .zip(&self.snapshot_input)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    fn check_shape(&self, input: FilterInput<'_>) -> Result<()> {
        if InputShape::of(input) != self.shape {
            return Err(Error::StaleConfiguration(format!(
                "configuration from iteration {} was taken on input {:?}, got {:?}",
                self.t,
                self.shape,
                InputShape::of(input)
            )));
        }
        Ok(())
    }

    fn value_of(&self, a: Attribution, input: FilterInput<'_>) -> Result<f64> {
        a.evaluate(input).ok_or_else(|| {
            Error::StaleConfiguration(format!(
                "critical input {a:?} from iteration {} does not exist in the current input",
                self.t
            ))
        })
    }

    fn pair(&self, i: usize) -> Result<CriticalPair> {
        self.critical_pair(i).ok_or_else(|| {
            Error::StaleConfiguration(format!(
                "diagram point {i} of iteration {} has no critical pair",
                self.t
            ))
        })
    }

    /// Frozen-configuration topological loss at `input`.
    pub fn topo_loss(&self, input: FilterInput<'_>, truth: &GroundTruthDiagram) -> Result<f64> {
        self.check_shape(input)?;
        let mut total = 0.0;
        for &(s, target) in &self.matching.pairs {
            let src = *truth.points().get(s).ok_or_else(|| {
                Error::StaleConfiguration(format!("matching refers to missing ground-truth point {s}"))
            })?;
            total += match target {
                Target::Point(j) => {
                    let cp = self.pair(j)?;
                    squared_cost(src, (self.value_of(cp.birth, input)?, self.value_of(cp.death, input)?))
                }
                Target::Diagonal => squared_diagonal_cost(src),
            };
        }
        Ok(total)
    }

    /// Frozen-configuration total persistence of order `k` at `input`.
    pub fn reg_loss(&self, input: FilterInput<'_>, k: u32) -> Result<f64> {
        self.check_shape(input)?;
        let mut total = 0.0;
        for i in self.diagram.proper_indices() {
            let cp = self.pair(i)?;
            let pers = self.value_of(cp.death, input)? - self.value_of(cp.birth, input)?;
            total += pers.abs().powi(k as i32);
        }
        Ok(total)
    }

    /// Gradient of `lambda_topo * L_topo + lambda_reg * L_reg` with respect
    /// to the flat input. Only valid at the snapshot input.
    pub fn topo_input_gradient(
        &self,
        input: FilterInput<'_>,
        truth: &GroundTruthDiagram,
        weights: &LossWeights,
    ) -> Result<Vec<f64>> {
        self.check_shape(input)?;
        if !self.is_fresh_for(input) {
            return Err(Error::StaleConfiguration(format!(
                "gradient requested at an input different from the iteration {} snapshot",
                self.t
            )));
        }
        let mut grad = vec![0.0; input.flat_len()];
        if weights.lambda_topo != 0.0 {
            for &(s, target) in &self.matching.pairs {
                let Target::Point(j) = target else { continue };
                let (tb, td) = truth.points()[s];
                let cp = self.pair(j)?;
                let fb = self.value_of(cp.birth, input)?;
                let fd = self.value_of(cp.death, input)?;
                cp.birth
                    .accumulate_gradient(input, weights.lambda_topo * 2.0 * (fb - tb), &mut grad);
                cp.death
                    .accumulate_gradient(input, weights.lambda_topo * 2.0 * (fd - td), &mut grad);
            }
        }
        if weights.lambda_reg != 0.0 {
            let k = weights.k;
            for i in self.diagram.proper_indices() {
                let cp = self.pair(i)?;
                let pers = self.value_of(cp.death, input)? - self.value_of(cp.birth, input)?;
                let scale = weights.lambda_reg * k as f64 * pers.abs().powi(k as i32 - 1) * pers.signum();
                cp.death.accumulate_gradient(input, scale, &mut grad);
                cp.birth.accumulate_gradient(input, -scale, &mut grad);
            }
        }
        Ok(grad)
    }
}

/// Loss under a frozen configuration at the current input, with the
/// supervision term supplied by the caller.
pub fn eval_loss(
    config: &Configuration,
    input: FilterInput<'_>,
    supervision: f64,
    truth: &GroundTruthDiagram,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    let l_topo = config.topo_loss(input, truth)?;
    let l_reg = config.reg_loss(input, weights.k)?;
    Ok(LossBreakdown::assemble(supervision, l_topo, l_reg, weights))
}

/// Gradient of the full loss with respect to model parameters.
///
/// The topological gradient is formed over the filter input, added to the
/// supervision gradient (also over the filter input) and handed to
/// `backward`, which maps an input-space gradient to parameter space.
pub fn grad_loss<F>(
    config: &Configuration,
    input: FilterInput<'_>,
    truth: &GroundTruthDiagram,
    weights: &LossWeights,
    supervision_grad: &[f64],
    backward: F,
) -> Result<Vec<f64>>
where
    F: FnOnce(&[f64]) -> Result<Vec<f64>>,
{
    if supervision_grad.len() != input.flat_len() {
        return Err(Error::invalid(format!(
            "supervision gradient has {} entries, input has {}",
            supervision_grad.len(),
            input.flat_len()
        )));
    }
    let mut grad = config.topo_input_gradient(input, truth, weights)?;
    for (g, s) in grad.iter_mut().zip(supervision_grad) {
        *g += s;
    }
    backward(&grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{build_lower_star, SimplicialComplex};
    use crate::metrics::total_persistence;

    fn line(xs: &[f64]) -> PointCloud {
        PointCloud::new(xs.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    #[test]
    fn ground_truth_examples() {
        let gt = GroundTruthDiagram::new(0, vec![(0.0, 0.9)]).unwrap();
        assert_eq!(gt.len(), 1);
        let gt = GroundTruthDiagram::from_cloud(&line(&[0.0, 1.0, 3.0]), 0, 1, 10.0).unwrap();
        assert_eq!(gt.points(), &[(0.0, 2.0)]);
        assert!(GroundTruthDiagram::from_cloud(&line(&[0.0, 1.0, 3.0]), 0, 3, 10.0).is_err());
        assert!(GroundTruthDiagram::new(0, vec![(1.0, 1.0)]).is_err());
    }

    #[test]
    fn ground_truth_from_json() {
        let json = r#"[{"dim":0,"birth":0.0,"death":0.5,"birth_simplex":1,"death_simplex":3},
                       {"dim":0,"birth":0.0,"death":null,"birth_simplex":0,"death_simplex":null}]"#;
        let gt = GroundTruthDiagram::read_json(json.as_bytes(), 0).unwrap();
        assert_eq!(gt.points(), &[(0.0, 0.5)]);
    }

    fn three_points() -> (PointCloud, Filtration) {
        let cloud = PointCloud::new(vec![vec![0.0, 0.0], vec![1.0, 0.2], vec![0.3, 2.0]]).unwrap();
        let f = build_rips(&cloud, 1, f64::INFINITY).unwrap();
        (cloud, f)
    }

    #[test]
    fn snapshot_identity() {
        let (cloud, f) = three_points();
        let truth = GroundTruthDiagram::new(0, vec![(0.0, 1.5)]).unwrap();
        let cfg = Configuration::snapshot(0, &f, FilterInput::Cloud(&cloud), &truth).unwrap();
        let w = LossWeights::new(0.7, 0.3, 2).unwrap();
        let loss = eval_loss(&cfg, FilterInput::Cloud(&cloud), 0.25, &truth, &w).unwrap();
        assert_eq!(loss.l_topo, cfg.matching.cost);
        assert_eq!(loss.l_reg, total_persistence(&cfg.diagram, 2));
        assert_eq!(loss.g, 0.25 + 0.7 * loss.l_topo + 0.3 * loss.l_reg);
    }

    #[test]
    fn frozen_values_example() {
        // birth simplex at 0, death simplex at 0.5, truth (0, 1) -> 0.25
        let c = SimplicialComplex::new(vec![vec![0], vec![1], vec![2], vec![0, 2], vec![1, 2]]).unwrap();
        let vals = [0.0, 0.0, 0.5];
        let f = build_lower_star(&c, &vals).unwrap();
        let truth = GroundTruthDiagram::new(0, vec![(0.0, 1.0)]).unwrap();
        let cfg = Configuration::snapshot(0, &f, FilterInput::VertexValues(&vals), &truth).unwrap();
        let w = LossWeights::new(1.0, 0.0, 2).unwrap();
        let loss = eval_loss(&cfg, FilterInput::VertexValues(&vals), 0.0, &truth, &w).unwrap();
        assert_eq!(loss.g, 0.25);
        // moving the death vertex is seen through the frozen pair
        let moved = [0.0, 0.0, 0.75];
        let loss = eval_loss(&cfg, FilterInput::VertexValues(&moved), 0.0, &truth, &w).unwrap();
        assert_eq!(loss.g, 0.0625);
    }

    #[test]
    fn stale_configuration_errors() {
        let (cloud, f) = three_points();
        let truth = GroundTruthDiagram::new(0, vec![(0.0, 1.5)]).unwrap();
        let cfg = Configuration::snapshot(0, &f, FilterInput::Cloud(&cloud), &truth).unwrap();
        let w = LossWeights::new(1.0, 1.0, 2).unwrap();
        let smaller = line(&[0.0, 1.0]);
        assert!(matches!(
            eval_loss(&cfg, FilterInput::Cloud(&smaller), 0.0, &truth, &w),
            Err(Error::StaleConfiguration(_))
        ));
        let moved = PointCloud::from_flat(2, cloud.as_flat().iter().map(|x| x + 0.01).collect()).unwrap();
        assert!(eval_loss(&cfg, FilterInput::Cloud(&moved), 0.0, &truth, &w).is_ok());
        assert!(matches!(
            cfg.topo_input_gradient(FilterInput::Cloud(&moved), &truth, &w),
            Err(Error::StaleConfiguration(_))
        ));
    }

    #[test]
    fn zero_weights_leave_supervision_gradient() {
        let (cloud, f) = three_points();
        let truth = GroundTruthDiagram::new(0, vec![(0.0, 1.5)]).unwrap();
        let cfg = Configuration::snapshot(0, &f, FilterInput::Cloud(&cloud), &truth).unwrap();
        let supv: Vec<f64> = (0..6).map(|i| i as f64 * 0.1).collect();
        let g = grad_loss(
            &cfg,
            FilterInput::Cloud(&cloud),
            &truth,
            &LossWeights::default(),
            &supv,
            |g| Ok(g.to_vec()),
        )
        .unwrap();
        assert_eq!(g, supv);
    }

    #[test]
    fn reg_gradient_single_point_matches_finite_differences() {
        let (cloud, f) = three_points();
        let truth = GroundTruthDiagram::new(0, vec![(0.0, 1.5)]).unwrap();
        let cfg = Configuration::snapshot(0, &f, FilterInput::Cloud(&cloud), &truth).unwrap();
        let w = LossWeights::new(0.0, 1.0, 2).unwrap();
        let g = cfg.topo_input_gradient(FilterInput::Cloud(&cloud), &truth, &w).unwrap();
        let h = 1e-6;
        for i in 0..6 {
            let mut plus = cloud.as_flat().to_vec();
            let mut minus = plus.clone();
            plus[i] += h;
            minus[i] -= h;
            let lp = cfg.reg_loss(FilterInput::Cloud(&PointCloud::from_flat(2, plus).unwrap()), 2).unwrap();
            let lm = cfg.reg_loss(FilterInput::Cloud(&PointCloud::from_flat(2, minus).unwrap()), 2).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-5 * fd.abs().max(1.0), "coord {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn losses_are_nonnegative() {
        let (cloud, f) = three_points();
        let truth = GroundTruthDiagram::new(0, vec![(0.0, 1.5), (0.0, 9.0)]).unwrap();
        let cfg = Configuration::snapshot(0, &f, FilterInput::Cloud(&cloud), &truth).unwrap();
        let w = LossWeights::new(1.0, 1.0, 3).unwrap();
        let l = eval_loss(&cfg, FilterInput::Cloud(&cloud), 0.0, &truth, &w).unwrap();
        assert!(l.l_topo >= 0.0 && l.l_reg >= 0.0);
    }
}
