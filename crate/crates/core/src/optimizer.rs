//! Gradient descent on the regularized loss with per-iteration
//! configuration refresh, and the checks that go with it.
//!
//! Each iteration `t` records three loss values:
//!
//! * `G_t(W_t)`: the loss at the current parameters under the fresh configuration,
//! * `G_t(W_{t+1})`: the loss after the step, still under configuration `t`,
//! * `G_{t+1}(W_{t+1})`: the loss after the step under the refreshed configuration.
//!
//! The run stops once `|G_t(W_{t+1}) - G_t(W_t)| <= epsilon`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::complex::{build_rips, FilterInput, PointCloud};
use crate::error::{Error, Result};
use crate::loss::{eval_loss, grad_loss, Configuration, GroundTruthDiagram, LossBreakdown, LossWeights};
use crate::model::{supervision_loss_and_grad, Affinities, DenseNetwork};

/// Smoothness and size constants of the data and model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremConstants {
    /// Bounds on the supervision loss and its first two derivatives.
    pub ell0: f64,
    pub ell1: f64,
    pub ell2: f64,
    /// Bound tied to the data.
    pub c_x: f64,
    /// Ground-truth cardinality.
    pub b: usize,
    /// Total-persistence order.
    pub k: u32,
}

impl TheoremConstants {
    fn validate(&self) -> Result<()> {
        let all = [self.ell0, self.ell1, self.ell2, self.c_x];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("theorem constants must be finite and positive"));
        }
        if self.k == 0 {
            return Err(Error::invalid("theorem constant k must be at least 1"));
        }
        Ok(())
    }

    /// `C0 = ell0 + lambda_reg C_X + lambda_topo B`.
    pub fn c0(&self, lambda_topo: f64, lambda_reg: f64) -> f64 {
        self.ell0 + lambda_reg * self.c_x + lambda_topo * self.b as f64
    }

    /// `C1 = ell1 + 2 lambda_reg k C_X + 2 lambda_topo k B`.
    pub fn c1(&self, lambda_topo: f64, lambda_reg: f64) -> f64 {
        let k = self.k as f64;
        self.ell1 + 2.0 * lambda_reg * k * self.c_x + 2.0 * lambda_topo * k * self.b as f64
    }

    /// `C2 = ell2 + 2 lambda_reg k (k + 1) C_X + 2 lambda_topo k B`.
    pub fn c2(&self, lambda_topo: f64, lambda_reg: f64) -> f64 {
        let k = self.k as f64;
        self.ell2 + 2.0 * lambda_reg * k * (k + 1.0) * self.c_x + 2.0 * lambda_topo * k * self.b as f64
    }

    /// Iteration guarantee `2 C0 / epsilon`.
    pub fn iteration_bound(&self, lambda_topo: f64, lambda_reg: f64, epsilon: f64) -> f64 {
        2.0 * self.c0(lambda_topo, lambda_reg) / epsilon
    }
}

/// Admissible step size for the given constants:
///
/// ```text
/// min{ 1 / (2 C2), sqrt(eps) / (1024 lambda_topo^2 B^2), sqrt(eps) / (16 lambda_reg^2 k^2 C_X^2) }
/// ```
///
/// where a term with a zero denominator is dropped.
pub fn theorem_step_size(c: &TheoremConstants, lambda_topo: f64, lambda_reg: f64, epsilon: f64) -> Result<f64> {
    c.validate()?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { f64::INFINITY };
    let (b, k) = (c.b as f64, c.k as f64);
    let eta = ratio(1.0, 2.0 * c.c2(lambda_topo, lambda_reg))
        .min(ratio(epsilon.sqrt(), 1024.0 * lambda_topo * lambda_topo * b * b))
        .min(ratio(epsilon.sqrt(), 16.0 * lambda_reg * lambda_reg * k * k * c.c_x * c.c_x));
    if !eta.is_finite() {
        return Err(Error::invalid("all step-size terms are unbounded; constants are degenerate"));
    }
    Ok(eta)
}

/// How the step size is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    Fixed(f64),
    Theorem(TheoremConstants),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub step: StepRule,
    pub weights: LossWeights,
    pub epsilon: f64,
    pub max_iters: usize,
}

impl OptimizerConfig {
    /// Validates the configuration and resolves the step size.
    pub fn eta(&self) -> Result<f64> {
        self.weights.validate()?;
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        match self.step {
            StepRule::Fixed(eta) if eta > 0.0 && eta.is_finite() => Ok(eta),
            StepRule::Fixed(eta) => Err(Error::invalid(format!("step size must be positive, got {eta}"))),
            StepRule::Theorem(c) => {
                if c.k != self.weights.k {
                    return Err(Error::invalid(format!(
                        "theorem constant k = {} differs from loss order k = {}",
                        c.k, self.weights.k
                    )));
                }
                theorem_step_size(&c, self.weights.lambda_topo, self.weights.lambda_reg, self.epsilon)
            }
        }
    }
}

/// Fixed data of an embedding problem.
#[derive(Clone, Debug)]
pub struct Problem {
    pub x: PointCloud,
    pub p: Affinities,
    pub truth: GroundTruthDiagram,
    /// Rips radius cap for the embedding's filtration.
    pub max_radius: f64,
}

/// One row of an optimization trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    pub g_t_wt: f64,
    pub g_t_wt1: f64,
    pub g_t1_wt1: f64,
    pub eta: f64,
    /// Components behind `G_t(W_t)`.
    pub current: LossBreakdown,
    /// Components behind `G_t(W_{t+1})`.
    pub frozen_next: LossBreakdown,
    /// Components behind `G_{t+1}(W_{t+1})`.
    pub fresh_next: LossBreakdown,
    /// `||W_{t+1} - W_t||`.
    pub step_norm: f64,
    /// Whether this row satisfied the stopping test.
    pub converged: bool,
}

impl TraceRecord {
    pub fn row(&self) -> TraceRow {
        TraceRow {
            t: self.t,
            g_t_wt: self.g_t_wt,
            g_t_wt1: self.g_t_wt1,
            g_t1_wt1: self.g_t1_wt1,
            l_supv: self.current.l_supv,
            l_topo: self.current.l_topo,
            l_reg: self.current.l_reg,
            eta: self.eta,
        }
    }
}

/// The subset of a trace record stored in trace CSV files.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    #[serde(rename = "G_t_Wt")]
    pub g_t_wt: f64,
    #[serde(rename = "G_t_Wt1")]
    pub g_t_wt1: f64,
    #[serde(rename = "G_t1_Wt1")]
    pub g_t1_wt1: f64,
    #[serde(rename = "L_supv")]
    pub l_supv: f64,
    #[serde(rename = "L_topo")]
    pub l_topo: f64,
    #[serde(rename = "L_reg")]
    pub l_reg: f64,
    pub eta: f64,
}

pub const TRACE_HEADER: [&str; 8] = ["t", "G_t_Wt", "G_t_Wt1", "G_t1_Wt1", "L_supv", "L_topo", "L_reg", "eta"];

pub fn write_trace_csv<W: Write>(rows: &[TraceRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    if rows.is_empty() {
        wr.write_record(TRACE_HEADER).map_err(csv_error)?;
    }
    for r in rows {
        wr.serialize(r).map_err(csv_error)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(r: R) -> Result<Vec<TraceRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers().map_err(csv_error)?.clone();
    let found: Vec<&str> = header.iter().collect();
    if found != TRACE_HEADER {
        return Err(Error::Parse {
            line: 1,
            field: 0,
            message: format!("expected header {}, found {}", TRACE_HEADER.join(","), found.join(",")),
        });
    }
    rd.deserialize().map(|row| row.map_err(csv_error)).collect()
}

pub fn write_trace_path(rows: &[TraceRow], path: impl AsRef<Path>) -> Result<()> {
    write_trace_csv(rows, std::fs::File::create(path)?)
}

pub fn read_trace_path(path: impl AsRef<Path>) -> Result<Vec<TraceRow>> {
    read_trace_csv(std::fs::File::open(path)?)
}

fn csv_error(e: csv::Error) -> Error {
    let (line, field) = match e.position() {
        Some(p) => (p.line() as usize, 0),
        None => (0, 0),
    };
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse {
            line,
            field,
            message: format!("{kind:?}"),
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIters,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub trace: Vec<TraceRecord>,
    pub stop: StopReason,
    pub eta: f64,
    /// Embedding at the final parameters.
    pub y: PointCloud,
}

impl RunOutcome {
    pub fn rows(&self) -> Vec<TraceRow> {
        self.trace.iter().map(TraceRecord::row).collect()
    }

    /// Number of recorded iterations.
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

struct Snapshot {
    y: PointCloud,
    config: Configuration,
    loss: LossBreakdown,
    supv_grad: Vec<f64>,
}

fn check_finite(loss: &LossBreakdown, iteration: usize) -> Result<()> {
    match loss.non_finite_component() {
        Some(component) => Err(Error::NonFinite { component, iteration }),
        None => Ok(()),
    }
}

/// Forward pass at the network's current parameters, keeping the cache.
fn embed(net: &mut DenseNetwork, x: &PointCloud, t: usize) -> Result<PointCloud> {
    net.forward(x).map_err(|e| match e {
        Error::NonFinite { component, .. } => Error::NonFinite { component, iteration: t },
        e => e,
    })
}

struct Evaluated {
    y: PointCloud,
    supv: f64,
    supv_grad: Vec<f64>,
}

fn evaluate(net: &mut DenseNetwork, problem: &Problem, t: usize) -> Result<Evaluated> {
    let y = embed(net, &problem.x, t)?;
    let (supv, supv_grad) = supervision_loss_and_grad(&problem.p, &y)?;
    if !supv.is_finite() {
        return Err(Error::NonFinite {
            component: "L_supv",
            iteration: t,
        });
    }
    Ok(Evaluated { y, supv, supv_grad })
}

fn snapshot(t: usize, e: Evaluated, problem: &Problem, weights: &LossWeights) -> Result<Snapshot> {
    let f = build_rips(&e.y, problem.truth.dim() + 1, problem.max_radius)?;
    let config = Configuration::snapshot(t, &f, FilterInput::Cloud(&e.y), &problem.truth)?;
    let loss = eval_loss(&config, FilterInput::Cloud(&e.y), e.supv, &problem.truth, weights)?;
    check_finite(&loss, t)?;
    Ok(Snapshot {
        y: e.y,
        config,
        loss,
        supv_grad: e.supv_grad,
    })
}

/// Runs gradient descent from the network's current parameters, which are
/// left at the final iterate.
pub fn run(net: &mut DenseNetwork, problem: &Problem, cfg: &OptimizerConfig) -> Result<RunOutcome> {
    let eta = cfg.eta()?;
    if cfg.max_iters == 0 {
        return Err(Error::invalid("max_iters must be at least 1"));
    }
    if problem.p.len() != problem.x.len() {
        return Err(Error::invalid("affinities and data have different sizes"));
    }
    if let StepRule::Theorem(c) = cfg.step {
        if c.b != problem.truth.len() {
            return Err(Error::invalid(format!(
                "theorem constant B = {} differs from ground-truth cardinality {}",
                c.b,
                problem.truth.len()
            )));
        }
    }
    let weights = cfg.weights;
    let first = evaluate(net, problem, 0)?;
    let mut current = snapshot(0, first, problem, &weights)?;
    let mut trace = Vec::new();
    let mut stop = StopReason::MaxIters;
    for t in 0..cfg.max_iters {
        let grad = grad_loss(
            &current.config,
            FilterInput::Cloud(&current.y),
            &problem.truth,
            &weights,
            &current.supv_grad,
            |g| net.backward(g),
        )?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                component: "gradient",
                iteration: t,
            });
        }
        let w1: Vec<f64> = net.parameters().iter().zip(&grad).map(|(a, g)| a - eta * g).collect();
        let step_norm = eta * grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        net.set_parameters(&w1)?;

        // the same forward pass serves the frozen and the refreshed evaluation
        let next = evaluate(net, problem, t + 1)?;
        let frozen = eval_loss(
            &current.config,
            FilterInput::Cloud(&next.y),
            next.supv,
            &problem.truth,
            &weights,
        )?;
        check_finite(&frozen, t)?;
        let converged = (frozen.g - current.loss.g).abs() <= cfg.epsilon;

        let next = snapshot(t + 1, next, problem, &weights)?;
        trace.push(TraceRecord {
            t,
            g_t_wt: current.loss.g,
            g_t_wt1: frozen.g,
            g_t1_wt1: next.loss.g,
            eta,
            current: current.loss,
            frozen_next: frozen,
            fresh_next: next.loss,
            step_norm,
            converged,
        });
        current = next;
        if converged {
            stop = StopReason::Converged;
            break;
        }
    }
    Ok(RunOutcome {
        trace,
        stop,
        eta,
        y: current.y,
    })
}

/// Absolute slack used by [`check_trace`].
pub const TRACE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub passed: bool,
    /// Iteration of the first violation.
    pub first_violation: Option<usize>,
    /// Largest amount by which the property is exceeded (0 when it holds).
    pub worst_excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub checks: Vec<PropertyCheck>,
}

impl TraceReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn property(name: &str, rows: &[TraceRow], excess: impl Fn(&TraceRow) -> Option<f64>) -> PropertyCheck {
    let mut first = None;
    let mut worst: f64 = 0.0;
    for r in rows {
        if let Some(e) = excess(r) {
            if e > TRACE_TOLERANCE {
                first.get_or_insert(r.t);
            }
            worst = worst.max(e);
        }
    }
    PropertyCheck {
        name: name.to_string(),
        passed: first.is_none(),
        first_violation: first,
        worst_excess: worst,
    }
}

/// Checks the descent properties of a trace:
///
/// * `descent`: `G_t(W_{t+1}) <= G_t(W_t)`,
/// * `refresh`: the increase from refreshing the configuration is at most the
///   decrease from the gradient step,
/// * `sufficient_decrease`: every iteration that did not stop decreased the
///   loss by at least `epsilon / 2`.
pub fn check_trace(rows: &[TraceRow], epsilon: f64) -> Result<TraceReport> {
    if rows.is_empty() {
        return Err(Error::invalid("trace is empty"));
    }
    let descent = property("descent", rows, |r| Some(r.g_t_wt1 - r.g_t_wt));
    let refresh = property("refresh", rows, |r| {
        Some((r.g_t1_wt1 - r.g_t_wt1) - (r.g_t_wt - r.g_t_wt1))
    });
    let sufficient = property("sufficient_decrease", rows, |r| {
        let stopped = (r.g_t_wt1 - r.g_t_wt).abs() <= epsilon;
        (!stopped).then(|| epsilon / 2.0 - (r.g_t_wt - r.g_t1_wt1))
    });
    Ok(TraceReport {
        checks: vec![descent, refresh, sufficient],
    })
}

/// Fit of iteration counts against `c / epsilon`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// Constant anchored at the largest epsilon.
    pub c: f64,
    /// `iters * epsilon / c` for each point, in input order.
    pub ratios: Vec<f64>,
    pub passed: bool,
}

/// Checks `iters(epsilon) <= slack * c / epsilon` with `c` anchored at the
/// largest epsilon.
pub fn fit_inverse_epsilon(points: &[(f64, usize)], slack: f64) -> Result<ScalingFit> {
    let &(e_max, n_max) = points
        .iter()
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or_else(|| Error::invalid("no points to fit"))?;
    let c = n_max as f64 * e_max;
    if c <= 0.0 {
        return Err(Error::invalid("anchor point has no iterations"));
    }
    let ratios: Vec<f64> = points.iter().map(|&(e, n)| n as f64 * e / c).collect();
    let passed = ratios.iter().all(|&r| r <= slack);
    Ok(ScalingFit { c, ratios, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::compute_p;

    #[test]
    fn worked_step_size_example() {
        let c = TheoremConstants {
            ell0: 1.0,
            ell1: 1.0,
            ell2: 1.0,
            c_x: 10.0,
            b: 2,
            k: 2,
        };
        let eta = theorem_step_size(&c, 0.0005, 0.005, 1e-4).unwrap();
        assert!((eta - 0.0625).abs() < 1e-12);
        // first term 1 / (2 * 1.604)
        assert!((1.0 / (2.0 * c.c2(0.0005, 0.005)) - 0.311_720_698_254_364).abs() < 1e-9);
        assert!((c.c0(0.0005, 0.005) - 1.051).abs() < 1e-12);
        assert!((c.c1(0.0005, 0.005) - 1.204).abs() < 1e-12);
    }

    #[test]
    fn zero_weights_drop_terms() {
        let c = TheoremConstants {
            ell0: 1.0,
            ell1: 1.0,
            ell2: 2.0,
            c_x: 10.0,
            b: 2,
            k: 2,
        };
        assert_eq!(theorem_step_size(&c, 0.0, 0.0, 1e-4).unwrap(), 0.25);
        let bad = TheoremConstants { ell2: 0.0, ..c };
        assert!(theorem_step_size(&bad, 0.0, 0.0, 1e-4).is_err());
        assert!(theorem_step_size(&c, 0.0, 0.0, 0.0).is_err());
    }

    fn row(t: usize, a: f64, b: f64, c: f64) -> TraceRow {
        TraceRow {
            t,
            g_t_wt: a,
            g_t_wt1: b,
            g_t1_wt1: c,
            l_supv: a,
            l_topo: 0.0,
            l_reg: 0.0,
            eta: 0.1,
        }
    }

    #[test]
    fn trace_checks() {
        let good = [row(0, 1.0, 0.5, 0.6), row(1, 0.6, 0.59995, 0.59995)];
        let rep = check_trace(&good, 1e-4).unwrap();
        assert!(rep.passed(), "{rep:?}");
        let ascent = [row(0, 1.0, 1.1, 1.1)];
        let rep = check_trace(&ascent, 1e-4).unwrap();
        assert_eq!(rep.get("descent").unwrap().first_violation, Some(0));
        let jump = [row(0, 1.0, 0.9, 1.05)];
        assert!(!check_trace(&jump, 1e-4).unwrap().get("refresh").unwrap().passed);
        let slow = [row(0, 1.0, 0.99, 0.999)];
        assert!(!check_trace(&slow, 0.005).unwrap().get("sufficient_decrease").unwrap().passed);
        assert!(check_trace(&[], 1e-4).is_err());
    }

    #[test]
    fn trace_csv_round_trip() {
        let rows = [row(0, 1.0, 0.5, 0.6), row(1, 0.6, 0.1, 0.1)];
        let mut buf = Vec::new();
        write_trace_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,G_t_Wt,G_t_Wt1,G_t1_Wt1,L_supv,L_topo,L_reg,eta\n"));
        assert_eq!(read_trace_csv(buf.as_slice()).unwrap(), rows);
        assert!(read_trace_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn scaling_fit() {
        let fit = fit_inverse_epsilon(&[(1e-2, 10), (1e-3, 90), (1e-4, 1200)], 4.0).unwrap();
        assert_eq!(fit.c, 0.1);
        assert!(fit.passed);
        let fit = fit_inverse_epsilon(&[(1e-2, 10), (1e-4, 5000)], 4.0).unwrap();
        assert!(!fit.passed);
    }

    fn tiny_problem() -> (DenseNetwork, Problem) {
        let x = PointCloud::new(
            (0..12)
                .map(|i| {
                    let a = i as f64 * std::f64::consts::TAU / 12.0;
                    let r = if i % 2 == 0 { 1.0 } else { 2.0 };
                    vec![r * a.cos(), r * a.sin(), 0.0]
                })
                .collect(),
        )
        .unwrap();
        let (p, _) = compute_p(&x, 3.0).unwrap();
        let truth = GroundTruthDiagram::from_cloud(&x, 0, 2, f64::INFINITY).unwrap();
        let net = DenseNetwork::new(vec![3, 8, 2], 1).unwrap();
        (
            net,
            Problem {
                x,
                p,
                truth,
                max_radius: f64::INFINITY,
            },
        )
    }

    #[test]
    fn zero_weights_make_configuration_irrelevant() {
        let (mut net, problem) = tiny_problem();
        let cfg = OptimizerConfig {
            step: StepRule::Fixed(0.5),
            weights: LossWeights::default(),
            epsilon: 1e-12,
            max_iters: 5,
        };
        let out = run(&mut net, &problem, &cfg).unwrap();
        assert_eq!(out.iterations(), 5);
        assert_eq!(out.stop, StopReason::MaxIters);
        for r in &out.trace {
            assert_eq!(r.g_t_wt1, r.g_t1_wt1);
        }
        for w in out.trace.windows(2) {
            assert_eq!(w[0].g_t1_wt1, w[1].g_t_wt);
        }
    }

    #[test]
    fn run_rejects_mismatched_constants() {
        let (mut net, problem) = tiny_problem();
        let c = TheoremConstants {
            ell0: 1.0,
            ell1: 1.0,
            ell2: 1.0,
            c_x: 1.0,
            b: 5,
            k: 2,
        };
        let cfg = OptimizerConfig {
            step: StepRule::Theorem(c),
            weights: LossWeights::new(0.1, 0.1, 2).unwrap(),
            epsilon: 1e-3,
            max_iters: 5,
        };
        assert!(matches!(run(&mut net, &problem, &cfg), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn run_with_topology_records_consistent_rows() {
        let (mut net, problem) = tiny_problem();
        let cfg = OptimizerConfig {
            step: StepRule::Fixed(0.2),
            weights: LossWeights::new(0.05, 0.01, 2).unwrap(),
            epsilon: 1e-9,
            max_iters: 4,
        };
        let out = run(&mut net, &problem, &cfg).unwrap();
        for r in &out.trace {
            assert!(r.g_t_wt.is_finite() && r.g_t_wt1.is_finite() && r.g_t1_wt1.is_finite());
            assert_eq!(r.current.g, r.g_t_wt);
        }
        for w in out.trace.windows(2) {
            assert_eq!(w[0].g_t1_wt1, w[1].g_t_wt);
        }
    }
}
