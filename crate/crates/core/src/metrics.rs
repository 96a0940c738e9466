//! Diagram functionals: total persistence, Wasserstein and bottleneck
//! distances, and the restoration-only injection used by the topological
//! loss. Every exact solver has an exhaustive counterpart for testing.
//!
//! Only finite, off-diagonal points take part. Essential points never do,
//! and zero-persistence points already sit on the diagonal.

use serde::{Deserialize, Serialize};

use crate::assignment;
use crate::error::{Error, Result};
use crate::persistence::PersistenceDiagram;

/// Where a matched source point goes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// Index into the target diagram's `points`.
    Point(usize),
    /// The source point's orthogonal projection onto the diagonal.
    Diagonal,
}

/// A matching between two diagrams.
///
/// For Wasserstein matchings `cost` is the sum of q-th powers before the
/// root (the maximum for q = infinity), and `targets_to_diagonal` lists
/// target points absorbed by the diagonal. Restoration matchings leave that
/// list empty: unmatched prediction points are not charged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    pub pairs: Vec<(usize, Target)>,
    pub targets_to_diagonal: Vec<usize>,
    pub cost: f64,
}

impl Matching {
    fn empty() -> Self {
        Self {
            pairs: Vec::new(),
            targets_to_diagonal: Vec::new(),
            cost: 0.0,
        }
    }

    /// No two sources share a non-diagonal target.
    pub fn is_injective(&self) -> bool {
        let mut seen: Vec<usize> = self
            .pairs
            .iter()
            .filter_map(|&(_, t)| match t {
                Target::Point(j) => Some(j),
                Target::Diagonal => None,
            })
            .collect();
        let n = seen.len();
        seen.sort_unstable();
        seen.dedup();
        seen.len() == n
    }
}

/// Sum of `persistence^k` over finite off-diagonal points.
pub fn total_persistence(diagram: &PersistenceDiagram, k: u32) -> f64 {
    diagram
        .points
        .iter()
        .filter(|p| p.is_proper())
        .map(|p| p.persistence().powi(k as i32))
        .sum()
}

/// Cost of moving one (birth, death) point onto another under the matching
/// convention of the topological loss: squared differences.
pub fn squared_cost(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0) * (a.0 - b.0) + (a.1 - b.1) * (a.1 - b.1)
}

/// Squared cost of moving a point onto its diagonal projection.
pub fn squared_diagonal_cost(p: (f64, f64)) -> f64 {
    let half = 0.5 * (p.1 - p.0);
    2.0 * half * half
}

/// Wasserstein order: a real `q >= 1` or infinity (bottleneck).
fn check_order(q: f64) -> Result<()> {
    if q.is_nan() || q < 1.0 {
        return Err(Error::invalid(format!("Wasserstein order must be >= 1, got {q}")));
    }
    Ok(())
}

fn ground_cost(q: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (db, dd) = ((a.0 - b.0).abs(), (a.1 - b.1).abs());
    if q.is_infinite() {
        db.max(dd)
    } else {
        db.powf(q) + dd.powf(q)
    }
}

fn diagonal_ground_cost(q: f64, p: (f64, f64)) -> f64 {
    let half = 0.5 * (p.1 - p.0).abs();
    if q.is_infinite() {
        half
    } else {
        2.0 * half.powf(q)
    }
}

fn coords(d: &PersistenceDiagram, i: usize) -> (f64, f64) {
    let p = &d.points[i];
    (p.birth, p.death.expect("proper points are finite"))
}

fn single_dimension(d1: &PersistenceDiagram, d2: &PersistenceDiagram) -> Result<()> {
    let mut dims = d1.points.iter().chain(&d2.points).map(|p| p.dim);
    if let Some(first) = dims.next() {
        if let Some(other) = dims.find(|&d| d != first) {
            return Err(Error::invalid(format!(
                "diagrams mix homology dimensions {first} and {other}"
            )));
        }
    }
    Ok(())
}

/// Cost of a Wasserstein matching recomputed from its pairs.
pub fn wasserstein_matching_cost(
    d1: &PersistenceDiagram,
    d2: &PersistenceDiagram,
    q: f64,
    m: &Matching,
) -> f64 {
    let pair_costs = m.pairs.iter().map(|&(i, t)| match t {
        Target::Point(j) => ground_cost(q, coords(d1, i), coords(d2, j)),
        Target::Diagonal => diagonal_ground_cost(q, coords(d1, i)),
    });
    let absorbed = m
        .targets_to_diagonal
        .iter()
        .map(|&j| diagonal_ground_cost(q, coords(d2, j)));
    let all = pair_costs.chain(absorbed);
    if q.is_infinite() {
        all.fold(0.0, f64::max)
    } else {
        all.sum()
    }
}

/// Augmented square cost matrix: rows are d1 points then one diagonal slot
/// per d2 point; columns are d2 points then one diagonal slot per d1 point.
/// Diagonal slots are interchangeable, so each real point pays its own
/// projection cost for any slot, and slot-to-slot pairs are free.
fn augmented_costs(
    d1: &PersistenceDiagram,
    a: &[usize],
    d2: &PersistenceDiagram,
    b: &[usize],
    q: f64,
) -> Vec<f64> {
    let (n1, n2) = (a.len(), b.len());
    let n = n1 + n2;
    let mut c = vec![0.0; n * n];
    for r in 0..n {
        for col in 0..n {
            c[r * n + col] = match (r < n1, col < n2) {
                (true, true) => ground_cost(q, coords(d1, a[r]), coords(d2, b[col])),
                (true, false) => diagonal_ground_cost(q, coords(d1, a[r])),
                (false, true) => diagonal_ground_cost(q, coords(d2, b[col])),
                (false, false) => 0.0,
            };
        }
    }
    c
}

fn matching_from_assignment(a: &[usize], b: &[usize], assign: &[usize]) -> Matching {
    let (n1, n2) = (a.len(), b.len());
    let mut m = Matching::empty();
    for (r, &col) in assign.iter().enumerate() {
        match (r < n1, col < n2) {
            (true, true) => m.pairs.push((a[r], Target::Point(b[col]))),
            (true, false) => m.pairs.push((a[r], Target::Diagonal)),
            (false, true) => m.targets_to_diagonal.push(b[col]),
            (false, false) => {}
        }
    }
    m.targets_to_diagonal.sort_unstable();
    m
}

/// q-Wasserstein distance between two single-dimension diagrams and an
/// optimal matching. `q` may be `f64::INFINITY` for the bottleneck distance.
pub fn wasserstein(d1: &PersistenceDiagram, d2: &PersistenceDiagram, q: f64) -> Result<(f64, Matching)> {
    check_order(q)?;
    single_dimension(d1, d2)?;
    let a = d1.proper_indices();
    let b = d2.proper_indices();
    let n = a.len() + b.len();
    if n == 0 {
        return Ok((0.0, Matching::empty()));
    }
    let costs = augmented_costs(d1, &a, d2, &b, q);
    let assign = if q.is_infinite() {
        bottleneck_assignment(&costs, n)
    } else {
        assignment::solve(&costs, n, n)
    };
    let mut m = matching_from_assignment(&a, &b, &assign);
    m.cost = wasserstein_matching_cost(d1, d2, q, &m);
    let dist = if q.is_infinite() { m.cost } else { m.cost.powf(1.0 / q) };
    Ok((dist, m))
}

/// Assignment minimizing the largest cost: binary search over the distinct
/// entries, testing each threshold with a 0/1 Hungarian solve.
fn bottleneck_assignment(costs: &[f64], n: usize) -> Vec<usize> {
    let mut levels = costs.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let try_level = |t: f64| {
        let indicator: Vec<f64> = costs.iter().map(|&c| if c <= t { 0.0 } else { 1.0 }).collect();
        let assign = assignment::solve(&indicator, n, n);
        let feasible = assign.iter().enumerate().all(|(r, &c)| costs[r * n + c] <= t);
        (feasible, assign)
    };
    let (mut lo, mut hi) = (0, levels.len() - 1);
    let (_, mut best) = try_level(levels[hi]);
    while lo < hi {
        let mid = (lo + hi) / 2;
        let (ok, assign) = try_level(levels[mid]);
        if ok {
            hi = mid;
            best = assign;
        } else {
            lo = mid + 1;
        }
    }
    best
}

/// Bottleneck distance computed without the assignment solver: smallest
/// candidate threshold whose threshold graph admits a perfect matching.
pub fn bottleneck(d1: &PersistenceDiagram, d2: &PersistenceDiagram) -> Result<f64> {
    single_dimension(d1, d2)?;
    let a: Vec<(f64, f64)> = d1.proper_indices().into_iter().map(|i| coords(d1, i)).collect();
    let b: Vec<(f64, f64)> = d2.proper_indices().into_iter().map(|i| coords(d2, i)).collect();
    let (n1, n2) = (a.len(), b.len());
    let n = n1 + n2;
    if n == 0 {
        return Ok(0.0);
    }
    let linf = |p: (f64, f64), r: (f64, f64)| (p.0 - r.0).abs().max((p.1 - r.1).abs());
    let half = |p: (f64, f64)| 0.5 * (p.1 - p.0);
    let mut candidates = vec![0.0];
    for &p in &a {
        candidates.push(half(p));
        for &r in &b {
            candidates.push(linf(p, r));
        }
    }
    candidates.extend(b.iter().map(|&r| half(r)));
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let feasible = |t: f64| {
        let mut adj = vec![Vec::new(); n];
        for (i, &p) in a.iter().enumerate() {
            for (j, &r) in b.iter().enumerate() {
                if linf(p, r) <= t {
                    adj[i].push(j);
                }
            }
            if half(p) <= t {
                adj[i].extend(n2..n);
            }
        }
        for (j, &r) in b.iter().enumerate() {
            let row = &mut adj[n1 + j];
            if half(r) <= t {
                row.push(j);
            }
            row.extend(n2..n);
        }
        assignment::perfect_matching(&adj, n).is_some()
    };
    let (mut lo, mut hi) = (0, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(candidates[lo])
}

/// Restoration cost of a matching from `truth` into `pred`, summed in source order.
pub fn restoration_cost(truth: &[(f64, f64)], pred: &PersistenceDiagram, pairs: &[(usize, Target)]) -> f64 {
    pairs
        .iter()
        .map(|&(s, t)| match t {
            Target::Point(j) => squared_cost(truth[s], coords(pred, j)),
            Target::Diagonal => squared_diagonal_cost(truth[s]),
        })
        .sum()
}

/// Optimal injection of the ground-truth points into the finite
/// off-diagonal points of `pred`, each source also allowed its own diagonal
/// projection. Unmatched prediction points cost nothing.
pub fn restoration_match(truth: &[(f64, f64)], pred: &PersistenceDiagram) -> Matching {
    let b = truth.len();
    if b == 0 {
        return Matching::empty();
    }
    let targets = pred.proper_indices();
    let m = targets.len();
    let cols = m + b;
    let mut costs = vec![0.0; b * cols];
    for (s, &src) in truth.iter().enumerate() {
        for (j, &t) in targets.iter().enumerate() {
            costs[s * cols + j] = squared_cost(src, coords(pred, t));
        }
        for j in m..cols {
            costs[s * cols + j] = squared_diagonal_cost(src);
        }
    }
    let assign = assignment::solve(&costs, b, cols);
    let pairs: Vec<(usize, Target)> = assign
        .iter()
        .enumerate()
        .map(|(s, &j)| {
            if j < m {
                (s, Target::Point(targets[j]))
            } else {
                (s, Target::Diagonal)
            }
        })
        .collect();
    let cost = restoration_cost(truth, pred, &pairs);
    Matching {
        pairs,
        targets_to_diagonal: Vec::new(),
        cost,
    }
}

pub const BRUTE_FORCE_MAX_SOURCES: usize = 5;
pub const BRUTE_FORCE_MAX_TARGETS: usize = 7;
pub const BRUTE_FORCE_MAX_POINTS: usize = 6;

/// Exhaustive restoration matching over every injection with diagonal fallback.
pub fn brute_force_match(truth: &[(f64, f64)], pred: &PersistenceDiagram) -> Result<Matching> {
    if truth.len() > BRUTE_FORCE_MAX_SOURCES {
        return Err(Error::SizeLimit {
            what: "ground-truth points",
            actual: truth.len(),
            limit: BRUTE_FORCE_MAX_SOURCES,
        });
    }
    let targets = pred.proper_indices();
    if targets.len() > BRUTE_FORCE_MAX_TARGETS {
        return Err(Error::SizeLimit {
            what: "prediction points",
            actual: targets.len(),
            limit: BRUTE_FORCE_MAX_TARGETS,
        });
    }
    let mut best: Option<(f64, Vec<(usize, Target)>)> = None;
    let mut current = Vec::with_capacity(truth.len());
    let mut used = vec![false; targets.len()];
    enumerate_injections(truth.len(), &targets, &mut used, &mut current, &mut |pairs| {
        let cost = restoration_cost(truth, pred, pairs);
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, pairs.to_vec()));
        }
    });
    let (cost, pairs) = best.unwrap_or((0.0, Vec::new()));
    Ok(Matching {
        pairs,
        targets_to_diagonal: Vec::new(),
        cost,
    })
}

fn enumerate_injections(
    sources: usize,
    targets: &[usize],
    used: &mut [bool],
    current: &mut Vec<(usize, Target)>,
    visit: &mut dyn FnMut(&[(usize, Target)]),
) {
    let s = current.len();
    if s == sources {
        visit(current);
        return;
    }
    for j in 0..targets.len() {
        if used[j] {
            continue;
        }
        used[j] = true;
        current.push((s, Target::Point(targets[j])));
        enumerate_injections(sources, targets, used, current, visit);
        current.pop();
        used[j] = false;
    }
    current.push((s, Target::Diagonal));
    enumerate_injections(sources, targets, used, current, visit);
    current.pop();
}

/// Exhaustive q-Wasserstein distance: every partial injection of d1 into
/// d2, with everything left over sent to the diagonal.
pub fn brute_force_wasserstein(d1: &PersistenceDiagram, d2: &PersistenceDiagram, q: f64) -> Result<f64> {
    check_order(q)?;
    single_dimension(d1, d2)?;
    let a = d1.proper_indices();
    let b = d2.proper_indices();
    for (len, what) in [(a.len(), "first diagram points"), (b.len(), "second diagram points")] {
        if len > BRUTE_FORCE_MAX_POINTS {
            return Err(Error::SizeLimit {
                what,
                actual: len,
                limit: BRUTE_FORCE_MAX_POINTS,
            });
        }
    }
    let mut best = f64::INFINITY;
    let mut used = vec![false; b.len()];
    let mut current = Vec::with_capacity(a.len());
    enumerate_injections(a.len(), &b, &mut used, &mut current, &mut |pairs| {
        let matched: Vec<usize> = pairs
            .iter()
            .filter_map(|&(_, t)| match t {
                Target::Point(j) => Some(j),
                Target::Diagonal => None,
            })
            .collect();
        let m = Matching {
            pairs: pairs.iter().map(|&(s, t)| (a[s], t)).collect(),
            targets_to_diagonal: b.iter().copied().filter(|j| !matched.contains(j)).collect(),
            cost: 0.0,
        };
        best = best.min(wasserstein_matching_cost(d1, d2, q, &m));
    });
    if a.is_empty() && b.is_empty() {
        best = 0.0;
    }
    Ok(if q.is_infinite() { best } else { best.powf(1.0 / q) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dgm(pairs: &[(f64, f64)]) -> PersistenceDiagram {
        PersistenceDiagram::from_pairs(0, pairs)
    }

    #[test]
    fn total_persistence_examples() {
        assert_eq!(total_persistence(&dgm(&[(0.0, 1.0)]), 2), 1.0);
        assert_eq!(total_persistence(&dgm(&[]), 3), 0.0);
        assert_eq!(total_persistence(&dgm(&[(0.0, 2.0), (1.0, 3.0)]), 2), 8.0);
    }

    #[test]
    fn total_persistence_skips_essential_and_diagonal() {
        let mut d = dgm(&[(0.0, 2.0), (1.0, 1.0)]);
        d.points[0].death = None;
        assert_eq!(total_persistence(&d, 2), 0.0);
    }

    #[test]
    fn wasserstein_examples() {
        let d = dgm(&[(0.0, 2.0), (0.5, 1.5)]);
        let (dist, m) = wasserstein(&d, &d, 2.0).unwrap();
        assert_eq!(dist, 0.0);
        assert_eq!(m.pairs, vec![(0, Target::Point(0)), (1, Target::Point(1))]);

        let (dist, m) = wasserstein(&dgm(&[(0.0, 2.0)]), &dgm(&[]), 2.0).unwrap();
        assert!((dist - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(m.pairs, vec![(0, Target::Diagonal)]);

        let (dist, _) = wasserstein(&dgm(&[(0.0, 2.0), (0.0, 1.0)]), &dgm(&[(0.0, 2.0)]), 2.0).unwrap();
        assert!((dist - 0.5f64.sqrt()).abs() < 1e-15);
        let bf = brute_force_wasserstein(&dgm(&[(0.0, 2.0), (0.0, 1.0)]), &dgm(&[(0.0, 2.0)]), 2.0).unwrap();
        assert!((bf - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn wasserstein_rejects_mixed_dims_and_bad_order() {
        let mut d = dgm(&[(0.0, 1.0)]);
        d.points[0].dim = 1;
        assert!(wasserstein(&d, &dgm(&[(0.0, 1.0)]), 2.0).is_err());
        assert!(wasserstein(&dgm(&[]), &dgm(&[]), 0.5).is_err());
    }

    #[test]
    fn bottleneck_examples() {
        let a = dgm(&[(0.0, 2.0)]);
        assert_eq!(bottleneck(&a, &dgm(&[])).unwrap(), 1.0);
        assert_eq!(bottleneck(&a, &a).unwrap(), 0.0);
        let (w, _) = wasserstein(&a, &dgm(&[(0.0, 2.5)]), f64::INFINITY).unwrap();
        assert_eq!(w, 0.5);
        assert_eq!(bottleneck(&a, &dgm(&[(0.0, 2.5)])).unwrap(), 0.5);
    }

    #[test]
    fn restoration_examples() {
        let m = restoration_match(&[(0.0, 1.0)], &dgm(&[(0.0, 0.9), (0.0, 0.1)]));
        assert_eq!(m.pairs, vec![(0, Target::Point(0))]);
        assert!((m.cost - 0.01).abs() < 1e-15);

        let m = restoration_match(&[], &dgm(&[(0.0, 0.9)]));
        assert_eq!(m.cost, 0.0);
        assert!(m.pairs.is_empty());

        let m = restoration_match(&[(0.0, 1.0), (0.0, 0.8)], &dgm(&[(0.0, 0.9)]));
        assert_eq!(m.pairs, vec![(0, Target::Point(0)), (1, Target::Diagonal)]);
        assert!((m.cost - 0.33).abs() < 1e-15);
        assert!(m.is_injective());
    }

    #[test]
    fn brute_force_examples_agree() {
        let cases: [(&[(f64, f64)], &[(f64, f64)]); 4] = [
            (&[(0.0, 1.0)], &[(0.0, 0.9), (0.0, 0.1)]),
            (&[], &[(0.0, 0.9)]),
            (&[(0.0, 1.0), (0.0, 0.8)], &[(0.0, 0.9)]),
            (&[(0.0, 1.0)], &[(0.0, 1.0)]),
        ];
        for (truth, pred) in cases {
            let fast = restoration_match(truth, &dgm(pred));
            let slow = brute_force_match(truth, &dgm(pred)).unwrap();
            assert_eq!(fast, slow);
        }
        let m = brute_force_match(&[(0.0, 1.0)], &dgm(&[(0.0, 1.0)])).unwrap();
        assert_eq!(m.cost, 0.0);
    }

    #[test]
    fn brute_force_size_caps() {
        let six = vec![(0.0, 1.0); 6];
        assert!(matches!(
            brute_force_match(&six, &dgm(&[])),
            Err(Error::SizeLimit { .. })
        ));
        let eight: Vec<(f64, f64)> = (0..8).map(|i| (0.0, 1.0 + i as f64)).collect();
        assert!(brute_force_match(&[(0.0, 1.0)], &dgm(&eight)).is_err());
        assert!(brute_force_wasserstein(&dgm(&eight), &dgm(&[]), 2.0).is_err());
    }

    #[test]
    fn brute_force_wasserstein_trivial_cases() {
        let d = dgm(&[(0.0, 1.0), (0.2, 0.7)]);
        assert_eq!(brute_force_wasserstein(&d, &d, 2.0).unwrap(), 0.0);
        let v = brute_force_wasserstein(&dgm(&[(0.0, 2.0)]), &dgm(&[]), 2.0).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(brute_force_wasserstein(&dgm(&[]), &dgm(&[]), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn zero_persistence_points_are_ignored() {
        let with_diag = dgm(&[(0.0, 1.0), (0.5, 0.5)]);
        let (w, _) = wasserstein(&with_diag, &dgm(&[(0.0, 1.0)]), 2.0).unwrap();
        assert_eq!(w, 0.0);
    }
}
