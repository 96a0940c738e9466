//! Persistence diagrams by boundary-matrix reduction over Z/2, plus a
//! union-find fast path for dimension 0.
//!
//! Simplices are processed in the order (value, dimension, id). That key
//! fixes every tie, so both algorithms return identical diagrams, down to
//! the birth and death simplices of each point.

use std::cmp::Ordering;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::complex::{Filtration, SimplexId};
use crate::error::{Error, Result};

/// One point of a persistence diagram. `death` is `None` for essential classes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersistencePoint {
    pub dim: usize,
    pub birth: f64,
    pub death: Option<f64>,
    pub birth_simplex: SimplexId,
    pub death_simplex: Option<SimplexId>,
}

impl PersistencePoint {
    pub fn is_essential(&self) -> bool {
        self.death.is_none()
    }

    /// Finite points with `birth == death` lie on the diagonal.
    pub fn is_zero_persistence(&self) -> bool {
        self.death == Some(self.birth)
    }

    /// `death - birth`, infinite for essential points.
    pub fn persistence(&self) -> f64 {
        self.death.map_or(f64::INFINITY, |d| d - self.birth)
    }

    /// Finite and off the diagonal: the points losses and distances use.
    pub fn is_proper(&self) -> bool {
        !self.is_essential() && !self.is_zero_persistence()
    }

    fn sort_key_cmp(&self, other: &Self) -> Ordering {
        let death = |p: &Self| p.death.unwrap_or(f64::INFINITY);
        self.dim
            .cmp(&other.dim)
            .then(self.birth.total_cmp(&other.birth))
            .then(death(self).total_cmp(&death(other)))
            .then(self.birth_simplex.cmp(&other.birth_simplex))
    }
}

/// A multiset of persistence points; the diagonal is implicit.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PersistenceDiagram {
    pub points: Vec<PersistencePoint>,
}

impl PersistenceDiagram {
    pub fn new(points: Vec<PersistencePoint>) -> Self {
        Self { points }
    }

    /// A diagram of finite points of one dimension with no simplex data.
    pub fn from_pairs(dim: usize, pairs: &[(f64, f64)]) -> Self {
        let points = pairs
            .iter()
            .map(|&(b, d)| PersistencePoint {
                dim,
                birth: b,
                death: Some(d),
                birth_simplex: 0,
                death_simplex: None,
            })
            .collect();
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points of homology dimension `dim`.
    pub fn of_dim(&self, dim: usize) -> PersistenceDiagram {
        Self::new(self.points.iter().filter(|p| p.dim == dim).copied().collect())
    }

    /// Indices of finite, off-diagonal points.
    pub fn proper_indices(&self) -> Vec<usize> {
        (0..self.points.len())
            .filter(|&i| self.points[i].is_proper())
            .collect()
    }

    pub fn essential_count(&self) -> usize {
        self.points.iter().filter(|p| p.is_essential()).count()
    }

    /// Sorts points by (dim, birth, death, birth_simplex); essential deaths last.
    pub fn sort(&mut self) {
        self.points.sort_by(PersistencePoint::sort_key_cmp);
    }

    pub fn sorted(mut self) -> Self {
        self.sort();
        self
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.clone().sorted())?)
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_json_string()?.as_bytes())?;
        w.write_all(b"\n")?;
        Ok(())
    }

    /// Parses and validates a diagram JSON document.
    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        let diagram: Self = serde_json::from_reader(r)?;
        for (i, p) in diagram.points.iter().enumerate() {
            if !p.birth.is_finite() || p.death.is_some_and(|d| !d.is_finite()) {
                return Err(Error::invalid(format!("point {i} has non-finite coordinates")));
            }
            if p.death.is_some_and(|d| d < p.birth) {
                return Err(Error::invalid(format!("point {i} dies before it is born")));
            }
        }
        Ok(diagram)
    }

    pub fn read_json_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_json(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn write_json_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_json(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

fn filtration_order(f: &Filtration) -> Vec<SimplexId> {
    let c = f.complex();
    let mut order: Vec<SimplexId> = (0..f.len()).collect();
    order.sort_by(|&a, &b| {
        f.value(a)
            .total_cmp(&f.value(b))
            .then(c.dim(a).cmp(&c.dim(b)))
            .then(a.cmp(&b))
    });
    order
}

fn check_monotone(f: &Filtration) -> Result<()> {
    if let Some((face, coface)) = f.monotonicity_violation() {
        return Err(Error::invalid(format!(
            "filtration is not monotone: face {face} ({}) enters after coface {coface} ({})",
            f.value(face),
            f.value(coface)
        )));
    }
    Ok(())
}

/// Persistence diagram in dimensions `0..=max_hom_dim` by standard column
/// reduction. Classes of dimension `max_hom_dim` can only die if the
/// complex has simplices one dimension up; otherwise they are essential.
pub fn compute_persistence(filtration: &Filtration, max_hom_dim: usize) -> Result<PersistenceDiagram> {
    let complex = filtration.complex();
    if max_hom_dim > complex.max_dim() {
        return Err(Error::invalid(format!(
            "homology dimension {max_hom_dim} exceeds complex dimension {}",
            complex.max_dim()
        )));
    }
    check_monotone(filtration)?;

    let order: Vec<SimplexId> = filtration_order(filtration)
        .into_iter()
        .filter(|&id| complex.dim(id) <= max_hom_dim + 1)
        .collect();
    let mut position = vec![usize::MAX; filtration.len()];
    for (pos, &id) in order.iter().enumerate() {
        position[id] = pos;
    }

    // pivot_owner[row] = column whose reduced lowest entry is `row`
    let mut pivot_owner = vec![usize::MAX; order.len()];
    let mut killed = vec![false; order.len()];
    let mut reduced: Vec<Vec<usize>> = Vec::with_capacity(order.len());
    let mut points = Vec::new();

    for (j, &id) in order.iter().enumerate() {
        let mut col: Vec<usize> = complex.boundary(id).into_iter().map(|f| position[f]).collect();
        col.sort_unstable();
        while let Some(&low) = col.last() {
            let owner = pivot_owner[low];
            if owner == usize::MAX {
                break;
            }
            col = symmetric_difference(&col, &reduced[owner]);
        }
        if let Some(&low) = col.last() {
            pivot_owner[low] = j;
            killed[low] = true;
            let birth_id = order[low];
            let dim = complex.dim(birth_id);
            if dim <= max_hom_dim {
                points.push(PersistencePoint {
                    dim,
                    birth: filtration.value(birth_id),
                    death: Some(filtration.value(id)),
                    birth_simplex: birth_id,
                    death_simplex: Some(id),
                });
            }
        }
        reduced.push(col);
    }

    for (pos, &id) in order.iter().enumerate() {
        let dim = complex.dim(id);
        if dim <= max_hom_dim && reduced[pos].is_empty() && !killed[pos] {
            points.push(PersistencePoint {
                dim,
                birth: filtration.value(id),
                death: None,
                birth_simplex: id,
                death_simplex: None,
            });
        }
    }
    Ok(PersistenceDiagram::new(points).sorted())
}

fn symmetric_difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

struct DisjointSet {
    parent: Vec<usize>,
    // oldest vertex (in filtration order) of the component rooted here
    oldest: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            oldest: (0..n).collect(),
        }
    }

    fn find(&mut self, mut node: usize) -> usize {
        let mut root = node;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[node] != node {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }
}

/// Dimension-0 diagram by Kruskal-style union-find under the elder rule.
///
/// Agrees exactly with `compute_persistence(f, 0)` restricted to dimension 0.
pub fn compute_persistence_dim0(filtration: &Filtration) -> Result<PersistenceDiagram> {
    let complex = filtration.complex();
    let n = complex.num_vertices();
    let edges = complex.ids_of_dim(1);
    for e in edges.clone() {
        let vs = complex.vertices(e);
        let v = filtration.value(e);
        if filtration.value(vs[0]) > v || filtration.value(vs[1]) > v {
            return Err(Error::invalid(format!(
                "filtration is not monotone at edge {e}"
            )));
        }
    }

    // rank of each vertex in filtration order: (value, id)
    let mut vertex_order: Vec<usize> = (0..n).collect();
    vertex_order.sort_by(|&a, &b| filtration.value(a).total_cmp(&filtration.value(b)).then(a.cmp(&b)));
    let mut rank = vec![0; n];
    for (r, &v) in vertex_order.iter().enumerate() {
        rank[v] = r;
    }

    let mut edge_order: Vec<SimplexId> = edges.collect();
    edge_order.sort_by(|&a, &b| filtration.value(a).total_cmp(&filtration.value(b)).then(a.cmp(&b)));

    let mut sets = DisjointSet::new(n);
    let mut points = Vec::with_capacity(n);
    for e in edge_order {
        let vs = complex.vertices(e);
        let (ra, rb) = (sets.find(vs[0]), sets.find(vs[1]));
        if ra == rb {
            continue;
        }
        let (elder, younger) = if rank[sets.oldest[ra]] < rank[sets.oldest[rb]] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        let dying = sets.oldest[younger];
        points.push(PersistencePoint {
            dim: 0,
            birth: filtration.value(dying),
            death: Some(filtration.value(e)),
            birth_simplex: dying,
            death_simplex: Some(e),
        });
        sets.parent[younger] = elder;
    }
    for v in 0..n {
        if sets.find(v) == v {
            let oldest = sets.oldest[v];
            points.push(PersistencePoint {
                dim: 0,
                birth: filtration.value(oldest),
                death: None,
                birth_simplex: oldest,
                death_simplex: None,
            });
        }
    }
    Ok(PersistenceDiagram::new(points).sorted())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{build_lower_star, build_rips, PointCloud, SimplicialComplex};

    fn line(xs: &[f64]) -> PointCloud {
        PointCloud::new(xs.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    fn finite_pairs(d: &PersistenceDiagram, dim: usize) -> Vec<(f64, f64)> {
        d.points
            .iter()
            .filter(|p| p.dim == dim && !p.is_essential())
            .map(|p| (p.birth, p.death.unwrap()))
            .collect()
    }

    #[test]
    fn single_vertex_is_essential() {
        let f = build_rips(&line(&[0.0]), 1, 1.0).unwrap();
        let d = compute_persistence(&f, 0).unwrap();
        assert_eq!(d.len(), 1);
        assert!(d.points[0].is_essential());
        assert_eq!(d.points[0].birth, 0.0);
    }

    #[test]
    fn collinear_points() {
        let f = build_rips(&line(&[0.0, 1.0, 3.0]), 1, 10.0).unwrap();
        for d in [compute_persistence(&f, 0).unwrap(), compute_persistence_dim0(&f).unwrap()] {
            assert_eq!(finite_pairs(&d, 0), vec![(0.0, 1.0), (0.0, 2.0)]);
            assert_eq!(d.essential_count(), 1);
        }
    }

    #[test]
    fn unit_square_loop() {
        let cloud = PointCloud::new(vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
        ])
        .unwrap();
        let f = build_rips(&cloud, 2, 2.0).unwrap();
        let d = compute_persistence(&f, 1).unwrap();
        assert_eq!(finite_pairs(&d, 0), vec![(0.0, 1.0); 3]);
        assert_eq!(d.of_dim(0).essential_count(), 1);
        // the diagonals close loops that their triangles fill at once
        let loops: Vec<_> = finite_pairs(&d, 1).into_iter().filter(|p| p.1 > p.0).collect();
        assert_eq!(loops.len(), 1);
        assert_eq!(loops[0].0, 1.0);
        assert!((loops[0].1 - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(d.of_dim(1).essential_count(), 0);
    }

    #[test]
    fn coincident_points_give_zero_persistence() {
        let cloud = PointCloud::new(vec![vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        let f = build_rips(&cloud, 1, 1.0).unwrap();
        let d = compute_persistence_dim0(&f).unwrap();
        assert_eq!(d.len(), 2);
        let finite: Vec<_> = d.points.iter().filter(|p| !p.is_essential()).collect();
        assert_eq!(finite.len(), 1);
        assert!(finite[0].is_zero_persistence());
        assert!(d.proper_indices().is_empty());
    }

    #[test]
    fn birth_and_death_match_simplex_values() {
        let complex = SimplicialComplex::complete(6, 2).unwrap();
        let vals = [0.3, -1.0, 2.0, 0.7, 0.1, 1.5];
        let f = build_lower_star(&complex, &vals).unwrap();
        let d = compute_persistence(&f, 1).unwrap();
        for p in &d.points {
            assert_eq!(p.birth, f.value(p.birth_simplex));
            if let Some(ds) = p.death_simplex {
                assert_eq!(p.death, Some(f.value(ds)));
            }
        }
        // a connected lower-star complex has one essential component born at the minimum
        let ess: Vec<_> = d.of_dim(0).points.into_iter().filter(|p| p.is_essential()).collect();
        assert_eq!(ess.len(), 1);
        assert_eq!(ess[0].birth, -1.0);
        assert_eq!(compute_persistence_dim0(&f).unwrap(), d.of_dim(0));
    }

    #[test]
    fn rejects_non_monotone() {
        let c = SimplicialComplex::new(vec![vec![0], vec![1], vec![0, 1]]).unwrap();
        let f = Filtration::from_values(c, vec![0.0, 2.0, 1.0]).unwrap();
        assert!(matches!(compute_persistence(&f, 0), Err(Error::InvalidInput(_))));
        assert!(matches!(compute_persistence_dim0(&f), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rejects_dimension_above_complex() {
        let f = build_rips(&line(&[0.0, 1.0]), 1, 2.0).unwrap();
        assert!(compute_persistence(&f, 2).is_err());
    }

    #[test]
    fn disconnected_components() {
        let f = build_rips(&line(&[0.0, 1.0, 10.0, 11.0]), 1, 2.0).unwrap();
        let d = compute_persistence_dim0(&f).unwrap();
        assert_eq!(d.essential_count(), 2);
        assert_eq!(d, compute_persistence(&f, 0).unwrap());
    }

    #[test]
    fn json_schema_and_order() {
        let f = build_rips(&line(&[0.0, 1.0, 3.0]), 1, 10.0).unwrap();
        let d = compute_persistence(&f, 0).unwrap();
        let json = d.to_json_string().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let arr = v.as_array().unwrap();
        assert_eq!(arr.len(), 3);
        assert_eq!(arr[0]["dim"], 0);
        assert_eq!(arr[0]["death"], 1.0);
        assert_eq!(arr[1]["death"], 2.0);
        assert!(arr[2]["death"].is_null());
        assert!(arr[2]["death_simplex"].is_null());
        let back = PersistenceDiagram::read_json(json.as_bytes()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn json_rejects_inverted_point() {
        let bad = r#"[{"dim":0,"birth":2.0,"death":1.0,"birth_simplex":0,"death_simplex":1}]"#;
        assert!(PersistenceDiagram::read_json(bad.as_bytes()).is_err());
    }
}
