//! Simplicial complexes and filtrations.
//!
//! Two filtrations are supported: Vietoris–Rips on a point cloud, where every
//! simplex enters at its diameter, and lower-star on a fixed complex, where
//! every simplex enters at the maximum of its vertex values. Each simplex
//! remembers which input its value depends on (its [`Attribution`]), which is
//! what lets gradients flow from diagram points back to the inputs.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position of a simplex in the canonical order of its complex.
pub type SimplexId = usize;

/// A finite list of points of equal dimension with finite coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::invalid("point cloud needs at least one point"))?;
        let mut coords = Vec::with_capacity(dim * points.len());
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::invalid(format!(
                    "point {i} has dimension {}, expected {dim}",
                    p.len()
                )));
            }
            coords.extend_from_slice(p);
        }
        Self::from_flat(dim, coords)
    }

    /// Builds a cloud from row-major coordinates.
    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("point dimension must be at least 1"));
        }
        if coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "{} coordinates do not form a non-empty set of {dim}-dimensional points",
                coords.len()
            )));
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::invalid(format!(
                "coordinate {} of point {} is not finite",
                pos % dim,
                pos / dim
            )));
        }
        Ok(Self { dim, coords })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Row-major coordinates; index `i * dim + c` is coordinate `c` of point `i`.
    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    /// Reads a headerless CSV: one point per row, comma separated.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut points = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Parse {
                line: row + 1,
                field: 0,
                message: e.to_string(),
            })?;
            let mut p = Vec::with_capacity(record.len());
            for (field, raw) in record.iter().enumerate() {
                let v: f64 = raw.parse().map_err(|_| Error::Parse {
                    line: row + 1,
                    field: field + 1,
                    message: format!("'{raw}' is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line: row + 1,
                        field: field + 1,
                        message: format!("'{raw}' is not finite"),
                    });
                }
                p.push(v);
            }
            if let Some(first) = points.first().map(Vec::len) {
                if p.len() != first {
                    return Err(Error::Parse {
                        line: row + 1,
                        field: p.len(),
                        message: format!("row has {} fields, expected {first}", p.len()),
                    });
                }
            }
            points.push(p);
        }
        Self::new(points)
    }

    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        for p in self.points() {
            let row: Vec<String> = p.iter().map(|c| c.to_string()).collect();
            writeln!(writer, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

/// Euclidean distance between two coordinate slices of equal length.
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A face-closed set of simplices stored in canonical order: by dimension,
/// then lexicographically by vertex tuple. Vertices are labelled `0..n` and
/// vertex `v` has simplex id `v`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplicialComplex {
    simplices: Vec<Vec<usize>>,
    // dim_start[d] is the id of the first simplex of dimension d.
    dim_start: Vec<usize>,
}

impl SimplicialComplex {
    /// Validates and canonicalizes a list of simplices.
    pub fn new(mut simplices: Vec<Vec<usize>>) -> Result<Self> {
        for s in &simplices {
            if s.is_empty() {
                return Err(Error::invalid("empty simplex"));
            }
            if s.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!(
                    "simplex {s:?} is not strictly increasing"
                )));
            }
        }
        simplices.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        if let Some(w) = simplices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("duplicate simplex {:?}", w[0])));
        }
        let complex = Self::from_sorted_unchecked(simplices);
        for (v, s) in complex.simplices[..complex.num_vertices()].iter().enumerate() {
            if s[0] != v {
                return Err(Error::invalid(format!(
                    "vertices must be labelled 0..n without gaps; missing vertex {v}"
                )));
            }
        }
        for id in complex.num_vertices()..complex.len() {
            let s = &complex.simplices[id];
            for skip in 0..s.len() {
                let face = facet(s, skip);
                if complex.find(&face).is_none() {
                    return Err(Error::invalid(format!(
                        "complex is not face-closed: {face:?} missing for {s:?}"
                    )));
                }
            }
        }
        Ok(complex)
    }

    fn from_sorted_unchecked(simplices: Vec<Vec<usize>>) -> Self {
        let max_dim = simplices.last().map_or(0, |s| s.len() - 1);
        let mut dim_start = vec![0; max_dim + 2];
        for d in 0..=max_dim + 1 {
            dim_start[d] = simplices.partition_point(|s| s.len() < d + 1);
        }
        Self {
            simplices,
            dim_start,
        }
    }

    /// The complete graph on `n` vertices plus, if `max_dim >= 2`, every triangle.
    pub fn complete(n: usize, max_dim: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("complex needs at least one vertex"));
        }
        let mut simplices: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
        if max_dim >= 1 {
            for i in 0..n {
                for j in i + 1..n {
                    simplices.push(vec![i, j]);
                }
            }
        }
        if max_dim >= 2 {
            for i in 0..n {
                for j in i + 1..n {
                    for k in j + 1..n {
                        simplices.push(vec![i, j, k]);
                    }
                }
            }
        }
        Ok(Self::from_sorted_unchecked(simplices))
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn num_vertices(&self) -> usize {
        self.dim_start.get(1).copied().unwrap_or(self.simplices.len())
    }

    pub fn max_dim(&self) -> usize {
        self.dim_start.len() - 2
    }

    pub fn dim(&self, id: SimplexId) -> usize {
        self.simplices[id].len() - 1
    }

    pub fn vertices(&self, id: SimplexId) -> &[usize] {
        &self.simplices[id]
    }

    /// Ids of all simplices of dimension `d`.
    pub fn ids_of_dim(&self, d: usize) -> std::ops::Range<SimplexId> {
        if d + 1 >= self.dim_start.len() {
            return self.len()..self.len();
        }
        self.dim_start[d]..self.dim_start[d + 1]
    }

    pub fn find(&self, vertices: &[usize]) -> Option<SimplexId> {
        if vertices.is_empty() {
            return None;
        }
        let range = self.ids_of_dim(vertices.len() - 1);
        let block = &self.simplices[range.clone()];
        block
            .binary_search_by(|s| s.as_slice().cmp(vertices))
            .ok()
            .map(|i| range.start + i)
    }

    /// Ids of the codimension-one faces of a simplex, ascending.
    pub fn boundary(&self, id: SimplexId) -> Vec<SimplexId> {
        let s = &self.simplices[id];
        if s.len() == 1 {
            return Vec::new();
        }
        let mut faces: Vec<SimplexId> = (0..s.len())
            .map(|skip| {
                self.find(&facet(s, skip))
                    .expect("complex is face-closed by construction")
            })
            .collect();
        faces.sort_unstable();
        faces
    }
}

fn facet(s: &[usize], skip: usize) -> Vec<usize> {
    s.iter()
        .enumerate()
        .filter(|&(i, _)| i != skip)
        .map(|(_, &v)| v)
        .collect()
}

/// The input a simplex's filtration value is a function of.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Attribution {
    /// Value does not depend on the input (Rips vertices).
    Constant,
    /// Value equals this vertex's value (lower-star).
    Vertex(usize),
    /// Value equals the length of this edge, endpoints ascending (Rips).
    Edge(usize, usize),
}

/// Borrowed view of the input a filtration is computed from.
#[derive(Clone, Copy, Debug)]
pub enum FilterInput<'a> {
    VertexValues(&'a [f64]),
    Cloud(&'a PointCloud),
}

impl FilterInput<'_> {
    /// Length of the flat input vector gradients are expressed over.
    pub fn flat_len(&self) -> usize {
        match self {
            FilterInput::VertexValues(v) => v.len(),
            FilterInput::Cloud(c) => c.as_flat().len(),
        }
    }

    pub fn as_flat(&self) -> &[f64] {
        match self {
            FilterInput::VertexValues(v) => v,
            FilterInput::Cloud(c) => c.as_flat(),
        }
    }
}

/// Gradient of a scalar with respect to a flat input vector, stored sparsely.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseGradient {
    pub entries: Vec<(usize, f64)>,
}

impl SparseGradient {
    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for &(i, g) in &self.entries {
            out[i] += g;
        }
        out
    }
}

impl Attribution {
    /// Value under `input`, or `None` when the attribution does not fit it.
    pub fn evaluate(&self, input: FilterInput<'_>) -> Option<f64> {
        match (*self, input) {
            (Attribution::Constant, _) => Some(0.0),
            (Attribution::Vertex(v), FilterInput::VertexValues(vals)) => vals.get(v).copied(),
            (Attribution::Edge(a, b), FilterInput::Cloud(c)) if a < c.len() && b < c.len() => {
                Some(euclidean(c.point(a), c.point(b)))
            }
            _ => None,
        }
    }

    /// Adds `scale` times the gradient of [`Attribution::evaluate`] into `out`.
    ///
    /// Coincident edge endpoints contribute nothing (the zero subgradient).
    /// Returns `false` when the attribution does not fit `input`.
    pub fn accumulate_gradient(&self, input: FilterInput<'_>, scale: f64, out: &mut [f64]) -> bool {
        match (*self, input) {
            (Attribution::Constant, _) => true,
            (Attribution::Vertex(v), FilterInput::VertexValues(vals)) if v < vals.len() => {
                out[v] += scale;
                true
            }
            (Attribution::Edge(a, b), FilterInput::Cloud(c)) if a < c.len() && b < c.len() => {
                let (pa, pb) = (c.point(a), c.point(b));
                let len = euclidean(pa, pb);
                if len > 0.0 {
                    let d = c.dim();
                    for k in 0..d {
                        let g = scale * (pa[k] - pb[k]) / len;
                        out[a * d + k] += g;
                        out[b * d + k] -= g;
                    }
                }
                true
            }
            _ => false,
        }
    }
}

/// How a filtration's values were produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilterKind {
    LowerStar,
    Rips,
    /// Values supplied directly; no attribution.
    Custom,
}

/// A simplicial complex with one value per simplex.
#[derive(Clone, Debug)]
pub struct Filtration {
    complex: SimplicialComplex,
    values: Vec<f64>,
    attribution: Vec<Attribution>,
    kind: FilterKind,
}

impl Filtration {
    /// Wraps explicit values without checking monotonicity; persistence
    /// computations reject non-monotone input.
    pub fn from_values(complex: SimplicialComplex, values: Vec<f64>) -> Result<Self> {
        if values.len() != complex.len() {
            return Err(Error::invalid(format!(
                "{} values for {} simplices",
                values.len(),
                complex.len()
            )));
        }
        let attribution = vec![Attribution::Constant; values.len()];
        Ok(Self {
            complex,
            values,
            attribution,
            kind: FilterKind::Custom,
        })
    }

    pub fn complex(&self) -> &SimplicialComplex {
        &self.complex
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, id: SimplexId) -> f64 {
        self.values[id]
    }

    pub fn attribution(&self, id: SimplexId) -> Attribution {
        self.attribution[id]
    }

    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// First face relation violating `value(face) <= value(coface)`, if any.
    pub fn monotonicity_violation(&self) -> Option<(SimplexId, SimplexId)> {
        (self.complex.num_vertices()..self.len()).find_map(|id| {
            self.complex
                .boundary(id)
                .into_iter()
                .find(|&f| self.values[f] > self.values[id])
                .map(|f| (f, id))
        })
    }

    /// Gradient of the value of `id` with respect to the flat input.
    pub fn value_gradient(&self, id: SimplexId, input: FilterInput<'_>) -> Result<SparseGradient> {
        if id >= self.len() {
            return Err(Error::invalid(format!("simplex {id} not in filtration")));
        }
        let mut dense = vec![0.0; input.flat_len()];
        if !self.attribution[id].accumulate_gradient(input, 1.0, &mut dense) {
            return Err(Error::invalid(format!(
                "input does not match the attribution of simplex {id}"
            )));
        }
        let entries = dense
            .into_iter()
            .enumerate()
            .filter(|&(_, g)| g != 0.0)
            .collect();
        Ok(SparseGradient { entries })
    }
}

/// Vietoris–Rips filtration of `cloud` up to dimension `max_dim` (at most 2),
/// keeping simplices of diameter at most `max_radius`.
///
/// Each simplex is attributed to the edge realizing its diameter, ties going
/// to the lexicographically smallest endpoint pair. `max_radius` may be
/// infinite.
pub fn build_rips(cloud: &PointCloud, max_dim: usize, max_radius: f64) -> Result<Filtration> {
    if max_dim > 2 {
        return Err(Error::invalid(format!(
            "Rips dimension {max_dim} not supported (max 2)"
        )));
    }
    if max_radius.is_nan() || max_radius <= 0.0 {
        return Err(Error::invalid("max_radius must be positive"));
    }
    let n = cloud.len();
    if n == 0 {
        return Err(Error::invalid("Rips filtration needs at least one point"));
    }
    let mut simplices: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
    let mut values = vec![0.0; n];
    let mut attribution = vec![Attribution::Constant; n];
    if max_dim >= 1 {
        let dist = pairwise_distances(cloud);
        for i in 0..n {
            for j in i + 1..n {
                let d = dist[i * n + j];
                if d <= max_radius {
                    simplices.push(vec![i, j]);
                    values.push(d);
                    attribution.push(Attribution::Edge(i, j));
                }
            }
        }
        if max_dim >= 2 {
            for i in 0..n {
                for j in i + 1..n {
                    if dist[i * n + j] > max_radius {
                        continue;
                    }
                    for k in j + 1..n {
                        let edges = [(i, j), (i, k), (j, k)];
                        let lens = edges.map(|(a, b)| dist[a * n + b]);
                        if lens.iter().any(|&l| l > max_radius) {
                            continue;
                        }
                        let diam = lens.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        let pos = lens.iter().position(|&l| l == diam).unwrap_or(0);
                        let (a, b) = edges[pos];
                        simplices.push(vec![i, j, k]);
                        values.push(diam);
                        attribution.push(Attribution::Edge(a, b));
                    }
                }
            }
        }
    }
    Ok(Filtration {
        complex: SimplicialComplex::from_sorted_unchecked(simplices),
        values,
        attribution,
        kind: FilterKind::Rips,
    })
}

fn pairwise_distances(cloud: &PointCloud) -> Vec<f64> {
    let n = cloud.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = euclidean(cloud.point(i), cloud.point(j));
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    dist
}

/// Lower-star filtration: every simplex takes the maximum of its vertex
/// values and is attributed to the first vertex attaining it.
pub fn build_lower_star(complex: &SimplicialComplex, vertex_values: &[f64]) -> Result<Filtration> {
    if vertex_values.len() != complex.num_vertices() {
        return Err(Error::invalid(format!(
            "{} vertex values for {} vertices",
            vertex_values.len(),
            complex.num_vertices()
        )));
    }
    if let Some(v) = vertex_values.iter().position(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("value of vertex {v} is not finite")));
    }
    let mut values = Vec::with_capacity(complex.len());
    let mut attribution = Vec::with_capacity(complex.len());
    for id in 0..complex.len() {
        let mut best = complex.vertices(id)[0];
        for &v in complex.vertices(id) {
            if vertex_values[v] > vertex_values[best] {
                best = v;
            }
        }
        values.push(vertex_values[best]);
        attribution.push(Attribution::Vertex(best));
    }
    Ok(Filtration {
        complex: complex.clone(),
        values,
        attribution,
        kind: FilterKind::LowerStar,
    })
}
