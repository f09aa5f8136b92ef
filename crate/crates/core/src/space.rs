//! Metric spaces, points, and distances.
//!
//! Four concrete space families are supported: Euclidean boxes, weighted
//! coordinate sequences (finite truncations of a weighted Hilbert space),
//! finite metric trees, and the plane with an excluded open region. On top of
//! the base metric, derived distance kinds are available: snowflake powers
//! `d^a`, the projection metric `d_m^proj`, the unit-sphere projection
//! pseudo-metric, and weighted norms.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::ExecMode;
use crate::sweep::{run_sweep, TrialOutcome, ViolationReport};

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("point does not belong to the space: {0}")]
    PointNotInSpace(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("edge {0} is not part of the tree")]
    UnknownEdge(usize),
    #[error("offset {offset} outside edge of length {length}")]
    OffsetOutOfRange { offset: f64, length: f64 },
    #[error("tree must be connected and acyclic with positive edge lengths")]
    MalformedTree,
    #[error("interpolation parameter {0} outside [0, 1]")]
    BadInterpolation(f64),
    #[error("projection is not unique (medial axis point)")]
    NonUniqueProjection,
    #[error("distance kind {kind} is not defined on this space")]
    UnsupportedKind { kind: &'static str },
    #[error("projection-style distance evaluated at its base point")]
    AtBasePoint,
    #[error("power exponent {0} outside (0, 1]")]
    BadPowerExponent(f64),
    #[error("weight vector must be strictly positive with matching dimension")]
    BadWeights,
    #[error("midpoints are not computable on this space kind")]
    NoMidpoint,
    #[error("excluded region must be open and bounded")]
    BadHole,
}

/// A point of one of the supported spaces.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpacePoint {
    Vector { coords: Vec<f64> },
    Tree { edge: usize, offset: f64 },
}

impl SpacePoint {
    pub fn vector(coords: &[f64]) -> Self {
        SpacePoint::Vector {
            coords: coords.to_vec(),
        }
    }

    pub fn tree(edge: usize, offset: f64) -> Self {
        SpacePoint::Tree { edge, offset }
    }

    pub fn coords(&self) -> Option<&[f64]> {
        match self {
            SpacePoint::Vector { coords } => Some(coords),
            SpacePoint::Tree { .. } => None,
        }
    }

    /// Compact rendering: `x;y;z` for vectors, `edge:offset` for tree points.
    pub fn compact(&self) -> String {
        match self {
            SpacePoint::Vector { coords } => coords
                .iter()
                .map(|c| format!("{c}"))
                .collect::<Vec<_>>()
                .join(";"),
            SpacePoint::Tree { edge, offset } => format!("{edge}:{offset}"),
        }
    }

    /// Parses the `compact` rendering.
    pub fn parse_compact(s: &str) -> Option<SpacePoint> {
        if let Some((e, o)) = s.split_once(':') {
            return Some(SpacePoint::Tree {
                edge: e.trim().parse().ok()?,
                offset: o.trim().parse().ok()?,
            });
        }
        let coords: Option<Vec<f64>> = s
            .split(';')
            .map(|c| c.trim().parse::<f64>().ok())
            .collect();
        Some(SpacePoint::Vector { coords: coords? })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TreeEdge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RawTree {
    vertices: usize,
    edges: Vec<TreeEdge>,
}

/// A finite metric tree: connected, acyclic, positive edge lengths.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(try_from = "RawTree", into = "RawTree")]
pub struct MetricTree {
    vertices: usize,
    edges: Vec<TreeEdge>,
    #[serde(skip)]
    vertex_dist: Vec<f64>,
    #[serde(skip)]
    parent: Vec<Option<(usize, usize)>>, // (parent vertex, edge index)
    #[serde(skip)]
    depth: Vec<usize>,
}

impl TryFrom<RawTree> for MetricTree {
    type Error = SpaceError;
    fn try_from(raw: RawTree) -> Result<Self, SpaceError> {
        MetricTree::new(raw.vertices, raw.edges)
    }
}

impl From<MetricTree> for RawTree {
    fn from(t: MetricTree) -> RawTree {
        RawTree {
            vertices: t.vertices,
            edges: t.edges,
        }
    }
}

/// Canonical form of a tree point: either exactly a vertex or strictly
/// interior to an edge. Vertex identification uses the fixed vertex ordering,
/// so equal points compare equal regardless of which incident edge named them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CanonicalTreePoint {
    Vertex(usize),
    Interior { edge: usize, offset: f64 },
}

impl MetricTree {
    pub fn new(vertices: usize, edges: Vec<TreeEdge>) -> Result<Self, SpaceError> {
        if vertices == 0 || edges.len() + 1 != vertices {
            return Err(SpaceError::MalformedTree);
        }
        if edges
            .iter()
            .any(|e| e.a >= vertices || e.b >= vertices || e.a == e.b || !(e.length > 0.0))
        {
            return Err(SpaceError::MalformedTree);
        }
        // BFS from vertex 0; |E| = |V| - 1 plus full reachability rules out cycles.
        let mut adj = vec![Vec::new(); vertices];
        for (i, e) in edges.iter().enumerate() {
            adj[e.a].push((e.b, i));
            adj[e.b].push((e.a, i));
        }
        let mut parent = vec![None; vertices];
        let mut depth = vec![usize::MAX; vertices];
        let mut queue = std::collections::VecDeque::from([0usize]);
        depth[0] = 0;
        let mut seen = 1;
        while let Some(u) = queue.pop_front() {
            for &(v, ei) in &adj[u] {
                if depth[v] == usize::MAX {
                    depth[v] = depth[u] + 1;
                    parent[v] = Some((u, ei));
                    seen += 1;
                    queue.push_back(v);
                }
            }
        }
        if seen != vertices {
            return Err(SpaceError::MalformedTree);
        }
        let mut tree = MetricTree {
            vertices,
            edges,
            vertex_dist: vec![0.0; vertices * vertices],
            parent,
            depth,
        };
        // All-pairs vertex distances by depth-first accumulation from each root.
        for v in 0..vertices {
            let mut dist = vec![f64::INFINITY; vertices];
            dist[v] = 0.0;
            let mut stack = vec![v];
            while let Some(u) = stack.pop() {
                for &(w, ei) in &adj[u] {
                    if dist[w].is_infinite() {
                        dist[w] = dist[u] + tree.edges[ei].length;
                        stack.push(w);
                    }
                }
            }
            for (w, d) in dist.into_iter().enumerate() {
                tree.vertex_dist[v * vertices + w] = d;
            }
        }
        Ok(tree)
    }

    /// Star with `pods` edges of unit length around a hub (vertex 0).
    pub fn tripod() -> Self {
        Self::star(3, 1.0)
    }

    pub fn star(pods: usize, length: f64) -> Self {
        let edges = (0..pods)
            .map(|i| TreeEdge {
                a: 0,
                b: i + 1,
                length,
            })
            .collect();
        MetricTree::new(pods + 1, edges).expect("star is a valid tree")
    }

    /// Random tree grown by attaching each new vertex to a uniform existing
    /// one, with lengths in `[0.5, 1.5]`. Deterministic in `seed`.
    pub fn random(n_edges: usize, seed: u64) -> Self {
        let mut rng = crate::exec::substream(seed, &[0x7ee]);
        let mut edges = Vec::with_capacity(n_edges);
        for v in 1..=n_edges {
            let attach = rng.random_range(0..v);
            let length = rng.random_range(0.5..1.5);
            edges.push(TreeEdge {
                a: attach,
                b: v,
                length,
            });
        }
        MetricTree::new(n_edges + 1, edges).expect("grown tree is valid")
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices
    }

    pub fn edges(&self) -> &[TreeEdge] {
        &self.edges
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    fn vdist(&self, u: usize, v: usize) -> f64 {
        self.vertex_dist[u * self.vertices + v]
    }

    pub fn canonicalize(&self, p: &SpacePoint) -> Result<CanonicalTreePoint, SpaceError> {
        let (edge, offset) = match p {
            SpacePoint::Tree { edge, offset } => (*edge, *offset),
            SpacePoint::Vector { .. } => {
                return Err(SpaceError::PointNotInSpace("vector point on a tree".into()))
            }
        };
        let e = self.edges.get(edge).ok_or(SpaceError::UnknownEdge(edge))?;
        if !(0.0..=e.length).contains(&offset) || !offset.is_finite() {
            return Err(SpaceError::OffsetOutOfRange {
                offset,
                length: e.length,
            });
        }
        Ok(if offset == 0.0 {
            CanonicalTreePoint::Vertex(e.a)
        } else if offset == e.length {
            CanonicalTreePoint::Vertex(e.b)
        } else {
            CanonicalTreePoint::Interior { edge, offset }
        })
    }

    pub fn vertex_point(&self, v: usize) -> SpacePoint {
        // Represent a vertex on its lowest-index incident edge.
        for (i, e) in self.edges.iter().enumerate() {
            if e.a == v {
                return SpacePoint::tree(i, 0.0);
            }
            if e.b == v {
                return SpacePoint::tree(i, e.length);
            }
        }
        unreachable!("every vertex of a tree is incident to an edge")
    }

    pub fn distance(&self, x: &SpacePoint, y: &SpacePoint) -> Result<f64, SpaceError> {
        let cx = self.canonicalize(x)?;
        let cy = self.canonicalize(y)?;
        Ok(self.canon_distance(cx, cy))
    }

    fn canon_distance(&self, cx: CanonicalTreePoint, cy: CanonicalTreePoint) -> f64 {
        use CanonicalTreePoint::*;
        match (cx, cy) {
            (Vertex(u), Vertex(v)) => self.vdist(u, v),
            (Vertex(u), Interior { edge, offset }) | (Interior { edge, offset }, Vertex(u)) => {
                let e = &self.edges[edge];
                (offset + self.vdist(u, e.a)).min(e.length - offset + self.vdist(u, e.b))
            }
            (
                Interior {
                    edge: e1,
                    offset: t1,
                },
                Interior {
                    edge: e2,
                    offset: t2,
                },
            ) => {
                if e1 == e2 {
                    (t1 - t2).abs()
                } else {
                    let a = &self.edges[e1];
                    let b = &self.edges[e2];
                    let through = |u: usize, du: f64, v: usize, dv: f64| du + self.vdist(u, v) + dv;
                    through(a.a, t1, b.a, t2)
                        .min(through(a.a, t1, b.b, b.length - t2))
                        .min(through(a.b, a.length - t1, b.a, t2))
                        .min(through(a.b, a.length - t1, b.b, b.length - t2))
                }
            }
        }
    }

    /// Vertex sequence between two vertices, both endpoints included.
    fn vertex_path(&self, u: usize, v: usize) -> Vec<usize> {
        let mut up = vec![u];
        let mut vp = vec![v];
        let (mut a, mut b) = (u, v);
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].expect("non-root has parent").0;
            up.push(a);
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].expect("non-root has parent").0;
            vp.push(b);
        }
        while a != b {
            a = self.parent[a].expect("non-root has parent").0;
            b = self.parent[b].expect("non-root has parent").0;
            up.push(a);
            vp.push(b);
        }
        vp.pop();
        vp.reverse();
        up.extend(vp);
        up
    }

    fn edge_between(&self, u: usize, v: usize) -> (usize, bool) {
        // (edge index, true when traversal u -> v runs a -> b on the edge)
        if let Some((p, ei)) = self.parent[u] {
            if p == v {
                return (ei, self.edges[ei].a == u);
            }
        }
        if let Some((p, ei)) = self.parent[v] {
            if p == u {
                return (ei, self.edges[ei].a == u);
            }
        }
        unreachable!("vertices {u} and {v} are adjacent on the path")
    }

    /// Point at arc-length fraction `t` along the geodesic from `x` to `y`.
    pub fn geodesic_point(
        &self,
        x: &SpacePoint,
        y: &SpacePoint,
        t: f64,
    ) -> Result<SpacePoint, SpaceError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(SpaceError::BadInterpolation(t));
        }
        let cx = self.canonicalize(x)?;
        let cy = self.canonicalize(y)?;
        let total = self.canon_distance(cx, cy);
        if total == 0.0 {
            return Ok(x.clone());
        }
        let target = t * total;

        // Decompose the geodesic into directed edge segments.
        // Each segment: (edge, from_offset, to_offset).
        let mut segments: Vec<(usize, f64, f64)> = Vec::new();
        use CanonicalTreePoint::*;
        match (cx, cy) {
            (
                Interior {
                    edge: e1,
                    offset: t1,
                },
                Interior {
                    edge: e2,
                    offset: t2,
                },
            ) if e1 == e2 => {
                segments.push((e1, t1, t2));
            }
            _ => {
                // Pick exit/entry vertices achieving the total distance.
                let candidates_x: Vec<(usize, f64, Option<(usize, f64, f64)>)> = match cx {
                    Vertex(u) => vec![(u, 0.0, None)],
                    Interior { edge, offset } => {
                        let e = &self.edges[edge];
                        vec![
                            (e.a, offset, Some((edge, offset, 0.0))),
                            (e.b, e.length - offset, Some((edge, offset, e.length))),
                        ]
                    }
                };
                let candidates_y: Vec<(usize, f64, Option<(usize, f64, f64)>)> = match cy {
                    Vertex(u) => vec![(u, 0.0, None)],
                    Interior { edge, offset } => {
                        let e = &self.edges[edge];
                        vec![
                            (e.a, offset, Some((edge, 0.0, offset))),
                            (e.b, e.length - offset, Some((edge, e.length, offset))),
                        ]
                    }
                };
                let mut best: Option<(f64, usize, usize)> = None;
                for (i, (u, du, _)) in candidates_x.iter().enumerate() {
                    for (j, (v, dv, _)) in candidates_y.iter().enumerate() {
                        let d = du + self.vdist(*u, *v) + dv;
                        if best.map_or(true, |(bd, _, _)| d < bd) {
                            best = Some((d, i, j));
                        }
                    }
                }
                let (_, bi, bj) = best.expect("candidate sets are nonempty");
                let (u, _, seg_x) = candidates_x[bi];
                let (v, _, seg_y) = candidates_y[bj];
                if let Some(s) = seg_x {
                    segments.push(s);
                }
                let path = self.vertex_path(u, v);
                for w in path.windows(2) {
                    let (ei, forward) = self.edge_between(w[0], w[1]);
                    let e = &self.edges[ei];
                    if forward {
                        segments.push((ei, 0.0, e.length));
                    } else {
                        segments.push((ei, e.length, 0.0));
                    }
                }
                if let Some(s) = seg_y {
                    segments.push(s);
                }
            }
        }

        let mut walked = 0.0;
        for (edge, from, to) in &segments {
            let len = (to - from).abs();
            if walked + len >= target || (*edge, *from, *to) == *segments.last().unwrap() {
                let rest = (target - walked).clamp(0.0, len);
                let offset = if to >= from { from + rest } else { from - rest };
                return Ok(SpacePoint::tree(*edge, offset.max(0.0)));
            }
            walked += len;
        }
        unreachable!("target lies within the geodesic")
    }
}

/// Excluded open region of the plane.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hole {
    Disc { center: [f64; 2], radius: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

impl Hole {
    fn validate(&self) -> Result<(), SpaceError> {
        match self {
            Hole::Disc { radius, center } => {
                if !(*radius > 0.0) || center.iter().any(|c| !c.is_finite()) {
                    return Err(SpaceError::BadHole);
                }
            }
            Hole::Polygon { vertices } => {
                if vertices.len() < 3 || vertices.iter().flatten().any(|c| !c.is_finite()) {
                    return Err(SpaceError::BadHole);
                }
            }
        }
        Ok(())
    }

    /// Membership in the open excluded region. Points within floating-point
    /// tolerance of the boundary count as boundary, hence as members of the
    /// surrounding space (projections land there up to rounding).
    pub fn contains_open(&self, p: &[f64]) -> bool {
        match self {
            Hole::Disc { center, radius } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                let r0 = (dx * dx + dy * dy).sqrt();
                r0 < radius - 1e-12 * (1.0 + radius)
            }
            Hole::Polygon { vertices } => {
                let (_, boundary) = self.boundary_distance(p);
                let scale = vertices
                    .iter()
                    .flatten()
                    .fold(0.0f64, |acc, v| acc.max(v.abs()));
                if boundary <= 1e-12 * (1.0 + scale) {
                    return false;
                }
                let mut inside = false;
                let n = vertices.len();
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    if (a[1] > p[1]) != (b[1] > p[1]) {
                        let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                        if p[0] < x {
                            inside = !inside;
                        }
                    }
                }
                inside
            }
        }
    }

    /// Closest boundary point candidates and the minimal distance.
    fn boundary_distance(&self, p: &[f64]) -> (Vec<[f64; 2]>, f64) {
        match self {
            Hole::Disc { center, radius } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                let r0 = (dx * dx + dy * dy).sqrt();
                if r0 == 0.0 {
                    return (vec![], f64::NAN);
                }
                let q = [
                    center[0] + dx / r0 * radius,
                    center[1] + dy / r0 * radius,
                ];
                (vec![q], (radius - r0).abs())
            }
            Hole::Polygon { vertices } => {
                let n = vertices.len();
                let mut candidates: Vec<[f64; 2]> = Vec::with_capacity(n);
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let ab = [b[0] - a[0], b[1] - a[1]];
                    let ap = [p[0] - a[0], p[1] - a[1]];
                    let denom = ab[0] * ab[0] + ab[1] * ab[1];
                    let t = if denom > 0.0 {
                        ((ap[0] * ab[0] + ap[1] * ab[1]) / denom).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    candidates.push([a[0] + t * ab[0], a[1] + t * ab[1]]);
                }
                let best = candidates
                    .iter()
                    .map(|q| ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt())
                    .fold(f64::INFINITY, f64::min);
                (candidates, best)
            }
        }
    }
}

/// Descriptor of a supported metric space.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricSpaceDescriptor {
    Euclidean { dim: usize },
    WeightedSequence { dim: usize, weights: Vec<f64> },
    MetricTree { tree: MetricTree },
    PlaneWithHole { hole: Hole },
}

impl MetricSpaceDescriptor {
    pub fn euclidean(dim: usize) -> Self {
        MetricSpaceDescriptor::Euclidean { dim }
    }

    pub fn tree(tree: MetricTree) -> Self {
        MetricSpaceDescriptor::MetricTree { tree }
    }

    pub fn tripod() -> Self {
        Self::tree(MetricTree::tripod())
    }

    pub fn plane_with_hole(hole: Hole) -> Result<Self, SpaceError> {
        hole.validate()?;
        Ok(MetricSpaceDescriptor::PlaneWithHole { hole })
    }

    pub fn weighted_sequence(weights: Vec<f64>) -> Result<Self, SpaceError> {
        if weights.is_empty() || weights.iter().any(|w| !(*w > 0.0)) {
            return Err(SpaceError::BadWeights);
        }
        Ok(MetricSpaceDescriptor::WeightedSequence {
            dim: weights.len(),
            weights,
        })
    }

    pub fn as_tree(&self) -> Option<&MetricTree> {
        match self {
            MetricSpaceDescriptor::MetricTree { tree } => Some(tree),
            _ => None,
        }
    }

    pub fn vector_dim(&self) -> Option<usize> {
        match self {
            MetricSpaceDescriptor::Euclidean { dim } => Some(*dim),
            MetricSpaceDescriptor::WeightedSequence { dim, .. } => Some(*dim),
            MetricSpaceDescriptor::PlaneWithHole { .. } => Some(2),
            MetricSpaceDescriptor::MetricTree { .. } => None,
        }
    }

    /// Validates that `p` belongs to this space.
    pub fn check_point(&self, p: &SpacePoint) -> Result<(), SpaceError> {
        match self {
            MetricSpaceDescriptor::MetricTree { tree } => {
                tree.canonicalize(p)?;
                Ok(())
            }
            _ => {
                let dim = self.vector_dim().expect("vector family");
                let coords = p
                    .coords()
                    .ok_or_else(|| SpaceError::PointNotInSpace("tree point in vector space".into()))?;
                if coords.len() != dim {
                    return Err(SpaceError::DimensionMismatch {
                        expected: dim,
                        got: coords.len(),
                    });
                }
                if coords.iter().any(|c| !c.is_finite()) {
                    return Err(SpaceError::PointNotInSpace("non-finite coordinate".into()));
                }
                if let MetricSpaceDescriptor::PlaneWithHole { hole } = self {
                    if hole.contains_open(coords) {
                        return Err(SpaceError::PointNotInSpace(
                            "point inside the excluded region".into(),
                        ));
                    }
                }
                Ok(())
            }
        }
    }

    /// Validates `p` as a data-space point. For the plane with an excluded
    /// region the data space is the whole plane — only the descriptor side
    /// excludes the hole; for the other families the two coincide.
    pub fn check_data_point(&self, p: &SpacePoint) -> Result<(), SpaceError> {
        match self {
            MetricSpaceDescriptor::PlaneWithHole { .. } => {
                let coords = p
                    .coords()
                    .ok_or_else(|| SpaceError::PointNotInSpace("tree point in the plane".into()))?;
                if coords.len() != 2 {
                    return Err(SpaceError::DimensionMismatch {
                        expected: 2,
                        got: coords.len(),
                    });
                }
                if coords.iter().any(|c| !c.is_finite()) {
                    return Err(SpaceError::PointNotInSpace("non-finite coordinate".into()));
                }
                Ok(())
            }
            _ => self.check_point(p),
        }
    }

    /// Distance from a data point `y` to a descriptor point `q`; the ambient
    /// Euclidean metric on the plane family, the base metric otherwise.
    pub fn data_distance(&self, y: &SpacePoint, q: &SpacePoint) -> Result<f64, SpaceError> {
        match self {
            MetricSpaceDescriptor::PlaneWithHole { .. } => {
                self.check_data_point(y)?;
                self.check_point(q)?;
                Ok(euclidean(
                    y.coords().expect("vector point"),
                    q.coords().expect("vector point"),
                ))
            }
            _ => self.base_distance(y, q),
        }
    }

    /// Canonical equality of two points of this space.
    pub fn points_equal(&self, x: &SpacePoint, y: &SpacePoint) -> Result<bool, SpaceError> {
        match self {
            MetricSpaceDescriptor::MetricTree { tree } => {
                Ok(tree.canonicalize(x)? == tree.canonicalize(y)?)
            }
            _ => {
                self.check_point(x)?;
                self.check_point(y)?;
                Ok(x.coords() == y.coords())
            }
        }
    }

    pub fn base_distance(&self, x: &SpacePoint, y: &SpacePoint) -> Result<f64, SpaceError> {
        match self {
            MetricSpaceDescriptor::MetricTree { tree } => tree.distance(x, y),
            _ => {
                self.check_point(x)?;
                self.check_point(y)?;
                Ok(euclidean(
                    x.coords().expect("vector point"),
                    y.coords().expect("vector point"),
                ))
            }
        }
    }

    /// Midpoint for spaces where it is computable.
    pub fn midpoint(&self, x: &SpacePoint, y: &SpacePoint) -> Result<SpacePoint, SpaceError> {
        match self {
            MetricSpaceDescriptor::Euclidean { .. }
            | MetricSpaceDescriptor::WeightedSequence { .. } => {
                self.check_point(x)?;
                self.check_point(y)?;
                let xs = x.coords().expect("vector point");
                let ys = y.coords().expect("vector point");
                Ok(SpacePoint::Vector {
                    coords: xs.iter().zip(ys).map(|(a, b)| 0.5 * (a + b)).collect(),
                })
            }
            MetricSpaceDescriptor::MetricTree { tree } => tree.geodesic_point(x, y, 0.5),
            MetricSpaceDescriptor::PlaneWithHole { .. } => Err(SpaceError::NoMidpoint),
        }
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn weighted_norm(diff: impl Iterator<Item = f64>, weights: &[f64], inverse: bool) -> f64 {
    diff.zip(weights)
        .map(|(d, w)| {
            let s = if inverse { 1.0 / w } else { *w };
            (s * d) * (s * d)
        })
        .sum::<f64>()
        .sqrt()
}

/// Distance kind layered over the base metric of a space.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistanceKind {
    Base,
    /// Snowflake transform `d^a` with `a` in `(0, 1]`.
    Power { exponent: f64 },
    /// `d_m^proj(q, p) = sqrt((qp^2 - (qm - pm)^2) / (qm * pm))`.
    Projection { base_point: SpacePoint },
    /// Distance between the projections of `q` and `p` onto the unit sphere
    /// around `base_point` (vector spaces).
    SphereProjection { base_point: SpacePoint },
    /// Weighted norm on vector spaces; `inverse` flips weights to `1/s_k`.
    WeightedNorm { weights: Vec<f64>, inverse: bool },
}

impl DistanceKind {
    pub fn claims_triangle(&self) -> bool {
        // `d_m^proj` is not claimed to satisfy the triangle inequality in
        // general spaces; the sweep can still measure it.
        !matches!(self, DistanceKind::Projection { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            DistanceKind::Base => "base",
            DistanceKind::Power { .. } => "power",
            DistanceKind::Projection { .. } => "projection",
            DistanceKind::SphereProjection { .. } => "sphere_projection",
            DistanceKind::WeightedNorm { .. } => "weighted_norm",
        }
    }
}

/// Evaluates a distance of the given kind between two points of a space.
pub fn distance(
    space: &MetricSpaceDescriptor,
    kind: &DistanceKind,
    x: &SpacePoint,
    y: &SpacePoint,
) -> Result<f64, SpaceError> {
    match kind {
        DistanceKind::Base => space.base_distance(x, y),
        DistanceKind::Power { exponent } => {
            if !(*exponent > 0.0 && *exponent <= 1.0) {
                return Err(SpaceError::BadPowerExponent(*exponent));
            }
            Ok(space.base_distance(x, y)?.powf(*exponent))
        }
        DistanceKind::Projection { base_point } => {
            let qm = space.base_distance(x, base_point)?;
            let pm = space.base_distance(y, base_point)?;
            if qm == 0.0 || pm == 0.0 {
                return Err(SpaceError::AtBasePoint);
            }
            let qp = space.base_distance(x, y)?;
            let num = (qp * qp - (qm - pm) * (qm - pm)).max(0.0);
            Ok((num / (qm * pm)).sqrt())
        }
        DistanceKind::SphereProjection { base_point } => {
            let m = base_point
                .coords()
                .ok_or(SpaceError::UnsupportedKind { kind: "sphere_projection" })?;
            let (xs, ys) = match (x.coords(), y.coords()) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(SpaceError::UnsupportedKind { kind: "sphere_projection" }),
            };
            space.check_point(x)?;
            space.check_point(y)?;
            let nx = euclidean(xs, m);
            let ny = euclidean(ys, m);
            if nx == 0.0 || ny == 0.0 {
                return Err(SpaceError::AtBasePoint);
            }
            let s: f64 = xs
                .iter()
                .zip(ys)
                .zip(m)
                .map(|((a, b), c)| {
                    let ua = (a - c) / nx;
                    let ub = (b - c) / ny;
                    (ua - ub) * (ua - ub)
                })
                .sum();
            Ok(s.sqrt())
        }
        DistanceKind::WeightedNorm { weights, inverse } => {
            let dim = space
                .vector_dim()
                .ok_or(SpaceError::UnsupportedKind { kind: "weighted_norm" })?;
            if weights.len() != dim || weights.iter().any(|w| !(*w > 0.0)) {
                return Err(SpaceError::BadWeights);
            }
            space.check_point(x)?;
            space.check_point(y)?;
            let xs = x.coords().expect("vector point");
            let ys = y.coords().expect("vector point");
            Ok(weighted_norm(
                xs.iter().zip(ys).map(|(a, b)| a - b),
                weights,
                *inverse,
            ))
        }
    }
}

/// Point at fraction `t` along the geodesic between tree points.
pub fn tree_geodesic_point(
    space: &MetricSpaceDescriptor,
    x: &SpacePoint,
    y: &SpacePoint,
    t: f64,
) -> Result<SpacePoint, SpaceError> {
    let tree = space.as_tree().ok_or(SpaceError::NoMidpoint)?;
    tree.geodesic_point(x, y, t)
}

/// Relative tie tolerance for projection candidates.
const PROJECTION_TIE_TOL: f64 = 1e-9;

/// Projects a raw plane point onto a plane-with-hole space.
///
/// Returns the point itself when it already belongs to the space. Signals
/// `NonUniqueProjection` when two spatially distinct boundary candidates are
/// equidistant minimizers up to `1e-9 * (1 + distance)` (the medial axis).
pub fn project_to_space(
    space: &MetricSpaceDescriptor,
    raw: &SpacePoint,
) -> Result<SpacePoint, SpaceError> {
    let hole = match space {
        MetricSpaceDescriptor::PlaneWithHole { hole } => hole,
        _ => {
            space.check_point(raw)?;
            return Ok(raw.clone());
        }
    };
    let coords = raw
        .coords()
        .ok_or_else(|| SpaceError::PointNotInSpace("tree point in the plane".into()))?;
    if coords.len() != 2 || coords.iter().any(|c| !c.is_finite()) {
        return Err(SpaceError::DimensionMismatch {
            expected: 2,
            got: coords.len(),
        });
    }
    if !hole.contains_open(coords) {
        return Ok(raw.clone());
    }
    let (candidates, best) = hole.boundary_distance(coords);
    if candidates.is_empty() || !best.is_finite() {
        // Disc center: every boundary point is equidistant.
        return Err(SpaceError::NonUniqueProjection);
    }
    let tol = PROJECTION_TIE_TOL * (1.0 + best);
    let mut kept: Vec<[f64; 2]> = Vec::new();
    for c in &candidates {
        let d = euclidean(c, coords);
        if d <= best + tol {
            // Deduplicate candidates that are the same boundary point.
            if kept
                .iter()
                .all(|k| euclidean(k, c) > 1e-7 * (1.0 + best))
            {
                kept.push(*c);
            }
        }
    }
    if kept.len() > 1 {
        return Err(SpaceError::NonUniqueProjection);
    }
    Ok(SpacePoint::vector(&kept[0]))
}

/// Axis-aligned sampling window for vector spaces.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SampleWindow {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SampleWindow {
    pub fn symmetric(dim: usize, half_width: f64) -> Self {
        SampleWindow {
            lo: vec![-half_width; dim],
            hi: vec![half_width; dim],
        }
    }

    pub fn unit(dim: usize) -> Self {
        SampleWindow {
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
        }
    }
}

/// Uniform point sampler: box-uniform on vector spaces (rejecting the hole),
/// length-proportional on tree edges.
pub fn sample_point(
    space: &MetricSpaceDescriptor,
    window: Option<&SampleWindow>,
    rng: &mut ChaCha8Rng,
) -> SpacePoint {
    match space {
        MetricSpaceDescriptor::MetricTree { tree } => {
            let total = tree.total_length();
            let mut target = rng.random_range(0.0..total);
            for (i, e) in tree.edges().iter().enumerate() {
                if target <= e.length || i + 1 == tree.edges().len() {
                    return SpacePoint::tree(i, target.clamp(0.0, e.length));
                }
                target -= e.length;
            }
            unreachable!("edge selection covers the total length")
        }
        _ => {
            let dim = space.vector_dim().expect("vector family");
            let default = SampleWindow::symmetric(dim, 5.0);
            let w = window.unwrap_or(&default);
            loop {
                let coords: Vec<f64> = (0..dim)
                    .map(|i| rng.random_range(w.lo[i]..w.hi[i]))
                    .collect();
                if let MetricSpaceDescriptor::PlaneWithHole { hole } = space {
                    if hole.contains_open(&coords) {
                        continue;
                    }
                }
                return SpacePoint::Vector { coords };
            }
        }
    }
}

/// Randomized metric-axiom sweep: symmetry, nonnegativity, identity, and —
/// for kinds that claim it — the triangle inequality with additive slack.
pub fn metric_axiom_sweep(
    space: &MetricSpaceDescriptor,
    kind: &DistanceKind,
    window: Option<&SampleWindow>,
    trials: u64,
    seed: u64,
    tol: f64,
) -> ViolationReport {
    metric_axiom_sweep_with(
        space,
        kind,
        window,
        trials,
        seed,
        tol,
        kind.claims_triangle(),
        ExecMode::Auto,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn metric_axiom_sweep_with(
    space: &MetricSpaceDescriptor,
    kind: &DistanceKind,
    window: Option<&SampleWindow>,
    trials: u64,
    seed: u64,
    tol: f64,
    check_triangle: bool,
    mode: ExecMode,
) -> ViolationReport {
    let base_point = match kind {
        DistanceKind::Projection { base_point } | DistanceKind::SphereProjection { base_point } => {
            Some(base_point.clone())
        }
        _ => None,
    };
    run_sweep(trials, seed, tol, mode, |rng, _trial| {
        let draw = |rng: &mut ChaCha8Rng| loop {
            let p = sample_point(space, window, rng);
            if let Some(m) = &base_point {
                let d = space.base_distance(&p, m).unwrap_or(0.0);
                if d < 1e-6 {
                    continue;
                }
            }
            return p;
        };
        let x = draw(rng);
        let y = draw(rng);
        let z = draw(rng);
        let (dxy, dyx, dxx, dxz, dyz) = match (
            distance(space, kind, &x, &y),
            distance(space, kind, &y, &x),
            distance(space, kind, &x, &x),
            distance(space, kind, &x, &z),
            distance(space, kind, &y, &z),
        ) {
            (Ok(a), Ok(b), Ok(c), Ok(d), Ok(e)) => (a, b, c, d, e),
            _ => return vec![],
        };
        let pts = vec![x.compact(), y.compact(), z.compact()];
        let mut out = vec![
            TrialOutcome {
                residual: (dxy - dyx).abs(),
                scale: dxy,
                check: "symmetry",
                points: pts.clone(),
            },
            TrialOutcome {
                residual: -dxy,
                scale: dxy,
                check: "nonnegative",
                points: pts.clone(),
            },
            TrialOutcome {
                residual: dxx,
                scale: 1.0,
                check: "identity",
                points: pts.clone(),
            },
        ];
        if check_triangle {
            out.push(TrialOutcome {
                residual: dxz - (dxy + dyz),
                scale: dxz.abs() + dxy.abs() + dyz.abs(),
                check: "triangle",
                points: pts,
            });
        }
        out
    })
}

/// NPC-inequality residual at the midpoint `m` of `y1, y2`:
/// `d(m,q)^2 - (d(y1,q)^2 / 2 + d(y2,q)^2 / 2 - d(y1,y2)^2 / 4)`.
/// Nonpositive in Hadamard spaces.
pub fn npc_inequality_check(
    space: &MetricSpaceDescriptor,
    y1: &SpacePoint,
    y2: &SpacePoint,
    q: &SpacePoint,
) -> Result<f64, SpaceError> {
    let m = space.midpoint(y1, y2)?;
    let dmq = space.base_distance(&m, q)?;
    let d1 = space.base_distance(y1, q)?;
    let d2 = space.base_distance(y2, q)?;
    let d12 = space.base_distance(y1, y2)?;
    Ok(dmq * dmq - (0.5 * d1 * d1 + 0.5 * d2 * d2 - 0.25 * d12 * d12))
}
