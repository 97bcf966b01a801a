//! Grid-graph construction, edge/vertex indexing, connectivity queries,
//! cutsets, and the distinguished horizontal line between two terminals.
//!
//! Vertices of an `n_cols x n_rows` grid are the points `(x, y)` with
//! `1 <= x <= n_cols`, `1 <= y <= n_rows`. Edge indexing is frozen so that
//! experiment files are portable: horizontal edges come first in row-major
//! order, then vertical edges in row-major order.

use crate::bitset::Bits;
use crate::{Error, Result};

/// Vertex index into a [`GridGraph`]; row-major, `(x, y) -> (y-1)*n_cols + (x-1)`.
pub type VertexId = usize;
/// Edge index into a [`GridGraph`]; horizontal edges first, then vertical.
pub type EdgeId = usize;

/// Finite grid with nearest-neighbor edges and frozen index maps.
#[derive(Clone, Debug)]
pub struct GridGraph {
    n_cols: usize,
    n_rows: usize,
    endpoints: Vec<(VertexId, VertexId)>,
    adjacency: Vec<Vec<(EdgeId, VertexId)>>,
}

impl GridGraph {
    /// Builds the grid. Rejects zero dimensions.
    pub fn build(n_cols: usize, n_rows: usize) -> Result<Self> {
        if n_cols == 0 || n_rows == 0 {
            return Err(Error::GridSize(format!(
                "grid dimensions must be positive, got {n_cols}x{n_rows}"
            )));
        }
        let n_vertices = n_cols * n_rows;
        let mut endpoints = Vec::with_capacity(n_rows * (n_cols - 1) + n_cols * (n_rows - 1));
        // Horizontal edges, row-major.
        for y in 1..=n_rows {
            for x in 1..n_cols {
                endpoints.push((vertex_index(n_cols, x, y), vertex_index(n_cols, x + 1, y)));
            }
        }
        // Vertical edges, row-major.
        for y in 1..n_rows {
            for x in 1..=n_cols {
                endpoints.push((vertex_index(n_cols, x, y), vertex_index(n_cols, x, y + 1)));
            }
        }
        let mut adjacency = vec![Vec::with_capacity(4); n_vertices];
        for (e, &(a, b)) in endpoints.iter().enumerate() {
            adjacency[a].push((e, b));
            adjacency[b].push((e, a));
        }
        Ok(GridGraph {
            n_cols,
            n_rows,
            endpoints,
            adjacency,
        })
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn num_vertices(&self) -> usize {
        self.n_cols * self.n_rows
    }

    pub fn num_edges(&self) -> usize {
        self.endpoints.len()
    }

    /// Number of horizontal edges; vertical edge indices start here.
    pub fn num_horizontal_edges(&self) -> usize {
        self.n_rows * (self.n_cols - 1)
    }

    pub fn vertex(&self, x: usize, y: usize) -> VertexId {
        assert!(
            (1..=self.n_cols).contains(&x) && (1..=self.n_rows).contains(&y),
            "vertex ({x},{y}) outside {}x{} grid",
            self.n_cols,
            self.n_rows
        );
        vertex_index(self.n_cols, x, y)
    }

    pub fn coords(&self, v: VertexId) -> (usize, usize) {
        assert!(v < self.num_vertices());
        (v % self.n_cols + 1, v / self.n_cols + 1)
    }

    /// Index of the horizontal edge `((x, y), (x+1, y))`.
    pub fn horizontal_edge(&self, x: usize, y: usize) -> EdgeId {
        assert!(x >= 1 && x < self.n_cols && y >= 1 && y <= self.n_rows);
        (y - 1) * (self.n_cols - 1) + (x - 1)
    }

    /// Index of the vertical edge `((x, y), (x, y+1))`.
    pub fn vertical_edge(&self, x: usize, y: usize) -> EdgeId {
        assert!(x >= 1 && x <= self.n_cols && y >= 1 && y < self.n_rows);
        self.num_horizontal_edges() + (y - 1) * self.n_cols + (x - 1)
    }

    pub fn is_horizontal(&self, e: EdgeId) -> bool {
        e < self.num_horizontal_edges()
    }

    pub fn endpoints(&self, e: EdgeId) -> (VertexId, VertexId) {
        self.endpoints[e]
    }

    /// Endpoint coordinates of an edge, lower endpoint first.
    pub fn edge_coords(&self, e: EdgeId) -> ((usize, usize), (usize, usize)) {
        let (a, b) = self.endpoints[e];
        (self.coords(a), self.coords(b))
    }

    /// Incident `(edge, neighbor)` pairs of a vertex.
    pub fn neighbors(&self, v: VertexId) -> &[(EdgeId, VertexId)] {
        &self.adjacency[v]
    }

    pub fn edge_ids(&self) -> std::ops::Range<EdgeId> {
        0..self.num_edges()
    }
}

#[inline]
fn vertex_index(n_cols: usize, x: usize, y: usize) -> VertexId {
    (y - 1) * n_cols + (x - 1)
}

/// Builds an `n_cols x n_rows` grid graph with deterministic indexing.
pub fn build_grid(n_cols: usize, n_rows: usize) -> Result<GridGraph> {
    GridGraph::build(n_cols, n_rows)
}

/// Subset of the edges of a [`GridGraph`], stored as a compact bit set.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct EdgeSet {
    bits: Bits,
}

impl EdgeSet {
    pub fn empty(graph: &GridGraph) -> Self {
        EdgeSet {
            bits: Bits::new(graph.num_edges()),
        }
    }

    pub fn full(graph: &GridGraph) -> Self {
        let mut s = Self::empty(graph);
        s.bits.invert();
        s
    }

    pub fn from_edges<I: IntoIterator<Item = EdgeId>>(graph: &GridGraph, edges: I) -> Self {
        let mut s = Self::empty(graph);
        for e in edges {
            s.insert(e);
        }
        s
    }

    /// Validates indices against the graph's edge range.
    pub fn from_indices(graph: &GridGraph, indices: &[EdgeId]) -> Result<Self> {
        let mut s = Self::empty(graph);
        for &e in indices {
            if e >= graph.num_edges() {
                return Err(Error::Decode(format!(
                    "edge index {e} out of range (graph has {} edges)",
                    graph.num_edges()
                )));
            }
            s.insert(e);
        }
        Ok(s)
    }

    pub fn capacity(&self) -> usize {
        self.bits.len()
    }

    pub fn len(&self) -> usize {
        self.bits.count()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.bits.get(e)
    }

    pub fn insert(&mut self, e: EdgeId) {
        self.bits.set(e, true);
    }

    pub fn remove(&mut self, e: EdgeId) {
        self.bits.set(e, false);
    }

    pub fn union(&self, other: &EdgeSet) -> EdgeSet {
        let mut r = self.clone();
        r.bits.union_with(&other.bits);
        r
    }

    pub fn intersection(&self, other: &EdgeSet) -> EdgeSet {
        let mut r = self.clone();
        r.bits.intersect_with(&other.bits);
        r
    }

    pub fn minus(&self, other: &EdgeSet) -> EdgeSet {
        let mut r = self.clone();
        r.bits.difference_with(&other.bits);
        r
    }

    pub fn complement(&self) -> EdgeSet {
        let mut r = self.clone();
        r.bits.invert();
        r
    }

    pub fn is_subset_of(&self, other: &EdgeSet) -> bool {
        self.bits.is_subset_of(&other.bits)
    }

    pub fn intersects(&self, other: &EdgeSet) -> bool {
        self.bits.intersects(&other.bits)
    }

    /// Edge indices in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.bits.iter_ones()
    }

    pub fn to_indices(&self) -> Vec<EdgeId> {
        self.iter().collect()
    }
}

/// Subset of the vertices of a [`GridGraph`] (cutset sides).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct VertexSet {
    bits: Bits,
}

impl VertexSet {
    pub fn empty(graph: &GridGraph) -> Self {
        VertexSet {
            bits: Bits::new(graph.num_vertices()),
        }
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.bits.get(v)
    }

    pub fn insert(&mut self, v: VertexId) {
        self.bits.set(v, true);
    }

    pub fn len(&self) -> usize {
        self.bits.count()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn complement(&self) -> VertexSet {
        let mut r = self.clone();
        r.bits.invert();
        r
    }

    pub fn iter(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.bits.iter_ones()
    }

    pub(crate) fn bits(&self) -> &Bits {
        &self.bits
    }
}

/// Distinguished pair of terminals `u != v`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct TerminalPair {
    pub u: VertexId,
    pub v: VertexId,
}

impl TerminalPair {
    pub fn new(u: VertexId, v: VertexId) -> Result<Self> {
        if u == v {
            return Err(Error::InvalidParameter(
                "terminal pair requires two distinct vertices".into(),
            ));
        }
        Ok(TerminalPair { u, v })
    }

    /// The canonical horizontal pair `u = (1, r)`, `v = (n_cols, r)` where
    /// `r = n_rows/2` for even `n_rows`. For odd `n_rows` the middle row
    /// `ceil(n_rows/2)` is used; callers that care record the choice in
    /// output metadata (see [`TerminalPair::canonical_row_is_exact`]).
    pub fn canonical(graph: &GridGraph) -> Result<Self> {
        if graph.n_cols() < 2 {
            return Err(Error::Geometry(
                "canonical pair needs at least two columns".into(),
            ));
        }
        let row = Self::canonical_row(graph.n_rows());
        TerminalPair::new(graph.vertex(1, row), graph.vertex(graph.n_cols(), row))
    }

    pub fn canonical_row(n_rows: usize) -> usize {
        if n_rows.is_multiple_of(2) {
            n_rows / 2
        } else {
            n_rows.div_ceil(2)
        }
    }

    /// True when `n_rows` is even and the canonical row is exactly `n/2`.
    pub fn canonical_row_is_exact(n_rows: usize) -> bool {
        n_rows.is_multiple_of(2)
    }
}

/// The straight horizontal line of edges between two same-row terminals.
/// Its size equals the Manhattan distance between the terminals.
pub fn line_l(graph: &GridGraph, pair: &TerminalPair) -> Result<EdgeSet> {
    let (ux, uy) = graph.coords(pair.u);
    let (vx, vy) = graph.coords(pair.v);
    if uy != vy {
        return Err(Error::Geometry(format!(
            "terminals ({ux},{uy}) and ({vx},{vy}) are not on one row"
        )));
    }
    let (lo, hi) = (ux.min(vx), ux.max(vx));
    Ok(EdgeSet::from_edges(
        graph,
        (lo..hi).map(|x| graph.horizontal_edge(x, uy)),
    ))
}

/// True iff `u` and `v` lie in one connected component of the subgraph
/// induced by the edges in `s`.
pub fn is_connecting(graph: &GridGraph, s: &EdgeSet, pair: &TerminalPair) -> bool {
    let mut uf = UnionFind::new(graph.num_vertices());
    for e in s.iter() {
        let (a, b) = graph.endpoints(e);
        uf.unite(a, b);
    }
    uf.same(pair.u, pair.v)
}

/// All `n_rows` horizontal edges between columns `x` and `x+1`. Removing
/// them disconnects the two column blocks.
pub fn vertical_cutset(graph: &GridGraph, x: usize) -> Result<EdgeSet> {
    if x < 1 || x >= graph.n_cols() {
        return Err(Error::Geometry(format!(
            "cutset column {x} out of range 1..{}",
            graph.n_cols()
        )));
    }
    Ok(EdgeSet::from_edges(
        graph,
        (1..=graph.n_rows()).map(|y| graph.horizontal_edge(x, y)),
    ))
}

/// A cutset separating `u` from `v` together with the vertex bipartition.
#[derive(Clone, Debug)]
pub struct CutsetSplit {
    pub cutset: EdgeSet,
    /// Vertices reachable from `u` without using any edge of the cutset.
    pub side_u: VertexSet,
    /// The complementary side (contains `v`).
    pub side_v: VertexSet,
}

/// The boundary edges of the connected component of `u` induced by the
/// edges in `s`. Requires that `s` does not connect `u` and `v`; the
/// returned cutset is then disjoint from `s` and separates `u` from `v`.
pub fn component_boundary_cutset(
    graph: &GridGraph,
    s: &EdgeSet,
    pair: &TerminalPair,
) -> Result<CutsetSplit> {
    if is_connecting(graph, s, pair) {
        return Err(Error::Precondition(
            "component_boundary_cutset requires a set that does not connect the terminals".into(),
        ));
    }
    // Connected component of u in (V, s), by BFS over s-edges.
    let mut side_u = VertexSet::empty(graph);
    side_u.insert(pair.u);
    let mut queue = vec![pair.u];
    while let Some(v) = queue.pop() {
        for &(e, w) in graph.neighbors(v) {
            if s.contains(e) && !side_u.contains(w) {
                side_u.insert(w);
                queue.push(w);
            }
        }
    }
    let mut cutset = EdgeSet::empty(graph);
    for e in graph.edge_ids() {
        let (a, b) = graph.endpoints(e);
        if side_u.contains(a) != side_u.contains(b) {
            cutset.insert(e);
        }
    }
    let side_v = side_u.complement();
    Ok(CutsetSplit {
        cutset,
        side_u,
        side_v,
    })
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn same(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }

    fn unite(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
    }
}
