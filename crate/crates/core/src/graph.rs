//! Conflict graph that decides which missing packets may share one XOR.
//!
//! Each vertex stands for "receiver `i` still misses packet `j`" within a
//! window.  Two vertices may join the same coded transmission when either
//! receiver can strip the other's packet out of the XOR: they ask for the very
//! same packet, or each already holds the packet the other one asks for (side
//! information evaluated inside the window).  Cliques of this graph are
//! exactly the packet combinations every targeted receiver decodes instantly.

use crate::error::{Error, Result};
use crate::model::{FeedbackMatrix, LayeredGop};

/// One missing packet at one receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Vertex {
    pub receiver: usize,
    pub packet: usize,
}

impl Vertex {
    pub fn new(receiver: usize, packet: usize) -> Self {
        Vertex { receiver, packet }
    }
}

/// Coding-conflict graph over one window.
///
/// Vertices are kept sorted by `(receiver, packet)` so that every derived
/// artefact (cliques, subgraphs, schedules) is reproducible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdncGraph {
    window: usize,
    vertices: Vec<Vertex>,
    adj: Vec<bool>,
}

impl IdncGraph {
    /// Window (layer count) this graph was built over.
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Vertices sorted by `(receiver, packet)`.
    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, index: usize) -> Vertex {
        self.vertices[index]
    }

    /// Position of `v` in [`Self::vertices`], if present.
    pub fn index_of(&self, v: Vertex) -> Option<usize> {
        self.vertices.binary_search(&v).ok()
    }

    /// Whether vertices `a` and `b` (by index) may share a transmission.
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adj[a * self.vertices.len() + b]
    }

    /// Indices of vertices adjacent to every vertex in `indices`.
    fn common_neighbours(&self, indices: &[usize]) -> Vec<usize> {
        (0..self.vertices.len())
            .filter(|&u| !indices.contains(&u) && indices.iter().all(|&k| self.adjacent(u, k)))
            .collect()
    }

    /// Subgraph induced by the given vertex indices (order-preserving).
    pub fn induced(&self, keep: &[usize]) -> IdncGraph {
        let vertices: Vec<Vertex> = keep.iter().map(|&k| self.vertices[k]).collect();
        debug_assert!(vertices.windows(2).all(|w| w[0] < w[1]), "indices must ascend");
        let n = keep.len();
        let mut adj = vec![false; n * n];
        for a in 0..n {
            for b in 0..n {
                adj[a * n + b] = self.adjacent(keep[a], keep[b]);
            }
        }
        IdncGraph { window: self.window, vertices, adj }
    }
}

/// A set of vertices that may ride one XOR transmission together: pairwise
/// adjacent, hence at most one vertex per receiver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clique {
    vertices: Vec<Vertex>,
}

impl Clique {
    pub fn empty() -> Self {
        Clique { vertices: Vec::new() }
    }

    /// Validates pairwise adjacency inside `graph` before accepting the set.
    pub fn from_vertices(graph: &IdncGraph, mut vertices: Vec<Vertex>) -> Result<Self> {
        vertices.sort();
        vertices.dedup();
        let indices: Vec<usize> = vertices
            .iter()
            .map(|&v| {
                graph.index_of(v).ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "vertex ({}, {}) is not in the graph",
                        v.receiver, v.packet
                    ))
                })
            })
            .collect::<Result<_>>()?;
        for a in 0..indices.len() {
            for b in a + 1..indices.len() {
                if !graph.adjacent(indices[a], indices[b]) {
                    return Err(Error::InvalidArgument(format!(
                        "vertices ({}, {}) and ({}, {}) conflict",
                        vertices[a].receiver, vertices[a].packet,
                        vertices[b].receiver, vertices[b].packet
                    )));
                }
            }
        }
        Ok(Clique { vertices })
    }

    pub(crate) fn from_sorted_unchecked(vertices: Vec<Vertex>) -> Self {
        debug_assert!(vertices.windows(2).all(|w| w[0] < w[1]));
        Clique { vertices }
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Receivers that decode a new packet from this transmission, ascending.
    pub fn targeted_receivers(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.vertices.iter().map(|v| v.receiver).collect();
        r.dedup();
        r
    }

    /// Distinct source packets mixed into the XOR, ascending.
    pub fn packets(&self) -> Vec<usize> {
        let mut p: Vec<usize> = self.vertices.iter().map(|v| v.packet).collect();
        p.sort_unstable();
        p.dedup();
        p
    }
}

/// Builds the conflict graph for the first `window` layers.
pub fn build_graph(f: &FeedbackMatrix, gop: &LayeredGop, window: usize) -> Result<IdncGraph> {
    if f.packets() != gop.total_packets() {
        return Err(Error::InvalidArgument(format!(
            "feedback matrix covers {} packets but the block has {}",
            f.packets(),
            gop.total_packets()
        )));
    }
    if window == 0 || window > gop.layers() {
        return Err(Error::InvalidArgument(format!(
            "window {window} out of range 1..={}",
            gop.layers()
        )));
    }
    let span = gop.layer_prefix(window);
    let mut vertices = Vec::new();
    for i in 0..f.receivers() {
        for j in 0..span {
            if f.missing(i, j) {
                vertices.push(Vertex::new(i, j));
            }
        }
    }
    let n = vertices.len();
    let mut adj = vec![false; n * n];
    for a in 0..n {
        for b in a + 1..n {
            let (va, vb) = (vertices[a], vertices[b]);
            if va.receiver == vb.receiver {
                continue;
            }
            // Same packet wanted by both, or each holds what the other wants.
            let ok = va.packet == vb.packet
                || (f.has(vb.receiver, va.packet) && f.has(va.receiver, vb.packet));
            if ok {
                adj[a * n + b] = true;
                adj[b * n + a] = true;
            }
        }
    }
    Ok(IdncGraph { window, vertices, adj })
}

/// Largest graph the exact enumerator accepts unless told otherwise.
pub const DEFAULT_ENUMERATION_BUDGET: usize = 30;

/// All maximal cliques, sorted lexicographically by vertex list.
///
/// Uses pivoting branch-and-bound over bitmasks; refuses graphs above
/// [`DEFAULT_ENUMERATION_BUDGET`] vertices since the output can be
/// exponential.
pub fn enumerate_maximal_cliques(graph: &IdncGraph) -> Result<Vec<Clique>> {
    enumerate_maximal_cliques_with_budget(graph, DEFAULT_ENUMERATION_BUDGET)
}

/// [`enumerate_maximal_cliques`] with a caller-chosen vertex budget (at most
/// 64, the mask width).
pub fn enumerate_maximal_cliques_with_budget(
    graph: &IdncGraph,
    budget: usize,
) -> Result<Vec<Clique>> {
    if budget > 64 {
        return Err(Error::InvalidArgument("budgets beyond 64 vertices are unsupported".into()));
    }
    let n = graph.vertex_count();
    if n > budget {
        return Err(Error::CliqueBudget { vertices: n, budget });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let masks: Vec<u64> = (0..n)
        .map(|a| (0..n).filter(|&b| graph.adjacent(a, b)).fold(0u64, |m, b| m | 1 << b))
        .collect();
    let mut found = Vec::new();
    bron_kerbosch(&masks, 0, (1u64 << n) - 1, 0, &mut found);
    let mut cliques: Vec<Clique> = found
        .into_iter()
        .map(|mask| {
            let vs = (0..n).filter(|&i| mask & (1 << i) != 0).map(|i| graph.vertex(i)).collect();
            Clique::from_sorted_unchecked(vs)
        })
        .collect();
    cliques.sort_by(|a, b| a.vertices().cmp(b.vertices()));
    Ok(cliques)
}

fn bron_kerbosch(masks: &[u64], r: u64, p: u64, x: u64, out: &mut Vec<u64>) {
    if p == 0 && x == 0 {
        out.push(r);
        return;
    }
    // Pivot on the candidate covering the most of `p`; its neighbours can be
    // skipped at this level.
    let pivot = iter_bits(p | x)
        .max_by_key(|&u| (p & masks[u]).count_ones())
        .expect("p | x is non-empty");
    let mut p = p;
    let mut x = x;
    for v in iter_bits(p & !masks[pivot]).collect::<Vec<_>>() {
        let bit = 1u64 << v;
        bron_kerbosch(masks, r | bit, p & masks[v], x & masks[v], out);
        p &= !bit;
        x |= bit;
    }
}

fn iter_bits(mut mask: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let i = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(i)
        }
    })
}

/// Subgraph of vertices adjacent to every member of `clique`, the candidates
/// that could still extend it.  The empty clique yields the graph itself.
///
/// Panics when `clique` contains vertices foreign to `graph`.
pub fn adjacent_subgraph(graph: &IdncGraph, clique: &Clique) -> IdncGraph {
    let indices: Vec<usize> = clique
        .vertices()
        .iter()
        .map(|&v| graph.index_of(v).expect("clique vertex missing from graph"))
        .collect();
    graph.induced(&graph.common_neighbours(&indices))
}

/// Outcome of one reception: the single packet of the XOR the receiver does
/// not yet hold, or `None` when the combination is useless to it (zero or two
/// and more unknowns).
pub fn decode_attempt<F: Fn(usize) -> bool>(clique: &Clique, has_packet: F) -> Option<usize> {
    let mut unknown = None;
    for p in clique.packets() {
        if !has_packet(p) {
            if unknown.is_some() {
                return None;
            }
            unknown = Some(p);
        }
    }
    unknown
}
