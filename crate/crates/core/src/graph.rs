//! Associated digraph of a matrix and the cycle machinery built on it.
//!
//! For a matrix `A`, the digraph has an edge `j -> i` with weight `a_ij`
//! whenever `a_ij != 0` and `i != j`; nonzero diagonal entries are kept as
//! self-loops. Self-loops are never simple cycles.

use serde::ser::{Serialize, SerializeSeq, Serializer};

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;

/// Fixed-capacity bit set of node indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodeSet {
    words: Vec<u64>,
}

impl NodeSet {
    pub fn new(capacity: usize) -> Self {
        Self {
            words: vec![0; capacity.div_ceil(64).max(1)],
        }
    }

    pub fn from_nodes(capacity: usize, nodes: &[usize]) -> Self {
        let mut s = Self::new(capacity);
        for &v in nodes {
            s.insert(v);
        }
        s
    }

    #[inline]
    pub fn insert(&mut self, v: usize) {
        self.words[v / 64] |= 1 << (v % 64);
    }

    #[inline]
    pub fn contains(&self, v: usize) -> bool {
        self.words[v / 64] & (1 << (v % 64)) != 0
    }

    #[inline]
    pub fn is_disjoint(&self, other: &NodeSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    pub fn intersection_len(&self, other: &NodeSet) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    #[inline]
    fn union_with(&mut self, other: &NodeSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    #[inline]
    fn difference_with(&mut self, other: &NodeSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

/// Weighted digraph `G(A)` of a square matrix.
#[derive(Debug, Clone)]
pub struct WeightedDigraph {
    succ: Vec<Vec<(usize, f64)>>,
    pred: Vec<Vec<usize>>,
    self_loops: Vec<Option<f64>>,
}

impl WeightedDigraph {
    pub fn from_matrix(m: &SquareMatrix) -> Self {
        let n = m.dim();
        let mut succ = vec![Vec::new(); n];
        let mut pred = vec![Vec::new(); n];
        let mut self_loops = vec![None; n];
        for i in 0..n {
            for j in 0..n {
                let a = m.get(i, j);
                if a == 0.0 {
                    continue;
                }
                if i == j {
                    self_loops[i] = Some(a);
                } else {
                    succ[j].push((i, a));
                    pred[i].push(j);
                }
            }
        }
        for s in succ.iter_mut() {
            s.sort_by_key(|&(t, _)| t);
        }
        Self {
            succ,
            pred,
            self_loops,
        }
    }

    pub fn node_count(&self) -> usize {
        self.succ.len()
    }

    /// Non-loop edges ordered by source, then target.
    pub fn edges(&self) -> Vec<Edge> {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(s, outs)| {
                outs.iter().map(move |&(t, w)| Edge {
                    source: s,
                    target: t,
                    weight: w,
                })
            })
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    pub fn successors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.succ[v].iter().map(|&(t, _)| t)
    }

    pub fn predecessors(&self, v: usize) -> &[usize] {
        &self.pred[v]
    }

    pub fn weight(&self, source: usize, target: usize) -> Option<f64> {
        self.succ[source]
            .binary_search_by_key(&target, |&(t, _)| t)
            .ok()
            .map(|k| self.succ[source][k].1)
    }

    pub fn self_loop(&self, v: usize) -> Option<f64> {
        self.self_loops[v]
    }

    pub fn has_self_loop(&self, v: usize) -> bool {
        self.self_loops[v].is_some()
    }

    pub fn self_loop_count(&self) -> usize {
        self.self_loops.iter().filter(|w| w.is_some()).count()
    }
}

/// A strongly connected component; nodes sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub nodes: Vec<usize>,
}

impl Component {
    /// A single node carries no simple cycle.
    pub fn is_singleton(&self) -> bool {
        self.nodes.len() == 1
    }
}

/// Tarjan's algorithm (iterative). Components come out in reverse
/// topological order of the condensation: a component is listed before every
/// component that has an edge into it.
pub fn strongly_connected_components(g: &WeightedDigraph) -> Vec<Component> {
    const UNVISITED: usize = usize::MAX;
    let n = g.node_count();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next = 0;
    let mut out = Vec::new();
    // (node, position in its successor list)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(top) = call.last_mut() {
            let v = top.0;
            if let Some(&(w, _)) = g.succ[v].get(top.1) {
                top.1 += 1;
                if index[w] == UNVISITED {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut nodes = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    nodes.push(w);
                    if w == v {
                        break;
                    }
                }
                nodes.sort_unstable();
                out.push(Component { nodes });
            }
        }
    }
    out
}

/// Simple cycle in canonical form: distinct nodes, rotated so the smallest
/// node comes first, closing edge implied.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimpleCycle {
    nodes: Vec<usize>,
}

impl SimpleCycle {
    /// Canonicalises a node sequence. Returns `None` for fewer than two nodes
    /// or repeated nodes.
    pub fn new(mut nodes: Vec<usize>) -> Option<Self> {
        if nodes.len() < 2 {
            return None;
        }
        let mut sorted = nodes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != nodes.len() {
            return None;
        }
        let pos = nodes
            .iter()
            .enumerate()
            .min_by_key(|&(_, v)| *v)
            .map(|(k, _)| k)
            .unwrap_or(0);
        nodes.rotate_left(pos);
        Some(Self { nodes })
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.nodes.contains(&v)
    }

    pub fn max_node(&self) -> usize {
        *self.nodes.iter().max().expect("cycles are nonempty")
    }

    /// Directed edges `(from, to)` around the cycle, closing edge last.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let k = self.nodes.len();
        (0..k).map(move |p| (self.nodes[p], self.nodes[(p + 1) % k]))
    }

    /// The node preceding `v` on the cycle.
    pub fn predecessor(&self, v: usize) -> Option<usize> {
        let k = self.nodes.len();
        self.nodes
            .iter()
            .position(|&u| u == v)
            .map(|p| self.nodes[(p + k - 1) % k])
    }

    /// Product of edge weights around the cycle.
    pub fn weight(&self, g: &WeightedDigraph) -> f64 {
        self.edges()
            .map(|(s, t)| g.weight(s, t).unwrap_or(0.0))
            .product()
    }

    pub fn node_set(&self, capacity: usize) -> NodeSet {
        NodeSet::from_nodes(capacity, &self.nodes)
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.nodes.iter().map(|v| v + 1).collect()
    }
}

impl Serialize for SimpleCycle {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.nodes.len()))?;
        for v in &self.nodes {
            seq.serialize_element(&(v + 1))?;
        }
        seq.end()
    }
}

struct Johnson<'a> {
    g: &'a WeightedDigraph,
    start: usize,
    allowed: Vec<bool>,
    blocked: Vec<bool>,
    b_sets: Vec<Vec<usize>>,
    stack: Vec<usize>,
    out: Vec<SimpleCycle>,
    cap: usize,
}

impl Johnson<'_> {
    fn circuit(&mut self, v: usize) -> Result<bool> {
        let mut found = false;
        self.stack.push(v);
        self.blocked[v] = true;
        for k in 0..self.g.succ[v].len() {
            let w = self.g.succ[v][k].0;
            if !self.allowed[w] {
                continue;
            }
            if w == self.start {
                if self.out.len() >= self.cap {
                    return Err(Error::TooManyCycles { cap: self.cap });
                }
                self.out.push(SimpleCycle {
                    nodes: self.stack.clone(),
                });
                found = true;
            } else if !self.blocked[w] && self.circuit(w)? {
                found = true;
            }
        }
        if found {
            self.unblock(v);
        } else {
            for k in 0..self.g.succ[v].len() {
                let w = self.g.succ[v][k].0;
                if self.allowed[w] && !self.b_sets[w].contains(&v) {
                    self.b_sets[w].push(v);
                }
            }
        }
        self.stack.pop();
        Ok(found)
    }

    fn unblock(&mut self, u: usize) {
        self.blocked[u] = false;
        while let Some(w) = self.b_sets[u].pop() {
            if self.blocked[w] {
                self.unblock(w);
            }
        }
    }
}

fn restricted_reach(g: &WeightedDigraph, start: usize, forward: bool) -> Vec<bool> {
    let n = g.node_count();
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(u) = stack.pop() {
        let next: Vec<usize> = if forward {
            g.successors(u).collect()
        } else {
            g.predecessors(u).to_vec()
        };
        for w in next {
            if w >= start && !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen
}

/// All simple cycles of length at least two, via Johnson's algorithm with
/// blocked sets. Output is canonical and sorted lexicographically.
///
/// Fails with [`Error::TooManyCycles`] rather than truncating.
pub fn enumerate_simple_cycles(g: &WeightedDigraph, cap: usize) -> Result<Vec<SimpleCycle>> {
    let n = g.node_count();
    let mut j = Johnson {
        g,
        start: 0,
        allowed: vec![false; n],
        blocked: vec![false; n],
        b_sets: vec![Vec::new(); n],
        stack: Vec::new(),
        out: Vec::new(),
        cap,
    };
    for s in 0..n {
        // strongly connected component of `s` inside the subgraph on nodes >= s
        let fwd = restricted_reach(g, s, true);
        let bwd = restricted_reach(g, s, false);
        let mut size = 0;
        for v in 0..n {
            j.allowed[v] = fwd[v] && bwd[v];
            size += j.allowed[v] as usize;
            j.blocked[v] = false;
            j.b_sets[v].clear();
        }
        if size < 2 {
            continue;
        }
        j.start = s;
        j.circuit(s)?;
    }
    let mut out = j.out;
    out.sort();
    Ok(out)
}

/// Undirected, unweighted graph on cycle indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleGraph {
    pub vertex_count: usize,
    /// Pairs `(a, b)` with `a < b`, sorted.
    pub edges: Vec<(usize, usize)>,
}

impl CycleGraph {
    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let key = if a < b { (a, b) } else { (b, a) };
        self.edges.binary_search(&key).is_ok()
    }

    pub fn is_connected(&self) -> bool {
        if self.vertex_count == 0 {
            return true;
        }
        let mut adj = vec![Vec::new(); self.vertex_count];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; self.vertex_count];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &w in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

fn node_sets(cycles: &[SimpleCycle]) -> (usize, Vec<NodeSet>) {
    let capacity = cycles.iter().map(|c| c.max_node() + 1).max().unwrap_or(1);
    let sets = cycles.iter().map(|c| c.node_set(capacity)).collect();
    (capacity, sets)
}

/// Cycle graph (edge when two cycles share a node) and its complement.
pub fn build_cycle_graphs(cycles: &[SimpleCycle]) -> (CycleGraph, CycleGraph) {
    let (_, sets) = node_sets(cycles);
    let r = cycles.len();
    let mut meet = Vec::new();
    let mut apart = Vec::new();
    for a in 0..r {
        for b in a + 1..r {
            if sets[a].is_disjoint(&sets[b]) {
                apart.push((a, b));
            } else {
                meet.push((a, b));
            }
        }
    }
    (
        CycleGraph {
            vertex_count: r,
            edges: meet,
        },
        CycleGraph {
            vertex_count: r,
            edges: apart,
        },
    )
}

/// Families of pairwise node-disjoint cycles grouped by size:
/// `by_size[l - 1]` holds every `l`-element family, for `l = 1..=r`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisjointCycleSets {
    by_size: Vec<Vec<Vec<usize>>>,
}

impl DisjointCycleSets {
    /// `K_l`; empty for `l = 0` or `l > r`.
    pub fn of_size(&self, l: usize) -> &[Vec<usize>] {
        if l == 0 {
            return &[];
        }
        self.by_size.get(l - 1).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Number of cycles `r` the families were drawn from.
    pub fn cycle_count(&self) -> usize {
        self.by_size.len()
    }

    pub fn family_count(&self) -> usize {
        self.by_size.iter().map(Vec::len).sum()
    }

    /// `(l, K_l)` for `l = 1..=r`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &[Vec<usize>])> {
        self.by_size
            .iter()
            .enumerate()
            .map(|(k, f)| (k + 1, f.as_slice()))
    }
}

/// Visits every family of pairwise node-disjoint cycles exactly once, with
/// cycle indices in increasing order, together with the union of its nodes.
///
/// Families are built by deciding nodes in increasing order: the next cycle
/// added must have its smallest node above the previous cycle's. Since the
/// input is canonical and sorted, that is also increasing index order.
/// The empty family is visited first when `include_empty` is set and does
/// not count against `cap`.
pub fn for_each_disjoint_family<F>(cycles: &[SimpleCycle], cap: usize, include_empty: bool, mut visit: F) -> Result<()>
where
    F: FnMut(&[usize], &NodeSet),
{
    let (capacity, sets) = node_sets(cycles);
    let mut by_min: Vec<Vec<usize>> = vec![Vec::new(); capacity];
    for (idx, c) in cycles.iter().enumerate() {
        by_min[c.nodes[0]].push(idx);
    }
    let mut covered = NodeSet::new(capacity);
    let mut family = Vec::new();
    if include_empty {
        visit(&family, &covered);
    }
    let mut count = 0usize;

    struct Walk<'a, F> {
        by_min: &'a [Vec<usize>],
        sets: &'a [NodeSet],
        cap: usize,
        count: &'a mut usize,
        visit: &'a mut F,
    }

    impl<F: FnMut(&[usize], &NodeSet)> Walk<'_, F> {
        fn extend(&mut self, from: usize, covered: &mut NodeSet, family: &mut Vec<usize>) -> Result<()> {
            for v in from..self.by_min.len() {
                if covered.contains(v) {
                    continue;
                }
                for &idx in &self.by_min[v] {
                    let set = &self.sets[idx];
                    if !set.is_disjoint(covered) {
                        continue;
                    }
                    *self.count += 1;
                    if *self.count > self.cap {
                        return Err(Error::CombinatorialBlowup { cap: self.cap });
                    }
                    family.push(idx);
                    covered.union_with(set);
                    (self.visit)(family, covered);
                    self.extend(v + 1, covered, family)?;
                    covered.difference_with(set);
                    family.pop();
                }
            }
            Ok(())
        }
    }

    Walk {
        by_min: &by_min,
        sets: &sets,
        cap,
        count: &mut count,
        visit: &mut visit,
    }
    .extend(0, &mut covered, &mut family)
}

/// Exact enumeration of all disjoint cycle families, grouped by size.
pub fn disjoint_cycle_sets(cycles: &[SimpleCycle], cap: usize) -> Result<DisjointCycleSets> {
    let mut by_size = vec![Vec::new(); cycles.len()];
    for_each_disjoint_family(cycles, cap, false, |family, _| {
        by_size[family.len() - 1].push(family.to_vec());
    })?;
    for k in by_size.iter_mut() {
        k.sort();
    }
    Ok(DisjointCycleSets { by_size })
}

/// First pair of cycles sharing two or more nodes, if any.
pub fn cactus_violation(cycles: &[SimpleCycle]) -> Option<(usize, usize)> {
    let (_, sets) = node_sets(cycles);
    for a in 0..cycles.len() {
        for b in a + 1..cycles.len() {
            if sets[a].intersection_len(&sets[b]) > 1 {
                return Some((a, b));
            }
        }
    }
    None
}

/// True when every two simple cycles share at most one node.
pub fn is_cactus(cycles: &[SimpleCycle]) -> bool {
    cactus_violation(cycles).is_none()
}
