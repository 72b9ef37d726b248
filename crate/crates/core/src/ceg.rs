//! The transporter chain event graph: positions joined by directed,
//! possibly parallel, probability-annotated edges.

use std::collections::{BTreeMap, HashMap};

use crate::error::{CegError, Result};
use crate::tree::{Atom, SUM_TOLERANCE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PositionId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CegEdgeId(pub usize);

pub type CegPath = Atom<CegEdgeId>;

/// Name given to the sink by constructors that generate position names.
pub const SINK_NAME: &str = "w_inf";

#[derive(Clone, Debug, PartialEq)]
pub struct CegEdge {
    pub name: String,
    pub source: PositionId,
    pub target: PositionId,
    pub prob: f64,
    pub label: Option<String>,
}

#[derive(Clone, Debug)]
pub struct TransporterCeg {
    position_names: Vec<String>,
    edges: Vec<CegEdge>,
    root: PositionId,
    sink: PositionId,
    out_edges: Vec<Vec<CegEdgeId>>,
    in_edges: Vec<Vec<CegEdgeId>>,
    /// Longest-path depth from the root.
    level: Vec<usize>,
}

/// Edge order in which no edge lies downstream of a later one, plus a
/// topological order of the non-sink positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeOrdering {
    pub edges: Vec<CegEdgeId>,
    pub positions: Vec<PositionId>,
}

impl TransporterCeg {
    /// Builds and checks a CEG. Edges are attached to their source in the
    /// order given, which fixes the component order of every `π(w)`.
    pub fn new(position_names: Vec<String>, edges: Vec<CegEdge>, root: PositionId, sink: PositionId) -> Result<Self> {
        let n = position_names.len();
        let bad = |msg: String| Err(CegError::MalformedGraph(msg));
        if root.0 >= n || sink.0 >= n {
            return bad("root or sink out of range".into());
        }
        if root == sink {
            return bad("root and sink coincide".into());
        }
        {
            let mut seen = HashMap::new();
            for name in &position_names {
                if seen.insert(name.as_str(), ()).is_some() {
                    return bad(format!("duplicate position id {name:?}"));
                }
            }
            let mut seen = HashMap::new();
            for e in &edges {
                if seen.insert(e.name.as_str(), ()).is_some() {
                    return bad(format!("duplicate edge id {:?}", e.name));
                }
            }
        }
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        for (i, e) in edges.iter().enumerate() {
            if e.source.0 >= n || e.target.0 >= n {
                return bad(format!("edge {} references an unknown position", e.name));
            }
            if !(0.0..=1.0).contains(&e.prob) {
                return bad(format!("edge {} has probability {} outside [0,1]", e.name, e.prob));
            }
            out_edges[e.source.0].push(CegEdgeId(i));
            in_edges[e.target.0].push(CegEdgeId(i));
        }
        let name = |p: usize| position_names[p].as_str();
        if !in_edges[root.0].is_empty() {
            return bad(format!("root {} has incoming edges", name(root.0)));
        }
        if !out_edges[sink.0].is_empty() {
            return bad(format!("sink {} has outgoing edges", name(sink.0)));
        }
        for p in 0..n {
            if p != root.0 && in_edges[p].is_empty() {
                return bad(format!("position {} has no incoming edges", name(p)));
            }
            if p != sink.0 {
                if out_edges[p].is_empty() {
                    return bad(format!("position {} has no outgoing edges", name(p)));
                }
                let sum: f64 = out_edges[p].iter().map(|e| edges[e.0].prob).sum();
                if (sum - 1.0).abs() > SUM_TOLERANCE {
                    return bad(format!("probabilities out of {} sum to {sum}", name(p)));
                }
            }
        }

        // Kahn's algorithm; the longest-path level doubles as the depth
        // leveling used for topological orders.
        let mut indegree: Vec<usize> = in_edges.iter().map(Vec::len).collect();
        let mut level = vec![0usize; n];
        let mut ready = vec![root.0];
        let mut visited = 0;
        while let Some(p) = ready.pop() {
            visited += 1;
            for &e in &out_edges[p] {
                let t = edges[e.0].target.0;
                level[t] = level[t].max(level[p] + 1);
                indegree[t] -= 1;
                if indegree[t] == 0 {
                    ready.push(t);
                }
            }
        }
        if visited != n {
            return bad("graph has a cycle or positions unreachable from the root".into());
        }
        // Acyclic, every non-root position has a parent and every non-sink
        // position a child, so every position lies on a root-to-sink path
        // provided the sink is the only position without children.
        Ok(TransporterCeg { position_names, edges, root, sink, out_edges, in_edges, level })
    }

    pub fn root(&self) -> PositionId {
        self.root
    }

    pub fn sink(&self) -> PositionId {
        self.sink
    }

    pub fn position_count(&self) -> usize {
        self.position_names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn positions(&self) -> impl Iterator<Item = PositionId> {
        (0..self.position_names.len()).map(PositionId)
    }

    /// Non-sink positions `W = W(C) \ {w∞}`.
    pub fn situations(&self) -> impl Iterator<Item = PositionId> + '_ {
        self.positions().filter(move |&p| p != self.sink)
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = CegEdgeId> {
        (0..self.edges.len()).map(CegEdgeId)
    }

    pub fn position_name(&self, p: PositionId) -> &str {
        &self.position_names[p.0]
    }

    pub fn position_names(&self) -> &[String] {
        &self.position_names
    }

    pub fn position_by_name(&self, name: &str) -> Option<PositionId> {
        self.position_names.iter().position(|n| n == name).map(PositionId)
    }

    pub fn edge(&self, e: CegEdgeId) -> &CegEdge {
        &self.edges[e.0]
    }

    pub fn edges(&self) -> &[CegEdge] {
        &self.edges
    }

    pub fn edge_by_name(&self, name: &str) -> Option<CegEdgeId> {
        self.edges.iter().position(|e| e.name == name).map(CegEdgeId)
    }

    /// `E(w)`, ordered by edge id.
    pub fn out_edges(&self, p: PositionId) -> &[CegEdgeId] {
        &self.out_edges[p.0]
    }

    pub fn in_edges(&self, p: PositionId) -> &[CegEdgeId] {
        &self.in_edges[p.0]
    }

    /// `π(w)`: outgoing probabilities in edge-id order.
    pub fn pi(&self, p: PositionId) -> Vec<f64> {
        self.out_edges[p.0].iter().map(|e| self.edges[e.0].prob).collect()
    }

    /// Longest-path distance from the root.
    pub fn level(&self, p: PositionId) -> usize {
        self.level[p.0]
    }

    /// Same graph with every edge probability replaced.
    pub fn with_probabilities(&self, probs: &[f64]) -> Result<TransporterCeg> {
        assert_eq!(probs.len(), self.edges.len());
        let edges = self.edges.iter().zip(probs).map(|(e, &p)| CegEdge { prob: p, ..e.clone() }).collect();
        TransporterCeg::new(self.position_names.clone(), edges, self.root, self.sink)
    }

    /// Positions sorted by (level, id); the root comes first and the sink
    /// last.
    pub fn position_order(&self) -> Vec<PositionId> {
        let mut order: Vec<PositionId> = self.positions().collect();
        order.sort_by_key(|p| (p == &self.sink, self.level[p.0], p.0));
        order
    }

    pub fn topological_edge_order(&self) -> EdgeOrdering {
        let mut edges: Vec<CegEdgeId> = self.edge_ids().collect();
        edges.sort_by_key(|e| (self.level[self.edges[e.0].source.0], e.0));
        let positions = self.position_order().into_iter().filter(|&p| p != self.sink).collect();
        EdgeOrdering { edges, positions }
    }

    /// Checks that `path` starts at the root and chains through the graph.
    /// Returns the position it ends at.
    pub fn walk(&self, path: &CegPath) -> Result<PositionId> {
        let mut at = self.root;
        for &e in &path.edges {
            let edge =
                self.edges.get(e.0).ok_or_else(|| CegError::InvalidPath(format!("unknown edge index {}", e.0)))?;
            if edge.source != at {
                return Err(CegError::InvalidPath(format!(
                    "edge {} does not leave {}",
                    edge.name,
                    self.position_name(at)
                )));
            }
            at = edge.target;
        }
        Ok(at)
    }

    pub fn check_path(&self, path: &CegPath) -> Result<()> {
        let end = self.walk(path)?;
        if end != self.sink {
            return Err(CegError::InvalidPath(format!("path ends at {} instead of the sink", self.position_name(end))));
        }
        Ok(())
    }

    /// Positions visited before each edge of `path` (so excluding the sink).
    pub fn path_positions(&self, path: &CegPath) -> Vec<PositionId> {
        path.edges.iter().map(|e| self.edges[e.0].source).collect()
    }

    pub fn path_probability(&self, path: &CegPath) -> Result<f64> {
        self.check_path(path)?;
        Ok(path.edges.iter().map(|e| self.edges[e.0].prob).product())
    }

    /// Number of root-to-sink paths, saturating at `u128::MAX`.
    pub fn path_count(&self) -> u128 {
        self.path_count_where(|_| true)
    }

    pub(crate) fn path_count_where(&self, keep: impl Fn(CegEdgeId) -> bool) -> u128 {
        let mut count = vec![0u128; self.position_count()];
        count[self.sink.0] = 1;
        for p in self.position_order().into_iter().rev() {
            if p == self.sink {
                continue;
            }
            count[p.0] = self.out_edges[p.0]
                .iter()
                .filter(|&&e| keep(e))
                .fold(0u128, |acc, e| acc.saturating_add(count[self.edges[e.0].target.0]));
        }
        count[self.root.0]
    }

    /// Every root-to-sink path, in lexicographic edge-id order.
    pub fn enumerate_paths(&self) -> Vec<CegPath> {
        self.enumerate_paths_where(|_| true)
    }

    pub(crate) fn enumerate_paths_where(&self, keep: impl Fn(CegEdgeId) -> bool) -> Vec<CegPath> {
        let mut out = Vec::new();
        let mut stack: Vec<(PositionId, usize)> = vec![(self.root, 0)];
        let mut prefix: Vec<CegEdgeId> = Vec::new();
        while let Some((p, next)) = stack.pop() {
            if p == self.sink {
                out.push(Atom::new(prefix.clone()));
                prefix.pop();
                continue;
            }
            let outs = &self.out_edges[p.0];
            match outs[next..].iter().position(|&e| keep(e)) {
                Some(off) => {
                    let e = outs[next + off];
                    stack.push((p, next + off + 1));
                    stack.push((self.edges[e.0].target, 0));
                    prefix.push(e);
                }
                None => {
                    prefix.pop();
                }
            }
        }
        out
    }

    /// `π(Λ(w))` by forward dynamic programming over the edge probabilities.
    pub fn reach_probability(&self, w: PositionId) -> f64 {
        self.reach_probabilities_with(|e| self.edges[e.0].prob)[w.0]
    }

    pub fn reach_probabilities(&self) -> Vec<f64> {
        self.reach_probabilities_with(|e| self.edges[e.0].prob)
    }

    /// Forward DP with arbitrary edge weights.
    pub(crate) fn reach_probabilities_with(&self, weight: impl Fn(CegEdgeId) -> f64) -> Vec<f64> {
        let mut reach = vec![0.0; self.position_count()];
        reach[self.root.0] = 1.0;
        for p in self.position_order() {
            for &e in &self.out_edges[p.0] {
                let t = self.edges[e.0].target.0;
                reach[t] += reach[p.0] * weight(e);
            }
        }
        reach
    }

    /// Structural equality up to position renaming, with edge names,
    /// probabilities and labels compared exactly.
    pub fn is_isomorphic(&self, other: &TransporterCeg) -> bool {
        if self.position_count() != other.position_count() || self.edge_count() != other.edge_count() {
            return false;
        }
        let mut map: BTreeMap<usize, usize> = BTreeMap::new();
        map.insert(self.root.0, other.root.0);
        map.insert(self.sink.0, other.sink.0);
        for e in &self.edges {
            let Some(oe) = other.edge_by_name(&e.name).map(|id| other.edge(id)) else {
                return false;
            };
            if oe.prob.to_bits() != e.prob.to_bits() || oe.label != e.label {
                return false;
            }
            for (a, b) in [(e.source.0, oe.source.0), (e.target.0, oe.target.0)] {
                if *map.entry(a).or_insert(b) != b {
                    return false;
                }
            }
        }
        let mut images: Vec<usize> = map.values().copied().collect();
        images.sort_unstable();
        images.dedup();
        images.len() == map.len()
            && self.positions().all(|p| {
                let q = PositionId(map[&p.0]);
                let names = |g: &TransporterCeg, x: PositionId| {
                    g.out_edges(x).iter().map(|e| g.edge(*e).name.clone()).collect::<Vec<_>>()
                };
                names(self, p) == names(other, q)
            })
    }
}
