//! Probability trees: the elicited model.
//!
//! A tree is stored as flat vertex and edge tables. Vertices and edges keep
//! the user-facing names they were created with; the integer ids are their
//! insertion indices and are never serialized.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use crate::error::{CegError, Result};

/// Absolute tolerance for the sum-to-one check on outgoing probabilities.
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TreeEdgeId(pub usize);

#[derive(Clone, Debug, PartialEq)]
pub struct TreeEdge {
    pub name: String,
    pub source: VertexId,
    pub target: VertexId,
    pub prob: f64,
    pub label: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexKind {
    Root,
    Situation,
    Leaf,
}

/// An ordered edge sequence starting at the root. On a tree it ends at a
/// leaf; on a CEG it ends at the sink (or, for subpaths, anywhere).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom<E> {
    pub edges: Vec<E>,
}

impl<E> Atom<E> {
    pub fn new(edges: Vec<E>) -> Self {
        Atom { edges }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

pub type TreeAtom = Atom<TreeEdgeId>;

#[derive(Clone, Debug)]
pub struct ProbabilityTree {
    vertex_names: Vec<String>,
    edges: Vec<TreeEdge>,
    out_edges: Vec<Vec<TreeEdgeId>>,
    in_edges: Vec<Vec<TreeEdgeId>>,
}

/// Incremental constructor. Only dangling references and duplicate names are
/// rejected here; everything else is checked by [`ProbabilityTree::validate`].
#[derive(Default, Debug)]
pub struct TreeBuilder {
    vertex_names: Vec<String>,
    vertex_index: HashMap<String, VertexId>,
    edges: Vec<TreeEdge>,
    edge_names: HashMap<String, TreeEdgeId>,
}

impl TreeBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertex(&mut self, name: impl Into<String>) -> Result<VertexId> {
        let name = name.into();
        if self.vertex_index.contains_key(&name) {
            return Err(CegError::Format(format!("duplicate vertex id {name:?}")));
        }
        let id = VertexId(self.vertex_names.len());
        self.vertex_index.insert(name.clone(), id);
        self.vertex_names.push(name);
        Ok(id)
    }

    pub fn vertex_id(&self, name: &str) -> Option<VertexId> {
        self.vertex_index.get(name).copied()
    }

    pub fn edge(
        &mut self,
        name: impl Into<String>,
        source: VertexId,
        target: VertexId,
        prob: f64,
        label: Option<String>,
    ) -> Result<TreeEdgeId> {
        let name = name.into();
        let n = self.vertex_names.len();
        if source.0 >= n || target.0 >= n {
            return Err(CegError::Format(format!("edge {name:?} references an unknown vertex")));
        }
        if self.edge_names.contains_key(&name) {
            return Err(CegError::Format(format!("duplicate edge id {name:?}")));
        }
        let id = TreeEdgeId(self.edges.len());
        self.edge_names.insert(name.clone(), id);
        self.edges.push(TreeEdge { name, source, target, prob, label });
        Ok(id)
    }

    pub fn build(self) -> ProbabilityTree {
        let n = self.vertex_names.len();
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        for (i, e) in self.edges.iter().enumerate() {
            out_edges[e.source.0].push(TreeEdgeId(i));
            in_edges[e.target.0].push(TreeEdgeId(i));
        }
        ProbabilityTree { vertex_names: self.vertex_names, edges: self.edges, out_edges, in_edges }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ViolationKind {
    Empty,
    NoRoot,
    MultipleRoots,
    MultipleParents,
    Unreachable,
    SelfLoop,
    ProbabilityOutOfRange { prob: f64 },
    SumNotOne { sum: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Vertex or edge name the violation is attached to.
    pub at: Option<String>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = self.at.as_deref().unwrap_or("?");
        match &self.kind {
            ViolationKind::Empty => write!(f, "tree has no vertices"),
            ViolationKind::NoRoot => write!(f, "no root: every vertex has a parent"),
            ViolationKind::MultipleRoots => write!(f, "vertex {at} is a second root"),
            ViolationKind::MultipleParents => write!(f, "vertex {at} has more than one incoming edge"),
            ViolationKind::Unreachable => write!(f, "vertex {at} is unreachable from the root"),
            ViolationKind::SelfLoop => write!(f, "edge {at} is a self-loop"),
            ViolationKind::ProbabilityOutOfRange { prob } => {
                write!(f, "edge {at} has probability {prob} outside [0,1]")
            }
            ViolationKind::SumNotOne { sum } => {
                write!(f, "out-probabilities sum to {sum} (not 1) at vertex {at}")
            }
        }
    }
}

/// Every violated tree invariant. Empty iff the tree is valid.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Dense transition matrix over `V(T)`. Row and column `i` both refer to
/// `order[i]`, a breadth-first numbering of the vertices, so the matrix is
/// strictly upper triangular.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    pub order: Vec<VertexId>,
    data: Vec<f64>,
}

impl TransitionMatrix {
    pub fn size(&self) -> usize {
        self.order.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.size() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let n = self.size();
        &self.data[row * n..(row + 1) * n]
    }

    pub fn row_sum(&self, row: usize) -> f64 {
        self.row(row).iter().sum()
    }

    /// Index of `v` in [`Self::order`].
    pub fn index_of(&self, v: VertexId) -> Option<usize> {
        self.order.iter().position(|&x| x == v)
    }
}

impl ProbabilityTree {
    pub fn vertex_count(&self) -> usize {
        self.vertex_names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> {
        (0..self.vertex_names.len()).map(VertexId)
    }

    pub fn vertex_name(&self, v: VertexId) -> &str {
        &self.vertex_names[v.0]
    }

    pub fn vertex_by_name(&self, name: &str) -> Option<VertexId> {
        self.vertex_names.iter().position(|n| n == name).map(VertexId)
    }

    pub fn edge(&self, e: TreeEdgeId) -> &TreeEdge {
        &self.edges[e.0]
    }

    pub fn edges(&self) -> &[TreeEdge] {
        &self.edges
    }

    pub fn edge_by_name(&self, name: &str) -> Option<TreeEdgeId> {
        self.edges.iter().position(|e| e.name == name).map(TreeEdgeId)
    }

    /// Outgoing edges of `v`, in insertion order.
    pub fn children(&self, v: VertexId) -> &[TreeEdgeId] {
        &self.out_edges[v.0]
    }

    pub fn parent_edge(&self, v: VertexId) -> Option<TreeEdgeId> {
        self.in_edges[v.0].first().copied()
    }

    pub fn is_leaf(&self, v: VertexId) -> bool {
        self.out_edges[v.0].is_empty()
    }

    /// The unique vertex without incoming edges, if there is exactly one.
    pub fn root(&self) -> Option<VertexId> {
        let mut roots = self.vertices().filter(|v| self.in_edges[v.0].is_empty());
        match (roots.next(), roots.next()) {
            (Some(r), None) => Some(r),
            _ => None,
        }
    }

    pub fn kind(&self, v: VertexId) -> VertexKind {
        if self.in_edges[v.0].is_empty() {
            VertexKind::Root
        } else if self.is_leaf(v) {
            VertexKind::Leaf
        } else {
            VertexKind::Situation
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.vertices().filter(|&v| self.is_leaf(v))
    }

    /// Situations `S(T)`: all non-leaf vertices, the root included.
    pub fn situations(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.vertices().filter(|&v| !self.is_leaf(v))
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let mut push = |kind, at: Option<&str>| {
            violations.push(Violation { kind, at: at.map(str::to_owned) });
        };
        if self.vertex_names.is_empty() {
            push(ViolationKind::Empty, None);
            return ValidationReport { violations };
        }

        for e in &self.edges {
            if e.source == e.target {
                push(ViolationKind::SelfLoop, Some(&e.name));
            }
            if !(0.0..=1.0).contains(&e.prob) {
                push(ViolationKind::ProbabilityOutOfRange { prob: e.prob }, Some(&e.name));
            }
        }

        let roots: Vec<VertexId> = self.vertices().filter(|v| self.in_edges[v.0].is_empty()).collect();
        match roots.as_slice() {
            [] => push(ViolationKind::NoRoot, None),
            [_] => {}
            [_, rest @ ..] => {
                for r in rest {
                    push(ViolationKind::MultipleRoots, Some(&self.vertex_names[r.0]));
                }
            }
        }
        for v in self.vertices() {
            if self.in_edges[v.0].len() > 1 {
                push(ViolationKind::MultipleParents, Some(&self.vertex_names[v.0]));
            }
        }

        if let Some(&root) = roots.first() {
            let mut seen = vec![false; self.vertex_count()];
            let mut queue = VecDeque::from([root]);
            seen[root.0] = true;
            while let Some(v) = queue.pop_front() {
                for &e in &self.out_edges[v.0] {
                    let t = self.edges[e.0].target;
                    if !seen[t.0] {
                        seen[t.0] = true;
                        queue.push_back(t);
                    }
                }
            }
            for v in self.vertices() {
                if !seen[v.0] && self.in_edges[v.0].len() == 1 {
                    push(ViolationKind::Unreachable, Some(&self.vertex_names[v.0]));
                }
            }
        }

        for v in self.situations() {
            let sum: f64 = self.out_edges[v.0].iter().map(|e| self.edges[e.0].prob).sum();
            if sum.is_nan() || (sum - 1.0).abs() > SUM_TOLERANCE {
                push(ViolationKind::SumNotOne { sum }, Some(&self.vertex_names[v.0]));
            }
        }

        ValidationReport { violations }
    }

    pub fn ensure_valid(&self) -> Result<VertexId> {
        let report = self.validate();
        if report.is_valid() {
            Ok(self.root().expect("valid tree has a root"))
        } else {
            Err(CegError::InvalidTree(report))
        }
    }

    /// All root-to-leaf paths, ordered lexicographically by edge insertion
    /// order. Requires a valid tree.
    pub fn enumerate_atoms(&self) -> Result<Vec<TreeAtom>> {
        let root = self.ensure_valid()?;
        let mut atoms = Vec::new();
        let mut stack = Vec::new();
        self.collect_atoms(root, &mut stack, &mut atoms);
        Ok(atoms)
    }

    fn collect_atoms(&self, v: VertexId, prefix: &mut Vec<TreeEdgeId>, out: &mut Vec<TreeAtom>) {
        let children = &self.out_edges[v.0];
        if children.is_empty() {
            out.push(Atom::new(prefix.clone()));
            return;
        }
        for &e in children {
            prefix.push(e);
            self.collect_atoms(self.edges[e.0].target, prefix, out);
            prefix.pop();
        }
    }

    /// Checks that `atom` is a root-to-leaf path of this tree.
    pub fn check_atom(&self, atom: &TreeAtom) -> Result<()> {
        let root = self.root().ok_or_else(|| CegError::InvalidPath("tree has no root".into()))?;
        let mut at = root;
        for &e in &atom.edges {
            let edge =
                self.edges.get(e.0).ok_or_else(|| CegError::InvalidPath(format!("unknown edge index {}", e.0)))?;
            if edge.source != at {
                return Err(CegError::InvalidPath(format!(
                    "edge {} does not leave vertex {}",
                    edge.name, self.vertex_names[at.0]
                )));
            }
            at = edge.target;
        }
        if !self.is_leaf(at) {
            return Err(CegError::InvalidPath(format!("path ends at situation {}", self.vertex_names[at.0])));
        }
        Ok(())
    }

    pub fn atom_probability(&self, atom: &TreeAtom) -> Result<f64> {
        self.check_atom(atom)?;
        Ok(atom.edges.iter().map(|e| self.edges[e.0].prob).product())
    }

    /// Vertices in breadth-first order from the root, children in insertion
    /// order.
    pub fn bfs_order(&self) -> Result<Vec<VertexId>> {
        let root = self.ensure_valid()?;
        let mut order = Vec::with_capacity(self.vertex_count());
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            queue.extend(self.out_edges[v.0].iter().map(|e| self.edges[e.0].target));
        }
        Ok(order)
    }

    /// Vertices ordered leaves-first: every vertex appears after all of its
    /// descendants.
    pub fn bottom_up_order(&self) -> Result<Vec<VertexId>> {
        let mut order = self.bfs_order()?;
        order.reverse();
        Ok(order)
    }

    pub fn to_transition_matrix(&self) -> Result<TransitionMatrix> {
        let order = self.bfs_order()?;
        let n = order.len();
        let mut index = vec![0usize; n];
        for (i, v) in order.iter().enumerate() {
            index[v.0] = i;
        }
        let mut data = vec![0.0; n * n];
        for e in &self.edges {
            data[index[e.source.0] * n + index[e.target.0]] = e.prob;
        }
        Ok(TransitionMatrix { order, data })
    }
}
