//! Position partition of a probability tree and construction of the
//! transporter CEG.
//!
//! Two situations share a position when their rooted subtrees are identical
//! in topology and edge probabilities under some child mapping. Canonical
//! forms are computed bottom-up: a vertex's form is the sorted multiset of
//! `(child form, probability key, label)` triples, interned to a class id.
//! Interning goes through a `HashMap` keyed by the full triple list, so hash
//! equality is always confirmed by structural key equality.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::ceg::{CegEdge, CegEdgeId, PositionId, TransporterCeg, SINK_NAME};
use crate::error::Result;
use crate::tree::{ProbabilityTree, TreeEdgeId, VertexId};

/// Controls when two edges count as "the same" for merging purposes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PositionOptions {
    /// Absolute grid size used to compare probabilities. `0.0` means exact
    /// bit equality. A positive value compares `round(p / tolerance)`, which
    /// coarsens equality to grid cells.
    pub prob_tolerance: f64,
    /// Whether edge labels must match as well as probabilities.
    pub match_labels: bool,
}

impl Default for PositionOptions {
    fn default() -> Self {
        PositionOptions { prob_tolerance: 0.0, match_labels: true }
    }
}

impl PositionOptions {
    pub fn probabilities_only() -> Self {
        PositionOptions { match_labels: false, ..Self::default() }
    }

    pub(crate) fn prob_key(&self, p: f64) -> i64 {
        if self.prob_tolerance > 0.0 {
            (p / self.prob_tolerance).round() as i64
        } else {
            // -0.0 and 0.0 compare equal
            (if p == 0.0 { 0.0f64 } else { p }).to_bits() as i64
        }
    }

    fn label_key(&self, label: &Option<String>) -> Option<String> {
        if self.match_labels {
            label.clone()
        } else {
            None
        }
    }
}

/// One `(child form, probability, label)` entry of a canonical form.
pub type FormEntry = (usize, i64, Option<String>);

/// Canonical encoding of a vertex's rooted subtree.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CanonicalForm {
    /// Interned class id; equal ids iff equal keys.
    pub class: usize,
    /// Sorted child entries. Empty for leaves.
    pub key: Vec<FormEntry>,
}

/// Canonical forms for every vertex of a valid tree. All leaves get class 0.
pub fn canonical_forms(tree: &ProbabilityTree, opts: &PositionOptions) -> Result<Vec<CanonicalForm>> {
    let order = tree.bottom_up_order()?;
    let mut interner: HashMap<Vec<FormEntry>, usize> = HashMap::new();
    interner.insert(Vec::new(), 0);
    let mut classes = vec![usize::MAX; tree.vertex_count()];
    let mut keys: Vec<Vec<FormEntry>> = vec![Vec::new(); tree.vertex_count()];
    for v in order {
        let key = edge_keys(tree, v, opts, &classes);
        let next = interner.len();
        classes[v.0] = *interner.entry(key.clone()).or_insert(next);
        keys[v.0] = key;
    }
    Ok(classes.into_iter().zip(keys).map(|(class, key)| CanonicalForm { class, key }).collect())
}

fn edge_key(tree: &ProbabilityTree, e: TreeEdgeId, opts: &PositionOptions, classes: &[usize]) -> FormEntry {
    let edge = tree.edge(e);
    let child = classes[edge.target.0];
    debug_assert_ne!(child, usize::MAX, "children before parents");
    (child, opts.prob_key(edge.prob), opts.label_key(&edge.label))
}

fn edge_keys(tree: &ProbabilityTree, v: VertexId, opts: &PositionOptions, classes: &[usize]) -> Vec<FormEntry> {
    let mut key: Vec<FormEntry> = tree.children(v).iter().map(|&e| edge_key(tree, e, opts, classes)).collect();
    key.sort();
    key
}

/// Partition of `S(T)` into positions. Leaves all map to the sink.
#[derive(Clone, Debug, PartialEq)]
pub struct PositionPartition {
    /// Blocks of situations, each sorted by vertex id, listed in the order
    /// their representatives are met by a breadth-first walk from the root.
    pub blocks: Vec<Vec<VertexId>>,
    /// Every leaf of the tree.
    pub leaves: Vec<VertexId>,
    /// `block_of[v]` is the block index of situation `v`, `None` for leaves.
    pub block_of: Vec<Option<usize>>,
}

impl PositionPartition {
    /// Lowest vertex id in the block.
    pub fn representative(&self, block: usize) -> VertexId {
        self.blocks[block][0]
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

pub fn compute_positions(tree: &ProbabilityTree) -> Result<PositionPartition> {
    compute_positions_with(tree, &PositionOptions::default())
}

pub fn compute_positions_with(tree: &ProbabilityTree, opts: &PositionOptions) -> Result<PositionPartition> {
    let forms = canonical_forms(tree, opts)?;
    let mut members: HashMap<usize, Vec<VertexId>> = HashMap::new();
    for v in tree.situations() {
        members.entry(forms[v.0].class).or_default().push(v);
    }
    for list in members.values_mut() {
        list.sort();
    }

    // Number blocks breadth-first over representatives so the root block is
    // block 0 and names follow the shape of the tree.
    let root = tree.ensure_valid()?;
    let mut block_of_class: HashMap<usize, usize> = HashMap::new();
    let mut blocks = Vec::new();
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        let class = forms[v.0].class;
        if block_of_class.contains_key(&class) {
            continue;
        }
        let list = members.remove(&class).expect("situation class");
        block_of_class.insert(class, blocks.len());
        let rep = list[0];
        blocks.push(list);
        for &e in tree.children(rep) {
            let t = tree.edge(e).target;
            if !tree.is_leaf(t) {
                queue.push_back(t);
            }
        }
    }
    debug_assert!(members.is_empty());

    let mut block_of = vec![None; tree.vertex_count()];
    for (i, b) in blocks.iter().enumerate() {
        for v in b {
            block_of[v.0] = Some(i);
        }
    }
    Ok(PositionPartition { blocks, leaves: tree.leaves().collect(), block_of })
}

/// Correspondence between a tree and the CEG built from it.
#[derive(Clone, Debug)]
pub struct TreeCegMap {
    /// Position of each vertex; leaves map to the sink.
    pub vertex_position: Vec<PositionId>,
    /// CEG edge each tree edge is carried onto by the subtree isomorphism.
    pub edge_map: Vec<CegEdgeId>,
}

impl TreeCegMap {
    pub fn map_atom(&self, atom: &crate::tree::TreeAtom) -> crate::ceg::CegPath {
        crate::tree::Atom::new(atom.edges.iter().map(|e| self.edge_map[e.0]).collect())
    }
}

pub fn build_transporter_ceg(tree: &ProbabilityTree) -> Result<TransporterCeg> {
    Ok(build_transporter_ceg_with(tree, &PositionOptions::default())?.0)
}

/// Builds `C(T)` and the vertex/edge correspondence. Position `i` is block
/// `i` of the partition, named `w{i}`; the sink is last. Edges are emitted
/// position by position, in the representative's child order, and inherit
/// the representative's edge names.
pub fn build_transporter_ceg_with(
    tree: &ProbabilityTree,
    opts: &PositionOptions,
) -> Result<(TransporterCeg, TreeCegMap)> {
    let classes: Vec<usize> = canonical_forms(tree, opts)?.into_iter().map(|f| f.class).collect();
    let partition = compute_positions_with(tree, opts)?;
    let sink = PositionId(partition.len());
    let position_of = |v: VertexId| partition.block_of[v.0].map(PositionId).unwrap_or(sink);

    let mut names: Vec<String> = (0..partition.len()).map(|i| format!("w{i}")).collect();
    names.push(SINK_NAME.to_owned());

    let mut edges = Vec::with_capacity(tree.edge_count());
    let mut edge_map = vec![CegEdgeId(usize::MAX); tree.edge_count()];
    for (block, members) in partition.blocks.iter().enumerate() {
        let rep = members[0];
        let first = edges.len();
        for &e in tree.children(rep) {
            let te = tree.edge(e);
            edges.push(CegEdge {
                name: te.name.clone(),
                source: PositionId(block),
                target: position_of(te.target),
                prob: te.prob,
                label: te.label.clone(),
            });
        }
        // Pair each member's edges with the representative's by sorted key;
        // equal keys are interchangeable under the subtree isomorphism.
        let mut rep_edges: Vec<(FormEntry, CegEdgeId)> = tree
            .children(rep)
            .iter()
            .enumerate()
            .map(|(k, &e)| (edge_key(tree, e, opts, &classes), CegEdgeId(first + k)))
            .collect();
        rep_edges.sort();
        for &v in members {
            let mut mine: Vec<(FormEntry, TreeEdgeId)> =
                tree.children(v).iter().map(|&e| (edge_key(tree, e, opts, &classes), e)).collect();
            mine.sort();
            for ((_, te), (_, ce)) in mine.iter().zip(&rep_edges) {
                edge_map[te.0] = *ce;
            }
        }
    }
    let vertex_position = tree.vertices().map(position_of).collect();
    let ceg = TransporterCeg::new(names, edges, PositionId(0), sink)?;
    Ok((ceg, TreeCegMap { vertex_position, edge_map }))
}

/// Merges non-sink positions whose outgoing `(target, probability, label)`
/// multisets coincide, repeating until nothing changes. The surviving
/// position of each group is the one with the lowest id; its name and edges
/// are kept.
pub fn minimize_ceg(ceg: &TransporterCeg) -> Result<TransporterCeg> {
    minimize_ceg_with(ceg, &PositionOptions::default())
}

pub fn minimize_ceg_with(ceg: &TransporterCeg, opts: &PositionOptions) -> Result<TransporterCeg> {
    let n = ceg.position_count();
    // alias[p] = surviving position for p
    let mut alias: Vec<usize> = (0..n).collect();
    let mut alive = vec![true; n];
    loop {
        let mut groups: BTreeMap<Vec<FormEntry>, Vec<usize>> = BTreeMap::new();
        for p in ceg.situations() {
            if !alive[p.0] {
                continue;
            }
            let mut key: Vec<FormEntry> = ceg
                .out_edges(p)
                .iter()
                .map(|&e| {
                    let edge = ceg.edge(e);
                    (alias[edge.target.0], opts.prob_key(edge.prob), opts.label_key(&edge.label))
                })
                .collect();
            key.sort();
            groups.entry(key).or_default().push(p.0);
        }
        let mut changed = false;
        for members in groups.values() {
            let keep = members[0];
            for &m in &members[1..] {
                alive[m] = false;
                alias[m] = keep;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        // Chase chains so every alias points at a live position.
        for p in 0..n {
            let mut q = alias[p];
            while alias[q] != q {
                q = alias[q];
            }
            alias[p] = q;
        }
    }

    let mut renumber = vec![usize::MAX; n];
    let mut names = Vec::new();
    for p in 0..n {
        if alive[p] {
            renumber[p] = names.len();
            names.push(ceg.position_name(PositionId(p)).to_owned());
        }
    }
    let edges = ceg
        .edges()
        .iter()
        .filter(|e| alive[e.source.0])
        .map(|e| CegEdge {
            source: PositionId(renumber[e.source.0]),
            target: PositionId(renumber[alias[e.target.0]]),
            ..e.clone()
        })
        .collect();
    TransporterCeg::new(names, edges, PositionId(renumber[ceg.root().0]), PositionId(renumber[ceg.sink().0]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::TreeBuilder;

    /// root -> a, b; a and b each have two leaves with (p, 1-p).
    fn twin_tree(pa: f64, pb: f64) -> ProbabilityTree {
        let mut t = TreeBuilder::new();
        let r = t.vertex("r").unwrap();
        let a = t.vertex("a").unwrap();
        let b = t.vertex("b").unwrap();
        t.edge("ra", r, a, 0.5, None).unwrap();
        t.edge("rb", r, b, 0.5, None).unwrap();
        for (v, p, tag) in [(a, pa, "a"), (b, pb, "b")] {
            let l1 = t.vertex(format!("{tag}1")).unwrap();
            let l2 = t.vertex(format!("{tag}2")).unwrap();
            t.edge(format!("{tag}x"), v, l1, p, None).unwrap();
            t.edge(format!("{tag}y"), v, l2, 1.0 - p, None).unwrap();
        }
        t.build()
    }

    #[test]
    fn copies_share_a_block() {
        let p = compute_positions(&twin_tree(0.3, 0.3)).unwrap();
        assert_eq!(p.blocks, vec![vec![VertexId(0)], vec![VertexId(1), VertexId(2)]]);
        assert_eq!(p.leaves.len(), 4);
    }

    #[test]
    fn child_order_does_not_matter() {
        let p = compute_positions(&twin_tree(0.25, 0.75)).unwrap();
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn distinct_subtrees_stay_apart() {
        let p = compute_positions(&twin_tree(0.3, 0.4)).unwrap();
        assert_eq!(p.len(), 3);
        assert!(p.blocks.iter().all(|b| b.len() == 1));
    }

    #[test]
    fn tolerance_coarsens_merging() {
        let t = twin_tree(0.3, 0.3 + 1e-12);
        assert_eq!(compute_positions(&t).unwrap().len(), 3);
        let opts = PositionOptions { prob_tolerance: 1e-6, ..Default::default() };
        assert_eq!(compute_positions_with(&t, &opts).unwrap().len(), 2);
    }

    #[test]
    fn labels_block_merging_unless_disabled() {
        let mut t = twin_tree(0.3, 0.3);
        // rebuild with a label on one copy
        let mut b = TreeBuilder::new();
        for v in t.vertices() {
            b.vertex(t.vertex_name(v)).unwrap();
        }
        for e in t.edges() {
            let label = (e.name == "bx").then(|| "other".to_string());
            b.edge(e.name.clone(), e.source, e.target, e.prob, label).unwrap();
        }
        t = b.build();
        assert_eq!(compute_positions(&t).unwrap().len(), 3);
        assert_eq!(compute_positions_with(&t, &PositionOptions::probabilities_only()).unwrap().len(), 2);
    }

    #[test]
    fn single_edge_tree_gives_two_vertex_ceg() {
        let mut b = TreeBuilder::new();
        let r = b.vertex("r").unwrap();
        let l = b.vertex("l").unwrap();
        b.edge("e", r, l, 1.0, None).unwrap();
        let g = build_transporter_ceg(&b.build()).unwrap();
        assert_eq!(g.position_count(), 2);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn edge_map_follows_isomorphism() {
        // b lists its children in the opposite order to a
        let (g, map) = build_transporter_ceg_with(&twin_tree(0.25, 0.75), &Default::default()).unwrap();
        assert_eq!(g.edge_count(), 4);
        let t = twin_tree(0.25, 0.75);
        for e in t.edges() {
            let id = t.edge_by_name(&e.name).unwrap();
            assert_eq!(g.edge(map.edge_map[id.0]).prob, e.prob, "edge {}", e.name);
        }
    }

    #[test]
    fn minimize_is_identity_on_minimal_graph() {
        let g = build_transporter_ceg(&twin_tree(0.3, 0.3)).unwrap();
        let m = minimize_ceg(&g).unwrap();
        assert!(g.is_isomorphic(&m));
    }
}
