//! Model and instance generators: the medical treatment example, seeded
//! random trees and observations, and the model-selection family.

use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ceg::{CegEdgeId, PositionId, TransporterCeg};
use crate::error::{CegError, Result};
use crate::observation::CompatibleObservation;
use crate::positions::build_transporter_ceg;
use crate::tree::{ProbabilityTree, TreeBuilder, VertexId};

/// Edge descriptors of the treatment example, keyed by edge name.
const EXAMPLE1_LABELS: [(&str, &str); 16] = [
    ("e1", "Not critical - Treatment prescribed I"),
    ("e2", "Liver failure - Treatment II"),
    ("e3", "Liver & Kidney failure - Treatment II"),
    ("e4", "Responds to I - Full recovery"),
    ("e5", "No response to I - Surgery prescribed III"),
    ("e6", "Responds to II - Surgery III"),
    ("e7", "No response to II - Surgery IV"),
    ("e8", "Responds to II - Surgery III"),
    ("e9", "No response to II - Surgery IV"),
    ("e10", "Recovery - Lifetime monitoring"),
    ("e11", "Recovery - Lifetime medication"),
    ("e12", "Death in surgery"),
    ("e13", "Death in surgery"),
    ("e14", "Survives surgery IV - Treatment V"),
    ("e15", "Recovery - Lifetime on treatment V"),
    ("e16", "No response to V - Dies"),
];

fn example1_label(edge: &str) -> Option<String> {
    EXAMPLE1_LABELS.iter().find(|(e, _)| *e == edge).map(|(_, l)| l.to_string())
}

/// The 16-atom treatment tree with the reference parameterization
/// `w₀:(0.5,0.3,0.2) w₁:(0.6,0.4) w₂:(0.7,0.3) w₃:(0.5,0.5) w₄:(0.5,0.3,0.2)
/// w₅:(0.25,0.75) w₆:(0.8,0.2)`.
///
/// Edges out of the first copy of each repeated subtree are named `e1..e16`
/// after the CEG edges they become; edges of later copies get an `@vertex`
/// suffix.
pub fn example1_tree() -> ProbabilityTree {
    let mut b = TreeBuilder::new();
    let v0 = b_vertex(&mut b, "v0");
    let v1 = b_vertex(&mut b, "v1");
    let v2 = b_vertex(&mut b, "v2");
    let v3 = b_vertex(&mut b, "v3");
    let l1 = b_vertex(&mut b, "l1");
    let v4 = [b_vertex(&mut b, "v4_1"), b_vertex(&mut b, "v4_2"), b_vertex(&mut b, "v4_3")];
    let v5 = [b_vertex(&mut b, "v5_1"), b_vertex(&mut b, "v5_2")];
    let v6 = [b_vertex(&mut b, "v6_1"), b_vertex(&mut b, "v6_2")];

    let edge = |b: &mut TreeBuilder, name: &str, copy: Option<&str>, s: VertexId, t: VertexId, p: f64| {
        let full = match copy {
            Some(c) => format!("{name}@{c}"),
            None => name.to_owned(),
        };
        b.edge(full, s, t, p, example1_label(name)).expect("fixed example");
    };

    edge(&mut b, "e1", None, v0, v1, 0.5);
    edge(&mut b, "e2", None, v0, v2, 0.3);
    edge(&mut b, "e3", None, v0, v3, 0.2);
    edge(&mut b, "e4", None, v1, l1, 0.6);
    edge(&mut b, "e5", None, v1, v4[0], 0.4);
    edge(&mut b, "e6", None, v2, v4[1], 0.7);
    edge(&mut b, "e7", None, v2, v5[0], 0.3);
    edge(&mut b, "e8", None, v3, v4[2], 0.5);
    edge(&mut b, "e9", None, v3, v5[1], 0.5);
    for (i, &v) in v4.iter().enumerate() {
        let copy = (i > 0).then(|| format!("v4_{}", i + 1));
        for (name, p) in [("e10", 0.5), ("e11", 0.3), ("e12", 0.2)] {
            let leaf = b_vertex(&mut b, &format!("l_{name}_{}", i + 1));
            edge(&mut b, name, copy.as_deref(), v, leaf, p);
        }
    }
    for (i, (&v, &w)) in v5.iter().zip(&v6).enumerate() {
        let copy = (i > 0).then(|| format!("v5_{}", i + 1));
        let leaf = b_vertex(&mut b, &format!("l_e13_{}", i + 1));
        edge(&mut b, "e13", copy.as_deref(), v, leaf, 0.25);
        edge(&mut b, "e14", copy.as_deref(), v, w, 0.75);
    }
    for (i, &v) in v6.iter().enumerate() {
        let copy = (i > 0).then(|| format!("v6_{}", i + 1));
        for (name, p) in [("e15", 0.8), ("e16", 0.2)] {
            let leaf = b_vertex(&mut b, &format!("l_{name}_{}", i + 1));
            edge(&mut b, name, copy.as_deref(), v, leaf, p);
        }
    }
    b.build()
}

fn b_vertex(b: &mut TreeBuilder, name: &str) -> VertexId {
    b.vertex(name).expect("fixed example")
}

pub fn example1_ceg() -> TransporterCeg {
    build_transporter_ceg(&example1_tree()).expect("example tree is valid")
}

/// The observation "not diagnosed with liver and kidney failure, and still
/// alive": `E_Λ = {e1,e2,e4,e5,e6,e7,e10,e11,e14,e15}`.
pub fn example2_observation(ceg: &TransporterCeg) -> CompatibleObservation {
    let edges = ["e1", "e2", "e4", "e5", "e6", "e7", "e10", "e11", "e14", "e15"]
        .iter()
        .map(|n| ceg.edge_by_name(n).expect("example edge"));
    CompatibleObservation::from_union(ceg, edges)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomTreeParams {
    /// Longest root-to-leaf path, in edges (at least 1).
    pub max_depth: usize,
    /// Most children per situation (at least 2).
    pub max_branch: usize,
    /// Chance that a new subtree is a copy of one generated earlier.
    pub merge_bias: f64,
    /// Upper bound on vertex count.
    pub max_vertices: usize,
    /// Chance that a non-root vertex above the depth limit is a leaf.
    pub leaf_prob: f64,
}

impl Default for RandomTreeParams {
    fn default() -> Self {
        RandomTreeParams { max_depth: 5, max_branch: 3, merge_bias: 0.5, max_vertices: 200, leaf_prob: 0.3 }
    }
}

impl RandomTreeParams {
    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(CegError::InvalidParameter(m.to_owned()));
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1");
        }
        if self.max_branch < 2 {
            return bad("max_branch must be at least 2");
        }
        if !(0.0..=1.0).contains(&self.merge_bias) || !(0.0..=1.0).contains(&self.leaf_prob) {
            return bad("merge_bias and leaf_prob must lie in [0,1]");
        }
        if self.max_vertices < 3 {
            return bad("max_vertices must be at least 3");
        }
        Ok(())
    }
}

enum Shape {
    Leaf,
    Node { height: usize, size: usize, children: Vec<(f64, Rc<Shape>)> },
}

impl Shape {
    fn size(&self) -> usize {
        match self {
            Shape::Leaf => 1,
            Shape::Node { size, .. } => *size,
        }
    }

    fn height(&self) -> usize {
        match self {
            Shape::Leaf => 0,
            Shape::Node { height, .. } => *height,
        }
    }
}

struct TreeGen<'a> {
    rng: ChaCha8Rng,
    params: &'a RandomTreeParams,
    /// Vertices still available beyond those already placed.
    remaining: usize,
    pool: Vec<Rc<Shape>>,
}

impl TreeGen<'_> {
    /// Expands a slot that has already been paid for as a single vertex.
    fn grow(&mut self, depth_left: usize, is_root: bool) -> Rc<Shape> {
        if depth_left == 0 || self.remaining < 2 || (!is_root && self.rng.gen_bool(self.params.leaf_prob)) {
            return Rc::new(Shape::Leaf);
        }
        if !is_root && !self.pool.is_empty() && self.rng.gen_bool(self.params.merge_bias) {
            let fits: Vec<&Rc<Shape>> =
                self.pool.iter().filter(|s| s.height() <= depth_left && s.size() - 1 <= self.remaining).collect();
            if let Some(&pick) = fits.choose(&mut self.rng) {
                let pick = Rc::clone(pick);
                self.remaining -= pick.size() - 1;
                return pick;
            }
        }
        let k = self.rng.gen_range(2..=self.params.max_branch).min(self.remaining);
        self.remaining -= k;
        let weights: Vec<f64> = (0..k).map(|_| self.rng.gen_range(0.05..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let mut children = Vec::with_capacity(k);
        for w in weights {
            children.push((w / total, self.grow(depth_left - 1, false)));
        }
        let height = 1 + children.iter().map(|(_, c)| c.height()).max().unwrap_or(0);
        let size = 1 + children.iter().map(|(_, c)| c.size()).sum::<usize>();
        let node = Rc::new(Shape::Node { height, size, children });
        self.pool.push(Rc::clone(&node));
        node
    }
}

/// A seeded random probability tree. With `merge_bias > 0` some subtrees are
/// exact copies of earlier ones, which forces non-trivial positions.
pub fn random_tree(seed: u64, params: &RandomTreeParams) -> Result<ProbabilityTree> {
    params.check()?;
    let mut gen =
        TreeGen { rng: ChaCha8Rng::seed_from_u64(seed), params, remaining: params.max_vertices - 1, pool: Vec::new() };
    let shape = gen.grow(params.max_depth, true);

    let mut b = TreeBuilder::new();
    let root = b.vertex("v0")?;
    let mut count = 1;
    let mut stack = vec![(root, shape)];
    while let Some((v, shape)) = stack.pop() {
        if let Shape::Node { children, .. } = &*shape {
            for (p, child) in children {
                let c = b.vertex(format!("v{count}"))?;
                b.edge(format!("e{count}"), v, c, *p, None)?;
                count += 1;
                stack.push((c, Rc::clone(child)));
            }
        }
    }
    Ok(b.build())
}

/// Random observation: each edge of each position is kept with probability
/// `keep_prob`. Compatible by construction; may have zero probability.
pub fn random_observation(ceg: &TransporterCeg, rng: &mut impl Rng, keep_prob: f64) -> CompatibleObservation {
    let kept: Vec<CegEdgeId> = ceg.edge_ids().filter(|_| rng.gen_bool(keep_prob)).collect();
    CompatibleObservation::from_union(ceg, kept)
}

/// Draws random observations until one has positive prior probability.
pub fn random_positive_observation(
    ceg: &TransporterCeg,
    rng: &mut impl Rng,
    keep_prob: f64,
    max_tries: usize,
) -> Option<CompatibleObservation> {
    (0..max_tries)
        .map(|_| random_observation(ceg, rng, keep_prob))
        .find(|obs| ceg.path_count_where(|e| obs.contains(e) && ceg.edge(e).prob > 0.0) > 0)
}

/// Number of selector states, `M = (n-1)(n-2)/2`.
pub fn model_selection_states(n: usize) -> usize {
    (n - 1) * (n - 2) / 2
}

/// The tree of the model-selection example: a selector `X₁` with `M` states
/// picks the dependent pair `(X_a, X_b)`, `a < b`, among binary
/// `X₂..X_n`; the other binaries are independent. State `k` is the `k`-th
/// pair in lexicographic order. Below each state the pair is unfolded first
/// (`X_a`, then `X_b` given `X_a`), then the remaining binaries in index
/// order.
pub fn model_selection_tree(n: usize) -> Result<ProbabilityTree> {
    if n < 3 {
        return Err(CegError::InvalidParameter(format!("model selection needs n >= 3, got {n}")));
    }
    let m = model_selection_states(n);
    let marginal = |j: usize| j as f64 / (2 * n) as f64;
    // P(X_b = 1 | X_a = x)
    let conditional = |x: usize| if x == 0 { 0.9 } else { 0.6 };

    let mut b = TreeBuilder::new();
    let root = b.vertex("x1")?;
    let mut counter = 0usize;
    let mut fresh = |b: &mut TreeBuilder| {
        counter += 1;
        b.vertex(format!("u{counter}"))
    };
    let pairs: Vec<(usize, usize)> = (2..=n).flat_map(|a| (a + 1..=n).map(move |b| (a, b))).collect();
    debug_assert_eq!(pairs.len(), m);

    for (k, &(a, bb)) in pairs.iter().enumerate() {
        let state = fresh(&mut b)?;
        b.edge(format!("s{k}"), root, state, 1.0 / m as f64, Some(format!("X1={k}")))?;
        let rest: Vec<usize> = (2..=n).filter(|&j| j != a && j != bb).collect();
        // X_a
        for xa in 0..2 {
            let va = fresh(&mut b)?;
            let pa = if xa == 1 { marginal(a) } else { 1.0 - marginal(a) };
            b.edge(format!("s{k}.x{a}={xa}"), state, va, pa, Some(format!("X{a}={xa}")))?;
            for xb in 0..2 {
                let pb = if xb == 1 { conditional(xa) } else { 1.0 - conditional(xa) };
                let vb = fresh(&mut b)?;
                let tag = format!("s{k}.x{a}={xa}.x{bb}={xb}");
                b.edge(tag.clone(), va, vb, pb, Some(format!("X{bb}={xb}")))?;
                let mut frontier = vec![(vb, tag)];
                for &j in &rest {
                    let mut next = Vec::new();
                    for (v, prefix) in frontier {
                        for xj in 0..2 {
                            let c = fresh(&mut b)?;
                            let pj = if xj == 1 { marginal(j) } else { 1.0 - marginal(j) };
                            let tag = format!("{prefix}.x{j}={xj}");
                            b.edge(tag.clone(), v, c, pj, Some(format!("X{j}={xj}")))?;
                            next.push((c, tag));
                        }
                    }
                    frontier = next;
                }
            }
        }
    }
    Ok(b.build())
}

/// Transporter CEG of [`model_selection_tree`].
pub fn model_selection_ceg(n: usize) -> Result<TransporterCeg> {
    build_transporter_ceg(&model_selection_tree(n)?)
}

/// `(M(1+2n), 2+Mn)`: the edge and position bounds of the family.
pub fn model_selection_bounds(n: usize) -> (usize, usize) {
    let m = model_selection_states(n);
    (m * (1 + 2 * n), 2 + m * n)
}

/// A random topological order of the non-sink positions, children first, for
/// testing accommodation-order independence.
pub fn random_accommodation_order(ceg: &TransporterCeg, rng: &mut impl Rng) -> Vec<PositionId> {
    let n = ceg.position_count();
    let mut pending: Vec<usize> = ceg.positions().map(|p| ceg.out_edges(p).len()).collect();
    let mut ready: Vec<PositionId> = ceg.in_edges(ceg.sink()).iter().map(|&e| ceg.edge(e).source).collect();
    ready.sort();
    ready.dedup();
    // A position is ready when all of its out-edges lead to accommodated
    // positions; parallel edges are counted individually.
    let mut done = vec![false; n];
    done[ceg.sink().0] = true;
    for &e in ceg.in_edges(ceg.sink()) {
        pending[ceg.edge(e).source.0] -= 1;
    }
    ready.retain(|p| pending[p.0] == 0);
    let mut order = Vec::with_capacity(n - 1);
    while !ready.is_empty() {
        let i = rng.gen_range(0..ready.len());
        let w = ready.swap_remove(i);
        done[w.0] = true;
        order.push(w);
        for &e in ceg.in_edges(w) {
            let s = ceg.edge(e).source;
            pending[s.0] -= 1;
            if pending[s.0] == 0 {
                ready.push(s);
            }
        }
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::positions::compute_positions;

    #[test]
    fn example1_shape() {
        let t = example1_tree();
        assert!(t.validate().is_valid());
        assert_eq!(t.enumerate_atoms().unwrap().len(), 16);
        let g = example1_ceg();
        assert_eq!(g.position_count(), 8);
        assert_eq!(g.edge_count(), 16);
        let names: Vec<&str> = g.edges().iter().map(|e| e.name.as_str()).collect();
        let expected: Vec<String> = (1..=16).map(|i| format!("e{i}")).collect();
        assert_eq!(names, expected);
    }

    #[test]
    fn random_tree_is_deterministic_and_valid() {
        let params = RandomTreeParams::default();
        let a = random_tree(7, &params).unwrap();
        let b = random_tree(7, &params).unwrap();
        assert!(a.validate().is_valid());
        assert!(a.vertex_count() <= params.max_vertices);
        assert_eq!(a.edges(), b.edges());
    }

    #[test]
    fn no_merge_bias_gives_singletons() {
        let params = RandomTreeParams { merge_bias: 0.0, ..Default::default() };
        for seed in 0..20 {
            let t = random_tree(seed, &params).unwrap();
            let p = compute_positions(&t).unwrap();
            assert!(p.blocks.iter().all(|b| b.len() == 1), "seed {seed}");
        }
    }

    #[test]
    fn merge_bias_forces_merges() {
        let params = RandomTreeParams { merge_bias: 0.8, ..Default::default() };
        // small draws can end before any copy is made
        let merged = (0..20)
            .filter(|&seed| {
                let t = random_tree(seed, &params).unwrap();
                compute_positions(&t).unwrap().blocks.iter().any(|b| b.len() > 1)
            })
            .count();
        assert!(merged >= 15, "{merged}");
    }

    #[test]
    fn bad_params_are_rejected() {
        let p = RandomTreeParams { max_branch: 1, ..Default::default() };
        assert!(random_tree(0, &p).is_err());
        assert!(model_selection_ceg(2).is_err());
    }

    #[test]
    fn accommodation_orders_are_valid() {
        let g = example1_ceg();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let order = random_accommodation_order(&g, &mut rng);
            assert_eq!(order.len(), 7);
            let mut seen = [false; 8];
            seen[g.sink().0] = true;
            for w in order {
                assert!(g.out_edges(w).iter().all(|e| seen[g.edge(*e).target.0]));
                seen[w.0] = true;
            }
        }
    }
}
