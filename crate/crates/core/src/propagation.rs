//! Collect/distribute message passing on a transporter CEG.
//!
//! The collect pass walks positions children-first and assigns every edge a
//! potential `τ_e = π_e · Φ(target)` (zero off the observation) and every
//! position an emphasis `Φ(w) = Σ τ_e`. The distribute pass divides each
//! potential by its source emphasis to give the revised probabilities `π̂`.
//! `Φ(w₀)` is the prior probability of the observation.
//!
//! Zeros only ever come from assignment, never from cancellation, so zero
//! tests below are exact.

use serde::{Deserialize, Serialize};

use crate::ceg::{CegEdge, CegEdgeId, CegPath, PositionId, TransporterCeg};
use crate::error::{CegError, Result};
use crate::observation::CompatibleObservation;

/// Arithmetic operations performed by one propagation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationCounters {
    /// Edges visited by collect, whether assigned a product or a zero.
    pub backward_edge_ops: u64,
    /// Emphasis summations, one per non-sink position.
    pub backward_vertex_ops: u64,
    /// Divisions performed by distribute.
    pub forward_edge_ops: u64,
}

impl OperationCounters {
    pub fn total(&self) -> u64 {
        self.backward_edge_ops + self.backward_vertex_ops + self.forward_edge_ops
    }
}

impl std::ops::Add for OperationCounters {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        OperationCounters {
            backward_edge_ops: self.backward_edge_ops + o.backward_edge_ops,
            backward_vertex_ops: self.backward_vertex_ops + o.backward_vertex_ops,
            forward_edge_ops: self.forward_edge_ops + o.forward_edge_ops,
        }
    }
}

/// Output of [`collect`].
#[derive(Clone, Debug, PartialEq)]
pub struct Collected {
    pub tau: Vec<f64>,
    pub phi: Vec<f64>,
    pub counters: OperationCounters,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagationResult {
    /// Potential per edge.
    pub tau: Vec<f64>,
    /// Emphasis per position; the sink holds 1.
    pub phi: Vec<f64>,
    /// Revised probability per edge.
    pub pi_hat: Vec<f64>,
    pub counters: OperationCounters,
    root: PositionId,
}

impl PropagationResult {
    pub fn tau(&self, e: CegEdgeId) -> f64 {
        self.tau[e.0]
    }

    pub fn phi(&self, w: PositionId) -> f64 {
        self.phi[w.0]
    }

    pub fn pi_hat(&self, e: CegEdgeId) -> f64 {
        self.pi_hat[e.0]
    }

    /// `π(Λ) = Φ(w₀)`.
    pub fn event_probability(&self) -> f64 {
        self.phi[self.root.0]
    }

    pub(crate) fn from_parts(
        tau: Vec<f64>,
        phi: Vec<f64>,
        pi_hat: Vec<f64>,
        counters: OperationCounters,
        root: PositionId,
    ) -> Self {
        PropagationResult { tau, phi, pi_hat, counters, root }
    }
}

/// Collect pass in the default accommodation order (reverse of the
/// level-based topological order).
pub fn collect(ceg: &TransporterCeg, obs: &CompatibleObservation) -> Collected {
    let mut order = ceg.topological_edge_order().positions;
    order.reverse();
    collect_in_order(ceg, obs, &order).expect("level order accommodates children first")
}

/// Collect pass over an explicit accommodation order of the non-sink
/// positions. Fails if a position comes before one of its children.
pub fn collect_in_order(ceg: &TransporterCeg, obs: &CompatibleObservation, order: &[PositionId]) -> Result<Collected> {
    check_obs(ceg, obs)?;
    let n = ceg.position_count();
    let mut tau = vec![0.0; ceg.edge_count()];
    let mut phi = vec![0.0; n];
    let mut accommodated = vec![false; n];
    // Nothing downstream is constrained: Φ is 1 by normalization of π.
    let mut unconstrained = vec![false; n];
    let mut counters = OperationCounters::default();
    phi[ceg.sink().0] = 1.0;
    accommodated[ceg.sink().0] = true;
    unconstrained[ceg.sink().0] = true;

    if order.len() != n - 1 {
        return Err(CegError::MalformedGraph(format!(
            "accommodation order lists {} positions, expected {}",
            order.len(),
            n - 1
        )));
    }
    for &w in order {
        if w == ceg.sink() || w.0 >= n || accommodated[w.0] {
            return Err(CegError::MalformedGraph(format!("bad or repeated position {} in order", w.0)));
        }
        let mut sum = 0.0;
        let mut free = true;
        for &e in ceg.out_edges(w) {
            let edge = ceg.edge(e);
            if !accommodated[edge.target.0] {
                return Err(CegError::MalformedGraph(format!(
                    "{} visited before its child {}",
                    ceg.position_name(w),
                    ceg.position_name(edge.target)
                )));
            }
            counters.backward_edge_ops += 1;
            tau[e.0] = if obs.contains(e) { edge.prob * phi[edge.target.0] } else { 0.0 };
            free &= obs.contains(e) && unconstrained[edge.target.0];
            sum += tau[e.0];
        }
        counters.backward_vertex_ops += 1;
        phi[w.0] = if free { 1.0 } else { sum };
        accommodated[w.0] = true;
        unconstrained[w.0] = free;
    }
    Ok(Collected { tau, phi, counters })
}

fn check_obs(ceg: &TransporterCeg, obs: &CompatibleObservation) -> Result<()> {
    if obs.edge_count() != ceg.edge_count() {
        return Err(CegError::MalformedGraph("observation belongs to a different graph".into()));
    }
    Ok(())
}

/// Distribute pass: `π̂_e = τ_e / Φ(source)` for observed edges leaving a
/// position of positive emphasis, zero otherwise.
pub fn distribute(
    ceg: &TransporterCeg,
    obs: &CompatibleObservation,
    collected: &Collected,
) -> (Vec<f64>, OperationCounters) {
    let mut pi_hat = vec![0.0; ceg.edge_count()];
    let mut counters = OperationCounters::default();
    for w in ceg.situations() {
        let phi = collected.phi[w.0];
        if phi == 0.0 {
            continue;
        }
        for &e in ceg.out_edges(w) {
            if obs.contains(e) {
                pi_hat[e.0] = collected.tau[e.0] / phi;
                counters.forward_edge_ops += 1;
            }
        }
    }
    (pi_hat, counters)
}

/// Runs collect then distribute. Errors if the observation has zero prior
/// probability.
pub fn propagate(ceg: &TransporterCeg, obs: &CompatibleObservation) -> Result<PropagationResult> {
    check_obs(ceg, obs)?;
    let collected = collect(ceg, obs);
    finish(ceg, obs, collected)
}

/// Like [`propagate`] with an explicit accommodation order.
pub fn propagate_in_order(
    ceg: &TransporterCeg,
    obs: &CompatibleObservation,
    order: &[PositionId],
) -> Result<PropagationResult> {
    let collected = collect_in_order(ceg, obs, order)?;
    finish(ceg, obs, collected)
}

fn finish(ceg: &TransporterCeg, obs: &CompatibleObservation, collected: Collected) -> Result<PropagationResult> {
    if collected.phi[ceg.root().0] == 0.0 {
        return Err(CegError::ZeroProbabilityObservation);
    }
    let (pi_hat, fwd) = distribute(ceg, obs, &collected);
    Ok(PropagationResult {
        tau: collected.tau,
        phi: collected.phi,
        pi_hat,
        counters: collected.counters + fwd,
        root: ceg.root(),
    })
}

/// `π(λ | Λ) = ∏ π̂` along a root-to-sink path.
pub fn conditional_atom_probability(ceg: &TransporterCeg, result: &PropagationResult, path: &CegPath) -> Result<f64> {
    ceg.check_path(path)?;
    let p: f64 = path.edges.iter().map(|e| result.pi_hat[e.0]).product();
    debug_assert!(
        invariance_ratio(ceg, result, path).is_none_or(|r| (r - p).abs() <= 1e-12),
        "invariance formula mismatch"
    );
    Ok(p)
}

/// `∏τ / ∏Φ` along a path, taken over its edges and the positions they
/// leave. `None` when some emphasis on the path is zero.
pub fn invariance_ratio(ceg: &TransporterCeg, result: &PropagationResult, path: &CegPath) -> Option<f64> {
    let mut num = 1.0;
    let mut den = 1.0;
    for &e in &path.edges {
        let phi = result.phi[ceg.edge(e).source.0];
        if phi == 0.0 {
            return None;
        }
        num *= result.tau[e.0];
        den *= phi;
    }
    Some(num / den)
}

/// `π̂(Λ(w))`: forward DP over the revised probabilities.
pub fn conditional_reach_probability(ceg: &TransporterCeg, result: &PropagationResult, w: PositionId) -> f64 {
    conditional_reach_probabilities(ceg, result)[w.0]
}

pub fn conditional_reach_probabilities(ceg: &TransporterCeg, result: &PropagationResult) -> Vec<f64> {
    ceg.reach_probabilities_with(|e| result.pi_hat[e.0])
}

/// The support graph `C_Λ` together with its correspondence back to `C`.
#[derive(Clone, Debug)]
pub struct ReducedCeg {
    pub ceg: TransporterCeg,
    /// Original position of each reduced position.
    pub position_map: Vec<PositionId>,
    /// Original edge of each reduced edge.
    pub edge_map: Vec<CegEdgeId>,
}

/// Keeps edges with `π̂ > 0` and positions with `Φ > 0`, then prunes
/// positions that cannot be reached from the root or cannot reach the sink
/// through the kept edges. Kept edges carry their `π̂` as probability.
pub fn reduce(ceg: &TransporterCeg, result: &PropagationResult) -> Result<ReducedCeg> {
    if result.event_probability() == 0.0 {
        return Err(CegError::ZeroProbabilityObservation);
    }
    let n = ceg.position_count();
    let keep_edge = |e: CegEdgeId| {
        let edge = ceg.edge(e);
        result.pi_hat[e.0] > 0.0 && result.phi[edge.source.0] > 0.0 && result.phi[edge.target.0] > 0.0
    };

    let mut forward = vec![false; n];
    forward[ceg.root().0] = true;
    for w in ceg.position_order() {
        if !forward[w.0] {
            continue;
        }
        for &e in ceg.out_edges(w) {
            if keep_edge(e) {
                forward[ceg.edge(e).target.0] = true;
            }
        }
    }
    let mut backward = vec![false; n];
    backward[ceg.sink().0] = true;
    for w in ceg.position_order().into_iter().rev() {
        if ceg.out_edges(w).iter().any(|&e| keep_edge(e) && backward[ceg.edge(e).target.0]) {
            backward[w.0] = true;
        }
    }
    let alive: Vec<bool> = (0..n).map(|p| forward[p] && backward[p] && result.phi[p] > 0.0).collect();

    let mut renumber = vec![usize::MAX; n];
    let mut names = Vec::new();
    let mut position_map = Vec::new();
    for p in ceg.positions() {
        if alive[p.0] {
            renumber[p.0] = names.len();
            names.push(ceg.position_name(p).to_owned());
            position_map.push(p);
        }
    }
    let mut edges = Vec::new();
    let mut edge_map = Vec::new();
    for e in ceg.edge_ids() {
        let edge = ceg.edge(e);
        if keep_edge(e) && alive[edge.source.0] && alive[edge.target.0] {
            edges.push(CegEdge {
                source: PositionId(renumber[edge.source.0]),
                target: PositionId(renumber[edge.target.0]),
                prob: result.pi_hat[e.0],
                ..edge.clone()
            });
            edge_map.push(e);
        }
    }
    let reduced =
        TransporterCeg::new(names, edges, PositionId(renumber[ceg.root().0]), PositionId(renumber[ceg.sink().0]))?;
    Ok(ReducedCeg { ceg: reduced, position_map, edge_map })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{example1_ceg, example2_observation};

    fn id(g: &TransporterCeg, name: &str) -> CegEdgeId {
        g.edge_by_name(name).unwrap()
    }

    fn pos(g: &TransporterCeg, name: &str) -> PositionId {
        g.position_by_name(name).unwrap()
    }

    #[test]
    fn running_example_emphases() {
        let g = example1_ceg();
        let r = propagate(&g, &example2_observation(&g)).unwrap();
        for (w, phi) in [("w6", 0.8), ("w5", 0.6), ("w4", 0.8), ("w3", 0.0), ("w2", 0.74), ("w1", 0.92), ("w0", 0.682)]
        {
            assert!((r.phi(pos(&g, w)) - phi).abs() < 1e-12, "{w}: {}", r.phi(pos(&g, w)));
        }
        assert_eq!(r.phi(g.sink()), 1.0);
        assert!((r.pi_hat(id(&g, "e1")) - 0.5 * 0.92 / 0.682).abs() < 1e-12);
        assert_eq!(r.pi_hat(id(&g, "e3")), 0.0);
        assert_eq!(r.counters.backward_edge_ops, 16);
        assert_eq!(r.counters.backward_vertex_ops, 7);
        assert_eq!(r.counters.forward_edge_ops, 10);
    }

    #[test]
    fn revised_probabilities_sum_to_one() {
        let g = example1_ceg();
        let r = propagate(&g, &example2_observation(&g)).unwrap();
        for w in g.situations() {
            if r.phi(w) > 0.0 {
                let s: f64 = g.out_edges(w).iter().map(|e| r.pi_hat(*e)).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn vacuous_observation_keeps_the_prior() {
        let g = example1_ceg();
        let r = propagate(&g, &CompatibleObservation::vacuous(&g)).unwrap();
        assert_eq!(r.event_probability(), 1.0);
        for e in g.edge_ids() {
            assert_eq!(r.pi_hat(e), g.edge(e).prob);
        }
    }

    #[test]
    fn zero_probability_is_an_error() {
        let g = example1_ceg();
        let obs = CompatibleObservation::from_union(&g, [id(&g, "e3"), id(&g, "e13")]);
        assert!(matches!(propagate(&g, &obs), Err(CegError::ZeroProbabilityObservation)));
    }

    #[test]
    fn single_path_observation() {
        let g = example1_ceg();
        let path = ["e2", "e7", "e14", "e15"].map(|n| id(&g, n));
        let obs = CompatibleObservation::from_union(&g, path);
        let r = propagate(&g, &obs).unwrap();
        assert!((r.event_probability() - 0.3 * 0.3 * 0.75 * 0.8).abs() < 1e-15);
        for e in path {
            assert!((r.pi_hat(e) - 1.0).abs() < 1e-15);
        }
        let p = conditional_atom_probability(&g, &r, &CegPath::new(path.to_vec())).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reach_probability_of_w4() {
        let g = example1_ceg();
        assert!((g.reach_probability(pos(&g, "w4")) - 0.51).abs() < 1e-12);
        let r = propagate(&g, &example2_observation(&g)).unwrap();
        let expected = (0.5 * 0.4 * 0.8 + 0.3 * 0.7 * 0.8) / 0.682;
        assert!((conditional_reach_probability(&g, &r, pos(&g, "w4")) - expected).abs() < 1e-12);
    }

    #[test]
    fn bad_orders_are_rejected() {
        let g = example1_ceg();
        let obs = CompatibleObservation::vacuous(&g);
        let forward = g.topological_edge_order().positions;
        assert!(collect_in_order(&g, &obs, &forward).is_err());
        assert!(collect_in_order(&g, &obs, &forward[1..]).is_err());
    }

    #[test]
    fn reduction_drops_unobserved_parts() {
        let g = example1_ceg();
        let r = propagate(&g, &example2_observation(&g)).unwrap();
        let red = reduce(&g, &r).unwrap();
        assert_eq!(red.ceg.position_count(), 7);
        assert_eq!(red.ceg.edge_count(), 10);
        assert!(red.ceg.position_by_name("w3").is_none());
        for gone in ["e3", "e8", "e9", "e12", "e13", "e16"] {
            assert!(red.ceg.edge_by_name(gone).is_none(), "{gone}");
        }
        assert_eq!(red.ceg.path_count(), 6);
    }
}
