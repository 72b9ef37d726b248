//! C-compatible observations: evidence of the form `X(w) ∈ A(w)`, stored as
//! the per-position edge subsets `E_Λ(w)` and their union `E_Λ`.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::ceg::{CegEdgeId, CegPath, PositionId, TransporterCeg};
use crate::error::{CegError, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompatibleObservation {
    /// `E_Λ(w)` indexed by position; the sink's entry is always empty.
    per_position: Vec<BTreeSet<CegEdgeId>>,
    /// Membership flags for `E_Λ`, indexed by edge.
    union: Vec<bool>,
}

/// Outcome of testing an arbitrary path set for C-compatibility.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Compatibility {
    Compatible(CompatibleObservation),
    /// `witness` is admitted by the induced edge sets but absent from the
    /// input.
    Incompatible {
        witness: CegPath,
    },
}

impl CompatibleObservation {
    /// Observation carrying no information: every edge is admitted.
    pub fn vacuous(ceg: &TransporterCeg) -> Self {
        Self::from_union(ceg, ceg.edge_ids())
    }

    /// Builds an observation from per-position subsets. Positions absent
    /// from `sets` keep their full edge set.
    pub fn from_edge_sets(ceg: &TransporterCeg, sets: &BTreeMap<PositionId, BTreeSet<CegEdgeId>>) -> Result<Self> {
        let mut per_position: Vec<BTreeSet<CegEdgeId>> =
            ceg.positions().map(|p| ceg.out_edges(p).iter().copied().collect()).collect();
        for (&p, edges) in sets {
            if p.0 >= ceg.position_count() {
                return Err(CegError::UnknownId(format!("position index {}", p.0)));
            }
            for &e in edges {
                if e.0 >= ceg.edge_count() {
                    return Err(CegError::UnknownId(format!("edge index {}", e.0)));
                }
                if ceg.edge(e).source != p {
                    return Err(CegError::EdgeNotAtPosition {
                        edge: ceg.edge(e).name.clone(),
                        position: ceg.position_name(p).to_owned(),
                    });
                }
            }
            per_position[p.0] = edges.clone();
        }
        Ok(Self::from_per_position(ceg, per_position))
    }

    /// Builds an observation from the union `E_Λ`; each position gets the
    /// listed edges that leave it, possibly none.
    pub fn from_union(ceg: &TransporterCeg, edges: impl IntoIterator<Item = CegEdgeId>) -> Self {
        let mut per_position = vec![BTreeSet::new(); ceg.position_count()];
        for e in edges {
            per_position[ceg.edge(e).source.0].insert(e);
        }
        Self::from_per_position(ceg, per_position)
    }

    fn from_per_position(ceg: &TransporterCeg, per_position: Vec<BTreeSet<CegEdgeId>>) -> Self {
        let mut union = vec![false; ceg.edge_count()];
        for e in per_position.iter().flatten() {
            union[e.0] = true;
        }
        CompatibleObservation { per_position, union }
    }

    pub fn contains(&self, e: CegEdgeId) -> bool {
        self.union[e.0]
    }

    pub fn edges_at(&self, p: PositionId) -> &BTreeSet<CegEdgeId> {
        &self.per_position[p.0]
    }

    /// `E_Λ` in edge-id order.
    pub fn union(&self) -> Vec<CegEdgeId> {
        self.union.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| CegEdgeId(i)).collect()
    }

    pub fn is_vacuous(&self) -> bool {
        self.union.iter().all(|&b| b)
    }

    pub fn edge_count(&self) -> usize {
        self.union.len()
    }

    /// Whether every edge of `path` lies in `E_Λ`.
    pub fn admits(&self, path: &CegPath) -> bool {
        path.edges.iter().all(|e| self.union[e.0])
    }

    /// All root-to-sink paths inside `E_Λ`.
    pub fn paths_of(&self, ceg: &TransporterCeg) -> Vec<CegPath> {
        ceg.enumerate_paths_where(|e| self.union[e.0])
    }

    pub fn path_count(&self, ceg: &TransporterCeg) -> u128 {
        ceg.path_count_where(|e| self.union[e.0])
    }
}

/// Decides whether `paths` is C-compatible. Each position's subset is the
/// set of its edges used by some input path; the input is compatible iff the
/// paths induced by those subsets are exactly the input.
pub fn check_compatibility(ceg: &TransporterCeg, paths: &[CegPath]) -> Result<Compatibility> {
    for p in paths {
        ceg.check_path(p)?;
    }
    let given: HashSet<&CegPath> = paths.iter().collect();
    let obs = CompatibleObservation::from_union(ceg, paths.iter().flat_map(|p| p.edges.iter().copied()));
    // Every input path is induced, so equal counts mean equal sets.
    if obs.path_count(ceg) == given.len() as u128 {
        return Ok(Compatibility::Compatible(obs));
    }
    let witness = obs
        .paths_of(ceg)
        .into_iter()
        .find(|p| !given.contains(p))
        .expect("induced set is strictly larger than the input");
    Ok(Compatibility::Incompatible { witness })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ceg::CegEdge;
    use crate::tree::Atom;

    /// Diamond: w0 -(a|b)-> w1 -(c|d)-> sink.
    fn diamond() -> TransporterCeg {
        let e = |n: &str, s, t, p| CegEdge {
            name: n.into(),
            source: PositionId(s),
            target: PositionId(t),
            prob: p,
            label: None,
        };
        TransporterCeg::new(
            vec!["w0".into(), "w1".into(), "w_inf".into()],
            vec![e("a", 0, 1, 0.5), e("b", 0, 1, 0.5), e("c", 1, 2, 0.5), e("d", 1, 2, 0.5)],
            PositionId(0),
            PositionId(2),
        )
        .unwrap()
    }

    fn path(ids: &[usize]) -> CegPath {
        Atom::new(ids.iter().map(|&i| CegEdgeId(i)).collect())
    }

    #[test]
    fn absent_positions_default_to_full() {
        let g = diamond();
        let sets = BTreeMap::from([(PositionId(0), BTreeSet::from([CegEdgeId(0)]))]);
        let obs = CompatibleObservation::from_edge_sets(&g, &sets).unwrap();
        assert_eq!(obs.union(), vec![CegEdgeId(0), CegEdgeId(2), CegEdgeId(3)]);
        assert_eq!(obs.paths_of(&g).len(), 2);
    }

    #[test]
    fn wrong_position_is_rejected() {
        let g = diamond();
        let sets = BTreeMap::from([(PositionId(1), BTreeSet::from([CegEdgeId(0)]))]);
        assert!(matches!(CompatibleObservation::from_edge_sets(&g, &sets), Err(CegError::EdgeNotAtPosition { .. })));
    }

    #[test]
    fn empty_subset_on_a_cut_kills_everything() {
        let g = diamond();
        let sets = BTreeMap::from([(PositionId(1), BTreeSet::new())]);
        let obs = CompatibleObservation::from_edge_sets(&g, &sets).unwrap();
        assert!(obs.paths_of(&g).is_empty());
        assert_eq!(obs.path_count(&g), 0);
    }

    #[test]
    fn crossing_pair_is_incompatible() {
        let g = diamond();
        let got = check_compatibility(&g, &[path(&[0, 2]), path(&[1, 3])]).unwrap();
        match got {
            Compatibility::Incompatible { witness } => {
                assert!(witness == path(&[0, 3]) || witness == path(&[1, 2]));
            }
            other => panic!("expected incompatible, got {other:?}"),
        }
    }

    #[test]
    fn product_sets_are_compatible() {
        let g = diamond();
        let got = check_compatibility(&g, &[path(&[0, 2]), path(&[0, 3])]).unwrap();
        let Compatibility::Compatible(obs) = got else { panic!() };
        assert_eq!(obs.union(), vec![CegEdgeId(0), CegEdgeId(2), CegEdgeId(3)]);
        assert!(matches!(check_compatibility(&g, &[path(&[1, 3])]).unwrap(), Compatibility::Compatible(_)));
    }

    #[test]
    fn non_paths_are_rejected() {
        let g = diamond();
        assert!(matches!(check_compatibility(&g, &[path(&[2])]), Err(CegError::InvalidPath(_))));
    }
}
