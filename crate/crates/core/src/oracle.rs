//! Brute-force conditioning by path enumeration.
//!
//! Nothing here touches the collect/distribute code: every quantity is a sum
//! of path products over an explicit enumeration, so it can serve as an
//! independent check on propagation.

use crate::ceg::{CegPath, TransporterCeg};
use crate::error::{CegError, Result};
use crate::observation::CompatibleObservation;
use crate::positions::TreeCegMap;
use crate::tree::ProbabilityTree;

pub const DEFAULT_PATH_CAP: u128 = 1_000_000;

#[derive(Clone, Debug)]
pub struct OracleResult {
    /// `π(Λ)`.
    pub event_probability: f64,
    /// Set when `π(Λ) = 0`; conditional fields are then all zero.
    pub zero_event: bool,
    /// Every root-to-sink path with `π(λ | Λ)`.
    pub atoms: Vec<(CegPath, f64)>,
    /// `π(Λ ∩ Λ(w))` per position.
    pub position_mass: Vec<f64>,
    /// `π(Λ(e) | Λ, Λ(w))` per edge, zero when `π(Λ ∩ Λ(w)) = 0`.
    pub edge_conditionals: Vec<f64>,
    /// Probability of completing `Λ` from `w`: the sum over `w`-to-sink
    /// subpaths inside `E_Λ`. Equals `π(Λ | Λ(v))` for any `v` in `w`.
    pub downstream_mass: Vec<f64>,
    /// Conditional edge probabilities within the subgraph below each
    /// position: subpaths through `e` over all subpaths from its source.
    /// Defined wherever `downstream_mass` is positive, including positions
    /// that `Λ` never reaches.
    pub local_conditionals: Vec<f64>,
}

impl OracleResult {
    /// Whether `π(Λ(e) | Λ, Λ(w))` is defined for the source of `e`.
    pub fn is_defined(&self, ceg: &TransporterCeg, e: crate::ceg::CegEdgeId) -> bool {
        self.position_mass[ceg.edge(e).source.0] > 0.0
    }
}

pub fn brute_force_condition(ceg: &TransporterCeg, obs: &CompatibleObservation) -> Result<OracleResult> {
    brute_force_condition_capped(ceg, obs, DEFAULT_PATH_CAP)
}

pub fn brute_force_condition_capped(
    ceg: &TransporterCeg,
    obs: &CompatibleObservation,
    cap: u128,
) -> Result<OracleResult> {
    let total = ceg.path_count();
    if total > cap {
        return Err(CegError::InstanceTooLarge { paths: total, cap });
    }
    let paths = ceg.enumerate_paths();

    let mut event = 0.0;
    let mut position_mass = vec![0.0; ceg.position_count()];
    let mut edge_mass = vec![0.0; ceg.edge_count()];
    let mut probs = Vec::with_capacity(paths.len());
    for path in &paths {
        let p: f64 = path.edges.iter().map(|e| ceg.edge(*e).prob).product();
        let inside = obs.admits(path);
        probs.push(if inside { p } else { 0.0 });
        if !inside {
            continue;
        }
        event += p;
        for &e in &path.edges {
            edge_mass[e.0] += p;
            position_mass[ceg.edge(e).source.0] += p;
        }
        position_mass[ceg.sink().0] += p;
    }

    let zero_event = event == 0.0;
    let atoms =
        paths.into_iter().zip(probs).map(|(path, p)| (path, if zero_event { 0.0 } else { p / event })).collect();
    let edge_conditionals = ceg
        .edge_ids()
        .map(|e| {
            let den = position_mass[ceg.edge(e).source.0];
            if den > 0.0 {
                edge_mass[e.0] / den
            } else {
                0.0
            }
        })
        .collect();

    let (downstream_mass, local_conditionals) = downstream(ceg, obs);
    Ok(OracleResult {
        event_probability: event,
        zero_event,
        atoms,
        position_mass,
        edge_conditionals,
        downstream_mass,
        local_conditionals,
    })
}

/// Enumerates, for every position, all subpaths to the sink inside `E_Λ`.
fn downstream(ceg: &TransporterCeg, obs: &CompatibleObservation) -> (Vec<f64>, Vec<f64>) {
    let mut mass = vec![0.0; ceg.position_count()];
    let mut through = vec![0.0; ceg.edge_count()];
    mass[ceg.sink().0] = 1.0;
    for w in ceg.situations() {
        // (position, product so far, first edge)
        let mut stack = Vec::new();
        for &e in ceg.out_edges(w) {
            if obs.contains(e) {
                stack.push((ceg.edge(e).target, ceg.edge(e).prob, e));
            }
        }
        while let Some((at, p, first)) = stack.pop() {
            if at == ceg.sink() {
                mass[w.0] += p;
                through[first.0] += p;
                continue;
            }
            for &e in ceg.out_edges(at) {
                if obs.contains(e) {
                    stack.push((ceg.edge(e).target, p * ceg.edge(e).prob, first));
                }
            }
        }
    }
    let local = ceg
        .edge_ids()
        .map(|e| {
            let den = mass[ceg.edge(e).source.0];
            if den > 0.0 {
                through[e.0] / den
            } else {
                0.0
            }
        })
        .collect();
    (mass, local)
}

/// Tree-level conditioning: keeps the tree atoms whose image under `map`
/// lies in `Λ` and renormalizes, with each atom's probability taken from the
/// tree's own edges.
#[derive(Clone, Debug)]
pub struct TreeOracle {
    pub event_probability: f64,
    /// `(CEG image of the atom, tree probability, conditional probability)`.
    pub atoms: Vec<(CegPath, f64, f64)>,
}

pub fn condition_tree(tree: &ProbabilityTree, map: &TreeCegMap, obs: &CompatibleObservation) -> Result<TreeOracle> {
    let atoms = tree.enumerate_atoms()?;
    let mut rows = Vec::with_capacity(atoms.len());
    let mut event = 0.0;
    for atom in &atoms {
        let p = tree.atom_probability(atom)?;
        let image = map.map_atom(atom);
        let inside = obs.admits(&image);
        if inside {
            event += p;
        }
        rows.push((image, p, inside));
    }
    let atoms = rows
        .into_iter()
        .map(|(image, p, inside)| {
            let c = if inside && event > 0.0 { p / event } else { 0.0 };
            (image, p, c)
        })
        .collect();
    Ok(TreeOracle { event_probability: event, atoms })
}
