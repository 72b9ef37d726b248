//! Versioned JSON file formats.
//!
//! * model files (`"format": "ceg-model"`) hold either a `tree` section or a
//!   `ceg` section; probabilities are decimal strings,
//! * observation files (`"format": "ceg-observation"`) give evidence as
//!   per-position edge lists, as a union edge list, or as an explicit path
//!   set to be checked for compatibility,
//! * result files (`"format": "ceg-result"`) hold `τ`, `Φ`, `π̂` and the
//!   operation counters of a propagation.
//!
//! Ids in files are the user-facing edge, vertex and position names.

use std::collections::{BTreeMap, BTreeSet};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::ceg::{CegEdge, CegPath, PositionId, TransporterCeg};
use crate::error::{CegError, Result};
use crate::observation::{check_compatibility, Compatibility, CompatibleObservation};
use crate::propagation::{OperationCounters, PropagationResult};
use crate::tree::{Atom, ProbabilityTree, TreeBuilder};

pub const FORMAT_VERSION: u32 = 1;
pub const MODEL_FORMAT: &str = "ceg-model";
pub const OBSERVATION_FORMAT: &str = "ceg-observation";
pub const RESULT_FORMAT: &str = "ceg-result";

/// Parses a probability written as a plain decimal (an exponent is
/// allowed). Conversion to `f64` is correctly rounded.
pub fn parse_probability(text: &str) -> Result<f64> {
    let ok_chars = !text.is_empty()
        && text.chars().all(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '-' | '+'))
        && text.chars().any(|c| c.is_ascii_digit());
    if !ok_chars {
        return Err(CegError::Format(format!("probability {text:?} is not a decimal number")));
    }
    let p: f64 = text.parse().map_err(|_| CegError::Format(format!("probability {text:?} is not a decimal number")))?;
    if !p.is_finite() {
        return Err(CegError::Format(format!("probability {text:?} is not finite")));
    }
    Ok(p)
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_probability(p: f64) -> String {
    format!("{p}")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub id: String,
    pub from: String,
    pub to: String,
    pub prob: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeSection {
    /// Vertex ids. Their order breaks ties when choosing position
    /// representatives: the earliest listed vertex wins.
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CegSection {
    pub root: String,
    pub sink: String,
    pub positions: Vec<String>,
    /// Edges in id order; each position's `π(w)` is the sequence of its
    /// outgoing edge probabilities in this order.
    pub edges: Vec<EdgeRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<TreeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ceg: Option<CegSection>,
}

/// A loaded model.
#[derive(Clone, Debug)]
pub enum Model {
    Tree(ProbabilityTree),
    Ceg(TransporterCeg),
}

fn check_header(format: &str, version: u32, expected: &str) -> Result<()> {
    if format != expected {
        return Err(CegError::Format(format!("expected format {expected:?}, found {format:?}")));
    }
    if version != FORMAT_VERSION {
        return Err(CegError::Format(format!("unsupported {expected} version {version}")));
    }
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| CegError::Format(e.to_string()))
}

impl ModelFile {
    pub fn from_tree(tree: &ProbabilityTree, name: Option<String>, description: Option<String>) -> Self {
        let vertices = tree.vertices().map(|v| tree.vertex_name(v).to_owned()).collect();
        let edges = tree
            .edges()
            .iter()
            .map(|e| EdgeRecord {
                id: e.name.clone(),
                from: tree.vertex_name(e.source).to_owned(),
                to: tree.vertex_name(e.target).to_owned(),
                prob: format_probability(e.prob),
                label: e.label.clone(),
            })
            .collect();
        ModelFile {
            format: MODEL_FORMAT.to_owned(),
            version: FORMAT_VERSION,
            name,
            description,
            tree: Some(TreeSection { vertices, edges }),
            ceg: None,
        }
    }

    pub fn from_ceg(ceg: &TransporterCeg, name: Option<String>, description: Option<String>) -> Self {
        let edges = ceg
            .edges()
            .iter()
            .map(|e| EdgeRecord {
                id: e.name.clone(),
                from: ceg.position_name(e.source).to_owned(),
                to: ceg.position_name(e.target).to_owned(),
                prob: format_probability(e.prob),
                label: e.label.clone(),
            })
            .collect();
        ModelFile {
            format: MODEL_FORMAT.to_owned(),
            version: FORMAT_VERSION,
            name,
            description,
            tree: None,
            ceg: Some(CegSection {
                root: ceg.position_name(ceg.root()).to_owned(),
                sink: ceg.position_name(ceg.sink()).to_owned(),
                positions: ceg.position_names().to_vec(),
                edges,
            }),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: ModelFile = from_json(text)?;
        check_header(&file.format, file.version, MODEL_FORMAT)?;
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    /// Builds the in-memory model. Trees are returned unvalidated so that
    /// callers can report every violation.
    pub fn load(&self) -> Result<Model> {
        match (&self.tree, &self.ceg) {
            (Some(t), None) => Ok(Model::Tree(tree_from_section(t)?)),
            (None, Some(c)) => Ok(Model::Ceg(ceg_from_section(c)?)),
            _ => Err(CegError::Format("model needs exactly one of \"tree\" or \"ceg\"".into())),
        }
    }
}

fn tree_from_section(section: &TreeSection) -> Result<ProbabilityTree> {
    let mut b = TreeBuilder::new();
    for v in &section.vertices {
        b.vertex(v.clone())?;
    }
    for e in &section.edges {
        let lookup = |name: &str| {
            b.vertex_id(name).ok_or_else(|| CegError::UnknownId(format!("vertex {name:?} in edge {:?}", e.id)))
        };
        let (s, t) = (lookup(&e.from)?, lookup(&e.to)?);
        b.edge(e.id.clone(), s, t, parse_probability(&e.prob)?, e.label.clone())?;
    }
    Ok(b.build())
}

fn ceg_from_section(section: &CegSection) -> Result<TransporterCeg> {
    let index: BTreeMap<&str, usize> = section.positions.iter().enumerate().map(|(i, p)| (p.as_str(), i)).collect();
    if index.len() != section.positions.len() {
        return Err(CegError::Format("duplicate position id".into()));
    }
    let lookup = |name: &str| {
        index.get(name).map(|&i| PositionId(i)).ok_or_else(|| CegError::UnknownId(format!("position {name:?}")))
    };
    let edges = section
        .edges
        .iter()
        .map(|e| {
            Ok(CegEdge {
                name: e.id.clone(),
                source: lookup(&e.from)?,
                target: lookup(&e.to)?,
                prob: parse_probability(&e.prob)?,
                label: e.label.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    TransporterCeg::new(section.positions.clone(), edges, lookup(&section.root)?, lookup(&section.sink)?)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationFile {
    pub format: String,
    pub version: u32,
    /// Name of the model the observation refers to; informational.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// `E_Λ(w)` per position; unlisted positions are unconstrained.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_position: Option<BTreeMap<String, Vec<String>>>,
    /// `E_Λ` as a union; unlisted edges are excluded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<String>>,
    /// An explicit set of root-to-sink paths, accepted only if compatible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<Vec<Vec<String>>>,
}

impl ObservationFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: ObservationFile = from_json(text)?;
        check_header(&file.format, file.version, OBSERVATION_FORMAT)?;
        Ok(file)
    }

    pub fn from_union(ceg: &TransporterCeg, obs: &CompatibleObservation, model: Option<String>) -> Self {
        ObservationFile {
            format: OBSERVATION_FORMAT.to_owned(),
            version: FORMAT_VERSION,
            model,
            per_position: None,
            edges: Some(obs.union().iter().map(|e| ceg.edge(*e).name.clone()).collect()),
            paths: None,
        }
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    /// Resolves ids against `ceg`. Path-set observations go through the
    /// compatibility test and may come back incompatible.
    pub fn resolve(&self, ceg: &TransporterCeg) -> Result<Compatibility> {
        let edge = |name: &str| ceg.edge_by_name(name).ok_or_else(|| CegError::UnknownId(format!("edge {name:?}")));
        match (&self.per_position, &self.edges, &self.paths) {
            (Some(map), None, None) => {
                let mut sets = BTreeMap::new();
                for (pos, edges) in map {
                    let p =
                        ceg.position_by_name(pos).ok_or_else(|| CegError::UnknownId(format!("position {pos:?}")))?;
                    let set = edges.iter().map(|e| edge(e)).collect::<Result<BTreeSet<_>>>()?;
                    sets.insert(p, set);
                }
                Ok(Compatibility::Compatible(CompatibleObservation::from_edge_sets(ceg, &sets)?))
            }
            (None, Some(list), None) => {
                let ids = list.iter().map(|e| edge(e)).collect::<Result<Vec<_>>>()?;
                Ok(Compatibility::Compatible(CompatibleObservation::from_union(ceg, ids)))
            }
            (None, None, Some(paths)) => {
                let paths = paths
                    .iter()
                    .map(|p| Ok(Atom::new(p.iter().map(|e| edge(e)).collect::<Result<Vec<_>>>()?)))
                    .collect::<Result<Vec<CegPath>>>()?;
                check_compatibility(ceg, &paths)
            }
            _ => Err(CegError::Format(
                "observation needs exactly one of \"per_position\", \"edges\" or \"paths\"".into(),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionResult {
    pub id: String,
    pub phi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeResult {
    pub id: String,
    pub prob: f64,
    pub tau: f64,
    pub pi_hat: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultFile {
    pub format: String,
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub event_probability: f64,
    pub counters: OperationCounters,
    pub positions: Vec<PositionResult>,
    pub edges: Vec<EdgeResult>,
}

impl ResultFile {
    pub fn from_result(ceg: &TransporterCeg, result: &PropagationResult, model: Option<String>) -> Self {
        ResultFile {
            format: RESULT_FORMAT.to_owned(),
            version: FORMAT_VERSION,
            model,
            event_probability: result.event_probability(),
            counters: result.counters,
            positions: ceg
                .positions()
                .map(|p| PositionResult { id: ceg.position_name(p).to_owned(), phi: result.phi(p) })
                .collect(),
            edges: ceg
                .edge_ids()
                .map(|e| EdgeResult {
                    id: ceg.edge(e).name.clone(),
                    prob: ceg.edge(e).prob,
                    tau: result.tau(e),
                    pi_hat: result.pi_hat(e),
                })
                .collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: ResultFile = from_json(text)?;
        check_header(&file.format, file.version, RESULT_FORMAT)?;
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    /// Rebuilds the in-memory result against `ceg`; every position and edge
    /// of the graph must be present exactly once.
    pub fn to_result(&self, ceg: &TransporterCeg) -> Result<PropagationResult> {
        let mut phi = vec![None; ceg.position_count()];
        for p in &self.positions {
            let id = ceg.position_by_name(&p.id).ok_or_else(|| CegError::UnknownId(format!("position {:?}", p.id)))?;
            if phi[id.0].replace(p.phi).is_some() {
                return Err(CegError::Format(format!("position {:?} listed twice", p.id)));
            }
        }
        let mut tau = vec![None; ceg.edge_count()];
        let mut pi_hat = vec![0.0; ceg.edge_count()];
        for e in &self.edges {
            let id = ceg.edge_by_name(&e.id).ok_or_else(|| CegError::UnknownId(format!("edge {:?}", e.id)))?;
            if tau[id.0].replace(e.tau).is_some() {
                return Err(CegError::Format(format!("edge {:?} listed twice", e.id)));
            }
            pi_hat[id.0] = e.pi_hat;
        }
        let phi: Vec<f64> = phi
            .into_iter()
            .collect::<Option<_>>()
            .ok_or_else(|| CegError::Format("result is missing a position".into()))?;
        let tau: Vec<f64> = tau
            .into_iter()
            .collect::<Option<_>>()
            .ok_or_else(|| CegError::Format("result is missing an edge".into()))?;
        Ok(PropagationResult::from_parts(tau, phi, pi_hat, self.counters, ceg.root()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{example1_ceg, example1_tree, example2_observation};
    use crate::propagation::propagate;

    #[test]
    fn probabilities_parse_exactly() {
        assert_eq!(parse_probability("0.1").unwrap(), 0.1);
        assert_eq!(parse_probability("1").unwrap(), 1.0);
        assert_eq!(parse_probability("2.5e-1").unwrap(), 0.25);
        for bad in ["", "abc", "inf", "NaN", "0x1", " 0.5", "."] {
            assert!(parse_probability(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn tree_model_round_trips() {
        let tree = example1_tree();
        let file = ModelFile::from_tree(&tree, Some("example1".into()), None);
        let text = file.to_json();
        let back = ModelFile::parse(&text).unwrap();
        assert_eq!(back.to_json(), text);
        let Model::Tree(t) = back.load().unwrap() else { panic!() };
        assert_eq!(t.edges(), tree.edges());
    }

    #[test]
    fn ceg_model_round_trips() {
        let g = example1_ceg();
        let text = ModelFile::from_ceg(&g, None, None).to_json();
        let Model::Ceg(h) = ModelFile::parse(&text).unwrap().load().unwrap() else { panic!() };
        assert!(g.is_isomorphic(&h));
    }

    #[test]
    fn wrong_header_or_sections_are_rejected() {
        let g = example1_ceg();
        let mut file = ModelFile::from_ceg(&g, None, None);
        file.format = "other".into();
        assert!(ModelFile::parse(&file.to_json()).is_err());
        file.format = MODEL_FORMAT.into();
        file.version = 2;
        assert!(ModelFile::parse(&file.to_json()).is_err());
        file.version = 1;
        file.tree = ModelFile::from_tree(&example1_tree(), None, None).tree;
        assert!(file.load().is_err());
        assert!(ModelFile::parse("{\"format\":\"ceg-model\",\"version\":1,\"extra\":0}").is_err());
    }

    #[test]
    fn observation_forms_agree() {
        let g = example1_ceg();
        let obs = example2_observation(&g);
        let union = ObservationFile::from_union(&g, &obs, None);
        let Compatibility::Compatible(a) = union.resolve(&g).unwrap() else { panic!() };
        assert_eq!(a, obs);

        let mut per = BTreeMap::new();
        per.insert("w0".to_string(), vec!["e1".to_string(), "e2".to_string()]);
        per.insert("w3".to_string(), vec![]);
        per.insert("w4".to_string(), vec!["e10".to_string(), "e11".to_string()]);
        per.insert("w5".to_string(), vec!["e14".to_string()]);
        per.insert("w6".to_string(), vec!["e15".to_string()]);
        let file = ObservationFile { per_position: Some(per), edges: None, ..union.clone() };
        let Compatibility::Compatible(b) = file.resolve(&g).unwrap() else { panic!() };
        assert_eq!(b, obs);

        let paths: Vec<Vec<String>> =
            obs.paths_of(&g).iter().map(|p| p.edges.iter().map(|e| g.edge(*e).name.clone()).collect()).collect();
        let file = ObservationFile { paths: Some(paths), edges: None, ..union };
        let Compatibility::Compatible(c) = file.resolve(&g).unwrap() else { panic!() };
        assert_eq!(c, obs);
    }

    #[test]
    fn observation_errors() {
        let g = example1_ceg();
        let base = ObservationFile::from_union(&g, &example2_observation(&g), None);
        let unknown = ObservationFile { edges: Some(vec!["e99".into()]), ..base.clone() };
        assert!(matches!(unknown.resolve(&g), Err(CegError::UnknownId(_))));
        let misplaced = ObservationFile {
            edges: None,
            per_position: Some(BTreeMap::from([("w1".to_string(), vec!["e1".to_string()])])),
            ..base.clone()
        };
        assert!(matches!(misplaced.resolve(&g), Err(CegError::EdgeNotAtPosition { .. })));
        let both = ObservationFile { paths: Some(vec![]), ..base };
        assert!(both.resolve(&g).is_err());
    }

    #[test]
    fn result_round_trips() {
        let g = example1_ceg();
        let r = propagate(&g, &example2_observation(&g)).unwrap();
        let text = ResultFile::from_result(&g, &r, None).to_json();
        let back = ResultFile::parse(&text).unwrap();
        assert_eq!(back.to_json(), text);
        assert_eq!(back.to_result(&g).unwrap(), r);
    }
}
