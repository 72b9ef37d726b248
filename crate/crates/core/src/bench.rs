//! Storage and operation-count reports.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ceg::TransporterCeg;
use crate::error::Result;
use crate::observation::CompatibleObservation;
use crate::propagation::{propagate, OperationCounters};

/// Junction-tree figures published for the treatment example. They are
/// quoted for comparison only; nothing here computes them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportedBnFigures {
    pub junction_tree_operations: u64,
    pub cells: u64,
    pub zero_cells: u64,
    pub note: String,
}

impl ReportedBnFigures {
    pub fn treatment_example() -> Self {
        ReportedBnFigures {
            junction_tree_operations: 43,
            cells: 27,
            zero_cells: 14,
            note: "reported, not recomputed".to_owned(),
        }
    }
}

/// Model-selection bound check: `edges <= M(1+2n)`, `positions <= 2+Mn`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub n: usize,
    pub states: usize,
    pub edges: usize,
    pub edge_bound: usize,
    pub positions: usize,
    pub position_bound: usize,
    pub pass: bool,
}

impl BoundCheck {
    pub fn for_model_selection(n: usize, ceg: &TransporterCeg) -> Self {
        let (edge_bound, position_bound) = crate::generate::model_selection_bounds(n);
        let edges = ceg.edge_count();
        let positions = ceg.position_count();
        BoundCheck {
            n,
            states: crate::generate::model_selection_states(n),
            edges,
            edge_bound,
            positions,
            position_bound,
            pass: edges <= edge_bound && positions <= position_bound,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub family: String,
    /// Non-sink positions, `#(W(C) \ {w∞})`.
    pub position_cells: usize,
    /// One cell per edge probability, `#(E(C))`.
    pub edge_cells: usize,
    /// `position_cells + edge_cells`.
    pub storage_cells: usize,
    /// Root-to-sink path count, saturating.
    pub paths: u64,
    pub event_probability: f64,
    pub counters: OperationCounters,
    pub total_operations: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reported_bn: Option<ReportedBnFigures>,
    /// Wall time of the propagation, only recorded on request since it
    /// breaks byte-for-byte reproducibility.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_us: Option<u64>,
}

pub fn bench_report(
    family: &str,
    ceg: &TransporterCeg,
    obs: &CompatibleObservation,
    timed: bool,
) -> Result<BenchReport> {
    let start = Instant::now();
    let result = propagate(ceg, obs)?;
    let elapsed = start.elapsed();
    let position_cells = ceg.position_count() - 1;
    Ok(BenchReport {
        family: family.to_owned(),
        position_cells,
        edge_cells: ceg.edge_count(),
        storage_cells: position_cells + ceg.edge_count(),
        paths: u64::try_from(ceg.path_count()).unwrap_or(u64::MAX),
        event_probability: result.event_probability(),
        counters: result.counters,
        total_operations: result.counters.total(),
        bounds: None,
        reported_bn: None,
        elapsed_us: timed.then_some(elapsed.as_micros() as u64),
    })
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "family: {}", self.family)?;
        writeln!(
            f,
            "storage: {} edge cells ({} with {} position cells)",
            self.edge_cells, self.storage_cells, self.position_cells
        )?;
        writeln!(f, "paths: {}", self.paths)?;
        writeln!(f, "P(observation): {}", self.event_probability)?;
        let c = &self.counters;
        writeln!(
            f,
            "operations: {} ({} backward edges, {} backward vertices, {} forward edges)",
            self.total_operations, c.backward_edge_ops, c.backward_vertex_ops, c.forward_edge_ops
        )?;
        if let Some(b) = &self.bounds {
            writeln!(
                f,
                "bounds n={} M={}: edges {} <= {}, positions {} <= {}: {}",
                b.n,
                b.states,
                b.edges,
                b.edge_bound,
                b.positions,
                b.position_bound,
                if b.pass { "PASS" } else { "FAIL" }
            )?;
        }
        if let Some(bn) = &self.reported_bn {
            writeln!(
                f,
                "BN junction tree ({}): {} operations, {} cells ({} zero)",
                bn.note, bn.junction_tree_operations, bn.cells, bn.zero_cells
            )?;
        }
        if let Some(us) = self.elapsed_us {
            writeln!(f, "propagation time: {us} us")?;
        }
        Ok(())
    }
}
