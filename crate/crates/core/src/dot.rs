//! Graphviz output.

use std::fmt::Write;

use crate::ceg::TransporterCeg;
use crate::propagation::PropagationResult;

/// Renders the graph as DOT. Edge labels carry the edge name and `π`; with
/// a propagation result they also carry `τ` and `π̂`, and position labels
/// carry `Φ`. Output depends only on the inputs.
pub fn export_dot(ceg: &TransporterCeg, annotations: Option<&PropagationResult>) -> String {
    let mut out = String::new();
    out.push_str("digraph ceg {\n  rankdir=LR;\n");
    for p in ceg.position_order() {
        let name = ceg.position_name(p);
        let mut label = escape(name);
        if let Some(r) = annotations {
            let _ = write!(label, "\\nphi={}", r.phi(p));
        }
        let shape = if p == ceg.sink() { "doublecircle" } else { "circle" };
        let _ = writeln!(out, "  {} [label=\"{}\", shape={}];", quote(name), label, shape);
    }
    for e in ceg.edge_ids() {
        let edge = ceg.edge(e);
        let mut label = format!("{}: pi={}", escape(&edge.name), edge.prob);
        if let Some(r) = annotations {
            let _ = write!(label, " tau={} pi_hat={}", r.tau(e), r.pi_hat(e));
        }
        if let Some(l) = &edge.label {
            let _ = write!(label, "\\n{}", escape(l));
        }
        let _ = writeln!(
            out,
            "  {} -> {} [label=\"{}\"];",
            quote(ceg.position_name(edge.source)),
            quote(ceg.position_name(edge.target)),
            label
        );
    }
    out.push_str("}\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n")
}

fn quote(s: &str) -> String {
    format!("\"{}\"", escape(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{example1_ceg, example2_observation};
    use crate::propagation::propagate;

    #[test]
    fn example1_has_eight_nodes_and_sixteen_edges() {
        let g = example1_ceg();
        let dot = export_dot(&g, None);
        assert_eq!(dot.lines().filter(|l| l.contains("shape=")).count(), 8);
        assert_eq!(dot.lines().filter(|l| l.contains(" -> ")).count(), 16);
        assert!(!dot.contains("tau="));
        assert!(dot.contains("\"w0\" -> \"w1\" [label=\"e1: pi=0.5"));
    }

    #[test]
    fn annotated_output_is_deterministic() {
        let g = example1_ceg();
        let r = propagate(&g, &example2_observation(&g)).unwrap();
        let a = export_dot(&g, Some(&r));
        assert_eq!(a, export_dot(&g, Some(&r)));
        assert!(a.contains("phi=0.682"));
        assert!(a.contains("pi_hat="));
    }
}
