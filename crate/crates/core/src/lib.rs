//! Exact inference on asymmetric discrete models through transporter chain
//! event graphs.
//!
//! A [`ProbabilityTree`] is collapsed into a [`TransporterCeg`] by merging
//! situations with identical rooted subtrees into positions. Evidence given
//! as per-position edge subsets ([`CompatibleObservation`]) is then
//! propagated with a single collect pass (potentials and emphases, leaves to
//! root) and a single distribute pass (revised edge probabilities, root to
//! leaves). The [`oracle`] module conditions by brute-force path enumeration
//! and is used throughout the tests to check propagation.
//!
//! ```
//! use ceg::generate::{example1_ceg, example2_observation};
//! use ceg::propagation::propagate;
//!
//! let g = example1_ceg();
//! let result = propagate(&g, &example2_observation(&g)).unwrap();
//! assert!((result.event_probability() - 0.682).abs() < 1e-12);
//! ```

pub mod bench;
pub mod ceg;
pub mod dot;
pub mod error;
pub mod generate;
pub mod io;
pub mod observation;
pub mod oracle;
pub mod positions;
pub mod propagation;
pub mod tree;

pub use crate::ceg::{CegEdge, CegEdgeId, CegPath, EdgeOrdering, PositionId, TransporterCeg};
pub use crate::error::{CegError, Result};
pub use crate::observation::{check_compatibility, Compatibility, CompatibleObservation};
pub use crate::positions::{
    build_transporter_ceg, compute_positions, minimize_ceg, PositionOptions, PositionPartition,
};
pub use crate::propagation::{propagate, OperationCounters, PropagationResult, ReducedCeg};
pub use crate::tree::{Atom, ProbabilityTree, TreeAtom, TreeBuilder, ValidationReport};
