//! Bottom-up analog circuit synthesis from a grid of switched universal
//! components.
//!
//! The library is organized around a small pipeline:
//!
//! * [`model`] — grid meta-topology, universal-component edge states and the
//!   mapping between flat optimization vectors and circuit structure.
//! * [`sim`] — fixed-step transient simulation via modified nodal analysis
//!   with companion models, including the continuous switch.
//! * [`objective`] — requirements cost (MSE against a target waveform),
//!   L1-regularized total loss and the box-constraint transform.
//! * [`powell`] — derivative-free minimizer (Powell's conjugate directions
//!   with Brent line search).
//! * [`relaxation`] — the continuous-relaxation design loop: grow the L1
//!   weight, eliminate dead switches, polish, realize fractional switches
//!   as resistors.
//! * [`search`] — cost-guided random topology search over discrete component
//!   modes with short/open mutation and structural dedup.
//! * [`simplify`] — netlist simplification: isolated/dangling removal,
//!   degenerate-value pruning and series/parallel merging.
//! * [`netlist`] / [`report`] — JSON and CSV interchange formats.

pub mod model;
pub mod netlist;
pub mod objective;
pub mod powell;
pub mod relaxation;
pub mod report;
pub mod search;
pub mod seeds;
pub mod sim;
pub mod simplify;

pub use model::{
    Boundary, DesignModel, EdgeState, MetaTopology, Mode, NodeId, ParamBounds, RelaxedEdge,
    SourceSpec, SwitchedBranch,
};
pub use objective::{requirements_cost, total_loss, LossValue};
pub use powell::{minimize, OptimizerConfig, OptimizerResult};
pub use relaxation::{
    eliminate_zero_switches, realize_switches, run_relaxation, RelaxationConfig, RelaxationTrace,
};
pub use search::{canonical_hash, mutate, run_search, SearchConfig, SearchOutcome};
pub use sim::{check_feasible, switch_conductance, transient, Feasibility, SimConfig, Waveform};
pub use simplify::{simplify_fixpoint, ComponentGraph, SimplifyThresholds};
