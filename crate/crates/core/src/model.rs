//! Circuit model: grid meta-topology, universal-component edge states, the
//! boundary scenario and the mapping between flat variable vectors and
//! circuit structure.
//!
//! A universal component occupies one grid edge and contains four switched
//! branches in parallel: resistor, inductor, capacitor and a bare short
//! connection. In relaxed form every branch carries a continuous switch in
//! [0, 1]; in discrete form the edge is committed to a single [`Mode`].

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::sim::Waveform;

/// Default residual switch parameter: closed resistance epsilon ohms, open
/// resistance 1/epsilon ohms.
pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Default load resistance for generated scenarios.
pub const DEFAULT_LOAD_OHMS: f64 = 1000.0;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid grid dimensions {rows}x{cols}: need rows >= 1 and cols >= 2")]
    InvalidGrid { rows: usize, cols: usize },
    #[error("variable vector has length {got}, expected {expected}")]
    VariableLength { got: usize, expected: usize },
    #[error("model validation failed: {0}")]
    Invalid(String),
}

/// Identifier of a circuit node. Node 0 is always the ground reference of
/// the boundary scenario.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct NodeId(pub usize);

pub const GROUND: NodeId = NodeId(0);

/// Discrete operating mode of a universal component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum Mode {
    Open,
    Short,
    Resistor(f64),
    Inductor(f64),
    Capacitor(f64),
}

impl Mode {
    /// Parameter value for component-bearing modes.
    pub fn param(&self) -> Option<f64> {
        match *self {
            Mode::Resistor(v) | Mode::Inductor(v) | Mode::Capacitor(v) => Some(v),
            Mode::Open | Mode::Short => None,
        }
    }

    pub fn tag_name(&self) -> &'static str {
        match self {
            Mode::Open => "open",
            Mode::Short => "short",
            Mode::Resistor(_) => "resistor",
            Mode::Inductor(_) => "inductor",
            Mode::Capacitor(_) => "capacitor",
        }
    }
}

/// One switched element branch of a relaxed universal component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchedBranch {
    /// Element parameter (ohms, henries or farads).
    pub value: f64,
    /// Continuous switch control in [0, 1].
    pub switch: f64,
}

/// Relaxed state of a universal component. Branches eliminated by the
/// design loop are `None`; an edge with no branches left behaves as open.
// deny_unknown_fields keeps the untagged EdgeState decode unambiguous: a
// serialized Mode carries a "mode" key, which this struct rejects.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxedEdge {
    pub resistor: Option<SwitchedBranch>,
    pub inductor: Option<SwitchedBranch>,
    pub capacitor: Option<SwitchedBranch>,
    /// Switch of the bare short-connection branch.
    pub short: Option<f64>,
}

impl RelaxedEdge {
    /// Fresh edge with all four branches present, switches at `switch` and
    /// parameters as given.
    pub fn full(r: f64, l: f64, c: f64, switch: f64) -> Self {
        RelaxedEdge {
            resistor: Some(SwitchedBranch { value: r, switch }),
            inductor: Some(SwitchedBranch { value: l, switch }),
            capacitor: Some(SwitchedBranch { value: c, switch }),
            short: Some(switch),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.resistor.is_none()
            && self.inductor.is_none()
            && self.capacitor.is_none()
            && self.short.is_none()
    }

    /// Number of optimization variables carried by this edge: value + switch
    /// per element branch, switch only for the short branch.
    pub fn variable_count(&self) -> usize {
        2 * (self.resistor.is_some() as usize
            + self.inductor.is_some() as usize
            + self.capacitor.is_some() as usize)
            + self.short.is_some() as usize
    }

    /// Sum of all present switch values (the L1 sparsity term contribution).
    pub fn switch_sum(&self) -> f64 {
        self.resistor.map_or(0.0, |b| b.switch)
            + self.inductor.map_or(0.0, |b| b.switch)
            + self.capacitor.map_or(0.0, |b| b.switch)
            + self.short.unwrap_or(0.0)
    }
}

/// Per-edge state: either a relaxed universal component or a committed mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EdgeState {
    Relaxed(RelaxedEdge),
    Mode(Mode),
}

impl EdgeState {
    pub fn variable_count(&self) -> usize {
        match self {
            EdgeState::Relaxed(edge) => edge.variable_count(),
            EdgeState::Mode(mode) => usize::from(mode.param().is_some()),
        }
    }

    /// True when the edge contributes no branches at all.
    pub fn is_open(&self) -> bool {
        match self {
            EdgeState::Relaxed(edge) => edge.is_empty(),
            EdgeState::Mode(mode) => matches!(mode, Mode::Open),
        }
    }
}

/// An undirected meta-topology edge hosting one universal component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopoEdge {
    pub id: usize,
    pub a: NodeId,
    pub b: NodeId,
}

/// The four boundary terminals of the scenario harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Boundary {
    pub source_pos: NodeId,
    pub source_neg: NodeId,
    pub load_pos: NodeId,
    pub load_neg: NodeId,
}

/// Grid shape metadata, present when the topology was generated as a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDims {
    pub rows: usize,
    pub cols: usize,
}

/// Graph of nodes and universal-component edges plus boundary terminals.
///
/// Node 0 is the shared ground rail of the boundary scenario; grid nodes are
/// numbered row-major starting at 1. Lower layers accept arbitrary graphs,
/// not only grids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaTopology {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridDims>,
    pub nodes: Vec<NodeId>,
    pub edges: Vec<TopoEdge>,
    pub boundary: Boundary,
}

impl MetaTopology {
    /// Build a topology from explicit edges; the node list is inferred.
    pub fn from_edges(edges: Vec<(usize, usize)>, boundary: Boundary) -> Result<Self, ModelError> {
        let edges: Vec<TopoEdge> = edges
            .into_iter()
            .enumerate()
            .map(|(id, (a, b))| TopoEdge {
                id,
                a: NodeId(a),
                b: NodeId(b),
            })
            .collect();
        let mut nodes: Vec<NodeId> = edges
            .iter()
            .flat_map(|e| [e.a, e.b])
            .chain([
                boundary.source_pos,
                boundary.source_neg,
                boundary.load_pos,
                boundary.load_neg,
            ])
            .collect();
        nodes.sort();
        nodes.dedup();
        let topo = MetaTopology {
            grid: None,
            nodes,
            edges,
            boundary,
        };
        topo.validate()?;
        Ok(topo)
    }

    /// Number of grid points (excludes the ground rail).
    pub fn grid_node_count(&self) -> usize {
        self.nodes.iter().filter(|n| **n != GROUND).count()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let b = &self.boundary;
        for (name, node) in [
            ("source_pos", b.source_pos),
            ("source_neg", b.source_neg),
            ("load_pos", b.load_pos),
            ("load_neg", b.load_neg),
        ] {
            if !self.nodes.contains(&node) {
                return Err(ModelError::Invalid(format!(
                    "boundary terminal {name} = {} is not a topology node",
                    node.0
                )));
            }
        }
        if b.source_pos == b.source_neg {
            return Err(ModelError::Invalid("source terminals coincide".into()));
        }
        if b.load_pos == b.load_neg {
            return Err(ModelError::Invalid("load terminals coincide".into()));
        }
        let mut ids: Vec<usize> = self.edges.iter().map(|e| e.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.edges.len() {
            return Err(ModelError::Invalid("duplicate edge ids".into()));
        }
        for e in &self.edges {
            if e.a == e.b {
                return Err(ModelError::Invalid(format!("edge {} is a self-loop", e.id)));
            }
            if !self.nodes.contains(&e.a) || !self.nodes.contains(&e.b) {
                return Err(ModelError::Invalid(format!(
                    "edge {} references unknown node",
                    e.id
                )));
            }
        }
        Ok(())
    }
}

/// Full rows x cols grid of universal components.
///
/// Grid node (r, c) gets id `1 + r*cols + c`; id 0 is the external ground
/// rail shared by the source and load returns. Edges are ordered row-major,
/// horizontal edges before the vertical edges leaving each row, so variable
/// vectors and seeds are portable across runs.
///
/// The default boundary attaches the source between the left-edge midpoint
/// and ground and the load between the right-edge midpoint and ground.
pub fn generate_grid(rows: usize, cols: usize) -> Result<MetaTopology, ModelError> {
    if rows < 1 || cols < 2 {
        return Err(ModelError::InvalidGrid { rows, cols });
    }
    let node_id = |r: usize, c: usize| NodeId(1 + r * cols + c);
    let mut nodes = vec![GROUND];
    nodes.extend((0..rows).flat_map(|r| (0..cols).map(move |c| node_id(r, c))));

    let mut edges = Vec::with_capacity(rows * (cols - 1) + rows.saturating_sub(1) * cols);
    let mut next_id = 0;
    for r in 0..rows {
        for c in 0..cols - 1 {
            edges.push(TopoEdge {
                id: next_id,
                a: node_id(r, c),
                b: node_id(r, c + 1),
            });
            next_id += 1;
        }
        if r + 1 < rows {
            for c in 0..cols {
                edges.push(TopoEdge {
                    id: next_id,
                    a: node_id(r, c),
                    b: node_id(r + 1, c),
                });
                next_id += 1;
            }
        }
    }

    let mid = rows / 2;
    let boundary = Boundary {
        source_pos: node_id(mid, 0),
        source_neg: GROUND,
        load_pos: node_id(mid, cols - 1),
        load_neg: GROUND,
    };
    Ok(MetaTopology {
        grid: Some(GridDims { rows, cols }),
        nodes,
        edges,
        boundary,
    })
}

/// Excitation applied between the source terminals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    /// Constant voltage from t = 0 on.
    Step { amplitude: f64 },
    /// Arbitrary sampled voltage, held by linear interpolation.
    Samples { waveform: Waveform },
}

impl SourceSpec {
    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            SourceSpec::Step { amplitude } => *amplitude,
            SourceSpec::Samples { waveform } => waveform.value_at(t),
        }
    }

    /// Upper bound on the source magnitude, used by sanity checks.
    pub fn amplitude(&self) -> f64 {
        match self {
            SourceSpec::Step { amplitude } => amplitude.abs(),
            SourceSpec::Samples { waveform } => waveform
                .samples
                .iter()
                .fold(0.0_f64, |m, v| m.max(v.abs())),
        }
    }
}

/// Log-uniform sampling ranges for component parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub resistance: (f64, f64),
    pub inductance: (f64, f64),
    pub capacitance: (f64, f64),
}

impl Default for ParamBounds {
    fn default() -> Self {
        ParamBounds {
            resistance: (0.1, 1e5),
            inductance: (1e-6, 10.0),
            capacitance: (1e-9, 1e-1),
        }
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    assert!(lo > 0.0 && hi >= lo, "bounds must be positive and ordered");
    if lo == hi {
        return lo;
    }
    let u: f64 = rng.gen();
    (lo.ln() + u * (hi.ln() - lo.ln())).exp()
}

/// A simulatable unit: topology, per-edge states and the boundary scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignModel {
    pub topology: MetaTopology,
    /// Edge id -> state; exactly one entry per topology edge.
    pub edge_states: BTreeMap<usize, EdgeState>,
    pub source: SourceSpec,
    pub load_resistance: f64,
    /// Residual switch parameter in (0, 1).
    pub epsilon: f64,
}

impl DesignModel {
    pub fn new(
        topology: MetaTopology,
        edge_states: BTreeMap<usize, EdgeState>,
        source: SourceSpec,
        load_resistance: f64,
        epsilon: f64,
    ) -> Result<Self, ModelError> {
        let model = DesignModel {
            topology,
            edge_states,
            source,
            load_resistance,
            epsilon,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.topology.validate()?;
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(ModelError::Invalid(format!(
                "epsilon {} outside (0, 1)",
                self.epsilon
            )));
        }
        if !(self.load_resistance > 0.0 && self.load_resistance.is_finite()) {
            return Err(ModelError::Invalid("load resistance must be positive".into()));
        }
        if self.edge_states.len() != self.topology.edges.len() {
            return Err(ModelError::Invalid(format!(
                "{} edge states for {} edges",
                self.edge_states.len(),
                self.topology.edges.len()
            )));
        }
        for e in &self.topology.edges {
            let state = self
                .edge_states
                .get(&e.id)
                .ok_or_else(|| ModelError::Invalid(format!("edge {} has no state", e.id)))?;
            if let EdgeState::Relaxed(edge) = state {
                for s in [
                    edge.resistor.map(|b| b.switch),
                    edge.inductor.map(|b| b.switch),
                    edge.capacitor.map(|b| b.switch),
                    edge.short,
                ]
                .into_iter()
                .flatten()
                {
                    if !(0.0..=1.0).contains(&s) {
                        return Err(ModelError::Invalid(format!(
                            "switch value {s} on edge {} outside [0, 1]",
                            e.id
                        )));
                    }
                }
            }
            if let Some(p) = match state {
                EdgeState::Mode(m) => m.param(),
                EdgeState::Relaxed(_) => None,
            } {
                if !(p > 0.0 && p.is_finite()) {
                    return Err(ModelError::Invalid(format!(
                        "parameter {p} on edge {} must be positive",
                        e.id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Every edge assigned an independently drawn discrete mode, uniform over
    /// the five tags, with parameters drawn log-uniformly from `bounds`.
    /// Deterministic for a fixed seed.
    pub fn sample_random(
        topology: MetaTopology,
        source: SourceSpec,
        load_resistance: f64,
        epsilon: f64,
        seed: u64,
        bounds: &ParamBounds,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edge_states = topology
            .edges
            .iter()
            .map(|e| {
                let mode = match rng.gen_range(0..5u32) {
                    0 => Mode::Open,
                    1 => Mode::Short,
                    2 => Mode::Resistor(log_uniform(&mut rng, bounds.resistance)),
                    3 => Mode::Inductor(log_uniform(&mut rng, bounds.inductance)),
                    _ => Mode::Capacitor(log_uniform(&mut rng, bounds.capacitance)),
                };
                (e.id, EdgeState::Mode(mode))
            })
            .collect();
        DesignModel {
            topology,
            edge_states,
            source,
            load_resistance,
            epsilon,
        }
    }

    /// Relaxed starting point for the continuous design loop: every edge has
    /// all four branches, all switches at 0.5 and parameters drawn
    /// log-uniformly from `bounds`.
    pub fn relaxed_init(
        topology: MetaTopology,
        source: SourceSpec,
        load_resistance: f64,
        epsilon: f64,
        seed: u64,
        bounds: &ParamBounds,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edge_states = topology
            .edges
            .iter()
            .map(|e| {
                let r = log_uniform(&mut rng, bounds.resistance);
                let l = log_uniform(&mut rng, bounds.inductance);
                let c = log_uniform(&mut rng, bounds.capacitance);
                (e.id, EdgeState::Relaxed(RelaxedEdge::full(r, l, c, 0.5)))
            })
            .collect();
        DesignModel {
            topology,
            edge_states,
            source,
            load_resistance,
            epsilon,
        }
    }

    /// Number of optimization variables: per relaxed edge, value + switch for
    /// each surviving element branch plus one per short branch (7 for a full
    /// edge); per discrete edge, one for each parameter-bearing mode.
    pub fn variable_count(&self) -> usize {
        self.edge_states.values().map(EdgeState::variable_count).sum()
    }

    /// Number of edges committed to a component-bearing mode (R, L or C).
    pub fn component_edge_count(&self) -> usize {
        self.edge_states
            .values()
            .filter(|s| matches!(s, EdgeState::Mode(m) if m.param().is_some()))
            .count()
    }

    /// Sum of all continuous switch values (the L1 term).
    pub fn switch_sum(&self) -> f64 {
        self.edge_states
            .values()
            .map(|s| match s {
                EdgeState::Relaxed(edge) => edge.switch_sum(),
                EdgeState::Mode(_) => 0.0,
            })
            .sum()
    }

    /// Flatten all variables into a vector, edges in ascending id order;
    /// within a relaxed edge: (value, switch) for R, L, C branches in that
    /// order, then the short switch.
    pub fn pack_variables(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.variable_count());
        for state in self.edge_states.values() {
            match state {
                EdgeState::Relaxed(edge) => {
                    for branch in [&edge.resistor, &edge.inductor, &edge.capacitor] {
                        if let Some(b) = branch {
                            out.push(b.value);
                            out.push(b.switch);
                        }
                    }
                    if let Some(s) = edge.short {
                        out.push(s);
                    }
                }
                EdgeState::Mode(mode) => {
                    if let Some(p) = mode.param() {
                        out.push(p);
                    }
                }
            }
        }
        out
    }

    /// Inverse of [`pack_variables`]: produce a model with the same structure
    /// and the given variable values. Switch entries are clamped into [0, 1]
    /// to absorb rounding from upstream transforms.
    pub fn unpack_variables(&self, vars: &[f64]) -> Result<DesignModel, ModelError> {
        let mut model = self.clone();
        model.unpack_variables_into(vars)?;
        Ok(model)
    }

    /// In-place variant of [`unpack_variables`] for hot loops.
    pub fn unpack_variables_into(&mut self, vars: &[f64]) -> Result<(), ModelError> {
        let expected = self.variable_count();
        if vars.len() != expected {
            return Err(ModelError::VariableLength {
                got: vars.len(),
                expected,
            });
        }
        let mut it = vars.iter().copied();
        let mut next = || it.next().expect("length checked above");
        for state in self.edge_states.values_mut() {
            match state {
                EdgeState::Relaxed(edge) => {
                    for branch in [&mut edge.resistor, &mut edge.inductor, &mut edge.capacitor] {
                        if let Some(b) = branch {
                            b.value = next();
                            b.switch = next().clamp(0.0, 1.0);
                        }
                    }
                    if let Some(s) = &mut edge.short {
                        *s = next().clamp(0.0, 1.0);
                    }
                }
                EdgeState::Mode(mode) => match mode {
                    Mode::Resistor(v) | Mode::Inductor(v) | Mode::Capacitor(v) => *v = next(),
                    Mode::Open | Mode::Short => {}
                },
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grid_5x6_counts() {
        let topo = generate_grid(5, 6).unwrap();
        assert_eq!(topo.grid_node_count(), 30);
        assert_eq!(topo.edges.len(), 49);
    }

    #[test]
    fn grid_minimal_and_square() {
        let topo = generate_grid(1, 2).unwrap();
        assert_eq!(topo.grid_node_count(), 2);
        assert_eq!(topo.edges.len(), 1);

        let topo = generate_grid(2, 2).unwrap();
        assert_eq!(topo.grid_node_count(), 4);
        assert_eq!(topo.edges.len(), 4);
    }

    #[test]
    fn grid_rejects_bad_dims() {
        assert!(generate_grid(0, 5).is_err());
        assert!(generate_grid(3, 1).is_err());
        assert!(generate_grid(1, 1).is_err());
    }

    #[test]
    fn boundary_terminals_are_distinct_nodes() {
        for (rows, cols) in [(1, 2), (2, 2), (2, 3), (3, 3), (5, 6), (1, 7)] {
            let topo = generate_grid(rows, cols).unwrap();
            topo.validate().unwrap();
            assert_eq!(topo.boundary.source_neg, GROUND);
            assert_eq!(topo.boundary.load_neg, GROUND);
            assert_ne!(topo.boundary.source_pos, topo.boundary.load_pos);
        }
    }

    fn test_model(rows: usize, cols: usize, seed: u64) -> DesignModel {
        DesignModel::relaxed_init(
            generate_grid(rows, cols).unwrap(),
            SourceSpec::Step { amplitude: 1.0 },
            DEFAULT_LOAD_OHMS,
            DEFAULT_EPSILON,
            seed,
            &ParamBounds::default(),
        )
    }

    #[test]
    fn relaxed_5x6_has_343_variables() {
        assert_eq!(test_model(5, 6, 0).variable_count(), 343);
    }

    #[test]
    fn single_edge_has_7_variables() {
        assert_eq!(test_model(1, 2, 0).variable_count(), 7);
    }

    #[test]
    fn discrete_count_is_parameter_bearing_edges() {
        let topo = MetaTopology::from_edges(
            vec![(1, 2), (2, 3), (3, 4)],
            Boundary {
                source_pos: NodeId(1),
                source_neg: GROUND,
                load_pos: NodeId(4),
                load_neg: GROUND,
            },
        )
        .unwrap();
        let states = BTreeMap::from([
            (0, EdgeState::Mode(Mode::Short)),
            (1, EdgeState::Mode(Mode::Open)),
            (2, EdgeState::Mode(Mode::Resistor(5.0))),
        ]);
        let model = DesignModel::new(
            topo,
            states,
            SourceSpec::Step { amplitude: 1.0 },
            1.0,
            DEFAULT_EPSILON,
        )
        .unwrap();
        assert_eq!(model.variable_count(), 1);
    }

    #[test]
    fn pack_unpack_round_trip() {
        let model = test_model(2, 3, 7);
        let v = model.pack_variables();
        assert_eq!(v.len(), 49);
        let back = model.unpack_variables(&v).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.pack_variables(), v);
    }

    #[test]
    fn unpack_rejects_length_mismatch() {
        let model = test_model(1, 2, 0);
        assert!(model.unpack_variables(&[1.0; 6]).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let topo = generate_grid(3, 3).unwrap();
        let mk = || {
            DesignModel::sample_random(
                topo.clone(),
                SourceSpec::Step { amplitude: 1.0 },
                1.0,
                DEFAULT_EPSILON,
                1234,
                &ParamBounds::default(),
            )
        };
        assert_eq!(mk(), mk());
    }

    #[test]
    fn mode_sampling_is_uniform() {
        // 10k draws of a single edge; each tag should land near 20%.
        let topo = generate_grid(1, 2).unwrap();
        let mut counts = [0usize; 5];
        for seed in 0..10_000 {
            let model = DesignModel::sample_random(
                topo.clone(),
                SourceSpec::Step { amplitude: 1.0 },
                1.0,
                DEFAULT_EPSILON,
                seed,
                &ParamBounds::default(),
            );
            let idx = match model.edge_states[&0] {
                EdgeState::Mode(Mode::Open) => 0,
                EdgeState::Mode(Mode::Short) => 1,
                EdgeState::Mode(Mode::Resistor(_)) => 2,
                EdgeState::Mode(Mode::Inductor(_)) => 3,
                EdgeState::Mode(Mode::Capacitor(_)) => 4,
                EdgeState::Relaxed(_) => unreachable!(),
            };
            counts[idx] += 1;
        }
        for &n in &counts {
            let freq = n as f64 / 10_000.0;
            assert!((freq - 0.2).abs() <= 0.015, "tag frequency {freq} off uniform");
        }
    }

    #[test]
    fn degenerate_bounds_pin_parameter() {
        let topo = generate_grid(1, 2).unwrap();
        let bounds = ParamBounds {
            resistance: (1.0, 1.0),
            ..ParamBounds::default()
        };
        for seed in 0..50 {
            let model = DesignModel::sample_random(
                topo.clone(),
                SourceSpec::Step { amplitude: 1.0 },
                1.0,
                DEFAULT_EPSILON,
                seed,
                &bounds,
            );
            if let EdgeState::Mode(Mode::Resistor(v)) = model.edge_states[&0] {
                assert_eq!(v, 1.0);
            }
        }
    }

    proptest! {
        #[test]
        fn grid_edge_count_formula(rows in 1usize..8, cols in 2usize..8) {
            let topo = generate_grid(rows, cols).unwrap();
            // Direct enumeration oracle: count adjacent grid-point pairs.
            let mut expected = 0;
            for r in 0..rows {
                for c in 0..cols {
                    if c + 1 < cols { expected += 1; }
                    if r + 1 < rows { expected += 1; }
                }
            }
            prop_assert_eq!(topo.edges.len(), expected);
            prop_assert_eq!(topo.edges.len(), rows * (cols - 1) + (rows - 1) * cols);
            prop_assert_eq!(topo.grid_node_count(), rows * cols);
        }

        #[test]
        fn pack_unpack_bijection(seed in 0u64..500, vals in proptest::collection::vec(0.0f64..1.0, 49)) {
            let model = test_model(2, 3, seed);
            // Map raw values into plausible parameters/switches first.
            let packed = model.pack_variables();
            let mixed: Vec<f64> = packed.iter().zip(&vals).map(|(p, v)| {
                if *p <= 1.0 { *v } else { *p * (0.5 + v) }
            }).collect();
            let rebuilt = model.unpack_variables(&mixed).unwrap();
            let repacked = rebuilt.pack_variables();
            prop_assert_eq!(repacked, mixed);
        }
    }
}
