//! Netlist simplification on a component multigraph: vertices are
//! connection points, edges are components. Source and Load edges anchor
//! the boundary and are never removed or merged.
//!
//! Passes: drop components not connected to the boundary, drop components
//! lying on no cycle (they carry zero current by leaf-node current
//! balance), prune degenerate values, and merge compatible series/parallel
//! pairs with exact equivalent parameters.

use std::collections::BTreeMap;

use crate::model::{Boundary, DesignModel, EdgeState, MetaTopology, Mode, NodeId, SourceSpec};
use crate::sim::{Circuit, Element, SimConfig, SimError, TransientDetail};

#[derive(Debug, thiserror::Error)]
pub enum SimplifyError {
    #[error("source and load are in different connected components")]
    BoundarySplit,
    #[error("contraction would merge the terminals of a boundary edge")]
    BoundaryContraction,
    #[error("graph must contain exactly one source and one load edge")]
    MalformedBoundary,
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Resistor,
    Inductor,
    Capacitor,
    Source,
    Load,
}

impl ElementKind {
    pub fn is_boundary(&self) -> bool {
        matches!(self, ElementKind::Source | ElementKind::Load)
    }

    fn letter(&self) -> &'static str {
        match self {
            ElementKind::Resistor => "R",
            ElementKind::Inductor => "L",
            ElementKind::Capacitor => "C",
            ElementKind::Source => "source",
            ElementKind::Load => "load",
        }
    }
}

/// One component edge; `a` is the positive terminal for Source and Load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub kind: ElementKind,
    pub value: f64,
    pub a: usize,
    pub b: usize,
}

/// Multigraph of components plus the source excitation.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentGraph {
    pub source_spec: SourceSpec,
    pub edges: Vec<Component>,
}

/// Value thresholds for [`prune_degenerate`]: resistors below
/// `r_short_below` are contracted, capacitors below `c_open_below` and
/// resistors with conductance below `g_open_below` are deleted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplifyThresholds {
    pub r_short_below: f64,
    pub c_open_below: f64,
    pub g_open_below: f64,
}

impl SimplifyThresholds {
    /// Defaults scaled to the switch residual: residual shorts (eps ohms)
    /// collapse, residual opens (1/eps ohms) disappear.
    pub fn for_epsilon(epsilon: f64) -> SimplifyThresholds {
        SimplifyThresholds {
            r_short_below: 10.0 * epsilon,
            c_open_below: 1e-12,
            g_open_below: 10.0 * epsilon,
        }
    }

    /// Thresholds that only cut values far outside any physical range, so
    /// simplification preserves behavior to solver precision.
    pub fn conservative() -> SimplifyThresholds {
        SimplifyThresholds {
            r_short_below: 1e-12,
            c_open_below: 1e-18,
            g_open_below: 1e-15,
        }
    }
}

impl Default for SimplifyThresholds {
    fn default() -> Self {
        SimplifyThresholds::for_epsilon(crate::model::DEFAULT_EPSILON)
    }
}

impl ComponentGraph {
    pub fn new(source_spec: SourceSpec) -> ComponentGraph {
        ComponentGraph {
            source_spec,
            edges: Vec::new(),
        }
    }

    pub fn add(&mut self, kind: ElementKind, value: f64, a: usize, b: usize) {
        self.edges.push(Component { kind, value, a, b });
    }

    fn single(&self, kind: ElementKind) -> Result<&Component, SimplifyError> {
        let mut found = None;
        for e in &self.edges {
            if e.kind == kind {
                if found.is_some() {
                    return Err(SimplifyError::MalformedBoundary);
                }
                found = Some(e);
            }
        }
        found.ok_or(SimplifyError::MalformedBoundary)
    }

    pub fn source_edge(&self) -> Result<&Component, SimplifyError> {
        self.single(ElementKind::Source)
    }

    pub fn load_edge(&self) -> Result<&Component, SimplifyError> {
        self.single(ElementKind::Load)
    }

    /// (resistors, inductors, capacitors), boundary excluded.
    pub fn component_counts(&self) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        for e in &self.edges {
            match e.kind {
                ElementKind::Resistor => counts.0 += 1,
                ElementKind::Inductor => counts.1 += 1,
                ElementKind::Capacitor => counts.2 += 1,
                _ => {}
            }
        }
        counts
    }

    pub fn component_count(&self) -> usize {
        let (r, l, c) = self.component_counts();
        r + l + c
    }

    /// Lower to a primitive circuit; component edges are stamped in list
    /// order and the load resistor last, matching the lowering of a design
    /// model so realized netlists solve through identical matrices.
    pub fn to_circuit(&self) -> Result<Circuit, SimplifyError> {
        let source = *self.source_edge()?;
        let load = *self.load_edge()?;
        let mut circuit = Circuit::new(
            self.source_spec.clone(),
            source.a,
            source.b,
            load.a,
            load.b,
            load.value,
        );
        for e in &self.edges {
            match e.kind {
                ElementKind::Resistor => circuit.add(e.a, e.b, Element::Resistor(e.value)),
                ElementKind::Inductor => circuit.add(e.a, e.b, Element::Inductor(e.value)),
                ElementKind::Capacitor => circuit.add(e.a, e.b, Element::Capacitor(e.value)),
                ElementKind::Source | ElementKind::Load => {}
            }
        }
        circuit.add(load.a, load.b, Element::Resistor(load.value));
        Ok(circuit)
    }

    pub fn simulate(&self, cfg: &SimConfig) -> Result<TransientDetail, SimError> {
        let circuit = self
            .to_circuit()
            .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        crate::sim::simulate_circuit(&circuit, cfg)
    }

    /// Express the graph as a design model with discrete modes (the netlist
    /// interchange form).
    pub fn to_model(&self, epsilon: f64) -> Result<DesignModel, SimplifyError> {
        let source = *self.source_edge()?;
        let load = *self.load_edge()?;
        let boundary = Boundary {
            source_pos: NodeId(source.a),
            source_neg: NodeId(source.b),
            load_pos: NodeId(load.a),
            load_neg: NodeId(load.b),
        };
        let mut pairs = Vec::new();
        let mut states = BTreeMap::new();
        for e in &self.edges {
            let mode = match e.kind {
                ElementKind::Resistor => Mode::Resistor(e.value),
                ElementKind::Inductor => Mode::Inductor(e.value),
                ElementKind::Capacitor => Mode::Capacitor(e.value),
                ElementKind::Source | ElementKind::Load => continue,
            };
            states.insert(pairs.len(), EdgeState::Mode(mode));
            pairs.push((e.a, e.b));
        }
        let topology = MetaTopology::from_edges(pairs, boundary)?;
        Ok(DesignModel::new(
            topology,
            states,
            self.source_spec.clone(),
            load.value,
            epsilon,
        )?)
    }

    /// DOT rendering with one edge statement per component.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph netlist {\n  node [shape=circle];\n");
        for e in &self.edges {
            let label = match e.kind {
                ElementKind::Source => "source".to_string(),
                ElementKind::Load => format!("load {}", format_value(e.value)),
                kind => format!("{} {}", kind.letter(), format_value(e.value)),
            };
            out.push_str(&format!("  n{} -- n{} [label=\"{}\"];\n", e.a, e.b, label));
        }
        out.push_str("}\n");
        out
    }

    fn vertices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.edges.iter().flat_map(|e| [e.a, e.b]).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

fn format_value(v: f64) -> String {
    if (1e-3..1e4).contains(&v.abs()) || v == 0.0 {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Keep only the connected component containing the boundary edges.
pub fn remove_isolated(g: &mut ComponentGraph) -> Result<bool, SimplifyError> {
    let source = *g.source_edge()?;
    let load = *g.load_edge()?;
    let vertices = g.vertices();
    let index: BTreeMap<usize, usize> = vertices.iter().copied().zip(0..).collect();
    let mut dsu: Vec<usize> = (0..vertices.len()).collect();
    fn find(dsu: &mut Vec<usize>, mut i: usize) -> usize {
        while dsu[i] != i {
            dsu[i] = dsu[dsu[i]];
            i = dsu[i];
        }
        i
    }
    for e in &g.edges {
        let (ra, rb) = (find(&mut dsu, index[&e.a]), find(&mut dsu, index[&e.b]));
        dsu[ra] = rb;
    }
    let boundary_root = find(&mut dsu, index[&source.a]);
    if find(&mut dsu, index[&load.a]) != boundary_root {
        return Err(SimplifyError::BoundarySplit);
    }
    let before = g.edges.len();
    let mut keep = Vec::with_capacity(before);
    for e in &g.edges {
        let root = find(&mut dsu, index[&e.a]);
        if root == boundary_root {
            keep.push(*e);
        }
    }
    let changed = keep.len() != before;
    g.edges = keep;
    Ok(changed)
}

/// Bridge edges of the multigraph (indices into `edges`). Parallel edges
/// are handled by tracking the edge used to enter each vertex.
fn bridges(g: &ComponentGraph) -> Vec<usize> {
    bridge_indices(&g.edges.iter().map(|e| (e.a, e.b)).collect::<Vec<_>>())
}

/// Bridge finding on raw (a, b) vertex pairs; self-loops are never bridges.
pub(crate) fn bridge_indices(edges: &[(usize, usize)]) -> Vec<usize> {
    let mut vertices: Vec<usize> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    vertices.sort_unstable();
    vertices.dedup();
    let index: BTreeMap<usize, usize> = vertices.iter().copied().zip(0..).collect();
    let n = vertices.len();
    let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (k, &(a, b)) in edges.iter().enumerate() {
        if a == b {
            continue; // self-loops are never bridges
        }
        let (ia, ib) = (index[&a], index[&b]);
        adjacency[ia].push((ib, k));
        adjacency[ib].push((ia, k));
    }

    let mut disc = vec![usize::MAX; n];
    let mut low = vec![usize::MAX; n];
    let mut out = Vec::new();
    let mut clock = 0usize;
    for start in 0..n {
        if disc[start] != usize::MAX {
            continue;
        }
        // Iterative DFS: (vertex, entry edge, next adjacency slot).
        let mut stack: Vec<(usize, usize, usize)> = vec![(start, usize::MAX, 0)];
        disc[start] = clock;
        low[start] = clock;
        clock += 1;
        while let Some(&mut (v, entry, ref mut slot)) = stack.last_mut() {
            if *slot < adjacency[v].len() {
                let (to, via) = adjacency[v][*slot];
                *slot += 1;
                if via == entry {
                    continue;
                }
                if disc[to] == usize::MAX {
                    disc[to] = clock;
                    low[to] = clock;
                    clock += 1;
                    stack.push((to, via, 0));
                } else {
                    low[v] = low[v].min(disc[to]);
                }
            } else {
                stack.pop();
                if let Some(&mut (parent, _, _)) = stack.last_mut() {
                    low[parent] = low[parent].min(low[v]);
                    if low[v] > disc[parent] {
                        out.push(entry);
                    }
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// Remove every non-boundary edge lying on no cycle, iterating with
/// isolated-component cleanup until stable. Idempotent.
pub fn remove_dangling(g: &mut ComponentGraph) -> Result<bool, SimplifyError> {
    let mut changed = false;
    loop {
        let bridge_set = bridges(g);
        let removable: Vec<usize> = bridge_set
            .into_iter()
            .filter(|&k| !g.edges[k].kind.is_boundary())
            .collect();
        if removable.is_empty() {
            break;
        }
        changed = true;
        let mut k = 0usize;
        g.edges.retain(|_| {
            let drop = removable.contains(&k);
            k += 1;
            !drop
        });
        if remove_isolated(g)? {
            changed = true;
        }
    }
    Ok(changed)
}

/// Contract near-zero resistors, delete near-zero capacitors and
/// effectively-open resistors.
pub fn prune_degenerate(
    g: &mut ComponentGraph,
    thresholds: &SimplifyThresholds,
) -> Result<bool, SimplifyError> {
    let mut changed = false;
    loop {
        let mut action: Option<(usize, bool)> = None; // (edge index, contract?)
        for (k, e) in g.edges.iter().enumerate() {
            match e.kind {
                ElementKind::Resistor if e.value < thresholds.r_short_below => {
                    action = Some((k, true));
                    break;
                }
                ElementKind::Resistor if 1.0 / e.value < thresholds.g_open_below => {
                    action = Some((k, false));
                    break;
                }
                ElementKind::Capacitor if e.value < thresholds.c_open_below => {
                    action = Some((k, false));
                    break;
                }
                _ => {}
            }
        }
        let Some((k, contract)) = action else { break };
        changed = true;
        let edge = g.edges.remove(k);
        if contract {
            let (keep, gone) = (edge.a.min(edge.b), edge.a.max(edge.b));
            for e in &mut g.edges {
                if e.a == gone {
                    e.a = keep;
                }
                if e.b == gone {
                    e.b = keep;
                }
            }
            for e in &g.edges {
                if e.kind.is_boundary() && e.a == e.b {
                    return Err(SimplifyError::BoundaryContraction);
                }
            }
            // Components now strapped across the contracted short see zero
            // volts forever and carry nothing.
            g.edges.retain(|e| e.a != e.b || e.kind.is_boundary());
        }
    }
    Ok(changed)
}

/// Merge same-type series and parallel pairs to fixpoint with exact
/// equivalent values. Boundary edges and their endpoints stay untouched so
/// the measured port survives.
pub fn merge_series_parallel(g: &mut ComponentGraph) -> bool {
    let mut changed = false;
    loop {
        if merge_one_parallel(g) || merge_one_series(g) {
            changed = true;
        } else {
            break;
        }
    }
    changed
}

fn mergeable(kind: ElementKind) -> bool {
    matches!(
        kind,
        ElementKind::Resistor | ElementKind::Inductor | ElementKind::Capacitor
    )
}

fn merge_one_parallel(g: &mut ComponentGraph) -> bool {
    for i in 0..g.edges.len() {
        if !mergeable(g.edges[i].kind) {
            continue;
        }
        for j in i + 1..g.edges.len() {
            let (ei, ej) = (g.edges[i], g.edges[j]);
            if ei.kind != ej.kind {
                continue;
            }
            let same = (ei.a == ej.a && ei.b == ej.b) || (ei.a == ej.b && ei.b == ej.a);
            if !same {
                continue;
            }
            g.edges[i].value = match ei.kind {
                // Parallel: conductances add for R and L, values add for C.
                ElementKind::Resistor | ElementKind::Inductor => {
                    1.0 / (1.0 / ei.value + 1.0 / ej.value)
                }
                ElementKind::Capacitor => ei.value + ej.value,
                _ => unreachable!(),
            };
            g.edges.remove(j);
            return true;
        }
    }
    false
}

fn merge_one_series(g: &mut ComponentGraph) -> bool {
    let boundary_vertices: Vec<usize> = g
        .edges
        .iter()
        .filter(|e| e.kind.is_boundary())
        .flat_map(|e| [e.a, e.b])
        .collect();
    let mut incident: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, e) in g.edges.iter().enumerate() {
        incident.entry(e.a).or_default().push(k);
        incident.entry(e.b).or_default().push(k);
    }
    for (&v, touching) in &incident {
        if touching.len() != 2 || boundary_vertices.contains(&v) {
            continue;
        }
        let (i, j) = (touching[0], touching[1]);
        if i == j {
            continue; // self-loop counted twice
        }
        let (ei, ej) = (g.edges[i], g.edges[j]);
        if ei.kind != ej.kind || !mergeable(ei.kind) {
            continue;
        }
        let other_i = if ei.a == v { ei.b } else { ei.a };
        let other_j = if ej.a == v { ej.b } else { ej.a };
        if other_i == other_j {
            continue; // parallel pair; handled by the parallel rule
        }
        let value = match ei.kind {
            ElementKind::Resistor | ElementKind::Inductor => ei.value + ej.value,
            ElementKind::Capacitor => 1.0 / (1.0 / ei.value + 1.0 / ej.value),
            _ => unreachable!(),
        };
        g.edges[i] = Component {
            kind: ei.kind,
            value,
            a: other_i,
            b: other_j,
        };
        g.edges.remove(j);
        return true;
    }
    false
}

/// Run all passes in a loop until none of them changes the graph.
pub fn simplify_fixpoint(
    g: &ComponentGraph,
    thresholds: &SimplifyThresholds,
) -> Result<ComponentGraph, SimplifyError> {
    let mut out = g.clone();
    loop {
        let mut changed = remove_isolated(&mut out)?;
        changed |= remove_dangling(&mut out)?;
        changed |= prune_degenerate(&mut out, thresholds)?;
        changed |= merge_series_parallel(&mut out);
        if !changed {
            return Ok(out);
        }
    }
}
