//! Fixed-step transient simulation via modified nodal analysis.
//!
//! All supported elements are linear, so inductors and capacitors are
//! replaced by their discrete-time companion models (a conductance plus a
//! history current source) and each step reduces to one linear solve. The
//! system matrix is constant for a fixed step size and is factored once per
//! simulation.
//!
//! Relaxed universal-component branches are stamped as their continuous
//! switch (an ideal resistor of the exact equivalent resistance) in series
//! with the element, through an internal node. This makes the stamps of a
//! relaxed model and of its realized netlist identical, which is what makes
//! the realization of fractional switches lossless.

mod lu;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{DesignModel, EdgeState, Mode, NodeId, SourceSpec};
use lu::{residual_into, DenseLu};

/// Default relative pivot tolerance for singularity detection.
pub const DEFAULT_PIVOT_TOL: f64 = 1e-10;
/// Default per-step nodal current residual bound.
pub const DEFAULT_KCL_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    /// The system matrix failed to factorize; the topology is infeasible.
    #[error("singular system: pivot collapse at unknown {column}")]
    Singular { column: usize },
    /// The solution left the representable range; the parameterization is
    /// numerically unstable.
    #[error("non-finite solution at t = {t}")]
    NonFinite { t: f64 },
    #[error("KCL residual {residual:.3e} above tolerance at t = {t}")]
    KclViolation { t: f64, residual: f64 },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),
}

/// Uniformly sampled time series of a measured quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<f64>,
}

impl Waveform {
    pub fn new(t0: f64, dt: f64, samples: Vec<f64>) -> Result<Waveform, SimError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SimError::InvalidWaveform(format!("dt = {dt}")));
        }
        if samples.len() < 2 {
            return Err(SimError::InvalidWaveform(format!(
                "{} samples, need at least 2",
                samples.len()
            )));
        }
        if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
            return Err(SimError::InvalidWaveform(format!("non-finite sample {bad}")));
        }
        Ok(Waveform { t0, dt, samples })
    }

    pub fn end_time(&self) -> f64 {
        self.t0 + self.dt * (self.samples.len() - 1) as f64
    }

    /// Value at time `t` by linear interpolation, clamped to the end samples
    /// outside the covered range.
    pub fn value_at(&self, t: f64) -> f64 {
        let pos = (t - self.t0) / self.dt;
        if pos <= 0.0 {
            return self.samples[0];
        }
        let last = self.samples.len() - 1;
        if pos >= last as f64 {
            return self.samples[last];
        }
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        self.samples[i] * (1.0 - frac) + self.samples[i + 1] * frac
    }

    pub fn mean_square(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum::<f64>() / self.samples.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest per-sample deviation; both waveforms must share the grid.
    pub fn max_abs_diff(&self, other: &Waveform) -> f64 {
        assert_eq!(self.samples.len(), other.samples.len(), "grids differ");
        self.samples
            .iter()
            .zip(&other.samples)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    BackwardEuler,
    Trapezoidal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub t_end: f64,
    pub dt: f64,
    pub integrator: Integrator,
    /// Relative pivot tolerance for the LU factorization.
    pub pivot_tolerance: f64,
    /// Maximum accepted nodal current residual per step.
    pub kcl_tolerance: f64,
}

impl SimConfig {
    pub fn new(t_end: f64, dt: f64) -> SimConfig {
        SimConfig {
            t_end,
            dt,
            integrator: Integrator::Trapezoidal,
            pivot_tolerance: DEFAULT_PIVOT_TOL,
            kcl_tolerance: DEFAULT_KCL_TOL,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.t_end > 0.0 && self.dt < self.t_end) {
            return Err(SimError::InvalidConfig(format!(
                "need 0 < dt < t_end, got dt = {}, t_end = {}",
                self.dt, self.t_end
            )));
        }
        if !(self.pivot_tolerance > 0.0 && self.kcl_tolerance > 0.0) {
            return Err(SimError::InvalidConfig("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Conductance of the continuous switch, G(s) = ((1-eps)s + eps) / ((eps-1)s + 1).
///
/// Written as (s + eps(1-s)) / ((1-s) + eps s) so that s = 0, 0.5 and 1 give
/// exactly eps, 1 and 1/eps: numerator and denominator round identically at
/// the midpoint. Strictly increasing in s; denominator >= eps on the domain.
pub fn switch_conductance(s: f64, epsilon: f64) -> f64 {
    assert!((0.0..=1.0).contains(&s), "switch value {s} outside [0, 1]");
    assert!(
        epsilon > 0.0 && epsilon < 1.0,
        "epsilon {epsilon} outside (0, 1)"
    );
    (s + epsilon * (1.0 - s)) / ((1.0 - s) + epsilon * s)
}

/// Equivalent resistance of the continuous switch, 1 / G(s).
pub fn switch_resistance(s: f64, epsilon: f64) -> f64 {
    assert!((0.0..=1.0).contains(&s), "switch value {s} outside [0, 1]");
    assert!(
        epsilon > 0.0 && epsilon < 1.0,
        "epsilon {epsilon} outside (0, 1)"
    );
    ((1.0 - s) + epsilon * s) / (s + epsilon * (1.0 - s))
}

/// A primitive two-terminal element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Element {
    Resistor(f64),
    Inductor(f64),
    Capacitor(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Branch {
    a: usize,
    b: usize,
    elem: Element,
}

/// Flattened primitive circuit: the common lowering target for design models
/// and realized component graphs.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    branches: Vec<Branch>,
    source: SourceSpec,
    source_pos: usize,
    source_neg: usize,
    output_pos: usize,
    output_neg: usize,
    load_resistance: f64,
}

impl Circuit {
    /// Start a circuit with the boundary scenario; primitive branches are
    /// appended afterwards and the load resistor is stamped last.
    pub fn new(
        source: SourceSpec,
        source_pos: usize,
        source_neg: usize,
        output_pos: usize,
        output_neg: usize,
        load_resistance: f64,
    ) -> Circuit {
        Circuit {
            branches: Vec::new(),
            source,
            source_pos,
            source_neg,
            output_pos,
            output_neg,
            load_resistance,
        }
    }

    pub fn add(&mut self, a: usize, b: usize, elem: Element) {
        self.branches.push(Branch { a, b, elem });
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    /// Lower a design model. Edges are visited in ascending id order; inside
    /// a relaxed edge the R, L, C branches (each as switch resistor plus
    /// element through a fresh internal node) come before the short branch.
    pub fn from_model(model: &DesignModel) -> Circuit {
        let eps = model.epsilon;
        let mut circuit = Circuit::new(
            model.source.clone(),
            model.topology.boundary.source_pos.0,
            model.topology.boundary.source_neg.0,
            model.topology.boundary.load_pos.0,
            model.topology.boundary.load_neg.0,
            model.load_resistance,
        );
        let mut next_node = model
            .topology
            .nodes
            .iter()
            .map(|n| n.0)
            .max()
            .unwrap_or(0)
            + 1;
        for edge in &model.topology.edges {
            let (a, b) = (edge.a.0, edge.b.0);
            match &model.edge_states[&edge.id] {
                EdgeState::Mode(mode) => match *mode {
                    Mode::Open => {}
                    Mode::Short => circuit.add(a, b, Element::Resistor(eps)),
                    Mode::Resistor(v) => circuit.add(a, b, Element::Resistor(v)),
                    Mode::Inductor(v) => circuit.add(a, b, Element::Inductor(v)),
                    Mode::Capacitor(v) => circuit.add(a, b, Element::Capacitor(v)),
                },
                EdgeState::Relaxed(state) => {
                    let mut switched = |value_elem: Element, switch: f64, circuit: &mut Circuit| {
                        let mid = next_node;
                        next_node += 1;
                        circuit.add(a, mid, Element::Resistor(switch_resistance(switch, eps)));
                        circuit.add(mid, b, value_elem);
                    };
                    if let Some(br) = state.resistor {
                        switched(Element::Resistor(br.value), br.switch, &mut circuit);
                    }
                    if let Some(br) = state.inductor {
                        switched(Element::Inductor(br.value), br.switch, &mut circuit);
                    }
                    if let Some(br) = state.capacitor {
                        switched(Element::Capacitor(br.value), br.switch, &mut circuit);
                    }
                    if let Some(s) = state.short {
                        circuit.add(a, b, Element::Resistor(switch_resistance(s, eps)));
                    }
                }
            }
        }
        // The scenario's load resistor is stamped last, matching the
        // lowering of a realized component graph.
        circuit.add(
            circuit.output_pos,
            circuit.output_neg,
            Element::Resistor(circuit.load_resistance),
        );
        circuit
    }
}

/// Discrete companion of an element for one integrator step.
fn companion(elem: Element, dt: f64, trapezoidal: bool) -> f64 {
    match elem {
        Element::Resistor(r) => 1.0 / r,
        Element::Capacitor(c) => {
            if trapezoidal {
                2.0 * c / dt
            } else {
                c / dt
            }
        }
        Element::Inductor(l) => {
            if trapezoidal {
                dt / (2.0 * l)
            } else {
                dt / l
            }
        }
    }
}

/// History current source of an element's companion model.
fn history(elem: Element, g: f64, v_prev: f64, i_prev: f64, trapezoidal: bool) -> f64 {
    match elem {
        Element::Resistor(_) => 0.0,
        Element::Capacitor(_) => {
            if trapezoidal {
                g * v_prev + i_prev
            } else {
                g * v_prev
            }
        }
        Element::Inductor(_) => {
            if trapezoidal {
                -(i_prev + g * v_prev)
            } else {
                -i_prev
            }
        }
    }
}

struct Assembled {
    matrix: Vec<f64>,
    lu: DenseLu,
    /// Companion conductance per branch for this step kind.
    g: Vec<f64>,
    trapezoidal: bool,
}

/// Result of a transient run with step-level diagnostics.
#[derive(Debug, Clone)]
pub struct TransientDetail {
    pub waveform: Waveform,
    /// Largest observed per-step residual of the solved linear system.
    pub max_kcl_residual: f64,
    /// Cumulative energy delivered by the source over the run.
    pub source_energy: f64,
    /// Cumulative energy dissipated in the load over the run.
    pub load_energy: f64,
}

struct Solver<'c> {
    circuit: &'c Circuit,
    /// Node id -> matrix index; the reference node is absent.
    index: BTreeMap<usize, usize>,
    n: usize,
    source_row: usize,
}

impl<'c> Solver<'c> {
    fn new(circuit: &'c Circuit) -> Solver<'c> {
        let reference = circuit.source_neg;
        let mut ids: Vec<usize> = circuit
            .branches
            .iter()
            .flat_map(|br| [br.a, br.b])
            .chain([
                circuit.source_pos,
                circuit.output_pos,
                circuit.output_neg,
            ])
            .filter(|id| *id != reference)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        let index: BTreeMap<usize, usize> = ids.iter().copied().zip(0..).collect();
        let n = index.len() + 1; // plus the source branch current
        Solver {
            circuit,
            source_row: n - 1,
            index,
            n,
        }
    }

    fn idx(&self, node: usize) -> Option<usize> {
        self.index.get(&node).copied()
    }

    fn assemble(&self, dt: f64, trapezoidal: bool, pivot_tol: f64) -> Result<Assembled, SimError> {
        let n = self.n;
        let mut a = vec![0.0_f64; n * n];
        let mut g = Vec::with_capacity(self.circuit.branches.len());
        for br in &self.circuit.branches {
            let gk = companion(br.elem, dt, trapezoidal);
            g.push(gk);
            let ia = self.idx(br.a);
            let ib = self.idx(br.b);
            if let Some(i) = ia {
                a[i * n + i] += gk;
            }
            if let Some(i) = ib {
                a[i * n + i] += gk;
            }
            if let (Some(i), Some(j)) = (ia, ib) {
                a[i * n + j] -= gk;
                a[j * n + i] -= gk;
            }
        }
        // Ideal voltage source between source_pos and the reference node:
        // one extra unknown for its branch current.
        let k = self.source_row;
        if let Some(p) = self.idx(self.circuit.source_pos) {
            a[p * n + k] += 1.0;
            a[k * n + p] += 1.0;
        }
        let lu = DenseLu::factor(&a, n, pivot_tol)
            .map_err(|c| SimError::Singular { column: c.0 })?;
        Ok(Assembled {
            matrix: a,
            lu,
            g,
            trapezoidal,
        })
    }

    fn node_voltage(&self, x: &[f64], node: usize) -> f64 {
        self.idx(node).map_or(0.0, |i| x[i])
    }
}

/// Simulate a lowered circuit. Samples are taken at t = dt, 2 dt, ..., t_end
/// (the t = 0 state is the zero initial condition and is not emitted).
pub fn simulate_circuit(circuit: &Circuit, cfg: &SimConfig) -> Result<TransientDetail, SimError> {
    cfg.validate()?;
    let n_steps = (cfg.t_end / cfg.dt).round() as usize;
    if n_steps < 2 {
        return Err(SimError::InvalidConfig(format!(
            "horizon {} / dt {} yields fewer than 2 steps",
            cfg.t_end, cfg.dt
        )));
    }
    let solver = Solver::new(circuit);
    let n = solver.n;

    // Trapezoidal runs start with one backward Euler step: the companion
    // history of the trapezoidal rule needs element currents, which the
    // zero-state initial condition does not define.
    let be = solver.assemble(cfg.dt, false, cfg.pivot_tolerance)?;
    let trap = match cfg.integrator {
        Integrator::Trapezoidal => Some(solver.assemble(cfg.dt, true, cfg.pivot_tolerance)?),
        Integrator::BackwardEuler => None,
    };

    let mut v_state = vec![0.0_f64; circuit.branches.len()];
    let mut i_state = vec![0.0_f64; circuit.branches.len()];
    let mut b = vec![0.0_f64; n];
    let mut x = vec![0.0_f64; n];
    let mut r = vec![0.0_f64; n];
    let mut dx = vec![0.0_f64; n];
    let mut samples = Vec::with_capacity(n_steps);
    let mut max_residual = 0.0_f64;
    let mut source_energy = 0.0_f64;
    let mut load_energy = 0.0_f64;

    for step in 1..=n_steps {
        let sys = match (&trap, step) {
            (Some(tr), s) if s > 1 => tr,
            _ => &be,
        };
        let t = step as f64 * cfg.dt;

        b.fill(0.0);
        for (k, br) in circuit.branches.iter().enumerate() {
            let ih = history(br.elem, sys.g[k], v_state[k], i_state[k], sys.trapezoidal);
            if ih != 0.0 {
                if let Some(i) = solver.idx(br.a) {
                    b[i] += ih;
                }
                if let Some(i) = solver.idx(br.b) {
                    b[i] -= ih;
                }
            }
        }
        let e = circuit.source.value_at(t);
        b[solver.source_row] = e;

        sys.lu.solve_into(&b, &mut x);
        let mut residual = residual_into(&sys.matrix, n, &x, &b, &mut r);
        if residual > cfg.kcl_tolerance {
            // One pass of iterative refinement before giving up.
            sys.lu.solve_into(&r, &mut dx);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
            residual = residual_into(&sys.matrix, n, &x, &b, &mut r);
            if residual > cfg.kcl_tolerance {
                return Err(SimError::KclViolation { t, residual });
            }
        }
        max_residual = max_residual.max(residual);
        debug_assert!(residual <= cfg.kcl_tolerance);

        if x.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFinite { t });
        }

        for (k, br) in circuit.branches.iter().enumerate() {
            let v = solver.node_voltage(&x, br.a) - solver.node_voltage(&x, br.b);
            let ih = history(br.elem, sys.g[k], v_state[k], i_state[k], sys.trapezoidal);
            let i = sys.g[k] * v - ih;
            v_state[k] = v;
            i_state[k] = i;
        }

        let v_out = solver.node_voltage(&x, circuit.output_pos)
            - solver.node_voltage(&x, circuit.output_neg);
        // The source-current unknown flows from source_pos to source_neg
        // through the source, so delivered power is -e * j.
        source_energy += -e * x[solver.source_row] * cfg.dt;
        load_energy += v_out * v_out / circuit.load_resistance * cfg.dt;
        samples.push(v_out);
    }

    Ok(TransientDetail {
        waveform: Waveform::new(cfg.dt, cfg.dt, samples)?,
        max_kcl_residual: max_residual,
        source_energy,
        load_energy,
    })
}

/// Transient simulation of a design model; returns the load-voltage
/// waveform.
pub fn transient(model: &DesignModel, cfg: &SimConfig) -> Result<Waveform, SimError> {
    Ok(transient_detailed(model, cfg)?.waveform)
}

pub fn transient_detailed(
    model: &DesignModel,
    cfg: &SimConfig,
) -> Result<TransientDetail, SimError> {
    simulate_circuit(&Circuit::from_model(model), cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feasibility {
    Ok,
    /// No path of non-open edges connects the source to the load.
    Disconnected,
    /// The system matrix does not factorize (e.g. floating islands).
    Singular,
}

impl Feasibility {
    pub fn is_ok(&self) -> bool {
        matches!(self, Feasibility::Ok)
    }
}

/// Feasibility probe: connectivity of the boundary through non-open edges
/// plus a factorization check of the assembled matrix.
pub fn check_feasible(model: &DesignModel) -> Feasibility {
    check_feasible_with(model, DEFAULT_PIVOT_TOL)
}

pub fn check_feasible_with(model: &DesignModel, pivot_tolerance: f64) -> Feasibility {
    if !boundary_connected(model) {
        return Feasibility::Disconnected;
    }
    let circuit = Circuit::from_model(model);
    let solver = Solver::new(&circuit);
    // Probe step; structural singularity does not depend on dt.
    match solver.assemble(1e-6, false, pivot_tolerance) {
        Ok(_) => Feasibility::Ok,
        Err(_) => Feasibility::Singular,
    }
}

/// True when the source terminals connect through non-open design edges to
/// the load terminals (directly or with roles swapped).
fn boundary_connected(model: &DesignModel) -> bool {
    let mut adjacency: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for edge in &model.topology.edges {
        if model.edge_states[&edge.id].is_open() {
            continue;
        }
        adjacency.entry(edge.a.0).or_default().push(edge.b.0);
        adjacency.entry(edge.b.0).or_default().push(edge.a.0);
    }
    let reaches = |from: NodeId, to: NodeId| -> bool {
        if from == to {
            return true;
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut stack = vec![from.0];
        seen.insert(from.0);
        while let Some(node) = stack.pop() {
            if node == to.0 {
                return true;
            }
            if let Some(next) = adjacency.get(&node) {
                for &m in next {
                    if seen.insert(m) {
                        stack.push(m);
                    }
                }
            }
        }
        false
    };
    let b = &model.topology.boundary;
    (reaches(b.source_pos, b.load_pos) && reaches(b.source_neg, b.load_neg))
        || (reaches(b.source_pos, b.load_neg) && reaches(b.source_neg, b.load_pos))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        generate_grid, Boundary, MetaTopology, ParamBounds, RelaxedEdge, DEFAULT_EPSILON, GROUND,
    };
    use std::collections::BTreeMap as Map;

    fn two_node_model(state: EdgeState, load: f64) -> DesignModel {
        let topo = MetaTopology::from_edges(
            vec![(1, 2)],
            Boundary {
                source_pos: NodeId(1),
                source_neg: GROUND,
                load_pos: NodeId(2),
                load_neg: GROUND,
            },
        )
        .unwrap();
        DesignModel::new(
            topo,
            Map::from([(0, state)]),
            SourceSpec::Step { amplitude: 1.0 },
            load,
            DEFAULT_EPSILON,
        )
        .unwrap()
    }

    #[test]
    fn switch_endpoints_are_exact() {
        for eps in [1e-3, 1e-5, 1e-7] {
            assert_eq!(switch_conductance(0.0, eps), eps);
            assert_eq!(switch_conductance(1.0, eps), 1.0 / eps);
            assert_eq!(switch_conductance(0.5, eps), 1.0);
            assert_eq!(switch_resistance(1.0, eps), eps);
            assert_eq!(switch_resistance(0.5, eps), 1.0);
        }
    }

    #[test]
    fn switch_conductance_strictly_increasing() {
        for eps in [1e-2, 1e-5] {
            let mut prev = switch_conductance(0.0, eps);
            for k in 1..=1000 {
                let g = switch_conductance(k as f64 / 1000.0, eps);
                assert!(g > prev, "not increasing at s = {}", k as f64 / 1000.0);
                prev = g;
            }
        }
    }

    #[test]
    fn resistive_divider_constant() {
        let model = two_node_model(EdgeState::Mode(Mode::Resistor(2.0)), 1.0);
        let wave = transient(&model, &SimConfig::new(1e-3, 1e-5)).unwrap();
        for v in &wave.samples {
            assert!((v - 1.0 / 3.0).abs() < 1e-12, "divider voltage {v}");
        }
    }

    #[test]
    fn series_switch_and_resistor_adds_epsilon() {
        // R branch fully closed: equivalent series resistance R + eps.
        let state = EdgeState::Relaxed(RelaxedEdge {
            resistor: Some(crate::model::SwitchedBranch {
                value: 2.0,
                switch: 1.0,
            }),
            ..Default::default()
        });
        let model = two_node_model(state, 1.0);
        let wave = transient(&model, &SimConfig::new(1e-3, 1e-5)).unwrap();
        let expected = 1.0 / (1.0 + 2.0 + DEFAULT_EPSILON);
        for v in &wave.samples {
            assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn open_edge_contributes_no_branches() {
        let model = two_node_model(EdgeState::Mode(Mode::Open), 1.0);
        let circuit = Circuit::from_model(&model);
        // Only the scenario's load resistor remains.
        assert_eq!(circuit.branch_count(), 1);
        let wave = transient(&model, &SimConfig::new(1e-3, 1e-5)).unwrap();
        assert!(wave.max_abs() == 0.0);
    }

    fn rc_model(load: f64) -> DesignModel {
        // source - R 1 ohm - node 2; C 1 F from node 2 to ground; measure
        // across the capacitor through a large load.
        let topo = MetaTopology::from_edges(
            vec![(1, 2), (2, 0)],
            Boundary {
                source_pos: NodeId(1),
                source_neg: GROUND,
                load_pos: NodeId(2),
                load_neg: GROUND,
            },
        )
        .unwrap();
        DesignModel::new(
            topo,
            Map::from([
                (0, EdgeState::Mode(Mode::Resistor(1.0))),
                (1, EdgeState::Mode(Mode::Capacitor(1.0))),
            ]),
            SourceSpec::Step { amplitude: 1.0 },
            load,
            DEFAULT_EPSILON,
        )
        .unwrap()
    }

    fn rc_max_error(cfg: &SimConfig) -> f64 {
        let wave = transient(&rc_model(1e12), cfg).unwrap();
        wave.samples
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let t = wave.t0 + k as f64 * wave.dt;
                (v - (1.0 - (-t).exp())).abs()
            })
            .fold(0.0_f64, f64::max)
    }

    #[test]
    fn rc_step_matches_analytic() {
        let err = rc_max_error(&SimConfig::new(5.0, 1e-3));
        assert!(err <= 1e-3, "max error {err}");
    }

    #[test]
    fn convergence_order() {
        let trap = |dt: f64| {
            rc_max_error(&SimConfig {
                integrator: Integrator::Trapezoidal,
                ..SimConfig::new(2.0, dt)
            })
        };
        let be = |dt: f64| {
            rc_max_error(&SimConfig {
                integrator: Integrator::BackwardEuler,
                ..SimConfig::new(2.0, dt)
            })
        };
        let ratio_trap = trap(2e-3) / trap(1e-3);
        let ratio_be = be(2e-3) / be(1e-3);
        assert!(
            (3.0..5.0).contains(&ratio_trap),
            "trapezoidal halving ratio {ratio_trap}"
        );
        assert!(
            (1.6..2.4).contains(&ratio_be),
            "backward Euler halving ratio {ratio_be}"
        );
    }

    #[test]
    fn zero_source_stays_zero() {
        let mut model = rc_model(100.0);
        model.source = SourceSpec::Step { amplitude: 0.0 };
        let wave = transient(&model, &SimConfig::new(1e-2, 1e-4)).unwrap();
        assert_eq!(wave.max_abs(), 0.0);
    }

    #[test]
    fn open_grid_output_below_epsilon_residual() {
        // Relaxed edges with all switches at zero leak at most eps-scale.
        let topo = generate_grid(2, 2).unwrap();
        let states = topo
            .edges
            .iter()
            .map(|e| (e.id, EdgeState::Relaxed(RelaxedEdge::full(1.0, 1.0, 1.0, 0.0))))
            .collect();
        let model = DesignModel::new(
            topo,
            states,
            SourceSpec::Step { amplitude: 1.0 },
            1.0,
            DEFAULT_EPSILON,
        )
        .unwrap();
        let wave = transient(&model, &SimConfig::new(1e-3, 1e-5)).unwrap();
        assert!(wave.max_abs() <= DEFAULT_EPSILON * 1.0);
    }

    #[test]
    fn feasibility_cases() {
        let topo = generate_grid(2, 2).unwrap();
        let all = |mode: Mode| -> DesignModel {
            let states = topo.edges.iter().map(|e| (e.id, EdgeState::Mode(mode))).collect();
            DesignModel::new(
                topo.clone(),
                states,
                SourceSpec::Step { amplitude: 1.0 },
                1.0,
                DEFAULT_EPSILON,
            )
            .unwrap()
        };
        assert_eq!(check_feasible(&all(Mode::Short)), Feasibility::Ok);
        assert_eq!(check_feasible(&all(Mode::Open)), Feasibility::Disconnected);
    }

    #[test]
    fn single_capacitive_path_is_feasible() {
        // Only source-load path is one series capacitor; companion model
        // keeps the matrix regular.
        let topo = generate_grid(1, 2).unwrap();
        let states = Map::from([(0, EdgeState::Mode(Mode::Capacitor(1e-6)))]);
        let model = DesignModel::new(
            topo,
            states,
            SourceSpec::Step { amplitude: 1.0 },
            1.0,
            DEFAULT_EPSILON,
        )
        .unwrap();
        assert_eq!(check_feasible(&model), Feasibility::Ok);
        assert!(transient(&model, &SimConfig::new(1e-3, 1e-6)).is_ok());
    }

    #[test]
    fn floating_island_reports_singular() {
        // Edge 1-2 carries the signal; edge 3-4 floats.
        let topo = MetaTopology::from_edges(
            vec![(1, 2), (3, 4)],
            Boundary {
                source_pos: NodeId(1),
                source_neg: GROUND,
                load_pos: NodeId(2),
                load_neg: GROUND,
            },
        )
        .unwrap();
        let model = DesignModel::new(
            topo,
            Map::from([
                (0, EdgeState::Mode(Mode::Resistor(10.0))),
                (1, EdgeState::Mode(Mode::Resistor(10.0))),
            ]),
            SourceSpec::Step { amplitude: 1.0 },
            1.0,
            DEFAULT_EPSILON,
        )
        .unwrap();
        assert_eq!(check_feasible(&model), Feasibility::Singular);
        assert!(matches!(
            transient(&model, &SimConfig::new(1e-3, 1e-5)),
            Err(SimError::Singular { .. })
        ));
    }

    #[test]
    fn passivity_on_random_models() {
        let bounds = ParamBounds {
            resistance: (1.0, 1e3),
            inductance: (1e-4, 1e-1),
            capacitance: (1e-7, 1e-4),
        };
        let topo = generate_grid(2, 3).unwrap();
        let mut checked = 0;
        for seed in 0..40u64 {
            let model = DesignModel::sample_random(
                topo.clone(),
                SourceSpec::Step { amplitude: 1.0 },
                100.0,
                DEFAULT_EPSILON,
                seed,
                &bounds,
            );
            if !check_feasible(&model).is_ok() {
                continue;
            }
            for t_end in [1e-3, 5e-3] {
                let detail = match transient_detailed(&model, &SimConfig::new(t_end, 1e-6)) {
                    Ok(d) => d,
                    Err(_) => continue,
                };
                let slack = 1e-9 + 0.02 * detail.source_energy.abs();
                assert!(
                    detail.source_energy + slack >= detail.load_energy,
                    "seed {seed}: source {} < load {}",
                    detail.source_energy,
                    detail.load_energy
                );
                checked += 1;
            }
        }
        assert!(checked > 10, "too few feasible samples: {checked}");
    }

    #[test]
    fn kcl_residual_is_tracked() {
        let detail = transient_detailed(&rc_model(100.0), &SimConfig::new(1e-2, 1e-5)).unwrap();
        assert!(detail.max_kcl_residual <= DEFAULT_KCL_TOL);
    }

    #[test]
    fn deterministic_waveforms() {
        let model = rc_model(50.0);
        let cfg = SimConfig::new(1e-2, 1e-5);
        let a = transient(&model, &cfg).unwrap();
        let b = transient(&model, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
