//! Continuous relaxation design loop.
//!
//! Starting from a fully relaxed model (all switches at 0.5), minimize the
//! L1-regularized loss; while the requirements cost keeps improving, grow
//! the L1 weight geometrically and eliminate branches whose switches
//! collapsed to zero, reconstructing a smaller model. Once the cost stops
//! improving, run one final unregularized polish and return. Surviving
//! fractional switches realize losslessly as ideal resistors.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::model::{DesignModel, EdgeState, ParamBounds};
use crate::objective::{requirements_cost, total_loss, ObjectiveError, TransformLayout};
use crate::powell::{minimize, OptimizerConfig, OptimizerError};
use crate::sim::{
    check_feasible, switch_resistance, Feasibility, SimConfig, SimError, Waveform,
};
use crate::simplify::{ComponentGraph, ElementKind};

#[derive(Debug, thiserror::Error)]
pub enum RelaxError {
    #[error("initial model is infeasible: {0:?}")]
    InfeasibleInitial(Feasibility),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationConfig {
    /// Initial L1 weight; defaults to 1e-3 times the initial requirements
    /// cost when unset.
    pub lambda0: Option<f64>,
    /// Geometric growth factor of the L1 weight, > 1.
    pub delta: f64,
    /// Switches below this value count as zero and their branch is removed.
    pub switch_zero_threshold: f64,
    pub max_outer: usize,
    /// Convergence tolerance of each inner minimization (relative
    /// per-sweep improvement).
    pub solution_tolerance: f64,
    pub inner: OptimizerConfig,
    pub bounds: ParamBounds,
    pub sim: SimConfig,
}

impl RelaxationConfig {
    pub fn new(sim: SimConfig) -> RelaxationConfig {
        RelaxationConfig {
            lambda0: None,
            delta: 2.0,
            switch_zero_threshold: 1e-2,
            max_outer: 40,
            solution_tolerance: 1e-8,
            inner: OptimizerConfig::default(),
            bounds: ParamBounds::default(),
            sim,
        }
    }

    fn inner_cfg(&self) -> OptimizerConfig {
        OptimizerConfig {
            f_tolerance: self.solution_tolerance,
            ..self.inner
        }
    }
}

/// One outer iteration of the design loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub outer: usize,
    pub lambda: f64,
    pub requirements_cost: f64,
    pub variable_count: usize,
    pub wall_seconds: f64,
    /// Branch removals undone because they broke feasibility.
    pub rolled_back: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RelaxationTrace {
    pub records: Vec<OuterRecord>,
}

impl RelaxationTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("outer,lambda,cost,nvars,seconds\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.outer, r.lambda, r.requirements_cost, r.variable_count, r.wall_seconds
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct RelaxationOutcome {
    pub model: DesignModel,
    pub trace: RelaxationTrace,
    /// Requirements cost of the returned model (after the final polish).
    pub final_cost: f64,
    pub wall_seconds: f64,
}

/// Minimize total loss over the model's variables; returns the improved
/// model and its achieved total.
fn minimize_loss(
    model: &DesignModel,
    target: &Waveform,
    lambda: f64,
    cfg: &RelaxationConfig,
    opt: &OptimizerConfig,
) -> Result<(DesignModel, f64), RelaxError> {
    let layout = TransformLayout::for_model(model, &cfg.bounds);
    if layout.is_empty() {
        return Ok((model.clone(), f64::INFINITY));
    }
    let x0 = layout.to_unconstrained(&model.pack_variables());
    let mut scratch_model = model.clone();
    let mut physical = Vec::with_capacity(layout.len());
    let objective = |x: &[f64]| -> f64 {
        layout.to_physical(x, &mut physical);
        scratch_model
            .unpack_variables_into(&physical)
            .expect("layout length matches model");
        match total_loss(&scratch_model, target, lambda, &cfg.sim) {
            Ok(loss) => loss.total,
            Err(_) => f64::INFINITY,
        }
    };
    let result = minimize(objective, &x0, opt)?;
    let mut best = model.clone();
    layout.to_physical(&result.x_star, &mut physical);
    best.unpack_variables_into(&physical)
        .expect("layout length matches model");
    Ok((best, result.f_star))
}

fn simulate_cost(
    model: &DesignModel,
    target: &Waveform,
    sim: &SimConfig,
) -> Result<f64, RelaxError> {
    Ok(total_loss(model, target, 0.0, sim)?.requirements)
}

/// Algorithm: regularized minimize; while the requirements cost does not
/// degrade, grow lambda, eliminate zero switches and continue; afterwards
/// polish without the L1 term. `seed` drives the random parameter init
/// (all switches start at 0.5).
pub fn run_relaxation(
    model: &DesignModel,
    target: &Waveform,
    cfg: &RelaxationConfig,
    seed: u64,
) -> Result<RelaxationOutcome, RelaxError> {
    let t_run = Instant::now();
    let mut current = DesignModel::relaxed_init(
        model.topology.clone(),
        model.source.clone(),
        model.load_resistance,
        model.epsilon,
        seed,
        &cfg.bounds,
    );
    let feasibility = check_feasible(&current);
    if !feasibility.is_ok() {
        return Err(RelaxError::InfeasibleInitial(feasibility));
    }

    let c_init = simulate_cost(&current, target, &cfg.sim)?;
    if !c_init.is_finite() {
        return Err(RelaxError::InfeasibleInitial(Feasibility::Singular));
    }
    let mut lambda = cfg
        .lambda0
        .unwrap_or(if c_init > 0.0 { 1e-3 * c_init } else { 1e-6 });
    let mut c_prev = f64::INFINITY;
    let mut trace = RelaxationTrace::default();
    let inner = cfg.inner_cfg();

    for outer in 1..=cfg.max_outer {
        let t_outer = Instant::now();
        let (next, _) = minimize_loss(&current, target, lambda, cfg, &inner)?;
        current = next;
        let c_star = simulate_cost(&current, target, &cfg.sim)?;

        let improving = c_star <= c_prev;
        let mut rolled_back = 0;
        if improving {
            c_prev = c_star;
            let (reduced, rb) =
                eliminate_zero_switches(&current, cfg.switch_zero_threshold);
            current = reduced;
            rolled_back = rb;
        }
        trace.records.push(OuterRecord {
            outer,
            lambda,
            requirements_cost: c_star,
            variable_count: current.variable_count(),
            wall_seconds: t_outer.elapsed().as_secs_f64(),
            rolled_back,
        });
        if !improving {
            break;
        }
        lambda *= cfg.delta;
    }

    // Final unregularized polish from the incumbent.
    let (polished, final_cost) = minimize_loss(&current, target, 0.0, cfg, &inner)?;
    Ok(RelaxationOutcome {
        model: polished,
        trace,
        final_cost,
        wall_seconds: t_run.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BranchSlot {
    Resistor,
    Inductor,
    Capacitor,
    Short,
}

fn remove_branch(model: &mut DesignModel, edge_id: usize, slot: BranchSlot) {
    if let Some(EdgeState::Relaxed(edge)) = model.edge_states.get_mut(&edge_id) {
        match slot {
            BranchSlot::Resistor => edge.resistor = None,
            BranchSlot::Inductor => edge.inductor = None,
            BranchSlot::Capacitor => edge.capacitor = None,
            BranchSlot::Short => edge.short = None,
        }
    }
}

/// Remove every relaxed branch whose switch is below `threshold`; edges with
/// no branches left become open. A removal that would make the model
/// infeasible is rolled back; the second return value counts rollbacks.
pub fn eliminate_zero_switches(model: &DesignModel, threshold: f64) -> (DesignModel, usize) {
    let mut candidates: Vec<(usize, BranchSlot, f64)> = Vec::new();
    for (&id, state) in &model.edge_states {
        if let EdgeState::Relaxed(edge) = state {
            if let Some(b) = edge.resistor {
                if b.switch < threshold {
                    candidates.push((id, BranchSlot::Resistor, b.switch));
                }
            }
            if let Some(b) = edge.inductor {
                if b.switch < threshold {
                    candidates.push((id, BranchSlot::Inductor, b.switch));
                }
            }
            if let Some(b) = edge.capacitor {
                if b.switch < threshold {
                    candidates.push((id, BranchSlot::Capacitor, b.switch));
                }
            }
            if let Some(s) = edge.short {
                if s < threshold {
                    candidates.push((id, BranchSlot::Short, s));
                }
            }
        }
    }
    if candidates.is_empty() {
        return (model.clone(), 0);
    }

    // Fast path: drop everything at once when the result stays feasible.
    let mut all = model.clone();
    for &(id, slot, _) in &candidates {
        remove_branch(&mut all, id, slot);
    }
    if check_feasible(&all).is_ok() {
        return (all, 0);
    }

    // Otherwise remove weakest-first, rolling back any removal that breaks
    // feasibility.
    candidates.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)));
    let mut reduced = model.clone();
    let mut rolled_back = 0;
    for &(id, slot, _) in &candidates {
        let mut attempt = reduced.clone();
        remove_branch(&mut attempt, id, slot);
        if check_feasible(&attempt).is_ok() {
            reduced = attempt;
        } else {
            rolled_back += 1;
        }
    }
    (reduced, rolled_back)
}

/// Realize every surviving branch as ideal elements: the continuous switch
/// becomes a resistor of its exact equivalent resistance in series with the
/// element, so the realized netlist stamps identically to the relaxed model
/// and the requirements cost is unchanged.
pub fn realize_switches(model: &DesignModel) -> ComponentGraph {
    let eps = model.epsilon;
    let boundary = &model.topology.boundary;
    let mut graph = ComponentGraph::new(model.source.clone());
    graph.add(
        ElementKind::Source,
        model.source.amplitude(),
        boundary.source_pos.0,
        boundary.source_neg.0,
    );
    graph.add(
        ElementKind::Load,
        model.load_resistance,
        boundary.load_pos.0,
        boundary.load_neg.0,
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
            EdgeState::Mode(mode) => {
                use crate::model::Mode;
                match *mode {
                    Mode::Open => {}
                    Mode::Short => graph.add(ElementKind::Resistor, eps, a, b),
                    Mode::Resistor(v) => graph.add(ElementKind::Resistor, v, a, b),
                    Mode::Inductor(v) => graph.add(ElementKind::Inductor, v, a, b),
                    Mode::Capacitor(v) => graph.add(ElementKind::Capacitor, v, a, b),
                }
            }
            EdgeState::Relaxed(state) => {
                let mut switched =
                    |kind: ElementKind, value: f64, switch: f64, graph: &mut ComponentGraph| {
                        let mid = next_node;
                        next_node += 1;
                        graph.add(
                            ElementKind::Resistor,
                            switch_resistance(switch, eps),
                            a,
                            mid,
                        );
                        graph.add(kind, value, mid, b);
                    };
                if let Some(br) = state.resistor {
                    switched(ElementKind::Resistor, br.value, br.switch, &mut graph);
                }
                if let Some(br) = state.inductor {
                    switched(ElementKind::Inductor, br.value, br.switch, &mut graph);
                }
                if let Some(br) = state.capacitor {
                    switched(ElementKind::Capacitor, br.value, br.switch, &mut graph);
                }
                if let Some(s) = state.short {
                    graph.add(ElementKind::Resistor, switch_resistance(s, eps), a, b);
                }
            }
        }
    }
    graph
}

/// Requirements cost of a realized graph against a target.
pub fn realized_cost(
    graph: &ComponentGraph,
    target: &Waveform,
    sim: &SimConfig,
) -> Result<f64, RelaxError> {
    let wave = graph.simulate(sim)?.waveform;
    Ok(requirements_cost(&wave, target)?)
}
