//! Cost-guided pseudo-random topology search over discrete component modes.
//!
//! Each generation simulates a pool of candidate topologies in parallel,
//! Powell-optimizes the parameters of the cheapest few, accepts designs
//! under the cost threshold and mutates them into a sparser next generation
//! by flipping component edges to short and open. Structural duplicates are
//! dropped via a parameter-blind canonical hash, and overfull generations
//! are capped by parent cost.

use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{DesignModel, EdgeState, Mode, ParamBounds};
use crate::objective::{total_loss, ObjectiveError, TransformLayout};
use crate::powell::{minimize, OptimizerConfig, OptimizerError};
use crate::seeds;
use crate::sim::{check_feasible, SimConfig, SimError};
use crate::simplify::bridge_indices;

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("n_o ({n_o}) must not exceed n_s ({n_s})")]
    BudgetOrder { n_o: usize, n_s: usize },
    #[error(
        "no feasible candidate found in generation 0 after {attempts} sampling attempts \
         ({feasible} feasible, {duplicates} structural duplicates)"
    )]
    NoFeasibleCandidates {
        attempts: usize,
        feasible: usize,
        duplicates: usize,
    },
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Simulation budget: maximum candidates per generation.
    pub n_s: usize,
    /// Optimization budget: candidates Powell-optimized per generation.
    pub n_o: usize,
    /// Acceptance threshold on the optimized requirements cost.
    pub c_th: f64,
    pub seed: u64,
    pub inner: OptimizerConfig,
    pub bounds: ParamBounds,
    pub sim: SimConfig,
    /// Deduplicate against every hash ever seen instead of only the
    /// current generation and its parents.
    pub global_dedup: bool,
}

impl SearchConfig {
    pub fn new(sim: SimConfig, c_th: f64, seed: u64) -> SearchConfig {
        SearchConfig {
            n_s: 2000,
            n_o: 8,
            c_th,
            seed,
            inner: OptimizerConfig::default(),
            bounds: ParamBounds::default(),
            sim,
            global_dedup: false,
        }
    }
}

/// Parameter-blind structural digest, stable under node relabelings that
/// fix the boundary terminals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StructuralHash(pub u64);

impl std::fmt::Display for StructuralHash {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

fn fnv_words(words: impl IntoIterator<Item = u64>) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325_u64;
    for w in words {
        for byte in w.to_le_bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

fn edge_label(state: &EdgeState) -> Option<u64> {
    match state {
        EdgeState::Mode(Mode::Open) => None,
        EdgeState::Mode(Mode::Short) => Some(1),
        EdgeState::Mode(Mode::Resistor(_)) => Some(2),
        EdgeState::Mode(Mode::Inductor(_)) => Some(3),
        EdgeState::Mode(Mode::Capacitor(_)) => Some(4),
        EdgeState::Relaxed(edge) => {
            if edge.is_empty() {
                None
            } else {
                let mask = (edge.resistor.is_some() as u64)
                    | (edge.inductor.is_some() as u64) << 1
                    | (edge.capacitor.is_some() as u64) << 2
                    | (edge.short.is_some() as u64) << 3;
                Some(16 | mask)
            }
        }
    }
}

/// Weisfeiler-Leman style neighborhood refinement seeded with boundary
/// roles; open edges are absent from the hashed graph and parameter values
/// never enter.
pub fn canonical_hash(model: &DesignModel) -> StructuralHash {
    let boundary = &model.topology.boundary;
    // Collect the hashed graph: non-open edges plus the boundary terminals.
    let mut edges: Vec<(usize, usize, u64)> = Vec::new();
    for edge in &model.topology.edges {
        if let Some(label) = edge_label(&model.edge_states[&edge.id]) {
            edges.push((edge.a.0, edge.b.0, label));
        }
    }
    let mut nodes: Vec<usize> = edges
        .iter()
        .flat_map(|&(a, b, _)| [a, b])
        .chain([
            boundary.source_pos.0,
            boundary.source_neg.0,
            boundary.load_pos.0,
            boundary.load_neg.0,
        ])
        .collect();
    nodes.sort_unstable();
    nodes.dedup();
    let index = |id: usize| nodes.binary_search(&id).expect("node collected");

    let role = |id: usize| -> u64 {
        (u64::from(id == boundary.source_pos.0))
            | (u64::from(id == boundary.source_neg.0)) << 1
            | (u64::from(id == boundary.load_pos.0)) << 2
            | (u64::from(id == boundary.load_neg.0)) << 3
    };
    let mut labels: Vec<u64> = nodes.iter().map(|&id| fnv_words([role(id)])).collect();

    let mut adjacency: Vec<Vec<(usize, u64)>> = vec![Vec::new(); nodes.len()];
    for &(a, b, label) in &edges {
        let (ia, ib) = (index(a), index(b));
        adjacency[ia].push((ib, label));
        adjacency[ib].push((ia, label));
    }

    let rounds = nodes.len().max(1);
    let mut scratch: Vec<u64> = Vec::new();
    for _ in 0..rounds {
        let mut next = Vec::with_capacity(labels.len());
        for (v, neighbors) in adjacency.iter().enumerate() {
            scratch.clear();
            scratch.extend(
                neighbors
                    .iter()
                    .map(|&(u, elabel)| fnv_words([elabel, labels[u]])),
            );
            scratch.sort_unstable();
            next.push(fnv_words(
                std::iter::once(labels[v]).chain(scratch.iter().copied()),
            ));
        }
        labels = next;
    }

    let mut node_part: Vec<u64> = labels.clone();
    node_part.sort_unstable();
    let mut edge_part: Vec<u64> = edges
        .iter()
        .map(|&(a, b, label)| {
            let (la, lb) = (labels[index(a)], labels[index(b)]);
            fnv_words([label, la.min(lb), la.max(lb)])
        })
        .collect();
    edge_part.sort_unstable();
    StructuralHash(fnv_words(
        node_part.into_iter().chain(edge_part).chain([edges.len() as u64]),
    ))
}

/// All single-edge short/open flips of component-mode edges, before
/// feasibility filtering: a model with k component edges yields exactly 2k
/// children.
pub fn mutation_candidates(model: &DesignModel) -> Vec<DesignModel> {
    let mut out = Vec::new();
    for edge in &model.topology.edges {
        if let EdgeState::Mode(mode) = &model.edge_states[&edge.id] {
            if mode.param().is_some() {
                for next in [Mode::Short, Mode::Open] {
                    let mut child = model.clone();
                    child.edge_states.insert(edge.id, EdgeState::Mode(next));
                    out.push(child);
                }
            }
        }
    }
    out
}

/// Mode-graph cleanup of a child: edges isolated from the boundary or lying
/// on no cycle are set open (they carry no current and only bloat the
/// candidate pool).
pub fn prune_mode_graph(model: &DesignModel) -> DesignModel {
    let mut current = model.clone();
    let boundary = current.topology.boundary;
    loop {
        // Live edges plus virtual source/load closures.
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        let mut ids: Vec<Option<usize>> = Vec::new();
        for edge in &current.topology.edges {
            if !current.edge_states[&edge.id].is_open() {
                pairs.push((edge.a.0, edge.b.0));
                ids.push(Some(edge.id));
            }
        }
        pairs.push((boundary.source_pos.0, boundary.source_neg.0));
        ids.push(None);
        pairs.push((boundary.load_pos.0, boundary.load_neg.0));
        ids.push(None);

        // Connectivity from the source terminal.
        let mut vertices: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
        vertices.sort_unstable();
        vertices.dedup();
        let vindex = |id: usize| vertices.binary_search(&id).unwrap();
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); vertices.len()];
        for &(a, b) in &pairs {
            adjacency[vindex(a)].push(vindex(b));
            adjacency[vindex(b)].push(vindex(a));
        }
        let mut reachable = vec![false; vertices.len()];
        let mut stack = vec![vindex(boundary.source_pos.0)];
        reachable[stack[0]] = true;
        while let Some(v) = stack.pop() {
            for &u in &adjacency[v] {
                if !reachable[u] {
                    reachable[u] = true;
                    stack.push(u);
                }
            }
        }

        let bridge_set: BTreeSet<usize> = bridge_indices(&pairs).into_iter().collect();
        let mut changed = false;
        for (k, id) in ids.iter().enumerate() {
            let Some(id) = id else { continue };
            let isolated = !reachable[vindex(pairs[k].0)];
            if isolated || bridge_set.contains(&k) {
                current.edge_states.insert(*id, EdgeState::Mode(Mode::Open));
                changed = true;
            }
        }
        if !changed {
            return current;
        }
    }
}

/// Feasible, simplified children of a design (Algorithm line: mutate each
/// component edge to short and to open).
pub fn mutate(model: &DesignModel) -> Vec<DesignModel> {
    mutation_candidates(model)
        .into_iter()
        .map(|child| prune_mode_graph(&child))
        .filter(|child| check_feasible(child).is_ok())
        .collect()
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub model: DesignModel,
    /// Requirements cost of the parent after optimization; generation-0
    /// candidates use their own simulated cost.
    pub parent_cost: f64,
    pub hash: StructuralHash,
}

/// A design whose optimized requirements cost met the threshold.
#[derive(Debug, Clone)]
pub struct AcceptedDesign {
    pub model: DesignModel,
    pub cost: f64,
    pub generation: usize,
    pub hash: StructuralHash,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub evaluated: usize,
    /// Best optimized requirements cost of the generation.
    pub best_cost: f64,
    /// Component count of the best optimized design.
    pub best_components: usize,
    pub accepted: usize,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SearchOutcome {
    /// Accepted designs across all generations, one per structural hash
    /// (best cost wins).
    pub accepted: Vec<AcceptedDesign>,
    pub trace: Vec<GenerationRecord>,
}

impl SearchOutcome {
    pub fn best(&self) -> Option<&AcceptedDesign> {
        self.accepted
            .iter()
            .min_by(|a, b| a.cost.total_cmp(&b.cost))
    }

    pub fn trace_csv(&self) -> String {
        let mut out = String::from("gen,best_cost,best_ncomponents,seconds\n");
        for r in &self.trace {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.generation, r.best_cost, r.best_components, r.wall_seconds
            ));
        }
        out
    }
}

fn simulated_cost(model: &DesignModel, target: &crate::sim::Waveform, sim: &SimConfig) -> f64 {
    match total_loss(model, target, 0.0, sim) {
        Ok(loss) => loss.requirements,
        Err(_) => f64::INFINITY,
    }
}

/// Optimize the component parameters of a discrete candidate in place;
/// returns the optimized model and its requirements cost.
fn optimize_candidate(
    model: &DesignModel,
    target: &crate::sim::Waveform,
    cfg: &SearchConfig,
) -> Result<(DesignModel, f64), SearchError> {
    let layout = TransformLayout::for_model(model, &cfg.bounds);
    if layout.is_empty() {
        return Ok((model.clone(), simulated_cost(model, target, &cfg.sim)));
    }
    let x0 = layout.to_unconstrained(&model.pack_variables());
    let mut scratch = model.clone();
    let mut physical = Vec::with_capacity(layout.len());
    let objective = |x: &[f64]| -> f64 {
        layout.to_physical(x, &mut physical);
        scratch
            .unpack_variables_into(&physical)
            .expect("layout matches model");
        simulated_cost(&scratch, target, &cfg.sim)
    };
    let result = minimize(objective, &x0, &cfg.inner)?;
    let mut best = model.clone();
    layout.to_physical(&result.x_star, &mut physical);
    best.unpack_variables_into(&physical)
        .expect("layout matches model");
    Ok((best, result.f_star))
}

/// Cost-guided random search. The template model supplies the topology and
/// boundary scenario; its edge states are ignored.
pub fn run_search(
    template: &DesignModel,
    target: &crate::sim::Waveform,
    cfg: &SearchConfig,
) -> Result<SearchOutcome, SearchError> {
    if cfg.n_o > cfg.n_s {
        return Err(SearchError::BudgetOrder {
            n_o: cfg.n_o,
            n_s: cfg.n_s,
        });
    }
    let topology = &template.topology;
    let mut outcome = SearchOutcome::default();
    let mut accepted_hashes: BTreeSet<u64> = BTreeSet::new();
    let mut global_seen: BTreeSet<u64> = BTreeSet::new();

    // Generation 0: up to n_s unique feasible random mode assignments.
    let mut pool: Vec<Candidate> = Vec::with_capacity(cfg.n_s);
    {
        let mut seen: BTreeSet<u64> = BTreeSet::new();
        let mut attempts = 0usize;
        let mut feasible = 0usize;
        let mut duplicates = 0usize;
        let max_attempts = 200 * cfg.n_s;
        let mut draw = 0u64;
        while pool.len() < cfg.n_s && attempts < max_attempts {
            attempts += 1;
            let model = DesignModel::sample_random(
                topology.clone(),
                template.source.clone(),
                template.load_resistance,
                template.epsilon,
                seeds::derive(cfg.seed, "gen0", draw),
                &cfg.bounds,
            );
            draw += 1;
            if !check_feasible(&model).is_ok() {
                continue;
            }
            feasible += 1;
            let hash = canonical_hash(&model);
            if !seen.insert(hash.0) {
                duplicates += 1;
                continue;
            }
            pool.push(Candidate {
                model,
                parent_cost: f64::NAN, // own simulated cost, patched below
                hash,
            });
        }
        if pool.is_empty() {
            return Err(SearchError::NoFeasibleCandidates {
                attempts,
                feasible,
                duplicates,
            });
        }
        global_seen.extend(pool.iter().map(|c| c.hash.0));
    }

    for generation in 0.. {
        let t_gen = Instant::now();

        // Simulate the pool concurrently; gather in index order.
        let costs: Vec<f64> = pool
            .par_iter()
            .map(|c| simulated_cost(&c.model, target, &cfg.sim))
            .collect();
        if generation == 0 {
            for (c, &cost) in pool.iter_mut().zip(&costs) {
                c.parent_cost = cost;
            }
        }

        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.sort_by(|&i, &j| costs[i].total_cmp(&costs[j]).then(i.cmp(&j)));
        let top: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&i| costs[i].is_finite())
            .take(cfg.n_o)
            .collect();

        let optimized: Vec<(usize, DesignModel, f64)> = top
            .par_iter()
            .map(|&i| {
                optimize_candidate(&pool[i].model, target, cfg).map(|(m, c)| (i, m, c))
            })
            .collect::<Result<_, _>>()?;

        let mut generation_accepted: Vec<(usize, DesignModel, f64)> = Vec::new();
        let mut best_cost = f64::INFINITY;
        let mut best_components = 0usize;
        for (i, model, cost) in &optimized {
            if *cost < best_cost {
                best_cost = *cost;
                best_components = model.component_edge_count();
            }
            if *cost <= cfg.c_th {
                generation_accepted.push((*i, model.clone(), *cost));
            }
        }
        let record = GenerationRecord {
            generation,
            evaluated: pool.len(),
            best_cost,
            best_components,
            accepted: generation_accepted.len(),
            wall_seconds: t_gen.elapsed().as_secs_f64(),
        };
        outcome.trace.push(record);

        if generation_accepted.is_empty() {
            break; // min optimized cost above threshold: done
        }
        for (_, model, cost) in &generation_accepted {
            let hash = canonical_hash(model);
            if accepted_hashes.insert(hash.0) {
                outcome.accepted.push(AcceptedDesign {
                    model: model.clone(),
                    cost: *cost,
                    generation,
                    hash,
                });
            } else if let Some(existing) = outcome
                .accepted
                .iter_mut()
                .find(|d| d.hash == hash && *cost < d.cost)
            {
                existing.model = model.clone();
                existing.cost = *cost;
                existing.generation = generation;
            }
        }

        // Mutate the accepted designs into the next generation, deduped
        // against the nascent generation and its parents.
        generation_accepted.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)));
        let mut seen: BTreeSet<u64> = if cfg.global_dedup {
            global_seen.clone()
        } else {
            generation_accepted
                .iter()
                .map(|(_, m, _)| canonical_hash(m).0)
                .collect()
        };
        let mut next: Vec<Candidate> = Vec::new();
        for (_, parent, parent_cost) in &generation_accepted {
            for child in mutate(parent) {
                let hash = canonical_hash(&child);
                if !seen.insert(hash.0) {
                    continue;
                }
                next.push(Candidate {
                    model: child,
                    parent_cost: *parent_cost,
                    hash,
                });
            }
        }
        if next.is_empty() {
            break; // mutation exhaustion
        }
        if next.len() > cfg.n_s {
            // Stable on parent cost: cheaper parents keep their children.
            let mut idx: Vec<usize> = (0..next.len()).collect();
            idx.sort_by(|&i, &j| {
                next[i]
                    .parent_cost
                    .total_cmp(&next[j].parent_cost)
                    .then(i.cmp(&j))
            });
            idx.truncate(cfg.n_s);
            idx.sort_unstable();
            let mut keep = Vec::with_capacity(cfg.n_s);
            for (k, c) in next.into_iter().enumerate() {
                if idx.binary_search(&k).is_ok() {
                    keep.push(c);
                }
            }
            next = keep;
        }
        global_seen.extend(next.iter().map(|c| c.hash.0));
        pool = next;
    }

    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_grid, NodeId, SourceSpec, TopoEdge, DEFAULT_EPSILON};
    use crate::sim::transient;
    use std::collections::BTreeMap;

    fn discrete_model(modes: &[(usize, Mode)], rows: usize, cols: usize) -> DesignModel {
        let topo = generate_grid(rows, cols).unwrap();
        let mut states: BTreeMap<usize, EdgeState> = topo
            .edges
            .iter()
            .map(|e| (e.id, EdgeState::Mode(Mode::Open)))
            .collect();
        for (id, mode) in modes {
            states.insert(*id, EdgeState::Mode(*mode));
        }
        DesignModel::new(
            topo,
            states,
            SourceSpec::Step { amplitude: 1.0 },
            100.0,
            DEFAULT_EPSILON,
        )
        .unwrap()
    }

    #[test]
    fn hash_ignores_parameter_values() {
        let a = discrete_model(&[(0, Mode::Resistor(10.0)), (1, Mode::Capacitor(1e-6))], 2, 2);
        let b = discrete_model(&[(0, Mode::Resistor(77.0)), (1, Mode::Capacitor(3e-3))], 2, 2);
        assert_eq!(canonical_hash(&a), canonical_hash(&b));
    }

    #[test]
    fn hash_distinguishes_modes() {
        let a = discrete_model(&[(0, Mode::Resistor(10.0))], 2, 2);
        let b = discrete_model(&[(0, Mode::Capacitor(10.0))], 2, 2);
        assert_ne!(canonical_hash(&a), canonical_hash(&b));
    }

    #[test]
    fn hash_invariant_under_internal_relabeling() {
        // 2x2 grid: nodes 1..4, boundary fixes 3 (source) and 4 (load);
        // swapping the internal nodes 1 and 2 relabels edges only.
        let model = discrete_model(
            &[(0, Mode::Resistor(1.0)), (2, Mode::Inductor(1.0)), (3, Mode::Capacitor(1.0))],
            2,
            2,
        );
        let mut swapped = model.clone();
        let swap = |n: NodeId| match n.0 {
            1 => NodeId(2),
            2 => NodeId(1),
            other => NodeId(other),
        };
        swapped.topology.edges = swapped
            .topology
            .edges
            .iter()
            .map(|e| TopoEdge {
                id: e.id,
                a: swap(e.a),
                b: swap(e.b),
            })
            .collect();
        assert_eq!(canonical_hash(&model), canonical_hash(&swapped));
    }

    #[test]
    fn mutation_candidate_count() {
        let model = discrete_model(
            &[(0, Mode::Resistor(1.0)), (1, Mode::Inductor(1.0)), (2, Mode::Short)],
            2,
            2,
        );
        // Two component edges -> four raw children.
        assert_eq!(mutation_candidates(&model).len(), 4);
    }

    #[test]
    fn all_short_model_has_no_mutations() {
        let topo = generate_grid(2, 2).unwrap();
        let states = topo
            .edges
            .iter()
            .map(|e| (e.id, EdgeState::Mode(Mode::Short)))
            .collect();
        let model = DesignModel::new(
            topo,
            states,
            SourceSpec::Step { amplitude: 1.0 },
            1.0,
            DEFAULT_EPSILON,
        )
        .unwrap();
        assert!(mutation_candidates(&model).is_empty());
        assert!(mutate(&model).is_empty());
    }

    #[test]
    fn disconnecting_mutations_are_dropped() {
        // 1x3 path: opening either series edge severs source from load.
        let topo = generate_grid(1, 3).unwrap();
        let states = BTreeMap::from([
            (0, EdgeState::Mode(Mode::Resistor(10.0))),
            (1, EdgeState::Mode(Mode::Resistor(20.0))),
        ]);
        let model = DesignModel::new(
            topo,
            states,
            SourceSpec::Step { amplitude: 1.0 },
            100.0,
            DEFAULT_EPSILON,
        )
        .unwrap();
        let children = mutate(&model);
        // Open children are infeasible; only the two short children remain.
        assert_eq!(children.len(), 2);
        for child in &children {
            assert!(check_feasible(child).is_ok());
        }
    }

    #[test]
    fn prune_opens_dangling_mode_edges() {
        // Edge 1 hangs off the main path on a 2x2 grid.
        let model = discrete_model(
            &[(3, Mode::Resistor(10.0)), (0, Mode::Capacitor(1e-6))],
            2,
            2,
        );
        let pruned = prune_mode_graph(&model);
        assert!(pruned.edge_states[&0].is_open(), "dangling edge kept");
        assert!(!pruned.edge_states[&3].is_open());
    }

    fn search_target(sim: &SimConfig) -> crate::sim::Waveform {
        // Series 300 + 700 ohm across the 1x3 grid into the 100 ohm load.
        let model = {
            let topo = generate_grid(1, 3).unwrap();
            let states = BTreeMap::from([
                (0, EdgeState::Mode(Mode::Resistor(300.0))),
                (1, EdgeState::Mode(Mode::Resistor(700.0))),
            ]);
            DesignModel::new(
                topo,
                states,
                SourceSpec::Step { amplitude: 1.0 },
                100.0,
                DEFAULT_EPSILON,
            )
            .unwrap()
        };
        transient(&model, sim).unwrap()
    }

    fn desk_cfg(seed: u64, c_th: f64) -> SearchConfig {
        let sim = SimConfig::new(1e-3, 5e-6);
        SearchConfig {
            n_s: 64,
            n_o: 4,
            inner: OptimizerConfig {
                max_iterations: 20,
                max_evaluations: 1500,
                ..OptimizerConfig::default()
            },
            ..SearchConfig::new(sim, c_th, seed)
        }
    }

    #[test]
    fn finds_series_resistor_target() {
        let cfg = desk_cfg(11, 0.0);
        let cfg = SearchConfig {
            c_th: 0.05 * search_target(&cfg.sim).mean_square(),
            ..cfg
        };
        let target = search_target(&cfg.sim);
        let template = DesignModel::sample_random(
            generate_grid(1, 3).unwrap(),
            SourceSpec::Step { amplitude: 1.0 },
            100.0,
            DEFAULT_EPSILON,
            0,
            &cfg.bounds,
        );
        let outcome = run_search(&template, &target, &cfg).unwrap();
        assert!(!outcome.accepted.is_empty());
        assert!(outcome.trace.len() >= 1);
        let first_accepting = outcome
            .accepted
            .iter()
            .map(|d| d.generation)
            .min()
            .unwrap();
        assert!(first_accepting < 2, "accepted only at generation {first_accepting}");
        for design in &outcome.accepted {
            assert!(design.cost <= cfg.c_th);
        }
    }

    #[test]
    fn generous_threshold_terminates_by_exhaustion() {
        let cfg = desk_cfg(3, 1e12);
        let target = search_target(&cfg.sim);
        let template = DesignModel::sample_random(
            generate_grid(1, 3).unwrap(),
            SourceSpec::Step { amplitude: 1.0 },
            100.0,
            DEFAULT_EPSILON,
            0,
            &cfg.bounds,
        );
        let outcome = run_search(&template, &target, &cfg).unwrap();
        // Every generation accepted something, so the loop can only have
        // ended by running out of mutations.
        for record in &outcome.trace {
            assert!(record.accepted > 0);
        }
        assert!(!outcome.accepted.is_empty());
    }

    #[test]
    fn budget_order_is_validated() {
        let cfg = SearchConfig {
            n_s: 4,
            n_o: 9,
            ..desk_cfg(0, 1.0)
        };
        let target = search_target(&cfg.sim);
        let template = DesignModel::sample_random(
            generate_grid(1, 3).unwrap(),
            SourceSpec::Step { amplitude: 1.0 },
            100.0,
            DEFAULT_EPSILON,
            0,
            &cfg.bounds,
        );
        assert!(matches!(
            run_search(&template, &target, &cfg),
            Err(SearchError::BudgetOrder { .. })
        ));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let cfg = desk_cfg(21, 1e-4);
        let target = search_target(&cfg.sim);
        let template = DesignModel::sample_random(
            generate_grid(1, 3).unwrap(),
            SourceSpec::Step { amplitude: 1.0 },
            100.0,
            DEFAULT_EPSILON,
            0,
            &cfg.bounds,
        );
        let a = run_search(&template, &target, &cfg).unwrap();
        let b = run_search(&template, &target, &cfg).unwrap();
        let strip = |o: &SearchOutcome| {
            (
                o.accepted
                    .iter()
                    .map(|d| (d.model.clone(), d.cost, d.generation, d.hash))
                    .collect::<Vec<_>>(),
                o.trace
                    .iter()
                    .map(|r| (r.generation, r.evaluated, r.best_cost, r.accepted))
                    .collect::<Vec<_>>(),
            )
        };
        assert_eq!(strip(&a), strip(&b));
    }
}
