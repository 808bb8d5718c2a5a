//! Logical-time simulation of edge agents running the estimators.
//!
//! GBP: every agent owns the state components of its buses and computes the
//! factor→variable and variable→factor messages on their edges. After each
//! sweep it sends one batch per neighboring agent with the variable→factor
//! messages that agent needs next sweep, and all agents wait at a barrier
//! until every batch has arrived. Per-edge updates come from the same
//! [`GbpEngine`] as the centralized solver, so the iterates are bitwise
//! identical to [`gbp_run`](crate::estimator::gbp_run).
//!
//! GNN: every bus gathers its k-hop neighborhood. A gather round moves data
//! across one partition boundary; the number of rounds is the largest number
//! of boundaries crossed along a shortest path from any bus to a target within
//! its neighborhood. Inference then runs locally in one compute step.

use std::collections::{BTreeMap, VecDeque};

use super::delay::{Component, DelayModel};
use super::partition::AgentPartition;
use super::report::{CompletionRecord, Event, EventKind};
use crate::error::{Error, Result};
use crate::estimator::{FactorGraph, GaussianMessage, GbpConfig, GbpEngine, Method};
use crate::gnn::{infer_khop, GnnModel, KhopNeighborhood, NodeFeatures};
use crate::power::StateVector;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutcome {
    pub estimate: StateVector,
    /// One entry per GBP sweep; a single entry for the GNN.
    pub iterates: Vec<StateVector>,
    pub converged: bool,
    pub record: CompletionRecord,
    /// Times count from the frame instant.
    pub events: Vec<Event>,
}

/// Compensated running sum of step durations, so that e.g. ten 0.1 ms steps
/// total exactly 1.0 ms.
#[derive(Debug, Default)]
struct Elapsed {
    sum: f64,
    carry: f64,
}

impl Elapsed {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

fn sort_events(events: &mut [Event]) {
    events.sort_by(|a, b| {
        a.time_ms
            .total_cmp(&b.time_ms)
            .then(a.agent.cmp(&b.agent))
            .then(a.kind.cmp(&b.kind))
            .then(a.peer.cmp(&b.peer))
    });
}

fn ingest_all(dm: &DelayModel, tau: usize, agents: usize, events: &mut Vec<Event>) -> f64 {
    let mut ready: f64 = 0.0;
    for a in 0..agents {
        let t = dm.ingest(tau, a);
        events.push(Event {
            time_ms: t,
            agent: a,
            kind: EventKind::Ingest,
            peer: None,
            payload: 0,
        });
        ready = ready.max(t);
    }
    ready
}

fn estimate_events(agents: usize, time_ms: f64, events: &mut Vec<Event>) {
    for a in 0..agents {
        events.push(Event {
            time_ms,
            agent: a,
            kind: EventKind::Estimate,
            peer: None,
            payload: 0,
        });
    }
}

/// Variable→factor messages each ordered agent pair exchanges per sweep.
pub fn gbp_batches(fg: &FactorGraph, part: &AgentPartition) -> BTreeMap<(usize, usize), Vec<usize>> {
    let owner: Vec<usize> = fg.edges.iter().map(|e| part.agent_of(fg.variable_bus(e.variable))).collect();
    let mut batches: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for f in &fg.factors {
        for e in f.edges.clone() {
            for t in f.edges.clone() {
                if owner[t] != owner[e] {
                    batches.entry((owner[e], owner[t])).or_default().push(e);
                }
            }
        }
    }
    for edges in batches.values_mut() {
        edges.sort_unstable();
        edges.dedup();
    }
    batches
}

struct AgentState {
    edges: Vec<usize>,
    variables: Vec<usize>,
    v2f: Vec<GaussianMessage>,
    f2v: Vec<GaussianMessage>,
}

/// Runs GBP across the partition's agents for frame `tau`.
pub fn simulate_gbp_run(
    fg: &FactorGraph,
    part: &AgentPartition,
    dm: &DelayModel,
    cfg: &GbpConfig,
    tau: usize,
) -> Result<SimulationOutcome> {
    cfg.validate()?;
    dm.validate()?;
    if cfg.max_iterations == 0 {
        return Err(Error::Config("belief propagation needs at least one iteration".into()));
    }
    if part.bus_count() != fg.bus_count() {
        return Err(Error::Dimension(format!(
            "partition covers {} buses, factor graph has {}",
            part.bus_count(),
            fg.bus_count()
        )));
    }
    let engine = GbpEngine::new(fg, cfg);
    let n_edges = fg.edges.len();
    let initial = engine.initial_messages();
    let mut agents: Vec<AgentState> = (0..part.agents)
        .map(|_| AgentState {
            edges: Vec::new(),
            variables: Vec::new(),
            v2f: initial.clone(),
            f2v: vec![GaussianMessage::FLAT; n_edges],
        })
        .collect();
    for (e, edge) in fg.edges.iter().enumerate() {
        agents[part.agent_of(fg.variable_bus(edge.variable))].edges.push(e);
    }
    for s in 0..fg.variable_count() {
        agents[part.agent_of(fg.variable_bus(s))].variables.push(s);
    }
    let batches = gbp_batches(fg, part);

    let mut events = Vec::new();
    let ingest = ingest_all(dm, tau, part.agents, &mut events);
    let mut elapsed = Elapsed::default();
    let mut iterates: Vec<StateVector> = Vec::new();
    let mut converged = false;
    let mut f2v = vec![GaussianMessage::FLAT; n_edges];
    let mut v2f = vec![GaussianMessage::FLAT; n_edges];
    let mut x = vec![0.0; fg.variable_count()];

    for iteration in 1..=cfg.max_iterations {
        for agent in &mut agents {
            let updated: Vec<GaussianMessage> = agent
                .edges
                .iter()
                .map(|&e| engine.damp(e, iteration, engine.factor_message(e, &agent.v2f), agent.f2v[e]))
                .collect();
            for (&e, m) in agent.edges.iter().zip(updated) {
                agent.f2v[e] = m;
                f2v[e] = m;
            }
        }
        engine.check(iteration, &f2v, "factor-to-variable")?;
        for agent in &mut agents {
            for &e in &agent.edges {
                let m = engine.variable_message(e, &agent.f2v);
                agent.v2f[e] = m;
                v2f[e] = m;
            }
            for &s in &agent.variables {
                x[s] = engine.marginal_mean(s, &agent.f2v);
            }
        }
        engine.check(iteration, &v2f, "variable-to-factor")?;

        let clock = ingest + elapsed.value();
        let mut step: f64 = 0.0;
        let mut done = vec![0.0; part.agents];
        for (a, t) in done.iter_mut().enumerate() {
            *t = dm.draw(tau, Component::EdgeCompute, &[iteration as u64, a as u64]);
            events.push(Event {
                time_ms: clock + *t,
                agent: a,
                kind: EventKind::Compute,
                peer: None,
                payload: agents[a].edges.len(),
            });
            step = step.max(*t);
        }
        for (&(from, to), edges) in &batches {
            let arrival = done[from] + dm.draw(tau, Component::Interagent, &[iteration as u64, from as u64, to as u64]);
            for &e in edges {
                let m = agents[from].v2f[e];
                agents[to].v2f[e] = m;
            }
            events.push(Event {
                time_ms: clock + done[from],
                agent: from,
                kind: EventKind::Send,
                peer: Some(to),
                payload: edges.len(),
            });
            events.push(Event {
                time_ms: clock + arrival,
                agent: to,
                kind: EventKind::Receive,
                peer: Some(from),
                payload: edges.len(),
            });
            step = step.max(arrival);
        }
        elapsed.add(step);

        let state = StateVector::from_values(x.clone());
        if !state.is_finite() {
            return Err(Error::NonFinite {
                iteration,
                detail: "marginal mean".into(),
            });
        }
        let change = iterates.last().map(|prev| prev.max_abs_diff(&state));
        iterates.push(state);
        if change.is_some_and(|c| c <= cfg.tolerance) {
            converged = true;
            break;
        }
    }

    let completion = ingest + elapsed.value();
    estimate_events(part.agents, completion, &mut events);
    sort_events(&mut events);
    Ok(SimulationOutcome {
        estimate: iterates.last().cloned().expect("at least one sweep"),
        record: CompletionRecord {
            tau,
            method: Method::Gbp,
            iterations: iterates.len(),
            gather_rounds: 0,
            ingest_ms: ingest,
            completion_ms: completion,
            deadline_met: completion <= dm.pmu_report_period,
            normalized_wrss: None,
        },
        iterates,
        converged,
        events,
    })
}

/// Largest number of agent boundaries a k-hop gather has to cross.
///
/// For each target and each bus within `k` hops, the count is minimized over
/// shortest paths between them.
pub fn gather_rounds(adjacency: &[Vec<usize>], part: &AgentPartition, k: usize) -> usize {
    let n = adjacency.len();
    let mut rounds = 0;
    for target in 0..n {
        let mut dist = vec![usize::MAX; n];
        let mut crossings = vec![usize::MAX; n];
        dist[target] = 0;
        crossings[target] = 0;
        let mut queue = VecDeque::from([target]);
        while let Some(u) = queue.pop_front() {
            if dist[u] == k {
                continue;
            }
            for &v in &adjacency[u] {
                let c = crossings[u] + usize::from(part.agent_of(u) != part.agent_of(v));
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    crossings[v] = c;
                    queue.push_back(v);
                } else if dist[v] == dist[u] + 1 {
                    crossings[v] = crossings[v].min(c);
                }
            }
        }
        rounds = rounds.max(crossings.iter().filter(|&&c| c != usize::MAX).copied().max().unwrap_or(0));
    }
    rounds
}

/// Runs per-bus k-hop GNN inference across the partition's agents for frame `tau`.
pub fn simulate_gnn_run(
    model: &GnnModel,
    part: &AgentPartition,
    dm: &DelayModel,
    adjacency: &[Vec<usize>],
    features: &NodeFeatures,
    tau: usize,
) -> Result<SimulationOutcome> {
    dm.validate()?;
    let n = adjacency.len();
    if part.bus_count() != n || features.len() != n {
        return Err(Error::Dimension(format!(
            "partition covers {} buses, graph {n}, features {}",
            part.bus_count(),
            features.len()
        )));
    }
    let k = model.k();
    let mut re = vec![0.0; n];
    let mut im = vec![0.0; n];
    let mut hoods = Vec::with_capacity(n);
    for bus in 0..n {
        let hood = KhopNeighborhood::extract(adjacency, features, bus, k);
        let [r, i] = infer_khop(model, &hood)?;
        re[bus] = r;
        im[bus] = i;
        hoods.push(hood);
    }
    re.extend(im);
    let estimate = StateVector::from_values(re);

    // feature rows each agent ships to each other agent
    let mut payload: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (target, hood) in hoods.iter().enumerate() {
        let to = part.agent_of(target);
        for &g in &hood.nodes {
            let from = part.agent_of(g);
            if from != to {
                payload.entry((from, to)).or_default().push(g);
            }
        }
    }
    for rows in payload.values_mut() {
        rows.sort_unstable();
        rows.dedup();
    }

    let mut events = Vec::new();
    let ingest = ingest_all(dm, tau, part.agents, &mut events);
    let rounds = gather_rounds(adjacency, part, k);
    let mut elapsed = Elapsed::default();
    for round in 1..=rounds {
        let clock = ingest + elapsed.value();
        let mut step: f64 = 0.0;
        for (&(from, to), rows) in &payload {
            let delay = dm.draw(tau, Component::Interagent, &[round as u64, from as u64, to as u64]);
            events.push(Event {
                time_ms: clock,
                agent: from,
                kind: EventKind::Send,
                peer: Some(to),
                payload: rows.len(),
            });
            events.push(Event {
                time_ms: clock + delay,
                agent: to,
                kind: EventKind::Receive,
                peer: Some(from),
                payload: rows.len(),
            });
            step = step.max(delay);
        }
        elapsed.add(step);
    }
    let clock = ingest + elapsed.value();
    let mut compute: f64 = 0.0;
    for a in 0..part.agents {
        let t = dm.draw(tau, Component::EdgeCompute, &[0, a as u64]);
        events.push(Event {
            time_ms: clock + t,
            agent: a,
            kind: EventKind::Compute,
            peer: None,
            payload: part.buses_of(a).len(),
        });
        compute = compute.max(t);
    }
    elapsed.add(compute);
    let done = ingest + elapsed.value();
    estimate_events(part.agents, done, &mut events);
    sort_events(&mut events);
    Ok(SimulationOutcome {
        iterates: vec![estimate.clone()],
        estimate,
        converged: true,
        record: CompletionRecord {
            tau,
            method: Method::Gnn,
            iterations: 1,
            gather_rounds: rounds,
            ingest_ms: ingest,
            completion_ms: done,
            deadline_met: done <= dm.pmu_report_period,
            normalized_wrss: None,
        },
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distnet::partition_buses;
    use crate::estimator::{build_linear_model, gbp_run};
    use crate::gnn::{build_node_features, infer_centralized};
    use crate::measurement::{synthesize_measurements, MeasurementInstance, PmuPlacement};
    use crate::power::{solve_power_flow, AdmittanceModel, PowerSystem};

    fn ieee30_instance(seed: u64) -> (PowerSystem, MeasurementInstance) {
        let sys = PowerSystem::ieee30();
        let x = solve_power_flow(&sys, 1e-10, 20).unwrap().state;
        let p = PmuPlacement::bundled("ieee30", &sys).unwrap();
        let ms = synthesize_measurements(&sys, &[x], &p, 1e-5, seed).unwrap();
        (sys, ms.instances[0].clone())
    }

    fn ieee30_graph(seed: u64) -> (PowerSystem, FactorGraph) {
        let (sys, inst) = ieee30_instance(seed);
        let lm = build_linear_model(&inst, &AdmittanceModel::build(&sys)).unwrap();
        (sys, FactorGraph::build(&lm))
    }

    fn fixed_budget(iterations: usize) -> GbpConfig {
        GbpConfig {
            max_iterations: iterations,
            tolerance: 0.0,
            ..GbpConfig::default()
        }
    }

    #[test]
    fn single_agent_costs_compute_only() {
        let (sys, fg) = ieee30_graph(1);
        let dm = DelayModel {
            edge_compute_per_iteration: 0.1,
            ..DelayModel::zero()
        };
        let out = simulate_gbp_run(&fg, &AgentPartition::single(sys.bus_count()), &dm, &fixed_budget(10), 1).unwrap();
        assert_eq!(out.record.iterations, 10);
        assert_eq!(out.record.completion_ms, out.record.ingest_ms + 1.0);
        assert!(out.events.iter().all(|e| e.kind != EventKind::Send));
    }

    #[test]
    fn two_agents_pay_one_batch_per_sweep() {
        let (sys, fg) = ieee30_graph(1);
        let part = partition_buses(&sys, 2, None).unwrap();
        let dm = DelayModel {
            interagent_per_message_batch: 1.0,
            edge_compute_per_iteration: 0.0,
            ..DelayModel::default()
        };
        let out = simulate_gbp_run(&fg, &part, &dm, &fixed_budget(10), 1).unwrap();
        assert_eq!(out.record.ingest_ms, 3.5);
        assert_eq!(out.record.completion_ms, 13.5);
        assert_eq!(out.events.iter().filter(|e| e.kind == EventKind::Send).count(), 20);
    }

    #[test]
    fn partitioned_iterates_match_centralized_bitwise() {
        let (sys, fg) = ieee30_graph(3);
        let cfg = fixed_budget(40);
        let central = gbp_run(&fg, &cfg).unwrap();
        for agents in [2, 4, 8] {
            let part = partition_buses(&sys, agents, None).unwrap();
            let out = simulate_gbp_run(&fg, &part, &DelayModel::default(), &cfg, 1).unwrap();
            assert_eq!(out.iterates, central.iterates, "A = {agents}");
            assert_eq!(out.estimate, *central.last());
        }
    }

    #[test]
    fn same_seed_same_event_log() {
        let (sys, fg) = ieee30_graph(3);
        let part = partition_buses(&sys, 4, None).unwrap();
        let dm = DelayModel {
            jitter_mean: 0.3,
            seed: 8,
            ..DelayModel::default()
        };
        let a = simulate_gbp_run(&fg, &part, &dm, &fixed_budget(5), 2).unwrap();
        let b = simulate_gbp_run(&fg, &part, &dm, &fixed_budget(5), 2).unwrap();
        assert_eq!(a, b);
        let c = simulate_gbp_run(&fg, &part, &DelayModel { seed: 9, ..dm }, &fixed_budget(5), 2).unwrap();
        assert_ne!(a.record.completion_ms, c.record.completion_ms);
        assert_eq!(a.iterates, c.iterates);
    }

    #[test]
    fn one_cut_branch_needs_one_gather_round() {
        let adjacency = vec![vec![1], vec![0, 2], vec![1, 3], vec![2]];
        let features = NodeFeatures {
            rows: (0..4).map(|b| [1.0, b as f64 * 0.01, 1.0, 0.0, 0.0, 1.0, 0.5]).collect(),
        };
        let part = AgentPartition {
            assignment: vec![0, 0, 1, 1],
            agents: 2,
        };
        let dm = DelayModel {
            interagent_per_message_batch: 1.0,
            ..DelayModel::default()
        };
        let model = GnnModel::identity();
        let out = simulate_gnn_run(&model, &part, &dm, &adjacency, &features, 1).unwrap();
        assert_eq!(out.record.gather_rounds, 1);
        assert_eq!(out.record.completion_ms, 3.5 + 1.0 + 0.05);
        assert_eq!(out.estimate, infer_centralized(&model, &adjacency, &features).unwrap());
        let local = simulate_gnn_run(&model, &AgentPartition::single(4), &dm, &adjacency, &features, 1).unwrap();
        assert_eq!(local.record.gather_rounds, 0);
        assert_eq!(local.record.completion_ms, 3.5 + 0.05);
    }

    #[test]
    fn gather_rounds_never_exceed_k() {
        let sys = PowerSystem::ieee30();
        let adjacency = sys.adjacency();
        let finest = partition_buses(&sys, 30, None).unwrap();
        for k in 0..5 {
            assert_eq!(gather_rounds(&adjacency, &finest, k), k);
            assert_eq!(gather_rounds(&adjacency, &AgentPartition::single(30), k), 0);
        }
    }

    #[test]
    fn gnn_finishes_before_gbp_when_gbp_needs_more_than_k_sweeps() {
        let (sys, inst) = ieee30_instance(5);
        let fg = FactorGraph::build(&build_linear_model(&inst, &AdmittanceModel::build(&sys)).unwrap());
        let features = build_node_features(&inst, &sys);
        let model = GnnModel::identity();
        let dm = DelayModel::default();
        for agents in [1, 4, 8] {
            let part = partition_buses(&sys, agents, None).unwrap();
            let gnn = simulate_gnn_run(&model, &part, &dm, &sys.adjacency(), &features, 1).unwrap();
            let gbp = simulate_gbp_run(&fg, &part, &dm, &fixed_budget(model.k() + 1), 1).unwrap();
            assert!(gnn.record.completion_ms <= gbp.record.completion_ms);
        }
    }
}
