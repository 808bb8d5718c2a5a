use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::power::PowerSystem;

/// Assignment of buses to edge agents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentPartition {
    /// Agent of each bus, by internal bus index.
    pub assignment: Vec<usize>,
    pub agents: usize,
}

impl AgentPartition {
    pub fn single(buses: usize) -> Self {
        AgentPartition {
            assignment: vec![0; buses],
            agents: 1,
        }
    }

    pub fn agent_of(&self, bus: usize) -> usize {
        self.assignment[bus]
    }

    pub fn bus_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn region_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.agents];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }

    pub fn buses_of(&self, agent: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&b| self.assignment[b] == agent).collect()
    }
}

fn bfs_distances(adjacency: &[Vec<usize>], source: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adjacency.len()];
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        for &v in &adjacency[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Seeds spread by farthest-point selection starting from `first`.
fn spread_seeds(adjacency: &[Vec<usize>], agents: usize, first: usize) -> Vec<usize> {
    let mut seeds = vec![first];
    let mut nearest = bfs_distances(adjacency, first);
    while seeds.len() < agents {
        let next = (0..adjacency.len())
            .filter(|b| !seeds.contains(b))
            .max_by(|&a, &b| nearest[a].cmp(&nearest[b]).then(b.cmp(&a)))
            .expect("fewer seeds than buses");
        seeds.push(next);
        for (n, d) in nearest.iter_mut().zip(bfs_distances(adjacency, next)) {
            *n = (*n).min(d);
        }
    }
    seeds
}

/// Splits the buses among `agents` edge agents.
///
/// An explicit map (original bus id to agent) is used as given. Otherwise
/// regions grow breadth-first from spread seeds, the smallest region
/// claiming its lowest-numbered unassigned neighbor at each step. Seeds are
/// then moved to their region medoids and the growth repeated. Every bus is
/// tried as the first seed and the most even result kept.
pub fn partition_buses(
    system: &PowerSystem,
    agents: usize,
    explicit: Option<&BTreeMap<i64, usize>>,
) -> Result<AgentPartition> {
    let n = system.bus_count();
    if agents == 0 || agents > n {
        return Err(Error::Partition(format!("agent count {agents} outside 1..={n}")));
    }
    if let Some(map) = explicit {
        let mut assignment = vec![usize::MAX; n];
        for (&id, &agent) in map {
            let bus = system
                .index_of(id)
                .ok_or_else(|| Error::Partition(format!("bus {id} is not in the case")))?;
            if agent >= agents {
                return Err(Error::Partition(format!("bus {id} mapped to agent {agent}, only {agents} agents")));
            }
            assignment[bus] = agent;
        }
        if let Some(missing) = assignment.iter().position(|&a| a == usize::MAX) {
            return Err(Error::Partition(format!(
                "bus {} has no agent",
                system.original_ids[missing]
            )));
        }
        return Ok(AgentPartition { assignment, agents });
    }

    let adjacency = system.adjacency();
    let mut best: Option<(usize, Vec<usize>)> = None;
    let distances: Vec<Vec<usize>> = (0..n).map(|b| bfs_distances(&adjacency, b)).collect();
    for first in 0..n {
        let mut seeds = spread_seeds(&adjacency, agents, first);
        for _ in 0..MEDOID_ROUNDS {
            let mut assignment = grow(&adjacency, &seeds);
            rebalance(&adjacency, &mut assignment, agents);
            let mut sizes = vec![0usize; agents];
            for &a in &assignment {
                sizes[a] += 1;
            }
            let spread = sizes.iter().max().unwrap() - sizes.iter().min().unwrap();
            if best.as_ref().is_none_or(|(s, _)| spread < *s) {
                best = Some((spread, assignment.clone()));
            }
            let next = medoids(&distances, &assignment, agents);
            if next == seeds {
                break;
            }
            seeds = next;
        }
    }
    Ok(AgentPartition {
        assignment: best.expect("at least one bus").1,
        agents,
    })
}

fn region_connected_without(adjacency: &[Vec<usize>], assignment: &[usize], removed: usize) -> bool {
    let agent = assignment[removed];
    let members: Vec<usize> = (0..assignment.len())
        .filter(|&b| b != removed && assignment[b] == agent)
        .collect();
    let Some(&start) = members.first() else {
        return false;
    };
    let mut seen = vec![false; assignment.len()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    let mut count = 0;
    while let Some(u) = queue.pop_front() {
        count += 1;
        for &v in &adjacency[u] {
            if v != removed && !seen[v] && assignment[v] == agent {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    count == members.len()
}

/// Moves boundary buses from larger to smaller neighboring regions while that
/// narrows the size gap and keeps the donor connected.
fn rebalance(adjacency: &[Vec<usize>], assignment: &mut [usize], agents: usize) {
    let mut sizes = vec![0usize; agents];
    for &a in assignment.iter() {
        sizes[a] += 1;
    }
    loop {
        let mut best: Option<(usize, usize, usize)> = None;
        for b in 0..assignment.len() {
            let from = assignment[b];
            for &v in &adjacency[b] {
                let to = assignment[v];
                if to == from || sizes[from] < sizes[to] + 2 {
                    continue;
                }
                let gain = sizes[from] - sizes[to];
                if best.is_none_or(|(g, _, _)| gain > g) && region_connected_without(adjacency, assignment, b) {
                    best = Some((gain, b, to));
                }
            }
        }
        let Some((_, bus, to)) = best else {
            return;
        };
        sizes[assignment[bus]] -= 1;
        sizes[to] += 1;
        assignment[bus] = to;
    }
}

const MEDOID_ROUNDS: usize = 8;

/// Per region, the member with the smallest total hop distance to the others.
fn medoids(distances: &[Vec<usize>], assignment: &[usize], agents: usize) -> Vec<usize> {
    (0..agents)
        .map(|a| {
            let members: Vec<usize> = (0..assignment.len()).filter(|&b| assignment[b] == a).collect();
            *members
                .iter()
                .min_by_key(|&&b| {
                    let total: usize = members.iter().map(|&m| distances[b][m].min(assignment.len())).sum();
                    (total, b)
                })
                .expect("regions are non-empty")
        })
        .collect()
}

fn grow(adjacency: &[Vec<usize>], seeds: &[usize]) -> Vec<usize> {
    let n = adjacency.len();
    let agents = seeds.len();
    let mut assignment = vec![usize::MAX; n];
    let mut sizes = vec![0usize; agents];
    for (a, &s) in seeds.iter().enumerate() {
        assignment[s] = a;
        sizes[a] = 1;
    }
    let mut remaining = n - agents;
    while remaining > 0 {
        let mut order: Vec<usize> = (0..agents).collect();
        order.sort_by_key(|&a| (sizes[a], a));
        let claim = order.iter().find_map(|&a| {
            (0..n)
                .filter(|&b| assignment[b] == usize::MAX)
                .find(|&b| adjacency[b].iter().any(|&v| assignment[v] == a))
                .map(|b| (a, b))
        });
        // disconnected leftovers go to the smallest region
        let (a, b) = claim.unwrap_or_else(|| (order[0], assignment.iter().position(|&x| x == usize::MAX).unwrap()));
        assignment[b] = a;
        sizes[a] += 1;
        remaining -= 1;
    }
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_contiguous(system: &PowerSystem, part: &AgentPartition) -> bool {
        let adj = system.adjacency();
        (0..part.agents).all(|a| {
            let members = part.buses_of(a);
            let mut seen = vec![false; adj.len()];
            let mut queue = VecDeque::from([members[0]]);
            seen[members[0]] = true;
            let mut count = 0;
            while let Some(u) = queue.pop_front() {
                count += 1;
                for &v in &adj[u] {
                    if !seen[v] && part.assignment[v] == a {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            count == members.len()
        })
    }

    #[test]
    fn trivial_and_finest_partitions() {
        let sys = PowerSystem::ieee30();
        assert_eq!(partition_buses(&sys, 1, None).unwrap(), AgentPartition::single(30));
        let finest = partition_buses(&sys, 30, None).unwrap();
        assert_eq!(finest.region_sizes(), vec![1; 30]);
        assert!(partition_buses(&sys, 0, None).is_err());
        assert!(partition_buses(&sys, 31, None).is_err());
    }

    #[test]
    fn ieee30_four_regions_are_balanced_and_contiguous() {
        let sys = PowerSystem::ieee30();
        let part = partition_buses(&sys, 4, None).unwrap();
        for size in part.region_sizes() {
            assert!((size as f64 - 7.5).abs() <= 2.0, "{:?}", part.region_sizes());
        }
        assert!(is_contiguous(&sys, &part));
        for agents in [2, 8] {
            assert!(is_contiguous(&sys, &partition_buses(&sys, agents, None).unwrap()));
        }
    }

    #[test]
    fn explicit_map_must_be_total() {
        let sys = PowerSystem::ieee30();
        let mut map: BTreeMap<i64, usize> = sys.original_ids.iter().map(|&id| (id, (id % 3) as usize)).collect();
        let part = partition_buses(&sys, 3, Some(&map)).unwrap();
        assert_eq!(part.agent_of(sys.index_of(7).unwrap()), 1);
        map.remove(&7);
        assert!(matches!(partition_buses(&sys, 3, Some(&map)), Err(Error::Partition(_))));
        map.insert(7, 5);
        assert!(partition_buses(&sys, 3, Some(&map)).is_err());
        map.insert(7, 0);
        map.insert(999, 0);
        assert!(partition_buses(&sys, 3, Some(&map)).is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(30))]
        #[test]
        fn every_bus_has_exactly_one_agent(agents in 1usize..=30) {
            let sys = PowerSystem::ieee30();
            let part = partition_buses(&sys, agents, None).unwrap();
            proptest::prop_assert_eq!(part.assignment.len(), 30);
            proptest::prop_assert!(part.assignment.iter().all(|&a| a < agents));
            proptest::prop_assert!(part.region_sizes().iter().all(|&s| s > 0));
            proptest::prop_assert!(is_contiguous(&sys, &part));
        }
    }
}
