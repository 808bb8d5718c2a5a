use std::collections::VecDeque;

use super::features::{FeatureRow, NodeFeatures};
use super::model::GnnModel;
use crate::error::{Error, Result};
use crate::power::StateVector;

/// Runs every layer over a graph given as sorted adjacency lists and returns
/// the (re, im) readout per node.
fn forward(model: &GnnModel, adjacency: &[Vec<usize>], features: &[FeatureRow]) -> Vec<[f64; 2]> {
    let mut h: Vec<Vec<f64>> = features.iter().map(|r| r.to_vec()).collect();
    for layer in &model.layers {
        let width = h[0].len();
        h = (0..h.len())
            .map(|u| {
                let mut mean = vec![0.0; width];
                let nbrs = &adjacency[u];
                if !nbrs.is_empty() {
                    for &v in nbrs {
                        for (m, x) in mean.iter_mut().zip(&h[v]) {
                            *m += x;
                        }
                    }
                    let count = nbrs.len() as f64;
                    for m in &mut mean {
                        *m /= count;
                    }
                }
                layer.forward(model.activation, &h[u], &mean)
            })
            .collect();
    }
    h.iter().map(|x| model.readout(x)).collect()
}

/// Predicts every bus voltage in one pass over the whole graph.
pub fn infer_centralized(model: &GnnModel, adjacency: &[Vec<usize>], features: &NodeFeatures) -> Result<StateVector> {
    if adjacency.len() != features.len() {
        return Err(Error::Dimension(format!(
            "{} buses in graph, {} feature rows",
            adjacency.len(),
            features.len()
        )));
    }
    if features.is_empty() {
        return Err(Error::Dimension("empty graph".into()));
    }
    let out = forward(model, adjacency, &features.rows);
    let mut values: Vec<f64> = out.iter().map(|o| o[0]).collect();
    values.extend(out.iter().map(|o| o[1]));
    Ok(StateVector::from_values(values))
}

/// Induced subgraph around one bus, as an edge agent would hold it.
#[derive(Debug, Clone, PartialEq)]
pub struct KhopNeighborhood {
    pub target: usize,
    pub radius: usize,
    /// Global bus indices, ascending.
    pub nodes: Vec<usize>,
    /// Local adjacency, each list ascending.
    pub adjacency: Vec<Vec<usize>>,
    /// Degree of each node in the full graph.
    pub full_degree: Vec<usize>,
    pub features: Vec<FeatureRow>,
}

impl KhopNeighborhood {
    /// Gathers every bus within `radius` hops of `target`.
    pub fn extract(adjacency: &[Vec<usize>], features: &NodeFeatures, target: usize, radius: usize) -> Self {
        let mut dist = vec![usize::MAX; adjacency.len()];
        dist[target] = 0;
        let mut queue = VecDeque::from([target]);
        while let Some(u) = queue.pop_front() {
            if dist[u] == radius {
                continue;
            }
            for &v in &adjacency[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        let nodes: Vec<usize> = (0..adjacency.len()).filter(|&u| dist[u] != usize::MAX).collect();
        Self::induced(adjacency, features, target, radius, nodes)
    }

    fn induced(adjacency: &[Vec<usize>], features: &NodeFeatures, target: usize, radius: usize, nodes: Vec<usize>) -> Self {
        let local = |g: usize| nodes.binary_search(&g).ok();
        let local_adj = nodes
            .iter()
            .map(|&g| adjacency[g].iter().filter_map(|&v| local(v)).collect())
            .collect();
        KhopNeighborhood {
            target,
            radius,
            full_degree: nodes.iter().map(|&g| adjacency[g].len()).collect(),
            features: nodes.iter().map(|&g| features.rows[g]).collect(),
            adjacency: local_adj,
            nodes,
        }
    }

    /// Copy with one bus and its edges dropped.
    pub fn without(&self, bus: usize) -> Self {
        let Ok(gone) = self.nodes.binary_search(&bus) else {
            return self.clone();
        };
        let remap = |v: usize| if v > gone { v - 1 } else { v };
        let keep = |i: &usize| *i != gone;
        KhopNeighborhood {
            target: self.target,
            radius: self.radius,
            nodes: self.nodes.iter().enumerate().filter(|(i, _)| keep(i)).map(|(_, &g)| g).collect(),
            adjacency: self
                .adjacency
                .iter()
                .enumerate()
                .filter(|(i, _)| keep(i))
                .map(|(_, nbrs)| nbrs.iter().copied().filter(keep).map(remap).collect())
                .collect(),
            full_degree: self.full_degree.iter().enumerate().filter(|(i, _)| keep(i)).map(|(_, &d)| d).collect(),
            features: self.features.iter().enumerate().filter(|(i, _)| keep(i)).map(|(_, &f)| f).collect(),
        }
    }

    /// Hop distance from the target inside the subgraph.
    fn local_distances(&self, target: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.nodes.len()];
        dist[target] = 0;
        let mut queue = VecDeque::from([target]);
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

/// Predicts the voltage at the neighborhood's target from local data only.
pub fn infer_khop(model: &GnnModel, hood: &KhopNeighborhood) -> Result<[f64; 2]> {
    let k = model.k();
    let incomplete = |detail: String| Error::IncompleteNeighborhood {
        target: hood.target,
        k,
        detail,
    };
    if hood.radius < k {
        return Err(incomplete(format!("radius {} is smaller than the model depth", hood.radius)));
    }
    let Ok(target) = hood.nodes.binary_search(&hood.target) else {
        return Err(incomplete("target bus not in subgraph".into()));
    };
    if hood.adjacency.len() != hood.nodes.len()
        || hood.features.len() != hood.nodes.len()
        || hood.full_degree.len() != hood.nodes.len()
    {
        return Err(Error::Dimension("neighborhood arrays differ in length".into()));
    }
    let dist = hood.local_distances(target);
    for (i, &d) in dist.iter().enumerate() {
        if d < k && hood.adjacency[i].len() != hood.full_degree[i] {
            return Err(incomplete(format!(
                "bus {} at distance {d} has {} of {} neighbors",
                hood.nodes[i],
                hood.adjacency[i].len(),
                hood.full_degree[i]
            )));
        }
    }
    Ok(forward(model, &hood.adjacency, &hood.features)[target])
}
