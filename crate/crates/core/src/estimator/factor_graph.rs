use std::ops::Range;

use super::linear::LinearModel;

/// Coefficients with magnitude below this are dropped when building edges.
pub const COEFFICIENT_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub observation: f64,
    pub variance: f64,
    /// Bus hosting the PMU that produced the observation.
    pub home_bus: usize,
    /// Edge indices of this factor (edges are stored grouped by factor).
    pub edges: Range<usize>,
}

impl Factor {
    pub fn degree(&self) -> usize {
        self.edges.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub factor: usize,
    pub variable: usize,
    pub coefficient: f64,
}

/// Bipartite graph of scalar measurement factors and state-component variables.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorGraph {
    pub factors: Vec<Factor>,
    pub edges: Vec<Edge>,
    /// For each variable, its incident edge indices in ascending order.
    pub variable_edges: Vec<Vec<usize>>,
}

impl FactorGraph {
    pub fn build(lm: &LinearModel) -> Self {
        let mut factors = Vec::with_capacity(lm.len());
        let mut edges = Vec::with_capacity(lm.nnz());
        let mut variable_edges = vec![Vec::new(); lm.columns];
        for (f, row) in lm.rows.iter().enumerate() {
            let start = edges.len();
            for &(variable, coefficient) in row {
                if coefficient.abs() < COEFFICIENT_EPSILON {
                    continue;
                }
                variable_edges[variable].push(edges.len());
                edges.push(Edge {
                    factor: f,
                    variable,
                    coefficient,
                });
            }
            factors.push(Factor {
                observation: lm.observations[f],
                variance: lm.variances[f],
                home_bus: lm.home_buses[f],
                edges: start..edges.len(),
            });
        }
        FactorGraph {
            factors,
            edges,
            variable_edges,
        }
    }

    pub fn variable_count(&self) -> usize {
        self.variable_edges.len()
    }

    pub fn bus_count(&self) -> usize {
        self.variable_count() / 2
    }

    /// Bus whose voltage a state component belongs to.
    pub fn variable_bus(&self, variable: usize) -> usize {
        variable % self.bus_count()
    }

    /// Whether the bipartite graph is a forest.
    pub fn is_tree(&self) -> bool {
        let nodes = self.factors.len() + self.variable_count();
        let mut parent: Vec<usize> = (0..nodes).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in &self.edges {
            let a = find(&mut parent, e.factor);
            let b = find(&mut parent, self.factors.len() + e.variable);
            if a == b {
                return false;
            }
            parent[a] = b;
        }
        true
    }
}
