//! Cost/demand graph pairs, Laplacians and cut sparsity.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Weights on unordered vertex pairs, keyed by `(i, j)` with `i < j`.
pub type PairWeights = BTreeMap<(usize, usize), f64>;

/// A cost graph and a demand graph on the same `n` vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraphPair {
    n: usize,
    cost: PairWeights,
    demand: PairWeights,
}

impl WeightedGraphPair {
    /// Builds a pair from edge lists. Pairs are canonicalised to `i < j`,
    /// duplicates are summed and zero weights are dropped.
    pub fn from_edges<C, D>(n: usize, cost: C, demand: D) -> Result<Self>
    where
        C: IntoIterator<Item = (usize, usize, f64)>,
        D: IntoIterator<Item = (usize, usize, f64)>,
    {
        if n < 2 {
            return Err(Error::input(format!("vertex count must be at least 2, got {n}")));
        }
        let cost = collect_pairs(n, cost, "cost")?;
        let demand = collect_pairs(n, demand, "demand")?;
        let total: f64 = demand.values().sum();
        if total <= 0.0 {
            return Err(Error::input("total demand must be positive"));
        }
        Ok(Self { n, cost, demand })
    }

    pub fn new(n: usize, cost: PairWeights, demand: PairWeights) -> Result<Self> {
        Self::from_edges(
            n,
            cost.into_iter().map(|((i, j), w)| (i, j, w)),
            demand.into_iter().map(|((i, j), w)| (i, j, w)),
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cost(&self) -> &PairWeights {
        &self.cost
    }

    pub fn demand(&self) -> &PairWeights {
        &self.demand
    }

    pub fn total_cost(&self) -> f64 {
        self.cost.values().sum()
    }

    pub fn total_demand(&self) -> f64 {
        self.demand.values().sum()
    }

    pub fn cost_laplacian(&self) -> DMatrix<f64> {
        laplacian(&self.cost, self.n).expect("pairs validated on construction")
    }

    pub fn demand_laplacian(&self) -> DMatrix<f64> {
        laplacian(&self.demand, self.n).expect("pairs validated on construction")
    }

    /// Dense symmetric cost weight matrix with zero diagonal.
    pub fn cost_matrix(&self) -> DMatrix<f64> {
        dense_weights(&self.cost, self.n)
    }

    /// Dense symmetric demand weight matrix with zero diagonal.
    pub fn demand_matrix(&self) -> DMatrix<f64> {
        dense_weights(&self.demand, self.n)
    }

    /// Relabels vertex `v` as `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::input("permutation length does not match vertex count"));
        }
        let map = |w: &PairWeights| {
            w.iter()
                .map(|(&(i, j), &x)| (perm[i], perm[j], x))
                .collect::<Vec<_>>()
        };
        Self::from_edges(self.n, map(&self.cost), map(&self.demand))
    }
}

fn collect_pairs<I>(n: usize, edges: I, what: &str) -> Result<PairWeights>
where
    I: IntoIterator<Item = (usize, usize, f64)>,
{
    let mut out = PairWeights::new();
    for (i, j, w) in edges {
        if i == j {
            return Err(Error::input(format!("{what} self-loop on vertex {i}")));
        }
        if i >= n || j >= n {
            return Err(Error::input(format!(
                "{what} pair ({i}, {j}) out of range for {n} vertices"
            )));
        }
        if !w.is_finite() || w < 0.0 {
            return Err(Error::input(format!("{what} weight {w} on ({i}, {j}) must be finite and non-negative")));
        }
        *out.entry((i.min(j), i.max(j))).or_insert(0.0) += w;
    }
    out.retain(|_, w| *w > 0.0);
    Ok(out)
}

fn dense_weights(weights: &PairWeights, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for (&(i, j), &w) in weights {
        m[(i, j)] = w;
        m[(j, i)] = w;
    }
    m
}

/// Laplacian of a weighted graph: `-W(i,j)` off the diagonal, weighted degree on it.
pub fn laplacian(weights: &PairWeights, n: usize) -> Result<DMatrix<f64>> {
    let mut l = DMatrix::zeros(n, n);
    for (&(i, j), &w) in weights {
        if i >= n || j >= n {
            return Err(Error::input(format!("pair ({i}, {j}) out of range for {n} vertices")));
        }
        if i == j {
            return Err(Error::input(format!("self-loop on vertex {i}")));
        }
        l[(i, j)] -= w;
        l[(j, i)] -= w;
        l[(i, i)] += w;
        l[(j, j)] += w;
    }
    Ok(l)
}

/// A vertex subset `S`, stored as a membership vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cut {
    members: Vec<bool>,
}

impl Cut {
    pub fn from_members(members: Vec<bool>) -> Self {
        Self { members }
    }

    /// Cut on `n` vertices containing exactly `vertices`.
    pub fn from_vertices(n: usize, vertices: impl IntoIterator<Item = usize>) -> Self {
        let mut members = vec![false; n];
        for v in vertices {
            members[v] = true;
        }
        Self { members }
    }

    /// Cut whose members are the set bits of `mask`.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        Self {
            members: (0..n).map(|i| mask >> i & 1 == 1).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> &[bool] {
        &self.members
    }

    pub fn contains(&self, v: usize) -> bool {
        self.members[v]
    }

    pub fn len(&self) -> usize {
        self.members.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `S` is neither empty nor the whole vertex set.
    pub fn is_proper(&self) -> bool {
        let k = self.len();
        k > 0 && k < self.members.len()
    }

    pub fn complement(&self) -> Self {
        Self {
            members: self.members.iter().map(|b| !b).collect(),
        }
    }

    pub fn vertices(&self) -> Vec<usize> {
        (0..self.members.len()).filter(|&i| self.members[i]).collect()
    }

    /// The 0/1 indicator vector `1_S`.
    pub fn indicator(&self) -> Vec<f64> {
        self.members.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// A cut together with its crossing weights and sparsity.
#[derive(Debug, Clone, PartialEq)]
pub struct CutResult {
    pub cut: Cut,
    pub cost_cut: f64,
    pub demand_cut: f64,
    /// `cost_cut / demand_cut`, or `+inf` when no demand crosses.
    pub sparsity: f64,
}

fn crossing(weights: &PairWeights, s: &Cut) -> f64 {
    weights
        .iter()
        .filter(|(&(i, j), _)| s.contains(i) != s.contains(j))
        .map(|(_, &w)| w)
        .sum()
}

/// Evaluates `Φ(S)`.
pub fn sparsity(g: &WeightedGraphPair, s: &Cut) -> CutResult {
    assert_eq!(s.n(), g.n(), "cut size does not match the graph");
    let cost_cut = crossing(&g.cost, s);
    let demand_cut = crossing(&g.demand, s);
    let sparsity = if demand_cut > 0.0 {
        cost_cut / demand_cut
    } else {
        f64::INFINITY
    };
    CutResult {
        cut: s.clone(),
        cost_cut,
        demand_cut,
        sparsity,
    }
}

/// Threshold cut `{ i : values[i] <= values[t] }`.
pub fn sweep_cut_from_values(values: &[f64], t: usize) -> Cut {
    let threshold = values[t];
    Cut::from_members(values.iter().map(|&v| v <= threshold).collect())
}
