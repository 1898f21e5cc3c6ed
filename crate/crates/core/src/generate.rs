//! Deterministic random instance families.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Cut, WeightedGraphPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Random sparse cost weights, complete unit demand.
    Uniform,
    /// Two dense cost blocks joined by a light bridge, demand across the blocks.
    Planted,
    /// Union of two random Hamiltonian cycles as cost, one demand pair.
    ExpanderVsPair,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Uniform, Family::Planted, Family::ExpanderVsPair];

    pub fn name(self) -> &'static str {
        match self {
            Family::Uniform => "uniform",
            Family::Planted => "planted",
            Family::ExpanderVsPair => "expander-vs-pair",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::input(format!("unknown instance family `{s}`")))
    }
}

fn rng_for(family: Family, seed: u64) -> ChaCha8Rng {
    let salt = match family {
        Family::Uniform => 0x75,
        Family::Planted => 0x70,
        Family::ExpanderVsPair => 0x65,
    };
    ChaCha8Rng::seed_from_u64(seed ^ (salt << 56))
}

pub fn generate(family: Family, n: usize, seed: u64) -> Result<WeightedGraphPair> {
    if n < 2 {
        return Err(Error::input(format!("instances need at least 2 vertices, got {n}")));
    }
    let mut rng = rng_for(family, seed);
    match family {
        Family::Uniform => uniform(n, &mut rng),
        Family::Planted => planted(n, &mut rng),
        Family::ExpanderVsPair => expander_vs_pair(n, &mut rng),
    }
}

fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

fn uniform(n: usize, rng: &mut ChaCha8Rng) -> Result<WeightedGraphPair> {
    let mut cost = Vec::new();
    for (i, j) in pairs(n) {
        if rng.gen_bool(0.5) {
            cost.push((i, j, rng.gen_range(0.05..1.0)));
        }
    }
    WeightedGraphPair::from_edges(n, cost, pairs(n).map(|(i, j)| (i, j, 1.0)))
}

/// Side of the planted bridge cut: the first `ceil(n / 2)` vertices.
pub fn planted_block(n: usize) -> Cut {
    Cut::from_vertices(n, 0..n.div_ceil(2))
}

// Every block pair carries cost >= 1 and the bridge carries < 1 in total, so
// any cut splitting a block costs at least 1 while crossing no more demand
// than the bridge cut. The bridge cut is therefore the unique optimum.
fn planted(n: usize, rng: &mut ChaCha8Rng) -> Result<WeightedGraphPair> {
    let block = planted_block(n);
    let mut cost = Vec::new();
    let mut demand = Vec::new();
    for (i, j) in pairs(n) {
        if block.contains(i) == block.contains(j) {
            cost.push((i, j, rng.gen_range(1.0..2.0)));
        } else {
            demand.push((i, j, rng.gen_range(0.5..1.5)));
        }
    }
    let left: Vec<usize> = (0..n).filter(|&v| block.contains(v)).collect();
    let right: Vec<usize> = (0..n).filter(|&v| !block.contains(v)).collect();
    let bridges = rng.gen_range(1..=2usize);
    for _ in 0..bridges {
        let a = *left.choose(rng).expect("left block is non-empty");
        let b = *right.choose(rng).expect("right block is non-empty");
        cost.push((a, b, rng.gen_range(0.05..0.45)));
    }
    WeightedGraphPair::from_edges(n, cost, demand)
}

fn expander_vs_pair(n: usize, rng: &mut ChaCha8Rng) -> Result<WeightedGraphPair> {
    let mut cost = Vec::new();
    if n == 2 {
        cost.push((0, 1, 1.0));
    } else {
        for _ in 0..2 {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(rng);
            for w in 0..n {
                cost.push((order[w], order[(w + 1) % n], 1.0));
            }
        }
    }
    let a = rng.gen_range(0..n);
    let mut b = rng.gen_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    WeightedGraphPair::from_edges(n, cost, [(a, b, 1.0)])
}
