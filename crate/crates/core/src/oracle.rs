//! Brute-force ground truth for small instances.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{sparsity, Cut, CutResult, WeightedGraphPair};
use crate::sdp::{canonical_triples, SdpProblem, Triple};
use crate::spectral::{generalized_eigenvalues, sym_eig};

/// Largest `n` accepted by [`exact_sparsest_cut`].
pub const MAX_ENUMERATION_N: usize = 24;
/// Largest `n` accepted by [`slow_sdp_check`].
pub const MAX_SLOW_SDP_N: usize = 8;

/// Exact `Φ*` by enumerating every proper cut with vertex 0 on the `S` side.
/// Ties go to the smallest bitmask encoding of `S`.
pub fn exact_sparsest_cut(g: &WeightedGraphPair) -> Result<CutResult> {
    let n = g.n();
    if n > MAX_ENUMERATION_N {
        return Err(Error::input(format!(
            "exhaustive enumeration supports at most {MAX_ENUMERATION_N} vertices, got {n}"
        )));
    }
    let cost: Vec<(usize, usize, f64)> = g.cost().iter().map(|(&(i, j), &w)| (i, j, w)).collect();
    let demand: Vec<(usize, usize, f64)> = g.demand().iter().map(|(&(i, j), &w)| (i, j, w)).collect();
    let crossing = |edges: &[(usize, usize, f64)], mask: u64| -> f64 {
        edges
            .iter()
            .filter(|&&(i, j, _)| (mask >> i ^ mask >> j) & 1 == 1)
            .map(|&(_, _, w)| w)
            .sum()
    };

    let full = (1u64 << n) - 1;
    let mut best: Option<(f64, u64)> = None;
    let mut mask = 1u64;
    while mask < full {
        let d = crossing(&demand, mask);
        if d > 0.0 {
            let phi = crossing(&cost, mask) / d;
            if best.is_none_or(|(b, _)| phi < b) {
                best = Some((phi, mask));
            }
        }
        mask += 2;
    }
    let (_, mask) = best.ok_or(Error::NoProperCut)?;
    Ok(sparsity(g, &Cut::from_mask(n, mask)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CourantFisher {
    pub holds: bool,
    pub lambda_1: f64,
    pub phi_star: f64,
}

/// Checks `λ_1(L_C, L_D) <= Φ* + 1e-7`.
pub fn courant_fisher_check(g: &WeightedGraphPair) -> Result<CourantFisher> {
    let lambda = generalized_eigenvalues(&g.cost_laplacian(), &g.demand_laplacian())?;
    let phi_star = exact_sparsest_cut(g)?.sparsity;
    let lambda_1 = lambda[0];
    Ok(CourantFisher {
        holds: lambda_1 <= phi_star + 1e-7,
        lambda_1,
        phi_star,
    })
}

const SLOW_TOL: f64 = 1e-6;
const SLOW_MAX_ITERS: usize = 200_000;
const HILDRETH_SWEEPS: usize = 400;

/// Euclidean projection onto `{ <D, Z> = 1, <A_t, Z> >= 0 for all t }` by
/// Hildreth's row-action method, warm-started from the multipliers of the
/// previous call.
struct PolyhedralProjector {
    d: DMatrix<f64>,
    d_norm2: f64,
    triples: Vec<Triple>,
    eq_mult: f64,
    ineq_mult: Vec<f64>,
}

impl PolyhedralProjector {
    const TRIPLE_NORM2: f64 = 2.5;

    fn add_triple(m: &mut DMatrix<f64>, t: &Triple, w: f64) {
        m[(t.i, t.k)] += 0.5 * w;
        m[(t.k, t.i)] += 0.5 * w;
        m[(t.i, t.l)] -= 0.5 * w;
        m[(t.l, t.i)] -= 0.5 * w;
        m[(t.k, t.l)] -= 0.5 * w;
        m[(t.l, t.k)] -= 0.5 * w;
        m[(t.l, t.l)] += w;
    }

    fn project(&mut self, w: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = w + &self.d * self.eq_mult;
        for (t, &m) in self.triples.iter().zip(&self.ineq_mult) {
            if m != 0.0 {
                Self::add_triple(&mut z, t, m);
            }
        }
        for _ in 0..HILDRETH_SWEEPS {
            let mut moved: f64 = 0.0;
            let r = (1.0 - self.d.dot(&z)) / self.d_norm2;
            self.eq_mult += r;
            z += &self.d * r;
            moved = moved.max(r.abs() * self.d_norm2.sqrt());
            for (t, m) in self.triples.iter().zip(self.ineq_mult.iter_mut()) {
                let delta = -t.value(&z) / Self::TRIPLE_NORM2;
                let next = (*m + delta).max(0.0);
                let step = next - *m;
                if step != 0.0 {
                    Self::add_triple(&mut z, t, step);
                    *m = next;
                    moved = moved.max(step.abs() * Self::TRIPLE_NORM2.sqrt());
                }
            }
            if moved < 1e-13 {
                break;
            }
        }
        z
    }
}

fn psd_part(v: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = sym_eig(v).expect("iterates are symmetric");
    let n = v.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (c, &w) in eig.values.iter().enumerate() {
        if w > 0.0 {
            let col = eig.vectors.column(c);
            out.ger(w, &col, &col, 1.0);
        }
    }
    out
}

/// Relaxation value by a primal ADMM splitting `X = Z` between the PSD cone
/// and the polyhedron carrying every triangle inequality at once.
pub fn slow_sdp_check(p: &SdpProblem) -> Result<f64> {
    let n = p.n();
    if n > MAX_SLOW_SDP_N {
        return Err(Error::input(format!(
            "slow SDP check supports at most {MAX_SLOW_SDP_N} vertices, got {n}"
        )));
    }
    let d_norm = p.normalization_matrix().norm();
    let c_raw = p.objective_matrix().norm();
    let c_scale = if c_raw > 0.0 { c_raw } else { 1.0 };
    let c = p.objective_matrix() / c_scale;
    let d = p.normalization_matrix() / d_norm;
    let triples: Vec<Triple> = canonical_triples(n).collect();
    let mut proj = PolyhedralProjector {
        d_norm2: d.norm_squared(),
        d,
        ineq_mult: vec![0.0; triples.len()],
        triples,
        eq_mult: 0.0,
    };

    let mut z = p.interior_point() * d_norm;
    let mut u = DMatrix::zeros(n, n);
    let mut rho = 1.0;
    for it in 0..SLOW_MAX_ITERS {
        let x = psd_part(&(&z - &u - &c / rho));
        let z_prev = z;
        z = proj.project(&(&x + &u));
        u += &x - &z;
        let r_primal = (&x - &z).norm();
        let r_dual = rho * (&z - &z_prev).norm();
        if r_primal <= SLOW_TOL && r_dual <= SLOW_TOL {
            let value = c.dot(&x) / proj.d.dot(&x);
            return Ok(value * c_scale / d_norm);
        }
        if it % 10 == 9 {
            if r_primal > 10.0 * r_dual {
                rho *= 2.0;
                u /= 2.0;
            } else if r_dual > 10.0 * r_primal {
                rho /= 2.0;
                u *= 2.0;
            }
        }
    }
    Err(Error::input(format!(
        "slow SDP check did not converge in {SLOW_MAX_ITERS} iterations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate, planted_block, Family};
    use crate::sdp::formulate;

    fn cycle4_complete() -> WeightedGraphPair {
        let cost = [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 1.0)];
        let demand = (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j, 1.0)));
        WeightedGraphPair::from_edges(4, cost, demand).unwrap()
    }

    #[test]
    fn exact_examples() {
        let g = WeightedGraphPair::from_edges(2, [(0, 1, 3.0)], [(0, 1, 2.0)]).unwrap();
        assert_eq!(exact_sparsest_cut(&g).unwrap().sparsity, 1.5);

        // Singletons: 2/3. Adjacent pairs: 2/4. Opposite pair {1,3}: 4/4.
        let r = exact_sparsest_cut(&cycle4_complete()).unwrap();
        assert_eq!(r.sparsity, 0.5);
        assert_eq!(r.cut, Cut::from_vertices(4, [0, 1]));

        let e = [(0, 1, 1.0), (1, 2, 2.0), (0, 2, 0.5)];
        let g = WeightedGraphPair::from_edges(3, e, e).unwrap();
        assert_eq!(exact_sparsest_cut(&g).unwrap().sparsity, 1.0);
    }

    #[test]
    fn exact_rejects_large() {
        let g = WeightedGraphPair::from_edges(25, [(0, 1, 1.0)], [(0, 1, 1.0)]).unwrap();
        assert!(matches!(exact_sparsest_cut(&g), Err(Error::Input(_))));
    }

    #[test]
    fn exact_is_relabeling_invariant() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for seed in 0..6 {
            let g = generate(Family::Uniform, 7, seed).unwrap();
            let base = exact_sparsest_cut(&g).unwrap().sparsity;
            let mut perm: Vec<usize> = (0..7).collect();
            perm.shuffle(&mut rng);
            let h = g.permuted(&perm).unwrap();
            assert!((exact_sparsest_cut(&h).unwrap().sparsity - base).abs() <= 1e-12 * base.max(1.0));
        }
    }

    #[test]
    fn planted_bridge_is_optimal() {
        let g = generate(Family::Planted, 10, 7).unwrap();
        let bridge = sparsity(&g, &planted_block(10));
        let best = exact_sparsest_cut(&g).unwrap();
        assert_eq!(best.sparsity, bridge.sparsity);
    }

    #[test]
    fn courant_fisher_examples() {
        let e = [(0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5)];
        let g = WeightedGraphPair::from_edges(4, e, e).unwrap();
        let cf = courant_fisher_check(&g).unwrap();
        assert!(cf.holds);
        assert!((cf.lambda_1 - 1.0).abs() < 1e-9 && cf.phi_star == 1.0);

        let g = WeightedGraphPair::from_edges(4, [(0, 1, 1.0), (2, 3, 1.0)], [(0, 2, 1.0), (1, 3, 1.0)]).unwrap();
        let cf = courant_fisher_check(&g).unwrap();
        assert!(cf.holds && cf.phi_star == 0.0 && cf.lambda_1.abs() < 1e-9);

        for seed in 0..6 {
            for f in Family::ALL {
                assert!(courant_fisher_check(&generate(f, 6, seed).unwrap()).unwrap().holds);
            }
        }
    }

    #[test]
    fn slow_sdp_small_cases() {
        let g = WeightedGraphPair::from_edges(2, [(0, 1, 3.0)], [(0, 1, 2.0)]).unwrap();
        assert!((slow_sdp_check(&formulate(&g).unwrap()).unwrap() - 1.5).abs() < 1e-5);

        let tri = [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)];
        let g = WeightedGraphPair::from_edges(3, tri, tri).unwrap();
        assert!((slow_sdp_check(&formulate(&g).unwrap()).unwrap() - 1.0).abs() < 1e-5);

        let big = WeightedGraphPair::from_edges(9, [(0, 1, 1.0)], [(0, 1, 1.0)]).unwrap();
        assert!(slow_sdp_check(&formulate(&big).unwrap()).is_err());
    }

    #[test]
    fn slow_and_fast_agree_on_cycle() {
        let p = formulate(&cycle4_complete()).unwrap();
        let slow = slow_sdp_check(&p).unwrap();
        let fast = crate::sdp::solve(&p, &Default::default()).unwrap().configuration.objective_value;
        assert!((slow - fast).abs() <= 1e-3 * fast.abs().max(1e-12), "{slow} vs {fast}");
    }
}
