//! Projection and threshold rounding of solution vectors, plus the audits of
//! the projection inequalities that make it work.
//!
//! For a direction `x_k - x_l` each point maps to
//! `p_i = <x_i - x_l, x_k - x_l> / |x_k - x_l|²`, which lies in `[0, 1]`
//! when all angles of the configuration are non-obtuse. [`round`] sweeps
//! every such line and keeps the sparsest threshold cut.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{sparsity, Cut, CutResult, PairWeights, WeightedGraphPair};
use crate::spectral::{difference_scatter, unweighted_difference_spectrum};

/// Directions shorter than this fraction of the mean squared pairwise
/// distance are skipped.
pub const DEGENERATE_REL: f64 = 1e-12;

/// Projections within this distance share a threshold, and sweep values within
/// this relative distance are ties, so roundoff from rotating or rescaling the
/// vectors cannot change the chosen cut.
pub const TIE_REL: f64 = 1e-12;

/// Additive slack for the projection and distortion audits.
pub const AUDIT_SLACK: f64 = 1e-7;

/// Above this many points the quadruple audit samples instead of enumerating.
pub const EXHAUSTIVE_AUDIT_MAX_N: usize = 40;
const AUDIT_SAMPLES: usize = 1_000_000;
const AUDIT_SEED: u64 = 0x5eed;

/// Signals that `x_k` and `x_l` (numerically) coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DegenerateDirection {
    pub k: usize,
    pub l: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineEmbedding {
    pub k: usize,
    pub l: usize,
    pub values: Vec<f64>,
}

fn mean_squared_distance(g: &DMatrix<f64>) -> f64 {
    let n = g.nrows();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += g[(i, i)] + g[(j, j)] - 2.0 * g[(i, j)];
        }
    }
    total / (n * (n - 1) / 2) as f64
}

#[inline]
fn sq_dist(g: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    g[(i, i)] + g[(j, j)] - 2.0 * g[(i, j)]
}

/// `<x_a - x_b, x_c - x_e>` from a Gram matrix.
#[inline]
fn diff_inner(g: &DMatrix<f64>, a: usize, b: usize, c: usize, e: usize) -> f64 {
    g[(a, c)] - g[(a, e)] - g[(b, c)] + g[(b, e)]
}

/// Line embedding along `x_k - x_l`; rows of `vectors` are the points.
pub fn line_embed(vectors: &DMatrix<f64>, k: usize, l: usize) -> Result<LineEmbedding, DegenerateDirection> {
    let dir = vectors.row(k) - vectors.row(l);
    let len2 = dir.norm_squared();
    let g = vectors * vectors.transpose();
    if k == l || len2 <= DEGENERATE_REL * mean_squared_distance(&g) || len2 == 0.0 {
        return Err(DegenerateDirection { k, l });
    }
    let values = (0..vectors.nrows())
        .map(|i| (vectors.row(i) - vectors.row(l)).dot(&dir) / len2)
        .collect();
    Ok(LineEmbedding { k, l, values })
}

/// The best sweep cut together with the line it came from. `threshold` is the
/// smallest vertex index among those tied at the cut value.
#[derive(Debug, Clone, PartialEq)]
pub struct Rounded {
    pub result: CutResult,
    pub k: usize,
    pub l: usize,
    pub threshold: usize,
    pub directions: usize,
}

/// Threshold rounding over every non-degenerate direction.
///
/// Only unordered pairs are swept: reversing `(k, l)` maps `p` to `1 - p`,
/// whose sweep cuts are complements with equal sparsity.
pub fn round(vectors: &DMatrix<f64>, g: &WeightedGraphPair) -> Result<CutResult> {
    round_with_witness(vectors, g).map(|r| r.result)
}

pub fn round_with_witness(vectors: &DMatrix<f64>, g: &WeightedGraphPair) -> Result<Rounded> {
    let n = g.n();
    if vectors.nrows() != n {
        return Err(Error::input(format!(
            "{} vectors for a graph on {n} vertices",
            vectors.nrows()
        )));
    }
    let gram = vectors * vectors.transpose();
    let threshold = DEGENERATE_REL * mean_squared_distance(&gram);
    let cost = g.cost_matrix();
    let demand = g.demand_matrix();
    let demand_floor = 1e-12 * g.total_demand();

    // (sparsity, k, l, t) of the incumbent.
    let mut best: Option<(f64, usize, usize, usize, Vec<usize>, usize)> = None;
    let mut directions = 0;
    let mut p = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut inside = vec![false; n];

    for k in 0..n {
        for l in k + 1..n {
            let len2 = sq_dist(&gram, k, l);
            if len2 <= threshold || len2 == 0.0 {
                continue;
            }
            directions += 1;
            for (i, pi) in p.iter_mut().enumerate() {
                *pi = diff_inner(&gram, i, l, k, l) / len2;
            }
            order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
            inside.iter_mut().for_each(|b| *b = false);

            let (mut cost_cut, mut demand_cut) = (0.0, 0.0);
            let mut group_min = usize::MAX;
            for pos in 0..n - 1 {
                let v = order[pos];
                for u in 0..n {
                    if u == v {
                        continue;
                    }
                    let sign = if inside[u] { -1.0 } else { 1.0 };
                    cost_cut += sign * cost[(v, u)];
                    demand_cut += sign * demand[(v, u)];
                }
                inside[v] = true;
                group_min = group_min.min(v);
                if p[order[pos + 1]] - p[v] <= TIE_REL {
                    continue;
                }
                let t = group_min;
                group_min = usize::MAX;
                if demand_cut <= demand_floor {
                    continue;
                }
                let value = cost_cut.max(0.0) / demand_cut;
                let better = match &best {
                    None => true,
                    Some((bv, bk, bl, bt, _, _)) => {
                        let tie = TIE_REL * bv.abs().max(value.abs());
                        value < *bv - tie || (value <= *bv + tie && (k, l, t) < (*bk, *bl, *bt))
                    }
                };
                if better {
                    best = Some((value, k, l, t, order.clone(), pos + 1));
                }
            }
        }
    }

    let (_, k, l, t, ord, size) = best.ok_or(Error::NoProperCut)?;
    let cut = Cut::from_vertices(n, ord[..size].iter().copied());
    Ok(Rounded {
        result: sparsity(g, &cut),
        k,
        l,
        threshold: t,
        directions,
    })
}

/// The weighted projection embedding into ℓ₁, one coordinate per demand
/// pair `(k, l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Embedding {
    pub pairs: Vec<(usize, usize)>,
    /// `d_kl |x_k - x_l|² / Σ d |x - x|²` per coordinate.
    pub weights: Vec<f64>,
    /// Row `i` is `y_i`.
    pub coords: DMatrix<f64>,
}

impl L1Embedding {
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        (self.coords.row(i) - self.coords.row(j)).abs().sum()
    }

    /// `Σ c_ij |y_i - y_j|₁ / Σ d_ij |y_i - y_j|₁`, `None` for a zero denominator.
    pub fn sparsity_ratio(&self, g: &WeightedGraphPair) -> Option<f64> {
        let num: f64 = g.cost().iter().map(|(&(i, j), &w)| w * self.distance(i, j)).sum();
        let den: f64 = g.demand().iter().map(|(&(i, j), &w)| w * self.distance(i, j)).sum();
        (den > 0.0).then(|| num / den)
    }

    /// Best threshold cut over the individual coordinates.
    pub fn best_coordinate_cut(&self, g: &WeightedGraphPair) -> Option<CutResult> {
        let n = self.coords.nrows();
        let mut best: Option<CutResult> = None;
        for c in 0..self.coords.ncols() {
            let values: Vec<f64> = self.coords.column(c).iter().copied().collect();
            for t in 0..n {
                let cut = crate::graph::sweep_cut_from_values(&values, t);
                let r = sparsity(g, &cut);
                if r.sparsity.is_finite() && best.as_ref().is_none_or(|b| r.sparsity < b.sparsity) {
                    best = Some(r);
                }
            }
        }
        best
    }
}

/// `y_i = ( d_kl |x_k - x_l|² <x_i - x_l, x_k - x_l> / Σ d |x - x|² )_{k<l}`.
pub fn l1_embed(vectors: &DMatrix<f64>, demand: &PairWeights) -> Result<L1Embedding> {
    let n = vectors.nrows();
    let g = vectors * vectors.transpose();
    if let Some((&(i, j), _)) = demand.iter().find(|(&(i, j), _)| i >= n || j >= n) {
        return Err(Error::input(format!("demand pair ({i}, {j}) out of range for {n} points")));
    }
    let total: f64 = demand.iter().map(|(&(k, l), &d)| d * sq_dist(&g, k, l)).sum();
    if total <= 0.0 {
        return Err(Error::input("demand-weighted squared length is zero"));
    }
    let pairs: Vec<(usize, usize)> = demand.keys().copied().collect();
    let weights: Vec<f64> = demand
        .iter()
        .map(|(&(k, l), &d)| d * sq_dist(&g, k, l) / total)
        .collect();
    let coords = DMatrix::from_fn(n, pairs.len(), |i, c| {
        let (k, l) = pairs[c];
        weights[c] * diff_inner(&g, i, l, k, l)
    });
    Ok(L1Embedding {
        pairs,
        weights,
        coords,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionAudit {
    pub checked: usize,
    pub sampled: bool,
    /// Smallest slack over both inequalities; negative means violated.
    pub tightest_slack: f64,
    /// `(i, j, k, l)` attaining the tightest slack.
    pub witness: Option<[usize; 4]>,
}

/// Slacks of `<a, b>²/|b|² <= |<a, b>|` and `|<a, b>| <= |a|²` for
/// `a = x_i - x_j`, `b = x_k - x_l`.
#[inline]
fn projection_slack(g: &DMatrix<f64>, i: usize, j: usize, k: usize, l: usize) -> f64 {
    let ab = diff_inner(g, i, j, k, l);
    let aa = sq_dist(g, i, j);
    let bb = sq_dist(g, k, l);
    let left = ab.abs() - ab * ab / bb;
    let right = aa - ab.abs();
    left.min(right)
}

/// Scans `|<x_i - x_j, u>|² <= |<x_i - x_j, x_k - x_l>| <= |x_i - x_j|²`
/// (with `u` the unit direction of `x_k - x_l`) without failing.
pub fn scan_projection_bounds(vectors: &DMatrix<f64>) -> ProjectionAudit {
    let n = vectors.nrows();
    let g = vectors * vectors.transpose();
    let threshold = DEGENERATE_REL * mean_squared_distance(&g);
    let mut audit = ProjectionAudit {
        checked: 0,
        sampled: n > EXHAUSTIVE_AUDIT_MAX_N,
        tightest_slack: f64::INFINITY,
        witness: None,
    };
    let visit = |i: usize, j: usize, k: usize, l: usize, audit: &mut ProjectionAudit| {
        let bb = sq_dist(&g, k, l);
        if bb <= threshold || bb == 0.0 {
            return;
        }
        audit.checked += 1;
        let s = projection_slack(&g, i, j, k, l);
        if s < audit.tightest_slack {
            audit.tightest_slack = s;
            audit.witness = Some([i, j, k, l]);
        }
    };
    if audit.sampled {
        let mut rng = ChaCha8Rng::seed_from_u64(AUDIT_SEED);
        for _ in 0..AUDIT_SAMPLES {
            let q: [usize; 4] = std::array::from_fn(|_| rng.gen_range(0..n));
            if q[0] != q[1] && q[2] != q[3] {
                visit(q[0], q[1], q[2], q[3], &mut audit);
            }
        }
    } else {
        // Both inequalities are invariant under swapping i, j or k, l.
        for i in 0..n {
            for j in i + 1..n {
                for k in 0..n {
                    for l in k + 1..n {
                        visit(i, j, k, l, &mut audit);
                    }
                }
            }
        }
    }
    audit
}

/// [`scan_projection_bounds`], failing when a slack drops below `-AUDIT_SLACK`.
pub fn audit_projection_bounds(vectors: &DMatrix<f64>) -> Result<ProjectionAudit> {
    let audit = scan_projection_bounds(vectors);
    if audit.tightest_slack < -AUDIT_SLACK {
        let [i, j, k, l] = audit.witness.expect("a slack was recorded");
        return Err(Error::PropertyViolation(format!(
            "projection bound fails by {:.3e} at (i, j, k, l) = ({i}, {j}, {k}, {l})",
            -audit.tightest_slack
        )));
    }
    Ok(audit)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionAudit {
    pub pairs: usize,
    /// Smallest of `|y_i - y_j|₁ - lower` and `|x_i - x_j|² - |y_i - y_j|₁`.
    pub tightest_slack: f64,
    pub witness: Option<[usize; 2]>,
}

/// Scans the distortion sandwich
/// `Σ d <x_i - x_j, x_k - x_l>² / Σ d |x_k - x_l|² <= |y_i - y_j|₁ <= |x_i - x_j|²`.
pub fn scan_distortion(vectors: &DMatrix<f64>, demand: &PairWeights) -> Result<DistortionAudit> {
    let n = vectors.nrows();
    let y = l1_embed(vectors, demand)?;
    let g = vectors * vectors.transpose();
    let total: f64 = demand.iter().map(|(&(k, l), &d)| d * sq_dist(&g, k, l)).sum();
    let mut audit = DistortionAudit {
        pairs: 0,
        tightest_slack: f64::INFINITY,
        witness: None,
    };
    for i in 0..n {
        for j in i + 1..n {
            let lower: f64 = demand
                .iter()
                .map(|(&(k, l), &d)| d * diff_inner(&g, i, j, k, l).powi(2))
                .sum::<f64>()
                / total;
            let mid = y.distance(i, j);
            let upper = sq_dist(&g, i, j);
            let s = (mid - lower).min(upper - mid);
            audit.pairs += 1;
            if s < audit.tightest_slack {
                audit.tightest_slack = s;
                audit.witness = Some([i, j]);
            }
        }
    }
    Ok(audit)
}

pub fn audit_distortion(vectors: &DMatrix<f64>, demand: &PairWeights) -> Result<DistortionAudit> {
    let audit = scan_distortion(vectors, demand)?;
    if audit.tightest_slack < -AUDIT_SLACK {
        let [i, j] = audit.witness.expect("a slack was recorded");
        return Err(Error::PropertyViolation(format!(
            "l1 distortion sandwich fails by {:.3e} at pair ({i}, {j})",
            -audit.tightest_slack
        )));
    }
    Ok(audit)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralDirectionRow {
    pub r: usize,
    /// Top-`r` mass fraction of the unweighted difference spectrum.
    pub delta: f64,
    /// `(δ² / r) Σ |x_i - x_j|²`.
    pub required: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestDirection {
    pub pair: (usize, usize),
    /// `Σ_{i<j} <x_i - x_j, (x_k - x_l)/|x_k - x_l|>²` for the best pair.
    pub achieved: f64,
    /// `Σ_{i<j} |x_i - x_j|²`.
    pub total: f64,
    /// Descending spectrum of the Gram matrix of `{x_i - x_j}_{i<j}`.
    pub spectrum: Vec<f64>,
    pub rows: Vec<SpectralDirectionRow>,
    /// `min_r (achieved - required_r)`.
    pub min_slack: f64,
}

/// Best single direction `x_k - x_l` for capturing the squared pairwise
/// differences, checked against `(δ²/r) Σ |x_i - x_j|²` for every `r`.
pub fn best_direction_lower_bound(vectors: &DMatrix<f64>) -> Result<BestDirection, DegenerateDirection> {
    let n = vectors.nrows();
    let all = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j, 1.0)));
    let scatter = difference_scatter(vectors, all).expect("indices are in range");
    let g = vectors * vectors.transpose();
    let threshold = DEGENERATE_REL * mean_squared_distance(&g);

    let mut best: Option<((usize, usize), f64)> = None;
    for k in 0..n {
        for l in k + 1..n {
            let bb = sq_dist(&g, k, l);
            if bb <= threshold || bb == 0.0 {
                continue;
            }
            let dir = (vectors.row(k) - vectors.row(l)).transpose();
            let captured = (dir.transpose() * &scatter * &dir)[(0, 0)] / bb;
            if best.is_none_or(|(_, b)| captured > b) {
                best = Some(((k, l), captured));
            }
        }
    }
    let (pair, achieved) = best.ok_or(DegenerateDirection { k: 0, l: 0 })?;
    let spectrum = unweighted_difference_spectrum(vectors).expect("indices are in range");
    let total = scatter.trace();
    let mass: f64 = spectrum.iter().sum();
    let mut rows = Vec::with_capacity(n);
    let mut top = 0.0;
    for r in 1..=n {
        top += spectrum[r - 1];
        let delta = if mass > 0.0 { top / mass } else { 0.0 };
        rows.push(SpectralDirectionRow {
            r,
            delta,
            required: delta * delta / r as f64 * total,
        });
    }
    let min_slack = rows
        .iter()
        .map(|row| achieved - row.required)
        .fold(f64::INFINITY, f64::min);
    Ok(BestDirection {
        pair,
        achieved,
        total,
        spectrum,
        rows,
        min_slack,
    })
}
