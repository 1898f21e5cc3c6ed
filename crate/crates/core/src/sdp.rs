//! The sparsest-cut semidefinite relaxation with squared triangle inequalities.
//!
//! The fractional objective `Σ c_ij |x_i - x_j|² / Σ d_kl |x_k - x_l|²` is
//! homogenised by fixing the denominator to one, which gives a linear SDP in
//! the Gram matrix `G`:
//!
//! ```text
//! minimize    <L_C, G>
//! subject to  <L_D, G> = 1
//!             G_ik - G_il - G_kl + G_ll >= 0   for distinct i, k, l
//!             G PSD
//! ```
//!
//! [`solve`] runs a dual ADMM (augmented Lagrangian on the dual, PSD
//! projection by eigenvalue clamping) over an active set of triangle
//! inequalities that grows by most-violated separation.

use std::fmt;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{PairWeights, WeightedGraphPair};
use crate::spectral::sym_eig;

/// The squared triangle inequality `<x_i - x_l, x_k - x_l> >= 0` with apex `l`.
///
/// The expression is symmetric in `i` and `k`; canonical triples have `i < k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Triple {
    pub i: usize,
    pub k: usize,
    pub l: usize,
}

impl Triple {
    pub fn new(i: usize, k: usize, l: usize) -> Self {
        Self {
            i: i.min(k),
            k: i.max(k),
            l,
        }
    }

    /// `<x_i - x_l, x_k - x_l>` read off a Gram matrix.
    #[inline]
    pub fn value(&self, g: &DMatrix<f64>) -> f64 {
        g[(self.i, self.k)] - g[(self.i, self.l)] - g[(self.k, self.l)] + g[(self.l, self.l)]
    }

    /// Entry `(a, b)` of the symmetric constraint matrix `A` with `<A, G> = value(G)`.
    #[inline]
    fn coeff(&self, a: usize, b: usize) -> f64 {
        let Triple { i, k, l } = *self;
        if a == l && b == l {
            1.0
        } else if (a == i && b == k) || (a == k && b == i) {
            0.5
        } else if (a == l && (b == i || b == k)) || (b == l && (a == i || a == k)) {
            -0.5
        } else {
            0.0
        }
    }

    /// Adds `w * A` to `m`.
    #[inline]
    fn add_scaled(&self, m: &mut DMatrix<f64>, w: f64) {
        let Triple { i, k, l } = *self;
        m[(i, k)] += 0.5 * w;
        m[(k, i)] += 0.5 * w;
        m[(i, l)] -= 0.5 * w;
        m[(l, i)] -= 0.5 * w;
        m[(k, l)] -= 0.5 * w;
        m[(l, k)] -= 0.5 * w;
        m[(l, l)] += w;
    }

    /// Frobenius inner product of two constraint matrices.
    fn inner(&self, other: &Triple) -> f64 {
        let verts = [other.i, other.k, other.l];
        let mut acc = 0.0;
        for &a in &verts {
            for &b in &verts {
                let c = other.coeff(a, b);
                if c != 0.0 {
                    acc += c * self.coeff(a, b);
                }
            }
        }
        acc
    }
}

/// All canonical triples in lexicographic `(i, k, l)` order.
pub fn canonical_triples(n: usize) -> impl Iterator<Item = Triple> {
    (0..n).flat_map(move |i| {
        (i + 1..n).flat_map(move |k| {
            (0..n)
                .filter(move |&l| l != i && l != k)
                .map(move |l| Triple { i, k, l })
        })
    })
}

#[derive(Debug, Clone)]
pub struct SdpProblem {
    graph: WeightedGraphPair,
    cost_laplacian: DMatrix<f64>,
    demand_laplacian: DMatrix<f64>,
}

impl SdpProblem {
    pub fn graph(&self) -> &WeightedGraphPair {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// `L_C`, so that the objective is `<L_C, G>`.
    pub fn objective_matrix(&self) -> &DMatrix<f64> {
        &self.cost_laplacian
    }

    /// `L_D`, so that the normalization reads `<L_D, G> = 1`.
    pub fn normalization_matrix(&self) -> &DMatrix<f64> {
        &self.demand_laplacian
    }

    /// Number of ordered triples `(i, k, l)` of distinct vertices.
    pub fn ordered_triangle_count(&self) -> usize {
        let n = self.n();
        n * n.saturating_sub(1) * n.saturating_sub(2)
    }

    /// Number of distinct inequalities; `(i, k, l)` and `(k, i, l)` coincide.
    pub fn distinct_triangle_count(&self) -> usize {
        self.ordered_triangle_count() / 2
    }

    pub fn objective(&self, gram: &DMatrix<f64>) -> f64 {
        self.cost_laplacian.dot(gram)
    }

    pub fn normalization(&self, gram: &DMatrix<f64>) -> f64 {
        self.demand_laplacian.dot(gram)
    }

    /// Scaled identity `I / tr(L_D)`: feasible, strictly inside every triangle
    /// inequality.
    pub fn interior_point(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::identity(n, n) / self.demand_laplacian.trace()
    }
}

pub fn formulate(g: &WeightedGraphPair) -> Result<SdpProblem> {
    if g.total_demand() <= 0.0 {
        return Err(Error::input("total demand must be positive"));
    }
    Ok(SdpProblem {
        cost_laplacian: g.cost_laplacian(),
        demand_laplacian: g.demand_laplacian(),
        graph: g.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Triangle and normalization feasibility.
    pub feas_tol: f64,
    /// Relative duality gap.
    pub obj_tol: f64,
    /// Cap on separation rounds.
    pub max_outer: usize,
    /// Cap on ADMM iterations within one separation round.
    pub max_inner: usize,
    /// Triples added per separation round; `None` means `10 n`.
    pub sep_batch: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-6,
            obj_tol: 1e-4,
            max_outer: 10_000,
            max_inner: 20_000,
            sep_batch: None,
        }
    }
}

impl SolverOptions {
    pub fn batch(&self, n: usize) -> usize {
        self.sep_batch.unwrap_or(10 * n).max(1)
    }
}

/// Solution vectors (rows of `vectors`) with feasibility residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorConfiguration {
    pub vectors: DMatrix<f64>,
    /// `Σ c_ij |x_i - x_j|² / Σ d_kl |x_k - x_l|²` of these vectors.
    pub objective_value: f64,
    pub psd_residual: f64,
    pub triangle_violation: f64,
    pub normalization_residual: f64,
}

impl VectorConfiguration {
    /// Factors `gram` and records its residuals against `problem`.
    pub fn from_gram(problem: &SdpProblem, gram: &DMatrix<f64>) -> Result<Self> {
        let (vectors, min_eig) = factor_gram(gram)?;
        let cost = spread(&vectors, problem.graph().cost());
        let norm = spread(&vectors, problem.graph().demand());
        Ok(Self {
            objective_value: if norm > 0.0 { cost / norm } else { f64::INFINITY },
            psd_residual: (-min_eig).max(0.0),
            triangle_violation: audit_triangle(&vectors).max_violation,
            normalization_residual: (norm - 1.0).abs(),
            vectors,
        })
    }

    pub fn n(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn gram(&self) -> DMatrix<f64> {
        &self.vectors * self.vectors.transpose()
    }
}

/// `Σ w_ij |x_i - x_j|²`, summed pairwise so it is never negative.
fn spread(vectors: &DMatrix<f64>, weights: &PairWeights) -> f64 {
    weights
        .iter()
        .map(|(&(i, j), &w)| w * (vectors.row(i) - vectors.row(j)).norm_squared())
        .sum()
}

fn factor_gram(gram: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let eig = sym_eig(gram)?;
    let n = gram.nrows();
    let min_eig = eig.values.first().copied().unwrap_or(0.0);
    let cutoff = 1e-10 * gram.trace().max(0.0);
    let keep: Vec<usize> = (0..n).rev().filter(|&c| eig.values[c] > cutoff).collect();
    let vectors = DMatrix::from_fn(n, keep.len(), |r, c| {
        eig.vectors[(r, keep[c])] * eig.values[keep[c]].sqrt()
    });
    Ok((vectors, min_eig))
}

/// Factors `G = X Xᵀ`; row `i` of the result is `x_i`. Eigenvalues below
/// `1e-10 tr(G)` are dropped.
pub fn extract_vectors(gram: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(factor_gram(gram)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriangleAudit {
    /// `max(0, -min <x_i - x_l, x_k - x_l>)`.
    pub max_violation: f64,
    pub worst: Option<Triple>,
}

/// Exhaustive scan of the squared triangle inequalities over all triples.
pub fn audit_triangle(vectors: &DMatrix<f64>) -> TriangleAudit {
    let g = vectors * vectors.transpose();
    let mut worst = None;
    let mut min_value = 0.0;
    for t in canonical_triples(vectors.nrows()) {
        let v = t.value(&g);
        if v < min_value {
            min_value = v;
            worst = Some(t);
        }
    }
    TriangleAudit {
        max_violation: -min_value,
        worst,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolveStats {
    pub outer_rounds: usize,
    pub inner_iterations: usize,
    pub active_constraints: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub relative_gap: f64,
    /// Largest triangle violation of the final iterate, before restoration.
    pub triangle_violation: f64,
    /// Dual objective, a lower bound on the relaxation up to the dual residual.
    pub dual_bound: f64,
    /// Weight of the interior point mixed in to restore exact feasibility.
    pub restoration_weight: f64,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub configuration: VectorConfiguration,
    pub gram: DMatrix<f64>,
    pub stats: SolveStats,
}

/// Solver state when the iteration caps ran out.
#[derive(Debug, Clone)]
pub struct ConvergenceFailure {
    pub partial_gram: DMatrix<f64>,
    pub stats: SolveStats,
}

impl fmt::Display for ConvergenceFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SDP solver did not converge after {} rounds / {} iterations \
             (primal {:.2e}, dual {:.2e}, gap {:.2e}, triangle violation {:.2e})",
            self.stats.outer_rounds,
            self.stats.inner_iterations,
            self.stats.primal_residual,
            self.stats.dual_residual,
            self.stats.relative_gap,
            self.stats.triangle_violation
        )
    }
}

/// Projection of a symmetric matrix onto the PSD cone and onto its negative,
/// from one eigendecomposition: `(Π(v), Π(-v))`.
fn psd_split(v: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let eig = sym_eig(v).expect("iterates are symmetric");
    let n = v.nrows();
    let mut pos = DMatrix::zeros(n, n);
    let mut neg = DMatrix::zeros(n, n);
    for (c, &w) in eig.values.iter().enumerate() {
        let col = eig.vectors.column(c);
        if w > 0.0 {
            pos.ger(w, &col, &col, 1.0);
        } else if w < 0.0 {
            neg.ger(-w, &col, &col, 1.0);
        }
    }
    (pos, neg)
}

/// Dual ADMM for the conic form
///
/// ```text
/// min <C, X>  s.t.  <D, X> = 1,  <A_t, X> - s_t = 0,  X PSD,  s >= 0
/// ```
///
/// with `C` and `D` scaled to unit Frobenius norm.
struct DualAdmm {
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    c_norm: f64,
    active: Vec<Triple>,
    normal: nalgebra::linalg::Cholesky<f64, nalgebra::Dyn>,
    x: DMatrix<f64>,
    s: Vec<f64>,
    y: DVector<f64>,
    z: DMatrix<f64>,
    zs: Vec<f64>,
    mu: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Residuals {
    primal: f64,
    dual: f64,
    gap: f64,
}

impl DualAdmm {
    fn new(c: DMatrix<f64>, d: DMatrix<f64>, x0: DMatrix<f64>) -> Self {
        let c_norm = c.norm();
        let normal = Self::factor(&d, &[]);
        Self {
            z: c.clone(),
            c,
            d,
            c_norm,
            active: Vec::new(),
            normal,
            x: x0,
            s: Vec::new(),
            y: DVector::zeros(1),
            zs: Vec::new(),
            mu: 1.0,
        }
    }

    /// Cholesky factor of `A A*` for the current rows.
    fn factor(d: &DMatrix<f64>, active: &[Triple]) -> nalgebra::linalg::Cholesky<f64, nalgebra::Dyn> {
        let m = active.len() + 1;
        let mut gram = DMatrix::zeros(m, m);
        gram[(0, 0)] = d.norm_squared();
        for (a, t) in active.iter().enumerate() {
            let v = t.value(d);
            gram[(0, a + 1)] = v;
            gram[(a + 1, 0)] = v;
            for (b, u) in active.iter().enumerate().take(a + 1) {
                let mut v = t.inner(u);
                if a == b {
                    v += 1.0;
                }
                gram[(a + 1, b + 1)] = v;
                gram[(b + 1, a + 1)] = v;
            }
        }
        nalgebra::linalg::Cholesky::new(gram).expect("normal equations are positive definite")
    }

    fn extend(&mut self, triples: &[Triple]) {
        self.active.extend_from_slice(triples);
        self.s.extend(std::iter::repeat_n(0.0, triples.len()));
        self.zs.extend(std::iter::repeat_n(0.0, triples.len()));
        let old = self.y.len();
        self.y = self.y.clone().resize_vertically(old + triples.len(), 0.0);
        self.normal = Self::factor(&self.d, &self.active);
    }

    /// `A(m, slack)`.
    fn apply(&self, m: &DMatrix<f64>, slack: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.active.len() + 1);
        out[0] = self.d.dot(m);
        for (a, t) in self.active.iter().enumerate() {
            out[a + 1] = t.value(m) - slack[a];
        }
        out
    }

    /// Matrix part of `A* y`; the slack part is `-y_t`.
    fn adjoint(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let mut m = &self.d * y[0];
        for (a, t) in self.active.iter().enumerate() {
            t.add_scaled(&mut m, y[a + 1]);
        }
        m
    }

    fn step(&mut self) -> Residuals {
        let mu = self.mu;
        let ax = self.apply(&self.x, &self.s);
        let zc = &self.z - &self.c;
        let azc = self.apply(&zc, &self.zs);
        let mut rhs = -ax * mu - azc;
        rhs[0] += mu;
        self.y = self.normal.solve(&rhs);

        let aty = self.adjoint(&self.y);
        let v = &self.c - &aty - &self.x * mu;
        let (pos, neg) = psd_split(&v);
        self.z = pos;
        self.x = neg / mu;
        for a in 0..self.active.len() {
            let vs = self.y[a + 1] - mu * self.s[a];
            self.zs[a] = vs.max(0.0);
            self.s[a] = (-vs).max(0.0) / mu;
        }

        let mut pres = self.apply(&self.x, &self.s);
        pres[0] -= 1.0;
        let primal = pres.norm() / 2.0;
        let dual_mat = (&aty + &self.z - &self.c).norm_squared();
        let dual_slack: f64 = (0..self.active.len())
            .map(|a| (self.zs[a] - self.y[a + 1]).powi(2))
            .sum();
        let dual = (dual_mat + dual_slack).sqrt() / (1.0 + self.c_norm);
        let pobj = self.c.dot(&self.x);
        let dobj = self.y[0];
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        Residuals { primal, dual, gap }
    }

    fn adapt(&mut self, r: Residuals) {
        if r.dual <= 0.0 || r.primal <= 0.0 {
            return;
        }
        let ratio = r.primal / r.dual;
        if ratio < 0.1 {
            self.mu = (self.mu * 0.6).max(1e-6);
        } else if ratio > 10.0 {
            self.mu = (self.mu / 0.6).min(1e6);
        }
    }
}

/// Triples violated by more than `threshold`, most violated first, ties in
/// lexicographic order, skipping those already active.
fn separate(g: &DMatrix<f64>, active: &[Triple], threshold: f64, batch: usize) -> Vec<Triple> {
    let mut found: Vec<(f64, Triple)> = canonical_triples(g.nrows())
        .filter_map(|t| {
            let v = t.value(g);
            (v < -threshold).then_some((v, t))
        })
        .filter(|(_, t)| !active.contains(t))
        .collect();
    found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    found.into_iter().take(batch).map(|(_, t)| t).collect()
}

/// Rescales `gram` onto `<L_D, G> = 1` and mixes in the interior point just
/// enough to clear every triangle violation. Returns the mixing weight.
pub fn restore_feasibility(problem: &SdpProblem, gram: &mut DMatrix<f64>) -> f64 {
    let norm = problem.normalization(gram);
    if norm > 0.0 {
        *gram /= norm;
    } else {
        *gram = problem.interior_point();
        return 1.0;
    }
    let min_value = canonical_triples(problem.n())
        .map(|t| t.value(gram))
        .fold(0.0, f64::min);
    if min_value >= 0.0 {
        return 0.0;
    }
    let alpha = 1.0 / problem.normalization_matrix().trace();
    let theta = (-min_value / (alpha - min_value) * (1.0 + 1e-6)).min(1.0);
    *gram *= 1.0 - theta;
    *gram += problem.interior_point() * theta;
    theta
}

/// Solves the relaxation to the tolerances in `opts`.
pub fn solve(problem: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    let start = Instant::now();
    let n = problem.n();
    let d_norm = problem.normalization_matrix().norm();
    let raw_c_norm = problem.objective_matrix().norm();
    let c_scale = if raw_c_norm > 0.0 { raw_c_norm } else { 1.0 };
    let c = problem.objective_matrix() / c_scale;
    let d = problem.normalization_matrix() / d_norm;
    // In scaled units X = |L_D| G, so <D, X> = 1.
    let x0 = problem.interior_point() * d_norm;
    let mut admm = DualAdmm::new(c, d, x0);

    let tol_primal = 0.1 * opts.feas_tol;
    let tol_dual = 0.1 * opts.feas_tol;
    let tol_gap = 0.1 * opts.obj_tol;
    let batch = opts.batch(n);
    let mut stats = SolveStats::default();
    let mut res = Residuals::default();

    let converged = loop {
        if stats.outer_rounds >= opts.max_outer {
            break false;
        }
        stats.outer_rounds += 1;
        let mut inner_ok = false;
        for it in 0..opts.max_inner {
            res = admm.step();
            stats.inner_iterations += 1;
            if res.primal <= tol_primal && res.dual <= tol_dual && res.gap <= tol_gap {
                inner_ok = true;
                break;
            }
            if it % 20 == 19 {
                admm.adapt(res);
            }
        }
        let cuts = separate(&admm.x, &admm.active, opts.feas_tol, batch);
        if cuts.is_empty() {
            break inner_ok;
        }
        admm.extend(&cuts);
    };

    stats.active_constraints = admm.active.len();
    stats.primal_residual = res.primal;
    stats.dual_residual = res.dual;
    stats.relative_gap = res.gap;
    stats.dual_bound = admm.y[0] * c_scale / d_norm;

    let mut gram = &admm.x / d_norm;
    gram = (&gram + gram.transpose()) * 0.5;
    stats.triangle_violation = canonical_triples(n)
        .map(|t| -t.value(&gram))
        .fold(0.0, f64::max);
    if !converged {
        stats.wall_time_seconds = start.elapsed().as_secs_f64();
        return Err(Error::Convergence(Box::new(ConvergenceFailure {
            partial_gram: gram,
            stats,
        })));
    }
    stats.restoration_weight = restore_feasibility(problem, &mut gram);
    let configuration = VectorConfiguration::from_gram(problem, &gram)?;
    stats.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok(SdpSolution {
        configuration,
        gram,
        stats,
    })
}
