//! Symmetric eigendecomposition, generalized eigenvalues of the Laplacian
//! pair, and the Gram spectrum of demand-weighted difference vectors.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{PairWeights, WeightedGraphPair};

const MAX_SWEEPS: usize = 64;

/// Eigenvalues in ascending order with matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::input(format!("matrix is {}x{}, expected square", a.nrows(), a.ncols())));
    }
    let norm = a.norm();
    let asym = (a - a.transpose()).norm();
    if asym > 1e-9 * norm {
        return Err(Error::input(format!("matrix is not symmetric (asymmetry {asym:.3e})")));
    }
    Ok(norm)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn sym_eig(a: &DMatrix<f64>) -> Result<SymEigen> {
    let norm = check_symmetric(a)?;
    let n = a.nrows();
    let mut m = (a + a.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let target = (f64::EPSILON * norm).powi(2);

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off <= target {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymEigen { values, vectors })
}

/// Relative threshold below which eigenvalues of the demand side count as zero.
pub const RANK_TOL: f64 = 1e-9;

fn select(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |r, c| m[(rows[r], cols[c])])
}

/// Generalized eigenvalues `λ_1 <= ... <= λ_rank(Y)` of the pencil `(X, Y)`,
/// defined by the max-min ratio `wᵀXw / wᵀYw`.
///
/// Works in the eigenbasis of `Y`. Directions in the nullspace of `Y` are
/// minimised out through the Schur complement of `X` before scaling by
/// `Λ^{-1/2}`, so the values are the exact max-min ratios even when `Y` has
/// more null directions than `X` shares.
pub fn generalized_eigenvalues(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(x)?;
    check_symmetric(y)?;
    if x.shape() != y.shape() {
        return Err(Error::input("generalized eigenproblem with mismatched dimensions"));
    }
    let ey = sym_eig(y)?;
    let ymax = ey.values.last().copied().unwrap_or(0.0);
    if ymax <= 0.0 || !ymax.is_finite() {
        return Err(Error::input("demand Laplacian has rank 0"));
    }
    let tol = RANK_TOL * ymax;
    let range: Vec<usize> = (0..ey.values.len()).filter(|&i| ey.values[i] > tol).collect();
    let null: Vec<usize> = (0..ey.values.len()).filter(|&i| ey.values[i] <= tol).collect();

    let xt = ey.vectors.transpose() * x * &ey.vectors;
    let mut schur = select(&xt, &range, &range);
    if !null.is_empty() {
        let b = select(&xt, &range, &null);
        let c = select(&xt, &null, &null);
        let ec = sym_eig(&c)?;
        let cmax = ec.values.last().copied().unwrap_or(0.0).max(0.0);
        let ctol = RANK_TOL * cmax.max(x.norm());
        let mut pinv = DMatrix::zeros(null.len(), null.len());
        for (i, &w) in ec.values.iter().enumerate() {
            if w > ctol {
                let col = ec.vectors.column(i);
                pinv += col * col.transpose() / w;
            }
        }
        schur -= &b * pinv * b.transpose();
    }

    let scale: Vec<f64> = range.iter().map(|&i| ey.values[i].sqrt().recip()).collect();
    let k = range.len();
    let w = DMatrix::from_fn(k, k, |r, c| schur[(r, c)] * scale[r] * scale[c]);
    let w = (&w + w.transpose()) * 0.5;
    let values = sym_eig(&w)?.values;
    // Zero eigenvalues come out as roundoff of either sign; pin them to zero
    // so that ratios against them are never formed from noise.
    let top = values.last().copied().unwrap_or(0.0).max(0.0);
    Ok(values
        .into_iter()
        .map(|v| if v <= ZERO_EIG_REL * top { 0.0 } else { v })
        .collect())
}

/// Generalized eigenvalues below this fraction of the largest are zero.
pub const ZERO_EIG_REL: f64 = 1e-12;

/// Squared-difference scatter `Σ w_ij (x_i - x_j)(x_i - x_j)ᵀ` of the rows of
/// `points`, an `m x m` matrix sharing its nonzero spectrum with the Gram
/// matrix of the weighted difference vectors.
pub fn difference_scatter<I>(points: &DMatrix<f64>, weights: I) -> Result<DMatrix<f64>>
where
    I: IntoIterator<Item = (usize, usize, f64)>,
{
    let n = points.nrows();
    let m = points.ncols();
    let mut s = DMatrix::zeros(m, m);
    for (i, j, w) in weights {
        if i >= n || j >= n {
            return Err(Error::input(format!(
                "pair ({i}, {j}) out of range for {n} points"
            )));
        }
        let diff = (points.row(i) - points.row(j)).transpose();
        s.ger(w, &diff, &diff, 1.0);
    }
    Ok(s)
}

fn descending_padded(mut values: Vec<f64>, n: usize) -> Vec<f64> {
    values.iter_mut().for_each(|v| *v = v.max(0.0));
    values.sort_by(|a, b| b.total_cmp(a));
    values.resize(n, 0.0);
    values
}

/// Eigenvalues `σ_1 >= ... >= σ_n >= 0` of the Gram matrix of
/// `{ sqrt(d_ij) (x_i - x_j) }`, padded with zeros to length `n`.
pub fn gram_spectrum_of_differences(points: &DMatrix<f64>, demand: &PairWeights) -> Result<Vec<f64>> {
    let n = points.nrows();
    let scatter = difference_scatter(points, demand.iter().map(|(&(i, j), &w)| (i, j, w)))?;
    if scatter.nrows() == 0 {
        return Ok(vec![0.0; n]);
    }
    Ok(descending_padded(sym_eig(&scatter)?.values, n))
}

/// Unweighted analogue over all pairs `i < j`.
pub fn unweighted_difference_spectrum(points: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = points.nrows();
    let all = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j, 1.0)));
    let scatter = difference_scatter(points, all)?;
    if scatter.nrows() == 0 {
        return Ok(vec![0.0; n]);
    }
    Ok(descending_padded(sym_eig(&scatter)?.values, n))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    /// Ascending generalized eigenvalues of `(L_C, L_D)` over the range of `L_D`.
    #[serde(rename = "lambda")]
    pub generalized: Vec<f64>,
    /// Descending Gram spectrum of the demand-weighted difference vectors.
    #[serde(rename = "sigma")]
    pub gram: Vec<f64>,
    pub rank_demand: usize,
}

impl SpectralReport {
    pub fn compute(g: &WeightedGraphPair, points: &DMatrix<f64>) -> Result<Self> {
        let generalized = generalized_eigenvalues(&g.cost_laplacian(), &g.demand_laplacian())?;
        let gram = gram_spectrum_of_differences(points, g.demand())?;
        Ok(Self {
            rank_demand: generalized.len(),
            generalized,
            gram,
        })
    }

    /// `Σ_{t > r} σ_t / Σ_t σ_t`, zero when the spectrum vanishes.
    pub fn tail_fraction(&self, r: usize) -> f64 {
        let total: f64 = self.gram.iter().sum();
        if total <= 0.0 {
            return 0.0;
        }
        self.gram.iter().skip(r).sum::<f64>() / total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankRow {
    pub r: usize,
    /// `λ_{r+1}`.
    pub lambda_next: f64,
    pub tail_fraction: f64,
    /// `r (1 - φ/λ_{r+1})^{-2}`, absent when `λ_{r+1} <= φ`.
    pub factor: Option<f64>,
}

impl RankRow {
    pub fn applicable(&self) -> bool {
        self.factor.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankProfile {
    pub phi_sdp: f64,
    pub rows: Vec<RankRow>,
    /// Index into `rows` of the smallest applicable factor.
    pub best: Option<usize>,
}

impl RankProfile {
    pub fn best_row(&self) -> Option<&RankRow> {
        self.best.map(|i| &self.rows[i])
    }

    /// Smallest applicable approximation bound `φ · factor`.
    pub fn best_bound(&self) -> Option<f64> {
        self.best_row().and_then(|r| r.factor).map(|f| f * self.phi_sdp)
    }
}

/// Per-rank table of the spectral guarantee, for `r = 1 .. rank_demand - 1`.
pub fn rank_profile(report: &SpectralReport, phi_sdp: f64) -> RankProfile {
    let mut rows = Vec::new();
    for r in 1..report.generalized.len() {
        let lambda_next = report.generalized[r];
        let factor = (lambda_next > phi_sdp).then(|| r as f64 * (1.0 - phi_sdp / lambda_next).powi(-2));
        rows.push(RankRow {
            r,
            lambda_next,
            tail_fraction: report.tail_fraction(r),
            factor,
        });
    }
    let best = rows
        .iter()
        .enumerate()
        .filter_map(|(i, row)| row.factor.map(|f| (i, f)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i);
    RankProfile { phi_sdp, rows, best }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::laplacian;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn path3() -> DMatrix<f64> {
        laplacian(&PairWeights::from([((0, 1), 1.0), ((1, 2), 1.0)]), 3).unwrap()
    }

    fn k3() -> DMatrix<f64> {
        laplacian(&PairWeights::from([((0, 1), 1.0), ((0, 2), 1.0), ((1, 2), 1.0)]), 3).unwrap()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len(), "{a:?} vs {b:?}");
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    fn check_decomposition(a: &DMatrix<f64>) {
        let e = sym_eig(a).unwrap();
        let scale = a.norm().max(1.0);
        for (i, &w) in e.values.iter().enumerate() {
            let v = e.vectors.column(i);
            assert!((a * v - v * w).norm() <= 1e-8 * scale);
        }
        let gram = e.vectors.transpose() * &e.vectors;
        assert!((gram - DMatrix::identity(a.nrows(), a.nrows())).norm() <= 1e-8);
        assert!(e.values.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn sym_eig_examples() {
        assert_close(&sym_eig(&DMatrix::identity(3, 3)).unwrap().values, &[1.0, 1.0, 1.0], 1e-14);
        let a = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        assert_close(&sym_eig(&a).unwrap().values, &[1.0, 3.0], 1e-14);
        // det(L - t I) = -t (t - 1)(t - 3) for the path on three vertices.
        assert_close(&sym_eig(&path3()).unwrap().values, &[0.0, 1.0, 3.0], 1e-13);
        check_decomposition(&path3());
    }

    #[test]
    fn sym_eig_rejects_asymmetric() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(sym_eig(&a), Err(Error::Input(_))));
    }

    #[test]
    fn sym_eig_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1, 2, 5, 9, 16] {
            let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            check_decomposition(&(&b + b.transpose()));
        }
    }

    #[test]
    fn generalized_identical_and_scaled() {
        let y = k3();
        assert_close(&generalized_eigenvalues(&y, &y).unwrap(), &[1.0, 1.0], 1e-12);
        assert_close(&generalized_eigenvalues(&(&y * 2.0), &y).unwrap(), &[2.0, 2.0], 1e-12);
    }

    #[test]
    fn generalized_rank_zero_is_error() {
        let err = generalized_eigenvalues(&k3(), &DMatrix::zeros(3, 3)).unwrap_err();
        assert!(err.to_string().contains("rank 0"));
    }

    /// Max-min ratio by brute force on a grid for 3x3 pencils whose `Y`
    /// has the all-ones vector as its only null direction.
    fn grid_maximin(x: &DMatrix<f64>, y: &DMatrix<f64>) -> (f64, f64) {
        let ratio = |w: &nalgebra::Vector3<f64>| {
            let w = nalgebra::DVector::from_column_slice(w.as_slice());
            (w.transpose() * x * &w)[(0, 0)] / (w.transpose() * y * &w)[(0, 0)]
        };
        // Orthonormal basis of the complement of the ones vector.
        let u = nalgebra::Vector3::new(1.0, -1.0, 0.0).normalize();
        let v = nalgebra::Vector3::new(1.0, 1.0, -2.0).normalize();
        let steps = 20_000;
        let dir = |t: usize| {
            let a = std::f64::consts::PI * t as f64 / steps as f64;
            u * a.cos() + v * a.sin()
        };
        let lambda1 = (0..steps).map(|t| ratio(&dir(t))).fold(f64::INFINITY, f64::min);
        // lambda_2: maximise over the excluded direction z, minimise over the
        // one-dimensional complement of z inside the plane.
        let coarse = 720;
        let lambda2 = (0..coarse)
            .map(|t| {
                let z = {
                    let a = std::f64::consts::PI * t as f64 / coarse as f64;
                    u * a.cos() + v * a.sin()
                };
                let w = z.cross(&nalgebra::Vector3::new(1.0, 1.0, 1.0));
                ratio(&w)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        (lambda1, lambda2)
    }

    #[test]
    fn generalized_path_vs_triangle() {
        // On the complement of 1, L(K3) = 3I and L(P3) has eigenvalues 1 and 3.
        let got = generalized_eigenvalues(&path3(), &k3()).unwrap();
        assert_close(&got, &[1.0 / 3.0, 1.0], 1e-12);
        let (l1, l2) = grid_maximin(&path3(), &k3());
        assert!((l1 - got[0]).abs() < 1e-6, "{l1}");
        assert!((l2 - got[1]).abs() < 1e-4, "{l2}");
    }

    #[test]
    fn generalized_eliminates_extra_null_directions() {
        // Cost: 4-cycle. Demand: single unit pair on an edge of the cycle.
        // min_w wᵀL_C w / (w_0 - w_1)^2 = 1 / R_eff(0, 1) = 1 / (1 || 3) = 4/3.
        let cost = PairWeights::from([((0, 1), 1.0), ((1, 2), 1.0), ((2, 3), 1.0), ((0, 3), 1.0)]);
        let demand = PairWeights::from([((0, 1), 1.0)]);
        let got = generalized_eigenvalues(&laplacian(&cost, 4).unwrap(), &laplacian(&demand, 4).unwrap()).unwrap();
        assert_close(&got, &[4.0 / 3.0], 1e-12);
    }

    fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> DMatrix<f64> {
        let b = DMatrix::from_fn(n, rank, |_, _| rng.gen_range(-1.0..1.0));
        &b * b.transpose()
    }

    #[test]
    fn generalized_congruence_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..40 {
            let yrank = 2 + trial % 3;
            let x = random_psd(&mut rng, 4, 4);
            let y = random_psd(&mut rng, 4, yrank);
            let p = DMatrix::from_fn(4, 4, |r, c| rng.gen_range(-1.0..1.0) + if r == c { 2.0 } else { 0.0 });
            let a = generalized_eigenvalues(&x, &y).unwrap();
            let b = generalized_eigenvalues(&(p.transpose() * &x * &p), &(p.transpose() * &y * &p)).unwrap();
            assert_eq!(a.len(), yrank);
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() <= 1e-7 * u.abs().max(1.0), "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn gram_spectrum_examples() {
        let pts = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 2.0, 0.0, 5.0, 5.0]);
        let one = PairWeights::from([((0, 1), 1.0)]);
        assert_close(&gram_spectrum_of_differences(&pts, &one).unwrap(), &[4.0, 0.0, 0.0], 1e-12);

        let same = DMatrix::from_element(3, 2, 0.7);
        assert_close(&gram_spectrum_of_differences(&same, &one).unwrap(), &[0.0; 3], 0.0);

        let h = 3f64.sqrt() / 2.0;
        let tri = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.5, h]);
        let unit = PairWeights::from([((0, 1), 1.0), ((0, 2), 1.0), ((1, 2), 1.0)]);
        let sigma = gram_spectrum_of_differences(&tri, &unit).unwrap();
        assert!((sigma.iter().sum::<f64>() - 3.0).abs() < 1e-12);
        assert!(matches!(
            gram_spectrum_of_differences(&tri, &PairWeights::from([((0, 5), 1.0)])),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn rank_profile_examples() {
        let report = SpectralReport {
            generalized: vec![0.1, 1.0, 0.5, 3.0],
            gram: vec![2.0, 1.0, 1.0, 0.0],
            rank_demand: 4,
        };
        let prof = rank_profile(&report, 0.5);
        assert_eq!(prof.rows.len(), 3);
        assert_eq!(prof.rows[0].factor, Some(4.0));
        assert_eq!(prof.rows[1].factor, None);
        assert!((prof.rows[2].factor.unwrap() - 3.0 * 1.44).abs() < 1e-12);
        assert_eq!(prof.best, Some(0));
        assert_eq!(prof.rows[0].tail_fraction, 0.5);

        let zero = rank_profile(&report, 0.0);
        for row in &zero.rows {
            assert_eq!(row.factor, Some(row.r as f64));
        }

        let none = rank_profile(&report, 10.0);
        assert!(none.best.is_none() && none.best_bound().is_none());
    }

    proptest! {
        #[test]
        fn trace_identity(coords in prop::collection::vec(-3.0..3.0f64, 12), w in prop::collection::vec(0.0..2.0f64, 6)) {
            let pts = DMatrix::from_row_slice(4, 3, &coords);
            let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
            let demand: PairWeights = pairs.iter().zip(&w).map(|(&p, &x)| (p, x)).collect();
            let sigma = gram_spectrum_of_differences(&pts, &demand).unwrap();
            let direct: f64 = demand
                .iter()
                .map(|(&(i, j), &d)| d * (pts.row(i) - pts.row(j)).norm_squared())
                .sum();
            let total: f64 = sigma.iter().sum();
            prop_assert!((total - direct).abs() <= 1e-8 * direct.max(1e-12));
        }
    }
}
