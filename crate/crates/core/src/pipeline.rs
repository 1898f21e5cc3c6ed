//! End-to-end run: formulate, solve, audit, round, spectral profile, oracle.
//!
//! Vertex indices in reports are 1-based, matching the instance format.

use std::fmt;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::Error;
use crate::graph::{CutResult, WeightedGraphPair};
use crate::oracle::{exact_sparsest_cut, CourantFisher};
use crate::rounding::{
    best_direction_lower_bound, round_with_witness, scan_distortion, scan_projection_bounds, AUDIT_SLACK,
};
use crate::sdp::{formulate, solve, SolveStats, SolverOptions, VectorConfiguration};
use crate::spectral::{rank_profile, RankProfile, RankRow, SpectralReport};

/// Triangle, normalization and PSD residuals accepted on a solution.
pub const FEASIBILITY_TOL: f64 = 1e-6;
/// Slack for the spectral-tail and approximation-bound checks.
pub const BOUND_TOL: f64 = 1e-6;
/// Slack for `Φ* <= Φ(ALG)`; both sides come from exact cut evaluation.
pub const CUT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub solver: SolverOptions,
    /// Run exhaustive enumeration when `n <= oracle_max`.
    pub oracle_max: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            oracle_max: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Formulate,
    Solve,
    Audit,
    Round,
    Spectral,
    Oracle,
    Invariants,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Formulate => "formulate",
            Stage::Solve => "solve",
            Stage::Audit => "audit",
            Stage::Round => "round",
            Stage::Spectral => "spectral",
            Stage::Oracle => "oracle",
            Stage::Invariants => "invariants",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        exit_code(&self.source)
    }
}

/// Process exit code for an error: 2 input, 3 convergence, 4 property violation.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Input(_) | Error::Parse { .. } => 2,
        Error::Convergence(_) => 3,
        Error::PropertyViolation(_) | Error::NoProperCut => 4,
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T> AtStage<T> for crate::Result<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|source| PipelineError { stage, source })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceSummary {
    pub n: usize,
    pub cost_edges: usize,
    pub demand_edges: usize,
    pub total_cost: f64,
    pub total_demand: f64,
}

impl InstanceSummary {
    fn of(g: &WeightedGraphPair) -> Self {
        Self {
            n: g.n(),
            cost_edges: g.cost().len(),
            demand_edges: g.demand().len(),
            total_cost: g.total_cost(),
            total_demand: g.total_demand(),
        }
    }
}

/// A cut reported by the side containing vertex 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutSummary {
    pub side: Vec<usize>,
    pub cost_cut: f64,
    pub demand_cut: f64,
    pub sparsity: f64,
}

impl CutSummary {
    fn of(r: &CutResult) -> Self {
        let cut = if r.cut.contains(0) { r.cut.clone() } else { r.cut.complement() };
        Self {
            side: cut.vertices().into_iter().map(|v| v + 1).collect(),
            cost_cut: r.cost_cut,
            demand_cut: r.demand_cut,
            sparsity: r.sparsity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundingSummary {
    /// The direction `x_k - x_l` whose sweep produced the cut.
    pub direction: [usize; 2],
    /// Smallest vertex among those tied at the threshold.
    pub threshold_vertex: usize,
    pub directions_swept: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundSummary {
    pub r: usize,
    pub factor: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlackAudit {
    pub checked: usize,
    /// Smallest slack found; negative means violated.
    pub tightest_slack: f64,
    pub witness: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestDirectionAudit {
    pub direction: [usize; 2],
    pub achieved: f64,
    pub total: f64,
    pub tightest_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Audits {
    pub triangle_violation: f64,
    pub triangle_witness: Option<[usize; 3]>,
    pub normalization_residual: f64,
    pub psd_residual: f64,
    pub projection: SlackAudit,
    pub distortion: SlackAudit,
    /// `Φ/λ_{r+1} - tail_r` over the applicable ranks.
    pub spectral_tail: SlackAudit,
    pub best_direction: BestDirectionAudit,
}

impl Audits {
    /// Descriptions of every check outside its tolerance.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |ok: bool, what: &str, value: f64| {
            if !ok {
                out.push(format!("{what} ({value:.3e})"));
            }
        };
        check(self.triangle_violation <= FEASIBILITY_TOL, "triangle violation", self.triangle_violation);
        check(
            self.normalization_residual <= FEASIBILITY_TOL,
            "normalization residual",
            self.normalization_residual,
        );
        check(self.psd_residual <= FEASIBILITY_TOL, "PSD residual", self.psd_residual);
        check(
            self.projection.tightest_slack >= -AUDIT_SLACK,
            "projection sandwich",
            self.projection.tightest_slack,
        );
        check(
            self.distortion.tightest_slack >= -AUDIT_SLACK,
            "l1 distortion sandwich",
            self.distortion.tightest_slack,
        );
        check(
            self.spectral_tail.tightest_slack >= -BOUND_TOL,
            "spectral tail bound",
            self.spectral_tail.tightest_slack,
        );
        check(
            self.best_direction.tightest_slack >= -AUDIT_SLACK,
            "best direction bound",
            self.best_direction.tightest_slack,
        );
        out
    }
}

fn one_based<const N: usize>(v: [usize; N]) -> [usize; N] {
    v.map(|i| i + 1)
}

/// Runs every property audit on a configuration.
pub fn audit_configuration(
    g: &WeightedGraphPair,
    config: &VectorConfiguration,
    spectral: &SpectralReport,
    profile: &RankProfile,
) -> crate::Result<Audits> {
    let x = &config.vectors;
    let tri = crate::sdp::audit_triangle(x);
    let proj = scan_projection_bounds(x);
    let dist = scan_distortion(x, g.demand())?;
    let best = best_direction_lower_bound(x).map_err(|d| {
        Error::PropertyViolation(format!(
            "all solution vectors coincide (degenerate direction {}, {})",
            d.k + 1,
            d.l + 1
        ))
    })?;

    let mut tail = SlackAudit {
        checked: 0,
        tightest_slack: f64::INFINITY,
        witness: None,
    };
    for row in profile.rows.iter().filter(|r| r.applicable()) {
        let slack = profile.phi_sdp / row.lambda_next - spectral.tail_fraction(row.r);
        tail.checked += 1;
        if slack < tail.tightest_slack {
            tail.tightest_slack = slack;
            tail.witness = Some(vec![row.r]);
        }
    }

    Ok(Audits {
        triangle_violation: tri.max_violation,
        triangle_witness: tri.worst.map(|t| one_based([t.i, t.k, t.l])),
        normalization_residual: config.normalization_residual,
        psd_residual: config.psd_residual,
        projection: SlackAudit {
            checked: proj.checked,
            tightest_slack: proj.tightest_slack,
            witness: proj.witness.map(|w| one_based(w).to_vec()),
        },
        distortion: SlackAudit {
            checked: dist.pairs,
            tightest_slack: dist.tightest_slack,
            witness: dist.witness.map(|w| one_based(w).to_vec()),
        },
        spectral_tail: tail,
        best_direction: BestDirectionAudit {
            direction: one_based([best.pair.0, best.pair.1]),
            achieved: best.achieved,
            total: best.total,
            tightest_slack: best.min_slack,
        },
    })
}

/// Audits for an externally supplied Gram matrix, without solving.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GramAudit {
    pub phi: f64,
    pub audits: Audits,
    pub failures: Vec<String>,
}

pub fn audit_gram(g: &WeightedGraphPair, gram: &DMatrix<f64>) -> Result<GramAudit, PipelineError> {
    let n = g.n();
    if gram.nrows() != n || gram.ncols() != n {
        return Err(Error::Input(format!(
            "Gram matrix is {}x{} but the instance has {n} vertices",
            gram.nrows(),
            gram.ncols()
        )))
        .at(Stage::Audit);
    }
    let problem = formulate(g).at(Stage::Formulate)?;
    let config = VectorConfiguration::from_gram(&problem, gram).at(Stage::Audit)?;
    let spectral = SpectralReport::compute(g, &config.vectors).at(Stage::Spectral)?;
    let profile = rank_profile(&spectral, config.objective_value);
    let audits = audit_configuration(g, &config, &spectral, &profile).at(Stage::Audit)?;
    Ok(GramAudit {
        phi: config.objective_value,
        failures: audits.failures(),
        audits,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub instance: InstanceSummary,
    pub phi_sdp: f64,
    pub phi_alg: f64,
    pub alg_cut: CutSummary,
    pub rounding: RoundingSummary,
    pub phi_star: Option<f64>,
    pub star_cut: Option<CutSummary>,
    pub lambda: Vec<f64>,
    pub sigma: Vec<f64>,
    pub rank_demand: usize,
    pub bound_table: Vec<RankRow>,
    pub best_bound: Option<BoundSummary>,
    pub audits: Audits,
    pub courant_fisher: Option<CourantFisher>,
    pub solver: SolveStats,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Zeroes the fields that depend on timing.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.solver.wall_time_seconds = 0.0;
        r
    }

    /// Checks `Φ(SDP) <= Φ* <= Φ(ALG)` and `Φ(ALG) <= best bound`, allowing
    /// `sdp_slack` (see [`sdp_slack`]) on the relaxation side.
    pub fn check_invariants(&self, sdp_slack: f64) -> crate::Result<()> {
        let violation = |msg: String| Err(Error::PropertyViolation(msg));
        if let Some(star) = self.phi_star {
            if self.phi_sdp > star + sdp_slack {
                return violation(format!("phi_sdp {} exceeds phi_star {star}", self.phi_sdp));
            }
            if star > self.phi_alg + CUT_TOL {
                return violation(format!("phi_star {star} exceeds phi_alg {}", self.phi_alg));
            }
        }
        if let Some(b) = &self.best_bound {
            if self.phi_alg > b.bound + BOUND_TOL {
                return violation(format!(
                    "phi_alg {} exceeds the rank-{} bound {}",
                    self.phi_alg, b.r, b.bound
                ));
            }
        }
        if let Some(cf) = &self.courant_fisher {
            if !cf.holds {
                return violation(format!("lambda_1 {} exceeds phi_star {}", cf.lambda_1, cf.phi_star));
            }
        }
        Ok(())
    }
}

/// How far a converged `Φ(SDP)` may sit above the true optimum near `phi`.
///
/// The solver's duality gap is relative to `1 + |objective|` in units where
/// both Laplacians have unit norm, which is an absolute error of about
/// `obj_tol |L_C| / |L_D|` when the optimum is near zero.
pub fn sdp_slack(g: &WeightedGraphPair, obj_tol: f64, phi: f64) -> f64 {
    let ratio = g.cost_laplacian().norm() / g.demand_laplacian().norm();
    BOUND_TOL + obj_tol * (phi.abs() + ratio)
}

/// Solution artifacts kept alongside the report.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub gram: DMatrix<f64>,
    pub configuration: VectorConfiguration,
}

pub fn run(g: &WeightedGraphPair, opts: &RunOptions) -> Result<RunReport, PipelineError> {
    run_full(g, opts).map(|o| o.report)
}

pub fn run_full(g: &WeightedGraphPair, opts: &RunOptions) -> Result<RunOutput, PipelineError> {
    let problem = formulate(g).at(Stage::Formulate)?;
    let solution = solve(&problem, &opts.solver).at(Stage::Solve)?;
    let config = solution.configuration;
    let phi_sdp = config.objective_value;

    let spectral = SpectralReport::compute(g, &config.vectors).at(Stage::Spectral)?;
    let profile = rank_profile(&spectral, phi_sdp);
    let audits = audit_configuration(g, &config, &spectral, &profile).at(Stage::Audit)?;
    let failures = audits.failures();
    if !failures.is_empty() {
        return Err(Error::PropertyViolation(failures.join("; "))).at(Stage::Audit);
    }

    let rounded = round_with_witness(&config.vectors, g).at(Stage::Round)?;

    let star = if g.n() <= opts.oracle_max {
        Some(exact_sparsest_cut(g).at(Stage::Oracle)?)
    } else {
        None
    };
    let courant_fisher = star.as_ref().map(|s| {
        let lambda_1 = spectral.generalized[0];
        CourantFisher {
            holds: lambda_1 <= s.sparsity + 1e-7,
            lambda_1,
            phi_star: s.sparsity,
        }
    });

    let best_bound = profile.best_row().map(|row| {
        let factor = row.factor.expect("best row is applicable");
        BoundSummary {
            r: row.r,
            factor,
            bound: factor * phi_sdp,
        }
    });
    let report = RunReport {
        instance: InstanceSummary::of(g),
        phi_sdp,
        phi_alg: rounded.result.sparsity,
        alg_cut: CutSummary::of(&rounded.result),
        rounding: RoundingSummary {
            direction: [rounded.k + 1, rounded.l + 1],
            threshold_vertex: rounded.threshold + 1,
            directions_swept: rounded.directions,
        },
        phi_star: star.as_ref().map(|s| s.sparsity),
        star_cut: star.as_ref().map(CutSummary::of),
        lambda: spectral.generalized,
        sigma: spectral.gram,
        rank_demand: spectral.rank_demand,
        bound_table: profile.rows,
        best_bound,
        audits,
        courant_fisher,
        solver: solution.stats,
    };
    let slack = sdp_slack(g, opts.solver.obj_tol, report.phi_star.unwrap_or(phi_sdp));
    report.check_invariants(slack).at(Stage::Invariants)?;
    Ok(RunOutput {
        report,
        gram: solution.gram,
        configuration: config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle4_complete() -> WeightedGraphPair {
        let cost = [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 1.0)];
        let demand = (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j, 1.0)));
        WeightedGraphPair::from_edges(4, cost, demand).unwrap()
    }

    #[test]
    fn cycle_report() {
        let r = run(&cycle4_complete(), &RunOptions::default()).unwrap();
        assert_eq!(r.phi_star, Some(0.5));
        assert_eq!(r.phi_alg, 0.5);
        assert!(r.phi_sdp <= 0.5 + 1e-4);
        assert_eq!(r.instance.n, 4);
        assert_eq!(r.lambda.len(), 3);
        assert!(r.courant_fisher.unwrap().holds);
    }

    #[test]
    fn cost_equals_demand_report() {
        let e = [(0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5), (0, 3, 1.5)];
        let g = WeightedGraphPair::from_edges(4, e, e).unwrap();
        let r = run(&g, &RunOptions::default()).unwrap();
        assert!((r.phi_sdp - 1.0).abs() < 1e-6);
        assert!((r.phi_alg - 1.0).abs() < 1e-12);
        assert_eq!(r.phi_star, Some(1.0));
    }

    #[test]
    fn oracle_threshold() {
        let opts = RunOptions {
            oracle_max: 3,
            ..Default::default()
        };
        let r = run(&cycle4_complete(), &opts).unwrap();
        assert!(r.phi_star.is_none() && r.star_cut.is_none() && r.courant_fisher.is_none());
    }

    #[test]
    fn convergence_failure_is_typed() {
        let opts = RunOptions {
            solver: SolverOptions {
                max_inner: 2,
                max_outer: 1,
                ..Default::default()
            },
            ..Default::default()
        };
        let err = run(&cycle4_complete(), &opts).unwrap_err();
        assert_eq!(err.stage, Stage::Solve);
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn invariants_reject_bad_reports() {
        let mut r = run(&cycle4_complete(), &RunOptions::default()).unwrap();
        r.phi_alg = 0.4;
        assert!(r.check_invariants(1e-4).is_err());
        r.phi_alg = 0.5;
        r.phi_sdp = 0.6;
        assert!(r.check_invariants(1e-4).is_err());
        assert!(r.check_invariants(0.2).is_ok());
    }

    #[test]
    fn gram_audit_flags_infeasible_input() {
        let g = cycle4_complete();
        // Orthonormal points scaled to normalization 1 satisfy every audit.
        let ok = DMatrix::<f64>::identity(4, 4) / 12.0;
        let a = audit_gram(&g, &ok).unwrap();
        assert!(a.failures.is_empty(), "{:?}", a.failures);
        assert!((a.phi - 4.0 / 6.0).abs() < 1e-12);

        // Collinear 0, 1, 2, 3 has an obtuse angle at the middle points.
        let x = DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]);
        let a = audit_gram(&g, &(&x * x.transpose())).unwrap();
        assert!(a.failures.iter().any(|f| f.contains("triangle")));
    }
}
