//! Least-squares and L1-regularized solvers over a regression problem:
//! rank-revealing ordinary least squares, and cyclic coordinate descent with
//! soft-threshold updates for the lasso. Coordinate descent produces exact
//! zeros, so sparsity counts are exact rather than thresholded.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlin::{static_map, Dictionary};
use crate::vrft::RegressionProblem;

/// Default convergence tolerance on the max absolute coefficient change per
/// sweep. On the heavily collinear fine-grained dictionaries the support
/// keeps consolidating long after the fit stops improving, so the default
/// stops in the same regime as the stock scikit-learn solver rather than
/// polishing to machine precision.
pub const DEFAULT_LASSO_TOL: f64 = 1e-4;

/// Default cap on full coordinate sweeps.
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// How the residual term of the lasso objective is scaled.
///
/// `PerSample` minimizes (1/(2 n)) * sum r^2 + alpha * sum |rho|; `Raw`
/// minimizes sum r^2 + alpha * sum |rho| (equivalent to `PerSample` with
/// alpha divided by 2n, which is how it is implemented).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveScaling {
    PerSample,
    Raw,
}

/// Solver outcome bookkeeping attached to every fitted parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    /// Full coordinate sweeps used (1 for the direct least-squares solve).
    pub iterations: usize,
    /// Whether the stopping criterion was met within the iteration cap.
    pub converged: bool,
    /// Final objective value, in the solver's own convention.
    pub objective: f64,
    /// Set when the regressor matrix was numerically rank deficient.
    pub rank_deficient: bool,
    /// Human-readable notes (pinned zero columns, rank details).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Objective value after each sweep, when tracing was requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective_trace: Option<Vec<f64>>,
}

/// A fitted parameter vector together with the dictionary that defines its
/// basis and the regularization weight that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControllerParams {
    rho: Vec<f64>,
    dictionary: Dictionary,
    alpha: f64,
    diagnostics: SolveDiagnostics,
}

impl ControllerParams {
    pub fn new(
        rho: Vec<f64>,
        dictionary: Dictionary,
        alpha: f64,
        diagnostics: SolveDiagnostics,
    ) -> Result<Self> {
        if rho.len() != dictionary.m() {
            return Err(Error::ParamLengthMismatch {
                got: rho.len(),
                expected: dictionary.m(),
            });
        }
        if let Some(index) = rho.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteParam { index });
        }
        Ok(Self {
            rho,
            dictionary,
            alpha,
            diagnostics,
        })
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn diagnostics(&self) -> &SolveDiagnostics {
        &self.diagnostics
    }

    /// The static controller map u = sum_i rho_i psi_i(x).
    pub fn static_map(&self, x: f64) -> f64 {
        static_map(&self.dictionary, &self.rho, x).expect("length validated at construction")
    }

    /// Number of coefficients that are not exactly zero.
    pub fn nonzero_count(&self) -> usize {
        self.rho.iter().filter(|&&v| v != 0.0).count()
    }
}

/// Validates parsed parameters (used when reading controller files).
pub fn validate_params(params: &ControllerParams) -> Result<()> {
    if params.rho.len() != params.dictionary.m() {
        return Err(Error::ParamLengthMismatch {
            got: params.rho.len(),
            expected: params.dictionary.m(),
        });
    }
    if let Some(index) = params.rho.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteParam { index });
    }
    Ok(())
}

/// Minimizes the squared residual by singular value decomposition.
///
/// Singular values below max(rows, cols) * eps * s_max are treated as zero,
/// which makes the result the minimum-norm minimizer when the matrix is rank
/// deficient; rank deficiency is flagged in the diagnostics.
pub fn ols_solve(problem: &RegressionProblem) -> Result<ControllerParams> {
    if problem.n_eff() == 0 || problem.m() == 0 {
        return Err(Error::EmptyProblem);
    }
    let svd = problem.phi().clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let eps = f64::EPSILON * problem.n_eff().max(problem.m()) as f64 * s_max;
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let rho = svd
        .solve(problem.target(), eps)
        .expect("svd computed with both factors");
    let residual = problem.target() - problem.phi() * &rho;
    let rank_deficient = rank < problem.m();
    let mut notes = Vec::new();
    if rank_deficient {
        notes.push(format!(
            "rank {rank} < {} columns; returned the minimum-norm solution",
            problem.m()
        ));
    }
    ControllerParams::new(
        rho.iter().copied().collect(),
        problem.dictionary().clone(),
        0.0,
        SolveDiagnostics {
            iterations: 1,
            converged: true,
            objective: residual.norm_squared(),
            rank_deficient,
            notes,
            objective_trace: None,
        },
    )
}

/// sign(x) * max(|x| - lambda, 0), the scalar shrinkage kernel of coordinate
/// descent. Returns exact zero inside the threshold.
pub fn soft_threshold(x: f64, lambda: f64) -> f64 {
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        0.0
    }
}

/// Knobs for [`lasso_cd_with`]. `lasso_cd` uses the defaults.
#[derive(Debug, Clone)]
pub struct LassoOptions {
    pub alpha: f64,
    /// Stop when the largest absolute coefficient change in a sweep falls
    /// below this.
    pub tol: f64,
    /// Cap on full sweeps; hitting it returns converged = false, not an error.
    pub max_iter: usize,
    pub scaling: ObjectiveScaling,
    /// Rescale columns to unit root-mean-square before solving (coefficients
    /// are mapped back). Off by default: the built-in dictionaries are
    /// already normalized at the end of scale, and rescaling changes the
    /// effective per-column alpha.
    pub standardize: bool,
    /// Starting point; defaults to the zero vector.
    pub warm_start: Option<Vec<f64>>,
    /// Record the objective after every sweep in the diagnostics.
    pub record_objective: bool,
}

impl LassoOptions {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            tol: DEFAULT_LASSO_TOL,
            max_iter: DEFAULT_MAX_ITER,
            scaling: ObjectiveScaling::PerSample,
            standardize: false,
            warm_start: None,
            record_objective: false,
        }
    }
}

/// Cyclic coordinate descent for the lasso with the default tolerance
/// settings. One iteration is one full sweep over all m coordinates.
pub fn lasso_cd(
    problem: &RegressionProblem,
    alpha: f64,
    tol: f64,
    max_iter: usize,
) -> Result<ControllerParams> {
    let mut opts = LassoOptions::new(alpha);
    opts.tol = tol;
    opts.max_iter = max_iter;
    lasso_cd_with(problem, &opts)
}

/// Cyclic coordinate descent for the lasso objective
/// (1/(2 n)) * ||target - phi rho||^2 + alpha * ||rho||_1 (per-sample
/// scaling; see [`ObjectiveScaling`] for the raw variant).
///
/// Coordinates are visited in fixed cyclic order for run-to-run determinism.
/// Identically-zero columns are pinned to exact zero and noted. Coefficients
/// zeroed by shrinkage are exact zeros.
pub fn lasso_cd_with(problem: &RegressionProblem, opts: &LassoOptions) -> Result<ControllerParams> {
    if problem.n_eff() == 0 || problem.m() == 0 {
        return Err(Error::EmptyProblem);
    }
    if !(opts.alpha >= 0.0) || !opts.alpha.is_finite() {
        return Err(Error::NegativeAlpha { alpha: opts.alpha });
    }
    if opts.max_iter == 0 {
        return Err(Error::ZeroMaxIter);
    }

    let phi = problem.phi();
    let n = problem.n_eff();
    let m = problem.m();
    let n_f = n as f64;
    let alpha_eff = match opts.scaling {
        ObjectiveScaling::PerSample => opts.alpha,
        ObjectiveScaling::Raw => opts.alpha / (2.0 * n_f),
    };

    // Optional column rescaling to unit RMS; coefficients are mapped back at
    // the end, so the reported rho is always in the original basis.
    let col_scale: Vec<f64> = (0..m)
        .map(|j| {
            if opts.standardize {
                let rms = (phi.column(j).norm_squared() / n_f).sqrt();
                if rms > 0.0 {
                    rms
                } else {
                    1.0
                }
            } else {
                1.0
            }
        })
        .collect();

    // Per-column curvature (1/n) ||phi_j||^2 in the scaled basis.
    let col_sq: Vec<f64> = (0..m)
        .map(|j| phi.column(j).norm_squared() / (n_f * col_scale[j] * col_scale[j]))
        .collect();

    let mut notes: Vec<String> = Vec::new();
    let zero_cols: Vec<usize> = (0..m).filter(|&j| col_sq[j] == 0.0).collect();
    if !zero_cols.is_empty() {
        notes.push(format!(
            "{} identically zero column(s) pinned to zero (first: phi_{})",
            zero_cols.len(),
            zero_cols[0] + 1
        ));
    }

    // rho in the scaled basis.
    let mut rho: Vec<f64> = match &opts.warm_start {
        Some(start) => {
            if start.len() != m {
                return Err(Error::ParamLengthMismatch {
                    got: start.len(),
                    expected: m,
                });
            }
            start
                .iter()
                .zip(&col_scale)
                .map(|(r, s)| r * s)
                .collect()
        }
        None => vec![0.0; m],
    };

    // residual = target - phi rho (original basis).
    let mut residual: DVector<f64> = problem.target().clone();
    for j in 0..m {
        if rho[j] != 0.0 {
            residual.axpy(-rho[j] / col_scale[j], &phi.column(j), 1.0);
        }
    }

    let mut trace = opts.record_objective.then(Vec::new);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut max_delta = 0.0f64;
        for j in 0..m {
            if col_sq[j] == 0.0 {
                rho[j] = 0.0;
                continue;
            }
            let old = rho[j];
            // Correlation of column j with the residual where rho_j is
            // backed out: (1/n) phi_j^T r / scale_j + curvature * old.
            let corr = phi.column(j).dot(&residual) / (n_f * col_scale[j]) + col_sq[j] * old;
            let new = soft_threshold(corr, alpha_eff) / col_sq[j];
            if new != old {
                residual.axpy((old - new) / col_scale[j], &phi.column(j), 1.0);
                rho[j] = new;
                max_delta = max_delta.max((new - old).abs());
            }
        }
        if let Some(trace) = trace.as_mut() {
            let l1: f64 = rho.iter().map(|r| r.abs()).sum();
            trace.push(residual.norm_squared() / (2.0 * n_f) + alpha_eff * l1);
        }
        if max_delta < opts.tol {
            converged = true;
            break;
        }
    }

    // Back to the original basis; exact zeros survive the rescale.
    let rho: Vec<f64> = rho
        .iter()
        .zip(&col_scale)
        .map(|(r, s)| if *r == 0.0 { 0.0 } else { r / s })
        .collect();

    let l1: f64 = rho.iter().map(|r| r.abs()).sum();
    let objective = match opts.scaling {
        ObjectiveScaling::PerSample => residual.norm_squared() / (2.0 * n_f) + opts.alpha * l1,
        ObjectiveScaling::Raw => residual.norm_squared() + opts.alpha * l1,
    };

    ControllerParams::new(
        rho,
        problem.dictionary().clone(),
        opts.alpha,
        SolveDiagnostics {
            iterations,
            converged,
            objective,
            rank_deficient: false,
            notes,
            objective_trace: trace,
        },
    )
}
