//! Binomial maximum-likelihood estimation of the mortality-ratio
//! parameters from aggregated current-status data.
//!
//! Each age group contributes `c_k log p_k + (n_k - c_k) log(1 - p_k)` with
//! `p_k = pi_k / (1 + pi_k)` taken from the pseudo-convolution odds. The
//! incidence and healthy mortality stay fixed; only `gamma` is searched.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::analytic::Analytic;
use crate::error::{Error, Result};
use crate::optim::{central_hessian, nelder_mead, HessianStep, SimplexTolerances};
use crate::quadrature::{integrate, QuadratureConfig};
use crate::rate_model::{MortalityRatioParams, RateModel};
use crate::simulator::{AgeGroup, AgeGroupTable};

/// 97.5% standard normal quantile.
pub const Z_975: f64 = 1.959_963_984_540_054;

/// How group prevalence relates to the analytic curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupEvaluation {
    /// `p` at the midpoint of the age interval.
    #[default]
    Midpoint,
    /// Uniform average of `p` over the age interval.
    Averaged,
}

/// Prevalence attributed to one age group at calendar time `t`.
pub fn group_prevalence(
    model: &RateModel,
    group: &AgeGroup,
    t: f64,
    mode: GroupEvaluation,
    quad: &QuadratureConfig,
) -> Result<f64> {
    let analytic = Analytic::new(model).with_quadrature(*quad);
    match mode {
        GroupEvaluation::Midpoint => Ok(analytic.odds_pseudo(t, group.midpoint())?.prevalence),
        GroupEvaluation::Averaged => {
            let failure = std::cell::Cell::new(None);
            let outer = QuadratureConfig {
                rel_tol: quad.rel_tol.max(1e-12),
                ..*quad
            };
            let total = integrate(
                |a| match analytic.odds_pseudo(t, a) {
                    Ok(r) => r.prevalence,
                    Err(e) => {
                        failure.set(Some(e));
                        0.0
                    }
                },
                group.lo,
                group.hi,
                &outer,
            )?;
            if let Some(e) = failure.into_inner() {
                return Err(e);
            }
            Ok(total / (group.hi - group.lo))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Supplies the fixed incidence and healthy mortality; its ratio is
    /// replaced during the search.
    pub base_model: RateModel,
    /// Box `[lo, hi]` per component of `gamma`.
    pub bounds: [[f64; 2]; 3],
    pub initial_points: Vec<[f64; 3]>,
    /// Components held at their initial value when false.
    pub free: [bool; 3],
    pub tolerances: SimplexTolerances,
    /// Restarts from the incumbent after each simplex run.
    pub restarts: usize,
    pub group_evaluation: GroupEvaluation,
    pub hessian_step: HessianStep,
    pub include_binomial_constant: bool,
    pub quadrature: QuadratureConfig,
}

impl FitConfig {
    pub fn new(base_model: RateModel) -> Self {
        Self {
            base_model,
            bounds: [[0.0, 1.0], [0.0, 50.0], [0.0, 20.0]],
            initial_points: vec![
                [0.01, 2.0, 1.0],
                [0.05, 10.0, 0.5],
                [0.1, 1.0, 1.5],
                [0.005, 20.0, 2.0],
            ],
            free: [true; 3],
            tolerances: SimplexTolerances::default(),
            restarts: 1,
            group_evaluation: GroupEvaluation::Midpoint,
            hessian_step: HessianStep::default(),
            include_binomial_constant: false,
            quadrature: QuadratureConfig::tight(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.initial_points.is_empty() {
            return Err(Error::Config("at least one initial point is required".into()));
        }
        for b in &self.bounds {
            if !(b[0] < b[1]) {
                return Err(Error::Config(format!("invalid bound [{}, {}]", b[0], b[1])));
            }
        }
        for p in &self.initial_points {
            if !self.in_bounds(p) {
                return Err(Error::Config(format!("initial point {p:?} lies outside the bounds")));
            }
        }
        let t = &self.tolerances;
        if !(t.x_tol > 0.0 && t.f_tol > 0.0 && t.max_evals > 0) {
            return Err(Error::Config("optimizer tolerances must be positive".into()));
        }
        if !self.free.iter().any(|f| *f) {
            return Err(Error::Config("no free parameter to estimate".into()));
        }
        self.quadrature.validate()
    }

    /// `gamma3` has an open lower bound; the other limits are closed.
    fn in_bounds(&self, g: &[f64; 3]) -> bool {
        g.iter().zip(&self.bounds).enumerate().all(|(j, (v, b))| {
            let above = if j == 2 { *v > b[0] } else { *v >= b[0] };
            above && *v <= b[1]
        })
    }

    fn free_indices(&self) -> Vec<usize> {
        (0..3).filter(|j| self.free[*j]).collect()
    }
}

/// `ln C(n, c)`.
fn ln_binomial(n: u64, c: u64) -> f64 {
    let c = c.min(n - c);
    (1..=c).map(|j| ((n - c + j) as f64 / j as f64).ln()).sum()
}

/// Binomial log-likelihood of `table` at `gamma`. Points outside the
/// bounds, or where the mortality ratio is not positive, give `-inf`.
pub fn log_likelihood(gamma: [f64; 3], table: &AgeGroupTable, config: &FitConfig) -> Result<f64> {
    if !config.in_bounds(&gamma) {
        return Ok(f64::NEG_INFINITY);
    }
    let Ok(model) = config
        .base_model
        .with_ratio(MortalityRatioParams::from_array(gamma))
    else {
        return Ok(f64::NEG_INFINITY);
    };
    let t = table.cross_section_time;
    let probs = crate::par::map(&table.rows, |row| {
        if row.n == 0 {
            return Ok(0.0);
        }
        group_prevalence(&model, &row.group(), t, config.group_evaluation, &config.quadrature)
    })?;
    let mut total = 0.0;
    for (row, p) in table.rows.iter().zip(probs) {
        let (n, c) = (row.n, row.c);
        if n == 0 {
            continue;
        }
        if c > 0 {
            total += c as f64 * p.ln();
        }
        if n > c {
            total += (n - c) as f64 * (-p).ln_1p();
        }
        if config.include_binomial_constant {
            total += ln_binomial(n, c);
        }
    }
    Ok(if total.is_nan() { f64::NEG_INFINITY } else { total })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub function_evals: usize,
    pub starts: usize,
    /// Components whose estimate sits on a bound of the parameter space.
    pub at_bound: Vec<usize>,
    /// Free components along which the likelihood is flat.
    pub unidentifiable: Vec<usize>,
    pub hessian_condition: f64,
    /// The difference stencil around the estimate reached parameters with
    /// a non-positive mortality ratio; no Hessian or intervals are reported.
    pub hessian_infeasible: bool,
    pub group_evaluation: GroupEvaluation,
    pub hessian_step: HessianStep,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub gamma_hat: [f64; 3],
    pub loglik: f64,
    /// Hessian of the negative log-likelihood; rows and columns of fixed
    /// components are zero.
    pub hessian: [[f64; 3]; 3],
    pub covariance: Option<[[f64; 3]; 3]>,
    pub ci95: Option<[[f64; 2]; 3]>,
    pub free: [bool; 3],
    pub converged: bool,
    pub diagnostics: FitDiagnostics,
}

/// Maximises the log-likelihood over the configured parameter space.
pub fn fit(table: &AgeGroupTable, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    table.validate()?;
    let free = config.free_indices();
    let informative = table.rows.iter().filter(|r| r.n > 0).count();
    if informative < free.len() {
        return Err(Error::Config(format!(
            "{informative} informative age groups cannot identify {} parameters",
            free.len()
        )));
    }

    let mut evals = 0usize;
    let mut iterations = 0usize;
    let mut failure: Option<Error> = None;
    let mut objective = |full: [f64; 3], evals: &mut usize| -> f64 {
        *evals += 1;
        match log_likelihood(full, table, config) {
            Ok(v) => -v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        }
    };

    let embed = |start: &[f64; 3], x: &[f64]| {
        let mut g = *start;
        for (slot, v) in free.iter().zip(x) {
            g[*slot] = *v;
        }
        g
    };
    let steps_for = |g: &[f64; 3]| -> Vec<f64> {
        free.iter()
            .map(|&j| {
                let b = config.bounds[j];
                (0.1 * g[j].abs()).max(0.01 * (b[1] - b[0]))
            })
            .collect()
    };

    let mut best: Option<([f64; 3], f64, bool)> = None;
    for start in &config.initial_points {
        let mut point = *start;
        let mut converged = false;
        let mut value = f64::INFINITY;
        for _ in 0..=config.restarts {
            let x0: Vec<f64> = free.iter().map(|&j| point[j]).collect();
            let out = nelder_mead(
                |x| objective(embed(start, x), &mut evals),
                &x0,
                &steps_for(&point),
                &config.tolerances,
            );
            iterations += out.iterations;
            let improved = value - out.value;
            point = embed(start, &out.x);
            value = out.value;
            converged = out.converged;
            if out.converged && improved.abs() < config.tolerances.f_tol {
                break;
            }
        }
        if best.as_ref().is_none_or(|b| value < b.1) {
            best = Some((point, value, converged));
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    let (gamma_hat, neg_loglik, converged) = best.expect("at least one start");
    if !neg_loglik.is_finite() {
        return Err(Error::Domain("log-likelihood is -inf at every start".into()));
    }

    let mut hess_failure: Option<Error> = None;
    let mut stencil_infeasible = false;
    // probes may leave the box; only positivity of R matters here
    let unconstrained = FitConfig {
        bounds: [[f64::NEG_INFINITY, f64::INFINITY]; 3],
        ..config.clone()
    };
    let mut reduced = central_hessian(
        |g| {
            evals += 1;
            let full = [g[0], g[1], g[2]];
            if config.base_model.with_ratio(MortalityRatioParams::from_array(full)).is_err() {
                stencil_infeasible = true;
                return f64::NAN;
            }
            match log_likelihood(full, table, &unconstrained) {
                Ok(v) => -v,
                Err(e) => {
                    hess_failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        &gamma_hat,
        &free,
        config.hessian_step,
    );
    if let Some(e) = hess_failure {
        return Err(e);
    }
    if stencil_infeasible {
        for v in reduced.iter_mut().flatten() {
            *v = 0.0;
        }
    }
    let mut hessian = [[0.0; 3]; 3];
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate() {
            hessian[i][j] = reduced[a][b];
        }
    }

    let scale = reduced
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let unidentifiable: Vec<usize> = free
        .iter()
        .enumerate()
        .filter(|(a, _)| !stencil_infeasible && reduced[*a][*a].abs() <= 1e-10 * scale)
        .map(|(_, &j)| j)
        .collect();
    let at_bound: Vec<usize> = free
        .iter()
        .copied()
        .filter(|&j| {
            let b = config.bounds[j];
            let tol = 1e-4 * (b[1] - b[0]);
            (gamma_hat[j] - b[0]).abs() < tol || (b[1] - gamma_hat[j]).abs() < tol
        })
        .collect();

    let mut result = FitResult {
        gamma_hat,
        loglik: -neg_loglik,
        hessian,
        covariance: None,
        ci95: None,
        free: config.free,
        converged,
        diagnostics: FitDiagnostics {
            iterations,
            function_evals: evals,
            starts: config.initial_points.len(),
            at_bound,
            unidentifiable,
            hessian_condition: if stencil_infeasible { f64::INFINITY } else { condition_number(&reduced) },
            hessian_infeasible: stencil_infeasible,
            group_evaluation: config.group_evaluation,
            hessian_step: config.hessian_step,
        },
    };
    if stencil_infeasible {
        return Ok(result);
    }
    if let Ok((cov, ci)) = covariance_and_intervals(&result) {
        result.covariance = Some(cov);
        result.ci95 = Some(ci);
    }
    Ok(result)
}

fn condition_number(h: &[Vec<f64>]) -> f64 {
    let k = h.len();
    let m = DMatrix::from_fn(k, k, |i, j| h[i][j]);
    let eig = SymmetricEigen::new(m).eigenvalues;
    let max = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    if min == 0.0 { f64::INFINITY } else { max / min }
}

/// Inverse of a symmetric positive definite matrix, or an error carrying
/// its condition number.
pub fn invert_hessian(h: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let k = h.len();
    let m = DMatrix::from_fn(k, k, |i, j| 0.5 * (h[i][j] + h[j][i]));
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let max = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    if !(min > 1e-12 * max) {
        return Err(Error::SingularHessian {
            condition: condition_number(h),
        });
    }
    let inv = m
        .cholesky()
        .ok_or(Error::SingularHessian {
            condition: condition_number(h),
        })?
        .inverse();
    Ok((0..k)
        .map(|i| (0..k).map(|j| 0.5 * (inv[(i, j)] + inv[(j, i)])).collect())
        .collect())
}

/// `estimate_j ± z_{0.975} sqrt((H^-1)_jj)` for each coordinate.
pub fn wald_intervals_from_hessian(estimate: &[f64], hessian: &[Vec<f64>]) -> Result<Vec<[f64; 2]>> {
    let cov = invert_hessian(hessian)?;
    Ok(estimate
        .iter()
        .enumerate()
        .map(|(j, g)| {
            let half = Z_975 * cov[j][j].sqrt();
            [g - half, g + half]
        })
        .collect())
}

fn covariance_and_intervals(fit: &FitResult) -> Result<([[f64; 3]; 3], [[f64; 2]; 3])> {
    let free: Vec<usize> = (0..3).filter(|j| fit.free[*j]).collect();
    let reduced: Vec<Vec<f64>> = free
        .iter()
        .map(|&i| free.iter().map(|&j| fit.hessian[i][j]).collect())
        .collect();
    let cov_reduced = invert_hessian(&reduced)?;
    let mut cov = [[0.0; 3]; 3];
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate() {
            cov[i][j] = cov_reduced[a][b];
        }
    }
    let ci = std::array::from_fn(|j| {
        let half = Z_975 * cov[j][j].sqrt();
        [fit.gamma_hat[j] - half, fit.gamma_hat[j] + half]
    });
    Ok((cov, ci))
}

/// 95% Wald intervals from the Hessian stored in `fit`. Fixed components
/// get a degenerate interval at their value.
pub fn wald_intervals(fit: &FitResult) -> Result<[[f64; 2]; 3]> {
    covariance_and_intervals(fit).map(|(_, ci)| ci)
}
