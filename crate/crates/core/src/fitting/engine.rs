//! Damped Gauss-Newton minimizer for weighted least squares.

use super::{Dataset, FitError, FitResult};
use nalgebra::{DMatrix, DVector};

/// Relative step for finite-difference gradients, scaled per parameter.
pub const FD_REL_STEP: f64 = 1e-4;

/// A parametric curve model.
pub trait FitModel {
    fn param_names(&self) -> Vec<String>;

    fn eval(&self, x: f64, params: &[f64]) -> f64;

    /// d model / d params at x. The default is a central finite difference
    /// with step `FD_REL_STEP` of each parameter's scale.
    fn gradient(&self, x: f64, params: &[f64], out: &mut [f64]) {
        let mut p = params.to_vec();
        for i in 0..params.len() {
            let step = FD_REL_STEP * params[i].abs().max(1.0);
            p[i] = params[i] + step;
            let hi = self.eval(x, &p);
            p[i] = params[i] - step;
            let lo = self.eval(x, &p);
            p[i] = params[i];
            out[i] = (hi - lo) / (2.0 * step);
        }
    }
}

/// Engine controls. The defaults implement the documented convergence
/// contract: stop on relative cost change < 1e-10 or gradient norm < 1e-12,
/// give up (converged = false) after 500 iterations.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub cost_rel_tol: f64,
    pub grad_tol: f64,
    /// Box constraints per parameter, applied by clamping each step.
    pub bounds: Option<Vec<(f64, f64)>>,
    pub initial_damping: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            cost_rel_tol: 1e-10,
            grad_tol: 1e-12,
            bounds: None,
            initial_damping: 1e-3,
        }
    }
}

fn weights(data: &Dataset) -> Vec<f64> {
    match &data.sigma {
        Some(s) => s.iter().map(|&v| 1.0 / v).collect(),
        None => vec![1.0; data.len()],
    }
}

fn cost(model: &dyn FitModel, data: &Dataset, w: &[f64], params: &[f64]) -> f64 {
    (0..data.len())
        .map(|i| {
            let r = w[i] * (data.y[i] - model.eval(data.x[i], params));
            r * r
        })
        .sum()
}

fn clamp(params: &mut [f64], bounds: &Option<Vec<(f64, f64)>>) {
    if let Some(b) = bounds {
        for (p, &(lo, hi)) in params.iter_mut().zip(b.iter()) {
            *p = p.clamp(lo, hi);
        }
    }
}

/// Minimize the weighted squared residuals of `model` on `data` starting
/// from `init`.
///
/// Returns `SingularJacobian` when the normal equations are rank deficient
/// at the solution (non-identifiable parameters). Hitting the iteration cap
/// is not an error: the best point is returned with `converged = false`.
pub fn fit_least_squares(
    model: &dyn FitModel,
    data: &Dataset,
    init: &[f64],
    opts: &FitOptions,
) -> Result<FitResult, FitError> {
    data.check_shape()?;
    let n_par = init.len();
    data.require_points(n_par)?;
    if let Some(b) = &opts.bounds {
        for (i, (&p, &(lo, hi))) in init.iter().zip(b.iter()).enumerate() {
            if p < lo || p > hi {
                return Err(FitError::InvalidData {
                    reason: format!("initial value {p} of parameter {i} outside bounds [{lo}, {hi}]"),
                });
            }
        }
    }
    let n = data.len();
    let w = weights(data);

    let mut params = init.to_vec();
    let mut current_cost = cost(model, data, &w, &params);
    let mut damping = opts.initial_damping;
    let mut converged = false;
    let mut iterations = 0;

    let mut grad_row = vec![0.0; n_par];
    for iter in 0..opts.max_iterations {
        iterations = iter + 1;

        // Weighted Jacobian and residual vector.
        let mut jac = DMatrix::zeros(n, n_par);
        let mut resid = DVector::zeros(n);
        for i in 0..n {
            model.gradient(data.x[i], &params, &mut grad_row);
            for j in 0..n_par {
                jac[(i, j)] = w[i] * grad_row[j];
            }
            resid[i] = w[i] * (data.y[i] - model.eval(data.x[i], &params));
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &resid;

        if jtr.amax() < opts.grad_tol {
            converged = true;
            break;
        }

        // Try damped steps until the cost improves or the damping explodes.
        let mut improved = false;
        for _ in 0..60 {
            let mut lhs = jtj.clone();
            for j in 0..n_par {
                lhs[(j, j)] += damping * jtj[(j, j)].max(1e-300);
            }
            let step = match lhs.clone().lu().solve(&jtr) {
                Some(s) => s,
                None => {
                    damping *= 10.0;
                    continue;
                }
            };
            let mut trial: Vec<f64> = params
                .iter()
                .zip(step.iter())
                .map(|(p, d)| p + d)
                .collect();
            clamp(&mut trial, &opts.bounds);
            let trial_cost = cost(model, data, &w, &trial);
            if trial_cost.is_finite() && trial_cost <= current_cost {
                let rel_drop = (current_cost - trial_cost) / current_cost.max(1e-300);
                params = trial;
                current_cost = trial_cost;
                damping = (damping / 3.0).max(1e-14);
                improved = true;
                if rel_drop < opts.cost_rel_tol {
                    converged = true;
                }
                break;
            }
            damping *= 10.0;
            if damping > 1e14 {
                break;
            }
        }
        if !improved {
            // No downhill step found: treat the current point as final.
            converged = current_cost.is_finite();
            break;
        }
        if converged {
            break;
        }
    }

    // Covariance at the solution from the undamped normal matrix.
    let mut jac = DMatrix::zeros(n, n_par);
    for i in 0..n {
        model.gradient(data.x[i], &params, &mut grad_row);
        for j in 0..n_par {
            jac[(i, j)] = w[i] * grad_row[j];
        }
    }

    // Identifiability checks. A parameter whose full-scale variation moves
    // the model by less than ~1e-8 of the data magnitude is flat (its
    // finite-difference column is numerical noise); an exactly correlated
    // parameter pair makes the normal matrix rank deficient even though a
    // noisy inverse may exist.
    let data_scale = (0..n)
        .map(|i| (w[i] * data.y[i]).abs())
        .fold(0.0_f64, f64::max)
        .max(1e-300);
    for j in 0..n_par {
        let col_max = (0..n).map(|i| jac[(i, j)].abs()).fold(0.0_f64, f64::max);
        if col_max * params[j].abs().max(1.0) < 1e-8 * data_scale {
            return Err(FitError::SingularJacobian);
        }
    }
    let jtj = jac.transpose() * &jac;
    let mut corr = jtj.clone();
    for i in 0..n_par {
        for j in 0..n_par {
            let d = (jtj[(i, i)] * jtj[(j, j)]).sqrt();
            if !(d > 0.0) {
                return Err(FitError::SingularJacobian);
            }
            corr[(i, j)] /= d;
        }
    }
    let min_corr_eig = corr
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min_corr_eig < 1e-10 {
        return Err(FitError::SingularJacobian);
    }
    let cov_matrix = jtj.try_inverse().ok_or(FitError::SingularJacobian)?;
    if cov_matrix.iter().any(|v| !v.is_finite()) {
        return Err(FitError::SingularJacobian);
    }

    let dof = n.saturating_sub(n_par).max(1) as f64;
    let chi2_reduced = current_cost / dof;
    let chi2_reliable = data.sigma.is_some();
    // With unit weights the absolute residual scale is unknown; estimate it
    // from the fit itself.
    let scale = if chi2_reliable { 1.0 } else { chi2_reduced };
    let covariance: Vec<Vec<f64>> = (0..n_par)
        .map(|i| (0..n_par).map(|j| scale * cov_matrix[(i, j)]).collect())
        .collect();

    Ok(FitResult {
        names: model.param_names(),
        values: params,
        covariance,
        chi2_reduced,
        chi2_reliable,
        converged,
        n_iterations: iterations,
        warnings: Vec::new(),
    })
}
