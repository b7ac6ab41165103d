//! Weighted nonlinear least squares with the four analysis models.
//!
//! The engine is a damped Gauss-Newton iteration (Levenberg-style adaptive
//! damping) on weighted residuals. Weights are inverse variance when the
//! dataset carries per-point standard deviations, unit otherwise (in which
//! case the reduced chi-square is flagged unreliable and the covariance is
//! rescaled by it). Identical inputs produce bit-identical results.

mod engine;
mod models;
mod montecarlo;

pub use engine::{fit_least_squares, FitModel, FitOptions};
pub use models::{
    fit_depth_profile, fit_exponential, fit_field_dependence, fit_lorentzian, DepthProfileModel,
    ExponentialModel, FieldPoint, LorentzianModel,
};
pub use montecarlo::{propagate_uncertainty, NuisanceWidths, UncertaintyReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("invalid dataset: {reason}")]
    InvalidData { reason: String },
    #[error("singular Jacobian: the model parameters are not identifiable from this data")]
    SingularJacobian,
    #[error(transparent)]
    SpinHam(#[from] crate::spinham::SpinHamError),
}

/// Observations to fit: abscissae, ordinates and optional standard
/// deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(x: Vec<f64>, y: Vec<f64>, sigma: Option<Vec<f64>>) -> Result<Self, FitError> {
        let ds = Self { x, y, sigma };
        ds.check_shape()?;
        Ok(ds)
    }

    fn check_shape(&self) -> Result<(), FitError> {
        if self.x.len() != self.y.len() {
            return Err(FitError::InvalidData {
                reason: format!("x has {} points, y has {}", self.x.len(), self.y.len()),
            });
        }
        if let Some(s) = &self.sigma {
            if s.len() != self.x.len() {
                return Err(FitError::InvalidData {
                    reason: format!("sigma has {} points, x has {}", s.len(), self.x.len()),
                });
            }
            if s.iter().any(|&v| !(v > 0.0)) {
                return Err(FitError::InvalidData {
                    reason: "sigma entries must be > 0".into(),
                });
            }
        }
        if self.x.iter().chain(self.y.iter()).any(|v| !v.is_finite()) {
            return Err(FitError::InvalidData {
                reason: "non-finite values in x or y".into(),
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Require enough points for a model with `n_params` free parameters.
    pub fn require_points(&self, n_params: usize) -> Result<(), FitError> {
        if self.len() < n_params + 1 {
            return Err(FitError::InvalidData {
                reason: format!(
                    "need at least {} points for {} parameters, got {}",
                    n_params + 1,
                    n_params,
                    self.len()
                ),
            });
        }
        Ok(())
    }

    /// Parse CSV text with a one-line header and 2 or 3 numeric columns
    /// (x, y[, sigma]).
    pub fn from_csv_str(text: &str) -> Result<Self, FitError> {
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut sigma = Vec::new();
        let mut has_sigma = None;
        for (lineno, line) in text.lines().enumerate() {
            if lineno == 0 || line.trim().is_empty() {
                continue; // header
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 2 && fields.len() != 3 {
                return Err(FitError::InvalidData {
                    reason: format!("line {}: expected 2 or 3 columns, got {}", lineno + 1, fields.len()),
                });
            }
            let with_sigma = fields.len() == 3;
            match has_sigma {
                None => has_sigma = Some(with_sigma),
                Some(prev) if prev != with_sigma => {
                    return Err(FitError::InvalidData {
                        reason: format!("line {}: inconsistent column count", lineno + 1),
                    })
                }
                _ => {}
            }
            let parse = |s: &str| -> Result<f64, FitError> {
                s.parse().map_err(|_| FitError::InvalidData {
                    reason: format!("line {}: `{s}` is not a number", lineno + 1),
                })
            };
            x.push(parse(fields[0])?);
            y.push(parse(fields[1])?);
            if with_sigma {
                sigma.push(parse(fields[2])?);
            }
        }
        if x.is_empty() {
            return Err(FitError::InvalidData {
                reason: "no data rows".into(),
            });
        }
        Self::new(x, y, if has_sigma == Some(true) { Some(sigma) } else { None })
    }
}

/// Converged (or best-effort) parameter estimates with uncertainties.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    /// Parameter covariance; symmetric positive semidefinite.
    pub covariance: Vec<Vec<f64>>,
    pub chi2_reduced: f64,
    /// False when unit weights were used (no sigmas supplied).
    pub chi2_reliable: bool,
    pub converged: bool,
    pub n_iterations: usize,
    pub warnings: Vec<String>,
}

impl FitResult {
    /// 1-sigma uncertainty of parameter i (sqrt of the covariance diagonal).
    pub fn uncertainty(&self, i: usize) -> f64 {
        self.covariance[i][i].max(0.0).sqrt()
    }

    pub fn value_of(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }

    pub fn uncertainty_of(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.uncertainty(i))
    }

    /// key=value report, one line per item.
    pub fn report(&self) -> String {
        let mut out = String::new();
        for (i, name) in self.names.iter().enumerate() {
            out.push_str(&format!("{name} = {:.10e}\n", self.values[i]));
            out.push_str(&format!("{name}_sigma = {:.10e}\n", self.uncertainty(i)));
        }
        out.push_str(&format!("chi2_reduced = {:.10e}\n", self.chi2_reduced));
        out.push_str(&format!("chi2_reliable = {}\n", self.chi2_reliable));
        out.push_str(&format!("converged = {}\n", self.converged));
        out.push_str(&format!("n_iterations = {}\n", self.n_iterations));
        for w in &self.warnings {
            out.push_str(&format!("warning = {w}\n"));
        }
        out
    }
}
