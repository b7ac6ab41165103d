//! Monte Carlo propagation of geometry and timing uncertainties into the
//! fitted polarization.

use super::models::{fit_depth_profile, DepthProfileModel};
use super::{Dataset, FitError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Gaussian 1-sigma widths of the nuisance parameters.
#[derive(Debug, Clone, Copy)]
pub struct NuisanceWidths {
    pub t_eff_us: f64,
    pub radius_um: f64,
    pub thickness_um: f64,
}

#[derive(Debug, Clone)]
pub struct UncertaintyReport {
    /// Statistical and nuisance contributions in quadrature.
    pub sigma_p_total: f64,
    /// The base fit's own 1-sigma uncertainty.
    pub sigma_statistical: f64,
    /// Spread of the refitted polarization over nuisance draws.
    pub sigma_nuisance: f64,
    pub mean_p: f64,
    pub n_samples: usize,
    /// Draws rejected (unphysical parameters) or failed to fit.
    pub n_failed: usize,
}

/// Refit the polarization for Gaussian draws of (T_eff, r0, h) and combine
/// the spread with the base fit's statistical uncertainty in quadrature.
/// Deterministic for a given seed; failed draws are counted, not fatal.
pub fn propagate_uncertainty(
    data: &Dataset,
    model: &DepthProfileModel,
    widths: &NuisanceWidths,
    n_samples: usize,
    seed: u64,
) -> Result<UncertaintyReport, FitError> {
    if n_samples < 100 {
        return Err(FitError::InvalidData {
            reason: format!("nuisance Monte Carlo needs >= 100 samples, got {n_samples}"),
        });
    }
    let base = fit_depth_profile(data, model)?;
    let sigma_statistical = base.uncertainty(0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut fitted = Vec::with_capacity(n_samples);
    let mut n_failed = 0usize;
    for _ in 0..n_samples {
        let t = model.t_eff_us + widths.t_eff_us * unit.sample(&mut rng);
        let r0 = model.radius_um + widths.radius_um * unit.sample(&mut rng);
        let h = model.thickness_um + widths.thickness_um * unit.sample(&mut rng);
        if t <= 0.0 || r0 <= 0.0 || h <= 0.0 {
            n_failed += 1;
            continue;
        }
        let drawn = DepthProfileModel {
            t_eff_us: t,
            radius_um: r0,
            thickness_um: h,
            ..*model
        };
        match fit_depth_profile(data, &drawn) {
            Ok(fit) => fitted.push(fit.values[0]),
            Err(_) => n_failed += 1,
        }
    }
    if fitted.len() < 2 {
        return Err(FitError::InvalidData {
            reason: format!("all {n_samples} nuisance draws failed"),
        });
    }
    let m = fitted.len() as f64;
    let mean_p = fitted.iter().sum::<f64>() / m;
    let var = fitted.iter().map(|p| (p - mean_p).powi(2)).sum::<f64>() / (m - 1.0);
    let sigma_nuisance = var.sqrt();

    Ok(UncertaintyReport {
        sigma_p_total: (sigma_statistical.powi(2) + sigma_nuisance.powi(2)).sqrt(),
        sigma_statistical,
        sigma_nuisance,
        mean_p,
        n_samples,
        n_failed,
    })
}
