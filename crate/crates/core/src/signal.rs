//! Interferometric signal contrast from dipolar field statistics.
//!
//! In the small-signal limit the polarization signal (PS) and fluctuation
//! signal (FS) contrasts are
//!
//! ```text
//! SC_pola = 2 pi gamma B_mean T / 2
//! SC_fluc = (2 pi gamma dB T / 2)^2
//! ```
//!
//! with gamma the sensor gyromagnetic ratio and T the interference time.
//! The PS is linear in the mean field (1/r^3 per spin, geometry limited);
//! the FS follows the field variance (1/r^6 per spin) and decays cubically
//! with sensor depth. Beyond contrast ~0.2 the linearization loses validity
//! and the full sine/cosine readout of the kinetics simulator is
//! authoritative; operations here only warn.

use crate::dipolar::{
    self, fluctuation_halfspace, mean_field_sphere, DipolarError, Geometry, SampleSpec,
};
use crate::units::phase_rad;
use rayon::prelude::*;
use std::f64::consts::PI;
use thiserror::Error;

/// Sensor gyromagnetic ratio (MHz/G).
pub const GAMMA_NV_MHZ_PER_G: f64 = 2.80;
/// Contrast magnitude beyond which the small-signal linearization is dubious.
pub const SMALL_SIGNAL_LIMIT: f64 = 0.2;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("negative variance: {var_b_gauss2}")]
    NegativeVariance { var_b_gauss2: f64 },
    #[error("invalid contrast model parameter `{name}`: {reason}")]
    InvalidModel { name: &'static str, reason: String },
    #[error("no crossover: polarization signal dominates everywhere in [{lo_um}, {hi_um}] um")]
    NoCrossover { lo_um: f64, hi_um: f64 },
    #[error(transparent)]
    Dipolar(#[from] DipolarError),
}

/// Sensor-side timing of the interference measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastModel {
    /// Sensor gyromagnetic ratio (MHz/G).
    pub gamma_e_nv_mhz_per_g: f64,
    /// Total interference time T (us).
    pub t_total_us: f64,
    /// Effective accumulation time for depth-profile style estimates (us).
    pub accumulation_us: f64,
}

impl Default for ContrastModel {
    fn default() -> Self {
        Self {
            gamma_e_nv_mhz_per_g: GAMMA_NV_MHZ_PER_G,
            t_total_us: 7.0,
            accumulation_us: 7.0,
        }
    }
}

impl ContrastModel {
    pub fn validate(&self) -> Result<(), SignalError> {
        if !(self.gamma_e_nv_mhz_per_g > 0.0) {
            return Err(SignalError::InvalidModel {
                name: "gamma_e_nv",
                reason: format!("must be > 0, got {}", self.gamma_e_nv_mhz_per_g),
            });
        }
        if !(self.t_total_us > 0.0) {
            return Err(SignalError::InvalidModel {
                name: "t_total",
                reason: format!("must be > 0, got {}", self.t_total_us),
            });
        }
        if !(self.accumulation_us > 0.0) {
            return Err(SignalError::InvalidModel {
                name: "accumulation",
                reason: format!("must be > 0, got {}", self.accumulation_us),
            });
        }
        Ok(())
    }
}

/// True when a contrast magnitude is outside the linearized regime.
pub fn beyond_small_signal(sc: f64) -> bool {
    sc.abs() > SMALL_SIGNAL_LIMIT
}

/// Polarization signal contrast: 2 pi gamma B T / 2, i.e. the accumulated
/// phase in the linear regime.
pub fn sc_polarization(mean_b_gauss: f64, m: &ContrastModel) -> f64 {
    phase_rad(m.gamma_e_nv_mhz_per_g, mean_b_gauss, m.t_total_us) / 2.0
}

/// Fluctuation signal contrast: (2 pi gamma dB T / 2)^2.
pub fn sc_fluctuation(var_b_gauss2: f64, m: &ContrastModel) -> Result<f64, SignalError> {
    if var_b_gauss2 < 0.0 {
        return Err(SignalError::NegativeVariance { var_b_gauss2 });
    }
    let phase = phase_rad(m.gamma_e_nv_mhz_per_g, var_b_gauss2.sqrt(), m.t_total_us) / 2.0;
    Ok(phase * phase)
}

/// Depth-profile contrast of the polarized cylinder:
/// SC = 2 pi gamma T_eff * pi c rho P G(d, h, r0).
///
/// This is the closed form behind the depth-profile fit; it equals
/// [`sc_polarization`] composed with the cylinder mean field.
#[allow(clippy::too_many_arguments)]
pub fn sc_polarized_cylinder(
    depth_um: f64,
    radius_um: f64,
    thickness_um: f64,
    polarization: f64,
    t_eff_us: f64,
    c_dip_g_nm3: f64,
    rho_per_nm3: f64,
    gamma_mhz_per_g: f64,
) -> f64 {
    let g = dipolar::cylinder_geometry_factor(depth_um, thickness_um, radius_um);
    phase_rad(gamma_mhz_per_g, 1.0, t_eff_us) * PI * c_dip_g_nm3 * rho_per_nm3 * polarization * g
}

/// One row of the contrast-versus-depth table.
#[derive(Debug, Clone)]
pub struct DepthPoint {
    pub depth_um: f64,
    /// SC_pola per requested polarization, in input order.
    pub sc_pola: Vec<f64>,
    pub sc_fluc: f64,
    /// Any contrast in this row exceeds the small-signal limit.
    pub beyond_linear: bool,
}

/// Default polarizations for the contrast table: optically induced and
/// thermal at ~500 G.
pub const P_LIST_DEFAULT: [f64; 2] = [0.1, 1.0e-4];

/// PS and FS contrasts versus sensor depth.
///
/// The polarization signal uses the large-sample (spherically bounded) mean
/// field and is depth independent; the fluctuation signal uses the
/// half-space variance and falls off cubically.
pub fn contrast_vs_depth(
    s: &SampleSpec,
    m: &ContrastModel,
    depths_um: &[f64],
    p_list: &[f64],
) -> Result<Vec<DepthPoint>, SignalError> {
    m.validate()?;
    if depths_um.is_empty() {
        return Err(SignalError::InvalidModel {
            name: "depths",
            reason: "need at least one depth".into(),
        });
    }
    if depths_um.windows(2).any(|w| w[0] >= w[1]) || depths_um[0] <= 0.0 {
        return Err(SignalError::InvalidModel {
            name: "depths",
            reason: "depths must be positive and ascending".into(),
        });
    }
    depths_um
        .par_iter()
        .map(|&depth_um| {
            let sc_pola: Vec<f64> = p_list
                .iter()
                .map(|&p| {
                    let sphere = SampleSpec {
                        polarization: p,
                        geometry: Geometry::Sphere { radius_um: 1.0 },
                        ..*s
                    };
                    Ok(sc_polarization(mean_field_sphere(&sphere)?, m))
                })
                .collect::<Result<_, SignalError>>()?;
            let half = SampleSpec {
                geometry: Geometry::HalfSpace {
                    standoff_um: depth_um,
                },
                ..*s
            };
            let sc_fluc = sc_fluctuation(fluctuation_halfspace(&half)?, m)?;
            let beyond_linear =
                beyond_small_signal(sc_fluc) || sc_pola.iter().any(|&v| beyond_small_signal(v));
            Ok(DepthPoint {
                depth_um,
                sc_pola,
                sc_fluc,
                beyond_linear,
            })
        })
        .collect()
}

/// Depth at which the polarization and fluctuation contrasts are equal, by
/// bisection on the (monotone) difference. Searches [1e-4, 1e4] um.
pub fn crossover_depth(
    s: &SampleSpec,
    m: &ContrastModel,
    polarization: f64,
) -> Result<f64, SignalError> {
    m.validate()?;
    if !(polarization > 0.0) {
        return Err(SignalError::InvalidModel {
            name: "polarization",
            reason: format!("crossover needs P > 0, got {polarization}"),
        });
    }
    let sphere = SampleSpec {
        polarization,
        geometry: Geometry::Sphere { radius_um: 1.0 },
        ..*s
    };
    let ps = sc_polarization(mean_field_sphere(&sphere)?, m);
    let fs_minus_ps = |depth_um: f64| -> Result<f64, SignalError> {
        let half = SampleSpec {
            polarization,
            geometry: Geometry::HalfSpace {
                standoff_um: depth_um,
            },
            ..*s
        };
        Ok(sc_fluctuation(fluctuation_halfspace(&half)?, m)? - ps)
    };
    let (mut lo, mut hi) = (1e-4, 1e4);
    if fs_minus_ps(lo)? <= 0.0 || fs_minus_ps(hi)? > 0.0 {
        return Err(SignalError::NoCrossover {
            lo_um: lo,
            hi_um: hi,
        });
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt(); // geometric bisection over 8 decades
        if fs_minus_ps(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) < 1e-12 * hi {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}
