//! Run configuration: TOML file with paper-default values, every field
//! overridable. Unknown keys are rejected so typos fail loudly.

use crate::error::CliError;
use oipd_core::dipolar::{Geometry, SampleSpec};
use oipd_core::kinetics::{KineticsParams, Mw1Placement, ReadoutPhase, SequenceSpec};
use oipd_core::signal::ContrastModel;
use oipd_core::spinham::TripletParams;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub triplet: TripletSection,
    pub sample: SampleSection,
    pub kinetics: KineticsSection,
    pub sequence: SequenceSection,
    pub contrast: ContrastSection,
    pub io: IoSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TripletSection {
    pub d_mhz: f64,
    pub e_mhz: f64,
    pub gamma_e_mhz_per_g: f64,
    pub b0_gauss: f64,
    pub theta_deg: f64,
    pub phi_deg: f64,
}

impl Default for TripletSection {
    fn default() -> Self {
        let p = TripletParams::default();
        Self {
            d_mhz: p.d_mhz,
            e_mhz: p.e_mhz,
            gamma_e_mhz_per_g: p.gamma_e_mhz_per_g,
            b0_gauss: p.b0_gauss,
            theta_deg: p.theta_deg,
            phi_deg: p.phi_deg,
        }
    }
}

impl TripletSection {
    pub fn to_params(&self) -> TripletParams {
        TripletParams {
            d_mhz: self.d_mhz,
            e_mhz: self.e_mhz,
            gamma_e_mhz_per_g: self.gamma_e_mhz_per_g,
            b0_gauss: self.b0_gauss,
            theta_deg: self.theta_deg,
            phi_deg: self.phi_deg,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleSection {
    pub rho_per_nm3: f64,
    pub polarization: f64,
    pub c_dip_g_nm3: f64,
    /// One of: sphere, half-space, cylinder.
    pub geometry: String,
    pub radius_um: f64,
    pub thickness_um: f64,
    pub standoff_um: f64,
}

impl Default for SampleSection {
    fn default() -> Self {
        Self {
            rho_per_nm3: oipd_core::dipolar::RHO_PENTACENE_PER_NM3,
            polarization: 0.1,
            c_dip_g_nm3: oipd_core::dipolar::C_DIP_PENTACENE_G_NM3,
            geometry: "cylinder".into(),
            radius_um: 35.0,
            thickness_um: 15.0,
            standoff_um: 12.0,
        }
    }
}

impl SampleSection {
    pub fn to_spec(&self) -> Result<SampleSpec, CliError> {
        let geometry = match self.geometry.as_str() {
            "sphere" => Geometry::Sphere {
                radius_um: self.radius_um,
            },
            "half-space" | "halfspace" => Geometry::HalfSpace {
                standoff_um: self.standoff_um,
            },
            "cylinder" => Geometry::Cylinder {
                radius_um: self.radius_um,
                thickness_um: self.thickness_um,
                standoff_um: self.standoff_um,
            },
            other => {
                return Err(CliError::Validation(format!(
                    "`geometry`: unknown value `{other}` (expected sphere, half-space or cylinder)"
                )))
            }
        };
        let spec = SampleSpec {
            rho_per_nm3: self.rho_per_nm3,
            polarization: self.polarization,
            c_dip_g_nm3: self.c_dip_g_nm3,
            geometry,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KineticsSection {
    pub t_isc_ns: f64,
    pub t_plus_us: f64,
    pub t_zero_us: f64,
    pub t_buildup_us: f64,
    pub p_sat: f64,
}

impl Default for KineticsSection {
    fn default() -> Self {
        let k = KineticsParams::default();
        Self {
            t_isc_ns: k.t_isc_ns,
            t_plus_us: k.t_plus_us,
            t_zero_us: k.t_zero_us,
            t_buildup_us: k.t_buildup_us,
            p_sat: k.p_sat,
        }
    }
}

impl KineticsSection {
    pub fn to_params(&self) -> Result<KineticsParams, CliError> {
        let k = KineticsParams {
            t_isc_ns: self.t_isc_ns,
            t_plus_us: self.t_plus_us,
            t_zero_us: self.t_zero_us,
            t_buildup_us: self.t_buildup_us,
            p_sat: self.p_sat,
        };
        k.validate()?;
        Ok(k)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SequenceSection {
    /// One of: oipd, oipd-relax-plus, oipd-relax-zero.
    pub preset: String,
    pub tau_p_us: f64,
    pub tau_us: f64,
    pub mw1_duration_ns: f64,
    /// Defaults to the computed 0 <-> +1 transition frequency when zero.
    pub mw1_frequency_mhz: f64,
    pub mw1_fwhm_mhz: f64,
    /// x or y.
    pub readout_phase: String,
    /// midpoint or pre-sequence.
    pub placement: String,
    pub tau_rel_plus_us: Option<f64>,
    pub tau_rel_zero_us: Option<f64>,
    pub repetitions: u64,
}

impl Default for SequenceSection {
    fn default() -> Self {
        Self {
            preset: "oipd".into(),
            tau_p_us: 1.5,
            tau_us: 21.6,
            mw1_duration_ns: 80.0,
            mw1_frequency_mhz: 0.0,
            mw1_fwhm_mhz: 25.0,
            readout_phase: "y".into(),
            placement: "midpoint".into(),
            tau_rel_plus_us: None,
            tau_rel_zero_us: None,
            repetitions: 1,
        }
    }
}

impl SequenceSection {
    pub fn to_spec(&self, resonance_mhz: f64) -> Result<SequenceSpec, CliError> {
        let readout_phase = match self.readout_phase.as_str() {
            "x" => ReadoutPhase::X,
            "y" => ReadoutPhase::Y,
            other => {
                return Err(CliError::Validation(format!(
                    "`readout_phase`: unknown value `{other}` (expected x or y)"
                )))
            }
        };
        let placement = match self.placement.as_str() {
            "midpoint" => Mw1Placement::Midpoint,
            "pre-sequence" | "presequence" => Mw1Placement::PreSequence,
            other => {
                return Err(CliError::Validation(format!(
                    "`placement`: unknown value `{other}` (expected midpoint or pre-sequence)"
                )))
            }
        };
        let frequency = if self.mw1_frequency_mhz > 0.0 {
            self.mw1_frequency_mhz
        } else {
            resonance_mhz
        };
        let mut spec = match self.preset.as_str() {
            "oipd" => SequenceSpec::oipd(self.tau_us, frequency),
            "oipd-relax-plus" => SequenceSpec::oipd_relax_plus(
                self.tau_us,
                frequency,
                self.tau_rel_plus_us.unwrap_or(0.0),
            ),
            "oipd-relax-zero" => SequenceSpec::oipd_relax_zero(
                self.tau_us,
                frequency,
                self.tau_rel_zero_us.unwrap_or(0.0),
            ),
            other => {
                return Err(CliError::Validation(format!(
                    "`preset`: unknown value `{other}` (expected oipd, oipd-relax-plus or oipd-relax-zero)"
                )))
            }
        };
        spec.tau_p_us = self.tau_p_us;
        spec.mw1_duration_ns = self.mw1_duration_ns;
        spec.readout_phase = readout_phase;
        spec.placement = placement;
        spec.repetitions = self.repetitions;
        if let Some(t) = self.tau_rel_plus_us {
            spec.tau_rel_plus_us = Some(t);
        }
        if let Some(t) = self.tau_rel_zero_us {
            spec.tau_rel_zero_us = Some(t);
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContrastSection {
    pub gamma_e_nv_mhz_per_g: f64,
    pub t_total_us: f64,
    pub accumulation_us: f64,
}

impl Default for ContrastSection {
    fn default() -> Self {
        let m = ContrastModel::default();
        Self {
            gamma_e_nv_mhz_per_g: m.gamma_e_nv_mhz_per_g,
            t_total_us: m.t_total_us,
            accumulation_us: m.accumulation_us,
        }
    }
}

impl ContrastSection {
    pub fn to_model(&self) -> Result<ContrastModel, CliError> {
        let m = ContrastModel {
            gamma_e_nv_mhz_per_g: self.gamma_e_nv_mhz_per_g,
            t_total_us: self.t_total_us,
            accumulation_us: self.accumulation_us,
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoSection {
    pub seed: u64,
    /// Relative tolerance for numeric integration.
    pub rel_tol: f64,
    /// Exclusion standoff for oracle integrals (nm).
    pub exclusion_nm: f64,
}

impl Default for IoSection {
    fn default() -> Self {
        Self {
            seed: 0,
            rel_tol: 1e-6,
            exclusion_nm: 1.0,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", p.display())))?;
                toml::from_str(&text)
                    .map_err(|e| CliError::Validation(format!("config {}: {e}", p.display())))
            }
        }
    }

    /// TOML echo of the fully resolved configuration.
    pub fn echo(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("# config serialization failed: {e}"))
    }
}
