//! Dipolar fields at the sensor from a polarized spin ensemble.
//!
//! The sensor sits at the origin with the quantization (and sample
//! magnetization) axis along +z. A spin at distance r and polar angle theta
//! contributes c*(3cos^2(theta)-1)/r^3 to the projected field, so the mean
//! field over a sample region V with polarization P and density rho is
//!
//! ```text
//! B_mean = c rho P Int_V (3cos^2(theta)-1)/r^3 dV
//! ```
//!
//! and the field variance replaces the kernel by its square and P by the
//! population factor (1-P^2). Closed forms are provided for the three
//! supported geometries; [`integrate_numeric`] is the independent
//! brute-force route used to validate them.
//!
//! Internally all lengths are nm (the dipolar constant is quoted in G nm^3);
//! public interfaces take micrometers.

use crate::units::um_to_nm;
use std::f64::consts::PI;
use thiserror::Error;

/// Dipolar constant for a free electron spin (G nm^3).
pub const C_DIP_FREE_ELECTRON_G_NM3: f64 = 9.28;
/// Effective dipolar constant for pentacene triplet spins (G nm^3).
pub const C_DIP_PENTACENE_G_NM3: f64 = 8.35;
/// Pentacene spin number density in the doped crystal (nm^-3).
pub const RHO_PENTACENE_PER_NM3: f64 = 1.62e-3;

#[derive(Debug, Error)]
pub enum DipolarError {
    #[error("invalid sample parameter `{name}`: {reason}")]
    InvalidSample { name: &'static str, reason: String },
    #[error("geometry mismatch: operation requires {expected}, sample has {got}")]
    GeometryMismatch {
        expected: &'static str,
        got: &'static str,
    },
    #[error("degenerate standoff: need d > 0, got {standoff_um} um")]
    DegenerateStandoff { standoff_um: f64 },
    #[error("integration tolerance not reached: requested {requested:.2e}, achieved {achieved:.2e}")]
    ToleranceNotReached { requested: f64, achieved: f64 },
    #[error("detection volume search did not converge: {context}")]
    NonConvergent { context: String },
}

/// Sample geometry. The sensor is at the origin; the sample sits above it
/// along +z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    /// Large sample bounded by a sphere of the given radius centered on the
    /// sensor; the sample is the region above the exclusion standoff plane
    /// inside that sphere. In the large-radius regime the mean field becomes
    /// independent of the standoff.
    Sphere { radius_um: f64 },
    /// Infinite sample filling z >= d.
    HalfSpace { standoff_um: f64 },
    /// Finite cylinder of radius r0 and thickness h with its axis through
    /// the sensor, occupying d <= z <= d + h.
    Cylinder {
        radius_um: f64,
        thickness_um: f64,
        standoff_um: f64,
    },
}

impl Geometry {
    fn name(&self) -> &'static str {
        match self {
            Geometry::Sphere { .. } => "sphere",
            Geometry::HalfSpace { .. } => "half-space",
            Geometry::Cylinder { .. } => "cylinder",
        }
    }
}

/// Spin ensemble seen by the sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSpec {
    /// Spin number density (nm^-3).
    pub rho_per_nm3: f64,
    /// Polarization, in [-1, 1].
    pub polarization: f64,
    /// Dipolar constant (G nm^3).
    pub c_dip_g_nm3: f64,
    pub geometry: Geometry,
}

impl SampleSpec {
    pub fn validate(&self) -> Result<(), DipolarError> {
        let bad = |name: &'static str, reason: String| DipolarError::InvalidSample { name, reason };
        if !(self.rho_per_nm3 > 0.0) {
            return Err(bad("rho", format!("must be > 0, got {}", self.rho_per_nm3)));
        }
        if !(self.polarization.abs() <= 1.0) {
            return Err(bad(
                "polarization",
                format!("must be in [-1, 1], got {}", self.polarization),
            ));
        }
        if !(self.c_dip_g_nm3 > 0.0) {
            return Err(bad(
                "c_dip",
                format!("must be > 0, got {}", self.c_dip_g_nm3),
            ));
        }
        let positive = |v: f64, name: &'static str| {
            if v > 0.0 {
                Ok(())
            } else {
                Err(bad(name, format!("must be > 0, got {v}")))
            }
        };
        match self.geometry {
            Geometry::Sphere { radius_um } => positive(radius_um, "radius"),
            Geometry::HalfSpace { standoff_um } => positive(standoff_um, "standoff"),
            Geometry::Cylinder {
                radius_um,
                thickness_um,
                standoff_um,
            } => {
                positive(radius_um, "radius")?;
                positive(thickness_um, "thickness")?;
                positive(standoff_um, "standoff")
            }
        }
    }

    pub fn with_polarization(&self, polarization: f64) -> Self {
        Self {
            polarization,
            ..*self
        }
    }
}

/// Mean and fluctuating field seen by the sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldStatistics {
    pub mean_b_gauss: f64,
    pub var_b_gauss2: f64,
}

impl FieldStatistics {
    pub fn new(mean_b_gauss: f64, var_b_gauss2: f64) -> Result<Self, DipolarError> {
        if var_b_gauss2 < 0.0 {
            return Err(DipolarError::InvalidSample {
                name: "var_b",
                reason: format!("variance must be >= 0, got {var_b_gauss2}"),
            });
        }
        Ok(Self {
            mean_b_gauss,
            var_b_gauss2,
        })
    }

    pub fn delta_b_gauss(&self) -> f64 {
        self.var_b_gauss2.sqrt()
    }
}

/// Mean field of the large (spherically bounded) sample: 4 pi c rho P / 3.
/// Independent of the sensor standoff.
pub fn mean_field_sphere(s: &SampleSpec) -> Result<f64, DipolarError> {
    s.validate()?;
    match s.geometry {
        Geometry::Sphere { .. } => {
            Ok(4.0 * PI * s.c_dip_g_nm3 * s.rho_per_nm3 * s.polarization / 3.0)
        }
        other => Err(DipolarError::GeometryMismatch {
            expected: "sphere",
            got: other.name(),
        }),
    }
}

/// Field variance of the half-space sample: pi c^2 rho (1 - P^2) / (4 d^3),
/// d in nm. The (1 - P^2) population factor is kept exactly.
pub fn fluctuation_halfspace(s: &SampleSpec) -> Result<f64, DipolarError> {
    s.validate()?;
    match s.geometry {
        Geometry::HalfSpace { standoff_um } => {
            if standoff_um <= 0.0 {
                return Err(DipolarError::DegenerateStandoff { standoff_um });
            }
            let d_nm = um_to_nm(standoff_um);
            Ok(PI * s.c_dip_g_nm3.powi(2) * s.rho_per_nm3 * (1.0 - s.polarization.powi(2))
                / (4.0 * d_nm.powi(3)))
        }
        other => Err(DipolarError::GeometryMismatch {
            expected: "half-space",
            got: other.name(),
        }),
    }
}

/// Geometric factor of the on-axis cylinder field:
/// G = (d+h)/sqrt(r0^2+(d+h)^2) - d/sqrt(r0^2+d^2).
/// Dimensionless and scale invariant, so any consistent length unit works.
pub fn cylinder_geometry_factor(standoff: f64, thickness: f64, radius: f64) -> f64 {
    let top = standoff + thickness;
    top / (radius * radius + top * top).sqrt()
        - standoff / (radius * radius + standoff * standoff).sqrt()
}

/// Mean field of the finite cylinder: 2 pi c rho P G(d, h, r0).
///
/// The volume integral of the dipolar kernel over the cylinder evaluates to
/// Int_V (3cos^2(theta)-1)/r^3 dV = 2 pi G, which fixes the prefactor.
pub fn mean_field_cylinder(s: &SampleSpec) -> Result<f64, DipolarError> {
    s.validate()?;
    match s.geometry {
        Geometry::Cylinder {
            radius_um,
            thickness_um,
            standoff_um,
        } => {
            let g = cylinder_geometry_factor(standoff_um, thickness_um, radius_um);
            Ok(2.0 * PI * s.c_dip_g_nm3 * s.rho_per_nm3 * s.polarization * g)
        }
        other => Err(DipolarError::GeometryMismatch {
            expected: "cylinder",
            got: other.name(),
        }),
    }
}

/// Mean field per unit polarization for the sample's geometry (G).
///
/// Sphere and half-space use the large-sample value 4 pi c rho / 3; the
/// cylinder uses its closed form.
pub fn mean_field_unit_polarization(s: &SampleSpec) -> Result<f64, DipolarError> {
    let unit = s.with_polarization(1.0);
    match s.geometry {
        Geometry::Cylinder { .. } => mean_field_cylinder(&unit),
        Geometry::Sphere { .. } | Geometry::HalfSpace { .. } => {
            unit.validate()?;
            Ok(4.0 * PI * unit.c_dip_g_nm3 * unit.rho_per_nm3 / 3.0)
        }
    }
}

/// Which moment of the dipolar field to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegralKind {
    Mean,
    Variance,
}

/// Options for the adaptive radial quadrature.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    /// Requested relative tolerance on the integral.
    pub rel_tol: f64,
    /// Evaluation budget (number of Simpson panels).
    pub max_panels: usize,
    /// Exclusion standoff between the sensor and the nearest sample point
    /// for geometries that otherwise reach the origin (nm).
    pub exclusion_nm: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-3,
            max_panels: 200_000,
            exclusion_nm: 1.0,
        }
    }
}

impl QuadratureOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

/// Numeric integral value with its error bound.
#[derive(Debug, Clone, Copy)]
pub struct IntegralEstimate {
    pub value: f64,
    pub error_bound: f64,
}

/// Angular integral of (3u^2 - 1) over the band [u1, u2], azimuth included.
fn band_mean(u1: f64, u2: f64) -> f64 {
    let f = |u: f64| u * u * u - u;
    2.0 * PI * (f(u2) - f(u1))
}

/// Angular integral of (3u^2 - 1)^2 over the band [u1, u2].
fn band_variance(u1: f64, u2: f64) -> f64 {
    let f = |u: f64| 1.8 * u.powi(5) - 2.0 * u.powi(3) + u;
    2.0 * PI * (f(u2) - f(u1))
}

#[derive(Clone, Copy)]
enum GeometryNm {
    /// z >= z_min inside a sphere of the given radius around the origin.
    TruncatedBall { z_min: f64, radius: f64 },
    HalfSpace { z_min: f64 },
    Cylinder { z_min: f64, z_max: f64, r0: f64 },
}

/// Sample region reduced to a polar band per radial shell. An optional
/// truncation ball on the axis (used by the detection-volume search) adds a
/// further lower bound on u = cos(theta).
#[derive(Clone, Copy)]
struct ShellRegion {
    geometry: GeometryNm,
    ball: Option<(f64, f64)>, // (center z0, radius), both nm
}

impl ShellRegion {
    fn band(&self, rho: f64) -> Option<(f64, f64)> {
        let (mut u_min, u_max) = match self.geometry {
            GeometryNm::TruncatedBall { z_min, radius } => {
                if rho > radius {
                    return None;
                }
                ((z_min / rho).min(1.0), 1.0)
            }
            GeometryNm::HalfSpace { z_min } => {
                if rho < z_min {
                    return None;
                }
                (z_min / rho, 1.0)
            }
            GeometryNm::Cylinder { z_min, z_max, r0 } => {
                let lo_axis = z_min / rho;
                let lo_radial = (1.0 - (r0 / rho).powi(2)).max(0.0).sqrt();
                let hi = (z_max / rho).min(1.0);
                (lo_axis.max(lo_radial), hi)
            }
        };
        if let Some((z0, r)) = self.ball {
            // inside the ball: rho^2 - 2 rho z0 u + z0^2 <= r^2
            u_min = u_min.max((rho * rho + z0 * z0 - r * r) / (2.0 * rho * z0));
        }
        if u_min >= u_max {
            None
        } else {
            Some((u_min, u_max))
        }
    }

    /// Radial extent [rho_lo, rho_hi] (rho_hi may be infinite) and interior
    /// breakpoints where the band expression changes branch.
    fn radial_extent(&self) -> (f64, f64, Vec<f64>) {
        let (lo, hi, mut brk): (f64, f64, Vec<f64>) = match self.geometry {
            GeometryNm::TruncatedBall { z_min, radius } => (z_min, radius, vec![]),
            GeometryNm::HalfSpace { z_min } => (z_min, f64::INFINITY, vec![]),
            GeometryNm::Cylinder { z_min, z_max, r0 } => {
                let hi = (z_max * z_max + r0 * r0).sqrt();
                (z_min, hi, vec![z_max, (z_min * z_min + r0 * r0).sqrt()])
            }
        };
        let (lo, hi) = if let Some((z0, r)) = self.ball {
            brk.push((r * r + z0 * z0).sqrt());
            brk.push((r - z0).abs());
            (lo.max(if r > z0 { 0.0 } else { z0 - r }), hi.min(z0 + r))
        } else {
            (lo, hi)
        };
        brk.retain(|&b| b > lo && b < hi);
        brk.sort_by(|a, b| a.partial_cmp(b).unwrap());
        brk.dedup();
        (lo, hi, brk)
    }
}

fn shell_region(geom: &Geometry, exclusion_nm: f64) -> Result<ShellRegion, DipolarError> {
    let g = match *geom {
        Geometry::Sphere { radius_um } => {
            if exclusion_nm <= 0.0 {
                return Err(DipolarError::InvalidSample {
                    name: "exclusion",
                    reason: format!("sphere integration needs exclusion > 0, got {exclusion_nm}"),
                });
            }
            GeometryNm::TruncatedBall {
                z_min: exclusion_nm,
                radius: um_to_nm(radius_um),
            }
        }
        Geometry::HalfSpace { standoff_um } => GeometryNm::HalfSpace {
            z_min: um_to_nm(standoff_um),
        },
        Geometry::Cylinder {
            radius_um,
            thickness_um,
            standoff_um,
        } => GeometryNm::Cylinder {
            z_min: um_to_nm(standoff_um),
            z_max: um_to_nm(standoff_um + thickness_um),
            r0: um_to_nm(radius_um),
        },
    };
    Ok(ShellRegion {
        geometry: g,
        ball: None,
    })
}

/// Adaptive Simpson quadrature on [a, b] with a Richardson error estimate.
/// Returns (value, error_bound, panels_used).
fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_panels: usize,
) -> (f64, f64, usize) {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, m: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    }
    struct Frame {
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    }
    let m0 = 0.5 * (a + b);
    let mut stack = vec![Frame {
        a,
        b,
        whole: simpson(f, a, m0, b),
        tol: abs_tol,
        depth: 0,
    }];
    let mut total = 0.0;
    let mut err = 0.0;
    let mut panels = 0usize;
    while let Some(fr) = stack.pop() {
        panels += 1;
        let m = 0.5 * (fr.a + fr.b);
        let left = simpson(f, fr.a, 0.5 * (fr.a + m), m);
        let right = simpson(f, m, 0.5 * (m + fr.b), fr.b);
        let delta = left + right - fr.whole;
        if delta.abs() <= 15.0 * fr.tol || fr.depth >= 52 || panels >= max_panels {
            total += left + right + delta / 15.0;
            err += delta.abs() / 15.0;
        } else {
            stack.push(Frame {
                a: fr.a,
                b: m,
                whole: left,
                tol: 0.5 * fr.tol,
                depth: fr.depth + 1,
            });
            stack.push(Frame {
                a: m,
                b: fr.b,
                whole: right,
                tol: 0.5 * fr.tol,
                depth: fr.depth + 1,
            });
        }
    }
    (total, err, panels)
}

/// Integrate the radial profile of the region for the given kernel moment.
/// The physical prefactor (c rho P or c^2 rho (1-P^2)) is not applied here.
fn integrate_region(
    region: &ShellRegion,
    kind: IntegralKind,
    opts: &QuadratureOptions,
) -> Result<IntegralEstimate, DipolarError> {
    let radial = |rho: f64| -> f64 {
        match region.band(rho) {
            None => 0.0,
            Some((u1, u2)) => match kind {
                IntegralKind::Mean => band_mean(u1, u2) / rho,
                IntegralKind::Variance => band_variance(u1, u2) / rho.powi(4),
            },
        }
    };

    let (lo, hi, breakpoints) = region.radial_extent();
    if !(lo < hi) {
        return Ok(IntegralEstimate {
            value: 0.0,
            error_bound: 0.0,
        });
    }

    // Scale for the absolute tolerance: the variance integral is dominated
    // by the first decade above the standoff, the mean by the full solid
    // angle value.
    let scale = match kind {
        IntegralKind::Mean => 4.0 * PI / 3.0,
        IntegralKind::Variance => PI / (4.0 * lo.powi(3)),
    };
    let abs_tol = opts.rel_tol * scale;

    let mut segments: Vec<(f64, f64)> = Vec::new();
    let mut start = lo;
    for b in breakpoints {
        segments.push((start, b));
        start = b;
    }
    if hi.is_finite() {
        segments.push((start, hi));
    }

    let n_seg = segments.len() + usize::from(!hi.is_finite());
    let seg_tol = abs_tol / n_seg.max(1) as f64;
    let mut value = 0.0;
    let mut err = 0.0;
    let mut panels_left = opts.max_panels;
    for (a, b) in segments {
        if b <= a {
            continue;
        }
        let (v, e, used) = adaptive_simpson(&radial, a, b, seg_tol, panels_left);
        value += v;
        err += e;
        panels_left = panels_left.saturating_sub(used);
    }
    if !hi.is_finite() {
        // Map [start, inf) to t in (0, 1] via rho = start / t; the mapped
        // integrand is a smooth polynomial-like profile in t.
        let tail = |t: f64| -> f64 {
            if t <= 0.0 {
                return 0.0;
            }
            let rho = start / t;
            radial(rho) * start / (t * t)
        };
        let (v, e, _) = adaptive_simpson(&tail, 1e-12, 1.0, seg_tol, panels_left);
        value += v;
        err += e;
    }

    // The error bound is conservative (sum of per-panel Richardson terms);
    // compare it against the absolute budget the tolerance implies.
    if err > abs_tol * 10.0 {
        return Err(DipolarError::ToleranceNotReached {
            requested: abs_tol,
            achieved: err,
        });
    }
    Ok(IntegralEstimate {
        value,
        error_bound: err,
    })
}

fn kind_prefactor(s: &SampleSpec, kind: IntegralKind) -> f64 {
    match kind {
        IntegralKind::Mean => s.c_dip_g_nm3 * s.rho_per_nm3 * s.polarization,
        IntegralKind::Variance => {
            s.c_dip_g_nm3.powi(2) * s.rho_per_nm3 * (1.0 - s.polarization.powi(2))
        }
    }
}

/// Brute-force numeric volume integral of the dipolar kernel (mean, in G) or
/// its square (variance, in G^2) over the sample geometry.
///
/// The azimuthal and polar integrals are carried out analytically per radial
/// shell; the radial integral is adaptive and returns an error bound.
pub fn integrate_numeric(
    s: &SampleSpec,
    kind: IntegralKind,
    opts: &QuadratureOptions,
) -> Result<IntegralEstimate, DipolarError> {
    s.validate()?;
    let region = shell_region(&s.geometry, opts.exclusion_nm)?;
    let raw = integrate_region(&region, kind, opts)?;
    let pre = kind_prefactor(s, kind);
    Ok(IntegralEstimate {
        value: pre * raw.value,
        error_bound: pre.abs() * raw.error_bound,
    })
}

/// Default fraction of the total signal defining the detection volume.
pub const DETECTION_FRACTION_DEFAULT: f64 = 0.80;

/// Radius (um) of the sphere, centered on the nearest sample point, within
/// which the sample generates the given fraction of the total signal: the
/// smallest R with |S(R) - S(inf)| <= (1 - fraction) |S(inf)|.
///
/// Defined for the half-space geometry (sensor at standoff d below an
/// infinite sample). Returns r_p for the mean kind, r_f for the variance
/// kind.
pub fn detection_volume(
    s: &SampleSpec,
    kind: IntegralKind,
    fraction: f64,
    opts: &QuadratureOptions,
) -> Result<f64, DipolarError> {
    s.validate()?;
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DipolarError::InvalidSample {
            name: "fraction",
            reason: format!("must be in (0, 1), got {fraction}"),
        });
    }
    let standoff_um = match s.geometry {
        Geometry::HalfSpace { standoff_um } => standoff_um,
        other => {
            return Err(DipolarError::GeometryMismatch {
                expected: "half-space",
                got: other.name(),
            })
        }
    };
    let d = um_to_nm(standoff_um);
    let full = shell_region(&s.geometry, opts.exclusion_nm)?;
    let s_inf = integrate_region(&full, kind, opts)?.value;
    if s_inf == 0.0 || !s_inf.is_finite() {
        return Err(DipolarError::NonConvergent {
            context: format!("total signal is {s_inf}, below numeric noise"),
        });
    }
    // The mean kind carries the polarization sign in its prefactor; the
    // fraction criterion is scale free, so the raw region integral suffices,
    // but a zero prefactor means there is no signal to converge to.
    if kind_prefactor(s, kind) == 0.0 {
        return Err(DipolarError::NonConvergent {
            context: "prefactor is zero (unpolarized mean or fully polarized variance)".into(),
        });
    }
    let target = (1.0 - fraction) * s_inf.abs();

    let truncated = |radius_nm: f64| -> Result<f64, DipolarError> {
        let region = ShellRegion {
            ball: Some((d, radius_nm)),
            ..full
        };
        Ok(integrate_region(&region, kind, opts)?.value)
    };

    // Geometric bracket, then bisection on the first radius satisfying the
    // convergence criterion (the truncated integrals are monotone in R).
    let mut hi = 0.05 * d;
    let mut lo = 0.0;
    let max_radius = 1e7 * d;
    loop {
        let err = (truncated(hi)? - s_inf).abs();
        if err <= target {
            break;
        }
        lo = hi;
        hi *= 1.5;
        if hi > max_radius {
            return Err(DipolarError::NonConvergent {
                context: format!("no radius below {max_radius} nm meets the fraction"),
            });
        }
    }
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if (truncated(mid)? - s_inf).abs() <= target {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo) < 1e-9 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi) / um_to_nm(1.0))
}
