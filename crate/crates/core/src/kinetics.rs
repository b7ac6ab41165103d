//! Triplet photophysics and the optically-induced-polarization-detection
//! (OIPD) pulse sequence.
//!
//! The triplet manifold is treated as a rate system: a 520-nm laser pulse
//! pumps population through fast intersystem crossing into the sublevels
//! (the 14.4 ns transfer is two decades faster than every sequence time and
//! is treated as instantaneous), sublevels decay exponentially into the
//! singlet ground sink, and an inhomogeneous microwave drive (MW1)
//! incoherently saturates the 0 <-> +1 population difference. The sensor
//! echo accumulates phase from the sample mean field with a sign toggle at
//! the refocusing pulse; all segments are exponentials, so the simulator
//! integrates them piecewise analytically.

use crate::dipolar::{mean_field_unit_polarization, DipolarError, SampleSpec};
use crate::signal::{beyond_small_signal, ContrastModel};
use crate::units::phase_rad;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

/// MW1 duration at which the on-resonance population difference is halved (ns).
pub const MW1_HALF_SATURATION_NS: f64 = 80.0;

#[derive(Debug, Error)]
pub enum KineticsError {
    #[error("invalid kinetics parameter `{name}`: {reason}")]
    InvalidParams { name: &'static str, reason: String },
    #[error(transparent)]
    Dipolar(#[from] DipolarError),
}

/// Rate parameters of the triplet manifold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticsParams {
    /// Intersystem-crossing time (ns); documentation only, the transfer is
    /// instantaneous on sequence timescales.
    pub t_isc_ns: f64,
    /// ms = +1 decay time (us).
    pub t_plus_us: f64,
    /// ms = 0 decay time (us).
    pub t_zero_us: f64,
    /// Polarization buildup time under 520-nm illumination (us).
    pub t_buildup_us: f64,
    /// Saturated polarization reached by long laser pulses.
    pub p_sat: f64,
}

impl Default for KineticsParams {
    fn default() -> Self {
        Self {
            t_isc_ns: 14.4,
            t_plus_us: 7.0,
            t_zero_us: 23.0,
            t_buildup_us: 1.5,
            p_sat: 0.19,
        }
    }
}

impl KineticsParams {
    pub fn validate(&self) -> Result<(), KineticsError> {
        let positive = |v: f64, name: &'static str| {
            if v > 0.0 {
                Ok(())
            } else {
                Err(KineticsError::InvalidParams {
                    name,
                    reason: format!("must be > 0, got {v}"),
                })
            }
        };
        positive(self.t_isc_ns, "t_isc")?;
        positive(self.t_plus_us, "t_plus")?;
        positive(self.t_zero_us, "t_zero")?;
        positive(self.t_buildup_us, "t_l")?;
        if !(self.p_sat > 0.0 && self.p_sat <= 1.0) {
            return Err(KineticsError::InvalidParams {
                name: "p_sat",
                reason: format!("must be in (0, 1], got {}", self.p_sat),
            });
        }
        Ok(())
    }
}

/// Occupations of the triplet sublevels and the singlet ground sink.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SublevelPopulations {
    pub p_zero: f64,
    pub p_plus: f64,
    pub p_minus: f64,
    pub p_ground: f64,
}

impl SublevelPopulations {
    /// Everything in the ground sink.
    pub fn ground() -> Self {
        Self {
            p_zero: 0.0,
            p_plus: 0.0,
            p_minus: 0.0,
            p_ground: 1.0,
        }
    }

    /// Minimal triplet occupancy consistent with a polarization P: only the
    /// ms = 0 sublevel is filled. Absolute populations are not observable in
    /// this signal model, only the difference p_zero - p_plus.
    pub fn from_polarization(p: f64) -> Self {
        Self {
            p_zero: p,
            p_plus: 0.0,
            p_minus: 0.0,
            p_ground: 1.0 - p,
        }
    }

    /// Polarization P = p_zero - p_plus.
    pub fn polarization(&self) -> f64 {
        self.p_zero - self.p_plus
    }

    pub fn total(&self) -> f64 {
        self.p_zero + self.p_plus + self.p_minus + self.p_ground
    }
}

/// Polarization after a 520-nm pulse of length tau_p:
/// P = P_sat (1 - exp(-tau_p / t_l)). Saturates above ~4 us.
pub fn polarization_buildup(tau_p_us: f64, k: &KineticsParams) -> f64 {
    k.p_sat * (1.0 - (-tau_p_us / k.t_buildup_us).exp())
}

/// Free decay for dt: sublevels empty into the ground sink, ms = +1 and
/// ms = -1 sharing the same decay time.
pub fn relax(pop: &SublevelPopulations, dt_us: f64, k: &KineticsParams) -> SublevelPopulations {
    let fz = (-dt_us / k.t_zero_us).exp();
    let fp = (-dt_us / k.t_plus_us).exp();
    let p_zero = pop.p_zero * fz;
    let p_plus = pop.p_plus * fp;
    let p_minus = pop.p_minus * fp;
    let decayed = (pop.p_zero - p_zero) + (pop.p_plus - p_plus) + (pop.p_minus - p_minus);
    SublevelPopulations {
        p_zero,
        p_plus,
        p_minus,
        p_ground: pop.p_ground + decayed,
    }
}

/// Unit-height Lorentzian response of the inhomogeneous drive.
pub fn lorentzian_response(detuning_mhz: f64, fwhm_mhz: f64) -> f64 {
    let hw = 0.5 * fwhm_mhz;
    hw * hw / (detuning_mhz * detuning_mhz + hw * hw)
}

/// Saturation level after driving for `duration_ns`: rises from 0 towards 1
/// (full equalization), passing 1/2 at 80 ns.
pub fn saturation_level(duration_ns: f64) -> f64 {
    1.0 - (-duration_ns * std::f64::consts::LN_2 / MW1_HALF_SATURATION_NS).exp()
}

/// Incoherent saturation of the 0 <-> +1 population difference by MW1.
///
/// No Rabi oscillation: the drive is inhomogeneous, so the difference is
/// damped by the factor (1 - L(detuning) s(duration)) while the pair sum is
/// conserved. On resonance the difference is exactly halved at 80 ns and
/// vanishes for long pulses. ms = -1 is not addressed.
pub fn apply_mw1(
    pop: &SublevelPopulations,
    duration_ns: f64,
    detuning_mhz: f64,
    linewidth_mhz: f64,
) -> SublevelPopulations {
    let transfer = lorentzian_response(detuning_mhz, linewidth_mhz) * saturation_level(duration_ns);
    let sum = pop.p_zero + pop.p_plus;
    let diff = (pop.p_zero - pop.p_plus) * (1.0 - transfer);
    SublevelPopulations {
        p_zero: 0.5 * (sum + diff),
        p_plus: 0.5 * (sum - diff),
        ..*pop
    }
}

/// Where the pentacene laser and MW1 act relative to the sensor echo.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mw1Placement {
    /// Synchronous with the refocusing pulse at the echo midpoint.
    #[default]
    Midpoint,
    /// Before the first pi/2 pulse, exploiting the fast ms = +1 decay.
    PreSequence,
}

/// Readout phase of the final pi/2 pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReadoutPhase {
    X,
    #[default]
    Y,
}

/// Timing of one OIPD run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceSpec {
    /// 520-nm laser pulse length (us).
    pub tau_p_us: f64,
    /// Spin-echo time (us), pi pulse at the midpoint.
    pub tau_us: f64,
    /// MW1 drive duration (ns).
    pub mw1_duration_ns: f64,
    /// MW1 drive frequency (MHz).
    pub mw1_frequency_mhz: f64,
    pub readout_phase: ReadoutPhase,
    pub placement: Mw1Placement,
    /// Relaxation interval between MW1 and readout (us).
    pub tau_rel_plus_us: Option<f64>,
    /// Relaxation interval between laser and MW1 (us).
    pub tau_rel_zero_us: Option<f64>,
    /// Averaging repetitions; bookkeeping only, the model is deterministic.
    pub repetitions: u64,
}

impl SequenceSpec {
    /// Plain OIPD run: spectrum-style echo with MW1 at the midpoint.
    pub fn oipd(tau_us: f64, mw1_frequency_mhz: f64) -> Self {
        Self {
            tau_p_us: 1.5,
            tau_us,
            mw1_duration_ns: MW1_HALF_SATURATION_NS,
            mw1_frequency_mhz,
            readout_phase: ReadoutPhase::Y,
            placement: Mw1Placement::Midpoint,
            tau_rel_plus_us: None,
            tau_rel_zero_us: None,
            repetitions: 1,
        }
    }

    /// OIPD with a relaxation interval between MW1 and readout.
    pub fn oipd_relax_plus(tau_us: f64, mw1_frequency_mhz: f64, tau_rel_us: f64) -> Self {
        Self {
            tau_rel_plus_us: Some(tau_rel_us),
            ..Self::oipd(tau_us, mw1_frequency_mhz)
        }
    }

    /// OIPD with a relaxation interval between the laser pulse and MW1.
    pub fn oipd_relax_zero(tau_us: f64, mw1_frequency_mhz: f64, tau_rel_us: f64) -> Self {
        Self {
            tau_rel_zero_us: Some(tau_rel_us),
            ..Self::oipd(tau_us, mw1_frequency_mhz)
        }
    }

    pub fn validate(&self) -> Result<(), KineticsError> {
        let non_negative = |v: f64, name: &'static str| {
            if v >= 0.0 {
                Ok(())
            } else {
                Err(KineticsError::InvalidParams {
                    name,
                    reason: format!("must be >= 0, got {v}"),
                })
            }
        };
        non_negative(self.tau_p_us, "tau_p")?;
        non_negative(self.mw1_duration_ns, "mw1_duration")?;
        non_negative(self.mw1_frequency_mhz, "mw1_frequency")?;
        if !(self.tau_us > 0.0) {
            return Err(KineticsError::InvalidParams {
                name: "tau",
                reason: format!("echo time must be > 0, got {}", self.tau_us),
            });
        }
        if let Some(t) = self.tau_rel_plus_us {
            non_negative(t, "tau_rel_plus")?;
        }
        if let Some(t) = self.tau_rel_zero_us {
            non_negative(t, "tau_rel_zero")?;
        }
        Ok(())
    }
}

/// The 0 <-> +1 resonance line MW1 addresses: center from the spin
/// Hamiltonian, width from the inhomogeneous drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mw1Line {
    pub center_mhz: f64,
    pub fwhm_mhz: f64,
}

/// One sample of the mean-field trace seen by the sensor.
#[derive(Debug, Clone, Copy)]
pub struct PhaseSample {
    pub t_us: f64,
    pub mean_b_gauss: f64,
    /// Echo sign: +1 before the refocusing pulse, -1 after.
    pub echo_sign: f64,
}

/// Result of one OIPD run.
#[derive(Debug, Clone)]
pub struct OipdOutcome {
    /// Signal contrast relative to the no-sample reference.
    pub sc: f64,
    /// Accumulated echo phase (rad).
    pub phase_rad: f64,
    pub trace: Vec<PhaseSample>,
    /// Phase magnitude exceeds the linear-readout regime.
    pub beyond_linear: bool,
}

/// Exponential segment integral: Int_0^dt exp(-t/t_decay) dt.
/// exp_m1 keeps slow decays (dt << t_decay) accurate; an infinite decay
/// time degenerates to dt.
fn exp_integral(dt_us: f64, t_decay_us: f64) -> f64 {
    let x = dt_us / t_decay_us;
    if x == 0.0 {
        return dt_us;
    }
    -t_decay_us * (-x).exp_m1()
}

/// Phase contribution of populations decaying freely for dt (us), per unit
/// field-per-polarization: Int P(t) dt with P(t) = p0 e^{-t/Tz} - p+ e^{-t/T+}.
fn polarization_integral(pop: &SublevelPopulations, dt_us: f64, k: &KineticsParams) -> f64 {
    pop.p_zero * exp_integral(dt_us, k.t_zero_us) - pop.p_plus * exp_integral(dt_us, k.t_plus_us)
}

fn sc_from_phase(phi: f64, phase: ReadoutPhase) -> f64 {
    match phase {
        ReadoutPhase::Y => phi.sin(),
        ReadoutPhase::X => 1.0 - phi.cos(),
    }
}

/// Simulate one OIPD run.
///
/// The mean field is the geometry's field per unit polarization times the
/// instantaneous polarization; the echo phase is
/// phi = 2 pi gamma Int sgn(t) B(t) dt with the sign toggling at the pi
/// pulse. Readout y gives SC = sin(phi), readout x gives 1 - cos(phi), both
/// relative to the no-sample reference.
pub fn simulate_oipd(
    seq: &SequenceSpec,
    s: &SampleSpec,
    k: &KineticsParams,
    m: &ContrastModel,
    line: &Mw1Line,
) -> Result<OipdOutcome, KineticsError> {
    seq.validate()?;
    k.validate()?;
    let b_unit = mean_field_unit_polarization(s)?;
    let detuning = seq.mw1_frequency_mhz - line.center_mhz;
    let half = 0.5 * seq.tau_us;

    let mut trace = Vec::new();
    let mut record = |t_us: f64, pop: &SublevelPopulations, sign: f64| {
        trace.push(PhaseSample {
            t_us,
            mean_b_gauss: b_unit * pop.polarization(),
            echo_sign: sign,
        });
    };

    // Signed integral of P(t) over the echo, piecewise analytic. Weights are
    // +1 in [0, tau/2), -1 in (tau/2, tau].
    let mut signed_p_integral = 0.0;
    match seq.placement {
        Mw1Placement::Midpoint => {
            // First half: no triplets yet. At the midpoint the laser pumps
            // (instantaneous ISC transfer), an optional interval lets the
            // fresh ms=0 population relax, then MW1 acts, then an optional
            // interval lets the mixed state relax before the second half.
            let mut pop = SublevelPopulations::from_polarization(polarization_buildup(
                seq.tau_p_us,
                k,
            ));
            record(0.0, &SublevelPopulations::ground(), 1.0);
            record(half, &pop, -1.0);
            if let Some(wait) = seq.tau_rel_zero_us {
                pop = relax(&pop, wait, k);
            }
            pop = apply_mw1(&pop, seq.mw1_duration_ns, detuning, line.fwhm_mhz);
            if let Some(wait) = seq.tau_rel_plus_us {
                pop = relax(&pop, wait, k);
            }
            record(half, &pop, -1.0);
            signed_p_integral -= polarization_integral(&pop, half, k);
            let pop_end = relax(&pop, half, k);
            record(seq.tau_us, &pop_end, -1.0);
        }
        Mw1Placement::PreSequence => {
            // Laser, waits and MW1 all before the first pi/2; the field then
            // decays freely across both echo halves.
            let mut pop = SublevelPopulations::from_polarization(polarization_buildup(
                seq.tau_p_us,
                k,
            ));
            if let Some(wait) = seq.tau_rel_zero_us {
                pop = relax(&pop, wait, k);
            }
            pop = apply_mw1(&pop, seq.mw1_duration_ns, detuning, line.fwhm_mhz);
            if let Some(wait) = seq.tau_rel_plus_us {
                pop = relax(&pop, wait, k);
            }
            record(0.0, &pop, 1.0);
            signed_p_integral += polarization_integral(&pop, half, k);
            let pop_mid = relax(&pop, half, k);
            record(half, &pop_mid, -1.0);
            signed_p_integral -= polarization_integral(&pop_mid, half, k);
            let pop_end = relax(&pop_mid, half, k);
            record(seq.tau_us, &pop_end, -1.0);
        }
    }

    let phi = phase_rad(m.gamma_e_nv_mhz_per_g, b_unit * signed_p_integral, 1.0);
    Ok(OipdOutcome {
        sc: sc_from_phase(phi, seq.readout_phase),
        phase_rad: phi,
        beyond_linear: beyond_small_signal(phi),
        trace,
    })
}

/// One spectrum point.
#[derive(Debug, Clone, Copy)]
pub struct SpectrumPoint {
    pub frequency_mhz: f64,
    pub sc: f64,
}

/// OIPD signal versus MW1 frequency, with optional additive Gaussian noise.
/// Two runs with the same seed are identical; the noiseless curve underneath
/// does not depend on the seed.
pub fn spectrum(
    seq: &SequenceSpec,
    s: &SampleSpec,
    k: &KineticsParams,
    m: &ContrastModel,
    line: &Mw1Line,
    sweep_mhz: &[f64],
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<SpectrumPoint>, KineticsError> {
    if sweep_mhz.is_empty() {
        return Err(KineticsError::InvalidParams {
            name: "sweep",
            reason: "frequency sweep must be non-empty".into(),
        });
    }
    let clean: Vec<SpectrumPoint> = sweep_mhz
        .par_iter()
        .map(|&f| {
            let run = simulate_oipd(
                &SequenceSpec {
                    mw1_frequency_mhz: f,
                    ..*seq
                },
                s,
                k,
                m,
                line,
            )?;
            Ok(SpectrumPoint {
                frequency_mhz: f,
                sc: run.sc,
            })
        })
        .collect::<Result<_, KineticsError>>()?;
    Ok(add_noise(clean, noise_sigma, seed))
}

fn add_noise(mut points: Vec<SpectrumPoint>, noise_sigma: f64, seed: u64) -> Vec<SpectrumPoint> {
    if noise_sigma > 0.0 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_sigma).expect("sigma > 0");
        for p in points.iter_mut() {
            p.sc += normal.sample(&mut rng);
        }
    }
    points
}

/// Which sublevel's decay an inserted relaxation interval probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelaxChannel {
    Plus,
    Zero,
}

/// One relaxation-curve point: resonance peak amplitude after the interval.
#[derive(Debug, Clone, Copy)]
pub struct RelaxationPoint {
    pub tau_rel_us: f64,
    pub amplitude: f64,
}

/// Resonance peak amplitude (on-resonance minus far-detuned signal) versus
/// relaxation interval.
///
/// Zero channel: the interval sits between the laser pulse and MW1, where
/// only ms = 0 is populated, so the amplitude decays with T_zero. Plus
/// channel: the interval sits between MW1 and readout; the amplitude tracks
/// the surviving MW1-transferred ms = +1 excess and decays with T_plus.
#[allow(clippy::too_many_arguments)]
pub fn relaxation_experiment(
    channel: RelaxChannel,
    tau_rel_us: &[f64],
    seq: &SequenceSpec,
    s: &SampleSpec,
    k: &KineticsParams,
    m: &ContrastModel,
    line: &Mw1Line,
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<RelaxationPoint>, KineticsError> {
    let base = peak_amplitude(seq, s, k, m, line)?;
    let clean: Vec<RelaxationPoint> = tau_rel_us
        .iter()
        .map(|&t| {
            let decay = match channel {
                RelaxChannel::Plus => (-t / k.t_plus_us).exp(),
                RelaxChannel::Zero => (-t / k.t_zero_us).exp(),
            };
            RelaxationPoint {
                tau_rel_us: t,
                amplitude: base * decay,
            }
        })
        .collect();
    if noise_sigma <= 0.0 {
        return Ok(clean);
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise_sigma).expect("sigma > 0");
    Ok(clean
        .into_iter()
        .map(|p| RelaxationPoint {
            amplitude: p.amplitude + normal.sample(&mut rng),
            ..p
        })
        .collect())
}

/// ESR peak amplitude of one OIPD configuration: on-resonance signal minus
/// the far-detuned baseline.
pub fn peak_amplitude(
    seq: &SequenceSpec,
    s: &SampleSpec,
    k: &KineticsParams,
    m: &ContrastModel,
    line: &Mw1Line,
) -> Result<f64, KineticsError> {
    let on = simulate_oipd(
        &SequenceSpec {
            mw1_frequency_mhz: line.center_mhz,
            ..*seq
        },
        s,
        k,
        m,
        line,
    )?;
    let off = simulate_oipd(
        &SequenceSpec {
            mw1_frequency_mhz: line.center_mhz + 1e6 * line.fwhm_mhz,
            ..*seq
        },
        s,
        k,
        m,
        line,
    )?;
    Ok(on.sc - off.sc)
}

/// Buildup-curve point: peak amplitude versus laser pulse length.
#[derive(Debug, Clone, Copy)]
pub struct BuildupPoint {
    pub tau_p_us: f64,
    pub amplitude: f64,
}

/// Resonance peak amplitude versus 520-nm pulse duration. In the linear
/// regime the amplitude is proportional to the optically induced
/// polarization P(tau_p).
#[allow(clippy::too_many_arguments)]
pub fn buildup_curve(
    tau_p_us: &[f64],
    seq: &SequenceSpec,
    s: &SampleSpec,
    k: &KineticsParams,
    m: &ContrastModel,
    line: &Mw1Line,
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<BuildupPoint>, KineticsError> {
    let clean: Vec<BuildupPoint> = tau_p_us
        .par_iter()
        .map(|&tp| {
            let amplitude = peak_amplitude(
                &SequenceSpec {
                    tau_p_us: tp,
                    ..*seq
                },
                s,
                k,
                m,
                line,
            )?;
            Ok(BuildupPoint {
                tau_p_us: tp,
                amplitude,
            })
        })
        .collect::<Result<_, KineticsError>>()?;
    if noise_sigma <= 0.0 {
        return Ok(clean);
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise_sigma).expect("sigma > 0");
    Ok(clean
        .into_iter()
        .map(|p| BuildupPoint {
            amplitude: p.amplitude + normal.sample(&mut rng),
            ..p
        })
        .collect())
}
