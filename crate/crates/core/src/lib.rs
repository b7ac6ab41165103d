//! Core physics and analysis for long-range NV detection of optically
//! polarized triplet spins.
//!
//! The crate is organized around five subsystems:
//!
//! - [`spinham`]: the pentacene triplet spin Hamiltonian, its eigensystem,
//!   field-dependent transition frequencies and local slopes.
//! - [`dipolar`]: mean and fluctuating dipolar fields at the sensor from a
//!   polarized spin ensemble, in closed form and by adaptive numerical
//!   integration, plus detection-volume radii.
//! - [`signal`]: conversion of field statistics into interferometric signal
//!   contrast and the polarization/fluctuation crossover versus depth.
//! - [`kinetics`]: triplet photophysics and the optically-induced-polarization
//!   detection (OIPD) pulse sequence, including synthetic spectra and
//!   relaxation curves.
//! - [`fitting`]: a damped Gauss-Newton least-squares engine with the four
//!   analysis models (Lorentzian, exponential, depth profile, field
//!   dependence) and Monte Carlo nuisance propagation.
//!
//! All quantities carry explicit units in field and function names:
//! frequencies in MHz, fields in Gauss, lengths in micrometers at public
//! interfaces (nanometers internally), times in microseconds unless a name
//! says otherwise.

pub mod dipolar;
pub mod fitting;
pub mod kinetics;
pub mod signal;
pub mod spinham;
pub mod units;





pub use spinham::{EigenSolution, TripletParams};
