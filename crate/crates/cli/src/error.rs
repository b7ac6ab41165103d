//! Exit-status classification: 1 validation, 2 numerical, 3 I/O.

use oipd_core::dipolar::DipolarError;
use oipd_core::fitting::FitError;
use oipd_core::kinetics::KineticsError;
use oipd_core::signal::SignalError;
use oipd_core::spinham::SpinHamError;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) | CliError::Io(m) => m,
        }
    }
}

impl From<SpinHamError> for CliError {
    fn from(e: SpinHamError) -> Self {
        match e {
            SpinHamError::InvalidParams { .. } => CliError::Validation(e.to_string()),
            SpinHamError::NonHermitianInput { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<DipolarError> for CliError {
    fn from(e: DipolarError) -> Self {
        match e {
            DipolarError::InvalidSample { .. }
            | DipolarError::GeometryMismatch { .. }
            | DipolarError::DegenerateStandoff { .. } => CliError::Validation(e.to_string()),
            DipolarError::ToleranceNotReached { .. } | DipolarError::NonConvergent { .. } => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}

impl From<SignalError> for CliError {
    fn from(e: SignalError) -> Self {
        match e {
            SignalError::InvalidModel { .. } | SignalError::NegativeVariance { .. } => {
                CliError::Validation(e.to_string())
            }
            SignalError::NoCrossover { .. } => CliError::Numerical(e.to_string()),
            SignalError::Dipolar(inner) => inner.into(),
        }
    }
}

impl From<KineticsError> for CliError {
    fn from(e: KineticsError) -> Self {
        match e {
            KineticsError::InvalidParams { .. } => CliError::Validation(e.to_string()),
            KineticsError::Dipolar(inner) => inner.into(),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::InvalidData { .. } => CliError::Validation(e.to_string()),
            FitError::SingularJacobian => CliError::Numerical(e.to_string()),
            FitError::SpinHam(inner) => inner.into(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
