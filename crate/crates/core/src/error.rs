use thiserror::Error;

use crate::hurstscale::ScalingError;
use crate::ingest::IngestError;
use crate::io::FormatError;
use crate::mfdfa::MfdfaError;
use crate::rolling::RollingError;
use crate::spectrum::SpectrumError;
use crate::synth::SynthError;
use crate::transform::TransformError;

/// Any failure, tagged with the module it came from.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("ingest: {0}")]
    Ingest(#[from] IngestError),
    #[error("transform: {0}")]
    Transform(#[from] TransformError),
    #[error("mfdfa: {0}")]
    Mfdfa(#[from] MfdfaError),
    #[error("spectrum: {0}")]
    Spectrum(#[from] SpectrumError),
    #[error("rolling: {0}")]
    Rolling(#[from] RollingError),
    #[error("synth: {0}")]
    Synth(#[from] SynthError),
    #[error("hurstscale: {0}")]
    Scaling(#[from] ScalingError),
    #[error("format: {0}")]
    Format(#[from] FormatError),
    #[error("io: {context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse failure class, mapped to process exit codes by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Usage => 1,
            ErrorClass::Data => 2,
            ErrorClass::Numerical => 3,
        }
    }
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Usage,
            Error::Ingest(_) | Error::Transform(_) | Error::Format(_) | Error::Io { .. } => {
                ErrorClass::Data
            }
            Error::Synth(_) => ErrorClass::Usage,
            Error::Rolling(RollingError::PeriodOutsideData(_)) => ErrorClass::Data,
            Error::Mfdfa(_) | Error::Spectrum(_) | Error::Rolling(_) | Error::Scaling(_) => {
                ErrorClass::Numerical
            }
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
