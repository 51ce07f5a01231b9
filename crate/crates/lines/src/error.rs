//! Tool-level error classification mapped onto process exit codes:
//! 0 success, 1 usage, 2 input/data, 3 internal invariant violation.

use std::fmt;
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, bad config keys, malformed argument values.
    Usage(String),
    /// Unreadable, malformed, or semantically invalid input data.
    Data(String),
    /// A broken internal invariant; never expected on valid builds.
    Internal(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(1),
            CliError::Data(_) => ExitCode::from(2),
            CliError::Internal(_) => ExitCode::from(3),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Data(msg) => write!(f, "data error: {msg}"),
            CliError::Internal(msg) => write!(f, "internal error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<nastaliq_core::raster::RasterError> for CliError {
    fn from(e: nastaliq_core::raster::RasterError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<nastaliq_core::preprocess::PreprocessError> for CliError {
    fn from(e: nastaliq_core::preprocess::PreprocessError) -> Self {
        use nastaliq_core::preprocess::PreprocessError::*;
        match e {
            BlankImage => CliError::Data(e.to_string()),
            InvalidConfig(_) => CliError::Usage(e.to_string()),
        }
    }
}

impl From<nastaliq_core::segment::SegmentError> for CliError {
    fn from(e: nastaliq_core::segment::SegmentError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<nastaliq_core::corpus::CorpusError> for CliError {
    fn from(e: nastaliq_core::corpus::CorpusError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<nastaliq_core::net::NetError> for CliError {
    fn from(e: nastaliq_core::net::NetError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<nastaliq_core::synth::SynthError> for CliError {
    fn from(e: nastaliq_core::synth::SynthError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<nastaliq_core::train::TrainError> for CliError {
    fn from(e: nastaliq_core::train::TrainError) -> Self {
        use nastaliq_core::train::TrainError::*;
        match &e {
            InvalidConfig(_) | BadSweepSizes => CliError::Usage(e.to_string()),
            EmptySplit(_) | MixedFrameWidths { .. } | Net(_) | Ctc(_) => {
                CliError::Data(e.to_string())
            }
        }
    }
}
