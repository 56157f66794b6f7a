use std::fmt;
use std::process::ExitCode;

use racecrt::evaluation::EvalError;
use racecrt::inference::InferenceError;
use racecrt::preprocess::PreprocessError;
use racecrt::regression::RegressionError;
use racecrt::store::StoreError;
use racecrt::DomainError;

/// Failure of a subcommand, carrying its exit code class.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration (exit 1).
    Usage(String),
    /// Unreadable or invalid input files (exit 2).
    Input(String),
    /// The pipeline could not complete on valid inputs (exit 3).
    Pipeline(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Pipeline(_) => 3,
        })
    }

    /// Prefixes the message, keeping the class.
    pub fn context(self, what: impl fmt::Display) -> Self {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{what}: {m}")),
            CliError::Input(m) => CliError::Input(format!("{what}: {m}")),
            CliError::Pipeline(m) => CliError::Pipeline(format!("{what}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Input(m) | CliError::Pipeline(m) => f.write_str(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<DomainError> for CliError {
    fn from(e: DomainError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<PreprocessError> for CliError {
    fn from(e: PreprocessError) -> Self {
        match e {
            PreprocessError::InsufficientTrackedFrames { .. } | PreprocessError::FootageTooShort { .. } => {
                CliError::Pipeline(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<InferenceError> for CliError {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::Preprocess(p) => p.into(),
            InferenceError::Io(_)
            | InferenceError::Container(_)
            | InferenceError::ModelLoad(_)
            | InferenceError::DigestMismatch { .. }
            | InferenceError::UnknownInstance(_)
            | InferenceError::InvalidSpec(_)
            | InferenceError::TooFewInstances(_)
            | InferenceError::DuplicateInstance(_)
            | InferenceError::SingleNeedsOneBackend(_) => CliError::Input(e.to_string()),
            _ => CliError::Pipeline(e.to_string()),
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Io(_) | StoreError::Container(_) | StoreError::Format(_) | StoreError::Truncated { .. } => {
                CliError::Input(e.to_string())
            }
            StoreError::NotSingle(_) | StoreError::Empty => CliError::Input(e.to_string()),
            StoreError::Inference(i) => i.into(),
            _ => CliError::Pipeline(e.to_string()),
        }
    }
}

impl From<RegressionError> for CliError {
    fn from(e: RegressionError) -> Self {
        match e {
            RegressionError::Io(_) | RegressionError::Container(_) => CliError::Input(e.to_string()),
            RegressionError::InvalidGrid(_) => CliError::Usage(e.to_string()),
            _ => CliError::Pipeline(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Domain(d) => d.into(),
            EvalError::Store(s) => s.into(),
            EvalError::Regression(r) => r.into(),
            EvalError::Preprocess(p) => p.into(),
            EvalError::Io(io) => io.into(),
            EvalError::InvalidSpec(m) => CliError::Usage(m),
            _ => CliError::Pipeline(e.to_string()),
        }
    }
}
