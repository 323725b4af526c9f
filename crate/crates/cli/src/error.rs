use std::fmt;
use std::process::ExitCode;

use cpib_core::data::DataError;
use cpib_core::model::ModelError;
use cpib_core::ood::OodError;
use cpib_core::train::TrainError;

/// Stable error codes; each maps to a fixed exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Code {
    Data,
    Config,
    Checkpoint,
    Train,
    Eval,
    Io,
    Lock,
    Plot,
}

impl Code {
    pub fn as_str(self) -> &'static str {
        match self {
            Code::Data => "E_DATA",
            Code::Config => "E_CONFIG",
            Code::Checkpoint => "E_CHECKPOINT",
            Code::Train => "E_TRAIN",
            Code::Eval => "E_EVAL",
            Code::Io => "E_IO",
            Code::Lock => "E_LOCK",
            Code::Plot => "E_PLOT",
        }
    }

    pub fn exit_status(self) -> u8 {
        match self {
            Code::Data => 2,
            Code::Config => 3,
            Code::Checkpoint => 4,
            Code::Train => 5,
            Code::Eval => 6,
            Code::Io => 7,
            Code::Lock => 8,
            Code::Plot => 9,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub code: Code,
    pub message: String,
}

impl CliError {
    pub fn new(code: Code, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        Self::new(Code::Io, format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code.exit_status())
    }
}

/// One line: `error[CODE]: message`.
impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = self.message.replace(['\n', '\r'], " ");
        write!(f, "error[{}]: {}", self.code.as_str(), msg)
    }
}

impl std::error::Error for CliError {}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        Self::new(Code::Data, e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        let code = match e {
            ModelError::Checkpoint(_) | ModelError::CheckpointVersion { .. } | ModelError::Io(_) => Code::Checkpoint,
            ModelError::InvalidSpec(_) => Code::Config,
            _ => Code::Eval,
        };
        Self::new(code, e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Data(d) => d.into(),
            TrainError::InvalidConfig(_) => Self::new(Code::Config, e.to_string()),
            other => Self::new(Code::Train, other.to_string()),
        }
    }
}

impl From<OodError> for CliError {
    fn from(e: OodError) -> Self {
        match e {
            OodError::Csv { .. } | OodError::MissingColumn(_) => Self::new(Code::Plot, e.to_string()),
            other => Self::new(Code::Eval, other.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_line_rendering() {
        let e = CliError::new(Code::Data, "missing\nfile");
        assert_eq!(e.to_string(), "error[E_DATA]: missing file");
        assert_eq!(Code::Data.exit_status(), 2);
    }
}
