//! Structured CLI errors: every failure names its kind, the module it came
//! from, and the operation that raised it, and maps to a distinct exit code.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    Config,
    NumericalPrecondition,
    ToleranceFailure,
}

impl ErrorKind {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorKind::ToleranceFailure => 1,
            // 2 is clap's usage-error convention
            ErrorKind::Config => 3,
            ErrorKind::NumericalPrecondition => 4,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub module: &'static str,
    pub operation: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(
        kind: ErrorKind,
        module: &'static str,
        operation: &'static str,
        message: String,
    ) -> Self {
        CliError { kind, module, operation, message }
    }

    pub fn from_lib(e: longvol::Error, module: &'static str, operation: &'static str) -> Self {
        let kind = match &e {
            longvol::Error::InvalidConfig(_) | longvol::Error::Unbalanced { .. } => {
                ErrorKind::Config
            }
            _ => ErrorKind::NumericalPrecondition,
        };
        CliError { kind, module, operation, message: e.to_string() }
    }

    pub fn render(&self) -> String {
        #[derive(Serialize)]
        struct Wrapper<'a> {
            error: &'a CliError,
        }
        serde_json::to_string(&Wrapper { error: self }).expect("error serialization")
    }
}
