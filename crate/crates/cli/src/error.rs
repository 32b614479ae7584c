use serde_json::json;
use windcond::ErrorKind;

#[derive(Debug)]
pub enum CliError {
    Lib(windcond::Error),
    Config(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            CliError::Lib(e) => e.kind(),
            CliError::Config(_) => ErrorKind::Config,
            CliError::Data(_) => ErrorKind::Data,
            CliError::Numerical(_) => ErrorKind::Numerical,
        }
    }

    pub fn exit_code(&self) -> i32 {
        exit_code(self.kind())
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "error": {
                "kind": kind_name(self.kind()),
                "code": self.exit_code(),
                "message": self.to_string(),
            }
        })
    }
}

pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numerical => 4,
    }
}

pub fn kind_name(kind: ErrorKind) -> &'static str {
    match kind {
        ErrorKind::Config => "config",
        ErrorKind::Data => "data",
        ErrorKind::Numerical => "numerical",
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Config(m) | CliError::Data(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

macro_rules! from_lib {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Lib(e.into())
            }
        }
    )*};
}

from_lib!(
    windcond::Error,
    windcond::circular::CircularError,
    windcond::vonmises::VonMisesError,
    windcond::weibull::WeibullError,
    windcond::quantreg::QuantRegError,
    windcond::bootstrap::BootstrapError,
    windcond::ivstats::IvError,
    windcond::ingest::IngestError
);
