use thiserror::Error;

/// Error type shared by every module in the crate.
///
/// The variants map onto the CLI's exit-code categories: `Config` exits
/// with 2, `Schema`/`Data` with 3, `Numeric` with 4, everything else with 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("schema: {0}")]
    Schema(String),

    #[error("data: {0}")]
    Data(String),

    #[error("shape: {0}")]
    Shape(String),

    #[error("contract: {0}")]
    Contract(String),

    #[error("numeric failure in {stage}: {detail}")]
    Numeric { stage: String, detail: String },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Single-word category used in machine-parseable CLI error lines.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Schema(_) => "schema",
            Error::Data(_) => "data",
            Error::Shape(_) => "shape",
            Error::Contract(_) => "contract",
            Error::Numeric { .. } => "numeric",
            Error::UndefinedMetric(_) => "metric",
            Error::Io(_) => "io",
        }
    }

    /// Process exit status for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Schema(_) | Error::Data(_) | Error::Io(_) => 3,
            Error::Numeric { .. } => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
