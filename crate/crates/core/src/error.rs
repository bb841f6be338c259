use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config {path}: {field}: {message}")]
    Config {
        path: String,
        field: String,
        message: String,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid FIPS code {0:?}: expected 5 digits")]
    InvalidFips(String),

    #[error("dates for {fips}/{variable} are not increasing at {date}")]
    NonMonotoneDates {
        fips: String,
        variable: String,
        date: String,
    },

    #[error("duplicate record for {fips}/{variable} on {date}")]
    DuplicateDate {
        fips: String,
        variable: String,
        date: String,
    },

    #[error("county {0} has no population; cannot normalize per 100k")]
    MissingPopulation(String),

    #[error("missing series in range for (fips, variable): {0:?}")]
    MissingSeries(Vec<(String, String)>),

    #[error("county {fips} is missing socioeconomic index {index}")]
    MissingSocioIndex { fips: String, index: String },

    #[error("{op}: shape mismatch {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("{op} produced a non-finite value at tape node {node}")]
    NonFinite { op: &'static str, node: usize },

    #[error("{op} produced a non-finite value at tape node {node}, timestamp {timestamp}")]
    NonFiniteStep {
        op: &'static str,
        node: usize,
        timestamp: usize,
    },

    #[error("loss must be a scalar tensor, got shape {0:?}")]
    NotScalar(Vec<usize>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing artifact {0}; run the producing stage first")]
    MissingArtifact(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }
}
