use apnea_core::dataset::DatasetError;
use apnea_core::metrics::MetricsError;
use apnea_core::nn::NnError;
use apnea_core::wfdb::WfdbError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    /// One entry per record that could not be read, with the reason.
    #[error("{}", ingest_message(.0))]
    Ingest(Vec<IngestFailure>),
    #[error("{0}")]
    Data(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestFailure {
    pub record: String,
    pub reason: String,
}

fn ingest_message(failures: &[IngestFailure]) -> String {
    let list: Vec<String> = failures.iter().map(|f| format!("{}: {}", f.record, f.reason)).collect();
    format!("cannot ingest {} record(s): {}", failures.len(), list.join("; "))
}

impl CliError {
    /// 0 success, 2 configuration, 3 data or parse, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 4,
            CliError::Ingest(_) | CliError::Data(_) | CliError::EmptyInput(_) | CliError::Io { .. } => 3,
        }
    }

    pub fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<WfdbError> for CliError {
    fn from(e: WfdbError) -> Self {
        match e {
            WfdbError::Io { ref record, ref file, .. } => CliError::Ingest(vec![IngestFailure {
                record: record.clone(),
                reason: format!("{file} is missing or unreadable"),
            }]),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Config(m) => CliError::Config(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::Config(m) | NnError::Shape(m) => CliError::Config(m),
            NnError::Numerical { .. } => CliError::Numerical(e.to_string()),
            NnError::Format(_) | NnError::Io(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Shape(..) => CliError::Config(e.to_string()),
            MetricsError::EmptyInput => CliError::EmptyInput(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}
