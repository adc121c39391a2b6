//! Failure categories and their exit codes.
//!
//! Every failure leaves the process through one [`CliError`], printed as a
//! single `error[category]: message` line on stderr, so scripts can match
//! on the category without parsing prose.

use somnoscore::dataset::DatasetError;
use somnoscore::edf::EdfError;
use somnoscore::eval::EvalError;
use somnoscore::model::ModelError;
use somnoscore::nn::NnError;
use somnoscore::stats::StatsError;
use somnoscore::training::TrainError;
use std::fmt;

/// What went wrong, and therefore which exit code to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    /// Bad flags, config keys, or values: exit 1.
    Usage,
    /// Unreadable or inconsistent input data: exit 2.
    Data,
    /// The training loop itself failed: exit 3.
    Train,
}

impl Category {
    fn tag(self) -> &'static str {
        match self {
            Category::Usage => "usage",
            Category::Data => "data",
            Category::Train => "train",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub category: Category,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> CliError {
        CliError { category: Category::Usage, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> CliError {
        CliError { category: Category::Data, message: message.into() }
    }

    pub fn exit_code(&self) -> u8 {
        match self.category {
            Category::Usage => 1,
            Category::Data => 2,
            Category::Train => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.category.tag(), self.message)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<EdfError> for CliError {
    fn from(e: EdfError) -> CliError {
        CliError::data(e.to_string())
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> CliError {
        CliError::data(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> CliError {
        CliError::data(e.to_string())
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> CliError {
        CliError::data(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> CliError {
        CliError::data(e.to_string())
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> CliError {
        // A metric name comes from a flag, so getting it wrong is usage.
        let category = match e {
            StatsError::UnknownMetric(_) => Category::Usage,
            _ => Category::Data,
        };
        CliError { category, message: e.to_string() }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> CliError {
        let category = match e {
            TrainError::InvalidConfig(_) => Category::Usage,
            _ => Category::Train,
        };
        CliError { category, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::data(e.to_string())
    }
}
