//! Error type shared by every module of the crate.

use thiserror::Error;

use crate::data_model::Quarter;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A CSV or JSON row could not be turned into a valid record.
    #[error("line {line}: field `{field}`: {message}")]
    Parse {
        line: u64,
        field: String,
        message: String,
    },

    #[error("duplicate deal ({asset_id}, {trade_date}) at line {line}")]
    DuplicateDeal {
        asset_id: String,
        trade_date: String,
        line: u64,
    },

    #[error("revenue series for `{asset_id}` is missing quarter {missing}")]
    RevenueGap { asset_id: String, missing: Quarter },

    #[error("revenue series for `{asset_id}` lists quarter {quarter} twice")]
    DuplicateQuarter { asset_id: String, quarter: Quarter },

    #[error("insufficient history for `{asset_id}`: need {needed} quarters ending {as_of}, have {available}")]
    InsufficientHistory {
        asset_id: String,
        as_of: Quarter,
        needed: usize,
        available: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("perpetuity diverges at discount rate {rate}")]
    DivergentPerpetuity { rate: f64 },

    #[error("infeasible calibration bounds: {0}")]
    InfeasibleBounds(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("no asset is eligible for the {entry_year} cohort ({skipped} skipped)")]
    EmptyCohort { entry_year: i32, skipped: usize },

    #[error("benchmark grid is missing cells: {}", .missing.join(", "))]
    GridMismatch { missing: Vec<String> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: u64, field: &str, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// True for errors raised because a model cannot price the given inputs.
    pub fn is_pricing_infeasible(&self) -> bool {
        matches!(
            self,
            Error::DivergentPerpetuity { .. } | Error::InvalidParameters(_)
        )
    }
}
