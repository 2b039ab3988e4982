//! Batch ETL: extract movements, opening balances and exchange rates, clean
//! them, compute sparse daily balances, densify them over every account and
//! day, convert to EUR and upsert the resulting facts.

mod balances;
mod clean;
mod convert;
mod pipeline;
mod upsert;

use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kv::KvError;
use crate::money::{CurrencyCode, MoneyMinor, Rate};
use crate::star_schema::{AccountId, StarError, ValidationReport};
use crate::store::StoreError;
use crate::time_dimension::TimeError;

pub use balances::{compute_daily_balances, densify_balances};
pub use clean::{clean_movements, read_movement_rows, CleanOptions, RawMovementRow, MOVEMENTS_HEADER};
pub use convert::{convert_to_eur, read_exchange_rates, read_opening_balances, RateBook};
pub use pipeline::{run_etl, run_pipeline, EtlConfig, EtlInputs, EtlOptions, EtlOutcome, RunMode};
pub use upsert::{upsert_facts, UpsertStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MovementKind {
    Actual,
    Forecast,
}

impl MovementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MovementKind::Actual => "ACTUAL",
            MovementKind::Forecast => "FORECAST",
        }
    }
}

impl fmt::Display for MovementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

/// A cleaned treasury movement.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Movement {
    pub account_id: AccountId,
    pub value_date: NaiveDate,
    pub amount: MoneyMinor,
    pub kind: MovementKind,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpeningBalance {
    pub account_id: AccountId,
    pub as_of_date: NaiveDate,
    pub amount: MoneyMinor,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExchangeRate {
    pub currency_code: CurrencyCode,
    pub rate_date: NaiveDate,
    pub rate_to_eur: Rate,
}

/// Real and working balance of an account at the end of a day, in the
/// account's currency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DailyBalance {
    pub account_id: AccountId,
    pub date: NaiveDate,
    pub real: MoneyMinor,
    pub working: MoneyMinor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RejectReason {
    Duplicate,
    MalformedRow,
    MissingField,
    BadAmount,
    BadDate,
    UnknownAccount,
    CurrencyMismatch,
    DateOutOfRange,
    BadKind,
    ZeroAmount,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Duplicate => "DUPLICATE",
            RejectReason::MalformedRow => "MALFORMED_ROW",
            RejectReason::MissingField => "MISSING_FIELD",
            RejectReason::BadAmount => "BAD_AMOUNT",
            RejectReason::BadDate => "BAD_DATE",
            RejectReason::UnknownAccount => "UNKNOWN_ACCOUNT",
            RejectReason::CurrencyMismatch => "CURRENCY_MISMATCH",
            RejectReason::DateOutOfRange => "DATE_OUT_OF_RANGE",
            RejectReason::BadKind => "BAD_KIND",
            RejectReason::ZeroAmount => "ZERO_AMOUNT",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RejectedRow {
    /// 1-based line in the movements file (header is line 1).
    pub line: usize,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EtlReport {
    pub rows_read: usize,
    pub rows_rejected: Vec<RejectedRow>,
    pub balances_computed: usize,
    pub facts_inserted: usize,
    pub facts_updated: usize,
    pub facts_unchanged: usize,
}

impl EtlReport {
    pub fn facts_presented(&self) -> usize {
        self.facts_inserted + self.facts_updated + self.facts_unchanged
    }

    pub fn rejected_count(&self, reason: RejectReason) -> usize {
        self.rows_rejected.iter().filter(|r| r.reason == reason).count()
    }
}

impl fmt::Display for EtlReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rows read:         {}", self.rows_read)?;
        writeln!(f, "rows rejected:     {}", self.rows_rejected.len())?;
        let mut reasons: Vec<RejectReason> = self.rows_rejected.iter().map(|r| r.reason).collect();
        reasons.sort();
        reasons.dedup();
        for reason in reasons {
            writeln!(f, "  {:<18} {}", reason, self.rejected_count(reason))?;
        }
        writeln!(f, "balances computed: {}", self.balances_computed)?;
        writeln!(f, "facts inserted:    {}", self.facts_inserted)?;
        writeln!(f, "facts updated:     {}", self.facts_updated)?;
        write!(f, "facts unchanged:   {}", self.facts_unchanged)
    }
}

#[derive(Debug, Error)]
pub enum EtlError {
    #[error("NO_RATE: no exchange rate for {currency} on or before {date}")]
    NoRate { currency: CurrencyCode, date: NaiveDate },
    #[error("duplicate opening balance for account {0}")]
    DuplicateOpening(AccountId),
    #[error("opening balance of {account} dated {as_of} is after its first movement on {first_movement}")]
    OpeningAfterMovement {
        account: AccountId,
        as_of: NaiveDate,
        first_movement: NaiveDate,
    },
    #[error("daily balance for {account} on {date} is outside the time table")]
    OutsideTimeTable { account: AccountId, date: NaiveDate },
    #[error("daily balance for unknown account {0}")]
    UnknownAccount(AccountId),
    #[error("{file} line {line}: {message}")]
    BadInput {
        file: String,
        line: usize,
        message: String,
    },
    #[error("cannot read {path}: {source}")]
    MissingFile {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("star validation failed: {0}")]
    StarInvalid(ValidationReport),
    #[error(transparent)]
    Star(#[from] StarError),
    #[error(transparent)]
    Time(#[from] TimeError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("config: {0}")]
    Config(#[from] KvError),
}
