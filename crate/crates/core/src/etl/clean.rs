use std::collections::{BTreeMap, HashSet};

use chrono::NaiveDate;

use super::{EtlError, Movement, MovementKind, RejectReason, RejectedRow};
use crate::money::{parse_minor, CurrencyCode, MoneyMinor};
use crate::star_schema::{AccountId, Dimensions};
use crate::time_dimension::TimeTable;

pub const MOVEMENTS_HEADER: [&str; 6] = [
    "account_id",
    "value_date",
    "amount",
    "currency_code",
    "kind",
    "description",
];

/// One unparsed line of the movements file.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RawMovementRow {
    pub line: usize,
    pub fields: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CleanOptions {
    pub reject_zero_amount: bool,
}

/// Splits the movements file into raw rows. Only the header is checked here;
/// row-level problems are left to [`clean_movements`].
pub fn read_movement_rows(bytes: &[u8]) -> Result<Vec<RawMovementRow>, EtlError> {
    let bad = |line, message: String| EtlError::BadInput {
        file: "movements.csv".to_owned(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| bad(1, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header != MOVEMENTS_HEADER {
        return Err(bad(1, format!("expected header {}", MOVEMENTS_HEADER.join(","))));
    }
    let mut rows = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(idx + 2, e.to_string()))?;
        rows.push(RawMovementRow {
            line: idx + 2,
            fields: rec.iter().map(str::to_owned).collect(),
        });
    }
    Ok(rows)
}

/// Validates raw rows. Exact duplicates keep their first occurrence; every
/// input row ends up either accepted or rejected with one reason.
pub fn clean_movements(
    raw: &[RawMovementRow],
    dims: &Dimensions,
    time_table: &TimeTable,
    options: CleanOptions,
) -> (Vec<Movement>, Vec<RejectedRow>) {
    let currencies: BTreeMap<&str, &CurrencyCode> = dims
        .accounts
        .iter()
        .map(|a| (a.account_id.as_str(), &a.currency_code))
        .collect();
    let mut seen: HashSet<&[String]> = HashSet::with_capacity(raw.len());
    let mut movements = Vec::with_capacity(raw.len());
    let mut rejected = Vec::new();
    for row in raw {
        if !seen.insert(row.fields.as_slice()) {
            rejected.push(RejectedRow {
                line: row.line,
                reason: RejectReason::Duplicate,
            });
            continue;
        }
        match clean_row(&row.fields, &currencies, time_table, options) {
            Ok(m) => movements.push(m),
            Err(reason) => rejected.push(RejectedRow {
                line: row.line,
                reason,
            }),
        }
    }
    (movements, rejected)
}

fn clean_row(
    fields: &[String],
    currencies: &BTreeMap<&str, &CurrencyCode>,
    time_table: &TimeTable,
    options: CleanOptions,
) -> Result<Movement, RejectReason> {
    let [account, date, amount, currency, kind, description] = fields else {
        return Err(RejectReason::MalformedRow);
    };
    if account.is_empty() || date.is_empty() || amount.is_empty() {
        return Err(RejectReason::MissingField);
    }
    let amount_minor = parse_minor(amount).map_err(|_| RejectReason::BadAmount)?;
    let value_date = NaiveDate::parse_from_str(date, "%Y-%m-%d").map_err(|_| RejectReason::BadDate)?;
    let account_currency = currencies
        .get(account.as_str())
        .ok_or(RejectReason::UnknownAccount)?;
    if account_currency.as_str() != currency {
        return Err(RejectReason::CurrencyMismatch);
    }
    if !time_table.contains(value_date) {
        return Err(RejectReason::DateOutOfRange);
    }
    let kind = match kind.as_str() {
        "ACTUAL" => MovementKind::Actual,
        "FORECAST" => MovementKind::Forecast,
        _ => return Err(RejectReason::BadKind),
    };
    if options.reject_zero_amount && amount_minor == 0 {
        return Err(RejectReason::ZeroAmount);
    }
    Ok(Movement {
        account_id: AccountId::new(account.clone()),
        value_date,
        amount: MoneyMinor::new(amount_minor, (*account_currency).clone()),
        kind,
        description: description.clone(),
    })
}
