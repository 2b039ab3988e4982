//! Pivot queries over the daily balance facts.
//!
//! Balances are semi-additive: they add up across accounts but not across
//! days. Over time a cell either takes the closing balance of its period
//! ([`Aggregator::SumClosing`]) or the mean of its daily totals
//! ([`Aggregator::Average`]).

mod engine;
mod reference;
mod transform;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::{format_minor, CurrencyCode};
use crate::star_schema::{AccountPath, ValidationReport};
use crate::time_dimension::TimeTable;

pub use crate::star_schema::Measure;
pub use crate::time_dimension::TimeGrain;
pub use engine::{build_cube, query_pivot, CubeSnapshot};
pub use reference::reference_evaluator;
pub use transform::{transform_query, Axis, Hierarchy, OlapOp};

/// A hierarchy level usable on an axis or in a filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Year,
    Semester,
    Quarter,
    Month,
    Day,
    IsoYear,
    Week,
    CompanyCountry,
    Company,
    BankCountry,
    Bank,
    Currency,
    Account,
}

impl Level {
    pub const ALL: [Level; 13] = [
        Level::Year,
        Level::Semester,
        Level::Quarter,
        Level::Month,
        Level::Day,
        Level::IsoYear,
        Level::Week,
        Level::CompanyCountry,
        Level::Company,
        Level::BankCountry,
        Level::Bank,
        Level::Currency,
        Level::Account,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Level::Year => "year",
            Level::Semester => "semester",
            Level::Quarter => "quarter",
            Level::Month => "month",
            Level::Day => "day",
            Level::IsoYear => "iso_year",
            Level::Week => "week",
            Level::CompanyCountry => "company_country",
            Level::Company => "company",
            Level::BankCountry => "bank_country",
            Level::Bank => "bank",
            Level::Currency => "currency",
            Level::Account => "account",
        }
    }

    /// The grain of a time level, `None` for account-side levels.
    pub fn time_grain(self) -> Option<TimeGrain> {
        Some(match self {
            Level::Year => TimeGrain::Year,
            Level::Semester => TimeGrain::Semester,
            Level::Quarter => TimeGrain::Quarter,
            Level::Month => TimeGrain::Month,
            Level::Day => TimeGrain::Day,
            Level::IsoYear => TimeGrain::IsoYear,
            Level::Week => TimeGrain::Week,
            _ => return None,
        })
    }

    pub fn is_time(self) -> bool {
        self.time_grain().is_some()
    }

    pub fn from_grain(grain: TimeGrain) -> Level {
        match grain {
            TimeGrain::Year => Level::Year,
            TimeGrain::Semester => Level::Semester,
            TimeGrain::Quarter => Level::Quarter,
            TimeGrain::Month => Level::Month,
            TimeGrain::Day => Level::Day,
            TimeGrain::IsoYear => Level::IsoYear,
            TimeGrain::Week => Level::Week,
        }
    }

    /// Member label of an account-side level.
    pub(crate) fn account_label(self, path: &AccountPath) -> &str {
        match self {
            Level::CompanyCountry => path.company_country.as_str(),
            Level::Company => path.company.as_str(),
            Level::BankCountry => path.bank_country.as_str(),
            Level::Bank => path.bank.as_str(),
            Level::Currency => path.currency.as_str(),
            Level::Account => path.account.as_str(),
            _ => unreachable!("time level {self} has no account label"),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Level {
    type Err = CubeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Level::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| CubeError::UnknownLevel(s.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Aggregator {
    /// Balance on the last day of each period, summed across accounts.
    SumClosing,
    /// Mean over the period's days of the per-day total, rounded half-even.
    Average,
}

impl Aggregator {
    pub fn name(self) -> &'static str {
        match self {
            Aggregator::SumClosing => "SUM_CLOSING",
            Aggregator::Average => "AVERAGE",
        }
    }
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Aggregator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "SUM_CLOSING" | "SUM" => Ok(Aggregator::SumClosing),
            "AVERAGE" | "AVG" => Ok(Aggregator::Average),
            _ => Err(format!("unknown aggregator `{s}`")),
        }
    }
}

/// Keeps facts whose member at `level` is one of `members`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Filter {
    pub level: Level,
    pub members: BTreeSet<String>,
}

impl Filter {
    pub fn new<I, S>(level: Level, members: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            level,
            members: members.into_iter().map(Into::into).collect(),
        }
    }
}

/// Inclusive date interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeRange {
    pub from: NaiveDate,
    pub to: NaiveDate,
}

impl TimeRange {
    pub fn new(from: NaiveDate, to: NaiveDate) -> Self {
        Self { from, to }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.from <= date && date <= self.to
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PivotQuery {
    pub measure: Measure,
    pub time_aggregator: Aggregator,
    #[serde(default)]
    pub row_levels: Vec<Level>,
    #[serde(default)]
    pub col_levels: Vec<Level>,
    #[serde(default)]
    pub filters: Vec<Filter>,
    pub time_range: TimeRange,
    pub time_grain: TimeGrain,
}

impl PivotQuery {
    /// Checks the query against the schema and the time table.
    ///
    /// A time level may appear on at most one axis, and when present it must
    /// be the query's grain. Without a time level on either axis the whole
    /// range forms a single time cell.
    pub fn validate(&self, time_table: &TimeTable) -> Result<(), CubeError> {
        let mut seen = BTreeSet::new();
        for level in self.row_levels.iter().chain(&self.col_levels) {
            if !seen.insert(*level) {
                return Err(CubeError::DuplicateLevel(*level));
            }
        }
        let time_levels: Vec<Level> = seen.iter().copied().filter(|l| l.is_time()).collect();
        match time_levels.as_slice() {
            [] => {}
            [level] if level.time_grain() == Some(self.time_grain) => {}
            _ => {
                return Err(CubeError::TimeLevelMismatch {
                    grain: self.time_grain,
                    levels: time_levels,
                })
            }
        }
        for filter in &self.filters {
            if filter.members.is_empty() {
                return Err(CubeError::EmptyFilter(filter.level));
            }
        }
        if self.time_range.from > self.time_range.to {
            return Err(CubeError::InvertedRange(self.time_range));
        }
        if !time_table.contains(self.time_range.from) || !time_table.contains(self.time_range.to) {
            return Err(CubeError::RangeOutsideTable {
                range: self.time_range,
                first: time_table.first_date(),
                last: time_table.last_date(),
            });
        }
        Ok(())
    }

    /// The axis level carrying the time grain, if any.
    pub fn time_level(&self) -> Option<Level> {
        self.row_levels
            .iter()
            .chain(&self.col_levels)
            .copied()
            .find(|l| l.is_time())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CubeError {
    #[error("UNKNOWN_LEVEL: `{0}` is not a level (expected one of year, semester, quarter, month, day, iso_year, week, company_country, company, bank_country, bank, currency, account)")]
    UnknownLevel(String),
    #[error("DUPLICATE_LEVEL: level {0} appears more than once on the axes")]
    DuplicateLevel(Level),
    #[error("TIME_LEVEL_MISMATCH: axis time levels {levels:?} do not match grain {grain}")]
    TimeLevelMismatch { grain: TimeGrain, levels: Vec<Level> },
    #[error("EMPTY_FILTER: filter on {0} has no members")]
    EmptyFilter(Level),
    #[error("INVERTED_RANGE: {} is after {}", .0.from, .0.to)]
    InvertedRange(TimeRange),
    #[error("RANGE_OUTSIDE_TABLE: {}..{} is not within the time table {first}..{last}", .range.from, .range.to)]
    RangeOutsideTable {
        range: TimeRange,
        first: NaiveDate,
        last: NaiveDate,
    },
    #[error("MIXED_CURRENCY: {measure} spans accounts in {}", .currencies.join(", "))]
    MixedCurrency { measure: Measure, currencies: Vec<String> },
    #[error("STAR_INVALID: {0}")]
    StarInvalid(ValidationReport),
    #[error("INAPPLICABLE_OP: {0}")]
    InapplicableOp(String),
}

impl CubeError {
    /// Stable machine-readable name of the error.
    pub fn code(&self) -> &'static str {
        match self {
            CubeError::UnknownLevel(_) => "UNKNOWN_LEVEL",
            CubeError::DuplicateLevel(_) => "DUPLICATE_LEVEL",
            CubeError::TimeLevelMismatch { .. } => "TIME_LEVEL_MISMATCH",
            CubeError::EmptyFilter(_) => "EMPTY_FILTER",
            CubeError::InvertedRange(_) => "INVERTED_RANGE",
            CubeError::RangeOutsideTable { .. } => "RANGE_OUTSIDE_TABLE",
            CubeError::MixedCurrency { .. } => "MIXED_CURRENCY",
            CubeError::StarInvalid(_) => "STAR_INVALID",
            CubeError::InapplicableOp(_) => "INAPPLICABLE_OP",
        }
    }
}

/// Pivot grid. Headers are member tuples in axis level order, sorted; cells
/// and totals are minor units of `currency`, `None` where no fact falls.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PivotResult {
    pub row_levels: Vec<Level>,
    pub col_levels: Vec<Level>,
    pub row_headers: Vec<Vec<String>>,
    pub col_headers: Vec<Vec<String>>,
    pub cells: Vec<Vec<Option<i64>>>,
    pub row_totals: Vec<Option<i64>>,
    pub col_totals: Vec<Option<i64>>,
    pub grand_total: Option<i64>,
    pub currency: Option<CurrencyCode>,
}

impl PivotResult {
    pub fn empty(query: &PivotQuery) -> Self {
        Self {
            row_levels: query.row_levels.clone(),
            col_levels: query.col_levels.clone(),
            row_headers: Vec::new(),
            col_headers: Vec::new(),
            cells: Vec::new(),
            row_totals: Vec::new(),
            col_totals: Vec::new(),
            grand_total: None,
            currency: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.row_headers.is_empty()
    }

    pub fn cell(&self, row: &[&str], col: &[&str]) -> Option<i64> {
        let r = self.row_headers.iter().position(|h| h.iter().map(String::as_str).eq(row.iter().copied()))?;
        let c = self.col_headers.iter().position(|h| h.iter().map(String::as_str).eq(col.iter().copied()))?;
        self.cells[r][c]
    }

    /// The grid with rows and columns exchanged.
    pub fn transposed(&self) -> PivotResult {
        let cells = (0..self.col_headers.len())
            .map(|c| self.cells.iter().map(|row| row[c]).collect())
            .collect();
        PivotResult {
            row_levels: self.col_levels.clone(),
            col_levels: self.row_levels.clone(),
            row_headers: self.col_headers.clone(),
            col_headers: self.row_headers.clone(),
            cells,
            row_totals: self.col_totals.clone(),
            col_totals: self.row_totals.clone(),
            grand_total: self.grand_total,
            currency: self.currency.clone(),
        }
    }

    /// Dot-decimal CSV rendering. The first column holds the row member
    /// tuple joined with `|`, each further column one column tuple, and the
    /// last row and column the totals.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let join = |t: &[String]| if t.is_empty() { "*".to_owned() } else { t.join("|") };
        let fmt = |v: Option<i64>| v.map(format_minor).unwrap_or_default();
        let names: Vec<&str> = self.row_levels.iter().map(|l| l.name()).collect();
        let col_names: Vec<&str> = self.col_levels.iter().map(|l| l.name()).collect();
        let mut header = vec![format!("{}\\{}", names.join("|"), col_names.join("|"))];
        header.extend(self.col_headers.iter().map(|h| join(h)));
        header.push("TOTAL".to_owned());
        w.write_record(&header).expect("in-memory write");
        for (r, row) in self.row_headers.iter().enumerate() {
            let mut rec = vec![join(row)];
            rec.extend(self.cells[r].iter().map(|v| fmt(*v)));
            rec.push(fmt(self.row_totals[r]));
            w.write_record(&rec).expect("in-memory write");
        }
        let mut rec = vec!["TOTAL".to_owned()];
        rec.extend(self.col_totals.iter().map(|v| fmt(*v)));
        rec.push(fmt(self.grand_total));
        w.write_record(&rec).expect("in-memory write");
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    /// Fixed-width text rendering for terminals.
    pub fn to_table(&self) -> String {
        let text = self.to_csv();
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
        let rows: Vec<Vec<String>> = rdr
            .records()
            .map(|r| r.expect("own csv").iter().map(str::to_owned).collect())
            .collect();
        let ncols = rows.first().map_or(0, Vec::len);
        let widths: Vec<usize> = (0..ncols)
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        if let Some(cur) = &self.currency {
            out.push_str(&format!("currency: {cur}\n"));
        }
        for row in &rows {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, v)| {
                    if c == 0 {
                        format!("{:<w$}", v, w = widths[c])
                    } else {
                        format!("{:>w$}", v, w = widths[c])
                    }
                })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

/// Rounds `num / den` half-to-even; used for AVERAGE cells.
pub(crate) fn mean_half_even(num: i128, den: i128) -> i64 {
    crate::money::div_round_half_even(num, den) as i64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time_dimension::build_time_table;

    fn query() -> PivotQuery {
        PivotQuery {
            measure: Measure::BalanceEur,
            time_aggregator: Aggregator::Average,
            row_levels: vec![Level::Bank],
            col_levels: vec![Level::Month],
            filters: vec![Filter::new(Level::Currency, ["EUR"])],
            time_range: TimeRange::new("2016-01-01".parse().unwrap(), "2016-03-31".parse().unwrap()),
            time_grain: TimeGrain::Month,
        }
    }

    #[test]
    fn json_shape() {
        let json = serde_json::to_value(query()).unwrap();
        assert_eq!(json["measure"], "balance_eur");
        assert_eq!(json["time_aggregator"], "AVERAGE");
        assert_eq!(json["row_levels"][0], "bank");
        assert_eq!(json["filters"][0]["members"][0], "EUR");
        assert_eq!(json["time_range"]["from"], "2016-01-01");
        assert_eq!(json["time_grain"], "month");
        let back: PivotQuery = serde_json::from_value(json).unwrap();
        assert_eq!(back, query());
    }

    #[test]
    fn validation() {
        let table = build_time_table(2016, 2016).unwrap();
        assert!(query().validate(&table).is_ok());

        let mut q = query();
        q.time_grain = TimeGrain::Year;
        assert_eq!(q.validate(&table).unwrap_err().code(), "TIME_LEVEL_MISMATCH");

        let mut q = query();
        q.row_levels.push(Level::Year);
        assert_eq!(q.validate(&table).unwrap_err().code(), "TIME_LEVEL_MISMATCH");

        let mut q = query();
        q.col_levels.push(Level::Bank);
        assert_eq!(q.validate(&table).unwrap_err().code(), "DUPLICATE_LEVEL");

        let mut q = query();
        q.time_range.to = "2017-01-01".parse().unwrap();
        assert_eq!(q.validate(&table).unwrap_err().code(), "RANGE_OUTSIDE_TABLE");

        let mut q = query();
        q.time_range = TimeRange::new(q.time_range.to, q.time_range.from);
        assert_eq!(q.validate(&table).unwrap_err().code(), "INVERTED_RANGE");

        let mut q = query();
        q.filters[0].members.clear();
        assert_eq!(q.validate(&table).unwrap_err().code(), "EMPTY_FILTER");

        assert_eq!("nope".parse::<Level>().unwrap_err().code(), "UNKNOWN_LEVEL");
    }

    #[test]
    fn csv_layout() {
        let r = PivotResult {
            row_levels: vec![Level::Bank],
            col_levels: vec![Level::Year],
            row_headers: vec![vec!["B1".into()], vec!["B2".into()]],
            col_headers: vec![vec!["2015".into()], vec!["2016".into()]],
            cells: vec![vec![Some(100), None], vec![Some(-5), Some(250)]],
            row_totals: vec![Some(100), Some(250)],
            col_totals: vec![Some(95), Some(250)],
            grand_total: Some(350),
            currency: Some(CurrencyCode::eur()),
        };
        assert_eq!(
            r.to_csv(),
            "bank\\year,2015,2016,TOTAL\nB1,1.00,,1.00\nB2,-0.05,2.50,2.50\nTOTAL,0.95,2.50,3.50\n"
        );
        assert_eq!(r.transposed().transposed(), r);
        assert_eq!(r.cell(&["B2"], &["2016"]), Some(250));
    }
}
