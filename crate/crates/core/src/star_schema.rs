//! Dimension and fact model of the warehouse.
//!
//! Six dimensions (companies, banks, accounts, currencies, countries and the
//! calendar) surround one fact table keyed by value date and account. Country
//! is a role-playing dimension reached from both companies and banks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::{CurrencyCode, MoneyMinor, MINOR_UNIT_SCALE};
use crate::time_dimension::TimeTable;

macro_rules! opaque_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(id: &str) -> Self {
                Self(id.to_owned())
            }
        }

        impl std::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

opaque_id!(
    /// Account identifier as found in the source files.
    AccountId
);
opaque_id!(CompanyId);
opaque_id!(BankId);
opaque_id!(
    /// ISO-3166 alpha-2 country code.
    CountryCode
);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompanyRecord {
    pub company_id: CompanyId,
    pub name: String,
    pub country_code: CountryCode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BankRecord {
    pub bank_id: BankId,
    pub name: String,
    pub country_code: CountryCode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccountRecord {
    pub account_id: AccountId,
    pub company_id: CompanyId,
    pub bank_id: BankId,
    pub currency_code: CurrencyCode,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurrencyRecord {
    pub currency_code: CurrencyCode,
    pub name: String,
    pub minor_unit_scale: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountryRecord {
    pub country_code: CountryCode,
    pub name: String,
}

/// Base measures stored on every fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    BalanceEur,
    BalanceOrig,
    WorkingEur,
    WorkingOrig,
}

impl Measure {
    pub const ALL: [Measure; 4] = [
        Measure::BalanceEur,
        Measure::BalanceOrig,
        Measure::WorkingEur,
        Measure::WorkingOrig,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::BalanceEur => "balance_eur",
            Measure::BalanceOrig => "balance_orig",
            Measure::WorkingEur => "working_eur",
            Measure::WorkingOrig => "working_orig",
        }
    }

    /// True for measures expressed in the account's own currency.
    pub fn is_original_currency(self) -> bool {
        matches!(self, Measure::BalanceOrig | Measure::WorkingOrig)
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl std::str::FromStr for Measure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Measure::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown measure `{s}`"))
    }
}

/// One row per (value date, account).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FactAccountBalance {
    pub value_date: NaiveDate,
    pub account_id: AccountId,
    pub balance_orig: MoneyMinor,
    pub balance_eur: MoneyMinor,
    pub working_orig: MoneyMinor,
    pub working_eur: MoneyMinor,
}

impl FactAccountBalance {
    pub fn key(&self) -> (NaiveDate, AccountId) {
        (self.value_date, self.account_id.clone())
    }

    pub fn amount(&self, measure: Measure) -> i64 {
        [
            &self.balance_eur,
            &self.balance_orig,
            &self.working_eur,
            &self.working_orig,
        ][measure.index()]
        .amount_minor
    }
}

#[derive(Debug, Error)]
pub enum StarError {
    #[error("{file}: {source}")]
    Csv {
        file: String,
        #[source]
        source: csv::Error,
    },
    #[error("{file}: expected header `{expected}`")]
    Header { file: String, expected: String },
    #[error("{file} line {line}: {message}")]
    Field {
        file: String,
        line: usize,
        message: String,
    },
}

pub const COMPANIES_FILE: &str = "companies.csv";
pub const BANKS_FILE: &str = "banks.csv";
pub const ACCOUNTS_FILE: &str = "accounts.csv";
pub const CURRENCIES_FILE: &str = "currencies.csv";
pub const COUNTRIES_FILE: &str = "countries.csv";

/// All non-time dimension rows, as loaded. May contain integrity problems
/// until checked with [`validate_star`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dimensions {
    pub companies: Vec<CompanyRecord>,
    pub banks: Vec<BankRecord>,
    pub accounts: Vec<AccountRecord>,
    pub currencies: Vec<CurrencyRecord>,
    pub countries: Vec<CountryRecord>,
}

/// Raw bytes of the five dimension files.
#[derive(Debug, Clone, Copy)]
pub struct DimensionSources<'a> {
    pub companies: &'a [u8],
    pub banks: &'a [u8],
    pub accounts: &'a [u8],
    pub currencies: &'a [u8],
    pub countries: &'a [u8],
}

impl Dimensions {
    pub fn parse(src: DimensionSources<'_>) -> Result<Self, StarError> {
        let companies = read_rows(COMPANIES_FILE, src.companies, &["company_id", "name", "country_code"])?
            .into_iter()
            .map(|(line, r)| {
                Ok(CompanyRecord {
                    company_id: CompanyId::new(non_empty(COMPANIES_FILE, line, "company_id", &r[0])?),
                    name: r[1].clone(),
                    country_code: country(COMPANIES_FILE, line, &r[2])?,
                })
            })
            .collect::<Result<_, StarError>>()?;
        let banks = read_rows(BANKS_FILE, src.banks, &["bank_id", "name", "country_code"])?
            .into_iter()
            .map(|(line, r)| {
                Ok(BankRecord {
                    bank_id: BankId::new(non_empty(BANKS_FILE, line, "bank_id", &r[0])?),
                    name: r[1].clone(),
                    country_code: country(BANKS_FILE, line, &r[2])?,
                })
            })
            .collect::<Result<_, StarError>>()?;
        let accounts = read_rows(
            ACCOUNTS_FILE,
            src.accounts,
            &["account_id", "company_id", "bank_id", "currency_code", "label"],
        )?
        .into_iter()
        .map(|(line, r)| {
            Ok(AccountRecord {
                account_id: AccountId::new(non_empty(ACCOUNTS_FILE, line, "account_id", &r[0])?),
                company_id: CompanyId::new(non_empty(ACCOUNTS_FILE, line, "company_id", &r[1])?),
                bank_id: BankId::new(non_empty(ACCOUNTS_FILE, line, "bank_id", &r[2])?),
                currency_code: currency(ACCOUNTS_FILE, line, &r[3])?,
                label: r[4].clone(),
            })
        })
        .collect::<Result<_, StarError>>()?;
        let currencies = read_rows(CURRENCIES_FILE, src.currencies, &["currency_code", "name"])?
            .into_iter()
            .map(|(line, r)| {
                Ok(CurrencyRecord {
                    currency_code: currency(CURRENCIES_FILE, line, &r[0])?,
                    name: r[1].clone(),
                    minor_unit_scale: MINOR_UNIT_SCALE,
                })
            })
            .collect::<Result<_, StarError>>()?;
        let countries = read_rows(COUNTRIES_FILE, src.countries, &["country_code", "name"])?
            .into_iter()
            .map(|(line, r)| {
                Ok(CountryRecord {
                    country_code: country(COUNTRIES_FILE, line, &r[0])?,
                    name: r[1].clone(),
                })
            })
            .collect::<Result<_, StarError>>()?;
        Ok(Self {
            companies,
            banks,
            accounts,
            currencies,
            countries,
        })
    }

    pub fn account(&self, id: &str) -> Option<&AccountRecord> {
        self.accounts.iter().find(|a| a.account_id.as_str() == id)
    }

    /// Resolves every account whose references all exist. For a valid star
    /// this covers every account.
    pub fn account_paths(&self) -> BTreeMap<AccountId, AccountPath> {
        let companies: BTreeMap<&CompanyId, &CompanyRecord> =
            self.companies.iter().map(|c| (&c.company_id, c)).collect();
        let banks: BTreeMap<&BankId, &BankRecord> = self.banks.iter().map(|b| (&b.bank_id, b)).collect();
        self.accounts
            .iter()
            .filter_map(|a| {
                let company = companies.get(&a.company_id)?;
                let bank = banks.get(&a.bank_id)?;
                Some((
                    a.account_id.clone(),
                    AccountPath {
                        account: a.account_id.clone(),
                        company: company.company_id.clone(),
                        company_country: company.country_code.clone(),
                        bank: bank.bank_id.clone(),
                        bank_country: bank.country_code.clone(),
                        currency: a.currency_code.clone(),
                    },
                ))
            })
            .collect()
    }

    /// Writes the five dimension files as CSV text, keyed by file name.
    pub fn to_csv_files(&self) -> BTreeMap<&'static str, String> {
        let mut files = BTreeMap::new();
        let mut put = |name: &'static str, header: &[&str], rows: Vec<Vec<&str>>| {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(header).expect("in-memory write");
            for row in rows {
                w.write_record(row).expect("in-memory write");
            }
            let bytes = w.into_inner().expect("in-memory flush");
            files.insert(name, String::from_utf8(bytes).expect("UTF-8"));
        };
        put(
            COMPANIES_FILE,
            &["company_id", "name", "country_code"],
            self.companies
                .iter()
                .map(|c| vec![c.company_id.as_str(), c.name.as_str(), c.country_code.as_str()])
                .collect(),
        );
        put(
            BANKS_FILE,
            &["bank_id", "name", "country_code"],
            self.banks
                .iter()
                .map(|b| vec![b.bank_id.as_str(), b.name.as_str(), b.country_code.as_str()])
                .collect(),
        );
        put(
            ACCOUNTS_FILE,
            &["account_id", "company_id", "bank_id", "currency_code", "label"],
            self.accounts
                .iter()
                .map(|a| {
                    vec![
                        a.account_id.as_str(),
                        a.company_id.as_str(),
                        a.bank_id.as_str(),
                        a.currency_code.as_str(),
                        a.label.as_str(),
                    ]
                })
                .collect(),
        );
        put(
            CURRENCIES_FILE,
            &["currency_code", "name"],
            self.currencies
                .iter()
                .map(|c| vec![c.currency_code.as_str(), c.name.as_str()])
                .collect(),
        );
        put(
            COUNTRIES_FILE,
            &["country_code", "name"],
            self.countries
                .iter()
                .map(|c| vec![c.country_code.as_str(), c.name.as_str()])
                .collect(),
        );
        files
    }
}

/// The unique path from an account to every dimension it reaches.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AccountPath {
    pub account: AccountId,
    pub company: CompanyId,
    pub company_country: CountryCode,
    pub bank: BankId,
    pub bank_country: CountryCode,
    pub currency: CurrencyCode,
}

/// Reads a CSV file with an exact header; returns (line number, fields).
pub(crate) fn read_rows(
    file: &str,
    bytes: &[u8],
    header: &[&str],
) -> Result<Vec<(usize, Vec<String>)>, StarError> {
    let csv_err = |source| StarError::Csv {
        file: file.to_owned(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(bytes);
    let found: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    if found != header {
        return Err(StarError::Header {
            file: file.to_owned(),
            expected: header.join(","),
        });
    }
    let mut rows = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = idx + 2;
        if rec.len() != header.len() {
            return Err(StarError::Field {
                file: file.to_owned(),
                line,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        rows.push((line, rec.iter().map(str::to_owned).collect()));
    }
    Ok(rows)
}

fn non_empty(file: &str, line: usize, field: &str, value: &str) -> Result<String, StarError> {
    if value.is_empty() {
        Err(StarError::Field {
            file: file.to_owned(),
            line,
            message: format!("empty {field}"),
        })
    } else {
        Ok(value.to_owned())
    }
}

fn country(file: &str, line: usize, value: &str) -> Result<CountryCode, StarError> {
    if value.len() == 2 && value.bytes().all(|b| b.is_ascii_uppercase()) {
        Ok(CountryCode::new(value))
    } else {
        Err(StarError::Field {
            file: file.to_owned(),
            line,
            message: format!("invalid country code {value:?}"),
        })
    }
}

fn currency(file: &str, line: usize, value: &str) -> Result<CurrencyCode, StarError> {
    CurrencyCode::new(value).map_err(|e| StarError::Field {
        file: file.to_owned(),
        line,
        message: e.to_string(),
    })
}

/// Dimension or fact table named in a violation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Table {
    Companies,
    Banks,
    Accounts,
    Currencies,
    Countries,
    Facts,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DuplicateKey {
        table: Table,
        key: String,
    },
    DanglingKey {
        table: Table,
        key: String,
        target: Table,
        missing: String,
    },
    DateNotInTimeTable {
        account: String,
        date: NaiveDate,
    },
    UnsupportedScale {
        currency: String,
        scale: u32,
    },
    FactCurrencyMismatch {
        key: String,
        expected: String,
        found: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateKey { table, key } => write!(f, "duplicate key {key} in {table:?}"),
            Violation::DanglingKey {
                table,
                key,
                target,
                missing,
            } => write!(f, "{table:?} row {key} references missing {target:?} {missing}"),
            Violation::DateNotInTimeTable { account, date } => {
                write!(f, "fact ({date}, {account}) is outside the time table")
            }
            Violation::UnsupportedScale { currency, scale } => {
                write!(f, "currency {currency} has unsupported scale {scale}")
            }
            Violation::FactCurrencyMismatch { key, expected, found } => {
                write!(f, "fact {key} carries {found}, expected {expected}")
            }
        }
    }
}

/// Sorted list of integrity problems; empty means the star is valid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violation(s)", self.violations.len())?;
        for v in self.violations.iter().take(10) {
            write!(f, "; {v}")?;
        }
        Ok(())
    }
}

/// Checks referential integrity of dimensions and facts. Problems are
/// collected, never raised; the result does not depend on row order.
pub fn validate_star<'a, I>(dims: &Dimensions, facts: I, time_table: &TimeTable) -> ValidationReport
where
    I: IntoIterator<Item = &'a FactAccountBalance>,
{
    let mut violations = Vec::new();

    fn keys<'k>(
        table: Table,
        ids: impl Iterator<Item = &'k str>,
        violations: &mut Vec<Violation>,
    ) -> BTreeSet<&'k str> {
        let mut seen = BTreeSet::new();
        for id in ids {
            if !seen.insert(id) {
                violations.push(Violation::DuplicateKey {
                    table,
                    key: id.to_owned(),
                });
            }
        }
        seen
    }

    let countries = keys(
        Table::Countries,
        dims.countries.iter().map(|c| c.country_code.as_str()),
        &mut violations,
    );
    let currencies = keys(
        Table::Currencies,
        dims.currencies.iter().map(|c| c.currency_code.as_str()),
        &mut violations,
    );
    let companies = keys(
        Table::Companies,
        dims.companies.iter().map(|c| c.company_id.as_str()),
        &mut violations,
    );
    let banks = keys(Table::Banks, dims.banks.iter().map(|b| b.bank_id.as_str()), &mut violations);
    keys(
        Table::Accounts,
        dims.accounts.iter().map(|a| a.account_id.as_str()),
        &mut violations,
    );

    let mut dangling = |table: Table, key: &str, target: Table, missing: &str, known: &BTreeSet<&str>| {
        if !known.contains(missing) {
            violations.push(Violation::DanglingKey {
                table,
                key: key.to_owned(),
                target,
                missing: missing.to_owned(),
            });
        }
    };
    for c in &dims.companies {
        dangling(Table::Companies, c.company_id.as_str(), Table::Countries, c.country_code.as_str(), &countries);
    }
    for b in &dims.banks {
        dangling(Table::Banks, b.bank_id.as_str(), Table::Countries, b.country_code.as_str(), &countries);
    }
    for a in &dims.accounts {
        let key = a.account_id.as_str();
        dangling(Table::Accounts, key, Table::Companies, a.company_id.as_str(), &companies);
        dangling(Table::Accounts, key, Table::Banks, a.bank_id.as_str(), &banks);
        dangling(Table::Accounts, key, Table::Currencies, a.currency_code.as_str(), &currencies);
    }

    for c in &dims.currencies {
        if c.minor_unit_scale != MINOR_UNIT_SCALE {
            violations.push(Violation::UnsupportedScale {
                currency: c.currency_code.to_string(),
                scale: c.minor_unit_scale,
            });
        }
    }

    let account_currency: BTreeMap<&str, &CurrencyCode> = dims
        .accounts
        .iter()
        .map(|a| (a.account_id.as_str(), &a.currency_code))
        .collect();
    let eur = CurrencyCode::eur();
    let mut fact_keys = BTreeSet::new();
    for fact in facts {
        let key = format!("{}/{}", fact.value_date, fact.account_id);
        if !fact_keys.insert((fact.value_date, fact.account_id.as_str())) {
            violations.push(Violation::DuplicateKey {
                table: Table::Facts,
                key: key.clone(),
            });
        }
        match account_currency.get(fact.account_id.as_str()) {
            None => violations.push(Violation::DanglingKey {
                table: Table::Facts,
                key: key.clone(),
                target: Table::Accounts,
                missing: fact.account_id.to_string(),
            }),
            Some(cur) => {
                let pairs = [
                    (&fact.balance_orig.currency, *cur),
                    (&fact.working_orig.currency, *cur),
                    (&fact.balance_eur.currency, &eur),
                    (&fact.working_eur.currency, &eur),
                ];
                if let Some((found, expected)) = pairs.iter().find(|(f, e)| f != e) {
                    violations.push(Violation::FactCurrencyMismatch {
                        key: key.clone(),
                        expected: expected.to_string(),
                        found: found.to_string(),
                    });
                }
            }
        }
        if !time_table.contains(fact.value_date) {
            violations.push(Violation::DateNotInTimeTable {
                account: fact.account_id.to_string(),
                date: fact.value_date,
            });
        }
    }

    violations.sort();
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time_dimension::build_time_table;

    fn dims() -> Dimensions {
        Dimensions::parse(DimensionSources {
            companies: b"company_id,name,country_code\nC1,Holding,PT\nC2,Trading,ES\n",
            banks: b"bank_id,name,country_code\nB1,Banco,PT\nB2,Bank,US\n",
            accounts: b"account_id,company_id,bank_id,currency_code,label\nA1,C1,B1,EUR,ops\nA2,C2,B2,USD,usd ops\n",
            currencies: b"currency_code,name\nEUR,Euro\nUSD,US Dollar\n",
            countries: b"country_code,name\nPT,Portugal\nES,Spain\nUS,United States\n",
        })
        .unwrap()
    }

    fn fact(date: &str, account: &str, cur: &str) -> FactAccountBalance {
        let c = CurrencyCode::new(cur).unwrap();
        FactAccountBalance {
            value_date: date.parse().unwrap(),
            account_id: AccountId::from(account),
            balance_orig: MoneyMinor::new(100, c.clone()),
            balance_eur: MoneyMinor::new(90, CurrencyCode::eur()),
            working_orig: MoneyMinor::new(100, c),
            working_eur: MoneyMinor::new(90, CurrencyCode::eur()),
        }
    }

    #[test]
    fn empty_star_is_valid() {
        let t = build_time_table(2016, 2016).unwrap();
        assert!(validate_star(&Dimensions::default(), &[], &t).is_valid());
    }

    #[test]
    fn loaded_star_is_valid() {
        let t = build_time_table(2016, 2016).unwrap();
        let facts = [fact("2016-01-01", "A1", "EUR"), fact("2016-01-01", "A2", "USD")];
        let report = validate_star(&dims(), &facts, &t);
        assert!(report.is_valid(), "{report}");
    }

    #[test]
    fn dangling_fact_account() {
        let t = build_time_table(2016, 2016).unwrap();
        let report = validate_star(&dims(), &[fact("2016-01-01", "A9", "EUR")], &t);
        assert_eq!(report.violations.len(), 1);
        assert!(matches!(
            &report.violations[0],
            Violation::DanglingKey { table: Table::Facts, target: Table::Accounts, missing, .. } if missing == "A9"
        ));
    }

    #[test]
    fn duplicate_fact_key() {
        let t = build_time_table(2016, 2016).unwrap();
        let f = fact("2016-03-01", "A1", "EUR");
        let report = validate_star(&dims(), &[f.clone(), f], &t);
        assert_eq!(report.violations.len(), 1);
        assert!(matches!(report.violations[0], Violation::DuplicateKey { table: Table::Facts, .. }));
    }

    #[test]
    fn fact_outside_time_table_and_wrong_currency() {
        let t = build_time_table(2016, 2016).unwrap();
        let report = validate_star(
            &dims(),
            &[fact("2017-01-01", "A1", "EUR"), fact("2016-01-01", "A2", "EUR")],
            &t,
        );
        assert_eq!(report.violations.len(), 2);
        assert!(report.violations.iter().any(|v| matches!(v, Violation::DateNotInTimeTable { .. })));
        assert!(report.violations.iter().any(|v| matches!(v, Violation::FactCurrencyMismatch { .. })));
    }

    #[test]
    fn dimension_violations() {
        let mut d = dims();
        d.banks[1].country_code = CountryCode::from("FR");
        d.accounts.push(d.accounts[0].clone());
        d.accounts[1].company_id = CompanyId::from("C9");
        d.currencies[0].minor_unit_scale = 3;
        let t = build_time_table(2016, 2016).unwrap();
        let report = validate_star(&d, &[], &t);
        assert_eq!(report.violations.len(), 4, "{report}");
    }

    #[test]
    fn account_paths_resolve_both_country_roles() {
        let paths = dims().account_paths();
        let p = &paths[&AccountId::from("A2")];
        assert_eq!(p.company_country.as_str(), "ES");
        assert_eq!(p.bank_country.as_str(), "US");
        assert_eq!(p.currency.as_str(), "USD");
    }

    #[test]
    fn csv_files_round_trip() {
        let d = dims();
        let files = d.to_csv_files();
        let back = Dimensions::parse(DimensionSources {
            companies: files[COMPANIES_FILE].as_bytes(),
            banks: files[BANKS_FILE].as_bytes(),
            accounts: files[ACCOUNTS_FILE].as_bytes(),
            currencies: files[CURRENCIES_FILE].as_bytes(),
            countries: files[COUNTRIES_FILE].as_bytes(),
        })
        .unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn rejects_bad_headers_and_fields() {
        let mut src = DimensionSources {
            companies: b"id,name,country_code\n",
            banks: b"bank_id,name,country_code\n",
            accounts: b"account_id,company_id,bank_id,currency_code,label\n",
            currencies: b"currency_code,name\n",
            countries: b"country_code,name\n",
        };
        assert!(matches!(Dimensions::parse(src), Err(StarError::Header { .. })));
        src.companies = b"company_id,name,country_code\nC1,X,Portugal\n";
        assert!(matches!(Dimensions::parse(src), Err(StarError::Field { line: 2, .. })));
    }
}
