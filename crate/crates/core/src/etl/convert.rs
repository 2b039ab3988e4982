use std::collections::BTreeMap;

use chrono::NaiveDate;

use super::{DailyBalance, EtlError, ExchangeRate, OpeningBalance};
use crate::money::{convert_minor, parse_minor, CurrencyCode, MoneyMinor, Rate};
use crate::star_schema::{read_rows, AccountId, Dimensions, FactAccountBalance};

fn bad(file: &str, line: usize, message: impl Into<String>) -> EtlError {
    EtlError::BadInput {
        file: file.to_owned(),
        line,
        message: message.into(),
    }
}

fn parse_date(file: &str, line: usize, text: &str) -> Result<NaiveDate, EtlError> {
    NaiveDate::parse_from_str(text, "%Y-%m-%d").map_err(|_| bad(file, line, format!("bad date {text:?}")))
}

pub fn read_exchange_rates(bytes: &[u8]) -> Result<Vec<ExchangeRate>, EtlError> {
    const FILE: &str = "exchange_rates.csv";
    read_rows(FILE, bytes, &["currency_code", "rate_date", "rate_to_eur"])?
        .into_iter()
        .map(|(line, r)| {
            Ok(ExchangeRate {
                currency_code: CurrencyCode::new(&r[0]).map_err(|e| bad(FILE, line, e.to_string()))?,
                rate_date: parse_date(FILE, line, &r[1])?,
                rate_to_eur: r[2].parse().map_err(|e: crate::money::MoneyError| bad(FILE, line, e.to_string()))?,
            })
        })
        .collect()
}

/// Reads opening balances; each must name a known account in its currency.
pub fn read_opening_balances(bytes: &[u8], dims: &Dimensions) -> Result<Vec<OpeningBalance>, EtlError> {
    const FILE: &str = "opening_balances.csv";
    read_rows(FILE, bytes, &["account_id", "as_of_date", "amount", "currency_code"])?
        .into_iter()
        .map(|(line, r)| {
            let account = dims
                .account(&r[0])
                .ok_or_else(|| bad(FILE, line, format!("unknown account {:?}", r[0])))?;
            if account.currency_code.as_str() != r[3] {
                return Err(bad(FILE, line, format!("currency {:?} differs from account currency", r[3])));
            }
            let amount = parse_minor(&r[2]).map_err(|e| bad(FILE, line, e.to_string()))?;
            Ok(OpeningBalance {
                account_id: AccountId::new(r[0].clone()),
                as_of_date: parse_date(FILE, line, &r[1])?,
                amount: MoneyMinor::new(amount, account.currency_code.clone()),
            })
        })
        .collect()
}

/// Exchange rates per currency, sorted by date. EUR is implicit at 1.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RateBook {
    by_currency: BTreeMap<CurrencyCode, Vec<(NaiveDate, Rate)>>,
}

impl RateBook {
    /// Rejects duplicate (currency, date) pairs and EUR rates other than 1.
    pub fn new(rates: impl IntoIterator<Item = ExchangeRate>) -> Result<Self, EtlError> {
        let mut by_currency: BTreeMap<CurrencyCode, Vec<(NaiveDate, Rate)>> = BTreeMap::new();
        for r in rates {
            if r.currency_code.is_eur() {
                if r.rate_to_eur != Rate::ONE {
                    return Err(bad("exchange_rates.csv", 0, format!("EUR rate on {} must be 1", r.rate_date)));
                }
                continue;
            }
            by_currency.entry(r.currency_code).or_default().push((r.rate_date, r.rate_to_eur));
        }
        for (currency, list) in &mut by_currency {
            list.sort_by_key(|(d, _)| *d);
            if let Some(w) = list.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(bad(
                    "exchange_rates.csv",
                    0,
                    format!("duplicate rate for {currency} on {}", w[0].0),
                ));
            }
        }
        Ok(Self { by_currency })
    }

    /// Latest rate dated on or before `date`.
    pub fn rate_on(&self, currency: &CurrencyCode, date: NaiveDate) -> Option<Rate> {
        if currency.is_eur() {
            return Some(Rate::ONE);
        }
        let list = self.by_currency.get(currency)?;
        let n = list.partition_point(|(d, _)| *d <= date);
        n.checked_sub(1).map(|i| list[i].1)
    }

    pub fn latest_date(&self) -> Option<NaiveDate> {
        self.by_currency.values().filter_map(|l| l.last().map(|(d, _)| *d)).max()
    }
}

/// Converts dense balances to facts using the latest rate on or before each
/// day, rounding half to even.
pub fn convert_to_eur(dense: &[DailyBalance], rates: &RateBook) -> Result<Vec<FactAccountBalance>, EtlError> {
    let eur = CurrencyCode::eur();
    dense
        .iter()
        .map(|b| {
            let currency = &b.real.currency;
            let rate = rates.rate_on(currency, b.date).ok_or_else(|| EtlError::NoRate {
                currency: currency.clone(),
                date: b.date,
            })?;
            Ok(FactAccountBalance {
                value_date: b.date,
                account_id: b.account_id.clone(),
                balance_orig: b.real.clone(),
                balance_eur: MoneyMinor::new(convert_minor(b.real.amount_minor, rate), eur.clone()),
                working_orig: b.working.clone(),
                working_eur: MoneyMinor::new(convert_minor(b.working.amount_minor, rate), eur.clone()),
            })
        })
        .collect()
}
