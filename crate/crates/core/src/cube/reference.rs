use std::collections::{BTreeMap, BTreeSet};

use super::{Aggregator, CubeError, PivotQuery, PivotResult};
use crate::money::CurrencyCode;
use crate::star_schema::{AccountPath, Dimensions, FactAccountBalance};
use crate::time_dimension::TimeTable;

type Key = Vec<String>;
type DaySums = BTreeMap<chrono::NaiveDate, i128>;

/// Answers `query` by scanning every fact row, with no index. Meant as a
/// test oracle for [`super::query_pivot`] on small instances.
pub fn reference_evaluator<'a>(
    facts: impl IntoIterator<Item = &'a FactAccountBalance>,
    dims: &Dimensions,
    time_table: &TimeTable,
    query: &PivotQuery,
) -> Result<PivotResult, CubeError> {
    query.validate(time_table)?;

    let mut cells: BTreeMap<(Key, Key), DaySums> = BTreeMap::new();
    let mut rows: BTreeMap<Key, DaySums> = BTreeMap::new();
    let mut cols: BTreeMap<Key, DaySums> = BTreeMap::new();
    let mut grand = DaySums::new();
    let mut currencies = BTreeSet::new();

    for fact in facts {
        if !query.time_range.contains(fact.value_date) {
            continue;
        }
        let Some(rec) = time_table.records().iter().find(|r| r.date == fact.value_date) else {
            continue;
        };
        let Some(path) = lookup_path(dims, fact.account_id.as_str()) else {
            continue;
        };
        let member = |level: super::Level| match level.time_grain() {
            Some(g) => rec.label(g),
            None => level.account_label(&path).to_owned(),
        };
        if !query.filters.iter().all(|f| f.members.contains(&member(f.level))) {
            continue;
        }
        currencies.insert(path.currency.clone());
        let row: Key = query.row_levels.iter().map(|l| member(*l)).collect();
        let col: Key = query.col_levels.iter().map(|l| member(*l)).collect();
        let v = i128::from(fact.amount(query.measure));
        *cells.entry((row.clone(), col.clone())).or_default().entry(fact.value_date).or_default() += v;
        *rows.entry(row).or_default().entry(fact.value_date).or_default() += v;
        *cols.entry(col).or_default().entry(fact.value_date).or_default() += v;
        *grand.entry(fact.value_date).or_default() += v;
    }

    let currency = if query.measure.is_original_currency() {
        if currencies.len() > 1 {
            return Err(CubeError::MixedCurrency {
                measure: query.measure,
                currencies: currencies.iter().map(|c| c.to_string()).collect(),
            });
        }
        currencies.into_iter().next()
    } else {
        Some(CurrencyCode::eur())
    };

    let mut result = PivotResult::empty(query);
    result.currency = currency;
    if grand.is_empty() {
        return Ok(result);
    }
    let value = |sums: &DaySums| -> Option<i64> {
        match query.time_aggregator {
            Aggregator::SumClosing => sums.values().next_back().map(|v| *v as i64),
            Aggregator::Average => {
                let n = sums.len() as i128;
                (n > 0).then(|| round_half_even(sums.values().sum(), n))
            }
        }
    };
    result.row_headers = rows.keys().cloned().collect();
    result.col_headers = cols.keys().cloned().collect();
    result.cells = result
        .row_headers
        .iter()
        .map(|r| {
            result
                .col_headers
                .iter()
                .map(|c| cells.get(&(r.clone(), c.clone())).and_then(value))
                .collect()
        })
        .collect();
    result.row_totals = rows.values().map(value).collect();
    result.col_totals = cols.values().map(value).collect();
    result.grand_total = value(&grand);
    Ok(result)
}

fn lookup_path(dims: &Dimensions, account: &str) -> Option<AccountPath> {
    let acc = dims.accounts.iter().find(|a| a.account_id.as_str() == account)?;
    let company = dims.companies.iter().find(|c| c.company_id == acc.company_id)?;
    let bank = dims.banks.iter().find(|b| b.bank_id == acc.bank_id)?;
    Some(AccountPath {
        account: acc.account_id.clone(),
        company: company.company_id.clone(),
        company_country: company.country_code.clone(),
        bank: bank.bank_id.clone(),
        bank_country: bank.country_code.clone(),
        currency: acc.currency_code.clone(),
    })
}

/// Quotient of `num / den` (den > 0) rounded to the nearest integer, ties to
/// even, computed from the floor quotient and remainder.
fn round_half_even(num: i128, den: i128) -> i64 {
    let q = num.div_euclid(den);
    let r = num.rem_euclid(den);
    let q = match (2 * r).cmp(&den) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => q + (q & 1),
    };
    q as i64
}
