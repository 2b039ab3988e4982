use std::collections::{BTreeMap, HashMap};

use super::{DailyBalance, EtlError, Movement, MovementKind, OpeningBalance};
use crate::money::MoneyMinor;
use crate::star_schema::{AccountId, AccountRecord};
use crate::time_dimension::TimeTable;

fn openings_by_account(openings: &[OpeningBalance]) -> Result<HashMap<&AccountId, &OpeningBalance>, EtlError> {
    let mut by_account = HashMap::with_capacity(openings.len());
    for o in openings {
        if by_account.insert(&o.account_id, o).is_some() {
            return Err(EtlError::DuplicateOpening(o.account_id.clone()));
        }
    }
    Ok(by_account)
}

/// Cumulative balances on each (account, date) that has at least one
/// movement, sorted by account then date.
///
/// `real` is the opening plus every ACTUAL amount up to the date; `working`
/// adds every FORECAST amount up to the date.
pub fn compute_daily_balances(
    movements: &[Movement],
    openings: &[OpeningBalance],
) -> Result<Vec<DailyBalance>, EtlError> {
    let openings = openings_by_account(openings)?;
    let mut by_account: BTreeMap<&AccountId, Vec<&Movement>> = BTreeMap::new();
    for m in movements {
        by_account.entry(&m.account_id).or_default().push(m);
    }

    let mut out = Vec::new();
    for (account, mut list) in by_account {
        list.sort_by_key(|m| m.value_date);
        let first = list[0];
        let opening = match openings.get(account) {
            Some(o) if o.as_of_date > first.value_date => {
                return Err(EtlError::OpeningAfterMovement {
                    account: account.clone(),
                    as_of: o.as_of_date,
                    first_movement: first.value_date,
                })
            }
            Some(o) => o.amount.amount_minor,
            None => 0,
        };
        let currency = &first.amount.currency;
        let mut actual = opening;
        let mut forecast = 0i64;
        let mut i = 0;
        while i < list.len() {
            let date = list[i].value_date;
            while i < list.len() && list[i].value_date == date {
                match list[i].kind {
                    MovementKind::Actual => actual += list[i].amount.amount_minor,
                    MovementKind::Forecast => forecast += list[i].amount.amount_minor,
                }
                i += 1;
            }
            out.push(DailyBalance {
                account_id: account.clone(),
                date,
                real: MoneyMinor::new(actual, currency.clone()),
                working: MoneyMinor::new(actual + forecast, currency.clone()),
            });
        }
    }
    Ok(out)
}

/// Expands sparse balances to one record per account and day of the time
/// table. Movement-free days carry the previous balance forward; days before
/// the first movement hold the opening balance once it is in effect, else 0.
/// Output is sorted by account then date.
pub fn densify_balances(
    sparse: &[DailyBalance],
    time_table: &TimeTable,
    accounts: &[AccountRecord],
    openings: &[OpeningBalance],
) -> Result<Vec<DailyBalance>, EtlError> {
    let openings = openings_by_account(openings)?;
    let slot: HashMap<&AccountId, usize> = accounts
        .iter()
        .enumerate()
        .map(|(i, a)| (&a.account_id, i))
        .collect();
    let days = time_table.len();
    // per account: day index -> (real, working)
    let mut activity: Vec<Vec<Option<(i64, i64)>>> = vec![Vec::new(); accounts.len()];
    for b in sparse {
        let &acc = slot
            .get(&b.account_id)
            .ok_or_else(|| EtlError::UnknownAccount(b.account_id.clone()))?;
        let day = time_table
            .index_of(b.date)
            .ok_or_else(|| EtlError::OutsideTimeTable {
                account: b.account_id.clone(),
                date: b.date,
            })?;
        let row = &mut activity[acc];
        if row.is_empty() {
            row.resize(days, None);
        }
        row[day] = Some((b.real.amount_minor, b.working.amount_minor));
    }

    let mut out = Vec::with_capacity(accounts.len() * days);
    for (acc, record) in accounts.iter().enumerate() {
        let opening = openings.get(&record.account_id);
        let currency = &record.currency_code;
        let mut current: Option<(i64, i64)> = None;
        for (day, time) in time_table.records().iter().enumerate() {
            if let Some(v) = activity[acc].get(day).copied().flatten() {
                current = Some(v);
            }
            let (real, working) = current.unwrap_or_else(|| match opening {
                Some(o) if o.as_of_date <= time.date => (o.amount.amount_minor, o.amount.amount_minor),
                _ => (0, 0),
            });
            out.push(DailyBalance {
                account_id: record.account_id.clone(),
                date: time.date,
                real: MoneyMinor::new(real, currency.clone()),
                working: MoneyMinor::new(working, currency.clone()),
            });
        }
    }
    Ok(out)
}
