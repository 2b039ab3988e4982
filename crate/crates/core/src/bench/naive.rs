//! The legacy workflow: recompute daily balances from raw movements for
//! every requested day, export them, re-import the export and aggregate it
//! with one full pass over the rows per pivot cell.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::time::Instant;

use chrono::NaiveDate;

use super::stats::{TimingSample, SAMPLE_RUNS};
use super::BenchError;
use crate::cube::{Aggregator, CubeError, Level, PivotQuery, PivotResult};
use crate::etl::{clean_movements, CleanOptions, EtlConfig, EtlError, MovementKind};
use crate::money::{convert_minor, div_round_half_even, format_minor, parse_minor, CurrencyCode, Rate};
use crate::star_schema::{AccountPath, Measure};
use crate::time_dimension::TimeTable;

#[derive(Debug, Clone, Copy)]
struct RawMove {
    account: u32,
    day: i32,
    amount: i64,
    forecast: bool,
}

/// Cleaned source data in a flat, unindexed form.
#[derive(Debug, Clone)]
pub struct RawDataset {
    time_table: TimeTable,
    paths: Vec<AccountPath>,
    /// Index into `currencies`, per account.
    account_currency: Vec<usize>,
    currencies: Vec<CurrencyCode>,
    movements: Vec<RawMove>,
    openings: Vec<(u32, i32, i64)>,
    rates: Vec<(usize, i32, Rate)>,
}

impl RawDataset {
    /// Reads and cleans the source files named by `config`.
    pub fn load(config: &EtlConfig) -> Result<Self, EtlError> {
        let inputs = config.read_inputs()?;
        let (movements, _) = clean_movements(
            &inputs.movement_rows,
            &inputs.dimensions,
            &inputs.time_table,
            CleanOptions {
                reject_zero_amount: config.options.reject_zero_amount,
            },
        );
        let paths: Vec<AccountPath> = inputs.dimensions.account_paths().into_values().collect();
        let account_ix: BTreeMap<&str, u32> =
            paths.iter().enumerate().map(|(i, p)| (p.account.as_str(), i as u32)).collect();
        let mut currencies: Vec<CurrencyCode> = Vec::new();
        let mut currency_ix = |c: &CurrencyCode| match currencies.iter().position(|x| x == c) {
            Some(i) => i,
            None => {
                currencies.push(c.clone());
                currencies.len() - 1
            }
        };
        let account_currency = paths.iter().map(|p| currency_ix(&p.currency)).collect();
        let first = inputs.time_table.first_date();
        let day = |d: NaiveDate| (d - first).num_days() as i32;
        let rates = inputs
            .rates
            .iter()
            .map(|r| (currency_ix(&r.currency_code), day(r.rate_date), r.rate_to_eur))
            .collect();
        let openings = inputs
            .openings
            .iter()
            .filter_map(|o| account_ix.get(o.account_id.as_str()).map(|&a| (a, day(o.as_of_date), o.amount.amount_minor)))
            .collect();
        let movements = movements
            .iter()
            .map(|m| RawMove {
                account: account_ix[m.account_id.as_str()],
                day: day(m.value_date),
                amount: m.amount.amount_minor,
                forecast: m.kind == MovementKind::Forecast,
            })
            .collect();
        Ok(Self {
            time_table: inputs.time_table,
            paths,
            account_currency,
            currencies,
            movements,
            openings,
            rates,
        })
    }

    pub fn movement_count(&self) -> usize {
        self.movements.len()
    }

    /// Number of FORECAST movements valued within `[from, to]`.
    pub fn forecast_count(&self, from: NaiveDate, to: NaiveDate) -> usize {
        let first = self.time_table.first_date();
        let (lo, hi) = ((from - first).num_days() as i32, (to - first).num_days() as i32);
        self.movements
            .iter()
            .filter(|m| m.forecast && (lo..=hi).contains(&m.day))
            .count()
    }

    fn in_scope_accounts(&self, query: &PivotQuery) -> Vec<u32> {
        (0..self.paths.len() as u32)
            .filter(|&a| {
                query
                    .filters
                    .iter()
                    .filter(|f| !f.level.is_time())
                    .all(|f| f.members.contains(f.level.account_label(&self.paths[a as usize])))
            })
            .collect()
    }

    fn in_scope_days(&self, query: &PivotQuery) -> Vec<i32> {
        let first = self.time_table.first_date();
        self.time_table
            .records()
            .iter()
            .filter(|r| query.time_range.contains(r.date))
            .filter(|r| {
                query
                    .filters
                    .iter()
                    .all(|f| f.level.time_grain().is_none_or(|g| f.members.contains(&r.label(g))))
            })
            .map(|r| (r.date - first).num_days() as i32)
            .collect()
    }
}

/// One exported balance line.
#[derive(Debug, Clone, Copy)]
struct BalanceLine {
    account: u32,
    day: i32,
    real: i64,
    working: i64,
    real_eur: i64,
    working_eur: i64,
}

/// Daily balances of the in-scope accounts for every in-scope day.
///
/// One pass over the movement history extracts the movements valued inside
/// the query range and the position at its start; each day's balance is
/// then re-summed from that extract, with no running total or index.
fn recompute_balances(raw: &RawDataset, query: &PivotQuery) -> Result<Vec<BalanceLine>, BenchError> {
    let accounts = raw.in_scope_accounts(query);
    let first = raw.time_table.first_date();
    let from = (query.time_range.from - first).num_days() as i32;
    let to = (query.time_range.to - first).num_days() as i32;
    let n = raw.paths.len();

    let mut start_real = vec![0i64; n];
    let mut start_forecast = vec![0i64; n];
    let mut extract: Vec<RawMove> = Vec::new();
    for &(a, d, amount) in &raw.openings {
        if d < from {
            start_real[a as usize] += amount;
        } else if d <= to {
            extract.push(RawMove {
                account: a,
                day: d,
                amount,
                forecast: false,
            });
        }
    }
    for m in &raw.movements {
        if m.day < from {
            if m.forecast {
                start_forecast[m.account as usize] += m.amount;
            } else {
                start_real[m.account as usize] += m.amount;
            }
        } else if m.day <= to {
            extract.push(*m);
        }
    }

    let mut out = Vec::new();
    for day in raw.in_scope_days(query) {
        let mut real = start_real.clone();
        let mut forecast = start_forecast.clone();
        for m in &extract {
            if m.day <= day {
                if m.forecast {
                    forecast[m.account as usize] += m.amount;
                } else {
                    real[m.account as usize] += m.amount;
                }
            }
        }
        let rates: Vec<Option<Rate>> = (0..raw.currencies.len())
            .map(|c| {
                if raw.currencies[c].is_eur() {
                    return Some(Rate::ONE);
                }
                raw.rates
                    .iter()
                    .filter(|(rc, rd, _)| *rc == c && *rd <= day)
                    .max_by_key(|(_, rd, _)| *rd)
                    .map(|(_, _, r)| *r)
            })
            .collect();
        for &a in &accounts {
            let c = raw.account_currency[a as usize];
            let rate = rates[c].ok_or_else(|| EtlError::NoRate {
                currency: raw.currencies[c].clone(),
                date: first + chrono::Days::new(day as u64),
            })?;
            let r = real[a as usize];
            let w = r + forecast[a as usize];
            out.push(BalanceLine {
                account: a,
                day,
                real: r,
                working: w,
                real_eur: convert_minor(r, rate),
                working_eur: convert_minor(w, rate),
            });
        }
    }
    Ok(out)
}

const EXPORT_HEADER: [&str; 6] = ["value_date", "account_id", "balance_orig", "balance_eur", "working_orig", "working_eur"];

fn export_csv(raw: &RawDataset, lines: &[BalanceLine]) -> String {
    let first = raw.time_table.first_date();
    let mut w = csv::Writer::from_writer(Vec::with_capacity(lines.len() * 64));
    w.write_record(EXPORT_HEADER).expect("in-memory write");
    for l in lines {
        let date = first + chrono::Days::new(l.day as u64);
        w.write_record([
            date.to_string(),
            raw.paths[l.account as usize].account.to_string(),
            format_minor(l.real),
            format_minor(l.real_eur),
            format_minor(l.working),
            format_minor(l.working_eur),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// A re-imported export row with its pivot key columns.
struct SheetRow {
    row_key: u32,
    col_key: u32,
    date: NaiveDate,
    value: i64,
}

fn import_and_aggregate(raw: &RawDataset, text: &str, query: &PivotQuery) -> Result<PivotResult, BenchError> {
    let account_ix: BTreeMap<&str, usize> =
        raw.paths.iter().enumerate().map(|(i, p)| (p.account.as_str(), i)).collect();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let column = match query.measure {
        Measure::BalanceOrig => 2,
        Measure::BalanceEur => 3,
        Measure::WorkingOrig => 4,
        Measure::WorkingEur => 5,
    };
    let mut row_keys: BTreeMap<Vec<String>, u32> = BTreeMap::new();
    let mut col_keys: BTreeMap<Vec<String>, u32> = BTreeMap::new();
    let mut currencies = BTreeSet::new();
    let mut sheet = Vec::new();
    let bad = |m: String| BenchError::Export(m);
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let date: NaiveDate = rec[0].parse().map_err(|_| bad(format!("bad date `{}`", &rec[0])))?;
        let a = *account_ix.get(&rec[1]).ok_or_else(|| bad(format!("unknown account `{}`", &rec[1])))?;
        let value = parse_minor(&rec[column]).map_err(|e| bad(e.to_string()))?;
        let path = &raw.paths[a];
        let record = raw.time_table.get(date).ok_or_else(|| bad(format!("date {date} not in calendar")))?;
        let label = |l: &Level| match l.time_grain() {
            Some(g) => record.label(g),
            None => l.account_label(path).to_owned(),
        };
        let rk: Vec<String> = query.row_levels.iter().map(label).collect();
        let ck: Vec<String> = query.col_levels.iter().map(label).collect();
        let next = row_keys.len() as u32;
        let row_key = *row_keys.entry(rk).or_insert(next);
        let next = col_keys.len() as u32;
        let col_key = *col_keys.entry(ck).or_insert(next);
        currencies.insert(path.currency.clone());
        sheet.push(SheetRow {
            row_key,
            col_key,
            date,
            value,
        });
    }

    let currency = if query.measure.is_original_currency() {
        if currencies.len() > 1 {
            return Err(CubeError::MixedCurrency {
                measure: query.measure,
                currencies: currencies.iter().map(|c| c.to_string()).collect(),
            }
            .into());
        }
        currencies.into_iter().next()
    } else {
        Some(CurrencyCode::eur())
    };
    let mut result = PivotResult::empty(query);
    result.currency = currency;
    if sheet.is_empty() {
        return Ok(result);
    }

    // first-seen ids to sorted positions
    let order = |keys: &BTreeMap<Vec<String>, u32>| {
        let mut pos = vec![0u32; keys.len()];
        for (i, id) in keys.values().enumerate() {
            pos[*id as usize] = i as u32;
        }
        pos
    };
    let (row_pos, col_pos) = (order(&row_keys), order(&col_keys));
    for r in &mut sheet {
        r.row_key = row_pos[r.row_key as usize];
        r.col_key = col_pos[r.col_key as usize];
    }

    let agg = query.time_aggregator;
    let matching = |pred: &dyn Fn(&SheetRow) -> bool| aggregate_rows(sheet.iter().filter(|r| pred(r)), agg);
    let (nr, nc) = (row_keys.len() as u32, col_keys.len() as u32);
    result.cells = (0..nr)
        .map(|r| (0..nc).map(|c| matching(&|s| s.row_key == r && s.col_key == c)).collect())
        .collect();
    result.row_totals = (0..nr).map(|r| matching(&|s| s.row_key == r)).collect();
    result.col_totals = (0..nc).map(|c| matching(&|s| s.col_key == c)).collect();
    result.grand_total = matching(&|_| true);
    result.row_headers = row_keys.into_keys().collect();
    result.col_headers = col_keys.into_keys().collect();
    Ok(result)
}

fn aggregate_rows<'a>(rows: impl Iterator<Item = &'a SheetRow>, agg: Aggregator) -> Option<i64> {
    match agg {
        Aggregator::SumClosing => {
            let mut best: Option<(NaiveDate, i128)> = None;
            for r in rows {
                best = match best {
                    Some((d, s)) if d == r.date => Some((d, s + i128::from(r.value))),
                    Some((d, s)) if d > r.date => Some((d, s)),
                    _ => Some((r.date, i128::from(r.value))),
                };
            }
            best.map(|(_, s)| s as i64)
        }
        Aggregator::Average => {
            let mut days = HashSet::new();
            let mut total = 0i128;
            for r in rows {
                days.insert(r.date);
                total += i128::from(r.value);
            }
            (!days.is_empty()).then(|| div_round_half_even(total, days.len() as i128) as i64)
        }
    }
}

/// Timings of the two legacy phases and their run-wise total.
#[derive(Debug, Clone)]
pub struct NaiveTiming {
    pub phase1: TimingSample,
    pub phase2: TimingSample,
    pub total: TimingSample,
    pub result: PivotResult,
}

/// Runs the legacy workflow once untimed, then three timed times.
pub fn time_modality_naive(raw: &RawDataset, query: &PivotQuery) -> Result<NaiveTiming, BenchError> {
    query.validate(&raw.time_table)?;
    let run = || -> Result<(f64, f64, PivotResult), BenchError> {
        let t0 = Instant::now();
        let lines = recompute_balances(raw, query)?;
        let p1 = t0.elapsed();
        let t1 = Instant::now();
        let text = export_csv(raw, &lines);
        drop(lines);
        let result = import_and_aggregate(raw, &text, query)?;
        let p2 = t1.elapsed();
        Ok((p1.as_secs_f64() * 1000.0, p2.as_secs_f64() * 1000.0, result))
    };
    run()?;
    let mut p1 = Vec::with_capacity(SAMPLE_RUNS);
    let mut p2 = Vec::with_capacity(SAMPLE_RUNS);
    let mut last = None;
    for _ in 0..SAMPLE_RUNS {
        let (a, b, r) = run()?;
        p1.push(a);
        p2.push(b);
        last = Some(r);
    }
    let phase1 = TimingSample::new(&p1)?;
    let phase2 = TimingSample::new(&p2)?;
    Ok(NaiveTiming {
        total: phase1.plus(&phase2),
        phase1,
        phase2,
        result: last.expect("three runs"),
    })
}
