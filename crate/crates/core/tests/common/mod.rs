#![allow(dead_code)]

use std::path::{Path, PathBuf};

use balcube::etl::{run_etl, EtlConfig, EtlOutcome};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Copies the fixture into a fresh directory so runs can write facts.csv.
pub fn fixture_copy() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(fixture_dir()).unwrap() {
        let entry = entry.unwrap();
        std::fs::copy(entry.path(), dir.path().join(entry.file_name())).unwrap();
    }
    dir
}

pub fn run_fixture(dir: &Path) -> EtlOutcome {
    run_etl(&EtlConfig::in_dir(dir)).unwrap()
}

pub fn d(s: &str) -> chrono::NaiveDate {
    s.parse().unwrap()
}

use balcube::{Aggregator, Filter, Level, Measure, PivotQuery, TimeGrain, TimeRange};

/// Query suite for cube/reference comparison on the fixture: every grain and
/// aggregator crossed with single-level axis choices, optional filters and
/// two time ranges.
pub fn enumerate_queries() -> Vec<PivotQuery> {
    let account_levels = [
        None,
        Some(Level::CompanyCountry),
        Some(Level::Company),
        Some(Level::BankCountry),
        Some(Level::Bank),
        Some(Level::Currency),
        Some(Level::Account),
    ];
    let filters: Vec<Option<Filter>> = vec![
        None,
        Some(Filter::new(Level::Bank, ["B1"])),
        Some(Filter::new(Level::Currency, ["USD"])),
        Some(Filter::new(Level::Month, ["2016-01"])),
        Some(Filter::new(Level::Account, ["A1", "A3"])),
    ];
    let ranges = [
        TimeRange::new(d("2015-12-01"), d("2016-01-31")),
        TimeRange::new(d("2015-12-08"), d("2016-01-17")),
    ];
    let mut out = Vec::new();
    for grain in TimeGrain::ALL {
        for agg in [Aggregator::SumClosing, Aggregator::Average] {
            for (ri, range) in ranges.iter().enumerate() {
                for row in account_levels {
                    for time_on_cols in [false, true] {
                        for (fi, filter) in filters.iter().enumerate() {
                            // the narrow range only with the first two filters, to bound the suite
                            if ri == 1 && fi > 1 {
                                continue;
                            }
                            let measure = match (fi + row.map_or(0, |l| l as usize)) % 4 {
                                0 => Measure::BalanceEur,
                                1 => Measure::WorkingEur,
                                2 => Measure::BalanceOrig,
                                _ => Measure::WorkingOrig,
                            };
                            let time = Level::from_grain(grain);
                            out.push(PivotQuery {
                                measure,
                                time_aggregator: agg,
                                row_levels: row.into_iter().collect(),
                                col_levels: if time_on_cols { vec![time] } else { vec![] },
                                filters: filter.iter().cloned().collect(),
                                time_range: *range,
                                time_grain: grain,
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

use balcube::bench::{generate_dataset, GeneratorParams};
use balcube::etl::{clean_movements, read_movement_rows, read_opening_balances, CleanOptions, MovementKind};

/// Small generated dataset for property checks.
pub fn seeded_params(seed: u64) -> GeneratorParams {
    GeneratorParams {
        seed,
        n_companies: 2,
        n_banks: 3,
        n_accounts: 5,
        first_year: 2016,
        last_year: 2016,
        movements_per_account_day: 3.0,
        forecast_fraction: 0.3,
        currency_mix: vec![
            (balcube::CurrencyCode::eur(), 0.6),
            (balcube::CurrencyCode::new("USD").unwrap(), 0.4),
        ],
    }
}

pub fn seeded_copy(seed: u64) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    generate_dataset(&seeded_params(seed)).unwrap().write_to(dir.path()).unwrap();
    dir
}

/// Runs the ETL twice on the sources in `dir` and checks idempotence,
/// densification, conservation of actuals and the forecast decomposition.
pub fn check_etl_properties(dir: &Path) -> Result<String, String> {
    let config = EtlConfig::in_dir(dir);
    let first = run_etl(&config).map_err(|e| e.to_string())?;
    let second = run_etl(&config).map_err(|e| e.to_string())?;
    if second.report.facts_inserted != 0 || second.report.facts_updated != 0 {
        return Err(format!(
            "second run inserted {} and updated {}",
            second.report.facts_inserted, second.report.facts_updated
        ));
    }
    if first.store.digest() != second.store.digest() {
        return Err("store digest changed on the second run".into());
    }
    let expected = first.dimensions.accounts.len() * first.time_table.len();
    if first.store.len() != expected {
        return Err(format!("{} facts, expected {expected}", first.store.len()));
    }

    let raw = read_movement_rows(&std::fs::read(dir.join("movements.csv")).unwrap()).map_err(|e| e.to_string())?;
    let (movements, _) = clean_movements(&raw, &first.dimensions, &first.time_table, CleanOptions::default());
    let openings = read_opening_balances(&std::fs::read(dir.join("opening_balances.csv")).unwrap(), &first.dimensions)
        .map_err(|e| e.to_string())?;
    // per account and day: actual and forecast deltas, then running sums
    let days = first.time_table.len();
    let first_day = first.time_table.first_date();
    let mut checked = 0;
    for account in &first.dimensions.accounts {
        let mut actual = vec![0i64; days];
        let mut forecast = vec![0i64; days];
        for m in movements.iter().filter(|m| m.account_id == account.account_id) {
            let i = (m.value_date - first_day).num_days() as usize;
            match m.kind {
                MovementKind::Actual => actual[i] += m.amount.amount_minor,
                MovementKind::Forecast => forecast[i] += m.amount.amount_minor,
            }
        }
        for o in openings.iter().filter(|o| o.account_id == account.account_id) {
            actual[(o.as_of_date - first_day).num_days() as usize] += o.amount.amount_minor;
        }
        let (mut real, mut fc) = (0i64, 0i64);
        for (i, rec) in first.time_table.records().iter().enumerate() {
            real += actual[i];
            fc += forecast[i];
            let fact = first
                .store
                .get(rec.date, account.account_id.as_str())
                .ok_or_else(|| format!("missing fact {} {}", account.account_id, rec.date))?;
            if fact.balance_orig.amount_minor != real {
                return Err(format!("conservation broken for {} on {}", account.account_id, rec.date));
            }
            if fact.working_orig.amount_minor - fact.balance_orig.amount_minor != fc {
                return Err(format!("forecast decomposition broken for {} on {}", account.account_id, rec.date));
            }
            checked += 1;
        }
    }
    Ok(format!("{} facts checked", checked))
}
