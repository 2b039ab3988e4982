mod common;

use balcube::cube::{transform_query, Axis, Hierarchy, OlapOp};
use balcube::{
    build_cube, query_pivot, reference_evaluator, Aggregator, Filter, Level, Measure, PivotQuery, TimeGrain,
    TimeRange,
};
use common::{d, enumerate_queries, fixture_copy, run_fixture};
use proptest::prelude::*;

#[test]
fn cube_equals_reference_on_enumerated_queries() {
    let dir = fixture_copy();
    let out = run_fixture(dir.path());
    let cube = build_cube(&out.store, &out.dimensions, &out.time_table).unwrap();
    let facts: Vec<_> = out.store.iter().cloned().collect();
    let mut compared = 0;
    for q in enumerate_queries() {
        let fast = query_pivot(&cube, &q);
        let slow = reference_evaluator(&facts, &out.dimensions, &out.time_table, &q);
        assert_eq!(fast, slow, "{q:?}");
        if fast.is_ok() {
            compared += 1;
        }
    }
    assert!(compared >= 200, "only {compared} successful queries");
}

/// Keeps the fixture directory alive alongside the ETL outcome.
struct Fixture(balcube::etl::EtlOutcome, #[allow(dead_code)] tempfile::TempDir);

fn cube_and_facts() -> (balcube::CubeSnapshot, Fixture) {
    let dir = fixture_copy();
    let out = run_fixture(dir.path());
    let cube = build_cube(&out.store, &out.dimensions, &out.time_table).unwrap();
    (cube, Fixture(out, dir))
}

fn base(measure: Measure, agg: Aggregator, rows: &[Level], cols: &[Level], grain: TimeGrain) -> PivotQuery {
    PivotQuery {
        measure,
        time_aggregator: agg,
        row_levels: rows.to_vec(),
        col_levels: cols.to_vec(),
        filters: vec![],
        time_range: TimeRange::new(d("2015-12-01"), d("2016-01-31")),
        time_grain: grain,
    }
}

#[test]
fn parent_cell_is_sum_of_children_under_closing() {
    let (cube, _keep) = cube_and_facts();
    for (parent, child) in [
        (Level::Bank, Level::Account),
        (Level::Company, Level::Account),
        (Level::Currency, Level::Account),
        (Level::CompanyCountry, Level::Company),
        (Level::BankCountry, Level::Bank),
    ] {
        let rows = query_pivot(
            &cube,
            &base(Measure::WorkingEur, Aggregator::SumClosing, &[parent, child], &[Level::Month], TimeGrain::Month),
        )
        .unwrap();
        let parents = query_pivot(
            &cube,
            &base(Measure::WorkingEur, Aggregator::SumClosing, &[parent], &[Level::Month], TimeGrain::Month),
        )
        .unwrap();
        for (pr, ph) in parents.row_headers.iter().enumerate() {
            for c in 0..parents.col_headers.len() {
                let sum: i64 = rows
                    .row_headers
                    .iter()
                    .enumerate()
                    .filter(|(_, h)| h[0] == ph[0])
                    .filter_map(|(r, _)| rows.cells[r][c])
                    .sum();
                assert_eq!(parents.cells[pr][c], Some(sum), "{parent}/{child}");
            }
        }
    }
}

#[test]
fn year_closing_equals_december_closing() {
    let (cube, _keep) = cube_and_facts();
    let year = query_pivot(
        &cube,
        &base(Measure::BalanceEur, Aggregator::SumClosing, &[Level::Account], &[Level::Year], TimeGrain::Year),
    )
    .unwrap();
    let month = query_pivot(
        &cube,
        &base(Measure::BalanceEur, Aggregator::SumClosing, &[Level::Account], &[Level::Month], TimeGrain::Month),
    )
    .unwrap();
    for a in ["A1", "A2", "A3"] {
        assert_eq!(year.cell(&[a], &["2015"]), month.cell(&[a], &["2015-12"]));
    }
}

#[test]
fn average_is_nearly_linear_across_accounts() {
    let (cube, _keep) = cube_and_facts();
    for grain in TimeGrain::ALL {
        let time = Level::from_grain(grain);
        let per = query_pivot(&cube, &base(Measure::BalanceEur, Aggregator::Average, &[Level::Account], &[time], grain))
            .unwrap();
        for (c, total) in per.col_totals.iter().enumerate() {
            let sum: i64 = per.cells.iter().filter_map(|row| row[c]).sum();
            let accounts = per.cells.iter().filter(|row| row[c].is_some()).count() as i64;
            assert!((total.unwrap() - sum).abs() <= accounts, "{grain}");
        }
    }
}

#[test]
fn rebuild_after_update_changes_only_affected_cells() {
    let dir = fixture_copy();
    let out = run_fixture(dir.path());
    let q = base(Measure::BalanceEur, Aggregator::SumClosing, &[Level::Account], &[Level::Day], TimeGrain::Day);
    let before = query_pivot(&build_cube(&out.store, &out.dimensions, &out.time_table).unwrap(), &q).unwrap();
    let mut facts: Vec<_> = out.store.iter().cloned().collect();
    let target = facts.iter_mut().find(|f| f.account_id.as_str() == "A3" && f.value_date == d("2016-01-05")).unwrap();
    target.balance_eur.amount_minor += 7;
    let store = balcube::FactStore::from_facts(facts).unwrap();
    let after = query_pivot(&build_cube(&store, &out.dimensions, &out.time_table).unwrap(), &q).unwrap();
    let mut diffs = Vec::new();
    for r in 0..before.row_headers.len() {
        for c in 0..before.col_headers.len() {
            if before.cells[r][c] != after.cells[r][c] {
                diffs.push((before.row_headers[r][0].clone(), before.col_headers[c][0].clone()));
            }
        }
    }
    assert_eq!(diffs, vec![("A3".to_owned(), "2016-01-05".to_owned())]);
}

fn level_strategy() -> impl Strategy<Value = Option<Level>> {
    prop_oneof![
        Just(None),
        Just(Some(Level::Bank)),
        Just(Some(Level::Account)),
        Just(Some(Level::Currency)),
        Just(Some(Level::CompanyCountry)),
    ]
}

fn query_strategy() -> impl Strategy<Value = PivotQuery> {
    (
        prop::sample::select(TimeGrain::ALL.to_vec()),
        prop::bool::ANY,
        level_strategy(),
        prop::bool::ANY,
        0u64..62,
        0u64..62,
        prop::sample::select(vec![Measure::BalanceEur, Measure::WorkingEur]),
    )
        .prop_map(|(grain, avg, row, time_on_rows, a, b, measure)| {
            let (lo, hi) = (a.min(b), a.max(b));
            let start = d("2015-12-01");
            let time = Level::from_grain(grain);
            let mut rows: Vec<Level> = row.into_iter().collect();
            let mut cols = vec![];
            if time_on_rows {
                rows.push(time);
            } else {
                cols.push(time);
            }
            PivotQuery {
                measure,
                time_aggregator: if avg { Aggregator::Average } else { Aggregator::SumClosing },
                row_levels: rows,
                col_levels: cols,
                filters: vec![],
                time_range: TimeRange::new(start + chrono::Days::new(lo), start + chrono::Days::new(hi)),
                time_grain: grain,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn swap_transposes(q in query_strategy()) {
        let (cube, _keep) = cube_and_facts();
        let r = query_pivot(&cube, &q).unwrap();
        let swapped = query_pivot(&cube, &transform_query(&q, &OlapOp::PivotSwap).unwrap()).unwrap();
        prop_assert_eq!(swapped, r.transposed());
    }

    #[test]
    fn slice_equals_prefiltered_oracle(q in query_strategy(), bank in prop::sample::select(vec!["B1", "B2"])) {
        let (cube, keep) = cube_and_facts();
        let out = &keep.0;
        let sliced = transform_query(&q, &OlapOp::Slice { level: Level::Bank, member: bank.to_owned() }).unwrap();
        let via_cube = query_pivot(&cube, &sliced).unwrap();
        let mut manual = q.clone();
        manual.filters.push(Filter::new(Level::Bank, [bank]));
        prop_assert_eq!(&via_cube, &query_pivot(&cube, &manual).unwrap());
        let bank_accounts: Vec<&str> = out.dimensions.accounts.iter()
            .filter(|a| a.bank_id.as_str() == bank)
            .map(|a| a.account_id.as_str())
            .collect();
        let rows: Vec<_> = out.store.iter().filter(|f| bank_accounts.contains(&f.account_id.as_str())).collect();
        let oracle = reference_evaluator(rows, &out.dimensions, &out.time_table, &q).unwrap();
        prop_assert_eq!(via_cube, oracle);
    }

    #[test]
    fn navigation_keeps_cube_and_oracle_equal(q in query_strategy(), ops in prop::collection::vec(0usize..6, 0..4)) {
        let (cube, keep) = cube_and_facts();
        let out = &keep.0;
        let facts: Vec<_> = out.store.iter().cloned().collect();
        let mut q = q;
        for op in ops {
            let op = match op {
                0 => OlapOp::RollUp { axis: Axis::Time, hierarchy: None },
                1 => OlapOp::DrillDown { axis: Axis::Time },
                2 => OlapOp::RollUp { axis: Axis::Rows, hierarchy: Some(Hierarchy::BankGeo) },
                3 => OlapOp::DrillDown { axis: Axis::Rows },
                4 => OlapOp::PivotSwap,
                _ => OlapOp::Dice { level: Level::Account, members: vec!["A1".into(), "A2".into()] },
            };
            if let Ok(next) = transform_query(&q, &op) {
                q = next;
            }
        }
        prop_assert_eq!(
            query_pivot(&cube, &q),
            reference_evaluator(&facts, &out.dimensions, &out.time_table, &q)
        );
    }
}
