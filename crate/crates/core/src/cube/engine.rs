use std::collections::{BTreeMap, BTreeSet};

use super::{mean_half_even, Aggregator, CubeError, Level, Measure, PivotQuery, PivotResult, TimeGrain};
use crate::money::CurrencyCode;
use crate::star_schema::{validate_star, AccountPath, Dimensions};
use crate::store::FactStore;
use crate::time_dimension::TimeTable;

/// Members of one time grain: the group each day belongs to and the group
/// labels, in calendar order.
#[derive(Debug, Clone)]
struct GrainIndex {
    group_of_day: Vec<u32>,
    labels: Vec<String>,
}

impl GrainIndex {
    fn build(table: &TimeTable, grain: TimeGrain) -> Self {
        let mut group_of_day = Vec::with_capacity(table.len());
        let mut labels: Vec<String> = Vec::new();
        for rec in table.records() {
            let label = rec.label(grain);
            if labels.last() != Some(&label) {
                labels.push(label);
            }
            group_of_day.push((labels.len() - 1) as u32);
        }
        Self { group_of_day, labels }
    }
}

/// Per-account day series of one measure.
#[derive(Debug, Clone)]
struct Series {
    values: Vec<i64>,
    /// `prefix[i]` is the sum of `values[..i]`.
    prefix: Vec<i128>,
}

/// Immutable, indexed view of one committed fact store.
#[derive(Debug, Clone)]
pub struct CubeSnapshot {
    time_table: TimeTable,
    grains: Vec<(TimeGrain, GrainIndex)>,
    paths: Vec<AccountPath>,
    /// `series[measure][account]`
    series: Vec<Vec<Series>>,
    /// `present_prefix[account][i]`: number of facts among days `..i`.
    present_prefix: Vec<Vec<u32>>,
    /// `last_present[account][i]`: latest day `<= i` with a fact, or -1.
    last_present: Vec<Vec<i32>>,
    fact_count: usize,
}

/// Builds the cube over `store`. Fails when the star does not validate.
pub fn build_cube(store: &FactStore, dims: &Dimensions, time_table: &TimeTable) -> Result<CubeSnapshot, CubeError> {
    let report = validate_star(dims, store.iter(), time_table);
    if !report.is_valid() {
        return Err(CubeError::StarInvalid(report));
    }
    let paths: Vec<AccountPath> = dims.account_paths().into_values().collect();
    let n_days = time_table.len();
    let account_index: BTreeMap<&str, usize> =
        paths.iter().enumerate().map(|(i, p)| (p.account.as_str(), i)).collect();

    let mut values = vec![vec![vec![0i64; n_days]; paths.len()]; Measure::ALL.len()];
    let mut present = vec![vec![false; n_days]; paths.len()];
    for fact in store.iter() {
        let a = account_index[fact.account_id.as_str()];
        let d = time_table.index_of(fact.value_date).expect("validated date");
        present[a][d] = true;
        for (m, measure) in Measure::ALL.into_iter().enumerate() {
            values[m][a][d] = fact.amount(measure);
        }
    }

    let series = values
        .into_iter()
        .map(|per_account| {
            per_account
                .into_iter()
                .map(|values| {
                    let mut prefix = Vec::with_capacity(values.len() + 1);
                    let mut acc = 0i128;
                    prefix.push(0);
                    for v in &values {
                        acc += i128::from(*v);
                        prefix.push(acc);
                    }
                    Series { values, prefix }
                })
                .collect()
        })
        .collect();
    let mut present_prefix = Vec::with_capacity(paths.len());
    let mut last_present = Vec::with_capacity(paths.len());
    for flags in &present {
        let mut pp = Vec::with_capacity(n_days + 1);
        let mut lp = Vec::with_capacity(n_days);
        let (mut count, mut last) = (0u32, -1i32);
        pp.push(0);
        for (d, &p) in flags.iter().enumerate() {
            if p {
                count += 1;
                last = d as i32;
            }
            pp.push(count);
            lp.push(last);
        }
        present_prefix.push(pp);
        last_present.push(lp);
    }

    Ok(CubeSnapshot {
        grains: TimeGrain::ALL.into_iter().map(|g| (g, GrainIndex::build(time_table, g))).collect(),
        time_table: time_table.clone(),
        paths,
        series,
        present_prefix,
        last_present,
        fact_count: store.len(),
    })
}

/// Days of one time cell, as inclusive runs of day indexes.
struct TimeCell<'a> {
    label: &'a str,
    runs: Vec<(usize, usize)>,
}

impl CubeSnapshot {
    pub fn time_table(&self) -> &TimeTable {
        &self.time_table
    }

    pub fn fact_count(&self) -> usize {
        self.fact_count
    }

    pub fn accounts(&self) -> &[AccountPath] {
        &self.paths
    }

    /// All members of `level`, sorted. Time members cover the whole table.
    pub fn members(&self, level: Level) -> Vec<String> {
        match level.time_grain() {
            Some(g) => self.grain(g).labels.clone(),
            None => self
                .paths
                .iter()
                .map(|p| level.account_label(p).to_owned())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        }
    }

    fn grain(&self, grain: TimeGrain) -> &GrainIndex {
        &self.grains.iter().find(|(g, _)| *g == grain).expect("every grain indexed").1
    }

    fn present_in(&self, a: usize, runs: &[(usize, usize)]) -> bool {
        let pp = &self.present_prefix[a];
        runs.iter().any(|&(s, e)| pp[e + 1] > pp[s])
    }

    fn aggregate(&self, measure: Measure, agg: Aggregator, accounts: &[usize], runs: &[(usize, usize)]) -> Option<i64> {
        let series = &self.series[measure as usize];
        match agg {
            Aggregator::SumClosing => {
                let mut best = -1i32;
                for &a in accounts {
                    for &(s, e) in runs.iter().rev() {
                        let j = self.last_present[a][e];
                        if j >= s as i32 {
                            best = best.max(j);
                            break;
                        }
                    }
                }
                if best < 0 {
                    return None;
                }
                let d = best as usize;
                let total: i128 = accounts
                    .iter()
                    .filter(|&&a| self.last_present[a][d] == best)
                    .map(|&a| i128::from(series[a].values[d]))
                    .sum();
                Some(to_i64(total))
            }
            Aggregator::Average => {
                let mut total = 0i128;
                let mut days = 0i128;
                for &(s, e) in runs {
                    let len = (e + 1 - s) as u32;
                    let mut any = false;
                    let mut full = false;
                    for &a in accounts {
                        total += series[a].prefix[e + 1] - series[a].prefix[s];
                        let pp = &self.present_prefix[a];
                        let n = pp[e + 1] - pp[s];
                        any |= n > 0;
                        full |= n == len;
                    }
                    days += if full {
                        i128::from(len)
                    } else if !any {
                        0
                    } else {
                        (s..=e)
                            .filter(|&d| accounts.iter().any(|&a| self.last_present[a][d] == d as i32))
                            .count() as i128
                    };
                }
                (days > 0).then(|| mean_half_even(total, days))
            }
        }
    }
}

fn to_i64(v: i128) -> i64 {
    i64::try_from(v).expect("aggregate exceeds i64 minor units")
}

fn key<'c>(cube: &'c CubeSnapshot, levels: &[Level], a: usize, time_label: &'c str) -> Vec<&'c str> {
    levels
        .iter()
        .map(|l| if l.is_time() { time_label } else { l.account_label(&cube.paths[a]) })
        .collect()
}

#[derive(Default)]
struct Acc {
    accounts: BTreeSet<usize>,
    cells: BTreeSet<usize>,
}

impl Acc {
    fn add(&mut self, a: usize, t: usize) {
        self.accounts.insert(a);
        self.cells.insert(t);
    }
}

/// Answers `query` from the cube.
pub fn query_pivot(cube: &CubeSnapshot, query: &PivotQuery) -> Result<PivotResult, CubeError> {
    query.validate(&cube.time_table)?;
    let first = cube.time_table.index_of(query.time_range.from).expect("validated");
    let last = cube.time_table.index_of(query.time_range.to).expect("validated");

    let mut time_filters = Vec::new();
    let mut account_filters = Vec::new();
    for f in &query.filters {
        match f.level.time_grain() {
            Some(g) => {
                let index = cube.grain(g);
                let allowed: Vec<bool> = index.labels.iter().map(|l| f.members.contains(l)).collect();
                time_filters.push((index, allowed));
            }
            None => account_filters.push(f),
        }
    }

    let time_level = query.time_level();
    let grain = cube.grain(query.time_grain);
    let mut cells: Vec<TimeCell> = Vec::new();
    let mut last_group = u32::MAX;
    for d in first..=last {
        if !time_filters.iter().all(|(ix, ok)| ok[ix.group_of_day[d] as usize]) {
            continue;
        }
        let group = if time_level.is_some() { grain.group_of_day[d] } else { 0 };
        if cells.is_empty() || group != last_group {
            let label = if time_level.is_some() { grain.labels[group as usize].as_str() } else { "" };
            cells.push(TimeCell { label, runs: Vec::new() });
            last_group = group;
        }
        let runs = &mut cells.last_mut().expect("pushed").runs;
        match runs.last_mut() {
            Some((_, e)) if *e + 1 == d => *e = d,
            _ => runs.push((d, d)),
        }
    }

    let accounts: Vec<usize> = (0..cube.paths.len())
        .filter(|&a| {
            account_filters
                .iter()
                .all(|f| f.members.contains(f.level.account_label(&cube.paths[a])))
        })
        .collect();

    let currency = if query.measure.is_original_currency() {
        let all_runs: Vec<(usize, usize)> = cells.iter().flat_map(|c| c.runs.iter().copied()).collect();
        let used: BTreeSet<&CurrencyCode> = accounts
            .iter()
            .filter(|&&a| cube.present_in(a, &all_runs))
            .map(|&a| &cube.paths[a].currency)
            .collect();
        if used.len() > 1 {
            return Err(CubeError::MixedCurrency {
                measure: query.measure,
                currencies: used.iter().map(|c| c.to_string()).collect(),
            });
        }
        used.into_iter().next().cloned()
    } else {
        Some(CurrencyCode::eur())
    };

    let mut combos = Vec::new();
    for (t, cell) in cells.iter().enumerate() {
        for &a in &accounts {
            if cube.present_in(a, &cell.runs) {
                combos.push((
                    key(cube, &query.row_levels, a, cell.label),
                    key(cube, &query.col_levels, a, cell.label),
                    a,
                    t,
                ));
            }
        }
    }
    if combos.is_empty() {
        let mut empty = PivotResult::empty(query);
        empty.currency = currency;
        return Ok(empty);
    }

    let mut row_ix: BTreeMap<Vec<&str>, usize> = combos.iter().map(|c| (c.0.clone(), 0)).collect();
    let mut col_ix: BTreeMap<Vec<&str>, usize> = combos.iter().map(|c| (c.1.clone(), 0)).collect();
    for (i, v) in row_ix.values_mut().enumerate() {
        *v = i;
    }
    for (i, v) in col_ix.values_mut().enumerate() {
        *v = i;
    }
    let (nr, nc) = (row_ix.len(), col_ix.len());
    let mut grid: BTreeMap<(usize, usize), Acc> = BTreeMap::new();
    let mut rows: Vec<Acc> = (0..nr).map(|_| Acc::default()).collect();
    let mut cols: Vec<Acc> = (0..nc).map(|_| Acc::default()).collect();
    let mut grand = Acc::default();
    for (rk, ck, a, t) in &combos {
        let (r, c) = (row_ix[rk], col_ix[ck]);
        grid.entry((r, c)).or_default().add(*a, *t);
        rows[r].add(*a, *t);
        cols[c].add(*a, *t);
        grand.add(*a, *t);
    }

    let eval = |acc: &Acc| {
        let accounts: Vec<usize> = acc.accounts.iter().copied().collect();
        let runs: Vec<(usize, usize)> = acc.cells.iter().flat_map(|&t| cells[t].runs.iter().copied()).collect();
        cube.aggregate(query.measure, query.time_aggregator, &accounts, &runs)
    };
    let mut matrix = vec![vec![None; nc]; nr];
    for ((r, c), acc) in &grid {
        matrix[*r][*c] = eval(acc);
    }
    let owned = |m: BTreeMap<Vec<&str>, usize>| -> Vec<Vec<String>> {
        m.into_keys().map(|k| k.into_iter().map(str::to_owned).collect()).collect()
    };
    Ok(PivotResult {
        row_levels: query.row_levels.clone(),
        col_levels: query.col_levels.clone(),
        row_headers: owned(row_ix),
        col_headers: owned(col_ix),
        cells: matrix,
        row_totals: rows.iter().map(eval).collect(),
        col_totals: cols.iter().map(eval).collect(),
        grand_total: eval(&grand),
        currency,
    })
}
