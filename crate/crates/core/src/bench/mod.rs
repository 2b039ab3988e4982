//! Benchmark harness: synthetic data, the two timed modalities and the
//! statistics comparing them.

mod generator;
mod naive;
mod report;
mod stats;

use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDate;
use thiserror::Error;

use crate::cube::{build_cube, query_pivot, Aggregator, CubeError, CubeSnapshot, Level, PivotQuery, PivotResult, TimeRange};
use crate::etl::{run_etl, EtlConfig, EtlError};
use crate::kv::{KvError, KvFile};
use crate::star_schema::Measure;
use crate::time_dimension::TimeGrain;

pub use generator::{generate_dataset, GeneratedDataset, GeneratorError, GeneratorParams};
pub use naive::{time_modality_naive, NaiveTiming, RawDataset};
pub use report::{format_number, render_report, BenchReport, Locale, RenderedReport, ScopeResult, UseCaseResult};
pub use stats::{
    pooled_t, summarize, time_benefit, BenchRow, StatsError, TTestResult, TimeBenefit, TimingSample, SAMPLE_RUNS,
    T_CRIT_95_DF4, T_CRIT_99_DF4,
};

pub const REPORT_TEXT_FILE: &str = "bench_report.txt";
pub const REPORT_CSV_FILE: &str = "bench_report.csv";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Etl(#[from] EtlError),
    #[error(transparent)]
    Cube(#[from] CubeError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Config(#[from] KvError),
    #[error("export round trip failed: {0}")]
    Export(String),
    #[error("modalities disagree on `{0}`")]
    ResultMismatch(String),
    #[error("the benchmark needs at least three years of data (got {first}..={last})")]
    TooFewYears { first: i32, last: i32 },
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Runs `query` once untimed, then three timed times.
pub fn time_modality_cube(cube: &CubeSnapshot, query: &PivotQuery) -> Result<(TimingSample, PivotResult), BenchError> {
    query_pivot(cube, query)?;
    let mut millis = Vec::with_capacity(SAMPLE_RUNS);
    let mut last = None;
    for _ in 0..SAMPLE_RUNS {
        let t = Instant::now();
        let r = query_pivot(cube, query)?;
        millis.push(t.elapsed().as_secs_f64() * 1000.0);
        last = Some(r);
    }
    Ok((TimingSample::new(&millis)?, last.expect("three runs")))
}

/// A named set of time scopes answered with the same query shape.
#[derive(Debug, Clone, PartialEq)]
pub struct UseCase {
    pub name: String,
    pub scopes: Vec<(String, PivotQuery)>,
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid date")
}

/// The two workloads on a dataset spanning `first_year..=last_year`.
///
/// Use case I looks ahead from December 31 of the year before `last_year`
/// at working (forecast-inclusive) balances per account and day. Use case
/// II looks back at average real balances per account and month.
pub fn use_cases(first_year: i32, last_year: i32) -> Result<Vec<UseCase>, BenchError> {
    if last_year - first_year < 2 {
        return Err(BenchError::TooFewYears {
            first: first_year,
            last: last_year,
        });
    }
    let estimated = |from, to| PivotQuery {
        measure: Measure::WorkingEur,
        time_aggregator: Aggregator::SumClosing,
        row_levels: vec![Level::Account],
        col_levels: vec![Level::Day],
        filters: vec![],
        time_range: TimeRange::new(from, to),
        time_grain: TimeGrain::Day,
    };
    let average = |from, to| PivotQuery {
        measure: Measure::BalanceEur,
        time_aggregator: Aggregator::Average,
        row_levels: vec![Level::Account],
        col_levels: vec![Level::Month],
        filters: vec![],
        time_range: TimeRange::new(from, to),
        time_grain: TimeGrain::Month,
    };
    Ok(vec![
        UseCase {
            name: "Use case I: estimated balances".into(),
            scopes: vec![
                ("next month".into(), estimated(ymd(last_year, 1, 1), ymd(last_year, 1, 31))),
                ("next year".into(), estimated(ymd(last_year, 1, 1), ymd(last_year, 12, 31))),
            ],
        },
        UseCase {
            name: "Use case II: average balances".into(),
            scopes: vec![
                ("last year".into(), average(ymd(last_year, 1, 1), ymd(last_year, 12, 31))),
                ("last 3 years".into(), average(ymd(last_year - 2, 1, 1), ymd(last_year, 12, 31))),
            ],
        },
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub generator: GeneratorParams,
    pub locale: Locale,
    /// Where the report files go.
    pub report_dir: PathBuf,
    /// Where the generated dataset and fact store go; a temporary directory
    /// when unset.
    pub work_dir: Option<PathBuf>,
}

impl BenchConfig {
    pub fn new(generator: GeneratorParams, report_dir: PathBuf) -> Self {
        Self {
            generator,
            locale: Locale::default(),
            report_dir,
            work_dir: None,
        }
    }

    /// Reads a flat config with the generator keys plus `locale`,
    /// `report_dir` and `work_dir`. Paths resolve against `base_dir`.
    pub fn from_kv(kv: &KvFile, base_dir: &Path) -> Result<Self, BenchError> {
        let mut known: Vec<&str> = generator::GENERATOR_KEYS.to_vec();
        known.extend(["locale", "report_dir", "work_dir"]);
        kv.reject_unknown(&known)?;
        Ok(Self {
            generator: GeneratorParams::from_kv(kv)?,
            locale: kv.parse_or("locale", Locale::default())?,
            report_dir: base_dir.join(kv.get("report_dir").unwrap_or(".")),
            work_dir: kv.get("work_dir").map(|p| base_dir.join(p)),
        })
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let kv = KvFile::read(path)?;
        Self::from_kv(&kv, path.parent().unwrap_or(Path::new(".")))
    }
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub report: BenchReport,
    pub rendered: RenderedReport,
}

/// Generates the dataset, loads it, times both modalities for every scope
/// and renders the report. Fails if the modalities ever disagree.
pub fn run_bench(config: &BenchConfig) -> Result<BenchOutcome, BenchError> {
    let params = &config.generator;
    let cases = use_cases(params.first_year, params.last_year)?;
    let temp;
    let work_dir = match &config.work_dir {
        Some(d) => d.clone(),
        None => {
            temp = tempfile::tempdir().map_err(|source| BenchError::Io {
                path: "temporary directory".into(),
                source,
            })?;
            temp.path().to_path_buf()
        }
    };
    let dataset = generate_dataset(params)?;
    dataset.write_to(&work_dir)?;
    let etl_config = EtlConfig::in_dir(&work_dir);
    // start from an empty store so reruns in the same directory are comparable
    let _ = std::fs::remove_file(&etl_config.fact_store);
    let outcome = run_etl(&etl_config)?;
    let cube = build_cube(&outcome.store, &outcome.dimensions, &outcome.time_table)?;
    drop(outcome);
    let raw = RawDataset::load(&etl_config)?;

    let mut use_case_results = Vec::new();
    for case in cases {
        let mut scopes = Vec::new();
        for (scope, query) in &case.scopes {
            let (cube_sample, cube_result) = time_modality_cube(&cube, query)?;
            let naive = time_modality_naive(&raw, query)?;
            if naive.result != cube_result {
                return Err(BenchError::ResultMismatch(format!("{} / {scope}", case.name)));
            }
            let cube_row = summarize("cube", &cube_sample);
            let total = summarize("total", &naive.total);
            let test = pooled_t(cube_row.mean, cube_row.std, SAMPLE_RUNS, total.mean, total.std, SAMPLE_RUNS)?;
            scopes.push(ScopeResult {
                scope: scope.clone(),
                forecasts: raw.forecast_count(query.time_range.from, query.time_range.to),
                benefit: time_benefit(cube_row.mean, total.mean),
                cube: cube_row,
                naive_phase1: summarize("get daily balances", &naive.phase1),
                naive_phase2: summarize("export and aggregate", &naive.phase2),
                naive_total: total,
                test,
            });
        }
        use_case_results.push(UseCaseResult {
            name: case.name,
            scopes,
        });
    }
    let report = BenchReport {
        seed: params.seed,
        dataset: format!(
            "{} accounts, {}..={}, {} movements",
            params.n_accounts,
            params.first_year,
            params.last_year,
            raw.movement_count()
        ),
        use_cases: use_case_results,
    };
    let rendered = render_report(&report, config.locale);
    Ok(BenchOutcome { report, rendered })
}

/// Writes `bench_report.txt` and `bench_report.csv` into `dir`.
pub fn write_report(dir: &Path, rendered: &RenderedReport) -> Result<(), BenchError> {
    std::fs::create_dir_all(dir).map_err(|source| BenchError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    for (name, body) in [(REPORT_TEXT_FILE, &rendered.text), (REPORT_CSV_FILE, &rendered.csv)] {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|source| BenchError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> GeneratorParams {
        GeneratorParams {
            n_accounts: 3,
            n_companies: 2,
            n_banks: 2,
            first_year: 2014,
            last_year: 2016,
            movements_per_account_day: 1.5,
            ..GeneratorParams::default()
        }
    }

    #[test]
    fn use_case_scopes() {
        let cases = use_cases(2014, 2016).unwrap();
        assert_eq!(cases[0].scopes[0].1.time_range, TimeRange::new(ymd(2016, 1, 1), ymd(2016, 1, 31)));
        assert_eq!(cases[1].scopes[1].1.time_range, TimeRange::new(ymd(2014, 1, 1), ymd(2016, 12, 31)));
        assert!(use_cases(2015, 2016).is_err());
    }

    #[test]
    fn modalities_agree_on_small_dataset() {
        let dir = tempfile::tempdir().unwrap();
        generate_dataset(&tiny()).unwrap().write_to(dir.path()).unwrap();
        let cfg = EtlConfig::in_dir(dir.path());
        let out = run_etl(&cfg).unwrap();
        let cube = build_cube(&out.store, &out.dimensions, &out.time_table).unwrap();
        let raw = RawDataset::load(&cfg).unwrap();
        for case in use_cases(2014, 2016).unwrap() {
            for (_, q) in &case.scopes {
                let (sample, r1) = time_modality_cube(&cube, q).unwrap();
                assert!(sample.millis().iter().all(|m| *m > 0.0 && m.is_finite()));
                let naive = time_modality_naive(&raw, q).unwrap();
                assert_eq!(naive.result, r1);
                assert_eq!(query_pivot(&cube, q).unwrap(), r1);
                for (t, (a, b)) in naive.total.millis().iter().zip(naive.phase1.millis().iter().zip(naive.phase2.millis())) {
                    assert!((t - (a + b)).abs() < 1e-9);
                }
            }
        }
        // other shapes, including filters and original-currency measures
        let mut q = use_cases(2014, 2016).unwrap()[1].scopes[0].1.clone();
        q.row_levels = vec![Level::Bank];
        q.col_levels = vec![Level::Quarter];
        q.time_grain = TimeGrain::Quarter;
        q.filters.push(crate::cube::Filter::new(Level::Month, ["2016-02", "2016-07"]));
        assert_eq!(time_modality_naive(&raw, &q).unwrap().result, query_pivot(&cube, &q).unwrap());
        q.measure = Measure::BalanceOrig;
        q.filters.push(crate::cube::Filter::new(Level::Currency, ["EUR"]));
        assert_eq!(time_modality_naive(&raw, &q).unwrap().result, query_pivot(&cube, &q).unwrap());
    }

    #[test]
    fn run_bench_small() {
        let report_dir = tempfile::tempdir().unwrap();
        let cfg = BenchConfig::new(tiny(), report_dir.path().to_path_buf());
        let out = run_bench(&cfg).unwrap();
        assert_eq!(out.report.use_cases.len(), 2);
        assert!(out.rendered.text.contains("seed: 42"));
        write_report(report_dir.path(), &out.rendered).unwrap();
        assert!(report_dir.path().join(REPORT_CSV_FILE).exists());
    }

    #[test]
    fn config_from_kv() {
        let kv = KvFile::parse("seed = 5\nlocale = dot\nreport_dir = out\n").unwrap();
        let cfg = BenchConfig::from_kv(&kv, Path::new("/tmp/x")).unwrap();
        assert_eq!(cfg.generator.seed, 5);
        assert_eq!(cfg.locale, Locale::Dot);
        assert_eq!(cfg.report_dir, Path::new("/tmp/x/out"));
        assert!(BenchConfig::from_kv(&KvFile::parse("sed = 5").unwrap(), Path::new(".")).is_err());
    }
}
