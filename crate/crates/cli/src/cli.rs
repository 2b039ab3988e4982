//! Command-line entry points.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use balcube::bench::{generate_dataset, run_bench, write_report, BenchConfig, GeneratorParams, Locale};
use balcube::etl::{run_etl, EtlConfig, RunMode};
use balcube::kv::KvFile;
use balcube::time_dimension::TimeTable;
use balcube::warehouse::Warehouse;
use balcube::{
    build_time_table, extend_time_table, query_pivot, Aggregator, Filter, Level, Measure, PivotQuery, TimeGrain,
    TimeRange,
};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::service::{self, parse_query, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "balcube", version, about = "Daily treasury balance warehouse with an OLAP pivot engine")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a time table, or extend an existing one to a later year
    Timegen(TimegenArgs),
    /// Load the source files into the fact store
    Etl(EtlArgs),
    /// Answer one pivot query from the committed fact store
    Query(QueryArgs),
    /// Time the cube against the naive workflow and write the report
    Bench(BenchArgs),
    /// Serve the HTTP/JSON query API
    Serve(ServeArgs),
    /// Write a synthetic source dataset with its time table
    Generate(GenerateArgs),
}

/// Where the sources and the fact store live.
#[derive(Debug, Args)]
struct Source {
    /// ETL config file (`key = value` lines)
    #[arg(long, conflicts_with = "data_dir")]
    config: Option<PathBuf>,
    /// Directory with the standard file names [default: .]
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

impl Source {
    fn etl_config(&self) -> Result<EtlConfig> {
        Ok(match (&self.config, &self.data_dir) {
            (Some(path), _) => EtlConfig::load(path)?,
            (None, dir) => EtlConfig::in_dir(dir.as_deref().unwrap_or(Path::new("."))),
        })
    }
}

#[derive(Debug, Args)]
struct TimegenArgs {
    /// First calendar year of a new table
    #[arg(long, required_unless_present = "extend", conflicts_with = "extend")]
    first: Option<i32>,
    /// Last calendar year
    #[arg(long)]
    last: i32,
    /// Existing table to extend up to --last
    #[arg(long, value_name = "TABLE")]
    extend: Option<PathBuf>,
    /// Output file [default: time_table.csv, or the extended table]
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EtlArgs {
    #[command(flatten)]
    source: Source,
    /// full or incremental; overrides the config
    #[arg(long)]
    mode: Option<RunMode>,
    /// Print the report as JSON
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Csv,
}

const LEVEL_HELP: &str = "Levels: year, semester, quarter, month, day, iso_year, week, \
company_country, company, bank_country, bank, currency, account";

#[derive(Debug, Args)]
#[command(after_help = LEVEL_HELP)]
struct QueryArgs {
    #[command(flatten)]
    source: Source,
    /// JSON pivot request, as accepted by POST /api/pivot
    #[arg(long, value_name = "FILE", conflicts_with_all = ["rows", "cols", "filters", "from", "to", "grain"])]
    request: Option<PathBuf>,
    /// balance_eur, balance_orig, working_eur or working_orig
    #[arg(long, default_value = "balance_eur")]
    measure: Measure,
    /// SUM_CLOSING or AVERAGE
    #[arg(long, default_value = "SUM_CLOSING")]
    aggregator: Aggregator,
    /// Row levels, outermost first
    #[arg(long, value_delimiter = ',')]
    rows: Vec<Level>,
    /// Column levels, outermost first
    #[arg(long, value_delimiter = ',')]
    cols: Vec<Level>,
    /// Keep only some members: LEVEL=MEMBER[,MEMBER...] (repeatable)
    #[arg(long = "filter", value_name = "LEVEL=MEMBERS", value_parser = parse_filter)]
    filters: Vec<Filter>,
    /// First day [default: first day of the time table]
    #[arg(long)]
    from: Option<NaiveDate>,
    /// Last day [default: last day of the time table]
    #[arg(long)]
    to: Option<NaiveDate>,
    /// Time grain [default: grain of the time level on the axes, else day]
    #[arg(long)]
    grain: Option<TimeGrain>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

fn parse_filter(s: &str) -> Result<Filter, String> {
    let (level, members) = s.split_once('=').ok_or("expected LEVEL=MEMBER[,MEMBER...]")?;
    let level: Level = level.trim().parse().map_err(|e: balcube::CubeError| e.to_string())?;
    Ok(Filter::new(level, members.split(',').map(str::trim).filter(|m| !m.is_empty())))
}

impl QueryArgs {
    fn to_query(&self, table: &TimeTable) -> Result<PivotQuery> {
        if let Some(path) = &self.request {
            let body = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
            return parse_query(&body).map_err(|(field, msg)| {
                anyhow::anyhow!("{}: {}{msg}", path.display(), if field == "." { String::new() } else { format!("{field}: ") })
            });
        }
        let axis_grain = self.rows.iter().chain(&self.cols).find_map(|l| l.time_grain());
        Ok(PivotQuery {
            measure: self.measure,
            time_aggregator: self.aggregator,
            row_levels: self.rows.clone(),
            col_levels: self.cols.clone(),
            filters: self.filters.clone(),
            time_range: TimeRange::new(
                self.from.unwrap_or(table.first_date()),
                self.to.unwrap_or(table.last_date()),
            ),
            time_grain: self.grain.or(axis_grain).unwrap_or(TimeGrain::Day),
        })
    }
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Bench config file (generator keys, locale, report_dir, work_dir)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for bench_report.txt and bench_report.csv
    #[arg(long)]
    report_dir: Option<PathBuf>,
    /// Keep the generated dataset here instead of a temporary directory
    #[arg(long)]
    work_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Decimal separator of the text report: comma or dot
    #[arg(long)]
    locale: Option<Locale>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// Service config file
    #[arg(long)]
    config: PathBuf,
    /// Overrides `listen` from the config
    #[arg(long)]
    listen: Option<SocketAddr>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Output directory
    #[arg(long, short)]
    out: PathBuf,
    /// Config file with generator keys
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    accounts: Option<usize>,
    #[arg(long)]
    first_year: Option<i32>,
    #[arg(long)]
    last_year: Option<i32>,
}

/// Parses `args` and runs the subcommand. Bad flags exit with clap's usage
/// message; runtime failures print the error chain and exit with 1.
pub fn dispatch<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code().clamp(0, 255) as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Timegen(a) => timegen(a),
        Command::Etl(a) => etl(a),
        Command::Query(a) => query(a),
        Command::Bench(a) => bench(a),
        Command::Serve(a) => serve(a),
        Command::Generate(a) => generate(a),
    }
}

fn timegen(args: TimegenArgs) -> Result<()> {
    let (table, out) = match (&args.extend, args.first) {
        (Some(path), _) => {
            let current = TimeTable::load(path)?;
            (extend_time_table(&current, args.last)?, args.out.unwrap_or_else(|| path.clone()))
        }
        (None, Some(first)) => (
            build_time_table(first, args.last)?,
            args.out.unwrap_or_else(|| PathBuf::from("time_table.csv")),
        ),
        (None, None) => unreachable!("clap requires --first or --extend"),
    };
    table.save(&out)?;
    println!(
        "{}: {} days, {}..={}",
        out.display(),
        table.len(),
        table.first_date(),
        table.last_date()
    );
    Ok(())
}

fn etl(args: EtlArgs) -> Result<()> {
    let mut config = args.source.etl_config()?;
    if let Some(mode) = args.mode {
        config.options.mode = mode;
    }
    let outcome = run_etl(&config)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&outcome.report)?);
    } else {
        println!("{}", outcome.report);
        println!("fact store:        {} ({} facts)", config.fact_store.display(), outcome.store.len());
    }
    Ok(())
}

fn query(args: QueryArgs) -> Result<()> {
    let warehouse = Warehouse::open(args.source.etl_config()?)?;
    let snapshot = warehouse.current();
    let query = args.to_query(snapshot.time_table())?;
    let result = query_pivot(&snapshot.cube, &query)?;
    match args.format {
        Format::Csv => print!("{}", result.to_csv()),
        Format::Table => print!("{}", result.to_table()),
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => BenchConfig::load(path)?,
        None => BenchConfig::new(GeneratorParams::default(), PathBuf::from(".")),
    };
    if let Some(dir) = args.report_dir {
        config.report_dir = dir;
    }
    if let Some(dir) = args.work_dir {
        config.work_dir = Some(dir);
    }
    if let Some(seed) = args.seed {
        config.generator.seed = seed;
    }
    if let Some(locale) = args.locale {
        config.locale = locale;
    }
    let outcome = run_bench(&config)?;
    write_report(&config.report_dir, &outcome.rendered)?;
    print!("{}", outcome.rendered.text);
    eprintln!("report written to {}", config.report_dir.display());
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    let mut config = ServiceConfig::load(&args.config)?;
    if let Some(listen) = args.listen {
        config.listen = listen;
    }
    tokio::runtime::Runtime::new()?.block_on(service::serve(config))
}

fn generate(args: GenerateArgs) -> Result<()> {
    let mut params = match &args.config {
        Some(path) => GeneratorParams::from_kv(&KvFile::read(path)?)?,
        None => GeneratorParams::default(),
    };
    if let Some(v) = args.seed {
        params.seed = v;
    }
    if let Some(v) = args.accounts {
        params.n_accounts = v;
    }
    if let Some(v) = args.first_year {
        params.first_year = v;
    }
    if let Some(v) = args.last_year {
        params.last_year = v;
    }
    let dataset = generate_dataset(&params)?;
    dataset.write_to(&args.out)?;
    println!(
        "{}: {} movements ({} forecasts)",
        args.out.display(),
        dataset.movement_count,
        dataset.forecast_count
    );
    Ok(())
}
