use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{
    clean_movements, compute_daily_balances, convert_to_eur, densify_balances, read_exchange_rates,
    read_movement_rows, read_opening_balances, upsert_facts, CleanOptions, EtlError, EtlReport,
    ExchangeRate, OpeningBalance, RateBook, RawMovementRow,
};
use crate::kv::KvFile;
use crate::star_schema::{validate_star, DimensionSources, Dimensions};
use crate::store::FactStore;
use crate::time_dimension::TimeTable;

/// Full runs present every fact; incremental runs present new keys plus the
/// trailing revaluation window.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum RunMode {
    #[default]
    Full,
    Incremental,
}

impl FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(RunMode::Full),
            "incremental" => Ok(RunMode::Incremental),
            other => Err(format!("unknown run mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EtlOptions {
    pub revaluation_window_days: u32,
    pub reject_zero_amount: bool,
    pub mode: RunMode,
}

impl Default for EtlOptions {
    fn default() -> Self {
        Self {
            revaluation_window_days: 5,
            reject_zero_amount: false,
            mode: RunMode::Full,
        }
    }
}

/// Parsed source data of one run.
#[derive(Debug, Clone)]
pub struct EtlInputs {
    pub dimensions: Dimensions,
    pub time_table: TimeTable,
    pub movement_rows: Vec<RawMovementRow>,
    pub openings: Vec<OpeningBalance>,
    pub rates: Vec<ExchangeRate>,
}

impl EtlInputs {
    /// Parses the raw file contents.
    pub fn parse(
        dimensions: DimensionSources<'_>,
        time_table: &[u8],
        movements: &[u8],
        opening_balances: &[u8],
        exchange_rates: &[u8],
    ) -> Result<Self, EtlError> {
        let dimensions = Dimensions::parse(dimensions)?;
        let time_table = TimeTable::read_csv(time_table)?;
        let movement_rows = read_movement_rows(movements)?;
        let openings = read_opening_balances(opening_balances, &dimensions)?;
        let rates = read_exchange_rates(exchange_rates)?;
        Ok(Self {
            dimensions,
            time_table,
            movement_rows,
            openings,
            rates,
        })
    }
}

#[derive(Debug, Clone)]
pub struct EtlOutcome {
    pub report: EtlReport,
    pub dimensions: Dimensions,
    pub time_table: TimeTable,
    pub store: FactStore,
}

/// Runs every transformation against a copy of `store` and returns the new
/// store. `store` itself is never touched, so a failed run leaves it intact.
pub fn run_pipeline(inputs: &EtlInputs, store: &FactStore, options: &EtlOptions) -> Result<(FactStore, EtlReport), EtlError> {
    let dims = &inputs.dimensions;
    let table = &inputs.time_table;
    let report = validate_star(dims, store.iter(), table);
    if !report.is_valid() {
        return Err(EtlError::StarInvalid(report));
    }

    let (movements, rejected) = clean_movements(
        &inputs.movement_rows,
        dims,
        table,
        CleanOptions {
            reject_zero_amount: options.reject_zero_amount,
        },
    );
    let sparse = compute_daily_balances(&movements, &inputs.openings)?;
    let dense = densify_balances(&sparse, table, &dims.accounts, &inputs.openings)?;
    let rates = RateBook::new(inputs.rates.iter().cloned())?;
    let facts = convert_to_eur(&dense, &rates)?;

    let mut next = store.clone();
    let presented: Vec<_> = match options.mode {
        RunMode::Full => facts,
        RunMode::Incremental => {
            let anchor = rates.latest_date().unwrap_or_else(|| table.last_date());
            let cutoff = anchor - chrono::Days::new(u64::from(options.revaluation_window_days));
            facts
                .into_iter()
                .filter(|f| f.value_date >= cutoff || store.get(f.value_date, f.account_id.as_str()).is_none())
                .collect()
        }
    };
    let stats = upsert_facts(&mut next, presented);
    Ok((
        next,
        EtlReport {
            rows_read: inputs.movement_rows.len(),
            rows_rejected: rejected,
            balances_computed: dense.len(),
            facts_inserted: stats.inserted,
            facts_updated: stats.updated,
            facts_unchanged: stats.unchanged,
        },
    ))
}

/// Locations of every input plus run options.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EtlConfig {
    pub companies: PathBuf,
    pub banks: PathBuf,
    pub accounts: PathBuf,
    pub currencies: PathBuf,
    pub countries: PathBuf,
    pub movements: PathBuf,
    pub opening_balances: PathBuf,
    pub exchange_rates: PathBuf,
    pub time_table: PathBuf,
    pub fact_store: PathBuf,
    pub options: EtlOptions,
}

const CONFIG_KEYS: [&str; 14] = [
    "data_dir",
    "companies",
    "banks",
    "accounts",
    "currencies",
    "countries",
    "movements",
    "opening_balances",
    "exchange_rates",
    "time_table",
    "fact_store",
    "revaluation_window_days",
    "reject_zero_amount",
    "mode",
];

impl EtlConfig {
    /// Standard file names inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            companies: dir.join("companies.csv"),
            banks: dir.join("banks.csv"),
            accounts: dir.join("accounts.csv"),
            currencies: dir.join("currencies.csv"),
            countries: dir.join("countries.csv"),
            movements: dir.join("movements.csv"),
            opening_balances: dir.join("opening_balances.csv"),
            exchange_rates: dir.join("exchange_rates.csv"),
            time_table: dir.join("time_table.csv"),
            fact_store: dir.join("facts.csv"),
            options: EtlOptions::default(),
        }
    }

    /// Builds a config from a flat key=value file. Relative paths resolve
    /// against `base_dir`; every file defaults to its standard name under
    /// `data_dir` (itself defaulting to `base_dir`).
    pub fn from_kv(kv: &KvFile, base_dir: &Path) -> Result<Self, EtlError> {
        kv.reject_unknown(&CONFIG_KEYS)?;
        let data_dir = base_dir.join(kv.get("data_dir").unwrap_or("."));
        let mut config = Self::in_dir(&data_dir);
        for (key, slot) in [
            ("companies", &mut config.companies),
            ("banks", &mut config.banks),
            ("accounts", &mut config.accounts),
            ("currencies", &mut config.currencies),
            ("countries", &mut config.countries),
            ("movements", &mut config.movements),
            ("opening_balances", &mut config.opening_balances),
            ("exchange_rates", &mut config.exchange_rates),
            ("time_table", &mut config.time_table),
            ("fact_store", &mut config.fact_store),
        ] {
            if let Some(p) = kv.get(key) {
                *slot = base_dir.join(p);
            }
        }
        let defaults = EtlOptions::default();
        config.options = EtlOptions {
            revaluation_window_days: kv.parse_or("revaluation_window_days", defaults.revaluation_window_days)?,
            reject_zero_amount: kv.parse_or("reject_zero_amount", defaults.reject_zero_amount)?,
            mode: kv.parse_or("mode", defaults.mode)?,
        };
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, EtlError> {
        let kv = KvFile::read(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_kv(&kv, base)
    }

    fn read(path: &Path) -> Result<Vec<u8>, EtlError> {
        std::fs::read(path).map_err(|source| EtlError::MissingFile {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read_dimensions(&self) -> Result<Dimensions, EtlError> {
        let companies = Self::read(&self.companies)?;
        let banks = Self::read(&self.banks)?;
        let accounts = Self::read(&self.accounts)?;
        let currencies = Self::read(&self.currencies)?;
        let countries = Self::read(&self.countries)?;
        Ok(Dimensions::parse(DimensionSources {
            companies: &companies,
            banks: &banks,
            accounts: &accounts,
            currencies: &currencies,
            countries: &countries,
        })?)
    }

    pub fn read_time_table(&self) -> Result<TimeTable, EtlError> {
        Ok(TimeTable::read_csv(Self::read(&self.time_table)?.as_slice())?)
    }

    /// Reads and parses every source file.
    pub fn read_inputs(&self) -> Result<EtlInputs, EtlError> {
        let dimensions = self.read_dimensions()?;
        let time_table = self.read_time_table()?;
        let movement_rows = read_movement_rows(&Self::read(&self.movements)?)?;
        let openings = read_opening_balances(&Self::read(&self.opening_balances)?, &dimensions)?;
        let rates = read_exchange_rates(&Self::read(&self.exchange_rates)?)?;
        Ok(EtlInputs {
            dimensions,
            time_table,
            movement_rows,
            openings,
            rates,
        })
    }
}

/// Loads sources and the committed store, runs the pipeline and commits the
/// new store atomically. On error nothing is written.
pub fn run_etl(config: &EtlConfig) -> Result<EtlOutcome, EtlError> {
    let inputs = config.read_inputs()?;
    let current = FactStore::load(&config.fact_store, &inputs.dimensions)?;
    let (store, report) = run_pipeline(&inputs, &current, &config.options)?;
    store.save(&config.fact_store)?;
    Ok(EtlOutcome {
        report,
        dimensions: inputs.dimensions,
        time_table: inputs.time_table,
        store,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_resolution() {
        let kv = KvFile::parse("data_dir = data\nmovements = feeds/mv.csv\nrevaluation_window_days = 3\nmode = incremental\n").unwrap();
        let cfg = EtlConfig::from_kv(&kv, Path::new("/etc/dw")).unwrap();
        assert_eq!(cfg.companies, Path::new("/etc/dw/data/companies.csv"));
        assert_eq!(cfg.movements, Path::new("/etc/dw/feeds/mv.csv"));
        assert_eq!(cfg.fact_store, Path::new("/etc/dw/data/facts.csv"));
        assert_eq!(cfg.options.revaluation_window_days, 3);
        assert_eq!(cfg.options.mode, RunMode::Incremental);
        assert!(!cfg.options.reject_zero_amount);
        assert!(EtlConfig::from_kv(&KvFile::parse("movemnts = x").unwrap(), Path::new(".")).is_err());
    }

    #[test]
    fn missing_file_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let err = run_etl(&EtlConfig::in_dir(dir.path())).unwrap_err();
        assert!(matches!(err, EtlError::MissingFile { .. }));
        assert!(err.to_string().contains("companies.csv"));
    }
}
