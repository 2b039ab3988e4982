use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use thiserror::Error;

use crate::kv::{KvError, KvFile};
use crate::money::{format_minor, CurrencyCode, Rate};
use crate::time_dimension::{build_time_table, TimeError};

const COUNTRIES: [(&str, &str); 6] = [
    ("PT", "Portugal"),
    ("ES", "Spain"),
    ("FR", "France"),
    ("DE", "Germany"),
    ("GB", "United Kingdom"),
    ("US", "United States"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub seed: u64,
    pub n_companies: usize,
    pub n_banks: usize,
    pub n_accounts: usize,
    pub first_year: i32,
    pub last_year: i32,
    /// Mean of the Poisson draw of movements per account and day.
    pub movements_per_account_day: f64,
    pub forecast_fraction: f64,
    pub currency_mix: Vec<(CurrencyCode, f64)>,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            seed: 42,
            n_companies: 6,
            n_banks: 5,
            n_accounts: 50,
            first_year: 2014,
            last_year: 2016,
            movements_per_account_day: 20.0,
            forecast_fraction: 0.1,
            currency_mix: vec![
                (CurrencyCode::eur(), 0.7),
                (CurrencyCode::new("USD").expect("valid"), 0.2),
                (CurrencyCode::new("GBP").expect("valid"), 0.1),
            ],
        }
    }
}

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("invalid generator parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Config(#[from] KvError),
    #[error(transparent)]
    Time(#[from] TimeError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) const GENERATOR_KEYS: [&str; 9] = [
    "seed",
    "n_companies",
    "n_banks",
    "n_accounts",
    "first_year",
    "last_year",
    "movements_per_account_day",
    "forecast_fraction",
    "currency_mix",
];

impl GeneratorParams {
    /// Reads the generator keys of a flat config; absent keys keep defaults.
    /// `currency_mix` is written as `EUR:0.7,USD:0.3`.
    pub fn from_kv(kv: &KvFile) -> Result<Self, GeneratorError> {
        let d = Self::default();
        let currency_mix = match kv.get("currency_mix") {
            None => d.currency_mix,
            Some(text) => parse_mix(text)?,
        };
        let params = Self {
            seed: kv.parse_or("seed", d.seed)?,
            n_companies: kv.parse_or("n_companies", d.n_companies)?,
            n_banks: kv.parse_or("n_banks", d.n_banks)?,
            n_accounts: kv.parse_or("n_accounts", d.n_accounts)?,
            first_year: kv.parse_or("first_year", d.first_year)?,
            last_year: kv.parse_or("last_year", d.last_year)?,
            movements_per_account_day: kv.parse_or("movements_per_account_day", d.movements_per_account_day)?,
            forecast_fraction: kv.parse_or("forecast_fraction", d.forecast_fraction)?,
            currency_mix,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        let bad = |m: &str| Err(GeneratorError::Params(m.to_owned()));
        if self.first_year > self.last_year {
            return bad("first_year is after last_year");
        }
        if !(0.0..=1.0).contains(&self.forecast_fraction) {
            return bad("forecast_fraction must be within [0, 1]");
        }
        if !(self.movements_per_account_day.is_finite() && self.movements_per_account_day >= 0.0) {
            return bad("movements_per_account_day must be a non-negative number");
        }
        if self.n_accounts > 0 {
            if self.n_companies == 0 || self.n_banks == 0 {
                return bad("accounts need at least one company and one bank");
            }
            if self.currency_mix.is_empty()
                || self.currency_mix.iter().any(|(_, w)| !(w.is_finite() && *w >= 0.0))
                || self.currency_mix.iter().map(|(_, w)| w).sum::<f64>() <= 0.0
            {
                return bad("currency_mix needs non-negative weights with a positive sum");
            }
        }
        Ok(())
    }

    pub fn first_day(&self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.first_year, 1, 1).expect("valid year")
    }

    pub fn last_day(&self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.last_year, 12, 31).expect("valid year")
    }
}

fn parse_mix(text: &str) -> Result<Vec<(CurrencyCode, f64)>, GeneratorError> {
    text.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|part| {
            let (code, weight) = part
                .split_once(':')
                .ok_or_else(|| GeneratorError::Params(format!("currency_mix entry `{part}` lacks `:weight`")))?;
            let code = CurrencyCode::new(code.trim()).map_err(|e| GeneratorError::Params(e.to_string()))?;
            let weight = weight
                .trim()
                .parse()
                .map_err(|_| GeneratorError::Params(format!("bad weight in `{part}`")))?;
            Ok((code, weight))
        })
        .collect()
}

/// A full set of source files for the ETL.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedDataset {
    /// File name to contents.
    pub files: BTreeMap<&'static str, String>,
    pub movement_count: usize,
    pub forecast_count: usize,
}

impl GeneratedDataset {
    pub fn write_to(&self, dir: &Path) -> Result<(), GeneratorError> {
        std::fs::create_dir_all(dir).map_err(|source| GeneratorError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        for (name, body) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|source| GeneratorError::Io {
                path: path.display().to_string(),
                source,
            })?;
        }
        Ok(())
    }
}

/// Deterministic synthetic treasury data: the same parameters always give
/// byte-identical files.
pub fn generate_dataset(params: &GeneratorParams) -> Result<GeneratedDataset, GeneratorError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let table = build_time_table(params.first_year, params.last_year)?;
    let first = table.first_date();
    let mut files = BTreeMap::new();

    let mut countries = String::from("country_code,name\n");
    for (code, name) in COUNTRIES {
        writeln!(countries, "{code},{name}").expect("string write");
    }

    let mut currency_codes: Vec<CurrencyCode> = vec![CurrencyCode::eur()];
    for (c, _) in &params.currency_mix {
        if !currency_codes.contains(c) {
            currency_codes.push(c.clone());
        }
    }
    let mut currencies = String::from("currency_code,name\n");
    for c in &currency_codes {
        writeln!(currencies, "{c},{c}").expect("string write");
    }

    let mut companies = String::from("company_id,name,country_code\n");
    for i in 1..=params.n_companies {
        let country = COUNTRIES[rng.random_range(0..COUNTRIES.len())].0;
        writeln!(companies, "C{i:02},Company {i},{country}").expect("string write");
    }
    let mut banks = String::from("bank_id,name,country_code\n");
    for i in 1..=params.n_banks {
        let country = COUNTRIES[rng.random_range(0..COUNTRIES.len())].0;
        writeln!(banks, "B{i:02},Bank {i},{country}").expect("string write");
    }

    let mut accounts = String::from("account_id,company_id,bank_id,currency_code,label\n");
    let mut account_rows: Vec<(String, CurrencyCode)> = Vec::with_capacity(params.n_accounts);
    if params.n_accounts > 0 {
        let weights = WeightedIndex::new(params.currency_mix.iter().map(|(_, w)| *w))
            .map_err(|e| GeneratorError::Params(e.to_string()))?;
        for i in 1..=params.n_accounts {
            let company = rng.random_range(1..=params.n_companies);
            let bank = rng.random_range(1..=params.n_banks);
            let currency = params.currency_mix[weights.sample(&mut rng)].0.clone();
            let id = format!("A{i:03}");
            writeln!(accounts, "{id},C{company:02},B{bank:02},{currency},account {i}").expect("string write");
            account_rows.push((id, currency));
        }
    }

    let mut openings = String::from("account_id,as_of_date,amount,currency_code\n");
    for (id, currency) in &account_rows {
        let amount: i64 = rng.random_range(100_000..10_000_000);
        writeln!(openings, "{id},{first},{},{currency}", format_minor(amount)).expect("string write");
    }

    let mut rates = String::from("currency_code,rate_date,rate_to_eur\n");
    for c in currency_codes.iter().filter(|c| !c.is_eur()) {
        let mut micros: i64 = rng.random_range(500_000..1_500_000);
        for rec in table.records() {
            let day = rec.date;
            if day != first && matches!(day.weekday(), Weekday::Sat | Weekday::Sun) {
                continue;
            }
            let step: i64 = rng.random_range(-5_000..=5_000);
            micros = (micros + micros * step / 1_000_000).max(1);
            writeln!(rates, "{c},{day},{}", Rate::from_micros(micros).expect("positive")).expect("string write");
        }
    }

    let poisson = if params.movements_per_account_day > 0.0 {
        Some(Poisson::new(params.movements_per_account_day).map_err(|e| GeneratorError::Params(e.to_string()))?)
    } else {
        None
    };
    let mut movements = String::from("account_id,value_date,amount,currency_code,kind,description\n");
    let (mut seq, mut forecast_count) = (0usize, 0usize);
    for rec in table.records() {
        for (id, currency) in &account_rows {
            let n = poisson.as_ref().map_or(0, |p| p.sample(&mut rng) as usize);
            for _ in 0..n {
                let magnitude: i64 = rng.random_range(1..=500_000);
                let amount = if rng.random_bool(0.5) { magnitude } else { -magnitude };
                let forecast = rng.random_bool(params.forecast_fraction);
                forecast_count += usize::from(forecast);
                let kind = if forecast { "FORECAST" } else { "ACTUAL" };
                writeln!(
                    movements,
                    "{id},{},{},{currency},{kind},mv-{seq}",
                    rec.date,
                    format_minor(amount)
                )
                .expect("string write");
                seq += 1;
            }
        }
    }

    files.insert("countries.csv", countries);
    files.insert("currencies.csv", currencies);
    files.insert("companies.csv", companies);
    files.insert("banks.csv", banks);
    files.insert("accounts.csv", accounts);
    files.insert("opening_balances.csv", openings);
    files.insert("exchange_rates.csv", rates);
    files.insert("movements.csv", movements);
    files.insert("time_table.csv", table.to_csv_string());
    Ok(GeneratedDataset {
        files,
        movement_count: seq,
        forecast_count,
    })
}
