//! Keyed fact store with a content digest and atomic file persistence.
//!
//! On disk the store is `facts.csv` (amounts as minor-unit integers) plus a
//! `facts.csv.sha256` sidecar holding the digest of the canonical
//! serialization.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::money::{CurrencyCode, MoneyMinor};
use crate::star_schema::{read_rows, AccountId, Dimensions, FactAccountBalance, StarError};

pub const FACTS_HEADER: [&str; 6] = [
    "value_date",
    "account_id",
    "balance_orig",
    "balance_eur",
    "working_orig",
    "working_eur",
];

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("duplicate fact key ({0}, {1})")]
    DuplicateKey(NaiveDate, AccountId),
    #[error("facts file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("digest mismatch for {path}: sidecar {expected}, content {actual}")]
    DigestMismatch {
        path: String,
        expected: String,
        actual: String,
    },
    #[error(transparent)]
    Csv(#[from] StarError),
    #[error("fact store I/O on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type FactKey = (NaiveDate, AccountId);

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FactStore {
    facts: BTreeMap<FactKey, FactAccountBalance>,
}

impl FactStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_facts(facts: impl IntoIterator<Item = FactAccountBalance>) -> Result<Self, StoreError> {
        let mut store = Self::new();
        for fact in facts {
            let key = fact.key();
            if store.facts.contains_key(&key) {
                return Err(StoreError::DuplicateKey(key.0, key.1));
            }
            store.facts.insert(key, fact);
        }
        Ok(store)
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn get(&self, date: NaiveDate, account: &str) -> Option<&FactAccountBalance> {
        self.facts.get(&(date, AccountId::from(account)))
    }

    /// Facts in key order: value date, then account.
    pub fn iter(&self) -> impl Iterator<Item = &FactAccountBalance> {
        self.facts.values()
    }

    pub(crate) fn entry(&mut self, key: FactKey) -> std::collections::btree_map::Entry<'_, FactKey, FactAccountBalance> {
        self.facts.entry(key)
    }

    /// Canonical CSV serialization, independent of insertion order.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.facts.len() * 48 + 64);
        out.push_str(&FACTS_HEADER.join(","));
        out.push('\n');
        for f in self.facts.values() {
            use std::fmt::Write as _;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                f.value_date.format("%Y-%m-%d"),
                f.account_id,
                f.balance_orig.amount_minor,
                f.balance_eur.amount_minor,
                f.working_orig.amount_minor,
                f.working_eur.amount_minor
            );
        }
        out
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_csv_string().as_bytes()))
    }

    /// Parses facts text; original currencies come from the accounts
    /// dimension.
    pub fn parse_csv(text: &[u8], dims: &Dimensions) -> Result<Self, StoreError> {
        let currencies: BTreeMap<&str, &CurrencyCode> = dims
            .accounts
            .iter()
            .map(|a| (a.account_id.as_str(), &a.currency_code))
            .collect();
        let eur = CurrencyCode::eur();
        let mut store = Self::new();
        for (line, row) in read_rows("facts.csv", text, &FACTS_HEADER)? {
            let err = |message: String| StoreError::Parse { line, message };
            let value_date = NaiveDate::parse_from_str(&row[0], "%Y-%m-%d")
                .map_err(|_| err(format!("bad date {:?}", row[0])))?;
            let currency = currencies
                .get(row[1].as_str())
                .ok_or_else(|| err(format!("unknown account {:?}", row[1])))?;
            let mut amounts = [0i64; 4];
            for (slot, text) in amounts.iter_mut().zip(&row[2..]) {
                *slot = text.parse().map_err(|_| err(format!("bad amount {text:?}")))?;
            }
            let fact = FactAccountBalance {
                value_date,
                account_id: AccountId::new(row[1].clone()),
                balance_orig: MoneyMinor::new(amounts[0], (*currency).clone()),
                balance_eur: MoneyMinor::new(amounts[1], eur.clone()),
                working_orig: MoneyMinor::new(amounts[2], (*currency).clone()),
                working_eur: MoneyMinor::new(amounts[3], eur.clone()),
            };
            let key = fact.key();
            if store.facts.insert(key.clone(), fact).is_some() {
                return Err(StoreError::DuplicateKey(key.0, key.1));
            }
        }
        Ok(store)
    }

    /// Loads `path` and checks it against its digest sidecar. A missing
    /// file is an empty store.
    pub fn load(path: &Path, dims: &Dimensions) -> Result<Self, StoreError> {
        let bytes = match std::fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Self::new()),
            Err(source) => return Err(io_err(path, source)),
        };
        let store = Self::parse_csv(&bytes, dims)?;
        let sidecar = digest_path(path);
        let expected = std::fs::read_to_string(&sidecar).map_err(|e| io_err(&sidecar, e))?;
        let expected = expected.trim();
        let actual = store.digest();
        if expected != actual {
            return Err(StoreError::DigestMismatch {
                path: path.display().to_string(),
                expected: expected.to_owned(),
                actual,
            });
        }
        Ok(store)
    }

    /// Writes facts and digest through temporary files renamed into place.
    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        let text = self.to_csv_string();
        let digest = hex::encode(Sha256::digest(text.as_bytes()));
        write_atomic(path, text.as_bytes())?;
        write_atomic(&digest_path(path), format!("{digest}\n").as_bytes())
    }
}

pub fn digest_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".sha256");
    path.with_file_name(name)
}

fn io_err(path: &Path, source: std::io::Error) -> StoreError {
    StoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(path, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}
