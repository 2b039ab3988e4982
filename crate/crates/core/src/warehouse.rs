//! Published snapshots of the warehouse.
//!
//! Readers grab the current [`Snapshot`] and keep using it for as long as
//! they like. A refresh runs the ETL and builds a new cube off to the side,
//! then swaps the pointer; readers never observe a half-built state.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock, TryLockError};

use thiserror::Error;

use crate::cube::{build_cube, CubeError, CubeSnapshot};
use crate::etl::{run_etl, EtlConfig, EtlError, EtlOutcome, EtlReport};
use crate::star_schema::Dimensions;
use crate::store::FactStore;
use crate::time_dimension::TimeTable;

#[derive(Debug)]
pub struct Snapshot {
    pub id: u64,
    pub dimensions: Dimensions,
    pub store: FactStore,
    pub digest: String,
    pub cube: CubeSnapshot,
}

impl Snapshot {
    pub fn build(id: u64, dimensions: Dimensions, time_table: &TimeTable, store: FactStore) -> Result<Self, WarehouseError> {
        let cube = build_cube(&store, &dimensions, time_table)?;
        Ok(Self {
            id,
            digest: store.digest(),
            dimensions,
            store,
            cube,
        })
    }

    pub fn time_table(&self) -> &TimeTable {
        self.cube.time_table()
    }
}

#[derive(Debug, Error)]
pub enum WarehouseError {
    #[error(transparent)]
    Etl(#[from] EtlError),
    #[error(transparent)]
    Cube(#[from] CubeError),
    #[error("a refresh is already running")]
    Busy,
}

pub type EtlRunner = Box<dyn Fn(&EtlConfig) -> Result<EtlOutcome, EtlError> + Send + Sync>;

pub struct Warehouse {
    config: EtlConfig,
    runner: EtlRunner,
    current: RwLock<Arc<Snapshot>>,
    last_id: AtomicU64,
    refreshing: Mutex<()>,
}

impl Warehouse {
    /// Serves the committed store as snapshot 1 without running the ETL.
    pub fn open(config: EtlConfig) -> Result<Self, WarehouseError> {
        Self::with_runner(config, Box::new(run_etl))
    }

    /// Like [`Warehouse::open`] with a custom ETL step for refreshes.
    pub fn with_runner(config: EtlConfig, runner: EtlRunner) -> Result<Self, WarehouseError> {
        let dimensions = config.read_dimensions()?;
        let time_table = config.read_time_table()?;
        let store = FactStore::load(&config.fact_store, &dimensions).map_err(EtlError::from)?;
        let snapshot = Snapshot::build(1, dimensions, &time_table, store)?;
        Ok(Self {
            config,
            runner,
            current: RwLock::new(Arc::new(snapshot)),
            last_id: AtomicU64::new(1),
            refreshing: Mutex::new(()),
        })
    }

    pub fn config(&self) -> &EtlConfig {
        &self.config
    }

    pub fn current(&self) -> Arc<Snapshot> {
        self.current.read().expect("snapshot lock poisoned").clone()
    }

    /// Runs the ETL and publishes a new snapshot. Fails with
    /// [`WarehouseError::Busy`] while another refresh is in flight; on any
    /// other failure the previous snapshot stays published.
    pub fn refresh(&self) -> Result<(Arc<Snapshot>, EtlReport), WarehouseError> {
        let _guard = match self.refreshing.try_lock() {
            Ok(g) => g,
            Err(TryLockError::WouldBlock) => return Err(WarehouseError::Busy),
            Err(TryLockError::Poisoned(p)) => p.into_inner(),
        };
        let outcome = (self.runner)(&self.config)?;
        let id = self.last_id.load(Ordering::SeqCst) + 1;
        let snapshot = Arc::new(Snapshot::build(id, outcome.dimensions, &outcome.time_table, outcome.store)?);
        *self.current.write().expect("snapshot lock poisoned") = snapshot.clone();
        self.last_id.store(id, Ordering::SeqCst);
        Ok((snapshot, outcome.report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::mpsc;
    use std::time::Duration;

    fn empty_dir() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        let files = [
            ("companies.csv", "company_id,name,country_code\nC1,Co,PT\n"),
            ("banks.csv", "bank_id,name,country_code\nB1,Bank,PT\n"),
            ("accounts.csv", "account_id,company_id,bank_id,currency_code,label\nA1,C1,B1,EUR,main\n"),
            ("currencies.csv", "currency_code,name\nEUR,Euro\n"),
            ("countries.csv", "country_code,name\nPT,Portugal\n"),
            ("movements.csv", "account_id,value_date,amount,currency_code,kind,description\nA1,2016-01-02,5.00,EUR,ACTUAL,x\n"),
            ("opening_balances.csv", "account_id,as_of_date,amount,currency_code\n"),
            ("exchange_rates.csv", "currency_code,rate_date,rate_to_eur\n"),
        ];
        for (name, body) in files {
            std::fs::write(dir.path().join(name), body).unwrap();
        }
        crate::time_dimension::build_time_table(2016, 2016)
            .unwrap()
            .save(&dir.path().join("time_table.csv"))
            .unwrap();
        dir
    }

    #[test]
    fn refresh_publishes_new_snapshot() {
        let dir = empty_dir();
        let wh = Warehouse::open(EtlConfig::in_dir(dir.path())).unwrap();
        assert_eq!(wh.current().id, 1);
        assert_eq!(wh.current().store.len(), 0);
        let (snap, report) = wh.refresh().unwrap();
        assert_eq!(snap.id, 2);
        assert_eq!(report.facts_inserted, 366);
        assert_eq!(wh.current().id, 2);
        let (snap, report) = wh.refresh().unwrap();
        assert_eq!(snap.id, 3);
        assert_eq!(report.facts_unchanged, 366);
    }

    #[test]
    fn failed_refresh_keeps_old_snapshot() {
        let dir = empty_dir();
        let wh = Warehouse::open(EtlConfig::in_dir(dir.path())).unwrap();
        std::fs::remove_file(dir.path().join("movements.csv")).unwrap();
        assert!(matches!(wh.refresh(), Err(WarehouseError::Etl(_))));
        assert_eq!(wh.current().id, 1);
        // the next successful refresh still gets the next id
        std::fs::write(dir.path().join("movements.csv"), "account_id,value_date,amount,currency_code,kind,description\n").unwrap();
        assert_eq!(wh.refresh().unwrap().0.id, 2);
    }

    #[test]
    fn concurrent_refresh_is_busy() {
        let dir = empty_dir();
        let (started_tx, started_rx) = mpsc::channel::<()>();
        let (release_tx, release_rx) = mpsc::channel::<()>();
        let started_tx = Mutex::new(started_tx);
        let release_rx = Mutex::new(release_rx);
        let runner: EtlRunner = Box::new(move |cfg| {
            started_tx.lock().unwrap().send(()).unwrap();
            release_rx.lock().unwrap().recv_timeout(Duration::from_secs(10)).unwrap();
            run_etl(cfg)
        });
        let wh = Arc::new(Warehouse::with_runner(EtlConfig::in_dir(dir.path()), runner).unwrap());
        let bg = {
            let wh = wh.clone();
            std::thread::spawn(move || wh.refresh().map(|(s, _)| s.id))
        };
        started_rx.recv().unwrap();
        assert!(matches!(wh.refresh(), Err(WarehouseError::Busy)));
        assert_eq!(wh.current().id, 1);
        release_tx.send(()).unwrap();
        assert_eq!(bg.join().unwrap().unwrap(), 2);
        assert_eq!(wh.current().id, 2);
    }
}
