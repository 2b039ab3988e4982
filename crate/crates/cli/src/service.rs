//! HTTP/JSON query service.
//!
//! Reads are answered from whatever snapshot is published when the request
//! arrives; a refresh builds the next snapshot off to the side and swaps it
//! in, so clients only ever see complete snapshots with increasing ids.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use balcube::etl::{EtlConfig, EtlReport};
use balcube::kv::KvFile;
use balcube::warehouse::{Warehouse, WarehouseError};
use balcube::{query_pivot, Aggregator, Level, Measure, PivotQuery, PivotResult, TimeGrain};
use serde::{Deserialize, Serialize};
use serde_json::json;

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";

/// Header carrying the id of the snapshot behind a CSV answer.
pub const SNAPSHOT_HEADER: &str = "x-snapshot-id";

const CONFIG_KEYS: [&str; 7] = [
    "listen",
    "read_token",
    "admin_token",
    "etl_config",
    "data_dir",
    "fact_store",
    "time_table",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub read_token: String,
    pub admin_token: String,
    pub etl: EtlConfig,
}

impl ServiceConfig {
    pub fn new(listen: SocketAddr, read_token: String, admin_token: String, etl: EtlConfig) -> Result<Self> {
        if read_token.is_empty() || admin_token.is_empty() {
            bail!("read_token and admin_token must not be empty");
        }
        if read_token == admin_token {
            bail!("read_token and admin_token must differ");
        }
        Ok(Self {
            listen,
            read_token,
            admin_token,
            etl,
        })
    }

    /// Keys: `listen`, `read_token`, `admin_token`, then either `etl_config`
    /// (path to an ETL config) or `data_dir`; `fact_store` and `time_table`
    /// override the paths of either. Relative paths resolve against
    /// `base_dir`.
    pub fn from_kv(kv: &KvFile, base_dir: &Path) -> Result<Self> {
        kv.reject_unknown(&CONFIG_KEYS)?;
        let listen = kv.get("listen").unwrap_or(DEFAULT_LISTEN);
        let listen: SocketAddr = listen.parse().with_context(|| format!("listen: bad address {listen:?}"))?;
        let mut etl = match (kv.get("etl_config"), kv.get("data_dir")) {
            (Some(_), Some(_)) => bail!("set either etl_config or data_dir, not both"),
            (Some(p), None) => EtlConfig::load(&base_dir.join(p))?,
            (None, d) => EtlConfig::in_dir(&base_dir.join(d.unwrap_or("."))),
        };
        if let Some(p) = kv.get("fact_store") {
            etl.fact_store = base_dir.join(p);
        }
        if let Some(p) = kv.get("time_table") {
            etl.time_table = base_dir.join(p);
        }
        Self::new(
            listen,
            kv.require("read_token")?.to_owned(),
            kv.require("admin_token")?.to_owned(),
            etl,
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let kv = KvFile::read(path)?;
        Self::from_kv(&kv, path.parent().unwrap_or(Path::new(".")))
            .with_context(|| format!("service config {}", path.display()))
    }
}

#[derive(Clone)]
struct AppState {
    warehouse: Arc<Warehouse>,
    read_token: Arc<str>,
    admin_token: Arc<str>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Read,
    Admin,
}

impl AppState {
    fn role(&self, headers: &HeaderMap) -> Option<Role> {
        let token = headers
            .get(header::AUTHORIZATION)?
            .to_str()
            .ok()?
            .strip_prefix("Bearer ")?
            .trim();
        if same_bytes(token, &self.admin_token) {
            Some(Role::Admin)
        } else if same_bytes(token, &self.read_token) {
            Some(Role::Read)
        } else {
            None
        }
    }
}

/// Comparison whose running time does not depend on where the inputs differ.
fn same_bytes(a: &str, b: &str) -> bool {
    a.len() == b.len() && a.bytes().zip(b.bytes()).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

pub fn router(config: &ServiceConfig, warehouse: Arc<Warehouse>) -> Router {
    let state = AppState {
        warehouse,
        read_token: config.read_token.as_str().into(),
        admin_token: config.admin_token.as_str().into(),
    };
    Router::new()
        .route("/api/health", get(health))
        .route("/api/metadata", get(metadata))
        .route("/api/pivot", post(pivot))
        .route("/api/refresh", post(refresh))
        .with_state(state)
}

/// Opens the warehouse and serves until interrupted.
pub async fn serve(config: ServiceConfig) -> Result<()> {
    let etl = config.etl.clone();
    let warehouse = tokio::task::spawn_blocking(move || Warehouse::open(etl))
        .await?
        .context("cannot open the warehouse")?;
    let app = router(&config, Arc::new(warehouse));
    let listener = tokio::net::TcpListener::bind(config.listen)
        .await
        .with_context(|| format!("cannot listen on {}", config.listen))?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn unauthorized() -> Response {
    (StatusCode::UNAUTHORIZED, [(header::WWW_AUTHENTICATE, "Bearer")]).into_response()
}

fn error(status: StatusCode, code: &str, message: impl Into<String>, extra: serde_json::Value) -> Response {
    let mut body = json!({ "error": code, "message": message.into() });
    if let (Some(b), serde_json::Value::Object(e)) = (body.as_object_mut(), extra) {
        b.extend(e);
    }
    (status, Json(body)).into_response()
}

async fn health(State(state): State<AppState>) -> Response {
    Json(json!({ "status": "ok", "snapshot_id": state.warehouse.current().id })).into_response()
}

#[derive(Debug, Serialize)]
struct LevelInfo {
    name: &'static str,
    dimension: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    time_grain: Option<TimeGrain>,
    members: Vec<String>,
}

#[derive(Debug, Serialize)]
struct HierarchyInfo {
    name: &'static str,
    levels: Vec<Level>,
}

#[derive(Debug, Serialize)]
struct DimensionInfo {
    name: &'static str,
    hierarchies: Vec<HierarchyInfo>,
}

#[derive(Debug, Serialize)]
struct MeasureInfo {
    name: Measure,
    /// `EUR`, or `account` for measures in the account's own currency.
    currency: &'static str,
}

#[derive(Debug, Serialize)]
struct Metadata {
    snapshot_id: u64,
    fact_count: usize,
    first_date: chrono::NaiveDate,
    last_date: chrono::NaiveDate,
    measures: Vec<MeasureInfo>,
    aggregators: [Aggregator; 2],
    grains: Vec<TimeGrain>,
    dimensions: Vec<DimensionInfo>,
    levels: Vec<LevelInfo>,
}

fn hierarchy(name: &'static str, levels: &[Level]) -> HierarchyInfo {
    HierarchyInfo {
        name,
        levels: levels.to_vec(),
    }
}

async fn metadata(State(state): State<AppState>, headers: HeaderMap) -> Response {
    if state.role(&headers).is_none() {
        return unauthorized();
    }
    use Level::*;
    let snapshot = state.warehouse.current();
    let table = snapshot.time_table();
    let body = Metadata {
        snapshot_id: snapshot.id,
        fact_count: snapshot.cube.fact_count(),
        first_date: table.first_date(),
        last_date: table.last_date(),
        measures: Measure::ALL
            .into_iter()
            .map(|m| MeasureInfo {
                name: m,
                currency: if m.is_original_currency() { "account" } else { "EUR" },
            })
            .collect(),
        aggregators: [Aggregator::SumClosing, Aggregator::Average],
        grains: TimeGrain::ALL.to_vec(),
        dimensions: vec![
            DimensionInfo {
                name: "time",
                hierarchies: vec![
                    hierarchy("calendar", &[Year, Semester, Quarter, Month, Day]),
                    hierarchy("iso_week", &[IsoYear, Week, Day]),
                ],
            },
            DimensionInfo {
                name: "account",
                hierarchies: vec![
                    hierarchy("company_geo", &[CompanyCountry, Company, Account]),
                    hierarchy("bank_geo", &[BankCountry, Bank, Account]),
                    hierarchy("currency", &[Currency, Account]),
                ],
            },
        ],
        levels: Level::ALL
            .into_iter()
            .map(|l| LevelInfo {
                name: l.name(),
                dimension: if l.is_time() { "time" } else { "account" },
                time_grain: l.time_grain(),
                members: snapshot.cube.members(l),
            })
            .collect(),
    };
    Json(body).into_response()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Deserialize)]
struct PivotParams {
    #[serde(default)]
    format: Format,
}

/// Successful answer to `POST /api/pivot`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PivotResponse {
    pub snapshot_id: u64,
    pub query: PivotQuery,
    pub result: PivotResult,
}

/// Parses a pivot request body, naming the offending field on failure.
pub fn parse_query(body: &[u8]) -> std::result::Result<PivotQuery, (String, String)> {
    let mut de = serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let field = e.path().to_string();
        (field, e.into_inner().to_string())
    })
}

async fn pivot(
    State(state): State<AppState>,
    headers: HeaderMap,
    Query(params): Query<PivotParams>,
    body: Bytes,
) -> Response {
    if state.role(&headers).is_none() {
        return unauthorized();
    }
    let query = match parse_query(&body) {
        Ok(q) => q,
        Err((field, message)) => {
            return error(StatusCode::BAD_REQUEST, "BAD_REQUEST", message, json!({ "field": field }));
        }
    };
    let snapshot = state.warehouse.current();
    let answer = {
        let snapshot = snapshot.clone();
        let query = query.clone();
        tokio::task::spawn_blocking(move || query_pivot(&snapshot.cube, &query)).await
    };
    let result = match answer {
        Ok(Ok(r)) => r,
        Ok(Err(e)) => {
            return error(
                StatusCode::UNPROCESSABLE_ENTITY,
                e.code(),
                e.to_string(),
                json!({ "snapshot_id": snapshot.id }),
            )
        }
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string(), json!({})),
    };
    match params.format {
        Format::Json => Json(PivotResponse {
            snapshot_id: snapshot.id,
            query,
            result,
        })
        .into_response(),
        Format::Csv => (
            [
                (header::CONTENT_TYPE, HeaderValue::from_static("text/csv; charset=utf-8")),
                (header::HeaderName::from_static(SNAPSHOT_HEADER), HeaderValue::from(snapshot.id)),
            ],
            result.to_csv(),
        )
            .into_response(),
    }
}

/// Counts from the ETL run behind a refresh.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefreshSummary {
    pub rows_read: usize,
    pub rows_rejected: usize,
    pub rejected_by_reason: BTreeMap<String, usize>,
    pub balances_computed: usize,
    pub facts_inserted: usize,
    pub facts_updated: usize,
    pub facts_unchanged: usize,
}

impl From<&EtlReport> for RefreshSummary {
    fn from(r: &EtlReport) -> Self {
        let mut rejected_by_reason = BTreeMap::new();
        for row in &r.rows_rejected {
            *rejected_by_reason.entry(row.reason.as_str().to_owned()).or_insert(0) += 1;
        }
        Self {
            rows_read: r.rows_read,
            rows_rejected: r.rows_rejected.len(),
            rejected_by_reason,
            balances_computed: r.balances_computed,
            facts_inserted: r.facts_inserted,
            facts_updated: r.facts_updated,
            facts_unchanged: r.facts_unchanged,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefreshResponse {
    pub snapshot_id: u64,
    pub report: RefreshSummary,
}

async fn refresh(State(state): State<AppState>, headers: HeaderMap) -> Response {
    if state.role(&headers) != Some(Role::Admin) {
        return unauthorized();
    }
    let warehouse = state.warehouse.clone();
    let outcome = tokio::task::spawn_blocking(move || warehouse.refresh()).await;
    let serving = json!({ "snapshot_id": state.warehouse.current().id });
    match outcome {
        Ok(Ok((snapshot, report))) => Json(RefreshResponse {
            snapshot_id: snapshot.id,
            report: RefreshSummary::from(&report),
        })
        .into_response(),
        Ok(Err(WarehouseError::Busy)) => error(StatusCode::CONFLICT, "BUSY", "a refresh is already running", serving),
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, "REFRESH_FAILED", e.to_string(), serving),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string(), serving),
    }
}
