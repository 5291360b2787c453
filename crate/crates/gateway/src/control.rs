//! Loopback control API used by the dashboard.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{ConnectInfo, Query, Request, State};
use axum::http::StatusCode;
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use pan_gate_core::{ModeValue, Outcome, PageReport, Path, Stats};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

use crate::error::GatewayError;
use crate::gateway::{CandidateView, Gateway};

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct PageReportJson {
    pub page_id: String,
    pub total: u64,
    pub via_pan: u64,
    pub via_legacy: u64,
    pub blocked: u64,
    pub non_compliant: u64,
    pub indicator: String,
}

impl From<&PageReport> for PageReportJson {
    fn from(r: &PageReport) -> Self {
        PageReportJson {
            page_id: r.page_id.clone(),
            total: r.total,
            via_pan: r.via_pan,
            via_legacy: r.via_legacy,
            blocked: r.blocked,
            non_compliant: r.non_compliant,
            indicator: r.indicator.as_str().to_string(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HostStatsJson {
    pub requests_pan: u64,
    pub requests_legacy: u64,
    pub requests_blocked: u64,
    pub non_compliant: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PathStatsJson {
    pub fingerprint: String,
    pub sequence: String,
    pub uses: u64,
    pub ewma_latency_ms: f64,
    pub bytes: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StatsJson {
    pub since_ms: u64,
    pub per_host: BTreeMap<String, HostStatsJson>,
    pub per_path: Vec<PathStatsJson>,
}

impl From<&Stats> for StatsJson {
    fn from(s: &Stats) -> Self {
        StatsJson {
            since_ms: s.since.as_millis(),
            per_host: s
                .per_host
                .iter()
                .map(|(h, c)| {
                    let j = HostStatsJson {
                        requests_pan: c.requests_pan,
                        requests_legacy: c.requests_legacy,
                        requests_blocked: c.requests_blocked,
                        non_compliant: c.non_compliant,
                    };
                    (h.clone(), j)
                })
                .collect(),
            per_path: s
                .per_path
                .iter()
                .map(|(fp, c)| PathStatsJson {
                    fingerprint: fp.to_string(),
                    sequence: c.sequence.clone(),
                    uses: c.uses,
                    ewma_latency_ms: c.ewma_latency_ms,
                    bytes: c.bytes,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HopJson {
    pub id: String,
    pub latency_ms: f64,
    pub bandwidth_mbps: f64,
    pub mtu_bytes: u32,
    pub carbon_g_per_gb: f64,
    pub geo: Option<[f64; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PathJson {
    pub fingerprint: String,
    pub sequence: String,
    pub hops: Vec<HopJson>,
    pub latency_ms: f64,
    pub rtt_ms: f64,
    pub bandwidth_mbps: f64,
    pub mtu_bytes: u32,
    pub carbon_g_per_gb: f64,
    pub hop_count: usize,
    pub isds: Vec<u16>,
    pub compliant: bool,
    pub rank: Option<usize>,
}

impl PathJson {
    fn new(p: &Path, compliant: bool, rank: Option<usize>) -> Self {
        let m = p.meta();
        PathJson {
            fingerprint: p.fingerprint().to_string(),
            sequence: p.sequence_string(),
            hops: p
                .hops()
                .iter()
                .map(|h| HopJson {
                    id: h.id.to_string(),
                    latency_ms: h.latency_ms,
                    bandwidth_mbps: h.bandwidth_mbps,
                    mtu_bytes: h.mtu_bytes,
                    carbon_g_per_gb: h.carbon_g_per_gb,
                    geo: h.geo.map(|g| [g.lat, g.lon]),
                })
                .collect(),
            latency_ms: m.latency_ms,
            rtt_ms: m.rtt_ms(),
            bandwidth_mbps: m.bandwidth_mbps,
            mtu_bytes: m.mtu_bytes,
            carbon_g_per_gb: m.carbon_g_per_gb,
            hop_count: m.hop_count,
            isds: m.isds.iter().copied().collect(),
            compliant,
            rank,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PathsJson {
    pub host: String,
    /// `scion` or `ip-only`.
    pub outcome: String,
    pub address: Option<String>,
    pub source: Option<String>,
    pub ttl_s: u64,
    pub error: Option<String>,
    pub paths: Vec<PathJson>,
}

impl From<&CandidateView> for PathsJson {
    fn from(v: &CandidateView) -> Self {
        let r = &v.resolution;
        PathsJson {
            host: v.host.clone(),
            outcome: match r.outcome {
                Outcome::ScionCapable(_) => "scion",
                Outcome::IpOnly => "ip-only",
            }
            .to_string(),
            address: r.address().map(|a| a.to_string()),
            source: r.source.map(|s| s.as_str().to_string()),
            ttl_s: r.ttl_s,
            error: r.error.clone(),
            paths: v.paths.iter().map(|c| PathJson::new(&c.path, c.compliant, c.rank)).collect(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StrictHostJson {
    pub host: String,
    pub expires_at_s: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ModesJson {
    pub global: String,
    pub sites: BTreeMap<String, String>,
    pub header_strict: Vec<StrictHostJson>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HostModeJson {
    pub host: String,
    pub value: String,
    pub origin: String,
    pub site_setting: Option<String>,
    pub strict_expires_at_s: Option<u64>,
}

#[derive(Debug, Deserialize)]
struct HostQuery {
    host: Option<String>,
}

#[derive(Debug, Deserialize)]
struct PageQuery {
    page: Option<String>,
}

type Shared = State<Arc<Gateway>>;

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, message.into()).into_response()
}

async fn get_policy(State(gw): Shared) -> String {
    gw.policy().text.clone()
}

async fn put_policy(State(gw): Shared, body: String) -> Response {
    match gw.set_policy(&body) {
        Ok(()) => (StatusCode::OK, gw.policy().policy.render()).into_response(),
        Err(e) => error(StatusCode::UNPROCESSABLE_ENTITY, format!("{e}\n")),
    }
}

async fn get_mode(State(gw): Shared, Query(q): Query<HostQuery>) -> Response {
    let now = gw.clock().now();
    match q.host {
        Some(host) => {
            let mode = gw.effective_mode(&host, now);
            let host = pan_gate_core::normalize_host(&host);
            Json(HostModeJson {
                value: mode.value.to_string(),
                origin: mode.origin.as_str().to_string(),
                site_setting: gw.site_modes().get(&host).map(|v| v.to_string()),
                strict_expires_at_s: gw.resolver().strict_expiry(&host, now).map(|t| t.as_secs_ceil()),
                host,
            })
            .into_response()
        }
        None => Json(ModesJson {
            global: gw.global_mode().to_string(),
            sites: gw.site_modes().into_iter().map(|(h, v)| (h, v.to_string())).collect(),
            header_strict: gw
                .resolver()
                .strict_entries(now)
                .into_iter()
                .map(|e| StrictHostJson { host: e.host, expires_at_s: e.expires_at.as_secs_ceil() })
                .collect(),
        })
        .into_response(),
    }
}

async fn put_mode(State(gw): Shared, Query(q): Query<HostQuery>, body: String) -> Response {
    let value: ModeValue = match body.trim().parse() {
        Ok(v) => v,
        Err(_) => return error(StatusCode::UNPROCESSABLE_ENTITY, "expected `opportunistic` or `strict`\n"),
    };
    match q.host {
        Some(host) => gw.set_site_mode(&host, Some(value)),
        None => gw.set_global_mode(value),
    }
    (StatusCode::OK, value.to_string()).into_response()
}

async fn delete_mode(State(gw): Shared, Query(q): Query<HostQuery>) -> Response {
    match q.host {
        Some(host) => {
            gw.set_site_mode(&host, None);
            StatusCode::NO_CONTENT.into_response()
        }
        None => error(StatusCode::BAD_REQUEST, "host= is required\n"),
    }
}

async fn get_status(State(gw): Shared, Query(q): Query<PageQuery>) -> Response {
    match q.page {
        Some(page) => Json(PageReportJson::from(&gw.classify_page(&page))).into_response(),
        None => error(StatusCode::BAD_REQUEST, "page= is required\n"),
    }
}

async fn get_stats(State(gw): Shared) -> Json<StatsJson> {
    Json(StatsJson::from(&gw.stats()))
}

async fn get_paths(State(gw): Shared, Query(q): Query<HostQuery>) -> Response {
    let Some(host) = q.host else {
        return error(StatusCode::BAD_REQUEST, "host= is required\n");
    };
    match gw.candidate_paths(&host).await {
        Ok(v) => Json(PathsJson::from(&v)).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, format!("{e}\n")),
    }
}

async fn index() -> &'static str {
    "pan-gate control API: /api/policy /api/mode /api/status /api/stats /api/paths\n"
}

async fn loopback_only(ConnectInfo(peer): ConnectInfo<SocketAddr>, req: Request, next: Next) -> Response {
    if !peer.ip().is_loopback() {
        log::warn!("control request from non-loopback peer {peer} rejected");
        return error(StatusCode::FORBIDDEN, "control API is loopback only\n");
    }
    next.run(req).await
}

/// Control routes; `ui_dir` is served at `/` when given.
pub fn router(gateway: Arc<Gateway>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/policy", get(get_policy).put(put_policy))
        .route("/api/mode", get(get_mode).put(put_mode).delete(delete_mode))
        .route("/api/status", get(get_status))
        .route("/api/stats", get(get_stats))
        .route("/api/paths", get(get_paths))
        .with_state(gateway);
    let app = match ui_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api.route("/", get(index)),
    };
    app.layer(middleware::from_fn(loopback_only))
}

/// Binds the control listener, refusing anything but a loopback address.
pub async fn bind(addr: SocketAddr) -> Result<TcpListener, GatewayError> {
    if !addr.ip().is_loopback() {
        return Err(GatewayError::Config(format!("control API must bind to loopback, not {addr}")));
    }
    TcpListener::bind(addr).await.map_err(|e| GatewayError::Config(format!("binding control API on {addr}: {e}")))
}

pub async fn serve(gateway: Arc<Gateway>, listener: TcpListener, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let app = router(gateway, ui_dir);
    axum::serve(listener, app.into_make_service_with_connect_info::<SocketAddr>()).await
}

/// Writes the current stats as pretty JSON.
pub fn export_stats(gateway: &Gateway, path: &std::path::Path) -> Result<(), GatewayError> {
    let json = serde_json::to_string_pretty(&StatsJson::from(&gateway.stats()))
        .map_err(|e| GatewayError::Config(e.to_string()))?;
    std::fs::write(path, json).map_err(|e| GatewayError::io(path, e))
}
