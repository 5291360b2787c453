//! HTTP/1.1 forward proxy front end. Accepts absolute-form requests and
//! CONNECT tunnels and carries each one according to its request plan.

use std::convert::Infallible;
use std::sync::Arc;
use std::time::Instant;

use bytes::Bytes;
use http_body_util::{BodyExt, Full};
use hyper::body::Incoming;
use hyper::header::{HeaderValue, HOST, REFERER};
use hyper::server::conn::http1;
use hyper::service::service_fn;
use hyper::{Method, Request, Response, StatusCode, Uri};
use hyper_util::rt::TokioIo;
use pan_gate_core::{Decision, RequestPlan, Timing};
use tokio::io::{AsyncRead, AsyncWrite};
use tokio::net::{TcpListener, TcpStream};

use crate::emu::{self, Channel};
use crate::gateway::Gateway;
use crate::http_util::{strip_hop_by_hop, text, Body};

pub const PAGE_HEADER: &str = "x-pan-page";
pub const STATUS_HEADER: &str = "x-pan-status";
pub const COMPLIANT_HEADER: &str = "x-pan-compliant";
pub const BLOCKED_HEADER: &str = "x-pan-blocked";
pub const PATH_HEADER: &str = "x-pan-path";
pub const STRICT_HEADER: &str = "strict-scion";

/// Accepts proxy connections until the listener fails.
pub async fn serve(gateway: Arc<Gateway>, listener: TcpListener) -> std::io::Result<()> {
    loop {
        let (stream, peer) = listener.accept().await?;
        let _ = stream.set_nodelay(true);
        let gw = gateway.clone();
        tokio::spawn(async move {
            let svc = service_fn(move |req| handle(gw.clone(), req));
            if let Err(e) = http1::Builder::new().serve_connection(TokioIo::new(stream), svc).with_upgrades().await {
                log::debug!("proxy connection from {peer}: {e}");
            }
        });
    }
}

/// Page a request belongs to: explicit header, else the referring host,
/// else the target itself.
pub fn page_id<B>(req: &Request<B>, target_host: &str) -> String {
    if let Some(v) = req.headers().get(PAGE_HEADER).and_then(|v| v.to_str().ok()) {
        return v.to_string();
    }
    req.headers()
        .get(REFERER)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse::<Uri>().ok())
        .and_then(|u| u.host().map(str::to_ascii_lowercase))
        .unwrap_or_else(|| target_host.to_ascii_lowercase())
}

enum Upstream {
    Pan(Channel),
    Legacy(TcpStream),
}

enum DialError {
    Timeout,
    Failed(String),
}

async fn dial(gw: &Gateway, plan: &RequestPlan, port: u16) -> Result<Upstream, DialError> {
    let attempt = async {
        match &plan.decision {
            Decision::PanVia { path, address } => gw
                .emulator()
                .open_channel(path, address, port, gw.clock.now())
                .await
                .map(Upstream::Pan)
                .map_err(|e| DialError::Failed(e.to_string())),
            Decision::LegacyFallback => {
                let r = match gw.legacy_hosts.get(&plan.host) {
                    Some(addr) => emu::dial_legacy_addr(*addr).await,
                    None => emu::dial_legacy(&format!("{}:{port}", plan.host)).await,
                };
                r.map(Upstream::Legacy).map_err(|e| DialError::Failed(e.to_string()))
            }
            Decision::Blocked(_) => Err(DialError::Failed("blocked".into())),
        }
    };
    tokio::time::timeout(gw.connect_timeout, attempt).await.unwrap_or(Err(DialError::Timeout))
}

fn blocked(plan: &RequestPlan) -> Response<Body> {
    let reason = match &plan.decision {
        Decision::Blocked(r) => r.as_str(),
        _ => "internal",
    };
    let mut r = text(StatusCode::BAD_GATEWAY, format!("blocked: {reason} ({} mode)\n", plan.mode.value));
    r.headers_mut().insert(STATUS_HEADER, HeaderValue::from_static("blocked"));
    r.headers_mut().insert(BLOCKED_HEADER, HeaderValue::from_static(reason));
    r
}

fn dial_failure(e: DialError, host: &str) -> Response<Body> {
    match e {
        DialError::Timeout => text(StatusCode::GATEWAY_TIMEOUT, format!("connect to {host} timed out\n")),
        DialError::Failed(m) => text(StatusCode::BAD_GATEWAY, format!("connect to {host} failed: {m}\n")),
    }
}

fn annotate(resp: &mut Response<Body>, plan: &RequestPlan) {
    let h = resp.headers_mut();
    match &plan.decision {
        Decision::PanVia { path, .. } => {
            h.insert(STATUS_HEADER, HeaderValue::from_static("pan"));
            if let Ok(v) = HeaderValue::from_str(&path.sequence_string()) {
                h.insert(PATH_HEADER, v);
            }
        }
        _ => {
            h.insert(STATUS_HEADER, HeaderValue::from_static("legacy"));
        }
    }
    h.insert(COMPLIANT_HEADER, HeaderValue::from_static(if plan.policy_compliant { "true" } else { "false" }));
}

fn elapsed_ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1000.0
}

pub async fn handle(gw: Arc<Gateway>, req: Request<Incoming>) -> Result<Response<Body>, Infallible> {
    if req.method() == Method::CONNECT {
        return Ok(handle_connect(gw, req).await);
    }
    let uri = req.uri().clone();
    let (host, port) = match (uri.scheme_str(), uri.host()) {
        (Some("http"), Some(h)) => (h.to_string(), uri.port_u16().unwrap_or(80)),
        _ => return Ok(text(StatusCode::BAD_REQUEST, "expected an absolute http:// request target\n")),
    };
    let page = page_id(&req, &host);
    let started = Instant::now();
    let plan = gw.plan_request(&host, &page, gw.clock.now()).await;
    if let Decision::Blocked(_) = plan.decision {
        gw.record(&plan, Timing::default(), 0);
        return Ok(blocked(&plan));
    }
    let upstream = match dial(&gw, &plan, port).await {
        Ok(u) => u,
        Err(e) => {
            gw.record(&plan, Timing { connect_ms: elapsed_ms(started), total_ms: elapsed_ms(started) }, 0);
            return Ok(dial_failure(e, &host));
        }
    };
    let connect_ms = elapsed_ms(started);
    let result = match upstream {
        Upstream::Pan(ch) => forward(ch, req, &uri).await,
        Upstream::Legacy(tcp) => forward(tcp, req, &uri).await,
    };
    let timing = Timing { connect_ms, total_ms: elapsed_ms(started) };
    match result {
        Ok((mut resp, bytes)) => {
            if let Some(v) = resp.headers().get(STRICT_HEADER).and_then(|v| v.to_str().ok()) {
                let over_pan = matches!(plan.decision, Decision::PanVia { .. });
                gw.resolver().record_strict_header(&plan.host, v, gw.clock.now(), over_pan);
            }
            annotate(&mut resp, &plan);
            gw.record(&plan, timing, bytes);
            Ok(resp)
        }
        Err(e) => {
            gw.record(&plan, timing, 0);
            Ok(text(StatusCode::BAD_GATEWAY, format!("upstream {host} failed: {e}\n")))
        }
    }
}

/// Sends one request over `io` and buffers the response.
async fn forward<S>(io: S, req: Request<Incoming>, uri: &Uri) -> Result<(Response<Body>, u64), hyper::Error>
where
    S: AsyncRead + AsyncWrite + Send + Unpin + 'static,
{
    let (mut sender, conn) = hyper::client::conn::http1::handshake(TokioIo::new(io)).await?;
    tokio::spawn(async move {
        if let Err(e) = conn.await {
            log::debug!("upstream connection: {e}");
        }
    });
    let (mut parts, body) = req.into_parts();
    let body = body.collect().await?.to_bytes();
    let sent = body.len() as u64;
    strip_hop_by_hop(&mut parts.headers);
    parts.headers.remove(PAGE_HEADER);
    if !parts.headers.contains_key(HOST) {
        if let Some(a) = uri.authority() {
            if let Ok(v) = HeaderValue::from_str(a.as_str()) {
                parts.headers.insert(HOST, v);
            }
        }
    }
    parts.uri = uri.path_and_query().map(|pq| pq.as_str()).unwrap_or("/").parse().unwrap_or_else(|_| Uri::from_static("/"));
    parts.version = hyper::Version::HTTP_11;
    let resp = sender.send_request(Request::from_parts(parts, Full::new(body))).await?;
    let (mut parts, body) = resp.into_parts();
    let body: Bytes = body.collect().await?.to_bytes();
    strip_hop_by_hop(&mut parts.headers);
    let received = body.len() as u64;
    Ok((Response::from_parts(parts, Full::new(body)), sent + received))
}

async fn handle_connect(gw: Arc<Gateway>, req: Request<Incoming>) -> Response<Body> {
    let Some(authority) = req.uri().authority().cloned() else {
        return text(StatusCode::BAD_REQUEST, "CONNECT needs host:port\n");
    };
    let host = authority.host().trim_start_matches('[').trim_end_matches(']').to_string();
    let port = authority.port_u16().unwrap_or(443);
    let page = page_id(&req, &host);
    let started = Instant::now();
    let plan = gw.plan_request(&host, &page, gw.clock.now()).await;
    if let Decision::Blocked(_) = plan.decision {
        gw.record(&plan, Timing::default(), 0);
        return blocked(&plan);
    }
    let upstream = match dial(&gw, &plan, port).await {
        Ok(u) => u,
        Err(e) => {
            gw.record(&plan, Timing { connect_ms: elapsed_ms(started), total_ms: elapsed_ms(started) }, 0);
            return dial_failure(e, &host);
        }
    };
    let connect_ms = elapsed_ms(started);
    // the tunnel is booked on its page now so reports see it while it runs
    gw.record_page(&plan);
    let mut resp = text(StatusCode::OK, "");
    *resp.body_mut() = Full::new(Bytes::new());
    resp.headers_mut().remove("content-type");
    annotate(&mut resp, &plan);
    tokio::spawn(async move {
        let upgraded = match hyper::upgrade::on(req).await {
            Ok(u) => TokioIo::new(u),
            Err(e) => {
                log::debug!("CONNECT {host}: upgrade failed: {e}");
                return;
            }
        };
        let bytes = match upstream {
            Upstream::Pan(ch) => {
                let s = emu::relay(ch, upgraded).await;
                s.bytes_up + s.bytes_down
            }
            Upstream::Legacy(mut tcp) => {
                let mut client = upgraded;
                match tokio::io::copy_bidirectional(&mut client, &mut tcp).await {
                    Ok((a, b)) => a + b,
                    Err(e) => {
                        log::debug!("CONNECT {host}: {e}");
                        0
                    }
                }
            }
        };
        gw.record_stats(&plan, Timing { connect_ms, total_ms: elapsed_ms(started) }, bytes);
    });
    resp
}
