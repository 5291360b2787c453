//! Test origin: serves a directory or reverse-proxies an upstream, and can
//! attach a `Strict-SCION` header to every response.

use std::convert::Infallible;
use std::net::SocketAddr;
use std::path::{Component, Path as FsPath, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use bytes::Bytes;
use http_body_util::{BodyExt, Full};
use hyper::body::Incoming;
use hyper::header::{HeaderValue, CONTENT_TYPE};
use hyper::server::conn::http1;
use hyper::service::service_fn;
use hyper::{Method, Request, Response, StatusCode};
use hyper_util::rt::TokioIo;
use pan_gate_core::IsdAs;
use parking_lot::RwLock;
use tokio::net::{TcpListener, TcpStream};
use tokio::task::JoinHandle;

use crate::http_util::{strip_hop_by_hop, text, Body};
use crate::proxy::STRICT_HEADER;

pub const AS_HEADER: &str = "x-origin-as";

#[derive(Debug, Clone)]
pub enum Content {
    Root(PathBuf),
    /// `host:port` of an HTTP/1.1 upstream.
    Upstream(String),
}

#[derive(Debug, Clone)]
pub struct OriginConfig {
    pub listen: SocketAddr,
    pub content: Content,
    pub strict_max_age_s: Option<u64>,
    pub as_identity: Option<IsdAs>,
}

struct Shared {
    content: Content,
    strict_max_age_s: RwLock<Option<u64>>,
    as_identity: Option<IsdAs>,
    requests: AtomicU64,
}

/// Running origin; stops when dropped.
pub struct OriginHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    task: JoinHandle<()>,
}

impl OriginHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Changes the advertised `max-age`; `None` stops sending the header.
    pub fn set_strict_max_age(&self, secs: Option<u64>) {
        *self.shared.strict_max_age_s.write() = secs;
    }

    pub fn requests_served(&self) -> u64 {
        self.shared.requests.load(Ordering::Relaxed)
    }
}

impl Drop for OriginHandle {
    fn drop(&mut self) {
        self.task.abort();
    }
}

pub async fn spawn(config: OriginConfig) -> std::io::Result<OriginHandle> {
    let listener = TcpListener::bind(config.listen).await?;
    let addr = listener.local_addr()?;
    let shared = Arc::new(Shared {
        content: config.content,
        strict_max_age_s: RwLock::new(config.strict_max_age_s),
        as_identity: config.as_identity,
        requests: AtomicU64::new(0),
    });
    let s = shared.clone();
    let task = tokio::spawn(async move {
        loop {
            let (stream, peer) = match listener.accept().await {
                Ok(x) => x,
                Err(e) => {
                    log::error!("origin accept: {e}");
                    return;
                }
            };
            let _ = stream.set_nodelay(true);
            let s = s.clone();
            tokio::spawn(async move {
                let svc = service_fn(move |req| handle(s.clone(), peer, req));
                if let Err(e) = http1::Builder::new().serve_connection(TokioIo::new(stream), svc).await {
                    log::debug!("origin connection from {peer}: {e}");
                }
            });
        }
    });
    Ok(OriginHandle { addr, shared, task })
}

async fn handle(shared: Arc<Shared>, peer: SocketAddr, req: Request<Incoming>) -> Result<Response<Body>, Infallible> {
    shared.requests.fetch_add(1, Ordering::Relaxed);
    let method = req.method().clone();
    let target = req.uri().path().to_string();
    let mut resp = match &shared.content {
        Content::Root(root) => serve_file(root, &method, &target).await,
        Content::Upstream(upstream) => reverse(upstream, req).await,
    };
    if let Some(age) = *shared.strict_max_age_s.read() {
        if let Ok(v) = HeaderValue::from_str(&format!("max-age={age}")) {
            resp.headers_mut().insert(STRICT_HEADER, v);
        }
    }
    if let Some(id) = shared.as_identity {
        if let Ok(v) = HeaderValue::from_str(&id.to_string()) {
            resp.headers_mut().insert(AS_HEADER, v);
        }
    }
    let bytes = hyper::body::Body::size_hint(resp.body()).exact().unwrap_or(0);
    log::info!("{peer} {method} {target} {} {bytes}", resp.status().as_u16());
    Ok(resp)
}

/// Maps a request path under `root`, refusing anything that escapes it.
pub fn resolve_under(root: &FsPath, url_path: &str) -> Option<PathBuf> {
    let mut out = root.to_path_buf();
    for comp in FsPath::new(url_path.trim_start_matches('/')).components() {
        match comp {
            Component::Normal(c) => out.push(c),
            Component::CurDir => {}
            _ => return None,
        }
    }
    Some(out)
}

fn content_type(path: &FsPath) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).unwrap_or("") {
        "html" | "htm" => "text/html; charset=utf-8",
        "css" => "text/css",
        "js" => "text/javascript",
        "json" => "application/json",
        "png" => "image/png",
        "jpg" | "jpeg" => "image/jpeg",
        "gif" => "image/gif",
        "svg" => "image/svg+xml",
        "txt" => "text/plain; charset=utf-8",
        _ => "application/octet-stream",
    }
}

async fn serve_file(root: &FsPath, method: &Method, url_path: &str) -> Response<Body> {
    if method != Method::GET && method != Method::HEAD {
        return text(StatusCode::METHOD_NOT_ALLOWED, "only GET and HEAD\n");
    }
    let Some(mut path) = resolve_under(root, url_path) else {
        return text(StatusCode::FORBIDDEN, "path escapes the document root\n");
    };
    if tokio::fs::metadata(&path).await.map(|m| m.is_dir()).unwrap_or(false) {
        path.push("index.html");
    }
    match tokio::fs::read(&path).await {
        Ok(data) => {
            let len = data.len();
            let body = if method == Method::HEAD { Bytes::new() } else { Bytes::from(data) };
            let mut r = Response::new(Full::new(body));
            r.headers_mut().insert(CONTENT_TYPE, HeaderValue::from_static(content_type(&path)));
            if method == Method::HEAD {
                r.headers_mut().insert("content-length", HeaderValue::from(len));
            }
            r
        }
        Err(_) => text(StatusCode::NOT_FOUND, format!("{url_path} not found\n")),
    }
}

async fn reverse(upstream: &str, req: Request<Incoming>) -> Response<Body> {
    match reverse_inner(upstream, req).await {
        Ok(r) => r,
        Err(e) => text(StatusCode::BAD_GATEWAY, format!("upstream {upstream}: {e}\n")),
    }
}

async fn reverse_inner(upstream: &str, req: Request<Incoming>) -> anyhow::Result<Response<Body>> {
    let tcp = TcpStream::connect(upstream).await?;
    let (mut sender, conn) = hyper::client::conn::http1::handshake(TokioIo::new(tcp)).await?;
    tokio::spawn(async move {
        let _ = conn.await;
    });
    let (mut parts, body) = req.into_parts();
    let body = body.collect().await?.to_bytes();
    strip_hop_by_hop(&mut parts.headers);
    parts.headers.insert(hyper::header::HOST, HeaderValue::from_str(upstream)?);
    let resp = sender.send_request(Request::from_parts(parts, Full::new(body))).await?;
    let (mut parts, body) = resp.into_parts();
    let body = body.collect().await?.to_bytes();
    strip_hop_by_hop(&mut parts.headers);
    Ok(Response::from_parts(parts, Full::new(body)))
}
