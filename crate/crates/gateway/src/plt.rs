//! Minimal page loader: fetches a document and the `http://` resources it
//! references, either through the proxy or directly, and times the load.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::time::{Duration, Instant};

use anyhow::{anyhow, Context};
use bytes::Bytes;
use http_body_util::{BodyExt, Empty};
use hyper::header::{HeaderValue, HOST};
use hyper::{Request, StatusCode, Uri};
use hyper_util::rt::TokioIo;
use tokio::net::TcpStream;

use crate::proxy::{BLOCKED_HEADER, PAGE_HEADER, STATUS_HEADER};

#[derive(Debug, Clone)]
pub struct Fetch {
    pub url: String,
    pub status: StatusCode,
    pub body: Bytes,
    /// `pan`, `legacy` or `blocked` when fetched through the proxy.
    pub route: Option<String>,
    pub blocked_reason: Option<String>,
}

#[derive(Debug, Clone)]
pub struct PageLoad {
    pub document: Fetch,
    pub resources: Vec<Fetch>,
    pub elapsed: Duration,
}

impl PageLoad {
    pub fn all(&self) -> impl Iterator<Item = &Fetch> {
        std::iter::once(&self.document).chain(self.resources.iter())
    }
}

#[derive(Debug, Clone)]
enum Via {
    Proxy(SocketAddr),
    /// Hostname to socket address, bypassing the proxy.
    Direct(HashMap<String, SocketAddr>),
}

#[derive(Debug, Clone)]
pub struct PageLoader {
    via: Via,
    page_id: Option<String>,
}

impl PageLoader {
    pub fn through_proxy(proxy: SocketAddr) -> Self {
        PageLoader { via: Via::Proxy(proxy), page_id: None }
    }

    pub fn direct(hosts: HashMap<String, SocketAddr>) -> Self {
        PageLoader { via: Via::Direct(hosts), page_id: None }
    }

    /// Tags every request with a page id header.
    pub fn with_page_id(mut self, id: impl Into<String>) -> Self {
        self.page_id = Some(id.into());
        self
    }

    pub async fn fetch(&self, url: &str) -> anyhow::Result<Fetch> {
        let uri: Uri = url.parse().with_context(|| format!("bad url {url}"))?;
        let host = uri.host().ok_or_else(|| anyhow!("url {url} has no host"))?.to_ascii_lowercase();
        let authority = uri.authority().map(|a| a.as_str().to_string()).unwrap_or_else(|| host.clone());
        let (tcp, target) = match &self.via {
            Via::Proxy(addr) => (TcpStream::connect(addr).await?, uri.clone()),
            Via::Direct(hosts) => {
                let addr = hosts.get(&host).ok_or_else(|| anyhow!("no direct address for {host}"))?;
                let pq = uri.path_and_query().map(|p| p.as_str()).unwrap_or("/");
                (TcpStream::connect(addr).await?, pq.parse()?)
            }
        };
        let _ = tcp.set_nodelay(true);
        let (mut sender, conn) = hyper::client::conn::http1::handshake(TokioIo::new(tcp)).await?;
        tokio::spawn(async move {
            let _ = conn.await;
        });
        let mut req = Request::get(target).header(HOST, HeaderValue::from_str(&authority)?);
        if let Some(id) = &self.page_id {
            req = req.header(PAGE_HEADER, id.as_str());
        }
        let resp = sender.send_request(req.body(Empty::<Bytes>::new())?).await?;
        let status = resp.status();
        let header = |name: &str| resp.headers().get(name).and_then(|v| v.to_str().ok()).map(str::to_string);
        let route = header(STATUS_HEADER);
        let blocked_reason = header(BLOCKED_HEADER);
        let body = resp.into_body().collect().await?.to_bytes();
        Ok(Fetch { url: url.to_string(), status, body, route, blocked_reason })
    }

    /// Loads the document, then all referenced resources concurrently.
    pub async fn load(&self, url: &str) -> anyhow::Result<PageLoad> {
        let start = Instant::now();
        let document = self.fetch(url).await?;
        let html = String::from_utf8_lossy(&document.body).into_owned();
        let tasks: Vec<_> = extract_resources(&html)
            .into_iter()
            .map(|u| {
                let loader = self.clone();
                tokio::spawn(async move { loader.fetch(&u).await })
            })
            .collect();
        let mut resources = Vec::with_capacity(tasks.len());
        for t in tasks {
            resources.push(t.await??);
        }
        Ok(PageLoad { document, resources, elapsed: start.elapsed() })
    }
}

/// Absolute `http://` URLs in `src` and `href` attributes, in order.
pub fn extract_resources(html: &str) -> Vec<String> {
    let mut out = Vec::new();
    for attr in ["src=\"", "href=\""] {
        let mut rest = html;
        while let Some(i) = rest.find(attr) {
            rest = &rest[i + attr.len()..];
            if let Some(end) = rest.find('"') {
                let v = &rest[..end];
                if v.starts_with("http://") {
                    out.push(v.to_string());
                }
                rest = &rest[end..];
            }
        }
    }
    out
}

pub fn median(mut samples: Vec<Duration>) -> Duration {
    assert!(!samples.is_empty(), "median of nothing");
    samples.sort();
    samples[samples.len() / 2]
}
