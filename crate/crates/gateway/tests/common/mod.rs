//! Local testbed: a path-aware origin, a legacy origin and a gateway with
//! its proxy listener, all on loopback.

#![allow(dead_code)]

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use pan_gate::origin::{self, Content, OriginConfig, OriginHandle};
use pan_gate::plt::PageLoader;
use pan_gate::resolver::{FixtureTxt, TxtLookup};
use pan_gate::{formats, proxy, Gateway, GatewayConfig, SystemClock};
use pan_gate_core::{Clock, IsdAs, ModeValue, ScionAddress};
use tokio::net::TcpListener;
use tokio::task::JoinHandle;

pub const PAN_HOST: &str = "pan-fs.test";
pub const LEGACY_HOST: &str = "legacy-fs.test";

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn any_port() -> SocketAddr {
    "127.0.0.1:0".parse().unwrap()
}

pub struct BedOptions {
    pub topology: &'static str,
    pub pan_as: IsdAs,
    pub policy: String,
    pub mode: ModeValue,
    pub clock: Arc<dyn Clock>,
    pub strict_max_age: Option<u64>,
    pub txt: Option<FixtureTxt>,
    pub static_hosts: Vec<(String, ScionAddress)>,
    pub legacy_hosts: Vec<(String, SocketAddr)>,
    pub connect_timeout: Option<Duration>,
    pub strict_store: Option<PathBuf>,
}

impl Default for BedOptions {
    fn default() -> Self {
        BedOptions {
            topology: "local",
            pan_as: IsdAs::new(2, 1),
            policy: "+ 0-0\n".into(),
            mode: ModeValue::Opportunistic,
            clock: Arc::new(SystemClock),
            strict_max_age: None,
            txt: None,
            static_hosts: Vec::new(),
            legacy_hosts: Vec::new(),
            connect_timeout: None,
            strict_store: None,
        }
    }
}

pub struct Bed {
    pub gw: Arc<Gateway>,
    pub proxy: SocketAddr,
    pub pan: OriginHandle,
    pub legacy: OriginHandle,
    task: JoinHandle<std::io::Result<()>>,
}

impl Drop for Bed {
    fn drop(&mut self) {
        self.task.abort();
    }
}

pub async fn origin(root: &str, strict_max_age_s: Option<u64>, as_identity: Option<IsdAs>) -> OriginHandle {
    origin::spawn(OriginConfig {
        listen: any_port(),
        content: Content::Root(fixture(root)),
        strict_max_age_s,
        as_identity,
    })
    .await
    .unwrap()
}

pub async fn bed(opts: BedOptions) -> Bed {
    let pan = origin("sites/pan-fs", opts.strict_max_age, Some(opts.pan_as)).await;
    let legacy = origin("sites/legacy-fs", None, None).await;
    let topology = formats::load_topology_file(&fixture(&format!("topologies/{}.json", opts.topology))).unwrap();
    let mut config = GatewayConfig::new(topology, opts.clock);
    config.policy = opts.policy;
    config.mode = opts.mode;
    let pan_addr = ScionAddress { id: opts.pan_as, host: "127.0.0.1".into(), port: Some(pan.addr().port()) };
    config.static_hosts = HashMap::from([(PAN_HOST.to_string(), pan_addr)]);
    config.static_hosts.extend(opts.static_hosts);
    // the path-aware host is dual-stack: reachable over legacy IP as well
    config.legacy_hosts = HashMap::from([(PAN_HOST.to_string(), pan.addr()), (LEGACY_HOST.to_string(), legacy.addr())]);
    config.legacy_hosts.extend(opts.legacy_hosts);
    if let Some(txt) = opts.txt {
        config.txt = Arc::new(txt) as Arc<dyn TxtLookup>;
    }
    if let Some(t) = opts.connect_timeout {
        config.connect_timeout = t;
    }
    config.strict_store = opts.strict_store;
    let gw = Gateway::new(config).unwrap();
    let listener = TcpListener::bind(any_port()).await.unwrap();
    let proxy = listener.local_addr().unwrap();
    let task = tokio::spawn(proxy::serve(gw.clone(), listener));
    Bed { gw, proxy, pan, legacy, task }
}

impl Bed {
    pub fn loader(&self, page: &str) -> PageLoader {
        PageLoader::through_proxy(self.proxy).with_page_id(page)
    }

    pub fn direct(&self) -> PageLoader {
        PageLoader::direct(HashMap::from([
            (PAN_HOST.to_string(), self.pan.addr()),
            (LEGACY_HOST.to_string(), self.legacy.addr()),
        ]))
    }
}

pub struct Reply {
    pub status: hyper::StatusCode,
    pub headers: hyper::HeaderMap,
    pub body: String,
}

impl Reply {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.get(name).and_then(|v| v.to_str().ok())
    }
}

/// One HTTP/1.1 exchange on a fresh connection to `addr`, with `target`
/// written verbatim on the request line.
pub async fn http(addr: SocketAddr, method: &str, target: &str, headers: &[(&str, &str)], body: &str) -> Reply {
    use http_body_util::{BodyExt, Full};
    let tcp = tokio::net::TcpStream::connect(addr).await.unwrap();
    let (mut sender, conn) =
        hyper::client::conn::http1::handshake(hyper_util::rt::TokioIo::new(tcp)).await.unwrap();
    tokio::spawn(conn);
    let mut req = hyper::Request::builder().method(method).uri(target);
    for (k, v) in headers {
        req = req.header(*k, *v);
    }
    let resp = sender.send_request(req.body(Full::new(bytes::Bytes::from(body.to_string()))).unwrap()).await.unwrap();
    let (parts, body) = resp.into_parts();
    let body = body.collect().await.unwrap().to_bytes();
    Reply { status: parts.status, headers: parts.headers, body: String::from_utf8_lossy(&body).into_owned() }
}

/// Upstream that records each raw request head and answers with `response`.
pub async fn recording_upstream(response: &'static str) -> (SocketAddr, Arc<parking_lot::Mutex<Vec<String>>>) {
    use tokio::io::{AsyncReadExt, AsyncWriteExt};
    let listener = TcpListener::bind(any_port()).await.unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(parking_lot::Mutex::new(Vec::new()));
    let log = seen.clone();
    tokio::spawn(async move {
        while let Ok((mut s, _)) = listener.accept().await {
            let log = log.clone();
            tokio::spawn(async move {
                let mut buf = Vec::new();
                let mut chunk = [0u8; 4096];
                while !buf.windows(4).any(|w| w == b"\r\n\r\n") {
                    match s.read(&mut chunk).await {
                        Ok(0) | Err(_) => return,
                        Ok(n) => buf.extend_from_slice(&chunk[..n]),
                    }
                }
                log.lock().push(String::from_utf8_lossy(&buf).into_owned());
                let _ = s.write_all(response.as_bytes()).await;
            });
        }
    });
    (addr, seen)
}
