//! On-disk formats: topology documents, the static host list, legacy host
//! overrides and the strict-entry store.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{Read, Write};
use std::net::SocketAddr;
use std::path::{Path as FsPath, PathBuf};

use pan_gate_core::resolver::parse_scion_address;
use pan_gate_core::{normalize_host, parse_isd_as, AsDecoration, Geo, IsdAs, Link, ScionAddress, StrictCache, Timestamp, Topology};
use serde::Deserialize;

use crate::error::GatewayError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyDoc {
    local_as: String,
    ases: BTreeMap<String, AsDoc>,
    #[serde(default)]
    links: Vec<LinkDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AsDoc {
    latency_ms: f64,
    bandwidth_mbps: f64,
    mtu_bytes: u32,
    carbon_g_per_gb: f64,
    #[serde(default)]
    geo: Option<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkDoc {
    a: String,
    b: String,
    latency_ms: f64,
    bandwidth_mbps: f64,
    mtu_bytes: u32,
}

fn concrete(text: &str, what: &str) -> Result<IsdAs, GatewayError> {
    let id = parse_isd_as(text).map_err(|e| GatewayError::Semantic(format!("{what}: {e}")))?;
    if !id.is_concrete() {
        return Err(GatewayError::Semantic(format!("{what}: wildcard identity {id} is not allowed")));
    }
    Ok(id)
}

/// Reads a JSON topology document and validates it.
pub fn load_topology(source: impl Read) -> Result<Topology, GatewayError> {
    let doc: TopologyDoc = serde_json::from_reader(source).map_err(|e| GatewayError::syntax(&e))?;
    let local_as = concrete(&doc.local_as, "local_as")?;
    let mut ases = BTreeMap::new();
    for (key, d) in doc.ases {
        let id = concrete(&key, "AS key")?;
        let deco = AsDecoration {
            latency_ms: d.latency_ms,
            bandwidth_mbps: d.bandwidth_mbps,
            mtu_bytes: d.mtu_bytes,
            carbon_g_per_gb: d.carbon_g_per_gb,
            geo: d.geo.map(|[lat, lon]| Geo { lat, lon }),
        };
        if ases.insert(id, deco).is_some() {
            return Err(GatewayError::Semantic(format!("AS {id} declared twice")));
        }
    }
    let links = doc
        .links
        .into_iter()
        .map(|l| {
            Ok(Link {
                a: concrete(&l.a, "link endpoint")?,
                b: concrete(&l.b, "link endpoint")?,
                latency_ms: l.latency_ms,
                bandwidth_mbps: l.bandwidth_mbps,
                mtu_bytes: l.mtu_bytes,
            })
        })
        .collect::<Result<Vec<_>, GatewayError>>()?;
    Topology::new(local_as, ases, links).map_err(|e| GatewayError::Semantic(e.to_string()))
}

pub fn load_topology_file(path: &FsPath) -> Result<Topology, GatewayError> {
    let f = fs::File::open(path).map_err(|e| GatewayError::io(path, e))?;
    load_topology(std::io::BufReader::new(f))
}

/// Static host list: JSON map of hostname to `<isd>-<as>,<host>[:<port>]`.
pub fn load_static_hosts(source: impl Read) -> Result<HashMap<String, ScionAddress>, GatewayError> {
    let raw: BTreeMap<String, String> = serde_json::from_reader(source).map_err(|e| GatewayError::syntax(&e))?;
    raw.into_iter().map(|(host, addr)| Ok((normalize_host(&host), parse_scion_address(&addr)?))).collect()
}

/// Legacy host overrides: JSON map of hostname to `ip:port`, used instead of
/// system name resolution when dialing over legacy IP.
pub fn load_legacy_hosts(source: impl Read) -> Result<HashMap<String, SocketAddr>, GatewayError> {
    let raw: BTreeMap<String, String> = serde_json::from_reader(source).map_err(|e| GatewayError::syntax(&e))?;
    raw.into_iter()
        .map(|(host, addr)| {
            let sa = addr.parse().map_err(|_| GatewayError::Config(format!("{host}: `{addr}` is not ip:port")))?;
            Ok((normalize_host(&host), sa))
        })
        .collect()
}

pub fn open(path: &FsPath) -> Result<std::io::BufReader<fs::File>, GatewayError> {
    fs::File::open(path).map(std::io::BufReader::new).map_err(|e| GatewayError::io(path, e))
}

/// Strict entries persisted one per line as `<host> <expires_at_unix_seconds>`.
/// The file is rewritten in full on every change.
#[derive(Debug, Clone)]
pub struct StrictStore {
    path: PathBuf,
}

impl StrictStore {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        StrictStore { path: path.into() }
    }

    pub fn path(&self) -> &FsPath {
        &self.path
    }

    /// Loads live entries; a missing file is an empty store. Later lines
    /// override earlier ones and malformed lines are skipped.
    pub fn load(&self, now: Timestamp) -> Result<StrictCache, GatewayError> {
        let text = match fs::read_to_string(&self.path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(GatewayError::io(&self.path, e)),
        };
        let mut cache = StrictCache::new();
        for line in text.lines() {
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next().and_then(|s| s.parse::<u64>().ok()), parts.next()) {
                (Some(host), Some(secs), None) => cache.insert(host, Timestamp::from_secs(secs)),
                _ if line.trim().is_empty() => {}
                _ => log::warn!("{}: skipping malformed line `{line}`", self.path.display()),
            }
        }
        cache.purge_expired(now);
        Ok(cache)
    }

    pub fn save(&self, cache: &StrictCache) -> Result<(), GatewayError> {
        let tmp = self.path.with_extension("tmp");
        let mut f = fs::File::create(&tmp).map_err(|e| GatewayError::io(&tmp, e))?;
        for e in cache.entries() {
            writeln!(f, "{} {}", e.host, e.expires_at.as_secs_ceil()).map_err(|e| GatewayError::io(&tmp, e))?;
        }
        f.sync_all().map_err(|e| GatewayError::io(&tmp, e))?;
        fs::rename(&tmp, &self.path).map_err(|e| GatewayError::io(&self.path, e))
    }
}
