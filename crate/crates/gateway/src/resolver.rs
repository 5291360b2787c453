//! Per-host SCION availability: static list, DNS TXT records, and the
//! strict-mode obligations learned from `Strict-SCION` response headers.

use std::collections::{BTreeMap, HashMap};
use std::future::Future;
use std::io::Read;
use std::pin::Pin;
use std::sync::Arc;
use std::time::Instant;

use parking_lot::Mutex;
use pan_gate_core::resolver::{clamp_txt_ttl, FAILURE_TTL_S, STATIC_TTL_S};
use pan_gate_core::{
    normalize_host, parse_txt, Outcome, Resolution, ResolutionCache, ResolutionSource, ScionAddress, StrictCache,
    StrictChange, StrictEntry, Timestamp,
};
use serde::Deserialize;

use crate::error::GatewayError;
use crate::formats::StrictStore;

pub type BoxFuture<'a, T> = Pin<Box<dyn Future<Output = T> + Send + 'a>>;

/// TXT strings for a name plus the TTL to cache the answer for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxtAnswer {
    pub records: Vec<String>,
    pub ttl_s: u64,
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("TXT lookup failed: {0}")]
pub struct TxtError(pub String);

pub trait TxtLookup: Send + Sync {
    /// An empty record list means the name has no TXT records.
    fn lookup<'a>(&'a self, name: &'a str) -> BoxFuture<'a, Result<TxtAnswer, TxtError>>;
}

/// Answers nothing for every name.
pub struct NoTxt;

impl TxtLookup for NoTxt {
    fn lookup<'a>(&'a self, _name: &'a str) -> BoxFuture<'a, Result<TxtAnswer, TxtError>> {
        Box::pin(async { Ok(TxtAnswer { records: Vec::new(), ttl_s: 60 }) })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum FixtureEntry {
    Records(Vec<String>),
    WithTtl { txt: Vec<String>, ttl: u64 },
    Failure { error: String },
}

/// Stub resolver answering from a fixtures document:
///
/// ```json
/// { "shop.test": ["scion=2-1,127.0.0.1:8080"],
///   "slow.test": {"txt": ["scion=2-2,10.0.0.1"], "ttl": 5},
///   "broken.test": {"error": "SERVFAIL"} }
/// ```
#[derive(Debug, Clone, Default)]
pub struct FixtureTxt {
    entries: HashMap<String, FixtureEntry>,
}

pub const FIXTURE_DEFAULT_TTL_S: u64 = 300;

impl FixtureTxt {
    pub fn from_reader(source: impl Read) -> Result<Self, GatewayError> {
        let raw: BTreeMap<String, FixtureEntry> =
            serde_json::from_reader(source).map_err(|e| GatewayError::syntax(&e))?;
        Ok(FixtureTxt { entries: raw.into_iter().map(|(k, v)| (normalize_host(&k), v)).collect() })
    }

    pub fn insert(&mut self, name: &str, records: Vec<String>, ttl_s: u64) {
        self.entries.insert(normalize_host(name), FixtureEntry::WithTtl { txt: records, ttl: ttl_s });
    }

    pub fn insert_failure(&mut self, name: &str, error: &str) {
        self.entries.insert(normalize_host(name), FixtureEntry::Failure { error: error.into() });
    }
}

impl TxtLookup for FixtureTxt {
    fn lookup<'a>(&'a self, name: &'a str) -> BoxFuture<'a, Result<TxtAnswer, TxtError>> {
        let answer = match self.entries.get(&normalize_host(name)) {
            None => Ok(TxtAnswer { records: Vec::new(), ttl_s: FIXTURE_DEFAULT_TTL_S }),
            Some(FixtureEntry::Records(r)) => Ok(TxtAnswer { records: r.clone(), ttl_s: FIXTURE_DEFAULT_TTL_S }),
            Some(FixtureEntry::WithTtl { txt, ttl }) => Ok(TxtAnswer { records: txt.clone(), ttl_s: *ttl }),
            Some(FixtureEntry::Failure { error }) => Err(TxtError(error.clone())),
        };
        Box::pin(async move { answer })
    }
}

/// TXT lookups through the system's configured DNS servers.
pub struct SystemTxt {
    resolver: hickory_resolver::TokioResolver,
}

impl SystemTxt {
    pub fn new() -> Result<Self, GatewayError> {
        let resolver = hickory_resolver::TokioResolver::builder_tokio()
            .map_err(|e| GatewayError::Config(format!("DNS resolver: {e}")))?
            .build();
        Ok(SystemTxt { resolver })
    }
}

impl TxtLookup for SystemTxt {
    fn lookup<'a>(&'a self, name: &'a str) -> BoxFuture<'a, Result<TxtAnswer, TxtError>> {
        Box::pin(async move {
            match self.resolver.txt_lookup(name).await {
                Ok(answer) => {
                    let ttl_s = answer.valid_until().saturating_duration_since(Instant::now()).as_secs();
                    let records = answer
                        .iter()
                        .map(|txt| txt.txt_data().iter().map(|part| String::from_utf8_lossy(part)).collect::<String>())
                        .collect();
                    Ok(TxtAnswer { records, ttl_s })
                }
                Err(e) if e.is_no_records_found() => Ok(TxtAnswer { records: Vec::new(), ttl_s: 60 }),
                Err(e) => Err(TxtError(e.to_string())),
            }
        })
    }
}

pub struct Resolver {
    static_hosts: HashMap<String, ScionAddress>,
    txt: Arc<dyn TxtLookup>,
    cache: Mutex<ResolutionCache>,
    strict: Mutex<StrictCache>,
    store: Option<StrictStore>,
}

impl Resolver {
    pub fn new(static_hosts: HashMap<String, ScionAddress>, txt: Arc<dyn TxtLookup>) -> Self {
        Resolver {
            static_hosts: static_hosts.into_iter().map(|(k, v)| (normalize_host(&k), v)).collect(),
            txt,
            cache: Mutex::new(ResolutionCache::new()),
            strict: Mutex::new(StrictCache::new()),
            store: None,
        }
    }

    /// Persists strict entries to `store`, starting from its current contents.
    pub fn with_strict_store(mut self, store: StrictStore, now: Timestamp) -> Result<Self, GatewayError> {
        *self.strict.get_mut() = store.load(now)?;
        self.store = Some(store);
        Ok(self)
    }

    /// Cache, then static list, then DNS TXT; anything else is IP-only.
    pub async fn resolve(&self, host: &str, now: Timestamp) -> Resolution {
        let host = normalize_host(host);
        if let Some(hit) = self.cache.lock().get(&host, now) {
            return hit.clone();
        }
        let resolution = self.resolve_uncached(&host, now).await;
        self.cache.lock().insert(resolution.clone());
        resolution
    }

    async fn resolve_uncached(&self, host: &str, now: Timestamp) -> Resolution {
        let resolution = |outcome, source, ttl_s, error| Resolution {
            host: host.to_string(),
            outcome,
            source: Some(source),
            resolved_at: now,
            ttl_s,
            error,
        };
        if let Some(addr) = self.static_hosts.get(host) {
            return resolution(Outcome::ScionCapable(addr.clone()), ResolutionSource::Static, STATIC_TTL_S, None);
        }
        match self.txt.lookup(host).await {
            Ok(answer) => {
                let ttl = clamp_txt_ttl(answer.ttl_s);
                let addr = answer.records.iter().find_map(|r| parse_txt(r).ok());
                match addr {
                    Some(a) => resolution(Outcome::ScionCapable(a), ResolutionSource::DnsTxt, ttl, None),
                    None => resolution(Outcome::IpOnly, ResolutionSource::DnsTxt, ttl, None),
                }
            }
            Err(e) => {
                log::warn!("TXT lookup for {host} failed: {e}");
                resolution(Outcome::IpOnly, ResolutionSource::DnsTxt, FAILURE_TTL_S, Some(e.0))
            }
        }
    }

    /// Applies a `Strict-SCION` header value. Headers that did not arrive
    /// over a PAN channel are ignored; malformed values are logged and ignored.
    pub fn record_strict_header(&self, host: &str, value: &str, now: Timestamp, over_pan: bool) -> Option<StrictChange> {
        if !over_pan {
            log::debug!("ignoring Strict-SCION from {host} received over legacy IP");
            return None;
        }
        let mut strict = self.strict.lock();
        match strict.record_header(host, value, now) {
            Ok(change) => {
                strict.purge_expired(now);
                if let Some(store) = &self.store {
                    if let Err(e) = store.save(&strict) {
                        log::error!("persisting strict entries: {e}");
                    }
                }
                Some(change)
            }
            Err(e) => {
                log::warn!("{host}: {e}");
                None
            }
        }
    }

    pub fn is_strict(&self, host: &str, now: Timestamp) -> bool {
        self.strict.lock().is_strict(host, now)
    }

    pub fn strict_expiry(&self, host: &str, now: Timestamp) -> Option<Timestamp> {
        self.strict.lock().expiry(host, now)
    }

    pub fn strict_entries(&self, now: Timestamp) -> Vec<StrictEntry> {
        self.strict.lock().entries().filter(|e| e.expires_at > now).collect()
    }
}
