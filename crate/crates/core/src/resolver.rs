//! Per-host availability records and the `Strict-SCION` obligation cache.
//!
//! Lookups themselves (static lists, DNS) are performed by the caller; this
//! module owns the payload grammars and the time-bounded caches.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use core::fmt;

use crate::error::ParseError;
use crate::isd_as::{parse_isd_as, IsdAs};
use crate::time::Timestamp;

pub const TXT_PREFIX: &str = "scion=";
pub const TXT_TTL_MIN_S: u64 = 10;
pub const TXT_TTL_MAX_S: u64 = 3600;
pub const STATIC_TTL_S: u64 = 3600;
pub const FAILURE_TTL_S: u64 = 30;

/// Host names are compared case-insensitively and without a trailing dot.
pub fn normalize_host(host: &str) -> String {
    host.trim_end_matches('.').to_ascii_lowercase()
}

/// A SCION endpoint: a concrete AS plus a host reachable inside it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScionAddress {
    pub id: IsdAs,
    pub host: String,
    pub port: Option<u16>,
}

impl ScionAddress {
    /// `host:port` for dialing, with IPv6 literals bracketed.
    pub fn authority(&self, default_port: u16) -> String {
        let port = self.port.unwrap_or(default_port);
        if self.host.contains(':') {
            alloc::format!("[{}]:{port}", self.host)
        } else {
            alloc::format!("{}:{port}", self.host)
        }
    }
}

impl fmt::Display for ScionAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},", self.id)?;
        match (self.port, self.host.contains(':')) {
            (Some(p), true) => write!(f, "[{}]:{p}", self.host),
            (Some(p), false) => write!(f, "{}:{p}", self.host),
            (None, _) => f.write_str(&self.host),
        }
    }
}

fn txt_err(record: &str, reason: impl Into<String>) -> ParseError {
    ParseError::Txt { record: record.to_string(), reason: reason.into() }
}

/// Parses `<isd>-<as>,<host>[:<port>]`, the payload shared by TXT records
/// and the static host list.
pub fn parse_scion_address(text: &str) -> Result<ScionAddress, ParseError> {
    let (ia, hostport) = text.split_once(',').ok_or_else(|| txt_err(text, "expected `<isd>-<as>,<host>`"))?;
    let id = parse_isd_as(ia.trim()).map_err(|e| txt_err(text, e.to_string()))?;
    if !id.is_concrete() {
        return Err(txt_err(text, "wildcard AS in address"));
    }
    let hostport = hostport.trim();
    let (host, port) = if let Some(rest) = hostport.strip_prefix('[') {
        let (h, tail) = rest.split_once(']').ok_or_else(|| txt_err(text, "unterminated `[`"))?;
        match tail {
            "" => (h, None),
            t => (h, Some(t.strip_prefix(':').ok_or_else(|| txt_err(text, "junk after `]`"))?)),
        }
    } else if hostport.matches(':').count() == 1 {
        let (h, p) = hostport.split_once(':').expect("one colon");
        (h, Some(p))
    } else {
        // bare IPv6 literal or plain host
        (hostport, None)
    };
    if host.is_empty() {
        return Err(txt_err(text, "empty host"));
    }
    let port = match port {
        None => None,
        Some(p) => match p.parse::<u16>() {
            Ok(0) | Err(_) => return Err(txt_err(text, "port must be in 1..=65535")),
            Ok(n) => Some(n),
        },
    };
    Ok(ScionAddress { id, host: host.to_string(), port })
}

/// Parses a DNS TXT payload of the form `scion=<isd>-<as>,<host>[:<port>]`.
pub fn parse_txt(record: &str) -> Result<ScionAddress, ParseError> {
    let body = record.trim().strip_prefix(TXT_PREFIX).ok_or_else(|| txt_err(record, "missing `scion=` prefix"))?;
    parse_scion_address(body).map_err(|e| match e {
        ParseError::Txt { reason, .. } => txt_err(record, reason),
        other => other,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    ScionCapable(ScionAddress),
    IpOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ResolutionSource {
    Static,
    DnsTxt,
    Header,
}

impl ResolutionSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            ResolutionSource::Static => "static",
            ResolutionSource::DnsTxt => "dns-txt",
            ResolutionSource::Header => "header",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolution {
    pub host: String,
    pub outcome: Outcome,
    pub source: Option<ResolutionSource>,
    pub resolved_at: Timestamp,
    pub ttl_s: u64,
    /// Set when the lookup failed rather than returning no record.
    pub error: Option<String>,
}

impl Resolution {
    pub fn expires_at(&self) -> Timestamp {
        self.resolved_at.saturating_add_secs(self.ttl_s)
    }

    pub fn is_fresh(&self, now: Timestamp) -> bool {
        now < self.expires_at()
    }

    pub fn address(&self) -> Option<&ScionAddress> {
        match &self.outcome {
            Outcome::ScionCapable(a) => Some(a),
            Outcome::IpOnly => None,
        }
    }
}

pub fn clamp_txt_ttl(ttl_s: u64) -> u64 {
    ttl_s.clamp(TXT_TTL_MIN_S, TXT_TTL_MAX_S)
}

/// Host-keyed cache that never hands out an expired [`Resolution`].
#[derive(Debug, Clone, Default)]
pub struct ResolutionCache {
    entries: BTreeMap<String, Resolution>,
}

impl ResolutionCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, host: &str, now: Timestamp) -> Option<&Resolution> {
        self.entries.get(&normalize_host(host)).filter(|r| r.is_fresh(now))
    }

    pub fn insert(&mut self, resolution: Resolution) {
        // zero TTLs are bumped to one second to keep ttl_s > 0
        let mut r = resolution;
        r.ttl_s = r.ttl_s.max(1);
        self.entries.insert(normalize_host(&r.host), r);
    }

    pub fn purge_expired(&mut self, now: Timestamp) {
        self.entries.retain(|_, r| r.is_fresh(now));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrictDirective {
    MaxAge(u64),
}

/// Parses a `Strict-SCION` value. Only `max-age=<seconds>` is understood;
/// other `;`-separated directives are skipped.
pub fn parse_strict_header(value: &str) -> Result<StrictDirective, ParseError> {
    let err = || ParseError::StrictHeader { value: value.to_string() };
    let mut max_age = None;
    for directive in value.split(';').map(str::trim).filter(|d| !d.is_empty()) {
        let Some((name, v)) = directive.split_once('=') else { continue };
        if !name.trim().eq_ignore_ascii_case("max-age") {
            continue;
        }
        if max_age.is_some() {
            return Err(err());
        }
        let v = v.trim();
        let v = v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v);
        if v.is_empty() || !v.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        max_age = Some(v.parse::<u64>().map_err(|_| err())?);
    }
    max_age.map(StrictDirective::MaxAge).ok_or_else(err)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrictEntry {
    pub host: String,
    pub expires_at: Timestamp,
}

/// What a header did to the cache.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StrictChange {
    Upserted(StrictEntry),
    Removed,
}

/// Host-scoped strict-mode obligations, HSTS style: renewable, cleared by
/// `max-age=0`, and treated as absent once expired.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StrictCache {
    entries: BTreeMap<String, Timestamp>,
}

impl StrictCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Applies a header value received from `host` at `now`. Malformed
    /// values leave the cache untouched.
    pub fn record_header(&mut self, host: &str, value: &str, now: Timestamp) -> Result<StrictChange, ParseError> {
        let StrictDirective::MaxAge(secs) = parse_strict_header(value)?;
        let host = normalize_host(host);
        if secs == 0 {
            self.entries.remove(&host);
            return Ok(StrictChange::Removed);
        }
        let expires_at = now.saturating_add_secs(secs);
        self.entries.insert(host.clone(), expires_at);
        Ok(StrictChange::Upserted(StrictEntry { host, expires_at }))
    }

    /// Inserts an entry directly (used when loading persisted state).
    pub fn insert(&mut self, host: &str, expires_at: Timestamp) {
        self.entries.insert(normalize_host(host), expires_at);
    }

    pub fn is_strict(&self, host: &str, now: Timestamp) -> bool {
        self.expiry(host, now).is_some()
    }

    /// Expiry of the live entry for `host`, if any.
    pub fn expiry(&self, host: &str, now: Timestamp) -> Option<Timestamp> {
        self.entries.get(&normalize_host(host)).copied().filter(|e| *e > now)
    }

    pub fn purge_expired(&mut self, now: Timestamp) {
        self.entries.retain(|_, e| *e > now);
    }

    pub fn entries(&self) -> impl Iterator<Item = StrictEntry> + '_ {
        self.entries.iter().map(|(h, e)| StrictEntry { host: h.clone(), expires_at: *e })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
