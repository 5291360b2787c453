//! Hop decoration, end-to-end path metadata and the immutable [`Path`].

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::DomainError;
use crate::isd_as::IsdAs;

/// Smallest MTU a hop may advertise.
pub const MIN_MTU: u32 = 576;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geo {
    pub lat: f64,
    pub lon: f64,
}

/// Decoration of a single AS hop. Latency is the one-way contribution of
/// the hop in milliseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct HopMeta {
    pub id: IsdAs,
    pub latency_ms: f64,
    pub bandwidth_mbps: f64,
    pub mtu_bytes: u32,
    pub geo: Option<Geo>,
    pub carbon_g_per_gb: f64,
}

impl HopMeta {
    pub fn validate(&self) -> Result<(), DomainError> {
        let bad = |reason| Err(DomainError::InvalidHop { id: self.id, reason });
        if !self.id.is_concrete() {
            return Err(DomainError::Wildcard(self.id));
        }
        if !(self.latency_ms >= 0.0 && self.latency_ms.is_finite()) {
            return bad("latency must be finite and non-negative");
        }
        if self.bandwidth_mbps.is_nan() || self.bandwidth_mbps <= 0.0 {
            return bad("bandwidth must be positive");
        }
        if self.mtu_bytes < MIN_MTU {
            return bad("MTU below 576 bytes");
        }
        if !(self.carbon_g_per_gb >= 0.0 && self.carbon_g_per_gb.is_finite()) {
            return bad("carbon intensity must be finite and non-negative");
        }
        if let Some(g) = self.geo {
            if !(-90.0..=90.0).contains(&g.lat) || !(-180.0..=180.0).contains(&g.lon) {
                return bad("coordinates out of range");
            }
        }
        Ok(())
    }
}

/// End-to-end figures for a hop sequence: latency and carbon add up,
/// bandwidth and MTU are bottlenecked by the weakest hop.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMetadata {
    pub latency_ms: f64,
    pub bandwidth_mbps: f64,
    pub mtu_bytes: u32,
    pub carbon_g_per_gb: f64,
    pub hop_count: usize,
    pub isds: BTreeSet<u16>,
}

impl PathMetadata {
    /// Round-trip time under the one-way-per-hop latency model.
    pub fn rtt_ms(&self) -> f64 {
        2.0 * self.latency_ms
    }
}

pub fn aggregate_metadata(hops: &[HopMeta]) -> Result<PathMetadata, DomainError> {
    let first = hops.first().ok_or(DomainError::EmptyHops)?;
    let mut meta = PathMetadata {
        latency_ms: 0.0,
        bandwidth_mbps: first.bandwidth_mbps,
        mtu_bytes: first.mtu_bytes,
        carbon_g_per_gb: 0.0,
        hop_count: hops.len(),
        isds: BTreeSet::new(),
    };
    for h in hops {
        meta.latency_ms += h.latency_ms;
        meta.carbon_g_per_gb += h.carbon_g_per_gb;
        meta.bandwidth_mbps = meta.bandwidth_mbps.min(h.bandwidth_mbps);
        meta.mtu_bytes = meta.mtu_bytes.min(h.mtu_bytes);
        meta.isds.insert(h.id.isd);
    }
    Ok(meta)
}

/// Stable 64-bit FNV-1a hash of a hop identity sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathFingerprint(pub u64);

impl PathFingerprint {
    pub fn of(ids: impl IntoIterator<Item = IsdAs>) -> Self {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        let mut feed = |bytes: &[u8]| {
            for b in bytes {
                h ^= u64::from(*b);
                h = h.wrapping_mul(PRIME);
            }
        };
        for id in ids {
            // fixed-width encoding keeps hop boundaries unambiguous
            feed(&id.isd.to_be_bytes());
            feed(&id.as_id.to_be_bytes());
        }
        PathFingerprint(h)
    }
}

impl fmt::Display for PathFingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// A simple, decorated inter-domain path. Immutable once built; the
/// aggregate metadata is computed in [`Path::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    hops: Vec<HopMeta>,
    meta: PathMetadata,
}

impl Path {
    pub fn new(hops: Vec<HopMeta>) -> Result<Self, DomainError> {
        let mut seen = BTreeSet::new();
        for h in &hops {
            h.validate()?;
            if !seen.insert(h.id) {
                return Err(DomainError::RepeatedHop(h.id));
            }
        }
        let meta = aggregate_metadata(&hops)?;
        Ok(Path { hops, meta })
    }

    pub fn hops(&self) -> &[HopMeta] {
        &self.hops
    }

    pub fn meta(&self) -> &PathMetadata {
        &self.meta
    }

    pub fn src(&self) -> IsdAs {
        self.hops[0].id
    }

    pub fn dst(&self) -> IsdAs {
        self.hops[self.hops.len() - 1].id
    }

    pub fn ids(&self) -> impl Iterator<Item = IsdAs> + '_ {
        self.hops.iter().map(|h| h.id)
    }

    pub fn crosses_isd(&self, isd: u16) -> bool {
        self.meta.isds.contains(&isd)
    }

    pub fn fingerprint(&self) -> PathFingerprint {
        PathFingerprint::of(self.ids())
    }

    /// `1-1>1-2>2-1`
    pub fn sequence_string(&self) -> String {
        use core::fmt::Write;
        let mut s = String::new();
        for (i, id) in self.ids().enumerate() {
            if i > 0 {
                s.push('>');
            }
            let _ = write!(s, "{id}");
        }
        s
    }

    /// Lexicographic comparison of hop identity sequences.
    pub fn cmp_sequence(&self, other: &Path) -> core::cmp::Ordering {
        self.ids().cmp(other.ids())
    }
}
