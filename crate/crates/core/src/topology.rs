//! Static AS-level topology and bounded simple-path enumeration.
//!
//! The topology stands in for path discovery: instead of collecting path
//! segments, every simple path between two ASes up to a hop bound is
//! enumerated and decorated from per-AS and per-link figures.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use crate::error::DomainError;
use crate::isd_as::IsdAs;
use crate::path::{Geo, HopMeta, Path, MIN_MTU};

pub const DEFAULT_MAX_HOPS: usize = 8;
pub const DEFAULT_MAX_PATHS: usize = 128;

/// Per-AS decoration defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct AsDecoration {
    pub latency_ms: f64,
    pub bandwidth_mbps: f64,
    pub mtu_bytes: u32,
    pub carbon_g_per_gb: f64,
    pub geo: Option<Geo>,
}

/// Undirected inter-AS link.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub a: IsdAs,
    pub b: IsdAs,
    pub latency_ms: f64,
    pub bandwidth_mbps: f64,
    pub mtu_bytes: u32,
}

#[derive(Debug, Clone)]
pub struct Topology {
    local_as: IsdAs,
    ases: BTreeMap<IsdAs, AsDecoration>,
    links: Vec<Link>,
    // neighbour -> index into `links`, sorted by neighbour id
    adjacency: BTreeMap<IsdAs, BTreeMap<IsdAs, usize>>,
}

fn check_link(l: &Link) -> Result<(), DomainError> {
    let err = |what: &str| Err(DomainError::Topology(format!("link {}-{}: {what}", l.a, l.b)));
    if !(l.latency_ms >= 0.0 && l.latency_ms.is_finite()) {
        return err("latency must be finite and non-negative");
    }
    if l.bandwidth_mbps.is_nan() || l.bandwidth_mbps <= 0.0 {
        return err("bandwidth must be positive");
    }
    if l.mtu_bytes < MIN_MTU {
        return err("MTU below 576 bytes");
    }
    Ok(())
}

impl Topology {
    pub fn new(
        local_as: IsdAs,
        ases: BTreeMap<IsdAs, AsDecoration>,
        links: Vec<Link>,
    ) -> Result<Self, DomainError> {
        if !local_as.is_concrete() {
            return Err(DomainError::Wildcard(local_as));
        }
        for (id, d) in &ases {
            // a lone hop through this AS exercises every decoration check
            HopMeta {
                id: *id,
                latency_ms: d.latency_ms,
                bandwidth_mbps: d.bandwidth_mbps,
                mtu_bytes: d.mtu_bytes,
                geo: d.geo,
                carbon_g_per_gb: d.carbon_g_per_gb,
            }
            .validate()?;
        }
        if !ases.contains_key(&local_as) {
            return Err(DomainError::Topology(format!("local AS {local_as} is not declared")));
        }
        let mut adjacency: BTreeMap<IsdAs, BTreeMap<IsdAs, usize>> =
            ases.keys().map(|k| (*k, BTreeMap::new())).collect();
        for (idx, l) in links.iter().enumerate() {
            for end in [l.a, l.b] {
                if !end.is_concrete() {
                    return Err(DomainError::Wildcard(end));
                }
                if !ases.contains_key(&end) {
                    return Err(DomainError::Topology(format!("link endpoint {end} is not declared")));
                }
            }
            if l.a == l.b {
                return Err(DomainError::Topology(format!("self-link on {}", l.a)));
            }
            check_link(l)?;
            if adjacency[&l.a].contains_key(&l.b) {
                return Err(DomainError::Topology(format!("duplicate link {}-{}", l.a, l.b)));
            }
            adjacency.get_mut(&l.a).expect("declared").insert(l.b, idx);
            adjacency.get_mut(&l.b).expect("declared").insert(l.a, idx);
        }
        Ok(Topology { local_as, ases, links, adjacency })
    }

    pub fn local_as(&self) -> IsdAs {
        self.local_as
    }

    pub fn ases(&self) -> &BTreeMap<IsdAs, AsDecoration> {
        &self.ases
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn contains(&self, id: &IsdAs) -> bool {
        self.ases.contains_key(id)
    }

    pub fn neighbours(&self, id: &IsdAs) -> impl Iterator<Item = IsdAs> + '_ {
        self.adjacency.get(id).into_iter().flat_map(|m| m.keys().copied())
    }

    pub fn link_between(&self, a: &IsdAs, b: &IsdAs) -> Option<&Link> {
        self.adjacency.get(a)?.get(b).map(|i| &self.links[*i])
    }

    /// Decorates a hop sequence: each hop carries its AS defaults combined
    /// with the link it was entered through (latency added, bandwidth and
    /// MTU bottlenecked).
    pub fn decorate(&self, seq: &[IsdAs]) -> Result<Path, DomainError> {
        let mut hops = Vec::with_capacity(seq.len());
        for (i, id) in seq.iter().enumerate() {
            let d = self.ases.get(id).ok_or(DomainError::UnknownAs(*id))?;
            let mut hop = HopMeta {
                id: *id,
                latency_ms: d.latency_ms,
                bandwidth_mbps: d.bandwidth_mbps,
                mtu_bytes: d.mtu_bytes,
                geo: d.geo,
                carbon_g_per_gb: d.carbon_g_per_gb,
            };
            if i > 0 {
                let prev = &seq[i - 1];
                let link = self
                    .link_between(prev, id)
                    .ok_or_else(|| DomainError::Topology(format!("no link between {prev} and {id}")))?;
                hop.latency_ms += link.latency_ms;
                hop.bandwidth_mbps = hop.bandwidth_mbps.min(link.bandwidth_mbps);
                hop.mtu_bytes = hop.mtu_bytes.min(link.mtu_bytes);
            }
            hops.push(hop);
        }
        Path::new(hops)
    }

    /// Every simple path from `src` to `dst` with at most `max_hops` hops,
    /// in discovery order (neighbours visited in ascending id order).
    pub fn all_simple_paths(&self, src: IsdAs, dst: IsdAs, max_hops: usize) -> Result<Vec<Path>, DomainError> {
        if max_hops == 0 {
            return Err(DomainError::ZeroBound("max_hops"));
        }
        for end in [src, dst] {
            if !self.contains(&end) {
                return Err(DomainError::UnknownAs(end));
            }
        }
        let mut out = Vec::new();
        if src == dst {
            out.push(self.decorate(&[src])?);
            return Ok(out);
        }

        // explicit stack of (node, next-neighbour iterator position)
        let mut seq = Vec::with_capacity(max_hops);
        let mut on_path = BTreeSet::new();
        let mut stack: Vec<Vec<IsdAs>> = Vec::new();
        seq.push(src);
        on_path.insert(src);
        stack.push(self.neighbours(&src).collect::<Vec<_>>().into_iter().rev().collect());
        while let Some(frontier) = stack.last_mut() {
            match frontier.pop() {
                Some(next) => {
                    if on_path.contains(&next) {
                        continue;
                    }
                    if next == dst {
                        if seq.len() + 1 > max_hops {
                            continue;
                        }
                        seq.push(next);
                        out.push(self.decorate(&seq)?);
                        seq.pop();
                    } else if seq.len() + 1 < max_hops {
                        seq.push(next);
                        on_path.insert(next);
                        stack.push(self.neighbours(&next).collect::<Vec<_>>().into_iter().rev().collect());
                    }
                }
                None => {
                    stack.pop();
                    if let Some(n) = seq.pop() {
                        on_path.remove(&n);
                    }
                }
            }
        }
        Ok(out)
    }

    /// [`Self::all_simple_paths`] ordered by latency (ascending, then hop
    /// sequence) and truncated to `max_paths`.
    pub fn enumerate_paths(
        &self,
        src: IsdAs,
        dst: IsdAs,
        max_hops: usize,
        max_paths: usize,
    ) -> Result<Vec<Path>, DomainError> {
        if max_paths == 0 {
            return Err(DomainError::ZeroBound("max_paths"));
        }
        let mut paths = self.all_simple_paths(src, dst, max_hops)?;
        paths.sort_by(|a, b| {
            a.meta().latency_ms.total_cmp(&b.meta().latency_ms).then_with(|| a.cmp_sequence(b))
        });
        paths.truncate(max_paths);
        Ok(paths)
    }
}
