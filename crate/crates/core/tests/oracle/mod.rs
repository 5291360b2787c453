//! Brute-force reference implementations used to check path enumeration
//! and policy evaluation. Nothing here calls the enumeration or evaluation
//! code under test; paths are rebuilt from raw hop data.

#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use pan_gate_core::policy::Action;
use pan_gate_core::{AsDecoration, Direction, IsdAs, Link, Metric, Path, Policy, Topology};
use rand::Rng;

pub type Seq = Vec<IsdAs>;

/// Every ordering of every subset of `pool`, including the empty one.
fn arrangements(pool: &[IsdAs], max_len: usize) -> Vec<Seq> {
    let mut out = vec![Vec::new()];
    let mut frontier: Vec<Seq> = vec![Vec::new()];
    for _ in 0..max_len.min(pool.len()) {
        let mut next = Vec::new();
        for s in &frontier {
            for x in pool {
                if !s.contains(x) {
                    let mut t = s.clone();
                    t.push(*x);
                    next.push(t);
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// All simple `src`..`dst` hop sequences of at most `max_hops` hops,
/// found by generating every candidate sequence and keeping those whose
/// consecutive pairs are linked.
pub fn simple_paths(topo: &Topology, src: IsdAs, dst: IsdAs, max_hops: usize) -> BTreeSet<Seq> {
    let edges: BTreeSet<(IsdAs, IsdAs)> = topo.links().iter().flat_map(|l| [(l.a, l.b), (l.b, l.a)]).collect();
    let mut out = BTreeSet::new();
    if src == dst {
        out.insert(vec![src]);
        return out;
    }
    if max_hops < 2 {
        return out;
    }
    let pool: Vec<IsdAs> = topo.ases().keys().copied().filter(|x| *x != src && *x != dst).collect();
    for middle in arrangements(&pool, max_hops - 2) {
        let mut seq = vec![src];
        seq.extend(middle);
        seq.push(dst);
        if seq.windows(2).all(|w| edges.contains(&(w[0], w[1]))) {
            out.insert(seq);
        }
    }
    out
}

fn pattern_matches(pattern: IsdAs, hop: IsdAs) -> bool {
    let isd_ok = pattern.isd == 0 || pattern.isd == hop.isd;
    let as_ok = pattern.as_id == 0 || pattern.as_id == hop.as_id;
    isd_ok && as_ok
}

pub fn hop_allowed(policy: &Policy, hop: IsdAs) -> bool {
    for e in policy.acl() {
        if pattern_matches(e.pattern, hop) {
            return e.action == Action::Allow;
        }
    }
    true
}

fn metric_of(metric: Metric, path: &Path) -> f64 {
    let hops = path.hops();
    match metric {
        Metric::Latency => hops.iter().map(|h| h.latency_ms).sum(),
        Metric::Carbon => hops.iter().map(|h| h.carbon_g_per_gb).sum(),
        Metric::Bandwidth => hops.iter().map(|h| h.bandwidth_mbps).fold(f64::INFINITY, f64::min),
        Metric::Mtu => hops.iter().map(|h| h.mtu_bytes).min().unwrap() as f64,
        Metric::Hops => hops.len() as f64,
    }
}

fn ids(path: &Path) -> Vec<(u16, u64)> {
    path.hops().iter().map(|h| (h.id.isd, h.id.as_id)).collect()
}

fn oracle_cmp(policy: &Policy, a: &Path, b: &Path) -> Ordering {
    for k in policy.orderings() {
        let (x, y) = (metric_of(k.metric, a), metric_of(k.metric, b));
        let o = x.partial_cmp(&y).expect("finite metrics");
        let o = if k.direction == Direction::Desc { o.reverse() } else { o };
        if o != Ordering::Equal {
            return o;
        }
    }
    ids(a).cmp(&ids(b))
}

/// Filter every path hop by hop, then insertion-sort by the ordering keys.
pub fn evaluate(policy: &Policy, paths: &[Path]) -> Vec<Path> {
    let mut out: Vec<Path> = Vec::new();
    for p in paths {
        if !p.hops().iter().all(|h| hop_allowed(policy, h.id)) {
            continue;
        }
        let pos = out.iter().position(|q| oracle_cmp(policy, p, q) == Ordering::Less).unwrap_or(out.len());
        out.insert(pos, p.clone());
    }
    out
}

pub fn decoration<R: Rng>(rng: &mut R) -> AsDecoration {
    AsDecoration {
        latency_ms: f64::from(rng.gen_range(0..20u32)),
        bandwidth_mbps: f64::from(rng.gen_range(1..10u32)) * 100.0,
        mtu_bytes: rng.gen_range(1280..=1500),
        carbon_g_per_gb: f64::from(rng.gen_range(0..50u32)),
        geo: None,
    }
}

/// A connected-ish random graph of `n` ASes spread over ISDs 1..=4.
/// The first AS is the local one.
pub fn random_topology<R: Rng>(rng: &mut R, n: usize, edge_prob: f64) -> Topology {
    let mut ids = BTreeSet::new();
    while ids.len() < n {
        ids.insert(IsdAs::new(rng.gen_range(1..=4), rng.gen_range(1..=20)));
    }
    let ids: Vec<IsdAs> = ids.into_iter().collect();
    let ases: BTreeMap<IsdAs, AsDecoration> = ids.iter().map(|i| (*i, decoration(rng))).collect();
    let mut links = Vec::new();
    for (i, a) in ids.iter().enumerate() {
        for b in &ids[i + 1..] {
            if rng.gen_bool(edge_prob) {
                links.push(Link {
                    a: *a,
                    b: *b,
                    latency_ms: f64::from(rng.gen_range(0..40u32)),
                    bandwidth_mbps: f64::from(rng.gen_range(1..10u32)) * 50.0,
                    mtu_bytes: rng.gen_range(1200..=1500),
                });
            }
        }
    }
    Topology::new(ids[0], ases, links).expect("generated topology is valid")
}

/// Random policy text over the ISDs/ASes of `topo`, parsed through the real
/// grammar.
pub fn random_policy_text<R: Rng>(rng: &mut R, topo: &Topology) -> String {
    let ids: Vec<IsdAs> = topo.ases().keys().copied().collect();
    let mut text = String::new();
    for _ in 0..rng.gen_range(0..5) {
        let id = ids[rng.gen_range(0..ids.len())];
        let pattern = match rng.gen_range(0..3) {
            0 => format!("{}-0", id.isd),
            1 => format!("{id}"),
            _ => format!("0-{}", id.as_id),
        };
        let sign = if rng.gen_bool(0.6) { '-' } else { '+' };
        text.push_str(&format!("{sign} {pattern}\n"));
    }
    match rng.gen_range(0..3) {
        0 => text.push_str("+ 0-0\n"),
        1 => text.push_str("- 0-0\n"),
        _ => {}
    }
    let mut metrics = Metric::ALL.to_vec();
    for _ in 0..rng.gen_range(0..=3) {
        let m = metrics.remove(rng.gen_range(0..metrics.len()));
        let dir = if rng.gen_bool(0.5) { "asc" } else { "desc" };
        text.push_str(&format!("order {} {dir}\n", m.as_str()));
    }
    text
}

/// A handful of fixed small graphs: chain, diamond, triangle, star, K4, ladder,
/// K5, a wheel on 6 nodes, a 2x4 grid, an 8-cycle with chords, and K8.
pub fn fixture_graphs() -> Vec<(String, Topology)> {
    let ia = |i: u64| IsdAs::new(1 + (i % 3) as u16, 1 + i);
    let deco = AsDecoration { latency_ms: 1.0, bandwidth_mbps: 100.0, mtu_bytes: 1500, carbon_g_per_gb: 1.0, geo: None };
    let build = |n: u64, edges: &[(u64, u64)]| {
        let ases = (0..n).map(|i| (ia(i), deco.clone())).collect();
        let links = edges
            .iter()
            .map(|(a, b)| Link {
                a: ia(*a),
                b: ia(*b),
                latency_ms: (1 + a * 7 + b * 3) as f64,
                bandwidth_mbps: 100.0,
                mtu_bytes: 1500,
            })
            .collect();
        Topology::new(ia(0), ases, links).unwrap()
    };
    let complete = |n: u64| (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect::<Vec<_>>();
    vec![
        ("chain".into(), build(3, &[(0, 1), (1, 2)])),
        ("diamond".into(), build(4, &[(0, 1), (0, 2), (1, 3), (2, 3)])),
        ("triangle".into(), build(3, &[(0, 1), (1, 2), (0, 2)])),
        ("star".into(), build(5, &[(0, 1), (0, 2), (0, 3), (0, 4)])),
        ("k4".into(), build(4, &complete(4))),
        ("ladder".into(), build(6, &[(0, 1), (1, 2), (3, 4), (4, 5), (0, 3), (1, 4), (2, 5)])),
        ("k5".into(), build(5, &complete(5))),
        ("wheel6".into(), build(6, &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (1, 2), (2, 3), (3, 4), (4, 5), (5, 1)])),
        ("grid2x4".into(), build(8, &[(0, 1), (1, 2), (2, 3), (4, 5), (5, 6), (6, 7), (0, 4), (1, 5), (2, 6), (3, 7)])),
        ("cycle8".into(), build(8, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (7, 0), (0, 4), (2, 6)])),
        ("disconnected".into(), build(6, &[(0, 1), (1, 2), (3, 4), (4, 5)])),
        ("k8".into(), build(8, &complete(8))),
    ]
}
