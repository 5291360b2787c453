//! Acceptance suite. Runs every criterion in sequence (timing-sensitive
//! checks must not share the machine with each other) and prints one
//! PASS/FAIL line per criterion. Exits non-zero if any criterion fails.

#[path = "../common/mod.rs"]
mod common;
#[path = "../../../core/tests/oracle/mod.rs"]
mod oracle;

use std::collections::BTreeSet;
use std::future::Future;
use std::panic::AssertUnwindSafe;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{bed, Bed, BedOptions, LEGACY_HOST, PAN_HOST};
use futures_util::FutureExt;
use hyper::StatusCode;
use pan_gate::plt::median;
use pan_gate::resolver::FixtureTxt;
use pan_gate_core::{
    evaluate, parse_policy, BlockReason, Clock, Decision, Indicator, IsdAs, ManualClock, ModeOrigin, ModeValue,
    ScionAddress, Timestamp,
};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn policy_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(0x9011c1);
    let trials = 250;
    let (mut mismatches, mut paths_seen) = (0, 0);
    for _ in 0..trials {
        let n = rng.gen_range(2..=8);
        let density = rng.gen_range(0.3..0.7);
        let topo = oracle::random_topology(&mut rng, n, density);
        let ids: Vec<IsdAs> = topo.ases().keys().copied().collect();
        let dst = ids[rng.gen_range(0..ids.len())];
        let paths = topo.enumerate_paths(topo.local_as(), dst, 8, usize::MAX).map_err(|e| e.to_string())?;
        let text = oracle::random_policy_text(&mut rng, &topo);
        let policy = parse_policy(&text).map_err(|e| format!("generated policy rejected: {e}\n{text}"))?;
        paths_seen += paths.len();
        if evaluate(&policy, &paths) != oracle::evaluate(&policy, &paths) {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    check(
        mismatches == 0 && elapsed < Duration::from_secs(10),
        format!("{trials} trials, {paths_seen} paths, {mismatches} mismatches, {:.2} s (limit 10 s)", elapsed.as_secs_f64()),
    )
}

fn enumeration_oracle() -> Verdict {
    let start = Instant::now();
    let mut graphs = oracle::fixture_graphs();
    let mut rng = StdRng::seed_from_u64(0xe1e1);
    for i in 0..100 {
        let n = rng.gen_range(2..=8);
        let density = rng.gen_range(0.2..0.8);
        graphs.push((format!("random-{i}"), oracle::random_topology(&mut rng, n, density)));
    }
    let (mut pairs, mut mismatches) = (0, Vec::new());
    for (name, topo) in &graphs {
        for &src in topo.ases().keys() {
            for &dst in topo.ases().keys() {
                let got: BTreeSet<Vec<IsdAs>> = topo
                    .enumerate_paths(src, dst, 8, usize::MAX)
                    .map_err(|e| e.to_string())?
                    .iter()
                    .map(|p| p.ids().collect())
                    .collect();
                pairs += 1;
                if got != oracle::simple_paths(topo, src, dst, 8) {
                    mismatches.push(format!("{name} {src}->{dst}"));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        mismatches.is_empty() && elapsed < Duration::from_secs(10),
        format!(
            "{} graphs, {pairs} pairs, {} mismatches {:?}, {:.2} s (limit 10 s)",
            graphs.len(),
            mismatches.len(),
            mismatches.iter().take(3).collect::<Vec<_>>(),
            elapsed.as_secs_f64()
        ),
    )
}

async fn geofencing() -> Verdict {
    let deny3 = std::fs::read_to_string(common::fixture("policies/deny-isd3.policy")).unwrap();
    let b = bed(BedOptions { topology: "diamond", pan_as: IsdAs::new(1, 4), policy: deny3, ..Default::default() }).await;
    let mut served_via_pan = 0;
    for i in 0..50 {
        if i == 25 {
            b.gw.set_global_mode(ModeValue::Strict);
        }
        let f = b.loader("geo").fetch(&format!("http://{PAN_HOST}/single/r{}.txt", i % 10)).await.map_err(|e| e.to_string())?;
        if f.status == StatusCode::OK && f.route.as_deref() == Some("pan") {
            served_via_pan += 1;
        }
    }
    let audit = b.gw.emulator().audit();
    let isd3 = audit.bytes_through_isd(3);
    let isd2 = audit.bytes_through_isd(2);
    let channels = audit.channels().len();

    // control run: the same traffic without the deny line does cross ISD 3
    let control = bed(BedOptions {
        topology: "diamond",
        pan_as: IsdAs::new(1, 4),
        policy: "+ 0-0\norder latency asc\n".into(),
        ..Default::default()
    })
    .await;
    control.loader("geo-control").fetch(&format!("http://{PAN_HOST}/single/r0.txt")).await.map_err(|e| e.to_string())?;
    let control_isd3 = control.gw.emulator().audit().bytes_through_isd(3);

    check(
        isd3 == 0 && served_via_pan == 50 && channels == 50 && isd2 > 0 && control_isd3 > 0,
        format!(
            "50 requests (25 opportunistic, 25 strict): {served_via_pan} via PAN, {channels} channels, \
             bytes over ISD 3 = {isd3}, over ISD 2 = {isd2}; control run without the deny line put {control_isd3} bytes over ISD 3"
        ),
    )
}

async fn strict_blocking() -> Verdict {
    let b = bed(BedOptions { mode: ModeValue::Strict, ..Default::default() }).await;
    let load = b.loader("strict-experiment").load(&format!("http://{PAN_HOST}/strict/index.html")).await.map_err(|e| e.to_string())?;
    let relayed = load.all().filter(|f| f.status == StatusCode::OK).count();
    let blocked = load
        .resources
        .iter()
        .filter(|f| f.status == StatusCode::BAD_GATEWAY && f.blocked_reason.is_some() && f.route.as_deref() == Some("blocked"))
        .count();
    let r = b.gw.classify_page("strict-experiment");
    let legacy_hits = b.legacy.requests_served();
    check(
        relayed == 1
            && load.document.route.as_deref() == Some("pan")
            && blocked == 5
            && (r.total, r.via_pan, r.blocked, r.via_legacy) == (6, 1, 5, 0)
            && legacy_hits == 0,
        format!(
            "relayed {relayed}, blocked {blocked} with 502/X-PAN-Blocked ({}); report total {} via_pan {} blocked {} via_legacy {}; \
             legacy origin saw {legacy_hits} requests",
            load.resources.first().and_then(|f| f.blocked_reason.clone()).unwrap_or_default(),
            r.total,
            r.via_pan,
            r.blocked,
            r.via_legacy
        ),
    )
}

async fn strict_lifecycle() -> Verdict {
    let t0 = Timestamp::from_secs(1_700_000_000);
    let clock = Arc::new(ManualClock::new(t0));
    let b = bed(BedOptions { clock: clock.clone(), strict_max_age: Some(2), ..Default::default() }).await;
    let url = format!("http://{PAN_HOST}/one/r0.txt");
    let fetch = |b: &Bed| {
        let loader = b.loader("lifecycle");
        let url = url.clone();
        async move { loader.fetch(&url).await.map_err(|e| e.to_string()) }
    };
    let mut log = Vec::new();

    // t=0: first visit over PAN picks up max-age=2
    let first = fetch(&b).await?;
    let learned = b.gw.resolver().strict_expiry(PAN_HOST, t0);
    log.push(format!("t=0 {} strict until +{:?}s", first.route.clone().unwrap_or_default(), learned.map(|t| t.as_secs_ceil() - t0.as_secs_ceil())));

    // make every path to the host non-compliant so enforcement is visible
    b.gw.set_policy("- 2-0\n+ 0-0\n").map_err(|e| e.to_string())?;
    clock.set(t0 + Duration::from_secs(1));
    let mode1 = b.gw.effective_mode(PAN_HOST, clock.now());
    let at1 = fetch(&b).await?;
    log.push(format!("t=1 mode {}/{} -> {} {}", mode1.value, mode1.origin.as_str(), at1.status.as_u16(), at1.blocked_reason.clone().unwrap_or_default()));
    let strict_at_1 = mode1.value == ModeValue::Strict
        && mode1.origin == ModeOrigin::HeaderImposed
        && at1.status == StatusCode::BAD_GATEWAY
        && at1.blocked_reason.as_deref() == Some(BlockReason::NoCompliantPath.as_str());

    clock.set(t0 + Duration::from_secs(3));
    let mode3 = b.gw.effective_mode(PAN_HOST, clock.now());
    let at3 = fetch(&b).await?;
    log.push(format!("t=3 mode {}/{} -> {} {}", mode3.value, mode3.origin.as_str(), at3.status.as_u16(), at3.route.clone().unwrap_or_default()));
    let opportunistic_at_3 = mode3.value == ModeValue::Opportunistic
        && at3.status == StatusCode::OK
        && at3.route.as_deref() == Some("legacy");

    // max-age=0 clears at once, without any clock movement
    b.gw.set_policy("+ 0-0\n").map_err(|e| e.to_string())?;
    let t4 = t0 + Duration::from_secs(4);
    clock.set(t4);
    fetch(&b).await?;
    let renewed = b.gw.resolver().is_strict(PAN_HOST, t4);
    b.pan.set_strict_max_age(Some(0));
    fetch(&b).await?;
    let cleared = !b.gw.resolver().is_strict(PAN_HOST, t4);
    b.gw.set_policy("- 2-0\n+ 0-0\n").map_err(|e| e.to_string())?;
    let after_clear = fetch(&b).await?;
    log.push(format!(
        "t=4 renewed {renewed}, after max-age=0 strict {} -> {} {}",
        !cleared,
        after_clear.status.as_u16(),
        after_clear.route.clone().unwrap_or_default()
    ));
    let cleared_ok = renewed && cleared && after_clear.status == StatusCode::OK;

    check(
        first.route.as_deref() == Some("pan")
            && learned == Some(t0 + Duration::from_secs(2))
            && strict_at_1
            && opportunistic_at_3
            && cleared_ok,
        log.join("; "),
    )
}

async fn proxy_overhead() -> Verdict {
    let b = bed(BedOptions::default()).await;
    let url = format!("http://{PAN_HOST}/single/index.html");
    let direct = b.direct();
    // warm up both sides once
    direct.load(&url).await.map_err(|e| e.to_string())?;
    b.loader("warmup").load(&url).await.map_err(|e| e.to_string())?;
    let (mut via, mut plain) = (Vec::new(), Vec::new());
    for i in 0..30 {
        let d = direct.load(&url).await.map_err(|e| e.to_string())?;
        let p = b.loader(&format!("overhead-{i}")).load(&url).await.map_err(|e| e.to_string())?;
        if p.resources.len() != 10 || p.all().any(|f| f.route.as_deref() != Some("pan") || f.status != StatusCode::OK) {
            return Err(format!("trial {i}: page not fully served over PAN"));
        }
        plain.push(d.elapsed);
        via.push(p.elapsed);
    }
    let (mv, md) = (median(via), median(plain));
    let delta = mv.as_secs_f64() * 1000.0 - md.as_secs_f64() * 1000.0;
    check(
        delta < 150.0,
        format!(
            "10-resource page, 30 trials: median via gateway {:.1} ms, direct {:.1} ms, overhead {delta:.1} ms (limit 150 ms)",
            mv.as_secs_f64() * 1000.0,
            md.as_secs_f64() * 1000.0
        ),
    )
}

async fn latency_selection() -> Verdict {
    let b = bed(BedOptions { topology: "two-path", ..Default::default() }).await;
    let asc = std::fs::read_to_string(common::fixture("policies/latency-asc.policy")).unwrap();
    let desc = std::fs::read_to_string(common::fixture("policies/latency-desc.policy")).unwrap();
    let url = format!("http://{PAN_HOST}/one/r0.txt");
    let (mut fast, mut slow) = (Vec::new(), Vec::new());
    for i in 0..12 {
        for (policy, samples) in [(&asc, &mut fast), (&desc, &mut slow)] {
            b.gw.set_policy(policy).map_err(|e| e.to_string())?;
            let l = b.loader(&format!("latency-{i}")).load(&url).await.map_err(|e| e.to_string())?;
            if l.document.route.as_deref() != Some("pan") {
                return Err(format!("trial {i}: not served over PAN"));
            }
            samples.push(l.elapsed);
        }
    }
    let (f, s) = (median(fast).as_secs_f64() * 1000.0, median(slow).as_secs_f64() * 1000.0);
    let delta = s - f;
    check(
        delta >= 150.0 && (delta - 400.0).abs() <= 100.0,
        format!("median PLT latency-asc {f:.1} ms, latency-desc {s:.1} ms, delta {delta:.1} ms (need >= 150, expected 400 +/- 100)"),
    )
}

async fn fallback_totality() -> Verdict {
    let mut rng = StdRng::seed_from_u64(0xfa11);
    let pan_probe = common::origin("sites/pan-fs", None, None).await;
    let pan_port = pan_probe.addr().port();
    let legacy = common::origin("sites/legacy-fs", None, None).await;
    let mut txt = FixtureTxt::default();
    let mut statics = Vec::new();
    let mut legacy_hosts = Vec::new();
    // (host, expected IpOnly)
    let mut hosts: Vec<(String, bool)> = Vec::new();
    for i in 0..40 {
        let host = format!("site{i}.test");
        let ip_only = match i % 8 {
            0 | 1 => {
                statics.push((host.clone(), ScionAddress { id: IsdAs::new(2, 1), host: "127.0.0.1".into(), port: Some(pan_port) }));
                false
            }
            2 => {
                // capable but outside the topology: no path at all
                statics.push((host.clone(), ScionAddress { id: IsdAs::new(9, 9), host: "127.0.0.1".into(), port: Some(pan_port) }));
                false
            }
            3 | 4 => {
                txt.insert(&host, vec!["v=spf1 -all".into(), format!("scion=2-1,127.0.0.1:{pan_port}")], 300);
                false
            }
            5 => {
                txt.insert(&host, vec!["scion=not-an-address".into()], 300);
                true
            }
            6 => {
                txt.insert_failure(&host, "SERVFAIL");
                true
            }
            _ => true,
        };
        // capable hosts are dual-stack; IP-only ones live on the legacy origin
        legacy_hosts.push((host.clone(), if ip_only { legacy.addr() } else { pan_probe.addr() }));
        hosts.push((host, ip_only));
    }
    let b = bed(BedOptions { txt: Some(txt), static_hosts: statics, legacy_hosts, ..Default::default() }).await;
    let policies = ["+ 0-0\n", "- 2-0\n+ 0-0\n", "- 0-0\n", "- 1-0\n+ 0-0\n", "+ 0-0\norder hops desc\n"];
    let (mut blocked, mut failed, mut ip_only_not_legacy, mut ip_only_total, mut via_pan) = (0, 0, 0, 0, 0);
    for i in 0..500 {
        b.gw.set_policy(policies.choose(&mut rng).unwrap()).map_err(|e| e.to_string())?;
        let (host, ip_only) = hosts.choose(&mut rng).unwrap();
        let path = if *ip_only { "strict/r0.txt" } else { "one/r0.txt" };
        let f = b.loader(&format!("fuzz-{}", i % 17)).fetch(&format!("http://{host}/{path}")).await.map_err(|e| e.to_string())?;
        match f.route.as_deref() {
            Some("blocked") => blocked += 1,
            Some("pan") => via_pan += 1,
            _ => {}
        }
        if f.status != StatusCode::OK {
            failed += 1;
        }
        if *ip_only {
            ip_only_total += 1;
            if f.route.as_deref() != Some("legacy") {
                ip_only_not_legacy += 1;
            }
        }
    }
    let stats = b.gw.stats();
    let plan_blocks: u64 = stats.per_host.values().map(|c| c.requests_blocked).sum();
    check(
        blocked == 0 && plan_blocks == 0 && failed == 0 && ip_only_not_legacy == 0 && via_pan > 0,
        format!(
            "500 requests over 40 hosts: {blocked} blocked ({plan_blocks} in stats), {failed} non-200, \
             {via_pan} via PAN, {ip_only_total} IP-only requests of which {ip_only_not_legacy} not via legacy"
        ),
    )
}

async fn indicator_correctness() -> Verdict {
    let b = Arc::new(bed(BedOptions::default()).await);
    let mut rng = StdRng::seed_from_u64(0x1d1c);
    let now = b.gw.clock().now();
    let pan_plan = b.gw.plan_request(PAN_HOST, "probe", now).await;
    let legacy_plan = b.gw.plan_request(LEGACY_HOST, "probe", now).await;
    if !matches!(pan_plan.decision, Decision::PanVia { .. }) || legacy_plan.decision != Decision::LegacyFallback {
        return Err("probe plans are not PanVia / LegacyFallback".into());
    }
    let mut wrong = Vec::new();
    let pages = 200;
    for page in 0..pages {
        let (p, q) = (rng.gen_range(0..6u64), rng.gen_range(0..6u64));
        let id = format!("page-{page}");
        let mut plans = Vec::new();
        for _ in 0..p {
            let mut plan = pan_plan.clone();
            plan.page_id = id.clone();
            plans.push(plan);
        }
        for _ in 0..q {
            let mut plan = legacy_plan.clone();
            plan.page_id = id.clone();
            plans.push(plan);
        }
        plans.shuffle(&mut rng);
        // concurrent completions in random order
        let tasks: Vec<_> = plans
            .into_iter()
            .map(|plan| {
                let b = b.clone();
                tokio::spawn(async move { b.gw.record(&plan, Default::default(), 0) })
            })
            .collect();
        for t in tasks {
            t.await.map_err(|e| e.to_string())?;
        }
        let r = b.gw.classify_page(&id);
        let expected = if p == 0 {
            Indicator::None
        } else if q == 0 {
            Indicator::All
        } else {
            Indicator::Some
        };
        if r.indicator != expected || r.via_pan != p || r.via_legacy != q || r.total != p + q {
            wrong.push(format!("p={p} q={q} got {}", r.indicator.as_str()));
        }
    }
    // end-to-end pages through the proxy
    let mut e2e_wrong = 0;
    for (i, (url, expected)) in [
        (format!("http://{PAN_HOST}/single/index.html"), Indicator::All),
        (format!("http://{PAN_HOST}/mixed/index.html"), Indicator::Some),
        (format!("http://{LEGACY_HOST}/index.html"), Indicator::None),
    ]
    .into_iter()
    .enumerate()
    {
        let id = format!("e2e-{i}");
        b.loader(&id).load(&url).await.map_err(|e| e.to_string())?;
        if b.gw.classify_page(&id).indicator != expected {
            e2e_wrong += 1;
        }
    }
    let unknown = b.gw.classify_page("never-seen");
    check(
        wrong.is_empty() && e2e_wrong == 0 && unknown.indicator == Indicator::None && unknown.total == 0,
        format!("{pages} random pages, {} misclassified {:?}; 3 proxied pages, {e2e_wrong} misclassified", wrong.len(), wrong.iter().take(3).collect::<Vec<_>>()),
    )
}

fn run_sync(name: &str, f: impl FnOnce() -> Verdict) -> (String, Verdict) {
    let r = std::panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| Err(panic_text(p)));
    (name.to_string(), r)
}

fn run_async<F: Future<Output = Verdict>>(rt: &tokio::runtime::Runtime, name: &str, f: F) -> (String, Verdict) {
    let r = rt.block_on(AssertUnwindSafe(f).catch_unwind()).unwrap_or_else(|p| Err(panic_text(p)));
    (name.to_string(), r)
}

fn panic_text(p: Box<dyn std::any::Any + Send>) -> String {
    let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
    format!("panicked: {}", msg.unwrap_or_default())
}

fn main() {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
    let results = vec![
        run_sync("policy-oracle equivalence", policy_oracle),
        run_sync("path-enumeration oracle", enumeration_oracle),
        run_async(&rt, "geofencing end-to-end", geofencing()),
        run_async(&rt, "strict-mode blocking", strict_blocking()),
        run_async(&rt, "strict header lifecycle", strict_lifecycle()),
        run_async(&rt, "proxy overhead bounded", proxy_overhead()),
        run_async(&rt, "latency-aware selection", latency_selection()),
        run_async(&rt, "opportunistic fallback totality", fallback_totality()),
        run_async(&rt, "indicator correctness", indicator_correctness()),
    ];
    println!();
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(d) => println!("PASS  {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {name}: {d}");
            }
        }
    }
    println!("\nacceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
