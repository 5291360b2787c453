//! Shared gateway state: active policy, modes, resolver, path service,
//! emulator and the accounting that the control API exposes.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use arc_swap::ArcSwap;
use parking_lot::{Mutex, RwLock};
use pan_gate_core::plan::decide_on_failure;
use pan_gate_core::{
    decide, effective_mode, evaluate, normalize_host, parse_policy, Clock, Mode, ModeValue, Outcome, PageReport,
    PageTally, ParseError, Path, Policy, RequestPlan, Resolution, ScionAddress, Stats, StatsRecorder, Timing,
    Topology,
};

use crate::emu::{EmuConfig, Emulator};
use crate::error::GatewayError;
use crate::formats::StrictStore;
use crate::pathdb::{PathDb, PathDbConfig};
use crate::resolver::{NoTxt, Resolver, TxtLookup};

pub const DEFAULT_CONNECT_TIMEOUT: Duration = Duration::from_secs(10);

pub struct GatewayConfig {
    pub topology: Topology,
    pub policy: String,
    pub static_hosts: HashMap<String, ScionAddress>,
    /// Hostname overrides for legacy dialing; other names go through the
    /// system resolver.
    pub legacy_hosts: HashMap<String, SocketAddr>,
    pub txt: Arc<dyn TxtLookup>,
    pub mode: ModeValue,
    pub strict_store: Option<PathBuf>,
    pub clock: Arc<dyn Clock>,
    pub emu: EmuConfig,
    pub pathdb: PathDbConfig,
    pub ewma_alpha: f64,
    pub connect_timeout: Duration,
}

impl GatewayConfig {
    pub fn new(topology: Topology, clock: Arc<dyn Clock>) -> Self {
        GatewayConfig {
            topology,
            policy: Policy::allow_all().render(),
            static_hosts: HashMap::new(),
            legacy_hosts: HashMap::new(),
            txt: Arc::new(NoTxt),
            mode: ModeValue::Opportunistic,
            strict_store: None,
            clock,
            emu: EmuConfig::default(),
            pathdb: PathDbConfig::default(),
            ewma_alpha: pan_gate_core::stats::DEFAULT_EWMA_ALPHA,
            connect_timeout: DEFAULT_CONNECT_TIMEOUT,
        }
    }
}

/// The active policy together with the text it was parsed from.
#[derive(Debug, Clone)]
pub struct ActivePolicy {
    pub policy: Policy,
    pub text: String,
}

/// One candidate path as seen through the active policy.
#[derive(Debug, Clone)]
pub struct CandidatePath {
    pub path: Path,
    pub compliant: bool,
    /// Position in policy order among compliant paths.
    pub rank: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct CandidateView {
    pub host: String,
    pub resolution: Resolution,
    pub paths: Vec<CandidatePath>,
}

pub struct Gateway {
    pub(crate) clock: Arc<dyn Clock>,
    policy: ArcSwap<ActivePolicy>,
    global_mode: RwLock<ModeValue>,
    site_modes: RwLock<HashMap<String, ModeValue>>,
    resolver: Resolver,
    pathdb: PathDb,
    emu: Emulator,
    stats: Mutex<StatsRecorder>,
    pages: Mutex<HashMap<String, PageTally>>,
    pub(crate) legacy_hosts: HashMap<String, SocketAddr>,
    pub(crate) connect_timeout: Duration,
}

impl Gateway {
    pub fn new(config: GatewayConfig) -> Result<Arc<Self>, GatewayError> {
        let policy = parse_policy(&config.policy)?;
        let now = config.clock.now();
        let topology = Arc::new(config.topology);
        let mut resolver = Resolver::new(config.static_hosts, config.txt);
        if let Some(path) = config.strict_store {
            resolver = resolver.with_strict_store(StrictStore::new(path), now)?;
        }
        Ok(Arc::new(Gateway {
            policy: ArcSwap::from_pointee(ActivePolicy { policy, text: config.policy }),
            global_mode: RwLock::new(config.mode),
            site_modes: RwLock::new(HashMap::new()),
            resolver,
            pathdb: PathDb::new(topology.clone(), config.pathdb, config.clock.clone()),
            emu: Emulator::new(topology, config.emu),
            stats: Mutex::new(StatsRecorder::new(now, config.ewma_alpha)),
            pages: Mutex::new(HashMap::new()),
            legacy_hosts: config.legacy_hosts.into_iter().map(|(k, v)| (normalize_host(&k), v)).collect(),
            connect_timeout: config.connect_timeout,
            clock: config.clock,
        }))
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn resolver(&self) -> &Resolver {
        &self.resolver
    }

    pub fn pathdb(&self) -> &PathDb {
        &self.pathdb
    }

    pub fn emulator(&self) -> &Emulator {
        &self.emu
    }

    pub fn effective_mode(&self, host: &str, now: pan_gate_core::Timestamp) -> Mode {
        let host = normalize_host(host);
        let per_site = self.site_modes.read().get(&host).copied();
        effective_mode(*self.global_mode.read(), per_site, self.resolver.is_strict(&host, now))
    }

    /// Routing decision for one request. Never fails: subsystem errors turn
    /// into a legacy fallback (opportunistic) or a block (strict).
    pub async fn plan_request(&self, host: &str, page_id: &str, now: pan_gate_core::Timestamp) -> RequestPlan {
        let host = normalize_host(host);
        let mode = self.effective_mode(&host, now);
        // one snapshot for the whole decision; swaps affect later requests only
        let active = self.policy.load_full();
        let resolution = self.resolver.resolve(&host, now).await;
        let (decision, policy_compliant) = match &resolution.outcome {
            Outcome::IpOnly => decide(mode.value, &resolution.outcome, &[], &active.policy),
            Outcome::ScionCapable(addr) => match self.pathdb.lookup_from_local(addr.id) {
                Ok(set) => decide(mode.value, &resolution.outcome, &set.paths, &active.policy),
                Err(e) => {
                    log::error!("path lookup for {host} failed: {e}");
                    (decide_on_failure(mode.value), true)
                }
            },
        };
        RequestPlan { decision, policy_compliant, mode, host, page_id: page_id.to_string() }
    }

    /// Books a finished request into the stats and its page.
    pub fn record(&self, plan: &RequestPlan, timing: Timing, bytes: u64) {
        self.record_page(plan);
        self.record_stats(plan, timing, bytes);
    }

    pub(crate) fn record_page(&self, plan: &RequestPlan) {
        self.pages.lock().entry(plan.page_id.clone()).or_default().record(plan.decision.route(), plan.policy_compliant);
    }

    pub(crate) fn record_stats(&self, plan: &RequestPlan, timing: Timing, bytes: u64) {
        self.stats.lock().record(plan, timing, bytes);
    }

    pub fn classify_page(&self, page_id: &str) -> PageReport {
        match self.pages.lock().get(page_id) {
            Some(t) => t.report(page_id),
            None => PageReport::empty(page_id),
        }
    }

    pub fn stats(&self) -> Stats {
        self.stats.lock().snapshot()
    }

    pub fn policy(&self) -> Arc<ActivePolicy> {
        self.policy.load_full()
    }

    /// Parses and atomically installs a new policy. On error the previous
    /// policy stays active.
    pub fn set_policy(&self, text: &str) -> Result<(), ParseError> {
        let policy = parse_policy(text)?;
        self.policy.store(Arc::new(ActivePolicy { policy, text: text.to_string() }));
        Ok(())
    }

    pub fn global_mode(&self) -> ModeValue {
        *self.global_mode.read()
    }

    pub fn set_global_mode(&self, value: ModeValue) {
        *self.global_mode.write() = value;
    }

    pub fn set_site_mode(&self, host: &str, value: Option<ModeValue>) {
        let host = normalize_host(host);
        let mut modes = self.site_modes.write();
        match value {
            Some(v) => modes.insert(host, v),
            None => modes.remove(&host),
        };
    }

    pub fn site_modes(&self) -> HashMap<String, ModeValue> {
        self.site_modes.read().clone()
    }

    /// Candidate paths towards `host` annotated with compliance under the
    /// active policy.
    pub async fn candidate_paths(&self, host: &str) -> Result<CandidateView, GatewayError> {
        let now = self.clock.now();
        let resolution = self.resolver.resolve(host, now).await;
        let active = self.policy.load_full();
        let paths = match resolution.address() {
            None => Vec::new(),
            Some(addr) => {
                let set = self.pathdb.lookup_from_local(addr.id)?;
                let ordered = evaluate(&active.policy, &set.paths);
                set.paths
                    .iter()
                    .map(|p| {
                        let rank = ordered.iter().position(|q| q == p);
                        CandidatePath { path: p.clone(), compliant: rank.is_some(), rank }
                    })
                    .collect()
            }
        };
        Ok(CandidateView { host: normalize_host(host), resolution, paths })
    }
}
