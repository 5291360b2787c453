use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, ValueEnum};
use pan_gate::emu::EmuConfig;
use pan_gate::formats::{self, load_legacy_hosts, load_static_hosts, load_topology_file};
use pan_gate::resolver::{FixtureTxt, SystemTxt, TxtLookup};
use pan_gate::{control, proxy, Gateway, GatewayConfig, SystemClock};
use pan_gate_core::ModeValue;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

/// Path-aware forward proxy with a loopback control API.
#[derive(Debug, Parser)]
#[command(name = "pan-gate", version)]
struct Args {
    /// Topology JSON document.
    #[arg(long)]
    topology: PathBuf,
    /// Policy file; defaults to allow-all.
    #[arg(long)]
    policy: Option<PathBuf>,
    /// JSON map of hostname to `<isd>-<as>,<host>[:<port>]`.
    #[arg(long)]
    static_hosts: Option<PathBuf>,
    /// JSON map of hostname to `ip:port` used for legacy connections.
    #[arg(long)]
    legacy_hosts: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8808")]
    listen: SocketAddr,
    #[arg(long, default_value = "127.0.0.1:8809")]
    control: SocketAddr,
    #[arg(long, default_value = "opportunistic")]
    mode: ModeValue,
    /// TXT answers from a JSON file instead of the system resolver.
    #[arg(long)]
    dns_fixtures: Option<PathBuf>,
    /// File keeping header-imposed strict entries across restarts.
    #[arg(long)]
    strict_store: Option<PathBuf>,
    #[arg(long, default_value_t = 15)]
    emu_tolerance_ms: u64,
    #[arg(long, value_enum, default_value = "off")]
    emu_shaping: Switch,
    /// Write stats as JSON here on shutdown.
    #[arg(long)]
    stats_export: Option<PathBuf>,
    /// Static dashboard assets served on the control port.
    #[arg(long)]
    ui_dir: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PAN_GATE_LOG", "info")).init();
    let args = Args::parse();

    let topology = load_topology_file(&args.topology)?;
    let policy = match &args.policy {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => "+ 0-0\n".to_string(),
    };
    let static_hosts = match &args.static_hosts {
        Some(p) => load_static_hosts(formats::open(p)?)?,
        None => HashMap::new(),
    };
    let legacy_hosts = match &args.legacy_hosts {
        Some(p) => load_legacy_hosts(formats::open(p)?)?,
        None => HashMap::new(),
    };
    let txt: Arc<dyn TxtLookup> = match &args.dns_fixtures {
        Some(p) => Arc::new(FixtureTxt::from_reader(formats::open(p)?)?),
        None => Arc::new(SystemTxt::new()?),
    };

    let mut config = GatewayConfig::new(topology, Arc::new(SystemClock));
    config.policy = policy;
    config.static_hosts = static_hosts;
    config.legacy_hosts = legacy_hosts;
    config.txt = txt;
    config.mode = args.mode;
    config.strict_store = args.strict_store;
    config.emu = EmuConfig {
        tolerance: Duration::from_millis(args.emu_tolerance_ms),
        shaping: matches!(args.emu_shaping, Switch::On),
        ..EmuConfig::default()
    };
    let gateway = Gateway::new(config)?;

    let control_listener = control::bind(args.control).await?;
    let proxy_listener =
        tokio::net::TcpListener::bind(args.listen).await.with_context(|| format!("binding proxy on {}", args.listen))?;
    log::info!("proxy on {}, control API on {}", args.listen, args.control);

    let proxy_task = tokio::spawn(proxy::serve(gateway.clone(), proxy_listener));
    let control_task = tokio::spawn(control::serve(gateway.clone(), control_listener, args.ui_dir));
    tokio::select! {
        r = proxy_task => r??,
        r = control_task => r??,
        _ = tokio::signal::ctrl_c() => log::info!("shutting down"),
    }
    if let Some(path) = &args.stats_export {
        control::export_stats(&gateway, path)?;
        log::info!("stats written to {}", path.display());
    }
    Ok(())
}
