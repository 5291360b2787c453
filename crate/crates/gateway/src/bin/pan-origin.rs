use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{ArgGroup, Parser};
use pan_gate::origin::{self, Content, OriginConfig};
use pan_gate_core::IsdAs;

/// Test origin server: static directory or reverse proxy, optionally
/// advertising a `Strict-SCION` header.
#[derive(Debug, Parser)]
#[command(name = "pan-origin", version, group(ArgGroup::new("content").required(true).args(["root", "upstream"])))]
struct Args {
    #[arg(long)]
    listen: SocketAddr,
    /// Directory to serve.
    #[arg(long)]
    root: Option<PathBuf>,
    /// `host:port` to forward requests to.
    #[arg(long)]
    upstream: Option<String>,
    /// Send `Strict-SCION: max-age=<secs>` on every response.
    #[arg(long)]
    strict_max_age: Option<u64>,
    /// AS identity reported in the `X-Origin-AS` header.
    #[arg(long = "as")]
    as_identity: Option<IsdAs>,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PAN_GATE_LOG", "info")).init();
    let args = Args::parse();
    let content = match (args.root, args.upstream) {
        (Some(root), _) => Content::Root(root),
        (None, Some(up)) => Content::Upstream(up),
        (None, None) => unreachable!("clap enforces one of --root/--upstream"),
    };
    let handle = origin::spawn(OriginConfig {
        listen: args.listen,
        content,
        strict_max_age_s: args.strict_max_age,
        as_identity: args.as_identity,
    })
    .await?;
    log::info!("origin on {}", handle.addr());
    tokio::signal::ctrl_c().await?;
    Ok(())
}
