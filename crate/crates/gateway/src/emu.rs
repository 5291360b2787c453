//! Emulated path-aware data plane.
//!
//! A [`Channel`] is a reliable bidirectional byte stream to a remote
//! endpoint whose timing follows the selected path: opening costs one
//! emulated round trip, and every chunk is delivered one path latency after
//! it was sent, in each direction. Bytes are counted per channel in an
//! [`AuditLog`], which is what geofencing checks are asserted against.

use std::collections::BTreeSet;
use std::io;
use std::net::SocketAddr;
use std::pin::Pin;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::task::{Context, Poll};
use std::time::Duration;

use bytes::Bytes;
use parking_lot::Mutex;
use pan_gate_core::{Path, PathFingerprint, ScionAddress, Timestamp, Topology};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use tokio::io::{AsyncRead, AsyncReadExt, AsyncWrite, AsyncWriteExt, DuplexStream, ReadBuf};
use tokio::net::TcpStream;
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinHandle;
use tokio::time::Instant;

pub const DEFAULT_TOLERANCE: Duration = Duration::from_millis(15);
const CHUNK: usize = 16 * 1024;
const QUEUE: usize = 256;

#[derive(Debug, Clone)]
pub struct EmuConfig {
    /// Scheduling slack accepted on top of the emulated delay.
    pub tolerance: Duration,
    /// Serialize chunks at the path's bottleneck bandwidth.
    pub shaping: bool,
    /// Probability that a chunk needs a retransmission, which costs one
    /// extra round trip. Zero disables loss emulation.
    pub loss_rate: f64,
    pub seed: u64,
}

impl Default for EmuConfig {
    fn default() -> Self {
        EmuConfig { tolerance: DEFAULT_TOLERANCE, shaping: false, loss_rate: 0.0, seed: 0x5c10 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConnectError {
    #[error("emulation refused: AS {0} is not part of the topology")]
    Refused(pan_gate_core::IsdAs),
    #[error("path ends in {path_dst} but the endpoint lives in {remote}")]
    WrongDestination { path_dst: pan_gate_core::IsdAs, remote: pan_gate_core::IsdAs },
    #[error("endpoint {addr} is down: {source}")]
    EndpointDown { addr: String, source: io::Error },
}

/// Byte counts for one channel.
#[derive(Debug)]
pub struct ChannelAudit {
    pub id: u64,
    pub fingerprint: PathFingerprint,
    pub sequence: String,
    pub isds: BTreeSet<u16>,
    pub remote: String,
    pub opened_at: Timestamp,
    bytes_up: AtomicU64,
    bytes_down: AtomicU64,
    closed: AtomicBool,
    abnormal: AtomicBool,
}

impl ChannelAudit {
    /// Bytes delivered to the remote endpoint.
    pub fn bytes_up(&self) -> u64 {
        self.bytes_up.load(Ordering::SeqCst)
    }

    /// Bytes delivered back to the local side.
    pub fn bytes_down(&self) -> u64 {
        self.bytes_down.load(Ordering::SeqCst)
    }

    pub fn total_bytes(&self) -> u64 {
        self.bytes_up() + self.bytes_down()
    }

    pub fn is_closed(&self) -> bool {
        self.closed.load(Ordering::SeqCst)
    }

    pub fn ended_abnormally(&self) -> bool {
        self.abnormal.load(Ordering::SeqCst)
    }
}

/// Append-only record of every channel opened through an [`Emulator`].
#[derive(Debug, Default)]
pub struct AuditLog {
    channels: Mutex<Vec<Arc<ChannelAudit>>>,
    next_id: AtomicU64,
}

impl AuditLog {
    pub fn channels(&self) -> Vec<Arc<ChannelAudit>> {
        self.channels.lock().clone()
    }

    /// Total bytes carried by channels whose path traverses `isd`.
    pub fn bytes_through_isd(&self, isd: u16) -> u64 {
        self.channels.lock().iter().filter(|c| c.isds.contains(&isd)).map(|c| c.total_bytes()).sum()
    }

    pub fn total_bytes(&self) -> u64 {
        self.channels.lock().iter().map(|c| c.total_bytes()).sum()
    }

    fn register(&self, path: &Path, remote: String, opened_at: Timestamp) -> Arc<ChannelAudit> {
        let audit = Arc::new(ChannelAudit {
            id: self.next_id.fetch_add(1, Ordering::SeqCst),
            fingerprint: path.fingerprint(),
            sequence: path.sequence_string(),
            isds: path.meta().isds.clone(),
            remote,
            opened_at,
            bytes_up: AtomicU64::new(0),
            bytes_down: AtomicU64::new(0),
            closed: AtomicBool::new(false),
            abnormal: AtomicBool::new(false),
        });
        self.channels.lock().push(audit.clone());
        audit
    }
}

pub struct Emulator {
    topology: Arc<Topology>,
    config: EmuConfig,
    audit: Arc<AuditLog>,
    rng: Mutex<StdRng>,
}

impl Emulator {
    pub fn new(topology: Arc<Topology>, config: EmuConfig) -> Self {
        let rng = Mutex::new(StdRng::seed_from_u64(config.seed));
        Emulator { topology, config, audit: Arc::new(AuditLog::default()), rng }
    }

    pub fn audit(&self) -> &Arc<AuditLog> {
        &self.audit
    }

    pub fn config(&self) -> &EmuConfig {
        &self.config
    }

    /// Dials `remote` and pays the emulated handshake before returning.
    pub async fn open_channel(
        &self,
        path: &Path,
        remote: &ScionAddress,
        default_port: u16,
        now: Timestamp,
    ) -> Result<Channel, ConnectError> {
        if !self.topology.contains(&remote.id) {
            return Err(ConnectError::Refused(remote.id));
        }
        if path.dst() != remote.id {
            return Err(ConnectError::WrongDestination { path_dst: path.dst(), remote: remote.id });
        }
        let authority = remote.authority(default_port);
        let tcp = TcpStream::connect(&authority)
            .await
            .map_err(|source| ConnectError::EndpointDown { addr: authority.clone(), source })?;
        let _ = tcp.set_nodelay(true);
        let one_way = Duration::from_secs_f64(path.meta().latency_ms / 1000.0);
        tokio::time::sleep(one_way * 2).await;
        Ok(self.wire(path, tcp, authority, now))
    }

    /// Channel over an already connected stream, without handshake delay.
    pub fn wire<S>(&self, path: &Path, remote: S, remote_name: String, now: Timestamp) -> Channel
    where
        S: AsyncRead + AsyncWrite + Send + 'static,
    {
        let audit = self.audit.register(path, remote_name, now);
        let one_way = Duration::from_secs_f64(path.meta().latency_ms / 1000.0);
        let shaping = self.config.shaping.then_some(path.meta().bandwidth_mbps);
        let loss = (self.config.loss_rate > 0.0).then(|| {
            let seed = self.rng.lock().gen();
            (self.config.loss_rate.min(1.0), seed)
        });
        let line = DelayLine { one_way, shaping, loss };

        let (local, inner) = tokio::io::duplex(CHUNK * 4);
        let (inner_rd, inner_wr) = tokio::io::split(inner);
        let (remote_rd, remote_wr) = tokio::io::split(remote);
        let up = line.spawn(inner_rd, remote_wr, audit.clone(), Dir::Up);
        let down = line.spawn(remote_rd, inner_wr, audit.clone(), Dir::Down);
        let watcher_audit = audit.clone();
        let (done_tx, done) = oneshot::channel();
        tokio::spawn(async move {
            let (a, b) = (up.await, down.await);
            let clean = matches!((a, b), (Ok(true), Ok(true)));
            if !clean {
                watcher_audit.abnormal.store(true, Ordering::SeqCst);
            }
            watcher_audit.closed.store(true, Ordering::SeqCst);
            let _ = done_tx.send(clean);
        });
        Channel { path: path.clone(), audit, stream: local, done }
    }
}

#[derive(Debug, Clone, Copy)]
enum Dir {
    Up,
    Down,
}

enum Segment {
    Data(Instant, Bytes),
    Eof(Instant),
    Abort,
}

#[derive(Debug, Clone, Copy)]
struct DelayLine {
    one_way: Duration,
    shaping: Option<f64>,
    loss: Option<(f64, u64)>,
}

impl DelayLine {
    /// Spawns one direction. The handle yields `true` on a clean end of stream.
    fn spawn<R, W>(self, mut src: R, mut dst: W, audit: Arc<ChannelAudit>, dir: Dir) -> JoinHandle<bool>
    where
        R: AsyncRead + Unpin + Send + 'static,
        W: AsyncWrite + Unpin + Send + 'static,
    {
        let (tx, mut rx) = mpsc::channel::<Segment>(QUEUE);
        let reader = tokio::spawn(async move {
            let mut rng = self.loss.map(|(_, seed)| StdRng::seed_from_u64(seed));
            let mut last = Instant::now();
            let mut line_free = Instant::now();
            let mut buf = vec![0u8; CHUNK];
            loop {
                let seg = match src.read(&mut buf).await {
                    Ok(0) => Segment::Eof(last.max(Instant::now() + self.one_way)),
                    Ok(n) => {
                        let now = Instant::now();
                        let mut sent = now;
                        if let Some(mbps) = self.shaping {
                            let ser = Duration::from_secs_f64(n as f64 * 8.0 / (mbps * 1e6));
                            line_free = line_free.max(now) + ser;
                            sent = line_free;
                        }
                        let mut due = sent + self.one_way;
                        if let (Some(rng), Some((p, _))) = (rng.as_mut(), self.loss) {
                            if rng.gen_bool(p) {
                                due += self.one_way * 2;
                            }
                        }
                        // stream order is preserved even when a chunk is held back
                        last = last.max(due);
                        Segment::Data(last, Bytes::copy_from_slice(&buf[..n]))
                    }
                    Err(_) => Segment::Abort,
                };
                let done = !matches!(seg, Segment::Data(..));
                if tx.send(seg).await.is_err() || done {
                    break;
                }
            }
        });
        tokio::spawn(async move {
            let mut clean = false;
            while let Some(seg) = rx.recv().await {
                match seg {
                    Segment::Data(due, bytes) => {
                        tokio::time::sleep_until(due).await;
                        if dst.write_all(&bytes).await.is_err() || dst.flush().await.is_err() {
                            break;
                        }
                        let counter = match dir {
                            Dir::Up => &audit.bytes_up,
                            Dir::Down => &audit.bytes_down,
                        };
                        counter.fetch_add(bytes.len() as u64, Ordering::SeqCst);
                    }
                    Segment::Eof(due) => {
                        tokio::time::sleep_until(due).await;
                        clean = dst.shutdown().await.is_ok();
                        break;
                    }
                    Segment::Abort => {
                        let _ = dst.shutdown().await;
                        break;
                    }
                }
            }
            // dropping the receiver stops the reader
            drop(rx);
            reader.abort();
            clean
        })
    }
}

/// A delay-shaped stream bound to exactly one path.
pub struct Channel {
    path: Path,
    audit: Arc<ChannelAudit>,
    stream: DuplexStream,
    done: oneshot::Receiver<bool>,
}

impl Channel {
    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn audit(&self) -> &Arc<ChannelAudit> {
        &self.audit
    }

    /// Closes the local end and waits for both directions to drain.
    /// Returns `true` when both ended cleanly.
    pub async fn finish(self) -> bool {
        drop(self.stream);
        self.done.await.unwrap_or(false)
    }
}

impl AsyncRead for Channel {
    fn poll_read(mut self: Pin<&mut Self>, cx: &mut Context<'_>, buf: &mut ReadBuf<'_>) -> Poll<io::Result<()>> {
        Pin::new(&mut self.stream).poll_read(cx, buf)
    }
}

impl AsyncWrite for Channel {
    fn poll_write(mut self: Pin<&mut Self>, cx: &mut Context<'_>, buf: &[u8]) -> Poll<io::Result<usize>> {
        Pin::new(&mut self.stream).poll_write(cx, buf)
    }

    fn poll_flush(mut self: Pin<&mut Self>, cx: &mut Context<'_>) -> Poll<io::Result<()>> {
        Pin::new(&mut self.stream).poll_flush(cx)
    }

    fn poll_shutdown(mut self: Pin<&mut Self>, cx: &mut Context<'_>) -> Poll<io::Result<()>> {
        Pin::new(&mut self.stream).poll_shutdown(cx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelaySummary {
    /// Client to remote.
    pub bytes_up: u64,
    /// Remote to client.
    pub bytes_down: u64,
    pub abnormal: bool,
}

/// Full-duplex copy between `client` and `channel` until both directions
/// finish; half-closes are propagated.
pub async fn relay<C>(mut channel: Channel, mut client: C) -> RelaySummary
where
    C: AsyncRead + AsyncWrite + Unpin,
{
    let copied = tokio::io::copy_bidirectional(&mut client, &mut channel).await;
    if let Err(e) = &copied {
        log::debug!("relay over {} ended: {e}", channel.path.sequence_string());
    }
    drop(client);
    let audit = channel.audit.clone();
    let clean = channel.finish().await;
    RelaySummary { bytes_up: audit.bytes_up(), bytes_down: audit.bytes_down(), abnormal: copied.is_err() || !clean }
}

/// Dials a legacy (non-PAN) endpoint.
pub async fn dial_legacy(addr: &str) -> io::Result<TcpStream> {
    let s = TcpStream::connect(addr).await?;
    let _ = s.set_nodelay(true);
    Ok(s)
}

pub async fn dial_legacy_addr(addr: SocketAddr) -> io::Result<TcpStream> {
    let s = TcpStream::connect(addr).await?;
    let _ = s.set_nodelay(true);
    Ok(s)
}
