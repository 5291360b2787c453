//! Emulated local path service: serves decorated candidate paths from a
//! static topology with a TTL cache.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use parking_lot::RwLock;
use pan_gate_core::{Clock, DomainError, IsdAs, Path, Timestamp, Topology, DEFAULT_MAX_HOPS, DEFAULT_MAX_PATHS};

pub const DEFAULT_PATH_TTL: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub src: IsdAs,
    pub dst: IsdAs,
    pub paths: Vec<Path>,
    pub fetched_at: Timestamp,
}

#[derive(Debug, Clone, Copy)]
pub struct PathDbConfig {
    pub ttl: Duration,
    pub max_hops: usize,
    pub max_paths: usize,
}

impl Default for PathDbConfig {
    fn default() -> Self {
        PathDbConfig { ttl: DEFAULT_PATH_TTL, max_hops: DEFAULT_MAX_HOPS, max_paths: DEFAULT_MAX_PATHS }
    }
}

pub struct PathDb {
    topology: Arc<Topology>,
    config: PathDbConfig,
    clock: Arc<dyn Clock>,
    cache: RwLock<HashMap<(IsdAs, IsdAs), Arc<PathSet>>>,
    enumerations: AtomicU64,
}

impl PathDb {
    pub fn new(topology: Arc<Topology>, config: PathDbConfig, clock: Arc<dyn Clock>) -> Self {
        PathDb { topology, config, clock, cache: RwLock::new(HashMap::new()), enumerations: AtomicU64::new(0) }
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.topology
    }

    pub fn local_as(&self) -> IsdAs {
        self.topology.local_as()
    }

    /// Number of enumerations performed so far (cache misses).
    pub fn enumerations(&self) -> u64 {
        self.enumerations.load(Ordering::Relaxed)
    }

    /// Cached candidate paths from `src` to `dst`. A destination outside the
    /// topology yields an empty set; an unknown source is an error.
    pub fn lookup_paths(&self, src: IsdAs, dst: IsdAs) -> Result<Arc<PathSet>, DomainError> {
        let now = self.clock.now();
        if let Some(set) = self.cache.read().get(&(src, dst)) {
            if now < set.fetched_at + self.config.ttl {
                return Ok(set.clone());
            }
        }
        if !self.topology.contains(&src) {
            return Err(DomainError::UnknownAs(src));
        }
        // enumeration runs outside the lock; readers keep seeing the old set
        let paths = if self.topology.contains(&dst) {
            self.enumerations.fetch_add(1, Ordering::Relaxed);
            self.topology.enumerate_paths(src, dst, self.config.max_hops, self.config.max_paths)?
        } else {
            Vec::new()
        };
        let set = Arc::new(PathSet { src, dst, paths, fetched_at: now });
        self.cache.write().insert((src, dst), set.clone());
        Ok(set)
    }

    /// Paths from the local AS.
    pub fn lookup_from_local(&self, dst: IsdAs) -> Result<Arc<PathSet>, DomainError> {
        self.lookup_paths(self.local_as(), dst)
    }
}
