//! Allocation-only core of the path-aware browsing gateway.
//!
//! Everything here is pure: ISD/AS identities, decorated paths, the
//! emulated topology and its simple-path enumeration, the path policy
//! language, strict-mode and resolution bookkeeping, the per-request
//! decision table, page coverage reports and usage statistics. Sockets,
//! files and clocks backed by the OS live in the `pan-gate` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod error;
pub mod isd_as;
pub mod path;
pub mod plan;
pub mod policy;
pub mod report;
pub mod resolver;
pub mod stats;
pub mod time;
pub mod topology;

pub use error::{DomainError, ParseError};
pub use isd_as::{parse_isd_as, IsdAs};
pub use path::{aggregate_metadata, Geo, HopMeta, Path, PathFingerprint, PathMetadata};
pub use plan::{decide, decide_on_failure, effective_mode, BlockReason, Decision, Mode, ModeOrigin, ModeValue, RequestPlan, Route};
pub use policy::{combine, evaluate, parse_policy, AclEntry, Action, Direction, Metric, OrderKey, Policy};
pub use report::{Indicator, PageReport, PageTally};
pub use resolver::{
    normalize_host, parse_scion_address, parse_strict_header, parse_txt, Outcome, Resolution, ResolutionCache,
    ResolutionSource, ScionAddress, StrictCache, StrictChange, StrictDirective, StrictEntry,
};
pub use stats::{HostCounters, PathCounters, Stats, StatsRecorder, Timing};
#[cfg(target_has_atomic = "64")]
pub use time::ManualClock;
pub use time::{Clock, Timestamp};
pub use topology::{AsDecoration, Link, Topology, DEFAULT_MAX_HOPS, DEFAULT_MAX_PATHS};
