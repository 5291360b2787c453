//! Operating modes and the per-request routing decision table.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::ParseError;
use crate::path::Path;
use crate::policy::{evaluate, Policy};
use crate::resolver::{Outcome, ScionAddress};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ModeValue {
    #[default]
    Opportunistic,
    Strict,
}

impl ModeValue {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModeValue::Opportunistic => "opportunistic",
            ModeValue::Strict => "strict",
        }
    }
}

impl fmt::Display for ModeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for ModeValue {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        match s.trim() {
            "opportunistic" => Ok(ModeValue::Opportunistic),
            "strict" => Ok(ModeValue::Strict),
            other => Err(ParseError::Mode { value: other.into() }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModeOrigin {
    GlobalDefault,
    PerSiteUser,
    HeaderImposed,
}

impl ModeOrigin {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModeOrigin::GlobalDefault => "global-default",
            ModeOrigin::PerSiteUser => "per-site-user",
            ModeOrigin::HeaderImposed => "header-imposed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Mode {
    pub value: ModeValue,
    pub origin: ModeOrigin,
}

impl Mode {
    pub fn is_strict(&self) -> bool {
        self.value == ModeValue::Strict
    }
}

/// Resolves the mode a request runs under. An unexpired header-imposed
/// obligation always wins; otherwise a per-site user choice overrides the
/// global default.
pub fn effective_mode(global: ModeValue, per_site: Option<ModeValue>, header_strict: bool) -> Mode {
    if header_strict {
        return Mode { value: ModeValue::Strict, origin: ModeOrigin::HeaderImposed };
    }
    match per_site {
        Some(value) => Mode { value, origin: ModeOrigin::PerSiteUser },
        None => Mode { value: global, origin: ModeOrigin::GlobalDefault },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockReason {
    NoPanConnectivity,
    NoCompliantPath,
    NoPath,
    Internal,
}

impl BlockReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            BlockReason::NoPanConnectivity => "no-pan-connectivity",
            BlockReason::NoCompliantPath => "no-compliant-path",
            BlockReason::NoPath => "no-path",
            BlockReason::Internal => "internal",
        }
    }
}

impl fmt::Display for BlockReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    PanVia { path: Path, address: ScionAddress },
    LegacyFallback,
    Blocked(BlockReason),
}

impl Decision {
    pub fn route(&self) -> Route {
        match self {
            Decision::PanVia { .. } => Route::Pan,
            Decision::LegacyFallback => Route::Legacy,
            Decision::Blocked(_) => Route::Blocked,
        }
    }
}

/// The three ways a request can end up being handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Route {
    Pan,
    Legacy,
    Blocked,
}

impl Route {
    pub fn as_str(&self) -> &'static str {
        match self {
            Route::Pan => "pan",
            Route::Legacy => "legacy",
            Route::Blocked => "blocked",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RequestPlan {
    pub decision: Decision,
    /// False only when PAN paths existed but none satisfied the policy and
    /// the request fell back to legacy IP.
    pub policy_compliant: bool,
    pub mode: Mode,
    pub host: String,
    pub page_id: String,
}

/// The decision table, given the resolution outcome and the candidate
/// paths towards the destination AS.
///
/// | situation                         | strict              | opportunistic          |
/// |-----------------------------------|---------------------|------------------------|
/// | host is IP-only                   | `no-pan-connectivity` | legacy               |
/// | compliant path exists             | PAN via first path  | PAN via first path     |
/// | paths exist, none compliant       | `no-compliant-path` | legacy, non-compliant  |
/// | no path at all                    | `no-path`           | legacy                 |
pub fn decide(mode: ModeValue, outcome: &Outcome, raw_paths: &[Path], policy: &Policy) -> (Decision, bool) {
    let strict = mode == ModeValue::Strict;
    let address = match outcome {
        Outcome::IpOnly if strict => return (Decision::Blocked(BlockReason::NoPanConnectivity), true),
        Outcome::IpOnly => return (Decision::LegacyFallback, true),
        Outcome::ScionCapable(a) => a,
    };
    if raw_paths.is_empty() {
        return if strict { (Decision::Blocked(BlockReason::NoPath), true) } else { (Decision::LegacyFallback, true) };
    }
    let compliant: Vec<Path> = evaluate(policy, raw_paths);
    match compliant.into_iter().next() {
        Some(path) => (Decision::PanVia { path, address: address.clone() }, true),
        None if strict => (Decision::Blocked(BlockReason::NoCompliantPath), true),
        None => (Decision::LegacyFallback, false),
    }
}

/// Outcome when a subsystem failed while planning.
pub fn decide_on_failure(mode: ModeValue) -> Decision {
    match mode {
        ModeValue::Strict => Decision::Blocked(BlockReason::Internal),
        ModeValue::Opportunistic => Decision::LegacyFallback,
    }
}
