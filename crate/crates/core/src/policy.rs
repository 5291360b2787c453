//! Path policy language: first-match ISD/AS access lists plus
//! multi-criteria ordering.
//!
//! ```text
//! # keep traffic out of ISD 3, prefer low-carbon paths
//! - 3-0
//! + 0-0
//! order carbon asc
//! order latency asc
//! ```
//!
//! Each hop of a path is checked against the ACL and the first matching
//! entry decides for that hop; one denied hop excludes the whole path.
//! Surviving paths are sorted by the `order` keys, first key dominating,
//! with remaining ties broken by hop sequence.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use crate::error::{DomainError, ParseError};
use crate::isd_as::{parse_isd_as, IsdAs};
use crate::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Allow,
    Deny,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AclEntry {
    pub action: Action,
    pub pattern: IsdAs,
}

impl AclEntry {
    pub const ALLOW_ALL: AclEntry = AclEntry { action: Action::Allow, pattern: IsdAs::WILDCARD };

    pub fn allow(pattern: IsdAs) -> Self {
        AclEntry { action: Action::Allow, pattern }
    }

    pub fn deny(pattern: IsdAs) -> Self {
        AclEntry { action: Action::Deny, pattern }
    }

    pub fn is_default(&self) -> bool {
        self.pattern.is_full_wildcard()
    }
}

impl fmt::Display for AclEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = match self.action {
            Action::Allow => '+',
            Action::Deny => '-',
        };
        write!(f, "{sign} {}", self.pattern)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Latency,
    Bandwidth,
    Hops,
    Carbon,
    Mtu,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Latency, Metric::Bandwidth, Metric::Hops, Metric::Carbon, Metric::Mtu];

    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Latency => "latency",
            Metric::Bandwidth => "bandwidth",
            Metric::Hops => "hops",
            Metric::Carbon => "carbon",
            Metric::Mtu => "mtu",
        }
    }

    pub fn value(&self, path: &Path) -> f64 {
        let m = path.meta();
        match self {
            Metric::Latency => m.latency_ms,
            Metric::Bandwidth => m.bandwidth_mbps,
            Metric::Hops => m.hop_count as f64,
            Metric::Carbon => m.carbon_g_per_gb,
            Metric::Mtu => f64::from(m.mtu_bytes),
        }
    }
}

impl FromStr for Metric {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Metric::ALL.into_iter().find(|m| m.as_str() == s).ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Asc,
    Desc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OrderKey {
    pub metric: Metric,
    pub direction: Direction,
}

impl OrderKey {
    pub fn new(metric: Metric, direction: Direction) -> Self {
        OrderKey { metric, direction }
    }

    pub fn compare(&self, a: &Path, b: &Path) -> Ordering {
        let ord = self.metric.value(a).total_cmp(&self.metric.value(b));
        match self.direction {
            Direction::Asc => ord,
            Direction::Desc => ord.reverse(),
        }
    }
}

impl fmt::Display for OrderKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dir = match self.direction {
            Direction::Asc => "asc",
            Direction::Desc => "desc",
        };
        write!(f, "order {} {dir}", self.metric.as_str())
    }
}

/// A parsed policy. The ACL always ends in a full-wildcard default entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    acl: Vec<AclEntry>,
    orderings: Vec<OrderKey>,
    pub name: Option<String>,
}

impl Default for Policy {
    fn default() -> Self {
        Policy::allow_all()
    }
}

impl Policy {
    pub fn allow_all() -> Self {
        Policy { acl: alloc::vec![AclEntry::ALLOW_ALL], orderings: Vec::new(), name: None }
    }

    /// Builds a policy, appending `+ 0-0` when the ACL does not already end
    /// in a default entry. Fails on duplicate ordering metrics.
    pub fn new(mut acl: Vec<AclEntry>, orderings: Vec<OrderKey>) -> Result<Self, DomainError> {
        if !acl.last().is_some_and(AclEntry::is_default) {
            acl.push(AclEntry::ALLOW_ALL);
        }
        for (i, k) in orderings.iter().enumerate() {
            if orderings[..i].iter().any(|o| o.metric == k.metric) {
                return Err(DomainError::DuplicateMetric(k.metric.as_str()));
            }
        }
        Ok(Policy { acl, orderings, name: None })
    }

    /// Deny every listed ISD, allow everything else.
    pub fn deny_isds(isds: impl IntoIterator<Item = u16>) -> Self {
        let mut acl: Vec<AclEntry> = isds.into_iter().map(|i| AclEntry::deny(IsdAs::new(i, 0))).collect();
        acl.push(AclEntry::ALLOW_ALL);
        Policy { acl, orderings: Vec::new(), name: None }
    }

    pub fn with_orderings(mut self, orderings: Vec<OrderKey>) -> Self {
        let mut keep: Vec<OrderKey> = Vec::new();
        for k in orderings {
            if !keep.iter().any(|o| o.metric == k.metric) {
                keep.push(k);
            }
        }
        self.orderings = keep;
        self
    }

    pub fn acl(&self) -> &[AclEntry] {
        &self.acl
    }

    pub fn orderings(&self) -> &[OrderKey] {
        &self.orderings
    }

    /// Action of the first ACL entry matching `hop`.
    pub fn first_match(&self, hop: &IsdAs) -> Action {
        self.acl
            .iter()
            .find(|e| e.pattern.matches(hop))
            .map(|e| e.action)
            // unreachable while the default-entry invariant holds
            .unwrap_or(Action::Allow)
    }

    pub fn is_compliant(&self, path: &Path) -> bool {
        path.ids().all(|id| self.first_match(&id) == Action::Allow)
    }

    pub fn compare(&self, a: &Path, b: &Path) -> Ordering {
        self.orderings
            .iter()
            .map(|k| k.compare(a, b))
            .find(|o| o.is_ne())
            .unwrap_or_else(|| a.cmp_sequence(b))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.acl {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        for k in &self.orderings {
            out.push_str(&k.to_string());
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl FromStr for Policy {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_policy(s)
    }
}

pub fn parse_policy(text: &str) -> Result<Policy, ParseError> {
    let mut acl = Vec::new();
    let mut orderings: Vec<OrderKey> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |message: String| ParseError::Policy { line, message };
        let content = raw.split_once('#').map_or(raw, |(c, _)| c);
        let tokens: Vec<&str> = content.split_whitespace().collect();
        match tokens.as_slice() {
            [] => {}
            [sign @ ("+" | "-"), pattern] => {
                let pattern = parse_isd_as(pattern).map_err(|e| err(e.to_string()))?;
                let action = if *sign == "+" { Action::Allow } else { Action::Deny };
                acl.push(AclEntry { action, pattern });
            }
            ["+" | "-", ..] => return Err(err("ACL entry must be `+ <isd>-<as>` or `- <isd>-<as>`".to_string())),
            ["order", metric, dir] => {
                let metric: Metric = metric.parse().map_err(|_| err(format!("unknown metric `{metric}`")))?;
                let direction = match *dir {
                    "asc" => Direction::Asc,
                    "desc" => Direction::Desc,
                    other => return Err(err(format!("unknown direction `{other}`, expected asc or desc"))),
                };
                if orderings.iter().any(|o| o.metric == metric) {
                    return Err(err(format!("duplicate order metric `{}`", metric.as_str())));
                }
                orderings.push(OrderKey { metric, direction });
            }
            ["order", ..] => return Err(err("expected `order <metric> <asc|desc>`".to_string())),
            [other, ..] => return Err(err(format!("unknown directive `{other}`"))),
        }
    }
    if !acl.last().is_some_and(AclEntry::is_default) {
        acl.push(AclEntry::ALLOW_ALL);
    }
    Ok(Policy { acl, orderings, name: None })
}

/// Filters `paths` down to the compliant ones and sorts them by the
/// policy's ordering.
pub fn evaluate(policy: &Policy, paths: &[Path]) -> Vec<Path> {
    let mut out: Vec<Path> = paths.iter().filter(|p| policy.is_compliant(p)).cloned().collect();
    out.sort_by(|a, b| policy.compare(a, b));
    out
}

/// Merges policies in order. Entries of earlier policies are kept up to
/// (not including) their first full-wildcard entry, so only the last
/// policy's default action survives; ordering keys are concatenated with
/// later duplicates dropped.
pub fn combine(policies: &[Policy]) -> Result<Policy, DomainError> {
    let (last, earlier) = policies.split_last().ok_or(DomainError::NoPolicies)?;
    let mut acl = Vec::new();
    for p in earlier {
        acl.extend(p.acl.iter().take_while(|e| !e.is_default()).copied());
    }
    acl.extend(last.acl.iter().copied());
    let orderings = policies.iter().flat_map(|p| p.orderings.iter().copied()).collect();
    let mut out = Policy { acl, orderings: Vec::new(), name: None }.with_orderings(orderings);
    out.name = last.name.clone();
    Ok(out)
}
