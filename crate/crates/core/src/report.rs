//! Per-page coverage: did all, some or none of a page arrive over PAN.

use alloc::string::String;
use core::fmt;

use crate::plan::Route;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Indicator {
    All,
    Some,
    None,
}

impl Indicator {
    pub fn classify(via_pan: u64, total: u64) -> Indicator {
        if via_pan == 0 {
            Indicator::None
        } else if via_pan == total {
            Indicator::All
        } else {
            Indicator::Some
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Indicator::All => "all",
            Indicator::Some => "some",
            Indicator::None => "none",
        }
    }
}

impl fmt::Display for Indicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Running counters for one page.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PageTally {
    pub via_pan: u64,
    pub via_legacy: u64,
    pub blocked: u64,
    pub non_compliant: u64,
}

impl PageTally {
    pub fn record(&mut self, route: Route, policy_compliant: bool) {
        match route {
            Route::Pan => self.via_pan += 1,
            Route::Legacy => self.via_legacy += 1,
            Route::Blocked => self.blocked += 1,
        }
        if !policy_compliant {
            self.non_compliant += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.via_pan + self.via_legacy + self.blocked
    }

    pub fn report(&self, page_id: &str) -> PageReport {
        PageReport {
            page_id: page_id.into(),
            total: self.total(),
            via_pan: self.via_pan,
            via_legacy: self.via_legacy,
            blocked: self.blocked,
            non_compliant: self.non_compliant,
            indicator: Indicator::classify(self.via_pan, self.total()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageReport {
    pub page_id: String,
    pub total: u64,
    pub via_pan: u64,
    pub via_legacy: u64,
    pub blocked: u64,
    pub non_compliant: u64,
    pub indicator: Indicator,
}

impl PageReport {
    pub fn empty(page_id: &str) -> Self {
        PageTally::default().report(page_id)
    }
}
