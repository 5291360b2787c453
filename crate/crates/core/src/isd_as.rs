use alloc::string::ToString;
use core::fmt;
use core::str::FromStr;

use crate::error::ParseError;

/// An isolation-domain / autonomous-system pair, written `<isd>-<as>`.
///
/// Zero in either position is a wildcard and is only meaningful inside
/// policy patterns. Ordering is `(isd, as_id)`, which is also the
/// lexicographic order used to break ties between hop sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IsdAs {
    pub isd: u16,
    pub as_id: u64,
}

impl IsdAs {
    pub const WILDCARD: IsdAs = IsdAs { isd: 0, as_id: 0 };

    pub const fn new(isd: u16, as_id: u64) -> Self {
        IsdAs { isd, as_id }
    }

    /// True when neither component is a wildcard.
    pub const fn is_concrete(&self) -> bool {
        self.isd != 0 && self.as_id != 0
    }

    pub const fn is_full_wildcard(&self) -> bool {
        self.isd == 0 && self.as_id == 0
    }

    /// Pattern match with `0` acting as a wildcard on the pattern side.
    pub const fn matches(&self, concrete: &IsdAs) -> bool {
        (self.isd == 0 || self.isd == concrete.isd) && (self.as_id == 0 || self.as_id == concrete.as_id)
    }
}

/// Free-function form of [`IsdAs::matches`].
pub fn matches(pattern: &IsdAs, concrete: &IsdAs) -> bool {
    pattern.matches(concrete)
}

impl fmt::Display for IsdAs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.isd, self.as_id)
    }
}

fn digits(token: &str, whole: &str) -> Result<(), ParseError> {
    if token.is_empty() {
        return Err(ParseError::IsdAs { token: whole.to_string(), reason: "empty component" });
    }
    if !token.bytes().all(|b| b.is_ascii_digit()) {
        return Err(ParseError::IsdAs { token: token.to_string(), reason: "expected decimal digits" });
    }
    Ok(())
}

/// Parses the canonical `<isd>-<as>` form. Wildcards are accepted.
pub fn parse_isd_as(text: &str) -> Result<IsdAs, ParseError> {
    let (isd, as_id) = text
        .split_once('-')
        .ok_or_else(|| ParseError::IsdAs { token: text.to_string(), reason: "missing `-` separator" })?;
    digits(isd, text)?;
    digits(as_id, text)?;
    let isd = isd
        .parse::<u16>()
        .map_err(|_| ParseError::IsdAs { token: isd.to_string(), reason: "ISD out of range" })?;
    let as_id = as_id
        .parse::<u64>()
        .map_err(|_| ParseError::IsdAs { token: as_id.to_string(), reason: "AS number out of range" })?;
    Ok(IsdAs { isd, as_id })
}

impl FromStr for IsdAs {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_isd_as(s)
    }
}
