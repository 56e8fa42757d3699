use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Every trust, allocation or admission policy a run can use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Policy {
    Static0,
    Static05,
    Static1,
    M2002,
    Fb2007,
    ActPrime,
    Act,
    NoCred,
    Brs2002e,
    M2009e,
    H2010e,
    Amt,
    Sword,
    Draft,
    Trd,
    Brs2012,
}

impl Policy {
    pub const ALL: [Policy; 16] = [
        Policy::Static0,
        Policy::Static05,
        Policy::Static1,
        Policy::M2002,
        Policy::Fb2007,
        Policy::ActPrime,
        Policy::Act,
        Policy::NoCred,
        Policy::Brs2002e,
        Policy::M2009e,
        Policy::H2010e,
        Policy::Amt,
        Policy::Sword,
        Policy::Draft,
        Policy::Trd,
        Policy::Brs2012,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Policy::Static0 => "static0",
            Policy::Static05 => "static05",
            Policy::Static1 => "static1",
            Policy::M2002 => "m2002",
            Policy::Fb2007 => "fb2007",
            Policy::ActPrime => "actprime",
            Policy::Act => "act",
            Policy::NoCred => "nocred",
            Policy::Brs2002e => "brs2002e",
            Policy::M2009e => "m2009e",
            Policy::H2010e => "h2010e",
            Policy::Amt => "amt",
            Policy::Sword => "sword",
            Policy::Draft => "draft",
            Policy::Trd => "trd",
            Policy::Brs2012 => "brs2012",
        }
    }

    /// Fixed fusion weight of the static groups.
    pub fn static_gamma(&self) -> Option<f64> {
        match self {
            Policy::Static0 => Some(0.0),
            Policy::Static05 => Some(0.5),
            Policy::Static1 => Some(1.0),
            _ => None,
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('\'', "prime").replace(['-', '_'], "");
        Policy::ALL
            .iter()
            .find(|p| p.id() == key)
            .copied()
            .ok_or_else(|| format!("unknown policy `{s}`"))
    }
}

impl TryFrom<String> for Policy {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Policy> for String {
    fn from(p: Policy) -> Self {
        p.id().to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for p in Policy::ALL {
            assert_eq!(p.id().parse::<Policy>().unwrap(), p);
        }
        assert_eq!("ACT'".parse::<Policy>().unwrap(), Policy::ActPrime);
        assert_eq!("act-prime".parse::<Policy>().unwrap(), Policy::ActPrime);
        assert!("nope".parse::<Policy>().is_err());
    }
}
