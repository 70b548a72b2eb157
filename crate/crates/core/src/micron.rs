//! Exact decimal lengths in micrometers.
//!
//! Physical sizes are stored as scaled integers (units of 0.1 nm) so that
//! voxel-count × pitch products and error tables come out exact, with no
//! binary floating-point drift in reports.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Fixed-point scale: one unit is 1e-4 μm.
pub const SCALE: i64 = 10_000;

/// A length in micrometers with four exact decimal places.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Microns(i64);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseMicronsError {
    #[error("empty length")]
    Empty,
    #[error("invalid decimal length {0:?}")]
    Invalid(String),
    #[error("length {0:?} has more than four decimal places")]
    TooPrecise(String),
}

impl Microns {
    pub const ZERO: Microns = Microns(0);

    /// Builds a length from raw fixed-point units (1e-4 μm).
    pub const fn from_units(units: i64) -> Self {
        Microns(units)
    }

    pub const fn units(self) -> i64 {
        self.0
    }

    /// Rounds a float to the nearest representable length.
    pub fn from_f64(um: f64) -> Self {
        Microns((um * SCALE as f64).round() as i64)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE as f64
    }

    pub fn abs_diff(self, other: Microns) -> Microns {
        Microns((self.0 - other.0).abs())
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }
}

impl Add for Microns {
    type Output = Microns;
    fn add(self, rhs: Microns) -> Microns {
        Microns(self.0 + rhs.0)
    }
}

impl Sub for Microns {
    type Output = Microns;
    fn sub(self, rhs: Microns) -> Microns {
        Microns(self.0 - rhs.0)
    }
}

/// Extent in voxels times pitch.
impl Mul<Microns> for usize {
    type Output = Microns;
    fn mul(self, rhs: Microns) -> Microns {
        Microns(self as i64 * rhs.0)
    }
}

impl FromStr for Microns {
    type Err = ParseMicronsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(ParseMicronsError::Empty);
        }
        let invalid = || ParseMicronsError::Invalid(s.to_string());
        let (negative, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(invalid());
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(invalid());
        }
        let frac_trimmed = frac_part.trim_end_matches('0');
        if frac_trimmed.len() > 4 {
            return Err(ParseMicronsError::TooPrecise(s.to_string()));
        }
        let int_value: i64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| invalid())?
        };
        let mut frac_value: i64 = 0;
        for (i, b) in frac_trimmed.bytes().enumerate() {
            frac_value += (b - b'0') as i64 * 10i64.pow(3 - i as u32);
        }
        let units = int_value
            .checked_mul(SCALE)
            .and_then(|v| v.checked_add(frac_value))
            .ok_or_else(invalid)?;
        Ok(Microns(if negative { -units } else { units }))
    }
}

impl fmt::Display for Microns {
    /// Shortest exact decimal, always with at least one fractional digit.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let int = abs / SCALE as u64;
        let frac = format!("{:04}", abs % SCALE as u64);
        let mut frac = frac.trim_end_matches('0');
        if frac.is_empty() {
            frac = "0";
        }
        let text = format!("{sign}{int}.{frac}");
        f.pad(&text)
    }
}

impl Serialize for Microns {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.to_f64())
    }
}

impl<'de> Deserialize<'de> for Microns {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = f64::deserialize(deserializer)?;
        if !value.is_finite() {
            return Err(serde::de::Error::custom("length must be finite"));
        }
        Ok(Microns::from_f64(value))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_exact_decimals() {
        assert_eq!("0.7".parse::<Microns>().unwrap().units(), 7_000);
        assert_eq!("65.1".parse::<Microns>().unwrap().units(), 651_000);
        assert_eq!("1".parse::<Microns>().unwrap().units(), 10_000);
        assert_eq!(".25".parse::<Microns>().unwrap().units(), 2_500);
        assert_eq!("-1.5".parse::<Microns>().unwrap().units(), -15_000);
        assert_eq!("0.12340".parse::<Microns>().unwrap().units(), 1_234);
    }

    #[test]
    fn rejects_garbage() {
        assert!("".parse::<Microns>().is_err());
        assert!("abc".parse::<Microns>().is_err());
        assert!("1.2.3".parse::<Microns>().is_err());
        assert!(".".parse::<Microns>().is_err());
        assert!(matches!(
            "0.00001".parse::<Microns>(),
            Err(ParseMicronsError::TooPrecise(_))
        ));
    }

    #[test]
    fn display_is_shortest_exact() {
        assert_eq!(Microns::from_units(84_000).to_string(), "8.4");
        assert_eq!(Microns::from_units(10_000).to_string(), "1.0");
        assert_eq!(Microns::from_units(18_375).to_string(), "1.8375");
        assert_eq!(Microns::from_units(-7_000).to_string(), "-0.7");
        assert_eq!(format!("{:>6}", Microns::from_units(84_000)), "   8.4");
    }

    #[test]
    fn extent_times_pitch() {
        let pitch: Microns = "0.7".parse().unwrap();
        assert_eq!((12 * pitch).to_string(), "8.4");
        assert_eq!((93 * pitch).to_string(), "65.1");
    }

    #[test]
    fn serde_round_trip() {
        let m: Microns = "32.9".parse().unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, "32.9");
        let back: Microns = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
