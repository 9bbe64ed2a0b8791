//! Exact CNY amounts held as integer fen (1/100 yuan).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// An amount of Chinese yuan, stored as a whole number of fen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Cny(i64);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AmountError {
    #[error("amount `{0}` is not a decimal number")]
    Malformed(String),
    #[error("amount `{0}` has more than two decimal places")]
    TooPrecise(String),
    #[error("amount `{0}` is out of range")]
    OutOfRange(String),
}

impl Cny {
    pub const ZERO: Cny = Cny(0);

    pub const fn from_fen(fen: i64) -> Self {
        Cny(fen)
    }

    pub const fn from_yuan(yuan: i64) -> Self {
        Cny(yuan * 100)
    }

    pub const fn fen(self) -> i64 {
        self.0
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn checked_add(self, other: Cny) -> Option<Cny> {
        self.0.checked_add(other.0).map(Cny)
    }

    /// Rounds a floating-point yuan value to the nearest fen. Only used at the
    /// wire boundary where clients may send a JSON number.
    pub fn from_yuan_f64(yuan: f64) -> Option<Cny> {
        if !yuan.is_finite() {
            return None;
        }
        let fen = (yuan * 100.0).round();
        if fen.abs() > i64::MAX as f64 / 2.0 {
            return None;
        }
        Some(Cny(fen as i64))
    }
}

impl fmt::Display for Cny {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:02}", abs / 100, abs % 100)
    }
}

impl FromStr for Cny {
    type Err = AmountError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let raw = s.trim();
        let (negative, body) = match raw.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, raw.strip_prefix('+').unwrap_or(raw)),
        };
        let (whole, frac) = match body.split_once('.') {
            Some((w, f)) => (w, f),
            None => (body, ""),
        };
        let digits = |part: &str| part.bytes().all(|b| b.is_ascii_digit());
        if (whole.is_empty() && frac.is_empty()) || !digits(whole) || !digits(frac) {
            return Err(AmountError::Malformed(s.to_string()));
        }
        if frac.len() > 2 {
            return Err(AmountError::TooPrecise(s.to_string()));
        }
        let whole: i64 = if whole.is_empty() {
            0
        } else {
            whole
                .parse()
                .map_err(|_| AmountError::OutOfRange(s.to_string()))?
        };
        let frac_fen: i64 = match frac.len() {
            0 => 0,
            1 => frac.parse::<i64>().unwrap() * 10,
            _ => frac.parse().unwrap(),
        };
        let fen = whole
            .checked_mul(100)
            .and_then(|v| v.checked_add(frac_fen))
            .ok_or_else(|| AmountError::OutOfRange(s.to_string()))?;
        Ok(Cny(if negative { -fen } else { fen }))
    }
}

impl Serialize for Cny {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Cny {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Number(f64),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Repr::Number(n) => Cny::from_yuan_f64(n)
                .ok_or_else(|| serde::de::Error::custom(format!("amount {n} is out of range"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_common_forms() {
        assert_eq!("9.99".parse::<Cny>().unwrap().fen(), 999);
        assert_eq!("10".parse::<Cny>().unwrap().fen(), 1000);
        assert_eq!("10.5".parse::<Cny>().unwrap().fen(), 1050);
        assert_eq!(".5".parse::<Cny>().unwrap().fen(), 50);
        assert_eq!("-1.25".parse::<Cny>().unwrap().fen(), -125);
        assert_eq!(" 15.00 ".parse::<Cny>().unwrap(), Cny::from_yuan(15));
    }

    #[test]
    fn rejects_bad_amounts() {
        assert!(matches!("".parse::<Cny>(), Err(AmountError::Malformed(_))));
        assert!(matches!("1e3".parse::<Cny>(), Err(AmountError::Malformed(_))));
        assert!(matches!("0.001".parse::<Cny>(), Err(AmountError::TooPrecise(_))));
        assert!(matches!(".".parse::<Cny>(), Err(AmountError::Malformed(_))));
    }

    #[test]
    fn float_wire_values_round_to_fen() {
        let c: Cny = serde_json::from_str("9.99").unwrap();
        assert_eq!(c.fen(), 999);
        let c: Cny = serde_json::from_str("\"15.00\"").unwrap();
        assert_eq!(c.fen(), 1500);
        assert_eq!(serde_json::to_string(&Cny::from_fen(1005)).unwrap(), "\"10.05\"");
    }

    proptest! {
        #[test]
        fn display_parse_round_trip(fen in -10_000_000_000i64..10_000_000_000) {
            let c = Cny::from_fen(fen);
            prop_assert_eq!(c.to_string().parse::<Cny>().unwrap(), c);
        }
    }
}
