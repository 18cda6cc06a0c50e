//! Exact percentage arithmetic and one-decimal report rounding.
//!
//! Rates are kept as exact rationals and rounded only when a report is
//! emitted. Rounding is half-to-even at the tenths digit: 61.25 → 61.2,
//! 13.75 → 13.8, 37.45 → 37.4.

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::tabletop::OutcomeLevel;

pub type Rate = Ratio<i64>;

/// `100 · num / den` as an exact rational. `den` must be non-zero.
pub fn percent(num: u64, den: u64) -> Rate {
    assert!(den > 0, "percentage of an empty set");
    Rate::new(100 * num as i64, den as i64)
}

/// Parses a printed decimal such as `"72.2"` or `"100"` exactly.
pub fn parse_decimal(text: &str) -> Option<Rate> {
    let text = text.trim();
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() || !int_part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if !frac_part.bytes().all(|b| b.is_ascii_digit()) || frac_part.len() > 12 {
        return None;
    }
    let scale = 10i64.pow(frac_part.len() as u32);
    let digits: i64 = format!("{int_part}{frac_part}").parse().ok()?;
    let r = Rate::new(digits, scale);
    Some(if neg { -r } else { r })
}

/// Unweighted mean of exact values; `None` for an empty slice.
pub fn mean(values: &[Rate]) -> Option<Rate> {
    if values.is_empty() {
        return None;
    }
    let sum: Rate = values.iter().copied().sum();
    Some(sum / Rate::from_integer(values.len() as i64))
}

/// A value rounded to tenths, stored as an integer count of tenths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tenths(pub i64);

impl Tenths {
    pub fn round(value: Rate) -> Tenths {
        let scaled = value * Rate::from_integer(10);
        let floor = scaled.floor();
        let frac = scaled - floor;
        let half = Rate::new(1, 2);
        let base = floor.to_integer();
        let rounded = if frac > half || (frac == half && base.rem_euclid(2) == 1) {
            base + 1
        } else {
            base
        };
        Tenths(rounded)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 10.0
    }

    pub fn from_printed(text: &str) -> Option<Tenths> {
        let r = parse_decimal(text)?;
        let scaled = r * Rate::from_integer(10);
        scaled.is_integer().then(|| Tenths(scaled.to_integer()))
    }
}

impl fmt::Display for Tenths {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{}", abs / 10, abs % 10)
    }
}

impl Serialize for Tenths {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Tenths {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(deserializer)?;
        Ok(Tenths((v * 10.0).round() as i64))
    }
}

/// Per-level trial counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub sp: u64,
    pub dc: u64,
    pub tf: u64,
    pub df: u64,
}

impl OutcomeCounts {
    pub fn new(sp: u64, dc: u64, tf: u64, df: u64) -> OutcomeCounts {
        OutcomeCounts { sp, dc, tf, df }
    }

    pub fn record(&mut self, level: OutcomeLevel) {
        match level {
            OutcomeLevel::SP => self.sp += 1,
            OutcomeLevel::DC => self.dc += 1,
            OutcomeLevel::TF => self.tf += 1,
            OutcomeLevel::DF => self.df += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.sp + self.dc + self.tf + self.df
    }

    /// Scene-preserving success rate, exact. `None` when no trials.
    pub fn spsr(&self) -> Option<Rate> {
        (self.total() > 0).then(|| percent(self.sp, self.total()))
    }

    /// Task completion rate, exact. `None` when no trials.
    pub fn tcr(&self) -> Option<Rate> {
        (self.total() > 0).then(|| percent(self.sp + self.dc, self.total()))
    }
}
