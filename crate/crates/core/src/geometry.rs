//! Exact set algebra on finite unions of half-open subintervals of `[0, 1)`.
//!
//! Every value here is immutable once built. A [`Piece`] is always kept in
//! canonical form: intervals sorted, pairwise disjoint and non-adjacent, so
//! structural equality is set equality.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Arbitrary-precision rational, always in lowest terms with a positive denominator.
pub type Fraction = BigRational;

/// Shorthand constructor for small literal fractions.
pub fn frac(numer: i64, denom: i64) -> Fraction {
    Fraction::new(BigInt::from(numer), BigInt::from(denom))
}

/// Formats as `p/q`, including integers (`1/1`, `0/1`).
pub fn format_fraction(value: &Fraction) -> String {
    format!("{}/{}", value.numer(), value.denom())
}

/// Parses `p/q` or a bare integer `p`.
pub fn parse_fraction(text: &str) -> Result<Fraction> {
    let text = text.trim();
    let bad = || Error::Parse(format!("bad fraction {text:?}"));
    match text.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().map_err(|_| bad())?;
            let q: BigInt = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(Fraction::new(p, q))
        }
        None => {
            let p: BigInt = text.parse().map_err(|_| bad())?;
            Ok(Fraction::from_integer(p))
        }
    }
}

/// Serde adapter storing a [`Fraction`] as a `"p/q"` string.
pub mod fraction_serde {
    use super::*;

    pub fn serialize<S: Serializer>(value: &Fraction, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_fraction(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Fraction, D::Error> {
        let text = String::deserialize(d)?;
        parse_fraction(&text).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for a sequence of fractions.
pub mod fraction_vec_serde {
    use super::*;

    pub fn serialize<S: Serializer>(
        values: &[Fraction],
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(values.iter().map(format_fraction))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<Fraction>, D::Error> {
        let texts = Vec::<String>::deserialize(d)?;
        texts
            .iter()
            .map(|t| parse_fraction(t).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Half-open interval `[lo, hi)` with `0 <= lo < hi <= 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Interval {
    lo: Fraction,
    hi: Fraction,
}

impl Interval {
    pub fn new(lo: Fraction, hi: Fraction) -> Result<Self> {
        if lo >= hi {
            return Err(Error::Input(format!(
                "interval [{}, {}) is empty or reversed",
                format_fraction(&lo),
                format_fraction(&hi)
            )));
        }
        if lo < Fraction::zero() || hi > Fraction::one() {
            return Err(Error::Input(format!(
                "interval [{}, {}) leaves the unit interval",
                format_fraction(&lo),
                format_fraction(&hi)
            )));
        }
        Ok(Interval { lo, hi })
    }

    // Callers guarantee lo < hi.
    fn raw(lo: Fraction, hi: Fraction) -> Self {
        debug_assert!(lo < hi);
        Interval { lo, hi }
    }

    pub fn lo(&self) -> &Fraction {
        &self.lo
    }

    pub fn hi(&self) -> &Fraction {
        &self.hi
    }

    pub fn length(&self) -> Fraction {
        &self.hi - &self.lo
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", format_fraction(&self.lo), format_fraction(&self.hi))
    }
}

/// Canonical finite union of half-open intervals inside `[0, 1)`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Piece {
    intervals: Vec<Interval>,
}

impl Piece {
    pub fn empty() -> Self {
        Piece::default()
    }

    /// The whole cake `[0, 1)`.
    pub fn unit() -> Self {
        Piece {
            intervals: vec![Interval::raw(Fraction::zero(), Fraction::one())],
        }
    }

    /// Single-interval piece, validating the endpoints.
    pub fn interval(lo: Fraction, hi: Fraction) -> Result<Self> {
        Ok(Piece {
            intervals: vec![Interval::new(lo, hi)?],
        })
    }

    /// Builds the canonical piece covering the union of `intervals`.
    pub fn canonicalize(intervals: Vec<Interval>) -> Result<Self> {
        for iv in &intervals {
            // Re-validate: intervals may come from deserialized data.
            Interval::new(iv.lo.clone(), iv.hi.clone())?;
        }
        Ok(Self::merge_sorted(intervals))
    }

    /// Canonicalizes raw `(lo, hi)` pairs.
    pub fn from_pairs(pairs: Vec<(Fraction, Fraction)>) -> Result<Self> {
        let intervals = pairs
            .into_iter()
            .map(|(lo, hi)| Interval::new(lo, hi))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::merge_sorted(intervals))
    }

    fn merge_sorted(mut intervals: Vec<Interval>) -> Self {
        intervals.sort_by(|a, b| a.lo.cmp(&b.lo).then_with(|| a.hi.cmp(&b.hi)));
        let mut out: Vec<Interval> = Vec::with_capacity(intervals.len());
        for iv in intervals {
            match out.last_mut() {
                Some(last) if iv.lo <= last.hi => {
                    if iv.hi > last.hi {
                        last.hi = iv.hi;
                    }
                }
                _ => out.push(iv),
            }
        }
        Piece { intervals: out }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Total Lebesgue length.
    pub fn length(&self) -> Fraction {
        self.intervals
            .iter()
            .fold(Fraction::zero(), |acc, iv| acc + iv.length())
    }

    pub fn union(&self, other: &Piece) -> Piece {
        if other.is_empty() {
            return self.clone();
        }
        if self.is_empty() {
            return other.clone();
        }
        let mut all = self.intervals.clone();
        all.extend(other.intervals.iter().cloned());
        Self::merge_sorted(all)
    }

    pub fn intersection(&self, other: &Piece) -> Piece {
        let (a, b) = (&self.intervals, &other.intervals);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < a.len() && j < b.len() {
            let lo = a[i].lo.clone().max(b[j].lo.clone());
            let hi = a[i].hi.clone().min(b[j].hi.clone());
            if lo < hi {
                out.push(Interval::raw(lo, hi));
            }
            if a[i].hi < b[j].hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        // Pieces of two canonical inputs may touch only if both inputs touch.
        Self::merge_sorted(out)
    }

    pub fn difference(&self, other: &Piece) -> Piece {
        let mut out = Vec::new();
        let mut j = 0;
        let b = &other.intervals;
        for iv in &self.intervals {
            let mut cur_lo = iv.lo.clone();
            while j < b.len() && b[j].hi <= cur_lo {
                j += 1;
            }
            let mut k = j;
            while k < b.len() && b[k].lo < iv.hi {
                if b[k].lo > cur_lo {
                    out.push(Interval::raw(cur_lo.clone(), b[k].lo.clone()));
                }
                if b[k].hi > cur_lo {
                    cur_lo = b[k].hi.clone();
                }
                if cur_lo >= iv.hi {
                    break;
                }
                k += 1;
            }
            if cur_lo < iv.hi {
                out.push(Interval::raw(cur_lo, iv.hi.clone()));
            }
        }
        Piece { intervals: out }
    }

    pub fn is_subset_of(&self, other: &Piece) -> bool {
        self.difference(other).is_empty()
    }

    pub fn is_disjoint_from(&self, other: &Piece) -> bool {
        self.intersection(other).is_empty()
    }

    /// Structural canonical-form check: sorted, disjoint, non-adjacent, in range.
    pub fn is_canonical(&self) -> bool {
        let in_range = self.intervals.iter().all(|iv| {
            iv.lo < iv.hi && iv.lo >= Fraction::zero() && iv.hi <= Fraction::one()
        });
        in_range
            && self
                .intervals
                .windows(2)
                .all(|w| w[0].hi.cmp(&w[1].lo) == Ordering::Less)
    }

    /// Union of many pieces.
    pub fn union_all<'a>(pieces: impl IntoIterator<Item = &'a Piece>) -> Piece {
        let all: Vec<Interval> = pieces
            .into_iter()
            .flat_map(|p| p.intervals.iter().cloned())
            .collect();
        Self::merge_sorted(all)
    }

    /// Splits along an ascending cut coordinate: returns `(left, right)` where
    /// `left` is the part of the piece below `x`.
    pub fn split_at(&self, x: &Fraction) -> (Piece, Piece) {
        let mut left = Vec::new();
        let mut right = Vec::new();
        for iv in &self.intervals {
            if &iv.hi <= x {
                left.push(iv.clone());
            } else if &iv.lo >= x {
                right.push(iv.clone());
            } else {
                left.push(Interval::raw(iv.lo.clone(), x.clone()));
                right.push(Interval::raw(x.clone(), iv.hi.clone()));
            }
        }
        (Piece { intervals: left }, Piece { intervals: right })
    }
}

impl fmt::Display for Piece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.intervals.is_empty() {
            return f.write_str("{}");
        }
        f.write_str("{")?;
        for (i, iv) in self.intervals.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{iv}")?;
        }
        f.write_str("}")
    }
}

impl Serialize for Piece {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(
            self.intervals
                .iter()
                .map(|iv| [format_fraction(&iv.lo), format_fraction(&iv.hi)]),
        )
    }
}

impl<'de> Deserialize<'de> for Piece {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[String; 2]>::deserialize(d)?;
        let pairs = pairs
            .iter()
            .map(|[lo, hi]| Ok((parse_fraction(lo)?, parse_fraction(hi)?)))
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        let piece = Piece::from_pairs(pairs).map_err(serde::de::Error::custom)?;
        Ok(piece)
    }
}
