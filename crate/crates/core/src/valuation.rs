//! Player measures as piecewise-constant densities on `[0, 1)`.
//!
//! These are the query primitives (evaluate, mark, cut) every protocol step
//! reduces to. All answers are exact.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{format_fraction, Fraction, Interval, Piece};

/// Direction for [`StepDensity::select_extreme`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extreme {
    Smallest,
    Largest,
}

/// Piecewise-constant nonnegative density with rational breakpoints and total mass 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepDensity {
    breakpoints: Vec<Fraction>,
    values: Vec<Fraction>,
}

/// One `(breakpoint, value)` record: density `value` from `breakpoint` up to the next one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityRecord {
    #[serde(with = "crate::geometry::fraction_serde")]
    pub start: Fraction,
    #[serde(with = "crate::geometry::fraction_serde")]
    pub value: Fraction,
}

impl StepDensity {
    /// Builds a density from segment starts and values, scaling so the total is 1.
    ///
    /// `starts` must begin at 0 and be strictly increasing below 1; the final
    /// breakpoint 1 is implicit.
    pub fn normalized(starts: Vec<Fraction>, values: Vec<Fraction>) -> Result<Self> {
        if starts.is_empty() || starts.len() != values.len() {
            return Err(Error::Input(
                "density needs one value per segment start".into(),
            ));
        }
        if !starts[0].is_zero() {
            return Err(Error::Input("first breakpoint must be 0".into()));
        }
        if starts.windows(2).any(|w| w[0] >= w[1]) || starts.last().unwrap() >= &Fraction::one()
        {
            return Err(Error::Input(
                "breakpoints must increase strictly inside [0, 1)".into(),
            ));
        }
        if let Some(v) = values.iter().find(|v| **v < Fraction::zero()) {
            return Err(Error::Input(format!(
                "negative density value {}",
                format_fraction(v)
            )));
        }
        let mut breakpoints = starts;
        breakpoints.push(Fraction::one());
        let total = breakpoints
            .windows(2)
            .zip(&values)
            .fold(Fraction::zero(), |acc, (w, v)| acc + (&w[1] - &w[0]) * v);
        if total.is_zero() {
            return Err(Error::Input("density has no positive mass".into()));
        }
        let values = values.into_iter().map(|v| v / &total).collect();
        Ok(StepDensity {
            breakpoints,
            values,
        })
    }

    /// The uniform density.
    pub fn uniform() -> Self {
        StepDensity {
            breakpoints: vec![Fraction::zero(), Fraction::one()],
            values: vec![Fraction::one()],
        }
    }

    pub fn from_records(records: &[DensityRecord]) -> Result<Self> {
        Self::normalized(
            records.iter().map(|r| r.start.clone()).collect(),
            records.iter().map(|r| r.value.clone()).collect(),
        )
    }

    pub fn records(&self) -> Vec<DensityRecord> {
        self.breakpoints
            .iter()
            .zip(&self.values)
            .map(|(b, v)| DensityRecord {
                start: b.clone(),
                value: v.clone(),
            })
            .collect()
    }

    pub fn breakpoints(&self) -> &[Fraction] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Fraction] {
        &self.values
    }

    // Index of the segment containing coordinate x (x < 1).
    fn segment_of(&self, x: &Fraction) -> usize {
        match self.breakpoints.binary_search(x) {
            Ok(i) => i.min(self.values.len() - 1),
            Err(i) => i - 1,
        }
    }

    /// Exact measure of a piece.
    pub fn eval(&self, piece: &Piece) -> Fraction {
        piece
            .intervals()
            .iter()
            .fold(Fraction::zero(), |acc, iv| acc + self.eval_interval(iv))
    }

    fn eval_interval(&self, iv: &Interval) -> Fraction {
        let mut total = Fraction::zero();
        let mut seg = self.segment_of(iv.lo());
        let mut lo = iv.lo().clone();
        while &lo < iv.hi() {
            let seg_hi = &self.breakpoints[seg + 1];
            let hi = if seg_hi < iv.hi() { seg_hi } else { iv.hi() };
            total += (hi - &lo) * &self.values[seg];
            lo = hi.clone();
            seg += 1;
        }
        total
    }

    /// Leftmost prefix of `piece` (in coordinate order) whose measure is exactly `target`.
    pub fn mark(&self, piece: &Piece, target: &Fraction) -> Result<Piece> {
        if *target < Fraction::zero() {
            return Err(Error::Input(format!(
                "mark target {} is negative",
                format_fraction(target)
            )));
        }
        match self.prefix_point(piece, target, |iv| self.segments(iv)) {
            Some(x) => Ok(piece.split_at(&x).0),
            None => Err(Error::Input(format!(
                "mark target {} exceeds piece value {}",
                format_fraction(target),
                format_fraction(&self.eval(piece))
            ))),
        }
    }

    // (lo, hi, density) segments of the density restricted to interval iv.
    fn segments(&self, iv: &Interval) -> Vec<(Fraction, Fraction, Fraction)> {
        let mut out = Vec::new();
        let mut seg = self.segment_of(iv.lo());
        let mut lo = iv.lo().clone();
        while &lo < iv.hi() {
            let seg_hi = &self.breakpoints[seg + 1];
            let hi = if seg_hi < iv.hi() { seg_hi } else { iv.hi() }.clone();
            out.push((lo, hi.clone(), self.values[seg].clone()));
            lo = hi;
            seg += 1;
        }
        out
    }

    // Smallest coordinate x such that the measure of piece ∩ [0, x) equals target,
    // under the density described by `segs`. None if target exceeds the total.
    fn prefix_point<F>(&self, piece: &Piece, target: &Fraction, segs: F) -> Option<Fraction>
    where
        F: Fn(&Interval) -> Vec<(Fraction, Fraction, Fraction)>,
    {
        if target.is_zero() {
            return Some(Fraction::zero());
        }
        let mut acc = Fraction::zero();
        for iv in piece.intervals() {
            for (lo, hi, density) in segs(iv) {
                let mass = (&hi - &lo) * &density;
                if &acc + &mass >= *target {
                    return Some(lo + (target - &acc) / density);
                }
                acc += mass;
            }
        }
        None
    }

    /// Cuts `piece` into `m` disjoint parts of exactly equal measure by repeated
    /// leftmost marking. If the piece is worthless to this measure the parts
    /// have equal length instead.
    pub fn cut_equal(&self, piece: &Piece, m: usize) -> Vec<Piece> {
        assert!(m >= 1, "cut_equal needs at least one part");
        let total = self.eval(piece);
        let by_length = total.is_zero();
        let share = if by_length {
            piece.length() / Fraction::from_integer(m.into())
        } else {
            total / Fraction::from_integer(m.into())
        };
        let mut parts = Vec::with_capacity(m);
        let mut rest = piece.clone();
        for _ in 1..m {
            let x = if by_length {
                self.prefix_point(&rest, &share, |iv| {
                    vec![(iv.lo().clone(), iv.hi().clone(), Fraction::one())]
                })
            } else {
                self.prefix_point(&rest, &share, |iv| self.segments(iv))
            }
            .expect("share never exceeds what remains");
            let (head, tail) = rest.split_at(&x);
            parts.push(head);
            rest = tail;
        }
        parts.push(rest);
        parts
    }

    /// Indices of the `count` extremal pieces, ordered by value then index.
    pub fn select_extreme(&self, pieces: &[Piece], count: usize, mode: Extreme) -> Vec<usize> {
        let values: Vec<Fraction> = pieces.iter().map(|p| self.eval(p)).collect();
        rank(&values, count, mode)
    }
}

/// Ranks precomputed values; ties go to the lower index.
pub fn rank(values: &[Fraction], count: usize, mode: Extreme) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        let ord = values[a].cmp(&values[b]);
        let ord = match mode {
            Extreme::Smallest => ord,
            Extreme::Largest => ord.reverse(),
        };
        ord.then(a.cmp(&b))
    });
    idx.truncate(count);
    idx
}
