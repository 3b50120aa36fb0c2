//! Honest player strategies.
//!
//! The protocol module enforces the rules; everything a player is free to
//! decide (which pair to object with, which `r` and `s` to name, how to spend
//! reserves) is answered here from the player's own measure.

use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{format_fraction, Fraction, Piece};
use crate::valuation::{rank, Extreme, StepDensity};

/// 1-based player number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub usize);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

/// Cake moved from a reserve onto one piece of a collection.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Augmentation {
    pub target_index: usize,
    pub added: Piece,
    pub source: AgentId,
}

/// How `s` is derived from the leftover and the advantage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SFormula {
    /// Smallest `s` with `leftover * (1 - f)^s < epsilon`.
    #[default]
    Aside,
    /// Smallest `s` with `(f * leftover)^s < epsilon`.
    Literal,
}

impl std::str::FromStr for SFormula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aside" => Ok(SFormula::Aside),
            "literal" => Ok(SFormula::Literal),
            other => Err(Error::Input(format!("unknown s formula {other:?}"))),
        }
    }
}

/// A player's private stock of cake, kept as an ordered list of pieces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reserve {
    pub owner: AgentId,
    pieces: Vec<Piece>,
}

impl Reserve {
    pub fn new(owner: AgentId, pieces: Vec<Piece>) -> Self {
        Reserve { owner, pieces }
    }

    pub fn empty(owner: AgentId) -> Self {
        Reserve::new(owner, Vec::new())
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Everything still held.
    pub fn remaining(&self) -> Piece {
        Piece::union_all(&self.pieces)
    }

    /// Removes cake worth exactly `amount` to `density`.
    ///
    /// Draws from the first single reserve piece that covers the amount;
    /// only when none does is the draw spread across pieces in order.
    pub fn draw(&mut self, density: &StepDensity, amount: &Fraction) -> Result<Piece> {
        if amount.is_zero() {
            return Ok(Piece::empty());
        }
        let values: Vec<Fraction> = self.pieces.iter().map(|p| density.eval(p)).collect();
        if let Some(i) = values.iter().position(|v| v >= amount) {
            let taken = density.mark(&self.pieces[i], amount)?;
            self.pieces[i] = self.pieces[i].difference(&taken);
            return Ok(taken);
        }
        let total: Fraction = values.iter().sum();
        if &total < amount {
            return Err(Error::protocol(
                "augment",
                format!(
                    "{} has reserves worth {} but needs {}",
                    self.owner,
                    format_fraction(&total),
                    format_fraction(amount)
                ),
            ));
        }
        let mut need = amount.clone();
        let mut taken = Piece::empty();
        for (piece, value) in self.pieces.iter_mut().zip(values) {
            if need.is_zero() {
                break;
            }
            let part = if value <= need {
                std::mem::take(piece)
            } else {
                let part = density.mark(piece, &need)?;
                *piece = piece.difference(&part);
                part
            };
            need -= value.min(need.clone());
            taken = taken.union(&part);
        }
        Ok(taken)
    }
}

/// Smallest `r >= k^2 + 5k + 5` with `(k^2 + 4k + 3) * a / r < a - b`.
pub fn smallest_r(k: u64, a_value: &Fraction, b_value: &Fraction) -> Result<u64> {
    let margin = a_value - b_value;
    if margin <= Fraction::zero() {
        return Err(Error::Contract(format!(
            "naming r needs A larger than B, got {} vs {}",
            format_fraction(a_value),
            format_fraction(b_value)
        )));
    }
    let removal = Fraction::from_integer((k * k + 4 * k + 3).into());
    let r_min = k * k + 5 * k + 5;
    // r > removal * a / margin
    let bound = (removal * a_value / margin).floor().to_integer() + 1u32;
    let bound: u64 = bound
        .try_into()
        .map_err(|_| Error::Contract("r does not fit in 64 bits".into()))?;
    Ok(bound.max(r_min))
}

/// Smallest `s >= 1` meeting the chosen leftover bound.
pub fn smallest_s(
    leftover: &Fraction,
    epsilon: &Fraction,
    shrink: &Fraction,
    formula: SFormula,
) -> Result<u64> {
    if *epsilon <= Fraction::zero() {
        return Err(Error::Contract("epsilon must be positive".into()));
    }
    if *shrink <= Fraction::zero() || *shrink >= Fraction::one() {
        return Err(Error::Contract("shrink fraction must lie in (0, 1)".into()));
    }
    if leftover.is_zero() {
        return Ok(1);
    }
    let (mut acc, factor) = match formula {
        SFormula::Aside => (leftover.clone(), Fraction::one() - shrink),
        SFormula::Literal => (Fraction::one(), shrink * leftover),
    };
    if factor >= Fraction::one() {
        return Err(Error::Contract(
            "leftover too large for the literal bound".into(),
        ));
    }
    let mut s = 0;
    loop {
        s += 1;
        acc *= &factor;
        if acc < *epsilon {
            return Ok(s);
        }
    }
}

/// An honest player backed by a step density.
#[derive(Clone, Debug)]
pub struct Agent {
    pub id: AgentId,
    density: StepDensity,
}

impl Agent {
    pub fn new(id: AgentId, density: StepDensity) -> Self {
        Agent { id, density }
    }

    pub fn density(&self) -> &StepDensity {
        &self.density
    }

    pub fn value(&self, piece: &Piece) -> Fraction {
        self.density.eval(piece)
    }

    pub fn values(&self, pieces: &[Piece]) -> Vec<Fraction> {
        pieces.iter().map(|p| self.value(p)).collect()
    }

    /// Objection pair `(larger, smaller)` with the widest margin; ties go to
    /// the lexicographically least pair.
    pub fn pick_unequal_pair(&self, pieces: &[Piece]) -> Result<(usize, usize)> {
        let values = self.values(pieces);
        let mut best: Option<(Fraction, usize, usize)> = None;
        for (hi, vh) in values.iter().enumerate() {
            for (lo, vl) in values.iter().enumerate() {
                let margin = vh - vl;
                if margin <= Fraction::zero() {
                    continue;
                }
                if best.as_ref().is_none_or(|(m, _, _)| margin > *m) {
                    best = Some((margin, hi, lo));
                }
            }
        }
        best.map(|(_, hi, lo)| (hi, lo)).ok_or_else(|| {
            Error::Contract(format!("{} sees all pieces as equal", self.id))
        })
    }

    pub fn name_r(&self, a: &Piece, b: &Piece, k: u64) -> Result<u64> {
        smallest_r(k, &self.value(a), &self.value(b))
    }

    /// Raises the `ways - 1` smallest pieces to the value of the `ways`-th
    /// smallest, drawing from `reserve`. Nothing is added when the tie exists.
    pub fn augment_to_tie(
        &self,
        pieces: &[Piece],
        reserve: &mut Reserve,
        ways: usize,
    ) -> Result<Vec<Augmentation>> {
        if ways < 2 || ways > pieces.len() {
            return Err(Error::Contract(format!(
                "cannot form a {ways}-way tie among {} pieces",
                pieces.len()
            )));
        }
        let values = self.values(pieces);
        let order = rank(&values, ways, Extreme::Smallest);
        let target = values[order[ways - 1]].clone();
        let mut out = Vec::new();
        for &idx in &order[..ways - 1] {
            let gap = &target - &values[idx];
            if gap.is_zero() {
                continue;
            }
            let added = reserve.draw(&self.density, &gap)?;
            out.push(Augmentation {
                target_index: idx,
                added,
                source: reserve.owner,
            });
        }
        Ok(out)
    }

    pub fn name_s(
        &self,
        leftover_measure: &Fraction,
        epsilon: &Fraction,
        shrink_fraction: &Fraction,
        formula: SFormula,
    ) -> Result<u64> {
        smallest_s(leftover_measure, epsilon, shrink_fraction, formula)
    }

    pub fn agrees_all_equal(&self, pieces: &[Piece]) -> bool {
        let values = self.values(pieces);
        values.windows(2).all(|w| w[0] == w[1])
    }

    /// Chores: envy means some other piece is strictly smaller than one's own.
    pub fn is_envious(&self, own: &Piece, others: &[Piece]) -> bool {
        let mine = self.value(own);
        others.iter().any(|p| self.value(p) < mine)
    }
}
