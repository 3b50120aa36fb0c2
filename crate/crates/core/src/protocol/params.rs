use num_integer::Integer;

use crate::error::{Error, Result};
use crate::geometry::{frac, Fraction};

/// Counts and constants the procedure needs for `n` players.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Params {
    pub n: usize,
    /// `1 + 2 + ... + (n - 3)`.
    pub k: u64,
    /// Smallest `A` pieces the objector must be able to discard: `k^2 + 4k + 3`.
    pub removal_count: u64,
    /// Floor on `r`: `k^2 + 5k + 5`.
    pub r_min: u64,
    /// Number of `Y`s and of `Z`s: `k + 2`.
    pub yz_count: usize,
    /// Pieces per shrink round: `n^2 - 3n + 4`.
    pub mini_pieces: usize,
    /// Guaranteed fraction allocated per shrink round: `n / mini_pieces`.
    pub shrink_fraction: Fraction,
    /// Pieces in the closing cut: `lcm(1..=n)`.
    pub final_pieces: usize,
    /// Pieces the cutter actually makes per shrink round: `2^(n-1)`.
    /// Agrees with `mini_pieces` at `n = 4` and exceeds it beyond.
    pub round_pieces: usize,
    /// Guaranteed fraction for `round_pieces`: `n / 2^(n-1)`.
    pub round_fraction: Fraction,
}

impl Params {
    pub fn derive(n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::Input(format!(
                "the procedure needs at least 4 players, got {n}"
            )));
        }
        let k = ((n - 3) * (n - 2) / 2) as u64;
        let mini_pieces = n * n - 3 * n + 4;
        let final_pieces = (1..=n).fold(1usize, |acc, m| acc.lcm(&m));
        if n > 40 {
            return Err(Error::Input(format!("{n} players is beyond the supported range")));
        }
        let round_pieces = 1usize << (n - 1);
        Ok(Params {
            n,
            k,
            removal_count: k * k + 4 * k + 3,
            r_min: k * k + 5 * k + 5,
            yz_count: k as usize + 2,
            mini_pieces,
            shrink_fraction: frac(n as i64, mini_pieces as i64),
            final_pieces,
            round_pieces,
            round_fraction: frac(n as i64, round_pieces as i64),
        })
    }

    /// Reserve pieces role `p` (2 to n-1) sets aside in a shrink round.
    /// Its tie for smallest is one wider.
    pub fn round_reserve(&self, p: usize) -> usize {
        1 << (self.n - 1 - p)
    }

    /// Upper bound on core passes: one per ordered pair, plus the opening division.
    pub fn pass_bound(&self) -> usize {
        self.n * (self.n - 1) + 1
    }
}
