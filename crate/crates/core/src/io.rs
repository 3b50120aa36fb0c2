//! Text formats for instances and allocations, plus seeded instance generation.
//!
//! Instance:
//!
//! ```text
//! label two-block
//! n 4
//! player 0/1:1/1 1/2:3/1
//! player 0/1:1/1
//! ...
//! ```
//!
//! Each `player` line lists `start:value` segments of a step density. Values
//! are normalized on ingestion, so any positive scale is accepted.
//!
//! Allocation:
//!
//! ```text
//! n 4
//! share 1 [["0/1","1/4"]]
//! ...
//! leftover []
//! value 1 1/4 1/4 1/4 1/4
//! ```
//!
//! `value i` lists player `i`'s measure of every share in player order.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{format_fraction, parse_fraction, Fraction, Piece};
use crate::protocol::Allocation;
use crate::valuation::{DensityRecord, StepDensity};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub label: String,
    pub players: Vec<StepDensity>,
}

impl Instance {
    pub fn new(label: impl Into<String>, players: Vec<StepDensity>) -> Result<Self> {
        if players.len() < 4 {
            return Err(Error::Input(format!(
                "need at least 4 players, got {}",
                players.len()
            )));
        }
        Ok(Instance {
            label: label.into(),
            players,
        })
    }

    pub fn n(&self) -> usize {
        self.players.len()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("label {}\nn {}\n", self.label, self.n());
        for density in &self.players {
            let segs: Vec<String> = density
                .records()
                .iter()
                .map(|r| format!("{}:{}", format_fraction(&r.start), format_fraction(&r.value)))
                .collect();
            out.push_str(&format!("player {}\n", segs.join(" ")));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut label = String::new();
        let mut n = None;
        let mut players = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let at = |msg: String| Error::Parse(format!("instance line {}: {msg}", lineno + 1));
            let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            match key {
                "label" => label = rest.trim().to_string(),
                "n" => {
                    n = Some(
                        rest.trim()
                            .parse::<usize>()
                            .map_err(|e| at(format!("bad player count: {e}")))?,
                    )
                }
                "player" => {
                    let records = rest
                        .split_whitespace()
                        .map(|seg| {
                            let (start, value) = seg
                                .split_once(':')
                                .ok_or_else(|| at(format!("segment {seg:?} lacks ':'")))?;
                            Ok(DensityRecord {
                                start: parse_fraction(start).map_err(|e| at(e.to_string()))?,
                                value: parse_fraction(value).map_err(|e| at(e.to_string()))?,
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    players.push(
                        StepDensity::from_records(&records).map_err(|e| at(e.to_string()))?,
                    );
                }
                other => return Err(at(format!("unknown key {other:?}"))),
            }
        }
        let n = n.ok_or_else(|| Error::Parse("instance lacks an `n` line".into()))?;
        if n != players.len() {
            return Err(Error::Parse(format!(
                "instance declares n = {n} but lists {} players",
                players.len()
            )));
        }
        Instance::new(label, players).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Deterministic random instance. Each player gets between 1 and `budget`
/// segments with rational breakpoints and positive rational values.
pub fn generate(n: usize, seed: u64, budget: usize) -> Result<Instance> {
    if n < 4 {
        return Err(Error::Input(format!("need at least 4 players, got {n}")));
    }
    if budget == 0 {
        return Err(Error::Input("breakpoint budget must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let players = (0..n)
        .map(|_| {
            let segments = rng.gen_range(1..=budget);
            let mut starts: BTreeSet<Fraction> = BTreeSet::new();
            starts.insert(Fraction::from_integer(0.into()));
            while starts.len() < segments {
                let q: i64 = rng.gen_range(2..=12);
                let p: i64 = rng.gen_range(1..q);
                starts.insert(crate::geometry::frac(p, q));
            }
            let starts: Vec<Fraction> = starts.into_iter().collect();
            let values: Vec<Fraction> = starts
                .iter()
                .map(|_| crate::geometry::frac(rng.gen_range(1..=9), rng.gen_range(1..=4)))
                .collect();
            StepDensity::normalized(starts, values)
        })
        .collect::<Result<Vec<_>>>()?;
    Instance::new(format!("gen n={n} seed={seed} budget={budget}"), players)
}

pub fn allocation_to_text(allocation: &Allocation, densities: &[StepDensity]) -> String {
    let mut out = format!("n {}\n", allocation.shares.len());
    for (i, share) in allocation.shares.iter().enumerate() {
        out.push_str(&format!(
            "share {} {}\n",
            i + 1,
            serde_json::to_string(share).expect("pieces serialize")
        ));
    }
    out.push_str(&format!(
        "leftover {}\n",
        serde_json::to_string(&allocation.leftover).expect("pieces serialize")
    ));
    for (i, d) in densities.iter().enumerate() {
        let values: Vec<String> = allocation
            .shares
            .iter()
            .map(|s| format_fraction(&d.eval(s)))
            .collect();
        out.push_str(&format!("value {} {}\n", i + 1, values.join(" ")));
    }
    out
}

/// Parses an allocation file. `value` lines are informational and ignored.
pub fn allocation_from_text(text: &str) -> Result<Allocation> {
    let mut n = None;
    let mut shares: Vec<Option<Piece>> = Vec::new();
    let mut leftover = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let at = |msg: String| Error::Parse(format!("allocation line {}: {msg}", lineno + 1));
        let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        match key {
            "n" => {
                let count = rest
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| at(format!("bad player count: {e}")))?;
                n = Some(count);
                shares = vec![None; count];
            }
            "share" => {
                let (id, json) = rest
                    .trim()
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| at("share needs an id and a piece".into()))?;
                let id: usize = id.parse().map_err(|e| at(format!("bad player id: {e}")))?;
                if id == 0 || id > shares.len() {
                    return Err(at(format!("player id {id} out of range")));
                }
                let piece: Piece = serde_json::from_str(json).map_err(|e| at(e.to_string()))?;
                shares[id - 1] = Some(piece);
            }
            "leftover" => {
                leftover = Some(serde_json::from_str(rest.trim()).map_err(|e| at(e.to_string()))?)
            }
            "value" => {}
            other => return Err(at(format!("unknown key {other:?}"))),
        }
    }
    n.ok_or_else(|| Error::Parse("allocation lacks an `n` line".into()))?;
    let shares = shares
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| Error::Parse(format!("allocation lacks share {}", i + 1))))
        .collect::<Result<Vec<_>>>()?;
    Ok(Allocation {
        shares,
        leftover: leftover.unwrap_or_default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::frac;

    #[test]
    fn instance_round_trips() {
        let inst = generate(5, 7, 4).unwrap();
        let text = inst.to_text();
        assert_eq!(Instance::from_text(&text).unwrap(), inst);
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(
            generate(4, 11, 6).unwrap().to_text(),
            generate(4, 11, 6).unwrap().to_text()
        );
        assert_ne!(
            generate(4, 11, 6).unwrap().to_text(),
            generate(4, 12, 6).unwrap().to_text()
        );
    }

    #[test]
    fn budget_one_is_uniform() {
        let inst = generate(6, 3, 1).unwrap();
        assert!(inst.players.iter().all(|d| *d == StepDensity::uniform()));
    }

    #[test]
    fn unnormalized_values_accepted() {
        let text = "label x\nn 4\nplayer 0:2 1/2:6\nplayer 0:1\nplayer 0:1\nplayer 0:1\n";
        let inst = Instance::from_text(text).unwrap();
        assert_eq!(inst.players[0].values(), &[frac(1, 2), frac(3, 2)]);
    }

    #[test]
    fn count_mismatch_rejected() {
        let text = "n 5\nplayer 0:1\nplayer 0:1\nplayer 0:1\nplayer 0:1\n";
        assert!(matches!(Instance::from_text(text), Err(Error::Parse(_))));
    }

    #[test]
    fn allocation_round_trips() {
        let alloc = Allocation {
            shares: (0..4)
                .map(|i| Piece::interval(frac(i, 4), frac(i + 1, 4)).unwrap())
                .collect(),
            leftover: Piece::empty(),
        };
        let text = allocation_to_text(&alloc, &vec![StepDensity::uniform(); 4]);
        assert!(text.contains("value 1 1/4 1/4 1/4 1/4"));
        assert_eq!(allocation_from_text(&text).unwrap(), alloc);
    }
}
