//! Ordered event log emitted by the engine and replayed by the verifier.
//!
//! Text form: a header line followed by one JSON object per line. Field
//! order within each record is fixed by the struct definitions below.

use serde::{Deserialize, Serialize};

use crate::agents::{AgentId, SFormula};
use crate::error::{Error, Result};
use crate::geometry::{Fraction, Piece};

pub const TRANSCRIPT_HEADER: &str = "chorediv-transcript v1";

/// Which named pool a cut feeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutKind {
    /// Equal division the objector picks `A` and `B` from.
    Division,
    /// The divider's `r` pieces of `A`.
    A,
    /// The divider's `r` pieces of `B`.
    B,
    /// The objector's split of the largest `A` piece into `Z`s.
    Split,
    /// The objector's cut of the leftover in a shrink round.
    Mini,
    /// The closing equal cut of the leftover.
    Final,
}

/// Role a collection slot was created for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotLabel {
    Y,
    Z,
    Plain,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Start {
        n: usize,
        s_formula: SFormula,
    },
    Cut {
        step: String,
        kind: CutKind,
        actor: AgentId,
        source: Piece,
        parts: Vec<Piece>,
    },
    Objection {
        step: String,
        objector: AgentId,
        divider: AgentId,
    },
    Settle {
        step: String,
    },
    Grant {
        step: String,
        player: AgentId,
        piece: Piece,
    },
    /// Role assignment for a pass: `roles[0]` objects, `roles[1]` divides.
    Roles {
        step: String,
        roles: Vec<AgentId>,
    },
    PickPair {
        step: String,
        actor: AgentId,
        larger: Piece,
        smaller: Piece,
    },
    NameR {
        step: String,
        actor: AgentId,
        k: u64,
        #[serde(with = "crate::geometry::fraction_serde")]
        a_value: Fraction,
        #[serde(with = "crate::geometry::fraction_serde")]
        b_value: Fraction,
        r: u64,
    },
    Reserve {
        step: String,
        owner: AgentId,
        pieces: Vec<Piece>,
    },
    SelectY {
        step: String,
        actor: AgentId,
        pieces: Vec<Piece>,
        reserve: Vec<Piece>,
    },
    SelectZ {
        step: String,
        actor: AgentId,
        split: bool,
        pieces: Vec<Piece>,
        reserve: Vec<Piece>,
    },
    /// The remaining pool of the latest cut becomes the collection to choose from.
    Collect {
        step: String,
        pieces: Vec<Piece>,
    },
    Augment {
        step: String,
        actor: AgentId,
        target: usize,
        added: Piece,
    },
    /// Claim: the `ways` smallest slots (restricted to `label` if given) tie
    /// for minimum in `actor`'s measure.
    Tie {
        step: String,
        actor: AgentId,
        ways: usize,
        label: Option<SlotLabel>,
    },
    Choose {
        step: String,
        player: AgentId,
        target: usize,
        piece: Piece,
    },
    RoundEnd {
        step: String,
        #[serde(with = "crate::geometry::fraction_serde")]
        epsilon: Fraction,
    },
    NameS {
        step: String,
        actor: AgentId,
        #[serde(with = "crate::geometry::fraction_serde")]
        leftover_value: Fraction,
        #[serde(with = "crate::geometry::fraction_serde")]
        epsilon: Fraction,
        #[serde(with = "crate::geometry::fraction_serde")]
        shrink: Fraction,
        s: u64,
    },
    MiniRoundEnd {
        step: String,
        cutter: AgentId,
    },
    IaInsert {
        step: String,
        holder: AgentId,
        over: AgentId,
        #[serde(with = "crate::geometry::fraction_serde")]
        lhs: Fraction,
        #[serde(with = "crate::geometry::fraction_serde")]
        rhs: Fraction,
    },
    Poll {
        step: String,
        cutter: AgentId,
        agree: Vec<AgentId>,
        disagree: Vec<AgentId>,
    },
    Recurse {
        step: String,
        objector: AgentId,
        divider: AgentId,
    },
    Done {
        step: String,
    },
}

impl Event {
    /// Short tag as written in the `event` field.
    pub fn tag(&self) -> &'static str {
        match self {
            Event::Start { .. } => "start",
            Event::Cut { .. } => "cut",
            Event::Objection { .. } => "objection",
            Event::Settle { .. } => "settle",
            Event::Grant { .. } => "grant",
            Event::Roles { .. } => "roles",
            Event::PickPair { .. } => "pick_pair",
            Event::NameR { .. } => "name_r",
            Event::Reserve { .. } => "reserve",
            Event::SelectY { .. } => "select_y",
            Event::SelectZ { .. } => "select_z",
            Event::Collect { .. } => "collect",
            Event::Augment { .. } => "augment",
            Event::Tie { .. } => "tie",
            Event::Choose { .. } => "choose",
            Event::RoundEnd { .. } => "round_end",
            Event::NameS { .. } => "name_s",
            Event::MiniRoundEnd { .. } => "mini_round_end",
            Event::IaInsert { .. } => "ia_insert",
            Event::Poll { .. } => "poll",
            Event::Recurse { .. } => "recurse",
            Event::Done { .. } => "done",
        }
    }
}

/// The auditable record of one run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    pub events: Vec<Event>,
}

impl Transcript {
    pub fn push(&mut self, event: Event) {
        self.events.push(event);
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from(TRANSCRIPT_HEADER);
        out.push('\n');
        for event in &self.events {
            out.push_str(&serde_json::to_string(event).expect("events always serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == TRANSCRIPT_HEADER => {}
            _ => return Err(Error::Parse("missing transcript header".into())),
        }
        let events = lines
            .enumerate()
            .map(|(i, line)| {
                serde_json::from_str(line)
                    .map_err(|e| Error::Parse(format!("transcript line {}: {e}", i + 2)))
            })
            .collect::<Result<Vec<Event>>>()?;
        Ok(Transcript { events })
    }

    /// Number of `Cut` events.
    pub fn cut_events(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, Event::Cut { .. }))
            .count()
    }

    /// Knife cuts: a cut into `m` parts makes `m - 1` of them.
    pub fn knife_cuts(&self) -> usize {
        self.events
            .iter()
            .map(|e| match e {
                Event::Cut { parts, .. } => parts.len().saturating_sub(1),
                _ => 0,
            })
            .sum()
    }
}
