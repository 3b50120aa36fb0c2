//! The division state machine.
//!
//! One [`Engine`] drives one run: the opening division, then as many
//! core/shrink/closing passes as objections require. Every action is logged
//! to a [`Transcript`] that the verifier can replay without engine state.
//!
//! Roles are positional within a pass: role 1 is the objector, role 2 the
//! divider, and roles 3..=n go to the remaining players in increasing index.

pub mod params;
pub mod transcript;

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;

use crate::agents::{Agent, AgentId, Reserve, SFormula};
use crate::error::{Error, Result};
use crate::geometry::{format_fraction, Fraction, Piece};
use crate::valuation::{rank, Extreme, StepDensity};

pub use params::Params;
pub use transcript::{CutKind, Event, SlotLabel, Transcript};

/// Shares per player (index `i` belongs to player `i + 1`) plus unallocated cake.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Allocation {
    pub shares: Vec<Piece>,
    pub leftover: Piece,
}

impl Allocation {
    pub fn share(&self, id: AgentId) -> &Piece {
        &self.shares[id.0 - 1]
    }
}

/// Ordered pairs `(i, j)` where `i` can absorb all remaining leftover without envying `j`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IaSet {
    pairs: BTreeSet<(AgentId, AgentId)>,
}

impl IaSet {
    pub fn contains(&self, holder: AgentId, over: AgentId) -> bool {
        self.pairs.contains(&(holder, over))
    }

    pub fn insert(&mut self, holder: AgentId, over: AgentId) -> bool {
        self.pairs.insert((holder, over))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(AgentId, AgentId)> {
        self.pairs.iter()
    }
}

#[derive(Clone, Debug, Default)]
pub struct Config {
    pub s_formula: SFormula,
    /// Cap on passes (opening division included). Defaults to `n(n-1) + 2`.
    pub max_passes: Option<usize>,
}

/// Result of the opening division.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Opening {
    Done(Allocation),
    Objection {
        objector: AgentId,
        divider: AgentId,
        pieces: Vec<Piece>,
    },
}

/// Result of a closing attempt.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Closing {
    Done(Allocation),
    Recurse {
        objector: AgentId,
        divider: AgentId,
        pieces: Vec<Piece>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoreOutcome {
    pub chosen: BTreeMap<AgentId, Piece>,
    pub epsilon: Fraction,
    pub r: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShrinkOutcome {
    pub increments: BTreeMap<AgentId, Piece>,
    pub s: u64,
}

/// Summary numbers for reports.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    /// Opening division plus one per core pass.
    pub passes: usize,
    pub settled_at_opening: bool,
    pub r_values: Vec<u64>,
    pub s_values: Vec<u64>,
    pub ia_pairs: Vec<(AgentId, AgentId)>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub allocation: Allocation,
    pub transcript: Transcript,
    pub stats: RunStats,
}

/// A run that aborted, with everything logged up to the failure.
#[derive(Clone, Debug)]
pub struct RunFailure {
    pub error: Error,
    pub transcript: Transcript,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} events)", self.error, self.transcript.events.len())
    }
}

impl std::error::Error for RunFailure {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Rule {
    Free,
    PreferAugmented,
    Must(SlotLabel),
}

#[derive(Clone, Debug)]
struct Slot {
    piece: Piece,
    label: SlotLabel,
    augmented_by: Vec<AgentId>,
    taken: bool,
}

impl Slot {
    fn new(piece: Piece, label: SlotLabel) -> Self {
        Slot {
            piece,
            label,
            augmented_by: Vec::new(),
            taken: false,
        }
    }
}

fn pieces_of(slots: &[Slot]) -> Vec<Piece> {
    slots.iter().map(|s| s.piece.clone()).collect()
}

// Removes the given indices from `pool`, returning the removed pieces in index order given.
fn take_indices(pool: &mut Vec<Piece>, indices: &[usize]) -> Vec<Piece> {
    let picked: Vec<Piece> = indices.iter().map(|&i| pool[i].clone()).collect();
    let drop: BTreeSet<usize> = indices.iter().copied().collect();
    let mut i = 0;
    pool.retain(|_| {
        let keep = !drop.contains(&i);
        i += 1;
        keep
    });
    picked
}

/// Runs the whole procedure.
pub fn run(
    densities: Vec<StepDensity>,
    config: Config,
) -> std::result::Result<RunOutcome, RunFailure> {
    let mut engine = match Engine::new(densities, config) {
        Ok(e) => e,
        Err(error) => {
            return Err(RunFailure {
                error,
                transcript: Transcript::default(),
            })
        }
    };
    match engine.drive() {
        Ok(allocation) => Ok(RunOutcome {
            allocation,
            transcript: engine.transcript,
            stats: engine.stats,
        }),
        Err(error) => Err(RunFailure {
            error,
            transcript: engine.transcript,
        }),
    }
}

/// Mutable state of one run.
pub struct Engine {
    agents: Vec<Agent>,
    params: Params,
    config: Config,
    shares: Vec<Piece>,
    leftover: Piece,
    ia: IaSet,
    transcript: Transcript,
    stats: RunStats,
}

impl Engine {
    pub fn new(densities: Vec<StepDensity>, config: Config) -> Result<Self> {
        let params = Params::derive(densities.len())?;
        let agents = densities
            .into_iter()
            .enumerate()
            .map(|(i, d)| Agent::new(AgentId(i + 1), d))
            .collect::<Vec<_>>();
        let n = agents.len();
        let mut transcript = Transcript::default();
        transcript.push(Event::Start {
            n,
            s_formula: config.s_formula,
        });
        Ok(Engine {
            agents,
            params,
            config,
            shares: vec![Piece::empty(); n],
            leftover: Piece::unit(),
            ia: IaSet::default(),
            transcript,
            stats: RunStats::default(),
        })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn ia(&self) -> &IaSet {
        &self.ia
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    pub fn allocation(&self) -> Allocation {
        Allocation {
            shares: self.shares.clone(),
            leftover: self.leftover.clone(),
        }
    }

    pub fn leftover(&self) -> &Piece {
        &self.leftover
    }

    fn agent(&self, id: AgentId) -> &Agent {
        &self.agents[id.0 - 1]
    }

    fn n(&self) -> usize {
        self.agents.len()
    }

    fn log(&mut self, event: Event) {
        self.transcript.push(event);
    }

    /// Role order for a pass: objector, divider, then everyone else ascending.
    pub fn roles(&self, objector: AgentId, divider: AgentId) -> Vec<AgentId> {
        let mut roles = vec![objector, divider];
        roles.extend(
            (1..=self.n())
                .map(AgentId)
                .filter(|&id| id != objector && id != divider),
        );
        roles
    }

    fn grant(&mut self, step: &str, player: AgentId, piece: Piece) -> Result<()> {
        if !piece.is_subset_of(&self.leftover) {
            return Err(Error::protocol(step, format!("{player} granted unavailable cake")));
        }
        self.leftover = self.leftover.difference(&piece);
        let share = &mut self.shares[player.0 - 1];
        *share = share.union(&piece);
        Ok(())
    }

    fn drive(&mut self) -> Result<Allocation> {
        let cap = self
            .config
            .max_passes
            .unwrap_or(self.params.pass_bound() + 1);
        self.stats.passes = 1;
        let (mut objector, mut divider, mut pieces) = match self.initial_division()? {
            Opening::Done(allocation) => return Ok(allocation),
            Opening::Objection {
                objector,
                divider,
                pieces,
            } => (objector, divider, pieces),
        };
        loop {
            self.stats.passes += 1;
            if self.stats.passes > cap {
                return Err(Error::protocol(
                    "step 20",
                    format!("exceeded the pass cap of {cap}"),
                ));
            }
            let core = self.core_round(objector, divider, pieces)?;
            self.shrink_phase(objector, divider, &core.epsilon)?;
            match self.final_phase(divider)? {
                Closing::Done(allocation) => return Ok(allocation),
                Closing::Recurse {
                    objector: i,
                    divider: j,
                    pieces: p,
                } => {
                    objector = i;
                    divider = j;
                    pieces = p;
                }
            }
        }
    }

    /// Player 2 cuts the cake into `n` equal pieces and hands piece `i` to player `i`.
    pub fn initial_division(&mut self) -> Result<Opening> {
        let step = "step 1";
        let divider = AgentId(2);
        let n = self.n();
        let pieces = self.agent(divider).density().cut_equal(&self.leftover, n);
        self.log(Event::Cut {
            step: step.into(),
            kind: CutKind::Division,
            actor: divider,
            source: self.leftover.clone(),
            parts: pieces.clone(),
        });
        let objector = (0..n).find(|&i| {
            let others: Vec<Piece> = pieces
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, p)| p.clone())
                .collect();
            self.agents[i].is_envious(&pieces[i], &others)
        });
        match objector {
            None => {
                self.stats.settled_at_opening = true;
                self.log(Event::Settle {
                    step: "step 3".into(),
                });
                for (i, piece) in pieces.into_iter().enumerate() {
                    self.log(Event::Grant {
                        step: "step 3".into(),
                        player: AgentId(i + 1),
                        piece: piece.clone(),
                    });
                    self.grant("step 3", AgentId(i + 1), piece)?;
                }
                self.log(Event::Done {
                    step: "step 3".into(),
                });
                Ok(Opening::Done(self.allocation()))
            }
            Some(i) => {
                let objector = AgentId(i + 1);
                self.log(Event::Objection {
                    step: "step 2".into(),
                    objector,
                    divider,
                });
                Ok(Opening::Objection {
                    objector,
                    divider,
                    pieces,
                })
            }
        }
    }

    fn apply_augmentations(
        &mut self,
        step: &str,
        actor: AgentId,
        slots: &mut [Slot],
        offset: usize,
        augs: Vec<crate::agents::Augmentation>,
        mark_rule: bool,
    ) {
        for aug in augs {
            let slot = &mut slots[offset + aug.target_index];
            slot.piece = slot.piece.union(&aug.added);
            if mark_rule {
                slot.augmented_by.push(actor);
            }
            self.log(Event::Augment {
                step: step.into(),
                actor,
                target: offset + aug.target_index,
                added: aug.added,
            });
        }
    }

    // Players pick in the given order under their rules. Returns the pieces chosen.
    fn choose_in_order(
        &mut self,
        step: &str,
        slots: &mut [Slot],
        order: &[(AgentId, Rule)],
    ) -> Result<BTreeMap<AgentId, Piece>> {
        let mut chosen = BTreeMap::new();
        let mut picks = Vec::with_capacity(order.len());
        // Slot pieces are fixed while choosing, so each player values them once.
        let mut worth: BTreeMap<AgentId, Vec<Fraction>> = BTreeMap::new();
        for &(player, rule) in order {
            let agent = self.agent(player);
            let values = agent.values(&pieces_of(slots));
            let available: Vec<usize> = (0..slots.len()).filter(|&i| !slots[i].taken).collect();
            let eligible: Vec<usize> = match rule {
                Rule::Free => available,
                Rule::PreferAugmented => {
                    let low = available.iter().map(|&i| &values[i]).min().cloned();
                    let own: Vec<usize> = available
                        .iter()
                        .copied()
                        .filter(|&i| slots[i].augmented_by.contains(&player) && Some(&values[i]) == low.as_ref())
                        .collect();
                    if own.is_empty() {
                        available
                    } else {
                        own
                    }
                }
                Rule::Must(label) => available
                    .into_iter()
                    .filter(|&i| slots[i].label == label)
                    .collect(),
            };
            let candidates: Vec<Fraction> = eligible.iter().map(|&i| values[i].clone()).collect();
            let best = rank(&candidates, 1, Extreme::Smallest);
            let Some(&pos) = best.first() else {
                return Err(Error::protocol(
                    step,
                    format!("no eligible piece left for {player}"),
                ));
            };
            let target = eligible[pos];
            slots[target].taken = true;
            let piece = slots[target].piece.clone();
            self.log(Event::Choose {
                step: step.into(),
                player,
                target,
                piece: piece.clone(),
            });
            self.grant(step, player, piece.clone())?;
            chosen.insert(player, piece);
            picks.push((player, target));
            worth.insert(player, values);
        }
        // Within the round every player holds a weakly smallest piece.
        for &(i, mine) in &picks {
            let values = &worth[&i];
            if let Some(&(j, _)) = picks.iter().find(|&&(_, t)| values[t] < values[mine]) {
                return Err(Error::protocol(step, format!("{i} envies {j} within the round")));
            }
        }
        Ok(chosen)
    }

    /// Steps 4 to 9: an envy-free allocation of part of the current leftover
    /// that leaves the objector strictly ahead of the divider.
    pub fn core_round(
        &mut self,
        objector: AgentId,
        divider: AgentId,
        division: Vec<Piece>,
    ) -> Result<CoreOutcome> {
        let n = self.n();
        let params = self.params.clone();
        let roles = self.roles(objector, divider);
        let role = |p: usize| roles[p - 1];
        self.log(Event::Roles {
            step: "step 4".into(),
            roles: roles.clone(),
        });

        // Step 4.
        let (ai, bi) = self.agent(objector).pick_unequal_pair(&division)?;
        let (a, b) = (division[ai].clone(), division[bi].clone());
        self.log(Event::PickPair {
            step: "step 4".into(),
            actor: objector,
            larger: a.clone(),
            smaller: b.clone(),
        });

        // Step 5.
        let obj = self.agent(objector).clone();
        let r = obj.name_r(&a, &b, params.k)?;
        self.log(Event::NameR {
            step: "step 5".into(),
            actor: objector,
            k: params.k,
            a_value: obj.value(&a),
            b_value: obj.value(&b),
            r,
        });
        self.stats.r_values.push(r);

        // Step 6.
        let div = self.agent(divider).clone();
        let rn = r as usize;
        let a_parts = div.density().cut_equal(&a, rn);
        let mut b_pool = div.density().cut_equal(&b, rn);
        self.log(Event::Cut {
            step: "step 6".into(),
            kind: CutKind::A,
            actor: divider,
            source: a,
            parts: a_parts.clone(),
        });
        self.log(Event::Cut {
            step: "step 6".into(),
            kind: CutKind::B,
            actor: divider,
            source: b,
            parts: b_pool.clone(),
        });

        // Step 6.1: roles n-1 down to 3 take the 2(n - p) largest remaining B pieces.
        let mut reserves: BTreeMap<usize, Reserve> = BTreeMap::new();
        for p in (3..n).rev() {
            let id = role(p);
            let idx = self
                .agent(id)
                .density()
                .select_extreme(&b_pool, 2 * (n - p), Extreme::Largest);
            let picked = take_indices(&mut b_pool, &idx);
            self.log(Event::Reserve {
                step: "step 6.1".into(),
                owner: id,
                pieces: picked.clone(),
            });
            reserves.insert(p, Reserve::new(id, picked));
        }

        // Step 7: the objector's Ys; the rest of B is his reserve.
        let yz = params.yz_count;
        let y_idx = obj.density().select_extreme(&b_pool, yz, Extreme::Smallest);
        let ys = take_indices(&mut b_pool, &y_idx);
        self.log(Event::SelectY {
            step: "step 7".into(),
            actor: objector,
            pieces: ys.clone(),
            reserve: b_pool.clone(),
        });
        let mut obj_reserve = Reserve::new(objector, b_pool);
        let mut slots: Vec<Slot> = ys.into_iter().map(|p| Slot::new(p, SlotLabel::Y)).collect();

        // Step 7.1.
        let augs = obj.augment_to_tie(&pieces_of(&slots), &mut obj_reserve, yz)?;
        self.apply_augmentations("step 7.1", objector, &mut slots, 0, augs, false);
        self.log(Event::Tie {
            step: "step 7.1".into(),
            actor: objector,
            ways: yz,
            label: Some(SlotLabel::Y),
        });
        let y_value = obj.value(&slots[0].piece);

        // Step 7.2.
        let mut a_pool = a_parts;
        let top = obj.density().select_extreme(&a_pool, yz, Extreme::Largest);
        let whole = top.iter().all(|&i| obj.value(&a_pool[i]) > y_value);
        let zs = if whole {
            take_indices(&mut a_pool, &top)
        } else {
            let largest = take_indices(&mut a_pool, &top[..1]).remove(0);
            let parts = obj.density().cut_equal(&largest, yz);
            self.log(Event::Cut {
                step: "step 7.2".into(),
                kind: CutKind::Split,
                actor: objector,
                source: largest,
                parts: parts.clone(),
            });
            parts
        };
        if let Some(z) = zs.iter().find(|z| obj.value(z) <= y_value) {
            return Err(Error::protocol(
                "step 7.2",
                format!(
                    "Z worth {} is not above the Ys at {}",
                    format_fraction(&obj.value(z)),
                    format_fraction(&y_value)
                ),
            ));
        }
        self.log(Event::SelectZ {
            step: "step 7.2".into(),
            actor: objector,
            split: !whole,
            pieces: zs.clone(),
            reserve: a_pool.clone(),
        });
        let mut div_reserve = Reserve::new(divider, a_pool);
        slots.extend(zs.into_iter().map(|p| Slot::new(p, SlotLabel::Z)));

        // Step 7.3.
        let z_pieces: Vec<Piece> = pieces_of(&slots[yz..]);
        let augs = div.augment_to_tie(&z_pieces, &mut div_reserve, yz)?;
        self.apply_augmentations("step 7.3", divider, &mut slots, yz, augs, false);
        self.log(Event::Tie {
            step: "step 7.3".into(),
            actor: divider,
            ways: yz,
            label: Some(SlotLabel::Z),
        });

        // Step 8: roles 3 up to n-1 form (n - p + 1)-way ties for smallest.
        for p in 3..n {
            let id = role(p);
            let agent = self.agent(id).clone();
            let reserve = reserves.get_mut(&p).expect("reserve taken at step 6.1");
            let augs = agent.augment_to_tie(&pieces_of(&slots), reserve, n - p + 1)?;
            self.apply_augmentations("step 8", id, &mut slots, 0, augs, true);
            self.log(Event::Tie {
                step: "step 8".into(),
                actor: id,
                ways: n - p + 1,
                label: None,
            });
        }

        // Step 9: choose in order n, n-1, ..., 1.
        let order: Vec<(AgentId, Rule)> = (1..=n)
            .rev()
            .map(|p| {
                let rule = match p {
                    1 => Rule::Must(SlotLabel::Y),
                    2 => Rule::Must(SlotLabel::Z),
                    p if p == n => Rule::Free,
                    _ => Rule::PreferAugmented,
                };
                (role(p), rule)
            })
            .collect();
        let chosen = self.choose_in_order("step 9", &mut slots, &order)?;
        let epsilon = obj.value(&chosen[&divider]) - obj.value(&chosen[&objector]);
        if epsilon <= Fraction::zero() {
            return Err(Error::protocol(
                "step 9",
                format!("objector's advantage {} is not positive", format_fraction(&epsilon)),
            ));
        }
        self.log(Event::RoundEnd {
            step: "step 9".into(),
            epsilon: epsilon.clone(),
        });
        Ok(CoreOutcome { chosen, epsilon, r })
    }

    /// Steps 10 to 15: shrink the leftover below the objector's advantage,
    /// then record the irrevocable advantage.
    pub fn shrink_phase(
        &mut self,
        objector: AgentId,
        divider: AgentId,
        epsilon: &Fraction,
    ) -> Result<ShrinkOutcome> {
        let n = self.n();
        let params = self.params.clone();
        let roles = self.roles(objector, divider);
        let obj = self.agent(objector).clone();
        let leftover_value = obj.value(&self.leftover);
        let s = obj.name_s(
            &leftover_value,
            epsilon,
            &params.round_fraction,
            self.config.s_formula,
        )?;
        self.log(Event::NameS {
            step: "step 10".into(),
            actor: objector,
            leftover_value,
            epsilon: epsilon.clone(),
            shrink: params.round_fraction.clone(),
            s,
        });
        self.stats.s_values.push(s);

        let mut increments: BTreeMap<AgentId, Piece> = BTreeMap::new();
        for _ in 0..s {
            let round_leftover = self.leftover.clone();
            let mut pool = obj.density().cut_equal(&round_leftover, params.round_pieces);
            self.log(Event::Cut {
                step: "step 11".into(),
                kind: CutKind::Mini,
                actor: objector,
                source: round_leftover.clone(),
                parts: pool.clone(),
            });
            let mut reserves = Vec::new();
            for p in 2..n {
                let id = roles[p - 1];
                let idx = self
                    .agent(id)
                    .density()
                    .select_extreme(&pool, params.round_reserve(p), Extreme::Largest);
                let picked = take_indices(&mut pool, &idx);
                self.log(Event::Reserve {
                    step: "step 11".into(),
                    owner: id,
                    pieces: picked.clone(),
                });
                reserves.push(Reserve::new(id, picked));
            }
            self.log(Event::Collect {
                step: "step 12".into(),
                pieces: pool.clone(),
            });
            let mut slots: Vec<Slot> = pool.into_iter().map(|p| Slot::new(p, SlotLabel::Plain)).collect();
            for (p, reserve) in (2..n).zip(reserves.iter_mut()) {
                let id = roles[p - 1];
                let agent = self.agent(id).clone();
                let step = if p == 2 { "step 12" } else { "step 13" };
                let ways = params.round_reserve(p) + 1;
                let augs = agent.augment_to_tie(&pieces_of(&slots), reserve, ways)?;
                self.apply_augmentations(step, id, &mut slots, 0, augs, true);
                self.log(Event::Tie {
                    step: step.into(),
                    actor: id,
                    ways,
                    label: None,
                });
            }
            let order: Vec<(AgentId, Rule)> = (1..=n)
                .rev()
                .map(|p| {
                    let rule = if p == 1 || p == n {
                        Rule::Free
                    } else {
                        Rule::PreferAugmented
                    };
                    (roles[p - 1], rule)
                })
                .collect();
            let chosen = self.choose_in_order("step 14", &mut slots, &order)?;
            let allocated: Fraction = chosen.values().map(|p| obj.value(p)).sum();
            if allocated < &params.round_fraction * obj.value(&round_leftover) {
                return Err(Error::protocol(
                    "step 14",
                    "shrink round allocated less than its guaranteed fraction",
                ));
            }
            for (id, piece) in chosen {
                let entry = increments.entry(id).or_default();
                *entry = entry.union(&piece);
            }
            self.log(Event::MiniRoundEnd {
                step: "step 14".into(),
                cutter: objector,
            });
        }

        // Step 15.
        let lhs = obj.value(&self.shares[objector.0 - 1]) + obj.value(&self.leftover);
        let rhs = obj.value(&self.shares[divider.0 - 1]);
        if lhs >= rhs {
            return Err(Error::protocol(
                "step 15",
                format!(
                    "no irrevocable advantage: {} >= {}",
                    format_fraction(&lhs),
                    format_fraction(&rhs)
                ),
            ));
        }
        if !self.ia.insert(objector, divider) {
            return Err(Error::protocol(
                "step 15",
                format!("pair ({objector}, {divider}) already held an advantage"),
            ));
        }
        self.stats.ia_pairs.push((objector, divider));
        self.log(Event::IaInsert {
            step: "step 15".into(),
            holder: objector,
            over: divider,
            lhs,
            rhs,
        });
        Ok(ShrinkOutcome { increments, s })
    }

    /// Steps 16 to 19: split the leftover among the players who agree the
    /// cutter's pieces are equal, or name the next pass.
    ///
    /// Receivers need an advantage over every non-receiver, so completion
    /// requires `(a, d)` in the advantage set for each agreeing `a` and
    /// disagreeing `d`, unless `a` values the leftover at zero.
    pub fn final_phase(&mut self, cutter: AgentId) -> Result<Closing> {
        let n = self.n();
        let m = self.params.final_pieces;
        let parts = self.agent(cutter).density().cut_equal(&self.leftover, m);
        self.log(Event::Cut {
            step: "step 16".into(),
            kind: CutKind::Final,
            actor: cutter,
            source: self.leftover.clone(),
            parts: parts.clone(),
        });
        let (agree, disagree): (Vec<AgentId>, Vec<AgentId>) =
            (1..=n).map(AgentId).partition(|&id| self.agent(id).agrees_all_equal(&parts));
        self.log(Event::Poll {
            step: "step 17".into(),
            cutter,
            agree: agree.clone(),
            disagree: disagree.clone(),
        });
        let missing = agree.iter().find_map(|&a| {
            if self.agent(a).value(&self.leftover).is_zero() {
                return None;
            }
            disagree
                .iter()
                .find(|&&d| !self.ia.contains(a, d))
                .map(|&d| (a, d))
        });
        match missing {
            None => {
                let per = m / agree.len();
                if per * agree.len() != m {
                    return Err(Error::protocol("step 18", "final pieces do not divide evenly"));
                }
                for (block, &id) in agree.iter().enumerate() {
                    for piece in &parts[block * per..(block + 1) * per] {
                        self.log(Event::Grant {
                            step: "step 18".into(),
                            player: id,
                            piece: piece.clone(),
                        });
                        self.grant("step 18", id, piece.clone())?;
                    }
                }
                self.log(Event::Done {
                    step: "step 18".into(),
                });
                Ok(Closing::Done(self.allocation()))
            }
            Some((objector, divider)) => {
                self.log(Event::Recurse {
                    step: "step 19".into(),
                    objector,
                    divider,
                });
                let pieces = self.reentry_division(objector, divider)?;
                Ok(Closing::Recurse {
                    objector,
                    divider,
                    pieces,
                })
            }
        }
    }

    // The divider's equal division of the leftover that the objector disputes.
    // The closing piece count is tried first, then n, then 2, 3, ...
    fn reentry_division(&mut self, objector: AgentId, divider: AgentId) -> Result<Vec<Piece>> {
        const MAX_PARTS: usize = 4096;
        let mut counts = vec![self.params.final_pieces, self.n()];
        counts.extend(2..=MAX_PARTS);
        let div = self.agent(divider).clone();
        let obj = self.agent(objector).clone();
        for count in counts {
            let parts = div.density().cut_equal(&self.leftover, count);
            if !obj.agrees_all_equal(&parts) {
                self.log(Event::Cut {
                    step: "step 19".into(),
                    kind: CutKind::Division,
                    actor: divider,
                    source: self.leftover.clone(),
                    parts: parts.clone(),
                });
                return Ok(parts);
            }
        }
        Err(Error::protocol(
            "step 19",
            format!("{objector} agrees with every division {divider} makes"),
        ))
    }
}
