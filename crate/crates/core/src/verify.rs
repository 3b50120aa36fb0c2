//! Independent auditor.
//!
//! Everything here is recomputed from the densities and the transcript. The
//! only crate pieces used are [`geometry`](crate::geometry) and
//! [`valuation`](crate::valuation); protocol constants are re-derived locally.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, ToPrimitive, Zero};

use crate::agents::{AgentId, SFormula};
use crate::error::{Error, Result};
use crate::geometry::{format_fraction, frac, Fraction, Piece};
use crate::protocol::{Allocation, CutKind, Event, SlotLabel, Transcript};
use crate::valuation::StepDensity;

pub const EQUAL_CUT: &str = "equal-cut";
pub const NAME_R: &str = "name-r";
pub const YZ_STRICTNESS: &str = "yz-strictness";
pub const RESERVE_AUGMENTATION: &str = "reserve-augmentation";
pub const TIE: &str = "tie";
pub const CHOICE_RULES: &str = "choice-rules";
pub const NAME_S: &str = "name-s";
pub const SHRINK_FRACTION: &str = "shrink-fraction";
pub const IA_CERTIFICATE: &str = "ia-certificate";
pub const PARTIAL_ENVY_FREE: &str = "partial-envy-free";
pub const CLOSING: &str = "closing-condition";
pub const CONSERVATION: &str = "conservation";
pub const STRUCTURE: &str = "structure";

/// Every check the audit runs, in report order.
pub const CHECKS: [&str; 13] = [
    EQUAL_CUT,
    NAME_R,
    YZ_STRICTNESS,
    RESERVE_AUGMENTATION,
    TIE,
    CHOICE_RULES,
    NAME_S,
    SHRINK_FRACTION,
    IA_CERTIFICATE,
    PARTIAL_ENVY_FREE,
    CLOSING,
    CONSERVATION,
    STRUCTURE,
];

/// `matrix[i][j]` is player `i + 1`'s measure of player `j + 1`'s share.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnvyReport {
    pub matrix: Vec<Vec<Fraction>>,
    /// `(i, j)` where `i` values `j`'s share strictly below its own.
    pub violations: Vec<(AgentId, AgentId)>,
}

impl EnvyReport {
    pub fn is_envy_free(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn envy_matrix(shares: &[Piece], densities: &[StepDensity]) -> Vec<Vec<Fraction>> {
    densities
        .iter()
        .map(|d| shares.iter().map(|s| d.eval(s)).collect())
        .collect()
}

pub fn check_envy_free(allocation: &Allocation, densities: &[StepDensity]) -> EnvyReport {
    let matrix = envy_matrix(&allocation.shares, densities);
    let mut violations = Vec::new();
    for (i, row) in matrix.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if v < &row[i] {
                violations.push((AgentId(i + 1), AgentId(j + 1)));
            }
        }
    }
    EnvyReport { matrix, violations }
}

/// Shares and leftover are pairwise disjoint and together equal `cake`.
pub fn check_partition(allocation: &Allocation, cake: &Piece) -> bool {
    let parts: Vec<&Piece> = allocation
        .shares
        .iter()
        .chain(std::iter::once(&allocation.leftover))
        .collect();
    for (i, p) in parts.iter().enumerate() {
        if parts[i + 1..].iter().any(|q| !p.is_disjoint_from(q)) {
            return false;
        }
    }
    Piece::union_all(parts) == *cake
}

// Floating-point measure by direct overlap of each interval with each segment.
fn float_eval(density: &StepDensity, piece: &Piece) -> f64 {
    let bps: Vec<f64> = density
        .breakpoints()
        .iter()
        .map(|b| b.to_f64().unwrap_or(f64::NAN))
        .collect();
    let vals: Vec<f64> = density
        .values()
        .iter()
        .map(|v| v.to_f64().unwrap_or(f64::NAN))
        .collect();
    let mut total = 0.0;
    for iv in piece.intervals() {
        let (lo, hi) = (
            iv.lo().to_f64().unwrap_or(f64::NAN),
            iv.hi().to_f64().unwrap_or(f64::NAN),
        );
        for (seg, v) in vals.iter().enumerate() {
            let overlap = hi.min(bps[seg + 1]) - lo.max(bps[seg]);
            if overlap > 0.0 {
                total += overlap * v;
            }
        }
    }
    total
}

/// Compares a claimed exact envy matrix against a float recomputation.
pub fn crosscheck_matrix(
    exact: &[Vec<Fraction>],
    allocation: &Allocation,
    densities: &[StepDensity],
    tolerance: f64,
) -> bool {
    if exact.len() != densities.len() {
        return false;
    }
    densities.iter().zip(exact).all(|(d, row)| {
        row.len() == allocation.shares.len()
            && allocation.shares.iter().zip(row).all(|(s, e)| {
                let approx = float_eval(d, s);
                (approx - e.to_f64().unwrap_or(f64::NAN)).abs() <= tolerance
            })
    })
}

pub fn numeric_crosscheck(allocation: &Allocation, densities: &[StepDensity], tolerance: f64) -> bool {
    let exact = envy_matrix(&allocation.shares, densities);
    crosscheck_matrix(&exact, allocation, densities, tolerance)
}

/// One failed check at one event (`None` for end-of-transcript checks).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Finding {
    pub check: &'static str,
    pub event: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.event {
            Some(i) => write!(f, "{} (event {}): {}", self.check, i, self.detail),
            None => write!(f, "{}: {}", self.check, self.detail),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct AuditReport {
    pub failures: Vec<Finding>,
    /// The allocation the transcript arrives at, when replay reached the end.
    pub allocation: Option<Allocation>,
    pub passes: usize,
    pub ia_pairs: Vec<(AgentId, AgentId)>,
    pub mini_rounds: usize,
    /// Per mini round: chosen measure and guaranteed measure in the cutter's view.
    pub mini_round_shrink: Vec<(Fraction, Fraction)>,
    pub cut_events: usize,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn failed_checks(&self) -> BTreeSet<&'static str> {
        self.failures.iter().map(|f| f.check).collect()
    }

    /// One line per check, then one line per failure.
    pub fn to_text(&self) -> String {
        let failed = self.failed_checks();
        let mut out = String::new();
        for check in CHECKS {
            let mark = if failed.contains(check) { "FAIL" } else { "pass" };
            out.push_str(&format!("{mark} {check}\n"));
        }
        for f in &self.failures {
            out.push_str(&format!("  {f}\n"));
        }
        out
    }
}

// Constants re-derived independently of the engine.
struct Rules {
    n: usize,
    k: u64,
    removal: u64,
    r_floor: u64,
    yz: usize,
    round_pieces: usize,
    round_fraction: Fraction,
    final_pieces: usize,
}

impl Rules {
    fn new(n: usize) -> Self {
        let k: u64 = (1..=(n as u64 - 3)).sum();
        let gcd = |mut a: usize, mut b: usize| {
            while b != 0 {
                (a, b) = (b, a % b);
            }
            a
        };
        let final_pieces = (1..=n).fold(1, |acc, m| acc / gcd(acc, m) * m);
        let round_pieces = 2usize.pow(n as u32 - 1);
        Rules {
            n,
            k,
            removal: k * k + 4 * k + 3,
            r_floor: k * k + 5 * k + 5,
            yz: k as usize + 2,
            round_pieces,
            round_fraction: frac(n as i64, round_pieces as i64),
            final_pieces,
        }
    }

    fn r_ok(&self, r: u64, a: &Fraction, b: &Fraction) -> bool {
        r >= self.r_floor && r > 0 && Fraction::from_integer(self.removal.into()) * a / Fraction::from_integer(r.into()) < a - b
    }

    fn s_ok(&self, s: u64, formula: SFormula, leftover: &Fraction, eps: &Fraction) -> bool {
        let base = match formula {
            SFormula::Aside => Fraction::one() - &self.round_fraction,
            SFormula::Literal => &self.round_fraction * leftover,
        };
        let mut acc = match formula {
            SFormula::Aside => leftover.clone(),
            SFormula::Literal => Fraction::one(),
        };
        for _ in 0..s {
            acc *= &base;
        }
        &acc < eps
    }
}

#[derive(Clone, Debug)]
struct SlotState {
    piece: Piece,
    label: SlotLabel,
    augmented_by: Vec<AgentId>,
    taken: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Opening,
    Core,
    Shrink,
    Closing,
    Finished,
}

struct Replay<'a> {
    densities: &'a [StepDensity],
    rules: Rules,
    formula: SFormula,
    shares: Vec<Piece>,
    leftover: Piece,
    // worth[i][j] is player i's value of share j; left_worth[i] of the leftover.
    worth: Vec<Vec<Fraction>>,
    left_worth: Vec<Fraction>,
    ia: BTreeMap<(AgentId, AgentId), ()>,
    phase: Phase,
    roles: Vec<AgentId>,
    pending: Option<(AgentId, AgentId)>,
    division: Vec<Piece>,
    pair: Option<(Piece, Piece)>,
    r: Option<u64>,
    pool: Vec<Piece>,
    a_pool: Vec<Piece>,
    split_parts: Vec<Piece>,
    reserves: BTreeMap<AgentId, Piece>,
    reserve_order: Vec<AgentId>,
    slots: Vec<SlotState>,
    chosen: BTreeMap<AgentId, Piece>,
    choose_count: usize,
    epsilon: Option<Fraction>,
    s: Option<u64>,
    minis_done: u64,
    mini_start: Fraction,
    inserts_this_pass: usize,
    poll: Option<(Vec<AgentId>, Vec<AgentId>, Piece)>,
    final_parts: Vec<Piece>,
    final_grants: usize,
    report: AuditReport,
    index: usize,
    halted: bool,
}

impl<'a> Replay<'a> {
    fn value(&self, id: AgentId, piece: &Piece) -> Fraction {
        self.densities[id.0 - 1].eval(piece)
    }

    fn fail(&mut self, check: &'static str, detail: impl Into<String>) {
        self.report.failures.push(Finding {
            check,
            event: Some(self.index),
            detail: detail.into(),
        });
    }

    fn halt(&mut self, detail: impl Into<String>) {
        self.fail(STRUCTURE, detail);
        self.halted = true;
    }

    fn id_ok(&self, id: AgentId) -> bool {
        id.0 >= 1 && id.0 <= self.rules.n
    }

    fn role(&self, p: usize) -> AgentId {
        self.roles[p - 1]
    }

    fn role_of(&self, id: AgentId) -> Option<usize> {
        self.roles.iter().position(|&r| r == id).map(|i| i + 1)
    }

    fn check_equal_cut(&mut self, actor: AgentId, source: &Piece, parts: &[Piece]) {
        for (i, p) in parts.iter().enumerate() {
            if parts[i + 1..].iter().any(|q| !p.is_disjoint_from(q)) {
                self.fail(EQUAL_CUT, "cut parts overlap");
                return;
            }
        }
        if Piece::union_all(parts) != *source {
            self.fail(EQUAL_CUT, "cut parts do not reassemble the source");
            return;
        }
        let values: Vec<Fraction> = parts.iter().map(|p| self.value(actor, p)).collect();
        if let Some(w) = values.windows(2).find(|w| w[0] != w[1]) {
            let detail = format!(
                "{actor} values parts unequally: {} vs {}",
                format_fraction(&w[0]),
                format_fraction(&w[1])
            );
            self.fail(EQUAL_CUT, detail);
        }
    }

    fn check_envy_now(&mut self, context: &str) {
        for i in 0..self.rules.n {
            let own = self.worth[i][i].clone();
            for j in 0..self.rules.n {
                let other = self.worth[i][j].clone();
                if other < own {
                    let detail = format!(
                        "after {context}: P{} values P{}'s share at {} below its own {}",
                        i + 1,
                        j + 1,
                        format_fraction(&other),
                        format_fraction(&own)
                    );
                    self.fail(PARTIAL_ENVY_FREE, detail);
                }
            }
        }
    }

    fn check_ia(&mut self) {
        let pairs: Vec<(AgentId, AgentId)> = self.ia.keys().copied().collect();
        for (h, o) in pairs {
            let lhs = &self.worth[h.0 - 1][h.0 - 1] + &self.left_worth[h.0 - 1];
            let rhs = self.worth[h.0 - 1][o.0 - 1].clone();
            if lhs >= rhs {
                let detail = format!(
                    "advantage ({h}, {o}) lost: {} >= {}",
                    format_fraction(&lhs),
                    format_fraction(&rhs)
                );
                self.fail(IA_CERTIFICATE, detail);
            }
        }
    }

    fn take_from(pool: &mut Vec<Piece>, piece: &Piece) -> bool {
        match pool.iter().position(|p| p == piece) {
            Some(i) => {
                pool.remove(i);
                true
            }
            None => false,
        }
    }

    fn grant(&mut self, player: AgentId, piece: &Piece) {
        if !piece.is_subset_of(&self.leftover) {
            self.fail(CONSERVATION, format!("{player} receives cake outside the leftover"));
            return;
        }
        self.leftover = self.leftover.difference(piece);
        let share = &mut self.shares[player.0 - 1];
        *share = share.union(piece);
        for (i, d) in self.densities.iter().enumerate() {
            let v = d.eval(piece);
            self.worth[i][player.0 - 1] += &v;
            self.left_worth[i] -= v;
        }
    }

    // Expected chooser for the next choose event: roles n down to 1.
    fn expected_chooser(&self) -> Option<AgentId> {
        let n = self.rules.n;
        (self.choose_count < n).then(|| self.role(n - self.choose_count))
    }

    fn lex_missing(&self, agree: &[AgentId], disagree: &[AgentId], leftover: &Piece) -> Option<(AgentId, AgentId)> {
        for &a in agree {
            if self.value(a, leftover).is_zero() {
                continue;
            }
            for &d in disagree {
                if !self.ia.contains_key(&(a, d)) {
                    return Some((a, d));
                }
            }
        }
        None
    }

    fn start_pass(&mut self) {
        self.pair = None;
        self.r = None;
        self.pool.clear();
        self.a_pool.clear();
        self.split_parts.clear();
        self.reserves.clear();
        self.reserve_order.clear();
        self.slots.clear();
        self.chosen.clear();
        self.choose_count = 0;
        self.epsilon = None;
        self.s = None;
        self.minis_done = 0;
        self.inserts_this_pass = 0;
        self.poll = None;
        self.final_parts.clear();
        self.final_grants = 0;
    }

    fn step(&mut self, event: &Event) {
        if self.phase == Phase::Finished {
            self.halt("events after done");
            return;
        }
        match event {
            Event::Start { .. } => self.halt("repeated start"),
            Event::Cut {
                kind,
                actor,
                source,
                parts,
                ..
            } => self.on_cut(*kind, *actor, source, parts),
            Event::Objection { objector, divider, .. } => {
                if self.phase != Phase::Opening || self.division.is_empty() {
                    return self.halt("objection outside the opening");
                }
                if *divider != AgentId(2) {
                    self.fail(STRUCTURE, "the opening divider must be P2");
                }
                let envious = (0..self.rules.n).find(|&i| {
                    let own = self.densities[i].eval(&self.division[i]);
                    self.division.iter().any(|p| self.densities[i].eval(p) < own)
                });
                if envious.map(|i| AgentId(i + 1)) != Some(*objector) {
                    self.fail(STRUCTURE, format!("{objector} is not the lowest envious player"));
                }
                self.pending = Some((*objector, *divider));
            }
            Event::Settle { .. } => {
                if self.phase != Phase::Opening || self.division.len() != self.rules.n {
                    return self.halt("settle without an opening division");
                }
                for i in 0..self.rules.n {
                    let own = self.densities[i].eval(&self.division[i]);
                    if self.division.iter().any(|p| self.densities[i].eval(p) < own) {
                        self.fail(PARTIAL_ENVY_FREE, format!("P{} objects to the opening division", i + 1));
                    }
                }
                self.final_grants = 0;
                self.phase = Phase::Closing;
                self.final_parts = self.division.clone();
                self.poll = Some(((1..=self.rules.n).map(AgentId).collect(), Vec::new(), Piece::unit()));
            }
            Event::Grant { player, piece, .. } => self.on_grant(*player, piece),
            Event::Roles { roles, .. } => self.on_roles(roles),
            Event::PickPair {
                actor,
                larger,
                smaller,
                ..
            } => {
                if self.phase != Phase::Core || *actor != self.role(1) {
                    return self.halt("pair picked out of turn");
                }
                let mut pool = self.division.clone();
                if !Self::take_from(&mut pool, larger) || !Self::take_from(&mut pool, smaller) {
                    return self.halt("picked pair is not from the division");
                }
                if self.value(*actor, larger) <= self.value(*actor, smaller) {
                    self.fail(NAME_R, "picked pair is not strictly ordered");
                }
                self.pair = Some((larger.clone(), smaller.clone()));
            }
            Event::NameR {
                actor,
                k,
                a_value,
                b_value,
                r,
                ..
            } => {
                let Some((a, b)) = self.pair.clone() else {
                    return self.halt("r named before a pair");
                };
                if *actor != self.role(1) {
                    self.fail(NAME_R, "r named by someone other than the objector");
                }
                if *k != self.rules.k {
                    self.fail(NAME_R, format!("k recorded as {k}, expected {}", self.rules.k));
                }
                let (va, vb) = (self.value(*actor, &a), self.value(*actor, &b));
                if &va != a_value || &vb != b_value {
                    self.fail(NAME_R, "recorded measures of A and B are wrong");
                }
                if !self.rules.r_ok(*r, &va, &vb) {
                    self.fail(NAME_R, format!("r = {r} misses the bound"));
                } else if *r > self.rules.r_floor && self.rules.r_ok(r - 1, &va, &vb) {
                    self.fail(NAME_R, format!("r = {r} is not minimal"));
                }
                self.r = Some(*r);
            }
            Event::Reserve { owner, pieces, .. } => self.on_reserve(*owner, pieces),
            Event::SelectY {
                actor,
                pieces,
                reserve,
                ..
            } => {
                if self.phase != Phase::Core || *actor != self.role(1) {
                    return self.halt("Ys selected out of turn");
                }
                let mut pool = self.pool.clone();
                for p in pieces.iter().chain(reserve) {
                    if !Self::take_from(&mut pool, p) {
                        return self.halt("Y selection uses pieces outside B");
                    }
                }
                if !pool.is_empty() || pieces.len() != self.rules.yz {
                    return self.halt("Y selection does not use B exactly");
                }
                self.pool.clear();
                self.reserves.insert(*actor, Piece::union_all(reserve));
                self.slots = pieces
                    .iter()
                    .map(|p| SlotState {
                        piece: p.clone(),
                        label: SlotLabel::Y,
                        augmented_by: Vec::new(),
                        taken: false,
                    })
                    .collect();
            }
            Event::SelectZ {
                actor,
                split,
                pieces,
                reserve,
                ..
            } => self.on_select_z(*actor, *split, pieces, reserve),
            Event::Collect { pieces, .. } => {
                if self.phase != Phase::Shrink || *pieces != self.pool {
                    return self.halt("collection differs from the remaining pool");
                }
                self.slots = pieces
                    .iter()
                    .map(|p| SlotState {
                        piece: p.clone(),
                        label: SlotLabel::Plain,
                        augmented_by: Vec::new(),
                        taken: false,
                    })
                    .collect();
                self.pool.clear();
            }
            Event::Augment {
                actor,
                target,
                added,
                ..
            } => self.on_augment(*actor, *target, added),
            Event::Tie {
                actor, ways, label, ..
            } => self.on_tie(*actor, *ways, *label),
            Event::Choose {
                player,
                target,
                piece,
                ..
            } => self.on_choose(*player, *target, piece),
            Event::RoundEnd { epsilon, .. } => {
                if self.phase != Phase::Core || self.chosen.len() != self.rules.n {
                    return self.halt("round ended before everyone chose");
                }
                let (obj, div) = (self.role(1), self.role(2));
                let eps = self.value(obj, &self.chosen[&div]) - self.value(obj, &self.chosen[&obj]);
                if &eps != epsilon || eps <= Fraction::zero() {
                    self.fail(
                        STRUCTURE,
                        format!("recorded advantage {} but replay gives {}", format_fraction(epsilon), format_fraction(&eps)),
                    );
                }
                self.check_envy_now("the core round");
                self.epsilon = Some(eps);
                self.phase = Phase::Shrink;
                self.slots.clear();
                self.chosen.clear();
                self.choose_count = 0;
            }
            Event::NameS {
                actor,
                leftover_value,
                epsilon,
                shrink,
                s,
                ..
            } => {
                if self.phase != Phase::Shrink || *actor != self.role(1) || self.s.is_some() {
                    return self.halt("s named out of turn");
                }
                let lv = self.left_worth[actor.0 - 1].clone();
                if &lv != leftover_value || Some(epsilon) != self.epsilon.as_ref() || shrink != &self.rules.round_fraction {
                    self.fail(NAME_S, "recorded inputs to s are wrong");
                }
                let eps = self.epsilon.clone().unwrap_or_default();
                if *s == 0 || !self.rules.s_ok(*s, self.formula, &lv, &eps) {
                    self.fail(NAME_S, format!("s = {s} misses the bound"));
                } else if *s > 1 && self.rules.s_ok(s - 1, self.formula, &lv, &eps) {
                    self.fail(NAME_S, format!("s = {s} is not minimal"));
                }
                self.s = Some(*s);
            }
            Event::MiniRoundEnd { cutter, .. } => {
                if self.phase != Phase::Shrink || self.chosen.len() != self.rules.n || *cutter != self.role(1) {
                    return self.halt("mini round ended before everyone chose");
                }
                let got: Fraction = self.chosen.values().map(|p| self.value(*cutter, p)).sum();
                let need = &self.rules.round_fraction * &self.mini_start;
                if got < need {
                    self.fail(
                        SHRINK_FRACTION,
                        format!("allocated {} of the required {}", format_fraction(&got), format_fraction(&need)),
                    );
                }
                self.report.mini_round_shrink.push((got, need));
                self.check_envy_now("a mini round");
                self.minis_done += 1;
                self.report.mini_rounds += 1;
                self.slots.clear();
                self.chosen.clear();
                self.choose_count = 0;
            }
            Event::IaInsert {
                holder,
                over,
                lhs,
                rhs,
                ..
            } => {
                if self.phase != Phase::Shrink || *holder != self.role(1) || *over != self.role(2) {
                    return self.halt("advantage inserted out of turn");
                }
                if Some(self.minis_done) != self.s {
                    self.fail(NAME_S, "number of mini rounds differs from s");
                }
                let l = &self.worth[holder.0 - 1][holder.0 - 1] + &self.left_worth[holder.0 - 1];
                let r = self.worth[holder.0 - 1][over.0 - 1].clone();
                if &l != lhs || &r != rhs {
                    self.fail(IA_CERTIFICATE, "recorded certificate values are wrong");
                }
                if l >= r {
                    self.fail(
                        IA_CERTIFICATE,
                        format!("no advantage: {} >= {}", format_fraction(&l), format_fraction(&r)),
                    );
                }
                if self.ia.insert((*holder, *over), ()).is_some() {
                    self.fail(IA_CERTIFICATE, format!("({holder}, {over}) inserted twice"));
                }
                self.report.ia_pairs.push((*holder, *over));
                self.inserts_this_pass += 1;
                self.phase = Phase::Closing;
            }
            Event::Poll {
                cutter,
                agree,
                disagree,
                ..
            } => {
                if self.phase != Phase::Closing || self.final_parts.is_empty() || *cutter != self.role(2) {
                    return self.halt("poll without a closing cut");
                }
                let (a, d): (Vec<AgentId>, Vec<AgentId>) = (1..=self.rules.n).map(AgentId).partition(|&id| {
                    let vals: Vec<Fraction> = self.final_parts.iter().map(|p| self.value(id, p)).collect();
                    vals.windows(2).all(|w| w[0] == w[1])
                });
                if &a != agree || &d != disagree {
                    self.fail(STRUCTURE, "poll does not match the players' measures");
                }
                self.poll = Some((a, d, self.leftover.clone()));
            }
            Event::Recurse { objector, divider, .. } => {
                let Some((a, d, l)) = self.poll.clone() else {
                    return self.halt("recursion without a poll");
                };
                match self.lex_missing(&a, &d, &l) {
                    Some(pair) if pair == (*objector, *divider) => {}
                    Some((i, j)) => self.fail(CLOSING, format!("next pass should be ({i}, {j})")),
                    None => self.fail(CLOSING, "recursion although the closing condition holds"),
                }
                self.pending = Some((*objector, *divider));
                self.division.clear();
                self.phase = Phase::Opening;
            }
            Event::Done { .. } => {
                if self.phase != Phase::Closing || self.final_grants != self.final_parts.len() {
                    return self.halt("done before the closing distribution");
                }
                if !self.leftover.is_empty() {
                    self.fail(CONSERVATION, "cake left over at the end");
                }
                self.check_envy_now("the closing distribution");
                self.phase = Phase::Finished;
            }
        }
    }

    fn on_cut(&mut self, kind: CutKind, actor: AgentId, source: &Piece, parts: &[Piece]) {
        if !self.id_ok(actor) {
            return self.halt("cut by an unknown player");
        }
        self.report.cut_events += 1;
        self.check_equal_cut(actor, source, parts);
        match kind {
            CutKind::Division => {
                if self.phase != Phase::Opening || !self.division.is_empty() {
                    return self.halt("division out of turn");
                }
                if source != &self.leftover {
                    self.fail(CONSERVATION, "division source is not the leftover");
                }
                match self.pending {
                    None => {
                        if actor != AgentId(2) || parts.len() != self.rules.n {
                            self.fail(STRUCTURE, "opening division must be P2's cut into n");
                        }
                    }
                    Some((obj, div)) => {
                        if actor != div {
                            self.fail(STRUCTURE, "division made by the wrong player");
                        }
                        let vals: Vec<Fraction> = parts.iter().map(|p| self.value(obj, p)).collect();
                        if vals.windows(2).all(|w| w[0] == w[1]) {
                            self.fail(STRUCTURE, format!("{obj} has no objection to the division"));
                        }
                    }
                }
                self.division = parts.to_vec();
            }
            CutKind::A | CutKind::B => {
                let Some((a, b)) = self.pair.clone() else {
                    return self.halt("A/B cut before the pair");
                };
                if self.phase != Phase::Core || actor != self.role(2) {
                    return self.halt("A/B cut out of turn");
                }
                let expected = if kind == CutKind::A { a } else { b };
                if source != &expected {
                    self.fail(STRUCTURE, "A/B cut of the wrong piece");
                }
                if Some(parts.len() as u64) != self.r {
                    self.fail(NAME_R, format!("cut into {} parts but r = {:?}", parts.len(), self.r));
                }
                if kind == CutKind::A {
                    self.a_pool = parts.to_vec();
                } else {
                    self.pool = parts.to_vec();
                }
            }
            CutKind::Split => {
                if self.phase != Phase::Core || actor != self.role(1) {
                    return self.halt("split out of turn");
                }
                if !Self::take_from(&mut self.a_pool, source) {
                    return self.halt("split piece is not from A");
                }
                if parts.len() != self.rules.yz {
                    self.fail(STRUCTURE, "split into the wrong number of Zs");
                }
                self.split_parts = parts.to_vec();
            }
            CutKind::Mini => {
                if self.phase != Phase::Shrink || actor != self.role(1) || self.s.is_none() {
                    return self.halt("mini cut out of turn");
                }
                if source != &self.leftover {
                    self.fail(CONSERVATION, "mini cut source is not the leftover");
                }
                if parts.len() != self.rules.round_pieces {
                    self.fail(STRUCTURE, "mini cut into the wrong number of pieces");
                }
                self.mini_start = self.value(actor, source);
                self.pool = parts.to_vec();
                self.reserves.clear();
                self.reserve_order.clear();
            }
            CutKind::Final => {
                if self.phase == Phase::Shrink && self.s == Some(self.minis_done) {
                    self.fail(IA_CERTIFICATE, "pass reaches its closing cut without an advantage");
                    self.inserts_this_pass = 1;
                    self.phase = Phase::Closing;
                }
                if self.phase != Phase::Closing || actor != self.role(2) {
                    return self.halt("closing cut out of turn");
                }
                if source != &self.leftover {
                    self.fail(CONSERVATION, "closing cut source is not the leftover");
                }
                if parts.len() != self.rules.final_pieces {
                    self.fail(STRUCTURE, "closing cut into the wrong number of pieces");
                }
                self.final_parts = parts.to_vec();
                self.final_grants = 0;
            }
        }
    }

    fn on_roles(&mut self, roles: &[AgentId]) {
        let Some((obj, div)) = self.pending.take() else {
            return self.halt("roles without an objection");
        };
        if self.phase != Phase::Opening || self.division.is_empty() {
            return self.halt("roles before a division");
        }
        let mut expected = vec![obj, div];
        expected.extend((1..=self.rules.n).map(AgentId).filter(|&id| id != obj && id != div));
        if roles != expected.as_slice() {
            self.fail(STRUCTURE, "role order is wrong");
        }
        self.roles = expected;
        self.start_pass();
        self.report.passes += 1;
        self.phase = Phase::Core;
    }

    fn on_reserve(&mut self, owner: AgentId, pieces: &[Piece]) {
        let n = self.rules.n;
        let Some(p) = self.role_of(owner) else {
            return self.halt("reserve for an unknown player");
        };
        let (count, next) = match self.phase {
            Phase::Core => (2 * (n - p), (3..n).rev().nth(self.reserve_order.len())),
            Phase::Shrink => (1usize << (n - 1 - p.min(n - 1)), (2..n).nth(self.reserve_order.len())),
            _ => return self.halt("reserve out of phase"),
        };
        if next != Some(p) || pieces.len() != count {
            self.fail(STRUCTURE, format!("{owner} sets aside out of turn or the wrong count"));
        }
        for piece in pieces {
            if !Self::take_from(&mut self.pool, piece) {
                return self.halt("reserve piece is not in the pool");
            }
        }
        self.reserve_order.push(owner);
        self.reserves.insert(owner, Piece::union_all(pieces));
    }

    fn on_select_z(&mut self, actor: AgentId, split: bool, pieces: &[Piece], reserve: &[Piece]) {
        if self.phase != Phase::Core || actor != self.role(1) || self.slots.len() != self.rules.yz {
            return self.halt("Zs selected out of turn");
        }
        let mut pool = self.a_pool.clone();
        if split {
            if pieces != self.split_parts.as_slice() {
                return self.halt("Zs differ from the split");
            }
        } else {
            for p in pieces {
                if !Self::take_from(&mut pool, p) {
                    return self.halt("Z is not from A");
                }
            }
        }
        for p in reserve {
            if !Self::take_from(&mut pool, p) {
                return self.halt("divider reserve is not from A");
            }
        }
        if !pool.is_empty() || pieces.len() != self.rules.yz {
            return self.halt("Z selection does not use A exactly");
        }
        let y_max = self
            .slots
            .iter()
            .map(|s| self.value(actor, &s.piece))
            .max()
            .unwrap_or_default();
        for z in pieces {
            let v = self.value(actor, z);
            if v <= y_max {
                let detail = format!("Z worth {} is not above Y at {}", format_fraction(&v), format_fraction(&y_max));
                self.fail(YZ_STRICTNESS, detail);
            }
        }
        if split {
            let mut whole: Vec<Fraction> = self.a_pool.iter().map(|p| self.value(actor, p)).collect();
            whole.push(self.value(actor, &Piece::union_all(&self.split_parts)));
            whole.sort();
            if whole.iter().rev().take(self.rules.yz).all(|v| v > &y_max) {
                self.fail(YZ_STRICTNESS, "split although whole A pieces would do");
            }
        }
        self.reserves.insert(self.role(2), Piece::union_all(reserve));
        self.slots.extend(pieces.iter().map(|p| SlotState {
            piece: p.clone(),
            label: SlotLabel::Z,
            augmented_by: Vec::new(),
            taken: false,
        }));
    }

    fn on_augment(&mut self, actor: AgentId, target: usize, added: &Piece) {
        if !matches!(self.phase, Phase::Core | Phase::Shrink) {
            return self.halt("augmentation out of phase");
        }
        let Some(reserve) = self.reserves.get(&actor).cloned() else {
            return self.fail(RESERVE_AUGMENTATION, format!("{actor} has no reserve"));
        };
        if target >= self.slots.len() || self.slots[target].taken {
            return self.halt("augmentation of a missing piece");
        }
        if !added.is_subset_of(&reserve) {
            self.fail(RESERVE_AUGMENTATION, format!("{actor} adds cake outside its reserve"));
        }
        if self.phase == Phase::Core {
            let owned = match self.slots[target].label {
                SlotLabel::Y => actor == self.role(1),
                SlotLabel::Z => actor == self.role(2),
                SlotLabel::Plain => false,
            };
            if self.role_of(actor).is_none_or(|p| p <= 2) && !owned {
                self.fail(RESERVE_AUGMENTATION, format!("{actor} augments a piece it may not touch"));
            }
        }
        self.reserves.insert(actor, reserve.difference(added));
        let mark = self.phase == Phase::Shrink || self.role_of(actor).is_some_and(|p| p > 2);
        let slot = &mut self.slots[target];
        slot.piece = slot.piece.union(added);
        if mark && !slot.augmented_by.contains(&actor) {
            slot.augmented_by.push(actor);
        }
    }

    fn on_tie(&mut self, actor: AgentId, ways: usize, label: Option<SlotLabel>) {
        let n = self.rules.n;
        let Some(p) = self.role_of(actor) else {
            return self.halt("tie by an unknown player");
        };
        let expected = match (self.phase, label) {
            (Phase::Core, Some(_)) => self.rules.yz,
            (Phase::Core, None) => n - p + 1,
            (Phase::Shrink, None) if p >= 2 && p < n => (1usize << (n - 1 - p)) + 1,
            _ => return self.halt("tie out of phase"),
        };
        if ways != expected {
            self.fail(TIE, format!("{actor} claims a {ways}-way tie, expected {expected}"));
        }
        let mut values: Vec<Fraction> = self
            .slots
            .iter()
            .filter(|s| !s.taken && label.is_none_or(|l| s.label == l))
            .map(|s| self.value(actor, &s.piece))
            .collect();
        values.sort();
        if values.len() < ways || values[ways - 1] != values[0] {
            self.fail(TIE, format!("{actor} has no {ways}-way tie for smallest"));
        }
    }

    fn on_choose(&mut self, player: AgentId, target: usize, piece: &Piece) {
        if !matches!(self.phase, Phase::Core | Phase::Shrink) {
            return self.halt("choice out of phase");
        }
        if self.expected_chooser() != Some(player) {
            self.fail(CHOICE_RULES, format!("{player} chooses out of order"));
        }
        if target >= self.slots.len() || self.slots[target].taken || &self.slots[target].piece != piece {
            return self.halt(format!("{player} takes a piece that is not on offer"));
        }
        let n = self.rules.n;
        let p = self.role_of(player).unwrap_or(0);
        let required = match (self.phase, p) {
            (Phase::Core, 1) => Some(SlotLabel::Y),
            (Phase::Core, 2) => Some(SlotLabel::Z),
            _ => None,
        };
        let available: Vec<usize> = (0..self.slots.len())
            .filter(|&i| !self.slots[i].taken && required.is_none_or(|l| self.slots[i].label == l))
            .collect();
        if !available.contains(&target) {
            self.fail(CHOICE_RULES, format!("{player} takes a piece of the wrong kind"));
        }
        let low = available.iter().map(|&i| self.value(player, &self.slots[i].piece)).min();
        if low.as_ref() != Some(&self.value(player, piece)) {
            self.fail(CHOICE_RULES, format!("{player} passes over a smaller piece"));
        }
        let augmenter = match self.phase {
            Phase::Core => p > 2 && p < n,
            _ => p >= 2 && p < n,
        };
        if augmenter {
            let own_min = available.iter().any(|&i| {
                self.slots[i].augmented_by.contains(&player) && Some(self.value(player, &self.slots[i].piece)) == low
            });
            if own_min && !self.slots[target].augmented_by.contains(&player) {
                self.fail(CHOICE_RULES, format!("{player} skips a piece it augmented"));
            }
        }
        self.slots[target].taken = true;
        self.choose_count += 1;
        self.chosen.insert(player, piece.clone());
        self.grant(player, piece);
    }

    fn on_grant(&mut self, player: AgentId, piece: &Piece) {
        if self.phase != Phase::Closing || !self.id_ok(player) {
            return self.halt("grant out of phase");
        }
        let Some((agree, disagree, leftover)) = self.poll.clone() else {
            return self.halt("grant before a poll");
        };
        if self.final_grants == 0 {
            if let Some((i, j)) = self.lex_missing(&agree, &disagree, &leftover) {
                self.fail(CLOSING, format!("({i}, {j}) lacks an advantage"));
            }
        }
        let per = self.final_parts.len() / agree.len().max(1);
        let idx = self.final_grants;
        if idx >= self.final_parts.len() || agree.get(idx / per.max(1)) != Some(&player) || &self.final_parts[idx] != piece {
            self.fail(CLOSING, format!("{player} receives the wrong closing piece"));
        }
        self.final_grants += 1;
        self.grant(player, piece);
    }
}

/// Replays `transcript` against `densities` and runs every check.
///
/// Returns an input error for transcripts that do not describe a run over
/// these densities at all.
pub fn audit_transcript(transcript: &Transcript, densities: &[StepDensity]) -> Result<AuditReport> {
    let (n, formula) = match transcript.events.first() {
        Some(Event::Start { n, s_formula }) => (*n, *s_formula),
        _ => return Err(Error::Input("transcript does not begin with a start event".into())),
    };
    if n != densities.len() || n < 4 {
        return Err(Error::Input(format!(
            "transcript is for {n} players but {} densities were given",
            densities.len()
        )));
    }
    let mut replay = Replay {
        densities,
        rules: Rules::new(n),
        formula,
        shares: vec![Piece::empty(); n],
        leftover: Piece::unit(),
        worth: vec![vec![Fraction::zero(); n]; n],
        left_worth: densities.iter().map(|d| d.eval(&Piece::unit())).collect(),
        ia: BTreeMap::new(),
        phase: Phase::Opening,
        roles: (1..=n).map(AgentId).collect(),
        pending: None,
        division: Vec::new(),
        pair: None,
        r: None,
        pool: Vec::new(),
        a_pool: Vec::new(),
        split_parts: Vec::new(),
        reserves: BTreeMap::new(),
        reserve_order: Vec::new(),
        slots: Vec::new(),
        chosen: BTreeMap::new(),
        choose_count: 0,
        epsilon: None,
        s: None,
        minis_done: 0,
        mini_start: Fraction::zero(),
        inserts_this_pass: 0,
        poll: None,
        final_parts: Vec::new(),
        final_grants: 0,
        report: AuditReport::default(),
        index: 0,
        halted: false,
    };
    for (i, event) in transcript.events.iter().enumerate().skip(1) {
        replay.index = i;
        if matches!(event, Event::Recurse { .. } | Event::Done { .. })
            && replay.report.passes > 0
            && replay.inserts_this_pass != 1
        {
            let count = replay.inserts_this_pass;
            replay.fail(IA_CERTIFICATE, format!("pass inserted {count} advantage pairs"));
        }
        replay.step(event);
        if replay.halted {
            break;
        }
        replay.check_ia();
    }
    if !replay.halted && replay.phase != Phase::Finished {
        replay.report.failures.push(Finding {
            check: STRUCTURE,
            event: None,
            detail: "transcript ends before the run is done".into(),
        });
    }
    if replay.phase == Phase::Finished {
        replay.report.allocation = Some(Allocation {
            shares: replay.shares.clone(),
            leftover: replay.leftover.clone(),
        });
    }
    Ok(replay.report)
}

/// Outcome of all four checks on one set of files.
#[derive(Clone, Debug)]
pub struct Verdict {
    pub partition: bool,
    pub envy: EnvyReport,
    pub audit: AuditReport,
    pub replay_matches: bool,
    pub crosscheck: bool,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.partition && self.envy.is_envy_free() && self.audit.passed() && self.replay_matches && self.crosscheck
    }

    pub fn to_text(&self) -> String {
        let mark = |ok: bool| if ok { "pass" } else { "FAIL" };
        let mut out = format!("{} partition\n", mark(self.partition));
        out.push_str(&format!("{} envy-free\n", mark(self.envy.is_envy_free())));
        for (i, j) in &self.envy.violations {
            out.push_str(&format!("  {i} prefers {j}'s share\n"));
        }
        out.push_str(&format!("{} replay-matches-allocation\n", mark(self.replay_matches)));
        out.push_str(&format!("{} numeric-crosscheck\n", mark(self.crosscheck)));
        out.push_str(&self.audit.to_text());
        out
    }
}

/// Runs partition, envy, audit and float cross-check on an allocation and
/// the transcript that claims to produce it.
pub fn verify_all(
    allocation: &Allocation,
    transcript: &Transcript,
    densities: &[StepDensity],
    tolerance: f64,
) -> Result<Verdict> {
    if allocation.shares.len() != densities.len() {
        return Err(Error::Input(format!(
            "allocation has {} shares but there are {} players",
            allocation.shares.len(),
            densities.len()
        )));
    }
    let audit = audit_transcript(transcript, densities)?;
    Ok(Verdict {
        partition: check_partition(allocation, &Piece::unit()),
        envy: check_envy_free(allocation, densities),
        replay_matches: audit.allocation.as_ref() == Some(allocation),
        crosscheck: numeric_crosscheck(allocation, densities, tolerance),
        audit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{run, Config};

    fn quarters() -> Allocation {
        Allocation {
            shares: (0..4).map(|i| Piece::interval(frac(i, 4), frac(i + 1, 4)).unwrap()).collect(),
            leftover: Piece::empty(),
        }
    }

    fn two_block(left: i64, right: i64) -> StepDensity {
        StepDensity::normalized(vec![frac(0, 1), frac(1, 2)], vec![frac(left, 1), frac(right, 1)]).unwrap()
    }

    #[test]
    fn quarters_for_uniform_players() {
        let report = check_envy_free(&quarters(), &vec![StepDensity::uniform(); 4]);
        assert!(report.is_envy_free());
        assert!(report.matrix.iter().flatten().all(|v| *v == frac(1, 4)));
    }

    #[test]
    fn owner_of_everything_envies_everyone() {
        let mut alloc = quarters();
        alloc.shares = vec![Piece::unit(), Piece::empty(), Piece::empty(), Piece::empty()];
        let report = check_envy_free(&alloc, &vec![StepDensity::uniform(); 4]);
        let expected: Vec<_> = (2..=4).map(|j| (AgentId(1), AgentId(j))).collect();
        assert_eq!(report.violations, expected);
    }

    #[test]
    fn swapping_shares_creates_envy() {
        let ds = vec![two_block(1, 3), two_block(3, 1), StepDensity::uniform(), StepDensity::uniform()];
        // P1 dislikes the right half, P2 the left; give each the half it dislikes.
        let alloc = Allocation {
            shares: vec![
                Piece::interval(frac(1, 2), frac(3, 4)).unwrap(),
                Piece::interval(frac(0, 1), frac(1, 4)).unwrap(),
                Piece::interval(frac(1, 4), frac(1, 2)).unwrap(),
                Piece::interval(frac(3, 4), frac(1, 1)).unwrap(),
            ],
            leftover: Piece::empty(),
        };
        assert!(!check_envy_free(&alloc, &ds).is_envy_free());
        let good = Allocation {
            shares: vec![
                alloc.shares[1].clone(),
                alloc.shares[0].clone(),
                alloc.shares[2].clone(),
                alloc.shares[3].clone(),
            ],
            leftover: Piece::empty(),
        };
        assert!(check_envy_free(&good, &ds).violations.len() < check_envy_free(&alloc, &ds).violations.len());
    }

    #[test]
    fn partition_detects_gaps_and_overlaps() {
        let cake = Piece::unit();
        assert!(check_partition(&quarters(), &cake));
        let mut gap = quarters();
        gap.shares[2] = Piece::empty();
        assert!(!check_partition(&gap, &cake));
        let mut dup = quarters();
        dup.shares[1] = dup.shares[1].union(&dup.shares[0]);
        assert!(!check_partition(&dup, &cake));
    }

    #[test]
    fn crosscheck_agrees_and_catches_corruption() {
        let alloc = Allocation {
            shares: (0..3)
                .map(|i| Piece::interval(frac(i, 3), frac(i + 1, 3)).unwrap())
                .chain(std::iter::once(Piece::empty()))
                .collect(),
            leftover: Piece::empty(),
        };
        let ds = vec![StepDensity::uniform(); 4];
        assert!((float_eval(&ds[0], &alloc.shares[0]) - 0.333_333_333_3).abs() < 1e-9);
        assert!(numeric_crosscheck(&alloc, &ds, 1e-9));
        let mut exact = envy_matrix(&alloc.shares, &ds);
        exact[0][1] += frac(1, 2);
        assert!(!crosscheck_matrix(&exact, &alloc, &ds, 1e-9));
    }

    fn skewed() -> Vec<StepDensity> {
        vec![
            StepDensity::normalized(vec![frac(0, 1), frac(1, 3), frac(2, 3)], vec![frac(5, 1), frac(1, 1), frac(2, 1)]).unwrap(),
            two_block(1, 2),
            StepDensity::normalized(vec![frac(0, 1), frac(1, 4), frac(3, 4)], vec![frac(2, 1), frac(1, 1), frac(3, 1)]).unwrap(),
            StepDensity::normalized(vec![frac(0, 1), frac(1, 5), frac(2, 5)], vec![frac(1, 1), frac(4, 1), frac(1, 1)]).unwrap(),
        ]
    }

    #[test]
    fn honest_run_passes_every_check() {
        let ds = skewed();
        let out = run(ds.clone(), Config::default()).unwrap();
        let verdict = verify_all(&out.allocation, &out.transcript, &ds, 1e-9).unwrap();
        assert!(verdict.passed(), "{}", verdict.to_text());
        assert_eq!(verdict.audit.passes, out.stats.passes - 1);
        assert_eq!(verdict.audit.cut_events, out.transcript.cut_events());
    }

    #[test]
    fn audit_is_idempotent() {
        let ds = skewed();
        let out = run(ds.clone(), Config::default()).unwrap();
        let a = audit_transcript(&out.transcript, &ds).unwrap();
        let b = audit_transcript(&out.transcript, &ds).unwrap();
        assert_eq!(a.failures, b.failures);
        assert_eq!(a.allocation, b.allocation);
    }

    #[test]
    fn settled_opening_passes() {
        let ds = vec![StepDensity::uniform(); 4];
        let out = run(ds.clone(), Config::default()).unwrap();
        let verdict = verify_all(&out.allocation, &out.transcript, &ds, 1e-9).unwrap();
        assert!(verdict.passed(), "{}", verdict.to_text());
    }

    #[test]
    fn wrong_density_count_is_input_error() {
        let out = run(vec![StepDensity::uniform(); 4], Config::default()).unwrap();
        assert!(matches!(
            audit_transcript(&out.transcript, &vec![StepDensity::uniform(); 5]),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn decremented_r_fails_name_r() {
        let ds = skewed();
        let mut t = run(ds.clone(), Config::default()).unwrap().transcript;
        for e in &mut t.events {
            if let Event::NameR { r, .. } = e {
                *r -= 1;
                break;
            }
        }
        let report = audit_transcript(&t, &ds).unwrap();
        assert!(report.failed_checks().contains(NAME_R), "{}", report.to_text());
    }

    #[test]
    fn deleted_insert_fails_ia() {
        let ds = skewed();
        let mut t = run(ds.clone(), Config::default()).unwrap().transcript;
        let i = t.events.iter().position(|e| matches!(e, Event::IaInsert { .. })).unwrap();
        t.events.remove(i);
        let report = audit_transcript(&t, &ds).unwrap();
        assert!(!report.passed());
    }
}
