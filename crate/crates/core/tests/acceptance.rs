//! Acceptance criteria, one test and one printed line each.
//!
//! The corpus (200 four-player and 50 five-player seeded instances, at most
//! six segments per density) is run once and shared.

use std::collections::BTreeSet;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use chorediv::agents::AgentId;
use chorediv::cli::{cmd_run, cmd_verify, RunArgs, VerifyArgs};
use chorediv::geometry::{frac, Fraction, Piece};
use chorediv::io::generate;
use chorediv::protocol::{run, Config, Event, Params, RunOutcome, Transcript};
use chorediv::valuation::StepDensity;
use chorediv::verify::{audit_transcript, check_envy_free, check_partition, numeric_crosscheck, AuditReport};

struct Case {
    n: usize,
    seed: u64,
    densities: Vec<StepDensity>,
    outcome: Result<RunOutcome, String>,
    audit: Option<AuditReport>,
    elapsed: Duration,
}

fn corpus() -> &'static Vec<Case> {
    static CORPUS: OnceLock<Vec<Case>> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let plan = (0..200).map(|s| (4, s)).chain((0..50).map(|s| (5, s)));
        plan.map(|(n, seed)| {
            let densities = generate(n, seed, 6).unwrap().players;
            let started = Instant::now();
            let outcome = run(densities.clone(), Config::default()).map_err(|f| f.to_string());
            let elapsed = started.elapsed();
            let audit = outcome
                .as_ref()
                .ok()
                .map(|o| audit_transcript(&o.transcript, &densities).unwrap());
            Case {
                n,
                seed,
                densities,
                outcome,
                audit,
                elapsed,
            }
        })
        .collect()
    })
}

fn report(id: u32, name: &str, failures: &[String]) {
    let verdict = if failures.is_empty() { "PASS" } else { "FAIL" };
    println!("criterion {id} {name}: {verdict}");
    for f in failures.iter().take(10) {
        println!("    {f}");
    }
    assert!(failures.is_empty(), "criterion {id} failed on {} cases", failures.len());
}

fn tag(case: &Case) -> String {
    format!("n={} seed={}", case.n, case.seed)
}

#[test]
fn criterion_1_exact_envy_freeness() {
    let mut failures = Vec::new();
    for case in corpus() {
        match &case.outcome {
            Err(e) => failures.push(format!("{}: run failed: {e}", tag(case))),
            Ok(out) => {
                let env = check_envy_free(&out.allocation, &case.densities);
                if !env.is_envy_free() {
                    failures.push(format!("{}: violations {:?}", tag(case), env.violations));
                }
            }
        }
        let limit = Duration::from_secs(if case.n == 4 { 5 } else { 60 });
        if case.elapsed > limit {
            failures.push(format!("{}: took {:.1?}", tag(case), case.elapsed));
        }
    }
    let slowest = |n| {
        corpus()
            .iter()
            .filter(|c| c.n == n)
            .map(|c| c.elapsed)
            .max()
            .unwrap_or_default()
    };
    println!("    slowest run: n=4 {:.2?}, n=5 {:.2?}", slowest(4), slowest(5));
    report(1, "exact envy-freeness", &failures);
}

#[test]
fn criterion_2_partition_exactness() {
    let mut failures = Vec::new();
    for case in corpus() {
        let Ok(out) = &case.outcome else {
            failures.push(format!("{}: no allocation", tag(case)));
            continue;
        };
        let alloc = &out.allocation;
        let all: Vec<&Piece> = alloc.shares.iter().collect();
        let union = Piece::union_all(all.iter().copied());
        let disjoint = all
            .iter()
            .enumerate()
            .all(|(i, p)| all[i + 1..].iter().all(|q| p.is_disjoint_from(q)));
        if !check_partition(alloc, &Piece::unit()) || union != Piece::unit() || !disjoint || !union.is_canonical() {
            failures.push(format!("{}: shares do not partition the cake", tag(case)));
        }
    }
    report(2, "partition exactness", &failures);
}

#[test]
fn criterion_3_termination_bound() {
    let mut failures = Vec::new();
    for case in corpus() {
        let Ok(out) = &case.outcome else {
            failures.push(format!("{}: no run", tag(case)));
            continue;
        };
        let bound = case.n * (case.n - 1) + 1;
        let passes = out.stats.passes;
        if passes > bound {
            failures.push(format!("{}: {passes} passes exceeds {bound}", tag(case)));
        }
        let pairs = &out.stats.ia_pairs;
        let distinct: BTreeSet<&(AgentId, AgentId)> = pairs.iter().collect();
        if pairs.len() != passes - 1 || distinct.len() != pairs.len() {
            failures.push(format!("{}: {} passes but IA pairs {:?}", tag(case), passes, pairs));
        }
        // Each pass between two role assignments logs exactly one insertion.
        let mut per_pass = Vec::new();
        for e in &out.transcript.events {
            match e {
                Event::Roles { .. } => per_pass.push(0),
                Event::IaInsert { .. } => *per_pass.last_mut().unwrap() += 1,
                _ => {}
            }
        }
        if per_pass.iter().any(|&c| c != 1) {
            failures.push(format!("{}: insertions per pass {:?}", tag(case), per_pass));
        }
    }
    let max = |n| {
        corpus()
            .iter()
            .filter(|c| c.n == n)
            .filter_map(|c| c.outcome.as_ref().ok())
            .map(|o| o.stats.passes)
            .max()
            .unwrap_or(0)
    };
    println!("    most passes: n=4 {} of 13, n=5 {} of 21", max(4), max(5));
    report(3, "termination bound", &failures);
}

#[test]
fn criterion_4_shrinkage() {
    let mut failures = Vec::new();
    let mut worst: [Option<Fraction>; 2] = [None, None];
    for case in corpus() {
        let Some(audit) = &case.audit else {
            failures.push(format!("{}: no run", tag(case)));
            continue;
        };
        let Ok(out) = &case.outcome else { continue };
        // Replay the leftover and the cutter's view of each mini round.
        let required = if case.n == 4 { frac(1, 2) } else { frac(5, 14) };
        let mut leftover = Piece::unit();
        let mut cutter = None;
        let mut start = Fraction::from_integer(0.into());
        let mut taken = Fraction::from_integer(0.into());
        for e in &out.transcript.events {
            match e {
                Event::Cut {
                    kind: chorediv::protocol::CutKind::Mini,
                    actor,
                    source,
                    ..
                } => {
                    let d = &case.densities[actor.0 - 1];
                    cutter = Some(*actor);
                    start = d.eval(source);
                    taken = Fraction::from_integer(0.into());
                }
                Event::Choose { piece, .. } | Event::Grant { piece, .. } => {
                    if let Some(c) = cutter {
                        taken += case.densities[c.0 - 1].eval(piece);
                    }
                    leftover = leftover.difference(piece);
                }
                Event::MiniRoundEnd { .. } => {
                    let ratio = if start == Fraction::from_integer(0.into()) {
                        Fraction::from_integer(1.into())
                    } else {
                        &taken / &start
                    };
                    let slot = &mut worst[case.n - 4];
                    if slot.as_ref().is_none_or(|w| &ratio < w) {
                        *slot = Some(ratio.clone());
                    }
                    if ratio < required {
                        failures.push(format!("{}: mini round allocated {} of its leftover", tag(case), ratio));
                    }
                    cutter = None;
                }
                Event::RoundEnd { .. } => cutter = None,
                _ => {}
            }
        }
        if audit.mini_round_shrink.iter().any(|(got, need)| got < need) {
            failures.push(format!("{}: below the engine's own guarantee", tag(case)));
        }
    }
    println!(
        "    smallest fraction allocated in a mini round: n=4 {}, n=5 {}",
        worst[0].as_ref().map_or("-".into(), |w| w.to_string()),
        worst[1].as_ref().map_or("-".into(), |w| w.to_string())
    );
    report(4, "shrinkage per mini round", &failures);
}

#[test]
fn criterion_5_dichotomy_and_sufficiency() {
    let mut failures = Vec::new();
    let (mut splits, mut augments) = (0usize, 0usize);
    for case in corpus() {
        match (&case.outcome, &case.audit) {
            (Ok(out), Some(audit)) => {
                for f in &audit.failures {
                    if ["yz-strictness", "reserve-augmentation", "tie"].contains(&f.check) {
                        failures.push(format!("{}: {f}", tag(case)));
                    }
                }
                for e in &out.transcript.events {
                    match e {
                        Event::SelectZ { split: true, .. } => splits += 1,
                        Event::Augment { .. } => augments += 1,
                        _ => {}
                    }
                }
            }
            (Err(e), _) => failures.push(format!("{}: {e}", tag(case))),
            _ => {}
        }
    }
    println!("    {splits} split dichotomies, {augments} augmentations checked");
    report(5, "dichotomy and reserve sufficiency", &failures);
}

#[test]
fn criterion_6_ia_soundness() {
    let mut failures = Vec::new();
    for case in corpus() {
        let (Ok(out), Some(audit)) = (&case.outcome, &case.audit) else {
            failures.push(format!("{}: no run", tag(case)));
            continue;
        };
        for f in &audit.failures {
            if f.check == "ia-certificate" {
                failures.push(format!("{}: {f}", tag(case)));
            }
        }
        // Independent replay of shares and leftover; every certificate must
        // hold from its insertion to the end.
        let n = case.n;
        // worth[i][j]: player i's value of share j; left[i]: of the leftover.
        let mut worth = vec![vec![frac(0, 1); n]; n];
        let mut left: Vec<Fraction> = case.densities.iter().map(|d| d.eval(&Piece::unit())).collect();
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for (idx, e) in out.transcript.events.iter().enumerate() {
            match e {
                Event::Choose { player, piece, .. } | Event::Grant { player, piece, .. } => {
                    for (i, d) in case.densities.iter().enumerate() {
                        let v = d.eval(piece);
                        worth[i][player.0 - 1] += &v;
                        left[i] -= v;
                    }
                }
                Event::IaInsert { holder, over, .. } => pairs.push((holder.0 - 1, over.0 - 1)),
                _ => continue,
            }
            for &(h, o) in &pairs {
                if &worth[h][h] + &left[h] >= worth[h][o] {
                    failures.push(format!("{}: ({}, {}) fails at event {idx}", tag(case), h + 1, o + 1));
                }
            }
        }
    }
    report(6, "irrevocable advantage soundness", &failures);
}

#[test]
fn criterion_7_parameter_formulas() {
    let mut failures = Vec::new();
    let p = Params::derive(4).unwrap();
    let got = (p.r_min, p.removal_count, p.mini_pieces, p.final_pieces, p.yz_count);
    if got != (11, 8, 8, 12, 3) {
        failures.push(format!("n=4 constants {got:?}"));
    }
    for n in 5..=8usize {
        let p = Params::derive(n).unwrap();
        let k: u64 = (1..=(n as u64 - 3)).sum();
        let lcm = (1..=n as u64).fold(1u64, |a, m| {
            let (mut x, mut y) = (a, m);
            while y != 0 {
                (x, y) = (y, x % y);
            }
            a / x * m
        });
        let ok = p.k == k
            && p.removal_count == k * k + 4 * k + 3
            && p.r_min == k * k + 5 * k + 5
            && p.yz_count as u64 == k + 2
            && p.mini_pieces == n * n - 3 * n + 4
            && p.shrink_fraction == frac(n as i64, (n * n - 3 * n + 4) as i64)
            && p.final_pieces as u64 == lcm;
        if !ok {
            failures.push(format!("n={n}: {p:?}"));
        }
    }
    report(7, "parameter formulas", &failures);
}

fn tamper_case() -> (tempfile::TempDir, std::path::PathBuf, Transcript) {
    let dir = tempfile::tempdir().unwrap();
    // Find a seed whose run exercises augmentation, the split-free path and an insertion.
    let seed = (0..50)
        .find(|&s| {
            let c = &corpus()[s];
            c.outcome.as_ref().is_ok_and(|o| {
                o.transcript
                    .events
                    .iter()
                    .any(|e| matches!(e, Event::Augment { added, .. } if !added.is_empty()))
                    && !o.stats.settled_at_opening
            })
        })
        .unwrap() as u64;
    let inst = dir.path().join("inst.txt");
    std::fs::write(&inst, generate(4, seed, 6).unwrap().to_text()).unwrap();
    let mut sink = Vec::new();
    let args = RunArgs {
        instance: inst.clone(),
        allocation: None,
        transcript: None,
        verify: false,
        max_rounds: None,
        s_formula: Default::default(),
    };
    assert_eq!(cmd_run(&args, &mut sink, &mut Vec::new()), 0);
    let log = dir.path().join("inst.log");
    let t = Transcript::from_text(&std::fs::read_to_string(&log).unwrap()).unwrap();
    (dir, inst, t)
}

fn verify_tampered(dir: &std::path::Path, inst: &std::path::Path, t: &Transcript) -> (i32, String) {
    let log = dir.join("tampered.log");
    std::fs::write(&log, t.to_text()).unwrap();
    let args = VerifyArgs {
        instance: inst.to_path_buf(),
        transcript: log,
        allocation: dir.join("inst.alloc.txt"),
    };
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cmd_verify(&args, &mut out, &mut err);
    (code, String::from_utf8_lossy(&err).into_owned())
}

#[test]
fn criterion_8_verifier_discrimination() {
    let (dir, inst, honest) = tamper_case();
    let mut failures = Vec::new();
    let (code, _) = verify_tampered(dir.path(), &inst, &honest);
    if code != 0 {
        failures.push(format!("honest transcript rejected with exit {code}"));
    }
    type Tamper = fn(&mut Transcript) -> bool;
    let modes: [(&str, &str, Tamper); 5] = [
        ("decrement r", "name-r", |t| {
            t.events.iter_mut().any(|e| match e {
                Event::NameR { r, .. } => {
                    *r -= 1;
                    true
                }
                _ => false,
            })
        }),
        ("reassign a chosen piece", "choice-rules", |t| {
            t.events.iter_mut().any(|e| match e {
                Event::Choose { player, .. } => {
                    player.0 = player.0 % 4 + 1;
                    true
                }
                _ => false,
            })
        }),
        ("shrink an augmentation", "tie", |t| {
            t.events.iter_mut().any(|e| match e {
                Event::Augment { added, .. } if !added.is_empty() => {
                    let iv = &added.intervals()[0];
                    let mid = (iv.lo() + iv.hi()) / Fraction::from_integer(2.into());
                    *added = added.split_at(&mid).0;
                    true
                }
                _ => false,
            })
        }),
        ("delete an IA certificate", "ia-certificate", |t| {
            match t.events.iter().position(|e| matches!(e, Event::IaInsert { .. })) {
                Some(i) => {
                    t.events.remove(i);
                    true
                }
                None => false,
            }
        }),
        ("unbalance an equal cut", "equal-cut", |t| {
            t.events.iter_mut().any(|e| match e {
                Event::Cut { parts, .. } if parts.len() >= 2 => {
                    let hi = parts[0].intervals().last().unwrap().hi().clone();
                    let lo = parts[1].intervals()[0].lo().clone();
                    if hi != lo {
                        return false;
                    }
                    let shift = frac(1, 1_000_000);
                    let moved = Piece::interval(&hi - &shift, hi.clone()).unwrap();
                    parts[0] = parts[0].difference(&moved);
                    parts[1] = parts[1].union(&moved);
                    true
                }
                _ => false,
            })
        }),
    ];
    for (name, check, tamper) in modes {
        let mut t = honest.clone();
        if !tamper(&mut t) {
            failures.push(format!("{name}: nothing to tamper with"));
            continue;
        }
        let (code, err) = verify_tampered(dir.path(), &inst, &t);
        let named = err.contains(check);
        println!("    {name}: exit {code}, {}", err.trim());
        if code == 0 || !named {
            failures.push(format!("{name}: exit {code}, expected {check} in {err:?}"));
        }
    }
    report(8, "verifier discrimination", &failures);
}

#[test]
fn criterion_9_oracle_agreement() {
    let mut failures = Vec::new();
    for case in corpus() {
        match &case.outcome {
            Ok(out) if numeric_crosscheck(&out.allocation, &case.densities, 1e-9) => {}
            Ok(_) => failures.push(format!("{}: float and exact matrices disagree", tag(case))),
            Err(e) => failures.push(format!("{}: {e}", tag(case))),
        }
    }
    report(9, "float cross-check at 1e-9", &failures);
}

#[test]
fn audit_accepts_every_corpus_run() {
    let mut failures = Vec::new();
    for case in corpus() {
        if let (Ok(out), Some(audit)) = (&case.outcome, &case.audit) {
            if !audit.passed() {
                failures.push(format!("{}: {}", tag(case), audit.failures[0]));
            }
            if audit.allocation.as_ref() != Some(&out.allocation) {
                failures.push(format!("{}: replay reaches a different allocation", tag(case)));
            }
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
}
