use std::path::Path;
use std::process::{Command, Output};

use chorediv::protocol::{Event, Transcript};

fn chorediv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chorediv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn gen(dir: &Path, name: &str, n: &str, seed: &str, budget: &str) -> String {
    let path = dir.join(name);
    let path_s = path.to_str().unwrap().to_string();
    let out = chorediv(&["gen", "-n", n, "--seed", seed, "--budget", budget, "-o", &path_s]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    path_s
}

#[test]
fn gen_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a.txt", "5", "9", "6");
    let b = gen(dir.path(), "b.txt", "5", "9", "6");
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    let stdout = chorediv(&["gen", "-n", "5", "--seed", "9", "--budget", "6"]);
    assert_eq!(stdout.stdout, std::fs::read(dir.path().join("a.txt")).unwrap());
}

#[test]
fn uniform_players_settle_at_step_three() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "u.txt", "4", "1", "1");
    let out = chorediv(&["run", &inst]);
    assert_eq!(out.status.code(), Some(0));
    let summary = text(&out.stdout);
    assert!(summary.contains("settled at Step 3"), "{summary}");
    assert!(summary.contains("cuts: 3 knife cuts in 1 cut events"), "{summary}");
    assert!(summary.contains("ia pairs: none"), "{summary}");
}

#[test]
fn run_then_verify_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "g.txt", "4", "0", "6");
    let out = chorediv(&["run", &inst, "--verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let summary = text(&out.stdout);
    assert!(summary.contains("pass envy-free"), "{summary}");
    assert!(summary.contains("r values: "), "{summary}");
    let log = dir.path().join("g.log");
    let alloc = dir.path().join("g.alloc.txt");
    let out = chorediv(&["verify", &inst, log.to_str().unwrap(), alloc.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stdout));
    assert!(text(&out.stdout).contains("verified"));

    // Reported cut events equal the transcript's.
    let t = Transcript::from_text(&std::fs::read_to_string(&log).unwrap()).unwrap();
    assert!(summary.contains(&format!("in {} cut events", t.cut_events())));

    // Each player's own valuation of every share is in the allocation file.
    let alloc_text = std::fs::read_to_string(&alloc).unwrap();
    assert_eq!(alloc_text.lines().filter(|l| l.starts_with("value ")).count(), 4);
}

#[test]
fn five_players_seed_seven_runs() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "f.txt", "5", "7", "4");
    let out = chorediv(&["run", &inst, "--verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
}

#[test]
fn literal_s_formula_verifies_or_fails_at_the_advantage() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "l.txt", "4", "8", "5");
    let out = chorediv(&["run", &inst, "--verify", "--s-formula", "literal"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("s values: 4 3 3 2 2 2"), "{}", text(&out.stdout));

    // The literal count can stop short of the advantage the closing needs.
    let inst = gen(dir.path(), "short.txt", "4", "3", "5");
    let out = chorediv(&["run", &inst, "--s-formula", "literal"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(text(&out.stderr).contains("step 15: no irrevocable advantage"));
    assert!(chorediv(&["run", &inst, "--verify"]).status.success());
}

#[test]
fn tampered_transcript_exits_one_and_names_the_check() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "t.txt", "4", "0", "6");
    assert!(chorediv(&["run", &inst]).status.success());
    let log = dir.path().join("t.log");
    let mut t = Transcript::from_text(&std::fs::read_to_string(&log).unwrap()).unwrap();
    for e in &mut t.events {
        if let Event::NameR { r, .. } = e {
            *r -= 1;
            break;
        }
    }
    std::fs::write(&log, t.to_text()).unwrap();
    let alloc = dir.path().join("t.alloc.txt");
    let out = chorediv(&["verify", &inst, log.to_str().unwrap(), alloc.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("name-r"), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("FAIL name-r"));
}

#[test]
fn missing_and_malformed_files_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.txt");
    let out = chorediv(&["run", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "n 4\nplayer 0:1\n").unwrap();
    let out = chorediv(&["run", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("lists 1 players"));
    let inst = gen(dir.path(), "v.txt", "4", "2", "3");
    let out = chorediv(&["verify", &inst, missing.to_str().unwrap(), missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mismatched_files_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let four = gen(dir.path(), "four.txt", "4", "5", "4");
    let five = gen(dir.path(), "five.txt", "5", "5", "2");
    assert!(chorediv(&["run", &four]).status.success());
    let log = dir.path().join("four.log");
    let alloc = dir.path().join("four.alloc.txt");
    let out = chorediv(&["verify", &five, log.to_str().unwrap(), alloc.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exceeding_the_round_cap_writes_a_prefix() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "c.txt", "4", "0", "6");
    let log = dir.path().join("prefix.log");
    let out = chorediv(&["run", &inst, "--max-rounds", "1", "--transcript", log.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(text(&out.stderr).contains("transcript prefix written to"));
    let t = Transcript::from_text(&std::fs::read_to_string(&log).unwrap()).unwrap();
    assert!(matches!(t.events.last(), Some(Event::Objection { .. })));
}
