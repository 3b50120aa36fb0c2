//! Round trip through the text formats and the independent audit.

use chorediv::io::{allocation_from_text, allocation_to_text, generate, Instance};
use chorediv::protocol::{run, Config, Transcript};
use chorediv::verify::verify_all;

fn main() {
    let instance = generate(4, 11, 5).unwrap();
    let out = run(instance.players.clone(), Config::default()).unwrap();

    // Serialize everything, then audit only what was read back.
    let inst_text = instance.to_text();
    let log_text = out.transcript.to_text();
    let alloc_text = allocation_to_text(&out.allocation, &instance.players);
    println!("transcript: {} lines, first event {}", log_text.lines().count(), log_text.lines().nth(1).unwrap());

    let instance = Instance::from_text(&inst_text).unwrap();
    let transcript = Transcript::from_text(&log_text).unwrap();
    let allocation = allocation_from_text(&alloc_text).unwrap();
    let verdict = verify_all(&allocation, &transcript, &instance.players, 1e-9).unwrap();
    print!("{}", verdict.to_text());
    println!("mini rounds audited: {}", verdict.audit.mini_rounds);
}
