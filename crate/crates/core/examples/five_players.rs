//! A five-player run, stepping through the engine one phase at a time.

use chorediv::io::generate;
use chorediv::protocol::{Closing, Config, Engine, Opening};

fn main() {
    let instance = generate(5, 7, 4).unwrap();
    let mut engine = Engine::new(instance.players, Config::default()).unwrap();
    let p = engine.params().clone();
    println!(
        "k {}  r >= {}  Y/Z {}  shrink cut {}  closing cut {}",
        p.k, p.r_min, p.yz_count, p.round_pieces, p.final_pieces
    );

    let (mut objector, mut divider, mut pieces) = match engine.initial_division().unwrap() {
        Opening::Done(_) => return println!("nobody objects"),
        Opening::Objection { objector, divider, pieces } => (objector, divider, pieces),
    };
    loop {
        let core = engine.core_round(objector, divider, pieces).unwrap();
        println!("{objector} objects to {divider}: r = {}, advantage {}", core.r, core.epsilon);
        let shrink = engine.shrink_phase(objector, divider, &core.epsilon).unwrap();
        println!("  {} mini rounds", shrink.s);
        match engine.final_phase(divider).unwrap() {
            Closing::Done(alloc) => {
                println!("done; leftover empty: {}", alloc.leftover.is_empty());
                break;
            }
            Closing::Recurse { objector: i, divider: j, pieces: next } => {
                println!("  next pass: {i} against {j}");
                (objector, divider, pieces) = (i, j, next);
            }
        }
    }
}
