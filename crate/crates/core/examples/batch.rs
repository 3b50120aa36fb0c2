//! Runs a batch of seeded random instances and prints one line per run.
//!
//! ```text
//! cargo run --release --example batch -- 4 20 6      # n, count, budget
//! cargo run --release --example batch -- 5 1 6 43   # starting at seed 43
//! ```

use std::time::Instant;

use chorediv::io::generate;
use chorediv::protocol::{run, Config};

fn main() {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("numeric argument"))
        .collect();
    let n = args.first().copied().unwrap_or(4);
    let count = args.get(1).copied().unwrap_or(10);
    let budget = args.get(2).copied().unwrap_or(6);
    let first = args.get(3).copied().unwrap_or(0) as u64;
    let mut failures = 0;
    for seed in first..first + count as u64 {
        let inst = generate(n, seed, budget).expect("valid parameters");
        let started = Instant::now();
        match run(inst.players, Config::default()) {
            Ok(out) => println!(
                "seed {seed:>4}: passes {:>2}  knife cuts {:>6}  r {:?}  s {:?}  {:.2?}",
                out.stats.passes,
                out.transcript.knife_cuts(),
                out.stats.r_values,
                out.stats.s_values,
                started.elapsed()
            ),
            Err(failure) => {
                failures += 1;
                println!("seed {seed:>4}: FAILED {}", failure.error);
            }
        }
    }
    println!("{failures} of {count} runs failed");
}
