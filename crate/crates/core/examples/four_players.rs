//! A full four-player run on a seeded instance.

use chorediv::io::generate;
use chorediv::protocol::{run, Config};
use chorediv::verify::check_envy_free;

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let instance = generate(4, seed, 6).unwrap();
    print!("{}", instance.to_text());

    let out = run(instance.players.clone(), Config::default()).expect("run completes");
    println!("passes {}  r {:?}  s {:?}", out.stats.passes, out.stats.r_values, out.stats.s_values);
    let pairs: Vec<String> = out.stats.ia_pairs.iter().map(|(a, b)| format!("{a} over {b}")).collect();
    println!("advantages gained: {}", pairs.join(", "));
    println!("knife cuts {} over {} cut events", out.transcript.knife_cuts(), out.transcript.cut_events());

    let envy = check_envy_free(&out.allocation, &instance.players);
    for (i, row) in envy.matrix.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{:>8.5}", num_traits::ToPrimitive::to_f64(v).unwrap())).collect();
        println!("P{} sees {}", i + 1, cells.join(" "));
    }
    println!("envy-free: {}", envy.is_envy_free());
}
