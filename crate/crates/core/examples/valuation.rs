//! Step densities and the queries players answer: eval, mark, equal cuts.

use chorediv::{frac, Piece, StepDensity};

fn main() {
    // Twice as unpleasant on the right half; normalized to total 1.
    let d = StepDensity::normalized(vec![frac(0, 1), frac(1, 2)], vec![frac(1, 1), frac(2, 1)]).unwrap();
    println!("values after normalizing: {:?}", d.values().iter().map(ToString::to_string).collect::<Vec<_>>());

    let cake = Piece::unit();
    println!("eval([0,1))     = {}", d.eval(&cake));
    println!("eval([0,1/2))   = {}", d.eval(&Piece::interval(frac(0, 1), frac(1, 2)).unwrap()));

    let half = d.mark(&cake, &frac(1, 2)).unwrap();
    println!("mark for 1/2    = {half}");

    for (i, p) in d.cut_equal(&cake, 3).iter().enumerate() {
        println!("third {i}: {p} worth {}", d.eval(p));
    }
}
