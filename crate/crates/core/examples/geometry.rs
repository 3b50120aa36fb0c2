//! Piece algebra on the unit interval with exact endpoints.

use chorediv::{frac, Piece};

fn main() {
    let left = Piece::interval(frac(0, 1), frac(1, 2)).unwrap();
    let middle = Piece::interval(frac(1, 4), frac(3, 4)).unwrap();

    println!("left          = {left}");
    println!("middle        = {middle}");
    println!("union         = {}", left.union(&middle));
    println!("intersection  = {}", left.intersection(&middle));
    println!("left - middle = {}", left.difference(&middle));

    let (a, b) = Piece::unit().difference(&middle).split_at(&frac(1, 2));
    println!("outside split = {a} | {b}");

    // Adjacent intervals merge on construction.
    let merged = Piece::from_pairs(vec![(frac(0, 1), frac(1, 3)), (frac(1, 3), frac(2, 3))]).unwrap();
    println!("merged        = {merged}, length {}", merged.length());
    println!("as json       = {}", serde_json::to_string(&merged).unwrap());
}
