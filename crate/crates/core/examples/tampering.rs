//! Edits to an honest transcript and the checks that catch them.

use chorediv::geometry::frac;
use chorediv::io::generate;
use chorediv::protocol::{run, Config, Event, Transcript};
use chorediv::verify::audit_transcript;

type Edit = Box<dyn Fn(&mut Transcript)>;

fn main() {
    let densities = generate(4, 0, 6).unwrap().players;
    let honest = run(densities.clone(), Config::default()).unwrap().transcript;

    let edits: Vec<(&str, Edit)> = vec![
        ("decrement r", Box::new(|t: &mut Transcript| {
            if let Some(Event::NameR { r, .. }) = t.events.iter_mut().find(|e| matches!(e, Event::NameR { .. })) {
                *r -= 1;
            }
        })),
        ("drop an advantage", Box::new(|t: &mut Transcript| {
            t.events.retain(|e| !matches!(e, Event::IaInsert { .. }));
        })),
        ("inflate a round advantage", Box::new(|t: &mut Transcript| {
            if let Some(Event::RoundEnd { epsilon, .. }) = t.events.iter_mut().find(|e| matches!(e, Event::RoundEnd { .. })) {
                *epsilon += frac(1, 3);
            }
        })),
    ];
    for (name, edit) in edits {
        let mut t = honest.clone();
        edit(&mut t);
        let report = audit_transcript(&t, &densities).unwrap();
        let checks: Vec<&str> = report.failed_checks().into_iter().collect();
        println!("{name:<28} -> {}", checks.join(", "));
    }
}
