//! Routes the held-out fixture commands through the paraphrase bundle.
//!
//! cargo run --example route_command

use aerobridge::grounding::{load_bundle, load_query_fixture, route};

fn main() -> aerobridge::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
    let bundle = load_bundle(format!("{dir}/paraphrase_bundle.json"))?;
    let fixture = load_query_fixture(format!("{dir}/heldout_queries.json"))?;
    let mut correct = 0;
    for q in &fixture.queries {
        let r = route(&q.vec, &bundle)?;
        correct += usize::from(r.task.index() == q.label);
        println!(
            "{:<55} -> {} ({:.3})  \"{}\"",
            q.text,
            r.task.index(),
            r.score,
            r.task.command()
        );
    }
    println!("{correct}/{} routed to their labels", fixture.queries.len());
    Ok(())
}
