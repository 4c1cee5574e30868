//! Lists the evaluation conditions and the vertical-acceleration headroom
//! each leaves at full thrust.

use aerobridge::sim::{mismatch_condition, PhysicalParams, CONDITION_NAMES, MASS_PLUS_50};

fn main() -> aerobridge::Result<()> {
    let params = PhysicalParams::default();
    println!(
        "{:<14} {:>5} {:>5} {:>5} {:>18} {:>10}",
        "condition", "mass", "drag", "delay", "wind N", "climb m/s2"
    );
    for name in CONDITION_NAMES.iter().chain([&MASS_PLUS_50]) {
        let m = mismatch_condition(name)?;
        let headroom = params.max_thrust / m.effective_mass(&params) - params.gravity;
        println!(
            "{:<14} {:>5.2} {:>5.2} {:>5} {:>18} {:>10.4}",
            name,
            m.mass_scale,
            m.drag_scale,
            m.delay_steps,
            format!("{:?}", m.wind),
            headroom
        );
    }
    Ok(())
}
