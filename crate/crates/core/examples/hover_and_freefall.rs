//! Open-loop physics: hold the hover command, then cut thrust and compare
//! the fall with the closed-form semi-implicit Euler trajectory.

use aerobridge::sim::{step, ControlInput, MismatchConfig, PhysicalParams, QuadState};
use nalgebra::Vector3;

fn main() -> aerobridge::Result<()> {
    let params = PhysicalParams::default();
    let nominal = MismatchConfig::nominal();
    let mut s = QuadState::at_rest(Vector3::new(0.0, 0.0, 10.0));
    for _ in 0..500 {
        s = step(&s, ControlInput::hover(&params), &params, &nominal)?;
    }
    println!(
        "after 10 s of hover: z = {:.12} m, |v| = {:.3e} m/s",
        s.p.z,
        s.v.norm()
    );

    let still_air = MismatchConfig {
        drag_scale: 0.0,
        ..nominal
    };
    let z0 = s.p.z;
    let cut = ControlInput::new([-1.0, 0.0, 0.0, 0.0]);
    let g = params.gravity;
    let dt = params.dt;
    for n in 1..=50u32 {
        s = step(&s, cut, &params, &still_air)?;
        if n % 10 == 0 {
            // v_n = -g n dt, z_n = z0 - g dt^2 n(n+1)/2
            let nf = f64::from(n);
            let expected = z0 - g * dt * dt * nf * (nf + 1.0) / 2.0;
            println!(
                "step {n:>2}: z = {:.9} expected {:.9} (err {:.1e})",
                s.p.z,
                expected,
                (s.p.z - expected).abs()
            );
        }
    }
    Ok(())
}
