//! Brusselator limit cycle past the Hopf point: period and Floquet multiplier.

use kccstab::flow::{find_limit_cycle, CycleOptions};
use kccstab::models::{model_with, ModelName};

fn main() -> kccstab::Result<()> {
    let a = 1.0;
    for b in [2.1, 2.5, 3.0] {
        let m = model_with(ModelName::Brusselator, &[("a", a), ("b", b)])?;
        let r = find_limit_cycle(&m.field, [1.5, b / a], None, &CycleOptions::default())?;
        println!(
            "b = {b}: {:?} period {:.6} multiplier {:.6e} (secant {:.6e}) through ({:.5}, {:.5})",
            r.class, r.period, r.multiplier, r.multiplier_secant, r.point[0], r.point[1]
        );
    }
    let m = model_with(ModelName::Brusselator, &[("a", a), ("b", 1.5)])?;
    match find_limit_cycle(&m.field, [1.5, 1.5], None, &CycleOptions::default()) {
        Ok(r) => println!("b = 1.5: unexpected cycle {r:?}"),
        Err(e) => println!("b = 1.5: no cycle ({e})"),
    }
    Ok(())
}
