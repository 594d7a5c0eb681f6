//! All five KCC invariants of a two-dimensional semispray given directly.

use std::collections::BTreeMap;

use kccstab::kcc::kcc_invariants;
use kccstab::sode::Semispray;

fn main() -> kccstab::Result<()> {
    let params = BTreeMap::from([("k".to_string(), 0.7)]);
    // coupled damped oscillators with a cubic velocity term
    let s = Semispray::parse(&["0.5*(x1 + k*y1 + y1^3)", "0.5*(x2 - x1 + k*y2*y1)"], &params)?;
    let inv = kcc_invariants(&s, &[0.3, -0.2], &[0.1, 0.4], true)?;
    println!("N = {:?}", inv.connection);
    println!("epsilon = {:?}", inv.epsilon);
    println!("P = {:?}", inv.deviation);
    println!("|G^i_jl| max = {:.6}", inv.berwald.max_abs());
    if let Some(h) = &inv.higher {
        println!(
            "torsion max {:.6e}, fourth max {:.6e}, fifth max {:.6e} (step {:.1e})",
            h.third.max_abs(),
            h.fourth.max_abs(),
            h.fifth.max_abs(),
            h.step
        );
    }
    Ok(())
}
