//! A user-defined planar system: fixed points, eigenvalues and the check
//! `4P = tr² − 4det` under both eliminations.

use std::collections::BTreeMap;

use kccstab::kcc::theorem_check;
use kccstab::linstab::{analyze_point, find_fixed_points, SearchBox};
use kccstab::sode::{Eliminate, VectorField2};

fn main() -> kccstab::Result<()> {
    // damped pendulum-like oscillator with a quadratic term
    let params = BTreeMap::from([("c".to_string(), 0.3)]);
    let vf = VectorField2::parse("v", "-u - c*v + u^2", params)?;
    let found = find_fixed_points(&vf, &SearchBox::new((-2.0, 2.0), (-2.0, 2.0)), 24);
    for fp in &found.points {
        let lin = analyze_point(&vf, fp.point)?;
        let ev = lin.eigenvalues;
        println!(
            "({:+.4}, {:+.4}) {:<15} eigen {:+.4}{:+.4}i, {:+.4}{:+.4}i",
            fp.point[0], fp.point[1], lin.class.as_str(), ev[0].re, ev[0].im, ev[1].re, ev[1].im
        );
        for e in [Eliminate::U, Eliminate::V] {
            match theorem_check(&vf, fp.point, e) {
                Ok(t) => println!("    eliminate {e:?}: 4P = {:+.10}  tr²-4det = {:+.10}", t.lhs, t.rhs),
                Err(err) => println!("    eliminate {e:?}: {err}"),
            }
        }
    }
    Ok(())
}
