//! Brane-world equilibrium along the diagonal as gamma varies, plus the
//! closed-form solution at gamma = -2.

use kccstab::flow::{integrate, IntegratorOptions};
use kccstab::models::{brane_gamma_minus_2, brane_jacobi_boundary, brane_references, model_with, ModelName};

fn main() -> kccstab::Result<()> {
    println!("Jacobi boundary at gamma = {:.6}", brane_jacobi_boundary());
    println!("{:>6} {:>10} {:>22} {:>10} {:>16} {}", "gamma", "X", "r+", "P11", "linear", "jacobi");
    for g in [-3.0, -1.5, -1.0, 0.0, 0.5, 0.7, 1.0, 1.5, 2.0, 3.0] {
        let r = brane_references(g)?;
        println!(
            "{g:6.2} {:10.6} {:>22} {:+10.5} {:>16} {}",
            r.x_gamma,
            format!("{:+.4}{:+.4}i", r.r_plus.re, r.r_plus.im),
            r.p11,
            r.linear_class.as_str(),
            r.jacobi_class.as_str()
        );
    }

    let (u0, v0) = (0.5, 0.2);
    let exact = brane_gamma_minus_2(u0, v0);
    let mut m = model_with(ModelName::Brane, &[("gamma", -2.0)])?;
    let tr = integrate(&mut m.field, &[u0, v0], (0.0, 2.0), &IntegratorOptions::with_tolerances(1e-10, 1e-12))?;
    let want = exact.state_at(2.0);
    let got = tr.last();
    println!("gamma = -2 at t = 2: numeric ({:.10}, {:.10}) closed form ({:.10}, {:.10})", got[0], got[1], want[0], want[1]);
    Ok(())
}
