//! Raw and covariant deviation vectors near a stable node that is Jacobi
//! unstable: the raw vector decays while the covariant one grows.

use kccstab::flow::{integrate_deviation, DeviationMode, IntegratorOptions};
use kccstab::models::{model_with, ModelName};

fn main() -> kccstab::Result<()> {
    let m = model_with(ModelName::Brusselator, &[("a", 4.0), ("b", 0.5)])?;
    let fp = [1.0, 0.125];
    let s = m.reduced_spray(fp);
    let (x, y) = m.spray_coordinates(fp)?;
    println!("P11 at the fixed point = {:+.6}", m.p11(fp)?);
    let opts = IntegratorOptions::with_tolerances(1e-10, 1e-12);
    let raw = integrate_deviation(&s, &[x], &[y], &[1.0], DeviationMode::RawVariational, (0.0, 5.0), &opts)?;
    let cov = integrate_deviation(&s, &[x], &[y], &[1.0], DeviationMode::Covariant, (0.0, 5.0), &opts)?;
    println!("{:>6} {:>14} {:>14}", "t", "|xi| raw", "|psi| cov");
    for k in 0..=10 {
        let t = 0.5 * k as f64;
        let at = |tr: &kccstab::flow::DeviationTrack| {
            let i = tr.t.iter().position(|&s| s >= t - 1e-12).unwrap_or(tr.t.len() - 1);
            tr.norms()[i]
        };
        println!("{t:6.2} {:14.6e} {:14.6e}", at(&raw), at(&cov));
    }
    Ok(())
}
