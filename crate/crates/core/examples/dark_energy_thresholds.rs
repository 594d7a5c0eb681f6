//! Dark-energy critical points and the thresholds in lambda.

use kccstab::models::{dark_energy_references, ModelName};
use kccstab::sweep::{find_threshold, Quantity, ThresholdSpec};

fn main() -> kccstab::Result<()> {
    for lambda in [1.0, 2.0, 3.0] {
        let r = dark_energy_references(lambda);
        println!("lambda = {lambda}");
        for p in r.points.iter().filter(|p| p.exists) {
            println!(
                "  {:<3} ({:+.4}, {:+.4}) {:<16} {:<16} P11={:+.4}",
                p.label,
                p.point[0],
                p.point[1],
                p.linear_class.map_or("-", |c| c.as_str()),
                p.jacobi_class.map_or("-", |c| c.as_str()),
                p.p11.unwrap_or(f64::NAN)
            );
        }
        for t in &r.thresholds {
            println!("  threshold {} at {} = {:.6}", t.name, t.parameter, t.value);
        }
    }
    // node/focus switch of point C located numerically
    let spec = ThresholdSpec::new(ModelName::DarkEnergy, "lambda").at("C");
    let l = find_threshold(&spec, Quantity::Discriminant, (1.8, 1.9))?;
    println!("C turns into a focus at lambda^2 = {:.8} (24/7 = {:.8})", l * l, 24.0 / 7.0);
    Ok(())
}
