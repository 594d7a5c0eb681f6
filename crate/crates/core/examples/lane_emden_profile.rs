//! Lane-Emden profile with the Milne variables and the curvature `P` along it.

use kccstab::models::{lane_emden_profile, polytrope_jacobi_condition};

fn main() -> kccstab::Result<()> {
    let n: f64 = std::env::args().nth(1).map_or(Ok(3.0), |s| s.parse()).unwrap_or(3.0);
    let prof = lane_emden_profile(n, 12.0)?;
    println!("n = {n}, surface at xi = {:?}", prof.surface);
    println!("{:>8} {:>10} {:>10} {:>10} {:>10}", "xi", "theta", "u", "v", "P11");
    let stride = (prof.xi.len() / 15).max(1);
    for i in (0..prof.xi.len()).step_by(stride) {
        println!(
            "{:8.4} {:10.6} {:10.6} {:10.6} {:+10.6}",
            prof.xi[i], prof.theta[i], prof.milne_u[i], prof.milne_v[i], prof.p11[i]
        );
    }
    for (rho, e) in [(0.5, 0.1), (2.0, 0.05), (0.1, 1.0)] {
        let ok = polytrope_jacobi_condition(n, rho, e)?;
        println!("rho ratio {rho}, energy ratio {e}: jacobi stable = {ok}");
    }
    Ok(())
}
