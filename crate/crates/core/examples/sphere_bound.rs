//! Mass-radius bound for a static fluid sphere and the Jacobi condition.

use kccstab::models::{sphere_jacobi_condition, sphere_mass_radius_bound};

fn main() -> kccstab::Result<()> {
    for g in [1.1, 1.25, 4.0 / 3.0, 1.5, 1.75, 2.0] {
        let bound = sphere_mass_radius_bound(g)?;
        let u1 = 2.0 * (g - 1.0) / (g * g + 4.0 * g - 4.0);
        println!("gamma = {g:.4}: fixed point u = v = {u1:.6}, Jacobi stable for M/R below {bound:.6}");
    }
    let g = 4.0 / 3.0;
    for mr in [0.05, 0.2, 0.4] {
        let ok = sphere_jacobi_condition(mr, 0.01, g)?;
        println!("gamma = 4/3, M/R = {mr}, rho r^2 = 0.01: {ok}");
    }
    Ok(())
}
