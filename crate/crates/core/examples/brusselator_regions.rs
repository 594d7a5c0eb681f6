//! Region map of the Brusselator over a coarse (a, b) grid.

use kccstab::models::brusselator_regions;

fn main() -> kccstab::Result<()> {
    println!("rows b = 4.0 .. 0.5, columns a = 0.5 .. 4.0");
    for i in (1..=8).rev() {
        let b = 0.5 * i as f64;
        let line: String = (1..=8)
            .map(|j| {
                let a = 0.5 * j as f64;
                match brusselator_regions(a, b) {
                    Ok(r) if r.boundary => " .".to_string(),
                    Ok(r) => format!(" {:?}", r.region),
                    Err(_) => " ?".to_string(),
                }
            })
            .collect();
        println!("b={b:3.1} |{line}");
    }
    let r = brusselator_regions(1.0, 1.5)?;
    println!(
        "a=1 b=1.5: region {:?}, {} / {}",
        r.region,
        r.region.linear_class().as_str(),
        r.region.jacobi_class().as_str()
    );
    Ok(())
}
