//! Fixed points of a built-in model with linear and Jacobi classes.
//!
//! cargo run --example analyze_model -- sphere gamma=1.5

use std::collections::BTreeMap;

use kccstab::kcc::JacobiClass;
use kccstab::linstab::analyze_point;
use kccstab::models::{model, ModelName};

fn main() -> kccstab::Result<()> {
    let mut args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() {
        args = vec!["brusselator".into(), "a=1".into(), "b=3".into()];
    }
    let mut args = args.into_iter();
    let name: ModelName = args.next().unwrap_or_default().parse()?;
    let params: BTreeMap<String, f64> = args
        .map(|a| kccstab::cli::parse_binding(&a))
        .collect::<kccstab::Result<_>>()?;
    let m = model(name, &params)?;
    println!("{} {:?}", name.as_str(), m.params);
    for fp in m.fixed_points(24).points {
        let lin = analyze_point(&m.field, fp.point)?;
        let p = m.p11(fp.point)?;
        let jac = if p < 0.0 { JacobiClass::JacobiStable } else { JacobiClass::JacobiUnstable };
        println!(
            "  ({:+.6}, {:+.6})  tr={:+.4} det={:+.4}  {:<15} P11={:+.5} {}",
            fp.point[0],
            fp.point[1],
            lin.trace,
            lin.det,
            lin.class.as_str(),
            p,
            jac.as_str()
        );
    }
    Ok(())
}
