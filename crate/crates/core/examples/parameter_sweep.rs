//! A one-parameter sweep written as CSV, and a two-parameter raster summary.

use std::collections::BTreeMap;

use kccstab::models::ModelName;
use kccstab::sweep::{run_sweep, to_csv, ParamRange, SweepSpec};

fn main() -> kccstab::Result<()> {
    let spec = SweepSpec::new(ModelName::Brane, vec![ParamRange::new("gamma", -1.0, 1.2, 0.2)?]);
    let rows = run_sweep(&spec)?;
    print!("{}", to_csv(&spec, &rows));

    let raster = SweepSpec::new(
        ModelName::Brusselator,
        vec![ParamRange::new("a", 0.1, 5.0, 0.1)?, ParamRange::new("b", 0.1, 5.0, 0.1)?],
    );
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in run_sweep(&raster)? {
        let key = match (r.linear_class, r.jacobi_class) {
            (Some(l), Some(j)) => format!("{} / {}", l.as_str(), j.as_str()),
            _ => "unclassified".into(),
        };
        *counts.entry(key).or_default() += 1;
    }
    println!("\nBrusselator raster, {} cells", raster.len());
    for (k, n) in counts {
        println!("  {n:5}  {k}");
    }
    Ok(())
}
