//! Gradient and Hessian of a parsed expression with second-order jets.

use std::collections::HashMap;

use kccstab::autodiff::{Dual, Taylor2};
use kccstab::expr::{parse, CompiledExpr};

fn main() -> kccstab::Result<()> {
    let ast = parse("a*x^3*y - exp(x*y) + sin(y)/x")?;
    let params = HashMap::from([("a".to_string(), 2.0)]);
    let f = CompiledExpr::new(&ast, &["x", "y"], &params)?;
    let (x, y) = (1.2, 0.4);
    let jet = f.eval(&[Taylor2::seed_variable(0, x, 2), Taylor2::seed_variable(1, y, 2)])?;
    println!("f      = {:.12}", f.eval_f64(&[x, y])?);
    println!("grad   = [{:.12}, {:.12}]", jet.d(0), jet.d(1));
    println!("hess   = [[{:.10}, {:.10}], [{:.10}, {:.10}]]", jet.dd(0, 0), jet.dd(0, 1), jet.dd(1, 0), jet.dd(1, 1));
    let d = f.eval(&[Dual::variable(x), Dual::fixed(y)])?;
    println!("df/dx by dual numbers = {:.12}", d.eps);
    Ok(())
}
