use std::collections::HashMap;

use kccstab::autodiff::{Jet, Taylor2};
use kccstab::expr::{parse, BinOp, CompiledExpr, ExprAst, Func};
use proptest::prelude::*;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + b.abs())
}

fn ast_strategy() -> impl Strategy<Value = ExprAst> {
    let leaf = prop_oneof![
        (0.0f64..1e6).prop_map(ExprAst::Num),
        prop::sample::select(vec!["u", "v", "w", "alpha"]).prop_map(|s| ExprAst::Ident(s.into())),
    ];
    leaf.prop_recursive(5, 48, 2, |inner| {
        let op = prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow]);
        let func = prop::sample::select(vec![Func::Exp, Func::Ln, Func::Sqrt, Func::Sin, Func::Cos, Func::Abs]);
        prop_oneof![
            inner.clone().prop_map(|e| ExprAst::Neg(Box::new(e))),
            (op, inner.clone(), inner.clone()).prop_map(|(o, l, r)| ExprAst::Binary(o, Box::new(l), Box::new(r))),
            (func, inner).prop_map(|(f, e)| ExprAst::Call(f, Box::new(e))),
        ]
    })
}

/// Polynomial in u, v, w of total degree ≤ 4.
fn polynomial_strategy() -> impl Strategy<Value = String> {
    let term = (-3.0f64..3.0, 0u32..=4, 0u32..=4, 0u32..=4).prop_filter_map("degree", |(c, a, b, d)| {
        (a + b + d <= 4).then(|| format!("({c:?})*u^{a}*v^{b}*w^{d}"))
    });
    prop::collection::vec(term, 1..8).prop_map(|t| t.join(" + "))
}

/// Smooth bounded compositions in u and v.
fn smooth_strategy() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("u".to_string()),
        Just("v".to_string()),
        (-2.0f64..2.0).prop_map(|c| format!("({c:?})")),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} * {b})")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("sqrt(1 + ({a})^2)")),
            inner.clone().prop_map(|a| format!("ln(2 + sin({a}))")),
            inner.clone().prop_map(|a| format!("exp(sin({a}))")),
            (inner.clone(), inner).prop_map(|(a, b)| format!("({a}) / (1 + ({b})^2)")),
        ]
    })
}

fn compile(src: &str, vars: &[&str]) -> CompiledExpr {
    CompiledExpr::new(&parse(src).unwrap(), vars, &HashMap::new()).unwrap()
}

fn jet_at(c: &CompiledExpr, x: &[f64]) -> Taylor2 {
    let m = x.len();
    let seeds: Vec<Taylor2> = x.iter().enumerate().map(|(i, v)| Taylor2::seed_variable(i, *v, m)).collect();
    c.eval(&seeds).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn display_reparses_to_the_same_tree(ast in ast_strategy()) {
        let text = ast.to_string();
        prop_assert_eq!(parse(&text).unwrap(), ast);
    }

    #[test]
    fn polynomial_jets_match_finite_differences(
        src in polynomial_strategy(),
        x in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let c = compile(&src, &["u", "v", "w"]);
        let f = |p: [f64; 3]| c.eval_f64(&p).unwrap();
        let j = jet_at(&c, &x);
        let h = 1e-5;
        for i in 0..3 {
            let mut a = x;
            let mut b = x;
            a[i] += h;
            b[i] -= h;
            let fd = (f(a) - f(b)) / (2.0 * h);
            prop_assert!(close(j.d(i), fd, 1e-6), "d{} {} vs {}", i, j.d(i), fd);
        }
        let h = 1e-4;
        for i in 0..3 {
            for k in 0..3 {
                let at = |si: f64, sk: f64| {
                    let mut p = x;
                    p[i] += si * h;
                    p[k] += sk * h;
                    f(p)
                };
                let fd = (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h * h);
                prop_assert!(close(j.dd(i, k), fd, 1e-6), "d{}{} {} vs {}", i, k, j.dd(i, k), fd);
            }
        }
    }

    #[test]
    fn literals_evaluate_exactly(v in 0.0f64..1e12) {
        let text = format!("{v:?}");
        let c = compile(&text, &[]);
        prop_assert_eq!(c.eval_f64(&[]).unwrap(), v);
    }

    #[test]
    fn smooth_jets_match_finite_differences(
        src in smooth_strategy(),
        x in prop::array::uniform2(-1.5f64..1.5),
    ) {
        let c = compile(&src, &["u", "v"]);
        let j = jet_at(&c, &x);
        let h = 1e-5;
        for i in 0..2 {
            let mut a = x;
            let mut b = x;
            a[i] += h;
            b[i] -= h;
            let fd = (c.eval_f64(&a).unwrap() - c.eval_f64(&b).unwrap()) / (2.0 * h);
            prop_assert!(close(j.d(i), fd, 1e-6), "grad {}: {} vs {}", i, j.d(i), fd);
            // Hessian rows against differences of the gradient
            let (ja, jb) = (jet_at(&c, &a), jet_at(&c, &b));
            for k in 0..2 {
                let fd = (ja.d(k) - jb.d(k)) / (2.0 * h);
                prop_assert!(close(j.dd(i, k), fd, 1e-6), "hess {}{}: {} vs {}", i, k, j.dd(i, k), fd);
            }
        }
    }

    #[test]
    fn composition_equals_chain_rule(
        inner in smooth_strategy(),
        outer in smooth_strategy(),
        x in prop::array::uniform2(-1.5f64..1.5),
    ) {
        // outer is read as a function of Z = inner(u, v)
        let outer_s = outer.replace(['u', 'v'], "Z");
        let whole = outer_s.replace('Z', &format!("({inner})"));
        let one = jet_at(&compile(&whole, &["u", "v"]), &x);
        let g = jet_at(&compile(&inner, &["u", "v"]), &x);
        let f = jet_at(&compile(&outer_s, &["Z"]), &[g.value()]);
        let (f1, f2) = (f.d(0), f.dd(0, 0));
        prop_assert!(close(one.value(), f.value(), 1e-12));
        for i in 0..2 {
            prop_assert!(close(one.d(i), f1 * g.d(i), 1e-12));
            for k in 0..2 {
                let want = f2 * g.d(i) * g.d(k) + f1 * g.dd(i, k);
                prop_assert!(close(one.dd(i, k), want, 1e-12), "{} vs {}", one.dd(i, k), want);
            }
        }
    }
}

#[test]
fn power_right_associative_and_above_negation() {
    let c = compile("-2^3^2", &[]);
    assert_eq!(c.eval_f64(&[]).unwrap(), -512.0);
}
