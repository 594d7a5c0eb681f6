//! Arithmetic expression language for vector fields and semisprays.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := factor (('*' | '/') factor)*
//! factor  := '-' factor | power
//! power   := atom ('^' factor)?
//! atom    := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x^2`
//! is `-(x^2)`. Implicit multiplication (`2u`) is rejected.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::autodiff::{Jet, Taylor2};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Ln,
    Sqrt,
    Sin,
    Cos,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Abs => "abs",
        }
    }

    fn apply<T: Jet>(self, x: &T) -> Result<T> {
        match self {
            Func::Exp => x.exp(),
            Func::Ln => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Abs => x.abs(),
        }
    }
}

/// Parsed expression tree. Identifiers are resolved to state variables or
/// parameters only when the expression is bound for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum ExprAst {
    Num(f64),
    Ident(String),
    Neg(Box<ExprAst>),
    Binary(BinOp, Box<ExprAst>, Box<ExprAst>),
    Call(Func, Box<ExprAst>),
}

impl fmt::Display for ExprAst {
    /// Fully parenthesised form; reparses to an identical tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprAst::Num(v) => write!(f, "{v}"),
            ExprAst::Ident(name) => f.write_str(name),
            ExprAst::Neg(e) => write!(f, "(-{e})"),
            ExprAst::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            ExprAst::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

impl std::str::FromStr for ExprAst {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Returns the next token and its starting offset.
    fn next(&mut self) -> Result<(Tok, usize)> {
        self.skip_ws();
        let start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        if c.is_ascii_digit() || c == b'.' {
            return self.number(start);
        }
        if c.is_ascii_alphabetic() {
            while self
                .src
                .get(self.pos)
                .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_')
            {
                self.pos += 1;
            }
            let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            return Ok((Tok::Ident(s.to_string()), start));
        }
        if b"+-*/^()".contains(&c) {
            self.pos += 1;
            return Ok((Tok::Sym(c as char), start));
        }
        Err(Error::Syntax {
            offset: start,
            expected: "number, identifier, operator or parenthesis".into(),
        })
    }

    fn number(&mut self, start: usize) -> Result<(Tok, usize)> {
        let digits = |lx: &mut Self| {
            let s = lx.pos;
            while lx.src.get(lx.pos).is_some_and(u8::is_ascii_digit) {
                lx.pos += 1;
            }
            lx.pos - s
        };
        let mut n = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            return Err(Error::Syntax {
                offset: start,
                expected: "digit".into(),
            });
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                // not an exponent; leave `e` for the identifier rule
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let v: f64 = text.parse().map_err(|_| Error::Syntax {
            offset: start,
            expected: "number".into(),
        })?;
        Ok((Tok::Num(v), start))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    at: usize,
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<()> {
        let (t, at) = self.lexer.next()?;
        self.tok = t;
        self.at = at;
        Ok(())
    }

    fn fail<T>(&self, expected: &str) -> Result<T> {
        Err(Error::Syntax {
            offset: self.at,
            expected: expected.into(),
        })
    }

    fn expr(&mut self) -> Result<ExprAst> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.term()?;
            lhs = ExprAst::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<ExprAst> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.tok {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.factor()?;
            lhs = ExprAst::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<ExprAst> {
        if self.tok == Tok::Sym('-') {
            self.bump()?;
            return Ok(ExprAst::Neg(Box::new(self.factor()?)));
        }
        let base = self.atom()?;
        if self.tok == Tok::Sym('^') {
            self.bump()?;
            let exp = self.factor()?;
            return Ok(ExprAst::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<ExprAst> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.bump()?;
                Ok(ExprAst::Num(v))
            }
            Tok::Ident(name) => {
                self.bump()?;
                if self.tok != Tok::Sym('(') {
                    return Ok(ExprAst::Ident(name));
                }
                let func = Func::from_name(&name).ok_or(Error::UnknownFunction(name))?;
                self.bump()?;
                let arg = self.expr()?;
                self.close_paren()?;
                Ok(ExprAst::Call(func, Box::new(arg)))
            }
            Tok::Sym('(') => {
                self.bump()?;
                let inner = self.expr()?;
                self.close_paren()?;
                Ok(inner)
            }
            _ => self.fail("number, identifier or '('"),
        }
    }

    fn close_paren(&mut self) -> Result<()> {
        if self.tok != Tok::Sym(')') {
            return self.fail("')'");
        }
        self.bump()
    }
}

/// Parses `source` into an expression tree.
pub fn parse(source: &str) -> Result<ExprAst> {
    let mut p = Parser {
        lexer: Lexer {
            src: source.as_bytes(),
            pos: 0,
        },
        tok: Tok::End,
        at: 0,
    };
    p.bump()?;
    let ast = p.expr()?;
    if p.tok != Tok::End {
        return p.fail("operator or end of input");
    }
    Ok(ast)
}

/// Every identifier appearing in the tree (function names excluded).
pub fn free_identifiers(ast: &ExprAst) -> BTreeSet<String> {
    fn walk(e: &ExprAst, out: &mut BTreeSet<String>) {
        match e {
            ExprAst::Num(_) => {}
            ExprAst::Ident(n) => {
                out.insert(n.clone());
            }
            ExprAst::Neg(a) | ExprAst::Call(_, a) => walk(a, out),
            ExprAst::Binary(_, a, b) => {
                walk(a, out);
                walk(b, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    walk(ast, &mut out);
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    /// Power with an exponent that does not depend on any state variable.
    PowConst(Box<Node>, f64),
    Call(Func, Box<Node>),
}

/// An expression with identifiers resolved against an ordered list of state
/// variables and a parameter table. Subtrees free of state variables are
/// folded to constants.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledExpr {
    root: Node,
    nvars: usize,
}

impl CompiledExpr {
    pub fn new(ast: &ExprAst, vars: &[&str], params: &HashMap<String, f64>) -> Result<Self> {
        let root = lower(ast, vars, params)?;
        Ok(Self {
            root,
            nvars: vars.len(),
        })
    }

    pub fn arity(&self) -> usize {
        self.nvars
    }

    /// Evaluates with `vars[i]` bound to the i-th state variable. `like`
    /// supplies the seed layout for constants.
    pub fn eval_with<T: Jet>(&self, vars: &[T], like: &T) -> Result<T> {
        assert_eq!(vars.len(), self.nvars, "wrong number of state variables");
        eval_node(&self.root, vars, like)
    }

    pub fn eval<T: Jet>(&self, vars: &[T]) -> Result<T> {
        match vars.first() {
            Some(first) => self.eval_with(vars, first),
            None => panic!("eval needs at least one variable; use eval_with"),
        }
    }

    /// Plain floating-point evaluation.
    pub fn eval_f64(&self, vars: &[f64]) -> Result<f64> {
        self.eval_with(vars, &0.0)
    }

    /// Value if the expression does not depend on any state variable.
    pub fn as_constant(&self) -> Option<f64> {
        match self.root {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }
}

fn lower(ast: &ExprAst, vars: &[&str], params: &HashMap<String, f64>) -> Result<Node> {
    let node = match ast {
        ExprAst::Num(v) => Node::Const(*v),
        ExprAst::Ident(name) => {
            if let Some(i) = vars.iter().position(|v| v == name) {
                Node::Var(i)
            } else if let Some(v) = params.get(name) {
                Node::Const(*v)
            } else {
                return Err(Error::UnboundIdentifier(name.clone()));
            }
        }
        ExprAst::Neg(a) => match lower(a, vars, params)? {
            Node::Const(c) => Node::Const(-c),
            n => Node::Neg(Box::new(n)),
        },
        ExprAst::Call(f, a) => match lower(a, vars, params)? {
            Node::Const(c) => Node::Const(f.apply(&c)?),
            n => Node::Call(*f, Box::new(n)),
        },
        ExprAst::Binary(op, a, b) => {
            let l = lower(a, vars, params)?;
            let r = lower(b, vars, params)?;
            match (l, r) {
                (Node::Const(x), Node::Const(y)) => Node::Const(binary(*op, &x, &y)?),
                (l, Node::Const(p)) if *op == BinOp::Pow => Node::PowConst(Box::new(l), p),
                (l, r) => Node::Binary(*op, Box::new(l), Box::new(r)),
            }
        }
    };
    Ok(node)
}

fn binary<T: Jet>(op: BinOp, l: &T, r: &T) -> Result<T> {
    match op {
        BinOp::Add => l.add(r),
        BinOp::Sub => l.sub(r),
        BinOp::Mul => l.mul(r),
        BinOp::Div => l.div(r),
        // variable exponents are dispatched in eval_node
        BinOp::Pow => l.powf(r.value()),
    }
}

fn eval_node<T: Jet>(node: &Node, vars: &[T], like: &T) -> Result<T> {
    match node {
        Node::Const(c) => Ok(like.constant_like(*c)),
        Node::Var(i) => Ok(vars[*i].clone()),
        Node::Neg(a) => Ok(eval_node(a, vars, like)?.neg()),
        Node::Call(f, a) => f.apply(&eval_node(a, vars, like)?),
        Node::PowConst(a, p) => eval_node(a, vars, like)?.powf(*p),
        Node::Binary(BinOp::Pow, a, b) => {
            let base = eval_node(a, vars, like)?;
            let exp = eval_node(b, vars, like)?;
            base.pow(&exp)
        }
        Node::Binary(op, a, b) => {
            let l = eval_node(a, vars, like)?;
            let r = eval_node(b, vars, like)?;
            binary(*op, &l, &r)
        }
    }
}

/// Evaluates `ast` with second-order jets bound to its state variables and
/// real values bound to its parameters. All jets must share one seed
/// dimension.
pub fn eval_jet(
    ast: &ExprAst,
    bindings: &HashMap<String, Taylor2>,
    params: &HashMap<String, f64>,
) -> Result<Taylor2> {
    let mut names: Vec<&String> = bindings.keys().collect();
    names.sort();
    let m = match names.first() {
        Some(n) => bindings[*n].seeds(),
        None => 0,
    };
    let jets: Vec<Taylor2> = names.iter().map(|n| bindings[*n]).collect();
    if let Some(bad) = jets.iter().find(|j| j.seeds() != m) {
        return Err(Error::SeedMismatch(m, bad.seeds()));
    }
    let vars: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let compiled = CompiledExpr::new(ast, &vars, params)?;
    compiled.eval_with(&jets, &Taylor2::constant(0.0, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(kv: &[(&str, f64)]) -> HashMap<String, f64> {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn parses_mass_action_law() {
        let ast = parse("1-(b+1)*u+a*u^2*v").unwrap();
        let ids: Vec<_> = free_identifiers(&ast).into_iter().collect();
        assert_eq!(ids, ["a", "b", "u", "v"]);
    }

    #[test]
    fn constant_and_identifiers() {
        assert_eq!(parse("0").unwrap(), ExprAst::Num(0.0));
        assert!(free_identifiers(&parse("3").unwrap()).is_empty());
        let ids: Vec<_> = free_identifiers(&parse("exp(-lambda*x)").unwrap())
            .into_iter()
            .collect();
        assert_eq!(ids, ["lambda", "x"]);
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        assert_eq!(
            parse("u*("),
            Err(Error::Syntax {
                offset: 3,
                expected: "number, identifier or '('".into()
            })
        );
        assert!(matches!(parse("2u"), Err(Error::Syntax { offset: 1, .. })));
        assert!(matches!(parse("(u"), Err(Error::Syntax { offset: 2, .. })));
        assert!(matches!(parse("u $ v"), Err(Error::Syntax { offset: 2, .. })));
        assert_eq!(parse("tan(u)"), Err(Error::UnknownFunction("tan".into())));
    }

    #[test]
    fn precedence_and_associativity() {
        let e = |s: &str| parse(s).unwrap().to_string();
        assert_eq!(e("-x^2"), "(-(x ^ 2))");
        assert_eq!(e("2^3^2"), "(2 ^ (3 ^ 2))");
        assert_eq!(e("a-b-c"), "((a - b) - c)");
        assert_eq!(e("a/b*c"), "((a / b) * c)");
        assert_eq!(e("x^-1"), "(x ^ (-1))");
        assert_eq!(e("1e-3*x + 2.5E2"), "((0.001 * x) + 250)");
        let v = CompiledExpr::new(&parse("2^3^2").unwrap(), &[], &params(&[]))
            .unwrap()
            .as_constant();
        assert_eq!(v, Some(512.0));
    }

    #[test]
    fn bilinear_jet() {
        let ast = parse("u*v").unwrap();
        let b: HashMap<String, Taylor2> = [
            ("u".to_string(), Taylor2::seed_variable(0, 2.0, 2)),
            ("v".to_string(), Taylor2::seed_variable(1, 3.0, 2)),
        ]
        .into();
        let j = eval_jet(&ast, &b, &params(&[])).unwrap();
        assert_eq!(j.value(), 6.0);
        assert_eq!(j.grad(), &[3.0, 2.0]);
        assert_eq!(j.hessian(), vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn square_jet() {
        let b: HashMap<String, Taylor2> =
            [("u".to_string(), Taylor2::seed_variable(0, 1.0, 1))].into();
        let j = eval_jet(&parse("u^2").unwrap(), &b, &params(&[])).unwrap();
        assert_eq!((j.value(), j.d(0), j.dd(0, 0)), (1.0, 2.0, 2.0));
    }

    #[test]
    fn mass_action_term_matches_finite_differences() {
        // value 0.5, d/du = 2 a u v = 1.0, d/dv = a u^2 = 4.0
        let ast = parse("a*u^2*v").unwrap();
        let p = params(&[("a", 4.0)]);
        let b: HashMap<String, Taylor2> = [
            ("u".to_string(), Taylor2::seed_variable(0, 1.0, 2)),
            ("v".to_string(), Taylor2::seed_variable(1, 0.125, 2)),
        ]
        .into();
        let j = eval_jet(&ast, &b, &p).unwrap();
        assert_eq!(j.value(), 0.5);
        assert_eq!(j.grad(), &[1.0, 4.0]);
        let c = CompiledExpr::new(&ast, &["u", "v"], &p).unwrap();
        let h = 1e-5;
        let f = |u: f64, v: f64| c.eval_f64(&[u, v]).unwrap();
        let du = (f(1.0 + h, 0.125) - f(1.0 - h, 0.125)) / (2.0 * h);
        let dv = (f(1.0, 0.125 + h) - f(1.0, 0.125 - h)) / (2.0 * h);
        assert!((du - 1.0).abs() < 1e-8 && (dv - 4.0).abs() < 1e-8);
    }

    #[test]
    fn unbound_and_domain_errors() {
        let b: HashMap<String, Taylor2> =
            [("u".to_string(), Taylor2::seed_variable(0, -1.0, 1))].into();
        assert_eq!(
            eval_jet(&parse("u*k").unwrap(), &b, &params(&[])),
            Err(Error::UnboundIdentifier("k".into()))
        );
        for src in ["ln(u)", "sqrt(u)", "1/(u+1)", "(u+1)^-2", "u^0.5"] {
            assert!(
                matches!(eval_jet(&parse(src).unwrap(), &b, &params(&[])), Err(Error::Domain(_))),
                "{src}"
            );
        }
    }

    #[test]
    fn variable_exponent() {
        let b: HashMap<String, Taylor2> =
            [("x".to_string(), Taylor2::seed_variable(0, 2.0, 1))].into();
        let j = eval_jet(&parse("x^x").unwrap(), &b, &params(&[])).unwrap();
        // d/dx x^x = x^x (ln x + 1)
        let want = 4.0 * (2f64.ln() + 1.0);
        assert!((j.value() - 4.0).abs() < 1e-14 && (j.d(0) - want).abs() < 1e-13);
    }
}
