//! Second-order forward-mode differentiation.
//!
//! [`Taylor2`] carries a value, its gradient and its Hessian with respect to
//! `m` seed variables. [`Dual`] is a first-order dual number over any
//! [`Jet`]; nesting `Dual<Taylor2>` yields one extra mixed derivative, which
//! the planar elimination uses to differentiate `∂g/∂u` twice along the
//! implicit solution.

use std::fmt;

use crate::error::{Error, Result};

/// Largest seed dimension supported by [`Taylor2`].
pub const MAX_SEEDS: usize = 6;
const MAX_PACKED: usize = MAX_SEEDS * (MAX_SEEDS + 1) / 2;

#[inline]
fn packed(i: usize, j: usize) -> usize {
    let (r, c) = if i <= j { (i, j) } else { (j, i) };
    // row-major upper triangle of a MAX_SEEDS x MAX_SEEDS matrix
    r * MAX_SEEDS - r * (r + 1) / 2 + c
}

/// Arithmetic shared by every jet type, including plain `f64`.
///
/// Fallible operations return [`Error::Domain`] when the value lies outside
/// the domain of the function or one of its first two derivatives.
pub trait Jet: Clone + fmt::Debug {
    /// A constant with the same seed layout as `self`.
    fn constant_like(&self, c: f64) -> Self;
    fn value(&self) -> f64;

    fn add(&self, rhs: &Self) -> Result<Self>;
    fn sub(&self, rhs: &Self) -> Result<Self>;
    fn mul(&self, rhs: &Self) -> Result<Self>;
    fn div(&self, rhs: &Self) -> Result<Self>;
    fn neg(&self) -> Self;
    fn scale(&self, c: f64) -> Self;

    fn powi(&self, k: i32) -> Result<Self>;
    fn powf(&self, p: f64) -> Result<Self>;
    fn exp(&self) -> Result<Self>;
    fn ln(&self) -> Result<Self>;
    fn sqrt(&self) -> Result<Self>;
    fn sin(&self) -> Result<Self>;
    fn cos(&self) -> Result<Self>;
    fn abs(&self) -> Result<Self>;

    /// `self^rhs` for a non-constant exponent; requires a positive base.
    fn pow(&self, rhs: &Self) -> Result<Self> {
        if self.value() <= 0.0 {
            return Err(Error::Domain(format!(
                "x^y with variable exponent requires x > 0, got {}",
                self.value()
            )));
        }
        rhs.mul(&self.ln()?)?.exp()
    }
}

fn check_finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!("{what} produced a non-finite value")))
    }
}

/// Derivative triple `(f(a), f'(a), f''(a))` for `a^p` with a constant
/// exponent.
fn pow_triple(a: f64, p: f64) -> Result<(f64, f64, f64)> {
    let is_int = p.fract() == 0.0 && p.abs() < i32::MAX as f64;
    if a == 0.0 {
        if p < 0.0 {
            return Err(Error::Domain("0 raised to a negative power".into()));
        }
        if p == 0.0 {
            return Ok((1.0, 0.0, 0.0));
        }
        if !is_int && p < 2.0 {
            return Err(Error::Domain(format!(
                "second derivative of x^{p} is unbounded at x = 0"
            )));
        }
        let d1 = if p == 1.0 { 1.0 } else { 0.0 };
        let d2 = if p == 2.0 { 2.0 } else { 0.0 };
        return Ok((0.0, d1, d2));
    }
    if a < 0.0 && !is_int {
        return Err(Error::Domain(format!(
            "non-integer power {p} of negative base {a}"
        )));
    }
    if is_int {
        let k = p as i32;
        let v = a.powi(k);
        let d1 = if k == 0 { 0.0 } else { k as f64 * a.powi(k - 1) };
        let d2 = if k == 0 || k == 1 {
            0.0
        } else {
            (k as f64) * ((k - 1) as f64) * a.powi(k - 2)
        };
        Ok((v, d1, d2))
    } else {
        Ok((a.powf(p), p * a.powf(p - 1.0), p * (p - 1.0) * a.powf(p - 2.0)))
    }
}

impl Jet for f64 {
    fn constant_like(&self, c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn add(&self, rhs: &Self) -> Result<Self> {
        Ok(self + rhs)
    }
    fn sub(&self, rhs: &Self) -> Result<Self> {
        Ok(self - rhs)
    }
    fn mul(&self, rhs: &Self) -> Result<Self> {
        Ok(self * rhs)
    }
    fn div(&self, rhs: &Self) -> Result<Self> {
        if *rhs == 0.0 {
            return Err(Error::Domain("division by zero".into()));
        }
        Ok(self / rhs)
    }
    fn neg(&self) -> Self {
        -self
    }
    fn scale(&self, c: f64) -> Self {
        self * c
    }
    fn powi(&self, k: i32) -> Result<Self> {
        if *self == 0.0 && k < 0 {
            return Err(Error::Domain("0 raised to a negative power".into()));
        }
        Ok(f64::powi(*self, k))
    }
    fn powf(&self, p: f64) -> Result<Self> {
        Ok(pow_triple(*self, p)?.0)
    }
    fn exp(&self) -> Result<Self> {
        check_finite(f64::exp(*self), "exp")
    }
    fn ln(&self) -> Result<Self> {
        if *self <= 0.0 {
            return Err(Error::Domain(format!("ln of non-positive value {self}")));
        }
        Ok(f64::ln(*self))
    }
    fn sqrt(&self) -> Result<Self> {
        if *self < 0.0 {
            return Err(Error::Domain(format!("sqrt of negative value {self}")));
        }
        Ok(f64::sqrt(*self))
    }
    fn sin(&self) -> Result<Self> {
        Ok(f64::sin(*self))
    }
    fn cos(&self) -> Result<Self> {
        Ok(f64::cos(*self))
    }
    fn abs(&self) -> Result<Self> {
        Ok(f64::abs(*self))
    }
}

/// Second-order jet: value, gradient and symmetric Hessian over `m` seeds.
///
/// The Hessian is stored as a packed upper triangle, so symmetry holds by
/// construction.
#[derive(Clone, Copy, PartialEq)]
pub struct Taylor2 {
    m: usize,
    value: f64,
    grad: [f64; MAX_SEEDS],
    hess: [f64; MAX_PACKED],
}

impl fmt::Debug for Taylor2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Taylor2")
            .field("value", &self.value)
            .field("grad", &self.grad())
            .field("hess", &self.hessian())
            .finish()
    }
}

impl Taylor2 {
    /// A constant over `m` seeds.
    ///
    /// # Panics
    /// If `m > MAX_SEEDS`.
    pub fn constant(value: f64, m: usize) -> Self {
        assert!(m <= MAX_SEEDS, "seed dimension {m} exceeds {MAX_SEEDS}");
        Self {
            m,
            value,
            grad: [0.0; MAX_SEEDS],
            hess: [0.0; MAX_PACKED],
        }
    }

    /// The independent variable number `index` out of `m`, at `value`.
    ///
    /// # Panics
    /// If `index >= m` or `m > MAX_SEEDS`.
    pub fn seed_variable(index: usize, value: f64, m: usize) -> Self {
        assert!(index < m, "seed index {index} out of range for m = {m}");
        let mut t = Self::constant(value, m);
        t.grad[index] = 1.0;
        t
    }

    /// Builds a jet from explicit parts. `hess` is read as a full `m×m`
    /// row-major matrix; only its upper triangle is used.
    pub fn from_parts(value: f64, grad: &[f64], hess: &[f64]) -> Self {
        let m = grad.len();
        assert_eq!(hess.len(), m * m, "hessian must be m*m");
        let mut t = Self::constant(value, m);
        t.grad[..m].copy_from_slice(grad);
        for i in 0..m {
            for j in i..m {
                t.hess[packed(i, j)] = hess[i * m + j];
            }
        }
        t
    }

    pub fn seeds(&self) -> usize {
        self.m
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad[..self.m]
    }

    /// First partial derivative with respect to seed `i`.
    pub fn d(&self, i: usize) -> f64 {
        self.grad()[i]
    }

    /// Second partial derivative with respect to seeds `i` and `j`.
    pub fn dd(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.m && j < self.m);
        self.hess[packed(i, j)]
    }

    /// Dense row-major Hessian.
    pub fn hessian(&self) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                out[i * m + j] = self.dd(i, j);
            }
        }
        out
    }

    fn same_dim(&self, rhs: &Self) -> Result<()> {
        if self.m == rhs.m {
            Ok(())
        } else {
            Err(Error::SeedMismatch(self.m, rhs.m))
        }
    }

    /// Applies a scalar function given its value and first two derivatives
    /// at `self.value`.
    fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let m = self.m;
        let mut out = Self::constant(f0, m);
        for i in 0..m {
            out.grad[i] = f1 * self.grad[i];
        }
        for i in 0..m {
            for j in i..m {
                let k = packed(i, j);
                out.hess[k] = f1 * self.hess[k] + f2 * self.grad[i] * self.grad[j];
            }
        }
        out
    }

    fn recip(&self) -> Result<Self> {
        let a = self.value;
        if a == 0.0 {
            return Err(Error::Domain("division by zero".into()));
        }
        let r = 1.0 / a;
        Ok(self.chain(r, -r * r, 2.0 * r * r * r))
    }
}

impl Jet for Taylor2 {
    fn constant_like(&self, c: f64) -> Self {
        Taylor2::constant(c, self.m)
    }

    fn value(&self) -> f64 {
        self.value
    }

    fn add(&self, rhs: &Self) -> Result<Self> {
        self.same_dim(rhs)?;
        let mut out = *self;
        out.value += rhs.value;
        for i in 0..self.m {
            out.grad[i] += rhs.grad[i];
        }
        for k in 0..MAX_PACKED {
            out.hess[k] += rhs.hess[k];
        }
        Ok(out)
    }

    fn sub(&self, rhs: &Self) -> Result<Self> {
        self.add(&rhs.neg())
    }

    fn mul(&self, rhs: &Self) -> Result<Self> {
        self.same_dim(rhs)?;
        let m = self.m;
        let (a, b) = (self.value, rhs.value);
        let mut out = Self::constant(a * b, m);
        for i in 0..m {
            out.grad[i] = a * rhs.grad[i] + b * self.grad[i];
        }
        for i in 0..m {
            for j in i..m {
                let k = packed(i, j);
                out.hess[k] = a * rhs.hess[k]
                    + b * self.hess[k]
                    + self.grad[i] * rhs.grad[j]
                    + self.grad[j] * rhs.grad[i];
            }
        }
        Ok(out)
    }

    fn div(&self, rhs: &Self) -> Result<Self> {
        self.same_dim(rhs)?;
        self.mul(&rhs.recip()?)
    }

    fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    fn scale(&self, c: f64) -> Self {
        let mut out = *self;
        out.value *= c;
        for g in out.grad.iter_mut() {
            *g *= c;
        }
        for h in out.hess.iter_mut() {
            *h *= c;
        }
        out
    }

    fn powi(&self, k: i32) -> Result<Self> {
        let (v, d1, d2) = pow_triple(self.value, k as f64)?;
        Ok(self.chain(v, d1, d2))
    }

    fn powf(&self, p: f64) -> Result<Self> {
        let (v, d1, d2) = pow_triple(self.value, p)?;
        Ok(self.chain(v, d1, d2))
    }

    fn exp(&self) -> Result<Self> {
        let e = check_finite(self.value.exp(), "exp")?;
        Ok(self.chain(e, e, e))
    }

    fn ln(&self) -> Result<Self> {
        let a = self.value;
        if a <= 0.0 {
            return Err(Error::Domain(format!("ln of non-positive value {a}")));
        }
        Ok(self.chain(a.ln(), 1.0 / a, -1.0 / (a * a)))
    }

    fn sqrt(&self) -> Result<Self> {
        let a = self.value;
        if a <= 0.0 {
            return Err(Error::Domain(format!(
                "sqrt needs a positive value for differentiation, got {a}"
            )));
        }
        let s = a.sqrt();
        Ok(self.chain(s, 0.5 / s, -0.25 / (s * a)))
    }

    fn sin(&self) -> Result<Self> {
        let (s, c) = self.value.sin_cos();
        Ok(self.chain(s, c, -s))
    }

    fn cos(&self) -> Result<Self> {
        let (s, c) = self.value.sin_cos();
        Ok(self.chain(c, -s, -c))
    }

    fn abs(&self) -> Result<Self> {
        let a = self.value;
        if a == 0.0 {
            return Err(Error::Domain("abs is not differentiable at 0".into()));
        }
        let sg = a.signum();
        Ok(self.chain(a.abs(), sg, 0.0))
    }
}

/// First-order dual number `re + eps·ε` with `ε² = 0` over a jet type.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

impl<T: Jet> Dual<T> {
    pub fn new(re: T, eps: T) -> Self {
        Self { re, eps }
    }

    /// `re` with a unit ε-part: the direction being differentiated.
    pub fn variable(re: T) -> Self {
        let eps = re.constant_like(1.0);
        Self { re, eps }
    }

    /// `re` held fixed along ε.
    pub fn fixed(re: T) -> Self {
        let eps = re.constant_like(0.0);
        Self { re, eps }
    }

    fn unary(&self, re: T, deriv: T) -> Result<Self> {
        Ok(Self {
            re,
            eps: self.eps.mul(&deriv)?,
        })
    }
}

impl<T: Jet> Jet for Dual<T> {
    fn constant_like(&self, c: f64) -> Self {
        Self {
            re: self.re.constant_like(c),
            eps: self.re.constant_like(0.0),
        }
    }

    fn value(&self) -> f64 {
        self.re.value()
    }

    fn add(&self, rhs: &Self) -> Result<Self> {
        Ok(Self {
            re: self.re.add(&rhs.re)?,
            eps: self.eps.add(&rhs.eps)?,
        })
    }

    fn sub(&self, rhs: &Self) -> Result<Self> {
        Ok(Self {
            re: self.re.sub(&rhs.re)?,
            eps: self.eps.sub(&rhs.eps)?,
        })
    }

    fn mul(&self, rhs: &Self) -> Result<Self> {
        Ok(Self {
            re: self.re.mul(&rhs.re)?,
            eps: self.re.mul(&rhs.eps)?.add(&self.eps.mul(&rhs.re)?)?,
        })
    }

    fn div(&self, rhs: &Self) -> Result<Self> {
        let re = self.re.div(&rhs.re)?;
        // (a' b - a b') / b^2 = (a' - q b') / b
        let eps = self.eps.sub(&re.mul(&rhs.eps)?)?.div(&rhs.re)?;
        Ok(Self { re, eps })
    }

    fn neg(&self) -> Self {
        Self {
            re: self.re.neg(),
            eps: self.eps.neg(),
        }
    }

    fn scale(&self, c: f64) -> Self {
        Self {
            re: self.re.scale(c),
            eps: self.eps.scale(c),
        }
    }

    fn powi(&self, k: i32) -> Result<Self> {
        let re = self.re.powi(k)?;
        let deriv = if k == 0 {
            self.re.constant_like(0.0)
        } else {
            self.re.powi(k - 1)?.scale(k as f64)
        };
        self.unary(re, deriv)
    }

    fn powf(&self, p: f64) -> Result<Self> {
        let re = self.re.powf(p)?;
        let deriv = if p == 0.0 {
            self.re.constant_like(0.0)
        } else if p == 1.0 {
            self.re.constant_like(1.0)
        } else {
            self.re.powf(p - 1.0)?.scale(p)
        };
        self.unary(re, deriv)
    }

    fn exp(&self) -> Result<Self> {
        let e = self.re.exp()?;
        self.unary(e.clone(), e)
    }

    fn ln(&self) -> Result<Self> {
        let re = self.re.ln()?;
        let deriv = self.re.constant_like(1.0).div(&self.re)?;
        self.unary(re, deriv)
    }

    fn sqrt(&self) -> Result<Self> {
        let s = self.re.sqrt()?;
        let deriv = self.re.constant_like(0.5).div(&s)?;
        self.unary(s, deriv)
    }

    fn sin(&self) -> Result<Self> {
        let re = self.re.sin()?;
        let deriv = self.re.cos()?;
        self.unary(re, deriv)
    }

    fn cos(&self) -> Result<Self> {
        let re = self.re.cos()?;
        let deriv = self.re.sin()?.neg();
        self.unary(re, deriv)
    }

    fn abs(&self) -> Result<Self> {
        let v = self.re.value();
        if v == 0.0 {
            return Err(Error::Domain("abs is not differentiable at 0".into()));
        }
        let re = self.re.abs()?;
        let deriv = self.re.constant_like(v.signum());
        self.unary(re, deriv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn seeds() {
        let a = Taylor2::seed_variable(0, 2.0, 2);
        assert_eq!(a.value(), 2.0);
        assert_eq!(a.grad(), &[1.0, 0.0]);
        assert_eq!(a.hessian(), vec![0.0; 4]);
        let b = Taylor2::seed_variable(1, -1.0, 2);
        assert_eq!(b.grad(), &[0.0, 1.0]);
        let c = Taylor2::seed_variable(0, 0.0, 1);
        assert_eq!((c.value(), c.grad()), (0.0, &[1.0][..]));
    }

    #[test]
    fn product_of_two_seeds() {
        let a = Taylor2::seed_variable(0, 2.0, 2);
        let b = Taylor2::seed_variable(1, 3.0, 2);
        let p = a.mul(&b).unwrap();
        assert_eq!(p.value(), 6.0);
        assert_eq!(p.grad(), &[3.0, 2.0]);
        assert_eq!(p.hessian(), vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn quotient_by_constant() {
        let a = Taylor2::seed_variable(0, 1.0, 1);
        let two = Taylor2::constant(2.0, 1);
        let q = a.div(&two).unwrap();
        assert_eq!((q.value(), q.d(0), q.dd(0, 0)), (0.5, 0.5, 0.0));
    }

    #[test]
    fn square() {
        let x = Taylor2::seed_variable(0, 3.0, 1);
        let s = x.powi(2).unwrap();
        assert_eq!((s.value(), s.d(0), s.dd(0, 0)), (9.0, 6.0, 2.0));
        let s = x.powf(2.0).unwrap();
        assert_eq!((s.value(), s.d(0), s.dd(0, 0)), (9.0, 6.0, 2.0));
    }

    #[test]
    fn domain_errors() {
        let z = Taylor2::seed_variable(0, 0.0, 1);
        let neg = Taylor2::seed_variable(0, -1.0, 1);
        assert!(matches!(z.recip(), Err(Error::Domain(_))));
        assert!(matches!(neg.ln(), Err(Error::Domain(_))));
        assert!(matches!(neg.sqrt(), Err(Error::Domain(_))));
        assert!(matches!(z.powi(-1), Err(Error::Domain(_))));
        assert!(matches!(neg.powf(0.5), Err(Error::Domain(_))));
        assert!(matches!(z.powf(1.5), Err(Error::Domain(_))));
        // x^p at 0 with p >= 2 has finite first and second derivatives
        let p = z.powf(2.5).unwrap();
        assert_eq!((p.value(), p.d(0), p.dd(0, 0)), (0.0, 0.0, 0.0));
    }

    #[test]
    fn seed_mismatch_is_rejected() {
        let a = Taylor2::seed_variable(0, 1.0, 1);
        let b = Taylor2::seed_variable(0, 1.0, 2);
        assert_eq!(a.add(&b), Err(Error::SeedMismatch(1, 2)));
    }

    #[test]
    fn dual_over_taylor_gives_third_mixed_derivative() {
        // f(u, x) = u^3 x^2; d/du f = 3 u^2 x^2, whose x-hessian is 6 u^2.
        let x = Taylor2::seed_variable(0, 1.5, 1);
        let u = Taylor2::constant(2.0, 1);
        let ud = Dual::variable(u);
        let xd = Dual::fixed(x);
        let f = ud.powi(3).unwrap().mul(&xd.powi(2).unwrap()).unwrap();
        assert!(close(f.eps.value(), 3.0 * 4.0 * 2.25, 1e-15));
        assert!(close(f.eps.d(0), 3.0 * 4.0 * 2.0 * 1.5, 1e-15));
        assert!(close(f.eps.dd(0, 0), 6.0 * 4.0, 1e-15));
    }

    #[test]
    fn dual_transcendentals_match_derivatives() {
        let a = 0.7;
        let d = Dual::variable(a);
        let cases: Vec<(Dual<f64>, f64)> = vec![
            (d.exp().unwrap(), a.exp()),
            (d.ln().unwrap(), 1.0 / a),
            (d.sqrt().unwrap(), 0.5 / a.sqrt()),
            (d.sin().unwrap(), a.cos()),
            (d.cos().unwrap(), -a.sin()),
            (d.powf(2.5).unwrap(), 2.5 * a.powf(1.5)),
            (d.powi(3).unwrap(), 3.0 * a * a),
            (d.abs().unwrap(), 1.0),
        ];
        for (got, want) in cases {
            assert!(close(got.eps, want, 1e-15), "{got:?} vs {want}");
        }
    }
}
