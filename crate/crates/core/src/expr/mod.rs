//! Scalar expressions in the chart coordinates `x0 .. x(n-1)`.
//!
//! An [`Expr`] is an immutable, reference-counted AST. Subtrees are shared, so
//! differentiation with a [`Differentiator`] produces a DAG rather than an
//! exponentially growing tree. Construction only folds constants locally
//! (zero terms, unit factors, zero factors, `^0`, `^1`); there is no
//! simplifier. Equality of expressions is checked by evaluation.

mod diff;
mod eval;
mod parse;

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::scalar::{Coefficient, Scalar, SingularMatrix};

pub use diff::Differentiator;
pub use eval::{EvalError, Tape};
pub use parse::{parse, ParseError};

#[derive(Debug)]
pub enum Node {
    Const(BigRational),
    Var(usize),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Pow(Expr, i64),
    Neg(Expr),
    Sin(Expr),
    Cos(Expr),
    Exp(Expr),
}

#[derive(Clone)]
pub struct Expr(Arc<Node>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl Expr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    pub(crate) fn addr(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn ptr_eq(&self, other: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn constant(value: BigRational) -> Expr {
        Expr(Arc::new(Node::Const(value)))
    }

    pub fn int(v: i64) -> Expr {
        Expr::constant(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn ratio(num: i64, den: i64) -> Expr {
        Expr::constant(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn var(index: usize) -> Expr {
        Expr(Arc::new(Node::Var(index)))
    }

    pub fn as_const(&self) -> Option<&BigRational> {
        match self.node() {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_const_zero(&self) -> bool {
        self.as_const().is_some_and(Zero::is_zero)
    }

    pub fn is_const_one(&self) -> bool {
        self.as_const().is_some_and(|c| c.is_one())
    }

    pub fn sum(terms: impl IntoIterator<Item = Expr>) -> Expr {
        let mut constant = <BigRational as Zero>::zero();
        let mut rest = Vec::new();
        for t in terms {
            match t.node() {
                Node::Const(c) => constant += c,
                Node::Sum(inner) => {
                    for u in inner {
                        match u.node() {
                            Node::Const(c) => constant += c,
                            _ => rest.push(u.clone()),
                        }
                    }
                }
                _ => rest.push(t),
            }
        }
        if !Zero::is_zero(&constant) {
            rest.push(Expr::constant(constant));
        }
        match rest.len() {
            0 => Expr::int(0),
            1 => rest.pop().unwrap(),
            _ => Expr(Arc::new(Node::Sum(rest))),
        }
    }

    pub fn product(factors: impl IntoIterator<Item = Expr>) -> Expr {
        let mut constant = <BigRational as One>::one();
        let mut rest = Vec::new();
        for f in factors {
            match f.node() {
                Node::Const(c) => constant *= c,
                Node::Product(inner) => {
                    for u in inner {
                        match u.node() {
                            Node::Const(c) => constant *= c,
                            _ => rest.push(u.clone()),
                        }
                    }
                }
                _ => rest.push(f),
            }
            if Zero::is_zero(&constant) {
                return Expr::int(0);
            }
        }
        if rest.is_empty() {
            return Expr::constant(constant);
        }
        if constant == -<BigRational as One>::one() && rest.len() == 1 {
            return Expr::neg(rest.pop().unwrap());
        }
        if !constant.is_one() {
            rest.insert(0, Expr::constant(constant));
        }
        if rest.len() == 1 {
            rest.pop().unwrap()
        } else {
            Expr(Arc::new(Node::Product(rest)))
        }
    }

    pub fn pow(base: Expr, exp: i64) -> Expr {
        if exp == 0 {
            return Expr::int(1);
        }
        if exp == 1 {
            return base;
        }
        if let Node::Const(c) = base.node() {
            if exp > 0 || !Zero::is_zero(c) {
                let folded = <BigRational as Scalar>::powi(c, exp).expect("nonzero base");
                return Expr::constant(folded);
            }
        }
        if let Node::Pow(inner, e) = base.node() {
            if let Some(total) = e.checked_mul(exp) {
                // (b^e)^k = b^(ek) holds for integer exponents
                return Expr::pow(inner.clone(), total);
            }
        }
        Expr(Arc::new(Node::Pow(base, exp)))
    }

    pub fn neg(e: Expr) -> Expr {
        match e.node() {
            Node::Const(c) => Expr::constant(-c),
            Node::Neg(inner) => inner.clone(),
            _ => Expr(Arc::new(Node::Neg(e))),
        }
    }

    pub fn recip(e: Expr) -> Expr {
        Expr::pow(e, -1)
    }

    pub fn sin(e: Expr) -> Expr {
        Expr(Arc::new(Node::Sin(e)))
    }

    pub fn cos(e: Expr) -> Expr {
        Expr(Arc::new(Node::Cos(e)))
    }

    pub fn exp(e: Expr) -> Expr {
        Expr(Arc::new(Node::Exp(e)))
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        let mut seen = std::collections::HashSet::new();
        let mut best = None;
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.addr()) {
                continue;
            }
            match e.node() {
                Node::Var(i) => best = Some(best.map_or(*i, |b: usize| b.max(*i))),
                Node::Const(_) => {}
                Node::Sum(v) | Node::Product(v) => stack.extend(v.iter().cloned()),
                Node::Pow(b, _) => stack.push(b.clone()),
                Node::Neg(u) | Node::Sin(u) | Node::Cos(u) | Node::Exp(u) => stack.push(u.clone()),
            }
        }
        best
    }

    /// True when the expression contains no `sin`, `cos` or `exp`.
    pub fn is_rational_closed(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.addr()) {
                continue;
            }
            match e.node() {
                Node::Sin(_) | Node::Cos(_) | Node::Exp(_) => return false,
                Node::Sum(v) | Node::Product(v) => stack.extend(v.iter().cloned()),
                Node::Pow(b, _) | Node::Neg(b) => stack.push(b.clone()),
                Node::Const(_) | Node::Var(_) => {}
            }
        }
        true
    }

    /// Partial derivative with respect to coordinate `coord`.
    pub fn diff(&self, coord: usize) -> Expr {
        Differentiator::new().diff(self, coord)
    }

    /// Evaluates at `point`. Compiles a one-off [`Tape`]; use a tape directly
    /// when evaluating many times.
    pub fn eval<S: Scalar>(&self, point: &[S]) -> Result<S, EvalError> {
        let tape = Tape::compile(std::slice::from_ref(self));
        Ok(tape.eval(point)?.pop().expect("one root"))
    }

    /// Substitutes every coordinate `xi` by `values[i]`.
    pub fn substitute(&self, values: &[Expr]) -> Expr {
        let mut memo = std::collections::HashMap::new();
        self.subst_inner(values, &mut memo)
    }

    fn subst_inner(&self, values: &[Expr], memo: &mut std::collections::HashMap<usize, (Expr, Expr)>) -> Expr {
        if let Some((_, out)) = memo.get(&self.addr()) {
            return out.clone();
        }
        let out = match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(i) => values[*i].clone(),
            Node::Sum(v) => Expr::sum(v.iter().map(|t| t.subst_inner(values, memo)).collect::<Vec<_>>()),
            Node::Product(v) => Expr::product(v.iter().map(|t| t.subst_inner(values, memo)).collect::<Vec<_>>()),
            Node::Pow(b, k) => Expr::pow(b.subst_inner(values, memo), *k),
            Node::Neg(u) => Expr::neg(u.subst_inner(values, memo)),
            Node::Sin(u) => Expr::sin(u.subst_inner(values, memo)),
            Node::Cos(u) => Expr::cos(u.subst_inner(values, memo)),
            Node::Exp(u) => Expr::exp(u.subst_inner(values, memo)),
        };
        memo.insert(self.addr(), (self.clone(), out.clone()));
        out
    }
}

// Probe points for evaluation-based equality of expressions.
fn probe_points(dim: usize) -> Vec<Vec<f64>> {
    (0..5)
        .map(|k| {
            (0..dim)
                .map(|i| 0.1237 + 0.1931 * k as f64 - 0.0713 * i as f64 + 0.0117 * (k * i) as f64)
                .collect()
        })
        .collect()
}

impl Coefficient for Expr {
    fn zero() -> Self {
        Expr::int(0)
    }
    fn one() -> Self {
        Expr::int(1)
    }
    fn from_rational(r: &BigRational) -> Self {
        Expr::constant(r.clone())
    }
    fn add(&self, other: &Self) -> Self {
        if self.is_const_zero() {
            return other.clone();
        }
        if other.is_const_zero() {
            return self.clone();
        }
        Expr::sum([self.clone(), other.clone()])
    }
    fn mul(&self, other: &Self) -> Self {
        if self.is_const_zero() || other.is_const_zero() {
            return Expr::int(0);
        }
        if self.is_const_one() {
            return other.clone();
        }
        if other.is_const_one() {
            return self.clone();
        }
        Expr::product([self.clone(), other.clone()])
    }
    fn neg(&self) -> Self {
        Expr::neg(self.clone())
    }
    fn is_zero(&self) -> bool {
        self.is_const_zero()
    }
    fn approx_eq(&self, other: &Self) -> bool {
        if self.ptr_eq(other) {
            return true;
        }
        if let (Some(a), Some(b)) = (self.as_const(), other.as_const()) {
            return a == b;
        }
        let diff = self.sub(other);
        let dim = diff.max_var().map_or(1, |m| m + 1);
        let tape = Tape::compile(&[diff]);
        let mut checked = 0;
        for p in probe_points(dim) {
            match tape.eval::<f64>(&p) {
                Ok(v) => {
                    checked += 1;
                    let scale = 1.0 + self.eval::<f64>(&p).map_or(0.0, f64::abs);
                    if v[0].abs() > 1e-12 * scale {
                        return false;
                    }
                }
                Err(_) => continue,
            }
        }
        checked > 0
    }
    fn invert_matrix(n: usize, entries: &[Self]) -> Result<Vec<Self>, SingularMatrix> {
        let (det, adj) = symbolic_adjugate(n, entries);
        if det.is_const_zero() {
            return Err(SingularMatrix { det_abs: 0.0 });
        }
        let inv_det = Expr::recip(det);
        Ok(adj.into_iter().map(|a| a.mul(&inv_det)).collect())
    }
}

/// Determinant and adjugate of a symbolic matrix by cofactor expansion with
/// memoised minors.
pub fn symbolic_adjugate(n: usize, m: &[Expr]) -> (Expr, Vec<Expr>) {
    use std::collections::HashMap;
    fn minor(
        n: usize,
        m: &[Expr],
        rows: u32,
        cols: u32,
        memo: &mut HashMap<(u32, u32), Expr>,
    ) -> Expr {
        if rows == 0 {
            return Expr::int(1);
        }
        if let Some(e) = memo.get(&(rows, cols)) {
            return e.clone();
        }
        let r = rows.trailing_zeros() as usize;
        let mut terms = Vec::new();
        let mut sign = 1i64;
        for c in 0..n {
            if cols & (1 << c) == 0 {
                continue;
            }
            let entry = &m[r * n + c];
            if !entry.is_const_zero() {
                let sub = minor(n, m, rows & !(1 << r), cols & !(1 << c), memo);
                if !sub.is_const_zero() {
                    let t = entry.mul(&sub);
                    terms.push(if sign > 0 { t } else { t.neg() });
                }
            }
            sign = -sign;
        }
        let out = Expr::sum(terms);
        memo.insert((rows, cols), out.clone());
        out
    }
    let full = (1u32 << n) - 1;
    let mut memo = HashMap::new();
    let det = minor(n, m, full, full, &mut memo);
    let mut adj = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            // adj[i][j] = (-1)^(i+j) * M_{j i}
            let cof = minor(n, m, full & !(1 << j), full & !(1 << i), &mut memo);
            adj.push(if (i + j) % 2 == 0 { cof } else { cof.neg() });
        }
    }
    (det, adj)
}

macro_rules! binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl std::ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(self, rhs)
            }
        }
        impl std::ops::$tr<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(&self, &rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| Coefficient::add(a, b));
binop!(Sub, sub, |a, b| Coefficient::sub(a, b));
binop!(Mul, mul, |a, b| Coefficient::mul(a, b));
binop!(Div, div, |a, b| Coefficient::mul(a, &Expr::recip(b.clone())));

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self.clone())
    }
}

// Printing uses explicit parentheses wherever precedence could be in doubt,
// so that `parse(print(e))` rebuilds an equivalent tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self, f, Prec::Sum)
    }
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
enum Prec {
    Sum,
    Product,
    Atom,
}

fn write_expr(e: &Expr, f: &mut fmt::Formatter<'_>, ctx: Prec) -> fmt::Result {
    let own = match e.node() {
        Node::Sum(_) => Prec::Sum,
        Node::Product(_) | Node::Neg(_) => Prec::Product,
        Node::Const(c) if !c.is_integer() || c.is_negative() => Prec::Product,
        _ => Prec::Atom,
    };
    let paren = own < ctx;
    if paren {
        f.write_str("(")?;
    }
    match e.node() {
        Node::Const(c) => {
            if c.is_integer() {
                write!(f, "{}", c.numer())?
            } else {
                write!(f, "{}/{}", c.numer(), c.denom())?
            }
        }
        Node::Var(i) => write!(f, "x{i}")?,
        Node::Sum(terms) => {
            for (k, t) in terms.iter().enumerate() {
                if k > 0 {
                    f.write_str(" + ")?;
                }
                write_expr(t, f, Prec::Product)?;
            }
        }
        Node::Product(factors) => {
            for (k, t) in factors.iter().enumerate() {
                if k > 0 {
                    f.write_str("*")?;
                }
                write_expr(t, f, Prec::Atom)?;
            }
        }
        Node::Pow(b, k) => {
            write_expr(b, f, Prec::Atom)?;
            if *k < 0 {
                write!(f, "^({k})")?
            } else {
                write!(f, "^{k}")?
            }
        }
        Node::Neg(u) => {
            f.write_str("-")?;
            write_expr(u, f, Prec::Atom)?;
        }
        Node::Sin(u) => write!(f, "sin({u})")?,
        Node::Cos(u) => write!(f, "cos({u})")?,
        Node::Exp(u) => write!(f, "exp({u})")?,
    }
    if paren {
        f.write_str(")")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_folding() {
        let x = Expr::var(0);
        assert!(Expr::sum([Expr::int(0), Expr::int(0)]).is_const_zero());
        assert!(Expr::product([x.clone(), Expr::int(0)]).is_const_zero());
        assert!(Expr::pow(x.clone(), 0).is_const_one());
        assert!(Expr::product([Expr::int(1), x.clone()]).ptr_eq(&x));
        assert!(Expr::neg(Expr::neg(x.clone())).ptr_eq(&x));
    }

    #[test]
    fn adjugate_of_diagonal() {
        let m = vec![Expr::var(0), Expr::int(0), Expr::int(0), Expr::int(4)];
        let inv = Expr::invert_matrix(2, &m).unwrap();
        let p = [BigRational::from_integer(2.into()), BigRational::from_integer(7.into())];
        assert_eq!(inv[0].eval(&p).unwrap(), BigRational::new(1.into(), 2.into()));
        assert!(inv[1].is_const_zero());
        assert_eq!(inv[3].eval(&p).unwrap(), BigRational::new(1.into(), 4.into()));
    }

    #[test]
    fn approx_eq_by_evaluation() {
        let x = Expr::var(0);
        let a = &x * &(&x + &Expr::int(1));
        let b = &(&x * &x) + &x;
        assert!(a.approx_eq(&b));
        assert!(!a.approx_eq(&x));
    }
}
